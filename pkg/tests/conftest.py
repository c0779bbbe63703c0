import hypothesis

# numba warmup can blow the default deadline on first-compiled paths
hypothesis.settings.register_profile(
    "topoflock", deadline=None, max_examples=60, derandomize=True)
hypothesis.settings.load_profile("topoflock")
