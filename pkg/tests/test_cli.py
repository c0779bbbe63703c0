import subprocess
import sys

import pytest

from topoflock.harness.cli import main

MICRO_CFG = """
mode = micro
n_particles = 40
rho_star = 0.1
dt = 0.02
t_final = 0.4
seed = 13
c_rep = 1
c_ali = 2
c_att = 0.1
rates = constant
q_fl = 0.05
q_lf = 0.1
init = 1.0 follower gaussian(0,5) gaussian(0,1)
"""

MESO_CFG = """
mode = meso
n_particles = 120
n_sub = 30
rho_star = 0.1
eps_scale = 0.05
dt = 0.5
t_final = 5
seed = 13
c_ali = 1
init = 1.0 follower gaussian(0,5) gaussian(0,1)
"""

VAL_SPEC = """
n_particles = 200
rho_star = 0.35
p = 100
eps = 1 0.1
repetitions = 2
seed = 4
"""


@pytest.fixture
def micro_cfg(tmp_path):
    path = tmp_path / "micro.cfg"
    path.write_text(MICRO_CFG)
    return path


class TestRunCommand:
    def test_outputs_and_determinism(self, micro_cfg, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(micro_cfg), "--out", str(out1)]) == 0
        assert main(["run", "--config", str(micro_cfg), "--out", str(out2)]) == 0
        for name in ("snapshots.csv", "fractions.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_worker_count_does_not_change_bytes(self, micro_cfg, tmp_path):
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        main(["run", "--config", str(micro_cfg), "--out", str(out1),
              "--workers", "1"])
        main(["run", "--config", str(micro_cfg), "--out", str(out2),
              "--workers", "3"])
        assert (out1 / "snapshots.csv").read_bytes() == \
            (out2 / "snapshots.csv").read_bytes()

    def test_meso_mode_and_fractions_header(self, tmp_path):
        cfg = tmp_path / "meso.cfg"
        cfg.write_text(MESO_CFG)
        out = tmp_path / "m"
        assert main(["run", "--config", str(cfg), "--out", str(out),
                     "--snapshot-every", "5"]) == 0
        lines = (out / "fractions.csv").read_text().splitlines()
        assert lines[0] == "step,time,follower_fraction,leader_fraction"
        assert len(lines) == 1 + 3  # steps 0, 5, 10

    def test_seed_override_changes_output(self, micro_cfg, tmp_path):
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        main(["run", "--config", str(micro_cfg), "--out", str(out1)])
        main(["run", "--config", str(micro_cfg), "--out", str(out2),
              "--seed", "99"])
        assert (out1 / "snapshots.csv").read_bytes() != \
            (out2 / "snapshots.csv").read_bytes()

    def test_bad_config_exits_nonzero(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(MICRO_CFG.replace("rho_star = 0.1", "rho_star = 0"))
        rc = main(["run", "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_missing_file_exits_nonzero(self, tmp_path, capsys):
        rc = main(["run", "--config", str(tmp_path / "nope.cfg"),
                   "--out", str(tmp_path / "x")])
        assert rc == 1


class TestValidateCommand:
    def test_outputs(self, tmp_path):
        spec = tmp_path / "val.cfg"
        spec.write_text(VAL_SPEC)
        out = tmp_path / "v"
        assert main(["validate", "--spec", str(spec), "--out", str(out)]) == 0
        lines = (out / "validation_errors.csv").read_text().splitlines()
        assert lines[0] == "eps,p,n_reps,mean_l2_error,std_l2_error"
        assert len(lines) == 3
        raw = (out / "validation_errors_raw.csv").read_text().splitlines()
        assert raw[0] == "eps,p,rep,l2_error"
        assert len(raw) == 1 + 2 * 2


class TestBenchCommand:
    def test_outputs(self, tmp_path):
        out = tmp_path / "b"
        rc = main(["bench", "--sizes", "256,512", "--rho", "0.05",
                   "--p", "10", "--out", str(out), "--dim", "1"])
        assert rc == 0
        lines = (out / "benchmark_costs.csv").read_text().splitlines()
        assert lines[0].startswith("n,rho_star,p,n_sub,k_tree")
        assert len(lines) == 3

    def test_single_size_rejected(self, tmp_path, capsys):
        rc = main(["bench", "--sizes", "256", "--rho", "0.05", "--p", "10",
                   "--out", str(tmp_path / "b")])
        assert rc == 1
        assert "two sizes" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "micro.cfg"
    cfg.write_text(MICRO_CFG)
    proc = subprocess.run(
        [sys.executable, "-m", "topoflock", "run", "--config", str(cfg),
         "--out", str(tmp_path / "out")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "snapshots.csv").exists()
