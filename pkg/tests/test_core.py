import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from topoflock.core import (
    AgentState,
    ConfigError,
    ConstantRates,
    DensityRates,
    Dist,
    ForceParams,
    InitGroup,
    Label,
    ScenarioConfig,
    SimParams,
    SourceSpec,
    SwarmState,
    TargetRates,
    config_text,
    initial_state,
    make_rng,
    micro_neighbor_count,
    parse_config_text,
    subsample_neighbor_count,
    validate_config,
)

TABLE_2D = """
mode = micro
n_particles = 400
rho_star = 0.01
dt = 0.01
t_final = 500
seed = 42
c_rep = 100
c_ali = 12
c_att = 0.7
c_v = 5
s = 10
r_bar = 200
r_under = 1
eps_sig = 200
rates = constant
q_fl = 2e-4
q_lf = 4e-3
"""


class TestMakeRng:
    def test_same_key_same_sequence(self):
        a = make_rng(42, 0).random(100)
        b = make_rng(42, 0).random(100)
        assert np.array_equal(a, b)

    def test_stream_separation(self):
        a = make_rng(42, 0).random(100)
        b = make_rng(42, 1).random(100)
        assert not np.array_equal(a, b)

    def test_seed_separation(self):
        a = make_rng(1, 0).random(100)
        b = make_rng(2, 0).random(100)
        assert not np.array_equal(a, b)

    def test_step_substreams_differ(self):
        a = make_rng(7, 1, 0).random(10)
        b = make_rng(7, 1, 1).random(10)
        assert not np.array_equal(a, b)


class TestConfigValidation:
    def test_table_row_accepted(self):
        cfg = parse_config_text(TABLE_2D)
        assert cfg.forces == ForceParams(c_rep=100, c_ali=12, c_att=0.7, c_v=5,
                                         s=10, r_bar=200, r_under=1, eps_sig=200)
        assert cfg.rates == ConstantRates(2e-4, 4e-3)
        assert micro_neighbor_count(cfg.sim.rho_star, cfg.sim.n_particles) == 4

    def test_rho_star_zero_rejected(self):
        with pytest.raises(ConfigError, match="rho_star"):
            parse_config_text(TABLE_2D.replace("rho_star = 0.01", "rho_star = 0"))

    def test_meso_constraint(self):
        meso = ("mode = meso\nn_particles = 100\nn_sub = 50\nrho_star = 0.01\n"
                "eps_scale = 0.01\ndt = {dt}\nt_final = 1\n")
        cfg = parse_config_text(meso.format(dt=1))
        assert cfg.sim.eps_scale == pytest.approx(cfg.sim.rho_star * cfg.sim.dt)
        with pytest.raises(ConfigError, match="meso constraint"):
            parse_config_text(meso.format(dt=0.5))

    def test_n_sub_exceeding_population_rejected(self):
        text = ("mode = meso\nn_particles = 100\nn_sub = 101\nrho_star = 0.01\n"
                "eps_scale = 0.01\ndt = 1\nt_final = 1\n")
        with pytest.raises(ConfigError, match="n_sub"):
            parse_config_text(text)

    def test_source_dimension_mismatch(self):
        with pytest.raises(ConfigError, match="dim"):
            parse_config_text(TABLE_2D + "sources = 1 2 3\n")

    def test_negative_coefficient_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text(TABLE_2D.replace("c_att = 0.7", "c_att = -1"))

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            parse_config_text(TABLE_2D + "banana = 1\n")

    def test_target_band_ordering(self):
        text = ("mode = micro\nn_particles = 10\nrho_star = 0.5\ndt = 0.1\n"
                "t_final = 1\nrates = target\ntarget = 0 0\n"
                "alpha_hi = 0.2\nalpha_lo = 0.6\n")
        with pytest.raises(ConfigError, match="alpha"):
            parse_config_text(text)

    def test_micro_needs_one_neighbor(self):
        with pytest.raises(ConfigError, match="round"):
            parse_config_text(TABLE_2D.replace("n_particles = 400",
                                               "n_particles = 10"))


class TestRoundTrip:
    def test_table_config_round_trips(self):
        cfg = parse_config_text(TABLE_2D)
        assert parse_config_text(config_text(cfg)) == cfg

    def test_rich_config_round_trips(self):
        cfg = ScenarioConfig(
            dim=3,
            sim=SimParams(mode="meso", n_particles=1000, rho_star=0.05,
                          dt=0.2, t_final=10.0, seed=9, n_sub=100,
                          eps_scale=0.05 * 0.2),
            forces=ForceParams(c_rep=1.5, c_ali=0.25, c_att=0.125, c_v=2.0,
                               s=3.5, c_src=0.75, c_ctr=4.0, r_bar=350.0,
                               r_under=20.0, eps_sig=150.0),
            sources=SourceSpec(((200.0, 500.0, 500.0), (800.0, 500.0, 500.0))),
            rates=DensityRates(q_f=3e-3, q_l=4e-3, delta=1e3),
            init_groups=(
                InitGroup(0.875, Label.FOLLOWER, Dist("gaussian", 550.0, 10.0),
                          Dist("gaussian", 0.0, 1.0)),
                InitGroup(0.125, Label.LEADER, Dist("uniform", 700.0, 900.0),
                          Dist("gaussian", 0.0, 2.0)),
            ),
            density_eval="subsampled",
            label_switch="before",
        )
        validate_config(cfg)
        assert parse_config_text(config_text(cfg)) == cfg

    @given(
        rho=st.floats(0.05, 1.0),
        dt=st.floats(1e-6, 10.0, allow_nan=False, allow_infinity=False),
        coeff=st.floats(0.0, 1e6),
        seed=st.integers(0, 2**63 - 1),
        mu=st.floats(-1e6, 1e6),
        sigma=st.floats(0.0, 1e3),
    )
    def test_round_trip_is_identity_on_floats(self, rho, dt, coeff, seed, mu, sigma):
        cfg = ScenarioConfig(
            dim=2,
            sim=SimParams(mode="micro", n_particles=10, rho_star=rho, dt=dt,
                          t_final=dt * 4, seed=seed),
            forces=ForceParams(c_rep=coeff, s=1.0, eps_sig=1.0),
            init_groups=(InitGroup(1.0, Label.FOLLOWER,
                                   Dist("gaussian", mu, sigma),
                                   Dist("gaussian", 0.0, 1.0)),),
        )
        assert parse_config_text(config_text(cfg)) == cfg

    def test_target_rates_round_trip(self):
        text = ("mode = micro\nn_particles = 100\nrho_star = 0.1\ndt = 0.01\n"
                "t_final = 1\nrates = target\ntarget = 300 500\n"
                "alpha_hi = 0.7\nalpha_lo = 0.3\n")
        cfg = parse_config_text(text)
        assert cfg.rates == TargetRates(target=(300.0, 500.0),
                                        alpha_hi=0.7, alpha_lo=0.3)
        assert parse_config_text(config_text(cfg)) == cfg


class TestStateTypes:
    def test_agent_state_dimension_check(self):
        with pytest.raises(ValueError):
            AgentState(np.zeros(2), np.zeros(3), Label.FOLLOWER)

    def test_swarm_state_shapes(self):
        with pytest.raises(ValueError):
            SwarmState(np.zeros((4, 2)), np.zeros((4, 2)), np.zeros(3))

    def test_fractions_partition(self):
        state = SwarmState(np.zeros((4, 2)), np.zeros((4, 2)),
                           np.array([0, 1, 1, 0]))
        assert state.follower_fraction() + state.leader_fraction() == 1.0

    def test_check_finite_raises(self):
        state = SwarmState(np.full((2, 2), np.inf), np.zeros((2, 2)),
                           np.zeros(2, dtype=np.int64), step=7)
        with pytest.raises(Exception, match="step 7"):
            state.check_finite()


class TestInitialState:
    def test_group_counts_and_labels(self):
        text = ("mode = micro\nn_particles = 8\nrho_star = 0.5\ndt = 0.1\n"
                "t_final = 1\ninit = 0.75 follower gaussian(0,1) gaussian(0,1);"
                " 0.25 leader gaussian(10,1) gaussian(0,1)\n")
        cfg = parse_config_text(text)
        state = initial_state(cfg)
        assert state.n == 8
        assert int((state.labels == Label.LEADER).sum()) == 2

    def test_deterministic(self):
        cfg = parse_config_text(TABLE_2D)
        a, b = initial_state(cfg), initial_state(cfg)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.velocities, b.velocities)


class TestNeighborCounts:
    def test_micro_rounding(self):
        assert micro_neighbor_count(0.01, 400) == 4
        assert micro_neighbor_count(0.01, 449) == 4
        assert micro_neighbor_count(0.01, 451) == 5

    def test_subsample_ceiling(self):
        assert subsample_neighbor_count(0.01, 100) == 1
        assert subsample_neighbor_count(0.01, 101) == 2
        assert subsample_neighbor_count(0.35, 10_000) == 3500
        assert subsample_neighbor_count(1.0, 7) == 7

    @given(rho=st.floats(1e-6, 1.0), n=st.integers(1, 10_000))
    def test_subsample_ball_carries_target_mass(self, rho, n):
        k = subsample_neighbor_count(rho, n)
        assert k >= rho * n - 1e-9
        assert k <= n
