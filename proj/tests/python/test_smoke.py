import math

import numpy as np
import pytest

import kmtdep


def test_tau_p_closed_form():
    assert kmtdep.tau_p(4.0) == 1.0
    assert kmtdep.tau_p(2.0) == 0.0


def test_schedule_value():
    assert kmtdep.mk_schedule("iii", 3.0, k=10) == 14


def test_path_is_stationary_ar1():
    proc = kmtdep.make_ar1(0.5)
    x = kmtdep.evaluate_path(proc, 20000, seed=3)
    assert isinstance(x, np.ndarray) and x.shape == (20000,)
    assert abs(x.var() - 4.0 / 3.0) < 0.1
    lag1 = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(lag1 - 0.5) < 0.05


def test_profile_matches_oracle():
    proc = kmtdep.make_ar1(0.5)
    prof = kmtdep.estimate_profile(proc, 2.0, seed=1, replications=20000, lag_budget=32)
    z = np.abs(prof.delta[:6] - math.sqrt(2.0) * 0.5 ** np.arange(6)) / prof.delta_se[:6]
    assert z.max() < 4.0
    exact = kmtdep.analytic_profile(proc, 2.0, 32)
    assert exact.theta[0] == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-9)


def test_conditions():
    assert kmtdep.check_conditions(kmtdep.ThetaModel.geometric(1.0, 0.5), 4.0, "ii").all_pass
    flat = kmtdep.check_conditions(kmtdep.ThetaModel.constant(1.0), 4.0, "ii")
    assert not flat.all_pass
    assert "theta_series" in [c.label for c in flat.checks if not c.passed]


def test_truncated_moment_series():
    pareto = kmtdep.InnovationLaw.parse("centered_pareto", 2.5)
    assert kmtdep.truncated_moment_series(pareto, 3.0, 4.0).tail_verdict == "diverges"
    normal = kmtdep.InnovationLaw.parse("standard_normal")
    assert kmtdep.truncated_moment_series(normal, 3.0, 4.0).tail_verdict == "converges"


def test_config_errors_name_the_key():
    with pytest.raises(kmtdep.ConfigError, match="experiment.bogus"):
        kmtdep.ExperimentConfig.from_ini("[experiment]\nbogus = 1\n")
    cfg = kmtdep.ExperimentConfig.from_ini("[experiment]\np = 3.5\n")
    assert cfg.p == 3.5
    assert kmtdep.ExperimentConfig.from_ini(cfg.to_ini()).to_ini() == cfg.to_ini()


def test_sip_experiment_small(tmp_path):
    cfg = kmtdep.ExperimentConfig()
    cfg.process_kind = "iid"
    cfg.schedule = "constant"
    cfg.n_grid = kmtdep.parse_n_grid("3^4..3^7")
    cfg.replications = 8
    cfg.block_law_samples = 2000
    cfg.out = str(tmp_path)
    exp = kmtdep.run_sip_experiment(cfg)
    assert len(exp.rate_D.median) == 4
    assert math.isfinite(exp.rate_D.slope)
    rc, _ = kmtdep.sip_experiment(cfg)
    assert rc == 0
    assert (tmp_path / "sip_errors.csv").exists()


def test_invalid_combination_rejected():
    with pytest.raises(kmtdep.ConfigError, match="schedule.case"):
        kmtdep.ExperimentConfig.from_ini("[experiment]\np = 4\n")
