"""Python bindings for the kmtdep C++ library."""

from ._kmtdep import (
    CausalProcess,
    ConfigError,
    ExperimentConfig,
    InnovationLaw,
    ThetaModel,
    analytic_profile,
    check_conditions,
    check_conditions_cmd,
    clt_check,
    depmeasure,
    estimate_delta,
    estimate_profile,
    evaluate_path,
    make_ar1,
    make_arch1,
    make_doubling_identity,
    make_iid,
    make_linear,
    make_ma1,
    make_tar,
    mk_schedule,
    parse_n_grid,
    report,
    run_sip_experiment,
    simulate,
    sip_experiment,
    tau_p,
    truncated_moment_series,
    zoo,
)

__all__ = [name for name in dir() if not name.startswith("_")]
