"""Joint inference for multiple Gaussian graphical models with a shared edge structure.

Node-wise regressions are fitted jointly across classes with a hierarchical
group square-root lasso; bias-corrected pair statistics then feed chi-based
and linear-functional edge tests and a two-step precision estimator.
"""
__version__ = "0.1.0"

from .data import EdgeSet, MultiNetworkSample, PrecisionSet, load_sample, save_sample, true_edge_set
from .errors import NumericalError, RankDeficiencyError, ResidualFloorError, ValidationError
from .evalkit import PairScorePanel, empirical_critical, fpr_fnr, matrix_losses, roc_area, roc_curve
from .hgsl import (
    HGSLProblem,
    HGSLSolution,
    LambdaConfig,
    SolverOptions,
    hgsl_solve,
    kkt_residual,
    lambda_simulated,
    lambda_theoretical,
    objective,
    solve_batch,
)
from .inference import (
    TestConfig,
    TestResult,
    estimate_precision,
    run_test,
    support_recover,
    test_all_pairs,
    tune_alpha,
    u_statistic,
    v_statistic,
    validation_loss,
)
from .nodewise import NodewiseFit, PairTable, fit_all_nodes, fit_node, oracle_fits, pair_statistic
from .quantiles import chi_isf, chi_quantile, normal_quantile
from .simgen import SimConfig, gen_model1, gen_model2, sample_from, simulate

__all__ = [
    "EdgeSet",
    "HGSLProblem",
    "HGSLSolution",
    "LambdaConfig",
    "MultiNetworkSample",
    "NodewiseFit",
    "NumericalError",
    "PairScorePanel",
    "PairTable",
    "PrecisionSet",
    "RankDeficiencyError",
    "ResidualFloorError",
    "SimConfig",
    "SolverOptions",
    "TestConfig",
    "TestResult",
    "ValidationError",
    "chi_isf",
    "chi_quantile",
    "empirical_critical",
    "estimate_precision",
    "fit_all_nodes",
    "fit_node",
    "fpr_fnr",
    "gen_model1",
    "gen_model2",
    "hgsl_solve",
    "kkt_residual",
    "lambda_simulated",
    "lambda_theoretical",
    "load_sample",
    "matrix_losses",
    "normal_quantile",
    "objective",
    "oracle_fits",
    "pair_statistic",
    "roc_area",
    "roc_curve",
    "run_test",
    "sample_from",
    "save_sample",
    "simulate",
    "solve_batch",
    "support_recover",
    "test_all_pairs",
    "true_edge_set",
    "tune_alpha",
    "u_statistic",
    "v_statistic",
    "validation_loss",
]
