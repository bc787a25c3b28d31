r"""sdreg: learning semidefinite-representable regularizers from data.

Given data points believed to be sparse combinations of a few atoms,
this package learns a regularizer whose unit ball is the image of the
nuclear-norm ball in R^{q x q} under a linear map L -- a
semidefinite-representable convex body -- by alternating between
low-rank factor updates, a global least-squares map update, and
Operator Sinkhorn normalization of the map.  A classical
dictionary-learning analog (unit ball = image of the l1 ball) is
included for comparison, along with the diagnostics that govern local
convergence, a Monte-Carlo surrogate distance between regularizers,
proximal denoising, and a CLI (``sdreg``) covering the full pipeline.
"""

from .exceptions import (SdregError, ConfigError, FormatError,
                         NumericalError, DivergenceError, StepSizeError,
                         SingularOperatorError)
from .seeds import seed_sequence, substream
from .linalg import (LinearMapL, SvdResult, TangentSpace, vec, unvec,
                     svd, truncate_rank, tangent_space_of,
                     tangent_project, apply_map, adjoint_map, covariance,
                     vectorization_map, compose_conjugation, factor_array)
from .scaling import (ScalingResult, NormalizationReport, StabilityResult,
                      matrix_sinkhorn, operator_sinkhorn_normalize,
                      normalization_residual, t_operator_apply,
                      t_operator_adjoint_apply, stability_check)
from .solvers import (SolverOptions, SolveTrace, hard_threshold,
                      soft_threshold, svt, svp, iht_sparse,
                      nuclear_prox_solve, lasso_solve)
from .ensembles import (CovarianceStats, EnsembleStats, HaarLowRankSpec,
                        gen_gaussian_map, gen_haar_lowrank, gen_dataset,
                        covariance_stats, omega, rip_estimate,
                        ensemble_stats)
from .learning import (LearnOptions, LearnTrace, RegularizerModel,
                       MapUpdateInfo, update_factors, update_map,
                       learn_semidefinite, learn_polyhedral,
                       column_normalize, preprocess_data)
from .evaluate import (DistProbeSet, DenoiseResult, DenoiseTable,
                       probe_set, dist, recovery_success,
                       prox_denoise_semidefinite, prox_denoise_polyhedral,
                       representation_complexity, snr, denoise_experiment)
from .io import (save_model, load_model, save_data, load_data,
                 save_factors, load_factors, data_to_csv, data_from_csv,
                 write_csv)
from .config import load_config, validate_config

__version__ = "0.1.0"

__all__ = [
    "SdregError", "ConfigError", "FormatError", "NumericalError",
    "DivergenceError", "StepSizeError", "SingularOperatorError",
    "seed_sequence", "substream",
    "LinearMapL", "SvdResult", "TangentSpace", "vec", "unvec", "svd",
    "truncate_rank", "tangent_space_of", "tangent_project", "apply_map",
    "adjoint_map", "covariance", "vectorization_map",
    "compose_conjugation", "factor_array",
    "ScalingResult", "NormalizationReport", "StabilityResult",
    "matrix_sinkhorn", "operator_sinkhorn_normalize",
    "normalization_residual", "t_operator_apply", "t_operator_adjoint_apply",
    "stability_check",
    "SolverOptions", "SolveTrace", "hard_threshold", "soft_threshold",
    "svt", "svp", "iht_sparse", "nuclear_prox_solve", "lasso_solve",
    "CovarianceStats", "EnsembleStats", "HaarLowRankSpec",
    "gen_gaussian_map", "gen_haar_lowrank", "gen_dataset",
    "covariance_stats", "omega", "rip_estimate", "ensemble_stats",
    "LearnOptions", "LearnTrace", "RegularizerModel", "MapUpdateInfo",
    "update_factors", "update_map", "learn_semidefinite",
    "learn_polyhedral", "column_normalize", "preprocess_data",
    "DistProbeSet", "DenoiseResult", "DenoiseTable", "probe_set", "dist",
    "recovery_success", "prox_denoise_semidefinite",
    "prox_denoise_polyhedral", "representation_complexity", "snr",
    "denoise_experiment",
    "save_model", "load_model", "save_data", "load_data", "save_factors",
    "load_factors", "data_to_csv", "data_from_csv", "write_csv",
    "load_config", "validate_config",
    "__version__",
]
