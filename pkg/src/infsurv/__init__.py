"""Local Cox-surrogate explanations of survival models via sup-norm fitting."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .core import (
    StepFunction, SurvivalDataset, TimeGrid, build_time_grid, chf_to_sf,
    concordance_index, kaplan_meier, nelson_aalen,
)
from .cox import CoxModel, cox_gradient, cox_partial_loglik, cox_predict_chf, fit_cox
from .datagen import GenConfig, generate_cox_weibull, train_test_split
from .dataio import (
    DatasetSchema, FeatureColumn, LoadReport, load_builtin, load_csv, load_model,
    read_dataset_csv, read_report, save_model, write_dataset_csv, write_report, write_step_svg,
)
from .errors import *  # noqa: F401,F403
from .evaluation import rmse, run_small_n_study, select_best_mean_worst, sf_l2_distance
from .explain import (
    DegenerateNeighborhood, ExplainConfig, ExplanationResult, Neighborhood,
    ProportionalHazardsOracle, assemble_lp, compute_qr, explain_batch, explain_inf,
    explain_l2, log_chf_intervals, neighbor_weights, sample_ball, surrogate_chf,
)
from .lp import LpProblem, LpSolution, LpStatus, solve_lp
from .rsf import (
    RandomSurvivalForest, RSFParams, SurvivalTree, fit_rsf, log_rank_statistic,
    oob_concordance, rsf_predict_chf,
)
