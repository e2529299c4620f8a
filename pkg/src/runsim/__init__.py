"""Training-run simulators fitted from recorded loss trajectories.

The package fits small per-example weight sets to logs of past
training runs, then predicts the full test-loss trajectory a new
run's example ordering would produce, without touching the model
that generated the logs.  Counterfactual edits to a run's curriculum
(drop an example, duplicate it, reorder steps) become cheap replays
of the fitted update rule.
"""

from .errors import (
    ConditioningError,
    ConfigError,
    DataError,
    DivergenceError,
    EditError,
    FittingError,
    NoDataError,
    NumericError,
    ParseError,
    RunSimError,
    UnderdeterminedError,
    UndefinedStatisticError,
    UnsupportedSettingError,
    ValidationError,
)
from .runs import Curriculum, LossTrajectory, Run, RunSet, load_run_log, save_run_log
from .simparams import SimulatorParams, SimulatorVariant, load_params_doc, save_params_doc
from .fitting import fit_simulator, select_lambda, check_identifiability
from .rollout import SimulatedTrajectory, apply_edits, simulate, what_if
from .analysis import all_steps_mse, compare_methods, cost_model, final_step_spearman

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Curriculum",
    "LossTrajectory",
    "Run",
    "RunSet",
    "load_run_log",
    "save_run_log",
    "SimulatorParams",
    "SimulatorVariant",
    "load_params_doc",
    "save_params_doc",
    "fit_simulator",
    "select_lambda",
    "check_identifiability",
    "SimulatedTrajectory",
    "simulate",
    "apply_edits",
    "what_if",
    "all_steps_mse",
    "final_step_spearman",
    "compare_methods",
    "cost_model",
    "RunSimError",
    "ParseError",
    "ValidationError",
    "ConfigError",
    "DataError",
    "NoDataError",
    "UnderdeterminedError",
    "UndefinedStatisticError",
    "UnsupportedSettingError",
    "NumericError",
    "DivergenceError",
    "ConditioningError",
    "EditError",
    "FittingError",
]
