"""Outcome-disparity controlled policy learning from observational data."""

from .constraints import eqb_curves, eqb_value, frechet_bounds, modbrk_value, tight_bounds_point
from .dataio import Dataset, GeneratorSpec, bootstrap, generate_ihdp_surrogate, generate_nyc, load_dataset, save_dataset
from .errors import (ConfigError, ContractError, DatasetParseError, FairpolError, GenerationError, SchemaError,
                     TrainingError)
from .estimators import ClipTable, PolicySpec, clip_interval, ipw_utility, plugin_utility
from .lagrangian import LagrangianState, augmented_objective, multiplier_update, penalty_phi
from .lpsolve import build_lp_binary, build_lp_general, enumerate_oracle, simplex_solve
from .pipeline import ExperimentConfig, phase1_train, run_baselines, slack_sweep

__version__ = "0.1.0"
