"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Run configuration and logging setup.

Config files are flat `key=value` lines with dotted keys and `#` comments.
They are read with configparser under a synthetic section header, checked
against `FIELD_CONFIG` and exposed through a `RunConfig` namespace.

Key features:
- Load, validate and save run configs
- Write a commented default template when the file is missing
- Resolve the seed from the command line, the config or FAIRPOL_SEED
- Map configs onto GeneratorSpec and ExperimentConfig

Usage:
- Use `load_config()` to read a config file.
- Use `generator_spec_from_config()` / `experiment_from_config()` to build run objects.
- Call `setup_logging()` once at startup.
"""

import configparser
import logging
import math
import os
from dataclasses import replace
from types import SimpleNamespace

from .dataio import GeneratorSpec
from .errors import ConfigError, ContractError
from .estimators import ClipBinning
from .field_settings import FIELD_CONFIG, REQUIRED_KEYS
from .lagrangian import LagrangianState
from .pipeline import default_experiment

SECTION_HEADER = "fairpol"
DEFAULT_SECTION = "run"
SEED_ENV = "FAIRPOL_SEED"
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


class RunConfig:
    """
    Parsed run configuration.

    Values are stored per section in SimpleNamespace objects; only keys set
    in the file are present, `get` falls back to the FIELD_CONFIG default.
    """
    def __init__(self):
        self.config = SimpleNamespace()

    def load(self, config_dict):
        """
        Load configuration from a {section: {key: value}} dictionary.

        Args:
            config_dict (dict): Already converted values.
        """
        self.config = SimpleNamespace(**{section: SimpleNamespace(**values)
                                         for section, values in config_dict.items()})

    def set(self, section, key, value):
        if not hasattr(self.config, section):
            setattr(self.config, section, SimpleNamespace())
        setattr(getattr(self.config, section), key, value)

    def has(self, section, key):
        return hasattr(getattr(self.config, section, None), key)

    def get(self, section, key, fallback=None):
        """
        Get a configuration value.

        Args:
            section (str): The section of the configuration.
            key (str): The key within the section.
            fallback: Returned when the key is neither set nor has a registry default.

        Returns:
            The configured value, the FIELD_CONFIG default, or fallback.
        """
        try:
            return getattr(getattr(self.config, section), key)
        except AttributeError:
            default = FIELD_CONFIG.get(dotted_key(section, key), {}).get('default')
            return fallback if default is None else default

    def items(self):
        """Dotted key -> value for every key set in the file."""
        return {dotted_key(section, key): value
                for section, values in sorted(vars(self.config).items())
                for key, value in sorted(vars(values).items())}

    def __str__(self):
        return str(self.items())


def split_key(key):
    section, _, name = key.partition('.')
    return (section, name) if name else (DEFAULT_SECTION, section)


def dotted_key(section, key):
    return key if section == DEFAULT_SECTION else f"{section}.{key}"


DEFAULT_CONFIG = """# fairpol run configuration: key=value, dotted keys, '#' comments
seed = 0
logging.level = INFO
logging.file = fairpol.log

# data.source: nyc | ihdp | file
data.source = nyc
# data.path = data.csv
generator.n = 20000
generator.outcome_noise_sd = 1.0

# experiment.constraint: modbrk | eqb
experiment.constraint = modbrk
experiment.epsilons = 0, 0.01, 0.1, 1, inf
# experiment.seeds = 0, 1, 2
experiment.faithful = false

# phase2.epochs = 300
# phase2.lr = 0.001
lagrangian.penalty_mu = 1.0
lagrangian.growth = 1.5
lagrangian.update_period = 50
clip.eta = 1.0
"""


def create_default_config(config_path):
    """
    Write the commented default template.

    Args:
        config_path (str): Path to the configuration file.
    """
    with open(config_path, 'w', encoding='utf-8') as config_file:
        config_file.write(DEFAULT_CONFIG)
    logging.info(f"Created default config file at {config_path}")


def _parse_bool(key, raw):
    value = raw.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"{key}: expected a boolean, got '{raw}'", key=key)


def convert_value(key, raw):
    """
    Convert a raw string according to FIELD_CONFIG.

    Raises:
        ConfigError: Unknown key or a value of the wrong type.
    """
    if key not in FIELD_CONFIG:
        raise ConfigError(f"unknown config key '{key}'", key=key)
    field = FIELD_CONFIG[key]
    kind = field['type']
    raw = raw.strip()
    try:
        if kind == 'int':
            return int(raw)
        if kind == 'float':
            return float(raw)
        if kind == 'bool':
            return _parse_bool(key, raw)
        if kind == 'str':
            return raw or None
        if kind == 'choice':
            if raw not in field['options']:
                raise ConfigError(f"{key}: '{raw}' is not one of {field['options']}", key=key)
            return raw
        if kind == 'float_list':
            return [float(v) for v in raw.split(',') if v.strip()]
        if kind == 'int_list':
            return [int(v) for v in raw.split(',') if v.strip()]
    except ValueError as e:
        raise ConfigError(f"{key}: invalid {kind} value '{raw}'", key=key) from e
    raise ConfigError(f"{key}: unsupported field type '{kind}'", key=key)


def parse_config_text(text):
    """
    Parse config text into a RunConfig.

    Args:
        text (str): key=value lines.

    Returns:
        RunConfig: The validated configuration.
    """
    parser = configparser.ConfigParser(delimiters=('=',), comment_prefixes=('#',),
                                       inline_comment_prefixes=('#',), interpolation=None)
    try:
        parser.read_string(f"[{SECTION_HEADER}]\n{text}")
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate config key '{e.option}'", key=e.option) from e
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config: {e}") from e

    run_config = RunConfig()
    for key, raw in parser.items(SECTION_HEADER):
        section, name = split_key(key)
        run_config.set(section, name, convert_value(key, raw))
    return run_config


def load_config(config_path, command=None):
    """
    Load and validate a config file.

    A missing file is replaced by the default template and reported as a
    ConfigError so the caller can stop and let the user edit it.

    Args:
        config_path (str): Path to the configuration file.
        command (str): Subcommand whose REQUIRED_KEYS must be present.

    Returns:
        RunConfig: The loaded configuration.
    """
    if not os.path.exists(config_path):
        logging.warning(f"Config file not found at {config_path}. Creating default config.")
        create_default_config(config_path)
        raise ConfigError(f"no config at {config_path}; a default was written there, edit it and rerun")
    with open(config_path, 'r', encoding='utf-8') as f:
        run_config = parse_config_text(f.read())
    if command is not None:
        check_required(run_config, command)
    logging.debug(f"Loaded config from {config_path}: {run_config}")
    return run_config


def check_required(run_config, command):
    missing = [key for key in REQUIRED_KEYS.get(command, []) if not run_config.has(*split_key(key))]
    if missing:
        raise ConfigError(f"missing required config key(s) for {command}: {', '.join(missing)}", key=missing[0])


def _format_value(value):
    if isinstance(value, (list, tuple)):
        return ', '.join(_format_value(v) for v in value)
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return str(value)


def save_config(run_config, config_path):
    """Write a RunConfig back as key=value lines."""
    with open(config_path, 'w', encoding='utf-8') as f:
        for key, value in run_config.items().items():
            if value is not None:
                f.write(f"{key} = {_format_value(value)}\n")
    logging.info(f"Configuration saved to {config_path}")


def setup_logging(log_file='fairpol.log', level='INFO'):
    """
    Clear the log file and route all logging to it.

    Args:
        log_file (str): Log file path.
        level (str): Level name from LOG_LEVELS.
    """
    with open(log_file, 'w', encoding='utf-8'):
        pass
    logging.basicConfig(filename=log_file, level=getattr(logging, level, logging.INFO),
                        format=LOG_FORMAT, force=True)
    logging.getLogger('matplotlib').setLevel(logging.WARNING)


def resolve_seed(cli_seed=None, run_config=None):
    """--seed > config `seed` > FAIRPOL_SEED > 0."""
    if cli_seed is not None:
        return int(cli_seed)
    if run_config is not None and run_config.has(DEFAULT_SECTION, 'seed'):
        return int(run_config.get(DEFAULT_SECTION, 'seed'))
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV} must be an integer, got '{env}'", key=SEED_ENV) from e
    return 0


def generator_spec_from_config(run_config, seed):
    """GeneratorSpec from `generator.*` keys."""
    kwargs = {name: run_config.get('generator', name)
              for name in ('n', 'action_noise_mean', 'action_noise_sd', 'outcome_noise_mean',
                           'outcome_noise_sd', 'group_rate', 'counselor_scale', 'w_sx', 'w_x',
                           'beta', 'gamma', 'surrogate_hidden', 'surrogate_epochs', 'surrogate_lr')}
    try:
        return GeneratorSpec(seed=seed, **kwargs)
    except ContractError as e:
        raise ConfigError(f"invalid generator settings: {e}") from e


def _train_overrides(run_config, section, names):
    return {name: run_config.get(section, name) for name in names if run_config.has(section, name)}


def experiment_from_config(run_config, seed, faithful=None):
    """
    ExperimentConfig for the configured constraint and data source.

    Keys left unset keep the experiment defaults; faithful (or
    `experiment.faithful`) selects the full training settings.
    """
    constraint = run_config.get('experiment', 'constraint')
    source = run_config.get('data', 'source')
    faithful = run_config.get('experiment', 'faithful') if faithful is None else faithful
    seeds = run_config.get('experiment', 'seeds') or [seed, seed + 1, seed + 2]
    clamp = run_config.get('experiment', 'ipw_clamp')
    try:
        experiment = default_experiment(
            constraint, source, faithful=faithful,
            epsilons=tuple(run_config.get('experiment', 'epsilons')),
            seeds=tuple(seeds),
            data_path=run_config.get('data', 'path'),
            holdout=run_config.get('experiment', 'holdout'),
            const_levels=tuple(run_config.get('experiment', 'const_levels')),
            histogram_bins=run_config.get('experiment', 'histogram_bins'),
            grid_points=run_config.get('experiment', 'grid_points'),
            ipw_clamp=clamp if clamp and clamp > 0 else None,
            anchor_action=run_config.get('phase1', 'anchor_action'),
            eta=run_config.get('clip', 'eta'),
            clip_binning=ClipBinning(quantile_bins=run_config.get('clip', 'quantile_bins'),
                                     min_stratum=run_config.get('clip', 'min_stratum'),
                                     floor_width=run_config.get('clip', 'floor_width')),
            lagrangian=LagrangianState(lambdas={(0, 1): run_config.get('lagrangian', 'lambda')},
                                       penalty_mu=run_config.get('lagrangian', 'penalty_mu'),
                                       growth=run_config.get('lagrangian', 'growth'),
                                       update_period=run_config.get('lagrangian', 'update_period')),
        )
        outcome = replace(experiment.outcome, **_train_overrides(
            run_config, 'phase1', ('epochs', 'lr', 'hidden', 'depth', 'batch_size', 'weight_decay', 'anchor_weight')))
        baseline = replace(experiment.baseline, **_train_overrides(
            run_config, 'baseline', ('epochs', 'lr', 'hidden', 'depth')))
        policy = replace(experiment.policy, **_train_overrides(
            run_config, 'phase2', ('epochs', 'lr', 'hidden', 'depth')))
        return replace(experiment, outcome=outcome, baseline=baseline, policy=policy)
    except ContractError as e:
        raise ConfigError(f"invalid experiment settings: {e}") from e


def lp_epsilon(run_config, cli_epsilon=None):
    epsilon = cli_epsilon if cli_epsilon is not None else run_config.get('lp', 'epsilon', math.inf)
    if not epsilon >= 0:
        raise ConfigError(f"lp epsilon must be >= 0, got {epsilon}", key='lp.epsilon')
    return epsilon
