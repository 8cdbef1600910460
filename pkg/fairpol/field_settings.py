"""
Registry of every run-config key.

Keys are dotted: the part before the first dot is the section, the rest the
key within it. Undotted keys live in the `run` section. A default of None
means "use the experiment defaults for the chosen constraint and data source".
"""

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]

FIELD_CONFIG = {
    'seed': {
        'friendly_name': 'Base Seed',
        'type': 'int',
        'default': None,
        'help': 'Overridden by --seed; falls back to FAIRPOL_SEED, then 0',
    },
    'logging.level': {
        'friendly_name': 'Logging Level',
        'type': 'choice',
        'options': LOG_LEVELS,
        'default': 'INFO',
    },
    'logging.file': {
        'friendly_name': 'Log File',
        'type': 'str',
        'default': 'fairpol.log',
    },

    # data
    'data.source': {
        'friendly_name': 'Data Source',
        'type': 'choice',
        'options': ['nyc', 'ihdp', 'file'],
        'default': 'nyc',
    },
    'data.path': {
        'friendly_name': 'Dataset CSV',
        'type': 'str',
        'default': None,
        'help': 'Used when data.source = file',
    },
    'data.ihdp_source': {
        'friendly_name': 'IHDP Source CSV',
        'type': 'str',
        'default': None,
        'help': 'Source rows for the IHDP surrogate; the bundled stand-in when empty',
    },

    # generator
    'generator.n': {'friendly_name': 'Rows', 'type': 'int', 'default': 20000},
    'generator.action_noise_mean': {'friendly_name': 'Action Noise Mean', 'type': 'float', 'default': 0.5},
    'generator.action_noise_sd': {'friendly_name': 'Action Noise SD', 'type': 'float', 'default': 0.4},
    'generator.outcome_noise_mean': {'friendly_name': 'Outcome Noise Mean', 'type': 'float', 'default': 1.0},
    'generator.outcome_noise_sd': {'friendly_name': 'Outcome Noise SD', 'type': 'float', 'default': 1.0},
    'generator.group_rate': {'friendly_name': 'P(S = 1)', 'type': 'float', 'default': 0.3},
    'generator.counselor_scale': {'friendly_name': 'Counselor Scale', 'type': 'float', 'default': 1.5},
    'generator.w_sx': {'friendly_name': 'Action Weights on SX', 'type': 'float_list', 'default': None},
    'generator.w_x': {'friendly_name': 'Action Weights on X', 'type': 'float_list', 'default': None},
    'generator.beta': {'friendly_name': 'Outcome Coefficients (beta)', 'type': 'float_list', 'default': None},
    'generator.gamma': {'friendly_name': 'Outcome Coefficients (gamma)', 'type': 'float_list', 'default': None},
    'generator.surrogate_hidden': {'friendly_name': 'Surrogate Width', 'type': 'int', 'default': 64},
    'generator.surrogate_epochs': {'friendly_name': 'Surrogate Epochs', 'type': 'int', 'default': 300},
    'generator.surrogate_lr': {'friendly_name': 'Surrogate Learning Rate', 'type': 'float', 'default': 0.01},

    # experiment
    'experiment.constraint': {
        'friendly_name': 'Constraint',
        'type': 'choice',
        'options': ['modbrk', 'eqb'],
        'default': 'modbrk',
    },
    'experiment.epsilons': {
        'friendly_name': 'Slack Values',
        'type': 'float_list',
        'default': [0.0, 0.01, 0.1, 1.0, float('inf')],
    },
    'experiment.seeds': {
        'friendly_name': 'Seeds',
        'type': 'int_list',
        'default': None,
        'help': 'Defaults to seed, seed+1, seed+2',
    },
    'experiment.faithful': {
        'friendly_name': 'Full Training Settings',
        'type': 'bool',
        'default': False,
    },
    'experiment.holdout': {'friendly_name': 'Holdout Fraction', 'type': 'float', 'default': 0.2},
    'experiment.const_levels': {'friendly_name': 'Constant Action Levels', 'type': 'float_list',
                                'default': [0.25, 0.5, 0.75]},
    'experiment.histogram_bins': {'friendly_name': 'Histogram Bins', 'type': 'int', 'default': 20},
    'experiment.grid_points': {'friendly_name': 'EqB Grid Points', 'type': 'int', 'default': 41},
    'experiment.ipw_clamp': {'friendly_name': 'IPW Weight Clamp', 'type': 'float', 'default': 0.0,
                             'help': '0 disables the clamp'},

    # phase I outcome net
    'phase1.epochs': {'friendly_name': 'Outcome Epochs', 'type': 'int', 'default': None},
    'phase1.lr': {'friendly_name': 'Outcome Learning Rate', 'type': 'float', 'default': None},
    'phase1.hidden': {'friendly_name': 'Outcome Width', 'type': 'int', 'default': None},
    'phase1.depth': {'friendly_name': 'Outcome Depth', 'type': 'int', 'default': None},
    'phase1.batch_size': {'friendly_name': 'Outcome Batch Size', 'type': 'int', 'default': None},
    'phase1.weight_decay': {'friendly_name': 'Outcome Weight Decay', 'type': 'float', 'default': None},
    'phase1.anchor_weight': {'friendly_name': 'g Anchor Weight', 'type': 'float', 'default': None},
    'phase1.anchor_action': {'friendly_name': 'g Anchor Action', 'type': 'float', 'default': 0.0},

    # phase I baseline policy net (EqB)
    'baseline.epochs': {'friendly_name': 'Baseline Epochs', 'type': 'int', 'default': None},
    'baseline.lr': {'friendly_name': 'Baseline Learning Rate', 'type': 'float', 'default': None},
    'baseline.hidden': {'friendly_name': 'Baseline Width', 'type': 'int', 'default': None},
    'baseline.depth': {'friendly_name': 'Baseline Depth', 'type': 'int', 'default': None},

    # phase II policy net
    'phase2.epochs': {'friendly_name': 'Policy Steps', 'type': 'int', 'default': None},
    'phase2.lr': {'friendly_name': 'Policy Learning Rate', 'type': 'float', 'default': None},
    'phase2.hidden': {'friendly_name': 'Policy Width', 'type': 'int', 'default': None},
    'phase2.depth': {'friendly_name': 'Policy Depth', 'type': 'int', 'default': None},

    # augmented Lagrangian
    'lagrangian.lambda': {'friendly_name': 'Initial Multiplier', 'type': 'float', 'default': 0.0},
    'lagrangian.penalty_mu': {'friendly_name': 'Initial Penalty', 'type': 'float', 'default': 1.0},
    'lagrangian.growth': {'friendly_name': 'Penalty Growth', 'type': 'float', 'default': 1.5},
    'lagrangian.update_period': {'friendly_name': 'Multiplier Update Period', 'type': 'int', 'default': 50},

    # action clipping
    'clip.eta': {'friendly_name': 'Extrapolation Factor', 'type': 'float', 'default': 1.0},
    'clip.quantile_bins': {'friendly_name': 'Quantile Bins', 'type': 'int', 'default': 2},
    'clip.min_stratum': {'friendly_name': 'Minimum Stratum Rows', 'type': 'int', 'default': 10},
    'clip.floor_width': {'friendly_name': 'Zero-Gap Width', 'type': 'float', 'default': 1e-3},

    # discrete programs
    'lp.epsilon': {'friendly_name': 'LP Slack', 'type': 'float', 'default': float('inf')},
}

# Keys each subcommand needs to find in the config file.
REQUIRED_KEYS = {
    'gen-data': ['data.source'],
    'phase1': ['experiment.constraint'],
    'sweep': ['experiment.constraint', 'experiment.epsilons'],
    'lp': [],
    'eval': [],
    'plot': [],
}
