import logging
import math

import pytest

from fairpol.config import (DEFAULT_CONFIG, check_required, convert_value, experiment_from_config,
                            generator_spec_from_config, load_config, lp_epsilon, parse_config_text,
                            resolve_seed, save_config, setup_logging)
from fairpol.errors import ConfigError
from fairpol.pipeline import DESK_MIN_LR, EQB, MODBRK


def test_parse_reads_dotted_and_plain_keys():
    run_config = parse_config_text("seed = 7\nexperiment.constraint = eqb  # inline\n"
                                   "experiment.epsilons = 0, 0.1, inf\nexperiment.faithful = yes\n")
    assert run_config.get('run', 'seed') == 7
    assert run_config.get('experiment', 'constraint') == EQB
    assert run_config.get('experiment', 'epsilons') == [0.0, 0.1, math.inf]
    assert run_config.get('experiment', 'faithful') is True


def test_unset_keys_fall_back_to_registry_defaults():
    run_config = parse_config_text("")
    assert run_config.get('clip', 'eta') == 1.0
    assert run_config.get('phase2', 'epochs') is None
    assert run_config.get('phase2', 'epochs', fallback=5) == 5
    assert not run_config.has('clip', 'eta')


def test_default_template_parses():
    run_config = parse_config_text(DEFAULT_CONFIG)
    assert run_config.get('experiment', 'constraint') == MODBRK
    assert run_config.get('generator', 'n') == 20000


def test_unknown_key_is_named():
    with pytest.raises(ConfigError) as info:
        parse_config_text("experiment.slack = 0.1\n")
    assert info.value.key == 'experiment.slack'
    assert 'experiment.slack' in str(info.value)


@pytest.mark.parametrize("text, key", [
    ("generator.n = many\n", 'generator.n'),
    ("experiment.faithful = maybe\n", 'experiment.faithful'),
    ("experiment.constraint = parity\n", 'experiment.constraint'),
    ("experiment.seeds = 1, two\n", 'experiment.seeds'),
])
def test_bad_values_are_config_errors(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.key == key


def test_duplicate_keys_are_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config_text("seed = 1\nseed = 2\n")
    assert info.value.key == 'seed'


def test_convert_value_types():
    assert convert_value('clip.min_stratum', ' 12 ') == 12
    assert convert_value('data.path', '') is None
    assert convert_value('experiment.seeds', '3, 4,') == [3, 4]


def test_missing_file_writes_the_template(tmp_path):
    path = tmp_path / "run.cfg"
    with pytest.raises(ConfigError):
        load_config(str(path))
    assert path.read_text(encoding='utf-8') == DEFAULT_CONFIG
    assert load_config(str(path)).get('data', 'source') == 'nyc'


def test_required_keys_per_command():
    run_config = parse_config_text("experiment.constraint = modbrk\n")
    check_required(run_config, 'phase1')
    with pytest.raises(ConfigError) as info:
        check_required(run_config, 'sweep')
    assert info.value.key == 'experiment.epsilons'


def test_save_then_load(tmp_path):
    run_config = parse_config_text("seed = 3\nexperiment.epsilons = 0, inf\nexperiment.faithful = false\n")
    path = tmp_path / "saved.cfg"
    save_config(run_config, str(path))
    assert load_config(str(path)).items() == run_config.items()


def test_seed_precedence(monkeypatch):
    configured = parse_config_text("seed = 5\n")
    monkeypatch.setenv('FAIRPOL_SEED', '9')
    assert resolve_seed(1, configured) == 1
    assert resolve_seed(None, configured) == 5
    assert resolve_seed(None, parse_config_text("")) == 9
    monkeypatch.delenv('FAIRPOL_SEED')
    assert resolve_seed() == 0
    monkeypatch.setenv('FAIRPOL_SEED', 'x')
    with pytest.raises(ConfigError):
        resolve_seed()


def test_experiment_uses_desk_defaults_and_overrides():
    run_config = parse_config_text("experiment.constraint = eqb\nphase2.epochs = 7\nlagrangian.growth = 2\n"
                                   "experiment.ipw_clamp = 50\n")
    experiment = experiment_from_config(run_config, seed=4)
    assert experiment.constraint == EQB
    assert experiment.seeds == (4, 5, 6)
    assert experiment.policy.epochs == 7
    assert experiment.baseline.lr == DESK_MIN_LR
    assert experiment.lagrangian.growth == 2.0
    assert experiment.ipw_clamp == 50.0
    assert experiment_from_config(parse_config_text(""), seed=0).ipw_clamp is None


def test_faithful_flag_overrides_the_file():
    run_config = parse_config_text("experiment.constraint = eqb\n")
    assert experiment_from_config(run_config, 0, faithful=True).baseline.lr == 1e-4


def test_invalid_experiment_settings_are_config_errors():
    with pytest.raises(ConfigError):
        experiment_from_config(parse_config_text("lagrangian.growth = 0.5\n"), seed=0)
    with pytest.raises(ConfigError):
        generator_spec_from_config(parse_config_text("generator.action_noise_sd = 0\n"), seed=0)


def test_generator_spec_reads_generator_keys():
    spec = generator_spec_from_config(parse_config_text("generator.n = 123\n"), seed=8)
    assert spec.n == 123 and spec.seed == 8


def test_lp_epsilon_precedence():
    run_config = parse_config_text("lp.epsilon = 0.2\n")
    assert lp_epsilon(run_config) == 0.2
    assert lp_epsilon(run_config, 0.0) == 0.0
    assert lp_epsilon(parse_config_text("")) == math.inf
    with pytest.raises(ConfigError):
        lp_epsilon(run_config, -1.0)


def test_setup_logging_truncates_the_log(tmp_path):
    log_file = tmp_path / "run.log"
    log_file.write_text("stale\n")
    setup_logging(str(log_file))
    logging.info("fresh")
    logging.getLogger().handlers[0].flush()
    text = log_file.read_text()
    assert "stale" not in text
    assert "INFO - fresh" in text
