import numpy as np
import pytest

from conftest import make_dataset
from fairpol.dataio import (BETA_SIZE, GAMMA_SIZE, NYC_COLUMNS, Dataset, GeneratorSpec, GroundTruth, Sample,
                            bootstrap, counterfactual_mean_outcome, generate_ihdp_surrogate, generate_nyc,
                            ground_truth_path, load_dataset, load_ground_truth, load_ihdp_standin,
                            save_dataset, save_ground_truth)
from fairpol.errors import ContractError, DatasetParseError, GenerationError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_dataset_validates_columns():
    with pytest.raises(ContractError):
        make_dataset([0, 1], [[0.0]], [0.0, 1.0], [0.0, 1.0])
    with pytest.raises(ContractError):
        make_dataset([0, 2], [[0.0], [1.0]], [0.0, 1.0], [0.0, 1.0])
    with pytest.raises(ContractError):
        make_dataset([0, 0], [[0.0], [1.0]], [0.0, 1.0], [0.0, 1.0])
    with pytest.raises(ContractError):
        make_dataset([0, 1], [[0.0], [np.nan]], [0.0, 1.0], [0.0, 1.0])


def test_dataset_columns_are_read_only():
    dataset = make_dataset([0, 1], [[0.0], [1.0]], [0.0, 1.0], [2.0, 3.0])
    with pytest.raises(ValueError):
        dataset.y[0] = 5.0


def test_samples_round_trip_through_from_samples():
    samples = [Sample(0, (1.0, 2.0), 0.5, 3.0), Sample(1, (0.0, 1.0), 0.25, 1.0)]
    dataset = Dataset.from_samples(samples)
    assert dataset.d == 2
    assert dataset.samples == samples
    with pytest.raises(ContractError):
        Sample(3, (1.0,), 0.0, 0.0)


def test_load_dataset_reads_rows_in_order(tmp_path):
    path = write(tmp_path / "data.csv", "s,x0,x1,a,y\n0,1.5,2,0.25,3\n1,0,1,0.5,-1\n")
    dataset = load_dataset(path)
    assert len(dataset) == 2 and dataset.d == 2
    np.testing.assert_array_equal(dataset.y, [3.0, -1.0])


def test_load_dataset_names_the_offending_line(tmp_path):
    path = write(tmp_path / "bad.csv", "s,x0,a,y\n0,1,0.5,1\n1,oops,0.5,1\n")
    with pytest.raises(DatasetParseError) as info:
        load_dataset(path)
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_load_dataset_rejects_bad_header_and_group(tmp_path):
    with pytest.raises(DatasetParseError) as info:
        load_dataset(write(tmp_path / "h.csv", "s,z,a,y\n0,1,0.5,1\n"))
    assert info.value.line == 1
    with pytest.raises(DatasetParseError) as info:
        load_dataset(write(tmp_path / "g.csv", "s,x0,a,y\n0,1,0.5,1\n2,1,0.5,1\n"))
    assert info.value.line == 3


def test_save_then_load_preserves_values(tmp_path, nyc_small):
    dataset, _ = nyc_small
    path = tmp_path / "nyc.csv"
    save_dataset(dataset, path)
    assert path.read_text().splitlines()[0] == "s,x0,x1,x2,x3,a,y"
    assert load_dataset(path).equals(dataset)


def test_bootstrap_is_seeded():
    dataset = make_dataset([0, 1, 0, 1], [[0.0], [1.0], [2.0], [3.0]], [0.1, 0.2, 0.3, 0.4], [1, 2, 3, 4])
    first = bootstrap(dataset, 50, seed=3)
    assert len(first) == 50
    assert first.equals(bootstrap(dataset, 50, seed=3))
    assert set(first.y) <= set(dataset.y)
    with pytest.raises(ContractError):
        bootstrap(dataset, 0, seed=3)


def test_generator_is_deterministic_per_seed():
    first, truth = generate_nyc(GeneratorSpec(seed=4, n=500))
    second, _ = generate_nyc(GeneratorSpec(seed=4, n=500))
    third, _ = generate_nyc(GeneratorSpec(seed=5, n=500))
    assert first.equals(second)
    assert not first.equals(third)
    assert first.d == len(NYC_COLUMNS)
    assert len(truth.beta) == BETA_SIZE and len(truth.gamma) == GAMMA_SIZE


def test_generated_actions_are_rescaled_to_unit_interval(nyc_small):
    dataset, _ = nyc_small
    assert dataset.a.min() == 0.0
    assert dataset.a.max() == pytest.approx(1.0)
    assert np.isin(dataset.X[:, :2], (0.0, 1.0)).all()
    assert (dataset.X[:, 2] >= 0).all()
    assert ((dataset.X[:, 3] >= 0) & (dataset.X[:, 3] <= 1)).all()


def test_noise_free_outcomes_equal_the_structural_mean(nyc_noise_free):
    dataset, truth = nyc_noise_free
    np.testing.assert_array_equal(dataset.y, truth.structural_mean(dataset.s, dataset.X, dataset.a))


def test_counterfactual_mean_is_affine_in_the_action(nyc_small):
    dataset, truth = nyc_small
    x = dataset.X[0]
    values = [counterfactual_mean_outcome(truth, 1, x, a) for a in (0.0, 0.5, 1.0)]
    assert isinstance(values[0], float)
    assert values[2] - values[1] == pytest.approx(values[1] - values[0])


def test_counterfactual_mean_at_zero_action_has_no_action_terms(nyc_small):
    _, truth = nyc_small
    x = np.array([1.0, 0.0, 2.0, 0.5])
    beta, gamma = np.array(truth.beta), np.array(truth.gamma)
    s = 1.0
    sx = s * x[:3]
    expected = (20 * x[3] + beta[0] * s + beta[1:4] @ x[:3] + beta[4:7] @ sx + gamma[:3] @ x[:3]
                + truth.spec.outcome_noise_mean)
    assert counterfactual_mean_outcome(truth, s, x, 0.0) == pytest.approx(expected)


def test_g_component_vanishes_without_group_interaction():
    beta = [0.5] * BETA_SIZE
    beta[11:] = [0.0] * 4
    _, truth = generate_nyc(GeneratorSpec(seed=1, n=300, beta=beta))
    X = np.array([[1.0, 1.0, 0.3, 0.2], [0.0, 1.0, 1.0, 0.9]])
    np.testing.assert_array_equal(truth.g_component(np.array([1, 1]), X, np.array([0.4, 0.9])), 0.0)


def test_generator_spec_validation():
    with pytest.raises(ContractError):
        GeneratorSpec(action_noise_sd=0.0)
    with pytest.raises(ContractError):
        GeneratorSpec(beta=[1.0, 2.0])
    with pytest.raises(ContractError):
        GeneratorSpec(n=0)


def test_ground_truth_sidecar_round_trip(tmp_path, nyc_small):
    _, truth = nyc_small
    path = ground_truth_path(tmp_path / "data.csv")
    assert path.name == "data.csv.truth.json"
    save_ground_truth(truth, path)
    loaded = load_ground_truth(path)
    assert isinstance(loaded, GroundTruth)
    assert loaded == truth

    other = write(tmp_path / "ihdp.truth.json", '{"generator": "ihdp"}')
    assert load_ground_truth(other) is None


def test_bundled_ihdp_standin_has_both_groups():
    source = load_ihdp_standin()
    assert len(source) == 200
    assert source.group_counts[0] > 0 and source.group_counts[1] > 0


def test_ihdp_surrogate_generates_the_requested_rows():
    spec = GeneratorSpec(seed=2, n=300, surrogate_hidden=8, surrogate_epochs=30)
    dataset = generate_ihdp_surrogate(spec, load_ihdp_standin())
    assert len(dataset) == 300
    assert dataset.d == load_ihdp_standin().d
    assert dataset.equals(generate_ihdp_surrogate(spec, load_ihdp_standin()))


def test_ihdp_surrogate_needs_a_source():
    with pytest.raises(GenerationError):
        generate_ihdp_surrogate(GeneratorSpec(n=10), None)
