import json
import math
from types import SimpleNamespace

import pandas as pd
import pytest

from fairpol.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, main
from fairpol.config import DEFAULT_CONFIG
from fairpol.pipeline import FRONTIER_COLUMNS, FrontierRow, frontier_frame

SMALL_RUN = """seed = 1
data.source = nyc
generator.n = 600
experiment.constraint = modbrk
experiment.epsilons = 0, inf
experiment.seeds = 0
experiment.histogram_bins = 5
experiment.const_levels = 0.5
phase1.epochs = 20
phase1.hidden = 8
phase1.depth = 1
phase2.epochs = 20
phase2.hidden = 4
phase2.depth = 1
lagrangian.update_period = 10
"""


def write_config(tmp_path, text=SMALL_RUN, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def write_frontier(path, epsilons=(0.0, 0.01, 0.1, 1.0, math.inf)):
    rows = [FrontierRow(eps, seed, 10.0 - i * 0.01 + seed * 0.001, 9.0, 11.0, 0.1 * i + 0.01 * seed)
            for i, eps in enumerate(epsilons) for seed in (0, 1)]
    frontier_frame(rows).to_csv(path, index=False)
    return str(path)


def test_gen_data_writes_dataset_and_truth(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "data.csv"
    assert main(["gen-data", "--config", config, "--out", str(out)]) == EXIT_OK
    assert "Wrote 600 rows" in capsys.readouterr().out
    truth = json.loads((tmp_path / "data.csv.truth.json").read_text())
    assert truth["spec"]["seed"] == 1

    first = out.read_bytes()
    assert main(["gen-data", "--config", config, "--out", str(out)]) == EXIT_OK
    assert out.read_bytes() == first


def test_seed_flag_changes_the_dataset(tmp_path):
    config = write_config(tmp_path)
    main(["gen-data", "--config", config, "--out", str(tmp_path / "a.csv")])
    main(["--seed", "2", "gen-data", "--config", config, "--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "b.csv").read_bytes()


def test_unknown_config_key_is_a_usage_error(tmp_path, capsys):
    config = write_config(tmp_path, SMALL_RUN + "generator.rows = 5\n")
    assert main(["gen-data", "--config", config, "--out", str(tmp_path / "d.csv")]) == EXIT_USAGE
    assert "generator.rows" in capsys.readouterr().err


def test_missing_config_writes_the_template(tmp_path):
    path = tmp_path / "new.cfg"
    assert main(["gen-data", "--config", str(path), "--out", str(tmp_path / "d.csv")]) == EXIT_USAGE
    assert path.read_text(encoding="utf-8") == DEFAULT_CONFIG


def test_bad_arguments_are_usage_errors():
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["sweep", "--config"]) == EXIT_USAGE


def test_lp_prints_the_bundled_optimum(capsys):
    assert main(["lp"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "status: optimal"
    assert float(out[1].split(":")[1]) == pytest.approx(0.9)
    assert float(out[2].split(":")[1]) == pytest.approx(1.7)


def test_lp_writes_the_policy_table(tmp_path):
    out = tmp_path / "solution.csv"
    assert main(["lp", "--epsilon", "0", "--out", str(out)]) == EXIT_OK
    table = pd.read_csv(out)
    assert list(table.columns) == ["a", "s", "x", "prob"]
    assert table.groupby(["s", "x"])["prob"].sum().tolist() == pytest.approx([1.0, 1.0])


def test_lp_infeasible_exit_code(monkeypatch, capsys):
    import fairpol.cli as cli
    monkeypatch.setattr(cli, "solve_problem",
                        lambda problem: (None, SimpleNamespace(optimal=False, status="infeasible")))
    assert main(["lp", "--epsilon", "0"]) == EXIT_INFEASIBLE
    assert "infeasible" in capsys.readouterr().out


def test_lp_rejects_malformed_tables(tmp_path):
    problem = tmp_path / "bad.csv"
    problem.write_text("a,s,x,mean\n0,0,0,1\n")
    (tmp_path / "bad.p.csv").write_text("s,x,p\n0,0,1\n")
    assert main(["lp", str(problem)]) == EXIT_USAGE
    assert main(["lp", "--epsilon", "-1"]) == EXIT_USAGE


def test_plot_labels_every_epsilon(tmp_path, monkeypatch):
    import fairpol.plotting as plotting
    figures = []
    monkeypatch.setattr(plotting, "_save_svg", lambda fig, out_path: figures.append(fig))
    frontier = write_frontier(tmp_path / "frontier.csv")
    assert main(["plot", frontier, "--out", str(tmp_path / "f.svg")]) == EXIT_OK
    ax = figures[0].axes[0]
    assert len(ax.get_xticks()) == 5
    assert [t.get_text() for t in ax.get_xticklabels()] == ["0", "0.01", "0.1", "1", "∞"]


def test_plot_output_is_byte_stable(tmp_path):
    frontier = write_frontier(tmp_path / "frontier.csv")
    main(["plot", frontier, "--out", str(tmp_path / "a.svg")])
    main(["plot", frontier, "--out", str(tmp_path / "b.svg")])
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_plot_rejects_empty_frontier(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", str(empty), "--out", str(tmp_path / "f.svg")]) == EXIT_USAGE
    header_only = tmp_path / "header.csv"
    header_only.write_text(",".join(FRONTIER_COLUMNS) + "\n")
    assert main(["plot", str(header_only), "--out", str(tmp_path / "f.svg")]) == EXIT_USAGE


def test_eval_prints_the_report(tmp_path, capsys):
    frontier = write_frontier(tmp_path / "frontier.csv")
    out = tmp_path / "report.md"
    assert main(["eval", frontier, "--out", str(out)]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "| epsilon" in printed and "∞" in printed
    assert "Spearman(epsilon, constraint) = 1.000" in printed
    assert out.read_text(encoding="utf-8") == printed.rstrip("\n") + "\n"


def test_small_sweep_writes_every_output(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "results"
    code = main(["sweep", "--config", config, "--out", str(out), "--quiet"])
    assert code == EXIT_OK

    frontier = pd.read_csv(out / "frontier.csv")
    assert list(frontier.columns) == FRONTIER_COLUMNS
    assert len(frontier) == 2
    assert frontier["constraint_true"].notna().all()
    assert (out / "metrics" / "eps0_seed0.csv").exists()
    assert (out / "metrics" / "epsinf_seed0.csv").exists()
    assert (out / "histograms" / "eps0_seed0.svg").exists()
    assert pd.read_csv(out / "histograms" / "eps0_seed0.csv")["count_s0"].sum() > 0

    baselines = pd.read_csv(out / "baselines.csv")
    assert baselines["name"].tolist() == ["unconstrained", "drop_s", "const_a", "baseline_policy"]
    meta = json.loads((out / "run_metadata.json").read_text())
    assert meta["generator_seed"] == 1
    assert meta["failures"] == 0


def test_sweep_from_a_saved_dataset(tmp_path):
    config = write_config(tmp_path)
    data = tmp_path / "data.csv"
    main(["gen-data", "--config", config, "--out", str(data)])
    out = tmp_path / "results"
    assert main(["sweep", "--config", config, "--data", str(data), "--out", str(out), "--quiet",
                 "--skip-baselines"]) == EXIT_OK
    assert not (out / "baselines.csv").exists()
    meta = json.loads((out / "run_metadata.json").read_text())
    assert meta["dataset"] == str(data)
    assert pd.read_csv(out / "frontier.csv")["constraint_true"].notna().all()


def test_phase1_saves_models(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "phase1"
    assert main(["phase1", "--config", config, "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "phase1.json").read_text())
    assert summary["constraint"] == "modbrk"
    assert (out / "outcome.json").exists()
    assert not (out / "baseline.json").exists()


def output_bytes(root):
    return {str(path.relative_to(root)): path.read_bytes() for path in sorted(root.rglob("*")) if path.is_file()}


def test_sweep_outputs_are_byte_stable(tmp_path):
    config = write_config(tmp_path)
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["sweep", "--config", config, "--out", str(first), "--quiet"]) == EXIT_OK
    assert main(["sweep", "--config", config, "--out", str(second), "--quiet"]) == EXIT_OK
    first_files, second_files = output_bytes(first), output_bytes(second)
    assert {"frontier.csv", "baselines.csv", "run_metadata.json"} <= set(first_files)
    assert any(name.startswith("histograms") for name in first_files)
    assert first_files == second_files


def test_phase1_outputs_are_byte_stable(tmp_path):
    config = write_config(tmp_path)
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["phase1", "--config", config, "--out", str(first)]) == EXIT_OK
    assert main(["phase1", "--config", config, "--out", str(second)]) == EXIT_OK
    assert (first / "outcome.json").read_bytes() == (second / "outcome.json").read_bytes()
    assert output_bytes(first) == output_bytes(second)


def test_lp_solution_is_byte_stable(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["lp", "--epsilon", "0.01", "--out", str(first)]) == EXIT_OK
    assert main(["lp", "--epsilon", "0.01", "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_eval_report_is_byte_stable(tmp_path):
    frontier = write_frontier(tmp_path / "frontier.csv")
    first, second = tmp_path / "a.md", tmp_path / "b.md"
    assert main(["eval", frontier, "--out", str(first)]) == EXIT_OK
    assert main(["eval", frontier, "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_missing_input_files_are_usage_errors(tmp_path, capsys):
    config = write_config(tmp_path)
    missing = str(tmp_path / "nowhere.csv")
    assert main(["sweep", "--config", config, "--data", missing, "--out", str(tmp_path / "r")]) == EXIT_USAGE
    assert main(["lp", missing]) == EXIT_USAGE
    assert main(["eval", missing]) == EXIT_USAGE
    assert "error:" in capsys.readouterr().err
