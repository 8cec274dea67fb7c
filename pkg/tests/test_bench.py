import json
import statistics

import pytest

from shapley_pc.bench import (
    RESULT_COLUMNS,
    EmptyResultsError,
    ExperimentConfig,
    bif_suite,
    emit_plot_data,
    expand_grid,
    load_config,
    read_results,
    run_suite,
    strip_time,
)
from shapley_pc.bif import ParseError
from shapley_pc.graph import dag_to_cpdag, read_edge_list
from shapley_pc.metrics import evaluate


class TestConfig:
    def test_sample_count_is_derived(self):
        assert ExperimentConfig(n_nodes=20, s=50).n_samples == 1000

    def test_grid(self):
        configs = expand_grid({"rule": ["spc", "maxpc"], "density": [1, 2], "reps": 3})
        assert len(configs) == 4 and all(c.reps == 3 for c in configs)

    def test_precedence(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"n_nodes": 12, "alpha": 0.05, "seed": 4}))
        (cfg,) = load_config(path, {"alpha": 0.1, "seed": None})
        assert (cfg.n_nodes, cfg.alpha, cfg.seed, cfg.s) == (12, 0.1, 4, 50)

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(rule="ges")
        with pytest.raises(ValueError):
            ExperimentConfig(sem="laplace")
        with pytest.raises(ValueError):
            expand_grid({"nodes": 10})


class TestRunSuite:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = ExperimentConfig(n_nodes=10, density=1, sem="gauss", s=50, rule="spc", reps=10, seed=7)
        run_suite(cfg, tmp_path / "a")
        run_suite(cfg, tmp_path / "b")
        a = (tmp_path / "a" / "results.csv").read_text()
        b = (tmp_path / "b" / "results.csv").read_text()
        assert strip_time(a) == strip_time(b)
        assert a.splitlines()[0] == ",".join(RESULT_COLUMNS)

    def test_worker_count_does_not_change_output(self, tmp_path):
        configs = expand_grid({"rule": ["spc", "cpc"], "reps": 3, "n_nodes": 8})
        run_suite(configs, tmp_path / "one", workers=1)
        run_suite(configs, tmp_path / "two", workers=2)
        one = (tmp_path / "one" / "results.csv").read_text()
        two = (tmp_path / "two" / "results.csv").read_text()
        assert strip_time(one) == strip_time(two)

    def test_replicate_seeds(self):
        rows = run_suite(ExperimentConfig(reps=3, seed=10, n_nodes=5))
        assert [r["seed"] for r in rows] == [10, 11, 12]

    def test_random_baseline_matches_edge_count(self, tmp_path):
        run_suite(ExperimentConfig(rule="random", n_nodes=10, density=2, reps=3), tmp_path)
        for rep in range(3):
            est = read_edge_list(tmp_path / "graphs" / f"c000_rep{rep:03d}_est.txt")
            truth = read_edge_list(tmp_path / "graphs" / f"c000_rep{rep:03d}_truth.txt")
            assert est.num_edges == truth.num_edges == 20
            assert not est.undirected_edges()

    def test_oracle_mode_returns_cpdag(self, tmp_path):
        rows = run_suite(ExperimentConfig(oracle=True, n_nodes=8, density=2, reps=5, rule="spc"), tmp_path)
        for r in rows:
            truth = read_edge_list(tmp_path / "graphs" / f"c000_rep{r['replicate']:03d}_truth.txt").to_dag()
            est = read_edge_list(tmp_path / "graphs" / f"c000_rep{r['replicate']:03d}_est.txt")
            cpdag = dag_to_cpdag(truth)
            assert est == cpdag
            # undirected CPDAG edges are penalised as missing; nothing else is wrong
            assert r["shd"] == len(cpdag.undirected_edges())
            assert r["extra"] == r["reversed"] == 0

    def test_metrics_recomputable_from_graph_files(self, tmp_path):
        rows = run_suite(ExperimentConfig(n_nodes=8, reps=4, rule="maxpc", sem="mim"), tmp_path)
        for r in rows:
            stem = tmp_path / "graphs" / f"c000_rep{r['replicate']:03d}"
            row = evaluate(read_edge_list(f"{stem}_est.txt"), read_edge_list(f"{stem}_truth.txt").to_dag())
            assert row.shd == r["shd"] and row.sid == r["sid"]

    def test_replicate_error_is_recorded(self, tmp_path):
        rows = run_suite(ExperimentConfig(sem="gp", n_nodes=10, s=600, reps=2), tmp_path)
        assert all("SampleCapExceededError" in r["error"] for r in rows)
        text = (tmp_path / "results.csv").read_text()
        assert ",NA," in text

    def test_runtime_grows_with_graph_size(self):
        small = run_suite(ExperimentConfig(n_nodes=10, density=1, s=10, reps=10))
        large = run_suite(ExperimentConfig(n_nodes=50, density=1, s=10, reps=10))
        assert statistics.median(r["elapsed"] for r in small) <= statistics.median(r["elapsed"] for r in large)


class TestBifSuite:
    def test_cancer(self, tmp_path):
        rows = bif_suite("cancer", rules=["spc"], seed=0, out_dir=tmp_path)
        (row,) = rows
        assert row["n_samples"] == 2000 and row["dataset"] == "cancer"
        assert row["error"] == ""
        assert row["nshd"] * 4 == pytest.approx(row["shd"])
        assert (tmp_path / "results.csv").exists()

    def test_two_rules_two_rows_per_seed(self):
        rows = bif_suite("asia", rules=["spc", "maxpc"], reps=2)
        assert [(r["replicate"], r["rule"]) for r in rows] == [(0, "spc"), (0, "maxpc"), (1, "spc"), (1, "maxpc")]

    def test_malformed_file_leaves_no_output(self, tmp_path):
        bad = tmp_path / "bad.bif"
        bad.write_text("network x { }\nvariable a { type discrete [ 2 ] { y, n }\n")
        out = tmp_path / "out"
        with pytest.raises(ParseError):
            bif_suite(str(bad), out_dir=out)
        assert not out.exists()


class TestPlotData:
    def test_one_config_one_row(self, tmp_path):
        rows = run_suite(ExperimentConfig(n_nodes=8, reps=10), tmp_path)
        agg = emit_plot_data(read_results(tmp_path / "results.csv"))
        assert len(agg) == 1 and agg[0]["count"] == 10
        shds = [r["shd"] for r in rows]
        assert agg[0]["shd_mean"] == pytest.approx(statistics.fmean(shds))
        assert agg[0]["shd_sd"] == pytest.approx(statistics.stdev(shds))

    def test_equal_saturation_groups_together(self):
        rows = run_suite([ExperimentConfig(n_nodes=10, density=1, reps=2), ExperimentConfig(n_nodes=19, density=2, reps=2)])
        agg = emit_plot_data(rows)
        assert len(agg) == 1 and agg[0]["count"] == 4

    def test_unknown_key(self):
        rows = run_suite(ExperimentConfig(n_nodes=5, reps=1))
        with pytest.raises(KeyError):
            emit_plot_data(rows, ["colour"])

    def test_empty(self):
        with pytest.raises(EmptyResultsError):
            emit_plot_data([])

    def test_writes_csv(self, tmp_path):
        rows = run_suite(ExperimentConfig(n_nodes=5, reps=2))
        emit_plot_data(rows, ["rule"], tmp_path / "p.csv")
        header = (tmp_path / "p.csv").read_text().splitlines()[0]
        assert header.startswith("rule,count,shd_mean,shd_sd,shd_n")
