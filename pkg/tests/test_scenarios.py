import csv

import numpy as np
import pytest

from gainsched import PolicyConfig, SimConfig, monte_carlo
from gainsched.experiments.config import resolve, setup_a
from gainsched.experiments.scenarios import (
    BIAS_PAIR_COLUMNS,
    BOUNDS_SUMMARY_COLUMNS,
    COMPARE_SUMMARY_COLUMNS,
    TRADEOFF_COLUMNS,
    run_scenario,
)


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


class TestTradeoff:
    def test_rate_decreases_and_huge_lambda_freezes(self, tmp_path):
        cfg = resolve({"master_seed": 3, "runs": 300, "lambda_grid": [0, 0.5, 1, 2, 5, 20, 1e6]}, scenario="tradeoff")
        result = run_scenario(cfg, tmp_path)
        assert header(tmp_path / "tradeoff.csv") == TRADEOFF_COLUMNS
        for s in range(2):
            rows = [r for r in read(tmp_path / "tradeoff.csv") if r["setting"] == str(s)]
            rate = np.array([float(r["mean_rate"]) for r in rows])
            se = np.array([float(r["se_rate"]) for r in rows])
            assert np.all(np.diff(rate) <= 2 * np.hypot(se[1:], se[:-1]))
            assert rate[-1] == 0.0
            assert float(rows[-1]["mean_J"]) == 26.5
        assert (tmp_path / "tradeoff.svg").read_text().startswith("<?xml")
        assert result.values[(0, 1e6)]["rate"][0] == 0.0

    def test_lambda_zero_skips_harmful_updates(self):
        """Oracle threshold at lambda = 0 vs always transmitting on identical data."""
        task = resolve({"master_seed": 1}, scenario="simulate").task_specs()[0]

        def final(policy):
            cfg = SimConfig((task,), ([0, 0],), (0.15,), 2, 20, policy, 17)
            return monte_carlo(cfg, 2000)

        lazy = final(PolicyConfig("threshold", lam=0.0, gain_mode="oracle"))
        always = final(PolicyConfig("always_transmit"))
        assert lazy.communication_rates.mean() <= 1.0
        diff = lazy.final_costs - always.final_costs
        assert diff.mean() <= 2 * diff.std(ddof=1) / np.sqrt(diff.size)


class TestBiasHistogram:
    def test_identical_tasks_coincide(self, tmp_path):
        task = setup_a()
        cfg = resolve({"master_seed": 2, "runs": 200, "tasks": [task, task], "shared_data": True}, scenario="bias_hist")
        result = run_scenario(cfg, tmp_path)
        m = result.values["metrics"]
        np.testing.assert_array_equal(m["oracle"], m["estimated"])
        np.testing.assert_array_equal(result.values["picks"]["oracle"], 0)
        rows = read(tmp_path / "bias_histogram.csv")
        assert [r["count"] for r in rows if r["series"] == "oracle"] == [r["count"] for r in rows if r["series"] == "estimated"]

    def test_oracle_never_worse_per_draw(self, tmp_path):
        result = run_scenario(resolve({"master_seed": 4, "runs": 500}, scenario="bias_hist"), tmp_path)
        m = result.values["metrics"]
        assert np.all(m["oracle"] <= m["estimated"] + 1e-12)

    def test_single_draw(self, tmp_path):
        run_scenario(resolve({"master_seed": 4, "runs": 1}, scenario="bias_hist"), tmp_path)
        rows = read(tmp_path / "bias_pairs.csv")
        assert header(tmp_path / "bias_pairs.csv") == BIAS_PAIR_COLUMNS
        assert sorted(r["scheme"] for r in rows) == ["estimated", "oracle"]

    def test_histograms_recomputable_from_pairs(self, tmp_path):
        cfg = resolve({"master_seed": 4, "runs": 300, "bins": 12}, scenario="bias_hist")
        run_scenario(cfg, tmp_path)
        pairs = read(tmp_path / "bias_pairs.csv")
        series = {s: np.array([float(r["metric"]) for r in pairs if r["scheme"] == s]) for s in ("oracle", "estimated")}
        pooled = np.concatenate(list(series.values()))
        hist = read(tmp_path / "bias_histogram.csv")
        for s, v in series.items():
            counts, _ = np.histogram(v, bins=12, range=(pooled.min(), pooled.max()))
            assert [int(r["count"]) for r in hist if r["series"] == s] == counts.tolist()


class TestPolicyComparison:
    def test_equal_communication(self, tmp_path):
        result = run_scenario(resolve({"master_seed": 6, "runs": 50}, scenario="compare"), tmp_path)
        for eps, v in result.values.items():
            for tx in v["transmissions"].values():
                assert np.all(tx == 1)
        assert header(tmp_path / "compare_summary.csv") == COMPARE_SUMMARY_COLUMNS
        assert len(read(tmp_path / "compare_runs.csv")) == 2 * 2 * 50


class TestBounds:
    def test_reports(self, tmp_path):
        result = run_scenario(resolve({"master_seed": 8, "runs": 200, "horizon": 50}, scenario="bounds"), tmp_path)
        summary = read(tmp_path / "bounds_summary_oracle.csv")
        assert header(tmp_path / "bounds_summary_oracle.csv") == BOUNDS_SUMMARY_COLUMNS
        budget = {float(r["lambda"]): float(r["bound"]) for r in summary if r["kind"] == "communication_rate"}
        assert budget == {1.0: 26.0, 2.0: 13.0}
        assert all(r["violated"] == "false" for r in summary)
        assert header(tmp_path / "bounds_envelope_lambda1_oracle.csv") == ["iter", "bound", "empirical_mean", "empirical_se", "violated"]
        assert not result.values[2.0]["budget"].violated

    def test_estimated_mode_filenames(self, tmp_path):
        cfg = resolve({"master_seed": 8, "runs": 20, "horizon": 10, "gain_mode": "estimated"}, scenario="bounds")
        run_scenario(cfg, tmp_path)
        assert (tmp_path / "bounds_envelope_lambda1_estimated.csv").exists()
        rows = read(tmp_path / "bounds_summary_estimated.csv")
        assert all(r["guaranteed"] == "false" for r in rows)


@pytest.mark.parametrize("scenario", ["tradeoff", "bias_hist", "compare", "bounds", "simulate"])
def test_reproducible(tmp_path, scenario):
    raw = {"master_seed": 12, "runs": 40}
    if scenario == "bounds":
        raw["horizon"] = 30
    cfg = resolve(raw, scenario=scenario)
    a = run_scenario(cfg, tmp_path / "a")
    cfg.workers = 3
    b = run_scenario(cfg, tmp_path / "b")
    csvs = [p.name for p in a.files if p.suffix == ".csv"]
    assert csvs
    for name in csvs:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
