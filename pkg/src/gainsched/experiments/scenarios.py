"""Scenario runners. Each writes CSV (and SVG) files into an output directory and
returns the numbers it wrote, keyed for programmatic checks."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gainsched.experiments import plots
from gainsched.experiments.config import ExperimentConfig, write_resolved
from gainsched.simulator import monte_carlo
from gainsched.theory import (
    BoundKind,
    check_bounds,
    communication_budget,
    convergence_envelope,
    equilibrium_gradient_covariance,
)

log = logging.getLogger(__name__)

TRADEOFF_COLUMNS = ["setting", "stepsize", "batch_size", "lambda", "mean_rate", "se_rate", "mean_J", "se_J"]
BIAS_PAIR_COLUMNS = ["draw", "scheme", "task", "metric"]
HISTOGRAM_COLUMNS = ["panel", "series", "bin_left", "bin_right", "count"]
SUMMARY_COLUMNS = ["panel", "series", "mean", "se"]
COMPARE_RUN_COLUMNS = ["stepsize", "policy", "run", "mean_cost", "transmissions"]
COMPARE_SUMMARY_COLUMNS = ["stepsize", "policy", "mean", "se", "transmissions_per_step"]
BOUNDS_SUMMARY_COLUMNS = [
    "kind", "lambda", "gain_mode", "guaranteed", "bound", "empirical_mean", "empirical_se", "margin", "violated",
]


@dataclass
class ScenarioResult:
    files: list[Path] = field(default_factory=list)
    values: dict = field(default_factory=dict)


def _write(path: Path, header: list[str], rows, result: ScenarioResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    result.files.append(path)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def _histograms(series: dict[str, np.ndarray], bins: int, hist_range) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    if hist_range is None:
        pooled = np.concatenate(list(series.values()))
        hist_range = (float(pooled.min()), float(pooled.max()))
    return {name: np.histogram(v, bins=bins, range=tuple(hist_range)) for name, v in series.items()}


def _histogram_rows(panel: str, hists):
    for name, (counts, edges) in hists.items():
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            yield [panel, name, float(lo), float(hi), int(c)]


def _fmt(x: float) -> str:
    return f"{x:g}"


def scenario_tradeoff(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    result = ScenarioResult()
    rows, curves, table = [], {}, {}
    for i, st in enumerate(cfg.settings):
        rates, costs = [], []
        for lam in cfg.lambda_grid:
            sim = cfg.sim_config(stepsize=st["stepsize"], batch_size=st["batch_size"], kind="threshold", lam=lam)
            ens = monte_carlo(sim, cfg.runs, workers=cfg.workers)
            rate = _mean_se(ens.communication_rates)
            cost = _mean_se(ens.final_costs)
            rows.append([i, st["stepsize"], st["batch_size"], lam, *rate, *cost])
            table[(i, lam)] = {"rate": rate, "cost": cost}
            rates.append(rate[0])
            costs.append(cost[0])
            log.info("setting %d lambda %g: rate %.4f cost %.4f", i, lam, rate[0], cost[0])
        curves[f"eps={_fmt(st['stepsize'])}, N={st['batch_size']}"] = (np.array(rates), np.array(costs))
    _write(out / "tradeoff.csv", TRADEOFF_COLUMNS, rows, result)
    plots.tradeoff_plot(out / "tradeoff.svg", curves)
    result.files.append(out / "tradeoff.svg")
    result.values = table
    return result


def scenario_bias_histogram(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    result = ScenarioResult()
    metrics, picks = {}, {}
    for scheme in ("oracle", "estimated"):
        sim = cfg.sim_config(horizon=1, kind="greedy_gain", gain_mode=scheme)
        ens = monte_carlo(sim, cfg.runs, workers=cfg.workers)
        metrics[scheme] = ens.final_costs
        picks[scheme] = np.argmax(ens.alphas[:, 0, :], axis=1)

    def pair_rows():
        for r in range(cfg.runs):
            for scheme in ("oracle", "estimated"):
                yield [r, scheme, int(picks[scheme][r]), float(metrics[scheme][r])]

    _write(out / "bias_pairs.csv", BIAS_PAIR_COLUMNS, pair_rows(), result)
    hists = _histograms(metrics, cfg.bins, cfg.hist_range)
    _write(out / "bias_histogram.csv", HISTOGRAM_COLUMNS, _histogram_rows("bias", hists), result)
    summary = {s: _mean_se(v) for s, v in metrics.items()}
    summary["estimated_minus_oracle"] = _mean_se(metrics["estimated"] - metrics["oracle"])
    _write(out / "bias_summary.csv", SUMMARY_COLUMNS, [["bias", s, *v] for s, v in summary.items()], result)
    plots.histogram_plot(out / "bias_histogram.svg", {"single-step greedy scheduling": hists}, "mean cost across tasks")
    result.files.append(out / "bias_histogram.svg")
    result.values = {"metrics": metrics, "picks": picks, "summary": summary}
    return result


POLICIES = {
    "greedy_gain": {"kind": "greedy_gain", "gain_mode": "estimated"},
    "gradient_norm": {"kind": "gradient_norm"},
}


def scenario_policy_comparison(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    result = ScenarioResult()
    run_rows, summary_rows, panels, values = [], [], {}, {}
    for eps in cfg.stepsize_grid:
        finals, tx = {}, {}
        for name, overrides in POLICIES.items():
            ens = monte_carlo(cfg.sim_config(stepsize=eps, **overrides), cfg.runs, workers=cfg.workers)
            finals[name] = ens.final_costs
            tx[name] = ens.alphas.sum(axis=2)
            per_run = tx[name].sum(axis=1)
            run_rows.extend([eps, name, r, float(c), int(t)] for r, (c, t) in enumerate(zip(finals[name], per_run)))
            summary_rows.append([eps, name, *_mean_se(finals[name]), float(tx[name].mean())])
        diff = finals["greedy_gain"] - finals["gradient_norm"]
        summary_rows.append([eps, "greedy_minus_gradient", *_mean_se(diff), 0.0])
        panels[f"stepsize {_fmt(eps)}"] = _histograms(finals, cfg.bins, cfg.hist_range)
        values[eps] = {
            "final": finals,
            "transmissions": tx,
            "summary": {n: _mean_se(v) for n, v in finals.items()},
            "difference": _mean_se(diff),
        }
    _write(out / "compare_runs.csv", COMPARE_RUN_COLUMNS, run_rows, result)
    _write(out / "compare_summary.csv", COMPARE_SUMMARY_COLUMNS, summary_rows, result)
    hist_rows = [row for panel, h in panels.items() for row in _histogram_rows(panel, h)]
    _write(out / "compare_histogram.csv", HISTOGRAM_COLUMNS, hist_rows, result)
    plots.histogram_plot(out / "compare_histogram.svg", panels, "mean cost across tasks after K steps")
    result.files.append(out / "compare_histogram.svg")
    result.values = values
    return result


def scenario_bounds(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    result = ScenarioResult()
    task = cfg.task_specs()[0]
    w0, eps = cfg.initial_weights[0], cfg.stepsizes[0]
    noise = equilibrium_gradient_covariance(task, cfg.batch_size)
    guaranteed = cfg.gain_mode == "oracle"
    summary, curves, reports = [], {}, {}
    for lam in cfg.lambda_grid:
        ens = monte_carlo(cfg.sim_config(kind="threshold", lam=lam), cfg.runs, workers=cfg.workers)
        agg = ens.aggregate()
        envelope = check_bounds(
            BoundKind.CONVERGENCE_ENVELOPE,
            convergence_envelope(task, eps, lam, noise, w0, cfg.horizon),
            agg.mean_J,
            agg.se_J,
            guaranteed,
        )
        budget = check_bounds(
            BoundKind.COMMUNICATION_RATE, communication_budget(task, w0, lam), agg.mean_comm, agg.se_comm, guaranteed
        )
        tag = f"lambda{_fmt(lam)}_{cfg.gain_mode}"
        envelope.write_csv(out / f"bounds_envelope_{tag}.csv")
        budget.write_csv(out / f"bounds_budget_{tag}.csv")
        ens.write_aggregate(out / f"aggregate_{tag}.csv")
        result.files += [out / f"bounds_envelope_{tag}.csv", out / f"bounds_budget_{tag}.csv", out / f"aggregate_{tag}.csv"]
        for rep in (envelope, budget):
            summary.append(
                [
                    rep.kind.value,
                    lam,
                    cfg.gain_mode,
                    str(guaranteed).lower(),
                    float(rep.bound[-1]),
                    float(rep.empirical_mean[-1]),
                    float(rep.empirical_se[-1]),
                    rep.margin,
                    str(rep.violated).lower(),
                ]
            )
        curves[f"lambda={_fmt(lam)}"] = (agg.mean_J, agg.se_J, envelope.bound)
        reports[lam] = {"envelope": envelope, "budget": budget}
    _write(out / f"bounds_summary_{cfg.gain_mode}.csv", BOUNDS_SUMMARY_COLUMNS, summary, result)
    plots.envelope_plot(out / f"bounds_{cfg.gain_mode}.svg", curves)
    result.files.append(out / f"bounds_{cfg.gain_mode}.svg")
    result.values = reports
    return result


def scenario_simulate(cfg: ExperimentConfig, out: Path) -> ScenarioResult:
    result = ScenarioResult()
    ens = monte_carlo(cfg.sim_config(), cfg.runs, workers=cfg.workers)
    ens.write_trajectories(out / "trajectory.csv")
    ens.write_aggregate(out / "aggregate.csv")
    agg = ens.aggregate()
    plots.cost_plot(out / "aggregate.svg", agg.mean_J, agg.se_J)
    result.files += [out / "trajectory.csv", out / "aggregate.csv", out / "aggregate.svg"]
    result.values = {"ensemble": ens}
    return result


RUNNERS = {
    "tradeoff": scenario_tradeoff,
    "bias_hist": scenario_bias_histogram,
    "compare": scenario_policy_comparison,
    "bounds": scenario_bounds,
    "simulate": scenario_simulate,
}


def run_scenario(cfg: ExperimentConfig, out_dir) -> ScenarioResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = write_resolved(cfg, out)
    result = RUNNERS[cfg.scenario](cfg, out)
    result.files.insert(0, resolved)
    return result
