"""Scheduled stochastic-gradient dynamics for one or many regression tasks.

At every step each task draws a fresh batch, computes its stochastic gradient
and gain, the policy picks which tasks transmit, and only those tasks apply
``w <- w - stepsize * g``. Everything is vectorised across Monte Carlo runs;
each run's data comes from its own ``(master_seed, run, task)`` stream so the
result of a run never depends on how runs are chunked or scheduled.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gainsched.core_model import ContractViolation, TaskSpec, max_stepsize
from gainsched.data import cholesky_factor, draw_normals, policy_stream, task_stream, transform_normals
from gainsched.estimator import GainMode
from gainsched.policies import (
    PolicyConfig,
    PolicyKind,
    round_robin_mask,
    smallest_mask,
    threshold_mask,
)

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["run", "iter", "task", "J", "gain_est", "gain_oracle", "alpha", "comm_cum"]
AGGREGATE_COLUMNS = ["iter", "mean_J", "se_J", "mean_rate", "se_rate"]
DEFAULT_CHUNK = 256


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    tasks: tuple[TaskSpec, ...]
    initial_weights: tuple[np.ndarray, ...]
    stepsizes: tuple[float, ...]
    batch_size: int
    horizon: int
    policy: PolicyConfig
    master_seed: int
    allow_unstable: bool = False
    exact_gradient: bool = False
    # Every task reads the data stream of task 0 (useful for identical-task controls).
    shared_data: bool = False

    def __post_init__(self):
        tasks = tuple(self.tasks)
        w0 = tuple(np.array(w, dtype=float) for w in self.initial_weights)
        eps = tuple(float(e) for e in self.stepsizes)
        object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "initial_weights", w0)
        object.__setattr__(self, "stepsizes", eps)
        m = len(tasks)
        if m < 1:
            raise ContractViolation("need at least one task")
        if len(w0) != m or len(eps) != m:
            raise ContractViolation(
                f"tasks ({m}), initial_weights ({len(w0)}) and stepsizes ({len(eps)}) must have equal length"
            )
        for j, (task, w, e) in enumerate(zip(tasks, w0, eps)):
            if w.shape != (task.dim,):
                raise ContractViolation(f"initial_weights[{j}] has shape {w.shape}, expected ({task.dim},)")
            if not e > 0:
                raise ContractViolation(f"stepsizes[{j}] must be positive, got {e}")
            limit = max_stepsize(task)
            if e >= limit and not self.allow_unstable:
                raise ContractViolation(
                    f"stepsizes[{j}]={e} is not below max_stepsize {limit:.6g} (2/lambda_max); "
                    "set allow_unstable to override"
                )
        if self.shared_data and len({t.dim for t in tasks}) != 1:
            raise ContractViolation("shared_data needs all tasks to have the same dimension")
        if self.batch_size < 1:
            raise ContractViolation(f"batch_size must be >= 1, got {self.batch_size}")
        if self.horizon < 1:
            raise ContractViolation(f"horizon must be >= 1, got {self.horizon}")
        self.policy.validate(m)

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def capacity(self) -> int:
        return self.policy.capacity(self.num_tasks)


@dataclass
class Trajectory:
    """One run. ``costs``/``weights`` have ``horizon + 1`` rows (index 0 is the start)."""

    run: int
    weights: list[np.ndarray]
    costs: np.ndarray
    gain_est: np.ndarray
    gain_oracle: np.ndarray
    alphas: np.ndarray

    @property
    def transmissions(self) -> np.ndarray:
        return self.alphas.sum(axis=1)

    @property
    def transmission_count(self) -> int:
        return int(self.alphas.sum())

    @property
    def communication_rate(self) -> float:
        return float(self.transmissions.mean())

    @property
    def final_cost(self) -> float:
        return float(self.costs[-1].mean())

    def rows(self):
        comm = np.cumsum(self.transmissions)
        horizon, m = self.alphas.shape
        for k in range(horizon):
            for j in range(m):
                yield [
                    self.run,
                    k + 1,
                    j,
                    float(self.costs[k + 1, j]),
                    float(self.gain_est[k, j]),
                    float(self.gain_oracle[k, j]),
                    int(self.alphas[k, j]),
                    int(comm[k]),
                ]


def _mean_se(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over axis 0 (se is 0 for a single run)."""
    mean = values.mean(axis=0)
    if values.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])


@dataclass
class Aggregate:
    mean_J: np.ndarray
    se_J: np.ndarray
    mean_rate: np.ndarray
    se_rate: np.ndarray
    mean_comm: np.ndarray
    se_comm: np.ndarray

    def rows(self):
        for k in range(self.mean_J.size):
            yield [k, float(self.mean_J[k]), float(self.se_J[k]), float(self.mean_rate[k]), float(self.se_rate[k])]


@dataclass
class Ensemble:
    """Stacked output of ``monte_carlo``; arrays have the run index as axis 0."""

    config: SimConfig
    run_indices: np.ndarray
    weights: list[np.ndarray]
    costs: np.ndarray
    gain_est: np.ndarray
    gain_oracle: np.ndarray
    alphas: np.ndarray
    _aggregate: Aggregate | None = field(default=None, repr=False)

    @property
    def runs(self) -> int:
        return self.run_indices.size

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(
            run=int(self.run_indices[i]),
            weights=[w[i] for w in self.weights],
            costs=self.costs[i],
            gain_est=self.gain_est[i],
            gain_oracle=self.gain_oracle[i],
            alphas=self.alphas[i],
        )

    @property
    def trajectories(self) -> list[Trajectory]:
        return [self.trajectory(i) for i in range(self.runs)]

    @property
    def cumulative_transmissions(self) -> np.ndarray:
        """Shape ``(R, horizon + 1)``; column k counts transmissions in steps 0..k-1."""
        per_step = self.alphas.sum(axis=2)
        out = np.zeros((self.runs, per_step.shape[1] + 1))
        np.cumsum(per_step, axis=1, out=out[:, 1:])
        return out

    @property
    def task_mean_costs(self) -> np.ndarray:
        return self.costs.mean(axis=2)

    @property
    def final_costs(self) -> np.ndarray:
        return self.task_mean_costs[:, -1]

    @property
    def communication_rates(self) -> np.ndarray:
        return self.alphas.sum(axis=2).mean(axis=1)

    def aggregate(self) -> Aggregate:
        if self._aggregate is None:
            mean_J, se_J = _mean_se(self.task_mean_costs)
            comm = self.cumulative_transmissions
            steps = np.arange(comm.shape[1], dtype=float)
            rate = np.zeros_like(comm)
            rate[:, 1:] = comm[:, 1:] / steps[1:]
            mean_rate, se_rate = _mean_se(rate)
            mean_comm, se_comm = _mean_se(comm)
            self._aggregate = Aggregate(mean_J, se_J, mean_rate, se_rate, mean_comm, se_comm)
        return self._aggregate

    def write_trajectories(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRAJECTORY_COLUMNS)
            for traj in self.trajectories:
                writer.writerows(traj.rows())

    def write_aggregate(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(AGGREGATE_COLUMNS)
            writer.writerows(self.aggregate().rows())


def _draw_task_data(config: SimConfig, j: int, runs: np.ndarray):
    task = config.tasks[j]
    source = 0 if config.shared_data else j
    shape = (config.horizon, config.batch_size)
    z = np.stack([draw_normals(task_stream(config.master_seed, int(r), source), shape, task.dim) for r in runs])
    return transform_normals(task, z, cholesky_factor(task.input_second_moment))


def _draw_random_masks(config: SimConfig, runs: np.ndarray) -> np.ndarray:
    m, p = config.num_tasks, config.policy.budget
    masks = np.zeros((runs.size, config.horizon, m), dtype=bool)
    for i, r in enumerate(runs):
        gen = policy_stream(config.master_seed, int(r)).generator
        for k in range(config.horizon):
            masks[i, k, gen.choice(m, size=p, replace=False)] = True
    return masks


def _step_masks(config: SimConfig, k: int, gains: np.ndarray, sq_norms: np.ndarray, random_masks):
    policy = config.policy
    kind = policy.kind
    if kind is PolicyKind.THRESHOLD:
        return threshold_mask(gains, policy.lam)
    if kind is PolicyKind.GREEDY_GAIN:
        return smallest_mask(gains, policy.budget)
    if kind is PolicyKind.GRADIENT_NORM:
        return smallest_mask(-sq_norms, policy.budget)
    if kind is PolicyKind.ROUND_ROBIN:
        return np.broadcast_to(round_robin_mask(config.num_tasks, policy.budget, k), gains.shape)
    if kind is PolicyKind.UNIFORM_RANDOM:
        return random_masks[:, k]
    if kind is PolicyKind.ALWAYS_TRANSMIT:
        return np.ones(gains.shape, dtype=bool)
    return np.zeros(gains.shape, dtype=bool)


def _simulate_block(config: SimConfig, runs: np.ndarray) -> Ensemble:
    R, K, m = runs.size, config.horizon, config.num_tasks
    data = [_draw_task_data(config, j, runs) for j in range(m)]
    random_masks = _draw_random_masks(config, runs) if config.policy.kind is PolicyKind.UNIFORM_RANDOM else None

    weights = []
    for task, w0 in zip(config.tasks, config.initial_weights):
        w = np.empty((R, K + 1, task.dim))
        w[:, 0] = w0
        weights.append(w)
    costs = np.empty((R, K + 1, m))
    gain_est = np.empty((R, K, m))
    gain_oracle = np.empty((R, K, m))
    alphas = np.empty((R, K, m), dtype=np.int8)

    def cost(task, e):
        he = (e[:, None, :] * task.input_second_moment).sum(axis=-1)
        return task.noise_floor + 0.5 * (e * he).sum(axis=-1)

    for j, task in enumerate(config.tasks):
        costs[:, 0, j] = cost(task, weights[j][:, 0] - task.true_weights)

    use_oracle = config.policy.gain_mode is GainMode.ORACLE
    for k in range(K):
        try:
            grads = []
            sq_norms = np.empty((R, m))
            for j, task in enumerate(config.tasks):
                H, eps, N = task.input_second_moment, config.stepsizes[j], config.batch_size
                x, y = data[j][0][:, k], data[j][1][:, k]
                w = weights[j][:, k]
                e = w - task.true_weights
                exact = (e[:, None, :] * H).sum(axis=-1)
                if config.exact_gradient:
                    g = exact
                else:
                    residual = (x * w[:, None, :]).sum(axis=-1) - y
                    g = (x * residual[:, :, None]).sum(axis=1) / N
                proj = (x * g[:, None, :]).sum(axis=-1)
                gg = (g * g).sum(axis=-1)
                gain_est[:, k, j] = 0.5 * eps**2 * (proj**2).mean(axis=-1) - eps * gg
                hg = (g[:, None, :] * H).sum(axis=-1)
                gain_oracle[:, k, j] = -eps * (g * exact).sum(axis=-1) + 0.5 * eps**2 * (g * hg).sum(axis=-1)
                sq_norms[:, j] = gg
                grads.append(g)

            gains = gain_oracle[:, k] if use_oracle else gain_est[:, k]
            mask = _step_masks(config, k, gains, sq_norms, random_masks)
            alphas[:, k] = mask

            for j, task in enumerate(config.tasks):
                w = weights[j][:, k]
                weights[j][:, k + 1] = np.where(mask[:, j, None], w - config.stepsizes[j] * grads[j], w)
                costs[:, k + 1, j] = cost(task, weights[j][:, k + 1] - task.true_weights)
        except Exception as exc:
            raise SimulationError(f"iteration {k}: {exc}") from exc

    return Ensemble(config, runs, weights, costs, gain_est, gain_oracle, alphas)


def _concat(config: SimConfig, parts: list[Ensemble]) -> Ensemble:
    if len(parts) == 1:
        return parts[0]
    return Ensemble(
        config,
        np.concatenate([p.run_indices for p in parts]),
        [np.concatenate([p.weights[j] for p in parts]) for j in range(config.num_tasks)],
        np.concatenate([p.costs for p in parts]),
        np.concatenate([p.gain_est for p in parts]),
        np.concatenate([p.gain_oracle for p in parts]),
        np.concatenate([p.alphas for p in parts]),
    )


def monte_carlo(config: SimConfig, runs: int, workers: int = 1, chunk_size: int | None = None) -> Ensemble:
    """Simulate runs ``0..runs-1``; run ``r`` uses stream index ``r``.

    Runs are processed in chunks, optionally on a thread pool; chunking and
    worker count never change the numbers.
    """
    if runs < 1:
        raise ContractViolation(f"runs must be >= 1, got {runs}")
    chunk_size = chunk_size or DEFAULT_CHUNK
    chunks = [np.arange(s, min(s + chunk_size, runs)) for s in range(0, runs, chunk_size)]
    log.debug("monte_carlo: %d runs in %d chunks, %d workers", runs, len(chunks), workers)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _simulate_block(config, c), chunks))
    else:
        parts = [_simulate_block(config, c) for c in chunks]
    return _concat(config, parts)


def run(config: SimConfig, run_index: int = 0) -> Trajectory:
    return _simulate_block(config, np.array([run_index])).trajectory(0)
