"""Convergence and communication bounds for the threshold policy, and checks of
Monte Carlo output against them."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gainsched.core_model import ContractViolation, TaskSpec, contraction_factor, exact_objective

REPORT_COLUMNS = ["iter", "bound", "empirical_mean", "empirical_se", "violated"]
SLACK_SE = 2.0


class BoundKind(str, enum.Enum):
    CONVERGENCE_ENVELOPE = "convergence_envelope"
    COMMUNICATION_RATE = "communication_rate"


@dataclass(frozen=True)
class GradientNoise:
    covariance: np.ndarray


def equilibrium_gradient_covariance(task: TaskSpec, batch_size: int) -> GradientNoise:
    """Covariance of the batch gradient at ``w = w_star``: ``noise_variance * H / N``."""
    if batch_size < 1:
        raise ContractViolation(f"batch_size must be >= 1, got {batch_size}")
    return GradientNoise(task.noise_variance * task.input_second_moment / batch_size)


def envelope_limit(task: TaskSpec, stepsize: float, lam: float, noise: GradientNoise) -> float:
    rho = contraction_factor(task, stepsize).contraction
    if rho >= 1:
        raise ContractViolation(f"contraction factor {rho} >= 1: stepsize {stepsize} gives a vacuous bound")
    trace = float(np.trace(0.5 * task.input_second_moment @ noise.covariance))
    return task.noise_floor + (lam + stepsize**2 * trace) / (1.0 - rho)


def convergence_envelope(
    task: TaskSpec, stepsize: float, lam: float, noise: GradientNoise, w0, horizon: int
) -> np.ndarray:
    """Upper bound on ``E J(w_k)`` for ``k = 0..horizon``.

    ``rho^k J(w0) + (1 - rho^k) * limit`` with ``limit`` from :func:`envelope_limit`.
    """
    if lam < 0:
        raise ContractViolation(f"lambda must be >= 0, got {lam}")
    limit = envelope_limit(task, stepsize, lam, noise)
    rho = contraction_factor(task, stepsize).contraction
    decay = rho ** np.arange(horizon + 1, dtype=float)
    return decay * exact_objective(task, w0) + (1.0 - decay) * limit


def communication_budget(task: TaskSpec, w0, lam: float) -> float:
    """Bound on the expected total number of transmissions over an infinite horizon."""
    if not lam > 0:
        raise ContractViolation("lambda must be > 0; with lambda = 0 the budget is unbounded")
    return (exact_objective(task, w0) - task.noise_floor) / lam


@dataclass
class BoundReport:
    kind: BoundKind
    bound: np.ndarray
    empirical_mean: np.ndarray
    empirical_se: np.ndarray
    guaranteed: bool = True

    @property
    def excess(self) -> np.ndarray:
        """Positive where the empirical mean exceeds the bound by more than the slack."""
        return self.empirical_mean - SLACK_SE * self.empirical_se - self.bound

    @property
    def violated_at(self) -> np.ndarray:
        return self.excess > 0

    @property
    def violated(self) -> bool:
        return bool(self.violated_at.any())

    @property
    def margin(self) -> float:
        """Smallest distance to violation; negative when violated."""
        return float(np.min(self.bound + SLACK_SE * self.empirical_se - self.empirical_mean))

    @property
    def worst_iter(self) -> int:
        return int(np.argmax(self.excess))

    def rows(self):
        for k in range(self.bound.size):
            yield [
                k,
                float(self.bound[k]),
                float(self.empirical_mean[k]),
                float(self.empirical_se[k]),
                str(bool(self.violated_at[k])).lower(),
            ]

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            writer.writerows(self.rows())


def check_bounds(kind, bound, empirical_mean, empirical_se, guaranteed: bool = True) -> BoundReport:
    """Compare per-iteration Monte Carlo means to a bound.

    A scalar ``bound`` is broadcast over all iterations (the communication
    budget caps every partial sum of transmissions).
    """
    mean = np.asarray(empirical_mean, dtype=float)
    se = np.asarray(empirical_se, dtype=float)
    if mean.shape != se.shape or mean.ndim != 1:
        raise ContractViolation(f"empirical mean {mean.shape} and se {se.shape} must be matching vectors")
    b = np.asarray(bound, dtype=float)
    if b.ndim == 0:
        b = np.full(mean.shape, float(b))
    elif b.shape != mean.shape:
        raise ContractViolation(f"bound covers {b.size} iterations but the empirical data has {mean.size}")
    return BoundReport(BoundKind(kind), b, mean, se, guaranteed)
