"""Data-driven gradient and gain estimates computed from a single batch."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from gainsched.core_model import ContractViolation, TaskSpec, exact_gain
from gainsched.data import DataBatch


class GainMode(str, enum.Enum):
    ESTIMATED = "estimated"
    ORACLE = "oracle"


@dataclass(frozen=True)
class GainEstimate:
    value: float
    gradient: np.ndarray
    mode: GainMode


def _weights(batch: DataBatch, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (batch.features.shape[1],):
        raise ContractViolation(f"w has shape {w.shape}, batch dimension is {batch.features.shape[1]}")
    return w


def stochastic_gradient(batch: DataBatch, w) -> np.ndarray:
    residual = batch.features @ _weights(batch, w) - batch.labels
    return batch.features.T @ residual / batch.size


def empirical_hessian(batch: DataBatch) -> np.ndarray:
    x = batch.features
    return x.T @ x / batch.size


def empirical_objective(batch: DataBatch, w) -> float:
    residual = batch.labels - batch.features @ _weights(batch, w)
    return 0.5 * float(np.mean(residual**2))


def approximate_gain(features: np.ndarray, g: np.ndarray, stepsize: float) -> float:
    """Gain estimate using the batch gradient ``g`` and the batch Hessian.

    Evaluated in O(N n) as ``eps^2/2 * mean((g . x_i)^2) - eps * g . g``
    without forming the Hessian.
    """
    proj = features @ g
    return float(0.5 * stepsize**2 * np.mean(proj**2) - stepsize * (g @ g))


def estimated_gain(
    batch: DataBatch,
    w,
    stepsize: float,
    mode: GainMode | str = GainMode.ESTIMATED,
    task_for_oracle: TaskSpec | None = None,
) -> GainEstimate:
    mode = GainMode(mode)
    if not stepsize > 0:
        raise ContractViolation(f"stepsize must be positive, got {stepsize}")
    g = stochastic_gradient(batch, w)
    if mode is GainMode.ORACLE:
        if task_for_oracle is None:
            raise ContractViolation("oracle gain mode needs the task definition")
        value = exact_gain(task_for_oracle, w, g, stepsize)
    else:
        value = approximate_gain(batch.features, g, stepsize)
    return GainEstimate(value=value, gradient=g, mode=mode)
