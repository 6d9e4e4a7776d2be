"""Scheduling rules deciding which gradient updates get transmitted."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from gainsched.core_model import ContractViolation
from gainsched.estimator import GainMode


class PolicyKind(str, enum.Enum):
    THRESHOLD = "threshold"
    GREEDY_GAIN = "greedy_gain"
    GRADIENT_NORM = "gradient_norm"
    ROUND_ROBIN = "round_robin"
    UNIFORM_RANDOM = "uniform_random"
    ALWAYS_TRANSMIT = "always_transmit"
    NEVER_TRANSMIT = "never_transmit"


# Rules limited to ``budget`` transmissions per step. The others decide per task.
BUDGETED = {
    PolicyKind.GREEDY_GAIN,
    PolicyKind.GRADIENT_NORM,
    PolicyKind.ROUND_ROBIN,
    PolicyKind.UNIFORM_RANDOM,
}
BASELINES = {
    PolicyKind.ROUND_ROBIN,
    PolicyKind.UNIFORM_RANDOM,
    PolicyKind.ALWAYS_TRANSMIT,
    PolicyKind.NEVER_TRANSMIT,
}


@dataclass(frozen=True)
class PolicyConfig:
    kind: PolicyKind = PolicyKind.THRESHOLD
    lam: float = 0.0
    budget: int = 1
    gain_mode: GainMode = GainMode.ESTIMATED

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        object.__setattr__(self, "gain_mode", GainMode(self.gain_mode))
        if not self.lam >= 0:
            raise ContractViolation(f"lambda must be >= 0, got {self.lam}")
        if int(self.budget) != self.budget or self.budget < 1:
            raise ContractViolation(f"budget must be a positive integer, got {self.budget}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "budget", int(self.budget))

    def validate(self, num_tasks: int) -> None:
        if self.kind in BUDGETED and self.budget > num_tasks:
            raise ContractViolation(f"budget {self.budget} exceeds the number of tasks {num_tasks}")

    def capacity(self, num_tasks: int) -> int:
        """Maximum number of transmissions the rule can make in one step."""
        return self.budget if self.kind in BUDGETED else num_tasks


@dataclass(frozen=True)
class ScheduleDecision:
    alphas: np.ndarray

    @property
    def selected(self) -> frozenset[int]:
        return frozenset(int(j) for j in np.flatnonzero(self.alphas))

    @classmethod
    def from_indices(cls, indices, num_tasks: int) -> "ScheduleDecision":
        alphas = np.zeros(num_tasks, dtype=np.int8)
        alphas[list(indices)] = 1
        return cls(alphas)


def smallest_mask(scores: np.ndarray, budget: int) -> np.ndarray:
    """Boolean mask of the ``budget`` smallest entries along the last axis.

    Ties go to the lowest index (stable sort).
    """
    order = np.argsort(scores, axis=-1, kind="stable")[..., :budget]
    mask = np.zeros(scores.shape, dtype=bool)
    np.put_along_axis(mask, order, True, axis=-1)
    return mask


def threshold_mask(gains, lam: float) -> np.ndarray:
    return np.asarray(gains) <= -lam


def round_robin_mask(num_tasks: int, budget: int, step: int) -> np.ndarray:
    mask = np.zeros(num_tasks, dtype=bool)
    mask[(step * budget + np.arange(budget)) % num_tasks] = True
    return mask


def _check_budget(m: int, budget: int) -> None:
    if m < 1:
        raise ContractViolation("need at least one task")
    if not 1 <= budget <= m:
        raise ContractViolation(f"budget must lie in [1, {m}], got {budget}")


def threshold_decide(gain: float, lam: float) -> int:
    if lam < 0:
        raise ContractViolation(f"lambda must be >= 0, got {lam}")
    return int(gain <= -lam)


def greedy_gain_select(gains, budget: int = 1) -> ScheduleDecision:
    gains = np.asarray(gains, dtype=float)
    _check_budget(gains.size, budget)
    return ScheduleDecision(smallest_mask(gains, budget).astype(np.int8))


def gradient_norm_select(gradients, budget: int = 1) -> ScheduleDecision:
    if len(gradients) == 0:
        raise ContractViolation("need at least one gradient")
    _check_budget(len(gradients), budget)
    sq_norms = np.array([float(np.dot(g, g)) for g in gradients])
    return ScheduleDecision(smallest_mask(-sq_norms, budget).astype(np.int8))


def baseline_select(kind, num_tasks: int, budget: int, step: int, rng=None) -> ScheduleDecision:
    kind = PolicyKind(kind)
    if kind is PolicyKind.ROUND_ROBIN:
        _check_budget(num_tasks, budget)
        return ScheduleDecision(round_robin_mask(num_tasks, budget, step).astype(np.int8))
    if kind is PolicyKind.UNIFORM_RANDOM:
        _check_budget(num_tasks, budget)
        if rng is None:
            raise ContractViolation("uniform_random needs an rng stream")
        picks = rng.generator.choice(num_tasks, size=budget, replace=False)
        return ScheduleDecision.from_indices(picks, num_tasks)
    if kind is PolicyKind.ALWAYS_TRANSMIT:
        return ScheduleDecision(np.ones(num_tasks, dtype=np.int8))
    if kind is PolicyKind.NEVER_TRANSMIT:
        return ScheduleDecision(np.zeros(num_tasks, dtype=np.int8))
    raise ContractViolation(f"{kind.value} is not a baseline policy")
