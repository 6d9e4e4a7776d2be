"""Closed-form quantities of a Gaussian linear regression task.

The task generates ``y = x^T w_star + eta`` with ``E[x x^T] = H`` and
``Var(eta) = noise_variance``, so the expected half squared error is the
quadratic ``J(w) = noise_variance / 2 + (w - w_star)^T (H / 2) (w - w_star)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_RTOL = 1e-12


class ContractViolation(ValueError):
    """Raised when array shapes or scalar arguments break an operation's contract."""


class NotPositiveDefinite(ValueError):
    """Raised when a matrix that must be SPD fails a Cholesky pivot."""

    def __init__(self, pivot: int, value: float):
        self.pivot = pivot
        self.value = value
        super().__init__(f"matrix is not positive definite: pivot {pivot} is {value!r}")


def _check_symmetric(matrix: np.ndarray, name: str) -> np.ndarray:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {matrix.shape}")
    scale = max(float(np.max(np.abs(matrix))), np.finfo(float).tiny)
    asym = float(np.max(np.abs(matrix - matrix.T)))
    if asym > SYMMETRY_RTOL * scale:
        raise ContractViolation(f"{name} is not symmetric (max asymmetry {asym:.3e})")
    return 0.5 * (matrix + matrix.T)


@dataclass(frozen=True)
class TaskSpec:
    true_weights: np.ndarray
    input_second_moment: np.ndarray
    noise_variance: float = 1.0

    def __post_init__(self):
        w = np.array(self.true_weights, dtype=float)
        h = np.array(self.input_second_moment, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ContractViolation(f"true_weights must be a nonempty vector, got shape {w.shape}")
        if h.shape != (w.size, w.size):
            raise ContractViolation(
                f"input_second_moment has shape {h.shape}, expected {(w.size, w.size)}"
            )
        h = _check_symmetric(h, "input_second_moment")
        # local import: data.cholesky_factor raises NotPositiveDefinite with the pivot index
        from gainsched.data import cholesky_factor

        cholesky_factor(h)
        if not np.isfinite(self.noise_variance) or self.noise_variance < 0:
            raise ContractViolation(f"noise_variance must be >= 0, got {self.noise_variance}")
        w.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "true_weights", w)
        object.__setattr__(self, "input_second_moment", h)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @property
    def dim(self) -> int:
        return self.true_weights.size

    @property
    def noise_floor(self) -> float:
        """J(w_star): the irreducible expected cost."""
        return 0.5 * self.noise_variance

    def to_dict(self) -> dict:
        return {
            "true_weights": self.true_weights.tolist(),
            "input_second_moment": self.input_second_moment.tolist(),
            "noise_variance": self.noise_variance,
        }


@dataclass(frozen=True)
class SpectralInfo:
    eigenvalues: np.ndarray
    contraction: float
    half_moment: np.ndarray
    stepsize: float


def _vector(task: TaskSpec, v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (task.dim,):
        raise ContractViolation(f"{name} has shape {v.shape}, expected ({task.dim},)")
    return v


def exact_objective(task: TaskSpec, w) -> float:
    e = _vector(task, w, "w") - task.true_weights
    return task.noise_floor + 0.5 * float(e @ task.input_second_moment @ e)


def exact_gradient(task: TaskSpec, w) -> np.ndarray:
    e = _vector(task, w, "w") - task.true_weights
    return task.input_second_moment @ e


def exact_gain(task: TaskSpec, w, g, stepsize: float) -> float:
    """Change in true cost, ``J(w - stepsize * g) - J(w)``.

    Uses the first/second order expansion, which is exact for a quadratic.
    """
    if not stepsize > 0:
        raise ContractViolation(f"stepsize must be positive, got {stepsize}")
    g = _vector(task, g, "g")
    grad = exact_gradient(task, w)
    hg = task.input_second_moment @ g
    return float(-stepsize * (g @ grad) + 0.5 * stepsize**2 * (g @ hg))


def eigenvalues(task: TaskSpec) -> np.ndarray:
    return np.linalg.eigvalsh(task.input_second_moment)


def contraction_factor(task: TaskSpec, stepsize: float) -> SpectralInfo:
    if not stepsize > 0:
        raise ContractViolation(f"stepsize must be positive, got {stepsize}")
    lam = eigenvalues(task)
    rho = float(np.max((1.0 - stepsize * lam) ** 2))
    return SpectralInfo(
        eigenvalues=lam,
        contraction=rho,
        half_moment=0.5 * task.input_second_moment,
        stepsize=float(stepsize),
    )


def max_stepsize(task: TaskSpec) -> float:
    """Largest stepsize (exclusive) for which plain gradient descent contracts."""
    return 2.0 / float(eigenvalues(task)[-1])
