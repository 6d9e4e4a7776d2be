"""Seeded synthetic data for Gaussian linear regression tasks.

Random numbers come from numpy's PCG64 bit generator. Every logical stream is
keyed by ``(master_seed, *indices)`` through ``numpy.random.SeedSequence``
spawn keys, so run ``r`` / task ``j`` sees the same data no matter how many
other runs or tasks exist or in which order they execute.

Each sample consumes ``n + 1`` consecutive standard normals (``n`` for the
features, one for the label noise). Drawing ``K`` batches one after another
therefore yields exactly the same numbers as drawing one ``(K, N, n + 1)``
block, which the vectorised simulator relies on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gainsched.core_model import ContractViolation, NotPositiveDefinite, TaskSpec

ALGORITHM_ID = "numpy.PCG64/SeedSequence"
POLICY_STREAM = 2**31 - 1


class EmptyBatch(ValueError):
    pass


def cholesky_factor(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0:
            raise NotPositiveDefinite(j, float(pivot))
        L[j, j] = np.sqrt(pivot)
        for i in range(j + 1, n):
            L[i, j] = (a[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass
class RngStream:
    master_seed: int
    indices: tuple[int, ...] = ()
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ContractViolation(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        self.indices = tuple(int(i) for i in self.indices)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.indices)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    @property
    def algorithm_id(self) -> str:
        return ALGORITHM_ID

    @property
    def origin(self) -> tuple[int, tuple[int, ...]]:
        return self.master_seed, self.indices


def task_stream(master_seed: int, run: int, task: int) -> RngStream:
    return RngStream(master_seed, (run, task))


def policy_stream(master_seed: int, run: int) -> RngStream:
    return RngStream(master_seed, (run, POLICY_STREAM))


@dataclass(frozen=True)
class DataBatch:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ContractViolation(f"features {x.shape} and labels {y.shape} do not form a batch")
        if y.size == 0:
            raise EmptyBatch("a batch needs at least one sample")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def size(self) -> int:
        return self.labels.size

    def to_csv(self, path) -> None:
        n = self.features.shape[1]
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x_{i + 1}" for i in range(n)] + ["y"])
            for xi, yi in zip(self.features.tolist(), self.labels.tolist()):
                writer.writerow(xi + [yi])


def transform_normals(task: TaskSpec, z: np.ndarray, chol: np.ndarray | None = None):
    """Map standard normals of shape ``(..., N, n + 1)`` to features and labels.

    The linear maps are written as explicit elementwise sums so every sample is
    reduced in the same order whatever the leading shape is.
    """
    n = task.dim
    if chol is None:
        chol = cholesky_factor(task.input_second_moment)
    x = (z[..., None, :n] * chol).sum(axis=-1)
    y = (x * task.true_weights).sum(axis=-1) + np.sqrt(task.noise_variance) * z[..., n]
    return x, y


def draw_normals(rng: RngStream, shape: tuple[int, ...], dim: int) -> np.ndarray:
    return rng.generator.standard_normal(size=(*shape, dim + 1))


def sample_batch(task: TaskSpec, count: int, rng: RngStream) -> DataBatch:
    if count < 1:
        raise EmptyBatch(f"batch size must be >= 1, got {count}")
    x, y = transform_normals(task, draw_normals(rng, (count,), task.dim))
    return DataBatch(x, y)
