"""QUBO matrices, energies, and the squared-error training loss.

A QUBO over ``n`` binary variables is stored as a dense upper-triangular
``(n, n)`` float64 array.  The energy of a bit vector ``x`` is
``sum_{i <= j} Q[i, j] * x[i] * x[j]``, which equals ``x @ Q @ x`` because
the strict lower triangle is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "QuboMatrix",
    "LabeledBatch",
    "TrainingDivergedError",
    "as_bits",
    "energy",
    "batch_energy",
    "loss",
    "loss_gradient",
    "gradient_descent_epochs",
    "random_init",
]


class TrainingDivergedError(RuntimeError):
    """Raised when gradient descent produces a non-finite loss or matrix."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


@dataclass(frozen=True, eq=False)
class QuboMatrix:
    """Upper-triangular QUBO coefficient matrix.

    ``values`` is an ``(n, n)`` float64 array whose strict lower triangle is
    zero.  The array is copied on construction and marked read-only, so a
    ``QuboMatrix`` can be shared freely.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError(f"QUBO matrix must be square and non-empty, got shape {arr.shape}")
        if np.any(np.tril(arr, -1) != 0.0):
            raise ValueError("QUBO matrix has entries below the diagonal; use QuboMatrix.from_dense")
        if not np.all(np.isfinite(arr)):
            raise ValueError("QUBO matrix contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def num_coefficients(self) -> int:
        return self.n * (self.n + 1) // 2

    @classmethod
    def zeros(cls, n: int) -> "QuboMatrix":
        return cls(np.zeros((n, n)))

    @classmethod
    def from_dense(cls, dense) -> "QuboMatrix":
        """Fold an arbitrary square matrix into upper-triangular form.

        ``Q[i, j] + Q[j, i]`` is moved onto the upper entry, which preserves
        ``x @ Q @ x`` for every binary ``x``.
        """
        dense = np.asarray(dense, dtype=np.float64)
        folded = np.triu(dense) + np.triu(dense.T, 1)
        return cls(folded)

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[tuple[int, int, float]]) -> "QuboMatrix":
        """Build from ``(i, j, value)`` triples; ``i > j`` is folded onto ``(j, i)``."""
        arr = np.zeros((n, n))
        for i, j, v in entries:
            if i > j:
                i, j = j, i
            arr[i, j] += v
        return cls(arr)

    def coefficients(self) -> np.ndarray:
        """The ``n(n+1)/2`` stored coefficients in row-major upper order."""
        return self.values[np.triu_indices(self.n)]

    def entries(self) -> list[tuple[int, int, float]]:
        rows, cols = np.nonzero(self.values)
        return [(int(i), int(j), float(self.values[i, j])) for i, j in zip(rows, cols)]

    def to_text(self) -> str:
        lines = [str(self.n)]
        lines.extend(f"{i} {j} {v:.17g}" for i, j, v in self.entries())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QuboMatrix":
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines:
            raise ValueError("empty QUBO text")
        n = int(lines[0])
        entries = []
        for lineno, ln in enumerate(lines[1:], start=2):
            parts = ln.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'i j value', got {ln!r}")
            i, j = int(parts[0]), int(parts[1])
            if not (0 <= i <= j < n):
                raise ValueError(f"line {lineno}: index pair ({i}, {j}) outside upper triangle of n={n}")
            entries.append((i, j, float(parts[2])))
        return cls.from_entries(n, entries)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "QuboMatrix":
        return cls.from_text(Path(path).read_text())

    def __eq__(self, other):
        if not isinstance(other, QuboMatrix):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"QuboMatrix(n={self.n})"


@dataclass(frozen=True, eq=False)
class LabeledBatch:
    """Bit vectors paired with regression targets.

    ``vectors`` is an ``(m, n)`` float64 array of 0/1 entries and ``targets``
    an ``(m,)`` float64 array.
    """

    vectors: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.vectors, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size else X.reshape(0, 0)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} vectors but {y.shape[0]} targets")
        if not np.all(np.isfinite(y)):
            raise ValueError("targets must be finite")
        object.__setattr__(self, "vectors", X)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.targets.shape[0]


def as_bits(x, n: int | None = None) -> np.ndarray:
    """Validate a single bit vector and return it as a float64 array."""
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"vector length {arr.shape[0]} does not match n={n}")
    if np.any((arr != 0.0) & (arr != 1.0)):
        raise ValueError("vector entries must be 0 or 1")
    return arr


def _as_matrix(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return X.reshape(0, n)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != n:
        raise ValueError(f"vector length {X.shape[1]} does not match n={n}")
    return X


def energy(Q: QuboMatrix, x: Sequence[int]) -> float:
    """Return ``sum_{i <= j} Q[i, j] x_i x_j``."""
    bits = as_bits(x, Q.n)
    return float(bits @ Q.values @ bits)


def _energies(values: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", X @ values, X)


def batch_energy(Q: QuboMatrix, X) -> np.ndarray:
    """Energies of each row of ``X``; an empty input gives an empty array."""
    X = _as_matrix(X, Q.n)
    if X.shape[0] == 0:
        return np.zeros(0)
    return _energies(Q.values, X)


def _check_batch(Q: QuboMatrix, batch: LabeledBatch) -> None:
    if len(batch) == 0:
        raise ValueError("empty training batch")
    if batch.vectors.shape[1] != Q.n:
        raise ValueError(f"batch vectors have length {batch.vectors.shape[1]}, QUBO has n={Q.n}")


def loss(Q: QuboMatrix, batch: LabeledBatch) -> float:
    """Sum of squared residuals ``(x^T Q x - y_target)^2`` over the batch."""
    _check_batch(Q, batch)
    r = _energies(Q.values, batch.vectors) - batch.targets
    return float(r @ r)


def _gradient(values: np.ndarray, X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    r = _energies(values, X) - y
    G = 2.0 * (X * r[:, None]).T @ X
    return np.triu(G), float(r @ r)


def loss_gradient(Q: QuboMatrix, batch: LabeledBatch) -> np.ndarray:
    """Gradient of :func:`loss` with respect to each stored coefficient.

    Entry ``(i, j)`` with ``i <= j`` is ``sum 2 * residual * x_i * x_j``;
    the strict lower triangle is zero.
    """
    _check_batch(Q, batch)
    G, _ = _gradient(Q.values, batch.vectors, batch.targets)
    return G


def gradient_descent_epochs(
    Q: QuboMatrix,
    batch: LabeledBatch,
    learning_rate: float,
    epochs: int,
    *,
    history: list | None = None,
    stop_on_plateau: bool = False,
    plateau_tol: float = 1e-4,
    plateau_window: int = 10,
) -> QuboMatrix:
    """Run full-batch gradient descent ``Q <- Q - lr * grad`` for ``epochs`` steps.

    The loss before each step is appended to ``history`` when given.  With
    ``stop_on_plateau`` the loop ends early once the loss changed by less
    than ``plateau_tol`` (relative) over the last ``plateau_window`` epochs.

    Raises :class:`TrainingDivergedError` when the loss or the matrix stops
    being finite.
    """
    if not learning_rate > 0:
        raise ValueError(f"learning_rate must be positive, got {learning_rate}")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    _check_batch(Q, batch)

    values = np.array(Q.values)
    X, y = batch.vectors, batch.targets
    recent: list[float] = []
    for epoch in range(epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            G, current = _gradient(values, X, y)
        if not math.isfinite(current):
            raise TrainingDivergedError(epoch, f"loss became non-finite at epoch {epoch}")
        if history is not None:
            history.append(current)
        if stop_on_plateau:
            recent.append(current)
            if len(recent) > plateau_window:
                old = recent.pop(0)
                if abs(old - current) <= plateau_tol * max(abs(old), 1e-300):
                    break
        with np.errstate(over="ignore", invalid="ignore"):
            values -= learning_rate * G
        if not np.all(np.isfinite(values)):
            raise TrainingDivergedError(epoch, f"QUBO coefficients became non-finite at epoch {epoch}")
    return QuboMatrix(values)


def random_init(n: int, rng_seed: int) -> QuboMatrix:
    """Upper-triangular matrix with coefficients i.i.d. uniform on [-1, 1]."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(rng_seed)
    values = np.zeros((n, n))
    iu = np.triu_indices(n)
    values[iu] = rng.uniform(-1.0, 1.0, size=iu[0].shape[0])
    return QuboMatrix(values)
