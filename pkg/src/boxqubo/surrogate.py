"""Surrogate training: the classification + regression QUBO fit and a
pure-regression factorization-machine baseline.

The QUBO fit sorts the training data by energy and keeps the best fraction
as the elite set ``L``; everything else forms ``H``.  Each cycle builds a
temporary batch from all of ``L`` (regressed onto their true energies) and
those members of ``H`` that the current QUBO scores below the threshold
``tau`` (pushed back up to ``tau``), then runs gradient descent on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from boxqubo.qubo_core import (
    LabeledBatch,
    QuboMatrix,
    TrainingDivergedError,
    _energies,
    as_bits,
    gradient_descent_epochs,
)

__all__ = [
    "Dataset",
    "SplitResult",
    "TrainParams",
    "LowRankModel",
    "split_dataset",
    "build_temporary_set",
    "train_box_qubo",
    "train_regression_baseline",
    "model_to_qubo",
]


class Dataset:
    """Training memory of distinct bit vectors with oracle energies.

    Insertion order is preserved; it breaks ties when sorting by energy.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        self.n = n
        self._rows: list[np.ndarray] = []
        self._energies: list[float] = []
        self._valid: list[bool] = []
        self._index: dict[bytes, int] = {}
        self._cache = None

    @staticmethod
    def _key(bits: np.ndarray) -> bytes:
        return bits.astype(np.uint8).tobytes()

    def __len__(self):
        return len(self._rows)

    def __contains__(self, x) -> bool:
        return self._key(as_bits(x, self.n)) in self._index

    def add(self, x, energy: float, is_valid: bool = True) -> bool:
        """Append a record; returns False (and stores nothing) for a duplicate vector."""
        bits = as_bits(x, self.n).astype(np.uint8)
        key = self._key(bits)
        if key in self._index:
            return False
        energy = float(energy)
        if not math.isfinite(energy):
            raise ValueError(f"non-finite energy {energy}")
        self._index[key] = len(self._rows)
        self._rows.append(bits)
        self._energies.append(energy)
        self._valid.append(bool(is_valid))
        self._cache = None
        return True

    def _arrays(self):
        if self._cache is None:
            X = np.array(self._rows, dtype=np.uint8).reshape(-1, self.n)
            self._cache = (X, np.array(self._energies, dtype=np.float64), np.array(self._valid, dtype=bool))
        return self._cache

    @property
    def vectors(self) -> np.ndarray:
        return self._arrays()[0]

    @property
    def energies(self) -> np.ndarray:
        return self._arrays()[1]

    @property
    def valid(self) -> np.ndarray:
        return self._arrays()[2]

    def best(self) -> tuple[np.ndarray, float]:
        """Lowest-energy record (first inserted wins ties)."""
        if not self._rows:
            raise ValueError("empty dataset")
        i = int(np.argmin(self.energies))
        return self.vectors[i].copy(), float(self.energies[i])

    def copy(self) -> "Dataset":
        other = Dataset(self.n)
        other._rows = list(self._rows)
        other._energies = list(self._energies)
        other._valid = list(self._valid)
        other._index = dict(self._index)
        return other


@dataclass(frozen=True, eq=False)
class SplitResult:
    """Elite indices ``L``, remaining indices ``H`` (both into the dataset,
    each in ascending-energy order) and the threshold ``tau``."""

    dataset: Dataset
    L: np.ndarray
    H: np.ndarray
    tau: float

    @property
    def L_vectors(self) -> np.ndarray:
        return self.dataset.vectors[self.L]

    @property
    def L_energies(self) -> np.ndarray:
        return self.dataset.energies[self.L]

    @property
    def H_vectors(self) -> np.ndarray:
        return self.dataset.vectors[self.H]

    @property
    def H_energies(self) -> np.ndarray:
        return self.dataset.energies[self.H]


def split_dataset(D: Dataset, split_fraction: float, exclude_invalids: bool = False) -> SplitResult:
    """Sort ``D`` by energy and cut off the best ``split_fraction`` as ``L``.

    ``|L| = max(1, round(split_fraction * |eligible|))`` where eligible
    records are all records, or only valid ones with ``exclude_invalids``.
    Equal energies keep insertion order, so two records with the same energy
    may end up on different sides of the cut.
    """
    if not 0 < split_fraction <= 1:
        raise ValueError(f"split_fraction must lie in (0, 1], got {split_fraction}")
    energies = D.energies
    eligible = np.flatnonzero(D.valid) if exclude_invalids else np.arange(len(D))
    if eligible.size == 0:
        raise ValueError("no eligible records to split" + (" (all invalid)" if len(D) else ""))
    order = eligible[np.argsort(energies[eligible], kind="stable")]
    size_L = min(eligible.size, max(1, math.floor(split_fraction * eligible.size + 0.5)))
    L = order[:size_L]
    in_L = np.zeros(len(D), dtype=bool)
    in_L[L] = True
    rest = np.flatnonzero(~in_L)
    H = rest[np.argsort(energies[rest], kind="stable")]
    return SplitResult(D, L, H, float(energies[L[-1]]))


def build_temporary_set(Q: QuboMatrix, split: SplitResult) -> LabeledBatch:
    """All of ``L`` with their energies, plus the members of ``H`` whose
    current prediction falls below ``tau``, targeted at ``tau``."""
    XL = split.L_vectors.astype(np.float64)
    XH = split.H_vectors.astype(np.float64)
    if XH.shape[0]:
        violating = _energies(Q.values, XH) < split.tau
        XH = XH[violating]
    X = np.vstack([XL, XH]) if XH.shape[0] else XL
    y = np.concatenate([split.L_energies, np.full(XH.shape[0], split.tau)])
    return LabeledBatch(X, y)


@dataclass(frozen=True)
class TrainParams:
    """Hyperparameters shared by the surrogate trainers.

    ``learning_rate`` is per training example: a gradient step on a batch
    of ``m`` vectors uses ``learning_rate / m`` on the summed loss, i.e.
    ``learning_rate`` on the mean squared error.
    """

    split_fraction: float = 0.1
    exclude_invalids: bool = False
    n_cycles: int = 5
    n_epochs: int = 150
    learning_rate: float = 0.005
    fm_rank: int = 8
    stop_on_plateau: bool = False

    def __post_init__(self):
        if not 0 < self.split_fraction <= 1:
            raise ValueError(f"split_fraction must lie in (0, 1], got {self.split_fraction}")
        if self.n_cycles < 1:
            raise ValueError(f"n_cycles must be >= 1, got {self.n_cycles}")
        if self.n_epochs < 1:
            raise ValueError(f"n_epochs must be >= 1, got {self.n_epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.fm_rank < 0:
            raise ValueError(f"fm_rank must be >= 0, got {self.fm_rank}")


def train_box_qubo(Q: QuboMatrix, D: Dataset, params: TrainParams, *, history: list | None = None) -> QuboMatrix:
    """Fit ``Q`` to ``D`` by simultaneous classification and regression.

    The split is computed once; each of ``params.n_cycles`` cycles rebuilds
    the temporary batch against the current ``Q`` and runs
    ``params.n_epochs`` gradient epochs on it.  When ``history`` is given,
    one dict per cycle is appended with the batch size, the number of
    violating ``H`` members and the loss before/after.
    """
    if len(D) == 0:
        raise ValueError("empty dataset")
    if D.n != Q.n:
        raise ValueError(f"dataset has n={D.n}, QUBO has n={Q.n}")
    split = split_dataset(D, params.split_fraction, params.exclude_invalids)
    for cycle in range(params.n_cycles):
        batch = build_temporary_set(Q, split)
        losses: list[float] = []
        Q = gradient_descent_epochs(
            Q,
            batch,
            params.learning_rate / len(batch),
            params.n_epochs,
            history=losses,
            stop_on_plateau=params.stop_on_plateau,
        )
        if history is not None:
            history.append(
                {
                    "cycle": cycle,
                    "batch_size": len(batch),
                    "violations": len(batch) - split.L.size,
                    "loss_start": losses[0],
                    "loss_end": losses[-1],
                }
            )
    return Q


@dataclass(frozen=True, eq=False)
class LowRankModel:
    """Second-order factorization machine
    ``y(x) = w0 + sum_i w_i x_i + sum_{i<j} <V_i, V_j> x_i x_j``."""

    w0: float
    w: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        V = np.asarray(self.V, dtype=np.float64).reshape(w.shape[0], -1)
        if not (math.isfinite(self.w0) and np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "w0", float(self.w0))
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "V", V)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def rank(self) -> int:
        return self.V.shape[1]

    @classmethod
    def init(cls, n: int, rank: int, rng_seed: int, scale: float = 0.1) -> "LowRankModel":
        rng = np.random.default_rng(rng_seed)
        return cls(0.0, np.zeros(n), rng.normal(0.0, scale, size=(n, rank)))

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.n)
        XV = X @ self.V
        pair = 0.5 * (np.sum(XV * XV, axis=1) - X @ np.sum(self.V * self.V, axis=1))
        return self.w0 + X @ self.w + pair


def train_regression_baseline(
    model: LowRankModel, D: Dataset, params: TrainParams, *, history: list | None = None
) -> LowRankModel:
    """Fit the factorization machine to every record of ``D`` by full-batch
    gradient descent on the mean squared error.

    Runs ``n_cycles * n_epochs`` epochs so the baseline gets the same step
    budget as :func:`train_box_qubo`.  There is no split and no
    classification term.  Targets are standardized internally (the returned
    model still predicts raw energies), which keeps plain gradient descent
    stable when energies sit far from zero.
    """
    if len(D) == 0:
        raise ValueError("empty dataset")
    if D.n != model.n:
        raise ValueError(f"dataset has n={D.n}, model has n={model.n}")
    X = D.vectors.astype(np.float64)
    # fit standardized targets; parameters are mapped back to raw energy units at the end
    center = float(D.energies.mean())
    scale = float(D.energies.std()) or 1.0
    y = (D.energies - center) / scale
    m = X.shape[0]
    lr = params.learning_rate
    w0 = (model.w0 - center) / scale
    w = model.w / scale
    V = model.V / np.sqrt(scale)
    recent: list[float] = []
    for epoch in range(params.n_cycles * params.n_epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            XV = X @ V
            pred = w0 + X @ w + 0.5 * (np.sum(XV * XV, axis=1) - X @ np.sum(V * V, axis=1))
            r = pred - y
            mse = float(r @ r) / m
            if not math.isfinite(mse):
                raise TrainingDivergedError(epoch, f"regression loss became non-finite at epoch {epoch}")
            if history is not None:
                history.append(mse)
            if params.stop_on_plateau:
                recent.append(mse)
                if len(recent) > 10:
                    old = recent.pop(0)
                    if abs(old - mse) <= 1e-4 * max(abs(old), 1e-300):
                        break
            g = (2.0 / m) * r
            Xg = X.T @ g  # sum_s g_s x_si
            grad_V = (X * g[:, None]).T @ XV - V * Xg[:, None]
            w0 -= lr * float(g.sum())
            w -= lr * Xg
            V -= lr * grad_V
            if not (math.isfinite(w0) and np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
                raise TrainingDivergedError(epoch, f"regression parameters became non-finite at epoch {epoch}")
    return LowRankModel(center + scale * w0, scale * w, np.sqrt(scale) * V)


def model_to_qubo(model: LowRankModel) -> QuboMatrix:
    """QUBO with the same minimizers as the model; the constant ``w0`` is dropped."""
    values = np.triu(model.V @ model.V.T, 1)
    values[np.diag_indices(model.n)] = model.w
    return QuboMatrix(values)
