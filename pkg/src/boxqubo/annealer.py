"""Simulated-annealing sampler for QUBO matrices.

Each read is an independent single-spin-flip Metropolis chain with a
geometric inverse-temperature schedule.  Local fields are cached so a flip
proposal costs O(1) and an accepted flip O(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from boxqubo.qubo_core import QuboMatrix, batch_energy

__all__ = ["AnnealSchedule", "SampleSet", "anneal", "best_k", "read_seeds"]


@dataclass(frozen=True)
class AnnealSchedule:
    """Sampler budget and temperature range.

    ``sweeps_per_read=None`` means ``10 * n`` for the QUBO being sampled.
    Each read reports the ``pool_size`` lowest-energy distinct states it
    visited, so a single deep minimum still yields several distinct samples.
    """

    num_reads: int = 50
    sweeps_per_read: int | None = None
    beta_start: float = 0.1
    beta_end: float = 10.0
    pool_size: int = 10

    def __post_init__(self):
        if self.num_reads < 1:
            raise ValueError(f"num_reads must be >= 1, got {self.num_reads}")
        if self.sweeps_per_read is not None and self.sweeps_per_read < 1:
            raise ValueError(f"sweeps_per_read must be >= 1, got {self.sweeps_per_read}")
        if self.pool_size < 1:
            raise ValueError(f"pool_size must be >= 1, got {self.pool_size}")
        if not self.beta_start > 0:
            raise ValueError(f"beta_start must be positive, got {self.beta_start}")
        if not self.beta_end > self.beta_start:
            raise ValueError("beta_end must exceed beta_start")

    def sweeps_for(self, n: int) -> int:
        return self.sweeps_per_read if self.sweeps_per_read is not None else 10 * n

    def betas(self, n: int) -> np.ndarray:
        sweeps = self.sweeps_for(n)
        if sweeps == 1:
            return np.array([self.beta_end])
        return np.geomspace(self.beta_start, self.beta_end, sweeps)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Distinct bit vectors sorted by energy, ties in lexicographic order."""

    vectors: np.ndarray  # (m, n) uint8
    energies: np.ndarray  # (m,) float64

    def __len__(self):
        return self.energies.shape[0]

    def __iter__(self):
        for x, e in zip(self.vectors, self.energies):
            yield x, float(e)

    @classmethod
    def from_vectors(cls, Q: QuboMatrix, vectors) -> "SampleSet":
        """Deduplicate, re-evaluate exactly and sort ``vectors`` against ``Q``."""
        X = np.asarray(vectors, dtype=np.uint8).reshape(-1, Q.n)
        if X.shape[0]:
            X = np.unique(X, axis=0)  # lexicographic row order
        E = batch_energy(Q, X)
        order = np.argsort(E, kind="stable")
        return cls(X[order], E[order])


@njit(cache=True)
def _offer(pool_x, pool_e, x, e):
    worst = 0
    for p in range(pool_e.shape[0]):
        if pool_e[p] > pool_e[worst]:
            worst = p
    if e >= pool_e[worst]:
        return
    tol = 1e-9 * (1.0 + abs(e))
    for p in range(pool_e.shape[0]):
        if abs(pool_e[p] - e) <= tol:
            same = True
            for i in range(x.shape[0]):
                if pool_x[p, i] != x[i]:
                    same = False
                    break
            if same:
                return
    pool_x[worst, :] = x
    pool_e[worst] = e


@njit(cache=True)
def _run_reads(S, diag, betas, seeds, pool_size):
    n = diag.shape[0]
    reads = seeds.shape[0]
    out = np.zeros((reads * pool_size, n), dtype=np.uint8)
    filled = np.zeros(reads * pool_size, dtype=np.bool_)
    for r in range(reads):
        np.random.seed(seeds[r])
        x = np.zeros(n, dtype=np.uint8)
        for i in range(n):
            if np.random.random() < 0.5:
                x[i] = 1
        field = np.zeros(n)
        for i in range(n):
            if x[i]:
                for j in range(n):
                    field[j] += S[i, j]
        e = 0.0
        for i in range(n):
            if x[i]:
                e += diag[i] + 0.5 * field[i]
        pool_x = np.zeros((pool_size, n), dtype=np.uint8)
        pool_e = np.full(pool_size, np.inf)
        _offer(pool_x, pool_e, x, e)
        for s in range(betas.shape[0]):
            beta = betas[s]
            for i in range(n):
                delta = diag[i] + field[i]
                if x[i]:
                    delta = -delta
                if delta <= 0.0 or np.random.random() < np.exp(-beta * delta):
                    step = -1.0 if x[i] else 1.0
                    x[i] = 1 - x[i]
                    for j in range(n):
                        field[j] += step * S[i, j]
                    e += delta
                    _offer(pool_x, pool_e, x, e)
        for p in range(pool_size):
            if pool_e[p] < np.inf:
                out[r * pool_size + p] = pool_x[p]
                filled[r * pool_size + p] = True
    return out[filled]


def read_seeds(rng_seed: int, num_reads: int) -> np.ndarray:
    """Per-read seeds; a prefix of the reads always gets the same seeds."""
    return np.random.SeedSequence(rng_seed).generate_state(num_reads).astype(np.int64)


def anneal(Q: QuboMatrix, schedule: AnnealSchedule | None = None, rng_seed: int = 0) -> SampleSet:
    """Draw low-energy samples of ``Q``.

    Every read starts from a uniformly random vector and returns the lowest
    energy distinct states it visited (up to ``schedule.pool_size``).  Results are deduplicated and sorted, so the
    output does not depend on the order reads finish in.
    """
    schedule = schedule or AnnealSchedule()
    values = Q.values
    diag = np.ascontiguousarray(np.diag(values))
    S = values + values.T
    np.fill_diagonal(S, 0.0)
    seeds = read_seeds(rng_seed, schedule.num_reads)
    states = _run_reads(np.ascontiguousarray(S), diag, schedule.betas(Q.n), seeds, schedule.pool_size)
    return SampleSet.from_vectors(Q, states)


def best_k(samples: SampleSet, k: int) -> np.ndarray:
    """The ``min(k, len(samples))`` lowest-energy vectors of a sample set.

    Ties in energy are broken by lexicographic vector order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(samples) == 0:
        raise ValueError("empty sample set")
    V = samples.vectors
    # lexsort keys: last key is primary
    keys = [V[:, j] for j in range(V.shape[1] - 1, -1, -1)] + [samples.energies]
    order = np.lexsort(keys)
    return V[order[:k]].copy()
