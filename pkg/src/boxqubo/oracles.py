"""Black-box oracles for MAX-k-SAT, feedback vertex set and maximum clique.

Every oracle maps a bit vector to an energy to be minimized and a validity
flag.  Infeasible vectors (cycles left after deletion, non-cliques) get the
energy ``INVALID_ENERGY = 1``, which is worse than every feasible value
because feasible values are never positive.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from boxqubo.qubo_core import QuboMatrix, as_bits, batch_energy

INVALID_ENERGY = 1.0
BRUTE_FORCE_LIMIT = 26

__all__ = [
    "INVALID_ENERGY",
    "BRUTE_FORCE_LIMIT",
    "CnfFormula",
    "DirectedGraph",
    "UndirectedGraph",
    "Oracle",
    "SatOracle",
    "FvsOracle",
    "MaxCliqueOracle",
    "QuboOracle",
    "generate_ksat",
    "generate_digraph",
    "generate_graph",
    "sat_oracle",
    "has_cycle_after_removal",
    "fvs_oracle",
    "is_clique",
    "maxclique_oracle",
    "brute_force_optimum",
    "initial_dataset",
    "read_dimacs",
    "write_dimacs",
    "read_edge_list",
    "write_edge_list",
    "load_instance",
    "make_oracle",
]


# -- instances ---------------------------------------------------------------


@dataclass(frozen=True)
class CnfFormula:
    """CNF formula over variables ``1..num_vars``; literals are signed ints."""

    num_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        for ci, clause in enumerate(clauses):
            if not clause:
                raise ValueError(f"clause {ci} is empty")
            vars_ = [abs(l) for l in clause]
            if any(l == 0 or v > self.num_vars for l, v in zip(clause, vars_)):
                raise ValueError(f"clause {ci} has a literal outside 1..{self.num_vars}: {clause}")
            if len(set(vars_)) != len(vars_):
                raise ValueError(f"clause {ci} repeats a variable: {clause}")
        object.__setattr__(self, "clauses", clauses)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @property
    def k(self) -> int:
        """Clause width; raises if clause widths differ."""
        widths = {len(c) for c in self.clauses}
        if len(widths) != 1:
            raise ValueError(f"formula is not uniform k-SAT (widths {sorted(widths)})")
        return widths.pop()


@dataclass(frozen=True)
class DirectedGraph:
    num_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = tuple(sorted({(int(u), int(v)) for u, v in self.edges}))
        if len(edges) != len(self.edges):
            raise ValueError("duplicate edges")
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u}, {v}) outside 0..{self.num_vertices - 1}")
        object.__setattr__(self, "edges", edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.num_vertices, self.num_vertices), dtype=np.int64)
        for u, v in self.edges:
            A[u, v] = 1
        return A


@dataclass(frozen=True)
class UndirectedGraph:
    num_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        norm = [tuple(sorted((int(u), int(v)))) for u, v in self.edges]
        edges = tuple(sorted(set(norm)))
        if len(edges) != len(norm):
            raise ValueError("duplicate edges")
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            if not (0 <= u and v < self.num_vertices):
                raise ValueError(f"edge ({u}, {v}) outside 0..{self.num_vertices - 1}")
        object.__setattr__(self, "edges", edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.num_vertices, self.num_vertices), dtype=np.int64)
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1
        return A


def generate_ksat(V: int, C: int, k: int, seed: int) -> CnfFormula:
    """Random k-SAT: each clause draws k distinct variables and random signs."""
    if k > V:
        raise ValueError(f"clause width k={k} exceeds number of variables V={V}")
    if k < 1 or C < 0:
        raise ValueError("need k >= 1 and C >= 0")
    rng = np.random.default_rng(seed)
    clauses = []
    for _ in range(C):
        vars_ = rng.choice(V, size=k, replace=False) + 1
        signs = rng.integers(0, 2, size=k) * 2 - 1
        clauses.append(tuple(int(v * s) for v, s in zip(vars_, signs)))
    return CnfFormula(V, tuple(clauses))


def generate_digraph(V: int, E_count: int, seed: int) -> DirectedGraph:
    """Directed graph with ``E_count`` distinct non-loop edges drawn uniformly."""
    pairs = V * (V - 1)
    if E_count > pairs or E_count < 0:
        raise ValueError(f"cannot place {E_count} edges in a digraph on {V} vertices (max {pairs})")
    rng = np.random.default_rng(seed)
    picks = rng.choice(pairs, size=E_count, replace=False)
    u, rest = np.divmod(picks, V - 1)
    v = rest + (rest >= u)  # skip the diagonal
    return DirectedGraph(V, tuple(zip(u.tolist(), v.tolist())))


def generate_graph(V: int, E_count: int, seed: int) -> UndirectedGraph:
    """Undirected graph with ``E_count`` distinct edges drawn uniformly."""
    all_pairs = list(itertools.combinations(range(V), 2))
    if E_count > len(all_pairs) or E_count < 0:
        raise ValueError(f"cannot place {E_count} edges in a graph on {V} vertices (max {len(all_pairs)})")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(all_pairs), size=E_count, replace=False)
    return UndirectedGraph(V, tuple(all_pairs[i] for i in picks))


# -- oracle functions ----------------------------------------------------------


def _check_len(x, n):
    return as_bits(x, n).astype(bool)


def sat_oracle(f: CnfFormula, x) -> float:
    """Negative number of satisfied clauses under assignment ``x`` (``x[i]`` is variable i+1)."""
    bits = _check_len(x, f.num_vars)
    satisfied = sum(1 for c in f.clauses if any(bits[abs(l) - 1] == (l > 0) for l in c))
    return -float(satisfied)


def has_cycle_after_removal(G: DirectedGraph, removed) -> bool:
    """True iff the subgraph on vertices with ``removed[v] == 0`` has a directed cycle.

    Iterative depth-first search with white/grey/black marking; a grey
    successor is a back edge.
    """
    gone = _check_len(removed, G.num_vertices)
    succ: list[list[int]] = [[] for _ in range(G.num_vertices)]
    for u, v in G.edges:
        if not gone[u] and not gone[v]:
            succ[u].append(v)
    WHITE, GREY, BLACK = 0, 1, 2
    color = [WHITE] * G.num_vertices
    for root in range(G.num_vertices):
        if gone[root] or color[root] != WHITE:
            continue
        color[root] = GREY
        stack = [(root, iter(succ[root]))]
        while stack:
            node, it = stack[-1]
            for nxt in it:
                if color[nxt] == GREY:
                    return True
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    stack.append((nxt, iter(succ[nxt])))
                    break
            else:
                color[node] = BLACK
                stack.pop()
    return False


def fvs_oracle(G: DirectedGraph, x) -> float:
    """``1`` if deleting the vertices marked in ``x`` leaves a cycle, else ``sum(x) - V``."""
    bits = _check_len(x, G.num_vertices)
    if has_cycle_after_removal(G, bits):
        return INVALID_ENERGY
    return float(bits.sum() - G.num_vertices)


def is_clique(G: UndirectedGraph, selected) -> bool:
    chosen = np.flatnonzero(_check_len(selected, G.num_vertices))
    edges = set(G.edges)
    return all((u, v) in edges for u, v in itertools.combinations(chosen.tolist(), 2))


def maxclique_oracle(G: UndirectedGraph, x) -> float:
    """``-|clique|`` for a clique, ``1`` otherwise."""
    bits = _check_len(x, G.num_vertices)
    if not is_clique(G, bits):
        return INVALID_ENERGY
    return -float(bits.sum())


# -- oracle objects ------------------------------------------------------------


class Oracle:
    """Oracle bound to one instance.

    Calling it on a vector returns the energy.  ``evaluate`` returns
    ``(energy, is_valid)`` and ``evaluate_batch`` does the same for rows of a
    matrix using a vectorized path where one exists.
    """

    domain = "custom"

    def __init__(self, n: int, func: Callable[[np.ndarray], float], *, can_be_invalid: bool = False):
        self.n = n
        self._func = func
        self.can_be_invalid = can_be_invalid

    def __call__(self, x) -> float:
        return self._func(as_bits(x, self.n))

    def evaluate(self, x) -> tuple[float, bool]:
        e = self(x)
        return e, not (self.can_be_invalid and e == INVALID_ENERGY)

    def evaluate_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X).reshape(-1, self.n)
        E = np.array([self(x) for x in X], dtype=np.float64)
        return E, self._validity(E)

    def _validity(self, E: np.ndarray) -> np.ndarray:
        if not self.can_be_invalid:
            return np.ones(E.shape[0], dtype=bool)
        return E != INVALID_ENERGY


class SatOracle(Oracle):
    domain = "sat"

    def __init__(self, formula: CnfFormula):
        self.formula = formula
        super().__init__(formula.num_vars, lambda x: sat_oracle(formula, x))
        lits = np.array(formula.clauses, dtype=np.int64) if formula.clauses else np.zeros((0, 1), dtype=np.int64)
        self._idx = np.abs(lits) - 1
        self._pos = lits > 0
        self._uniform = len({len(c) for c in formula.clauses}) <= 1

    def evaluate_batch(self, X):
        X = np.asarray(X).reshape(-1, self.n).astype(bool)
        if not self._uniform:
            return super().evaluate_batch(X)
        if self._idx.shape[0] == 0:
            return np.zeros(X.shape[0]), np.ones(X.shape[0], dtype=bool)
        vals = X[:, self._idx]  # (B, C, k)
        sat = np.any(vals == self._pos[None], axis=2).sum(axis=1)
        return -sat.astype(np.float64), np.ones(X.shape[0], dtype=bool)


class FvsOracle(Oracle):
    domain = "fvs"

    def __init__(self, graph: DirectedGraph):
        self.graph = graph
        super().__init__(graph.num_vertices, lambda x: fvs_oracle(graph, x), can_be_invalid=True)
        self._A = graph.adjacency()

    def evaluate_batch(self, X):
        # peel vertices with no remaining predecessor; a cycle survives peeling
        X = np.asarray(X).reshape(-1, self.n).astype(bool)
        remaining = ~X
        while True:
            indeg = remaining.astype(np.int64) @ self._A
            peel = remaining & (indeg == 0)
            if not peel.any():
                break
            remaining &= ~peel
        cyclic = remaining.any(axis=1)
        E = np.where(cyclic, INVALID_ENERGY, X.sum(axis=1) - self.n).astype(np.float64)
        return E, ~cyclic


class MaxCliqueOracle(Oracle):
    domain = "maxclique"

    def __init__(self, graph: UndirectedGraph):
        self.graph = graph
        super().__init__(graph.num_vertices, lambda x: maxclique_oracle(graph, x), can_be_invalid=True)
        self._non_edges = 1 - graph.adjacency() - np.eye(graph.num_vertices, dtype=np.int64)

    def evaluate_batch(self, X):
        Xi = np.asarray(X).reshape(-1, self.n).astype(np.int64)
        bad = np.einsum("bi,ij,bj->b", Xi, self._non_edges, Xi) > 0
        E = np.where(bad, INVALID_ENERGY, -Xi.sum(axis=1)).astype(np.float64)
        return E, ~bad


class QuboOracle(Oracle):
    """Oracle whose energy is a known QUBO; always valid."""

    def __init__(self, Q: QuboMatrix):
        self.Q = Q
        super().__init__(Q.n, lambda x: float(x @ Q.values @ x))

    def evaluate_batch(self, X):
        E = batch_energy(self.Q, np.asarray(X).reshape(-1, self.n))
        return E, np.ones(E.shape[0], dtype=bool)


def make_oracle(instance) -> Oracle:
    if isinstance(instance, CnfFormula):
        return SatOracle(instance)
    if isinstance(instance, DirectedGraph):
        return FvsOracle(instance)
    if isinstance(instance, UndirectedGraph):
        return MaxCliqueOracle(instance)
    if isinstance(instance, QuboMatrix):
        return QuboOracle(instance)
    raise TypeError(f"no oracle for {type(instance).__name__}")


# -- exhaustive search and initial data ---------------------------------------


def _int_to_bits(values: np.ndarray, n: int) -> np.ndarray:
    # bit 0 of the vector is the most significant, so integer order is lexicographic
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((values[:, None] >> shifts) & 1).astype(np.uint8)


def brute_force_optimum(oracle: Oracle, n: int | None = None, *, chunk: int = 1 << 16) -> tuple[np.ndarray, float]:
    """Minimum of ``oracle`` over all ``2**n`` vectors.

    Ties go to the lexicographically smallest vector.  Refuses ``n`` above
    ``BRUTE_FORCE_LIMIT``; supply the optimum through the ``known_optimum``
    config key for larger instances.
    """
    n = oracle.n if n is None else n
    if n != oracle.n:
        raise ValueError(f"n={n} does not match oracle size {oracle.n}")
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"n={n} exceeds the brute-force limit of {BRUTE_FORCE_LIMIT}; "
            "set 'known_optimum' for this instance instead"
        )
    best_val, best_x = np.inf, None
    total = 1 << n
    for start in range(0, total, chunk):
        X = _int_to_bits(np.arange(start, min(total, start + chunk), dtype=np.int64), n)
        E, _ = oracle.evaluate_batch(X)
        i = int(np.argmin(E))
        if E[i] < best_val:
            best_val, best_x = float(E[i]), X[i]
    return best_x.copy(), best_val


def initial_dataset(oracle: Oracle, size: int, n: int | None = None, seed: int = 0):
    """``size`` distinct uniformly random vectors labeled by the oracle."""
    from boxqubo.surrogate import Dataset

    n = oracle.n if n is None else n
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if n < 63 and size > (1 << n):
        raise ValueError(f"cannot draw {size} distinct vectors of length {n}")
    rng = np.random.default_rng(seed)
    if n <= 20 and size > (1 << n) // 2:
        ints = rng.permutation(1 << n)[:size]
        X = _int_to_bits(ints.astype(np.int64), n)
    else:
        seen: set[bytes] = set()
        rows = []
        while len(rows) < size:
            for row in rng.integers(0, 2, size=(size - len(rows), n), dtype=np.uint8):
                key = row.tobytes()
                if key not in seen:
                    seen.add(key)
                    rows.append(row)
        X = np.array(rows, dtype=np.uint8)
    E, valid = oracle.evaluate_batch(X)
    D = Dataset(n)
    for x, e, ok in zip(X, E, valid):
        D.add(x, e, ok)
    return D


# -- file formats ----------------------------------------------------------------


def write_dimacs(f: CnfFormula, path=None) -> str:
    lines = [f"p cnf {f.num_vars} {f.num_clauses}"]
    lines.extend(" ".join(str(l) for l in c) + " 0" for c in f.clauses)
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_dimacs(source) -> CnfFormula:
    """Parse DIMACS CNF from a path or a string containing the text."""
    text = _read_source(source)
    num_vars = num_clauses = None
    clauses, current = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"line {lineno}: bad problem line {line!r}")
            num_vars, num_clauses = int(parts[2]), int(parts[3])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if current:
        clauses.append(tuple(current))
    if num_vars is None:
        raise ValueError("missing 'p cnf' header")
    if num_clauses != len(clauses):
        raise ValueError(f"header declares {num_clauses} clauses, found {len(clauses)}")
    return CnfFormula(num_vars, tuple(clauses))


def write_edge_list(G: DirectedGraph | UndirectedGraph, path=None) -> str:
    kind = "directed" if isinstance(G, DirectedGraph) else "undirected"
    lines = [f"{G.num_vertices} {len(G.edges)} {kind}"]
    lines.extend(f"{u} {v}" for u, v in G.edges)
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_edge_list(source) -> DirectedGraph | UndirectedGraph:
    text = _read_source(source)
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty edge list")
    header = lines[0].split()
    if len(header) != 3 or header[2] not in ("directed", "undirected"):
        raise ValueError(f"bad header {lines[0]!r}; expected 'V E directed|undirected'")
    V, E = int(header[0]), int(header[1])
    edges = []
    for ln in lines[1:]:
        u, v = ln.split()
        edges.append((int(u), int(v)))
    if len(edges) != E:
        raise ValueError(f"header declares {E} edges, found {len(edges)}")
    cls = DirectedGraph if header[2] == "directed" else UndirectedGraph
    return cls(V, tuple(edges))


def _read_source(source) -> str:
    if isinstance(source, Path):
        return source.read_text()
    if isinstance(source, str) and "\n" not in source and Path(source).exists():
        return Path(source).read_text()
    return str(source)


def load_instance(path) -> CnfFormula | DirectedGraph | UndirectedGraph:
    """Read a ``.cnf`` DIMACS file or an edge-list graph file."""
    path = Path(path)
    if path.suffix.lower() == ".cnf":
        return read_dimacs(path)
    return read_edge_list(path)
