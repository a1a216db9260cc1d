"""White-box QUBO encodings used as comparison baselines.

* MAX-k-SAT as maximum independent set on the clause/conflict graph: one
  variable per literal occurrence.
* Directed feedback vertex set with keep indicators and one-hot
  topological positions.
* Maximum clique with a reward per selected vertex and a penalty per
  selected non-adjacent pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from boxqubo.oracles import CnfFormula, DirectedGraph, UndirectedGraph, is_clique
from boxqubo.qubo_core import QuboMatrix, as_bits

__all__ = [
    "EncodedProblem",
    "choi_maxksat_encode",
    "lucas_fvs_encode",
    "lucas_maxclique_encode",
    "choi_size",
    "lucas_fvs_size",
    "lucas_maxclique_size",
    "BENCHMARK_CONFIGS",
    "size_table_report",
    "format_size_table",
]


@dataclass(frozen=True, eq=False)
class EncodedProblem:
    """A QUBO encoding of one instance plus its decoder.

    ``decode(bits)`` returns ``(solution, valid)`` where ``solution`` is a
    bit vector over the original problem variables (assignment for SAT,
    deleted-vertex mask for FVS, selected-vertex mask for MaxClique) and
    ``valid`` says whether the encoding's constraints were all satisfied.
    """

    Q: QuboMatrix
    domain: str
    decode_fn: Callable[[np.ndarray], tuple[np.ndarray, bool]]
    labels: tuple[str, ...]
    penalty_weights: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.Q.n

    def decode(self, bits) -> tuple[np.ndarray, bool]:
        return self.decode_fn(as_bits(bits, self.n).astype(np.uint8))

    def sidecar(self) -> dict:
        return {
            "domain": self.domain,
            "n": self.n,
            "penalty_weights": dict(self.penalty_weights),
            "labels": list(self.labels),
        }

    def export(self, prefix) -> tuple[Path, Path]:
        """Write ``<prefix>.qubo`` and ``<prefix>.json``."""
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        qpath = prefix.with_name(prefix.name + ".qubo")
        jpath = prefix.with_name(prefix.name + ".json")
        self.Q.save(qpath)
        jpath.write_text(json.dumps(self.sidecar(), indent=2) + "\n")
        return qpath, jpath


def choi_size(k: int, num_clauses: int) -> int:
    return k * num_clauses


def lucas_fvs_size(num_vertices: int) -> int:
    return num_vertices * (num_vertices + 1)


def lucas_maxclique_size(num_vertices: int) -> int:
    return num_vertices


def choi_maxksat_encode(f: CnfFormula, penalty: float = 2.0) -> EncodedProblem:
    """One QUBO variable per literal occurrence.

    Selecting an occurrence earns -1; two selected occurrences in the same
    clause, or of complementary literals anywhere, cost ``penalty``.  The
    selected occurrences of a penalty-free state are simultaneously true
    literals, one per satisfied clause.
    """
    occ = [(ci, lit) for ci, clause in enumerate(f.clauses) for lit in clause]
    n = len(occ)
    if n == 0:
        raise ValueError("formula has no literal occurrences")
    clause_of = np.array([c for c, _ in occ])
    lits = np.array([l for _, l in occ])
    Q = np.zeros((n, n))
    np.fill_diagonal(Q, -1.0)
    same_clause = clause_of[:, None] == clause_of[None, :]
    conflict = lits[:, None] == -lits[None, :]
    mask = np.triu(same_clause | conflict, 1)
    Q[mask] = penalty

    num_vars = f.num_vars

    def decode(bits):
        chosen = bits.astype(bool)
        assignment = np.zeros(num_vars, dtype=np.uint8)
        pos = lits[chosen & (lits > 0)]
        assignment[pos - 1] = 1
        sel = np.flatnonzero(chosen)
        valid = not bool(np.any(mask[np.ix_(sel, sel)]))
        return assignment, valid

    labels = tuple(f"clause{c}:{'x' if l > 0 else '~x'}{abs(l)}" for c, l in occ)
    return EncodedProblem(QuboMatrix(Q), "sat", decode, labels, {"P": penalty})


def lucas_fvs_encode(G: DirectedGraph, A: float = 2.0, B: float = 1.0) -> EncodedProblem:
    """Keep indicators ``y_v`` plus position bits ``x_{v,i}``, ``i < V``.

    Energy ``A * [sum_v (y_v - sum_i x_{v,i})^2
    + sum_{(u,v) in E} sum_{i >= j} x_{u,i} x_{v,j}] - B * sum_v y_v``.
    Kept vertices need exactly one position and every kept edge must point
    to a strictly higher position, so the kept subgraph is acyclic.
    Variable order: ``y_0..y_{V-1}`` then ``x_{v,i}`` at ``V + v*V + i``.
    """
    V = G.num_vertices
    if V < 1:
        raise ValueError("graph has no vertices")
    n = lucas_fvs_size(V)

    def xi(v, i):
        return V + v * V + i

    dense = np.zeros((n, n))
    for v in range(V):
        # (y - s)^2 = y + s + 2*sum_{i<j} x_i x_j - 2*y*s  on binaries
        dense[v, v] += A - B
        for i in range(V):
            dense[xi(v, i), xi(v, i)] += A
            dense[v, xi(v, i)] += -2.0 * A
            for j in range(i + 1, V):
                dense[xi(v, i), xi(v, j)] += 2.0 * A
    for u, v in G.edges:
        for i in range(V):
            for j in range(i + 1):
                dense[xi(u, i), xi(v, j)] += A
    Q = QuboMatrix.from_dense(dense)

    edges = np.array(G.edges, dtype=np.int64).reshape(-1, 2)

    def decode(bits):
        keep = bits[:V].astype(bool)
        pos = bits[V:].reshape(V, V).astype(bool)
        one_hot_ok = bool(np.all(pos.sum(axis=1) == keep))
        valid = one_hot_ok
        if valid and edges.size:
            level = np.where(keep, pos.argmax(axis=1), -1)
            for u, v in edges:
                if keep[u] and keep[v] and level[u] >= level[v]:
                    valid = False
                    break
        return (~keep).astype(np.uint8), valid

    labels = tuple(f"keep{v}" for v in range(V)) + tuple(f"pos{v}:{i}" for v in range(V) for i in range(V))
    return EncodedProblem(Q, "fvs", decode, labels, {"A": A, "B": B})


def lucas_maxclique_encode(G: UndirectedGraph, A: float = 2.0, B: float = 1.0) -> EncodedProblem:
    """``-B`` per selected vertex, ``+A`` per selected non-adjacent pair."""
    V = G.num_vertices
    if V < 1:
        raise ValueError("graph has no vertices")
    adj = G.adjacency().astype(bool)
    Q = np.zeros((V, V))
    np.fill_diagonal(Q, -B)
    Q[np.triu(~adj, 1)] = A

    def decode(bits):
        return bits.copy(), is_clique(G, bits)

    return EncodedProblem(QuboMatrix(Q), "maxclique", decode, tuple(f"v{v}" for v in range(V)), {"A": A, "B": B})


# (label, domain, V, C-or-E, k)
BENCHMARK_CONFIGS = (
    ("max4sat_30_400", "sat", 30, 400, 4),
    ("max4sat_20_300", "sat", 20, 300, 4),
    ("fvs_25_200", "fvs", 25, 200, None),
    ("maxclique_30_350", "maxclique", 30, 350, None),
)


def size_table_report() -> list[dict]:
    """Black-box vs white-box QUBO sizes for the four benchmark configurations."""
    rows = []
    for label, domain, V, m, k in BENCHMARK_CONFIGS:
        if domain == "sat":
            white, scaling = choi_size(k, m), "O(kC)"
        elif domain == "fvs":
            white, scaling = lucas_fvs_size(V), "O(V^2)"
        else:
            white, scaling = lucas_maxclique_size(V), "O(V)"
        rows.append(
            {
                "config": label,
                "domain": domain,
                "V": V,
                "size_param": m,
                "black_box_n": V,
                "white_box_n": white,
                "white_box_scaling": scaling,
            }
        )
    return rows


def format_size_table(rows=None, delimiter: str = ",") -> str:
    rows = size_table_report() if rows is None else rows
    cols = ["config", "V", "size_param", "black_box_n", "white_box_n", "white_box_scaling"]
    lines = [delimiter.join(cols)]
    lines.extend(delimiter.join(str(r[c]) for c in cols) for r in rows)
    return "\n".join(lines) + "\n"
