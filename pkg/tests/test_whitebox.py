import json

import numpy as np
import pytest

from boxqubo.oracles import (
    CnfFormula,
    DirectedGraph,
    UndirectedGraph,
    fvs_oracle,
    generate_digraph,
    generate_graph,
    generate_ksat,
    is_clique,
    sat_oracle,
)
from boxqubo.qubo_core import QuboMatrix
from boxqubo.whitebox import (
    choi_maxksat_encode,
    choi_size,
    format_size_table,
    lucas_fvs_encode,
    lucas_fvs_size,
    lucas_maxclique_encode,
    lucas_maxclique_size,
    size_table_report,
)

from independent import max_clique_size, max_satisfied, min_feedback_vertex_set, qubo_minimizers


class TestSizes:
    def test_table_sizes(self):
        assert choi_size(4, 400) == 1600
        assert choi_size(4, 300) == 1200
        assert lucas_fvs_size(25) == 650
        assert lucas_maxclique_size(30) == 30

    def test_encoders_match_size_functions(self):
        assert choi_maxksat_encode(generate_ksat(6, 5, 3, 0)).n == 15
        assert lucas_fvs_encode(generate_digraph(4, 5, 0)).n == 20
        assert lucas_maxclique_encode(generate_graph(7, 9, 0)).n == 7

    def test_full_size_choi(self):
        assert choi_maxksat_encode(generate_ksat(30, 400, 4, 0)).n == 1600

    def test_report(self):
        pairs = {r["config"]: (r["white_box_n"], r["black_box_n"]) for r in size_table_report()}
        assert pairs == {
            "max4sat_30_400": (1600, 30),
            "max4sat_20_300": (1200, 20),
            "fvs_25_200": (650, 25),
            "maxclique_30_350": (30, 30),
        }
        text = format_size_table()
        assert text.splitlines()[0].startswith("config,")
        assert len(text.splitlines()) == 5


class TestChoi:
    def test_single_clause(self):
        enc = choi_maxksat_encode(CnfFormula(2, ((1, 2),)))
        best, winners = qubo_minimizers(enc.Q.values)
        assert best == -1.0
        for bits in winners:
            assert bits.sum() == 1
            assignment, valid = enc.decode(bits)
            assert valid and sat_oracle(CnfFormula(2, ((1, 2),)), assignment) == -1.0

    def test_conflict_penalized(self):
        enc = choi_maxksat_encode(CnfFormula(1, ((1,), (-1,))))
        assert enc.Q.values.tolist() == [[-1.0, 2.0], [0.0, -1.0]]
        assert enc.decode([1, 1])[1] is False

    @pytest.mark.parametrize("seed", range(6))
    def test_minimizers_optimal(self, seed):
        rng = np.random.default_rng(seed)
        C, k = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        f = generate_ksat(5, C, k, seed)
        enc = choi_maxksat_encode(f)
        best, winners = qubo_minimizers(enc.Q.values)
        target = max_satisfied(5, f.clauses)
        assert best == -target
        for bits in winners:
            assignment, valid = enc.decode(bits)
            assert valid
            assert -sat_oracle(f, assignment) == target

    def test_decode_total(self):
        enc = choi_maxksat_encode(generate_ksat(4, 3, 2, 1))
        for i in range(1 << enc.n):
            bits = [(i >> j) & 1 for j in range(enc.n)]
            assignment, valid = enc.decode(bits)
            assert assignment.shape == (4,) and isinstance(valid, bool)


class TestLucasFvs:
    def test_acyclic_pair(self):
        enc = lucas_fvs_encode(DirectedGraph(2, ((0, 1),)))
        assert enc.n == 6
        _, winners = qubo_minimizers(enc.Q.values)
        for bits in winners:
            deleted, valid = enc.decode(bits)
            assert valid and deleted.tolist() == [0, 0]

    def test_two_cycle(self):
        enc = lucas_fvs_encode(DirectedGraph(2, ((0, 1), (1, 0))))
        _, winners = qubo_minimizers(enc.Q.values)
        for bits in winners:
            deleted, valid = enc.decode(bits)
            assert valid and deleted.sum() == 1

    @pytest.mark.parametrize("seed", range(6))
    def test_minimizers_optimal_v3(self, seed):
        G = generate_digraph(3, 2 + seed % 5, seed)
        enc = lucas_fvs_encode(G)
        _, winners = qubo_minimizers(enc.Q.values)
        best = min_feedback_vertex_set(3, G.edges)
        for bits in winners:
            deleted, valid = enc.decode(bits)
            assert valid
            assert fvs_oracle(G, deleted) == best - 3

    def test_invalid_one_hot(self):
        enc = lucas_fvs_encode(DirectedGraph(2, ((0, 1),)))
        bits = np.zeros(6, dtype=int)
        bits[0] = 1  # keep vertex 0 with no position
        assert enc.decode(bits)[1] is False


class TestLucasClique:
    def test_complete_graph(self):
        G = UndirectedGraph(4, tuple((u, v) for u in range(4) for v in range(u + 1, 4)))
        enc = lucas_maxclique_encode(G)
        best, winners = qubo_minimizers(enc.Q.values)
        assert best == -4.0
        assert [w.tolist() for w in winners] == [[1, 1, 1, 1]]

    def test_path(self):
        G = UndirectedGraph(3, ((0, 1), (1, 2)))
        _, winners = qubo_minimizers(lucas_maxclique_encode(G).Q.values)
        assert sorted(w.tolist() for w in winners) == [[0, 1, 1], [1, 1, 0]]

    @pytest.mark.parametrize("seed", range(6))
    def test_minimizers_optimal(self, seed):
        G = generate_graph(10, 12 + 3 * seed, seed)
        enc = lucas_maxclique_encode(G)
        _, winners = qubo_minimizers(enc.Q.values)
        for bits in winners:
            sel, valid = enc.decode(bits)
            assert valid and is_clique(G, sel)
            assert sel.sum() == max_clique_size(10, G.edges)


def test_export(tmp_path):
    enc = lucas_fvs_encode(DirectedGraph(2, ((0, 1),)))
    qpath, jpath = enc.export(tmp_path / "sub" / "fvs")
    assert QuboMatrix.load(qpath) == enc.Q
    side = json.loads(jpath.read_text())
    assert side["n"] == 6 and side["domain"] == "fvs"
    assert side["labels"][:2] == ["keep0", "keep1"] and side["labels"][2] == "pos0:0"
    assert side["penalty_weights"] == {"A": 2.0, "B": 1.0}
