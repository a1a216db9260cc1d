"""Acceptance criteria, one test each.

Every test records a ``PASS``/``FAIL`` line that is printed in the pytest
terminal summary (and directly when this file is run as a script).
"""

import itertools
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from boxqubo.annealer import anneal
from boxqubo.cli import main as cli_main
from boxqubo.config import ExperimentConfig
from boxqubo.harness import curve_csv, normalize, run_suite, suite_csv, usable_seeds, write_suite
from boxqubo.oracles import (
    DirectedGraph,
    FvsOracle,
    MaxCliqueOracle,
    SatOracle,
    brute_force_optimum,
    fvs_oracle,
    generate_digraph,
    generate_graph,
    generate_ksat,
    is_clique,
    sat_oracle,
)
from boxqubo.qubo_core import LabeledBatch, QuboMatrix, batch_energy, loss, loss_gradient, random_init
from boxqubo.surrogate import Dataset, split_dataset
from boxqubo.whitebox import choi_maxksat_encode, lucas_fvs_encode, lucas_maxclique_encode

sys.path.insert(0, str(Path(__file__).parent))
from independent import (  # noqa: E402
    max_clique_size,
    max_satisfied,
    min_feedback_vertex_set,
    qubo_minimizers,
)

RESULTS: list[str] = []


def record(number, title, ok, detail, seconds=None):
    timing = f" [{seconds:.1f}s]" if seconds is not None else ""
    RESULTS.append(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}: {detail}{timing}")
    return ok


# -- 1 ----------------------------------------------------------------------


def test_c01_gradient_matches_finite_differences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    h = 1e-5
    for case in range(100):
        n = int(rng.integers(1, 11))
        m = int(rng.integers(1, 20))
        Q = random_init(n, case)
        batch = LabeledBatch(rng.integers(0, 2, size=(m, n)), rng.normal(scale=3.0, size=m))
        G = loss_gradient(Q, batch)
        for i, j in zip(*np.triu_indices(n)):
            up, down = Q.values.copy(), Q.values.copy()
            up[i, j] += h
            down[i, j] -= h
            fd = (loss(QuboMatrix(up), batch) - loss(QuboMatrix(down), batch)) / (2 * h)
            worst = max(worst, abs(G[i, j] - fd) / max(abs(fd), 1.0))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-4 and secs < 10
    assert record(1, "gradient vs central differences", ok, f"max rel err {worst:.2e} (tol 1e-4), 100 cases", secs)


# -- 2 ----------------------------------------------------------------------


def test_c02_annealer_finds_exhaustive_minimum():
    t0 = time.perf_counter()
    n = 12
    X = np.array(list(itertools.product([0, 1], repeat=n)), dtype=np.float64)
    hits = 0
    for seed in range(100):
        Q = random_init(n, 10_000 + seed)
        exact = batch_energy(Q, X).min()
        hits += bool(np.isclose(anneal(Q, rng_seed=seed).energies[0], exact, rtol=0, atol=1e-9))
    secs = time.perf_counter() - t0
    ok = hits >= 95 and secs < 60
    assert record(2, "annealer optimum on n=12", ok, f"{hits}/100 exact (need >= 95)", secs)


# -- 3 ----------------------------------------------------------------------


def _random_dataset(rng, size, n=16):
    D = Dataset(n)
    while len(D) < size:
        valid = bool(rng.random() < 0.8) or len(D) == 0
        e = float(rng.integers(-30, 1)) if valid else 1.0
        D.add(rng.integers(0, 2, size=n), e, valid)
    return D


def test_c03_split_semantics():
    rng = np.random.default_rng(3)
    D = _random_dataset(rng, 100)
    size_ok = len(split_dataset(D, 0.03).L) == 3
    invalid_ok = True
    tau_ok = True
    for _ in range(1000):
        D = _random_dataset(rng, int(rng.integers(1, 80)))
        frac = float(rng.uniform(0.01, 1.0))
        exclude = bool(rng.random() < 0.5)
        s = split_dataset(D, frac, exclude)
        if exclude:
            invalid_ok &= set(np.flatnonzero(~D.valid)) <= set(s.H.tolist())
        tau_ok &= bool(np.all(s.L_energies <= s.tau))
        H_eligible = [i for i in s.H if D.valid[i] or not exclude]
        tau_ok &= all(D.energies[i] >= s.tau for i in H_eligible)
        tau_ok &= len(s.L) + len(s.H) == len(D)
    ok = size_ok and invalid_ok and tau_ok
    detail = f"|L|=3 at 0.03x100: {size_ok}; invalids in H: {invalid_ok}; tau bounds on 1000 sets: {tau_ok}"
    assert record(3, "split semantics", ok, detail)


# -- 4 ----------------------------------------------------------------------


def test_c04_oracle_ground_truth():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    mismatches = []
    for i in range(20):
        V = int(rng.integers(10, 17))
        f = generate_ksat(V, int(rng.integers(3 * V, 6 * V)), 3, i)
        if brute_force_optimum(SatOracle(f))[1] != -max_satisfied(V, f.clauses):
            mismatches.append(("sat", i))
        V = int(rng.integers(6, 12))
        G = generate_digraph(V, int(rng.integers(V, 2 * V + 1)), i)
        if brute_force_optimum(FvsOracle(G))[1] != min_feedback_vertex_set(V, G.edges) - V:
            mismatches.append(("fvs", i))
        V = int(rng.integers(10, 17))
        U = generate_graph(V, int(rng.integers(V, V * (V - 1) // 3)), i)
        if brute_force_optimum(MaxCliqueOracle(U))[1] != -max_clique_size(V, U.edges):
            mismatches.append(("maxclique", i))
    secs = time.perf_counter() - t0
    ok = not mismatches and secs < 300
    assert record(4, "oracle optima vs independent solvers", ok, f"60 instances, mismatches {mismatches}", secs)


# -- 5 ----------------------------------------------------------------------


def test_c05_whitebox_soundness():
    t0 = time.perf_counter()
    failures = []
    checked = 0
    for seed in range(12):
        C = 2 + seed % 3
        k = 2 + (seed // 3) % 3
        f = generate_ksat(5, C, k, seed)
        enc = choi_maxksat_encode(f)
        _, winners = qubo_minimizers(enc.Q.values)
        target = max_satisfied(5, f.clauses)
        for bits in winners:
            a, valid = enc.decode(bits)
            checked += 1
            if not valid or -sat_oracle(f, a) != target:
                failures.append(("choi", seed))
    pairs = [(u, v) for u in range(3) for v in range(3) if u != v]
    for V, candidates in ((2, [(0, 1), (1, 0)]), (3, pairs)):
        for mask in range(1 << len(candidates)):
            edges = tuple(e for b, e in enumerate(candidates) if mask >> b & 1)
            G = DirectedGraph(V, edges)
            _, winners = qubo_minimizers(lucas_fvs_encode(G).Q.values)
            best = min_feedback_vertex_set(V, edges)
            for bits in winners:
                deleted, valid = lucas_fvs_encode(G).decode(bits)
                checked += 1
                if not valid or fvs_oracle(G, deleted) != best - V:
                    failures.append(("fvs", V, edges))
    for seed in range(10):
        V = 6 + seed % 7
        U = generate_graph(V, int(np.random.default_rng(seed).integers(0, V * (V - 1) // 2 + 1)), seed)
        enc = lucas_maxclique_encode(U)
        _, winners = qubo_minimizers(enc.Q.values)
        for bits in winners:
            sel, valid = enc.decode(bits)
            checked += 1
            if not (valid and is_clique(U, sel) and sel.sum() == max_clique_size(V, U.edges)):
                failures.append(("maxclique", seed))
    secs = time.perf_counter() - t0
    ok = not failures and secs < 120
    assert record(5, "white-box minimizers valid and optimal", ok, f"{checked} minimizers, failures {failures[:5]}", secs)


# -- 6 ----------------------------------------------------------------------


def test_c06_size_table(capsys):
    cli_main(["report"])
    rows = [r.split(",") for r in capsys.readouterr().out.splitlines()[1:]]
    pairs = [(int(r[4]), int(r[3])) for r in rows]
    ok = pairs == [(1600, 30), (1200, 20), (650, 25), (30, 30)]
    assert record(6, "size table", ok, f"white/black pairs {pairs}")


# -- 7 ----------------------------------------------------------------------


def test_c07_normalization():
    vals = (normalize(-20, -10, -20), normalize(-10, -10, -20), normalize(-15, -10, -20))
    ok = vals == (1.0, 0.0, 0.5)
    assert record(7, "normalization", ok, f"f(opt), f(base), f(mid) = {vals}")


# -- 8..11 -------------------------------------------------------------------

SAT_CONFIG = dict(
    problem="sat", num_vars=14, num_clauses=120, k=4, init_training_size=1000, training_length=10,
    n_cycles=5, n_epochs=150, init_n_cycles=30, init_n_epochs=600,
    methods="box_qubo[split_fraction=0.1], regression_baseline",
)
FVS_CONFIG = dict(
    problem="fvs", num_vertices=12, num_edges=40, init_training_size=250, training_length=10,
    n_cycles=10, n_epochs=150, init_n_cycles=30, init_n_epochs=400,
    methods="box_qubo[split_fraction=0.1;exclude_invalids=true], regression_baseline",
)


def _suite(mapping):
    cfg = ExperimentConfig.from_mapping(mapping)
    cfg = cfg.replace(instance_seeds=tuple(usable_seeds(cfg, 10)))
    t0 = time.perf_counter()
    return cfg, run_suite(cfg), time.perf_counter() - t0


@pytest.fixture(scope="module")
def sat_suite():
    return _suite(SAT_CONFIG)


@pytest.fixture(scope="module")
def fvs_suite():
    return _suite(FVS_CONFIG)


def test_c08_sat_ordering(sat_suite):
    cfg, suite, secs = sat_suite
    box, reg = (suite.curves[m][-1] for m in suite.methods)
    n = len(suite.included_seeds)
    ok = n >= 10 and box > reg and box > 0 and reg > 0 and secs < 900
    assert record(8, "Max-4-SAT V=14 C=120 ordering", ok, f"box_qubo {box:.3f} > regression {reg:.3f} > 0 over {n} instances", secs)


def test_c09_fvs_gap(fvs_suite):
    cfg, suite, secs = fvs_suite
    box, reg = (suite.curves[m][-1] for m in suite.methods)
    n = len(suite.included_seeds)
    ok = n >= 10 and box - reg >= 0.2 and secs < 900
    assert record(9, "FVS V=12 E=40 gap", ok, f"box_qubo {box:.3f} - regression {reg:.3f} = {box - reg:.3f} (need >= 0.2) over {n} instances", secs)


def _outputs(cfg, suite, root):
    write_suite(suite, cfg, root)
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(Path(root).rglob("*.csv"))}


def test_c10_determinism(sat_suite, tmp_path):
    cfg, first, _ = sat_suite
    again = run_suite(cfg)
    a = _outputs(cfg, first, tmp_path / "a")
    b = _outputs(cfg, again, tmp_path / "b")
    same = [k for k in a if a[k] == b.get(k)]
    ok = a.keys() == b.keys() and len(same) == len(a) and len(a) > 0
    assert record(10, "byte-identical CSV on rerun", ok, f"{len(same)}/{len(a)} CSV files identical")


def test_c11_monotonicity(sat_suite, fvs_suite):
    bad, total = [], 0
    for _, suite, _ in (sat_suite, fvs_suite):
        for m in suite.methods:
            for r in suite.runs[m]:
                if r.log.solved_at_init:
                    continue
                total += 1
                curve = r.log.normalized_curve()
                if any(b < a for a, b in zip(curve, curve[1:])):
                    bad.append((m, r.log.seed))
    ok = not bad and total > 0
    assert record(11, "monotone normalized curves", ok, f"{total} run logs, non-monotone {bad}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
