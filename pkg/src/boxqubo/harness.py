"""Outer optimization loop, multi-method suites and run persistence."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from boxqubo.annealer import anneal, best_k
from boxqubo.config import ConfigError, ExperimentConfig, _convert, _method_base
from boxqubo.oracles import (
    BRUTE_FORCE_LIMIT,
    CnfFormula,
    DirectedGraph,
    Oracle,
    UndirectedGraph,
    brute_force_optimum,
    generate_digraph,
    generate_graph,
    generate_ksat,
    initial_dataset,
    load_instance,
    make_oracle,
)
from boxqubo.qubo_core import QuboMatrix, TrainingDivergedError, random_init
from boxqubo.surrogate import Dataset, LowRankModel, model_to_qubo, train_box_qubo, train_regression_baseline
from boxqubo.whitebox import EncodedProblem, choi_maxksat_encode, lucas_fvs_encode, lucas_maxclique_encode

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "BOXQUBO_OUTPUT_ROOT"
CSV_COLUMNS = ("iteration", "best_energy", "normalized", "oracle_calls", "seconds")

# seed streams derived from the instance seed
_STREAM_INIT_DATA = 1
_STREAM_SURROGATE = 2
_STREAM_ANNEAL = 3

__all__ = [
    "SolvedAtInitialization",
    "IterationRecord",
    "RunLog",
    "RunResult",
    "SuiteResult",
    "normalize",
    "build_instance",
    "instance_optimum",
    "encode_instance",
    "run_optimization",
    "run_suite",
    "usable_seeds",
    "output_root",
    "write_run",
    "write_suite",
]


class SolvedAtInitialization(ValueError):
    """The initial data already contains the optimum, so scores are undefined."""


def normalize(y_star: float, base: float, optimum: float) -> float:
    """Map ``base`` to 0 and ``optimum`` to 1, linearly in between."""
    if optimum == base:
        raise SolvedAtInitialization(f"optimum equals base ({base}); instance solved at initialization")
    return (y_star - base) / (optimum - base) + 0.0  # no -0.0 in outputs


@dataclass
class IterationRecord:
    iteration: int
    best_energy: float
    normalized: float | None
    oracle_calls: int
    seconds: float


@dataclass
class RunLog:
    domain: str
    method: str
    seed: int
    base: float
    optimum: float | None
    solved_at_init: bool = False
    records: list[IterationRecord] = field(default_factory=list)
    error: str | None = None

    def normalized_curve(self) -> list[float | None]:
        return [r.normalized for r in self.records]


@dataclass
class RunResult:
    log: RunLog
    best_x: np.ndarray
    best_y: float
    dataset: Dataset | None = None

    @property
    def failed(self) -> bool:
        return self.log.error is not None


@dataclass
class SuiteResult:
    methods: list[str]
    runs: dict[str, list[RunResult]]
    included_seeds: list[int]
    excluded: dict[int, str]
    curves: dict[str, list[float]]


def _derived_seed(*words: int) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1)[0])


# -- instances -------------------------------------------------------------


def build_instance(config: ExperimentConfig, seed: int):
    if config.instance_file:
        return load_instance(config.instance_file)
    if config.problem == "sat":
        return generate_ksat(config.num_vars, config.num_clauses, config.k, seed)
    if config.problem == "fvs":
        return generate_digraph(config.num_vertices, config.num_edges, seed)
    return generate_graph(config.num_vertices, config.num_edges, seed)


def instance_optimum(config: ExperimentConfig, oracle: Oracle) -> float:
    if config.known_optimum is not None:
        return float(config.known_optimum)
    if oracle.n > BRUTE_FORCE_LIMIT:
        raise ConfigError(
            "known_optimum",
            f"instance has n={oracle.n} > {BRUTE_FORCE_LIMIT}; supply the optimum from an external solver",
        )
    return brute_force_optimum(oracle)[1]


def encode_instance(instance) -> EncodedProblem:
    if isinstance(instance, CnfFormula):
        return choi_maxksat_encode(instance)
    if isinstance(instance, DirectedGraph):
        return lucas_fvs_encode(instance)
    if isinstance(instance, UndirectedGraph):
        return lucas_maxclique_encode(instance)
    raise TypeError(f"no white-box encoding for {type(instance).__name__}")


# -- single run -------------------------------------------------------------


def _method_config(config: ExperimentConfig, label: str) -> ExperimentConfig:
    """Apply ``name[key=value;...]`` overrides embedded in a method label."""
    base = _method_base(label)
    changes: dict = {"method": base}
    if "[" in label:
        body = label.split("[", 1)[1].rstrip("]")
        fields = {f.name: f for f in config.__dataclass_fields__.values()}
        for item in filter(None, (p.strip() for p in body.split(";"))):
            if "=" not in item:
                raise ConfigError("methods", f"bad override {item!r} in {label!r}")
            key, value = (s.strip() for s in item.split("=", 1))
            if key not in fields:
                raise ConfigError(key, f"unknown key in method label {label!r}")
            changes[key] = _convert(key, fields[key].type, value)
    return config.replace(**changes)


def run_optimization(
    config: ExperimentConfig,
    oracle: Oracle,
    instance=None,
    *,
    seed: int = 0,
    initial: Dataset | None = None,
    optimum: float | None = None,
    initial_surrogate: QuboMatrix | None = None,
) -> RunResult:
    """Run one method on one instance for ``config.training_length`` iterations.

    Iteration 0 records the best of the initial random data (the ``base``).
    Each later iteration samples ``batch_size`` distinct vectors from the
    surrogate QUBO, queries the oracle for the ones not seen yet, retrains,
    and records the best-so-far energy.  Vectors already in the data are not
    re-queried and not replaced.

    Training or sampling failures end the run early; the log up to the
    failure is kept and ``log.error`` holds the message.
    """
    start = time.perf_counter()
    n = oracle.n
    if initial is None:
        initial = initial_dataset(oracle, config.init_training_size, n, _derived_seed(seed, _STREAM_INIT_DATA))
    D = initial.copy()
    if optimum is None:
        optimum = instance_optimum(config, oracle)
    best_x, best_y = D.best()
    base = best_y
    run_log = RunLog(config.domain, config.method, seed, base, optimum)
    try:
        normalize(base, base, optimum)
    except SolvedAtInitialization as exc:
        run_log.solved_at_init = True
        log.info("seed %s: %s", seed, exc)

    def score(y):
        return None if run_log.solved_at_init else normalize(y, base, optimum)

    calls = len(D)
    run_log.records.append(IterationRecord(0, best_y, score(best_y), calls, time.perf_counter() - start))
    result = RunResult(run_log, best_x, best_y, D)
    schedule = config.schedule()

    try:
        if config.method == "box_qubo":
            Q = initial_surrogate if initial_surrogate is not None else random_init(n, _derived_seed(seed, _STREAM_SURROGATE))
            Q = train_box_qubo(Q, D, config.init_train_params())
        elif config.method == "regression_baseline":
            model = LowRankModel.init(n, config.fm_rank, _derived_seed(seed, _STREAM_SURROGATE))
            model = train_regression_baseline(model, D, config.init_train_params())
            Q = model_to_qubo(model)
        else:
            if instance is None:
                raise ValueError("white-box method needs the problem instance")
            encoded = encode_instance(instance)
            Q = encoded.Q

        for it in range(1, config.training_length + 1):
            samples = anneal(Q, schedule, _derived_seed(seed, _STREAM_ANNEAL, it))
            X = best_k(samples, config.batch_size)
            if config.method == "whitebox":
                X = np.array([encoded.decode(x)[0] for x in X], dtype=np.uint8)
            fresh = [x for x in _unique_rows(X) if x not in D]
            if fresh:
                E, valid = oracle.evaluate_batch(np.array(fresh))
                for x, e, ok in zip(fresh, E, valid):
                    D.add(x, e, ok)
                calls += len(fresh)
                i = int(np.argmin(E))
                if E[i] < best_y:
                    best_x, best_y = np.array(fresh[i]), float(E[i])
            run_log.records.append(IterationRecord(it, best_y, score(best_y), calls, time.perf_counter() - start))
            result.best_x, result.best_y = best_x, best_y
            if it == config.training_length:
                break
            if config.method == "box_qubo":
                Q = train_box_qubo(Q, D, config.train_params())
            elif config.method == "regression_baseline":
                model = train_regression_baseline(model, D, config.train_params())
                Q = model_to_qubo(model)
    except (TrainingDivergedError, ValueError, FloatingPointError) as exc:
        run_log.error = f"{type(exc).__name__}: {exc}"
        log.warning("run %s/%s seed %s aborted: %s", config.domain, config.method, seed, exc)
    return result


def _unique_rows(X: np.ndarray) -> list[np.ndarray]:
    seen, out = set(), []
    for x in X:
        key = x.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(x)
    return out


# -- suites ------------------------------------------------------------------


def usable_seeds(config: ExperimentConfig, count: int, start: int = 0, limit: int = 1000) -> list[int]:
    """First ``count`` instance seeds from ``start`` whose initial data misses the optimum."""
    found = []
    for seed in range(start, start + limit):
        oracle = make_oracle(build_instance(config, seed))
        initial = initial_dataset(oracle, config.init_training_size, oracle.n, _derived_seed(seed, _STREAM_INIT_DATA))
        if initial.best()[1] != instance_optimum(config, oracle):
            found.append(seed)
            if len(found) == count:
                return found
    raise ValueError(f"only {len(found)} usable seeds in [{start}, {start + limit})")


def run_suite(config: ExperimentConfig, methods=None, seeds=None) -> SuiteResult:
    """Run several methods on the same instances and initial data.

    An instance is dropped from every method's average when any method
    failed on it or when its initial data already contains the optimum.
    Curves hold the per-iteration mean normalized score over the rest.
    """
    methods = list(methods or config.methods)
    seeds = list(seeds if seeds is not None else config.instance_seeds)
    if not methods:
        raise ConfigError("methods", "no methods to compare")
    runs: dict[str, list[RunResult]] = {m: [] for m in methods}
    excluded: dict[int, str] = {}
    for seed in seeds:
        instance = build_instance(config, seed)
        oracle = make_oracle(instance)
        optimum = instance_optimum(config, oracle)
        initial = initial_dataset(oracle, config.init_training_size, oracle.n, _derived_seed(seed, _STREAM_INIT_DATA))
        for label in methods:
            mcfg = _method_config(config, label)
            res = run_optimization(mcfg, oracle, instance, seed=seed, initial=initial, optimum=optimum)
            res.log.method = label
            res.dataset = None
            runs[label].append(res)
            if res.failed:
                excluded.setdefault(seed, f"{label} failed: {res.log.error}")
            elif res.log.solved_at_init:
                excluded.setdefault(seed, "solved at initialization")
    included = [s for s in seeds if s not in excluded]
    for seed, reason in excluded.items():
        log.info("instance seed %s excluded from averages: %s", seed, reason)
    curves = {}
    for label in methods:
        kept = [r.log.normalized_curve() for r in runs[label] if r.log.seed not in excluded]
        curves[label] = np.mean(np.array(kept, dtype=np.float64), axis=0).tolist() if kept else []
    return SuiteResult(methods, runs, included, excluded, curves)


# -- persistence -------------------------------------------------------------


def output_root(override=None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in label).strip("_")


def _fmt(value) -> str:
    if value is None:
        return "nan"
    return repr(float(value))


def curve_csv(run_log: RunLog, record_timing: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in run_log.records:
        seconds = round(r.seconds, 6) if record_timing else 0.0
        writer.writerow([r.iteration, _fmt(r.best_energy), _fmt(r.normalized), r.oracle_calls, _fmt(seconds)])
    return buf.getvalue()


def run_document(result: RunResult, config: ExperimentConfig) -> dict:
    lg = result.log
    return {
        "domain": lg.domain,
        "method": lg.method,
        "seed": lg.seed,
        "base": lg.base,
        "optimum": lg.optimum,
        "solved_at_init": lg.solved_at_init,
        "error": lg.error,
        "best_energy": result.best_y,
        "best_x": [int(b) for b in result.best_x],
        "config": config.to_dict(),
        "records": [
            {
                "iteration": r.iteration,
                "best_energy": r.best_energy,
                "normalized": r.normalized,
                "oracle_calls": r.oracle_calls,
                "seconds": round(r.seconds, 6) if config.record_timing else 0.0,
            }
            for r in lg.records
        ],
    }


def write_run(result: RunResult, config: ExperimentConfig, root=None) -> Path:
    """Write ``<root>/<domain>/<method>/<seed>/log.json`` and ``curve.csv``."""
    lg = result.log
    outdir = output_root(root) / _safe(lg.domain) / _safe(lg.method) / str(lg.seed)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "log.json").write_text(json.dumps(run_document(result, config), indent=2) + "\n")
    (outdir / "curve.csv").write_text(curve_csv(lg, config.record_timing))
    return outdir


def suite_csv(suite: SuiteResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", *suite.methods])
    length = max((len(c) for c in suite.curves.values()), default=0)
    for i in range(length):
        row = [i]
        for m in suite.methods:
            c = suite.curves[m]
            row.append(_fmt(c[i]) if i < len(c) else "nan")
        writer.writerow(row)
    return buf.getvalue()


def write_suite(suite: SuiteResult, config: ExperimentConfig, root=None) -> Path:
    """Write every run plus ``<root>/<domain>/suite.csv`` and ``suite.json``."""
    root = output_root(root)
    for label in suite.methods:
        for res in suite.runs[label]:
            write_run(res, config, root)
    outdir = root / _safe(config.domain)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "suite.csv").write_text(suite_csv(suite))
    summary = {
        "methods": suite.methods,
        "included_seeds": suite.included_seeds,
        "excluded": {str(k): v for k, v in suite.excluded.items()},
        "final_mean_normalized": {m: (c[-1] if c else None) for m, c in suite.curves.items()},
        "config": config.to_dict(),
    }
    (outdir / "suite.json").write_text(json.dumps(summary, indent=2) + "\n")
    return outdir
