"""Experiment configuration: presets, flat ``key = value`` files, JSON.

A config file holds one ``key = value`` per line with ``#`` comments::

    domain = max4sat_20_300
    method = box_qubo
    split_fraction = 0.03
    instance_seeds = 0, 1, 2

Keys not given fall back to the preset of the chosen ``domain``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from boxqubo.annealer import AnnealSchedule
from boxqubo.surrogate import TrainParams

__all__ = ["ConfigError", "ExperimentConfig", "DOMAIN_PRESETS", "METHODS", "load_config", "parse_flat"]

METHODS = ("box_qubo", "regression_baseline", "whitebox")
PROBLEMS = ("sat", "fvs", "maxclique")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; ``key`` names the culprit."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


# Hyperparameters per benchmark domain; init_* are the one-time initial training values.
DOMAIN_PRESETS: dict[str, dict] = {
    "max4sat_20_300": dict(
        problem="sat", num_vars=20, num_clauses=300, k=4,
        n_cycles=5, n_epochs=150, init_n_cycles=30, init_n_epochs=600, init_training_size=2000,
    ),
    "max4sat_30_400": dict(
        problem="sat", num_vars=30, num_clauses=400, k=4,
        n_cycles=5, n_epochs=150, init_n_cycles=30, init_n_epochs=600, init_training_size=10000,
    ),
    "fvs_25_200": dict(
        problem="fvs", num_vertices=25, num_edges=200,
        n_cycles=10, n_epochs=150, init_n_cycles=30, init_n_epochs=400, init_training_size=10000,
    ),
    "maxclique_30_350": dict(
        problem="maxclique", num_vertices=30, num_edges=350,
        n_cycles=10, n_epochs=150, init_n_cycles=30, init_n_epochs=400, init_training_size=10000,
    ),
    "custom": dict(),
}


@dataclass(frozen=True)
class ExperimentConfig:
    domain: str = "custom"
    method: str = "box_qubo"
    methods: tuple[str, ...] = ("box_qubo", "regression_baseline")

    # instance
    problem: str = "sat"
    num_vars: int = 14
    num_clauses: int = 120
    k: int = 4
    num_vertices: int = 12
    num_edges: int = 40
    instance_file: str | None = None
    instance_seeds: tuple[int, ...] = (0,)
    known_optimum: float | None = None

    # surrogate training
    split_fraction: float = 0.1
    exclude_invalids: bool = False
    n_cycles: int = 5
    n_epochs: int = 150
    init_n_cycles: int = 30
    init_n_epochs: int = 600
    learning_rate: float = 0.005
    fm_rank: int = 8
    stop_on_plateau: bool = False

    # sampler
    reads: int = 50
    sweeps: int | None = None
    beta_start: float = 0.1
    beta_end: float = 10.0
    pool: int = 10

    # outer loop
    batch_size: int = 10
    training_length: int = 15
    init_training_size: int = 1000
    record_timing: bool = False

    def __post_init__(self):
        if self.domain not in DOMAIN_PRESETS:
            raise ConfigError("domain", f"unknown domain {self.domain!r}; choose from {sorted(DOMAIN_PRESETS)}")
        if self.method not in METHODS:
            raise ConfigError("method", f"unknown method {self.method!r}; choose from {list(METHODS)}")
        for m in self.methods:
            if _method_base(m) not in METHODS:
                raise ConfigError("methods", f"unknown method {m!r}")
        if self.problem not in PROBLEMS:
            raise ConfigError("problem", f"unknown problem {self.problem!r}; choose from {list(PROBLEMS)}")
        if self.training_length < 0:
            raise ConfigError("training_length", "must be >= 0")
        if not self.instance_seeds:
            raise ConfigError("instance_seeds", "must list at least one seed")
        for key in ("batch_size", "init_training_size", "init_n_cycles", "init_n_epochs"):
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be >= 1")
        try:
            self.train_params()
            self.init_train_params()
        except ValueError as exc:
            raise ConfigError(_culprit(str(exc)), str(exc)) from None
        try:
            self.schedule()
        except ValueError as exc:
            raise ConfigError(_culprit(str(exc), {"num_reads": "reads", "sweeps_per_read": "sweeps", "pool_size": "pool"}), str(exc)) from None

    def train_params(self) -> TrainParams:
        return TrainParams(
            split_fraction=self.split_fraction,
            exclude_invalids=self.exclude_invalids,
            n_cycles=self.n_cycles,
            n_epochs=self.n_epochs,
            learning_rate=self.learning_rate,
            fm_rank=self.fm_rank,
            stop_on_plateau=self.stop_on_plateau,
        )

    def init_train_params(self) -> TrainParams:
        return dataclasses.replace(self.train_params(), n_cycles=self.init_n_cycles, n_epochs=self.init_n_epochs)

    def schedule(self) -> AnnealSchedule:
        return AnnealSchedule(self.reads, self.sweeps, self.beta_start, self.beta_end, self.pool)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["instance_seeds"] = list(self.instance_seeds)
        d["methods"] = list(self.methods)
        return d

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        """Build from raw key/value pairs (strings or typed values).

        Unknown keys are errors.  Preset values of ``domain`` apply first,
        explicit keys override them.
        """
        fields = {f.name: f for f in dataclasses.fields(cls)}
        for key in mapping:
            if key not in fields:
                raise ConfigError(key, "unknown key")
        domain = mapping.get("domain", "custom")
        if domain not in DOMAIN_PRESETS:
            raise ConfigError("domain", f"unknown domain {domain!r}; choose from {sorted(DOMAIN_PRESETS)}")
        values = dict(DOMAIN_PRESETS[domain])
        for key, raw in mapping.items():
            values[key] = _convert(key, fields[key].type, raw)
        return cls(**values)


def _culprit(message: str, aliases: dict | None = None) -> str:
    token = message.split()[0]
    return (aliases or {}).get(token, token)


def _method_base(label: str) -> str:
    return label.split("[", 1)[0].strip()


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key: str, typ: str, raw):
    """Coerce ``raw`` to the annotated field type (annotations are strings here)."""
    optional = "None" in typ
    if optional and (raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none", "null"))):
        return None
    try:
        if typ.startswith("tuple[int"):
            items = _split_list(raw)
            return tuple(int(v) for v in items)
        if typ.startswith("tuple[str"):
            return tuple(_split_list(raw))
        if typ.startswith("bool"):
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in _TRUE:
                return True
            if s in _FALSE:
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if typ.startswith("int"):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(f"expected an integer, got {raw!r}")
            if isinstance(raw, bool):
                raise ValueError(f"expected an integer, got {raw!r}")
            return int(raw) if not isinstance(raw, str) else int(raw.strip().replace("_", ""))
        if typ.startswith("float"):
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


def _split_list(raw) -> list[str]:
    if isinstance(raw, (list, tuple)):
        return [str(v).strip() for v in raw]
    out, depth, cur = [], 0, ""
    for ch in str(raw):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch in ", " and depth == 0:
            if cur.strip():
                out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def parse_flat(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("", f"line {lineno}: missing key")
        if key in out:
            raise ConfigError(key, f"line {lineno}: duplicate key")
        out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a flat or ``.json`` config file and apply ``overrides``."""
    mapping: dict = {}
    if path is not None:
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".json":
            mapping = json.loads(text)
            if not isinstance(mapping, dict):
                raise ConfigError("", "JSON config must be an object")
        else:
            mapping = parse_flat(text)
    mapping.update(overrides or {})
    return ExperimentConfig.from_mapping(mapping)
