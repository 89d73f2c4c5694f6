"""JSON run configurations for power and asymptotic studies.

Documents are validated against a JSON Schema before anything is computed;
every violation is reported with its field path. A power document holds one
or more distributions, each of which becomes its own ``ExperimentConfig``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from jsonschema import Draft202012Validator

from .fspace import Grid
from .harness import TEST_IDS, ExperimentConfig, TestOptions
from .simproc import KlSpec, ShiftSpec, sbm, t_process
from .wmw import GAMMA_MODES


class ConfigError(ValueError):
    """Raised for documents that fail schema or semantic validation."""


_NUM = {"type": "number"}
_GRID = {
    "type": "object",
    "properties": {
        "d": {"type": "integer", "minimum": 1},
        "a": _NUM,
        "b": _NUM,
        "weight_mode": {"enum": ["euclidean", "trapezoid"]},
    },
    "required": ["d"],
    "additionalProperties": False,
}
_DIST = {
    "type": "object",
    "properties": {
        "model": {"enum": ["sbm", "t"]},
        "r": {"type": "integer", "minimum": 1},
        "K": {"type": "integer", "minimum": 1},
        "t_mode": {"enum": ["shared", "independent"]},
    },
    "required": ["model"],
    "additionalProperties": False,
    "if": {"properties": {"model": {"const": "t"}}},
    "then": {"required": ["r"]},
}
_TESTS = {"type": "array", "items": {"enum": list(TEST_IDS)}, "minItems": 1, "uniqueItems": True}
_COMMON = {
    "grid": _GRID,
    "distributions": {"type": "array", "items": _DIST, "minItems": 1},
    "tests": _TESTS,
    "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "seed": {"type": "integer", "minimum": 0},
    "n_mc": {"type": "integer", "minimum": 1000},
    "L": {"type": ["integer", "null"], "minimum": 1},
    "cumvar_threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "p": {"type": "number", "minimum": 2},
}

POWER_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        **_COMMON,
        "m": {"type": "integer", "minimum": 2},
        "n": {"type": "integer", "minimum": 2},
        "shifts": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["delta1", "delta2", "delta3", "custom"]},
                    "c": {"type": "array", "items": _NUM, "minItems": 1},
                    "values": {"type": "array", "items": _NUM, "minItems": 1},
                },
                "required": ["kind", "c"],
                "additionalProperties": False,
                "if": {"properties": {"kind": {"const": "custom"}}},
                "then": {"required": ["values"]},
            },
        },
        "replicates": {"type": "integer", "minimum": 1},
        "gamma_mode": {"enum": list(GAMMA_MODES)},
        "trunc_tol": {"type": "number", "minimum": 0},
    },
    "required": ["m", "n", "grid", "distributions", "shifts", "replicates"],
    "additionalProperties": False,
}

ASYMPTOTIC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        **_COMMON,
        "shift_kinds": {"type": "array", "minItems": 1, "uniqueItems": True,
                        "items": {"enum": ["delta1", "delta2", "delta3"]}},
        "c_values": {"type": "array", "items": _NUM, "minItems": 1},
        "mc_outer": {"type": "integer", "minimum": 1},
        "mc_inner": {"type": "integer", "minimum": 2},
        "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    },
    "required": ["grid", "distributions", "shift_kinds", "c_values"],
    "additionalProperties": False,
}


def _path(err) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate(doc, schema: dict) -> None:
    errors = sorted(Draft202012Validator(schema).iter_errors(doc),
                    key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        raise ConfigError("invalid config:\n" + "\n".join(
            f"  {_path(e)}: {e.message}" for e in errors))


def bundled_configs() -> list[str]:
    root = resources.files("funcwmw") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_document(path: str | Path) -> tuple[dict, bytes]:
    """Read a JSON document from a path or a bundled config name."""
    p = Path(path)
    if p.exists():
        raw = p.read_bytes()
    elif str(path) in bundled_configs():
        raw = (resources.files("funcwmw") / "configs" / f"{path}.json").read_bytes()
    else:
        raise ConfigError(f"no such config file or bundled config: {path} "
                          f"(bundled: {', '.join(bundled_configs())})")
    try:
        return json.loads(raw), raw
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc


def config_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def make_grid(doc: dict) -> Grid:
    try:
        return Grid(float(doc.get("a", 0.0)), float(doc.get("b", 1.0)), doc["d"],
                     doc.get("weight_mode", "euclidean"))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def make_distribution(doc: dict) -> KlSpec:
    K = doc.get("K", 500)
    if doc["model"] == "sbm":
        return sbm(K)
    return t_process(doc["r"], K, doc.get("t_mode", "shared"))


def distribution_label(kl: KlSpec) -> str:
    label = kl.label
    if kl.innovation == "t" and kl.t_mode != "shared":
        label += f"[{kl.t_mode}]"
    if kl.K != 500:
        label += f"[K={kl.K}]"
    return label


def _check_unit(grid: Grid) -> None:
    if grid.a < 0 or grid.b > 1:
        raise ConfigError("grid: simulated curves live on [0, 1]; a and b must lie in it")


@dataclass(frozen=True)
class PowerRun:
    labels: tuple[str, ...]
    studies: tuple[ExperimentConfig, ...]
    seed: int


def power_run(doc: dict) -> PowerRun:
    validate(doc, POWER_SCHEMA)
    grid = make_grid(doc["grid"])
    _check_unit(grid)
    shifts = []
    for i, s in enumerate(doc["shifts"]):
        if s["kind"] == "custom":
            if len(s["values"]) != grid.d:
                raise ConfigError(f"shifts/{i}/values: has {len(s['values'])} entries, "
                                  f"grid has d={grid.d}")
            shifts.append((ShiftSpec("custom", 1.0, tuple(float(v) for v in s["values"])),
                           tuple(float(c) for c in s["c"])))
        else:
            shifts.append((s["kind"], tuple(float(c) for c in s["c"])))
    options = TestOptions(p=float(doc.get("p", 2.0)),
                          gamma_mode=doc.get("gamma_mode", "pooled_rank"),
                          cumvar_threshold=doc.get("cumvar_threshold", 0.85),
                          L=doc.get("L"), n_mc=doc.get("n_mc", 100_000),
                          trunc_tol=doc.get("trunc_tol", 1e-10))
    seed = doc.get("seed", 0)
    labels, studies = [], []
    for dist_doc in doc["distributions"]:
        kl = make_distribution(dist_doc)
        labels.append(distribution_label(kl))
        studies.append(ExperimentConfig(
            m=doc["m"], n=doc["n"], grid=grid, distribution=kl, shifts=tuple(shifts),
            tests=tuple(doc.get("tests", TEST_IDS)), replicates=doc["replicates"],
            alpha=doc.get("alpha", 0.05), seed=seed, options=options))
    if len(set(labels)) != len(labels):
        raise ConfigError("distributions: entries must be distinct")
    return PowerRun(tuple(labels), tuple(studies), seed)


@dataclass(frozen=True)
class AsymptoticRun:
    grid: Grid
    distributions: tuple[KlSpec, ...]
    shift_kinds: tuple[str, ...]
    c_values: tuple[float, ...]
    tests: tuple[str, ...]
    alpha: float
    seed: int
    p: float
    n_mc: int
    mc_outer: int
    mc_inner: int
    L: int | None
    cumvar_threshold: float
    gamma: float


def asymptotic_run(doc: dict) -> AsymptoticRun:
    validate(doc, ASYMPTOTIC_SCHEMA)
    grid = make_grid(doc["grid"])
    _check_unit(grid)
    return AsymptoticRun(
        grid=grid,
        distributions=tuple(make_distribution(d) for d in doc["distributions"]),
        shift_kinds=tuple(doc["shift_kinds"]),
        c_values=tuple(float(c) for c in doc["c_values"]),
        tests=tuple(doc.get("tests", TEST_IDS)),
        alpha=doc.get("alpha", 0.05),
        seed=doc.get("seed", 0),
        p=float(doc.get("p", 2.0)),
        n_mc=doc.get("n_mc", 100_000),
        mc_outer=doc.get("mc_outer", 10_000),
        mc_inner=doc.get("mc_inner", 500),
        L=doc.get("L"),
        cumvar_threshold=doc.get("cumvar_threshold", 0.85),
        gamma=doc.get("gamma", 0.5),
    )
