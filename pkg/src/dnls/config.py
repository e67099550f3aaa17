"""TOML run and suite configuration files.

A run file::

    name = "soliton"
    dim = 1
    p = 3.0
    mu = -1
    t_end = 1.0
    dt = 1e-3
    cadence = 0.1
    damping = "zero"            # profile grammar, see dnls.damping.parse_profile

    [grid]
    points = 1024
    half_length = 32.0

    [initial]
    kind = "soliton"
    eta = 1.0

    [reports]                   # optional
    checks = ["mass", "hamiltonian"]

A suite file has a ``[suite]`` table and an array of ``[[run]]`` tables,
each of which is a run file body.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .damping import DampingError, parse_profile
from .solver import ConfigError, InitialDataSpec, ReportOptions, SimConfig

CHECKS = ("mass", "energy", "virial_k", "virial_v", "hamiltonian", "hamiltonian_v", "scattering", "liminf")

_RUN_KEYS = {
    "name": str,
    "dim": int,
    "p": float,
    "mu": int,
    "t_end": float,
    "dt": float,
    "cadence": float,
    "damping": str,
    "formulation": str,
    "blowup_threshold": float,
    "resolution_tail": float,
    "nonlinear": bool,
    "seed": int,
}
_REQUIRED = ("dim", "p", "mu", "t_end", "dt")
_GRID_KEYS = {"points": int, "half_length": float}
_INITIAL_KEYS = {f.name: f.type for f in fields(InitialDataSpec)}
_REPORT_KEYS = {f.name for f in fields(ReportOptions)}
_SUITE_KEYS = {"name", "seed", "output_dir", "workers", "reports"}


@dataclass
class ExperimentSuite:
    name: str
    runs: list[SimConfig]
    output_dir: str = "runs"
    seed: int = 0
    workers: int | None = None
    reports: tuple[str, ...] = ()
    source: str = ""

    def __post_init__(self):
        names = [r.name for r in self.runs]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"suite run names must be unique; repeated: {dupes}")

    def __len__(self) -> int:
        return len(self.runs)


def _check_keys(table: dict, allowed, where: str) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")


def _coerce(value, kind, key: str, where: str):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}.{key} must be a boolean")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}.{key} must be an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}.{key} must be a number")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}.{key} must be a string")
        return value
    return value


def _initial(table: dict, where: str) -> InitialDataSpec:
    _check_keys(table, _INITIAL_KEYS, where)
    kw = {}
    for k, v in table.items():
        if k in ("center", "wave_vector"):
            if not isinstance(v, list):
                raise ConfigError(f"{where}.{k} must be an array of numbers")
            kw[k] = tuple(float(x) for x in v)
        elif k in ("kind", "path"):
            kw[k] = _coerce(v, str, k, where)
        else:
            kw[k] = _coerce(v, float, k, where)
    return InitialDataSpec(**kw)


def _reports(table: dict, where: str) -> ReportOptions:
    _check_keys(table, _REPORT_KEYS, where)
    kw = dict(table)
    if "checks" in kw:
        bad = sorted(set(kw["checks"]) - set(CHECKS))
        if bad:
            raise ConfigError(f"unknown check(s) {bad} in {where}; known: {list(CHECKS)}")
        kw["checks"] = tuple(kw["checks"])
    for k, kind in (("burn_in", float), ("epsilon", float), ("sample_every", int),
                    ("scattering", bool), ("figures", bool), ("expect_blowup", bool)):
        if k in kw:
            kw[k] = _coerce(kw[k], kind, k, where)
    return ReportOptions(**kw)


def build_run(table: dict, base_dir: Path, where: str = "run", seed: int | None = None) -> SimConfig:
    allowed = set(_RUN_KEYS) | {"grid", "initial", "reports"}
    _check_keys(table, allowed, where)
    missing = [k for k in _REQUIRED if k not in table]
    if missing:
        raise ConfigError(f"missing required key(s) {missing} in {where}")
    kw = {}
    for k, kind in _RUN_KEYS.items():
        if k in table:
            kw[k] = _coerce(table[k], kind, k, where)
    try:
        kw["damping"] = parse_profile(kw.get("damping", "zero"), base_dir)
    except (DampingError, OSError) as exc:
        raise ConfigError(f"{where}.damping: {exc}") from exc
    grid = table.get("grid", {})
    _check_keys(grid, _GRID_KEYS, f"{where}.grid")
    for k, kind in _GRID_KEYS.items():
        if k not in grid:
            raise ConfigError(f"missing required key {where}.grid.{k}")
        kw[k] = _coerce(grid[k], kind, k, f"{where}.grid")
    kw["initial"] = _initial(table.get("initial", {}), f"{where}.initial")
    kw["reports"] = _reports(table.get("reports", {}), f"{where}.reports")
    if seed is not None and "seed" not in table:
        kw["seed"] = seed
    kw["base_dir"] = str(base_dir)
    return SimConfig(**kw)


def loads(text: str, base_dir: str | Path = ".", source: str = "<string>") -> SimConfig | ExperimentSuite:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from exc
    base_dir = Path(base_dir)
    if "suite" in data:
        _check_keys(data, {"suite", "run"}, source)
        head = data["suite"]
        _check_keys(head, _SUITE_KEYS, f"{source} [suite]")
        seed = _coerce(head.get("seed", 0), int, "seed", "suite")
        runs = [
            build_run(t, base_dir, f"{source} run[{i}]", seed=seed)
            for i, t in enumerate(data.get("run", []))
        ]
        if not runs:
            raise ConfigError(f"{source}: suite has no [[run]] entries")
        return ExperimentSuite(
            name=_coerce(head.get("name", "suite"), str, "name", "suite"),
            runs=runs,
            output_dir=_coerce(head.get("output_dir", "runs"), str, "output_dir", "suite"),
            seed=seed,
            workers=head.get("workers"),
            reports=tuple(head.get("reports", ())),
            source=source,
        )
    return build_run(data, base_dir, source)


def parse_config(path: str | Path) -> SimConfig | ExperimentSuite:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return loads(path.read_text(), base_dir=path.parent, source=str(path))


def to_dict(cfg: SimConfig) -> dict:
    """Plain-data echo of a run configuration (for manifests)."""
    return {
        "name": cfg.name,
        "dim": cfg.dim,
        "p": cfg.p,
        "mu": cfg.mu,
        "t_end": cfg.t_end,
        "dt": cfg.dt,
        "cadence": cfg.cadence,
        "damping": cfg.damping.spec(),
        "formulation": cfg.formulation,
        "blowup_threshold": cfg.blowup_threshold,
        "resolution_tail": cfg.resolution_tail,
        "nonlinear": cfg.nonlinear,
        "seed": cfg.seed,
        "grid": {"points": cfg.points, "half_length": cfg.half_length},
        "initial": {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in vars(cfg.initial).items()
        },
        "reports": {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in vars(cfg.reports).items()
        },
    }


def from_dict(data: dict, base_dir: str | Path = ".") -> SimConfig:
    return build_run(data, Path(base_dir), "manifest")
