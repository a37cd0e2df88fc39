"""Run configuration: a flat ``key = value`` text file with dotted keys.

Grammar, one entry per line::

    # comment (also after a value)
    domain.n = 128
    operator.kind = laplacian

Keys are case-sensitive. Values are parsed as the type of the key's
default. ``auto`` is accepted where noted. Repeated keys are an error.
Every problem is collected and reported together.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calculus import BUILTIN_SYMBOLS
from .grid import DEFAULT_MAX_POINTS, GridDomain, read_grid_function
from .operators import KINDS, OperatorModel, build_operator

SUITES = ("calculus", "frame", "norms", "hardy", "maximal")
AUTO = "auto"

# key -> (default, type); None means required
SCHEMA: dict[str, tuple] = {
    "domain.dim": (1, int),
    "domain.n": (None, int),
    "domain.side": (1.0, float),
    "domain.max_points": (DEFAULT_MAX_POINTS, int),
    "operator.kind": (None, str),
    "operator.potential_file": ("", str),
    "operator.coefficient_file": ("", str),
    "operator.offset": (1.0, float),
    "operator.amplitude": (0.5, float),
    "operator.mode": (1, int),
    "symbol.name": (None, str),
    "symbol.k": (1, int),
    "frame.delta": (AUTO, float),
    "frame.M": (AUTO, int),
    "frame.j_min": (AUTO, int),
    "frame.j_max": (AUTO, int),
    "frame.target_norm": (0.5, float),
    "frame.tol": (1e-10, float),
    "frame.max_iter": (200, int),
    "contour.nodes": (200, int),
    "contour.theta": (math.pi / 4, float),
    "quad.t_lo": (1e-8, float),
    "quad.t_hi": (1e3, float),
    "quad.points": (6000, int),
    "cone.nodes": (48, int),
    "suite.names": (",".join(SUITES), str),
    "suite.seed": (42, int),
    "suite.band_count": (20, int),
    "suite.time_budget": (600.0, float),
    "input.path": ("", str),
    "output.dir": ("heatframe-out", str),
    "cache.dir": (".heatframe-cache", str),
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class RunConfig:
    values: dict
    path: Path | None = None
    config_hash: str = ""
    suites: tuple = field(default_factory=tuple)

    def __getitem__(self, key):
        return self.values[key]

    def is_auto(self, key) -> bool:
        return self.values[key] == AUTO

    def domain(self) -> GridDomain:
        v = self.values
        return GridDomain(v["domain.dim"], v["domain.n"], v["domain.side"], v["domain.max_points"])

    def resolve(self, ref: str) -> Path:
        base = self.path.parent if self.path else Path.cwd()
        return base / ref

    def field_values(self, domain: GridDomain, file_key: str) -> np.ndarray:
        """The field stored in ``file_key`` if set, else
        ``offset + amplitude * mean_k cos(2 pi mode x_k / side)``."""
        v = self.values
        if v[file_key]:
            f = read_grid_function(self.resolve(v[file_key]), domain.side, domain.max_points)
            if f.domain.dim != domain.dim or f.domain.n != domain.n:
                raise ValueError(f"{v[file_key]}: grid does not match the configured domain")
            return np.real(f.values)
        phase = 2 * np.pi * v["operator.mode"] * domain.coords / domain.side
        return v["operator.offset"] + v["operator.amplitude"] * np.cos(phase).mean(axis=1)

    def operator(self) -> OperatorModel:
        dom = self.domain()
        kind = self.values["operator.kind"]
        if kind == "schrodinger":
            return build_operator(kind, dom, potential=self.field_values(dom, "operator.potential_file"))
        if kind == "divergence_form":
            return build_operator(kind, dom, coefficient=self.field_values(dom, "operator.coefficient_file"))
        return build_operator(kind, dom)

    def symbol(self):
        from .calculus import builtin_symbol

        return builtin_symbol(self.values["symbol.name"], self.values["symbol.k"])

    def j_range(self):
        if self.is_auto("frame.j_min") or self.is_auto("frame.j_max"):
            return AUTO
        return (self.values["frame.j_min"], self.values["frame.j_max"])

    def canonical(self) -> str:
        return "".join(f"{k}={self.values[k]!r}\n" for k in sorted(self.values))


def _convert(raw: str, typ):
    if typ is int:
        f = float(raw)
        if not f.is_integer():
            raise ValueError
        return int(f)
    if typ is float:
        return float(raw)
    return raw


def _read_pairs(text: str, errors: list[str]) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            errors.append(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = raw
    return pairs


def _validate(v: dict, errors: list[str], base: Path):
    def bad(key, msg):
        errors.append(f"{key}: {msg}")

    if v.get("domain.dim") not in (1, 2):
        bad("domain.dim", "must be 1 or 2")
    n = v.get("domain.n")
    if isinstance(n, int) and n < 4:
        bad("domain.n", "must be at least 4")
    if isinstance(n, int) and v.get("domain.dim") in (1, 2) and n ** v["domain.dim"] > v.get("domain.max_points", 0):
        bad("domain.n", f"N^dim exceeds the point cap {v.get('domain.max_points')}")
    if isinstance(v.get("domain.side"), float) and v["domain.side"] <= 0:
        bad("domain.side", "must be positive")
    kind = v.get("operator.kind")
    if isinstance(kind, str) and kind not in KINDS:
        bad("operator.kind", f"unknown kind {kind!r}; valid kinds: {', '.join(KINDS)}")
    if kind == "schrodinger" and not v["operator.potential_file"] and v["operator.offset"] < abs(v["operator.amplitude"]):
        bad("operator.offset", "potential must be nonnegative (need offset >= |amplitude|)")
    if kind == "divergence_form" and not v["operator.coefficient_file"] and v["operator.offset"] <= abs(v["operator.amplitude"]):
        bad("operator.offset", "coefficient must be bounded below by a positive constant (need offset > |amplitude|)")
    name = v.get("symbol.name")
    if isinstance(name, str) and name not in BUILTIN_SYMBOLS:
        bad("symbol.name", f"unknown symbol {name!r}; valid symbols: {', '.join(BUILTIN_SYMBOLS)}")
    if isinstance(v.get("symbol.k"), int) and v["symbol.k"] < 1:
        bad("symbol.k", "must be a positive integer")
    delta = v.get("frame.delta")
    if isinstance(delta, float) and not 1 < delta <= 2:
        bad("frame.delta", f"{delta} outside the admissible range (1, 2]")
    M = v.get("frame.M")
    if isinstance(M, int) and M < 1:
        bad("frame.M", "must be a positive integer")
    lo, hi = v.get("frame.j_min"), v.get("frame.j_max")
    if (lo == AUTO) != (hi == AUTO):
        bad("frame.j_min", "j_min and j_max must both be set or both be auto")
    elif isinstance(lo, int) and isinstance(hi, int) and lo > hi:
        bad("frame.j_min", f"empty scale range [{lo}, {hi}]")
    for key in ("frame.target_norm", "frame.tol", "suite.time_budget"):
        if isinstance(v.get(key), float) and v[key] <= 0:
            bad(key, "must be positive")
    for key in ("frame.max_iter", "contour.nodes", "cone.nodes", "quad.points", "suite.band_count"):
        if isinstance(v.get(key), int) and v[key] < 1:
            bad(key, "must be a positive integer")
    if isinstance(v.get("contour.nodes"), int) and v["contour.nodes"] < 16:
        bad("contour.nodes", "needs at least 16 nodes")
    theta = v.get("contour.theta")
    if isinstance(theta, float) and not 0 < theta < math.pi / 2:
        bad("contour.theta", "must lie in (0, pi/2)")
    lo, hi = v.get("quad.t_lo"), v.get("quad.t_hi")
    if isinstance(lo, float) and isinstance(hi, float) and not 0 < lo < hi:
        bad("quad.t_lo", "need 0 < quad.t_lo < quad.t_hi")
    if isinstance(v.get("suite.names"), str):
        names = [s.strip() for s in v["suite.names"].split(",") if s.strip()]
        unknown = [s for s in names if s not in SUITES and s != "all"]
        if unknown or not names:
            bad("suite.names", f"unknown suites {unknown}; valid: {', '.join(SUITES)}, all")
    for key in ("input.path", "operator.potential_file", "operator.coefficient_file"):
        ref = v.get(key)
        if ref and not (base / ref).exists():
            bad(key, f"file {ref!r} does not exist")


def parse_config_text(text: str, base: Path | None = None, path: Path | None = None) -> RunConfig:
    errors: list[str] = []
    pairs = _read_pairs(text, errors)
    values = {}
    for key in pairs:
        if key not in SCHEMA:
            errors.append(f"{key}: unknown key")
    for key, (default, typ) in SCHEMA.items():
        if key not in pairs:
            if default is None:
                errors.append(f"{key}: missing required key")
            values[key] = default
            continue
        raw = pairs[key]
        if default == AUTO and raw == AUTO:
            values[key] = AUTO
            continue
        try:
            values[key] = _convert(raw, typ)
        except ValueError:
            errors.append(f"{key}: expected {typ.__name__}{' or auto' if default == AUTO else ''}, got {raw!r}")
            values[key] = None
    _validate(values, errors, base or Path.cwd())
    if errors:
        raise ConfigError(errors)
    names = [s.strip() for s in values["suite.names"].split(",") if s.strip()]
    suites = SUITES if "all" in names else tuple(s for s in SUITES if s in names)
    cfg = RunConfig(values, path, "", suites)
    cfg.config_hash = hashlib.sha256(cfg.canonical().encode()).hexdigest()
    return cfg


def parse_config(path) -> RunConfig:
    """Parse and validate a config file, raising :class:`ConfigError` with every problem."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    return parse_config_text(text, path.parent, path)


def config_hash(path) -> str:
    return parse_config(path).config_hash
