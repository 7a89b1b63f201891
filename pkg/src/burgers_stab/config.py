"""Sectioned key-value experiment configuration.

Example::

    [experiment]
    id = ex1

    [physics]
    eta = 1
    nu0 = 0
    v = 1, 1
    omega = 24

    [steady_state]
    ys = x1*x2*(1-x1)*(1-x2)

    [initial]
    y0 = sin(pi*x1)*sin(pi*x2)

    [control]
    enabled = true
    region = full

    [time]
    dt_rule = h_over_2
    T = 0.1

    [mesh]
    levels = 2, 3, 4, 5

    [mode]
    kind = linear

Unknown sections and keys are errors.
"""

import configparser
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from . import field_expr as fe
from .errors import ConfigurationError, ExprSyntaxError
from .fem import PhysicsParams, default_quadrature_order
from .mesh import MAX_LEVEL
from .steady_state import manufactured_forcing

__all__ = ["ExperimentConfig", "load_config", "parse_config", "dump_config"]

_SCHEMA = {
    "experiment": {"id"},
    "domain": {"shape"},
    "physics": {"eta", "nu0", "v", "omega"},
    "steady_state": {"ys"},
    "initial": {"y0", "z0"},
    "control": {"enabled", "region", "compare_uncontrolled"},
    "time": {"dt_rule", "dt", "t"},
    "mesh": {"levels", "quadrature_order"},
    "mode": {"kind", "newton_tol"},
    "forcing": {"kind", "exact"},
    "output": {"directory"},
}
_REQUIRED = {"physics": {"eta"}, "steady_state": {"ys"}, "time": {"t"},
             "mesh": {"levels"}}


@dataclass(frozen=True)
class ExperimentConfig:
    example_id: str
    physics: PhysicsParams
    ys: str
    y0: Optional[str] = None
    z0: Optional[str] = None
    control_enabled: bool = False
    control_region: object = "full"
    compare_uncontrolled: bool = False
    dt_rule: str = "h_over_2"
    dt: Optional[float] = None
    T: float = 0.1
    levels: Tuple[int, ...] = (2, 3, 4, 5)
    quadrature_order: Optional[int] = None
    mode: str = "linear"
    newton_tol: float = 1e-10
    forcing: str = "none"
    exact: Optional[str] = None
    output_directory: str = "output"

    def __post_init__(self):
        if (self.y0 is None) == (self.z0 is None):
            raise ConfigurationError("[initial]: give exactly one of y0 or z0")
        if not self.T > 0:
            raise ConfigurationError("[time] T: must be positive")
        if self.dt_rule not in ("h_over_2", "explicit"):
            raise ConfigurationError(f"[time] dt_rule: unknown rule {self.dt_rule!r}")
        if self.dt_rule == "explicit" and not (self.dt and self.dt > 0):
            raise ConfigurationError("[time] dt: explicit rule needs dt > 0")
        if not self.levels or any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigurationError("[mesh] levels: must be strictly increasing")
        if any(not 1 <= k <= MAX_LEVEL for k in self.levels):
            raise ConfigurationError(f"[mesh] levels: must lie in 1..{MAX_LEVEL}")
        if self.mode not in ("linear", "nonlinear"):
            raise ConfigurationError(f"[mode] kind: unknown mode {self.mode!r}")
        if self.forcing not in ("none", "manufactured"):
            raise ConfigurationError(f"[forcing] kind: unknown kind {self.forcing!r}")
        if self.forcing == "manufactured":
            if self.exact is None:
                raise ConfigurationError("[forcing] exact: required for manufactured forcing")
            if self.mode != "nonlinear":
                raise ConfigurationError("[forcing] kind: forcing needs the nonlinear mode")
        for section, key, text in (("steady_state", "ys", self.ys),
                                   ("initial", "y0", self.y0),
                                   ("initial", "z0", self.z0),
                                   ("forcing", "exact", self.exact)):
            if text is not None:
                try:
                    fe.parse(text)
                except ExprSyntaxError as exc:
                    raise ConfigurationError(f"[{section}] {key}: {exc}") from None

    @property
    def quad_order(self):
        if self.quadrature_order is not None:
            return self.quadrature_order
        return default_quadrature_order(fe.parse(self.ys))

    def dt_for(self, h):
        return h / 2.0 if self.dt_rule == "h_over_2" else self.dt

    def initial_shifted(self):
        """``z0 = y0 - y_s`` (or the given ``z0``)."""
        if self.z0 is not None:
            return fe.parse(self.z0)
        return fe.parse(self.y0) - fe.parse(self.ys)

    def exact_expr(self):
        return fe.parse(self.exact) if self.forcing == "manufactured" else None

    def forcing_expr(self):
        if self.forcing != "manufactured":
            return None
        return manufactured_forcing(fe.parse(self.exact), fe.parse(self.ys),
                                    self.physics)

    def with_levels(self, levels):
        return replace(self, levels=tuple(levels))


def _get(cp, section, key):
    if cp.has_section(section) and cp.has_option(section, key):
        return cp.get(section, key).strip()
    return None


def _float(cp, section, key, default=None):
    raw = _get(cp, section, key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"[{section}] {key}: not a number: {raw!r}") from None


def _bool(cp, section, key, default=False):
    raw = _get(cp, section, key)
    if raw is None:
        return default
    low = raw.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigurationError(f"[{section}] {key}: not a boolean: {raw!r}")


def _floats(raw, section, key, n=None):
    try:
        vals = tuple(float(x) for x in raw.replace("[", "").replace("]", "").split(","))
    except ValueError:
        raise ConfigurationError(f"[{section}] {key}: bad list {raw!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigurationError(f"[{section}] {key}: expected {n} values")
    return vals


def parse_config(text):
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable config: {exc}") from None
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigurationError(f"unknown section [{section}]")
        for key in cp.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"[{section}] unknown key {key!r}")
    for section, keys in _REQUIRED.items():
        for key in keys:
            if _get(cp, section, key) is None:
                raise ConfigurationError(f"[{section}] {key}: missing")

    shape = _get(cp, "domain", "shape") or "unit_square"
    if shape != "unit_square":
        raise ConfigurationError("[domain] shape: only unit_square is supported")

    v_raw = _get(cp, "physics", "v")
    try:
        physics = PhysicsParams(
            eta=_float(cp, "physics", "eta"),
            nu0=_float(cp, "physics", "nu0", 0.0),
            v=_floats(v_raw, "physics", "v", 2) if v_raw else (1.0, 1.0),
            omega=_float(cp, "physics", "omega", 0.0))
    except ConfigurationError as exc:
        raise ConfigurationError(f"[physics] {exc}") from None

    region_raw = _get(cp, "control", "region") or "full"
    region = "full" if region_raw == "full" else _floats(region_raw, "control", "region", 4)

    dt_raw = _get(cp, "time", "dt_rule") or "h_over_2"
    dt = _float(cp, "time", "dt")
    if dt is not None and _get(cp, "time", "dt_rule") is None:
        dt_raw = "explicit"

    levels_raw = _get(cp, "mesh", "levels")
    try:
        levels = tuple(int(x) for x in levels_raw.replace("[", "").replace("]", "").split(","))
    except ValueError:
        raise ConfigurationError(f"[mesh] levels: bad list {levels_raw!r}") from None
    qo = _get(cp, "mesh", "quadrature_order")
    quad = None if qo in (None, "auto") else int(qo)

    return ExperimentConfig(
        example_id=_get(cp, "experiment", "id") or "experiment",
        physics=physics,
        ys=_get(cp, "steady_state", "ys"),
        y0=_get(cp, "initial", "y0"),
        z0=_get(cp, "initial", "z0"),
        control_enabled=_bool(cp, "control", "enabled", False),
        control_region=region,
        compare_uncontrolled=_bool(cp, "control", "compare_uncontrolled", False),
        dt_rule=dt_raw,
        dt=dt,
        T=_float(cp, "time", "t"),
        levels=levels,
        quadrature_order=quad,
        mode=_get(cp, "mode", "kind") or "linear",
        newton_tol=_float(cp, "mode", "newton_tol", 1e-10),
        forcing=_get(cp, "forcing", "kind") or "none",
        exact=_get(cp, "forcing", "exact"),
        output_directory=_get(cp, "output", "directory") or "output",
    )


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg):
    """Canonical text form; ``parse_config(dump_config(c)) == c``."""
    p = cfg.physics
    lines = [
        "[experiment]", f"id = {cfg.example_id}", "",
        "[domain]", "shape = unit_square", "",
        "[physics]", f"eta = {p.eta!r}", f"nu0 = {p.nu0!r}",
        f"v = {p.v[0]!r}, {p.v[1]!r}", f"omega = {p.omega!r}", "",
        "[steady_state]", f"ys = {cfg.ys}", "",
        "[initial]",
        f"y0 = {cfg.y0}" if cfg.y0 is not None else f"z0 = {cfg.z0}", "",
        "[control]", f"enabled = {str(cfg.control_enabled).lower()}",
        "region = " + (cfg.control_region if isinstance(cfg.control_region, str)
                       else ", ".join(repr(float(c)) for c in cfg.control_region)),
        f"compare_uncontrolled = {str(cfg.compare_uncontrolled).lower()}", "",
        "[time]", f"dt_rule = {cfg.dt_rule}",
    ]
    if cfg.dt is not None:
        lines.append(f"dt = {cfg.dt!r}")
    lines += [f"T = {cfg.T!r}", "",
              "[mesh]", "levels = " + ", ".join(str(k) for k in cfg.levels),
              "quadrature_order = " + ("auto" if cfg.quadrature_order is None
                                       else str(cfg.quadrature_order)), "",
              "[mode]", f"kind = {cfg.mode}", f"newton_tol = {cfg.newton_tol!r}", "",
              "[forcing]", f"kind = {cfg.forcing}"]
    if cfg.exact is not None:
        lines.append(f"exact = {cfg.exact}")
    lines += ["", "[output]", f"directory = {cfg.output_directory}", ""]
    return "\n".join(lines)
