"""Job configuration (INI text), validation and execution.

A config file holds one section per job::

    [berry]
    kind = holonomy
    system = two_level
    single_valued = phi

Numbers may be written as simple expressions in ``pi`` (``pi/2``,
``2*pi``). Missing keys are filled from per-system and per-kind defaults;
:func:`emit_config` writes every filled key back out so that
``parse_config(emit_config(c)) == c``.
"""

from __future__ import annotations

import ast
import configparser
import math
import operator
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import anyons
from .connection import connection_field, curvature_nonabelian, eigen_frame_field, wz_connection
from .errors import ConfigError, DegeneracyChangeError, HolonomyError, NumericalError
from .model import (
    CNOT_GAUGE,
    FAMILIES,
    FAMILY_CONSTANTS,
    ParameterPoint,
    dark_frame,
    eval_hamiltonian,
    holonomic_cnot,
    is_unitary,
    ket,
    make_family,
    phase_gate,
    standard_gates,
    tensor_product,
    two_level_frame,
)
from .paths import ParamPath, circle, polyline, rectangle, sweep
from .spectral import frame_path, unitary_log
from .transport import holonomy_by_transport, path_ordered_exp, phase_decomposition, schrodinger_evolve

KINDS = ("connection", "holonomy", "evolve", "anyon", "gates", "landau")
FORMATS = ("report", "csv", "both")

# -- value parsing ------------------------------------------------------------

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}
_NAMES = {"pi": math.pi, "tau": 2 * math.pi}


def number(text: str) -> float:
    """Evaluate a numeric literal or an arithmetic expression in ``pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"not a number: {text!r}")

    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError, OverflowError):
        raise ValueError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"not finite: {text!r}")
    return value


def _integer(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ValueError(f"not an integer: {text!r}") from None


def _boolean(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _split(text: str, sep: str = ",") -> list[str]:
    return [t.strip() for t in text.split(sep) if t.strip()]


def _point(text: str) -> dict[str, float]:
    out = {}
    for item in _split(text):
        if "=" not in item:
            raise ValueError(f"expected name=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = number(v)
    return out


def _bounds(text: str) -> tuple[tuple[float, float], tuple[float, float]]:
    parts = _split(text)
    if len(parts) != 2 or any(p.count(":") != 1 for p in parts):
        raise ValueError(f"expected 'a1:b1, a2:b2', got {text!r}")
    return tuple(tuple(number(x) for x in p.split(":")) for p in parts)


def _waypoints(text: str) -> tuple[tuple[float, ...], ...]:
    rows = [tuple(number(x) for x in row.split()) for row in _split(text, ";")]
    if len(rows) < 2 or len({len(r) for r in rows}) != 1:
        raise ValueError("waypoints need at least two rows of equal length, separated by ';'")
    return tuple(rows)


def _fmt_float(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class Kind:
    """Parser, formatter and range check for one value type."""

    parse: Callable[[str], Any]
    emit: Callable[[Any], str]


T_FLOAT = Kind(number, _fmt_float)
T_INT = Kind(_integer, str)
T_STR = Kind(str.strip, str)
T_BOOL = Kind(_boolean, lambda b: "true" if b else "false")
T_FLOATS = Kind(lambda t: tuple(number(x) for x in _split(t)), lambda v: ", ".join(_fmt_float(x) for x in v))
T_INTS = Kind(lambda t: tuple(_integer(x) for x in _split(t)), lambda v: ", ".join(str(x) for x in v))
T_NAMES = Kind(lambda t: tuple(_split(t)), lambda v: ", ".join(v))
T_POINT = Kind(_point, lambda d: ", ".join(f"{k}={_fmt_float(v)}" for k, v in d.items()))
T_BOUNDS = Kind(_bounds, lambda b: ", ".join(f"{_fmt_float(a)}:{_fmt_float(c)}" for a, c in b))
T_WAYPOINTS = Kind(_waypoints, lambda w: "; ".join(" ".join(_fmt_float(x) for x in row) for row in w))


@dataclass(frozen=True)
class Key:
    kind: Kind
    default: Any = None
    choices: tuple | None = None
    lo: float | None = None
    hi: float | None = None
    lo_open: bool = False

    def check(self, value) -> str | None:
        if self.choices is not None and value not in self.choices:
            return f"must be one of {', '.join(map(str, self.choices))}"
        if self.lo is not None or self.hi is not None:
            vals = value if isinstance(value, tuple) else (value,)
            for v in vals:
                if not isinstance(v, (int, float)):
                    continue
                if self.lo is not None and (v < self.lo or (self.lo_open and v == self.lo)):
                    return f"{v} is below the allowed range ({'>' if self.lo_open else '>='} {self.lo})"
                if self.hi is not None and v > self.hi:
                    return f"{v} is above the allowed range (<= {self.hi})"
        return None


COMMON = {
    "kind": Key(T_STR, choices=KINDS),
    "seed": Key(T_INT, 0, lo=0, hi=2**64 - 1),
    "format": Key(T_STR, "report", choices=FORMATS),
}
SYSTEM = {
    "system": Key(T_STR),
    "constants": Key(T_POINT, {}),
    "tau_deg": Key(T_FLOAT, 1e-8, lo=0, hi=1e-2, lo_open=True),
}
SELECT = {
    "indices": Key(T_INTS, lo=0),
    "window": Key(T_FLOATS),
}
LOOP = {
    "loop": Key(T_STR, choices=("sweep", "circle", "rectangle", "polyline")),
    "params": Key(T_NAMES),
    "base": Key(T_POINT),
    "span": Key(T_FLOAT),
    "center": Key(T_FLOATS),
    "radius": Key(T_FLOAT, lo=0, lo_open=True),
    "bounds": Key(T_BOUNDS),
    "waypoints": Key(T_WAYPOINTS),
    "closed": Key(T_BOOL, True),
    "steps": Key(T_INT, lo=4, hi=10**7),
    "tau_overlap": Key(T_FLOAT, 1e-8, lo=0, hi=1e-1, lo_open=True),
}
SCHEMAS: dict[str, dict[str, Key]] = {
    "connection": {
        **COMMON,
        **SYSTEM,
        **SELECT,
        "point": Key(T_POINT),
        "directions": Key(T_NAMES),
        "frame": Key(T_STR, choices=("analytic", "eigen")),
        "gauge": Key(T_STR, "cnot", choices=("cnot", "real")),
        "method": Key(T_STR, "auto", choices=("auto", "analytic", "finite-diff")),
        "form": Key(T_STR, "hermitian", choices=("hermitian", "raw")),
        "h": Key(T_FLOAT, 1e-6, lo=0, hi=1e-1, lo_open=True),
        "curvature": Key(T_NAMES),
    },
    "holonomy": {
        **COMMON,
        **SYSTEM,
        **SELECT,
        **LOOP,
        "method": Key(T_STR, "transport", choices=("transport", "wilson", "both")),
        "sign_convention": Key(T_STR, "-i", choices=("-i", "+i")),
        "g": Key(T_FLOAT, 1.0),
        "gauge": Key(T_STR, "cnot", choices=("cnot", "real")),
        "single_valued": Key(T_STR),
        "target": Key(T_STR),
    },
    "evolve": {
        **COMMON,
        **SYSTEM,
        **LOOP,
        "T": Key(T_FLOAT, 100.0, lo=0, lo_open=True),
        "index": Key(T_INT, 0, lo=0),
        "max_drift": Key(T_FLOAT, 1e-6, lo=0, lo_open=True),
    },
    "anyon": {
        **COMMON,
        "mode": Key(T_STR, "uniform", choices=("uniform", "estimated")),
        "nu": Key(T_FLOAT, lo=0, hi=1, lo_open=True),
        "R": Key(T_FLOAT, lo=0),
        "flux": Key(T_FLOAT, lo=0, lo_open=True),
        "l0": Key(T_FLOAT, 1.0, lo=0, lo_open=True),
        "n_electrons": Key(T_INT, 6, lo=2, hi=30),
        "m": Key(T_INT, 3, lo=1, hi=9),
        "samples": Key(T_INT, 100000, lo=1000, hi=10**8),
        "burn_in": Key(T_INT, 2000, lo=0),
        "step": Key(T_FLOAT, lo=0, lo_open=True),
        "hole": Key(T_FLOATS),
        "r_max": Key(T_FLOAT, 8.0, lo=0, lo_open=True),
        "bins": Key(T_INT, 32, lo=1, hi=10000),
        "batches": Key(T_INT, 20, lo=2, hi=1000),
        "reference": Key(T_FLOATS, lo=0),
    },
    "gates": {**COMMON, "phi": Key(T_FLOAT, 0.0)},
    "landau": {
        **COMMON,
        "area": Key(T_FLOAT, lo=0, lo_open=True),
        "l0": Key(T_FLOAT, 1.0, lo=0, lo_open=True),
        "n_electrons": Key(T_FLOAT, lo=0, lo_open=True),
        "B": Key(T_FLOAT, lo=0, lo_open=True),
        "m": Key(T_INT, lo=1),
    },
}

# Per-system defaults for the keys a minimal job leaves out.
SYSTEM_DEFAULTS: dict[str, dict[str, Any]] = {
    "two_level": {
        "loop": "sweep",
        "params": ("phi",),
        "base": {"r": 1.0, "phi": 0.0},
        "span": 2 * math.pi,
        "steps": 2000,
        "indices": (0,),
        "point": {"r": 1.0, "phi": 0.0},
        "frame": "analytic",
    },
    "dark_5p1_restricted": {
        "loop": "rectangle",
        "params": ("theta3", "theta4"),
        "base": {"theta3": 0.0, "theta4": 0.0},
        "bounds": ((0.0, math.pi / 2), (0.0, math.pi / 2)),
        "steps": 10000,
        "window": (-1e-6, 1e-6),
        "point": {"theta3": 0.5, "theta4": 0.5},
        "frame": "analytic",
        "constants": {"epsilon": 1.0, "omega": 1.0},
    },
    "dark_5p1_full": {
        "loop": "rectangle",
        "params": ("theta3", "theta4"),
        "base": {p: 0.0 for p in ("theta1", "theta2", "theta3", "theta4", "phi2", "phi3", "phi4", "phi5")},
        "bounds": ((0.0, math.pi / 2), (0.0, math.pi / 2)),
        "steps": 10000,
        "window": (-1e-6, 1e-6),
        "point": {
            **{p: 0.0 for p in ("theta1", "theta2", "phi2", "phi3", "phi4", "phi5")},
            "theta3": 0.5,
            "theta4": 0.5,
        },
        "frame": "eigen",
        "constants": {"epsilon": 1.0, "omega": 1.0},
    },
}

ANALYTIC_FRAMES = ("two_level", "dark_5p1_restricted")
TARGETS = ("holonomic_cnot", "CNOT", "SWAP", "I", "sigma1", "sigma2", "sigma3")


# -- config objects -------------------------------------------------------------


@dataclass(frozen=True)
class Job:
    name: str
    values: dict[str, Any] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.values["kind"]

    def __getitem__(self, key: str):
        return self.values.get(key)


@dataclass(frozen=True)
class JobConfig:
    jobs: tuple[Job, ...]

    def job(self, name: str) -> Job:
        return next(j for j in self.jobs if j.name == name)


def _line_numbers(text: str) -> dict[tuple[str, str | None], int]:
    lines, section = {}, None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = n
            continue
        m = re.match(r"([^=:]+)[=:]", line)
        if m and section is not None:
            lines.setdefault((section, m.group(1).strip()), n)
    return lines


def parse_config(text: str) -> JobConfig:
    """Parse and validate a config; raises :class:`ConfigError` with every problem found."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    cp.optionxform = str  # keys are case-sensitive ("T", "R", "B")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    lines = _line_numbers(text)
    problems: list[str] = []
    jobs = []
    if not cp.sections():
        raise ConfigError(["config defines no jobs"])
    for name in cp.sections():

        def report(key, msg, name=name):
            n = lines.get((name, key)) or lines.get((name, None))
            where = f"line {n}: " if n else ""
            problems.append(f"{where}[{name}] {key}: {msg}" if key else f"{where}[{name}] {msg}")

        raw = dict(cp[name])
        job = _validate(name, raw, report)
        if job is not None:
            jobs.append(job)
    if problems:
        raise ConfigError(problems)
    return JobConfig(tuple(jobs))


def _validate(name: str, raw: dict[str, str], report) -> Job | None:
    kind = raw.get("kind", "").strip()
    if kind not in KINDS:
        report("kind", f"missing or unknown job kind {kind!r}; expected one of {', '.join(KINDS)}")
        return None
    schema = SCHEMAS[kind]
    values: dict[str, Any] = {}
    ok = True
    for key, text in raw.items():
        if key not in schema:
            report(key, f"unknown key for this job kind ({kind})")
            ok = False
            continue
        try:
            values[key] = schema[key].kind.parse(text)
        except ValueError as exc:
            report(key, str(exc))
            ok = False
            continue
        msg = schema[key].check(values[key])
        if msg:
            report(key, msg)
            ok = False
    if not ok:
        return None

    if "system" in schema:
        system = values.get("system")
        if system is None:
            report("system", "required")
            return None
        if system not in FAMILIES:
            report("system", f"unknown system {system!r}; registered: {', '.join(sorted(FAMILIES))}")
            return None
        for key, default in SYSTEM_DEFAULTS[system].items():
            if key in schema and key not in values:
                if key in ("indices", "window") and ("indices" in values or "window" in values):
                    continue
                values[key] = default
    for key, spec in schema.items():
        if key not in values and spec.default is not None:
            values[key] = spec.default

    job = Job(name, values)
    checker = _SEMANTIC.get(kind)
    if checker is not None and not checker(job, report):
        return None
    return job


# -- semantic checks ----------------------------------------------------------------


def _check_family(job: Job, report):
    constants = job["constants"]
    allowed = FAMILY_CONSTANTS[job["system"]]
    bad = set(constants) - set(allowed)
    if bad:
        report("constants", f"{job['system']} takes constants ({', '.join(allowed)}), got {', '.join(sorted(bad))}")
        return None
    return make_family(job["system"], **constants)


def _check_point(job: Job, key: str, family, report) -> bool:
    coords = job[key]
    missing = [p for p in family.params if p not in coords]
    extra = [p for p in coords if p not in family.params]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing {', '.join(missing)}")
        if extra:
            parts.append(f"unknown parameter(s) {', '.join(extra)}")
        report(key, f"{'; '.join(parts)} (system {job['system']} has {', '.join(family.params)})")
        return False
    return True


def _check_select(job: Job, family, report) -> bool:
    if job["indices"] is not None and job["window"] is not None:
        report("indices", "give either indices or window, not both")
        return False
    if job["indices"] is not None:
        if not job["indices"] or max(job["indices"]) >= family.dim:
            report("indices", f"indices must lie in 0..{family.dim - 1}")
            return False
    elif job["window"] is None or len(job["window"]) != 2 or job["window"][0] >= job["window"][1]:
        report("window", "expected 'lo, hi' with lo < hi")
        return False
    return True


def build_loop(job: Job, family) -> ParamPath:
    """The job's path; raises ValueError or HolonomyError when malformed."""
    kind, params = job["loop"], job["params"]
    base = ParameterPoint.of(**{p: job["base"][p] for p in family.params})
    for p in params:
        if p not in family.params:
            raise ValueError(f"params: unknown parameter {p!r} (system has {', '.join(family.params)})")
    steps = job["steps"]
    if kind == "sweep":
        if len(params) != 1 or job["span"] is None:
            raise ValueError("params/span: a sweep needs one parameter and a span")
        return sweep(base, params[0], job["span"], steps, family.periods)
    if len(params) != 2 and kind in ("circle", "rectangle"):
        raise ValueError(f"params: a {kind} needs two parameters")
    if kind == "circle":
        if job["center"] is None or len(job["center"]) != 2 or job["radius"] is None:
            raise ValueError("center/radius: a circle needs a two-component center and a radius")
        return circle(params, job["center"], job["radius"], steps, base=base)
    if kind == "rectangle":
        if job["bounds"] is None:
            raise ValueError("bounds: a rectangle needs bounds")
        return rectangle(params, job["bounds"], steps, base=base, periods=family.periods)
    wp = job["waypoints"]
    if wp is None:
        raise ValueError("waypoints: a polyline needs waypoints")
    if len(wp[0]) != len(params):
        raise ValueError(f"waypoints: rows have {len(wp[0])} entries for {len(params)} params")
    full = np.repeat(base.as_array()[None, :], len(wp), axis=0)
    for j, p in enumerate(params):
        full[:, base.index(p)] = [row[j] for row in wp]
    return polyline(base.names, full, steps, closed=job["closed"], periods=family.periods)


def _check_loop(job: Job, family, report) -> bool:
    if not _check_point(job, "base", family, report):
        return False
    wp = job["waypoints"]
    if job["loop"] == "polyline" and job["closed"] and wp is not None:
        periods = [family.periods.get(p) for p in job["params"]]
        gap = max(
            abs(math.remainder(b - a, per)) if per else abs(b - a) for a, b, per in zip(wp[0], wp[-1], periods)
        )
        if gap > 1e-12:
            report("waypoints", f"closed loop: last waypoint (row {len(wp)}) differs from the first by {gap:.6g}")
            return False
    try:
        build_loop(job, family)
    except (ValueError, HolonomyError) as exc:
        key, _, msg = str(exc).partition(": ")
        if key in LOOP:
            report(key, msg)
        else:
            report("loop", str(exc))
        return False
    return True


def _check_connection(job: Job, report) -> bool:
    family = _check_family(job, report)
    if family is None or not _check_point(job, "point", family, report):
        return False
    if job["frame"] == "eigen" and not _check_select(job, family, report):
        return False
    if job["frame"] == "analytic" and job["system"] not in ANALYTIC_FRAMES:
        report("frame", f"no analytic frame for {job['system']}; use frame = eigen")
        return False
    for key in ("directions", "curvature"):
        for p in job[key] or ():
            if p not in family.params:
                report(key, f"unknown parameter {p!r}")
                return False
    if job["curvature"] is not None and len(job["curvature"]) != 2:
        report("curvature", "expected two parameter names")
        return False
    return True


def _check_holonomy(job: Job, report) -> bool:
    family = _check_family(job, report)
    if family is None or not _check_select(job, family, report) or not _check_loop(job, family, report):
        return False
    if not job["closed"]:
        report("closed", "a holonomy needs a closed loop")
        return False
    if job["method"] != "transport" and job["system"] not in ANALYTIC_FRAMES:
        report("method", f"the Wilson loop needs an analytic frame, which {job['system']} lacks")
        return False
    sv = job["single_valued"]
    if sv is not None and sv not in family.periods:
        report("single_valued", f"{sv!r} is not a periodic parameter of {job['system']}")
        return False
    target = job["target"]
    if target is not None and target not in TARGETS:
        try:
            complex(target)
        except ValueError:
            report("target", f"expected a gate ({', '.join(TARGETS)}) or a complex scalar")
            return False
    return True


def _check_evolve(job: Job, report) -> bool:
    family = _check_family(job, report)
    if family is None or not _check_loop(job, family, report):
        return False
    if job["index"] >= family.dim:
        report("index", f"must lie in 0..{family.dim - 1}")
        return False
    if not job["closed"]:
        report("closed", "evolution is along a closed loop")
        return False
    return True


def _check_anyon(job: Job, report) -> bool:
    if job["mode"] == "uniform":
        if job["nu"] is None:
            report("nu", "required in uniform mode")
            return False
    elif job["m"] % 2 == 0:
        report("m", "Laughlin exponent must be odd")
        return False
    if (job["R"] is None) == (job["flux"] is None):
        report("R", "give exactly one of R or flux")
        return False
    if job["mode"] == "estimated":
        R = job["R"] if job["R"] is not None else math.sqrt(2 * job["flux"])
        if R > job["r_max"]:
            report("R", f"loop radius {R:.6g} l0 lies beyond the density grid (r_max = {job['r_max']})")
            return False
    if job["hole"] is not None and len(job["hole"]) != 2:
        report("hole", "expected 'x, y'")
        return False
    ref = job["reference"]
    if ref is not None and (len(ref) != 2 or ref[0] >= ref[1]):
        report("reference", "expected 'r_lo, r_hi' with r_lo < r_hi")
        return False
    return True


def _check_landau(job: Job, report) -> bool:
    for key in ("area", "n_electrons"):
        if job[key] is None:
            report(key, "required")
            return False
    return True


_SEMANTIC = {
    "connection": _check_connection,
    "holonomy": _check_holonomy,
    "evolve": _check_evolve,
    "anyon": _check_anyon,
    "landau": _check_landau,
}


def emit_config(config: JobConfig) -> str:
    """Canonical text for ``config``, with every filled-in key written out."""
    out = []
    for job in config.jobs:
        schema = SCHEMAS[job.kind]
        out.append(f"[{job.name}]")
        for key, value in job.values.items():
            if value is not None:
                out.append(f"{key} = {schema[key].kind.emit(value)}")
        out.append("")
    return "\n".join(out)


def with_overrides(config: JobConfig, *, seed: int | None = None, steps: int | None = None) -> JobConfig:
    jobs = []
    for job in config.jobs:
        values = dict(job.values)
        if seed is not None:
            values["seed"] = seed
        if steps is not None and "steps" in SCHEMAS[job.kind]:
            values["steps"] = steps
        jobs.append(Job(job.name, values))
    return JobConfig(tuple(jobs))


# -- reports -----------------------------------------------------------------------


def phase(x: float) -> dict[str, float]:
    return {"radians": float(x), "pi_multiple": float(x) / math.pi}


def matrix(U) -> dict[str, list]:
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    return {"re": U.real.tolist(), "im": U.imag.tolist()}


def unitary_matrix(U, tol: float = 1e-8) -> dict[str, Any]:
    """Matrix entry plus its unitarity check; raises if the check fails."""
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    err = float(np.max(np.abs(U.conj().T @ U - np.eye(len(U)))))
    if err > tol:
        raise NumericalError(f"reported matrix is not unitary (deviation {err:.2e})")
    return {**matrix(U), "unitarity_error": err}


@dataclass
class JobReport:
    name: str
    kind: str
    echo: dict[str, str]
    results: dict[str, Any]
    diagnostics: dict[str, Any] = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list[list[float]]]] = field(default_factory=dict)
    wall_time: float = 0.0

    def payload(self) -> dict[str, Any]:
        """Everything except the wall time; deterministic for a given config."""
        return {
            "job": self.name,
            "kind": self.kind,
            "config": self.echo,
            "results": self.results,
            "diagnostics": self.diagnostics,
        }


class JobFailure(NumericalError):
    """A numerical failure inside a job, with the job's name and kind attached."""

    def __init__(self, job: Job, exc: Exception):
        super().__init__(f"job {job.name!r} ({job.kind}): {exc}")
        self.job = job
        self.cause = exc


def run_job(job: Job) -> JobReport:
    """Run one validated job; numerical failures are raised as :class:`JobFailure`."""
    start = time.perf_counter()
    echo = {k: SCHEMAS[job.kind][k].kind.emit(v) for k, v in job.values.items() if v is not None}
    try:
        results, diagnostics, tables = _RUNNERS[job.kind](job)
    except (NumericalError, DegeneracyChangeError, ArithmeticError, ValueError) as exc:
        raise JobFailure(job, exc) from exc
    return JobReport(job.name, job.kind, echo, results, diagnostics, tables, time.perf_counter() - start)


def _family(job: Job):
    return make_family(job["system"], **job["constants"])


def _selection(job: Job) -> dict[str, Any]:
    if job["indices"] is not None:
        return {"indices": job["indices"]}
    return {"window": job["window"]}


def _analytic_frame(job: Job, single_valued: bool = True):
    if job["system"] == "two_level":
        idx = (job["indices"] or (0,))[0]
        return two_level_frame("-" if idx == 0 else "+", single_valued=single_valued)
    return dark_frame(CNOT_GAUGE if job["gauge"] == "cnot" else None)


def _run_connection(job: Job):
    family = _family(job)
    point = ParameterPoint.of(**job["point"])
    if job["frame"] == "analytic":
        frame = _analytic_frame(job)
    else:
        frame = eigen_frame_field(family, point, tau_deg=job["tau_deg"], **_selection(job))
    directions = job["directions"] or family.params
    results: dict[str, Any] = {"frame": frame.name, "connection": {}}
    for d in directions:
        A = wz_connection(
            frame, point, d, family=family, method=job["method"], h=job["h"], form=job["form"], tau_deg=job["tau_deg"]
        )
        results["connection"][d] = matrix(A)
    if job["curvature"] is not None:
        mu, nu = job["curvature"]
        F = curvature_nonabelian(connection_field(frame, h=job["h"], method=job["method"]), point, mu, nu)
        results["curvature"] = {"mu": mu, "nu": nu, "F": matrix(F)}
    return results, {}, {}


def _target_matrix(name: str, k: int) -> np.ndarray:
    if name == "holonomic_cnot":
        return holonomic_cnot()
    gates = standard_gates()
    if name in gates:
        return gates[name]
    return complex(name) * np.eye(k)


def _run_holonomy(job: Job):
    family = _family(job)
    loop = build_loop(job, family)
    results: dict[str, Any] = {}
    diagnostics: dict[str, Any] = {"steps": loop.steps}
    tables = {}
    unitaries = {}
    if job["method"] in ("transport", "both"):
        basis = None
        if job["system"] in ANALYTIC_FRAMES:
            basis = _analytic_frame(job)(loop.point(0))
        res = holonomy_by_transport(
            family,
            loop,
            tau_deg=job["tau_deg"],
            tau_overlap=job["tau_overlap"],
            initial_basis=basis,
            **_selection(job),
        )
        unitaries["transport"] = res
    if job["method"] in ("wilson", "both"):
        field_ = connection_field(_analytic_frame(job))
        unitaries["wilson"] = path_ordered_exp(field_, loop, g=job["g"], sign=job["sign_convention"])
    for method, res in unitaries.items():
        entry = {"unitary": unitary_matrix(res.unitary), "eigenphases": [phase(x) for x in res.eigenphases]}
        if res.phase is not None:
            entry["phase"] = phase(res.phase)
        results[method] = entry
        diagnostics[f"{method}_error_estimate"] = res.error_estimate
        tables[f"{method}_eigenphases"] = (
            ["index", "radians", "pi_multiple"],
            [[i, x, x / math.pi] for i, x in enumerate(res.eigenphases)],
        )
    if len(unitaries) == 2:
        diagnostics["method_agreement"] = float(
            np.max(np.abs(unitaries["transport"].unitary - unitaries["wilson"].unitary))
        )
    first = next(iter(unitaries.values()))
    if loop.winding() is not None:
        diagnostics["winding"] = loop.winding()
    if job["single_valued"] is not None:
        # constant connection that makes the transported frame single-valued
        i = loop.names.index(job["single_valued"])
        span = loop.points[-1, i] - loop.points[0, i]
        A = 1j * unitary_log(first.unitary) / span
        results["single_valued_connection"] = {"param": job["single_valued"], "A": matrix(A)}
        if A.shape == (1, 1):
            results["single_valued_connection"]["value"] = float(A[0, 0].real)
    if job["target"] is not None:
        T = _target_matrix(job["target"], first.unitary.shape[0])
        if T.shape != first.unitary.shape:
            raise ValueError(f"target {job['target']} has shape {T.shape}, holonomy has {first.unitary.shape}")
        results["target"] = {
            "name": job["target"],
            "max_deviation": {m: float(np.max(np.abs(r.unitary - T))) for m, r in unitaries.items()},
            "modulus_pattern_deviation": {
                m: float(np.max(np.abs(np.abs(r.unitary) - np.abs(T)))) for m, r in unitaries.items()
            },
        }
    return results, diagnostics, tables


def _param_at(loop: ParamPath, s: float) -> np.ndarray:
    if loop.curve is not None:
        return np.asarray(loop.curve(np.array([s])), float)[0]
    x = s * loop.steps
    grid = np.arange(loop.steps + 1)
    return np.array([np.interp(x, grid, loop.points[:, i]) for i in range(loop.points.shape[1])])


def _run_evolve(job: Job):
    family = _family(job)
    loop = build_loop(job, family)
    T, N = job["T"], loop.steps
    fp = frame_path(family, loop, indices=(job["index"],), tau_deg=job["tau_deg"], tau_overlap=job["tau_overlap"])
    # single-valued adiabatic reference: undo the closure phase uniformly in s
    L = unitary_log(fp.closure)[0, 0]
    s = np.arange(N + 1) / N
    refs = fp.frames[:, :, 0] * np.exp(-s * L)[:, None]
    refs[-1] = refs[0]
    names = loop.names

    def hamiltonian(t):
        return eval_hamiltonian(family, ParameterPoint.from_array(names, _param_at(loop, t / T)))

    def reference(t):
        return refs[int(round(t / T * N))]

    traj = schrodinger_evolve(hamiltonian, refs[0], T, N, max_drift=job["max_drift"])
    pd = phase_decomposition(traj, hamiltonian, reference)
    results = {
        "total": phase(pd.total),
        "dynamical": phase(pd.dynamical),
        "geometric": phase(pd.geometric),
        "adiabatic_geometric": phase(pd.adiabatic_geometric),
        "residual": pd.residual,
        "removed_dynamical": pd.removed_dynamical,
    }
    diagnostics = {"norm_drift": traj.norm_drift, "leakage": pd.leakage, "steps": N}
    stride = max(1, N // 1000)
    pop = np.abs(np.einsum("ki,ki->k", refs.conj(), traj.states)) ** 2
    rows = [[float(traj.times[k]), float(pop[k])] for k in range(0, N + 1, stride)]
    return results, diagnostics, {"population": (["t", "reference_population"], rows)}


def _run_anyon(job: Job):
    l0 = job["l0"]
    R = job["R"] if job["R"] is not None else math.sqrt(2 * job["flux"]) * l0
    flux = anyons.flux_ratio(R, l0)
    if job["mode"] == "uniform":
        gamma = anyons.quasihole_berry_phase(R, nu=job["nu"], l0=l0)
        results = {"R": R, "flux_ratio": flux, "gamma": phase(gamma)}
        if flux > 0:
            results["effective_charge"] = anyons.effective_charge(gamma, flux)
        return results, {}, {}
    cfg = anyons.LaughlinConfig(job["n_electrons"], job["m"], l0, job["seed"])
    z0 = None
    if job["hole"] is not None:
        z0 = complex(anyons.positions_from_xy(job["hole"]))
    mc = anyons.metropolis_sample(cfg, job["samples"], z0=z0, burn_in=job["burn_in"], step=job["step"])
    edges = np.linspace(0.0, job["r_max"], job["bins"] + 1)
    center = complex(z0) if z0 is not None else 0j
    est = anyons.density_profile(mc, edges, center=center, batches=job["batches"], reference=job["reference"])
    gamma = anyons.quasihole_berry_phase(R, density=est, l0=l0)
    count, count_err = est.enclosed(R / l0)
    total, total_err = est.total()
    results = {
        "R": R,
        "flux_ratio": flux,
        "enclosed": count,
        "enclosed_stderr": count_err,
        "gamma": phase(gamma),
        "gamma_uniform": phase(anyons.quasihole_berry_phase(R, nu=1 / job["m"], l0=l0)),
        "rho0": est.rho0,
        "rho0_stderr": est.rho0_stderr,
        "integrated_count": total,
        "integrated_count_stderr": total_err,
    }
    if flux > 0:
        results["effective_charge"] = anyons.effective_charge(gamma, flux)
    diagnostics = {"acceptance_rate": mc.acceptance_rate, "empty_bins": est.empty_bins, "samples": est.n_samples}
    rows = [[float(c), float(d), float(e)] for c, d, e in zip(est.centers, est.density, est.stderr)]
    return results, diagnostics, {"density": (["bin_center_in_l0", "density", "stderr"], rows)}


def _run_gates(job: Job):
    phi = job["phi"]
    gates = {**standard_gates(phi), "holonomic_cnot": holonomic_cnot()}
    I4 = np.eye(4)
    basis = np.column_stack([ket(b) for b in ("00", "01", "10", "11")])
    checks = {
        "CNOT_squared_is_identity": bool(np.array_equal(gates["CNOT"] @ gates["CNOT"], I4)),
        "SWAP_squared_is_identity": bool(np.array_equal(gates["SWAP"] @ gates["SWAP"], I4)),
        "phase_inverse_residual": float(np.max(np.abs(phase_gate(phi) @ phase_gate(-phi) - I4))),
        "tensor_basis_is_standard": bool(np.array_equal(basis, I4)),
        "kron_matches_tensor_product": bool(
            np.array_equal(tensor_product(gates["sigma1"], gates["I"]), np.kron(gates["sigma1"], gates["I"]))
        ),
    }
    for name, U in gates.items():
        if not is_unitary(U):
            raise NumericalError(f"gate {name} is not unitary")
    return {"gates": {k: matrix(v) for k, v in gates.items()}, "checks": checks}, {}, {}


def _run_landau(job: Job):
    rep = anyons.landau_relations(job["area"], job["l0"], job["n_electrons"], job["B"])
    results = {
        "degeneracy": rep.degeneracy,
        "filling": rep.filling,
        "filling_from_density": rep.filling_from_density,
        "density": rep.density,
        "flux_ratio": rep.flux_ratio,
        "enclosed_direct": rep.enclosed_direct,
        "enclosed_chain": rep.enclosed_chain,
        "consistent": rep.consistent,
    }
    if job["m"] is not None:
        results["droplet_consistent"] = math.isclose(
            job["m"] * (job["n_electrons"] - 1), rep.degeneracy - 1, rel_tol=1e-12, abs_tol=1e-12
        )
    return results, {}, {}


_RUNNERS = {
    "connection": _run_connection,
    "holonomy": _run_holonomy,
    "evolve": _run_evolve,
    "anyon": _run_anyon,
    "gates": _run_gates,
    "landau": _run_landau,
}
