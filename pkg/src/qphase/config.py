"""Run configuration: ``section.key = value`` lines with ``#`` comments.

Parsing collects every problem it finds (with line numbers) before failing,
so a config can be fixed in one pass.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional


class Scenario(str, Enum):
    FREE_WAVE = "free_wave"
    FREE_PACKET = "free_packet"
    HARMONIC_EVOLVE = "harmonic_evolve"
    HARMONIC_STATIONARY = "harmonic_stationary"
    QUANTIZE = "quantize"
    TWO_SLIT = "two_slit"
    UNCERTAINTY_SUITE = "uncertainty_suite"
    RELATIVISTIC_TABLE = "relativistic_table"
    ORACLE_COMPARE = "oracle_compare"


_FLOAT = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_INT = re.compile(r"[+-]?\d+")
_LINE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)")


def _float(s):
    if not _FLOAT.fullmatch(s):
        raise ValueError(f"expected a decimal number, got {s!r}")
    return float(s)


def _int(s):
    if not _INT.fullmatch(s):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(s)


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {s!r}")
        return s
    return parse


def _text(s):
    if not s:
        raise ValueError("empty value")
    return s


@dataclass(frozen=True)
class _Key:
    parse: Any
    default: Any
    check: Optional[Any] = None  # (predicate, message)


_positive = (lambda v: v > 0, "must be positive")
_nonneg = (lambda v: v >= 0, "must be nonnegative")
_at_least_4 = (lambda v: v >= 4, "must be at least 4")

SCHEMA: dict[str, _Key] = {
    "run.scenario": _Key(_choice(*[s.value for s in Scenario]), None),
    "run.branch": _Key(_choice("cosine", "sine"), "cosine"),
    "run.n": _Key(_int, 0, _nonneg),
    "run.n_max": _Key(_int, 4, _nonneg),
    "run.form": _Key(_choice("exp", "real"), "exp"),
    "run.method": _Key(_choice("quintic", "cubic", "catmull_rom", "bilinear"), "quintic"),
    "grid.q_min": _Key(_float, -10.0),
    "grid.q_max": _Key(_float, 10.0),
    "grid.p_min": _Key(_float, -5.0),
    "grid.p_max": _Key(_float, 5.0),
    "grid.n_q": _Key(_int, 256, _at_least_4),
    "grid.n_p": _Key(_int, 256, _at_least_4),
    "grid.boundary_mode": _Key(_choice("truncate", "periodic_q"), "truncate"),
    "physics.hbar": _Key(_float, 1.0, _positive),
    "physics.m": _Key(_float, 1.0, _positive),
    "physics.omega": _Key(_float, 1.0, _positive),
    "physics.c": _Key(_float, 1.0, _positive),
    "physics.p0": _Key(_float, 1.0),
    "physics.q0": _Key(_float, 0.0),
    "physics.sigma_q": _Key(_float, 1.0, _positive),
    "physics.sigma_p": _Key(_float, 0.5, _positive),
    "physics.beta": _Key(_float, None, _positive),
    "physics.slit_d": _Key(_float, 2.0, _positive),
    "physics.slit_sigma": _Key(_float, 1.0, _positive),
    "physics.slit_L": _Key(_float, 3.0, _positive),
    "physics.branch_sign": _Key(_choice("+1", "-1", "1"), "+1"),
    "time.dt": _Key(_float, 1e-3, _positive),
    "time.t_final": _Key(_float, 1.0, _positive),
    "time.snapshot_every": _Key(_int, 0, _nonneg),
    "output.directory": _Key(_text, "qphase_out"),
    "output.precision": _Key(_int, None, (lambda v: 1 <= v <= 17, "must be between 1 and 17")),
}

REQUIRED = ("run.scenario",)


@dataclass(frozen=True)
class ConfigIssue:
    line: int  # 0 when the problem is not tied to one line
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}" if self.line else self.message


class ConfigError(ValueError):
    def __init__(self, issues: list[ConfigIssue]):
        self.issues = issues
        super().__init__("\n".join(str(i) for i in issues))


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(repr=False)
    lines: dict = field(repr=False, default_factory=dict)  # key -> line number

    def __getitem__(self, key):
        return self.values[key]

    @property
    def scenario(self) -> Scenario:
        return Scenario(self.values["run.scenario"])

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}

    def echo(self) -> list[str]:
        """``key = value`` lines for every resolved setting, sorted by key."""
        out = []
        for k in sorted(self.values):
            v = self.values[k]
            out.append(f"{k} = {'default' if v is None else _render(v)}")
        return out


def _render(v):
    return repr(v) if isinstance(v, float) else str(v)


def parse_config(text: str) -> RunConfig:
    issues: list[ConfigIssue] = []
    seen: dict[str, int] = {}
    raw: dict[str, tuple[str, int]] = {}
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        m = _LINE.fullmatch(body)
        if not m:
            issues.append(ConfigIssue(no, f"expected 'section.key = value', got {body!r}"))
            continue
        key = f"{m.group(1)}.{m.group(2)}"
        value = m.group(3).strip()
        if key not in SCHEMA:
            issues.append(ConfigIssue(no, f"unknown key {key}"))
            continue
        if key in seen:
            issues.append(ConfigIssue(no, f"duplicate key {key} (first set on line {seen[key]})"))
            continue
        seen[key] = no
        raw[key] = (value, no)

    values: dict[str, Any] = {}
    for key, entry in SCHEMA.items():
        if key not in raw:
            if key in REQUIRED:
                issues.append(ConfigIssue(0, f"missing required key {key}"))
            values[key] = entry.default
            continue
        text_value, no = raw[key]
        try:
            v = entry.parse(text_value)
        except ValueError as exc:
            issues.append(ConfigIssue(no, f"{key}: {exc}"))
            values[key] = entry.default
            continue
        if entry.check is not None and not entry.check[0](v):
            issues.append(ConfigIssue(no, f"{key} {entry.check[1]} (got {text_value})"))
        values[key] = v

    lines = {k: n for k, (_, n) in raw.items()}
    issues.extend(_cross_checks(values, lines))
    if issues:
        issues.sort(key=lambda i: i.line)
        raise ConfigError(issues)
    if values["physics.branch_sign"] == "1":
        values["physics.branch_sign"] = "+1"
    return RunConfig(values, lines)


def _cross_checks(v, lines) -> list[ConfigIssue]:
    out = []

    def at(*keys):
        return max((lines.get(k, 0) for k in keys), default=0)

    for a, b in (("grid.q_min", "grid.q_max"), ("grid.p_min", "grid.p_max")):
        if v[a] is not None and v[b] is not None and not v[b] > v[a]:
            out.append(ConfigIssue(at(a, b), f"{b} must exceed {a}"))
    scen = v["run.scenario"]
    if scen in ("free_packet", "harmonic_evolve", "uncertainty_suite"):
        sq, sp, hbar = v["physics.sigma_q"], v["physics.sigma_p"], v["physics.hbar"]
        if sq and sp and hbar and sq > 0 and sp > 0 and sq * sp < 0.5 * hbar * (1 - 1e-12):
            out.append(ConfigIssue(at("physics.sigma_q", "physics.sigma_p"),
                                   "physics.sigma_q * physics.sigma_p must be at least hbar/2"))
    if scen == "two_slit" and v["physics.p0"] == 0:
        out.append(ConfigIssue(at("physics.p0"), "physics.p0 must be nonzero for two_slit"))
    if scen in ("harmonic_stationary",) and v["run.branch"] == "sine" and v["run.n"] == 0:
        out.append(ConfigIssue(at("run.n", "run.branch"), "the sine ladder starts at run.n = 1"))
    dt, tf = v["time.dt"], v["time.t_final"]
    if dt and tf and dt > 0 and tf > 0 and dt > tf:
        out.append(ConfigIssue(at("time.dt", "time.t_final"), "time.dt must not exceed time.t_final"))
    return out
