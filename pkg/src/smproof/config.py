"""Flat ``key = value`` proof configuration.

Blank lines and ``#`` comments are ignored; keys are case-sensitive.  The
bracket endpoints are decimal strings and are enclosed outward, so the
bracket used by the proof always contains the decimal interval.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace

from .homoclinic import HomoclinicSettings
from .integrator import IntegratorSettings
from .interval import Interval, decimal_interval
from .sepvalue import SepSettings

__all__ = ["ConfigError", "ProofConfig", "load_config", "parse_config"]

_SECTION = "proof"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class ProofConfig:
    a_left: str = "1.72432329151531"
    a_right: str = "1.72432329151551"
    R: float = 1e-5
    L: float = 4e-5
    T: float = 26.0
    branch: int = -1
    membership_pieces: int = 8
    stable_pieces: int = 4
    block_depth: int = 6
    taylor_order: int = 24
    tolerance: float = 1e-22
    step_max: float = 0.5
    step_min: float = 2.0**-20
    rho_backward: float = 1.6e-4
    rho_forward: float = 5.4e-5
    r_forward: float = 1e-4
    T_flight: float | None = None
    threads: int | None = None
    out: str | None = None

    def __post_init__(self):
        for name in ("R", "L", "T", "tolerance", "step_max", "step_min", "rho_backward",
                     "rho_forward", "r_forward"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.T_flight is not None and not self.T_flight > 0:
            raise ConfigError("T_flight must be positive")
        if self.branch not in (-1, 1):
            raise ConfigError("branch must be -1 or 1")
        for name in ("membership_pieces", "stable_pieces", "block_depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if not 2 <= self.taylor_order <= 30:
            raise ConfigError("taylor_order must lie in [2, 30]")
        if not self.step_min <= self.step_max:
            raise ConfigError("need step_min <= step_max")
        lo, hi = self.bracket_endpoints()
        if not lo.hi < hi.lo:
            raise ConfigError("need a_left < a_right")

    def bracket_endpoints(self) -> tuple[Interval, Interval]:
        try:
            return decimal_interval(self.a_left), decimal_interval(self.a_right)
        except (ValueError, ArithmeticError) as exc:
            raise ConfigError(f"bad bracket endpoint: {exc}") from exc

    def bracket(self) -> Interval:
        lo, hi = self.bracket_endpoints()
        return Interval(lo.lo, hi.hi)

    def integrator(self) -> IntegratorSettings:
        return IntegratorSettings(taylor_order=self.taylor_order, tolerance=self.tolerance,
                                  step_max=self.step_max, step_min=self.step_min)

    def homoclinic_settings(self) -> HomoclinicSettings:
        return HomoclinicSettings(R=self.R, L=self.L, T=self.T, branch=self.branch,
                                  membership_pieces=self.membership_pieces,
                                  stable_pieces=self.stable_pieces, block_depth=self.block_depth,
                                  integrator=self.integrator(), threads=self.threads)

    def sep_settings(self) -> SepSettings:
        return SepSettings(rho_backward=self.rho_backward, rho_forward=self.rho_forward,
                           r_forward=self.r_forward, T_flight=self.T_flight,
                           integrator=self.integrator())


def _convert(name: str, text: str, kind):
    text = text.strip()
    if kind is str:
        return text
    if text.lower() in ("", "none", "default"):
        return None
    try:
        if kind is int:
            return int(text)
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {text!r}") from exc


_KINDS = {f.name: (str if f.name in ("a_left", "a_right", "out") else
                   int if f.type in ("int", "int | None") else float) for f in fields(ProofConfig)}


def parse_config(text: str, base: ProofConfig | None = None) -> ProofConfig:
    """Parse the flat key-value format; unknown keys are an error."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    values = {}
    for key, raw in cp.items(_SECTION):
        if key not in _KINDS:
            raise ConfigError(f"unknown key {key!r}")
        v = _convert(key, raw, _KINDS[key])
        if v is None and key not in ("T_flight", "threads", "out"):
            raise ConfigError(f"{key} needs a value")
        values[key] = v
    try:
        return replace(base or ProofConfig(), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ProofConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
