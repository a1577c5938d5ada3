"""Plain-text ``key=value`` run configuration.

One pair per line, ``#`` starts a comment, blank lines are ignored. Every
key has a default matching the reference synthetic experiment, so an empty
file is a complete configuration.
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Tuple

__all__ = ["ConfigError", "RunConfig", "parse_config", "format_config"]


class ConfigError(Exception):
    """Bad configuration text; the message names the key and the line."""


def _factors(*values):
    return tuple(float(v) for v in values)


DEFAULT_SWEEP = _factors(0.5, 0.71, 1.0, 1.41, 2.0)


@dataclass
class RunConfig:
    size: int = 128
    fwhm: float = 6.0
    # std 0.02 per pixel; see README for the reading of the noise level
    noise_variance: float = 4e-4
    T: float = 5e-4
    min_iter: int = 50
    max_iter: int = 100_000
    burn_in: int = 200
    seed: Optional[int] = None
    alpha_n: float = 0.0
    beta_n: float = math.inf
    alpha_d: float = 0.0
    beta_d: float = math.inf
    alpha_b: float = 0.0
    beta_b: float = math.inf
    sweep_gn: Tuple[float, ...] = DEFAULT_SWEEP
    sweep_gd: Tuple[float, ...] = DEFAULT_SWEEP
    sweep_gb: Tuple[float, ...] = DEFAULT_SWEEP
    workers: int = 1
    map_rtol: float = 1e-8
    map_max_iter: int = 50_000
    map_marginal: bool = True

    def gamma_prior(self):
        from .gibbs import GammaPrior

        return GammaPrior(self.alpha_n, self.beta_n, self.alpha_d, self.beta_d, self.alpha_b, self.beta_b)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
            elif isinstance(v, float) and math.isinf(v):
                d[k] = "inf"
        return d


def _parse_bool(s):
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float(s):
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _parse_list(s):
    items = [x for x in s.replace(",", " ").split() if x]
    if not items:
        raise ValueError("empty list")
    return tuple(_parse_float(x) for x in items)


def _parse_int(s):
    v = float(s)
    if not v.is_integer():
        raise ValueError(f"not an integer: {s!r}")
    return int(v)


_PARSERS = {
    int: _parse_int,
    float: _parse_float,
    bool: _parse_bool,
    Optional[int]: _parse_int,
    Tuple[float, ...]: _parse_list,
}

_ALIASES = {"P": "size", "noise_var": "noise_variance"}


def _check(cfg: RunConfig, where: dict):
    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}" + (f" (line {where[key]})" if key in where else ""))

    if cfg.size < 3:
        fail("size", "must be at least 3")
    for key in ("fwhm", "T", "map_rtol"):
        if not getattr(cfg, key) > 0:
            fail(key, "must be positive")
    if cfg.noise_variance < 0:
        fail("noise_variance", "must be nonnegative")
    for key in ("min_iter", "max_iter", "workers", "map_max_iter"):
        if getattr(cfg, key) < 1:
            fail(key, "must be at least 1")
    if cfg.burn_in < 0:
        fail("burn_in", "must be nonnegative")
    if cfg.seed is not None and cfg.seed < 0:
        fail("seed", "must be nonnegative")
    for c in "ndb":
        if getattr(cfg, "alpha_" + c) < 0:
            fail("alpha_" + c, "must be nonnegative")
        if not getattr(cfg, "beta_" + c) > 0:
            fail("beta_" + c, "must be positive (inf allowed)")
    for key in ("sweep_gn", "sweep_gd", "sweep_gb"):
        if any(not f > 0 or math.isinf(f) for f in getattr(cfg, key)):
            fail(key, "factors must be positive and finite")


def parse_config(text: str) -> RunConfig:
    """Parse configuration text into a :class:`RunConfig`."""
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    values = {}
    where = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        key = _ALIASES.get(key, key)
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in where:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first on line {where[key]})")
        if not val:
            raise ConfigError(f"line {lineno}: missing value for {key!r}")
        try:
            values[key] = _PARSERS[types[key]](val)
        except ValueError as e:
            raise ConfigError(f"line {lineno}: cannot parse {key}={val!r}: {e}") from None
        where[key] = lineno
    cfg = RunConfig(**values)
    _check(cfg, where)
    return cfg


def format_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` for a fully resolved config."""
    lines = []
    for k, v in cfg.to_dict().items():
        if v is None:
            continue
        if isinstance(v, list):
            v = ",".join(repr(float(x)) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"
