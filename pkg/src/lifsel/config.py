"""INI experiment configuration.

Example::

    [experiment]
    signals = s1, s2, s3
    functionals = point:1/4, point:1/2
    bases = haar, d20
    procedures = P1, P2, P3
    n = 256
    sigma = 0.2
    replicates = 5000
    p = 1
    master_seed = 2008
    sigma_scale = definition-1
    output_dir = out/pointwise
    keep_coarse_level = 0

    [signal.s2]
    functionals = point:1/8, point:1/4, point:1/3, point:1/2

    [signal.tent]
    pieces =
        [0, 1/2] : 2*x
        (1/2, 1] : 2 - 2*x

    [rates]
    signal = holder
    functional = point:1/2
    n_list = 256, 512, 1024, 2048, 4096, 8192
    dimension = 1

Functional tokens: ``point:x`` (``point:x:y`` in two dimensions),
``interval:a:b`` and ``g:name``. Fractions like ``1/3`` are accepted.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .functionals import FunctionalKind, FunctionalSpec
from .observation import is_dyadic
from .signals import BUILTIN_SIGNALS, Signal, piecewise_signal
from .wavelets import D20, HAAR, BasisFamily

__all__ = [
    "PROCEDURES",
    "ConfigError",
    "ExperimentConfig",
    "RatesConfig",
    "parse_functional",
    "functional_token",
    "parse_basis",
    "load_config",
]

PROCEDURES = ("P1", "P2", "P3", "P4")
_BASES = {"haar": HAAR, "h": HAAR, "d20": D20, "daubechies20": D20}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _num(text: str) -> float:
    return float(Fraction(text.strip()))


def parse_functional(token: str) -> FunctionalSpec:
    kind, _, rest = token.strip().partition(":")
    kind = kind.lower()
    parts = rest.split(":") if rest else []
    label = rest
    if kind == "point" and parts:
        x0 = [_num(p) for p in parts]
        spec = FunctionalSpec.point(x0)
    elif kind == "interval" and len(parts) == 2:
        spec = FunctionalSpec.interval_mean(_num(parts[0]), _num(parts[1]))
        label = f"[{parts[0]},{parts[1]}]"
    elif kind == "g" and len(parts) == 1:
        spec = FunctionalSpec.integral(parts[0])
    else:
        raise ConfigError(f"functionals: cannot parse {token!r}")
    return FunctionalSpec(
        spec.kind, x0=spec.x0, r=spec.r, interval=spec.interval, g_name=spec.g_name,
        dimension=spec.dimension, label=label,
    )


def functional_token(spec: FunctionalSpec) -> str:
    """Short kind name used in report rows."""
    return {
        FunctionalKind.POINT_EVAL: "point",
        FunctionalKind.INTERVAL_MEAN: "interval",
        FunctionalKind.INTEGRAL_AGAINST_G: "g",
        FunctionalKind.CUSTOM: "custom",
    }[spec.kind]


def parse_basis(name: str) -> BasisFamily:
    try:
        return _BASES[name.strip().lower()]
    except KeyError:
        raise ConfigError(f"bases: unknown basis {name!r} (use haar or d20)") from None


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


@dataclass(frozen=True)
class RatesConfig:
    signal: str
    functional: FunctionalSpec
    n_list: tuple[int, ...]
    dimension: int = 1
    replicates: int = 2000


@dataclass(frozen=True)
class ExperimentConfig:
    signals: tuple[str, ...]
    functionals: tuple[FunctionalSpec, ...]
    bases: tuple[BasisFamily, ...]
    procedures: tuple[str, ...]
    n: int
    sigma: float
    replicates: int
    p: float = 1.0
    master_seed: int = 0
    sigma_scale: str = "definition-1"
    output_dir: Path = Path("out")
    keep_coarse_level: int = 0
    signal_functionals: Mapping[str, tuple[FunctionalSpec, ...]] = field(default_factory=dict)
    rates: Optional[RatesConfig] = None
    custom_signals: Mapping[str, Signal] = field(default_factory=dict)

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates: N must be at least 1")
        if self.p < 1:
            raise ConfigError("p: the risk exponent must be at least 1")
        if self.sigma < 0:
            raise ConfigError("sigma: must be nonnegative")
        if self.n < 2:
            raise ConfigError("n: must be at least 2")
        bad = [p for p in self.procedures if p not in PROCEDURES]
        if bad or not self.procedures:
            raise ConfigError(f"procedures: expected a subset of {PROCEDURES}, got {self.procedures}")
        if any(p in ("P1", "P2", "P3") for p in self.procedures) and not is_dyadic(self.n):
            raise ConfigError(f"n: wavelet procedures need dyadic n, got {self.n}")
        for s in self.signals:
            if s not in BUILTIN_SIGNALS and s not in self.custom_signals:
                raise ConfigError(f"signals: unknown signal {s!r}")
        if self.sigma_scale not in ("definition-1", "paper-4.2"):
            raise ConfigError(f"sigma_scale: expected definition-1 or paper-4.2, got {self.sigma_scale!r}")
        if not 0 <= self.keep_coarse_level <= self.top_level:
            raise ConfigError(f"keep_coarse_level: must lie in [0, {self.top_level}]")
        for s in self.signals:
            if not self.functionals_for(s):
                raise ConfigError(f"functionals: none given for signal {s!r}")
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    @property
    def top_level(self) -> int:
        """d_n = floor(log2 n)."""
        return self.n.bit_length() - 1

    def signal(self, name: str) -> Signal:
        return self.custom_signals.get(name) or BUILTIN_SIGNALS[name]

    def functionals_for(self, signal: str) -> tuple[FunctionalSpec, ...]:
        return tuple(self.signal_functionals.get(signal, self.functionals))


def _get(section, key, conv, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"{key}: missing")
        return default
    try:
        return conv(section[key])
    except ConfigError:
        raise
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def load_config(path, overrides: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        cp.read_file(fh)
    if "experiment" not in cp:
        raise ConfigError("experiment: section missing")
    sec = dict(cp["experiment"])
    sec.update(overrides or {})
    functionals = lambda t: tuple(parse_functional(x) for x in _split(t))  # noqa: E731
    per_signal, custom = {}, {}
    for name in cp.sections():
        if not name.startswith("signal."):
            continue
        sig = name.split(".", 1)[1]
        if "functionals" in cp[name]:
            per_signal[sig] = _get(cp[name], "functionals", functionals)
        if "pieces" in cp[name]:
            lines = [ln.strip() for ln in cp[name]["pieces"].splitlines() if ln.strip()]
            try:
                custom[sig] = piecewise_signal(sig, lines)
            except ValueError as exc:
                raise ConfigError(f"pieces: {exc}") from None
    rates = None
    if "rates" in cp:
        r = cp["rates"]
        rates = RatesConfig(
            signal=_get(r, "signal", str.strip, required=True),
            functional=_get(r, "functional", parse_functional, required=True),
            n_list=_get(r, "n_list", lambda t: tuple(int(v) for v in _split(t)), required=True),
            dimension=_get(r, "dimension", int, 1),
            replicates=_get(r, "replicates", int, 2000),
        )
    return ExperimentConfig(
        signals=_get(sec, "signals", lambda t: tuple(_split(t)), required=True),
        functionals=_get(sec, "functionals", functionals, ()),
        bases=_get(sec, "bases", lambda t: tuple(parse_basis(b) for b in _split(t)), (HAAR,)),
        procedures=_get(sec, "procedures", lambda t: tuple(x.upper() for x in _split(t)), ("P1",)),
        n=_get(sec, "n", int, required=True),
        sigma=_get(sec, "sigma", float, required=True),
        replicates=_get(sec, "replicates", int, required=True),
        p=_get(sec, "p", float, 1.0),
        master_seed=_get(sec, "master_seed", int, 0),
        sigma_scale=_get(sec, "sigma_scale", str.strip, "definition-1"),
        output_dir=Path(_get(sec, "output_dir", str.strip, "out")),
        keep_coarse_level=_get(sec, "keep_coarse_level", int, 0),
        signal_functionals=per_signal,
        rates=rates,
        custom_signals=custom,
    )
