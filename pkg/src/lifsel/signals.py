"""Built-in regression functions and weight functions on [0, 1]."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Signal",
    "s1",
    "s2",
    "s3",
    "holder_bump",
    "holder_bump_2d",
    "BUILTIN_SIGNALS",
    "G_FUNCTIONS",
    "get_signal",
    "piecewise_signal",
]


@dataclass(frozen=True)
class Signal:
    """A regression function s on [0,1]^dim.

    ``func`` must accept an array of points (shape ``(..., dim)`` when
    ``dim > 1``, plain ``(...)`` when ``dim == 1``) and return an array of the
    same leading shape. ``breakpoints`` lists known discontinuities or kinks in
    1-D; quadrature splits its panels there.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    truth_quadrature_depth: int = 16
    breakpoints: tuple[float, ...] = field(default=())

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)


def _s1(x):
    return (x**4 - x) * np.sin(6.0 * x)


def _s2(x):
    return np.exp(-30.0 * np.abs(x - 0.75)) + np.exp(-30.0 * np.abs(x - 0.25))


def _s3(x):
    left = x * np.cos(2.0 * np.pi * x)
    right = x**2 * np.cos(15.0 * np.pi * x)
    out = np.where(x <= 2.0 / 3.0, left, right)
    return np.where(x > 0.0, out, 0.0)


def _holder_bump(x):
    return np.sqrt(np.abs(x - 0.5))


def _holder_bump_2d(x):
    return np.sqrt(np.max(np.abs(x - 0.5), axis=-1))


s1 = Signal("s1", _s1)
s2 = Signal("s2", _s2, breakpoints=(0.25, 0.75))
s3 = Signal("s3", _s3, breakpoints=(2.0 / 3.0,))
# |x - 1/2|^{1/2}: Hölder-1/2 at x0 = 1/2, smooth elsewhere.
holder_bump = Signal("holder", _holder_bump, breakpoints=(0.5,))
holder_bump_2d = Signal("holder2d", _holder_bump_2d, dim=2)

BUILTIN_SIGNALS: dict[str, Signal] = {
    s.name: s for s in (s1, s2, s3, holder_bump, holder_bump_2d)
}

G_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "g1": lambda x: np.cos(64.0 * np.pi * x),
    "g2": lambda x: np.cos(4.0 * np.pi * x),
}


def get_signal(name: str) -> Signal:
    try:
        return BUILTIN_SIGNALS[name]
    except KeyError:
        raise KeyError(
            f"unknown signal {name!r}; built-ins are {sorted(BUILTIN_SIGNALS)}"
        ) from None


# -- piecewise formulas from config files ------------------------------------

_SAFE_NAMES = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sign",
                 "minimum", "maximum", "floor", "tanh", "arctan")
}
_SAFE_NAMES.update(pi=math.pi, e=math.e)

_PIECE_RE = re.compile(
    r"^\s*([\[\(])\s*([^,]+?)\s*,\s*([^\]\)]+?)\s*([\]\)])\s*:\s*(.+?)\s*$"
)


def _number(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _compile_expr(expr: str):
    code = compile(expr, "<signal>", "eval")
    for name in code.co_names:
        if name != "x" and name not in _SAFE_NAMES:
            raise ValueError(f"name {name!r} not allowed in signal formula {expr!r}")

    def f(x):
        value = eval(code, {"__builtins__": {}}, {**_SAFE_NAMES, "x": x})
        return np.broadcast_to(np.asarray(value, dtype=float), np.shape(x))

    return f


def piecewise_signal(name: str, pieces: Sequence[str]) -> Signal:
    """Build a 1-D signal from lines like ``(2/3, 1] : x**2*cos(15*pi*x)``.

    Points covered by no piece evaluate to 0. Formulas may use ``x``, ``pi``,
    ``e`` and a small set of numpy ufuncs.
    """
    parsed = []
    for line in pieces:
        match = _PIECE_RE.match(line)
        if match is None:
            raise ValueError(f"cannot parse signal piece {line!r}")
        lb, lo, hi, rb, expr = match.groups()
        parsed.append((lb == "[", _number(lo), _number(hi), rb == "]", _compile_expr(expr)))
    if not parsed:
        raise ValueError(f"signal {name!r} has no pieces")

    def func(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        done = np.zeros(x.shape, dtype=bool)
        for closed_lo, lo, hi, closed_hi, f in parsed:
            inside = ((x >= lo) if closed_lo else (x > lo)) & ((x <= hi) if closed_hi else (x < hi))
            inside &= ~done
            if inside.any():
                out[inside] = f(x)[inside]
                done |= inside
        return out

    cuts = sorted({p[1] for p in parsed} | {p[2] for p in parsed})
    inner = tuple(c for c in cuts if 0.0 < c < 1.0)
    return Signal(name, func, breakpoints=inner)
