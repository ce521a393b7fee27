"""Derivative-free maximisation on an interval."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoInteriorMax

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class MaxResult:
    x: float
    f: float
    lo: float
    hi: float
    evals: int


def golden_max(f, a: float, b: float, rtol: float = 1e-10, scan: int = 41, max_iter: int = 500) -> MaxResult:
    """Maximise f on [a, b].

    A coarse scan locates the best sample; if it sits at either end of the
    interval the maximum is not interior and NoInteriorMax is raised.
    Golden-section search then refines within the two neighbouring cells.
    """
    if not a < b:
        raise ValueError(f"empty bracket [{a}, {b}]")
    xs = np.linspace(a, b, scan) if scan > 2 else np.array([a, b])
    fs = np.array([f(x) for x in xs])
    evals = len(xs)
    i = int(np.argmax(fs))
    if i == 0 or i == len(xs) - 1:
        raise NoInteriorMax(f"maximum at bracket endpoint x={xs[i]:.6g} of [{a:.6g}, {b:.6g}]")
    lo, hi = xs[i - 1], xs[i + 1]
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    evals += 2
    for _ in range(max_iter):
        if hi - lo <= rtol * max(abs(lo), abs(hi), 1e-300):
            break
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
        evals += 1
    x = c if fc > fd else d
    return MaxResult(x=float(x), f=float(max(fc, fd)), lo=float(a), hi=float(b), evals=evals)
