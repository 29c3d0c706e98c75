"""Scalar bracketed root finding: bisection with safeguarded Newton steps."""

from __future__ import annotations

import math
from typing import Callable

from .errors import BracketError


def bisect_newton(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    fprime: Callable[[float], float] | None = None,
    ftol: float = 1e-12,
    xtol: float = 1e-15,
    maxiter: int = 400,
) -> float:
    """Find a root of ``f`` in ``[lo, hi]``.

    The bracket is kept at every step. When ``fprime`` is given, a Newton
    step from the current best point is taken if it lands strictly inside
    the bracket; otherwise the midpoint is used. Raises ``BracketError`` if
    ``f(lo)`` and ``f(hi)`` have the same strict sign.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]: f={flo!r}, {fhi!r}")

    x = 0.5 * (lo + hi)
    for _ in range(maxiter):
        fx = f(x)
        if abs(fx) <= ftol:
            return x
        if math.copysign(1.0, fx) == math.copysign(1.0, flo):
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
        if hi - lo <= xtol * max(1.0, abs(x)):
            break
        step_taken = False
        if fprime is not None:
            d = fprime(x)
            if d != 0.0 and math.isfinite(d):
                xn = x - fx / d
                if lo < xn < hi:
                    x = xn
                    step_taken = True
        if not step_taken:
            x = 0.5 * (lo + hi)
    # best endpoint of the final bracket
    return lo if abs(flo) <= abs(fhi) else hi
