"""Explicit constants and Hoelder exponents.

Everything here is closed form except ``solve_gamma``, which locates the
smallest root of ``phi(s) = s^p - A(1 - p + p s)``. Exponent conventions:

* ``theta = 1 / (1 - gamma)``;
* spatial Hoelder exponent ``(theta - p) / (theta - 1)``;
* temporal Hoelder exponent ``(theta - p) / theta``.

The exponent ``gamma`` entering the regularity estimates comes from the
reverse-Hoelder constant ``2A`` (the inhomogeneous bound with constants
``A, B`` is first made homogeneous at the price of doubling ``A``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._roots import bisect_newton
from .errors import AdmissibilityError, BracketError, RangeError

__all__ = [
    "A_CLAMP_EPS",
    "ExponentReport",
    "legendre_constant",
    "transform_a",
    "const_K",
    "consts_AB",
    "phi",
    "solve_gamma",
    "effective_bounds",
    "required_margin",
    "build_report",
    "build_report_from_bounds",
    "space_bound",
    "admissible_dx",
    "admissible_dt",
]

A_CLAMP_EPS = 0.01


def legendre_constant(p: float) -> float:
    """``c_p = (p^{-1/(p-1)} - p^{-p/(p-1)})^{p-1}``."""
    if not p > 1.0:
        raise RangeError(f"p must exceed 1, got {p}")
    return (p ** (-1.0 / (p - 1.0)) - p ** (-p / (p - 1.0))) ** (p - 1.0)


def transform_a(b_value, p: float):
    """Lagrangian weight ``a = c_p / b^{p-1}`` dual to the Hamiltonian ``b |xi|^q``.

    With ``q = p/(p-1)``, ``sup_xi (v xi - b|xi|^q) = a |v|^p``. Accepts
    scalars or arrays.
    """
    b = np.asarray(b_value, dtype=float)
    if np.any(b <= 0):
        raise RangeError("b must be strictly positive")
    out = legendre_constant(p) * b ** (1.0 - p)
    return float(out) if out.ndim == 0 else out


def const_K(M: float, delta: float, p: float, T: float) -> float:
    """Bound on ``int |x'|^p`` along optimal trajectories."""
    return 2.0 ** (p - 1.0) * (M ** (p + 1.0) * T + 2.0 * M) / delta + M**p * T


def consts_AB(M: float, delta: float, p: float) -> tuple[float, float]:
    """Constants of the inhomogeneous reverse-Hoelder bound on optimal speeds.

    ``A = max(4^{p-1} M / delta, 1 + eps)`` and ``B = M^p (1 + A)``.
    """
    A = max(4.0 ** (p - 1.0) * M / delta, 1.0 + A_CLAMP_EPS)
    B = M**p * (1.0 + A)
    return A, B


def phi(s: float, A: float, p: float) -> float:
    return s**p - A * (1.0 - p + p * s)


def solve_gamma(A: float, p: float) -> tuple[float, float]:
    """Smallest root ``gamma`` of ``phi`` and ``theta = 1/(1 - gamma)``.

    The root lies in ``(1 - 1/p, A^{1/(p-1)})``: ``phi(1 - 1/p) = (1-1/p)^p > 0``
    and ``phi(A^{1/(p-1)}) = (p-1) A (1 - A^{1/(p-1)}) < 0`` for ``A > 1``, and
    ``phi`` is convex, so the crossing in that interval is unique.
    """
    if not p > 1.0:
        raise RangeError(f"p must exceed 1, got {p}")
    if not A > 1.0:
        raise BracketError(f"A must exceed 1 for a sign change, got {A}")
    lo = 1.0 - 1.0 / p
    hi = A ** (1.0 / (p - 1.0))
    scale = max(1.0, A * p)
    gamma = bisect_newton(
        lambda s: phi(s, A, p),
        lo,
        hi,
        fprime=lambda s: p * s ** (p - 1.0) - A * p,
        ftol=1e-13 * scale,
    )
    if abs(phi(gamma, A, p)) > 1e-12 * scale:
        raise BracketError(f"root refinement stalled: phi(gamma) = {phi(gamma, A, p):.3e}")
    return gamma, 1.0 / (1.0 - gamma)


@dataclass(frozen=True)
class ExponentReport:
    p: float
    q: float
    c_p: float
    K: float
    A: float
    B: float
    A_rh: float
    gamma: float
    theta: float
    ex_space: float
    ex_time: float
    M_eff: float
    delta_eff: float
    T: float

    @property
    def phi_residual(self) -> float:
        return abs(phi(self.gamma, self.A_rh, self.p))

    def as_dict(self) -> dict:
        return asdict(self)


def effective_bounds(spec, samples_per_axis: int = 64) -> tuple[float, float]:
    """``(M_eff, delta_eff)`` after folding in the sampled range of ``a``."""
    from .coeffs import validate_bounds

    rep = validate_bounds(spec, samples_per_axis)
    if rep.b_min <= 0:
        raise RangeError(f"b must be strictly positive, sampled minimum {rep.b_min:.6g}")
    a_hi = transform_a(rep.b_min, spec.p)
    a_lo = transform_a(rep.b_max, spec.p)
    return max(spec.M, a_hi), min(spec.delta, a_lo)


def required_margin(spec, samples_per_axis: int = 64) -> float:
    """Box enlargement ``K^{1/p} T^{1/q}`` that optimal paths cannot exceed."""
    M_eff, delta_eff = effective_bounds(spec, samples_per_axis)
    K = const_K(M_eff, delta_eff, spec.p, spec.T)
    return K ** (1.0 / spec.p) * spec.T ** (1.0 / spec.q)


def build_report_from_bounds(M: float, delta: float, q: float, T: float) -> ExponentReport:
    """Report for bare constants (``M``, ``delta`` taken as already effective)."""
    if not q > 1.0:
        raise RangeError(f"q must exceed 1, got {q}")
    if not (M > 0 and delta > 0 and T > 0):
        raise RangeError("M, delta and T must be positive")
    p = q / (q - 1.0)
    K = const_K(M, delta, p, T)
    A, B = consts_AB(M, delta, p)
    A_rh = 2.0 * A
    gamma, theta = solve_gamma(A_rh, p)
    return ExponentReport(
        p=p,
        q=q,
        c_p=legendre_constant(p),
        K=K,
        A=A,
        B=B,
        A_rh=A_rh,
        gamma=gamma,
        theta=theta,
        ex_space=(theta - p) / (theta - 1.0),
        ex_time=(theta - p) / theta,
        M_eff=M,
        delta_eff=delta,
        T=T,
    )


def build_report(spec, samples_per_axis: int = 64) -> ExponentReport:
    M_eff, delta_eff = effective_bounds(spec, samples_per_axis)
    return build_report_from_bounds(M_eff, delta_eff, spec.q, spec.T)


def _dx_cap(report: ExponentReport, C: float, T_minus_t: float) -> float:
    p, theta = report.p, report.theta
    return min(C * (1.0 - p / theta) / (p - 1.0) * T_minus_t ** (1.0 - 1.0 / p), 1.0)


def admissible_dx(report: ExponentReport, C: float, T_minus_t0: float, dx: float) -> bool:
    """``|x1 - x0| <= C (1 - p/theta)/(p - 1) (T - t0)^{1-1/p}`` and ``<= 1``."""
    return dx <= _dx_cap(report, C, T_minus_t0)


def admissible_dt(report: ExponentReport, C: float, T_minus_t0: float, T_minus_t1: float, dt: float) -> bool:
    """The displacement bound over ``[t0, t1]`` must itself be an admissible dx at ``t1``."""
    p, theta = report.p, report.theta
    disp = C * T_minus_t0 ** (1.0 / theta - 1.0 / p) * dt ** (1.0 - 1.0 / theta)
    return disp <= _dx_cap(report, C, T_minus_t1)


def chain_value(report: ExponentReport, C: float, T_minus_t0: float, dx: float, h: float) -> float:
    """Straight-detour cost bound ``M 2^{p-1} (M^p h + h^{1-p} (C0 h^{1-1/theta} + dx)^p)``."""
    p, theta, M = report.p, report.theta, report.M_eff
    C0 = C * T_minus_t0 ** (1.0 / theta - 1.0 / p)
    return M * 2.0 ** (p - 1.0) * (M**p * h + h ** (1.0 - p) * (C0 * h ** (1.0 - 1.0 / theta) + dx) ** p)


def space_bound(report: ExponentReport, C: float, T_minus_t0: float, dx: float) -> tuple[float, float]:
    """Detour length ``h`` and the resulting bound on ``u(x1, t0) - u(x0, t0)``.

    ``h = ((p-1)/(1-p/theta) * dx / C0)^{theta/(theta-1)}`` with
    ``C0 = C (T - t0)^{1/theta - 1/p}``; this ``h`` minimises the leading
    term of the chain.
    """
    if not T_minus_t0 > 0:
        raise RangeError("T - t0 must be positive")
    if dx < 0:
        raise RangeError("dx must be nonnegative")
    if dx == 0.0:
        return 0.0, 0.0
    if not admissible_dx(report, C, T_minus_t0, dx):
        raise AdmissibilityError(
            f"dx = {dx:.6g} exceeds the admissible cap {_dx_cap(report, C, T_minus_t0):.6g}"
        )
    p, theta = report.p, report.theta
    C0 = C * T_minus_t0 ** (1.0 / theta - 1.0 / p)
    h = ((p - 1.0) / (1.0 - p / theta) * dx / C0) ** (theta / (theta - 1.0))
    h = min(h, T_minus_t0)  # guards rounding; admissibility gives h <= T - t0
    return h, chain_value(report, C, T_minus_t0, dx, h)
