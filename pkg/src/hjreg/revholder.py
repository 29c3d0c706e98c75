"""Reverse-Hoelder toolkit on ``[0, 1]``-type intervals.

The inequality in question, for a nonnegative ``alpha`` and all ``h``::

    (1/h) int_0^h alpha^p  <=  A ((1/h) int_0^h alpha)^p  + B

(``B = 0`` is the homogeneous form). Step functions carry ``alpha``: prefix
integrals and p-th powers are exact, so checks carry no quadrature error.

Extremals. For ``xi(tau) = max { int_0^tau alpha : alpha feasible, ||alpha||_p <= 1 }``
the maximiser below a threshold ``tau_bar`` is

    a_tau on [0, tau),  b_tau on [tau, tau1),  A^{-1/p} gamma t^{gamma-1} on [tau1, 1].

With the power tail, unit norm and equality at ``tau1`` are the same
equation (because ``phi(gamma) = 0``), so the missing condition is
stationarity of ``a_tau`` in ``tau1``, which works out to continuity
``b_tau = A^{-1/p} gamma tau1^{gamma-1}``. The system is scale invariant:
``tau1 = lam * tau`` with ``lam`` independent of ``tau``, whence
``tau_bar = 1/lam`` and ``xi = C tau^gamma`` exactly below ``tau_bar``.
Above ``tau_bar`` the tail disappears and the maximiser is a two-step
function with equality at ``h = 1`` (or the plain Hoelder extremal
``tau^{-1/p} 1_[0,tau)`` once ``tau >= A^{-1/(p-1)}``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from ._roots import bisect_newton
from .errors import NoSolution, PreconditionError, RangeError, ZeroError
from .exponents import solve_gamma

__all__ = [
    "SampledFunction",
    "RHReport",
    "ExtremalResult",
    "BruteForceResult",
    "XiCurve",
    "check_rh",
    "debias",
    "extremal_structured",
    "extremal_boundary",
    "extremal",
    "tau_bar",
    "extremal_bruteforce",
    "xi_curve",
    "ode_residual",
    "fit_power",
]

RH_TOL = 1e-9


@dataclass(frozen=True)
class SampledFunction:
    """Nonnegative step function: ``values[i]`` on ``[edges[i], edges[i+1])``."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) < 1 or len(edges) != len(values) + 1:
            raise RangeError("need n >= 1 values and n + 1 edges")
        if np.any(np.diff(edges) <= 0):
            raise RangeError("edges must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise RangeError("values must be finite and nonnegative")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, lo: float, hi: float, values) -> "SampledFunction":
        values = np.asarray(values, dtype=float)
        return cls(np.linspace(lo, hi, len(values) + 1), values)

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def _prefix(self, h, weights: np.ndarray) -> np.ndarray:
        """``int_lo^{lo+h}`` of the step function with cell values ``weights``."""
        h = np.asarray(h, dtype=float)
        s = np.clip(self.lo + h, self.lo, self.hi)
        cum = np.concatenate([[0.0], np.cumsum(weights * self.widths)])
        i = np.clip(np.searchsorted(self.edges, s, side="right") - 1, 0, self.n - 1)
        return cum[i] + weights[i] * (s - self.edges[i])

    def mass(self, h) -> np.ndarray:
        return self._prefix(h, self.values)

    def energy(self, h, p: float) -> np.ndarray:
        return self._prefix(h, self.values**p)

    def lp_norm(self, p: float) -> float:
        return float(np.sum(self.values**p * self.widths) ** (1.0 / p))

    def check_points(self, interior: int = 4) -> np.ndarray:
        """Offsets ``h`` at every right cell edge plus ``interior`` points per cell."""
        fr = np.arange(1, interior + 1) / (interior + 1)
        inner = (self.edges[:-1, None] + fr[None, :] * self.widths[:, None]).ravel()
        pts = np.concatenate([self.edges[1:], inner])
        return np.sort(pts) - self.lo


class RHReport(NamedTuple):
    passed: bool
    worst_h: float
    worst_ratio: float


def _ratios(alpha: SampledFunction, A: float, p: float, B: float, h: np.ndarray) -> np.ndarray:
    lhs = alpha.energy(h, p) / h
    rhs = A * (alpha.mass(h) / h) ** p + B
    ratio = np.zeros_like(lhs)
    pos = rhs > 0
    ratio[pos] = lhs[pos] / rhs[pos]
    if np.any((~pos) & (lhs > 0)):
        raise ZeroError("zero right-hand side with positive left-hand side")
    return ratio


def check_rh(alpha: SampledFunction, A: float, p: float, B: float = 0.0, interior: int = 4) -> RHReport:
    """Check ``(1/h) int alpha^p <= A ((1/h) int alpha)^p + B`` at every edge and
    ``interior`` points per cell. Passes iff every ratio LHS/RHS is at most ``1 + 1e-9``.
    """
    h = alpha.check_points(interior)
    ratio = _ratios(alpha, A, p, B, h)
    k = int(np.argmax(ratio))
    worst = float(ratio[k])
    return RHReport(worst <= 1.0 + RH_TOL, float(h[k]), worst)


def debias(alpha: SampledFunction, A: float, B: float, p: float) -> SampledFunction:
    """Derivative of ``max(z, (B/A)^{1/p} (s - lo))`` with ``z`` the primitive of ``alpha``.

    Cells where ``z`` crosses the line are split at the crossing, so the
    result is exact. The output satisfies the homogeneous inequality with
    constant ``2A``.
    """
    pre = check_rh(alpha, A, p, B)
    if not pre.passed:
        raise PreconditionError(
            f"input violates the (A, B) inequality at h={pre.worst_h:.6g} (ratio {pre.worst_ratio:.6g})"
        )
    slope = (B / A) ** (1.0 / p)
    e = alpha.edges
    z = np.concatenate([[0.0], np.cumsum(alpha.values * alpha.widths)])
    d = z - slope * (e - e[0])  # z minus line at every edge
    edges = [e[0]]
    vals: list[float] = []
    for i in range(alpha.n):
        d0, d1 = d[i], d[i + 1]
        if (d0 >= 0 and d1 >= 0) or (d0 <= 0 and d1 <= 0):
            # no strict crossing: one piece; z on top iff it is on top somewhere
            vals.append(alpha.values[i] if (d0 > 0 or d1 > 0) else slope)
            edges.append(e[i + 1])
            continue
        s = e[i] + d0 / (d0 - d1) * (e[i + 1] - e[i])
        if s <= e[i] or s >= e[i + 1]:
            vals.append(alpha.values[i] if d0 + d1 > 0 else slope)
            edges.append(e[i + 1])
            continue
        first, second = (alpha.values[i], slope) if d0 > 0 else (slope, alpha.values[i])
        vals.extend([first, second])
        edges.extend([s, e[i + 1]])
    return SampledFunction(np.array(edges), np.array(vals))


@dataclass(frozen=True)
class ExtremalResult:
    """Maximiser of ``int_0^tau alpha`` over unit-norm reverse-Hoelder functions."""

    tau: float
    a_tau: float
    b_tau: float
    tau1: float
    xi: float
    gamma: float
    A: float
    p: float
    regime: str  # "structured" (power tail), "boundary" (two steps), "holder" (b = 0)
    residuals: tuple[float, ...] = field(default=())

    @property
    def kappa(self) -> float:
        return self.p * self.gamma - self.p + 1.0

    @property
    def c(self) -> float:
        return self.A ** (-1.0 / self.p)

    def density(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        tail = self.c * self.gamma * np.power(np.maximum(t, 1e-300), self.gamma - 1.0)
        return np.where(t < self.tau, self.a_tau, np.where(t < self.tau1, self.b_tau, tail))

    def mass(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        a, b, tau, tau1 = self.a_tau, self.b_tau, self.tau, self.tau1
        m1 = a * np.minimum(t, tau)
        m2 = b * np.clip(t - tau, 0.0, tau1 - tau)
        m3 = self.c * (np.maximum(t, tau1) ** self.gamma - tau1**self.gamma)
        return m1 + m2 + np.where(t > tau1, m3, 0.0)

    def energy(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        a, b, tau, tau1, p = self.a_tau, self.b_tau, self.tau, self.tau1, self.p
        e1 = a**p * np.minimum(t, tau)
        e2 = b**p * np.clip(t - tau, 0.0, tau1 - tau)
        k = self.kappa
        # (c gamma)^p / kappa = 1 since gamma^p = A kappa
        e3 = (self.c * self.gamma) ** p / k * (np.maximum(t, tau1) ** k - tau1**k)
        return e1 + e2 + np.where(t > tau1, e3, 0.0)

    def rh_ratio(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        return (self.energy(h) / h) / (self.A * (self.mass(h) / h) ** self.p)

    def norm(self) -> float:
        return float(self.energy(1.0)) ** (1.0 / self.p)

    def to_sampled(self, n: int) -> SampledFunction:
        """Cell averages on ``n`` uniform cells (keeps mass, lowers energy)."""
        e = np.linspace(0.0, 1.0, n + 1)
        return SampledFunction(e, np.diff(self.mass(e)) * n)


def _structured_pieces(tau, tau1, A, p, gamma):
    c = A ** (-1.0 / p)
    b = gamma * c * tau1 ** (gamma - 1.0)
    a = (c * tau1**gamma - b * (tau1 - tau)) / tau
    return a, b


def _structured_gap(tau, tau1, A, p, gamma):
    """Energy on ``[0, tau1]`` minus the value forced by equality at ``tau1``."""
    a, b = _structured_pieces(tau, tau1, A, p, gamma)
    kappa = p * gamma - p + 1.0
    return a**p * tau + b**p * (tau1 - tau) - tau1**kappa


def _residuals(r: ExtremalResult) -> tuple[float, float, float]:
    """``(mass match, unit norm, equality at tau1)`` absolute residuals."""
    if r.regime == "holder":
        return (0.0, abs(float(r.energy(1.0)) - 1.0), 0.0)
    m1, e1 = float(r.mass(r.tau1)), float(r.energy(r.tau1))
    target = r.c * r.tau1**r.gamma if r.regime == "structured" else r.c
    eq = e1 / r.tau1 - r.A * (m1 / r.tau1) ** r.p
    return (abs(m1 - target), abs(float(r.energy(1.0)) - 1.0), abs(eq))


def extremal_structured(A: float, p: float, gamma: float | None = None, tau: float = 0.1) -> ExtremalResult:
    """Structured maximiser (two steps then power tail) for ``tau < tau_bar``.

    ``tau1`` is located by bisection on the energy gap with ``a_tau, b_tau``
    in closed form. Raises ``NoSolution`` when no ``tau1 <= 1`` exists.
    """
    if not A > 1.0:
        raise RangeError("A must exceed 1")
    if not 0.0 < tau < 1.0:
        raise RangeError("tau must lie in (0, 1)")
    if gamma is None:
        gamma, _ = solve_gamma(A, p)
    gap = lambda s: _structured_gap(tau, s, A, p, gamma)  # noqa: E731
    if gap(1.0) < 0.0:
        raise NoSolution(f"tau = {tau:.6g} is at or beyond tau_bar for A={A}, p={p}")
    # gap(tau+) = tau^kappa (1/A - 1) < 0
    scale = tau ** (p * gamma - p + 1.0)
    tau1 = bisect_newton(lambda s: gap(s) / scale, tau * (1.0 + 1e-12), 1.0, ftol=1e-14)
    a, b = _structured_pieces(tau, tau1, A, p, gamma)
    res = ExtremalResult(tau, a, b, tau1, a * tau, gamma, A, p, "structured")
    return ExtremalResult(**{**res.__dict__, "residuals": _residuals(res)})


def extremal_boundary(A: float, p: float, tau: float, gamma: float | None = None) -> ExtremalResult:
    """Maximiser for ``tau >= tau_bar``: two steps on ``[0, 1]``, no tail."""
    if not 0.0 < tau <= 1.0:
        raise RangeError("tau must lie in (0, 1]")
    if gamma is None:
        gamma, _ = solve_gamma(A, p)
    if tau == 1.0:
        res = ExtremalResult(1.0, 1.0, 0.0, 1.0, 1.0, gamma, A, p, "holder")
        return ExtremalResult(**{**res.__dict__, "residuals": _residuals(res)})
    if tau ** (p - 1.0) * A >= 1.0:
        a = tau ** (-1.0 / p)
        res = ExtremalResult(tau, a, 0.0, 1.0, a * tau, gamma, A, p, "holder")
        return ExtremalResult(**{**res.__dict__, "residuals": _residuals(res)})
    X = A ** (-1.0 / p)  # total mass forced by equality at h = 1 with unit norm

    def energy_gap(a):
        b = max((X - a * tau) / (1.0 - tau), 0.0)
        return a**p * tau + b**p * (1.0 - tau) - 1.0

    a = bisect_newton(energy_gap, X, X / tau, ftol=1e-15)
    b = max((X - a * tau) / (1.0 - tau), 0.0)
    res = ExtremalResult(tau, a, b, 1.0, a * tau, gamma, A, p, "boundary")
    return ExtremalResult(**{**res.__dict__, "residuals": _residuals(res)})


def tau_bar(A: float, p: float, gamma: float | None = None) -> float:
    """Largest ``tau`` for which the structured system has a solution with ``tau1 <= 1``.

    Located by bisection on the existence test ``gap(tau1 = 1) >= 0``.
    """
    if gamma is None:
        gamma, _ = solve_gamma(A, p)
    exists = lambda t: _structured_gap(t, 1.0, A, p, gamma) >= 0.0  # noqa: E731
    lo, hi = 1e-12, 1.0 - 1e-12
    if not exists(lo):
        raise NoSolution("structured regime is empty")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if exists(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15:
            break
    return lo


def extremal(A: float, p: float, tau: float, gamma: float | None = None) -> ExtremalResult:
    """Structured maximiser below ``tau_bar``, boundary regime above."""
    if gamma is None:
        gamma, _ = solve_gamma(A, p)
    if tau < 1.0:
        try:
            return extremal_structured(A, p, gamma, tau)
        except NoSolution:
            pass
    return extremal_boundary(A, p, tau, gamma)


class BruteForceResult(NamedTuple):
    xi: float
    alpha: SampledFunction
    violation: float
    spread: float  # max - min objective across converged starts


def _bf_problem(A, p, tau, n):
    w = np.clip(tau * n - np.arange(n), 0.0, 1.0) / n  # overlap of each cell with [0, tau]
    hs = np.arange(1, n + 1) / n
    coef = A ** (1.0 / p) * hs ** (1.0 / p - 1.0) / n
    tri = np.tril(np.ones((n, n)))

    def cons(x):
        xp = np.maximum(x, 0.0)
        e = tri @ (xp**p) / n
        return coef * (tri @ xp) - e ** (1.0 / p)

    def cons_jac(x):
        xp = np.maximum(x, 0.0)
        e = tri @ (xp**p) / n
        inv = np.where(e > 0, e ** (1.0 / p - 1.0), 0.0) / p
        return coef[:, None] * tri - inv[:, None] * tri * (p * xp ** (p - 1.0) / n)[None, :]

    def norm_c(x):
        return 1.0 - np.sum(np.maximum(x, 0.0) ** p) / n

    def norm_jac(x):
        return -p * np.maximum(x, 0.0) ** (p - 1.0) / n

    return w, cons, cons_jac, norm_c, norm_jac


def extremal_bruteforce(
    A: float,
    p: float,
    tau: float,
    n: int = 40,
    starts: int = 16,
    seed: int = 0,
    initial: Sequence[np.ndarray] = (),
) -> BruteForceResult:
    """Maximise ``int_0^tau alpha`` over step functions on ``n`` cells.

    Constraints: the inequality at all ``n`` cell edges and ``||alpha||_p <= 1``.
    Each start goes through an exterior-penalty ascent (penalty multiplied by
    10 per round, L-BFGS-B inner solves) and is then polished by SLSQP on the
    exact constraints. Returns the best feasible point; ``spread`` records
    disagreement between starts.
    """
    if n > 80:
        raise RangeError("brute force is limited to n <= 80 cells")
    w, cons, cons_jac, norm_c, norm_jac = _bf_problem(A, p, tau, n)
    rng = np.random.default_rng(seed)
    x0s = [rng.random(n) + 0.05 for _ in range(starts)] + [np.asarray(v, dtype=float) for v in initial]
    bounds = [(0.0, None)] * n

    def violation(x):
        return max(0.0, -float(np.min(cons(x))), -norm_c(x))

    results = []
    for x0 in x0s:
        x = x0 / (np.sum(x0**p) / n) ** (1.0 / p)
        mu = 10.0
        for _ in range(5):

            def pen(v, mu=mu):
                cv = np.minimum(cons(v), 0.0)
                nv = min(norm_c(v), 0.0)
                return -w @ v + mu * (cv @ cv + nv * nv)

            def pen_grad(v, mu=mu):
                cv = np.minimum(cons(v), 0.0)
                nv = min(norm_c(v), 0.0)
                return -w + 2 * mu * (cv @ cons_jac(v) + nv * norm_jac(v))

            x = minimize(pen, x, jac=pen_grad, method="L-BFGS-B", bounds=bounds).x
            mu *= 10.0
        r = minimize(
            lambda v: -w @ v,
            x,
            jac=lambda v: -w,
            method="SLSQP",
            bounds=bounds,
            constraints=[
                {"type": "ineq", "fun": cons, "jac": cons_jac},
                {"type": "ineq", "fun": norm_c, "jac": norm_jac},
            ],
            options={"maxiter": 500, "ftol": 1e-14},
        )
        x = np.maximum(r.x, 0.0)
        nrm = (np.sum(x**p) / n) ** (1.0 / p)
        if nrm > 0:
            x = x / max(nrm, 1.0)  # inequality is homogeneous: rescaling keeps it
        results.append((float(w @ x), violation(x), x))

    feasible = [rv for rv in results if rv[1] <= 1e-6] or results
    best = max(feasible, key=lambda rv: rv[0])
    objs = [rv[0] for rv in feasible]
    alpha = SampledFunction.uniform(0.0, 1.0, best[2])
    return BruteForceResult(best[0], alpha, best[1], max(objs) - min(objs))


class XiCurve(NamedTuple):
    points: list
    results: list
    C_emp: float
    gamma: float
    tau_bar: float


def xi_curve(A: float, p: float, taus: Sequence[float]) -> XiCurve:
    """``xi`` at each ``tau`` plus ``C_emp = max xi / tau^gamma`` over the given taus."""
    gamma, _ = solve_gamma(A, p)
    tb = tau_bar(A, p, gamma)
    results = [extremal(A, p, float(t), gamma) for t in taus]
    pts = [(r.tau, r.xi) for r in results]
    C = max(xi / t**gamma for t, xi in pts)
    return XiCurve(pts, results, C, gamma, tb)


def lemma_constant(A: float, p: float, n_struct: int = 4, n_boundary: int = 400) -> float:
    """``sup_tau xi(tau) / tau^gamma`` over ``(0, 1]``.

    Below ``tau_bar`` the ratio is constant, so a few points suffice there;
    the boundary regime is sampled densely.
    """
    gamma, _ = solve_gamma(A, p)
    tb = tau_bar(A, p, gamma)
    taus = np.concatenate([np.geomspace(tb * 1e-3, tb * 0.999, n_struct), np.linspace(tb, 1.0, n_boundary)])
    return xi_curve(A, p, taus).C_emp


def ode_residual(xi_points: Sequence[tuple[float, float]], gamma: float) -> float:
    """Max over interior points of ``|(-tau) xi' + gamma xi| / xi``.

    ``tau xi'`` is taken as ``xi * dlog(xi)/dlog(tau)`` with the log-log slope
    from central differences, which is exact for power laws on any grid.
    """
    pts = np.asarray(sorted(xi_points), dtype=float)
    if len(pts) < 3:
        raise RangeError("need at least three points")
    if np.any(pts <= 0):
        raise RangeError("tau and xi must be positive")
    lt, lx = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope = (lx[2:] - lx[:-2]) / (lt[2:] - lt[:-2])
    return float(np.max(np.abs(gamma - slope)))


def local_ode_residuals(xi_points: Sequence[tuple[float, float]], gamma: float) -> np.ndarray:
    """Per-point residuals (NaN at the two ends)."""
    pts = np.asarray(xi_points, dtype=float)
    out = np.full(len(pts), np.nan)
    if len(pts) >= 3:
        lt, lx = np.log(pts[:, 0]), np.log(pts[:, 1])
        out[1:-1] = np.abs(gamma - (lx[2:] - lx[:-2]) / (lt[2:] - lt[:-2]))
    return out


def fit_power(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares line through ``(log x, log y)``: ``(slope, intercept, r2)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise RangeError("need at least three points")
    if np.any(pts <= 0):
        raise RangeError("fit_power needs positive data")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), r2
