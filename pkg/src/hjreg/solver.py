"""Value function by backward semi-Lagrangian dynamic programming.

One backward step at node ``x`` and time ``t_k`` solves

    u(x, t_k) = min_{|y - x| <= vmax dt}  dt a(x, t_k) |f(x, t_k) + (y - x)/dt|^p
                                          + I[u(., t_{k+1})](y)

with ``I`` multilinear interpolation on the enlarged box. The minimum is
taken over a sub-grid of the velocity ball, then polished by one
golden-section pass per coordinate around the best candidate. Running cost
is the left-endpoint rectangle rule, so ``action`` of a rolled-out
trajectory reproduces the DP recursion term by term.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .coeffs import CoefficientField, ProblemSpec, eval_field
from .errors import ConfigError, RangeError
from .exponents import ExponentReport, build_report, transform_a

__all__ = [
    "ValueGrid",
    "Trajectory",
    "action",
    "default_vmax",
    "solve_dp",
    "hopf_lax",
    "hopf_lax_curve",
    "extract_trajectory",
    "refine_trajectory",
    "speed_integral",
]

_CHUNK = 4096  # fixed node chunk: results do not depend on the worker count
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_ITERS = 30


def default_threads() -> int:
    env = os.environ.get("HJREG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear path sampled at uniform times ending at ``T``."""

    t0: float
    times: np.ndarray
    nodes: np.ndarray  # (n + 1, N)
    cap_hits: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if len(times) < 2 or len(times) != len(nodes):
            raise RangeError("a trajectory needs at least two nodes with matching times")
        if np.any(np.diff(times) <= 0):
            raise RangeError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "nodes", nodes)

    @property
    def velocities(self) -> np.ndarray:
        return np.diff(self.nodes, axis=0) / np.diff(self.times)[:, None]

    def with_nodes(self, nodes: np.ndarray) -> "Trajectory":
        return Trajectory(self.t0, self.times, nodes, self.cap_hits)


def _running_cost(spec: ProblemSpec, xs: np.ndarray, ts, dts, vel: np.ndarray) -> np.ndarray:
    a = transform_a(eval_field(spec.b, xs, ts), spec.p)
    fv = eval_field(spec.f, xs, ts)
    speed = np.linalg.norm(fv + vel, axis=-1)
    return dts * a * speed**spec.p


def action(spec: ProblemSpec, traj: Trajectory) -> float:
    """Left-endpoint rectangle rule for the action of a piecewise-linear path."""
    X, t = traj.nodes, traj.times
    dts = np.diff(t)
    run = _running_cost(spec, X[:-1], t[:-1], dts, traj.velocities)
    return float(np.sum(run) + eval_field(spec.g, X[-1], spec.T))


def speed_integral(traj: Trajectory, p: float) -> float:
    """``int |x'|^p`` for a piecewise-linear path (exact)."""
    speeds = np.linalg.norm(traj.velocities, axis=-1)
    return float(np.sum(np.diff(traj.times) * speeds**p))


@dataclass(frozen=True)
class ValueGrid:
    """Discrete value function on the enlarged box times ``[0, T]``."""

    axes: tuple[np.ndarray, ...]
    times: np.ndarray
    values: np.ndarray  # (nt + 1, n_1, ..., n_N)
    core_box: tuple[tuple[float, float], ...]
    vmax: float
    max_candidates: int
    cap_hits: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(float(ax[1] - ax[0]) for ax in self.axes)

    @property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def core_masks(self) -> tuple[np.ndarray, ...]:
        """Per-axis boolean masks of nodes inside the core box."""
        tol = 1e-9
        return tuple(
            (ax >= lo - tol * max(1.0, abs(lo))) & (ax <= hi + tol * max(1.0, abs(hi)))
            for ax, (lo, hi) in zip(self.axes, self.core_box)
        )

    def interp(self, k: int, pts: np.ndarray) -> np.ndarray:
        return _interp(self.values[k], self.axes, pts)


def _interp(values: np.ndarray, axes: tuple[np.ndarray, ...], pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation on a uniform grid; points are clamped to the box."""
    pts = np.asarray(pts, dtype=float)
    N = len(axes)
    idx, wts = [], []
    for d, ax in enumerate(axes):
        lo, h, n = ax[0], ax[1] - ax[0], len(ax)
        s = np.clip((pts[..., d] - lo) / h, 0.0, n - 1.0)
        i = np.minimum(np.floor(s).astype(np.intp), n - 2)
        idx.append(i)
        wts.append(s - i)
    out = np.zeros(pts.shape[:-1])
    for corner in range(1 << N):
        w = np.ones(pts.shape[:-1])
        ix = []
        for d in range(N):
            bit = (corner >> d) & 1
            w = w * (wts[d] if bit else 1.0 - wts[d])
            ix.append(idx[d] + bit)
        out += w * values[tuple(ix)]
    return out


def _ball_offsets(N: int, m: int, dy: float) -> np.ndarray:
    """Lattice offsets ``k * dy`` with ``|k| <= m``, in lexicographic order."""
    rng = np.arange(-m, m + 1)
    mesh = np.meshgrid(*([rng] * N), indexing="ij")
    ks = np.stack([g.ravel() for g in mesh], axis=-1)
    keep = np.sum(ks.astype(float) ** 2, axis=-1) <= m * m + 1e-9
    return ks[keep] * dy


class _Stepper:
    """One backward DP step evaluated at arbitrary points."""

    def __init__(self, spec: ProblemSpec, axes, times, vmax: float, max_candidates: int):
        self.spec = spec
        self.axes = axes
        self.times = times
        self.dt = float(times[1] - times[0])
        self.radius = vmax * self.dt
        cell = min(float(ax[1] - ax[0]) for ax in axes)
        if self.radius < cell:
            raise ConfigError(
                f"vmax*dt = {self.radius:.4g} is smaller than one cell ({cell:.4g}); control set is empty"
            )
        m = min(int(math.ceil(self.radius / cell - 1e-12)), max_candidates)
        self.dy = self.radius / m
        self.offsets = _ball_offsets(spec.dimension, m, self.dy)
        self.lo = np.array([ax[0] for ax in axes])
        self.hi = np.array([ax[-1] for ax in axes])

    def _objective(self, y, x, a, fv, nxt):
        vel = (y - x) / self.dt
        run = self.dt * a * np.linalg.norm(fv + vel, axis=-1) ** self.spec.p
        return run + _interp(nxt, self.axes, y)

    def __call__(self, k: int, x: np.ndarray, nxt: np.ndarray):
        """Return ``(value, argmin, cap_flag)`` for points ``x`` of shape ``(m, N)``."""
        spec, t = self.spec, float(self.times[k])
        a = transform_a(eval_field(spec.b, x, t), spec.p)
        fv = eval_field(spec.f, x, t)
        cand = np.clip(x[:, None, :] + self.offsets[None, :, :], self.lo, self.hi)
        cost = self._objective(cand, x[:, None, :], a[:, None], fv[:, None, :], nxt)
        j = np.argmin(cost, axis=1)  # first minimum = lexicographic tie-break
        rows = np.arange(len(x))
        best = cost[rows, j]
        ybest = cand[rows, j].copy()

        # one golden-section pass per coordinate around the best candidate
        y = ybest.copy()
        fy = best.copy()
        r2 = self.radius**2 * (1.0 + 1e-12)

        def obj(yy):
            val = self._objective(yy, x, a, fv, nxt)
            return np.where(np.sum((yy - x) ** 2, axis=-1) <= r2, val, np.inf)

        for d in range(spec.dimension):
            lo = np.clip(y[:, d] - self.dy, self.lo[d], self.hi[d])
            hi = np.clip(y[:, d] + self.dy, self.lo[d], self.hi[d])
            c = hi - _GOLDEN * (hi - lo)
            e = lo + _GOLDEN * (hi - lo)
            yc, ye = y.copy(), y.copy()
            yc[:, d], ye[:, d] = c, e
            fc, fe = obj(yc), obj(ye)
            yn = y.copy()
            for _ in range(_GOLDEN_ITERS):
                left = fc <= fe
                # keep [lo, e] when the left probe wins, else [c, hi]
                hi = np.where(left, e, hi)
                lo = np.where(left, lo, c)
                e, c = np.where(left, c, lo + _GOLDEN * (hi - lo)), np.where(left, hi - _GOLDEN * (hi - lo), e)
                yn[:, d] = np.where(left, c, e)
                fn = obj(yn)
                fc, fe = np.where(left, fn, fe), np.where(left, fc, fn)
            ym = y.copy()
            ym[:, d] = 0.5 * (lo + hi)
            fm = obj(ym)
            better = fm < fy
            y[better] = ym[better]
            fy = np.where(better, fm, fy)

        dist = np.linalg.norm(y - x, axis=-1)
        cap = dist >= self.radius - 0.5 * self.dy
        return fy, y, cap


def default_vmax(report: ExponentReport) -> float:
    """``4 (K/T)^{1/p} + M_eff``: four times the mean optimal speed plus drift."""
    return 4.0 * (report.K / report.T) ** (1.0 / report.p) + report.M_eff


def _run_chunks(pool, fn, n: int):
    chunks = [(s, min(s + _CHUNK, n)) for s in range(0, n, _CHUNK)]
    if pool is None:
        return [fn(s, e) for s, e in chunks]
    return list(pool.map(lambda se: fn(*se), chunks))


def solve_dp(
    spec: ProblemSpec,
    nx: int | tuple[int, ...],
    nt: int,
    vmax: float | None = None,
    report: ExponentReport | None = None,
    max_candidates: int = 16,
    threads: int | None = None,
    box: tuple[tuple[float, float], ...] | None = None,
) -> ValueGrid:
    """Backward DP on the enlarged box (or ``box`` if given) with ``nt`` steps.

    ``nx`` is the node count per axis (an int applies to every axis).
    ``max_candidates`` caps the per-axis half-width of the candidate
    sub-grid in the velocity ball.
    """
    if spec.dimension > 2:
        raise ConfigError("DP grids support dimension 1 and 2 only")
    counts = (nx,) * spec.dimension if isinstance(nx, int) else tuple(nx)
    if len(counts) != spec.dimension or min(counts) < 3:
        raise ConfigError("need at least 3 nodes per axis")
    if nt < 1:
        raise ConfigError("need at least one time step")
    if vmax is None:
        vmax = default_vmax(report if report is not None else build_report(spec))
    if not vmax > 0:
        raise ConfigError("vmax must be positive")

    full_box = box if box is not None else spec.enlarged_box
    axes = tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(full_box, counts))
    times = np.linspace(0.0, spec.T, nt + 1)
    stepper = _Stepper(spec, axes, times, vmax, max_candidates)

    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    core = np.ones(len(nodes), dtype=bool)
    for d, (lo, hi) in enumerate(spec.box):
        core &= (nodes[:, d] >= lo - 1e-9) & (nodes[:, d] <= hi + 1e-9)

    values = np.empty((nt + 1,) + counts)
    values[nt] = np.asarray(eval_field(spec.g, nodes, spec.T)).reshape(counts)
    cap_hits = 0
    n_workers = threads if threads is not None else default_threads()
    pool = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None
    try:
        for k in range(nt - 1, -1, -1):
            nxt = values[k + 1]

            def work(s, e, k=k, nxt=nxt):
                return stepper(k, nodes[s:e], nxt)

            parts = _run_chunks(pool, work, len(nodes))
            vals = np.concatenate([v for v, _, _ in parts])
            caps = np.concatenate([c for _, _, c in parts])
            values[k] = vals.reshape(counts)
            cap_hits += int(np.count_nonzero(caps & core))
    finally:
        if pool is not None:
            pool.shutdown()

    return ValueGrid(
        axes=axes,
        times=times,
        values=values,
        core_box=spec.box,
        vmax=float(vmax),
        max_candidates=max_candidates,
        cap_hits=cap_hits,
        meta={"candidates": len(stepper.offsets), "candidate_spacing": stepper.dy},
    )


def extract_trajectory(spec: ProblemSpec, grid: ValueGrid, x0, t0: float) -> Trajectory:
    """Roll the DP argmin policy forward from ``(x0, t0)``.

    ``t0`` is snapped to the nearest time node.
    """
    k0 = int(round(t0 / grid.dt))
    if not 0 <= k0 < len(grid.times) - 1:
        raise RangeError("t0 must lie in [0, T)")
    stepper = _Stepper(spec, grid.axes, grid.times, grid.vmax, grid.max_candidates)
    x = np.atleast_1d(np.asarray(x0, dtype=float)).reshape(1, -1)
    path = [x[0].copy()]
    hits = 0
    for k in range(k0, len(grid.times) - 1):
        _, y, cap = stepper(k, x, grid.values[k + 1])
        hits += int(cap[0])
        x = y
        path.append(x[0].copy())
    return Trajectory(float(grid.times[k0]), grid.times[k0:].copy(), np.array(path), hits)


def _local_cost(spec, X, t, dt, j, xj):
    """Action terms that involve node ``j`` (array of indices), with node j moved to ``xj``."""
    n = len(X) - 1
    prev = X[j - 1]
    out = _running_cost(spec, prev, t[j - 1], dt[j - 1], (xj - prev) / dt[j - 1][:, None])
    inner = j < n
    if np.any(inner):
        ji = j[inner]
        out[inner] += _running_cost(spec, xj[inner], t[ji], dt[ji], (X[ji + 1] - xj[inner]) / dt[ji][:, None])
    if np.any(~inner):
        out[~inner] += eval_field(spec.g, xj[~inner], spec.T)
    return out


def _action_gradient(spec, X, t, dt, e):
    """Central-difference gradient of the action in all nodes after the first.

    The action is a sum of local terms, so perturbing node ``j`` only
    changes the terms returned by ``_local_cost``; all nodes are perturbed
    at once.
    """
    j = np.arange(1, len(X))
    grad = np.zeros((len(j), spec.dimension))
    for d in range(spec.dimension):
        xp, xm = X[j].copy(), X[j].copy()
        xp[:, d] += e
        xm[:, d] -= e
        grad[:, d] = (_local_cost(spec, X, t, dt, j, xp) - _local_cost(spec, X, t, dt, j, xm)) / (2 * e)
    return grad


def refine_trajectory(spec: ProblemSpec, traj: Trajectory, iters: int = 200, fd_rel: float = 1e-5) -> Trajectory:
    """Minimise the discrete action over all nodes after the first (L-BFGS-B).

    Gradients are central differences with step ``fd_rel`` times the core
    box width. The result is never worse than the input: if the optimiser
    fails to lower the action the input is returned unchanged.
    """
    X0 = traj.nodes
    t = traj.times
    dt = np.diff(t)
    e = fd_rel * max(hi - lo for lo, hi in spec.box)
    shape = X0[1:].shape

    def fun(z):
        X = X0.copy()
        X[1:] = z.reshape(shape)
        val = action(spec, traj.with_nodes(X))
        return val, _action_gradient(spec, X, t, dt, e).ravel()

    start = action(spec, traj)
    if iters <= 0:
        return traj
    res = minimize(fun, X0[1:].ravel(), jac=True, method="L-BFGS-B",
                   options={"maxiter": iters, "ftol": 1e-15, "gtol": 1e-11})
    X = X0.copy()
    X[1:] = res.x.reshape(shape)
    out = traj.with_nodes(X)
    return out if action(spec, out) < start else traj


def _g_window(a0, p, s, g_sup):
    # the minimiser satisfies a0 |y-x|^p s^{1-p} <= g(x) - g(y) <= 2 sup|g|
    return (2.0 * g_sup * s ** (p - 1.0) / a0) ** (1.0 / p)


def hopf_lax(
    a0: float,
    p: float,
    T_minus_t: float,
    g: CoefficientField,
    x,
    scan: float = 1e-4,
    g_sup: float | None = None,
) -> float:
    """``min_y a0 |y - x|^p (T-t)^{1-p} + g(y)`` over a scan grid of step ``scan``.

    Exact value function for constant ``a = a0`` and ``f = 0`` (straight
    lines are optimal by convexity). The scan covers the ball where a
    minimiser can lie; ``g_sup`` bounds ``|g|`` and is estimated from samples
    when omitted.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    N = x.shape[-1]
    if T_minus_t <= 0:
        return float(eval_field(g, x, 0.0))
    if g_sup is None:
        g_sup = abs(float(eval_field(g, x, 0.0))) + 1e-12
        for _ in range(20):
            R = _g_window(a0, p, T_minus_t, g_sup)
            probe = np.stack(
                np.meshgrid(*[np.linspace(xi - R, xi + R, 201 if N == 1 else 41) for xi in x], indexing="ij"),
                axis=-1,
            ).reshape(-1, N)
            new = float(np.max(np.abs(eval_field(g, probe, 0.0))))
            if new <= g_sup:
                break
            g_sup = new
    R = _g_window(a0, p, T_minus_t, g_sup) + scan
    n = int(math.ceil(R / scan))
    offs = np.arange(-n, n + 1) * scan
    best = math.inf
    if N == 1:
        y = x[0] + offs
        vals = a0 * np.abs(offs) ** p * T_minus_t ** (1.0 - p) + eval_field(g, y[:, None], 0.0)
        return float(np.min(vals))
    # N >= 2: sweep the first axis, vectorise the rest
    rest = np.stack(np.meshgrid(*([offs] * (N - 1)), indexing="ij"), axis=-1).reshape(-1, N - 1)
    for o in offs:
        d = np.concatenate([np.full((len(rest), 1), o), rest], axis=1)
        r = np.linalg.norm(d, axis=-1)
        mask = r <= R
        if not np.any(mask):
            continue
        vals = a0 * r[mask] ** p * T_minus_t ** (1.0 - p) + eval_field(g, x + d[mask], 0.0)
        best = min(best, float(np.min(vals)))
    return best


def hopf_lax_curve(a0: float, p: float, T_minus_t: float, g: CoefficientField, xs, scan: float = 1e-4, g_sup: float = 1.0):
    """``hopf_lax`` at many 1-D points.

    The scan lattice ``k * scan`` is fixed in space and shared by all query
    points, so ``g`` is evaluated once.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    if T_minus_t <= 0:
        return np.asarray(eval_field(g, xs[:, None], 0.0), dtype=float)
    R = _g_window(a0, p, T_minus_t, g_sup) + scan
    k_lo = int(math.floor((xs.min() - R) / scan)) - 1
    k_hi = int(math.ceil((xs.max() + R) / scan)) + 1
    ygrid = np.arange(k_lo, k_hi + 1) * scan
    gy = np.asarray(eval_field(g, ygrid[:, None], 0.0))
    out = np.empty(len(xs))
    w = T_minus_t ** (1.0 - p) * a0
    for i, x in enumerate(xs):
        j0 = int(math.floor((x - R) / scan)) - k_lo
        j1 = int(math.ceil((x + R) / scan)) - k_lo + 1
        y = ygrid[j0:j1]
        out[i] = np.min(w * np.abs(y - x) ** p + gy[j0:j1])
    return out
