"""``hjreg`` command line: solve, exponents, extremal, probe, lemmas.

Exit codes: 0 pass, 1 verification failure, 2 usage or configuration error.
Floats are written with 17 significant digits so CSV and JSON round-trip.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coeffs import ProblemSpec, parse_problem
from .errors import HJRegError
from .exponents import build_report, build_report_from_bounds, solve_gamma
from .probe import SCHEMA, _jsonable, battery, run_probe, trajectory_suite
from .revholder import extremal_bruteforce, lemma_constant, local_ode_residuals, xi_curve
from .solver import default_threads, default_vmax, solve_dp

log = logging.getLogger("hjreg")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return "%.17g" % x


def _write_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Output:
    """Files under ``--out``; refuses to overwrite unless ``--force``."""

    def __init__(self, out: str | None, force: bool):
        self.dir = Path(out) if out else None
        self.force = force

    def write(self, name: str, text: str) -> None:
        if self.dir is None:
            sys.stdout.write(text)
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        if path.exists() and not self.force:
            raise UsageError(f"{path} exists; pass --force to overwrite")
        path.write_text(text, encoding="utf-8")


def _load_problems(arg: str) -> list[tuple[str, ProblemSpec]]:
    if arg == "battery":
        return [(b.name, b.spec) for b in battery()]
    if arg.startswith("battery:"):
        items = battery()
        try:
            i = int(arg.split(":", 1)[1])
            b = items[i]
        except (ValueError, IndexError):
            raise UsageError(f"battery index must be 0..{len(items) - 1}") from None
        return [(b.name, b.spec)]
    path = Path(arg)
    if not path.is_file():
        raise UsageError(f"problem file not found: {arg}")
    return [(path.stem, parse_problem(path.read_text(encoding="utf-8")))]


def _one_problem(arg: str) -> tuple[str, ProblemSpec]:
    probs = _load_problems(arg)
    if len(probs) != 1:
        raise UsageError("this subcommand takes a single problem")
    return probs[0]


def _parse_box(text: str | None):
    if text is None:
        return None
    try:
        return tuple(tuple(float(v) for v in part.split(":")) for part in text.split(","))
    except ValueError:
        raise UsageError(f"bad box {text!r}; expected lo:hi[,lo:hi]") from None


def _parse_resolution(text: str | None):
    if text is None or text == "auto":
        return None, None
    try:
        nx, nt = text.split(":")
        return int(nx), int(nt)
    except ValueError:
        raise UsageError(f"bad resolution {text!r}; expected NX:NT or auto") from None


# --------------------------------------------------------------------------- subcommands


def cmd_solve(args, out: Output) -> int:
    name, spec = _one_problem(args.problem)
    report = build_report(spec)
    box = _parse_box(args.grid_box)
    vmax = args.vmax if args.vmax is not None else default_vmax(report)
    grid = solve_dp(spec, args.nx, args.nt, vmax=vmax, report=report,
                    max_candidates=args.max_candidates, threads=args.threads, box=box)
    N = spec.dimension
    mesh = np.meshgrid(*grid.axes, indexing="ij")
    coords = [m.ravel() for m in mesh]
    header = ["t"] + [f"x{i + 1}" for i in range(N)] + ["u"]
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for k, t in enumerate(grid.times):
        vals = grid.values[k].ravel()
        block = np.column_stack([np.full(len(vals), t)] + coords + [vals])
        np.savetxt(buf, block, fmt="%.17g", delimiter=",")
    out.write(f"{name}-grid.csv", buf.getvalue())
    meta = {
        "schema": SCHEMA,
        "problem": spec.to_dict(),
        "axes": [{"lo": ax[0], "hi": ax[-1], "nodes": len(ax)} for ax in grid.axes],
        "nt": len(grid.times) - 1,
        "core_box": [list(b) for b in grid.core_box],
        "vmax": grid.vmax,
        "max_candidates": grid.max_candidates,
        "cap_hits": grid.cap_hits,
        "meta": grid.meta,
    }
    if out.dir is not None:
        out.write(f"{name}-grid.json", _dump_json(meta))
    if grid.cap_hits:
        print(f"warning: {grid.cap_hits} core argmins touched the vmax cap", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


_EXP_COLUMNS = ("p", "q", "M", "delta", "T", "K", "A", "B", "gamma", "theta", "ex_space", "ex_time")


def cmd_exponents(args, out: Output) -> int:
    raw = (args.M, args.delta, args.q, args.T)
    if args.problem is not None:
        if any(v is not None for v in raw):
            raise UsageError("give either --problem or --M/--delta/--q/--T, not both")
        _, spec = _one_problem(args.problem)
        rep = build_report(spec)
    else:
        if any(v is None for v in raw):
            raise UsageError("--M, --delta, --q and --T are all required without --problem")
        rep = build_report_from_bounds(args.M, args.delta, args.q, args.T)
    row = {
        "p": rep.p, "q": rep.q, "M": rep.M_eff, "delta": rep.delta_eff, "T": rep.T, "K": rep.K,
        "A": rep.A, "B": rep.B, "gamma": rep.gamma, "theta": rep.theta,
        "ex_space": rep.ex_space, "ex_time": rep.ex_time,
    }
    gamma_A, _ = solve_gamma(rep.A, rep.p)
    lines = [f"{k:>9} = {_fmt(row[k])}" for k in _EXP_COLUMNS]
    lines.append(f"{'A_rh':>9} = {_fmt(rep.A_rh)}   (reverse-Hoelder constant after debiasing, 2A)")
    lines.append(f"{'gamma_A':>9} = {_fmt(gamma_A)}   (smallest root of phi at A itself)")
    lines.append(f"{'c_p':>9} = {_fmt(rep.c_p)}")
    print("\n".join(lines))
    if args.csv:
        out.write("exponents.csv", _write_csv(_EXP_COLUMNS, [[float(row[k]) for k in _EXP_COLUMNS]]))
    return EXIT_PASS


def _tau_grid(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"bad --tau-grid {text!r}; expected lo:hi:n") from None
    if not (0 < lo <= hi <= 1 and n >= 1):
        raise UsageError("--tau-grid needs 0 < lo <= hi <= 1 and n >= 1")
    return np.linspace(lo, hi, n)


def cmd_extremal(args, out: Output) -> int:
    taus = _tau_grid(args.tau_grid)
    curve = xi_curve(args.A, args.p, taus)
    local = local_ode_residuals(curve.points, curve.gamma)
    rows = []
    gap = 0.0  # largest relative shortfall of the brute force (lower bound)
    excess = 0.0  # brute force above the structured value would refute maximality
    for i, r in enumerate(curve.results):
        bf = extremal_bruteforce(args.A, args.p, r.tau, n=args.cells, starts=args.starts, seed=args.seed + i)
        gap = max(gap, (r.xi - bf.xi) / r.xi)
        excess = max(excess, (bf.xi - r.xi) / r.xi)
        rows.append([r.tau, r.a_tau, r.b_tau, r.tau1, r.xi, bf.xi, float(local[i])])
    header = ("tau", "a_tau", "b_tau", "tau1", "xi", "xi_bruteforce", "ode_residual")
    out.write("extremal.csv", _write_csv(header, rows))
    C_emp = lemma_constant(args.A, args.p)
    xs = [r.xi for r in curve.results]
    monotone = all(b >= a for a, b in zip(xs, xs[1:]))
    summary = (
        f"# C_emp={_fmt(C_emp)} gamma={_fmt(curve.gamma)} tau_bar={_fmt(curve.tau_bar)} "
        f"bruteforce_shortfall={_fmt(gap)} bruteforce_excess={_fmt(excess)} monotone={monotone}\n"
    )
    if out.dir is not None:
        out.write("extremal-summary.txt", summary)
    sys.stdout.write(summary)
    return EXIT_PASS if monotone and excess <= 1e-6 else EXIT_FAIL


def _summary_table(reports) -> str:
    lines = [f"{'problem':<12} {'lemma1':>6} {'lemma2':>6} {'morrey':>6} {'space':>6} {'time':>6} {'valid':>6} {'pass':>6}"]
    yn = {True: "ok", False: "FAIL", None: "-"}
    for r in reports:
        ts = r.theorem_space["pass"] if r.theorem_space else None
        tt = r.theorem_time["pass"] if r.theorem_time else None
        lines.append(
            f"{r.problem:<12} {yn[r.lemma1['pass']]:>6} {yn[r.lemma2['pass']]:>6} {yn[r.morrey['pass']]:>6} "
            f"{yn[ts]:>6} {yn[tt]:>6} {yn[r.diagnostics['valid']]:>6} {yn[r.passed]:>6}"
        )
    return "\n".join(lines) + "\n"


def cmd_probe(args, out: Output) -> int:
    nx, nt = _parse_resolution(args.resolution)
    reports = []
    for name, spec in _load_problems(args.problem):
        rep = run_probe(spec, name, nx=nx, nt=nt, tau=args.tau, n_starts=args.starts,
                        refine_iters=args.refine_iters, seed=args.seed, threads=args.threads)
        reports.append(rep)
        out.write(f"probe-{name}.json", _dump_json(rep.to_json()))
    sys.stdout.write(_summary_table(reports))
    return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL


def cmd_lemmas(args, out: Output) -> int:
    from .probe import theorem_resolution, morrey_constant_bound

    nx, nt = _parse_resolution(args.resolution)
    ok = True
    for name, spec in _load_problems(args.problem):
        report = build_report(spec)
        C_emp = lemma_constant(report.A_rh, report.p)
        if nx is None:
            auto_nx, auto_nt = theorem_resolution(spec, report, morrey_constant_bound(report, C_emp))
        grid = solve_dp(spec, nx or auto_nx, nt or auto_nt, vmax=default_vmax(report), report=report,
                        max_candidates=4, threads=args.threads)
        l1, l2, mo, diag, _ = trajectory_suite(spec, report, grid, args.starts, args.refine_iters, args.seed, C_emp)
        diag["grid_cap_hits"] = grid.cap_hits
        diag["valid"] = diag["trajectory_cap_hits"] == 0 and diag["box_exits"] == 0 and grid.cap_hits == 0
        passed = l1["pass"] and l2["pass"] and mo["pass"] and diag["valid"]
        ok = ok and passed
        doc = {"schema": SCHEMA, "problem": name, "pass": passed, "exponents": report.as_dict(),
               "lemma1": l1, "lemma2": l2, "morrey": mo, "diagnostics": diag}
        out.write(f"lemmas-{name}.json", _dump_json(doc))
        print(f"{name:<12} lemma1={'ok' if l1['pass'] else 'FAIL'} lemma2={'ok' if l2['pass'] else 'FAIL'} "
              f"morrey={'ok' if mo['pass'] else 'FAIL'} valid={'ok' if diag['valid'] else 'FAIL'}")
    return EXIT_PASS if ok else EXIT_FAIL


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="seed for every random choice (default 42)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: HJREG_THREADS or CPU count); output does not depend on it")
    common.add_argument("--out", default=None, help="output directory (created if absent)")
    common.add_argument("--force", action="store_true", help="overwrite existing output files")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="hjreg", description="Hoelder regularity toolkit for superlinear Hamilton-Jacobi equations")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="semi-Lagrangian DP value grid")
    s.add_argument("--problem", required=True, help="JSON file or battery:i")
    s.add_argument("--nx", type=int, required=True, help="nodes per axis")
    s.add_argument("--nt", type=int, required=True, help="time steps")
    s.add_argument("--vmax", type=float, default=None)
    s.add_argument("--max-candidates", type=int, default=16)
    s.add_argument("--grid-box", default=None, help="computational box lo:hi[,lo:hi] (default: enlarged box)")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("exponents", parents=[common], help="constants and Hoelder exponents")
    e.add_argument("--problem", default=None)
    e.add_argument("--M", type=float, default=None)
    e.add_argument("--delta", type=float, default=None)
    e.add_argument("--q", type=float, default=None)
    e.add_argument("--T", type=float, default=None)
    e.add_argument("--csv", action="store_true", help="also emit the CSV row")
    e.set_defaults(func=cmd_exponents)

    x = sub.add_parser("extremal", parents=[common], help="xi(tau) curve with brute-force cross-check")
    x.add_argument("--A", type=float, required=True)
    x.add_argument("--p", type=float, required=True)
    x.add_argument("--tau-grid", required=True, help="lo:hi:n (linear spacing)")
    x.add_argument("--cells", type=int, default=40, help="brute-force step cells")
    x.add_argument("--starts", type=int, default=4, help="brute-force random starts")
    x.set_defaults(func=cmd_extremal)

    for name, func, help_ in (("probe", cmd_probe, "full certification run"),
                              ("lemmas", cmd_lemmas, "trajectory lemma checks only")):
        pr = sub.add_parser(name, parents=[common], help=help_)
        pr.add_argument("--problem", required=True, help="JSON file, battery:i or battery")
        pr.add_argument("--resolution", default=None, help="NX:NT or auto (default auto)")
        pr.add_argument("--starts", type=int, default=4, help="trajectory start points")
        pr.add_argument("--refine-iters", type=int, default=100)
        if name == "probe":
            pr.add_argument("--tau", type=float, default=0.1)
        pr.set_defaults(func=func)
    return ap


def run(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads is None:
        args.threads = default_threads()
    elif args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    out = Output(args.out, args.force)
    try:
        return args.func(args, out)
    except (UsageError, HJRegError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
