"""Command-line front end.

Exit status: 0 on success, 1 when a solve or a check fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import subprocess
import sys
import tempfile
from fractions import Fraction

from .cap_bounds import CapInstance, build_cap_sdp, cap_solution_view, parse_angle, sweep_caps
from .ce_improved import CeInstance, TangencyTable, build_ce_sdp, builtin_table, ce_solution_view, center_density, load_table
from .euclidean_bounds import SphereInstance, build_sphere_sdp, florian_2d_bound, sphere_solution_view, sweep_spheres
from .sdp_model import WeightedGraph, alpha_bruteforce, export_sdpa, import_solution, theta_prime_sdp
from .solver import SolverConfig, SolverError, feasibility_recentre, solve
from .verify import Certificate, VerificationError, certify, check

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------


def parse_grid(spec: str) -> list:
    """``start:stop:step[,start:stop:step...]`` -> list of tuples, lexicographic order.

    Values may use pi (e.g. ``pi/12:pi/3:pi/24``); the stop value is included
    when it lies on the grid.
    """
    axes = []
    for part in spec.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise UsageError(f"grid axis {part!r} is not start:stop:step")
        start, stop, step = (float(_angle_value(b)) for b in bits)
        if step <= 0 or stop < start:
            raise UsageError(f"grid axis {part!r} needs step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        axes.append([start + k * step for k in range(count)])
    out = [()]
    for ax in axes:
        out = [t + (v,) for t in out for v in ax]
    return out


def _angle_value(s: str):
    a = parse_angle(s)
    return a.to_mpf() if hasattr(a, "to_mpf") else a


def _cfg(args) -> SolverConfig:
    return SolverConfig(args.precision)


def _emit(args, human: str, data: dict) -> None:
    if args.json:
        print(json.dumps(data, default=str))
    else:
        print(human)


def _cap_instance(args) -> CapInstance:
    try:
        alphas = [parse_angle(a) for a in args.angles.split(",")]
        return CapInstance(args.dim, alphas, args.degree)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _sphere_instance(args) -> SphereInstance:
    try:
        r = Fraction(args.ratio)
        return SphereInstance(args.dim, tuple(sorted((r, Fraction(1)))), args.degree)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(str(exc)) from exc


def _ce_instance(args) -> CeInstance:
    try:
        if args.table == "builtin":
            table = builtin_table(args.dim)
        elif args.table == "empty":
            table = TangencyTable(args.dim, ())
        else:
            with open(args.table) as fh:
                table = load_table(fh, args.dim)
        return CeInstance(args.dim, table, args.degree)
    except (KeyError, ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc


def _build(args):
    kind = args.kind
    if kind == "cap":
        return build_cap_sdp(_cap_instance(args))
    if kind == "sphere":
        return build_sphere_sdp(_sphere_instance(args))
    return build_ce_sdp(_ce_instance(args))


# ---------------------------------------------------------------------------
# Solving (embedded or through an external SDPA-format solver)
# ---------------------------------------------------------------------------


def _external_solve(p, args):
    """Write SDPA input; if EXTERNAL_SDP_SOLVER is set, run it and read the result back."""
    if not args.out:
        raise UsageError("--solve export needs --out FILE.dat-s")
    with open(args.out, "w") as fh:
        export_sdpa(p, fh)
    solver = os.environ.get("EXTERNAL_SDP_SOLVER")
    if not solver:
        return None
    with tempfile.TemporaryDirectory() as tmp:
        res = os.path.join(tmp, "result.out")
        subprocess.run([solver, args.out, res], check=True, capture_output=True)
        with open(res) as fh:
            return import_solution(fh, p, args.precision)


def _solve(p, args):
    if args.solve == "export":
        return _external_solve(p, args)
    return solve(p, _cfg(args))


def _report_solution(args, p, sol, extra: dict) -> int:
    if sol is None:
        _emit(args, f"wrote {args.out}", {"exported": args.out})
        return EXIT_OK
    data = {"bound": float(sol.objective), "status": sol.status, "max_violation": sol.max_violation}
    data.update(extra)
    human = f"bound = {float(sol.objective):.10f}  (status {sol.status}, violation {sol.max_violation:.2e})"
    for k, v in extra.items():
        human += f"\n{k} = {v:.10f}" if isinstance(v, float) else f"\n{k} = {v}"
    _emit(args, human, data)
    return EXIT_OK if sol.status in ("optimal", "feasible") else EXIT_FAIL


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_capbound(args) -> int:
    args.kind = "cap"
    p = build_cap_sdp(_cap_instance(args))
    sol = _solve(p, args)
    extra = {}
    if sol is not None and sol.status != "failed":
        view = cap_solution_view(p, sol)
        extra["f_ii(1)"] = [float(sum(Fk[i][i] for Fk in view.f)) for i in range(len(view.f[0]))]
    return _report_solution(args, p, sol, extra)


def cmd_spherebound(args) -> int:
    args.kind = "sphere"
    inst = _sphere_instance(args)
    p = build_sphere_sdp(inst)
    sol = _solve(p, args)
    extra = {}
    if inst.n == 2:
        r = inst.radii[0] / inst.radii[1]
        extra["florian_bound"] = florian_2d_bound(r)
    if sol is not None and sol.status != "failed":
        sphere_solution_view(p, sol)
    return _report_solution(args, p, sol, extra)


def cmd_cebound(args) -> int:
    args.kind = "ce"
    p = build_ce_sdp(_ce_instance(args))
    sol = _solve(p, args)
    extra = {}
    if sol is not None and sol.status != "failed":
        view = ce_solution_view(p, sol)
        extra["center_density"] = center_density(args.dim, float(sol.objective))
        extra["lp_value"] = float(view.lp_value())
    return _report_solution(args, p, sol, extra)


def cmd_sweep_caps(args) -> int:
    grid = parse_grid(args.grid)
    if any(len(g) != 2 for g in grid):
        raise UsageError("sweep-caps needs a two-axis grid alpha1,alpha2")
    with open(args.out, "w") as fh:
        rows = sweep_caps(args.dim, grid, args.degree, _cfg(args), fh, args.jobs)
    bad = sum(1 for r in rows if r[2] is None)
    _emit(args, f"wrote {len(rows)} rows to {args.out} ({bad} failed)", {"rows": len(rows), "failed": bad, "out": args.out})
    return EXIT_OK if bad == 0 else EXIT_FAIL


def cmd_sweep_spheres(args) -> int:
    grid = parse_grid(args.grid)
    if any(len(g) != 1 for g in grid):
        raise UsageError("sweep-spheres needs a one-axis grid of ratios")
    rs = [Fraction(str(round(g[0], 12))) for g in grid]
    with open(args.out, "w") as fh:
        try:
            rows = sweep_spheres(args.dim, rs, args.degree, _cfg(args), fh, args.jobs)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    bad = sum(1 for r in rows if r[2] is None)
    _emit(args, f"wrote {len(rows)} rows to {args.out} ({bad} failed)", {"rows": len(rows), "failed": bad, "out": args.out})
    return EXIT_OK if bad == 0 else EXIT_FAIL


def cmd_export(args) -> int:
    if args.format != "sdpa":
        raise UsageError("only --format sdpa is supported")
    p = _build(args)
    with open(args.out, "w") as fh:
        export_sdpa(p, fh)
    _emit(args, f"wrote {args.out}: {p!r}", {"out": args.out, "blocks": len(p.blocks), "constraints": len(p.constraints)})
    return EXIT_OK


def cmd_certify(args) -> int:
    if args.kind == "ce":
        raise UsageError("certification covers cap and sphere instances")
    p = _build(args)
    if args.solution:
        with open(args.solution) as fh:
            sol = import_solution(fh, p, max(args.precision, 113))
    else:
        base = solve(p, _cfg(args))
        if base.status == "failed":
            print("solver failed", file=sys.stderr)
            return EXIT_FAIL
        sol = feasibility_recentre(p, base.objective, Fraction(args.eta), _cfg(args))
        sol.info["z_star"] = float(base.objective)
    cert = certify(None, sol, p, args.cert_precision)
    cert.dump(args.out)
    data = {"verdict": cert.verdict, "bound_lo": str(cert.bound.lo), "bound_hi": str(cert.bound.hi),
            "bound": float(cert.bound.hi), "out": args.out}
    _emit(args, f"{cert.summary()}\nwrote {args.out}", data)
    return EXIT_OK if cert.certified else EXIT_FAIL


def cmd_check(args) -> int:
    try:
        with open(args.certificate) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read certificate: {exc}") from exc
    res = check(data)
    if res.ok:
        _emit(args, f"certificate OK: bound <= {float(res.bound.hi):.10f} ({res.bound.hi})",
              {"ok": True, "bound_hi": str(res.bound.hi), "bound": float(res.bound.hi)})
        return EXIT_OK
    for f in res.failures:
        print(f"check failed: {f}", file=sys.stderr)
    _emit(args, "certificate REJECTED", {"ok": False, "failures": res.failures})
    return EXIT_FAIL


def read_graph(path: str) -> WeightedGraph:
    """Edge-list file: ``u v`` per edge, optional ``vertices N`` and ``weight v w`` lines, # comments."""
    edges, weights, n = [], {}, None
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] == "vertices" and len(tok) == 2:
                    n = int(tok[1])
                elif tok[0] == "weight" and len(tok) == 3:
                    weights[int(tok[1])] = Fraction(tok[2])
                elif len(tok) == 2:
                    edges.append((int(tok[0]), int(tok[1])))
                else:
                    raise ValueError("expected 'u v', 'vertices N' or 'weight v w'")
            except ValueError as exc:
                raise UsageError(f"{path}:{ln}: {exc}") from exc
    used = [v for e in edges for v in e] + list(weights)
    n = n if n is not None else (max(used) + 1 if used else 0)
    if n < 1:
        raise UsageError(f"{path}: empty graph")
    try:
        return WeightedGraph(n, edges, [weights.get(v, Fraction(1)) for v in range(n)])
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def cmd_theta(args) -> int:
    g = read_graph(args.graph)
    alpha = alpha_bruteforce(g)
    sol = solve(theta_prime_sdp(g), _cfg(args))
    theta = float(sol.objective)
    data = {"vertices": g.n, "edges": len(g.edges), "alpha": str(alpha), "theta_prime": theta, "status": sol.status}
    _emit(args, f"alpha = {alpha}\ntheta' = {theta:.10f}  (status {sol.status})", data)
    return EXIT_OK if sol.status in ("optimal", "feasible") else EXIT_FAIL


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(sp, solve_opts: bool = True):
    sp.add_argument("--precision", type=int, default=113, choices=(53, 113, 256), help="solver precision in bits")
    sp.add_argument("--json", action="store_true", help="print machine-readable JSON")
    if solve_opts:
        sp.add_argument("--solve", choices=("embedded", "export"), default="embedded")
        sp.add_argument("--out", help="output file (SDPA input with --solve export)")


def _cap_args(sp):
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--angles", required=True, help="comma separated, e.g. pi/5,3pi/10")
    sp.add_argument("--degree", type=int, required=True)


def _instance_args(sp):
    sp.add_argument("--kind", choices=("cap", "sphere", "ce"), required=True)
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--degree", type=int, required=True)
    sp.add_argument("--angles", help="cap angles (cap)")
    sp.add_argument("--ratio", help="radius ratio r for radii (r, 1) (sphere)")
    sp.add_argument("--table", default="builtin", help="builtin, empty, or an epsilon,U CSV file (ce)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="packbounds", description="SDP density bounds for multi-size packings")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("capbound", help="bound for spherical caps of several sizes")
    _cap_args(sp)
    _common(sp)
    sp.set_defaults(fn=cmd_capbound)

    sp = sub.add_parser("spherebound", help="bound for binary sphere packings in R^n (radii r and 1)")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--ratio", required=True)
    sp.add_argument("--degree", type=int, required=True)
    _common(sp)
    sp.set_defaults(fn=cmd_spherebound)

    sp = sub.add_parser("cebound", help="improved single-size bound from a tangency table")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--table", default="builtin", help="builtin, empty, or an epsilon,U CSV file")
    sp.add_argument("--degree", type=int, required=True)
    _common(sp)
    sp.set_defaults(fn=cmd_cebound)

    sp = sub.add_parser("sweep-caps", help="grid of two-cap bounds to CSV")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--degree", type=int, required=True)
    sp.add_argument("--grid", required=True, help="a1start:a1stop:a1step,a2start:a2stop:a2step")
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    _common(sp, solve_opts=False)
    sp.set_defaults(fn=cmd_sweep_caps)

    sp = sub.add_parser("sweep-spheres", help="grid of binary sphere bounds to CSV")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--degree", type=int, required=True)
    sp.add_argument("--grid", required=True, help="rstart:rstop:rstep")
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    _common(sp, solve_opts=False)
    sp.set_defaults(fn=cmd_sweep_spheres)

    sp = sub.add_parser("export", help="write an instance in SDPA sparse format")
    _instance_args(sp)
    sp.add_argument("--format", default="sdpa")
    sp.add_argument("--out", required=True)
    _common(sp, solve_opts=False)
    sp.set_defaults(fn=cmd_export)

    sp = sub.add_parser("certify", help="rigorous rational certificate for a cap or sphere bound")
    _instance_args(sp)
    sp.add_argument("--solution", help="SDPA-format solver output to certify (default: solve and recentre)")
    sp.add_argument("--eta", default="1/100000", help="objective slack for the recentre step")
    sp.add_argument("--cert-precision", type=int, default=256, help="bits for projection and rounding")
    sp.add_argument("--out", required=True)
    _common(sp, solve_opts=False)
    sp.set_defaults(fn=cmd_certify)

    sp = sub.add_parser("check", help="replay a certificate in exact arithmetic")
    sp.add_argument("certificate")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("theta", help="theta' of a weighted graph against brute force")
    sp.add_argument("--graph", required=True)
    _common(sp, solve_opts=False)
    sp.set_defaults(fn=cmd_theta)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if getattr(args, "kind", None) == "cap" and not args.angles:
            raise UsageError("--angles is required for cap instances")
        if getattr(args, "kind", None) == "sphere" and not args.ratio:
            raise UsageError("--ratio is required for sphere instances")
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, VerificationError, subprocess.CalledProcessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
