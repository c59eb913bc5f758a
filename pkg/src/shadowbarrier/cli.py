"""Command-line front end.

Exit codes: 0 success or passed verification, 1 failed verification,
2 usage or domain error (malformed input, infeasible problem).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .dilation import dilate
from .measures import MeasureError, POTENTIAL_TOL
from .montecarlo import (
    convergence_sweep,
    default_tol,
    simulate,
    verify_embedding,
    verify_shadow_residual,
)
from .shadows import ShadowInfeasibleError, left_curtain, shadow, shadow_lp_oracle
from .solvers import (
    EmbeddingError,
    GridSpec,
    TimeChangeSpec,
    interpolate_solve,
    lm_solve,
    multi_marginal_lm,
    root_plan,
    root_solve,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--tol", type=float, default=None, help="verification or potential tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-h", type=float, default=0.05, help="lattice step (time step is its square)")
    p.add_argument("--grid-span", type=float, default=None, help="margin around the supports (default 2 sd)")
    p.add_argument("--horizon", type=float, default=None, help="time cap of scheme runs and simulations")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--plot", default=None, metavar="OUT.svg")
    p.add_argument("--out", default=None, help="main output file (default stdout)")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="shadowbarrier", description=__doc__.split("\n")[0], parents=[common])
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("shadow", parents=[common], help="shadow of eta in nu")
    p.add_argument("--eta", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--oracle", action="store_true", help="also solve the linear program and compare")
    p.add_argument("--report", default=None)

    p = sub.add_parser("curtain", parents=[common], help="left-curtain coupling")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)

    p = sub.add_parser("dilate", parents=[common], help="two-point dilation of a measure")
    p.add_argument("--m", required=True)
    p.add_argument("--set", dest="F", required=True)

    p = sub.add_parser("root", parents=[common], help="Root barrier on the lattice")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--barrier-out", default=None)
    p.add_argument("--surface-out", default=None)
    p.add_argument("--surface-every", type=int, default=1)

    p = sub.add_parser("lm", parents=[common], help="left-monotone solution")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)

    p = sub.add_parser("interpolate", parents=[common], help="Root up to lambda, then left-monotone")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--barrier-out", default=None)

    p = sub.add_parser("multi", parents=[common], help="left-monotone couplings for a chain of targets")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", nargs="+", required=True)

    for name in ("simulate", "verify"):
        p = sub.add_parser(name, parents=[common], help=f"{name} barrier stopping on random-walk paths")
        p.add_argument("--pipeline", choices=("root", "lm", "interpolated"), default="root")
        p.add_argument("--mu", required=name == "simulate")
        p.add_argument("--nu", default=None)
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)
        p.add_argument("--barrier", default=None, help="barrier CSV to simulate instead of solving")
        p.add_argument("--paths", type=int, default=100_000)
        p.add_argument("--levels", type=float, nargs="*", default=None)
        p.add_argument("--workers", type=int, default=1)
        if name == "verify":
            p.add_argument("--samples", default=None, help="samples CSV written by 'simulate'")

    p = sub.add_parser("sweep", parents=[common], help="distances of interpolated couplings")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--lambdas", type=float, nargs="+", required=True, help="'inf' means the Root horizon")
    p.add_argument("--paths", type=int, default=0)
    return parser


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _grid(args, *ms):
    return GridSpec.covering(*ms, h=args.grid_h, span=args.grid_span, horizon=args.horizon)


def _measure_text(m, fmt):
    return sio.write_measure(m, fmt=fmt)


def cmd_shadow(args):
    eta, nu = sio.read_measure(args.eta), sio.read_measure(args.nu)
    tol = POTENTIAL_TOL if args.tol is None else args.tol
    S = shadow(eta, nu, tol=tol)
    _emit(_measure_text(S, args.format), args.out)
    if args.oracle or args.report:
        from .measures import max_atom_discrepancy
        from .report import Report

        rep = Report("shadow")
        rep.data["shadow"] = sio.measure_to_dict(S)
        if args.oracle:
            rep.check("oracle_discrepancy", max_atom_discrepancy(S, shadow_lp_oracle(eta, nu)), 1e-8)
        if args.report:
            Path(args.report).write_text(rep.to_json(indent=1))
        else:
            print(rep.summary(), file=sys.stderr)
        if not rep.passed:
            return EXIT_FAIL
    if args.plot:
        from .plotting import plot_potentials

        plot_potentials(args.plot, {"eta": eta, "nu": nu, "shadow": S})
    return EXIT_OK


def cmd_curtain(args):
    mu, nu = sio.read_measure(args.mu), sio.read_measure(args.nu)
    c = left_curtain(mu, nu)
    _emit(sio.write_coupling(c), args.out)
    if args.plot:
        from .plotting import plot_coupling

        plot_coupling(args.plot, c)
    return EXIT_OK


def cmd_dilate(args):
    m, F = sio.read_measure(args.m), sio.read_closed_set(args.F)
    _emit(_measure_text(dilate(m, F), args.format), args.out)
    return EXIT_OK


def cmd_root(args):
    mu, nu = sio.read_measure(args.mu), sio.read_measure(args.nu)
    grid = _grid(args, mu, nu)
    surface, barrier = root_solve(mu, nu, grid, keep_surface=bool(args.surface_out))
    if args.barrier_out:
        sio.write_barrier(barrier, args.barrier_out)
    if args.surface_out:
        sio.write_surface(surface, args.surface_out, every=args.surface_every)
    summary = {
        "format_version": 1,
        "grid": grid.to_dict(),
        "levels_run": surface.n_levels,
        "mean_stopping_time": surface.mean_stopping_time(),
        "variance_gap": nu.variance - mu.variance,
        "unstopped_mass": float(surface.alive_mass[-1]),
        "invariant_defects": surface.invariant_defects(),
    }
    _emit(json.dumps(summary, indent=1) + "\n", args.out)
    if args.plot:
        from .plotting import plot_barrier

        plot_barrier(args.plot, barrier)
    return EXIT_OK


def cmd_lm(args):
    mu, nu = sio.read_measure(args.mu), sio.read_measure(args.nu)
    coupling, _ = lm_solve(mu, nu)
    _emit(sio.write_coupling(coupling), args.out)
    if args.plot:
        from .plotting import plot_coupling

        plot_coupling(args.plot, coupling)
    return EXIT_OK


def cmd_interpolate(args):
    mu, nu = sio.read_measure(args.mu), sio.read_measure(args.nu)
    it = interpolate_solve(mu, nu, args.lam, _grid(args, mu, nu), build_plan=False)
    _emit(sio.write_coupling(it.coupling), args.out)
    print(f"lambda snapped to {it.lam:.6g} (level {it.level})", file=sys.stderr)
    if args.barrier_out:
        sio.write_barrier(it.barrier, args.barrier_out)
    if args.plot:
        from .plotting import plot_coupling

        plot_coupling(args.plot, it.coupling)
    return EXIT_OK


def cmd_multi(args):
    mu = sio.read_measure(args.mu)
    nus = [sio.read_measure(p) for p in args.nu]
    couplings = multi_marginal_lm(mu, nus)
    if args.out:
        stem = Path(args.out)
        for i, c in enumerate(couplings, start=1):
            sio.write_coupling(c, stem.with_name(f"{stem.stem}_stage{i}{stem.suffix or '.csv'}"))
    else:
        for i, c in enumerate(couplings, start=1):
            sys.stdout.write(f"# stage {i}\n" + sio.write_coupling(c))
    return EXIT_OK


def _default_levels(spec: TimeChangeSpec, mu):
    if spec.variant == "root":
        return [0.0, 0.25, 0.5, 1.0, 2.0]
    if spec.variant == "lm":
        return [float(np.exp(-x)) for x in mu.atoms]
    return [0.0, spec.lam / 2, spec.lam] + [spec.lam + float(np.exp(-x)) for x in (-1.0, 0.0, 1.0)]


def _pipeline(args, mu, nu):
    grid = _grid(args, mu, nu)
    if args.barrier:
        return root_plan(sio.read_barrier(args.barrier))
    if nu is None:
        raise sio.InputError("--nu is required unless --barrier is given")
    if args.pipeline == "root":
        _, barrier = root_solve(mu, nu, grid, keep_surface=False)
        return root_plan(barrier)
    if args.pipeline == "lm":
        return lm_solve(mu, nu, grid)[1]
    return interpolate_solve(mu, nu, args.lam, grid).plan


def _simulate(args):
    mu = sio.read_measure(args.mu)
    nu = sio.read_measure(args.nu) if args.nu else None
    plan = _pipeline(args, mu, nu)
    levels = args.levels if args.levels is not None else _default_levels(plan.spec, mu)
    return mu, nu, simulate(plan, mu, args.paths, args.seed, levels, workers=args.workers)


def cmd_simulate(args):
    _, _, samples = _simulate(args)
    _emit(sio.write_samples(samples), args.out)
    return EXIT_OK


def cmd_verify(args):
    if args.samples:
        samples = sio.read_samples(args.samples)
        if not (args.mu and args.nu):
            raise sio.InputError("--mu and --nu are required to verify a samples file")
        mu, nu = sio.read_measure(args.mu), sio.read_measure(args.nu)
    else:
        if not (args.mu and args.nu):
            raise sio.InputError("--mu and --nu are required for an end-to-end verification")
        mu, nu, samples = _simulate(args)
    tol = args.tol if args.tol is not None else default_tol(len(samples), samples.grid.h)
    resid = verify_shadow_residual(samples, None, nu, tol=tol)
    emb = verify_embedding(samples, mu, nu, tol=tol)
    out = {"format_version": 1, "passed": resid.passed and emb.passed,
           "shadow_residual": resid.to_dict(), "embedding": emb.to_dict()}
    _emit(json.dumps(out, indent=1) + "\n", args.out)
    print(resid.summary(), file=sys.stderr)
    print(emb.summary(), file=sys.stderr)
    return EXIT_OK if out["passed"] else EXIT_FAIL


def cmd_sweep(args):
    mu, nu = sio.read_measure(args.mu), sio.read_measure(args.nu)
    rep = convergence_sweep(mu, nu, args.lambdas, _grid(args, mu, nu), args.paths, args.seed)
    _emit(rep.to_json(indent=1) + "\n", args.out)
    print(rep.summary(), file=sys.stderr)
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(args.plot, rep.data["rows"])
    return EXIT_OK if rep.passed else EXIT_FAIL


COMMANDS = {
    "shadow": cmd_shadow,
    "curtain": cmd_curtain,
    "dilate": cmd_dilate,
    "root": cmd_root,
    "lm": cmd_lm,
    "interpolate": cmd_interpolate,
    "multi": cmd_multi,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (sio.InputError, MeasureError, ShadowInfeasibleError, EmbeddingError, FileNotFoundError) as err:
        print(f"shadowbarrier {args.cmd}: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
