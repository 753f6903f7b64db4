"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical failure (partial output is
still written where available).
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np
from scipy.optimize import linear_sum_assignment

from l96bif import export
from l96bif.continuation import (
    ContinuationError,
    ContinuationOptions,
    cascade_scan,
    continue_branch,
    expected_cascade,
)
from l96bif.equilibria import ConvergenceError, newton_solve
from l96bif.flow import (
    BURN_IN,
    WINDOW,
    IntegrationError,
    NoSectionCrossingError,
    attractor_orbit,
    gcd_symmetry_check,
    integrate,
    orbit_conjugacy,
    symmetry_scan,
)
from l96bif.model import ModelParams, jacobian, trivial_equilibrium
from l96bif.spectral import numerical_spectrum, trivial_spectrum

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2

log = logging.getLogger("l96bif")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dimension(text: str) -> int:
    n = int(text)
    if not 1 <= n <= 1024:
        raise argparse.ArgumentTypeError("n must lie in 1..1024")
    return n


def _finite(text: str) -> float:
    x = float(text)
    if not np.isfinite(x):
        raise argparse.ArgumentTypeError("value must be finite")
    return x


def _positive(text: str) -> float:
    x = _finite(text)
    if x <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return x


def _emit(args, text: str) -> None:
    export.write_text(text, args.out)


# ---------------------------------------------------------------------------
# commands


def cmd_eigen(args) -> int:
    params = ModelParams(args.n, args.f)
    closed = trivial_spectrum(params).eigenvalues
    numeric = numerical_spectrum(jacobian(trivial_equilibrium(params), params)).eigenvalues
    rows, cols = linear_sum_assignment(np.abs(closed[:, None] - numeric[None, :]))
    matched = numeric[cols[np.argsort(rows)]]
    discrepancy = float(np.max(np.abs(closed - matched)))
    if args.format == "json":
        doc = {
            "schema_version": export.SCHEMA_VERSION,
            "type": "eigen",
            "n": params.n,
            "F": params.F,
            "closed_form": [[float(z.real), float(z.imag)] for z in closed],
            "numerical": [[float(z.real), float(z.imag)] for z in matched],
            "max_discrepancy": discrepancy,
        }
        _emit(args, export.dump_json(doc))
    else:
        rows_out = [
            [j, float(a.real), float(a.imag), float(b.real), float(b.imag)]
            for j, (a, b) in enumerate(zip(closed, matched))
        ]
        _emit(args, export.to_csv(["j", "closed_re", "closed_im", "numerical_re", "numerical_im"], rows_out))
    print(f"max discrepancy {discrepancy:.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_continue(args) -> int:
    if args.f_from == args.f_to:
        raise UsageError("--f-from and --f-to must differ")
    opts = ContinuationOptions(corrector_tol=args.tol)
    params = ModelParams(args.n, args.f_from)
    seed = newton_solve(trivial_equilibrium(params), params, label=(0, 0))
    branch = continue_branch(seed, args.f_to, opts)
    if args.format == "json":
        _emit(args, export.dump_json(export.branch_to_dict(branch)))
    else:
        _emit(args, export.branch_to_csv(branch))
    for bp in branch.bifurcations:
        print(f"{bp.kind} at F = {bp.F_star:.10f}", file=sys.stderr)
    return EXIT_OK


def cmd_cascade(args) -> int:
    if args.n < 2:
        raise UsageError("cascade needs n >= 2")
    opts = ContinuationOptions(corrector_tol=args.tol)
    report = cascade_scan(args.n, args.floor, opts)
    if args.format == "json":
        _emit(args, export.dump_json(export.cascade_to_dict(report)))
    else:
        _emit(args, export.cascade_to_csv(report))
    q, total = expected_cascade(args.n)
    lines = [report.summary()]
    lines += [f"  F_PF,{l} = {F:.8f}" for l, F in enumerate(report.pf_values, start=1)]
    lines += [f"  r_{l} = {r:.5f}" for l, r in enumerate(report.ratios, start=3)]
    if (report.n_pitchforks, report.counts) != (q, total):
        lines.append(f"  expected {q} pitchforks and {total} equilibria")
    lines += [f"  failure: {msg}" for msg in report.failures]
    print("\n".join(lines), file=sys.stderr)
    return EXIT_NUMERICAL if report.failures else EXIT_OK


def _initial_state(args) -> np.ndarray:
    rng = np.random.default_rng(args.seed)
    return args.f + args.noise * rng.standard_normal(args.n)


def cmd_simulate(args) -> int:
    params = ModelParams(args.n, args.f)
    traj = integrate(_initial_state(args), params, args.t_end, dt=args.dt)
    if args.format == "json":
        _emit(args, export.dump_json(export.trajectory_to_dict(traj)))
    else:
        _emit(args, export.trajectory_to_csv(traj))
    return EXIT_OK


def cmd_orbit(args) -> int:
    params = ModelParams(args.n, args.f)
    orbit = attractor_orbit(_initial_state(args), params, burn_in=args.burn_in, window=args.window)
    if orbit is None:
        print("not periodic", file=sys.stderr)
        _emit(args, export.dump_json({"schema_version": export.SCHEMA_VERSION, "type": "not_periodic"}))
        return EXIT_OK
    doc = export.orbit_to_dict(orbit)
    conj = []
    for k in range(1, args.n):
        res = orbit_conjugacy(orbit, k, tol=args.tol)
        conj.append({"k": k, "identical": res.identical, "phase": res.phase, "distance": res.distance})
    doc["conjugacy"] = conj
    check = gcd_symmetry_check(orbit)
    doc["gcd_predicted_m"] = check.predicted_m
    _emit(args, export.dump_json(doc))
    print(
        f"period {orbit.period:.10f}, wave number {orbit.wave_number}, "
        f"block length {orbit.signature.m} (gcd rule predicts {check.predicted_m})",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_scan_symmetry(args) -> int:
    if args.steps < 2:
        raise UsageError("--steps must be at least 2")
    if args.f_from == args.f_to:
        raise UsageError("--f-from and --f-to must differ")
    grid = np.linspace(args.f_from, args.f_to, args.steps)
    rows = symmetry_scan(
        args.n, grid, seed=args.seed, burn_in=args.burn_in, window=args.window, tol=args.tol
    )
    _emit(args, export.scan_to_csv(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="l96bif", description="Bifurcation analysis of the Lorenz-96 model.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt=True):
        sp.add_argument("--n", type=_dimension, required=True, help="dimension")
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        if fmt:
            sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = sub.add_parser("eigen", help="spectrum of the trivial equilibrium")
    common(sp, fmt=False)
    sp.add_argument("--f", type=_finite, required=True, help="forcing F")
    sp.add_argument("--format", choices=("json", "csv"), default="csv")
    sp.set_defaults(func=cmd_eigen)

    sp = sub.add_parser("continue", help="continue the trivial branch in F")
    common(sp)
    sp.add_argument("--f-from", type=_finite, default=0.0)
    sp.add_argument("--f-to", type=_finite, required=True)
    sp.add_argument("--tol", type=_positive, default=1e-12, help="corrector tolerance")
    sp.set_defaults(func=cmd_continue)

    sp = sub.add_parser("cascade", help="pitchfork cascade down to a forcing floor")
    common(sp)
    sp.add_argument("--floor", type=_finite, default=-10.0, help="lowest forcing")
    sp.add_argument("--tol", type=_positive, default=1e-12, help="corrector tolerance")
    sp.set_defaults(func=cmd_cascade)

    def dynamics(sp):
        sp.add_argument("--f", type=_finite, required=True, help="forcing F")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--noise", type=_positive, default=1e-2, help="initial perturbation of x_F")

    sp = sub.add_parser("simulate", help="integrate from a perturbed x_F")
    common(sp)
    dynamics(sp)
    sp.add_argument("--t-end", type=_positive, default=100.0)
    sp.add_argument("--dt", type=_positive, default=0.05, help="output sampling interval")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("orbit", help="periodic attractor, wave number and shift conjugacy")
    common(sp, fmt=False)
    dynamics(sp)
    sp.add_argument("--burn-in", type=_positive, default=BURN_IN)
    sp.add_argument("--window", type=_positive, default=WINDOW)
    sp.add_argument("--tol", type=_positive, default=1e-4, help="orbit identity threshold")
    sp.set_defaults(func=cmd_orbit)

    sp = sub.add_parser("scan-symmetry", help="block length of the attractor along a forcing grid")
    common(sp, fmt=False)
    sp.add_argument("--f-from", type=_finite, required=True)
    sp.add_argument("--f-to", type=_finite, required=True)
    sp.add_argument("--steps", type=int, default=21)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--burn-in", type=_positive, default=BURN_IN)
    sp.add_argument("--window", type=_positive, default=WINDOW)
    sp.add_argument("--tol", type=_positive, default=1e-5, help="coordinate repetition tolerance")
    sp.set_defaults(func=cmd_scan_symmetry)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"l96bif: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"l96bif: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, ContinuationError, IntegrationError, NoSectionCrossingError) as exc:
        print(f"l96bif: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
