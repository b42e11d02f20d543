"""Command-line interface: direct, inverse, roundtrip, validate, kernel.

Exit codes: 0 success, 2 input schema violation, 3 root bracketing failure,
4 spectral-data validation failure, 5 positivity failure, 6 round-trip
metric above threshold.  Every nonzero exit prints a machine-readable
``{"error": ...}`` object naming the module and the violated condition.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .core import Grid, Potential, l1_distance, load_potential, save_potential
from .direct_spectra import (NormingData, SpectrumPair, asymptotic_residuals,
                             find_eigenvalues, norming_quadrature)
from .errors import (DiracSpectError, NonPositiveAlpha, NotPositive,
                     RootNotBracketed, StructureViolation)
from .glm_krein import (build_F, build_H, check_positivity, recover_potential,
                        solve_krein)
from .spectral_products import norming_from_two_spectra, validate_sd
from .transform_kernel import assemble_K, build_P_series

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_ROOT = 3
EXIT_VALIDATION = 4
EXIT_POSITIVITY = 5
EXIT_ROUNDTRIP = 6


def _fail(code: int, module: str, condition: str, detail: str = "") -> int:
    payload = {"error": {"module": module, "condition": condition,
                         "detail": detail}}
    print(json.dumps(payload, sort_keys=True))
    return code


def _write_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _resolve_threads(value: int) -> int:
    if value == 0:
        env = os.environ.get("DIRAC_SPECT_THREADS", "")
        if env.strip():
            try:
                value = int(env)
            except ValueError:
                value = 0
    if value <= 0:
        value = min(os.cpu_count() or 1, 8)
    return value


def _load_potential_checked(path):
    try:
        return load_potential(path), None
    except FileNotFoundError as exc:
        return None, _fail(EXIT_SCHEMA, "core", "input file missing", str(exc))
    except (json.JSONDecodeError, KeyError, ValueError, StructureViolation) as exc:
        return None, _fail(EXIT_SCHEMA, "core", "potential schema violation",
                           str(exc))


def _spectra_csv(sp: SpectrumPair, alpha, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["n", "lambda", "mu"] + (["alpha"] if alpha is not None else [])
        writer.writerow(header)
        for k, n in enumerate(sp.ns):
            row = [int(n), repr(float(sp.lam[k])), repr(float(sp.mu[k]))]
            if alpha is not None:
                row.append(repr(float(alpha[k])))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def run_direct(args) -> int:
    q, err = _load_potential_checked(args.input)
    if err is not None:
        return err
    n = args.index_range
    try:
        lam = find_eigenvalues(q, "A1", -n, n)
        mu = find_eigenvalues(q, "A2", -n, n)
    except RootNotBracketed as exc:
        return _fail(EXIT_ROOT, "direct_spectra", "root not bracketed", str(exc))
    sp = SpectrumPair(-n, n, lam, mu, q.p_exponent)
    out = sp.to_dict()
    alpha = None
    if args.norming:
        alpha = norming_quadrature(q, lam, -n).alpha
        out["alpha"] = alpha.tolist()

    lam_rep = asymptotic_residuals(lam, -n, "lambda")
    mu_rep = asymptotic_residuals(mu, -n, "mu")
    print(f"lambda remainders: outer-quartile max {lam_rep.outer_quartile_max:.3e}, "
          f"sum of squares {lam_rep.sum_squares:.3e}")
    print(f"mu remainders:     outer-quartile max {mu_rep.outer_quartile_max:.3e}, "
          f"sum of squares {mu_rep.sum_squares:.3e}")

    if args.format == "csv":
        if not args.output:
            return _fail(EXIT_SCHEMA, "cli", "csv output needs --output")
        _spectra_csv(sp, alpha, args.output)
    else:
        _write_json(out, args.output)
    return EXIT_OK


def _load_norming(args):
    """Norming data from a spectra file (via products) or a norming file."""
    with open(args.input) as fh:
        data = json.load(fh)
    if "alpha" in data and "mu" not in data:
        norming = NormingData.from_dict(data)
        if norming.n_min != -norming.n_max:
            raise ValueError("index range must be symmetric for reconstruction")
        report = None
    else:
        sp = SpectrumPair.from_dict(data)
        if sp.n_min != -sp.n_max:
            raise ValueError("index range must be symmetric for reconstruction")
        report = validate_sd(sp)
        if not report.passed:
            return None, report
        norming = norming_from_two_spectra(sp)
    return norming, report


def run_inverse(args) -> int:
    try:
        loaded = _load_norming(args)
    except FileNotFoundError as exc:
        return _fail(EXIT_SCHEMA, "cli", "input file missing", str(exc))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        return _fail(EXIT_SCHEMA, "cli", "spectra schema violation", str(exc))
    except NonPositiveAlpha as exc:
        return _fail(EXIT_VALIDATION, "spectral_products",
                     "non-positive norming constant", str(exc))
    norming, report = loaded
    if norming is None:
        detail = ("strict interlacing violated"
                  if not report.interlacing_ok else "remainder decay violated")
        if report.first_violation is not None:
            detail += f" at n={report.first_violation}"
        print(json.dumps({"validation": report.to_dict()}, sort_keys=True))
        return _fail(EXIT_VALIDATION, "spectral_products", detail)

    grid = Grid.uniform(args.cells)
    h_slice = build_H(norming, 2 * args.cells, cesaro=args.cesaro)
    f_kernel = build_F(h_slice, grid)
    pos = check_positivity(f_kernel)
    if not pos.passed:
        return _fail(EXIT_POSITIVITY, "glm_krein",
                     "discretized operator not positive",
                     f"min eigenvalue {pos.min_eigenvalue:.3e}, first failing "
                     f"block {pos.first_failing_block}")
    workers = _resolve_threads(args.threads)
    sol = solve_krein(h_slice, grid, levinson=args.levinson,
                      workers=workers if workers > 1 else None,
                      dense_trace=True)
    try:
        q_hat = recover_potential(sol)
    except StructureViolation as exc:
        return _fail(EXIT_VALIDATION, "glm_krein", "structure violation", str(exc))

    if args.h_profile:
        h_slice.to_csv(args.h_profile)
    save_potential(q_hat, args.output)
    report_obj = {
        "min_eigenvalue": pos.min_eigenvalue,
        "krein_residual": sol.residual_norm,
        "structure_defect": 0.0,
        "cells": args.cells,
        "cesaro": bool(args.cesaro),
        "nodes": q_hat.x.tolist(),
        "q1": q_hat.q1.tolist(),
        "q2": q_hat.q2.tolist(),
    }
    _write_json(report_obj, args.report)
    return EXIT_OK


def run_roundtrip(args) -> int:
    q, err = _load_potential_checked(args.input)
    if err is not None:
        return err
    n = args.index_range
    try:
        lam = find_eigenvalues(q, "A1", -n, n)
        mu = find_eigenvalues(q, "A2", -n, n)
    except RootNotBracketed as exc:
        return _fail(EXIT_ROOT, "direct_spectra", "root not bracketed", str(exc))
    sp = SpectrumPair(-n, n, lam, mu, q.p_exponent)
    report = validate_sd(sp)
    if not report.passed:
        return _fail(EXIT_VALIDATION, "spectral_products",
                     "computed spectra failed validation")
    alpha_in = norming_quadrature(q, lam, -n).alpha

    norming = norming_from_two_spectra(sp)
    grid = Grid.uniform(args.cells)
    h_slice = build_H(norming, 2 * args.cells, cesaro=args.cesaro)
    f_kernel = build_F(h_slice, grid)
    pos = check_positivity(f_kernel)
    if not pos.passed:
        return _fail(EXIT_POSITIVITY, "glm_krein",
                     "discretized operator not positive")
    workers = _resolve_threads(args.threads)
    sol = solve_krein(h_slice, grid, levinson=args.levinson,
                      workers=workers if workers > 1 else None,
                      dense_trace=True)
    q_hat = recover_potential(sol)

    # the recovered potential is sampled, so the closure legs run through the
    # one-step integrator; let the requested thresholds set its tolerance
    rtol_eig = min(max(1e-2 * args.lambda_tol, 1e-12), 5e-9)
    rtol_norm = min(max(1e-2 * args.alpha_tol, 1e-12), 1e-8)
    try:
        lam_out = find_eigenvalues(q_hat, "A1", -n, n, rtol_polish=rtol_eig)
    except RootNotBracketed as exc:
        return _fail(EXIT_ROOT, "direct_spectra",
                     "root not bracketed on recovered potential", str(exc))
    alpha_out = norming_quadrature(q_hat, lam_out, -n, rtol=rtol_norm).alpha

    l1_err = l1_distance(q, q_hat)
    l1_rel = l1_err / max(q.l1_norm, 1e-300) if q.l1_norm > 0 else l1_err
    lam_err = float(np.max(np.abs(lam - lam_out)))
    alpha_err = float(np.max(np.abs(alpha_in - alpha_out)))
    out = {
        "l1_error": l1_err,
        "l1_relative_error": l1_rel,
        "max_lambda_error": lam_err,
        "max_alpha_error": alpha_err,
        "min_eigenvalue": pos.min_eigenvalue,
        "krein_residual": sol.residual_norm,
        "thresholds": {"l1_relative": args.l1_tol, "lambda": args.lambda_tol,
                       "alpha": args.alpha_tol},
    }
    if args.potential_out:
        save_potential(q_hat, args.potential_out)
    _write_json(out, args.output)

    metric = l1_rel if q.l1_norm > 0 else l1_err
    if metric > args.l1_tol:
        return _fail(EXIT_ROUNDTRIP, "cli", "potential error above threshold",
                     f"relative L1 error {metric:.3e} > {args.l1_tol:.3e}")
    if lam_err > args.lambda_tol:
        return _fail(EXIT_ROUNDTRIP, "cli", "eigenvalue closure above threshold",
                     f"max |lambda_in - lambda_out| {lam_err:.3e} > "
                     f"{args.lambda_tol:.3e}")
    if alpha_err > args.alpha_tol:
        return _fail(EXIT_ROUNDTRIP, "cli",
                     "norming-constant closure above threshold",
                     f"max |alpha_in - alpha_out| {alpha_err:.3e} > "
                     f"{args.alpha_tol:.3e}")
    return EXIT_OK


def run_validate(args) -> int:
    try:
        sp = SpectrumPair.load(args.input)
    except FileNotFoundError as exc:
        return _fail(EXIT_SCHEMA, "cli", "input file missing", str(exc))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        return _fail(EXIT_SCHEMA, "cli", "spectra schema violation", str(exc))
    report = validate_sd(sp, residual_threshold=args.residual_threshold)
    _write_json(report.to_dict(), args.output)
    if not report.passed:
        detail = ("strict interlacing violated"
                  if not report.interlacing_ok else "remainder decay violated")
        if report.first_violation is not None:
            detail += f" at n={report.first_violation}"
        return _fail(EXIT_VALIDATION, "spectral_products", detail)
    return EXIT_OK


def run_kernel(args) -> int:
    q, err = _load_potential_checked(args.input)
    if err is not None:
        return err
    grid = Grid.uniform(args.cells)
    series = build_P_series(q, args.terms, grid)
    _, kernel = assemble_K(series.p_plus, series.p_minus)
    kernel.to_csv(args.output)
    report = {
        "gp_norm": kernel.gp_norm(q.p_exponent),
        "p": q.p_exponent,
        "terms": series.n_terms,
        "last_increment_gp": series.last_increment_gp,
    }
    _write_json(report, args.report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sub, *, cells=True, threads=True):
    if cells:
        sub.add_argument("-M", "--cells", type=int, default=256,
                         help="reconstruction grid cells (default 256)")
    if threads:
        sub.add_argument("--threads", type=int, default=0,
                         help="worker threads; 0 = auto / DIRAC_SPECT_THREADS")
    sub.add_argument("--tol", type=float, default=1e-6,
                     help="report threshold (default 1e-6)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dirac-spect",
        description="Direct and inverse spectral problems for 1D Dirac "
                    "operators with integrable potentials")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("direct", help="potential file -> two spectra")
    p.add_argument("input")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("-N", "--index-range", type=int, default=64)
    p.add_argument("--norming", action="store_true",
                   help="also compute norming constants by quadrature")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _add_common(p, cells=False)
    p.set_defaults(func=run_direct)

    for name, helptext in (("inverse", "two-spectra file -> potential"),
                           ("inverse-norming",
                            "eigenvalues + norming constants -> potential")):
        p = subs.add_parser(name, help=helptext)
        p.add_argument("input")
        p.add_argument("-o", "--output", required=True)
        p.add_argument("--report", default=None)
        p.add_argument("--h-profile", default=None,
                       help="write the H profile as CSV rows s,a,b")
        p.add_argument("--cesaro", action=argparse.BooleanOptionalAction,
                       default=True)
        p.add_argument("--levinson", action="store_true",
                       help="use the Toeplitz fast path for the slice solves")
        _add_common(p)
        p.set_defaults(func=run_inverse)

    p = subs.add_parser("roundtrip", help="direct -> inverse -> direct closure")
    p.add_argument("input")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--potential-out", default=None)
    p.add_argument("-N", "--index-range", type=int, default=64)
    p.add_argument("--cesaro", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--levinson", action="store_true")
    p.add_argument("--l1-tol", type=float, default=5e-2)
    p.add_argument("--lambda-tol", type=float, default=1e-3)
    p.add_argument("--alpha-tol", type=float, default=1e-2)
    _add_common(p)
    p.set_defaults(func=run_roundtrip)

    p = subs.add_parser("validate", help="admissibility checks on a spectra file")
    p.add_argument("input")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--residual-threshold", type=float, default=0.5)
    _add_common(p, cells=False, threads=False)
    p.set_defaults(func=run_validate)

    p = subs.add_parser("kernel", help="transform-kernel export for a potential")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True,
                   help="CSV destination for the kernel triangle")
    p.add_argument("--report", default=None)
    p.add_argument("--terms", type=int, default=12,
                   help="series truncation (default 12)")
    _add_common(p, threads=False)
    p.set_defaults(func=run_kernel)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DiracSpectError as exc:
        return _fail(EXIT_VALIDATION, "diracspect", type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
