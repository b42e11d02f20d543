"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings.  The round-trip artifacts are shared through a
module-scoped fixture so the expensive reconstruction runs once.
"""

import json
import math
import time

import numpy as np
import pytest

from diracspect.cauchy import propagate
from diracspect.cli import main
from diracspect.core import Grid, Potential, l1_distance, load_potential, \
    save_potential
from diracspect.direct_spectra import (SpectrumPair, asymptotic_residuals,
                                       find_eigenvalues, norming_quadrature)
from diracspect.fourier_algebra import (fejer_sum, fourier_coeff,
                                        fourier_coeffs, circ_conv,
                                        sample_grid, wiener_invert)
from diracspect.glm_krein import (build_F, build_H, check_positivity,
                                  discrete_factorization, glm_residual,
                                  k_rows_from_krein, recover_potential,
                                  solve_glm, solve_krein)
from diracspect.spectral_products import norming_from_two_spectra, validate_sd
from diracspect.transform_kernel import apply_transform, assemble_K, \
    build_P_series


def report(criterion, passed, detail):
    tag = "PASS" if passed else "FAIL"
    print(f"[criterion {criterion}] {tag}: {detail}")


def constant_lambdas(c, n):
    ns = np.arange(-n, n + 1)
    return np.sign(ns + 0.5) * np.sqrt(c * c + np.pi ** 2 * (ns + 0.5) ** 2)


def constant_mus(c, n):
    ns = np.arange(-n, n + 1)
    return np.where(ns == 0, c,
                    np.sign(ns) * np.sqrt(c * c + np.pi ** 2 * ns ** 2))


ROUNDTRIP_POTENTIAL = Potential.piecewise([0.0, 0.5, 1.0], [1.0, 0.0],
                                          [0.5, 0.5])


@pytest.fixture(scope="module")
def rt():
    """Shared round-trip artifacts for criteria 5, 6, 7 and 9.

    The spectral series uses raw symmetric sums: the datum declares p = 2,
    where ordinary partial sums converge, and the triangular weighting would
    perturb the edge data beyond the eigenvalue-closure budget.
    """
    q = ROUNDTRIP_POTENTIAL
    out = {"q": q}
    grid = Grid.uniform(256)
    out["grid"] = grid
    for n in (64, 128):
        lam = find_eigenvalues(q, "A1", -n, n)
        mu = find_eigenvalues(q, "A2", -n, n)
        sp = SpectrumPair(-n, n, lam, mu, 2.0)
        norming = norming_from_two_spectra(sp)
        h_slice = build_H(norming, 512, cesaro=False)
        f_kernel = build_F(h_slice, grid)
        sol = solve_krein(h_slice, grid, dense_trace=True)
        q_hat = recover_potential(sol)
        out[n] = {
            "lam": lam, "mu": mu, "sp": sp, "norming": norming,
            "h": h_slice, "f": f_kernel, "sol": sol, "q_hat": q_hat,
            "alpha": norming_quadrature(q, lam, -n).alpha,
        }
    return out


def test_criterion_1_free_case_exactness(tmp_path):
    t0 = time.perf_counter()
    pot = tmp_path / "zero.json"
    save_potential(Potential.zero(), pot)
    spectra = tmp_path / "spectra.json"
    assert main(["direct", str(pot), "-o", str(spectra), "-N", "32",
                 "--norming"]) == 0
    data = json.loads(spectra.read_text())
    ns = np.arange(-32, 33)
    lam_err = np.max(np.abs(np.array(data["lambda"]) - np.pi * (ns + 0.5)))
    mu_err = np.max(np.abs(np.array(data["mu"]) - np.pi * ns))
    alpha_err = np.max(np.abs(np.array(data["alpha"]) - 1.0))

    q_out = tmp_path / "qhat.json"
    assert main(["inverse", str(spectra), "-o", str(q_out), "-M", "128"]) == 0
    q_norm = load_potential(q_out).l1_norm
    elapsed = time.perf_counter() - t0

    passed = (lam_err <= 1e-10 and mu_err <= 1e-10 and alpha_err <= 1e-10
              and q_norm <= 1e-8 and elapsed < 5.0)
    report(1, passed,
           f"lam {lam_err:.2e}, mu {mu_err:.2e}, alpha {alpha_err:.2e}, "
           f"|Q_hat|_L1 {q_norm:.2e}, {elapsed:.2f}s")
    assert lam_err <= 1e-10 and mu_err <= 1e-10 and alpha_err <= 1e-10
    assert q_norm <= 1e-8
    assert elapsed < 5.0


def test_criterion_2_constant_closed_form():
    t0 = time.perf_counter()
    q = Potential.constant(1.0)
    n = 64
    lam = find_eigenvalues(q, "A1", -n, n)
    mu = find_eigenvalues(q, "A2", -n, n)
    lam_err = np.max(np.abs(lam - constant_lambdas(1.0, n)))
    mu_err = np.max(np.abs(mu - constant_mus(1.0, n)))
    interlaced = all(lam[i - 1] < mu[i] < lam[i] for i in range(1, len(lam)))
    elapsed = time.perf_counter() - t0

    passed = lam_err <= 1e-8 and mu_err <= 1e-8 and interlaced and elapsed < 30
    report(2, passed, f"lam {lam_err:.2e}, mu {mu_err:.2e}, "
                      f"interlacing {interlaced}, {elapsed:.2f}s")
    assert lam_err <= 1e-8 and mu_err <= 1e-8
    assert interlaced
    assert elapsed < 30.0


def test_criterion_3_norming_cross_route():
    t0 = time.perf_counter()
    q = Potential.constant(1.0)
    lam32 = find_eigenvalues(q, "A1", -32, 32)
    quad = norming_quadrature(q, lam32, -32)

    n_tail = 2048
    lam = constant_lambdas(1.0, n_tail)
    mu = constant_mus(1.0, n_tail)
    # the closed-form spectra agree with the located roots on the overlap
    assert np.max(np.abs(lam[n_tail - 32: n_tail + 33] - lam32)) < 1e-9
    sp = SpectrumPair(-n_tail, n_tail, lam, mu, 2.0)
    prod = norming_from_two_spectra(sp)
    prod_alpha = prod.alpha[n_tail - 32: n_tail + 33]
    rel = float(np.max(np.abs(prod_alpha - quad.alpha) / np.abs(quad.alpha)))
    elapsed = time.perf_counter() - t0

    passed = rel <= 1e-4 and elapsed < 120
    report(3, passed, f"max relative difference {rel:.3e}, {elapsed:.1f}s")
    assert rel <= 1e-4
    assert elapsed < 120.0


def test_criterion_4_transmutation_identity():
    t0 = time.perf_counter()
    xs = np.linspace(0, 1, 513)
    q = Potential.sampled(xs, np.sin(2 * np.pi * xs), 0.3 * np.ones(513))
    grid = Grid.uniform(512)
    series = build_P_series(q, 8, grid)
    _, kernel = assemble_K(series.p_plus, series.p_minus)
    worst = 0.0
    for lam in (0.0, math.pi, -math.pi, 5.3):
        c_kernel = apply_transform(kernel, lam)
        c_ode = propagate(q, lam, grid, rtol=1e-11).c
        worst = max(worst, float(np.max(np.abs(c_kernel - c_ode))))
    elapsed = time.perf_counter() - t0

    passed = worst <= 1e-4 and elapsed < 60
    report(4, passed, f"max transmutation residual {worst:.3e}, {elapsed:.1f}s")
    assert worst <= 1e-4
    assert elapsed < 60.0


def test_criterion_5_roundtrip_reconstruction(rt, tmp_path):
    t0 = time.perf_counter()
    pot = tmp_path / "rt.json"
    save_potential(ROUNDTRIP_POTENTIAL, pot)
    report_path = tmp_path / "report.json"
    code = main(["roundtrip", str(pot), "-o", str(report_path), "-N", "64",
                 "-M", "256", "--no-cesaro", "--alpha-tol", "5e-2"])
    data = json.loads(report_path.read_text())
    l1_rel = data["l1_relative_error"]
    lam_err = data["max_lambda_error"]

    # doubling the index range strictly reduces the potential error
    l1_64 = l1_distance(ROUNDTRIP_POTENTIAL, rt[64]["q_hat"]) \
        / ROUNDTRIP_POTENTIAL.l1_norm
    l1_128 = l1_distance(ROUNDTRIP_POTENTIAL, rt[128]["q_hat"]) \
        / ROUNDTRIP_POTENTIAL.l1_norm
    elapsed = time.perf_counter() - t0

    passed = (code == 0 and l1_rel <= 5e-2 and lam_err <= 1e-3
              and l1_128 < l1_64 and elapsed < 300)
    report(5, passed,
           f"rel L1 {l1_rel:.4f}, max |dlam| {lam_err:.2e}, "
           f"L1(N=128) {l1_128:.4f} < L1(N=64) {l1_64:.4f}, {elapsed:.1f}s")
    assert code == 0
    assert l1_rel <= 5e-2
    assert lam_err <= 1e-3
    assert l1_128 < l1_64
    assert elapsed < 300.0


def test_criterion_6_positivity_certification(rt, tmp_path):
    # every valid datum of criteria 1-5 certifies positive
    grid128 = Grid.uniform(128)
    checks = {}
    free = np.arange(-32, 33)
    free_nd = norming_from_two_spectra(
        SpectrumPair(-32, 32, np.pi * (free + 0.5), np.pi * free, 2.0))
    checks["free N=32"] = check_positivity(
        build_F(build_H(free_nd, 256), grid128))
    const_nd = norming_from_two_spectra(
        SpectrumPair(-64, 64, constant_lambdas(1.0, 64),
                     constant_mus(1.0, 64), 2.0))
    checks["constant N=64"] = check_positivity(
        build_F(build_H(const_nd, 256), grid128))
    checks["roundtrip N=64"] = check_positivity(rt[64]["f"])
    checks["roundtrip N=128"] = check_positivity(rt[128]["f"])
    all_pos = all(rep.passed and rep.min_eigenvalue > 0
                  for rep in checks.values())

    # the constructed interlacing violation is rejected before any solve
    ns = np.arange(-16, 17)
    mu = np.pi * ns.astype(float)
    mu[17] = np.pi + 2.0
    bad = tmp_path / "bad.json"
    SpectrumPair(-16, 16, np.pi * (ns + 0.5), mu, 2.0).save(bad)
    q_out = tmp_path / "q.json"
    code = main(["inverse", str(bad), "-o", str(q_out), "-M", "64"])
    rejected = code == 4 and not q_out.exists()

    passed = all_pos and rejected
    eigs = ", ".join(f"{k}: {v.min_eigenvalue:.3f}" for k, v in checks.items())
    report(6, passed, f"min eigenvalues [{eigs}], violation exit 4 "
                      f"before solve: {rejected}")
    assert all_pos
    assert rejected


def test_criterion_7_glm_krein_consistency(rt):
    grid = rt["grid"]
    f_kernel = rt[64]["f"]
    krows = k_rows_from_krein(rt[64]["sol"])
    residual = glm_residual(krows, f_kernel, grid)

    glm = solve_glm(f_kernel, grid)
    fact = discrete_factorization(f_kernel, grid)
    mismatch = float(np.max(np.abs(fact.k_plus_rows - glm.rows)))

    passed = residual <= 1e-3 and mismatch <= 1e-6
    report(7, passed, f"triangular-equation residual of K-from-R~ "
                      f"{residual:.3e}, factor mismatch {mismatch:.3e}")
    assert residual <= 1e-3
    assert mismatch <= 1e-6


def test_criterion_8_fourier_algebra_laws():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    xs = sample_grid(512)
    # coefficient homomorphism on degree <= 8 trig polynomials
    worst_hom = 0.0
    for _ in range(3):
        cf = rng.uniform(-1, 1, 8)
        cg = rng.uniform(-1, 1, 8)
        f = sum(c * np.cos(2 * np.pi * (k + 1) * xs) for k, c in enumerate(cf))
        g = sum(c * np.sin(2 * np.pi * (k + 1) * xs) for k, c in enumerate(cg))
        conv = circ_conv(f, g)
        for n in range(-8, 9):
            lhs = fourier_coeff(conv, n)
            rhs = fourier_coeff(f, n) * fourier_coeff(g, n)
            worst_hom = max(worst_hom, abs(lhs - rhs))

    res = wiener_invert(0.3 * np.cos(2 * np.pi * xs), n_check=64)

    count = 4096
    grid = sample_grid(count)
    step = (grid < 0.5).astype(float)
    step[0] = 0.5
    step[count // 2] = 0.5
    errs = []
    norms = []
    f_l1 = float(np.mean(np.abs(step)))
    for n in (16, 32, 64, 128):
        sigma = fejer_sum(fourier_coeffs(step, -n, n), grid)
        errs.append(float(np.mean(np.abs(sigma - step))))
        norms.append(float(np.mean(np.abs(sigma))))
    monotone = all(a > b for a, b in zip(errs, errs[1:]))
    contracting = all(v <= f_l1 + 1e-12 for v in norms)
    elapsed = time.perf_counter() - t0

    passed = (worst_hom <= 1e-10 and res.residual <= 1e-8 and monotone
              and contracting and elapsed < 10)
    report(8, passed,
           f"homomorphism {worst_hom:.2e}, inversion residual "
           f"{res.residual:.2e}, Fejer L1 errors {['%.4f' % e for e in errs]}, "
           f"{elapsed:.2f}s")
    assert worst_hom <= 1e-10
    assert res.residual <= 1e-8
    assert monotone and contracting
    assert elapsed < 10.0


def test_criterion_9_asymptotic_remainders(rt):
    q = ROUNDTRIP_POTENTIAL
    stats = {}
    for n in (64, 128):
        lam_rep = asymptotic_residuals(rt[n]["lam"], -n, "lambda")
        mu_rep = asymptotic_residuals(rt[n]["mu"], -n, "mu")
        alpha_rep = asymptotic_residuals(rt[n]["alpha"], -n, "alpha")
        stats[n] = (lam_rep, mu_rep, alpha_rep)
    quartiles = [rep.outer_quartile_max for rep in stats[64]]
    quartile_ok = all(vq <= 0.1 for vq in quartiles)
    drifts = []
    for k in range(3):
        s64 = stats[64][k].sum_squares
        s128 = stats[128][k].sum_squares
        drifts.append(abs(s128 - s64) / s64)
    stable = all(d <= 0.05 for d in drifts)

    passed = quartile_ok and stable
    report(9, passed,
           f"outer-quartile maxima {['%.3e' % vq for vq in quartiles]}, "
           f"sum-of-squares drift {['%.3f' % d for d in drifts]}")
    assert quartile_ok
    assert stable
