"""Characteristic functions rebuilt from their zeros, and what they determine.

Given the zero sequences over a symmetric index range |n| <= N, the
tail-renormalized products

    phi(lam) ~ cos(lam) * prod_{|n|<=N} (lam_n - lam) / (pi(n+1/2) - lam)
    psi(lam) ~ sin(lam) * (lam - mu_0)/lam * prod_{1<=|n|<=N} (mu_n - lam)/(pi n - lam)

are exact whenever the data beyond N coincide with the free positions and
otherwise converge as the remainders decay.  Factors whose denominator
vanishes are paired with the zero of the leading trig factor through the
first-order limit, which keeps every evaluation finite.  The norming
constants follow from alpha_n = -1 / (phi'(lam_n) psi(lam_n)).
"""

import math
from dataclasses import dataclass

import numpy as np

from .direct_spectra import NormingData, ResidualReport, SpectrumPair, \
    asymptotic_residuals
from .errors import NonPositiveAlpha

__all__ = ["eval_phi", "eval_psi", "phi_dot_at_zero", "norming_from_two_spectra",
           "validate_sd", "SdValidation", "EPS_PAIR"]

EPS_PAIR = 1e-6
_CHUNK = 256


def _sindc(x):
    """sin(x)/x with the removable singularity filled in."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    out = np.empty_like(x)
    xs = x[small]
    out[small] = 1.0 - xs * xs / 6.0
    xl = x[~small]
    out[~small] = np.sin(xl) / xl
    return out if out.ndim else float(out)


def _check_symmetric(n_min: int, n_max: int):
    if n_min != -n_max:
        raise ValueError(
            "product evaluation needs a symmetric index range [-N, N]; "
            f"got [{n_min}, {n_max}]")


# ---------------------------------------------------------------------------
# phi from its zeros
# ---------------------------------------------------------------------------

def eval_phi(zeros, lam, *, n_min: int | None = None,
             eps_pair: float = EPS_PAIR):
    """Tail-renormalized product for phi at real lam (scalar or array).

    ``zeros`` holds lam_n for n in [n_min, n_min + len - 1]; by default the
    range is assumed symmetric.  Factors with |pi(m+1/2) - lam| < eps_pair
    are paired with the cosine zero via cos(lam)/(pi(m+1/2) - lam) ->
    (-1)^m sin(d)/d, d = lam - pi(m+1/2).
    """
    zeros = np.asarray(zeros, dtype=float)
    if n_min is None:
        _n = (len(zeros) - 1) // 2
        n_min = -_n
    n_max = n_min + len(zeros) - 1
    free = math.pi * (np.arange(n_min, n_max + 1) + 0.5)

    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.empty(lam_arr.shape)
    for start in range(0, len(lam_arr), _CHUNK):
        sl = slice(start, min(start + _CHUNK, len(lam_arr)))
        chunk = lam_arr[sl]
        mstar = np.round(chunk / math.pi - 0.5).astype(int)
        delta = chunk - math.pi * (mstar + 0.5)
        paired = (np.abs(delta) < eps_pair) & (mstar >= n_min) & (mstar <= n_max)

        num = zeros[None, :] - chunk[:, None]
        den = free[None, :] - chunk[:, None]
        pref = np.cos(chunk)
        if np.any(paired):
            rows = np.nonzero(paired)[0]
            cols = mstar[rows] - n_min
            den[rows, cols] = 1.0
            pref[rows] = np.where(cols % 2 == 0, 1.0, -1.0) * (-1.0) ** n_min \
                * _sindc(delta[rows])
        out[sl] = pref * np.prod(num / den, axis=1)
    return out if np.ndim(lam) else float(out[0])


def phi_dot_at_zero(zeros, k: int, *, n_min: int | None = None,
                    eps_pair: float = EPS_PAIR) -> float:
    """Derivative of the product form of phi at its stored zero lam_k.

    Differentiating the factored form at a simple zero leaves
    -[cos(lam)/(pi(k+1/2) - lam)] * prod_{n != k} (lam_n - lam)/(pi(n+1/2) - lam)
    evaluated at lam = lam_k, with the same pairing rule for denominators
    within eps_pair of lam_k.
    """
    zeros = np.asarray(zeros, dtype=float)
    if n_min is None:
        n_min = -((len(zeros) - 1) // 2)
    n_max = n_min + len(zeros) - 1
    if not n_min <= k <= n_max:
        raise IndexError(f"zero index {k} outside [{n_min}, {n_max}]")
    free = math.pi * (np.arange(n_min, n_max + 1) + 0.5)
    lam = float(zeros[k - n_min])

    mstar = int(round(lam / math.pi - 0.5))
    delta = lam - math.pi * (mstar + 0.5)
    num = zeros - lam
    den = free - lam
    kcol = k - n_min
    if abs(delta) < eps_pair and mstar == k:
        pref = (-1.0) ** mstar * _sindc(delta)
        num[kcol] = 1.0
        den[kcol] = 1.0
    elif abs(delta) < eps_pair and n_min <= mstar <= n_max:
        # the cosine zero pairs with a different factor's denominator
        mcol = mstar - n_min
        pref = (-1.0) ** mstar * _sindc(delta) * num[mcol] / den[kcol]
        num[mcol] = 1.0
        den[mcol] = 1.0
        num[kcol] = 1.0
        den[kcol] = 1.0
    else:
        pref = math.cos(lam) / den[kcol]
        num[kcol] = 1.0
        den[kcol] = 1.0
    return float(-pref * np.prod(num / den))


def _phi_dots_all(zeros, n_min: int, eps_pair: float) -> np.ndarray:
    """phi'(lam_k) for every stored zero; vectorized common case."""
    zeros = np.asarray(zeros, dtype=float)
    n_max = n_min + len(zeros) - 1
    free = math.pi * (np.arange(n_min, n_max + 1) + 0.5)
    out = np.empty(len(zeros))
    cols = np.arange(len(zeros))
    mstar = np.round(zeros / math.pi - 0.5).astype(int)
    regular = mstar == np.arange(n_min, n_max + 1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for start in range(0, len(zeros), _CHUNK):
            sl = slice(start, min(start + _CHUNK, len(zeros)))
            lam = zeros[sl]
            num = zeros[None, :] - lam[:, None]
            den = free[None, :] - lam[:, None]
            kcols = cols[sl]
            rows = np.arange(len(lam))
            delta = lam - free[sl]
            own_den = den[rows, kcols].copy()
            num[rows, kcols] = 1.0
            den[rows, kcols] = 1.0
            prod = np.prod(num / den, axis=1)
            signs = np.where((np.arange(n_min, n_max + 1)[sl]) % 2 == 0, 1.0, -1.0)
            pref = np.where(np.abs(delta) < eps_pair,
                            signs * _sindc(delta),
                            np.cos(lam) / np.where(np.abs(own_den) < 1e-300, 1.0,
                                                   own_den))
            out[sl] = -pref * prod
    # indices whose nearest free zero is not their own get the careful path
    for kcol in np.nonzero(~regular)[0]:
        out[kcol] = phi_dot_at_zero(zeros, n_min + int(kcol), n_min=n_min,
                                    eps_pair=eps_pair)
    return out


# ---------------------------------------------------------------------------
# psi from its zeros
# ---------------------------------------------------------------------------

def eval_psi(mu_zeros, lam, *, n_min: int | None = None,
             eps_pair: float = EPS_PAIR):
    """Tail-renormalized product for psi at real lam (scalar or array).

    The display keeps the leading factor (lam - mu_0) while the remaining
    factors read (mu_n - lam)/(pi n - lam); the lam -> 0 singularity is the
    sine zero and is removed by sin(lam)/lam, other near-zero denominators
    pair with sin(lam) in the same first-order way.
    """
    mu_zeros = np.asarray(mu_zeros, dtype=float)
    if n_min is None:
        n_min = -((len(mu_zeros) - 1) // 2)
    n_max = n_min + len(mu_zeros) - 1
    if not n_min <= 0 <= n_max:
        raise ValueError("psi product needs the index 0 in range")
    ns = np.arange(n_min, n_max + 1)
    free = math.pi * ns
    zcol = -n_min
    mu0 = float(mu_zeros[zcol])

    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.empty(lam_arr.shape)
    for start in range(0, len(lam_arr), _CHUNK):
        sl = slice(start, min(start + _CHUNK, len(lam_arr)))
        chunk = lam_arr[sl]
        mstar = np.round(chunk / math.pi).astype(int)
        delta = chunk - math.pi * mstar

        num = mu_zeros[None, :] - chunk[:, None]
        den = free[None, :] - chunk[:, None]
        # the n = 0 column is replaced by the explicit (lam - mu_0)/lam factor
        num[:, zcol] = 1.0
        den[:, zcol] = 1.0

        pref = np.empty(len(chunk))
        near = np.abs(delta) < eps_pair
        at_zero = near & (mstar == 0)
        at_other = near & (mstar != 0) & (mstar >= n_min) & (mstar <= n_max)
        plain = ~(at_zero | at_other)

        pref[plain] = np.sin(chunk[plain]) * (chunk[plain] - mu0) / chunk[plain]
        if np.any(at_zero):
            pref[at_zero] = _sindc(chunk[at_zero]) * (chunk[at_zero] - mu0)
        if np.any(at_other):
            rows = np.nonzero(at_other)[0]
            mcols = mstar[rows] - n_min
            signs = np.where(mstar[rows] % 2 == 0, 1.0, -1.0)
            pref[rows] = (-signs) * _sindc(delta[rows]) * num[rows, mcols] \
                * (chunk[rows] - mu0) / chunk[rows]
            num[rows, mcols] = 1.0
            den[rows, mcols] = 1.0
        out[sl] = pref * np.prod(num / den, axis=1)
    return out if np.ndim(lam) else float(out[0])


# ---------------------------------------------------------------------------
# norming constants from two spectra, admissibility validation
# ---------------------------------------------------------------------------

def norming_from_two_spectra(sp: SpectrumPair, *, n_tail: int | None = None,
                             eps_pair: float = EPS_PAIR) -> NormingData:
    """alpha_n = -1 / (phi'(lam_n) psi(lam_n)) through the product evaluators.

    Interlacing data always yield positive values; a non-positive one aborts
    with the offending index since it signals a corrupted enumeration.
    ``n_tail`` truncates the factor range symmetrically (default: use all).
    """
    _check_symmetric(sp.n_min, sp.n_max)
    n = sp.n_max
    if n_tail is not None and n_tail < n:
        lo, hi = n - n_tail, n + n_tail + 1
        lam_z = sp.lam[lo:hi]
        mu_z = sp.mu[lo:hi]
        n_eff = n_tail
    else:
        lam_z, mu_z, n_eff = sp.lam, sp.mu, n

    dphi = _phi_dots_all(lam_z, -n_eff, eps_pair)
    psi = eval_psi(mu_z, lam_z, n_min=-n_eff, eps_pair=eps_pair)
    alpha = -1.0 / (dphi * psi)
    bad = np.nonzero(alpha <= 0)[0]
    if bad.size:
        k = -n_eff + int(bad[0])
        raise NonPositiveAlpha(k, float(alpha[bad[0]]))
    return NormingData(-n_eff, n_eff, lam_z.copy(), alpha)


@dataclass(frozen=True)
class SdValidation:
    """Outcome of the admissibility checks on a spectra pair."""

    passed: bool
    interlacing_ok: bool
    first_violation: int | None
    decay_ok: bool
    trend_ok: bool
    lam_report: ResidualReport
    mu_report: ResidualReport

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "interlacing_ok": self.interlacing_ok,
            "first_violation": self.first_violation,
            "decay_ok": self.decay_ok,
            "trend_ok": self.trend_ok,
            "lambda_residuals": {
                "sum_squares": self.lam_report.sum_squares,
                "outer_quartile_max": self.lam_report.outer_quartile_max,
                "bucket_maxima": [float(v) for v in self.lam_report.bucket_maxima],
            },
            "mu_residuals": {
                "sum_squares": self.mu_report.sum_squares,
                "outer_quartile_max": self.mu_report.outer_quartile_max,
                "bucket_maxima": [float(v) for v in self.mu_report.bucket_maxima],
            },
        }


def validate_sd(sp: SpectrumPair, *, residual_threshold: float = 0.5) -> SdValidation:
    """Check strict interlacing lam_{n-1} < mu_n < lam_n and remainder decay.

    Decay is judged by the outer-quartile maximum of the remainders staying
    below ``residual_threshold`` and by the outermost |n|-quartile maximum
    not exceeding the innermost one.
    """
    lam, mu = sp.lam, sp.mu
    interlacing_ok = True
    first_violation = None
    for i in range(1, len(lam)):
        if not (lam[i - 1] < mu[i] < lam[i]):
            interlacing_ok = False
            first_violation = int(sp.n_min + i)
            break
    lam_rep = asymptotic_residuals(lam, sp.n_min, "lambda")
    mu_rep = asymptotic_residuals(mu, sp.n_min, "mu")
    decay_ok = (lam_rep.outer_quartile_max <= residual_threshold
                and mu_rep.outer_quartile_max <= residual_threshold)
    trend_ok = (lam_rep.bucket_maxima[3] <= lam_rep.bucket_maxima[0] + 1e-9
                and mu_rep.bucket_maxima[3] <= mu_rep.bucket_maxima[0] + 1e-9)
    return SdValidation(
        passed=bool(interlacing_ok and decay_ok and trend_ok),
        interlacing_ok=interlacing_ok,
        first_violation=first_violation,
        decay_ok=bool(decay_ok),
        trend_ok=bool(trend_ok),
        lam_report=lam_rep,
        mu_report=mu_rep,
    )
