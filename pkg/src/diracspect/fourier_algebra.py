"""Fourier coefficients on [0, 1), periodic convolution, Fejer means, inversion.

Coefficients use the convention e_n(f) = integral_0^1 f(x) exp(-2 pi i n x) dx,
so e_n(f * g) = e_n(f) e_n(g) for the periodic convolution.  Samples are
taken at k / L, k = 0 .. L-1 (the right endpoint is the wrap-around point).
"""

from dataclasses import dataclass

import numpy as np

from .errors import AliasRisk, NearZeroSymbol

__all__ = ["CoeffSeq", "fourier_coeff", "fourier_coeffs", "circ_conv",
           "fejer_sum", "wiener_invert", "WienerResult", "sample_grid"]


def sample_grid(count: int) -> np.ndarray:
    """Uniform sampling points k / count, k = 0 .. count-1."""
    return np.arange(count) / count


@dataclass(frozen=True)
class CoeffSeq:
    """Fourier coefficients c_n over the index range [n_min, n_max]."""

    n_min: int
    n_max: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.asarray(self.values, dtype=complex))
        if len(self.values) != self.n_max - self.n_min + 1:
            raise ValueError("coefficient count must match the index range")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("coefficients must be finite")

    @property
    def ns(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def at(self, n: int) -> complex:
        if not self.n_min <= n <= self.n_max:
            return 0.0 + 0.0j
        return complex(self.values[n - self.n_min])

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        """c_{-n} = conj(c_n) over the overlapping range (real signal)."""
        lo = max(self.n_min, -self.n_max)
        hi = min(self.n_max, -self.n_min)
        if lo > hi:
            return True
        ns = np.arange(lo, hi + 1)
        a = self.values[ns - self.n_min]
        b = self.values[-ns - self.n_min]
        return bool(np.max(np.abs(a - np.conj(b))) <= tol)


def _as_signal(samples) -> np.ndarray:
    samples = np.asarray(samples)
    if not np.iscomplexobj(samples):
        samples = samples.astype(float)
    return samples


def fourier_coeff(samples, n: int) -> complex:
    """e_n(f) from uniform samples by the trapezoid/DFT rule.

    Requires at least 4|n| samples; fewer would alias the coefficient.
    """
    samples = _as_signal(samples)
    count = len(samples)
    if n != 0 and count < 4 * abs(n):
        raise AliasRisk(n, count)
    k = np.arange(count)
    return complex(np.sum(samples * np.exp(-2j * np.pi * n * k / count)) / count)


def fourier_coeffs(samples, n_min: int, n_max: int) -> CoeffSeq:
    """All e_n(f) for n in [n_min, n_max] through one FFT."""
    samples = _as_signal(samples)
    count = len(samples)
    top = max(abs(n_min), abs(n_max))
    if top and count < 4 * top:
        raise AliasRisk(top if abs(n_max) >= abs(n_min) else n_min, count)
    spec = np.fft.fft(samples) / count
    vals = [spec[n % count] for n in range(n_min, n_max + 1)]
    return CoeffSeq(n_min, n_max, np.array(vals))


def circ_conv(f, g) -> np.ndarray:
    """Periodic convolution (f * g)(x) = integral_0^1 f(x - t) g(t) dt.

    Both inputs must be sampled on the same uniform grid; the contract
    e_n(f * g) = e_n(f) e_n(g) holds at the discrete level exactly.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape or f.ndim != 1:
        raise ValueError("need two equally long 1-d sample arrays")
    out = np.fft.ifft(np.fft.fft(f) * np.fft.fft(g)) / len(f)
    return np.real(out)


def fejer_sum(coeffs: CoeffSeq, x) -> np.ndarray:
    """Cesaro-weighted synthesis sigma_N(x) over the stored range.

    Uses the classical triangular weights 1 - |n| / (N + 1) with N the
    largest stored |n|; the associated summation kernel is nonnegative,
    which is what gives the L1 contraction property.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ns = coeffs.ns
    top = max(int(np.max(np.abs(ns))), 1)
    w = np.maximum(1.0 - np.abs(ns) / (top + 1.0), 0.0)
    phases = np.exp(2j * np.pi * np.outer(x, ns))
    out = phases @ (w * coeffs.values)
    if coeffs.is_hermitian():
        return np.real(out)
    return out


@dataclass(frozen=True)
class WienerResult:
    """Inverse symbol witness g with the verified identity residual."""

    samples: np.ndarray
    residual: float
    n_check: int


def wiener_invert(samples, n_check: int | None = None) -> WienerResult:
    """Find g with (1 + e_n(f)) (1 + e_n(g)) = 1 for all resolvable n.

    Works in the coefficient domain: e_n(g) = -e_n(f) / (1 + e_n(f)) for
    |n| <= n_check, synthesized back onto the sample grid.  n_check defaults
    to a quarter of the sample count, the largest band the 4|n| alias rule
    admits.  The reported residual re-analyzes the synthesized g, so it is
    an honest identity check rather than an echo of the construction.
    """
    samples = np.asarray(samples, dtype=float)
    count = len(samples)
    if n_check is None:
        n_check = max(count // 4, 1)
    ef = fourier_coeffs(samples, -n_check, n_check)
    symbol = 1.0 + ef.values
    bad = np.nonzero(np.abs(symbol) < 1e-8)[0]
    if bad.size:
        n = ef.n_min + int(bad[0])
        raise NearZeroSymbol(n, complex(symbol[bad[0]]))
    eg = -ef.values / symbol

    xs = sample_grid(count)
    phases = np.exp(2j * np.pi * np.outer(xs, ef.ns))
    g = np.real(phases @ eg)

    eg_check = fourier_coeffs(g, -n_check, n_check).values
    residual = float(np.max(np.abs(symbol * (1.0 + eg_check) - 1.0)))
    return WienerResult(samples=g, residual=residual, n_check=n_check)
