"""Eigenvalue location, norming constants by quadrature, residual diagnostics.

The two spectra are the real zeros of phi (boundary pair A1, windows centered
at pi(n + 1/2)) and psi (pair A2, windows centered at pi n).  Each index gets
a scan window, sign changes are bisected, and roots are polished with a
Newton step driven by the variational derivative.  Enumeration is the sorted
interlacing one; any admissible re-enumeration is the caller's business.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import cauchy
from .core import Potential
from .errors import DuplicateRoot, NonPositiveAlpha, RootNotBracketed

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

__all__ = [
    "SpectrumPair", "NormingData", "ResidualReport", "find_eigenvalues",
    "norming_quadrature", "asymptotic_residuals", "compute_spectrum_pair",
    "free_centers",
]

_DEDUP_TOL = 1e-9


def free_centers(boundary: str, ns: np.ndarray) -> np.ndarray:
    """Unperturbed eigenvalue positions: pi(n + 1/2) for A1, pi n for A2."""
    if boundary == "A1":
        return math.pi * (ns + 0.5)
    if boundary == "A2":
        return math.pi * ns
    raise ValueError("boundary must be 'A1' or 'A2'")


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumPair:
    """Indexed eigenvalue sequences of the two boundary pairs."""

    n_min: int
    n_max: int
    lam: np.ndarray
    mu: np.ndarray
    p_exponent: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        count = self.n_max - self.n_min + 1
        if count < 1:
            raise ValueError("n_max must be >= n_min")
        if len(self.lam) != count or len(self.mu) != count:
            raise ValueError(f"need {count} entries per sequence")
        if not (np.all(np.isfinite(self.lam)) and np.all(np.isfinite(self.mu))):
            raise ValueError("spectra must be finite")
        if self.p_exponent < 1:
            raise ValueError("p_exponent must be >= 1")

    @property
    def ns(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def idx(self, n: int) -> int:
        if not self.n_min <= n <= self.n_max:
            raise IndexError(f"index {n} outside [{self.n_min}, {self.n_max}]")
        return n - self.n_min

    def to_dict(self) -> dict:
        return {"p": self.p_exponent, "n_min": int(self.n_min),
                "n_max": int(self.n_max), "lambda": self.lam.tolist(),
                "mu": self.mu.tolist()}

    @classmethod
    def from_dict(cls, data: dict):
        return cls(int(data["n_min"]), int(data["n_max"]),
                   data["lambda"], data["mu"], float(data.get("p", 2.0)))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class NormingData:
    """Eigenvalues of the first boundary pair with their norming constants."""

    n_min: int
    n_max: int
    lam: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        count = self.n_max - self.n_min + 1
        if len(self.lam) != count or len(self.alpha) != count:
            raise ValueError(f"need {count} entries per sequence")
        bad = np.nonzero(self.alpha <= 0)[0]
        if bad.size:
            n = self.n_min + int(bad[0])
            raise NonPositiveAlpha(n, float(self.alpha[bad[0]]))

    @property
    def ns(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def to_dict(self) -> dict:
        return {"n_min": int(self.n_min), "n_max": int(self.n_max),
                "lambda": self.lam.tolist(), "alpha": self.alpha.tolist()}

    @classmethod
    def from_dict(cls, data: dict):
        return cls(int(data["n_min"]), int(data["n_max"]),
                   data["lambda"], data["alpha"])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# root search
# ---------------------------------------------------------------------------

def _char_batch(q, lams, boundary, rtol):
    phi, psi = cauchy.char_values_batch(q, lams, rtol=rtol)
    return phi if boundary == "A1" else psi


def _char_and_slope_batch(q, lams, boundary, rtol):
    phi, psi, dphi, dpsi = cauchy.phi_dot_batch(q, lams, rtol=rtol)
    return (phi, dphi) if boundary == "A1" else (psi, dpsi)


def _window_brackets(centers, half_width, points, fvals):
    """Sign-change brackets per window from scan values, plus exact hits."""
    brackets = []
    for w in range(len(centers)):
        row = fvals[w]
        pts = points[w]
        found = []
        for i in range(len(pts) - 1):
            a, b = row[i], row[i + 1]
            if a == 0.0:
                found.append((pts[i], pts[i]))
            elif a * b < 0.0:
                found.append((pts[i], pts[i + 1]))
        if row[-1] == 0.0:
            found.append((pts[-1], pts[-1]))
        brackets.append(found)
    return brackets


def find_eigenvalues(q: Potential, boundary: str, n_min: int, n_max: int, *,
                     scan_points: int = 32, bisect_tol: float = 1e-12,
                     rtol_scan: float | None = None,
                     rtol_polish: float | None = None) -> np.ndarray:
    """Locate eigenvalues lam_n (A1) or mu_n (A2) for n in [n_min, n_max].

    Each window [center - W, center + W] with W = pi/2 + min(pi/2, ||Q||_1)
    is scanned for sign changes, every bracket is bisected and polished with
    Newton steps from the variational derivative, and the pooled roots are
    de-duplicated globally with nearest-center assignment.  Scan density is
    widened (64, 128 points) for windows that come up empty.
    """
    if n_max < n_min:
        raise ValueError("n_max must be >= n_min")
    ns = np.arange(n_min, n_max + 1)
    centers = free_centers(boundary, ns)
    width = math.pi / 2.0 + min(math.pi / 2.0, q.l1_norm)

    sampled = q.kind == "sampled"
    if rtol_scan is None:
        rtol_scan = 1e-5 if sampled else 1e-10
    if rtol_polish is None:
        rtol_polish = 5e-9 if sampled else 1e-10
    # full bisection is cheap with exact segment propagation; for sampled
    # potentials stop earlier and let Newton close the gap
    stop_width = bisect_tol if not sampled else max(bisect_tol, 1e-5)
    polish_rounds = 1 if not sampled else 3

    brackets_per_window = [None] * len(ns)
    pending = list(range(len(ns)))
    for points_count in (scan_points, 2 * scan_points, 4 * scan_points):
        if not pending:
            break
        offsets = np.linspace(-width, width, points_count)
        pts = centers[pending][:, None] + offsets[None, :]
        flat = pts.ravel()
        order = np.argsort(flat, kind="stable")
        fvals = np.empty_like(flat)
        fvals[order] = _char_batch(q, flat[order], boundary, rtol_scan)
        fvals = fvals.reshape(pts.shape)
        found = _window_brackets(centers[pending], width, pts, fvals)
        still = []
        for w, br in zip(pending, found):
            if br:
                brackets_per_window[w] = br
            else:
                still.append(w)
        pending = still
    if pending:
        w = pending[0]
        lo = centers[w] - width
        raise RootNotBracketed(int(ns[w]), (lo, centers[w] + width))

    los, his = [], []
    for br in brackets_per_window:
        for lo, hi in br:
            los.append(lo)
            his.append(hi)
    los = np.array(los)
    his = np.array(his)
    flo = _char_batch(q, los, boundary, rtol_scan)

    # batched bisection on every bracket
    for _ in range(200):
        live = (his - los) > stop_width
        if not np.any(live):
            break
        mids = 0.5 * (los + his)
        fm = np.empty_like(mids)
        fm[live] = _char_batch(q, mids[live], boundary, rtol_scan)
        take_left = live & (flo * fm <= 0.0)
        take_right = live & ~take_left
        his[take_left] = mids[take_left]
        los[take_right] = mids[take_right]
        flo[take_right] = fm[take_right]

    roots = 0.5 * (los + his)
    for _ in range(polish_rounds):
        f, df = _char_and_slope_batch(q, roots, boundary, rtol_polish)
        safe = np.abs(df) > 1e-12
        step = np.where(safe, f / np.where(safe, df, 1.0), 0.0)
        step = np.clip(step, -0.5 * width, 0.5 * width)
        roots = roots - step

    # global de-duplication and nearest-center assignment
    order = np.argsort(roots)
    srt = roots[order]
    uniq = [srt[0]]
    for r in srt[1:]:
        if r - uniq[-1] > _DEDUP_TOL:
            uniq.append(r)
    uniq = np.array(uniq)

    out = np.empty(len(ns))
    used = {}
    for w, c in enumerate(centers):
        k = int(np.argmin(np.abs(uniq - c)))
        if k in used:
            raise DuplicateRoot(int(ns[w]), float(uniq[k]))
        used[k] = w
        out[w] = uniq[k]
    if np.any(np.diff(out) <= 0):
        bad = int(np.nonzero(np.diff(out) <= 0)[0][0])
        raise DuplicateRoot(int(ns[bad]), float(out[bad]))
    return out


def compute_spectrum_pair(q: Potential, n: int, p_exponent: float | None = None,
                          **kwargs) -> SpectrumPair:
    """Both spectra over the symmetric index range [-n, n]."""
    lam = find_eigenvalues(q, "A1", -n, n, **kwargs)
    mu = find_eigenvalues(q, "A2", -n, n, **kwargs)
    p = q.p_exponent if p_exponent is None else p_exponent
    return SpectrumPair(-n, n, lam, mu, p)


# ---------------------------------------------------------------------------
# norming constants by quadrature
# ---------------------------------------------------------------------------

def norming_quadrature(q: Potential, lam, n_min: int, *, min_nodes: int = 512,
                       nodes_per_period: int = 32,
                       rtol: float = 1e-8) -> NormingData:
    """alpha_n = 1 / integral_0^1 (c1^2 + c2^2)(x, lam_n) dx by trapezoid.

    The node count grows with max |lam| so that each oscillation period of
    |c|^2 (length pi / |lam|) is resolved by at least ``nodes_per_period``
    nodes, with ``min_nodes`` as the floor.
    """
    lam = np.asarray(lam, dtype=float)
    lmax = float(np.max(np.abs(lam))) if lam.size else 0.0
    n_nodes = max(min_nodes, int(math.ceil(nodes_per_period * lmax / math.pi)) + 1)
    xs = np.linspace(0.0, 1.0, n_nodes)
    u = cauchy.propagate_batch(q, lam, xs, rtol=rtol)
    c = u[:, :, :, 0]                          # (L, n, 2)
    dens = np.sum(c * c, axis=2)               # (L, n)
    integrals = _trapezoid(dens, xs, axis=1)
    alpha = 1.0 / integrals
    return NormingData(n_min, n_min + len(lam) - 1, lam, alpha)


# ---------------------------------------------------------------------------
# asymptotic remainders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    """Remainder sequence r_n with summary statistics."""

    kind: str
    n_min: int
    residuals: np.ndarray
    sum_squares: float
    outer_quartile_max: float
    bucket_maxima: np.ndarray = field(default=None)

    @property
    def ns(self):
        return np.arange(self.n_min, self.n_min + len(self.residuals))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_min": int(self.n_min),
            "sum_squares": self.sum_squares,
            "outer_quartile_max": self.outer_quartile_max,
            "bucket_maxima": [float(v) for v in self.bucket_maxima],
            "residuals": self.residuals.tolist(),
        }


def asymptotic_residuals(values, n_min: int, kind: str) -> ResidualReport:
    """Remainders against the free positions: lam - pi(n+1/2), mu - pi n, alpha - 1.

    Reports the squared-sum proxy and the maximum over the outer quartile of
    |n|, plus per-quartile maxima for decay diagnostics.
    """
    values = np.asarray(values, dtype=float)
    ns = np.arange(n_min, n_min + len(values))
    if kind == "lambda":
        r = values - math.pi * (ns + 0.5)
    elif kind == "mu":
        r = values - math.pi * ns
    elif kind == "alpha":
        r = values - 1.0
    else:
        raise ValueError("kind must be 'lambda', 'mu' or 'alpha'")
    mags = np.abs(ns)
    top = int(np.max(mags)) if len(ns) else 0
    edges = [0.25 * top, 0.5 * top, 0.75 * top]
    buckets = np.searchsorted(edges, mags, side="right")
    bucket_max = np.zeros(4)
    for b in range(4):
        sel = buckets == b
        if np.any(sel):
            bucket_max[b] = float(np.max(np.abs(r[sel])))
    outer = bucket_max[3]
    return ResidualReport(kind=kind, n_min=n_min, residuals=r,
                          sum_squares=float(np.sum(r * r)),
                          outer_quartile_max=float(outer),
                          bucket_maxima=bucket_max)
