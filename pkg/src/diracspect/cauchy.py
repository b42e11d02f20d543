"""Propagation of the fundamental 2x2 solution U(x, lambda).

Solves U' = -B (lambda I - Q(x)) U with U(0) = I, whose first column
c(x, lambda) carries the boundary data.  The characteristic functions are
phi(lambda) = c1(1, lambda) and psi(lambda) = c2(1, lambda); their real
zeros are the two spectra.

Piecewise-constant potentials are propagated exactly: per constant segment
the transfer matrix is the closed-form 2x2 exponential, subdivided so that
each exponent has operator norm at most 1 and recombined by binary powering.
Sampled potentials use a classical fourth-order one-step scheme with
lambda-adaptive sub-stepping and an optional Richardson error estimate.
Derivatives with respect to lambda ride along analytically in both cases,
so Newton polishing of eigenvalues needs no finite differences.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import B, I2, Grid, Potential, cos_sqrt, dsinc_sqrt, sinc_sqrt
from .errors import StepSizeUnderflow

__all__ = [
    "CauchySolution", "propagate", "propagate_batch", "transfer_matrices",
    "char_values", "char_values_batch", "phi_dot", "phi_dot_batch",
    "trajectory_to_csv",
]

_MAX_SUBSTEPS = 20_000_000  # safety cap across one batch sweep


# ---------------------------------------------------------------------------
# per-interval transfer matrices
# ---------------------------------------------------------------------------

def _pc_step(lams, q1, q2, width, deriv):
    """Exact transfer E = exp((-lam B + B Q) width) for one constant cell.

    Returns (E, D) with D = dE/dlam (D is None unless requested).  Shapes
    are (L, 2, 2) for a batch of L lambda values.
    """
    lam = lams[:, None, None]
    m = np.empty((len(lams), 2, 2))
    m[:, 0, 0] = q2 * width
    m[:, 0, 1] = -(lams + q1) * width
    m[:, 1, 0] = (lams - q1) * width
    m[:, 1, 1] = -q2 * width
    d = (lams * lams - q1 * q1 - q2 * q2) * width * width
    c = cos_sqrt(d)[:, None, None]
    s = sinc_sqrt(d)[:, None, None]
    e = c * I2 + s * m
    if not deriv:
        return e, None
    dd = (2.0 * lams * width * width)[:, None, None]
    ds = dsinc_sqrt(d)[:, None, None]
    deriv_m = -0.5 * s * dd * I2 + ds * dd * m - s * (B * width)
    return e, deriv_m


def _pair_power(e, d, m):
    """m-fold composition of the step (U, V) -> (E U, E V + D U)."""
    if m == 1:
        return e, d
    acc_e = np.broadcast_to(I2, e.shape).copy()
    acc_d = np.zeros_like(e) if d is not None else None
    while m:
        if m & 1:
            if d is not None:
                acc_d = e @ acc_d + d @ acc_e
            acc_e = e @ acc_e
        m >>= 1
        if m:
            if d is not None:
                d = e @ d + d @ e
            e = e @ e
    return acc_e, acc_d


def _rk4_step(m_a, m_b, m_c, h, deriv):
    """One fourth-order step matrix S (and T = dS/dlam) for U' = M(x) U.

    m_a, m_b, m_c are M at the left end, midpoint and right end of the step.
    """
    half = 0.5 * h
    k1 = m_a
    k2 = m_b + half * (m_b @ k1)
    k3 = m_b + half * (m_b @ k2)
    k4 = m_c + h * (m_c @ k3)
    s = I2 + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    if not deriv:
        return s, None
    dm = -B
    dk1 = np.broadcast_to(dm, m_a.shape)
    dk2 = dm + half * (dm @ k1 + m_b @ dk1)
    dk3 = dm + half * (dm @ k2 + m_b @ dk2)
    dk4 = dm + h * (dm @ k3 + m_c @ dk3)
    t = (h / 6.0) * (dk1 + 2.0 * (dk2 + dk3) + dk4)
    return s, t


def _coeff_matrices(lams, q1, q2):
    """M = -lam B + B Q for arrays of lambda (L,) and scalar or (P,) q values."""
    q1 = np.asarray(q1, dtype=float)
    lams = np.asarray(lams, dtype=float)
    shape = np.broadcast_shapes(lams.shape, np.shape(q1))
    m = np.empty(shape + (2, 2))
    m[..., 0, 0] = q2
    m[..., 0, 1] = -(lams + q1)
    m[..., 1, 0] = lams - q1
    m[..., 1, 1] = -q2
    return m


def _rk4_theta(rtol, lam_scale):
    """Sub-step oscillation budget theta = lam * h for the RK4 scheme.

    The global error of the scheme on a unit interval behaves like
    lam * theta^4 / 120, which is inverted for theta and clipped to a
    safe range.
    """
    theta = (120.0 * rtol / max(lam_scale, 1.0)) ** 0.25
    return min(max(theta, 5e-4), 0.5)


# ---------------------------------------------------------------------------
# batched sweeps
# ---------------------------------------------------------------------------

def _merged_points(q: Potential, xs: np.ndarray) -> np.ndarray:
    xmax = xs[-1]
    inner = q.x[(q.x > 0.0) & (q.x < xmax)]
    pts = np.unique(np.concatenate([[0.0], xs, inner]))
    return pts


def transfer_matrices(q: Potential, lams, xs, *, rtol: float = 1e-10,
                      deriv: bool = False, substep_factor: int = 1):
    """U (and optionally V = dU/dlam) at the requested points for a lambda batch.

    Returns arrays of shape (L, len(xs), 2, 2); xs must be increasing and lie
    in [0, 1].  substep_factor multiplies the sub-step count (used by the
    Richardson estimate).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if not np.all(np.isfinite(lams)):
        raise ValueError("lambda values must be finite")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(np.diff(xs) <= 0) or xs[0] < 0 or xs[-1] > 1.0 + 1e-12:
        raise ValueError("evaluation points must strictly increase inside [0, 1]")

    nl = len(lams)
    pts = _merged_points(q, xs)
    # map each requested x to its merged-point index
    tidx = np.searchsorted(pts, xs)

    u = np.tile(I2, (nl, 1, 1))
    v = np.zeros((nl, 2, 2)) if deriv else None
    out_u = np.empty((nl, len(xs), 2, 2))
    out_v = np.empty((nl, len(xs), 2, 2)) if deriv else None

    lam_scale = float(np.max(np.abs(lams))) if nl else 0.0
    qsup = q.sup_modulus()
    rate = lam_scale + qsup

    if q.kind == "sampled":
        theta = _rk4_theta(rtol, lam_scale)
        h_target = theta / max(rate, 1.0) / substep_factor
        budget = 0

    next_out = 0
    while next_out < len(xs) and tidx[next_out] == 0:
        out_u[:, next_out] = u
        if deriv:
            out_v[:, next_out] = v
        next_out += 1

    for k in range(len(pts) - 1):
        a, b = pts[k], pts[k + 1]
        width = b - a
        if q.kind == "piecewise":
            q1, q2 = q.values_at(np.array([0.5 * (a + b)]))
            q1, q2 = float(q1[0]), float(q2[0])
            m_sub = max(1, math.ceil((lam_scale + math.hypot(q1, q2)) * width))
            e, d = _pc_step(lams, q1, q2, width / m_sub, deriv)
            e, d = _pair_power(e, d, m_sub)
            if deriv:
                v = e @ v + d @ u
            u = e @ u
        else:
            m_sub = max(1, math.ceil(width / h_target))
            budget += m_sub
            if budget > _MAX_SUBSTEPS:
                raise StepSizeUnderflow(
                    f"more than {_MAX_SUBSTEPS} sub-steps required; "
                    f"loosen rtol or reduce |lambda|"
                )
            h = width / m_sub
            grid0 = a + h * np.arange(m_sub + 1)
            mids = grid0[:-1] + 0.5 * h
            q1n, q2n = q.values_at(grid0)
            q1m, q2m = q.values_at(mids)
            for j in range(m_sub):
                m_a = _coeff_matrices(lams, q1n[j], q2n[j])
                m_b = _coeff_matrices(lams, q1m[j], q2m[j])
                m_c = _coeff_matrices(lams, q1n[j + 1], q2n[j + 1])
                s, t = _rk4_step(m_a, m_b, m_c, h, deriv)
                if deriv:
                    v = s @ v + t @ u
                u = s @ u
        while next_out < len(xs) and tidx[next_out] == k + 1:
            out_u[:, next_out] = u
            if deriv:
                out_v[:, next_out] = v
            next_out += 1

    if deriv:
        return out_u, out_v
    return out_u


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CauchySolution:
    """U(x, lambda) sampled at the grid nodes; U[0] is the identity."""

    lam: float
    grid: Grid
    U: np.ndarray  # (n_nodes, 2, 2)
    error_estimate: float | None = None

    @property
    def c(self) -> np.ndarray:
        """First column c(x, lambda) = (c1, c2)^t, shape (n_nodes, 2)."""
        return self.U[:, :, 0]

    @property
    def s(self) -> np.ndarray:
        """Second column s(x, lambda), shape (n_nodes, 2)."""
        return self.U[:, :, 1]

    def det_drift(self) -> float:
        """max |det U(x) - 1| along the trajectory (volume preservation)."""
        det = np.linalg.det(self.U)
        return float(np.max(np.abs(det - 1.0)))


def propagate(q: Potential, lam: float, grid: Grid, *, rtol: float = 1e-10,
              error_estimate: bool = False) -> CauchySolution:
    """Propagate U through the potential, recording it at every grid node."""
    u = transfer_matrices(q, [lam], grid.nodes, rtol=rtol)[0]
    est = None
    if error_estimate:
        if q.kind == "piecewise":
            est = 0.0
        else:
            u2 = transfer_matrices(q, [lam], grid.nodes, rtol=rtol,
                                   substep_factor=2)[0]
            est = float(np.max(np.abs(u2 - u)) / 15.0)
            u = u2
    return CauchySolution(lam=float(lam), grid=grid, U=u, error_estimate=est)


def propagate_batch(q: Potential, lams, xs, *, rtol: float = 1e-10):
    """U at the points xs for many lambdas at once, shape (L, len(xs), 2, 2)."""
    return transfer_matrices(q, lams, xs, rtol=rtol)


def char_values_batch(q: Potential, lams, *, rtol: float = 1e-10):
    """(phi, psi) = (U11(1), U21(1)) for a batch of lambdas."""
    u = transfer_matrices(q, lams, [1.0], rtol=rtol)[:, 0]
    return u[:, 0, 0].copy(), u[:, 1, 0].copy()


def char_values(q: Potential, lam: float, *, rtol: float = 1e-10):
    """Characteristic values (phi(lambda), psi(lambda))."""
    phi, psi = char_values_batch(q, [lam], rtol=rtol)
    return float(phi[0]), float(psi[0])


def phi_dot_batch(q: Potential, lams, *, rtol: float = 1e-10):
    """(phi, psi, dphi/dlam, dpsi/dlam) at x = 1 via the variational system.

    The derivative pair solves V' = -B (lambda I - Q) V - B U with V(0) = 0
    and is propagated jointly with U.
    """
    u, v = transfer_matrices(q, lams, [1.0], rtol=rtol, deriv=True)
    u = u[:, 0]
    v = v[:, 0]
    return (u[:, 0, 0].copy(), u[:, 1, 0].copy(),
            v[:, 0, 0].copy(), v[:, 1, 0].copy())


def phi_dot(q: Potential, lam: float, *, rtol: float = 1e-10) -> float:
    """d phi / d lambda at a single lambda."""
    _, _, dphi, _ = phi_dot_batch(q, [lam], rtol=rtol)
    return float(dphi[0])


def trajectory_to_csv(sol: CauchySolution, path) -> None:
    """Debug export of the trajectory as rows x,u11,u12,u21,u22."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "u11", "u12", "u21", "u22"])
        for x, m in zip(sol.grid.nodes, sol.U):
            writer.writerow([repr(float(x)), repr(float(m[0, 0])),
                             repr(float(m[0, 1])), repr(float(m[1, 0])),
                             repr(float(m[1, 1]))])
