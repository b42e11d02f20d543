"""Successive-approximation kernels and the triangular transform they generate.

The iteration starts from P_1(x, s) = B Q(s) and advances through

    P_{n+1}(x, s) = integral_s^x  B Q(eta) P_n(eta, eta - s) d eta,

summing even-index terms into P+ and odd-index terms into P-.  From these,
R(x, t) = P+(x, t) + P-(x, t) J on the triangle, and the triangular kernel

    K(x, t) = 1/2 [ R(x, (x-t)/2) + R(x, (x+t)/2) J ]

maps free solutions c0 = (cos lam x, sin lam x)^t to solutions of the
perturbed system; apply_transform realizes that map by quadrature and is
cross-checked against direct propagation in the tests.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .core import B, Grid, J, Potential, op_norms

__all__ = ["TriKernel", "PSeriesResult", "build_P_series", "assemble_K",
           "apply_transform", "gp_norm"]


@dataclass(frozen=True)
class TriKernel:
    """2x2-block kernel sampled at node pairs (x_i, t_j), zero for j > i."""

    grid: Grid
    values: np.ndarray  # (n, n, 2, 2), lower triangle holds the data

    def __post_init__(self):
        n = len(self.grid)
        if self.values.shape != (n, n, 2, 2):
            raise ValueError("kernel block array must be (n, n, 2, 2)")
        if not np.all(np.isfinite(self.values[np.tril_indices(n)])):
            raise ValueError("triangle blocks must be finite")

    def gp_norm(self, p: float = 1.0) -> float:
        return gp_norm(self, p)

    def row_interp(self, i: int, positions) -> np.ndarray:
        """Linear interpolation of row i in the second variable."""
        nodes = self.grid.nodes
        positions = np.asarray(positions, dtype=float)
        idx = np.clip(np.searchsorted(nodes, positions) - 1, 0, len(nodes) - 2)
        frac = (positions - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
        frac = np.clip(frac, 0.0, 1.0)[..., None, None]
        row = self.values[i]
        return (1.0 - frac) * row[idx] + frac * row[idx + 1]

    def to_csv(self, path) -> None:
        """Export the triangle as rows x,t,k11,k12,k21,k22."""
        nodes = self.grid.nodes
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "t", "k11", "k12", "k21", "k22"])
            for i in range(len(nodes)):
                for j in range(i + 1):
                    blk = self.values[i, j]
                    writer.writerow([repr(float(nodes[i])), repr(float(nodes[j])),
                                     repr(float(blk[0, 0])), repr(float(blk[0, 1])),
                                     repr(float(blk[1, 0])), repr(float(blk[1, 1]))])


def gp_norm(kernel: TriKernel, p: float = 1.0) -> float:
    """Mixed norm: max over frozen-row and frozen-column L_p norms.

    Rows are supported on [0, x_i] and columns on [t_j, 1]; both are
    integrated with the trapezoid rule on the stored nodes.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    nodes = kernel.grid.nodes
    n = len(nodes)
    h = np.diff(nodes)
    mods = op_norms(kernel.values) ** p  # (n, n)
    best = 0.0
    for i in range(1, n):
        seg = mods[i, : i + 1]
        val = float(np.sum(0.5 * h[:i] * (seg[:-1] + seg[1:])))
        best = max(best, val)
    for j in range(n - 1):
        seg = mods[j:, j]
        val = float(np.sum(0.5 * h[j:] * (seg[:-1] + seg[1:])))
        best = max(best, val)
    return best ** (1.0 / p)


@dataclass(frozen=True)
class PSeriesResult:
    """Even/odd partial sums of the kernel iteration plus a convergence report."""

    p_plus: TriKernel
    p_minus: TriKernel
    last_increment_gp: float
    n_terms: int

    def __iter__(self):
        return iter((self.p_plus, self.p_minus))


def _auto_n_max(q_l1: float, tol: float) -> int:
    bound = q_l1
    for n in range(2, 41):
        bound *= q_l1 / max(n - 1, 1)
        if bound <= tol:
            return n
    return 40


def build_P_series(q: Potential, n_max: int | None, grid: Grid,
                   tol: float = 1e-12) -> PSeriesResult:
    """Iterate the kernel recursion on a uniform grid, splitting by parity.

    n_max = None picks the smallest truncation whose factorial tail bound
    ||Q||_1^n / (n-1)! drops below ``tol``.  The mixed norm of the last
    increment is reported as a convergence certificate, and a warning is
    emitted if it exceeds ten times the factorial bound (a sign that the
    quadrature has broken down).
    """
    if not grid.is_uniform:
        raise ValueError("the kernel recursion requires a uniform grid")
    q_l1 = q.l1_norm
    if n_max is None:
        n_max = _auto_n_max(q_l1, tol)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")

    nodes = grid.nodes
    n = len(nodes)
    h = grid.step
    q1, q2 = q.values_at(nodes)
    bq = np.einsum("ab,nbc->nac", B, _q_blocks(q1, q2))  # B Q(x_k), (n,2,2)

    ii = np.arange(n)[:, None]
    jj = np.arange(n)[None, :]
    tri = ii >= jj
    shift = np.clip(ii - jj, 0, n - 1)

    # P_1(x, s) = B Q(s), independent of x
    p_cur = np.where(tri[..., None, None], bq[None, :, :, :], 0.0)
    p_plus = np.zeros((n, n, 2, 2))
    p_minus = p_cur.copy()

    rng = np.arange(n)
    last_inc = TriKernel(grid, p_cur).gp_norm(q.p_exponent)
    for term in range(2, n_max + 1):
        # integrand D[k, j] = B Q(x_k) P_cur(x_k, x_k - x_j)
        gathered = p_cur[ii, shift]            # (n, n, 2, 2), row k col j
        d = np.einsum("kab,kjbc->kjac", bq, gathered)
        d = np.where(tri[..., None, None], d, 0.0)
        csum = np.cumsum(d, axis=0)
        lower = d[rng, rng]                    # D[j, j], (n, 2, 2)
        # trapezoid over k = j .. i: halve the two end contributions
        p_next = (csum - 0.5 * lower[None, :, :, :] - 0.5 * d) * h
        p_next = np.where(tri[..., None, None], p_next, 0.0)

        if term % 2 == 0:
            p_plus += p_next
        else:
            p_minus += p_next
        p_cur = p_next
        last_inc = TriKernel(grid, p_cur).gp_norm(q.p_exponent)

    if n_max >= 2 and q_l1 > 0:
        fact = 1.0
        for k in range(1, n_max):
            fact *= k
        bound = q_l1 ** n_max / fact
        if last_inc > 10.0 * bound + 1e-14:
            warnings.warn(
                f"last kernel increment {last_inc:.3g} exceeds 10x the factorial "
                f"bound {bound:.3g}; refine the grid", RuntimeWarning)

    return PSeriesResult(TriKernel(grid, p_plus), TriKernel(grid, p_minus),
                         float(last_inc), n_max)


def _q_blocks(q1, q2):
    out = np.empty(np.shape(q1) + (2, 2))
    out[..., 0, 0] = q1
    out[..., 0, 1] = q2
    out[..., 1, 0] = q2
    out[..., 1, 1] = -q1
    return out


def assemble_K(p_plus: TriKernel, p_minus: TriKernel):
    """Combine the parity sums into R and the triangular transform kernel K.

    R(x, t) = P+(x, t) + P-(x, t) J on the triangle, and K evaluates R at the
    half-arguments (x -+ t)/2 with linear interpolation in the second variable
    (on a uniform grid these land on nodes or cell midpoints).
    """
    if p_plus.grid is not p_minus.grid and not np.array_equal(
            p_plus.grid.nodes, p_minus.grid.nodes):
        raise ValueError("parity sums must share one grid")
    grid = p_plus.grid
    n = len(grid)
    r_vals = p_plus.values + p_minus.values @ J
    r = TriKernel(grid, r_vals)

    ii = np.arange(n)[:, None]
    jj = np.arange(n)[None, :]
    k_vals = np.zeros((n, n, 2, 2))
    # (x_i - t_j)/2 and (x_i + t_j)/2 sit at index (i -+ j)/2 on the node grid
    for sign, post in ((-1, None), (1, J)):
        d = ii - jj if sign < 0 else ii + jj
        lo = d // 2
        hi = (d + 1) // 2
        vals = 0.5 * (r_vals[ii, lo] + r_vals[ii, hi])
        if post is not None:
            vals = vals @ post
        k_vals += 0.5 * vals
    tri = (ii >= jj)[..., None, None]
    k_vals = np.where(tri, k_vals, 0.0)
    k = TriKernel(grid, k_vals)
    return r, k


def apply_transform(kernel: TriKernel, lam: float) -> np.ndarray:
    """c(x, lam) = c0(x, lam) + integral_0^x K(x, t) c0(t, lam) dt on the grid.

    Returns the two components at every grid node, shape (n, 2); the
    integral uses the trapezoid rule on the node grid.
    """
    nodes = kernel.grid.nodes
    n = len(nodes)
    c0 = np.stack([np.cos(lam * nodes), np.sin(lam * nodes)], axis=1)
    g = np.einsum("ijab,jb->ija", kernel.values, c0)  # (n, n, 2)
    h = np.diff(nodes)
    out = c0.copy()
    for i in range(1, n):
        seg = g[i, : i + 1]
        out[i] += np.sum(0.5 * h[:i, None] * (seg[:-1] + seg[1:]), axis=0)
    return out
