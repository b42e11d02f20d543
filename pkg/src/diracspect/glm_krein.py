"""Reconstruction machinery: spectral series, integral equations, recovery.

From norming data (lam_n, alpha_n) the convolution profile

    H(s) = sum_n w_n [ alpha_n exp(-2 lam_n s B) - exp(-pi (2n+1) s B) ]

is assembled with Cesaro (Fejer-type) weights w_n; indices beyond the stored
range are treated as exactly free, so their terms vanish identically.  Every
value of H lies in the commutative algebra {a I + b B}, which this module
identifies with complex numbers via a I + b B <-> a + i b.  The convolution
equation for R~ then reduces to Hermitian complex Toeplitz systems, solved
densely per slice (a Levinson fast path is available behind a flag), while
the triangular equation for K and the discrete factorization work with the
full 2x2 block structure.  The recovered potential is Q(x) = R~(x, 0) J B.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import Grid, J, Potential, potential_from_matrix_samples
from .direct_spectra import NormingData
from .errors import NotPositive, SingularSystem
from .transform_kernel import TriKernel

__all__ = [
    "ToeplitzSlice", "SquareKernel", "PositivityReport", "KreinSolution",
    "GlmSolution", "FactorizationResult", "build_H", "build_F",
    "check_positivity", "solve_krein", "solve_glm", "recover_potential",
    "discrete_factorization", "k_rows_from_krein", "glm_residual",
]

_JB = np.array([[0.0, 1.0], [1.0, 0.0]])  # J @ B


def _blocks_from_ab(a, b) -> np.ndarray:
    """a I + b B as 2x2 blocks for arrays a, b of equal shape."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(a.shape + (2, 2))
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = -b
    out[..., 1, 1] = a
    return out


def _blocks_from_complex(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return _blocks_from_ab(z.real, z.imag)


# ---------------------------------------------------------------------------
# the convolution profile H
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToeplitzSlice:
    """H sampled at the 2M cell midpoints of [-1, 1], cell width ``step``.

    Midpoint (mean-value style) sampling respects the merely integrable
    nature of H; every sample commutes with B, i.e. H(s) = a(s) I + b(s) B.
    """

    step: float
    samples: np.ndarray  # (2M, 2, 2)
    cesaro_order: int

    def __post_init__(self):
        count = len(self.samples)
        if count % 2 or count < 2:
            raise ValueError("need an even number of midpoint samples")
        if abs(self.step * count - 2.0) > 1e-12:
            raise ValueError("samples must tile [-1, 1]")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def m(self) -> int:
        return len(self.samples) // 2

    def midpoints(self) -> np.ndarray:
        return -1.0 + (np.arange(len(self.samples)) + 0.5) * self.step

    def a_profile(self) -> np.ndarray:
        return self.samples[:, 0, 0].copy()

    def b_profile(self) -> np.ndarray:
        return self.samples[:, 0, 1].copy()

    def complex_at(self, s) -> np.ndarray:
        """a(s) + i b(s) by linear interpolation between midpoint samples.

        The outer half-cells up to s = -1 and s = 1 are covered by linear
        extension from the two outermost samples on each side.
        """
        s = np.asarray(s, dtype=float)
        mids = self.midpoints()
        a = self.samples[:, 0, 0]
        b = self.samples[:, 0, 1]
        slope_left = 0.5 * self.step
        pts = np.concatenate([[-1.0], mids, [1.0]])
        a_ext = np.concatenate([
            [a[0] - (a[1] - a[0]) * slope_left / self.step], a,
            [a[-1] + (a[-1] - a[-2]) * slope_left / self.step]])
        b_ext = np.concatenate([
            [b[0] - (b[1] - b[0]) * slope_left / self.step], b,
            [b[-1] + (b[-1] - b[-2]) * slope_left / self.step]])
        return np.interp(s, pts, a_ext) + 1j * np.interp(s, pts, b_ext)

    def value_at(self, s) -> np.ndarray:
        """Interpolated 2x2 blocks of H at arbitrary s in [-1, 1]."""
        return _blocks_from_complex(self.complex_at(s))

    def to_csv(self, path) -> None:
        """Profile export as rows s,a,b."""
        mids = self.midpoints()
        a = self.samples[:, 0, 0]
        b = self.samples[:, 0, 1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "a", "b"])
            for row in zip(mids, a, b):
                writer.writerow([repr(float(v)) for v in row])


def build_H(data: NormingData, m_cells: int, *, cesaro: bool = True) -> ToeplitzSlice:
    """Assemble H at the midpoints of 2*m_cells cells covering [-1, 1].

    Cesaro weighting averages the symmetric partial sums, giving weight 1 to
    n = 0 and (N - |n| + 1)/N to 1 <= |n| <= N; ``cesaro=False`` uses the raw
    symmetric sum.  Terms beyond the stored range are exactly zero because
    the tail is treated as free (alpha = 1, lam = pi(n + 1/2)).
    """
    if data.n_min != -data.n_max:
        raise ValueError(
            "reconstruction requires a symmetric index range [-N, N]; "
            f"got [{data.n_min}, {data.n_max}]")
    if m_cells < 16:
        raise ValueError("need at least 16 cells")
    top = data.n_max
    ns = data.ns
    if cesaro and top >= 1:
        w = np.where(ns == 0, 1.0, (top - np.abs(ns) + 1.0) / top)
    else:
        w = np.ones(len(ns))

    step = 1.0 / m_cells
    mids = -1.0 + (np.arange(2 * m_cells) + 0.5) * step
    two_lam = 2.0 * data.lam
    free = math.pi * (2.0 * ns + 1.0)
    wa = w * data.alpha

    a = np.zeros(len(mids))
    b = np.zeros(len(mids))
    chunk = max(1, 2_000_000 // (2 * len(ns) + 1))
    for start in range(0, len(mids), chunk):
        sl = slice(start, min(start + chunk, len(mids)))
        arg_pert = np.outer(mids[sl], two_lam)
        arg_free = np.outer(mids[sl], free)
        a[sl] = np.cos(arg_pert) @ wa - np.cos(arg_free) @ w
        b[sl] = -(np.sin(arg_pert) @ wa - np.sin(arg_free) @ w)
    return ToeplitzSlice(step=step, samples=_blocks_from_ab(a, b),
                         cesaro_order=top)


# ---------------------------------------------------------------------------
# the square kernel F and its positivity certificate
# ---------------------------------------------------------------------------

def _f_blocks(h_slice: ToeplitzSlice, x, t) -> np.ndarray:
    """F(x, t) = 1/2 [ H((x-t)/2) + H((x+t)/2) J ] at broadcastable points."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    z1 = h_slice.complex_at(0.5 * (x - t))
    z2 = h_slice.complex_at(0.5 * (x + t))
    a1, b1 = z1.real, z1.imag
    a2, b2 = z2.real, z2.imag
    out = np.empty(np.broadcast(x, t).shape + (2, 2))
    out[..., 0, 0] = 0.5 * (a1 + a2)
    out[..., 0, 1] = 0.5 * (b1 - b2)
    out[..., 1, 0] = 0.5 * (-b1 - b2)
    out[..., 1, 1] = 0.5 * (a1 - a2)
    return out


@dataclass(frozen=True)
class SquareKernel:
    """The symmetric kernel F on [0, 1]^2 derived from a profile H.

    ``values`` holds the blocks at grid node pairs; arbitrary points are
    served by ``at`` through the underlying interpolated profile.
    """

    h_slice: ToeplitzSlice
    grid: Grid
    values: np.ndarray  # (n, n, 2, 2)

    def at(self, x, t) -> np.ndarray:
        return _f_blocks(self.h_slice, x, t)


def build_F(h_slice: ToeplitzSlice, grid: Grid) -> SquareKernel:
    """Sample F on the grid square; needs H resolved at least twice as finely."""
    if h_slice.step > grid.step / 2.0 + 1e-12:
        raise ValueError("H must be sampled with step at most half the grid step")
    nodes = grid.nodes
    values = _f_blocks(h_slice, nodes[:, None], nodes[None, :])
    return SquareKernel(h_slice=h_slice, grid=grid, values=values)


@dataclass(frozen=True)
class PositivityReport:
    """Certificate for I + F: smallest eigenvalue and principal-block check."""

    min_eigenvalue: float
    passed: bool
    first_failing_block: int | None
    dim: int

    def __bool__(self):
        return self.passed


def _first_failing_minor(t: np.ndarray) -> int:
    """0 if Cholesky succeeds, else the 1-based order of the failing minor."""
    _, info = scipy.linalg.lapack.dpotrf(t, lower=1)
    return int(info)


def check_positivity(f_kernel: SquareKernel, grid: Grid | None = None,
                     *, raise_on_fail: bool = False) -> PositivityReport:
    """Minimal eigenvalue of I + W^(1/2) F W^(1/2) and all leading blocks.

    W holds the quadrature weights (block size 2).  The leading principal
    block family is tested in a single triangular factorization pass; its
    positivity is the discrete version of the trivial-kernel condition that
    makes the integral equations uniquely soluble.
    """
    grid = f_kernel.grid if grid is None else grid
    w = grid.weights
    n = len(w)
    sqw = np.sqrt(w)
    scaled = f_kernel.values * sqw[:, None, None, None] * sqw[None, :, None, None]
    big = scaled.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)
    t = np.eye(2 * n) + 0.5 * (big + big.T)
    min_eig = float(scipy.linalg.eigvalsh(t, subset_by_index=[0, 0])[0])
    info = _first_failing_minor(t)
    passed = info == 0 and min_eig > 0.0
    report = PositivityReport(min_eigenvalue=min_eig, passed=passed,
                              first_failing_block=None if info == 0
                              else (info - 1) // 2, dim=2 * n)
    if raise_on_fail and not passed:
        raise NotPositive(report.first_failing_block
                          if report.first_failing_block is not None else 0)
    return report


# ---------------------------------------------------------------------------
# the convolution-kernel equation (per-slice Toeplitz systems)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KreinSolution:
    """Rows R~(x_i, s_j) at cell midpoints s_j for every grid node x_i.

    Every row lives in the algebra {a I + b B} and is stored as complex
    numbers; ``diag`` holds the boundary trace R~(x_i, 0) whose product
    with J B is the potential.  When the dense trace is requested, the
    trace is also evaluated at the cell midpoints (each midpoint station
    gets its own slice system), halving the sampling step of the recovered
    potential without refining the discretization.
    """

    grid: Grid
    rows: np.ndarray        # complex, (n_nodes, m)
    diag: np.ndarray        # complex, (n_nodes,)
    residual_norm: float
    trace_x: np.ndarray | None = None   # (2m+1,) stations, when dense
    trace: np.ndarray | None = None     # complex trace at the stations

    @property
    def diag_blocks(self) -> np.ndarray:
        return _blocks_from_complex(self.diag)

    def row_blocks(self, i: int) -> np.ndarray:
        return _blocks_from_complex(self.rows[i, :i])

    def r_tilde_at(self, i: int, ts) -> np.ndarray:
        """Complex values of R~(x_i, t) by interpolation between midpoints.

        Below the first midpoint the row is extended linearly toward the
        extrapolated t = 0 trace; beyond the last midpoint (a quarter cell)
        it is extended linearly from the two outermost values.
        """
        h = self.grid.step
        ts = np.asarray(ts, dtype=float)
        if i == 0:
            return np.full(ts.shape, self.diag[0])
        mids = (np.arange(i) + 0.5) * h
        pts = np.concatenate([[0.0], mids])
        vals = np.concatenate([[self.diag[i]], self.rows[i, :i]])
        end = vals[-1] + (vals[-1] - vals[-2]) * ((self.grid.nodes[i] - pts[-1])
                                                  / (pts[-1] - pts[-2]))
        pts = np.concatenate([pts, [self.grid.nodes[i]]])
        vals = np.concatenate([vals, [end]])
        re = np.interp(ts, pts, vals.real)
        im = np.interp(ts, pts, vals.imag)
        return re + 1j * im

    def to_tri_kernel(self) -> TriKernel:
        n = len(self.grid)
        nodes = self.grid.nodes
        values = np.zeros((n, n, 2, 2))
        for i in range(n):
            values[i, : i + 1] = _blocks_from_complex(
                self.r_tilde_at(i, nodes[: i + 1]))
        return TriKernel(self.grid, values)


def _krein_matrix(h_slice: ToeplitzSlice, grid: Grid):
    """Complex Toeplitz data for the transposed per-slice systems.

    The unknown row solves rho (I + A) = -b with A_{jk} = h eta((j-k)h);
    transposing gives the Hermitian Toeplitz matrix T with first column
    delta_k0 + h eta(-k h) and first row delta_0j + h eta(j h).
    """
    h = grid.step
    m = grid.n_cells
    ks = np.arange(m)
    col = h * h_slice.complex_at(-ks * h)
    row = h * h_slice.complex_at(ks * h)
    col[0] += 1.0
    row[0] = col[0]
    rhs_all = h_slice.complex_at((ks + 0.5) * h)  # eta((p + 1/2) h)
    return col, row, rhs_all


def _station_trace(h_slice: ToeplitzSlice, x: float, m: int,
                   levinson: bool) -> complex:
    """R~(x, 0) from a standalone slice [0, x] with m uniform cells.

    The slice system is solved at its cell midpoints and the t = 0 value
    collocates the equation there: R~(x, 0) = -H(x) - integral R~(x, s) H(s) ds.
    """
    hp = x / m
    s = (np.arange(m) + 0.5) * hp
    ks = np.arange(m)
    col = hp * h_slice.complex_at(-ks * hp)
    row = hp * h_slice.complex_at(ks * hp)
    col[0] += 1.0
    row[0] = col[0]
    rhs = -h_slice.complex_at(x - s)
    if levinson:
        rho = scipy.linalg.solve_toeplitz((col, row), rhs)
    else:
        rho = np.linalg.solve(scipy.linalg.toeplitz(col, row), rhs)
    return complex(-h_slice.complex_at(x) - hp * np.sum(rho * h_slice.complex_at(s)))


def solve_krein(h_slice: ToeplitzSlice, grid: Grid, *, levinson: bool = False,
                workers: int | None = None, cond_limit: float = 1e12,
                diag_mode: str = "collocation",
                dense_trace: bool = False) -> KreinSolution:
    """Solve the convolution-kernel equation slice by slice.

    For each node x_i > 0 the sub-grid of [0, x_i] with midpoint cells gives
    a complex Toeplitz system; dense solves are the default and the Levinson
    recursion is an optional fast path.  The t = 0 trace is recorded either
    by collocating the equation at t = 0 (``collocation``, default; exact to
    the same order as the slice quadrature) or by first-order extrapolation
    from the two cells nearest the boundary (``extrapolate``).  With
    ``dense_trace`` the trace is additionally computed at the cell-midpoint
    stations, each through its own slice system of the same resolution.
    """
    if not grid.is_uniform:
        raise ValueError("the convolution solver requires a uniform grid")
    if diag_mode not in ("collocation", "extrapolate"):
        raise ValueError("diag_mode must be 'collocation' or 'extrapolate'")
    m = grid.n_cells
    h = grid.step
    col, row, rhs_all = _krein_matrix(h_slice, grid)
    t_full = scipy.linalg.toeplitz(col, row)

    cond = np.linalg.cond(t_full)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularSystem(m, float(cond))

    rows = np.zeros((m + 1, m), dtype=complex)
    diag = np.zeros(m + 1, dtype=complex)
    diag[0] = -h_slice.complex_at(0.0)

    def solve_slice(i):
        rhs = -rhs_all[:i][::-1]
        if levinson:
            return scipy.linalg.solve_toeplitz((col[:i], row[:i]), rhs)
        return np.linalg.solve(t_full[:i, :i], rhs)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(solve_slice, range(1, m + 1)))
    else:
        solved = [solve_slice(i) for i in range(1, m + 1)]

    residual = 0.0
    mid_cells = (np.arange(m) + 0.5) * h
    for i, rho in zip(range(1, m + 1), solved):
        rows[i, :i] = rho
        if diag_mode == "extrapolate" and i >= 2:
            diag[i] = 1.5 * rho[0] - 0.5 * rho[1]
        else:
            diag[i] = -h_slice.complex_at(grid.nodes[i]) \
                - h * np.sum(rho * h_slice.complex_at(mid_cells[:i]))
        res = t_full[:i, :i] @ rho + rhs_all[:i][::-1]
        residual = max(residual, float(np.max(np.abs(res))))

    trace_x = trace = None
    if dense_trace:
        trace_x = np.arange(2 * m + 1) * (0.5 * h)
        trace = np.empty(2 * m + 1, dtype=complex)
        trace[0::2] = diag

        def mid_station(k):
            x = trace_x[2 * k + 1]
            return _station_trace(h_slice, x, k + 1, levinson)

        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                mids = list(pool.map(mid_station, range(m)))
        else:
            mids = [mid_station(k) for k in range(m)]
        trace[1::2] = mids

    return KreinSolution(grid=grid, rows=rows, diag=diag,
                         residual_norm=residual, trace_x=trace_x, trace=trace)


def recover_potential(sol: KreinSolution, *, tol: float = 1e-6,
                      hard_tol: float = 1e-3) -> Potential:
    """Q(x) = R~(x, 0) J B as a sampled potential.

    Uses the dense trace stations when present (grid nodes and midpoints),
    the grid nodes otherwise.  The product is checked (and, within ``tol``,
    symmetrized) against the required symmetric trace-free form; a defect
    above ``hard_tol`` signals upstream corruption and is rejected.
    """
    if sol.trace is not None:
        nodes = sol.trace_x
        blocks = _blocks_from_complex(sol.trace) @ _JB
    else:
        nodes = sol.grid.nodes
        blocks = sol.diag_blocks @ _JB
    return potential_from_matrix_samples(nodes, blocks,
                                         tol=tol, hard_tol=hard_tol)


# ---------------------------------------------------------------------------
# the triangular equation (full block systems) and factorization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GlmSolution:
    """Rows K(x_i, s_j) of the triangular-kernel equation at cell midpoints."""

    grid: Grid
    rows: np.ndarray        # (n_nodes, m, 2, 2)
    residual_norm: float

    def row(self, i: int) -> np.ndarray:
        return self.rows[i, :i]

    def to_tri_kernel(self) -> TriKernel:
        n = len(self.grid)
        h = self.grid.step
        nodes = self.grid.nodes
        values = np.zeros((n, n, 2, 2))
        for i in range(1, n):
            mids = (np.arange(i) + 0.5) * h
            for comp_a in range(2):
                for comp_b in range(2):
                    values[i, : i + 1, comp_a, comp_b] = np.interp(
                        nodes[: i + 1], mids, self.rows[i, :i, comp_a, comp_b])
        return TriKernel(self.grid, values)


def _midpoint_blocks(f_kernel: SquareKernel, grid: Grid):
    h = grid.step
    m = grid.n_cells
    mids = (np.arange(m) + 0.5) * h
    fm = f_kernel.at(mids[:, None], mids[None, :])      # (m, m, 2, 2)
    b_rows = f_kernel.at(grid.nodes[:, None], mids[None, :])  # (n, m, 2, 2)
    return mids, fm, b_rows


def _to_scalar(blocks: np.ndarray) -> np.ndarray:
    m, k = blocks.shape[0], blocks.shape[1]
    return blocks.transpose(0, 2, 1, 3).reshape(2 * m, 2 * k)


def solve_glm(f_kernel: SquareKernel, grid: Grid, *,
              workers: int | None = None) -> GlmSolution:
    """Solve the triangular-kernel equation with full 2x2 blocks per slice.

    Same per-node strategy as the convolution solver; the system matrix is
    the symmetric midpoint discretization of I + F restricted to [0, x_i].
    """
    if not grid.is_uniform:
        raise ValueError("the triangular solver requires a uniform grid")
    h = grid.step
    m = grid.n_cells
    _, fm, b_rows = _midpoint_blocks(f_kernel, grid)
    t_full = np.eye(2 * m) + h * _to_scalar(fm)
    t_full = 0.5 * (t_full + t_full.T)

    rows = np.zeros((m + 1, m, 2, 2))

    def solve_slice(i):
        rhs = -_to_scalar(b_rows[i:i + 1, :i]).T    # (2i, 2)
        sol = np.linalg.solve(t_full[: 2 * i, : 2 * i], rhs)
        return sol.reshape(i, 2, 2).transpose(0, 2, 1)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(solve_slice, range(1, m + 1)))
    else:
        solved = [solve_slice(i) for i in range(1, m + 1)]
    for i, blk in zip(range(1, m + 1), solved):
        rows[i, :i] = blk

    residual = glm_residual(rows, f_kernel, grid)
    return GlmSolution(grid=grid, rows=rows, residual_norm=residual)


def glm_residual(rows: np.ndarray, f_kernel: SquareKernel, grid: Grid) -> float:
    """Max block residual of K + F + integral K F over all slices."""
    h = grid.step
    m = grid.n_cells
    _, fm, b_rows = _midpoint_blocks(f_kernel, grid)
    worst = 0.0
    for i in range(1, m + 1):
        ki = rows[i, :i]
        res = ki + b_rows[i, :i] + h * np.einsum("jab,jkbc->kac", ki, fm[:i, :i])
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def k_rows_from_krein(sol: KreinSolution) -> np.ndarray:
    """Rebuild the triangular kernel from the convolution solution.

    K(x, t) = 1/2 [ R~(x, (x+t)/2) + R~(x, (x-t)/2) J ]; the half-arguments
    are read off the stored rows by linear interpolation in t.
    """
    grid = sol.grid
    h = grid.step
    m = grid.n_cells
    rows = np.zeros((m + 1, m, 2, 2))
    for i in range(1, m + 1):
        mids = (np.arange(i) + 0.5) * h
        x = grid.nodes[i]
        z_plus = sol.r_tilde_at(i, 0.5 * (x + mids))
        z_minus = sol.r_tilde_at(i, 0.5 * (x - mids))
        rows[i, :i] = 0.5 * (_blocks_from_complex(z_plus)
                             + _blocks_from_complex(z_minus) @ J)
    return rows


@dataclass(frozen=True)
class FactorizationResult:
    """Triangular factors of the discretized I + F with diagnostics.

    ``k_plus_rows`` samples the lower factor's kernel exactly like the
    triangular-equation solver (rows per node, columns per cell midpoint),
    ``k_minus_rows`` holds the adjoint kernel's blocks, and the defects
    certify (I + K+)(I + A)(I + K+)* = I at the discrete level.
    """

    grid: Grid
    k_plus_rows: np.ndarray
    k_minus_rows: np.ndarray
    unit_defect: float
    reassembly_residual: float


def discrete_factorization(f_kernel: SquareKernel, grid: Grid) -> FactorizationResult:
    """Block triangular factorization of the midpoint Nystrom matrix.

    A Cholesky pass factors T = I + A; failure pinpoints the first
    non-positive leading block.  The per-node kernel rows are then read off
    with two triangular solves per slice, reproducing the triangular
    equation's solution by construction (the factorization and that equation
    encode the same discrete identity).
    """
    if not grid.is_uniform:
        raise ValueError("the factorization requires a uniform grid")
    h = grid.step
    m = grid.n_cells
    _, fm, b_rows = _midpoint_blocks(f_kernel, grid)
    t_full = np.eye(2 * m) + h * _to_scalar(fm)
    t_full = 0.5 * (t_full + t_full.T)

    c, info = scipy.linalg.lapack.dpotrf(t_full, lower=1)
    if info != 0:
        raise NotPositive((int(info) - 1) // 2)
    c = np.tril(c)

    # unit block-lower factor and block diagonal: T = L D L^T
    unit_defect = 0.0
    reassembly = 0.0
    cd = np.zeros_like(c)
    for k in range(m):
        blk = c[2 * k: 2 * k + 2, 2 * k: 2 * k + 2]
        cd[2 * k: 2 * k + 2, 2 * k: 2 * k + 2] = blk
        d_blk = blk @ blk.T
        unit_defect = max(unit_defect, float(np.max(np.abs(d_blk - np.eye(2)))))
    l_unit = scipy.linalg.solve_triangular(cd.T, c.T, lower=False).T
    d_full = cd @ cd.T
    reassembly = float(np.max(np.abs(l_unit @ d_full @ l_unit.T - t_full)))

    rows = np.zeros((m + 1, m, 2, 2))
    for i in range(1, m + 1):
        rhs = -_to_scalar(b_rows[i:i + 1, :i]).T
        y = scipy.linalg.solve_triangular(c[: 2 * i, : 2 * i], rhs, lower=True)
        sol = scipy.linalg.solve_triangular(c[: 2 * i, : 2 * i].T, y, lower=False)
        rows[i, :i] = sol.reshape(i, 2, 2).transpose(0, 2, 1)

    k_minus = rows.transpose(0, 1, 3, 2).copy()
    return FactorizationResult(grid=grid, k_plus_rows=rows,
                               k_minus_rows=k_minus,
                               unit_defect=unit_defect,
                               reassembly_residual=reassembly)
