"""2x2 matrix algebra, potential representations and grid primitives.

The whole package works with first-order 2x2 systems built from two
structural constants: the skew generator B (B^2 = -I) and the signature
matrix J = diag(1, -1) (J^2 = I, BJ = -JB).  A potential is the symmetric
trace-free field Q(x) = [[q1, q2], [q2, -q1]] on [0, 1] with q1, q2 real.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StructureViolation

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

__all__ = [
    "B", "J", "I2", "rotation", "mat2_exp", "op_norm", "op_norms",
    "Potential", "Grid", "lp_norm", "l1_distance", "load_potential",
    "save_potential", "potential_from_matrix_samples",
]

B = np.array([[0.0, 1.0], [-1.0, 0.0]])
J = np.array([[1.0, 0.0], [0.0, -1.0]])
I2 = np.eye(2)
for _m in (B, J, I2):
    _m.setflags(write=False)


# ---------------------------------------------------------------------------
# scalar helpers shared with the propagators
# ---------------------------------------------------------------------------

def cos_sqrt(d):
    """cos(sqrt(d)) continued to d < 0 as cosh(sqrt(-d)); series near d = 0."""
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < 1e-8
    pos = ~small & (d > 0)
    neg = ~small & (d < 0)
    ds = d[small]
    out[small] = 1.0 - ds / 2.0 + ds * ds / 24.0
    out[pos] = np.cos(np.sqrt(d[pos]))
    out[neg] = np.cosh(np.sqrt(-d[neg]))
    return out if out.ndim else float(out)


def sinc_sqrt(d):
    """sin(sqrt(d))/sqrt(d), continued through d = 0 and d < 0 (sinh branch)."""
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < 1e-8
    pos = ~small & (d > 0)
    neg = ~small & (d < 0)
    ds = d[small]
    out[small] = 1.0 - ds / 6.0 + ds * ds / 120.0
    rp = np.sqrt(d[pos])
    out[pos] = np.sin(rp) / rp
    rn = np.sqrt(-d[neg])
    out[neg] = np.sinh(rn) / rn
    return out if out.ndim else float(out)


def dsinc_sqrt(d):
    """Derivative of sinc_sqrt with respect to d (needed for d/dlambda of propagators)."""
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < 1e-6
    ds = d[small]
    out[small] = -1.0 / 6.0 + ds / 60.0 - ds * ds / 1680.0
    rest = ~small
    dr = d[rest]
    out[rest] = (cos_sqrt(dr) - sinc_sqrt(dr)) / (2.0 * dr)
    return out if out.ndim else float(out)


def rotation(lam: float, x: float) -> np.ndarray:
    """The plane rotation exp(-lam*x*B) = [[cos, -sin], [sin, cos]](lam*x)."""
    t = lam * x
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def mat2_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential of a real 2x2 matrix via the closed trace-split formula.

    Splits m = (tr m / 2) I + m0 with m0 trace-free; then m0^2 = -det(m0) I,
    so exp(m0) = cos_sqrt(det m0) I + sinc_sqrt(det m0) m0, and the branch
    point det m0 = 0 is handled by the series limit exp(m0) = I + m0.
    """
    m = np.asarray(m, dtype=float)
    half_tr = 0.5 * (m[0, 0] + m[1, 1])
    m0 = m - half_tr * I2
    d = float(np.linalg.det(m0))
    return math.exp(half_tr) * (cos_sqrt(d) * I2 + sinc_sqrt(d) * m0)


def op_norm(m: np.ndarray) -> float:
    """Spectral (Euclidean operator) norm of a single 2x2 matrix."""
    return float(np.linalg.norm(np.asarray(m, dtype=float), 2))


def op_norms(blocks: np.ndarray) -> np.ndarray:
    """Spectral norms of an array of real 2x2 blocks, shape (..., 2, 2).

    Uses the closed form for the larger singular value: with
    a = ||M||_F^2 / 2 and b = |det M|, sigma_max^2 = a + sqrt(a^2 - b^2).
    """
    blocks = np.asarray(blocks, dtype=float)
    a = 0.5 * np.sum(blocks * blocks, axis=(-2, -1))
    det = blocks[..., 0, 0] * blocks[..., 1, 1] - blocks[..., 0, 1] * blocks[..., 1, 0]
    disc = np.sqrt(np.maximum(a * a - det * det, 0.0))
    return np.sqrt(np.maximum(a + disc, 0.0))


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """A trace-free symmetric matrix field Q(x) = [[q1, q2], [q2, -q1]] on [0, 1].

    Two representations are supported:
      * ``piecewise``: x holds k+1 breakpoints, q1/q2 hold k segment values;
        exact propagation and exact L_p norms are available.
      * ``sampled``: x holds node positions, q1/q2 hold node values; values
        between nodes are linearly interpolated.
    """

    kind: str
    x: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    p_exponent: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "q1", np.asarray(self.q1, dtype=float))
        object.__setattr__(self, "q2", np.asarray(self.q2, dtype=float))
        if self.kind not in ("piecewise", "sampled"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.x.ndim != 1 or len(self.x) < 2:
            raise ValueError("need at least two abscissae")
        if not (abs(self.x[0]) < 1e-15 and abs(self.x[-1] - 1.0) < 1e-12):
            raise ValueError("domain must be exactly [0, 1]")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("abscissae must strictly increase")
        want = len(self.x) - 1 if self.kind == "piecewise" else len(self.x)
        if len(self.q1) != want or len(self.q2) != want:
            raise ValueError(
                f"value sequences must have length {want} for kind {self.kind!r}"
            )
        if not (np.all(np.isfinite(self.q1)) and np.all(np.isfinite(self.q2))):
            raise ValueError("potential values must be finite")
        if self.p_exponent < 1:
            raise ValueError("p_exponent must be >= 1")
        self.x.setflags(write=False)
        self.q1.setflags(write=False)
        self.q2.setflags(write=False)

    # -- constructors -------------------------------------------------------

    @classmethod
    def piecewise(cls, breakpoints, q1, q2, p_exponent=2.0):
        return cls("piecewise", breakpoints, q1, q2, p_exponent)

    @classmethod
    def sampled(cls, nodes, q1, q2, p_exponent=2.0):
        return cls("sampled", nodes, q1, q2, p_exponent)

    @classmethod
    def zero(cls):
        return cls("piecewise", [0.0, 1.0], [0.0], [0.0])

    @classmethod
    def constant(cls, q1: float, q2: float = 0.0, p_exponent=2.0):
        return cls("piecewise", [0.0, 1.0], [q1], [q2], p_exponent)

    # -- evaluation ----------------------------------------------------------

    def values_at(self, x):
        """(q1, q2) at points x.

        Piecewise potentials use cell-left semantics at interior breakpoints
        (the value of the segment ending there); x = 0 takes the first segment.
        """
        x = np.asarray(x, dtype=float)
        if self.kind == "piecewise":
            idx = np.searchsorted(self.x, x, side="left") - 1
            idx = np.clip(idx, 0, len(self.q1) - 1)
            return self.q1[idx], self.q2[idx]
        return np.interp(x, self.x, self.q1), np.interp(x, self.x, self.q2)

    def matrix_at(self, x) -> np.ndarray:
        """Q(x) as an array of 2x2 blocks, shape x.shape + (2, 2)."""
        q1, q2 = self.values_at(x)
        q1 = np.asarray(q1)
        out = np.empty(q1.shape + (2, 2))
        out[..., 0, 0] = q1
        out[..., 0, 1] = q2
        out[..., 1, 0] = q2
        out[..., 1, 1] = -q1
        return out

    def modulus_at(self, x):
        """Pointwise operator norm |Q(x)| = sqrt(q1^2 + q2^2)."""
        q1, q2 = self.values_at(x)
        return np.hypot(q1, q2)

    # -- norms ----------------------------------------------------------------

    def lp_norm(self, p: float = None) -> float:
        return lp_norm(self, self.p_exponent if p is None else p)

    @property
    def l1_norm(self) -> float:
        return lp_norm(self, 1.0)

    def sup_modulus(self) -> float:
        return float(np.max(np.hypot(self.q1, self.q2))) if len(self.q1) else 0.0

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        key = "breakpoints" if self.kind == "piecewise" else "nodes"
        return {
            "type": self.kind,
            key: self.x.tolist(),
            "q1": self.q1.tolist(),
            "q2": self.q2.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict):
        kind = data.get("type")
        if kind == "piecewise":
            return cls.piecewise(data["breakpoints"], data["q1"], data["q2"])
        if kind == "sampled":
            return cls.sampled(data["nodes"], data["q1"], data["q2"])
        raise ValueError(f"unknown potential type {kind!r}")


def lp_norm(q: Potential, p: float) -> float:
    """L_p norm of the matrix field, ( integral |Q(t)|^p dt )^(1/p).

    |Q(t)| = sqrt(q1^2 + q2^2) pointwise since Q is a reflection-type matrix
    with eigenvalues +-sqrt(q1^2 + q2^2).  Exact for piecewise-constant
    potentials; composite trapezoid on the nodes for sampled ones.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if q.kind == "piecewise":
        mods = np.hypot(q.q1, q.q2)
        return float(np.sum(mods ** p * np.diff(q.x)) ** (1.0 / p))
    mods = np.hypot(q.q1, q.q2)
    return float(_trapezoid(mods ** p, q.x) ** (1.0 / p))


def l1_distance(qa: Potential, qb: Potential, cells: int = 8192) -> float:
    """Integral of the pointwise operator norm of Q_a - Q_b by midpoint rule.

    The difference field keeps the symmetric trace-free form, so its norm is
    sqrt((dq1)^2 + (dq2)^2) pointwise.
    """
    mids = (np.arange(cells) + 0.5) / cells
    a1, a2 = qa.values_at(mids)
    b1, b2 = qb.values_at(mids)
    return float(np.sum(np.hypot(a1 - b1, a2 - b2)) / cells)


def potential_from_matrix_samples(nodes, blocks, tol: float = 1e-6,
                                  hard_tol: float = 1e-3) -> Potential:
    """Build a sampled Potential from 2x2 blocks, enforcing the required form.

    Asymmetry (Q12 != Q21) or trace residue up to ``tol`` is symmetrized away
    by averaging; beyond ``hard_tol`` the input is rejected as structurally
    off-form.
    """
    blocks = np.asarray(blocks, dtype=float)
    asym = np.max(np.abs(blocks[..., 0, 1] - blocks[..., 1, 0])) if blocks.size else 0.0
    trace = np.max(np.abs(blocks[..., 0, 0] + blocks[..., 1, 1])) if blocks.size else 0.0
    defect = max(float(asym), float(trace))
    if defect > hard_tol:
        raise StructureViolation(
            f"matrix field violates the symmetric trace-free form: "
            f"max asymmetry/trace residue {defect:.3g} exceeds {hard_tol:.3g}"
        )
    q1 = 0.5 * (blocks[..., 0, 0] - blocks[..., 1, 1])
    q2 = 0.5 * (blocks[..., 0, 1] + blocks[..., 1, 0])
    return Potential.sampled(nodes, q1, q2)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Quadrature grid on [0, 1]: increasing nodes with weights summing to 1."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        n = self.nodes
        if n.ndim != 1 or len(n) < 2:
            raise ValueError("grid needs at least two nodes")
        if abs(n[0]) > 1e-15 or abs(n[-1] - 1.0) > 1e-12:
            raise ValueError("grid must span exactly [0, 1]")
        if np.any(np.diff(n) <= 0):
            raise ValueError("grid nodes must strictly increase")
        if len(self.weights) != len(n) or np.any(self.weights < 0):
            raise ValueError("need one nonnegative weight per node")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def uniform(cls, n_cells: int):
        """Uniform grid with n_cells cells and trapezoid weights."""
        if n_cells < 1:
            raise ValueError("need at least one cell")
        nodes = np.linspace(0.0, 1.0, n_cells + 1)
        w = np.full(n_cells + 1, 1.0 / n_cells)
        w[0] *= 0.5
        w[-1] *= 0.5
        return cls(nodes, w)

    @classmethod
    def from_nodes(cls, nodes):
        """Trapezoid weights for arbitrary increasing nodes spanning [0, 1]."""
        nodes = np.asarray(nodes, dtype=float)
        d = np.diff(nodes)
        w = np.zeros(len(nodes))
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        return cls(nodes, w)

    def __len__(self):
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def step(self) -> float:
        """Cell width for uniform grids; raises otherwise."""
        d = np.diff(self.nodes)
        h = d[0]
        if np.max(np.abs(d - h)) > 1e-12:
            raise ValueError("grid is not uniform")
        return float(h)

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.nodes)
        return bool(np.max(np.abs(d - d[0])) <= 1e-12)

    def integrate(self, values) -> float:
        """Weighted sum of nodal values (vector values integrate per component)."""
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def load_potential(path) -> Potential:
    """Read a potential from JSON ({"type": ...}) or CSV (rows x,q1,q2)."""
    path = str(path)
    if path.endswith(".csv"):
        xs, q1, q2 = [], [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().lower() in ("x", ""):
                    continue
                xs.append(float(row[0]))
                q1.append(float(row[1]))
                q2.append(float(row[2]))
        return Potential.sampled(xs, q1, q2)
    with open(path) as fh:
        return Potential.from_dict(json.load(fh))


def save_potential(q: Potential, path) -> None:
    path = str(path)
    if path.endswith(".csv"):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "q1", "q2"])
            if q.kind == "sampled":
                for x, a, b in zip(q.x, q.q1, q.q2):
                    writer.writerow([repr(float(x)), repr(float(a)),
                                     repr(float(b))])
            else:
                for k in range(len(q.q1)):
                    writer.writerow([repr(float(q.x[k])), repr(float(q.q1[k])),
                                     repr(float(q.q2[k]))])
        return
    with open(path, "w") as fh:
        json.dump(q.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
