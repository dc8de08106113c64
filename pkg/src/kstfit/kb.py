"""Composed spline basis over the unit cube and its sampled design
matrices.

Column j of the basis is sum_q b_j(z_q(x)) with b_j a univariate B-spline
on [0, d] and z_q the weighted superposition maps.  Because the maps only
reach sum(lambda) < d, a block of trailing columns is identically zero;
pruning removes those before any fitting."""

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.interpolate import BSpline

from .bsplines import UniformBSplineBasis
from .inner import eval_z


@dataclass(frozen=True)
class PointSet:
    """Points in [0,1]^d with a fixed enumeration order.

    Grids enumerate lexicographically with the first axis fastest, so
    row i has coordinates (axes[0][i % n1], axes[1][(i // n1) % n2], ...).
    """

    d: int
    points: np.ndarray
    grid_axes: tuple = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.d:
            raise ValueError(f"points must have shape (N, {self.d})")
        if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
            raise ValueError("points must lie in the unit cube")
        object.__setattr__(self, "points", pts)

    @classmethod
    def grid(cls, d, per_axis):
        """Uniform tensor grid with per_axis points along every axis."""
        if np.isscalar(per_axis):
            per_axis = (int(per_axis),) * d
        if len(per_axis) != d or any(n < 2 for n in per_axis):
            raise ValueError("need >= 2 grid points per axis")
        axes = tuple(np.linspace(0.0, 1.0, n) for n in per_axis)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel(order="F") for m in mesh], axis=-1)
        return cls(d=d, points=pts, grid_axes=axes)

    @classmethod
    def from_points(cls, pts):
        pts = np.asarray(pts, dtype=float)
        return cls(d=pts.shape[1], points=pts)

    @property
    def is_grid(self):
        return self.grid_axes is not None

    def __len__(self):
        return len(self.points)

    @property
    def ident(self):
        if self.is_grid:
            return ("grid-" + "x".join(str(len(a)) for a in self.grid_axes))
        digest = hashlib.sha256(
            np.ascontiguousarray(self.points).tobytes()).hexdigest()[:12]
        return f"points-{len(self.points)}-{digest}"


@dataclass(frozen=True)
class KBBasis:
    """d*n composed basis functions built from an inner family and a
    clamped uniform B-spline basis on [0, d]."""

    family: object
    n: int
    degree: int = 3
    univariate: UniformBSplineBasis = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        uni = UniformBSplineBasis(count=self.family.d * self.n,
                                  degree=self.degree,
                                  upper=float(self.family.d))
        object.__setattr__(self, "univariate", uni)

    @property
    def d(self):
        return self.family.d

    @property
    def n_columns(self):
        return self.family.d * self.n

    @property
    def ident(self):
        return (f"kb-d{self.d}-n{self.n}-deg{self.degree}"
                f"-rank{self.family.rank}")

    def z_values(self, pts):
        """(2d+1, N) array of superposition values at the points."""
        out = np.empty((self.family.n_phi, len(pts)))
        for q in range(self.family.n_phi):
            out[q] = eval_z(self.family, q, pts)
        return out


def eval_kb(basis, j, x):
    """Basis column j at a point (or (N, d) array of points)."""
    if not 0 <= j < basis.n_columns:
        raise IndexError(f"column {j} out of range 0..{basis.n_columns - 1}")
    xa = np.asarray(x, dtype=float)
    single = xa.ndim == 1
    pts = xa.reshape(-1, basis.d)
    z = basis.z_values(pts)
    acc = np.zeros(len(pts))
    for q in range(z.shape[0]):
        acc += basis.univariate.eval_one(j, z[q])
    return float(acc[0]) if single else acc


@dataclass(frozen=True)
class DesignMatrix:
    """Dense samples of basis columns at a point set, with bookkeeping of
    which original columns survived pruning."""

    values: np.ndarray
    kept: np.ndarray
    basis_id: str = ""
    points_id: str = ""

    @property
    def shape(self):
        return self.values.shape

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("design matrix entries must be finite")
        if self.values.shape[1] != len(self.kept):
            raise ValueError("kept-column map does not match value columns")


def assemble_design_matrix(basis, pts, max_bytes=2 ** 32):
    """Dense (|pts|, d*n) matrix with entry (i, j) = column j at point i.

    The memory footprint is checked against max_bytes before anything is
    allocated.
    """
    n_rows, n_cols = len(pts), basis.n_columns
    need = n_rows * n_cols * 8
    if need > max_bytes:
        raise MemoryError(
            f"design matrix would need {need} bytes (> {max_bytes}); "
            f"raise max_bytes to override")
    z = basis.z_values(pts.points)
    uni = basis.univariate
    acc = None
    for q in range(z.shape[0]):
        dm = sparse.csr_matrix(BSpline.design_matrix(
            np.clip(z[q], 0.0, uni.upper), uni.knots, uni.degree,
            extrapolate=False))
        acc = dm if acc is None else acc + dm
    values = np.asarray(acc.todense())
    return DesignMatrix(values=values, kept=np.arange(n_cols),
                        basis_id=basis.ident, points_id=pts.ident)


def prune_near_zero_columns(matrix, tol=1e-10):
    """Drop columns whose norm is at most tol times the largest column
    norm; exact zeros always go.  Pruning twice changes nothing."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    norms = np.linalg.norm(matrix.values, axis=0)
    cutoff = tol * norms.max() if norms.size else 0.0
    keep = norms > cutoff
    if not keep.any():
        raise ValueError("every column pruned; basis is degenerate here")
    return DesignMatrix(values=matrix.values[:, keep],
                        kept=matrix.kept[keep],
                        basis_id=matrix.basis_id,
                        points_id=matrix.points_id)


def independence_check(basis, pts, rel_tol=None):
    """Numerical-rank report for the nonzero columns sampled at pts.

    independent=True means the nonzero-column submatrix has full column
    rank at this sampling resolution (SVD threshold rel_tol * sigma_1,
    default max(N, m) * eps).
    """
    raw = assemble_design_matrix(basis, pts)
    nonzero = prune_near_zero_columns(raw, tol=0.0)
    n_rows, n_cols = nonzero.shape
    if n_rows < n_cols:
        raise ValueError(
            f"need at least {n_cols} points to check {n_cols} columns")
    svals = np.linalg.svd(nonzero.values, compute_uv=False)
    if rel_tol is None:
        rel_tol = max(n_rows, n_cols) * np.finfo(float).eps
    rank = int(np.sum(svals > rel_tol * svals[0]))
    return {
        "n_nonzero_columns": n_cols,
        "rank": rank,
        "independent": rank == n_cols,
        "smallest_singular_value": float(svals[n_cols - 1]),
    }
