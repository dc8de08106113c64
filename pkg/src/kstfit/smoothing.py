"""Penalized tensor-product spline smoothing.

Noisy samples on a full uniform grid are projected onto a tensor-product
B-spline surface by minimizing

    mean_i (s(x_i) - z_i)^2  +  penalty * E2(s),

where E2 is the sum over all second-order coordinate pairs of the squared
derivative L2 norms (the thin-plate energy in 2-d).  The data term is the
mean squared residual, not the raw sum, so penalty values near 1 mean the
same thing on every grid size and match the RMS-based error bound checked
in the tests.  Affine functions span the null space of E2, so they are
reproduced exactly for every penalty.  The normal matrix depends only on
(grid, config) and is factored once and reused across columns.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import cho_factor, cho_solve

from .bsplines import UniformBSplineBasis


@dataclass(frozen=True)
class SmoothingConfig:
    """Penalty weight, spline degree, per-axis segment count and the
    per-interval Gauss-Legendre resolution of the energy quadrature."""

    penalty: float = 1.0
    degree: int = 3
    segments: int = 12
    quad_points: int = 4

    def __post_init__(self):
        if self.penalty < 0:
            raise ValueError("penalty must be >= 0")
        if self.segments < 4:
            raise ValueError("need at least 4 segments per axis")
        if self.degree not in (2, 3):
            raise ValueError("smoothing degree must be 2 or 3")
        if self.quad_points < self.degree + 1:
            raise ValueError("quadrature too coarse for exact energy")

    @property
    def coeffs_per_axis(self):
        return self.segments + self.degree

    def axis_basis(self):
        return UniformBSplineBasis(count=self.coeffs_per_axis,
                                   degree=self.degree, upper=1.0)

    @property
    def ident(self):
        return (f"pen{self.penalty:g}-deg{self.degree}"
                f"-seg{self.segments}-q{self.quad_points}")


@dataclass(frozen=True)
class SmoothSurface:
    """Tensor-product spline on the unit cube; coeffs has one axis per
    coordinate."""

    coeffs: np.ndarray
    degree: int
    segments: int

    @property
    def d(self):
        return self.coeffs.ndim


def _axis_design(degree, segments, t):
    basis = UniformBSplineBasis(count=segments + degree, degree=degree,
                                upper=1.0)
    dm = BSpline.design_matrix(np.clip(t, 0.0, 1.0), basis.knots, degree,
                               extrapolate=False)
    return np.asarray(dm.todense())


@lru_cache(maxsize=32)
def _axis_grams(degree, segments, quad_points):
    """Gram matrices of derivative orders 0, 1, 2 on [0, 1], by exact
    per-interval Gauss-Legendre quadrature."""
    basis = UniformBSplineBasis(count=segments + degree, degree=degree,
                                upper=1.0)
    ncf = basis.count
    breaks = np.linspace(0.0, 1.0, segments + 1)
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    grams = []
    for order in range(3):
        g = np.zeros((ncf, ncf))
        for a, b in zip(breaks[:-1], breaks[1:]):
            t = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            w = 0.5 * (b - a) * weights
            cols = np.empty((len(t), ncf))
            for j in range(ncf):
                c = np.zeros(ncf)
                c[j] = 1.0
                spl = BSpline(basis.knots, c, degree)
                cols[:, j] = spl.derivative(order)(t) if order else spl(t)
            g += (cols * w[:, None]).T @ cols
        grams.append(g)
    return grams


def _second_order_multi_indices(d):
    """Multi-indices |alpha| = 2 with their multinomial weights."""
    out = []
    for a, b in combinations_with_replacement(range(d), 2):
        alpha = np.zeros(d, dtype=int)
        alpha[a] += 1
        alpha[b] += 1
        out.append((tuple(alpha), 1 if a == b else 2))
    return out


def energy_matrix(d, cfg):
    """Dense quadratic form of the thin-plate-type energy on coefficient
    vectors (C-order flattening of the coefficient tensor)."""
    grams = _axis_grams(cfg.degree, cfg.segments, cfg.quad_points)
    total = None
    for alpha, weight in _second_order_multi_indices(d):
        term = np.array([[weight]])
        for a in range(d):
            term = np.kron(term, grams[alpha[a]])
        total = term if total is None else total + term
    return total


def thin_plate_energy(surface, quad_points=4):
    """Energy of a surface: zero exactly on affine functions."""
    cfg = SmoothingConfig(degree=surface.degree, segments=surface.segments,
                          quad_points=quad_points)
    grams = _axis_grams(cfg.degree, cfg.segments, cfg.quad_points)
    c = surface.coeffs
    total = 0.0
    for alpha, weight in _second_order_multi_indices(c.ndim):
        t = c
        for a in range(c.ndim):
            t = np.moveaxis(np.tensordot(grams[alpha[a]], t, axes=(1, a)),
                            0, a)
        total += weight * float(np.sum(c * t))
    return max(total, 0.0)


class GridSmoother:
    """Factored penalized normal equations for one (grid, config) pair.

    denoise() solves for one or many sample columns; the factorization is
    shared read-only, so column batches are embarrassingly parallel.
    """

    def __init__(self, grid, cfg):
        if not grid.is_grid:
            raise ValueError("smoothing needs a full uniform grid")
        self.grid = grid
        self.cfg = cfg
        self.d = grid.d
        self.shape = tuple(len(a) for a in grid.grid_axes)
        self.designs = [_axis_design(cfg.degree, cfg.segments, a)
                        for a in grid.grid_axes]
        ncf = cfg.coeffs_per_axis
        if len(grid) < ncf ** self.d:
            raise ValueError(
                f"{len(grid)} grid points cannot determine {ncf ** self.d} "
                f"coefficients")
        ata = np.array([[1.0]])
        for b in self.designs:
            ata = np.kron(ata, b.T @ b)
        normal = ata / len(grid) + cfg.penalty * energy_matrix(self.d, cfg)
        try:
            self._cho = cho_factor(normal)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"singular penalized normal system: {exc}")
        self._ncf = ncf

    def _rhs(self, values):
        """A^T z for a stack of sample columns, shape (N, m)."""
        m = values.shape[1]
        t = values.reshape(self.shape + (m,), order="F")
        for a in range(self.d):
            t = np.moveaxis(np.tensordot(self.designs[a].T, t, axes=(1, a)),
                            0, a)
        return t.reshape(-1, m)

    def denoise(self, values):
        """Coefficient tensors of the smoothed columns.

        values has shape (N,) or (N, m); returns one SmoothSurface or a
        list of them.
        """
        v = np.asarray(values, dtype=float)
        single = v.ndim == 1
        v = v.reshape(len(v), -1)
        if v.shape[0] != len(self.grid):
            raise ValueError("sample count does not match the grid")
        x = cho_solve(self._cho, self._rhs(v) / len(self.grid))
        shape = (self._ncf,) * self.d
        surfaces = [SmoothSurface(coeffs=x[:, c].reshape(shape),
                                  degree=self.cfg.degree,
                                  segments=self.cfg.segments)
                    for c in range(v.shape[1])]
        return surfaces[0] if single else surfaces


def denoise_samples(values, grid, cfg):
    """Minimizer of the penalized least-squares functional for samples on
    a full uniform grid."""
    return GridSmoother(grid, cfg).denoise(values)


def eval_surface(surface, x, chunk=65536):
    """Surface values at one point (d,) or a stack (N, d)."""
    xa = np.asarray(x, dtype=float)
    single = xa.ndim == 1
    pts = xa.reshape(-1, surface.d)
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ValueError("points outside the unit cube")
    out = np.empty(len(pts))
    for lo in range(0, len(pts), chunk):
        sub = pts[lo:lo + chunk]
        t = surface.coeffs
        # contract one axis at a time against per-point basis rows
        designs = [_axis_design(surface.degree, surface.segments, sub[:, a])
                   for a in range(surface.d)]
        t = np.tensordot(designs[0], t, axes=(1, 0))  # (p, rest...)
        for a in range(1, surface.d):
            t = np.einsum("pi,pi...->p...", designs[a], t)
        out[lo:lo + chunk] = t
    return float(out[0]) if single else out


def eval_surface_on_grid(surface, grid):
    """Fast path for tensor grids; returns values in grid row order."""
    if not grid.is_grid:
        return eval_surface(surface, grid.points)
    t = surface.coeffs
    for a in range(surface.d):
        b = _axis_design(surface.degree, surface.segments, grid.grid_axes[a])
        t = np.moveaxis(np.tensordot(b, t, axes=(1, a)), 0, a)
    return t.reshape(-1, order="F")


@dataclass(frozen=True)
class LKBBasis:
    """Denoised versions of the kept design-matrix columns."""

    surfaces: list
    kept: np.ndarray
    config: SmoothingConfig
    kb_id: str = ""
    grid_id: str = ""

    @property
    def n_columns(self):
        return len(self.surfaces)

    @property
    def d(self):
        return self.surfaces[0].d

    def combine(self, coefficients):
        """The surface sum_j coefficients[j] * column_j; linear combos of
        tensor splines stay in the space, so this is exact."""
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (self.n_columns,):
            raise ValueError("coefficient length must match column count")
        acc = np.zeros_like(self.surfaces[0].coeffs)
        for w, s in zip(c, self.surfaces):
            if w != 0.0:
                acc += w * s.coeffs
        return SmoothSurface(coeffs=acc, degree=self.config.degree,
                             segments=self.config.segments)

    def design_matrix(self, pts):
        """(|pts|, n_columns) samples of every column at the points."""
        cols = np.empty((len(pts), self.n_columns))
        for j, s in enumerate(self.surfaces):
            cols[:, j] = (eval_surface_on_grid(s, pts) if pts.is_grid
                          else eval_surface(s, pts.points))
        return cols


def build_lkb_basis(kb_basis, grid, cfg, prune_tol=1e-10, raw_matrix=None):
    """Denoise every kept raw column independently on the grid.

    raw_matrix may pass in a previously assembled (and possibly pruned)
    design matrix for the same basis and grid to avoid recomputation.
    """
    from .kb import assemble_design_matrix, prune_near_zero_columns

    if raw_matrix is None:
        raw_matrix = prune_near_zero_columns(
            assemble_design_matrix(kb_basis, grid), tol=prune_tol)
    smoother = GridSmoother(grid, cfg)
    try:
        surfaces = smoother.denoise(raw_matrix.values)
    except ValueError as exc:
        raise ValueError(f"denoising failed on columns "
                         f"{list(raw_matrix.kept)}: {exc}")
    return LKBBasis(surfaces=surfaces, kept=raw_matrix.kept.copy(),
                    config=cfg, kb_id=raw_matrix.basis_id,
                    grid_id=raw_matrix.points_id)


def eval_lkb(basis, j, x):
    """Denoised column j at a point or point stack."""
    if not 0 <= j < basis.n_columns:
        raise IndexError(f"column {j} out of range 0..{basis.n_columns - 1}")
    return eval_surface(basis.surfaces[j], x)
