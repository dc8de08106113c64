"""End-to-end experiment pipeline: build (or load) a denoised basis with
its pivotal point set, fit the benchmark functions, and emit the result
tables, convergence slopes and pivotal counts as CSV."""

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import cache as cache_io
from .fitting import dls_fit, evaluate_fit, omp_fit
from .inner import build_inner_family, default_rank
from .kb import (DesignMatrix, KBBasis, PointSet, assemble_design_matrix,
                 prune_near_zero_columns)
from .knet import rate_experiment
from .pivotal import estimate_rank, maxvol_select, pivotal_fit, \
    pivotal_locations
from .smoothing import SmoothingConfig, build_lkb_basis
from .testfuncs import registry

# Relative singular-value threshold fixing the pivotal rank; with the
# mean-normalized unit penalty this lands near the reference pivot counts.
PIPELINE_RANK_TOL = 1e-6
PRUNE_TOL = 1e-10

_DEFAULT_SEGMENTS = {1: 24, 2: 24, 3: 12}
_DEFAULT_EVAL_GRID = {1: 1001, 2: 101, 3: 101}


def default_segments(d):
    return _DEFAULT_SEGMENTS.get(d, 8)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a table/slope/count experiment needs; all fields with
    value 0/None fall back to per-dimension defaults."""

    d: int
    n_list: tuple
    fit_grid: int = 41
    eval_grid: int = 0
    degree: int = 3
    penalty: float = 1.0
    segments: int = 0
    inner_rank: int = 0
    rank_tol: float = PIPELINE_RANK_TOL
    methods: tuple = ("dls", "pivotal")
    cache_dir: str = None

    def resolved(self):
        return {
            "eval_grid": self.eval_grid or _DEFAULT_EVAL_GRID.get(self.d, 41),
            "segments": self.segments or default_segments(self.d),
            "inner_rank": self.inner_rank or default_rank(self.d),
        }


@dataclass
class BasisSet:
    """A built pipeline stage: denoised columns sampled on the fit grid,
    plus the pivotal row/column selection."""

    d: int
    n: int
    fit_grid_per_axis: int
    grid: PointSet
    lkb: object
    matrix: DesignMatrix
    rows: np.ndarray
    cols: np.ndarray

    @property
    def rank(self):
        return len(self.rows)

    @property
    def pivotal_points(self):
        return pivotal_locations(self.grid, self.rows)


def _build_config(d, n, fit_grid, degree, penalty, segments, inner_rank,
                  rank_tol):
    return {
        "d": d, "n": n, "fit_grid": fit_grid, "degree": degree,
        "penalty": penalty, "segments": segments, "inner_rank": inner_rank,
        "rank_tol": rank_tol, "prune_tol": PRUNE_TOL,
    }


def _rank_via_space_gram(lkb, grid, rank_tol):
    """Numerical rank of the column matrix through its tensor-space
    factorization M = B C: the singular values of M equal those of
    W = chol(B^T B)^T C, and W has only dim(space) rows, which keeps the
    cost flat as the column count grows."""
    from scipy.linalg import cholesky
    from .smoothing import _axis_design

    cfg = lkb.config
    gram = np.array([[1.0]])
    for axis in grid.grid_axes:
        b = _axis_design(cfg.degree, cfg.segments, axis)
        gram = np.kron(gram, b.T @ b)
    coeffs = np.stack([s.coeffs.reshape(-1) for s in lkb.surfaces], axis=1)
    w = cholesky(gram, lower=True).T @ coeffs
    eig = np.linalg.eigvalsh(w @ w.T)[::-1]
    svals = np.sqrt(np.clip(eig, 0.0, None))
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals >= rank_tol * svals[0]))


def build_basis_set(d, n, fit_grid=41, degree=3, penalty=1.0, segments=None,
                    inner_rank=None, rank_tol=PIPELINE_RANK_TOL):
    """Full pipeline: inner family -> raw columns on the grid -> prune ->
    denoise -> numerical rank -> dominant row/column sets."""
    segments = segments or default_segments(d)
    inner_rank = inner_rank or default_rank(d)
    family = build_inner_family(d, inner_rank)
    kb = KBBasis(family, n=n, degree=degree)
    grid = PointSet.grid(d, fit_grid)
    raw = prune_near_zero_columns(assemble_design_matrix(kb, grid),
                                  tol=PRUNE_TOL)
    cfg = SmoothingConfig(penalty=penalty, degree=degree, segments=segments)
    lkb = build_lkb_basis(kb, grid, cfg, raw_matrix=raw)
    matrix = DesignMatrix(values=lkb.design_matrix(grid), kept=lkb.kept,
                          basis_id=kb.ident, points_id=grid.ident)
    if matrix.shape[1] <= 2000:
        r = estimate_rank(matrix, rank_tol)
    else:
        r = _rank_via_space_gram(lkb, grid, rank_tol)
    r = min(r, *matrix.shape)
    rows, cols = maxvol_select(matrix, r)
    return BasisSet(d=d, n=n, fit_grid_per_axis=fit_grid, grid=grid,
                    lkb=lkb, matrix=matrix, rows=rows, cols=cols)


def get_basis_set(d, n, cache_dir=None, **kwargs):
    """build_basis_set behind a binary cache: load when a file with a
    matching configuration hash exists, rebuild (with a warning) when the
    file is stale or corrupt."""
    if cache_dir is None:
        return build_basis_set(d, n, **kwargs)
    cfg = _build_config(
        d, n,
        fit_grid=kwargs.get("fit_grid", 41),
        degree=kwargs.get("degree", 3),
        penalty=kwargs.get("penalty", 1.0),
        segments=kwargs.get("segments") or default_segments(d),
        inner_rank=kwargs.get("inner_rank") or default_rank(d),
        rank_tol=kwargs.get("rank_tol", PIPELINE_RANK_TOL))
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"basis-d{d}-n{n}.lkbc")
    if os.path.exists(path):
        try:
            blob = cache_io.read_basis_cache(path, cfg)
            grid = PointSet.grid(d, blob["grid_per_axis"])
            matrix = DesignMatrix(values=blob["matrix"].values,
                                  kept=blob["matrix"].kept,
                                  points_id=grid.ident)
            return BasisSet(d=d, n=n,
                            fit_grid_per_axis=blob["grid_per_axis"],
                            grid=grid, lkb=blob["lkb"], matrix=matrix,
                            rows=blob["rows"], cols=blob["cols"])
        except cache_io.CacheMismatch as exc:
            warnings.warn(f"rebuilding stale basis cache: {exc}")
    basis = build_basis_set(d, n, **kwargs)
    cache_io.write_basis_cache(path, basis, cfg)
    return basis


def _fit_cell(basis, func, eval_pts, method, sparsity=None):
    target = func(basis.grid.points)
    if method == "dls":
        fit = dls_fit(basis.matrix, target)
    elif method == "pivotal":
        fit = pivotal_fit(basis.matrix, basis.rows, basis.cols,
                          target[basis.rows])
    elif method == "omp":
        fit = omp_fit(basis.matrix, target,
                      sparsity=sparsity or basis.rank)
    else:
        raise ValueError(f"unknown method {method!r}")
    evaluate_fit(fit, basis.lkb, eval_pts, func)
    return fit


def run_table_experiment(spec):
    """RMSE table over the registry: one row per function, and per n one
    full-grid column next to one pivotal column whose header carries the
    pivotal sample count.  Returns the CSV text."""
    res = spec.resolved()
    n_list = list(spec.n_list)
    bases = [get_basis_set(spec.d, n, cache_dir=spec.cache_dir,
                           fit_grid=spec.fit_grid, degree=spec.degree,
                           penalty=spec.penalty, segments=spec.segments or None,
                           inner_rank=spec.inner_rank or None,
                           rank_tol=spec.rank_tol)
             for n in n_list]
    eval_pts = PointSet.grid(spec.d, res["eval_grid"])
    header = ["function"]
    for basis, n in zip(bases, n_list):
        for method in spec.methods:
            count = (len(basis.grid) if method != "pivotal"
                     else basis.rank)
            header.append(f"{method} n={n} ({count} samples)")
    lines = [",".join(header)]
    for func in registry(spec.d):
        cells = [func.fid]
        for basis in bases:
            for method in spec.methods:
                fit = _fit_cell(basis, func, eval_pts, method)
                cells.append(f"{fit.eval_rmse:.2e}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def estimate_convergence_slope(errors, n_list):
    """Least-squares slope of log error against log n, with the class
    label the slope implies ('K-Lipschitz' at -1 or steeper, K-Hoelder in
    between, 'non-converging' otherwise, 'exact' for zero errors)."""
    errors = np.asarray(errors, dtype=float)
    if len(errors) != len(n_list):
        raise ValueError("need one error per n")
    if len(errors) < 3:
        raise ValueError("need at least 3 sizes to fit a slope")
    if np.any(errors == 0.0):
        return None, "exact"
    slope = float(np.polyfit(np.log(n_list), np.log(errors), 1)[0])
    if slope <= -1.0:
        label = "K-Lipschitz"
    elif slope < 0.0:
        label = f"K-Hoelder({-slope:.2f})"
    else:
        label = "non-converging"
    return slope, label


def run_slope_experiment(spec, fid, method="pivotal"):
    """Per-n eval RMSE of one function plus the fitted slope; CSV text."""
    res = spec.resolved()
    eval_pts = PointSet.grid(spec.d, res["eval_grid"])
    func = next(f for f in registry(spec.d) if f.fid == fid)
    errors = []
    for n in spec.n_list:
        basis = get_basis_set(spec.d, n, cache_dir=spec.cache_dir,
                              fit_grid=spec.fit_grid, degree=spec.degree,
                              penalty=spec.penalty,
                              segments=spec.segments or None,
                              inner_rank=spec.inner_rank or None,
                              rank_tol=spec.rank_tol)
        fit = _fit_cell(basis, func, eval_pts, method)
        errors.append(fit.eval_rmse)
    slope, label = estimate_convergence_slope(errors, list(spec.n_list))
    lines = ["n,eval_rmse"]
    lines += [f"{n},{e:.3e}" for n, e in zip(spec.n_list, errors)]
    lines.append(f"slope,{'nan' if slope is None else f'{slope:.4f}'}")
    lines.append(f"classification,{label}")
    return "\n".join(lines) + "\n", slope, label, errors


def pivotal_count_experiment(spec):
    """(n, pivotal count) pairs and the log-log growth slope; CSV text."""
    counts = []
    for n in spec.n_list:
        basis = get_basis_set(spec.d, n, cache_dir=spec.cache_dir,
                              fit_grid=spec.fit_grid, degree=spec.degree,
                              penalty=spec.penalty,
                              segments=spec.segments or None,
                              inner_rank=spec.inner_rank or None,
                              rank_tol=spec.rank_tol)
        counts.append(basis.rank)
    if np.any(np.diff(counts) < 0):
        warnings.warn(f"pivotal counts not monotone over n: {counts}")
    slope = None
    if len(counts) >= 2:
        slope = float(np.polyfit(np.log(spec.n_list), np.log(counts), 1)[0])
    lines = ["n,pivotal_count"]
    lines += [f"{n},{c}" for n, c in zip(spec.n_list, counts)]
    if slope is not None:
        lines.append(f"slope,{slope:.4f}")
    return "\n".join(lines) + "\n", counts, slope


_PROFILES = {
    "sin": np.sin,
    "sqrt": np.sqrt,
    "linear": lambda t: t,
    "exp": lambda t: np.exp(-t),
    "chirp": lambda t: np.sin(t * t / 2.0),
}


def run_knet_rate(d, profile, n_list, inner_rank=None, grid_per_axis=None):
    """Network sup-error against the family superposition, as CSV."""
    if profile not in _PROFILES:
        raise ValueError(f"unknown profile {profile!r}; "
                         f"choose from {sorted(_PROFILES)}")
    family = build_inner_family(d, inner_rank or default_rank(d))
    res = rate_experiment(family, _PROFILES[profile], list(n_list),
                          grid_per_axis=grid_per_axis)
    lines = ["n,sup_error"]
    lines += [f"{n},{e:.4e}" for n, e in zip(res["n"], res["sup_error"])]
    slope = res["slope"]
    lines.append(f"slope,{'nan' if slope is None else f'{slope:.4f}'}")
    return "\n".join(lines) + "\n", res
