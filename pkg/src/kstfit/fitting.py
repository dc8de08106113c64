"""Discrete least-squares fitting over sampled basis columns, plus greedy
sparse fitting by orthogonal matching pursuit."""

import json
from dataclasses import dataclass, field

import numpy as np

from .smoothing import eval_surface, eval_surface_on_grid

# Relative singular-value threshold of the rank-revealing solve.
LSTSQ_RCOND = 1e-10
# Correlations below this mean the residual is numerically orthogonal.
OMP_STAGNATION = 1e-14


def rms_seminorm(values):
    """sqrt(mean(v_i^2)): the root-mean-square over the sample set."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("rms of an empty sample set is undefined")
    return float(np.sqrt(np.mean(v * v)))


@dataclass
class FitResult:
    """Coefficients over the kept columns plus bookkeeping.

    method is 'dls', 'omp' or 'pivotal'; support lists the active local
    column indices for sparse fits; eval_rmse is filled by evaluate_fit.
    """

    coefficients: np.ndarray
    training_rmse: float
    method: str
    basis_id: str = ""
    points_id: str = ""
    eval_rmse: float = None
    support: np.ndarray = None
    stagnated: bool = False

    def to_dict(self):
        return {
            "method": self.method,
            "basis_id": self.basis_id,
            "points_id": self.points_id,
            "training_rmse": self.training_rmse,
            "eval_rmse": self.eval_rmse,
            "stagnated": self.stagnated,
            "support": None if self.support is None
            else [int(i) for i in self.support],
            "coefficients": [float(c) for c in self.coefficients],
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, data):
        return cls(
            coefficients=np.asarray(data["coefficients"], dtype=float),
            training_rmse=data["training_rmse"],
            method=data["method"],
            basis_id=data.get("basis_id", ""),
            points_id=data.get("points_id", ""),
            eval_rmse=data.get("eval_rmse"),
            support=None if data.get("support") is None
            else np.asarray(data["support"], dtype=int),
            stagnated=data.get("stagnated", False),
        )

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def dls_fit(matrix, f_values):
    """Minimum-norm least-squares fit of the samples by the columns.

    Rank-deficient systems get the unique minimum-norm solution (SVD with
    relative threshold LSTSQ_RCOND), so repeated runs are bit-identical.
    """
    f = np.asarray(f_values, dtype=float)
    if f.shape != (matrix.values.shape[0],):
        raise ValueError(
            f"expected {matrix.values.shape[0]} target values, got {f.shape}")
    coef, _, _, _ = np.linalg.lstsq(matrix.values, f, rcond=LSTSQ_RCOND)
    resid = rms_seminorm(matrix.values @ coef - f)
    return FitResult(coefficients=coef, training_rmse=resid, method="dls",
                     basis_id=matrix.basis_id, points_id=matrix.points_id)


def evaluate_fit(fit, lkb_basis, pts, f):
    """RMS of (fit - f) over the point set, recorded on the fit.

    The fitted function is collapsed into a single tensor-product surface
    (linear combinations stay in the space), so evaluation never builds a
    design matrix over the evaluation grid.
    """
    surface = lkb_basis.combine(fit.coefficients)
    approx = (eval_surface_on_grid(surface, pts) if pts.is_grid
              else eval_surface(surface, pts.points))
    target = np.asarray(f(pts.points), dtype=float)
    err = rms_seminorm(approx - target)
    fit.eval_rmse = err
    return err


def omp_fit(matrix, f_values, sparsity=None, residual_tol=None):
    """Greedy sparse fit: repeatedly add the column most correlated with
    the residual, re-solving least squares on the active set.

    Columns are compared after normalization to unit Euclidean norm; ties
    break toward the lowest index; reported coefficients live on the
    original (unnormalized) columns.  Stops at the requested sparsity or
    residual tolerance, or flags stagnation when every remaining column is
    numerically orthogonal to the residual.
    """
    if sparsity is None and residual_tol is None:
        raise ValueError("need a sparsity or a residual tolerance to stop")
    f = np.asarray(f_values, dtype=float)
    m = matrix.values
    if f.shape != (m.shape[0],):
        raise ValueError(f"expected {m.shape[0]} target values")
    norms = np.linalg.norm(m, axis=0)
    usable = norms > 0
    phi = np.where(usable, norms, 1.0)
    normalized = m / phi

    budget = min(m.shape) if sparsity is None else min(sparsity, *m.shape)
    active = []
    coef_active = np.zeros(0)
    residual = f.copy()
    stagnated = False
    while len(active) < budget:
        if residual_tol is not None and rms_seminorm(residual) <= residual_tol:
            break
        corr = np.abs(normalized.T @ residual)
        corr[~usable] = 0.0
        if active:
            corr[active] = 0.0
        best = int(np.argmax(corr))  # argmax takes the lowest index on ties
        if corr[best] < OMP_STAGNATION:
            stagnated = True
            break
        active.append(best)
        coef_active, _, _, _ = np.linalg.lstsq(m[:, active], f,
                                               rcond=LSTSQ_RCOND)
        residual = f - m[:, active] @ coef_active
    coef = np.zeros(m.shape[1])
    coef[active] = coef_active
    return FitResult(coefficients=coef, training_rmse=rms_seminorm(residual),
                     method="omp", basis_id=matrix.basis_id,
                     points_id=matrix.points_id,
                     support=np.array(sorted(active), dtype=int),
                     stagnated=stagnated)
