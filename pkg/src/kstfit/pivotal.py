"""Matrix cross approximation by a greedy dominant-submatrix search.

A rank-r skeleton M ~= M[:, J] M[I, J]^{-1} M[I, :] built from a row set I
and column set J found by alternating maxvol sweeps.  The rows of I name
the "pivotal" sample locations: fitting on those |I| samples alone gives
accuracy comparable to the full point set, and (I, J) depend only on the
matrix, never on the target values.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .fitting import FitResult, rms_seminorm

# Minimal volume improvement a swap must bring to be accepted.
SWAP_MARGIN = 1e-2
# Condition-number limit of the pivotal system.
PIVOTAL_CONDITION_LIMIT = 1e12


def _values(matrix):
    return matrix.values if hasattr(matrix, "values") else \
        np.asarray(matrix, dtype=float)


@dataclass(frozen=True)
class CrossApproximation:
    """Selected rows I, columns J, the Chebyshev residual of the skeleton
    and the (1+r) * sigma_{r+1} certificate bound."""

    rows: np.ndarray
    cols: np.ndarray
    rank: int
    residual_chebyshev: float
    certificate_bound: float
    condition_number: float

    @property
    def ratio(self):
        if self.certificate_bound == 0.0:
            return np.inf if self.residual_chebyshev > 0 else 0.0
        return self.residual_chebyshev / self.certificate_bound


def estimate_rank(matrix, tol=1e-8):
    """Count of singular values above tol * sigma_1 (0 for a zero matrix)."""
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie strictly between 0 and 1")
    m = _values(matrix)
    svals = np.linalg.svd(m, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals >= tol * svals[0]))


def _lu_pivot_order(m):
    """Row order chosen by partially pivoted LU."""
    _, piv = sla.lu_factor(m, check_finite=False)
    order = np.arange(m.shape[0])
    for i, p in enumerate(piv):
        order[i], order[p] = order[p], order[i]
    return order


def _full_pivot_init(m, r, skip=0):
    """Rows/columns of the first r completely pivoted LU steps, optionally
    skipping the `skip` largest residual entries to diversify starts."""
    resid = np.array(m, dtype=float)
    rows, cols = [], []
    banned = []
    for step in range(r + skip):
        a = np.abs(resid)
        for bi, bj in banned:
            a[bi, bj] = -1.0
        i, j = divmod(int(np.argmax(a)), m.shape[1])
        piv = resid[i, j]
        if piv == 0.0:
            break
        if step < skip:
            banned.append((i, j))
            continue
        rows.append(i)
        cols.append(j)
        resid = resid - np.outer(resid[:, j], resid[i, :]) / piv
    return rows, cols


# Above this work estimate (entries * rank) only two starts are tried.
_DIVERSE_START_BUDGET = 2.0e8


def _initial_selections(m, r):
    """Pivoted-LU starting pairs; small problems get extra diversified
    complete-pivot starts because the alternating sweeps only explore
    single swaps and can stall on a local optimum."""
    starts = [_full_pivot_init(m, r)]
    if m.size * r <= _DIVERSE_START_BUDGET:
        starts += [_full_pivot_init(m, r, skip=s) for s in range(1, 6)]
    cols = _lu_pivot_order(m.T)[:r].tolist()
    rows = _lu_pivot_order(m[:, cols])[:r].tolist()
    starts.append((rows, cols))
    return [(list(a), list(b)) for a, b in starts if len(a) == r]


def _sweep_rows(m, rows, cols, log):
    """Swap rows into I while any swap grows |det| by > 1 + margin.

    Keeps B = M[:, J] M[I, J]^{-1} current through rank-one updates, the
    standard maxvol trick, so each swap costs O(n r) instead of a solve.
    """
    changed = False
    try:
        with warnings.catch_warnings():
            # near the numerical rank the pivot block is expected to be
            # poorly conditioned mid-sweep; swaps only improve it
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            b = sla.solve(m[np.ix_(rows, cols)].T, m[:, cols].T,
                          check_finite=False).T
    except sla.LinAlgError:
        return False
    for _ in range(4 * len(rows)):
        flat = int(np.argmax(np.abs(b)))
        i, j = divmod(flat, len(rows))
        gain = abs(b[i, j])
        if gain <= 1.0 + SWAP_MARGIN or i in rows:
            break
        update = b[i, :].copy()
        update[j] -= 1.0
        b -= np.outer(b[:, j] / b[i, j], update)
        rows[j] = i
        log.append(log[-1] * gain)
        changed = True
    return changed


def maxvol_select(matrix, r, with_history=False):
    """Greedy dominant r x r submatrix: pivoted-LU initialization, then
    alternating row and column sweeps, each swap growing the volume by a
    factor above 1 + SWAP_MARGIN (so the loop always terminates).

    Returns (I, J) as sorted index arrays; with_history=True appends the
    relative-volume trace (strictly increasing across accepted swaps).
    """
    m = _values(matrix)
    n_rows, n_cols = m.shape
    if not 1 <= r <= min(n_rows, n_cols):
        raise ValueError(f"rank {r} out of range for a {m.shape} matrix")
    svals = np.linalg.svd(m, compute_uv=False)
    if svals[r - 1] <= max(m.shape) * np.finfo(float).eps * svals[0]:
        achieved = int(np.sum(svals > max(m.shape) * np.finfo(float).eps
                              * svals[0]))
        raise ValueError(
            f"matrix has numerical rank {achieved} < requested {r}")

    best = None
    for rows, cols in _initial_selections(m, r):
        log = [1.0]  # relative volume trace; swaps multiply it up
        for _ in range(64):
            grew = _sweep_rows(m, rows, cols, log)
            grew |= _sweep_rows(m.T, cols, rows, log)
            if not grew:
                break
        _, logvol = np.linalg.slogdet(m[np.ix_(rows, cols)])
        if best is None or logvol > best[0]:
            best = (logvol, rows, cols, log)
    _, rows, cols, log = best
    out = np.array(sorted(rows)), np.array(sorted(cols))
    if with_history:
        return out + (log,)
    return out


def cross_certificate(matrix, rows, cols):
    """(Chebyshev residual, (1+r) sigma_{r+1}) of the skeleton on (I, J)."""
    m = _values(matrix)
    core = m[np.ix_(rows, cols)]
    r = len(rows)
    try:
        mid = sla.solve(core, m[rows, :], check_finite=False)
    except sla.LinAlgError:
        raise ValueError("pivot block M[I, J] is singular")
    residual = float(np.max(np.abs(m - m[:, cols] @ mid)))
    svals = np.linalg.svd(m, compute_uv=False)
    sigma_next = float(svals[r]) if r < len(svals) else 0.0
    return residual, (1 + r) * sigma_next


def build_cross_approximation(matrix, r):
    """maxvol_select plus the certificate, packaged."""
    rows, cols = maxvol_select(matrix, r)
    residual, bound = cross_certificate(matrix, rows, cols)
    m = _values(matrix)
    cond = float(np.linalg.cond(m[np.ix_(rows, cols)]))
    return CrossApproximation(rows=rows, cols=cols, rank=r,
                              residual_chebyshev=residual,
                              certificate_bound=bound,
                              condition_number=cond)


def pivotal_fit(matrix, rows, cols, f_at_rows):
    """Least-squares solve of the pivotal block M[I, J] x ~= f_I, embedded
    as a full-length coefficient vector (zeros off J)."""
    m = _values(matrix)
    f = np.asarray(f_at_rows, dtype=float)
    if f.shape != (len(rows),):
        raise ValueError(f"need {len(rows)} values, one per pivotal row")
    core = m[np.ix_(rows, cols)]
    cond = np.linalg.cond(core)
    if not np.isfinite(cond) or cond > PIVOTAL_CONDITION_LIMIT:
        raise ValueError(
            f"pivotal block is too ill-conditioned (cond={cond:.2e})")
    x, _, _, _ = np.linalg.lstsq(core, f, rcond=None)
    coef = np.zeros(m.shape[1])
    coef[np.asarray(cols)] = x
    resid = rms_seminorm(core @ x - f)
    basis_id = getattr(matrix, "basis_id", "")
    points_id = getattr(matrix, "points_id", "")
    return FitResult(coefficients=coef, training_rmse=resid,
                     method="pivotal", basis_id=basis_id,
                     points_id=points_id,
                     support=np.asarray(cols, dtype=int))


def pivotal_locations(pts, rows):
    """Coordinates of the pivotal rows, in row order."""
    rows = np.asarray(rows, dtype=int)
    if rows.size and (rows.min() < 0 or rows.max() >= len(pts)):
        raise IndexError("pivotal row index out of range")
    return pts.points[rows]
