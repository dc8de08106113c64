"""Monotone inner functions and superposition maps on the unit cube.

The family consists of d weights ``lambda_i`` and 2d+1 strictly increasing
piecewise-linear functions ``phi_q`` on [0,1].  Each phi is built from a
hierarchy of "town" intervals: at rank k, family q covers [0,1] with closed
towns of length 2d*g_k separated by open gaps of length g_k (period
(2d+1)*g_k), family q being family 0 translated by q*g_k.  Gaps of the
2d+1 families tile each period, so any coordinate misses the towns of at
most one family per rank.  Values are assigned so that on every town phi
is nearly constant (a thin value window) and the windows are spread out
enough that the images of distinct town cubes under

    z_q(x) = sum_i lambda_i * phi_q(x_i)

are pairwise disjoint intervals.  Window separation is measured on the
constructed tables (exhaustively up to a size cap, extrapolated beyond)
and the windows are re-tightened or perturbed until the margin holds.
"""

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)

# Largest number of town cubes (T**d) enumerated inside the tuning loop,
# and the larger cap used by the final verification pass.
_BUILD_CHECK_CAP = 2 ** 21
_FINAL_CHECK_CAP = 2 ** 27
# Safety margin between the widest cube image and the smallest image gap
# (disjointness itself needs > 1; the excess absorbs measurement noise).
_SEP_MARGIN = 1.25
# Smallest admissible value-window increment before float64 ties appear.
_WIDTH_FLOOR = 128.0 * np.finfo(float).eps


def default_rank(d):
    """Deepest construction rank whose value windows fit in float64.

    The cube-image separation shrinks by a factor around (2d+2)**-d per
    rank, so double precision supports rank 4 only up to d = 2.
    """
    if d <= 2:
        return 4
    return 3 if d == 3 else 1


def superposition_weights(d):
    """The d fixed weights: fractional parts of sqrt(p_i), p_i the i-th
    prime, rescaled so the largest weight is just below 1."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if d > len(_PRIMES):
        raise ValueError(f"dimension {d} > {len(_PRIMES)} not supported")
    lam = np.array([math.sqrt(p) % 1.0 for p in _PRIMES[:d]])
    return lam * (0.9999 / lam.max())


def gap_width(d, k):
    """Gap length g_k at rank k: g_1 = 1/(2d+1)^2, ratio 1/(2d+2)."""
    return (1.0 / (2 * d + 1) ** 2) * (1.0 / (2 * d + 2)) ** (k - 1)


def town_intervals(d, k, q):
    """Closed town intervals of family q at rank k, clipped to [0,1].

    Returns an (m, 2) array of [left, right] with right - left <= 2d*g_k.
    Boundary towns may be partial, down to single points.
    """
    g = gap_width(d, k)
    period = (2 * d + 1) * g
    length = 2 * d * g
    j_lo = math.floor((-q * g - length) / period)
    j_hi = math.ceil((1.0 - q * g) / period)
    rows = []
    for j in range(j_lo, j_hi + 1):
        lo = q * g + j * period
        hi = lo + length
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        if hi >= lo and lo <= 1.0 and hi >= 0.0:
            rows.append((lo, hi))
    return np.array(rows)


@dataclass(frozen=True)
class InnerFamily:
    """Weights, phi tables and town combinatorics of one construction.

    phis[q] is an (m, 2) array of (x, phi(x)) nodes, strictly increasing in
    both columns, with phi(0) = 0 and phi(1) = 1.  towns[k-1][q] is the
    (m, 2) array of rank-k town intervals of family q.
    """

    d: int
    rank: int
    lambdas: np.ndarray
    phis: list = field(repr=False)
    towns: list = field(repr=False)

    @property
    def n_phi(self):
        return 2 * self.d + 1

    @property
    def lambda_sum(self):
        return float(self.lambdas.sum())


def _min_cube_gap(anchors, lambdas, cap=_BUILD_CHECK_CAP):
    """Smallest gap between the weighted d-fold sums of the anchors.

    Exhaustive over all len(anchors)**d combinations when that count is
    within cap; returns None when it is not.  Equal sums give gap 0.
    """
    t = len(anchors)
    d = len(lambdas)
    if t == 0 or t ** d > cap:
        return None if t ** d > cap else math.inf
    sums = lambdas[0] * anchors
    for i in range(1, d):
        sums = (sums[..., None] + lambdas[i] * anchors).ravel()
    if sums.size < 2:
        return math.inf
    sums.sort()
    return float(np.diff(sums).min())


def _assign_widths(lengths, unit_ids, town_caps, town_lens, tilt):
    """Distribute a unit value budget over the final segments.

    Walks the rank hierarchy top-down.  Within a cell, rank-k town pieces
    receive thin windows drawn from the global per-town budget
    (town_caps[k] per full town of length town_lens[k], prorated), and the
    remaining budget flows to gap pieces proportional to their rise
    capacity: the length not covered by any deeper-rank town.  Full gaps
    between sibling towns have identical capacity, so sibling anchors fall
    on local arithmetic progressions, which keeps the weighted cube sums
    spread out instead of collapsing birthday-style.
    """
    nseg, rank = unit_ids.shape
    widths = np.zeros(nseg)
    len_cum = np.concatenate([[0.0], np.cumsum(lengths)])
    # rise_cum[k]: cumulative length free of towns at ranks >= k (0-based);
    # rise_cum[rank] counts every segment.
    rise_cum = []
    for k in range(rank + 1):
        deeper = (unit_ids[:, k:] % 2 == 1).any(axis=1)
        free = np.where(deeper, 0.0, lengths) * tilt
        rise_cum.append(np.concatenate([[0.0], np.cumsum(free)]))

    stack = [(0, nseg, 1.0, 0)]
    while stack:
        lo, hi, w_cell, k = stack.pop()
        if w_cell <= 0.0 or hi <= lo:
            continue
        if k == rank:
            # Bottom: spread across the final segments of this piece.
            widths[lo:hi] = (w_cell * lengths[lo:hi]
                             / (len_cum[hi] - len_cum[lo]))
            continue
        ids = unit_ids[lo:hi, k]
        cut = np.flatnonzero(ids[1:] != ids[:-1]) + lo + 1
        starts = np.concatenate([[lo], cut])
        ends = np.concatenate([cut, [hi]])
        is_town = unit_ids[starts, k] % 2 == 1
        glen = len_cum[ends] - len_cum[starts]

        piece_w = np.zeros(len(starts))
        piece_w[is_town] = town_caps[k] * glen[is_town] / town_lens[k]
        gap = ~is_town
        rc = rise_cum[k + 1]
        rise = rc[ends[gap]] - rc[starts[gap]]
        tw_sum = piece_w.sum()
        if gap.any() and rise.sum() > 0.0:
            if tw_sum > 0.5 * w_cell:
                piece_w *= 0.5 * w_cell / tw_sum
                tw_sum = piece_w.sum()
            piece_w[gap] = (w_cell - tw_sum) * rise / rise.sum()
        else:
            # Nowhere to rise: fall back to plain length proportion.
            piece_w = w_cell * glen / glen.sum()
        for s, e, w in zip(starts, ends, piece_w):
            stack.append((s, e, w, k + 1))
    return widths


def _build_phi(d, rank, q, lambdas, attempt):
    """Construct one phi table; returns (table, towns_per_rank)."""
    towns_per_rank = [town_intervals(d, k, q) for k in range(1, rank + 1)]
    flat_per_rank = [t.ravel() for t in towns_per_rank]

    edges = np.unique(np.concatenate([np.array([0.0, 1.0])] + flat_per_rank))
    mids = 0.5 * (edges[:-1] + edges[1:])
    lengths = np.diff(edges)
    nseg = len(mids)

    # unit_ids[s, k-1]: which rank-k town/gap unit segment s falls in,
    # encoded so odd values mean "inside a town".
    unit_ids = np.empty((nseg, rank), dtype=np.int64)
    for k in range(rank):
        unit_ids[:, k] = np.searchsorted(flat_per_rank[k], mids, side="right")

    # Node index of each town's endpoints in the edge array (exact floats).
    li = [np.searchsorted(edges, t[:, 0]) for t in towns_per_rank]
    ri = [np.searchsorted(edges, t[:, 1]) for t in towns_per_rank]

    counts = [len(t) for t in towns_per_rank]
    lam_sum = float(lambdas.sum())
    town_lens = [2 * d * gap_width(d, k) for k in range(1, rank + 1)]

    # Deterministic symmetry-breaking tilt, engaged only on retries.
    if attempt == 0:
        tilt = np.ones(nseg)
    else:
        rng = np.random.default_rng(776_003 * attempt + 131 * q + 7 * d + rank)
        tilt = 1.0 + rng.integers(-8, 9, size=nseg) / 64.0

    # Per-rank budget of one full town's value window.
    caps = np.array([0.02 / (3.0 * lam_sum * (2 * d + 2)) ** (k - 1)
                     for k in range(1, rank + 1)])

    def solve(cap):
        widths = _assign_widths(lengths, unit_ids, caps, town_lens, tilt)
        widths = np.where(lengths > 0, np.maximum(widths, _WIDTH_FLOOR), 0.0)
        vals = np.concatenate([[0.0], np.cumsum(widths)])
        vals /= vals[-1]
        vals[-1] = 1.0
        # Separation and widest window per rank.  Ranks whose cube count
        # exceeds cap get a separation extrapolated by the last measured
        # per-rank shrink ratio (pigeonhole-like decay).
        report = []
        seps = []
        for k in range(rank):
            anchors = vals[li[k]]
            maxw = float((vals[ri[k]] - anchors).max())
            sep = _min_cube_gap(anchors, lambdas, cap=cap)
            measured = sep is not None
            if not measured:
                ratio = seps[-1] / seps[-2] if len(seps) >= 2 else 1e-4
                sep = seps[-1] * min(ratio, 1.0)
            seps.append(sep)
            report.append((sep, maxw, measured))
        return vals, report

    def tighten(report):
        """Shrink caps of crowded ranks; True when the windows already sit
        on the float64 floor and cannot be thinned further."""
        floored = False
        for k, (sep, maxw, measured) in enumerate(report):
            if maxw * lam_sum * _SEP_MARGIN > sep:
                if caps[k] <= _WIDTH_FLOOR:
                    if measured:
                        floored = True
                    continue
                caps[k] = max(caps[k] * 0.9 * sep
                              / (_SEP_MARGIN * lam_sum * maxw),
                              0.5 * _WIDTH_FLOOR)
        return floored

    vals = None
    for _ in range(10):
        vals, report = solve(_BUILD_CHECK_CAP)
        bad = [k for k, (sep, maxw, _) in enumerate(report)
               if maxw * lam_sum * _SEP_MARGIN > sep]
        if not bad:
            break
        if tighten(report):
            return None, None
    # Verify exhaustively at the larger cap (this is what decides for
    # ranks the tuning loop could only extrapolate).
    for _ in range(4):
        vals, report = solve(_FINAL_CHECK_CAP)
        bad = [k for k, (sep, maxw, measured) in enumerate(report)
               if measured and maxw * lam_sum * _SEP_MARGIN > sep]
        if not bad:
            break
        if tighten(report):
            return None, None
    else:
        return None, None

    if not (np.all(np.diff(vals) > 0.0) and np.all(np.diff(edges) > 0.0)):
        return None, None
    table = np.column_stack([edges, vals])
    return table, towns_per_rank


@lru_cache(maxsize=8)
def _build_cached(d, rank):
    lambdas = superposition_weights(d)
    phis, towns_by_q = [], []
    for q in range(2 * d + 1):
        table = None
        for attempt in range(8):
            table, towns_per_rank = _build_phi(d, rank, q, lambdas, attempt)
            if table is not None:
                break
        if table is None:
            raise RuntimeError(
                f"could not assign disjoint value windows for family q={q} "
                f"(d={d}, rank={rank}); refinement too deep for float64")
        phis.append(table)
        towns_by_q.append(towns_per_rank)
    # towns[k-1][q]
    towns = [[towns_by_q[q][k] for q in range(2 * d + 1)]
             for k in range(rank)]
    return InnerFamily(d=d, rank=rank, lambdas=lambdas, phis=phis,
                       towns=towns)


def build_inner_family(d, rank=None):
    """Build the weight/phi family for dimension d at construction depth
    ``rank`` (default: default_rank(d)).  Deterministic: identical
    (d, rank) give identical tables.

    Raises ValueError when the rank-``rank`` towns are too narrow for
    float64, RuntimeError when no admissible value assignment is found.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if rank is None:
        rank = default_rank(d)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if 2 * d * gap_width(d, rank) < 1e-14:
        raise ValueError(
            f"rank {rank} towns are narrower than 1e-14; construction "
            f"would underflow double precision")
    return _build_cached(d, rank)


def eval_phi(family, q, x):
    """Evaluate phi_q at x in [0,1] (scalar or array)."""
    if not 0 <= q <= 2 * family.d:
        raise IndexError(f"q must be in 0..{2 * family.d}, got {q}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa > 1.0):
        raise ValueError("phi argument outside [0, 1]")
    table = family.phis[q]
    out = np.interp(xa, table[:, 0], table[:, 1])
    return float(out) if np.isscalar(x) or xa.ndim == 0 else out


def eval_z(family, q, x):
    """z_q(x) = sum_i lambda_i phi_q(x_i) for x in [0,1]^d.

    x has shape (d,) or (..., d); the result drops the last axis.
    """
    xa = np.asarray(x, dtype=float)
    if xa.shape[-1] != family.d:
        raise ValueError(f"expected last axis of size {family.d}")
    if np.any(xa < 0.0) or np.any(xa > 1.0):
        raise ValueError("point outside the unit cube")
    table = family.phis[q]
    vals = np.interp(xa, table[:, 0], table[:, 1])
    out = vals @ family.lambdas
    return float(out) if xa.ndim == 1 else out


def forward_superpose(family, g, x):
    """sum_q g(z_q(x)); g must accept float arrays on [0, d]."""
    xa = np.asarray(x, dtype=float)
    single = xa.ndim == 1
    acc = None
    for q in range(family.n_phi):
        term = np.asarray(g(eval_z(family, q, xa)), dtype=float)
        acc = term if acc is None else acc + term
    return float(acc) if single else acc


def make_kl_function(family, kind, scale=1.0, basis=None, index=None):
    """A d-variate evaluator built by superposing a univariate profile.

    kind is one of 'linear' (C*t), 'sin' (sin(C*t)), 'exp' (exp(-C*t)),
    'chirp' (sin(C*t^2/2)) or 'bspline' (basis function ``index`` of a
    univariate basis on [0, d], passed via ``basis``).
    """
    if not np.isfinite(scale):
        raise ValueError("scale must be finite")
    c = float(scale)
    if kind == "linear":
        g = lambda t: c * t
    elif kind == "sin":
        g = lambda t: np.sin(c * t)
    elif kind == "exp":
        g = lambda t: np.exp(-c * t)
    elif kind == "chirp":
        g = lambda t: np.sin(c * t * t / 2.0)
    elif kind == "bspline":
        if basis is None or index is None:
            raise ValueError("kind='bspline' needs basis= and index=")
        g = lambda t: basis.eval_one(index, t)
    else:
        raise ValueError(f"unknown profile kind {kind!r}")

    def f(x):
        return forward_superpose(family, g, x)

    f.profile = g
    return f


_MAGIC = b"KSTI"
_FORMAT_VERSION = 1


def save_inner_family(family, path):
    """Write the family to a little-endian binary file."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _FORMAT_VERSION, family.d, family.rank))
        fh.write(np.ascontiguousarray(family.lambdas, "<f8").tobytes())
        for table in family.phis:
            fh.write(struct.pack("<Q", len(table)))
            fh.write(np.ascontiguousarray(table, "<f8").tobytes())


def load_inner_family(path):
    """Read a family written by save_inner_family.

    Towns are reconstructed from (d, rank); tables are taken from the file
    and must match what build_inner_family would produce.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not an inner-family file (bad magic)")
    version, d, rank = struct.unpack_from("<III", data, 4)
    if version != _FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    off = 16
    lambdas = np.frombuffer(data, "<f8", d, off).copy()
    off += 8 * d
    phis = []
    for _ in range(2 * d + 1):
        (m,) = struct.unpack_from("<Q", data, off)
        off += 8
        if off + 16 * m > len(data):
            raise ValueError(f"{path}: truncated table block")
        phis.append(np.frombuffer(data, "<f8", 2 * m, off).reshape(m, 2).copy())
        off += 16 * m
    towns = [[town_intervals(d, k, q) for q in range(2 * d + 1)]
             for k in range(1, rank + 1)]
    return InnerFamily(d=d, rank=rank, lambdas=lambdas, phis=phis,
                       towns=towns)
