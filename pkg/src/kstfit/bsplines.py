"""Uniform B-spline bases, linear interpolatory splines and their exact
rewriting as combinations of ReLU hinges."""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline


@dataclass(frozen=True)
class UniformBSplineBasis:
    """count B-splines of the given degree on [0, upper], clamped uniform
    knots, so the basis sums to one everywhere on the interval."""

    count: int
    degree: int = 3
    upper: float = 1.0
    knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.degree not in (1, 2, 3):
            raise ValueError(f"degree must be 1, 2 or 3, got {self.degree}")
        if self.count < self.degree + 1:
            raise ValueError(
                f"need at least degree+1={self.degree + 1} basis functions")
        if self.upper <= 0:
            raise ValueError("upper end must be positive")
        interior = np.linspace(0.0, self.upper, self.count - self.degree + 1)
        knots = np.concatenate([np.zeros(self.degree), interior,
                                np.full(self.degree, self.upper)])
        object.__setattr__(self, "knots", knots)

    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.upper):
            raise ValueError(f"argument outside [0, {self.upper}]")
        return t

    def eval_one(self, j, t):
        """Basis function j at t, by the Cox-de Boor recursion."""
        if not 0 <= j < self.count:
            raise IndexError(f"basis index {j} out of range 0..{self.count - 1}")
        ta = self._check_domain(t)
        if ta.ndim == 0:
            return self._recurse(j, self.degree, float(ta))
        return np.array([self._recurse(j, self.degree, x) for x in ta.ravel()]
                        ).reshape(ta.shape)

    def _recurse(self, i, k, x):
        t = self.knots
        if k == 0:
            if t[i] <= x < t[i + 1]:
                return 1.0
            # close the last nonempty interval at the right end
            if x == self.upper and t[i] < t[i + 1] == self.upper:
                return 1.0
            return 0.0
        left = 0.0
        if t[i + k] > t[i]:
            left = (x - t[i]) / (t[i + k] - t[i]) * self._recurse(i, k - 1, x)
        right = 0.0
        if t[i + k + 1] > t[i + 1]:
            right = ((t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1])
                     * self._recurse(i + 1, k - 1, x))
        return left + right

    def design_matrix(self, t):
        """Dense (len(t), count) matrix of all basis functions at t."""
        ta = np.atleast_1d(self._check_domain(t))
        dm = BSpline.design_matrix(ta, self.knots, self.degree,
                                   extrapolate=False)
        return np.asarray(dm.todense())

    def support(self, j):
        """Knot interval outside which basis function j vanishes."""
        return self.knots[j], self.knots[j + self.degree + 1]


@dataclass(frozen=True)
class LinearSpline:
    """Continuous piecewise-linear function given by values at knots."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape:
            raise ValueError("knots and values must be 1-d and equally long")
        if len(k) < 2 or np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing, >= 2 of them")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        return np.interp(t, self.knots, self.values)


def linear_interpolant(f, knots):
    """The linear spline interpolating f at the given knots."""
    k = np.asarray(knots, dtype=float)
    if k.ndim != 1 or len(k) < 2 or np.any(np.diff(k) <= 0):
        raise ValueError("knots must be strictly increasing, >= 2 of them")
    try:
        vals = np.asarray(f(k), dtype=float)
        if vals.shape != k.shape:
            raise TypeError
    except TypeError:
        vals = np.array([float(f(x)) for x in k])
    return LinearSpline(k, vals)


@dataclass(frozen=True)
class ReluCombination:
    """t -> offset + sum_i c_i * max(t - y_i, 0), biases ascending."""

    coeffs: np.ndarray
    biases: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        y = np.asarray(self.biases, dtype=float)
        if c.shape != y.shape or c.ndim != 1:
            raise ValueError("coeffs and biases must be 1-d and equally long")
        order = np.argsort(y, kind="stable")
        object.__setattr__(self, "coeffs", c[order])
        object.__setattr__(self, "biases", y[order])

    def __len__(self):
        return len(self.coeffs)

    def __call__(self, t):
        return eval_relu_combination(self, t)


def eval_relu_combination(comb, t, chunk=8192):
    """Hinge sum in ascending-bias order; scalar in, scalar out."""
    ta = np.asarray(t, dtype=float)
    scalar = ta.ndim == 0
    flat = np.atleast_1d(ta).ravel()
    out = np.full(flat.shape, comb.offset)
    if len(comb):
        for lo in range(0, len(flat), chunk):
            part = flat[lo:lo + chunk]
            hinges = np.maximum(part[None, :] - comb.biases[:, None], 0.0)
            out[lo:lo + chunk] += comb.coeffs @ hinges
    if scalar:
        return float(out[0])
    return out.reshape(ta.shape)


def linear_spline_to_relu(spline):
    """Exact hinge representation of a linear spline on its interval.

    Uses one hinge per knot except the last (slope changes), so the term
    count is at most n+2 for n+1 knots; hinges with exactly zero weight
    are dropped.
    """
    x, v = spline.knots, spline.values
    slopes = np.diff(v) / np.diff(x)
    coeffs = np.concatenate([[slopes[0]], np.diff(slopes)])
    keep = coeffs != 0.0
    return ReluCombination(coeffs[keep], x[:-1][keep], offset=float(v[0]))
