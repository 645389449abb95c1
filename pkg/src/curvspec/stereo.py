"""Gyrovector operations in the kappa-stereographic model.

One coordinate chart covers all three constant-curvature geometries: the
Poincare ball for kappa < 0, the stereographic sphere for kappa > 0, and
flat space at kappa = 0, with domain {z : -kappa * ||z||^2 < 1}.  The
curvature-dependent trigonometry routes through ``tan_k`` (tan for
positive, tanh for negative curvature) with explicit sqrt(|kappa|)
scalings in each formula.

Array functions operate on rows of shape (..., d) and accept either
numpy arrays or :class:`~curvspec.tensor.Tensor` tape nodes; curvature
may itself be a scalar tape node so it can be trained.  At kappa = 0
every operation short-circuits to its flat counterpart.  Note the one
deliberate seam: ``dist`` at exactly kappa = 0 is the plain Euclidean
norm, while the kappa -> 0 limit of the curved formula is twice that
(the conformal factor at the origin is 2), so distance is the one
operation without flat-limit continuity.

Mobius addition is non-associative; iterated sums are always folded
strictly left to right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T

_BOUNDARY_MARGIN = 1e-5  # radial projection pullback inside the ball
_DOMAIN_MARGIN = 1e-6  # validation margin, looser than projection
_TINY = 1e-15


class StereoError(ValueError):
    """Invalid gyrovector operation (domain, mismatch, or singularity)."""


def kappa_sign(kappa) -> int:
    k = float(T.data_of(kappa))
    return (k > 0) - (k < 0)


def sqrt_abs_kappa(kappa):
    sign = kappa_sign(kappa)
    if sign == 0:
        raise StereoError("sqrt|kappa| undefined for flat space in curved formulas")
    return T.sqrt(kappa if sign > 0 else 0.0 - kappa)


def tan_k(u, kappa):
    """tan(u) for kappa > 0, tanh(u) for kappa < 0, u for kappa = 0."""
    sign = kappa_sign(kappa)
    if sign > 0:
        if np.any(np.abs(np.cos(T.data_of(u))) < 1e-12):
            raise StereoError("tan_k evaluated too close to a pole")
        return T.tan(u)
    if sign < 0:
        return T.tanh(u)
    return u


def arctan_k(u, kappa):
    sign = kappa_sign(kappa)
    if sign > 0:
        return T.arctan(u)
    if sign < 0:
        if np.any(np.abs(T.data_of(u)) >= 1.0):
            raise StereoError("arctan_k argument outside (-1, 1) for kappa < 0")
        return T.arctanh(u)
    return u


def _sq_norm(x):
    return T.sum_(x * x, axis=-1, keepdims=True)


def _safe_norm(x, placeholder: float = 1.0):
    """Row norms with zero rows replaced by a harmless placeholder.

    Every caller multiplies the resulting coefficient back by the row
    itself, so the placeholder never leaks into values; it only has to
    keep divisions finite and transcendental arguments inside their
    domains (callers feeding arctanh/tan pass placeholder 0.5/sqrt|kappa|).
    """
    sq = _sq_norm(x)
    mask = T.data_of(sq) > 0.0
    return T.sqrt(T.where(mask, sq, float(placeholder) ** 2))


def _norm_placeholder(kappa) -> float:
    return 0.5 / float(T.data_of(sqrt_abs_kappa(kappa)))


def conformal_factor(x, kappa):
    """lambda_x = 2 / (1 + kappa ||x||^2)."""
    return 2.0 / (1.0 + kappa * _sq_norm(x))


def project(x, kappa):
    """Pull points that drifted to the boundary back inside the ball.

    Only kappa < 0 has a finite domain radius; positive and zero
    curvature pass through unchanged.
    """
    if kappa_sign(kappa) >= 0:
        return x
    radius = (1.0 - _BOUNDARY_MARGIN) / sqrt_abs_kappa(kappa)
    norm = _safe_norm(x)
    outside = T.data_of(norm) > float(T.data_of(radius))
    if not np.any(outside):
        return x
    return T.where(outside, x * (radius / norm), x)


def mobius_add(x, y, kappa):
    """Curvature-aware vector addition; x + y at kappa = 0."""
    if kappa_sign(kappa) == 0:
        return x + y
    x2 = _sq_norm(x)
    y2 = _sq_norm(y)
    xy = T.sum_(x * y, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * kappa * xy + kappa * y2) * x + (1.0 - kappa * x2) * y
    den = 1.0 + 2.0 * kappa * xy + (kappa * kappa) * x2 * y2
    if np.any(np.abs(T.data_of(den)) < _TINY):
        raise StereoError("mobius_add denominator vanished (antipodal points)")
    return project(num / den, kappa)


def expmap0(v, kappa):
    """Exponential map at the origin; identity at kappa = 0."""
    if kappa_sign(kappa) == 0:
        return v
    sk = sqrt_abs_kappa(kappa)
    norm = _safe_norm(v, _norm_placeholder(kappa))
    coef = tan_k(sk * norm, kappa) / (sk * norm)
    return project(coef * v, kappa)


def logmap0(y, kappa):
    """Logarithmic map at the origin; identity at kappa = 0."""
    if kappa_sign(kappa) == 0:
        return y
    sk = sqrt_abs_kappa(kappa)
    norm = _safe_norm(y, _norm_placeholder(kappa))
    coef = arctan_k(sk * norm, kappa) / (sk * norm)
    return coef * y


def expmap(x, v, kappa):
    """Exponential map at x; x + v at kappa = 0."""
    if kappa_sign(kappa) == 0:
        return x + v
    sk = sqrt_abs_kappa(kappa)
    lam = conformal_factor(x, kappa)
    norm = _safe_norm(v, _norm_placeholder(kappa))
    coef = tan_k(sk * lam * norm / 2.0, kappa) / (sk * norm)
    return mobius_add(x, coef * v, kappa)


def logmap(x, y, kappa):
    """Logarithmic map at x, the inverse of :func:`expmap`; y - x at kappa = 0."""
    if kappa_sign(kappa) == 0:
        return y - x
    sk = sqrt_abs_kappa(kappa)
    lam = conformal_factor(x, kappa)
    w = mobius_add(-1.0 * x, y, kappa)
    norm = _safe_norm(w, _norm_placeholder(kappa))
    coef = (2.0 / (sk * lam)) * arctan_k(sk * norm, kappa) / norm
    return coef * w


def _exact_norm(w):
    """Row norms that are exactly zero on zero rows (no placeholder leak)."""
    sq = _sq_norm(w)
    zero = T.data_of(sq) <= 0
    n = T.sqrt(T.where(zero, 1.0, sq))
    return T.where(zero, 0.0 * n, n)


def dist(x, y, kappa):
    """Geodesic distance; plain Euclidean norm at kappa = 0.

    Curved form: (2 / sqrt|kappa|) arctan_k(sqrt|kappa| * ||(-x) + y||).
    """
    if kappa_sign(kappa) == 0:
        return _exact_norm(x - y)[..., 0]
    sk = sqrt_abs_kappa(kappa)
    w = mobius_add(-1.0 * x, y, kappa)
    d = (2.0 / sk) * arctan_k(sk * _exact_norm(w), kappa)
    return d[..., 0]


def dist0(x, kappa):
    """Distance from the origin."""
    if kappa_sign(kappa) == 0:
        return _exact_norm(x)[..., 0]
    sk = sqrt_abs_kappa(kappa)
    d = (2.0 / sk) * arctan_k(sk * _exact_norm(x), kappa)
    return d[..., 0]


def scale(r, x, kappa):
    """Geodesic scalar multiple r (x) = exp_0(r * log_0(x)); r * x when flat.

    Satisfies d(0, r (x) x) = |r| d(0, x) and reduces smoothly to plain
    scaling as kappa -> 0.
    """
    if kappa_sign(kappa) == 0:
        return r * x
    return expmap0(r * logmap0(x, kappa), kappa)


def right_matmul(x, w, kappa):
    """Manifold points (rows) times a weight matrix: exp_0(log_0(X) W).

    Implemented in closed form; agrees with the exp/log composition to
    floating-point accuracy.  Zero rows stay at the origin.
    """
    if kappa_sign(kappa) == 0:
        return T.matmul(x, w)
    sk = sqrt_abs_kappa(kappa)
    xw = T.matmul(x, w)
    zero_x = T.data_of(_sq_norm(x)) <= 0.0
    xn = _safe_norm(x, _norm_placeholder(kappa))
    xwn = _safe_norm(xw)
    alpha = T.where(zero_x, 0.0, xwn / xn)
    coef = tan_k(alpha * arctan_k(sk * xn, kappa), kappa) / (sk * xwn)
    return project(coef * xw, kappa)


def gyromidpoint(x, a, kappa):
    """Weighted gyromidpoint of the rows of x under weight rows a.

    m(x; a) = 1/2 (x) [ sum_i a_i lam_i x_i / sum_j a_j (lam_j - 1) ],
    the standard weighted midpoint that reduces to the weighted mean at
    kappa = 0.  Rows of ``a`` whose weights sum to (numerically) zero map
    to the origin, as do rows with a vanishing denominator.
    """
    if kappa_sign(kappa) == 0:
        raise StereoError("gyromidpoint is only defined through the curved path")
    lam = conformal_factor(x, kappa)
    num = T.matmul(a, lam * x)
    den = T.matmul(a, lam - 1.0)
    bad = np.abs(T.data_of(den)) < _TINY
    den = T.where(bad, 1.0, den)
    mid = scale(0.5, num / den, kappa)
    if np.any(bad):
        mid = T.where(bad, 0.0 * mid, mid)
    return mid


def left_matmul(a, x, kappa):
    """Row-stochastic style mixing of manifold rows: (A (*) X).

    Row i is (sum_j A_ij) (x) gyromidpoint(X; A_i), which reduces to the
    ordinary matrix product A X at kappa = 0.  All-zero rows of A map to
    the origin.
    """
    if kappa_sign(kappa) == 0:
        return T.matmul(a, x)
    rowsum = T.sum_(a, axis=-1, keepdims=True)
    zero_rows = np.abs(T.data_of(rowsum)).max(axis=-1, keepdims=True) < _TINY
    mid = gyromidpoint(x, a, kappa)
    out = scale(rowsum, mid, kappa)
    if np.any(zero_rows):
        out = T.where(zero_rows, 0.0 * out, out)
    return project(out, kappa)


@dataclass(frozen=True)
class StereoPoint:
    """A single point of a constant-curvature space with its curvature."""

    coords: np.ndarray
    kappa: float

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1)
        object.__setattr__(self, "coords", coords)
        if not np.all(np.isfinite(coords)):
            raise StereoError("coordinates must be finite")
        if self.kappa < 0:
            radius = (1.0 - _DOMAIN_MARGIN) / np.sqrt(-self.kappa)
            if np.linalg.norm(coords) > radius:
                raise StereoError(
                    f"point norm {np.linalg.norm(coords):.6f} outside the "
                    f"kappa={self.kappa} ball of radius {radius:.6f}"
                )

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def _check_compatible(self, other: "StereoPoint"):
        if self.kappa != other.kappa:
            raise StereoError(f"curvature mismatch: {self.kappa} vs {other.kappa}")
        if self.dim != other.dim:
            raise StereoError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def add(self, other: "StereoPoint") -> "StereoPoint":
        self._check_compatible(other)
        out = mobius_add(self.coords[None, :], other.coords[None, :], self.kappa)
        return StereoPoint(out[0], self.kappa)

    def exp(self, v: np.ndarray) -> "StereoPoint":
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape[0] != self.dim:
            raise StereoError("tangent dimension mismatch")
        out = expmap(self.coords[None, :], v[None, :], self.kappa)
        return StereoPoint(out[0], self.kappa)

    def log(self, y: "StereoPoint") -> np.ndarray:
        self._check_compatible(y)
        return logmap(self.coords[None, :], y.coords[None, :], self.kappa)[0]

    def distance_to(self, y: "StereoPoint") -> float:
        self._check_compatible(y)
        return float(dist(self.coords[None, :], y.coords[None, :], self.kappa)[0])

    def scaled(self, r: float) -> "StereoPoint":
        return StereoPoint(scale(r, self.coords[None, :], self.kappa)[0], self.kappa)

    @classmethod
    def origin(cls, dim: int, kappa: float) -> "StereoPoint":
        return cls(np.zeros(dim), kappa)
