"""Ellipsoids, confocal quadric families and elliptic coordinates.

Conventions: an ellipsoid in R^{n+1} is <A^-1 x, x> = 1 with
A = diag(a_0, ..., a_n) positive.  The confocal family through a point is
the set of parameters lam with sum_i x_i^2 / (a_i - lam) = 1; for a point
off the coordinate hyperplanes there are exactly n+1 such parameters,
strictly interlacing the sorted axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateChartError,
    DimensionError,
    InvalidCoordsError,
    PoleError,
    SymmetricChartError,
)


def _as_axes(axes) -> np.ndarray:
    a = np.asarray(axes, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise DimensionError("axes must be a 1-d sequence of positive reals")
    if not np.all(a > 0):
        raise ValueError("all squared semi-axes must be positive")
    return a


def _partition_by_value(axes: np.ndarray) -> tuple[tuple[int, ...], ...]:
    """Group indices whose axis values are bitwise equal, in order of first occurrence."""
    groups: dict[float, list[int]] = {}
    for i, a in enumerate(axes):
        groups.setdefault(float(a), []).append(i)
    return tuple(tuple(g) for g in groups.values())


@dataclass(frozen=True)
class EllipsoidSpec:
    """Squared semi-axes of an ellipsoid plus the partition of equal axes."""

    axes: tuple[float, ...]
    partition: tuple[tuple[int, ...], ...] = field(init=False)

    def __init__(self, axes):
        a = _as_axes(axes)
        object.__setattr__(self, "axes", tuple(float(v) for v in a))
        object.__setattr__(self, "partition", _partition_by_value(a))

    @property
    def dim(self) -> int:
        """Dimension n of the ellipsoid (ambient space is R^{n+1})."""
        return len(self.axes) - 1

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.axes)

    @property
    def group_values(self) -> np.ndarray:
        """Distinct axis values, one per partition group."""
        return np.array([self.axes[g[0]] for g in self.partition])

    @property
    def is_symmetric(self) -> bool:
        return len(self.partition) < len(self.axes)


@dataclass(frozen=True)
class EllipticCoords:
    """Confocal parameters through a point (ascending) and coordinate signs."""

    lam: tuple[float, ...]
    signs: tuple[int, ...]

    def __init__(self, lam, signs):
        lam = tuple(float(v) for v in lam)
        signs = tuple(int(s) for s in signs)
        if len(lam) != len(signs):
            raise DimensionError("lam and signs must have equal length")
        if any(s not in (-1, 1) for s in signs):
            raise ValueError("signs must be +1 or -1")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "signs", signs)


@dataclass(frozen=True)
class QuadricParam:
    """Parameter of one member of the confocal family; must avoid the axes."""

    eta: float

    def validate(self, spec: EllipsoidSpec, tol: float = 0.0) -> "QuadricParam":
        if np.min(np.abs(self.eta - spec.a)) <= tol:
            raise PoleError(f"eta={self.eta} coincides with an axis")
        return self


def on_ellipsoid(spec: EllipsoidSpec, x, tol: float = 1e-12) -> bool:
    """Whether <A^-1 x, x> is within tol of 1."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim + 1,):
        raise DimensionError(f"point has shape {x.shape}, expected ({spec.dim + 1},)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    return bool(abs((x / spec.a) @ x - 1.0) <= tol)


def _confocal_lhs(axes: np.ndarray, xsq: np.ndarray, lam: float) -> float:
    # landing exactly on a pole yields +-inf, which the bracketing logic
    # treats as an ordinary sign
    with np.errstate(divide="ignore"):
        return float((xsq / (axes - lam)).sum() - 1.0)


def elliptic_coords(spec: EllipsoidSpec, x) -> EllipticCoords:
    """Confocal parameters (lam_0 <= ... <= lam_n) through x, plus signs.

    Each lam_k is the root of sum x_i^2/(a_i - lam) = 1 bracketed in its
    interlacing interval; the function is strictly increasing between poles,
    so bisection followed by a guarded Newton polish is unconditional.
    """
    a = spec.a
    x = np.asarray(x, dtype=float)
    if x.shape != a.shape:
        raise DimensionError("point dimension does not match the ellipsoid")
    if spec.is_symmetric:
        raise SymmetricChartError("elliptic coordinates need distinct axes")
    if np.any(x == 0.0):
        raise DegenerateChartError("point lies on a coordinate hyperplane")

    order = np.argsort(a)
    asrt = a[order]
    xsq = x * x
    lams = np.empty(a.size)
    for k in range(a.size):
        hi_pole = asrt[k]
        if k == 0:
            lo = float(asrt[0] - (xsq.sum() + 1.0))
        else:
            lo = float(asrt[k - 1])
        hi = float(hi_pole)
        gap = hi - lo
        # shrink the bracket ends off the poles until the signs are right
        eps = 1e-16
        while _confocal_lhs(a, xsq, hi - eps * gap) < 0.0:
            eps *= 64.0
            if eps > 0.25:
                raise InvalidCoordsError("failed to bracket a confocal root")
        hi -= eps * gap
        if k > 0:
            eps = 1e-16
            while _confocal_lhs(a, xsq, lo + eps * gap) > 0.0:
                eps *= 64.0
                if eps > 0.25:
                    raise InvalidCoordsError("failed to bracket a confocal root")
            lo += eps * gap
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if _confocal_lhs(a, xsq, mid) >= 0.0:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-15 * max(1.0, abs(mid)):
                break
        lam = 0.5 * (lo + hi)
        # Newton polish, kept inside the bracket
        for _ in range(3):
            f = _confocal_lhs(a, xsq, lam)
            df = float((xsq / (a - lam) ** 2).sum())
            step = f / df
            cand = lam - step
            if lo < cand < hi:
                lam = cand
            else:
                break
        lams[k] = lam
    signs = np.where(x > 0, 1, -1)
    return EllipticCoords(lams, signs)


def coords_from_elliptic(spec: EllipsoidSpec, ec: EllipticCoords) -> np.ndarray:
    """Cartesian point from confocal parameters and signs (product formula)."""
    a = spec.a
    lam = np.asarray(ec.lam, dtype=float)
    if lam.shape != a.shape:
        raise DimensionError("coordinate count does not match the ellipsoid")
    if spec.is_symmetric:
        raise SymmetricChartError("elliptic coordinates need distinct axes")
    _check_interlacing(a, lam)
    x = np.empty(a.size)
    for k in range(a.size):
        num = np.prod(a[k] - lam)
        den = np.prod(np.delete(a[k] - a, k))
        r = num / den
        if r < 0:
            if r < -1e-12:
                raise InvalidCoordsError(f"negative radicand {r} at index {k}")
            r = 0.0
        x[k] = ec.signs[k] * np.sqrt(r)
    return x


def _check_interlacing(axes: np.ndarray, lam: np.ndarray) -> None:
    asrt = np.sort(axes)
    lsrt = np.sort(lam)
    ok = lsrt[0] < asrt[0]
    for k in range(1, axes.size):
        ok = ok and asrt[k - 1] < lsrt[k] < asrt[k]
    if not ok:
        raise InvalidCoordsError("parameters do not interlace the sorted axes")


def pole_form(axes, lam, u, v) -> complex | float:
    """Bilinear form sum_i u_i v_i / (lam - a_i) with simple poles at the axes."""
    a = np.asarray(axes, dtype=float)
    return (np.asarray(u) * np.asarray(v) / (lam - a)).sum()


def tangency_value(axes, x, y, eta: float, sigma: float = 0.0, tol: float = 1e-12):
    """Tangency functional of the line (sigma=0) or oscillator arc through (x, y).

    Returns (Q(x,x)+1)(Q(y,y)+sigma) - Q(x,y)^2 with Q the pole form at eta;
    the value vanishes exactly when the trajectory through (x, y) touches the
    confocal quadric with parameter eta.
    """
    a = _as_axes(axes)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != a.shape or y.shape != a.shape:
        raise DimensionError("x, y must match the axes length")
    if np.min(np.abs(eta - a)) <= tol * max(1.0, np.max(np.abs(a))):
        raise PoleError(f"eta={eta} is too close to an axis")
    qxx = pole_form(a, eta, x, x)
    qyy = pole_form(a, eta, y, y)
    qxy = pole_form(a, eta, x, y)
    return float((qxx + 1.0) * (qyy + sigma) - qxy * qxy)


def projective_metric_eval(axes, w, X, sigma: float = 1.0) -> tuple[float, float]:
    """Reduced kinetic metric and potential on the projectivized phase space.

    For a representative w != 0 and tangent vector X the metric value is
    (<w,Aw*><X,AX*> - <X,Aw*><w,AX*>) / (<w,Aw*><w,w*>) and the potential is
    sigma <w,Aw*> / (2 <w,w*>); both are invariant under complex rescaling
    of w (with X rescaled alongside) and under phase rotation.
    """
    a = _as_axes(axes)
    w = np.asarray(w, dtype=complex)
    X = np.asarray(X, dtype=complex)
    if w.shape != a.shape or X.shape != a.shape:
        raise DimensionError("w, X must match the axes length")
    ww = float((w @ np.conj(w)).real)
    if ww == 0.0:
        raise ValueError("w must be nonzero")
    wAw = float(((w * a) @ np.conj(w)).real)
    XAX = float(((X * a) @ np.conj(X)).real)
    XAw = (X * a) @ np.conj(w)
    metric = (wAw * XAX - abs(XAw) ** 2) / (wAw * ww)
    potential = sigma * wAw / (2.0 * ww)
    return float(metric), float(potential)
