"""Seeded random states on the constraint sets of every system kind.

All draws use numpy's default bit generator (PCG64) through
np.random.default_rng, so a (seed, call-sequence) pair reproduces exactly.
"""

from __future__ import annotations

import numpy as np

from .dynamics import PhaseState, SystemSpec

# keep charged coordinates comfortably away from their singular hyperplane
_MIN_CHARGED = 0.25


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def random_state(sys: SystemSpec, seed_or_rng=0, y_scale: float = 1.0) -> PhaseState:
    """One state satisfying the constraints of the system kind exactly."""
    rng = _rng(seed_or_rng)
    a = sys.a
    n1 = a.size
    kind = sys.kind
    if kind == "double_jacobi":
        return _random_double(sys, rng, y_scale, invariant=False)
    if kind in ("complex_jacobi", "free_oscillator"):
        z = rng.normal(size=n1) + 1j * rng.normal(size=n1)
        p = y_scale * (rng.normal(size=n1) + 1j * rng.normal(size=n1))
        if kind == "free_oscillator":
            return PhaseState(z, p)
        z = z / np.sqrt(((z / a) @ np.conj(z)).real)
        den = ((z / a**2) @ np.conj(z)).real
        p = p - (((z / a) @ np.conj(p)).real / den) * z / a
        return PhaseState(z, p)
    # real kinds
    x = rng.normal(size=n1)
    nz = sys.mu_arr != 0
    x[nz] = np.abs(x[nz]) + _MIN_CHARGED
    y = y_scale * rng.normal(size=n1)
    if kind == "free_jr":
        return PhaseState(x, y)
    x = x / np.sqrt((x / a) @ x)
    if nz.any() and np.min(np.abs(x[nz])) < 0.05:
        # retry with a fresh draw; the rescaling can shrink charged entries
        return random_state(sys, rng, y_scale)
    den = (x / a**2) @ x
    y = y - (((x / a) @ y) / den) * x / a
    return PhaseState(x, y)


def _random_double(sys: SystemSpec, rng, y_scale: float, invariant: bool) -> PhaseState:
    a = sys.a
    n1 = a.size
    while True:
        x = rng.normal(size=n1)
        xi = rng.normal(size=n1)
        g = (x / a) @ xi
        if abs(g) <= 0.3 * np.sqrt(x @ x) * np.sqrt(xi @ xi) / float(np.max(a)):
            continue
        if g < 0:
            xi = -xi
            g = -g
        # split the normalization between the two positions: keeps both O(1)
        x = x / np.sqrt(g)
        xi = xi / np.sqrt(g)
        # the flow's multiplier denominator must stay away from zero
        if abs((x / a**2) @ xi) > 0.2 / float(np.max(a)):
            break
    while True:
        y = y_scale * rng.normal(size=n1)
        eta = y_scale * rng.normal(size=n1)
        # zero each pairing with a norm-bounded correction (no division by
        # the small mutual pairing, which would inflate the momenta)
        u = x / a
        eta = eta - ((u @ eta) / (u @ u)) * u
        v = xi / a
        y = y - ((v @ y) / (v @ v)) * v
        if not invariant:
            # move off the defining variety while keeping the constraint:
            # opposite offsets cancel in the momentum pairing sum
            c = y_scale * rng.uniform(-1.0, 1.0)
            y = y + c * v / (v @ v)
            eta = eta - c * u / (u @ u)
        # stay clear of the multiplier singularity, where the paired flow
        # blows up in finite time
        mult = ((y / a) @ eta - sys.sigma) / ((x / a**2) @ xi)
        if abs(mult) <= 8.0:
            return PhaseState(x, y, 0.0, xi, eta)


def random_double_invariant_state(sys: SystemSpec, seed_or_rng=0,
                                  y_scale: float = 1.0) -> PhaseState:
    """Double-flow state on the variety where the large Lax pair is defined."""
    return _random_double(sys, _rng(seed_or_rng), y_scale, invariant=True)


def random_impact_state(axes, sigma: float, mu, seed_or_rng=0, speed: float = 1.0):
    """Boundary point plus inward momentum for the billiard map.

    Charged coordinates are kept positive and away from zero; for sigma > 0
    the speed is raised until the kinetic energy at the farthest boundary
    point stays positive, so the orbit keeps returning to the boundary.
    """
    rng = _rng(seed_or_rng)
    a = np.asarray(axes, dtype=float)
    mu = np.asarray(mu, dtype=float) if len(np.atleast_1d(mu)) else np.zeros(a.size)
    nz = mu != 0
    while True:
        x = rng.normal(size=a.size)
        x[nz] = np.abs(x[nz]) + _MIN_CHARGED
        x = x / np.sqrt((x / a) @ x)
        if not nz.any() or np.min(np.abs(x[nz])) > 0.05:
            break
    y = speed * rng.normal(size=a.size)
    if (x / a) @ y > 0:
        y = -y
    if sigma > 0:
        h = 0.5 * y @ y + 0.5 * sigma * x @ x
        if nz.any():
            h += 0.5 * ((mu[nz] / x[nz]) ** 2).sum()
        need = 0.5 * sigma * np.max(a) + 1e-3
        if h <= need:
            y = y * np.sqrt(2.0 * (need + 0.5) / (y @ y))
    return x, y
