"""Separable polynomial potentials on R^{n+1} and their supporting data.

The even-degree basis V^(k) is generated by the recurrence
F_i^(k+1) = a_i F_i^(k) - x_i^2 V^(k), F_i^(1) = x_i^2, V^(k) = sum_i F_i^(k),
so V^(1) = <x,x> (Hook), V^(2) = <Ax,x> - <x,x>^2 (Garnier), and so on.
Gradients are propagated through the same recurrence analytically.  The
inverse-degree basis (Rosochatius family) and the separability test via the
Bertrand-Darboux second-order operator live here too, as do the polynomial
coefficient pairs (Delta_k, Omega_k) needed by the hierarchy Lax matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, PoleError


@dataclass(frozen=True)
class PotentialSpec:
    """Weights of the polynomial hierarchy and the inverse-square strengths."""

    sigmas: tuple[float, ...] = ()
    mu: tuple[float, ...] = ()

    def __post_init__(self):
        if any(m < 0 for m in self.mu):
            raise ValueError("inverse-square strengths must be nonnegative")


@dataclass
class HierarchyTables:
    """Values V^(1..m), per-axis shares F_i^(k), and their x-gradients.

    F[k-1] is the length-(n+1) array of F_i^(k); gradF[k-1][i, j] holds
    dF_i^(k)/dx_j and gradV[k-1] the gradient of V^(k).
    """

    V: list[float]
    F: list[np.ndarray]
    gradV: list[np.ndarray]
    gradF: list[np.ndarray]

    @property
    def depth(self) -> int:
        return len(self.V)


def hierarchy_eval(axes, x, m: int) -> HierarchyTables:
    """Fill the recurrence tables up to level m (m >= 1)."""
    a = np.asarray(axes, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != a.shape:
        raise DimensionError("x must match the axes length")
    if m < 1:
        raise ValueError("m must be at least 1")
    n1 = a.size
    F = x * x
    dF = np.diag(2.0 * x)
    Vs, Fs, gVs, gFs = [], [], [], []
    for _ in range(m):
        V = float(F.sum())
        gV = dF.sum(axis=0)
        Vs.append(V)
        Fs.append(F.copy())
        gVs.append(gV.copy())
        gFs.append(dF.copy())
        Fn = a * F - x * x * V
        dFn = a[:, None] * dF - np.outer(x * x, gV)
        dFn[np.arange(n1), np.arange(n1)] -= 2.0 * x * V
        F, dF = Fn, dFn
    return HierarchyTables(Vs, Fs, gVs, gFs)


def rosochatius_eval(axes, x, s: int, degree: int) -> tuple[float, np.ndarray]:
    """Inverse-square (degree -1) or inverse-quartic (degree -2) basis element.

    Returns the potential value anchored at coordinate s and the per-axis
    shares F_{s,i}; the share at i = s closes the sum, F_{s,s} = V - sum_{i!=s}.
    """
    a = np.asarray(axes, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != a.shape:
        raise DimensionError("x must match the axes length")
    if not 0 <= s < a.size:
        raise IndexError("anchor index out of range")
    if x[s] == 0.0:
        raise ValueError("anchor coordinate vanishes")
    others = np.arange(a.size) != s
    if degree == -1:
        V = 1.0 / x[s] ** 2
        F = np.zeros(a.size)
        F[others] = x[others] ** 2 / x[s] ** 2 / (a[others] - a[s])
    elif degree == -2:
        if np.any(a[others] == a[s]):
            raise ValueError("inverse-quartic element needs a distinct anchor axis")
        bracket = 1.0 + (x[others] ** 2 / (a[s] - a[others])).sum()
        V = bracket / x[s] ** 4
        F = np.zeros(a.size)
        F[others] = 2.0 * x[others] ** 2 * bracket / x[s] ** 4 / (a[others] - a[s])
    else:
        raise ValueError("degree must be -1 or -2")
    F[s] = V - F[others].sum()
    return float(V), F


_FD_OFFS = (-2.0, -1.0, 1.0, 2.0)
_FD_WTS = (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0)


def _fd1(func, x: np.ndarray, i: int, h: float) -> float:
    """Five-point central first derivative in coordinate i."""
    e = np.zeros_like(x)
    e[i] = 1.0
    return sum(w * func(x + o * h * e) for o, w in zip(_FD_OFFS, _FD_WTS)) / h


def _fd2_diag(func, x: np.ndarray, i: int, h: float) -> float:
    """Fourth-order central second derivative in coordinate i."""
    e = np.zeros_like(x)
    e[i] = 1.0
    return (-func(x + 2 * h * e) + 16 * func(x + h * e) - 30 * func(x)
            + 16 * func(x - h * e) - func(x - 2 * h * e)) / (12 * h * h)


def _fd2_mixed(func, x: np.ndarray, i: int, j: int, hi: float, hj: float) -> float:
    """Fourth-order mixed second derivative (product of two 1-d stencils)."""
    ei = np.zeros_like(x)
    ei[i] = 1.0
    ej = np.zeros_like(x)
    ej[j] = 1.0
    tot = 0.0
    for oi, wi in zip(_FD_OFFS, _FD_WTS):
        for oj, wj in zip(_FD_OFFS, _FD_WTS):
            tot += wi * wj * func(x + oi * hi * ei + oj * hj * ej)
    return tot / (hi * hj)


def bd_residual(axes, V, x, i: int, j: int, h: float = 5e-4) -> float:
    """Second-order separability residual of a scalar potential at x.

    Evaluates (a_i - a_j) d2V/dx_i dx_j + (x_j d_i - x_i d_j)(2V + sum_k x_k d_k V)
    from direct first- and second-derivative central stencils of V (the
    rotational term expands to 3(x_j V_i - x_i V_j) + sum_k x_k (x_j V_ik -
    x_i V_jk), so no nested differencing of noisy intermediates is needed).
    The result vanishes for the polynomial and inverse-power bases separable
    in the confocal coordinates of the axes; the rotational operator's
    orientation is fixed by that family, as the opposite sign annihilates
    only the degree-2 member.  Steps scale with each coordinate, which keeps
    the stencil accurate near the inverse-power singularities.
    """
    a = np.asarray(axes, dtype=float)
    x = np.asarray(x, dtype=float)
    if i == j:
        raise ValueError("indices must differ")
    hs = h * (0.25 + np.abs(x))

    def d1(k):
        return _fd1(V, x, k, hs[k])

    def d2(k, l):
        if k == l:
            return _fd2_diag(V, x, k, hs[k])
        return _fd2_mixed(V, x, k, l, hs[k], hs[l])

    Vi, Vj = d1(i), d1(j)
    rot = 3.0 * (x[j] * Vi - x[i] * Vj)
    for k in range(a.size):
        rot += x[k] * (x[j] * d2(i, k) - x[i] * d2(j, k))
    return float((a[i] - a[j]) * d2(i, j) + rot)


def omega_coefficients(axes, x, k: int, tables: HierarchyTables | None = None) -> np.ndarray:
    """Coefficients (highest power first) of the degree-(k-1) polynomial Omega_k.

    Determined by matching 2 Omega_k (1 + q_lam(x,x)) against
    2 Delta_k + <(lam - A)^-1 x, grad V^(k)> at k sample values of lam placed
    beyond the largest axis, where 1 + q_lam(x,x) stays away from zero.
    """
    a = np.asarray(axes, dtype=float)
    x = np.asarray(x, dtype=float)
    t = tables if tables is not None else hierarchy_eval(a, x, k)
    span = float(np.max(a) - np.min(a)) or 1.0
    lams = np.max(a) + span * np.arange(1, k + 1)
    vals = np.empty(k)
    for idx, lam in enumerate(lams):
        q = float((x * x / (lam - a)).sum())
        rhs = 2.0 * delta_value(t, k, lam) + float((x / (lam - a)) @ t.gradV[k - 1])
        vals[idx] = rhs / (2.0 * (1.0 + q))
    return np.linalg.solve(np.vander(lams, k), vals)


def delta_value(tables: HierarchyTables, k: int, lam: float) -> float:
    """Delta_k(lam) = lam^{k-1} - lam^{k-2} V^(1) - ... - V^(k-1)."""
    d = lam ** (k - 1)
    for j in range(1, k):
        d -= lam ** (k - 1 - j) * tables.V[j - 1]
    return float(d)


def delta_omega(axes, x, lam: float, k: int, tol: float = 1e-12) -> tuple[float, float]:
    """Values of the hierarchy polynomials Delta_k and Omega_k at lam.

    Delta_k = lam^{k-1} - lam^{k-2} V^(1) - ... - V^(k-1); Omega_k is the
    polynomial solving 2 Omega_k (1 + q_lam(x,x)) = 2 Delta_k +
    <(lam-A)^-1 x, grad V^(k)> identically in lam.
    """
    a = np.asarray(axes, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.min(np.abs(lam - a)) <= tol * max(1.0, np.max(np.abs(a))):
        raise PoleError(f"lam={lam} is too close to an axis")
    if k < 1:
        raise ValueError("k must be at least 1")
    tables = hierarchy_eval(a, x, k)
    delta = delta_value(tables, k, lam)
    omega = float(np.polyval(omega_coefficients(a, x, k, tables), lam))
    q = float((x * x / (lam - a)).sum())
    resid = abs(2.0 * omega * (1.0 + q) - 2.0 * delta - float((x / (lam - a)) @ tables.gradV[k - 1]))
    if resid > 1e-10 * max(1.0, abs(omega)):
        raise ArithmeticError(f"defining identity residual {resid} too large")
    return delta, omega


def hierarchy_potential(axes, x, sigmas, mu=None) -> float:
    """Potential (1/2) sum_k sigma_k V^(k) + (1/2) sum_i mu_i^2 / x_i^2."""
    a = np.asarray(axes, dtype=float)
    x = np.asarray(x, dtype=float)
    val = 0.0
    if len(sigmas) > 0:
        t = hierarchy_eval(a, x, len(sigmas))
        val += 0.5 * sum(s * v for s, v in zip(sigmas, t.V))
    if mu is not None:
        mu = np.asarray(mu, dtype=float)
        nz = mu != 0
        val += 0.5 * float((mu[nz] ** 2 / x[nz] ** 2).sum())
    return float(val)


def hierarchy_gradient(axes, x, sigmas, mu=None) -> np.ndarray:
    """Gradient of `hierarchy_potential` (analytic, via the recurrence)."""
    a = np.asarray(axes, dtype=float)
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    if len(sigmas) > 0:
        t = hierarchy_eval(a, x, len(sigmas))
        for s, gv in zip(sigmas, t.gradV):
            g += 0.5 * s * gv
    if mu is not None:
        mu = np.asarray(mu, dtype=float)
        nz = mu != 0
        g[nz] -= mu[nz] ** 2 / x[nz] ** 3
    return g
