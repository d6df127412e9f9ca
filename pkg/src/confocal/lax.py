"""Lax pairs with a spectral parameter, their runtime verification, and the
conserved families they generate.

Every continuous flow of the package carries a 2x2 pair (L, M) of rational
matrix functions of the spectral parameter with dL/dt = [L, M]; the flows on
the paired phase space additionally carry an (n+1)x(n+1) pair (L*, M*) with
dL*/dt = [M*, L*].  det L(lam) packages the first integrals as a rational
function with poles at the axes; clearing the poles yields the polynomial
whose real zeros are the parameters of the caustic quadrics.

Matrices are never stored as coefficient tables: a pair object keeps the
state data and evaluates entries at a requested parameter value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    DEFAULT_CTOL,
    PhaseState,
    SystemSpec,
    dirac_bracket,
    dirac_tensor,
    fd_gradient,
    rk4_step,
)
from .errors import (
    InvariantVarietyError,
    PoleError,
    SymmetricSpecError,
)
from .geometry import EllipsoidSpec, pole_form
from .potentials import delta_value, hierarchy_eval, omega_coefficients

_SMALL_KINDS = ("jacobi", "jacobi_rosochatius", "separable_hierarchy",
                "complex_jacobi", "double_jacobi", "free_jr")
_BIG_KINDS = ("jacobi", "double_jacobi")


def _pole_guard(axes, lam, tol=1e-10):
    a = np.asarray(axes, dtype=float)
    if np.min(np.abs(lam - a)) <= tol * max(1.0, float(np.max(np.abs(a)))):
        raise PoleError(f"lam={lam} too close to an axis")


@dataclass
class LaxPair2:
    """2x2 pair; entries are generated lazily from the stored state data."""

    sys: SystemSpec
    x: np.ndarray
    y: np.ndarray
    xi: np.ndarray | None = None
    eta: np.ndarray | None = None

    def __post_init__(self):
        # hierarchy kinds precompute the recurrence tables and the Omega_k
        # coefficient arrays once per state
        self._tables = None
        self._omega = None
        if self.sys.kind == "separable_hierarchy":
            m = len(self.sys.sigmas)
            self._tables = hierarchy_eval(self.sys.a, self.x, m)
            self._omega = [
                omega_coefficients(self.sys.a, self.x, k + 1,
                                   hierarchy_eval(self.sys.a, self.x, k + 1))
                for k in range(m)
            ]

    def _conj_pair(self):
        """Second position/momentum pair entering the bilinear forms."""
        if self.sys.kind == "double_jacobi":
            return self.xi, self.eta
        if self.sys.kind == "complex_jacobi":
            return np.conj(self.x), np.conj(self.y)
        return self.x, self.y

    def L(self, lam: float) -> np.ndarray:
        a = self.sys.a
        _pole_guard(a, lam)
        xi, eta = self._conj_pair()
        x, y = self.x, self.y
        q_xeta = pole_form(a, lam, x, eta)
        q_yeta = pole_form(a, lam, y, eta)
        q_xxi = pole_form(a, lam, x, xi)
        q_yxi = pole_form(a, lam, y, xi)
        top = q_yeta + self._force_term(lam)
        return np.array([[q_xeta, top], [-1.0 - q_xxi, -q_yxi]])

    def _force_term(self, lam: float):
        """Upper-right addition beyond the momentum form: charges plus forcing."""
        sys = self.sys
        val = 0.0
        mu = sys.mu_arr
        nz = mu != 0
        if nz.any():
            w = np.zeros_like(mu)
            w[nz] = mu[nz] / np.real(self.x[nz])
            val += pole_form(sys.a, lam, w, w)
        if sys.kind == "separable_hierarchy":
            val += sum(sig * delta_value(self._tables, k + 1, lam)
                       for k, sig in enumerate(sys.sigmas))
        else:
            val += sys.sigma
        return val

    def A(self, lam: float) -> np.ndarray:
        sys = self.sys
        a = sys.a
        _pole_guard(a, lam)
        if lam == 0.0 and sys.kind != "free_jr":
            raise PoleError("lam=0 is a pole of the companion matrix")
        if sys.kind == "free_jr":
            return np.array([[0.0, -sys.sigma], [1.0, 0.0]])
        xi, eta = self._conj_pair()
        if sys.kind == "complex_jacobi":
            den = ((self.x / a**2) @ np.conj(self.x)).real
        else:
            den = (self.x / a**2) @ xi
        mu = sys.mu_arr
        nz = mu != 0
        charge = 0.0
        if nz.any():
            w = np.zeros_like(mu)
            w[nz] = mu[nz] / np.real(self.x[nz])
            charge = float((w / a) @ w)
        if sys.kind == "separable_hierarchy":
            grads = self._tables.gradV
            gradVplus = 0.5 * sum(sig * grads[k] for k, sig in enumerate(sys.sigmas))
            pump = float((gradVplus / a) @ self.x)
            kin = float((self.y / a) @ self.y)
            omega_sum = sum(sig * float(np.polyval(c, lam))
                            for sig, c in zip(sys.sigmas, self._omega))
            top = (pump - kin - charge) / lam / den - omega_sum
        else:
            kin = np.real((self.y / a) @ np.conj(self.y)) if sys.kind == "complex_jacobi" \
                else (self.y / a) @ eta
            top = ((sys.sigma - kin - charge) / lam - sys.sigma * den) / den
        return np.array([[0.0, top], [1.0, 0.0]])

    def det_L(self, lam: float):
        m = self.L(lam)
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


@dataclass
class LaxPairBig:
    """(n+1)x(n+1) pair, degree 2 in the parameter on the paired phase space."""

    sys: SystemSpec
    x: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    eta: np.ndarray

    def L(self, lam: float) -> np.ndarray:
        a = self.sys.a
        sig = self.sys.sigma
        return (lam * (np.outer(self.y, self.xi) - np.outer(self.x, self.eta))
                + np.outer(self.y, self.eta) + sig * np.outer(self.x, self.xi)
                - sig * np.diag(a) - lam**2 * np.diag(a))

    def A(self, lam: float) -> np.ndarray:
        a = self.sys.a
        den = (self.x / a**2) @ self.xi
        return (np.outer(self.y / a, self.xi / a) - np.outer(self.x / a, self.eta / a)
                + lam * np.diag(1.0 / a)) / den

    def det_L(self, lam: float) -> float:
        return float(np.linalg.det(self.L(lam)))


def build_lax(sys: SystemSpec, s: PhaseState, which: str = "small",
              vtol: float = 1e-8):
    """Lax pair of the flow at a state; `which` selects 'small' or 'big'."""
    if which == "small":
        if sys.kind not in _SMALL_KINDS:
            raise ValueError(f"no small pair for kind {sys.kind!r}")
        return LaxPair2(sys, s.x, s.y, s.xi, s.eta)
    if which != "big":
        raise ValueError("which must be 'small' or 'big'")
    if sys.kind not in _BIG_KINDS:
        raise ValueError(f"no big pair for kind {sys.kind!r}")
    a = sys.a
    if sys.kind == "jacobi":
        x, y, xi, eta = s.x, s.y, s.x, s.y
    else:
        x, y, xi, eta = s.x, s.y, s.xi, s.eta
    v1 = abs((x / a) @ eta)
    v2 = abs((y / a) @ xi)
    if max(v1, v2) > vtol:
        raise InvariantVarietyError(
            f"state violates the defining variety ({v1:.2e}, {v2:.2e})")
    return LaxPairBig(sys, x, y, xi, eta)


def lax_residual(sys: SystemSpec, s: PhaseState, which: str, lam: float,
                 h: float = 1e-5, ctol: float = DEFAULT_CTOL) -> float:
    """Max-entry norm of dL/dt minus the commutator, by central differences.

    The bracket ordering is [L, M] for the small pairs and [M*, L*] for the
    big one; the residual decays quadratically in h.
    """
    sp = rk4_step(sys, s, h, ctol)
    sm = rk4_step(sys, s, -h, ctol)
    pair = build_lax(sys, s, which)
    pp = build_lax(sys, sp, which)
    pm = build_lax(sys, sm, which)
    dL = (pp.L(lam) - pm.L(lam)) / (2.0 * h)
    L, A = pair.L(lam), pair.A(lam)
    comm = L @ A - A @ L if which == "small" else A @ L - L @ A
    return float(np.max(np.abs(dL - comm)))


# ---------------------------------------------------------------------------
# integral families
# ---------------------------------------------------------------------------

def _pair_table(sys: SystemSpec, s: PhaseState) -> np.ndarray:
    """Symmetric table P[i, j] of the pairwise invariants entering the f_i."""
    n1 = sys.a.size
    mu = sys.mu_arr
    if sys.kind == "double_jacobi":
        x, y, xi, eta = s.x, s.y, s.xi, s.eta
        phi = np.outer(y, x) - np.outer(x, y)
        psi = np.outer(eta, xi) - np.outer(xi, eta)
        return phi * psi
    if sys.kind == "complex_jacobi":
        z, p = s.x, s.y
        phi = np.outer(p, z) - np.outer(z, p)
        return np.abs(phi) ** 2
    x, y = s.x, s.y
    phi = np.outer(y, x) - np.outer(x, y)
    P = phi * phi
    nz = mu != 0
    if nz.any():
        w = np.zeros(n1)
        w[nz] = mu[nz] / x[nz]
        # mu_i^2 x_j^2 / x_i^2 + mu_j^2 x_i^2 / x_j^2, symmetric
        P = P + np.outer(w**2, x**2) + np.outer(x**2, w**2)
        np.fill_diagonal(P, 0.0)
    return P


def _local_parts(sys: SystemSpec, s: PhaseState) -> np.ndarray:
    """Per-axis pieces l_i with f_i = l_i + sum_j P_ij / (a_i - a_j)."""
    mu = sys.mu_arr
    nz = mu != 0
    if sys.kind == "double_jacobi":
        return s.y * s.eta + sys.sigma * s.x * s.xi
    if sys.kind == "complex_jacobi":
        return np.abs(s.y) ** 2 + sys.sigma * np.abs(s.x) ** 2
    out = s.y**2
    if sys.kind == "separable_hierarchy":
        t = hierarchy_eval(sys.a, s.x, len(sys.sigmas))
        for sig, F in zip(sys.sigmas, t.F):
            out = out + sig * F
    else:
        out = out + sys.sigma * s.x**2
    if nz.any():
        add = np.zeros_like(out)
        add[nz] = mu[nz] ** 2 / s.x[nz] ** 2
        out = out + add
    return out


def _poly_part(sys: SystemSpec, lam: float) -> float:
    """Value at lam of the polynomial part of det L."""
    if sys.kind == "separable_hierarchy":
        return float(sum(sig * lam**k for k, sig in enumerate(sys.sigmas)))
    return sys.sigma


def _poly_part_degree(sys: SystemSpec) -> int:
    if sys.kind == "separable_hierarchy":
        deg = -1
        for k, sig in enumerate(sys.sigmas):
            if sig != 0.0:
                deg = k
        return deg
    return 0 if sys.sigma != 0.0 else -1


@dataclass
class IntegralFamily:
    """Conserved quantities of a flow at one state, indexed by the partition.

    `f` holds the per-axis integrals (None when axes repeat); `ftilde` the
    per-group sums, `P` the in-group rotational invariants (zero for
    singleton groups), `P_pairs` the in-group pairwise invariants keyed
    (group, i, j), and `L_chain` their nested partial sums keyed (group, k).
    `g` carries the bilinear integrals of the paired flow, `charges` the
    angular momenta and `J` the scaled spectral integral of the complex flow.
    `relation_residual` is the difference of the two sides of the pole-sum
    identity tying ftilde, P and the charges together.
    """

    partition: tuple[tuple[int, ...], ...]
    group_values: np.ndarray
    H: float
    f: np.ndarray | None
    ftilde: np.ndarray
    P: np.ndarray
    P_pairs: dict
    L_chain: dict
    g: np.ndarray | None = None
    charges: np.ndarray | None = None
    J: float | None = None
    relation_residual: float | None = None


def integral_family(sys: SystemSpec, s: PhaseState) -> IntegralFamily:
    """All conserved families of the flow at a state."""
    spec = EllipsoidSpec(sys.axes)
    part = spec.partition
    alpha = spec.group_values
    a = sys.a
    P_tab = _pair_table(sys, s)
    loc = _local_parts(sys, s)
    r1 = len(part)
    ftilde = np.empty(r1)
    P = np.zeros(r1)
    P_pairs: dict = {}
    L_chain: dict = {}
    for si, grp in enumerate(part):
        grp = list(grp)
        others = [j for j in range(a.size) if j not in grp]
        val = float(np.real(loc[grp].sum()))
        for i in grp:
            for j in others:
                val += float(np.real(P_tab[i, j])) / (a[i] - a[j])
        ftilde[si] = val
        for ii, i in enumerate(grp):
            for j in grp[ii + 1:]:
                P_pairs[(si, i, j)] = float(np.real(P_tab[i, j]))
        if len(grp) >= 2:
            P[si] = sum(P_pairs[(si, i, j)] for ii, i in enumerate(grp)
                        for j in grp[ii + 1:])
            for k in range(1, len(grp)):
                sub = grp[:k + 1]
                L_chain[(si, k)] = sum(P_pairs[(si, i, j)]
                                       for ii, i in enumerate(sub) for j in sub[ii + 1:])
    f = None
    if not spec.is_symmetric:
        f = np.array([float(np.real(loc[i]))
                      + sum(float(np.real(P_tab[i, j])) / (a[i] - a[j])
                            for j in range(a.size) if j != i)
                      for i in range(a.size)])
    H = 0.5 * float(ftilde.sum())
    g = None
    charges = None
    J = None
    rel = None
    if sys.kind == "double_jacobi":
        g = s.y * s.xi - s.x * s.eta
    if sys.kind == "complex_jacobi":
        charges = (np.conj(s.x) * s.y).imag
        J = float((((s.y / a) @ np.conj(s.y)).real - sys.sigma)
                  * ((s.x / a**2) @ np.conj(s.x)).real)
    if sys.constrained and sys.kind not in ("double_jacobi", "complex_jacobi"):
        mu = sys.mu_arr
        lhs = float((ftilde / alpha).sum())
        rhs = _poly_part(sys, 0.0) + float((P / alpha**2).sum()) + float((mu**2 / a**2).sum())
        rel = lhs - rhs
    return IntegralFamily(part, alpha, H, f, ftilde, P, P_pairs, L_chain,
                          g, charges, J, rel)


def per_axis_integrals(sys: SystemSpec, s: PhaseState) -> np.ndarray:
    """The n+1 integrals f_i; defined only when all axes are distinct."""
    fam = integral_family(sys, s)
    if fam.f is None:
        raise SymmetricSpecError("per-axis integrals need distinct axes; "
                                 "use the per-group family instead")
    return fam.f


def det_L(sys: SystemSpec, s: PhaseState, lam: float):
    """det of the small Lax matrix at lam (poles at the axes excluded)."""
    return build_lax(sys, s, "small").det_L(lam)


def spectral_expansion(sys: SystemSpec, s: PhaseState, lam: float) -> float:
    """Pole expansion of det L: poly part + sum ftilde/(lam-alpha) +
    sum P/(lam-alpha)^2 + sum mu_i^2/(lam-a_i)^2."""
    _pole_guard(sys.a, lam)
    fam = integral_family(sys, s)
    mu = sys.mu_arr
    val = _poly_part(sys, lam)
    val += float((fam.ftilde / (lam - fam.group_values)).sum())
    val += float((fam.P / (lam - fam.group_values) ** 2).sum())
    val += float((mu**2 / (lam - sys.a) ** 2).sum())
    return val


def clearing_exponents(sys: SystemSpec) -> np.ndarray:
    """Pole-clearing exponent per partition group: 2 when the group carries a
    charge or has size >= 2, else 1."""
    spec = EllipsoidSpec(sys.axes)
    mu = sys.mu_arr
    out = np.empty(len(spec.partition), dtype=int)
    for si, grp in enumerate(spec.partition):
        charged = any(mu[i] != 0 for i in grp)
        out[si] = 2 if (charged or len(grp) >= 2) else 1
    return out


def psi_poly(sys: SystemSpec, s: PhaseState) -> np.ndarray:
    """Coefficients (highest first) of det L with its poles cleared.

    The clearing factor is prod_s (lam - alpha_s)^{delta_s} with delta_s from
    `clearing_exponents`; coefficients are recovered from samples placed at
    the midpoints between the sorted distinct axes and beyond the extremes.
    """
    spec = EllipsoidSpec(sys.axes)
    alpha = spec.group_values
    delta = clearing_exponents(sys)
    deg = int(delta.sum()) + _poly_part_degree(sys)
    if deg < 0:
        return np.zeros(1)
    npts = deg + 1
    srt = np.sort(alpha)
    pts = list((srt[:-1] + srt[1:]) / 2.0)
    span = float(srt[-1] - srt[0]) if srt.size > 1 else max(1.0, srt[0])
    k = 1
    while len(pts) < npts:
        pts.append(srt[-1] + 0.6180339887 * k * span)
        if len(pts) < npts:
            pts.append(srt[0] - 0.6180339887 * k * span)
        k += 1
    pts = np.array(pts[:npts])
    pair = build_lax(sys, s, "small")
    vals = np.array([np.real(pair.det_L(t)) * np.prod((t - alpha) ** delta)
                     for t in pts])
    return np.linalg.solve(np.vander(pts, npts), vals)


def real_roots(coeffs, im_tol: float = 1e-7) -> np.ndarray:
    """Sorted real roots of a polynomial given by `psi_poly` coefficients."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size <= 1:
        return np.zeros(0)
    rts = np.roots(c)
    scale = max(1.0, float(np.max(np.abs(rts))))
    out = np.sort(rts[np.abs(rts.imag) <= im_tol * scale].real)
    return out


def count_sign_changes(coeffs, lo: float, hi: float, samples: int = 20001) -> int:
    """Grid sign-change count of a polynomial on [lo, hi] (scan oracle)."""
    xs = np.linspace(lo, hi, samples)
    vals = np.polyval(np.asarray(coeffs, dtype=float), xs)
    sgn = np.sign(vals)
    sgn = sgn[sgn != 0]
    return int(np.count_nonzero(np.diff(sgn)))


# ---------------------------------------------------------------------------
# analytic gradients and commutation / rank reports
# ---------------------------------------------------------------------------

def _grad_pair(sys: SystemSpec, s: PhaseState, i: int, j: int) -> np.ndarray:
    """Phase-space gradient of the pairwise invariant P_ij (real kinds)."""
    n1 = sys.a.size
    mu = sys.mu_arr
    x, y = s.x, s.y
    g = np.zeros(2 * n1)
    phi = y[i] * x[j] - x[i] * y[j]
    g[i] = -2.0 * phi * y[j]
    g[j] = 2.0 * phi * y[i]
    g[n1 + i] = 2.0 * phi * x[j]
    g[n1 + j] = -2.0 * phi * x[i]
    if mu[i] != 0:
        g[i] += -2.0 * mu[i] ** 2 * x[j] ** 2 / x[i] ** 3
        g[j] += 2.0 * mu[i] ** 2 * x[j] / x[i] ** 2
    if mu[j] != 0:
        g[i] += 2.0 * mu[j] ** 2 * x[i] / x[j] ** 2
        g[j] += -2.0 * mu[j] ** 2 * x[i] ** 2 / x[j] ** 3
    return g


def _grad_local(sys: SystemSpec, s: PhaseState, i: int) -> np.ndarray:
    n1 = sys.a.size
    mu = sys.mu_arr
    g = np.zeros(2 * n1)
    g[i] = 2.0 * sys.sigma * s.x[i]
    if mu[i] != 0:
        g[i] -= 2.0 * mu[i] ** 2 / s.x[i] ** 3
    g[n1 + i] = 2.0 * s.y[i]
    return g


def gradient_ftilde(sys: SystemSpec, s: PhaseState, group_index: int) -> np.ndarray:
    """Analytic gradient of the per-group integral (jacobi / rosochatius kinds)."""
    if sys.kind not in ("jacobi", "jacobi_rosochatius", "free_jr"):
        raise ValueError("analytic gradients are provided for quadratic kinds only")
    spec = EllipsoidSpec(sys.axes)
    grp = spec.partition[group_index]
    a = sys.a
    others = [j for j in range(a.size) if j not in grp]
    g = np.zeros(2 * a.size)
    for i in grp:
        g += _grad_local(sys, s, i)
        for j in others:
            g += _grad_pair(sys, s, i, j) / (a[i] - a[j])
    return g


def gradient_pair_sum(sys: SystemSpec, s: PhaseState, group_index: int,
                      members=None) -> np.ndarray:
    """Analytic gradient of a sum of in-group invariants (defaults to all)."""
    spec = EllipsoidSpec(sys.axes)
    grp = list(spec.partition[group_index]) if members is None else list(members)
    g = np.zeros(2 * sys.a.size)
    for ii, i in enumerate(grp):
        for j in grp[ii + 1:]:
            g += _grad_pair(sys, s, i, j)
    return g


@dataclass
class CheckRecord:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.value <= self.threshold


def commuting_pairs(spec: EllipsoidSpec) -> list[tuple]:
    """Identifiers of all observable pairs whose constrained bracket vanishes.

    Observables are tagged ('ftilde', s), ('P', s), ('Ppair', s, i, j),
    ('Psum', s, (pairs...)) and ('Lchain', s, k).
    """
    part = spec.partition
    r1 = len(part)
    big = [si for si in range(r1) if len(part[si]) >= 2]
    pairs: list[tuple] = []
    for s1 in range(r1):
        for s2 in range(s1 + 1, r1):
            pairs.append((("ftilde", s1), ("ftilde", s2)))
    for s1 in range(r1):
        for s2 in big:
            if ("P", s2) != ("ftilde", s1):
                pairs.append((("ftilde", s1), ("P", s2)))
    for i1, s1 in enumerate(big):
        for s2 in big[i1 + 1:]:
            pairs.append((("P", s1), ("P", s2)))
    for s2 in big:
        grp = part[s2]
        for ii, i in enumerate(grp):
            for j in grp[ii + 1:]:
                for s1 in range(r1):
                    pairs.append((("ftilde", s1), ("Ppair", s2, i, j)))
                for s1 in big:
                    pairs.append((("P", s1), ("Ppair", s2, i, j)))
    # cross-group pairwise invariants commute
    for i1, s1 in enumerate(big):
        for s2 in big[i1 + 1:]:
            g1, g2 = part[s1], part[s2]
            for ii, i in enumerate(g1):
                for j in g1[ii + 1:]:
                    for kk, k in enumerate(g2):
                        for l in g2[kk + 1:]:
                            pairs.append((("Ppair", s1, i, j), ("Ppair", s2, k, l)))
    # in-group relations: {P_ij, P_ik + P_jk} and disjoint {P_ij, P_kl}
    for si in big:
        grp = part[si]
        for ii, i in enumerate(grp):
            for j in grp[ii + 1:]:
                for k in grp:
                    if k in (i, j):
                        continue
                    pairs.append((("Ppair", si, i, j),
                                  ("Psum", si, (tuple(sorted((i, k))), tuple(sorted((j, k)))))))
                for kk, k in enumerate(grp):
                    for l in grp[kk + 1:]:
                        if {k, l} & {i, j} or (k, l) <= (i, j):
                            continue
                        pairs.append((("Ppair", si, i, j), ("Ppair", si, k, l)))
    # chain sums commute among themselves and with their members
    chain = [(si, k) for si in big for k in range(1, len(part[si]))]
    for c1 in range(len(chain)):
        for c2 in range(c1 + 1, len(chain)):
            pairs.append((("Lchain",) + chain[c1], ("Lchain",) + chain[c2]))
    for si, k in chain:
        sub = part[si][:k + 1]
        for ii, i in enumerate(sub):
            for j in sub[ii + 1:]:
                pairs.append((("Ppair", si, i, j), ("Lchain", si, k)))
    return pairs


def _observable_gradient(sys: SystemSpec, s: PhaseState, tag: tuple) -> np.ndarray:
    kind = tag[0]
    spec = EllipsoidSpec(sys.axes)
    if kind == "ftilde":
        return gradient_ftilde(sys, s, tag[1])
    if kind == "P":
        return gradient_pair_sum(sys, s, tag[1])
    if kind == "Ppair":
        return _grad_pair(sys, s, tag[2], tag[3])
    if kind == "Psum":
        g = np.zeros(2 * sys.a.size)
        for (i, j) in tag[2]:
            g += _grad_pair(sys, s, i, j)
        return g
    if kind == "Lchain":
        si, k = tag[1], tag[2]
        return gradient_pair_sum(sys, s, si, spec.partition[si][:k + 1])
    raise ValueError(f"unknown observable tag {tag!r}")


def _pair_value(sys: SystemSpec, s: PhaseState, i: int, j: int) -> float:
    mu = sys.mu_arr
    x, y = s.x, s.y
    val = (y[i] * x[j] - x[i] * y[j]) ** 2
    if mu[i] != 0:
        val += mu[i] ** 2 * x[j] ** 2 / x[i] ** 2
    if mu[j] != 0:
        val += mu[j] ** 2 * x[i] ** 2 / x[j] ** 2
    return float(val)


def _ftilde_value(sys: SystemSpec, s: PhaseState, si: int) -> float:
    spec = EllipsoidSpec(sys.axes)
    grp = spec.partition[si]
    a = sys.a
    mu = sys.mu_arr
    val = 0.0
    for i in grp:
        val += s.y[i] ** 2 + sys.sigma * s.x[i] ** 2
        if mu[i] != 0:
            val += mu[i] ** 2 / s.x[i] ** 2
        for j in range(a.size):
            if j not in grp:
                val += _pair_value(sys, s, i, j) / (a[i] - a[j])
    return float(val)


def _observable_eval(sys: SystemSpec, s: PhaseState, tag: tuple) -> float:
    spec = EllipsoidSpec(sys.axes)
    kind = tag[0]
    if kind == "ftilde":
        return _ftilde_value(sys, s, tag[1])
    if kind == "P":
        grp = spec.partition[tag[1]]
        return sum(_pair_value(sys, s, i, j)
                   for ii, i in enumerate(grp) for j in grp[ii + 1:])
    if kind == "Ppair":
        return _pair_value(sys, s, tag[2], tag[3])
    if kind == "Psum":
        return sum(_pair_value(sys, s, i, j) for (i, j) in tag[2])
    if kind == "Lchain":
        sub = spec.partition[tag[1]][:tag[2] + 1]
        return sum(_pair_value(sys, s, i, j)
                   for ii, i in enumerate(sub) for j in sub[ii + 1:])
    raise ValueError(f"unknown observable tag {tag!r}")


def _tag_name(tag: tuple) -> str:
    kind = tag[0]
    if kind == "ftilde":
        return f"ftilde[{tag[1]}]"
    if kind == "P":
        return f"P[{tag[1]}]"
    if kind == "Ppair":
        return f"P[{tag[1]};{tag[2]},{tag[3]}]"
    if kind == "Psum":
        return f"P[{tag[1]};" + "+".join(f"{i},{j}" for i, j in tag[2]) + "]"
    if kind == "Lchain":
        return f"L[{tag[1]};{tag[2]}]"
    return repr(tag)


def commutation_suite(sys: SystemSpec, s: PhaseState, pairs=None,
                      tol: float = 1e-6, gradients: str = "fd") -> list[CheckRecord]:
    """Constrained brackets of the vanishing pairs at one state.

    `gradients` selects finite-difference ('fd', the bracket default) or the
    analytic formulas ('analytic').  Returns one record per pair with the
    absolute bracket value.
    """
    spec = EllipsoidSpec(sys.axes)
    if pairs is None:
        pairs = commuting_pairs(spec)
    tags = sorted({t for pr in pairs for t in pr}, key=repr)
    grads = {}
    for t in tags:
        if gradients == "analytic":
            grads[t] = _observable_gradient(sys, s, t)
        else:
            grads[t] = fd_gradient(lambda st, t=t: _observable_eval(sys, st, t), s)
    out = []
    for t1, t2 in pairs:
        val = dirac_bracket(sys.a, None, None, s, grad_f=grads[t1], grad_g=grads[t2])
        out.append(CheckRecord(f"{{{_tag_name(t1)},{_tag_name(t2)}}}", abs(val), tol))
    return out


def gradient_rank_report(sys: SystemSpec, s: PhaseState,
                         threshold: float = 1e-7) -> dict:
    """Numeric ranks of the spans of the two conserved families' vector fields.

    The rows are the constrained Hamiltonian vector fields (Dirac tensor
    applied to the gradients); contracting is what turns the on-shell
    pole-sum relation into an actual linear dependency.  For a partition
    with r+1 groups, rho of which have size >= 2, the span of
    {ftilde_s, P_{s,ij}} has dimension 2n - r - rho and the span of
    {ftilde_s, P_s} has dimension r + rho at generic states.
    """
    spec = EllipsoidSpec(sys.axes)
    part = spec.partition
    r = len(part) - 1
    rho = sum(1 for g in part if len(g) >= 2)
    n = spec.dim
    W = dirac_tensor(sys.a, s)
    rows_F = [W @ gradient_ftilde(sys, s, si) for si in range(len(part))]
    for si, grp in enumerate(part):
        for ii, i in enumerate(grp):
            for j in grp[ii + 1:]:
                rows_F.append(W @ _grad_pair(sys, s, i, j))
    rows_K = [W @ gradient_ftilde(sys, s, si) for si in range(len(part))]
    for si, grp in enumerate(part):
        if len(grp) >= 2:
            rows_K.append(W @ gradient_pair_sum(sys, s, si))

    def rank(rows):
        sv = np.linalg.svd(np.array(rows), compute_uv=False)
        return int(np.count_nonzero(sv > threshold * sv[0]))

    return {
        "rank_full_family": rank(rows_F),
        "expected_full_family": 2 * n - r - rho,
        "rank_central_family": rank(rows_K),
        "expected_central_family": r + rho,
    }
