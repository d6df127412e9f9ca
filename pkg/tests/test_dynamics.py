import numpy as np
import pytest

from confocal.dynamics import (
    PhaseState,
    SystemSpec,
    constraint_residuals,
    dirac_bracket,
    dirac_tensor,
    energy,
    fd_gradient,
    integrate,
    project,
    reparametrized_rhs,
    rhs,
    rk4_step,
    torus_reconstruct,
    torus_reduce,
)
from confocal.errors import (
    ConstraintError,
    ReductionSingularError,
    SingularAxisError,
)
from confocal.lax import integral_family, per_axis_integrals
from confocal.sampling import random_state

AXES = (1.0, 2.0, 3.0)


class TestRightHandSides:
    def test_great_circle_geodesic(self):
        sys = SystemSpec("jacobi", (1.0, 1.0, 1.0), sigma=0.0)
        s = PhaseState(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
        v = rhs(sys, s)
        np.testing.assert_allclose(v.x, [0.0, 1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(v.y, [-1.0, 0.0, 0.0], atol=1e-15)

    def test_resting_point_on_sphere_feels_no_force(self):
        for sigma in (0.0, 0.7, -1.3):
            sys = SystemSpec("jacobi", (1.0, 1.0, 1.0), sigma=sigma)
            s = PhaseState(np.array([0.0, 1.0, 0.0]), np.zeros(3))
            v = rhs(sys, s)
            np.testing.assert_allclose(v.y, np.zeros(3), atol=1e-15)

    def test_chargeless_reduction_equals_plain_flow(self):
        sysj = SystemSpec("jacobi", AXES, sigma=0.4)
        sysr = SystemSpec("jacobi_rosochatius", AXES, sigma=0.4, mu=(0.0, 0.0, 0.0))
        s = random_state(sysj, 0)
        vj, vr = rhs(sysj, s), rhs(sysr, s)
        np.testing.assert_allclose(vr.y, vj.y, rtol=1e-14)

    def test_paired_flow_duplicates_on_the_diagonal(self):
        sysj = SystemSpec("jacobi", AXES, sigma=0.4)
        sysd = SystemSpec("double_jacobi", AXES, sigma=0.4)
        s = random_state(sysj, 1)
        sd = PhaseState(s.x, s.y, 0.0, s.x.copy(), s.y.copy())
        vj, vd = rhs(sysj, s), rhs(sysd, sd)
        np.testing.assert_allclose(vd.y, vj.y, rtol=1e-14)
        np.testing.assert_allclose(vd.eta, vj.y, rtol=1e-14)

    def test_off_manifold_rejected(self):
        sys = SystemSpec("jacobi", AXES)
        with pytest.raises(ConstraintError):
            rhs(sys, PhaseState(np.array([1.0, 1.0, 1.0]), np.zeros(3)))

    def test_charged_axis_crossing_rejected(self):
        sys = SystemSpec("jacobi_rosochatius", AXES, mu=(0.3, 0.0, 0.0))
        x = np.array([1e-10, 0.9, 0.8])
        x = x / np.sqrt((x / sys.a) @ x)
        y = np.zeros(3)
        with pytest.raises(SingularAxisError):
            rhs(sys, PhaseState(x, y))


class TestIntegrate:
    def test_sphere_geodesic_period(self):
        sys = SystemSpec("jacobi", (1.0, 1.0, 1.0), sigma=0.0)
        s0 = PhaseState(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
        traj = integrate(sys, s0, 2.0 * np.pi, 1e-3)
        assert np.max(np.abs(traj[-1].x - s0.x)) < 1e-8
        assert np.max(np.abs(traj[-1].y - s0.y)) < 1e-8

    def test_constraints_stay_below_projection_tolerance(self):
        sys = SystemSpec("jacobi_rosochatius", AXES, sigma=0.4, mu=(0.2, 0.0, 0.3))
        traj = integrate(sys, random_state(sys, 2), 3.0, 1e-3)
        worst = max(float(np.max(np.abs(constraint_residuals(sys, s)))) for s in traj)
        assert worst < 1e-10

    def test_energy_and_moser_product_drift(self):
        # conserved product <A^-1 y, y><A^-2 x, x> for the geodesic flow,
        # cross-checked against a step-halved run
        sys = SystemSpec("jacobi", AXES, sigma=0.0)
        s0 = random_state(sys, 3)
        a = sys.a

        def moser(s):
            return float(((s.y / a) @ s.y) * ((s.x / a**2) @ s.x))

        traj = integrate(sys, s0, 10.0, 1e-3)
        H0, M0 = energy(sys, s0), moser(s0)
        dH = max(abs(energy(sys, s) - H0) / abs(H0) for s in traj[::50])
        dM = max(abs(moser(s) - M0) / abs(M0) for s in traj[::50])
        assert dH < 1e-8 and dM < 1e-8
        half = integrate(sys, s0, 10.0, 5e-4)
        np.testing.assert_allclose(half[-1].x, traj[-1].x, atol=1e-9)

    def test_fourth_order_energy_convergence(self):
        sys = SystemSpec("jacobi", AXES, sigma=0.5)
        s0 = random_state(sys, 4)

        def drift(h):
            traj = integrate(sys, s0, 1.0, h, project_steps=False)
            H0 = energy(sys, s0)
            return max(abs(energy(sys, s) - H0) for s in traj)

        r = drift(2e-3) / drift(1e-3)
        assert 10.0 < r < 26.0

    def test_double_flow_bilinear_integrals(self):
        sys = SystemSpec("double_jacobi", AXES, sigma=0.3)
        s0 = random_state(sys, 5, y_scale=0.5)
        traj = integrate(sys, s0, 1.0, 1e-3)
        g0 = s0.y * s0.xi - s0.x * s0.eta
        for s in traj[::100]:
            g = s.y * s.xi - s.x * s.eta
            assert np.max(np.abs(g - g0)) < 1e-8

    def test_double_flow_family_conservation(self):
        sys = SystemSpec("double_jacobi", AXES, sigma=0.3)
        s0 = random_state(sys, 5, y_scale=0.5)
        traj = integrate(sys, s0, 1.0, 1e-3)
        f0 = per_axis_integrals(sys, s0)
        fT = per_axis_integrals(sys, traj[-1])
        np.testing.assert_allclose(fT, f0, atol=1e-9)


class TestReparametrizedFlow:
    def test_proportional_to_plain_rhs(self):
        sys = SystemSpec("double_jacobi", AXES, sigma=0.3)
        rng = np.random.default_rng(6)
        for _ in range(100):
            s = random_state(sys, rng)
            v = rhs(sys, s)
            w = reparametrized_rhs(sys, s)
            fac = (s.x / sys.a**2) @ s.xi
            for attr in ("x", "y", "xi", "eta"):
                np.testing.assert_allclose(
                    getattr(w, attr), fac * np.asarray(getattr(v, attr)),
                    rtol=1e-12, atol=1e-12)

    def test_factor_positive_on_diagonal_slice(self):
        sysj = SystemSpec("jacobi", AXES)
        s = random_state(sysj, 7)
        fac = (s.x / sysj.a**2) @ s.x
        assert fac > 0.0

    def test_pairing_with_second_momentum_is_invariant(self):
        # <A^-1 x, eta> stays constant along the paired flow
        sys = SystemSpec("double_jacobi", AXES, sigma=0.3)
        from confocal.sampling import random_double_invariant_state

        s = random_double_invariant_state(sys, 8)
        a = sys.a
        h = 1e-6
        sp = rk4_step(sys, s, h)
        sm = rk4_step(sys, s, -h)
        deriv = ((sp.x / a) @ sp.eta - (sm.x / a) @ sm.eta) / (2 * h)
        assert abs(deriv) < 1e-10


class TestTorusReduction:
    def test_real_slice_is_identity(self):
        z = np.array([0.3, -0.7, 1.1], dtype=complex)
        p = np.array([0.2, 0.9, -0.4], dtype=complex)
        x, y, mu, ph = torus_reduce(z, p)
        np.testing.assert_allclose(x, np.abs(z.real))
        np.testing.assert_allclose(mu, np.zeros(3), atol=1e-15)
        zz, pp = torus_reconstruct(x, y, mu, ph)
        np.testing.assert_allclose(zz, z, atol=1e-14)
        np.testing.assert_allclose(pp, p, atol=1e-14)

    def test_quarter_turn_phase(self):
        x, y, mu, ph = torus_reduce(np.array([1.5j]), np.array([0.8j]))
        np.testing.assert_allclose(x, [1.5])
        np.testing.assert_allclose(y, [0.8])
        np.testing.assert_allclose(mu, [0.0], atol=1e-15)
        np.testing.assert_allclose(ph, [np.pi / 2])

    def test_round_trip_random(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            z = rng.normal(size=4) + 1j * rng.normal(size=4)
            p = rng.normal(size=4) + 1j * rng.normal(size=4)
            x, y, mu, ph = torus_reduce(z, p)
            zz, pp = torus_reconstruct(x, y, mu, ph)
            np.testing.assert_allclose(zz, z, atol=1e-12)
            np.testing.assert_allclose(pp, p, atol=1e-12)

    def test_charged_zero_coordinate_rejected(self):
        z = np.array([1e-14, 1.0], dtype=complex)
        p = np.array([1e3j, 0.5], dtype=complex)
        with pytest.raises(ReductionSingularError):
            torus_reduce(z, p)

    def test_reduced_path_satisfies_reduced_equations(self):
        # push the complex trajectory through the reduction pointwise and
        # difference it in time: it must solve the charged flow
        sys_c = SystemSpec("complex_jacobi", AXES, sigma=0.4)
        sc = random_state(sys_c, 10)
        h = 1e-4
        traj = integrate(sys_c, sc, 200 * h, h)
        _, _, mu, _ = torus_reduce(sc.x, sc.y)
        sys_r = SystemSpec("jacobi_rosochatius", AXES, sigma=0.4,
                           mu=tuple(np.abs(mu)))
        worst = 0.0
        for k in range(1, 200, 20):
            xm, ym, _, _ = torus_reduce(traj[k - 1].x, traj[k - 1].y)
            x0, y0, _, _ = torus_reduce(traj[k].x, traj[k].y)
            xp, yp, _, _ = torus_reduce(traj[k + 1].x, traj[k + 1].y)
            v = rhs(sys_r, PhaseState(x0, y0), ctol=1e-6)
            worst = max(worst, float(np.max(np.abs((xp - xm) / (2 * h) - v.x))),
                        float(np.max(np.abs((yp - ym) / (2 * h) - v.y))))
        assert worst < 1e-7


class TestDiracBracket:
    def setup_method(self):
        self.sys = SystemSpec("jacobi_rosochatius", AXES, sigma=0.4,
                              mu=(0.2, 0.0, 0.3))
        self.s = random_state(self.sys, 11)
        self.a = self.sys.a

    def test_positions_commute_exactly(self):
        W = dirac_tensor(self.a, self.s)
        n1 = self.a.size
        assert np.all(W[:n1, :n1] == 0.0)

    def test_antisymmetry_of_tensor_and_bracket(self):
        W = dirac_tensor(self.a, self.s)
        np.testing.assert_allclose(W, -W.T, atol=1e-15)
        rng = np.random.default_rng(12)
        c1, c2 = rng.normal(size=6), rng.normal(size=6)
        f = lambda st: float(c1[:3] @ st.x**2 + c1[3:] @ (st.x * st.y))
        g = lambda st: float(c2[:3] @ st.y**2 + c2[3:] @ (st.x * st.y))
        b1 = dirac_bracket(self.a, f, g, self.s)
        b2 = dirac_bracket(self.a, g, f, self.s)
        assert abs(b1 + b2) < 1e-10

    def test_coordinate_momentum_table(self):
        den = (self.s.x / self.a**2) @ self.s.x
        for i in range(3):
            for j in range(3):
                f = lambda st, i=i: float(st.x[i])
                g = lambda st, j=j: float(st.y[j])
                got = dirac_bracket(self.a, f, g, self.s)
                want = (1.0 if i == j else 0.0) - (
                    self.s.x[i] * self.s.x[j] / (self.a[i] * self.a[j] * den))
                np.testing.assert_allclose(got, want, atol=1e-8)

    def test_conserved_family_commutes(self):
        sys = self.sys
        for seed in range(5):
            s = random_state(sys, 100 + seed)
            fam_f = lambda st, i: float(per_axis_integrals(sys, st)[i])
            for i in range(3):
                for j in range(i + 1, 3):
                    val = dirac_bracket(
                        self.a, lambda st, i=i: fam_f(st, i),
                        lambda st, j=j: fam_f(st, j), s)
                    assert abs(val) < 1e-6

    def test_off_manifold_state_rejected(self):
        bad = PhaseState(np.array([1.0, 1.0, 1.0]), np.zeros(3))
        with pytest.raises(ConstraintError):
            dirac_bracket(self.a, lambda st: 0.0, lambda st: 0.0, bad)


class TestEnergyBattery:
    @pytest.mark.parametrize("kind,kwargs", [
        ("jacobi", {"sigma": 0.5}),
        ("jacobi_rosochatius", {"sigma": 0.4, "mu": (0.2, 0.0, 0.3)}),
        ("separable_hierarchy", {"sigmas": (0.5, -0.2), "mu": (0.1, 0.0, 0.2)}),
        ("complex_jacobi", {"sigma": 0.4}),
    ])
    def test_relative_energy_drift(self, kind, kwargs):
        sys = SystemSpec(kind, AXES, **kwargs)
        s0 = random_state(sys, 13)
        traj = integrate(sys, s0, 10.0, 1e-3)
        H0 = energy(sys, s0)
        drift = max(abs(energy(sys, s) - H0) / abs(H0) for s in traj[::100])
        assert drift < 1e-8

    def test_projection_restores_nearby_state(self):
        sys = SystemSpec("jacobi", AXES, sigma=0.5)
        s = random_state(sys, 14)
        s.x = s.x * (1.0 + 3e-7)
        s.y = s.y + 2e-7
        fixed = project(sys, s)
        assert np.max(np.abs(constraint_residuals(sys, fixed))) < 1e-12


class TestFreeKinds:
    def test_free_oscillator_closed_form_period(self):
        sys = SystemSpec("free_oscillator", (2.0, 1.0), sigma=4.0)
        z0 = np.array([0.3 + 0.2j, -0.5 + 0.1j])
        p0 = np.array([0.1 - 0.4j, 0.2 + 0.3j])
        traj = integrate(sys, PhaseState(z0, p0), np.pi, 1e-3)  # period 2*pi/w
        np.testing.assert_allclose(traj[-1].x, z0, atol=1e-10)
        np.testing.assert_allclose(traj[-1].y, p0, atol=1e-10)

    def test_free_charged_flow_energy(self):
        sys = SystemSpec("free_jr", (2.0, 1.0), sigma=0.5, mu=(0.0, 0.3))
        s0 = PhaseState(np.array([0.2, 0.6]), np.array([0.4, -0.3]))
        traj = integrate(sys, s0, 2.0, 1e-3)
        H0 = energy(sys, s0)
        assert max(abs(energy(sys, s) - H0) for s in traj[::50]) < 1e-10
