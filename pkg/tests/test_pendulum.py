import cmath
import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.special import ellipk as scipy_ellipk

from hyperwalk import flows as fl
from hyperwalk import pendulum as pd
from hyperwalk.pendulum import PendulumParams, make_fields

UNIT = PendulumParams(1.0, 1.0)


def reference_period(a, omega=1.0):
    """Period from a high-order adaptive integration of xdd = -omega^2 sin x."""
    def rhs(t, u):
        return [u[1], -omega ** 2 * math.sin(u[0])]

    def vel_zero(t, u):
        return u[1]

    vel_zero.direction = 1  # velocity crosses 0 upward at the far turning point
    sol = solve_ivp(rhs, [0, 4 * math.pi / omega], [a, 0.0], method="DOP853",
                    rtol=1e-13, atol=1e-15, events=vel_zero)
    return 2 * sol.t_events[0][0]


def series_order2(Z, omega=1.0, tiny="1e-25"):
    """(ratio - 1) / eps^2 evaluated in 80-digit arithmetic at a tiny eps."""
    with mpmath.workdps(80):
        e = mpmath.mpf(tiny)
        X, Y = mpmath.mpf(Z.real), mpmath.mpf(Z.imag)
        Zm = mpmath.mpc(Z.real, Z.imag)
        num = omega * Y * e - 1j * omega * mpmath.sin(e * X)
        den = -1j * omega * e * Zm
        val = (num / den - 1) / e ** 2
        return complex(val)


class TestParams:
    def test_omega(self):
        p = PendulumParams(9.81, 2.0)
        assert p.omega ** 2 == pytest.approx(9.81 / 2.0, rel=1e-15)
        assert p.linear_period == pytest.approx(2 * math.pi * math.sqrt(2.0 / 9.81))

    @pytest.mark.parametrize("kw", [dict(g=0), dict(ell=-1), dict(amplitude=math.pi), dict(amplitude=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PendulumParams(**kw)


class TestFields:
    def test_equilibrium(self):
        F, E, H = make_fields(UNIT, 1e-3)
        assert F.displacement(0j) == 0
        assert E.displacement(0j) == 0
        assert H.displacement(0j) == 0

    def test_linear_kick(self):
        lam, a = 1e-3, 0.3
        p = PendulumParams(4.0, 1.0)
        _, E, _ = make_fields(p, lam)
        d = E.displacement(complex(a, 0))
        assert d.real == 0
        assert d.imag == pytest.approx(-lam * 2.0 * a)

    def test_nonlinear_field(self):
        F = make_fields(UNIT, 1e-2)[0]
        z = 0.4 + 0.3j
        assert F.displacement(z) == pytest.approx(1e-2 * complex(0.3, -math.sin(0.4)))

    def test_rotation_ratio_independent_of_z(self, rng):
        lam, w = 1e-2, 1.5
        p = PendulumParams(w ** 2, 1.0)
        _, E, H = make_fields(p, lam)
        x = lam * w
        expected = (math.sin(x) + (math.cos(x) - 1) * 1j) / x
        assert expected == pytest.approx((cmath.exp(-1j * x) - 1) / (-1j * x), rel=1e-12)
        for z in rng.normal(size=20) + 1j * rng.normal(size=20):
            assert H.displacement(complex(z)) / E.displacement(complex(z)) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("x", [1e-4, 1e-3, 1e-2, 0.05, 0.1])
    def test_rotation_displacement_adequal_bound(self, rng, x):
        _, E, H = make_fields(UNIT, x)
        for z in rng.normal(size=20) + 1j * rng.normal(size=20):
            z = complex(z)
            gap = H.displacement(z) / E.displacement(z) - 1
            # real part is O(x^2) but (cos x - 1)/x makes the gap first order
            assert abs(gap) <= x / 2 + 1e-10  # tight bound; allow rounding in H(z) - z
            assert abs(gap.real) <= x ** 2

    def test_rotation_is_exact_map(self):
        H = make_fields(UNIT, 1e-3)[2]
        assert H.kind == "exact_map" and H.lipschitz_K == 1.0


class TestLambdaAndClosedForm:
    def test_choose_lambda(self):
        assert pd.choose_lambda(1.0, 1000) == 2 * math.pi / 1000
        assert pd.choose_lambda(2.0, 1000) == pytest.approx(math.pi / 1000, rel=1e-15)
        lam = pd.choose_lambda(1.7, 10_000)
        assert 10_000 * lam * 1.7 == pytest.approx(2 * math.pi, rel=4e-16)

    def test_choose_lambda_minimum(self):
        with pytest.raises(ValueError):
            pd.choose_lambda(1.0, 7)

    def test_closed_form(self):
        assert pd.h_walk_closed_form(0.3, 0.0, 1.0) == 0.3
        assert abs(pd.h_walk_closed_form(0.3, 2 * math.pi / 2.0, 2.0) - 0.3) <= 1e-15
        assert abs(pd.h_walk_closed_form(1.0, math.pi / 2, 1.0) - (-1j)) <= 1e-15

    def test_h_walk_tracks_closed_form(self):
        lam = pd.choose_lambda(1.0, 1000)
        H = make_fields(UNIT, lam)[2]
        traj = fl.walk(H, 0.2, 20_000, record_stride=7)
        err = np.abs(traj.z - pd.h_walk_closed_form(0.2, traj.t, 1.0)) / 0.2
        assert err.max() <= 1e-11


class TestOracle:
    @pytest.mark.parametrize("k", [0.0, 0.1, 0.5, 0.9, 0.999])
    def test_agm_matches_scipy(self, k):
        assert pd.ellipk(k) == pytest.approx(float(scipy_ellipk(k * k)), rel=1e-13)

    @pytest.mark.parametrize("a", [0.1, 0.5, 1.5, 2.5])
    def test_matches_direct_integration(self, a):
        assert pd.exact_period_oracle(a) == pytest.approx(reference_period(a), rel=1e-9)

    def test_small_amplitude_limit(self):
        for g, ell in [(1.0, 1.0), (9.81, 0.5)]:
            T0 = 2 * math.pi * math.sqrt(ell / g)
            assert pd.exact_period_oracle(1e-6, g, ell) == pytest.approx(T0, rel=1e-12)

    def test_series_at_tenth(self):
        ratio = pd.exact_period_oracle(0.1) / (2 * math.pi)
        assert ratio - 1 == pytest.approx(6.25e-4, abs=1e-6)
        # next series terms of K: 11 a^4 / 3072 + 173 a^6 / 737280
        a = 0.1
        assert ratio - 1 == pytest.approx(a ** 2 / 16 + 11 * a ** 4 / 3072 + 173 * a ** 6 / 737280, abs=1e-12)

    def test_monotone(self):
        assert pd.exact_period_oracle(0.2) < pd.exact_period_oracle(0.4) < pd.exact_period_oracle(0.8)

    def test_domain(self):
        with pytest.raises(ValueError):
            pd.exact_period_oracle(math.pi)


class TestPeriod:
    def test_rotation_walk_period_exact(self):
        lam = pd.choose_lambda(1.0, 10_000)
        H = make_fields(UNIT, lam)[2]
        for a in (0.01, 0.3, 1.0):
            traj = fl.walk(H, a, 35_000, record_stride=1)
            est = pd.measure_period(traj)
            assert est.period == pytest.approx(2 * math.pi, abs=1e-10)
            assert est.n_oscillations == 2
            assert est.mesh == lam

    def test_nonlinear_matches_oracle(self):
        lam, a = 1e-5, 0.5
        F = make_fields(UNIT, lam)[0]
        T = pd.exact_period_oracle(a)
        traj = fl.walk(F, a, fl.steps_for(2.2 * T, lam), record_stride=1)
        est = pd.measure_period(traj)
        assert est.period == pytest.approx(T, rel=1e-4)

    def test_fixed_point_has_no_period(self):
        traj = fl.walk(make_fields(UNIT, 1e-2)[0], 0j, 5000)
        with pytest.raises(pd.NoOscillationError, match="no full oscillation"):
            pd.measure_period(traj)

    def test_rotation_over_separatrix_has_no_period(self):
        # released at the top with a push: runs round without returning to Re z > 0 crossings
        F = make_fields(UNIT, 1e-3)[0]
        traj = fl.walk(F, complex(3.0, 2.5), 20_000, domain_radius=1e6)
        with pytest.raises(pd.NoOscillationError):
            pd.measure_period(traj)

    def test_residual_reported(self):
        lam = pd.choose_lambda(1.0, 2000)
        F = make_fields(UNIT, lam)[0]
        traj = fl.walk(F, 0.3, 5 * 2000, record_stride=1)
        est = pd.measure_period(traj)
        assert est.residual >= 0 and est.n_oscillations >= 1


class TestEulerDiagnostics:
    def test_energy_drift_halves_with_mesh(self):
        drifts = []
        for lam in (1e-3, 5e-4):
            F = make_fields(UNIT, lam)[0]
            traj = fl.walk(F, 0.5, fl.steps_for(10.0, lam))
            e = pd.energy(traj.z, 1.0)
            drifts.append(e[-1] - e[0])
        assert drifts[0] > 0
        assert drifts[0] / drifts[1] == pytest.approx(2.0, rel=0.3)

    def test_time_reversal_symmetry_linear(self):
        N = 10_000
        lam = pd.choose_lambda(1.0, N)
        E = make_fields(UNIT, lam)[1]
        traj = fl.walk(E, 0.2, N, record_stride=1)
        assert pd.symmetry_defect(traj, N * lam) <= 10 * lam

    def test_time_reversal_symmetry_nonlinear(self):
        lam, a = 1e-4, 0.5
        F = make_fields(UNIT, lam)[0]
        T = pd.exact_period_oracle(a)
        traj = fl.walk(F, a, fl.steps_for(2.2 * T, lam), record_stride=1)
        period = pd.measure_period(traj).period
        assert pd.symmetry_defect(traj, period) <= 10 * lam


class TestSeries:
    def test_real_unit(self):
        (row,) = pd.rescaled_adequality_check([1.0])
        assert row.adequal
        assert row.order1 == 0
        assert row.order2 == pytest.approx(-1 / 6, abs=1e-15)
        assert row.ratio.coefficient(4) == pytest.approx(1 / 120, abs=1e-15)

    def test_pure_velocity(self):
        (row,) = pd.rescaled_adequality_check([1j])
        assert row.ratio.coefficient(0) == 1
        assert all(c == 0 for c in row.ratio.coeffs[1:])

    def test_appreciable_amplitude_fails(self):
        (row,) = pd.rescaled_adequality_check([1.0], amplitude=1.0)
        assert not row.adequal
        assert row.ratio.coefficient(0) == pytest.approx(math.sin(1.0), rel=1e-15)

    def test_against_high_precision(self, rng):
        Zs = np.exp(1j * rng.uniform(0, 2 * np.pi, 12)) * rng.uniform(0.2, 1.0, 12)
        for row in pd.rescaled_adequality_check(Zs):
            assert abs(row.order1) <= 1e-12
            assert abs(row.order2 - series_order2(row.Z)) <= 1e-12

    def test_rejects_bad_samples(self):
        with pytest.raises(ValueError):
            pd.rescaled_adequality_check([0j])
        with pytest.raises(ValueError):
            pd.rescaled_adequality_check([2.0])


class TestReport:
    @pytest.fixture(scope="class")
    @classmethod
    def report(cls):
        return pd.small_oscillation_report(
            amplitudes=(0.2, 0.1, 0.05), n_per_period=(10_000, 20_000, 40_000), n_periods=3,
            deviation_meshes=(1e-2, 1e-3, 1e-4),
        )

    def test_rotation_rows_flat(self, report):
        h = [r for r in report.rows if r.field == "H"]
        assert len(h) == 3
        assert all(r.abs_dev <= 1e-9 for r in h)
        assert report.h_spread <= 1e-9

    def test_nonlinear_rows_quadratic(self, report):
        assert report.fit_ok and report.verdict == "adequal_trend"
        assert report.fit.exponent == pytest.approx(2.0, abs=0.3)
        limits = report.f_periods()
        assert limits[0.1] - 2 * math.pi == pytest.approx((limits[0.2] - 2 * math.pi) / 4, rel=0.1)

    def test_walk_sweeps(self, report):
        assert report.f_vs_e.exponent == pytest.approx(2.0, abs=0.3)
        assert report.e_vs_h.exponent == pytest.approx(1.0, abs=0.2)
        assert report.f_vs_e.violations == 0 and report.e_vs_h.violations == 0

    def test_rows_sorted(self, report):
        keys = [(r.field, -r.a, -r.mesh) for r in report.rows]
        assert keys == sorted(keys)

    def test_needs_three_amplitudes(self):
        with pytest.raises(ValueError):
            pd.small_oscillation_report(amplitudes=(0.2, 0.1))

    def test_rejects_coarse_policy(self):
        with pytest.raises(ValueError):
            pd.small_oscillation_report(n_per_period=(1000, 2000, 4000))
