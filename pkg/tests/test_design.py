import json
import math

import numpy as np
import pytest

from spectro import OpticalLayout, VipaSpec
from spectro.design import (
    DesignGoal,
    DesignResult,
    clipping_residual,
    full_design,
    solve_fin_interval,
    solve_fx,
    solve_fy_max,
    solve_incident_angle,
    solve_thickness,
)
from spectro.errors import InfeasibleDesignError
from spectro.vipa import dispersion_shift_mhz, fwhm_freq_mhz

DEG = math.pi / 180.0
LAM0 = 605.9773


def ladder_angles(vipa, lam0_nm, theta_min, theta_max):
    """Independent enumeration of all exactly resonant angles in a bracket."""
    two_tn_nm = 2.0 * vipa.t * vipa.n_r * 1e6
    angles = []
    m = math.floor(two_tn_nm / lam0_nm)
    while m >= 1:
        arg = m * lam0_nm / two_tn_nm
        theta = math.acos(min(arg, 1.0))
        if theta > theta_max:
            break
        if theta >= theta_min:
            angles.append((theta, m))
        m -= 1
    return angles


class TestIncidentAngle:
    def test_constructed_resonance_recovered(self, vipa_ref):
        theta_true = 0.5 * DEG
        two_tn_nm = 2.0 * 6.74 * 1.46 * 1e6
        m_true = math.floor(two_tn_nm * math.cos(theta_true) / LAM0)
        lam0 = two_tn_nm * math.cos(theta_true) / m_true
        theta, m = solve_incident_angle(vipa_ref, lam0, 0.49 * DEG, 0.61 * DEG)
        assert m == m_true
        assert theta == pytest.approx(theta_true, abs=1e-12)

    def test_smallest_angle_of_enumerated_ladder(self, vipa_ref):
        bracket = (0.2 * DEG, 1.2 * DEG)
        expected = ladder_angles(vipa_ref, LAM0, *bracket)
        theta, m = solve_incident_angle(vipa_ref, LAM0, *bracket)
        # arccos amplifies ulp-level argument noise by 1/sin(theta) ~ 1e2
        assert (theta, m) == (pytest.approx(expected[0][0], abs=1e-12), expected[0][1])
        # every enumerated order satisfies the resonance identity tightly
        for th, mm in expected:
            residual = abs(mm * LAM0 * 1e-6 - 2.0 * 6.74 * 1.46 * math.cos(th)) / (mm * LAM0 * 1e-6)
            assert residual < 1e-12

    def test_empty_bracket_reports_candidates(self, vipa_ref):
        angles = ladder_angles(vipa_ref, LAM0, 0.2 * DEG, 1.2 * DEG)
        lo = angles[0][0] + 1e-5
        hi = angles[1][0] - 1e-5
        with pytest.raises(InfeasibleDesignError) as err:
            solve_incident_angle(vipa_ref, LAM0, lo, hi)
        assert "candidate" in str(err.value)

    def test_bad_bracket_rejected(self, vipa_ref):
        with pytest.raises(ValueError):
            solve_incident_angle(vipa_ref, LAM0, 0.02, 0.01)
        with pytest.raises(ValueError):
            solve_incident_angle(vipa_ref, LAM0, 0.01, 0.2)


class TestSolveFx:
    def test_current_setup_value(self, vipa_ref):
        f_x = solve_fx(vipa_ref, 0.68 * DEG, LAM0, 120.0, 30.0)
        assert f_x == pytest.approx(1016.0, rel=0.02)

    def test_forward_roundtrip(self, vipa_ref):
        rng = np.random.default_rng(12)
        for _ in range(100):
            theta = rng.uniform(0.05, 5.0) * DEG
            dnu = rng.uniform(20.0, 2000.0)
            pitch = rng.uniform(5.0, 100.0)
            f_x = solve_fx(vipa_ref, theta, LAM0, dnu, pitch)
            layout = OpticalLayout(lambda0=LAM0, W=1.0, theta_in=theta, f_in=400.0, f_x=f_x, f_y=40.0)
            got = abs(float(dispersion_shift_mhz(vipa_ref, layout, pitch)))
            assert got == pytest.approx(dnu, rel=1e-9)

    def test_linear_regime_doubling(self, vipa_ref):
        theta = 0.68 * DEG
        f1 = solve_fx(vipa_ref, theta, LAM0, 120.0, 30.0)
        f2 = solve_fx(vipa_ref, theta, LAM0, 120.0, 60.0)
        # quadratic term must be a sub-1e-3 correction in this regime
        n_r = 1.46
        a = math.tan(theta) / n_r
        quad_over_lin = (30.0e-3 / f1) / (2.0 * n_r * n_r * a)
        assert quad_over_lin < 1e-3
        assert f2 == pytest.approx(2.0 * f1, rel=5e-3)

    def test_monotone_in_mode_spacing(self, vipa_ref):
        values = [solve_fx(vipa_ref, 0.68 * DEG, LAM0, dnu, 30.0) for dnu in np.linspace(40, 400, 10)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestClippingInterval:
    @staticmethod
    def closed_form_interval(vipa, theta, lam0_nm, w_mm):
        """Quadratic-in-w0^2 solution of the clipping equality (test oracle)."""
        lam = lam0_nm * 1e-6
        a2 = (vipa.t * math.tan(theta)) ** 2
        c = (lam * vipa.t) ** 2 / (math.pi**2 * vipa.n_r**2)
        disc = a2 * a2 - 4.0 * c
        if disc < 0:
            return None
        u_lo = (a2 - math.sqrt(disc)) / 2.0
        u_hi = (a2 + math.sqrt(disc)) / 2.0
        to_fin = lambda u: math.pi * w_mm * math.sqrt(u) / lam
        return to_fin(u_lo), to_fin(u_hi)

    def test_current_setup_interval(self, vipa_ref):
        interval = solve_fin_interval(vipa_ref, 0.68 * DEG, LAM0, 1.0)
        assert interval is not None
        lo, hi = interval
        assert lo == pytest.approx(57.0, rel=0.10)
        assert hi == pytest.approx(415.0, rel=0.10)

    def test_against_closed_form(self, vipa_ref, vipa_thick):
        for vipa, theta in ((vipa_ref, 0.68 * DEG), (vipa_ref, 0.45 * DEG), (vipa_thick, 0.30 * DEG)):
            got = solve_fin_interval(vipa, theta, LAM0, 1.0, tol_mm=0.01)
            ref = self.closed_form_interval(vipa, theta, LAM0, 1.0)
            assert got is not None and ref is not None
            assert got[0] == pytest.approx(ref[0], abs=0.02)
            assert got[1] == pytest.approx(ref[1], abs=0.02)

    def test_residual_sign_pattern(self, vipa_ref):
        f_grid = np.linspace(1.0, 2000.0, 1000)
        res = clipping_residual(vipa_ref, 0.68 * DEG, LAM0, 1.0, f_grid)
        signs = np.sign(res)
        changes = np.nonzero(np.diff(signs))[0]
        assert len(changes) == 2
        assert signs[0] < 0 and signs[-1] < 0 and np.any(signs > 0)
        lo, hi = solve_fin_interval(vipa_ref, 0.68 * DEG, LAM0, 1.0)
        assert f_grid[changes[0]] <= lo <= f_grid[changes[0] + 1]
        assert f_grid[changes[1]] <= hi <= f_grid[changes[1] + 1]

    def test_finer_tolerance_stability(self, vipa_ref):
        coarse = solve_fin_interval(vipa_ref, 0.68 * DEG, LAM0, 1.0, tol_mm=0.1)
        fine = solve_fin_interval(vipa_ref, 0.68 * DEG, LAM0, 1.0, tol_mm=0.01)
        assert abs(coarse[0] - fine[0]) < 0.05
        assert abs(coarse[1] - fine[1]) < 0.05

    def test_interval_shrinks_with_angle(self, vipa_ref):
        full = solve_fin_interval(vipa_ref, 0.68 * DEG, LAM0, 1.0)
        half = solve_fin_interval(vipa_ref, math.atan(math.tan(0.68 * DEG) / 2.0), LAM0, 1.0)
        if half is None:
            return
        assert half[0] > full[0] and half[1] < full[1]

    def test_empty_interval_below_clipping_threshold(self, vipa_ref):
        # tan(theta) below sqrt(2 lambda / (pi n_r t)) admits no focal length
        theta_min = math.atan(math.sqrt(2.0 * LAM0 * 1e-6 / (math.pi * 1.46 * 6.74)))
        assert solve_fin_interval(vipa_ref, 0.9 * theta_min, LAM0, 1.0) is None


class TestThickness:
    def test_target_120mhz(self, vipa_ref):
        assert solve_thickness(vipa_ref, 120.0) == pytest.approx(16.5, rel=0.01)

    def test_target_294mhz(self, vipa_ref):
        assert solve_thickness(vipa_ref, 294.0) == pytest.approx(6.74, rel=0.01)

    def test_exact_roundtrip(self, vipa_ref):
        rng = np.random.default_rng(9)
        theta = 0.4 * DEG
        cos_theta = math.cos(1.46 * theta)
        for target in rng.uniform(50.0, 500.0, 10):
            t = solve_thickness(vipa_ref, target, cos_theta=cos_theta)
            vipa2 = VipaSpec(R=0.996, r=0.945, n_r=1.46, t=t, L=18.0)
            layout = OpticalLayout(lambda0=LAM0, W=1.0, theta_in=theta, f_in=400.0, f_x=1000.0, f_y=40.0)
            assert fwhm_freq_mhz(vipa2, layout) == pytest.approx(target, rel=1e-12)


class TestFullDesign:
    def test_current_setup(self, vipa_ref):
        goal = DesignGoal(
            lambda0=LAM0, delta_nu=120.0, pitch=30.0, W=1.0, y_element=30.0, theta_in_target=0.68 * DEG
        )
        res = full_design(vipa_ref, goal)
        assert res.theta_in / DEG == pytest.approx(0.68, abs=0.1)
        assert res.f_x == pytest.approx(1016.0, rel=0.02)
        assert res.f_in_interval[0] == pytest.approx(57.0, rel=0.10)
        assert res.f_in_interval[1] == pytest.approx(415.0, rel=0.10)
        # the as-built 40 mm output lens respects the y-size bound
        assert res.f_y_max > 40.0
        # exact-resonance pair satisfies the order identity to 1e-12
        resid = abs(res.m * LAM0 * 1e-6 - 2.0 * 6.74 * 1.46 * math.cos(res.theta_in_resonant))
        assert resid / (res.m * LAM0 * 1e-6) < 1e-12

    def test_redesigned_setup(self, vipa_ref):
        goal = DesignGoal(
            lambda0=LAM0,
            delta_nu=120.0,
            pitch=30.0,
            W=1.0,
            y_element=30.0,
            fwhm_target=120.0,
            theta_in_target=0.30 * DEG,
        )
        res = full_design(vipa_ref, goal)
        assert res.theta_in / DEG == pytest.approx(0.30, abs=0.05)
        assert res.f_x == pytest.approx(449.0, rel=0.03)
        assert res.t_used == pytest.approx(16.5, rel=0.01)
        assert res.t_required == res.t_used

    def test_default_angle_policy(self, vipa_ref):
        goal = DesignGoal(lambda0=LAM0, delta_nu=120.0, pitch=30.0, W=1.0, y_element=30.0)
        res = full_design(vipa_ref, goal)
        # smallest resonant angle whose clipping interval is non-empty
        for theta, m in ladder_angles(vipa_ref, LAM0, 1e-4, 0.1):
            if solve_fin_interval(vipa_ref, theta, LAM0, 1.0) is not None:
                assert res.theta_in == pytest.approx(theta, abs=1e-12)
                assert res.m == m
                break
        assert res.theta_in == res.theta_in_resonant

    def test_spacing_beyond_fsr_is_infeasible(self, vipa_ref):
        goal = DesignGoal(
            lambda0=LAM0, delta_nu=20000.0, pitch=30.0, W=1.0, y_element=30.0, theta_in_target=0.68 * DEG
        )
        with pytest.raises(InfeasibleDesignError) as err:
            full_design(vipa_ref, goal)
        assert "FSR" in str(err.value)

    def test_diagnostics_reproduce_efficiency_estimate(self, vipa_ref):
        # ideal in-element efficiency 0.35 times the in-element weight
        # fraction lands near the measured-optics estimate of ~0.09
        goal = DesignGoal(
            lambda0=LAM0, delta_nu=120.0, pitch=30.0, W=1.0, y_element=30.0, theta_in_target=0.68 * DEG
        )
        res = full_design(vipa_ref, goal)
        inside = 1.0 - res.diagnostics["mode_fraction_outside_element"]
        assert 0.35 * inside == pytest.approx(0.09, abs=0.02)
        assert res.diagnostics["x_fwhm_um"] == pytest.approx(73.0, abs=4.0)

    def test_json_export_field_names(self, vipa_ref):
        goal = DesignGoal(
            lambda0=LAM0, delta_nu=120.0, pitch=30.0, W=1.0, y_element=30.0, theta_in_target=0.68 * DEG
        )
        doc = json.loads(json.dumps(full_design(vipa_ref, goal).to_json_dict()))
        assert set(doc) == {
            "theta_in_deg",
            "m",
            "f_x_mm",
            "f_in_min_mm",
            "f_in_max_mm",
            "f_y_max_mm",
            "t_mm",
            "diagnostics",
        }


def test_fy_bound_formula():
    # full 1/e^2 width 2 lambda f_y / (pi W) equals the element height at the bound
    f_y = solve_fy_max(LAM0, 1.0, 30.0)
    width_um = 2.0 * LAM0 * 1e-6 * f_y / (math.pi * 1.0) * 1e3
    assert width_um == pytest.approx(30.0, rel=1e-12)
