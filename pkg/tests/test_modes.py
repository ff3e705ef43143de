import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigmaspec.exceptions import DomainError, OutOfRangeError, ValidationError
from sigmaspec.modes import (
    EigenvalueEstimate,
    ModeParams,
    ShootingSettings,
    eigenfunction,
    find_eigenvalue,
    lightcone_analyticity,
    lightcone_condition,
    matching_defect,
    mode_center_series,
    mode_lightcone_series,
    mode_rhs,
    scan_eigenvalues,
    shooting_spectrum,
)
from sigmaspec.profiles import ground_state, ground_state_profile

from oracles import (
    EIGENVALUE_TOL,
    EXCITED_EIGENVALUES,
    GROUND_EIGENVALUES,
    gauge_ground,
    gauge_ground_prime,
)


# --- the ODE and its series -------------------------------------------------------

def test_gauge_mode_solves_ode(ground):
    rho = np.linspace(0.05, 0.95, 19)
    v, vp = gauge_ground(rho), gauge_ground_prime(rho)
    r2 = rho * rho
    vpp = 4.0 * rho * (r2 - 3.0) / (1.0 + r2) ** 3
    assert np.max(np.abs(vpp - mode_rhs(rho, v, vp, 1.0, ground))) <= 1e-12


def test_gauge_mode_solves_ode_on_excited(excited):
    rho = np.linspace(0.05, 0.95, 19)
    f, fp = excited.evaluate(rho)
    fpp = excited._splines[1](rho, 1)
    fppp = excited._splines[1](rho, 2)
    v, vp, vpp = rho * fp, fp + rho * fpp, 2.0 * fpp + rho * fppp
    # f''' comes from differentiating an interpolant, so only a relative check is meaningful
    res = np.abs(vpp - mode_rhs(rho, v, vp, 1.0, excited)) / (1.0 + np.abs(vpp))
    assert np.max(res) <= 1e-4


def test_mode_rhs_zero_solution(ground):
    assert mode_rhs(0.3, 0.0, 0.0, 0.7, ground) == 0.0


@pytest.mark.parametrize("rho", [0.0, 1.0])
def test_mode_rhs_singular_points(ground, rho):
    with pytest.raises(DomainError):
        mode_rhs(rho, 1.0, 1.0, 1.0, ground)


def test_potential_at_lightcone_on_ground_state():
    f1, _ = ground_state(1.0)
    assert 2.0 * np.cos(2.0 * f1) == pytest.approx(-2.0, abs=1e-15)


def test_mode_center_series_is_gauge_mode():
    rho = 1e-3
    v, vp = mode_center_series(2.0, 1.0, rho, 2.0)
    assert abs(v - gauge_ground(rho)) <= 1e-12
    assert abs(vp - gauge_ground_prime(rho)) <= 1e-12


@given(st.floats(-3.0, 7.0), st.floats(1e-6, 1e-3))
def test_mode_center_series_branch(lam, rho):
    v, _ = mode_center_series(1.5, lam, rho, 2.0)
    assert v / rho == pytest.approx(1.5, rel=1e-4)
    assert mode_center_series(0.0, lam, rho, 2.0) == (0.0, 0.0)


@pytest.mark.parametrize("lam, slope", [(1.0, 0.0), (-2.0, 0.0), (2.0, -1.0)])
def test_lightcone_condition(lam, slope):
    assert lightcone_condition(lam) == pytest.approx(slope, abs=1e-15)
    v, vp = mode_lightcone_series(lam, 1.0)
    assert v == 1.0 and vp == pytest.approx(slope, abs=1e-15)


def test_lightcone_series_is_gauge_mode():
    # gauge mode normalised to v(1) = 1
    for x in (-1e-3, 1e-3):
        v, vp = mode_lightcone_series(1.0, 1.0 + x)
        assert abs(v - gauge_ground(1.0 + x)) <= 1e-8
        assert abs(vp - gauge_ground_prime(1.0 + x)) <= 1e-5


def test_lambda_zero_rejected(ground):
    with pytest.raises(DomainError):
        lightcone_condition(0.0)
    with pytest.raises(ValidationError):
        ModeParams(0.0, 1.0, ground)


def test_estimate_requires_positive_uncertainty():
    with pytest.raises(ValidationError):
        EigenvalueEstimate(1.0, 0.0, "shooting", 0)
    with pytest.raises(ValidationError):
        EigenvalueEstimate(1.0, 1e-3, "guess", 0)


# --- matching defect --------------------------------------------------------------

def test_gauge_pair_has_zero_defect(ground):
    d = matching_defect(ModeParams(1.0, 2.0, ground))
    assert np.max(np.abs(d)) <= 1e-8


def test_generic_pair_has_large_defect(ground):
    d = matching_defect(ModeParams(0.5, 1.0, ground))
    assert np.max(np.abs(d)) > 1e-2


@given(st.floats(-0.9, 5.0).filter(lambda x: abs(x) > 0.05), st.floats(-5.0, 5.0))
def test_defect_is_affine_in_amplitude(lam, a):
    p = ground_state_profile()
    d0 = matching_defect(ModeParams(lam, 0.0, p))
    d1 = matching_defect(ModeParams(lam, 1.0, p))
    da = matching_defect(ModeParams(lam, a, p))
    center = d1 - d0
    np.testing.assert_allclose(da, d0 + a * center, atol=1e-9 * (1 + abs(a)) * np.max(np.abs(d1)))
    d2 = matching_defect(ModeParams(lam, 2.0 * a, p))
    np.testing.assert_allclose(d2 - d0, 2.0 * (da - d0), atol=1e-9 * (1 + abs(a)) * np.max(np.abs(d1)))


def test_defect_independent_of_match_point_at_eigenpair(ground):
    for rm in (0.3, 0.5, 0.7):
        d = matching_defect(ModeParams(1.0, 2.0, ground), rho_m=rm)
        assert np.max(np.abs(d)) <= 1e-8


# --- eigenvalues ----------------------------------------------------------------

@pytest.mark.parametrize("guess, expected", [(1.1, GROUND_EIGENVALUES[0]),
                                             (-0.5, GROUND_EIGENVALUES[1])])
def test_find_eigenvalue_ground(ground, guess, expected):
    est, sol = find_eigenvalue(guess, None, ground)
    assert est.value == pytest.approx(expected, abs=EIGENVALUE_TOL)
    assert est.method == "shooting" and est.profile_index == 0
    assert np.max(np.abs(sol.defect)) <= 1e-10
    assert est.uncertainty < 1e-6


def test_find_eigenvalue_gauge_amplitude(ground):
    est, sol = find_eigenvalue(1.1, None, ground)
    assert sol.params.a == pytest.approx(2.0, abs=1e-7)


def test_find_eigenvalue_excited_unstable(excited):
    est, _ = find_eigenvalue(6.0, None, excited)
    assert est.value == pytest.approx(EXCITED_EIGENVALUES[0], abs=EIGENVALUE_TOL)


def test_find_eigenvalue_rejects_guard_band(ground):
    with pytest.raises(ValidationError):
        find_eigenvalue(1e-4, 1.0, ground)


def test_scan_brackets_gauge_mode(ground):
    found = scan_eigenvalues((0.5, 1.5), 20, ground)
    assert len(found) == 1
    assert found[0][0] == pytest.approx(1.0, abs=1e-9)


def test_scan_first_stable_mode(ground):
    found = scan_eigenvalues((-0.9, -0.2), 20, ground)
    assert [round(l, 6) for l, _ in found] == [round(GROUND_EIGENVALUES[1], 6)]


def test_scan_empty_range(ground):
    assert scan_eigenvalues((2.0, 5.0), 30, ground) == []


def test_shooting_spectrum_ground(ground):
    est, sols = shooting_spectrum(ground, (-1.0, 2.0))
    np.testing.assert_allclose([e.value for e in est], GROUND_EIGENVALUES, atol=EIGENVALUE_TOL)
    assert len(sols) == len(est)


def test_shooting_spectrum_excited(excited):
    est, _ = shooting_spectrum(excited, (-1.0, 7.5))
    np.testing.assert_allclose([e.value for e in est], EXCITED_EIGENVALUES, atol=EIGENVALUE_TOL)


def test_refinement_within_uncertainty(ground):
    est, _ = find_eigenvalue(-0.5, None, ground)
    tight = ShootingSettings(rtol=1e-12, atol=1e-12)
    fine, _ = find_eigenvalue(-0.5, None, ground, tight)
    assert abs(fine.value - est.value) <= est.uncertainty


def test_match_point_independence(ground):
    base, _ = find_eigenvalue(-0.5, None, ground)
    moved, _ = find_eigenvalue(-0.5, None, ground, ShootingSettings(match_point=0.35))
    assert abs(moved.value - base.value) <= base.uncertainty + moved.uncertainty


# --- eigenfunctions -----------------------------------------------------------------

def test_eigenfunction_is_gauge_mode(ground):
    _, sol = find_eigenvalue(1.1, None, ground, samples=257)
    rho = np.linspace(0.0, 1.0, 401)
    v, vp = eigenfunction(sol, rho)
    assert np.max(np.abs(v - gauge_ground(rho))) <= 1e-7
    assert np.max(np.abs(vp - gauge_ground_prime(rho))) <= 1e-6
    assert eigenfunction(sol, 1.0)[0] == pytest.approx(1.0, abs=1e-12)


def test_eigenfunction_requires_samples(ground):
    _, sol = find_eigenvalue(1.1, None, ground)
    with pytest.raises(ValidationError):
        eigenfunction(sol, 0.5)


def test_eigenfunction_range(ground):
    _, sol = find_eigenvalue(1.1, None, ground, samples=64)
    with pytest.raises(OutOfRangeError):
        eigenfunction(sol, 1.2)


# --- analytic eigenvalue at lambda = -2 ------------------------------------------------

def test_lambda_minus_two_is_analytic_on_ground_state(ground):
    res = lightcone_analyticity(ground, -2.0)
    assert res.analytic
    assert res.relative_log <= 1e-4
    assert res.obstruction == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("lam", [-1.9, -2.1])
def test_nearby_lambda_is_not_analytic(ground, lam):
    assert not lightcone_analyticity(ground, lam).analytic


def test_lambda_minus_two_is_not_analytic_on_excited(excited):
    res = lightcone_analyticity(excited, -2.0)
    assert not res.analytic
    assert res.obstruction != pytest.approx(0.0, abs=1e-3)


def test_analyticity_rejects_poles(ground):
    with pytest.raises(DomainError):
        lightcone_analyticity(ground, -1.0)
