import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigmaspec import _kernels
from sigmaspec.evolve import (
    Grid,
    SchemeConfig,
    State,
    apply_center_bc,
    characteristic_projectors,
    characteristic_speeds,
    eigenmode_state,
    evolve,
    gauge_mode,
    gauge_mode_error,
    initial_data,
    max_stable_cfl,
    self_convergence,
    spatial_operator,
    step,
)
from sigmaspec.exceptions import GridMismatchError, InstabilityError, ValidationError
from sigmaspec.io import read_csv, snapshot_rows, write_csv
from sigmaspec.profiles import ground_state_profile

from oracles import gauge_ground, gauge_ground_prime


@pytest.fixture(scope="module")
def cfg(ground):
    return SchemeConfig(ground, tau_end=0.5)


def random_state(N, seed, tau=0.0):
    rng = np.random.default_rng(seed)
    g = Grid(N)
    r = g.rho
    c = rng.normal(size=(3, 3))
    u1 = r * (c[0, 0] + c[0, 1] * r * r + c[0, 2] * r**4)
    u3 = c[0, 0] + 3 * c[0, 1] * r * r + 5 * c[0, 2] * r**4
    u2 = r * (c[1, 0] + c[1, 1] * r * r)
    return State(tau, np.vstack([u1, u2, u3]))


# --- grid and state -----------------------------------------------------------------

def test_grid_layout():
    g = Grid(64)
    assert g.size == 66 and g.h == 1.0 / 64
    assert g.rho[0] == 0.0 and g.rho[64] == 1.0 and g.rho[65] == pytest.approx(65 / 64)
    with pytest.raises(ValidationError):
        Grid(8)


def test_state_is_read_only():
    s = random_state(64, 0)
    with pytest.raises(ValueError):
        s.u[0, 0] = 1.0


def test_state_shape_validation():
    with pytest.raises(ValidationError):
        State(0.0, np.zeros((2, 66)))


def test_state_grid_mismatch():
    with pytest.raises(GridMismatchError):
        random_state(64, 0) + random_state(128, 0)


def test_ghost_parity():
    s = random_state(64, 1)
    P = s.padded()
    for k in (1, 2):
        assert P[0, 2 - k] == -s.u1[k]
        assert P[1, 2 - k] == -s.u2[k]
        assert P[2, 2 - k] == s.u3[k]
    np.testing.assert_array_equal(P[:, 2:], s.u)


def test_apply_center_bc():
    u = np.ones((3, 66))
    s = apply_center_bc(State(0.0, u))
    assert s.u1[0] == 0.0 and s.u2[0] == 0.0 and s.u3[0] == 1.0


def test_initial_data_library():
    g = Grid(128)
    for name in ("phi", "psi", "quintic"):
        s = initial_data(name, g)
        assert s.u1[0] == 0.0
        d = np.gradient(s.u1, g.h)
        assert np.max(np.abs(d[2:-2] - s.u3[2:-2])) <= 1e-3
    with pytest.raises(ValidationError):
        initial_data("nope", g)


# --- characteristic structure ----------------------------------------------------------

def test_characteristic_speeds():
    assert characteristic_speeds(0.0) == (-1.0, 1.0)
    assert characteristic_speeds(1.0) == (-2.0, 0.0)
    with pytest.raises(ValidationError):
        characteristic_speeds(-0.5)


@given(st.floats(0.0, 1.2))
def test_projector_identities(rho):
    am, ap = characteristic_projectors(rho)
    lm, lp = characteristic_speeds(rho)
    A = np.array([[0, 0, 0], [0, -2 * rho, 1 - rho * rho], [0, 1, 0]])
    P = np.diag([0.0, 1.0, 1.0])
    np.testing.assert_allclose(am + ap, P, atol=1e-14)
    np.testing.assert_allclose(lm * am + lp * ap, A, atol=1e-14)
    np.testing.assert_allclose(am @ am, am, atol=1e-13)
    np.testing.assert_allclose(ap @ ap, ap, atol=1e-13)
    np.testing.assert_allclose(am @ ap, 0.0, atol=1e-13)


def test_max_stable_cfl():
    assert max_stable_cfl(2048) == pytest.approx(0.5 / (2 + 1 / 2048))
    assert 0.2 < max_stable_cfl(64)


def test_unstable_cfl_rejected(ground):
    with pytest.raises(ValidationError):
        SchemeConfig(ground, cfl=0.4).scheme(256)
    with pytest.raises(ValidationError):
        SchemeConfig(ground, cfl=0.6)
    with pytest.raises(ValidationError):
        SchemeConfig(ground, constraint="other")


# --- the discrete operator ------------------------------------------------------------

@pytest.mark.parametrize("profile_name", ["ground", "excited"])
def test_compiled_rhs_matches_reference(request, profile_name):
    p = request.getfixturevalue(profile_name)
    sc = SchemeConfig(p).scheme(128)
    U = np.stack([random_state(128, s).u for s in range(3)])
    out = np.empty_like(U)
    _kernels.rhs(U, out, sc.h, sc.N, sc.co)
    ref = sc.rhs(U)
    assert np.max(np.abs(out - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_compiled_step_matches_reference(cfg):
    sc = cfg.scheme(128)
    U = sc.enforce(np.stack([random_state(128, 5).u]))
    ref = sc.step(U[0].copy(), 1e-3)
    sc.advance(U, 1e-3)
    assert np.max(np.abs(U[0] - ref)) <= 1e-13


def test_spatial_operator_zero(cfg):
    assert np.all(spatial_operator(State(0.0, np.zeros((3, 130))), cfg) == 0.0)


def test_single_step(cfg):
    s = random_state(128, 2)
    t = step(s, cfg)
    assert t.tau == pytest.approx(cfg.time_step(128))
    assert np.all(np.isfinite(t.u))


# --- evolution ------------------------------------------------------------------------

@given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.integers(0, 1000))
def test_linearity(alpha, beta, seed):
    cfg = SchemeConfig(ground_state_profile(), tau_end=0.25)
    x, y = random_state(64, seed), random_state(64, seed + 1)
    lhs = evolve(alpha * x + beta * y, cfg)
    rhs = alpha * evolve(x, cfg) + beta * evolve(y, cfg)
    scale = 1.0 + np.max(np.abs(lhs.u))
    assert np.max(np.abs(lhs.u - rhs.u)) <= 1e-12 * scale


def test_zero_data_stays_zero(cfg):
    s = evolve(State(0.0, np.zeros((3, 258))), cfg)
    assert np.all(s.u == 0.0)


def test_zero_duration_returns_initial(cfg):
    s0 = initial_data("phi", 128)
    s = evolve(s0, cfg, tau_end=0.0)
    assert s.tau == 0.0
    # only the constraint projection of u1 is applied
    np.testing.assert_array_equal(s.u[1:], s0.u[1:])
    assert np.max(np.abs(s.u1 - s0.u1)) <= 2.0 / 128**2


def test_observer_schedule(ground):
    cfg = SchemeConfig(ground, tau_end=0.5, stride=10)
    seen = []
    evolve(initial_data("phi", 64), cfg, observer=lambda t, s: seen.append(t))
    n, dt = cfg.steps(64)
    assert seen[0] == 0.0 and seen[-1] == pytest.approx(0.5)
    assert len(seen) == n // 10 + 1 + (n % 10 != 0)


def test_time_step_never_exceeds_cfl(ground):
    cfg = SchemeConfig(ground, tau_end=0.333)
    n, dt = cfg.steps(256)
    assert dt <= cfg.time_step(256) and n * dt == pytest.approx(0.333)


def test_gauge_mode_data_matches_closed_form(ground):
    rho = np.linspace(0.0, 1.0, 33)
    v, vp = gauge_mode(ground, rho)
    np.testing.assert_allclose(v, gauge_ground(rho), atol=1e-15)
    np.testing.assert_allclose(vp, gauge_ground_prime(rho), atol=1e-14)


def test_gauge_mode_grows_like_exp_tau(ground):
    cfg = SchemeConfig(ground, tau_end=2.0)
    e = [gauge_mode_error(cfg, N) for N in (128, 256)]
    assert e[1] <= 1e-4
    assert math.log2(e[0] / e[1]) > 1.8


def test_gauge_mode_on_excited_profile(excited):
    cfg = SchemeConfig(excited, tau_end=0.5)
    # the steep core of f_1 (width about 1/b) makes the constant large; the order is what matters
    e = [gauge_mode_error(cfg, N) for N in (256, 512)]
    assert e[1] <= 1.5e-2
    assert math.log2(e[0] / e[1]) > 1.8


def test_eigenmode_state_layout():
    s = eigenmode_state(64, gauge_ground, gauge_ground_prime, 1.0)
    np.testing.assert_array_equal(s.u1, s.u2)
    np.testing.assert_allclose(s.u3, gauge_ground_prime(Grid(64).rho))


def test_instability_detected(excited):
    cfg = SchemeConfig(excited, tau_end=4.0, growth_limit=1.0)
    with pytest.raises(InstabilityError) as info:
        evolve(initial_data("phi", 128), cfg)
    assert info.value.tau > 0


def test_self_convergence_order(ground):
    res = self_convergence(SchemeConfig(ground, tau_end=1.0), grids=(128, 256, 512))
    assert 1.8 <= res["order"] <= 2.2
    assert res["differences"][0] > res["differences"][1]


def test_self_convergence_free_constraint(ground):
    cfg = SchemeConfig(ground, tau_end=1.0, constraint="free")
    assert 1.8 <= self_convergence(cfg, grids=(128, 256, 512))["order"] <= 2.2


def test_self_convergence_grid_validation(ground):
    with pytest.raises(ValidationError):
        self_convergence(SchemeConfig(ground), grids=(128, 200, 512))


def test_reconstruct_keeps_constraint(ground):
    cfg = SchemeConfig(ground, tau_end=1.0)
    s = evolve(initial_data("psi", 128), cfg)
    h = 1.0 / 128
    integral = np.concatenate([[0.0], np.cumsum(0.5 * h * (s.u3[1:] + s.u3[:-1]))])
    np.testing.assert_allclose(s.u1, integral, atol=1e-14)


def test_free_constraint_violation_converges(ground):
    cfg = SchemeConfig(ground, tau_end=1.0, constraint="free")
    err = []
    for N in (128, 256):
        s = evolve(initial_data("psi", N), cfg)
        d = np.gradient(s.u1[: N + 1], 1.0 / N, edge_order=2)
        err.append(np.max(np.abs(d - s.u3[: N + 1])))
    assert math.log2(err[0] / err[1]) > 1.7


def test_domain_of_dependence(ground):
    # smooth data supported on rho < 0.3; the outgoing front rho(tau) obeys
    # d rho / d tau = 1 + rho and reaches about 0.44 at tau = 0.1
    g = Grid(512)
    r = g.rho
    bump = np.where(r < 0.3, np.exp(-1.0 / np.maximum(0.09 - r * r, 1e-300)) * 1e5, 0.0)
    u1 = r * bump
    u3 = np.gradient(u1, g.h)
    s = evolve(State(0.0, np.vstack([u1, 0 * r, u3])), SchemeConfig(ground, tau_end=0.1))
    peak = np.max(np.abs(s.u))
    assert np.max(np.abs(s.u[:, r > 0.55])) <= 1e-6 * peak


# --- snapshots ------------------------------------------------------------------------

def test_snapshot_csv_round_trip(tmp_path, cfg):
    states = []
    evolve(initial_data("phi", 64), SchemeConfig(cfg.profile, tau_end=0.1, stride=40),
           observer=lambda t, s: states.append(s))
    header, rows = snapshot_rows(states)
    path = tmp_path / "snap.csv"
    write_csv(path, header, rows)
    h2, back = read_csv(path)
    assert h2 == ["tau", "rho", "u1", "u2", "u3"]
    np.testing.assert_array_equal(back, rows)
    assert rows.shape == (len(states) * 66, 5)
