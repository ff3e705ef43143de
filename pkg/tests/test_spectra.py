import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigmaspec.evolve import Grid, SchemeConfig, State, evolve, initial_data
from sigmaspec.exceptions import DegeneracyError, GridMismatchError, ValidationError
from sigmaspec.spectra import (
    QuadratureRule,
    co_evolve_filtered,
    extract_spectrum,
    fit_growth_rate,
    inner_product,
    norm,
    project_out,
    select_window,
)

from oracles import EVOLUTION_256_TOL, GROUND_EVOLUTION_256

N = 64


def state(u1=None, u2=None, u3=None, n=N):
    r = Grid(n).rho
    z = np.zeros_like(r)
    parts = [z if f is None else f(r) for f in (u1, u2, u3)]
    return State(0.0, np.vstack(parts))


vectors = st.lists(st.floats(-10, 10), min_size=3 * (N + 2), max_size=3 * (N + 2)).map(
    lambda v: State(0.0, np.array(v).reshape(3, N + 2)))


# --- quadrature and inner product ----------------------------------------------------

def test_trapezoid_weights():
    q = QuadratureRule.trapezoid(N)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert q.weights[-1] == 0.0
    assert q.weights[0] == q.weights[N] == 0.5 / N


def test_negative_weights_rejected():
    with pytest.raises(ValidationError):
        QuadratureRule(np.array([1.0, -1.0]))


def test_inner_product_of_linear_function():
    x = state(u1=lambda r: r)
    # trapezoid error for int rho^2 is h^2 / 6
    assert inner_product(x, x) == pytest.approx(1.0 / 3.0 + 1.0 / (6 * N * N), abs=1e-15)


def test_inner_product_sums_components():
    x = state(u1=lambda r: 1 + 0 * r, u2=lambda r: 1 + 0 * r, u3=lambda r: 1 + 0 * r)
    assert norm(x) == pytest.approx(math.sqrt(3.0), abs=1e-14)


def test_inner_product_grid_mismatch():
    with pytest.raises(GridMismatchError):
        inner_product(state(n=64), state(n=128))
    with pytest.raises(GridMismatchError):
        inner_product(state(), state(), QuadratureRule.trapezoid(128))


@given(vectors, vectors, st.floats(-5, 5))
def test_inner_product_is_symmetric_bilinear(x, y, a):
    assert inner_product(x, y) == pytest.approx(inner_product(y, x), rel=1e-12, abs=1e-12)
    lhs = inner_product(a * x + y, y)
    rhs = a * inner_product(x, y) + inner_product(y, y)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@given(vectors)
def test_inner_product_is_definite(x):
    n2 = inner_product(x, x)
    assert n2 >= 0.0
    interior = x.u[:, : N + 1]
    if np.any(interior != 0.0):
        assert n2 > 0.0
    else:
        assert n2 == 0.0


# --- projection ----------------------------------------------------------------------

def test_project_out_orthogonal_and_idempotent():
    rng = np.random.default_rng(3)
    basis = [State(0.0, rng.normal(size=(3, N + 2))) for _ in range(3)]
    t = State(0.0, rng.normal(size=(3, N + 2)))
    p = project_out(t, basis)
    for b in basis:
        assert abs(inner_product(p, b)) <= 1e-12 * norm(t) * norm(b)
    np.testing.assert_allclose(project_out(p, basis).u, p.u, atol=1e-13)


def test_project_out_removes_span():
    rng = np.random.default_rng(4)
    basis = [State(0.0, rng.normal(size=(3, N + 2))) for _ in range(2)]
    t = 2.0 * basis[0] + (-3.0) * basis[1]
    assert norm(project_out(t, basis)) <= 1e-12 * norm(t)


def test_project_out_degenerate_basis():
    b = state(u1=lambda r: r)
    with pytest.raises(DegeneracyError):
        project_out(state(u2=lambda r: r), [b, 2.0 * b])
    with pytest.raises(DegeneracyError):
        project_out(b, [state()])


# --- filtered co-evolution -------------------------------------------------------------

@pytest.fixture(scope="module")
def short_cfg(ground):
    return SchemeConfig(ground, tau_end=1.0, stride=16)


def test_projection_chain_identity(short_cfg):
    # filtering every step equals filtering once after evolving every level
    names = ("phi", "psi", "quintic", "kick")
    data = [initial_data(d, 128) for d in names]
    bank = co_evolve_filtered(data, short_cfg, renormalize=False)
    free = [evolve(d, short_cfg) for d in data]
    for j in range(1, 4):
        ref = project_out(free[j], free[:j])
        got = bank.states[j]
        assert norm(got + (-1.0) * ref) <= 1e-9 * norm(ref)


def test_renormalization_is_neutral(short_cfg):
    data = [initial_data(d, 128) for d in ("phi", "psi", "quintic")]
    a = co_evolve_filtered(data, short_cfg, renormalize=True)
    b = co_evolve_filtered(data, short_cfg, renormalize=False)
    np.testing.assert_array_equal(a.tau, b.tau)
    assert np.max(np.abs(a.log_norms - b.log_norms)) <= 1e-8
    for sa, sb in zip(a.states, b.states):
        assert norm(sa) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(sa.u * norm(sb), sb.u, atol=1e-9 * norm(sb))


def test_filtered_levels_are_orthogonal(short_cfg):
    bank = co_evolve_filtered([initial_data(d, 128) for d in ("phi", "psi", "kick")], short_cfg)
    for j in range(3):
        for k in range(j):
            assert abs(inner_product(bank.states[j], bank.states[k])) <= 1e-12


def test_log_norm_series_start(short_cfg):
    data = [initial_data(d, 128) for d in ("phi", "psi")]
    bank = co_evolve_filtered(data, short_cfg)
    assert bank.tau[0] == 0.0 and bank.tau[-1] == pytest.approx(1.0)
    assert bank.log_norms.shape == (2, bank.tau.size)
    # the first sample is taken after the constraint projection of the data
    start = State(0.0, short_cfg.scheme(128).enforce(np.array(data[0].u)))
    assert bank.log_norms[0, 0] == pytest.approx(math.log(norm(start)), abs=1e-12)
    header, rows = bank.to_csv_rows()
    assert header == ["tau", "Lambda_0", "Lambda_1"] and rows.shape == (bank.tau.size, 3)


def test_degenerate_data_detected(short_cfg):
    d = initial_data("phi", 128)
    with pytest.raises(DegeneracyError):
        co_evolve_filtered([d, 3.0 * d], short_cfg)


def test_level_count_validation(short_cfg):
    with pytest.raises(ValidationError):
        co_evolve_filtered([], short_cfg)
    with pytest.raises(ValidationError):
        co_evolve_filtered([initial_data("phi", 128)] * 5, short_cfg)
    with pytest.raises(GridMismatchError):
        co_evolve_filtered([initial_data("phi", 128), initial_data("psi", 64)], short_cfg)


# --- growth-rate fits ----------------------------------------------------------------

def test_exact_line():
    t = np.linspace(0.0, 10.0, 1001)
    fit = fit_growth_rate(t, 0.75 * t - 2.0)
    assert fit.slope == pytest.approx(0.75, abs=1e-12)
    assert fit.intercept == pytest.approx(-2.0, abs=1e-11)
    assert fit.rms <= 1e-12 and not fit.oscillation
    assert fit.window == (5.0, 10.0)


def test_window_validation():
    t = np.linspace(0.0, 10.0, 1001)
    with pytest.raises(ValidationError):
        fit_growth_rate(t, t, (8.5, 10.0))
    with pytest.raises(ValidationError):
        fit_growth_rate(t, t, (9.0, 11.0))
    with pytest.raises(ValidationError):
        fit_growth_rate(np.linspace(0, 10, 15), np.zeros(15), (0.0, 10.0))
    with pytest.raises(ValidationError):
        fit_growth_rate(t[::-1], t)


def test_oscillation_flag_on_periodic_residual():
    t = np.linspace(0.0, 12.0, 1201)
    fit = fit_growth_rate(t, -0.5 * t + 0.05 * np.sin(3.0 * t), (6.0, 12.0))
    assert fit.oscillation


def test_no_oscillation_flag_on_decaying_transient():
    t = np.linspace(0.0, 12.0, 1201)
    fit = fit_growth_rate(t, -0.5 * t + 0.3 * np.exp(-1.5 * t), (2.0, 12.0))
    assert not fit.oscillation


def test_select_window_trims_transient():
    t = np.linspace(0.0, 12.0, 1201)
    y = 1.0 * t + 2.0 * np.exp(-2.0 * t)
    best, shift = select_window(t, y)
    assert best.window[0] >= 6.0 and best.window[1] == 12.0
    assert best.slope == pytest.approx(1.0, abs=1e-4)
    assert shift >= 0.0


@given(st.floats(-3.0, 3.0), st.floats(-5.0, 5.0))
def test_fit_recovers_any_line(slope, icpt):
    t = np.linspace(0.0, 6.0, 301)
    fit = fit_growth_rate(t, slope * t + icpt, detect=False)
    assert fit.slope == pytest.approx(slope, abs=1e-10)


# --- spectrum extraction -------------------------------------------------------------

@pytest.fixture(scope="module")
def spectrum_256(ground):
    return extract_spectrum(ground, 4, SchemeConfig(ground), N=256, window=(10.0, 12.0), coarse=False)


def test_frozen_ground_spectrum_256(spectrum_256):
    np.testing.assert_array_less(np.abs(spectrum_256.values - GROUND_EVOLUTION_256), EVOLUTION_256_TOL)
    for k, e in enumerate(spectrum_256):
        assert e.method == "evolution" and e.level == k and e.uncertainty > 0
        assert not e.oscillation


def test_amplitude_independence(ground):
    cfg = SchemeConfig(ground, tau_end=6.0)
    base = [initial_data(d, 128) for d in ("phi", "psi")]
    a = co_evolve_filtered(base, cfg)
    b = co_evolve_filtered([1e3 * base[0], 1e-3 * base[1]], cfg)
    for j, alpha in enumerate((1e3, 1e-3)):
        fa = fit_growth_rate(a.tau, a.log_norms[j], (4.0, 6.0))
        fb = fit_growth_rate(b.tau, b.log_norms[j], (4.0, 6.0))
        assert fb.slope == pytest.approx(fa.slope, abs=1e-9)
        assert fb.intercept - fa.intercept == pytest.approx(math.log(alpha), abs=1e-8)


def test_data_independence(ground):
    cfg = SchemeConfig(ground, tau_end=8.0)
    one = extract_spectrum(ground, 2, cfg, N=128, data=["phi", "psi"], coarse=False)
    two = extract_spectrum(ground, 2, cfg, N=128, data=["quintic", "kick"], coarse=False)
    assert np.max(np.abs(one.values - two.values)) <= 2e-3


def test_coarse_run_sets_discretisation_error(ground):
    cfg = SchemeConfig(ground, tau_end=6.0)
    res = extract_spectrum(ground, 1, cfg, N=128)
    e = res[0]
    assert res.coarse is not None
    assert "floor" not in e.details
    assert e.uncertainty >= e.details["discretisation"]


def test_extract_spectrum_validation(ground, excited):
    with pytest.raises(ValidationError):
        extract_spectrum(ground, 5, N=128)
    with pytest.raises(ValidationError):
        extract_spectrum(ground, 2, N=128, data=["phi"])
    with pytest.raises(ValidationError):
        extract_spectrum(ground, 1, SchemeConfig(excited), N=128)
    with pytest.raises(ValidationError):
        extract_spectrum(ground, 1, SchemeConfig(ground, tau_end=3.0), N=128, window="best")
