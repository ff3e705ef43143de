"""Growth rates from evolution data.

Several initial data are evolved side by side.  After every time step the
``j``-th level is projected orthogonally to levels ``0 .. j-1`` (modified
Gram-Schmidt) and renormalised, with the logarithm of the discarded scale
accumulated.  The log-norm of level ``j`` then grows with the real part of
the ``j``-th eigenvalue, read off by a least-squares line.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import check_int, check_interval
from . import _kernels
from .evolve import DEFAULT_DATA, Grid, SchemeConfig, State, initial_data
from .exceptions import DegeneracyError, GridMismatchError, InstabilityError, ValidationError
from .modes import EigenvalueEstimate

__all__ = [
    "QuadratureRule",
    "inner_product",
    "norm",
    "project_out",
    "FilterBank",
    "co_evolve_filtered",
    "GrowthFit",
    "fit_growth_rate",
    "select_window",
    "extract_spectrum",
    "spectrum_from_bank",
    "SpectrumResult",
    "MAX_LEVELS",
]

MAX_LEVELS = 4
MIN_WINDOW = 2.0
MIN_SAMPLES = 20
# relative norm left after projection below which a level counts as collapsed
DEGENERACY_RATIO = 1e-12
# residual amplitude (log units) below which no oscillation is reported
OSCILLATION_FLOOR = 1e-4


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Composite trapezoid weights on ``[0, 1]``; the exterior point gets zero weight."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0):
            raise ValidationError("quadrature weights must be a non-negative vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def trapezoid(cls, grid):
        if isinstance(grid, int):
            grid = Grid(grid)
        w = np.full(grid.size, grid.h)
        w[0] = w[grid.N] = 0.5 * grid.h
        w[grid.N + 1] = 0.0
        return cls(w)

    @property
    def size(self):
        return self.weights.size


def _rule(q, x):
    if q is None:
        return QuadratureRule.trapezoid(x.u.shape[1] - 2)
    if q.size != x.u.shape[1]:
        raise GridMismatchError(f"quadrature has {q.size} points, state has {x.u.shape[1]}")
    return q


def _ip(X, Y, w):
    return np.einsum("...cn,...cn,n->...", X, Y, w)


def inner_product(x, y, q=None):
    """``sum_j int_0^1 u_j v_j d rho`` under the rule ``q``."""
    if x.u.shape != y.u.shape:
        raise GridMismatchError(f"grid mismatch: {x.u.shape} vs {y.u.shape}")
    return float(_ip(x.u, y.u, _rule(q, x).weights))


def norm(x, q=None):
    return math.sqrt(max(inner_product(x, x, q), 0.0))


def _project_stack(U, w, j, unit):
    """Modified Gram-Schmidt of ``U[j]`` against ``U[:j]`` in place.

    With ``unit`` the earlier levels are assumed normalised.  Returns the
    norm of ``U[j]`` before projection.
    """
    before = math.sqrt(_ip(U[j], U[j], w))
    for k in range(j):
        coef = _ip(U[j], U[k], w)
        if not unit:
            coef /= _ip(U[k], U[k], w)
        U[j] -= coef * U[k]
    return before


def project_out(target, basis, q=None):
    """Remove the components of ``target`` along each member of ``basis``.

    Raises
    ------
    DegeneracyError
        If a basis member has (numerically) zero norm.
    """
    q = _rule(q, target)
    w = q.weights
    U = np.array(target.u)
    ortho = []
    for b in basis:
        if b.u.shape != target.u.shape:
            raise GridMismatchError("basis state on a different grid")
        v = np.array(b.u)
        scale = math.sqrt(_ip(v, v, w))
        for o in ortho:
            v -= _ip(v, o, w) * o
        nv = math.sqrt(_ip(v, v, w))
        if scale == 0.0 or nv <= DEGENERACY_RATIO * scale:
            raise DegeneracyError("basis is degenerate")
        ortho.append(v / nv)
    for o in ortho:
        U -= _ip(U, o, w) * o
    return State(target.tau, U)


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Result of a filtered co-evolution.

    Attributes
    ----------
    states : list of State
        Final (normalised when renormalising) levels.
    tau : ndarray
        Sample times, strictly increasing.
    log_norms : ndarray, shape (levels, samples)
        ``Lambda_j(tau)``, the accumulated log-norm of each level.
    log_rescale : ndarray
        Total log of the factors divided out of each level.
    """

    states: list
    tau: np.ndarray
    log_norms: np.ndarray
    log_rescale: np.ndarray
    config: SchemeConfig | None = None

    @property
    def levels(self):
        return self.log_norms.shape[0]

    def series(self, level):
        return self.tau, self.log_norms[level]

    def to_csv_rows(self):
        header = ["tau"] + [f"Lambda_{j}" for j in range(self.levels)]
        return header, np.column_stack([self.tau, self.log_norms.T])


def co_evolve_filtered(data, cfg, renormalize=True, tau_end=None):
    """Evolve ``data`` in lockstep, projecting level ``j`` off levels ``< j`` after every step.

    Parameters
    ----------
    data : list of State
        One to four linearly independent initial states on the same grid.
    cfg : SchemeConfig
    renormalize : bool
        Rescale each level to unit norm after projection (the log of the
        factor goes into ``Lambda_j``).  Without it only the projections are
        applied, which can overflow for long runs.
    """
    if not data:
        raise ValidationError("at least one level is required")
    if len(data) > MAX_LEVELS:
        raise ValidationError(f"at most {MAX_LEVELS} levels are supported")
    shape = data[0].u.shape
    if any(d.u.shape != shape for d in data):
        raise GridMismatchError("all levels must share the grid")
    scheme = cfg.scheme(shape[1] - 2)
    w = QuadratureRule.trapezoid(scheme.grid).weights
    tau_end = cfg.tau_end if tau_end is None else tau_end
    n, dt = cfg.steps(scheme.N, tau_end)
    stride = cfg.observer_stride(scheme.N)
    L = len(data)
    U = scheme.enforce(np.stack([np.array(d.u) for d in data]))
    logs = np.zeros(L)
    tau0 = data[0].tau

    series, status, where = _kernels.filtered_run(
        U, dt, n, stride, scheme.h, scheme.N, scheme.co, scheme.reconstruct, w,
        renormalize, DEGENERACY_RATIO, cfg.growth_limit, logs)
    if status == _kernels.DEGENERATE:
        raise DegeneracyError(f"level {where} collapsed under projection")
    if status == _kernels.UNSTABLE:
        raise InstabilityError(
            f"norm growth exceeds exp({cfg.growth_limit} dtau) per step at tau={tau0 + where * dt:.6g}",
            tau=tau0 + where * dt)
    ks = np.arange(0, n + 1, stride)
    if ks[-1] != n:
        ks = np.append(ks, n)
    taus, rows = tau0 + ks * dt, series
    t = tau0 + n * dt
    return FilterBank(
        states=[State(t, U[j]) for j in range(L)],
        tau=np.asarray(taus),
        log_norms=np.asarray(rows).T.copy(),
        log_rescale=logs.copy(),
        config=cfg,
    )


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares line through a log-norm series."""

    slope: float
    intercept: float
    rms: float
    window: tuple
    oscillation: bool
    stderr: float = 0.0
    samples: int = 0

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def _lstsq_rms(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    return coef, math.sqrt(float(np.mean(r * r)))


def _oscillates(t, y):
    """Compare a line plus decaying exponential with a line plus an undamped two-harmonic oscillation.

    The periodic model must fit at least one full period into the window.
    """
    L = t[-1] - t[0]
    s = t - t[0]
    base = np.column_stack([t, np.ones_like(t)])
    _, rms_line = _lstsq_rms(base, y)
    if rms_line < OSCILLATION_FLOOR:
        return False
    rms_mono = rms_line
    for gamma in np.geomspace(0.05, 20.0, 60):
        _, r = _lstsq_rms(np.column_stack([base, np.exp(-gamma * s)]), y)
        rms_mono = min(rms_mono, r)
    rms_per = rms_line
    for omega in np.linspace(2.0 * math.pi / L, 0.25 * math.pi * len(t) / L, 400):
        X = np.column_stack([base, np.cos(omega * s), np.sin(omega * s),
                             np.cos(2 * omega * s), np.sin(2 * omega * s)])
        _, r = _lstsq_rms(X, y)
        rms_per = min(rms_per, r)
    return rms_mono > OSCILLATION_FLOOR and rms_mono > 3.0 * rms_per


def fit_growth_rate(tau, log_norm, window=None, detect=True):
    """Ordinary least squares of ``Lambda(tau)`` on ``tau`` inside ``window``.

    Parameters
    ----------
    tau, log_norm : array_like
        The series.
    window : (float, float), optional
        Fit interval, at least two time units long.  Defaults to the second
        half of the series.
    detect : bool
        Run the oscillation test (otherwise ``oscillation`` is False).

    Raises
    ------
    ValidationError
        If the window is shorter than 2, leaves the series or holds fewer
        than 20 samples.
    """
    t = np.asarray(tau, dtype=float)
    y = np.asarray(log_norm, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValidationError("tau and log_norm must be 1-d arrays of equal length")
    if t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValidationError("tau must be strictly increasing")
    if window is None:
        window = (0.5 * (t[0] + t[-1]), t[-1])
    lo, hi = check_interval(window, "window")
    slack = 1e-9 * max(1.0, abs(t[-1]))
    if hi - lo < MIN_WINDOW - slack:
        raise ValidationError(f"fit window must span at least {MIN_WINDOW}, got {hi - lo:.3g}")
    if lo < t[0] - slack or hi > t[-1] + slack:
        raise ValidationError(f"window {window} is outside the series [{t[0]}, {t[-1]}]")
    sel = (t >= lo - slack) & (t <= hi + slack)
    if sel.sum() < MIN_SAMPLES:
        raise ValidationError(f"window holds {sel.sum()} samples, need {MIN_SAMPLES}")
    ts, ys = t[sel], y[sel]
    X = np.column_stack([ts, np.ones_like(ts)])
    (slope, icpt), rms = _lstsq_rms(X, ys)
    dof = max(ts.size - 2, 1)
    sxx = float(np.sum((ts - ts.mean()) ** 2))
    stderr = math.sqrt(rms * rms * ts.size / dof / sxx)
    return GrowthFit(float(slope), float(icpt), rms, (float(lo), float(hi)),
                     bool(detect and _oscillates(ts, ys)), stderr, int(ts.size))


def select_window(tau, log_norm, start_range=None, step=0.25):
    """Trim the transient: the window ``[s, tau_end]`` with the least RMS residual.

    Starts ``s`` range over ``start_range`` (default the second half of the
    series up to two units before its end).  Returns the chosen fit and the
    slope change when the window start moves one unit earlier.
    """
    t = np.asarray(tau, dtype=float)
    end = float(t[-1])
    lo, hi = start_range if start_range is not None else (0.5 * (t[0] + end), end - MIN_WINDOW)
    if hi < lo:
        raise ValidationError("series too short for a two-unit fit window")
    starts = np.arange(lo, hi + 1e-9, step)
    fits = [fit_growth_rate(t, log_norm, (s, end), detect=False) for s in starts]
    best = fit_growth_rate(t, log_norm, min(fits, key=lambda f: f.rms).window)
    s0 = max(float(t[0]), best.window[0] - 1.0)
    shifted = fit_growth_rate(t, log_norm, (s0, end), detect=False)
    return best, abs(shifted.slope - best.slope)


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Estimates plus the filter bank they came from (and the half-resolution bank, if run)."""

    estimates: list
    bank: FilterBank
    coarse: FilterBank | None = None

    def __iter__(self):
        return iter(self.estimates)

    def __len__(self):
        return len(self.estimates)

    def __getitem__(self, k):
        return self.estimates[k]

    @property
    def values(self):
        return np.array([e.value for e in self.estimates])


def extract_spectrum(profile, levels=4, cfg=None, N=2048, data=None, window="auto", coarse=True):
    """Real parts of the leading ``levels`` eigenvalues from filtered evolution.

    Parameters
    ----------
    profile : Profile
    levels : int
        Number of eigenvalues, 1 to 4 (dominant plus up to three filtered).
    cfg : SchemeConfig, optional
        Defaults to ``SchemeConfig(profile)``.
    N : int
        Grid size.
    data : list of str, optional
        Names of initial data in :func:`sigmaspec.evolve.initial_data`.
    window : "auto" or (float, float)
        ``"auto"`` trims the transient per level; a pair fixes the window.
    coarse : bool
        Repeat the run on ``N / 2`` and take the change of each slope as its
        discretisation error.  Otherwise the floor
        ``5 Delta rho^2 max(1, |mu|)`` stands in for it.

    Returns
    -------
    SpectrumResult
        Estimates ordered by level.  Each uncertainty adds the window-shift
        sensitivity, the slope standard error and the discretisation error.
    """
    check_int(levels, "levels", min_val=1, max_val=MAX_LEVELS)
    check_int(N, "N", min_val=64 if coarse else 32)
    cfg = SchemeConfig(profile) if cfg is None else cfg
    if cfg.profile is not profile:
        raise ValidationError("cfg.profile differs from profile")
    data = list(DEFAULT_DATA[:levels] if data is None else data)
    if len(data) != levels:
        raise ValidationError(f"expected {levels} initial data, got {len(data)}")

    def run(n):
        grid = Grid(n)
        return co_evolve_filtered([initial_data(d, grid) for d in data], cfg)

    bank = run(N)
    fine = spectrum_from_bank(bank, profile.excitation_index, window)
    if not coarse:
        return SpectrumResult(fine, bank)
    cbank = run(N // 2)
    rough = spectrum_from_bank(cbank, profile.excitation_index, window)
    out = []
    for e, r in zip(fine, rough):
        disc = abs(e.value - r.value)
        floor = e.details.pop("floor")
        details = dict(e.details, discretisation=disc)
        out.append(EigenvalueEstimate(
            value=e.value, uncertainty=e.uncertainty - floor + disc + 1e-12,
            method="evolution", profile_index=e.profile_index,
            oscillation=e.oscillation or r.oscillation, level=e.level, details=details))
    return SpectrumResult(out, bank, cbank)


def spectrum_from_bank(bank, profile_index, window="auto"):
    """Fit every level of ``bank``; uncertainties use the ``5 Delta rho^2`` floor."""
    h = 1.0 / (bank.states[0].u.shape[1] - 2)
    out = []
    for j in range(bank.levels):
        t, y = bank.series(j)
        if isinstance(window, str):
            if window != "auto":
                raise ValidationError(f"unknown window policy {window!r}")
            fit, shift = select_window(t, y)
        else:
            fit = fit_growth_rate(t, y, window)
            lo, hi = fit.window
            s0 = max(float(t[0]), lo - 1.0)
            shift = abs(fit_growth_rate(t, y, (s0, hi), detect=False).slope - fit.slope)
        floor = 5.0 * h * h * max(1.0, abs(fit.slope))
        out.append(EigenvalueEstimate(
            value=fit.slope, uncertainty=shift + fit.stderr + floor, method="evolution",
            profile_index=profile_index, oscillation=fit.oscillation, level=j,
            details={"window": list(fit.window), "rms": fit.rms, "intercept": fit.intercept,
                     "floor": floor},
        ))
    return out
