"""Eigenmodes of the linearised flow by shooting to a fitting point.

Perturbations ``w = exp(lambda tau) v(rho)`` of a profile ``f_n`` satisfy

    v'' + 2 ((lambda+1) rho^2 - 1) / (rho (rho+1) (rho-1)) v'
        + (lambda (lambda+1) rho^2 + 2 cos(2 f_n)) / (rho^2 (rho+1) (rho-1)) v = 0

with regular singular points at ``rho = 0`` (indices 1 and -2) and
``rho = 1`` (indices 0 and ``1 - lambda``).  Regularity selects
``v ~ a rho`` at the centre and the analytic branch normalised by
``v(1) = 1``, ``v'(1) = -(lambda^2 + lambda - 2) / (2 lambda)`` at the
lightcone.  Eigenvalues are the ``lambda`` for which both branches match.

For profiles known only numerically the profile ODE is integrated together
with the mode equation from the same step-off points, so no interpolation
error enters the mode coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from ._validation import check_int, check_interval, check_scalar
from .exceptions import ConvergenceError, DomainError, OutOfRangeError, ValidationError
from .profiles import Profile, center_series, evaluate, lightcone_series

__all__ = [
    "ModeParams",
    "EigenmodeSolution",
    "EigenvalueEstimate",
    "ShootingSettings",
    "mode_rhs",
    "mode_center_series",
    "mode_lightcone_series",
    "matching_defect",
    "find_eigenvalue",
    "scan_eigenvalues",
    "shooting_spectrum",
    "eigenfunction",
    "lightcone_condition",
    "lightcone_analyticity",
    "LightconeAnalyticity",
]

# |lambda| below this is excluded from every search: the lightcone condition
# divides by lambda.
LAMBDA_GUARD = 1e-3

_CENTER_SCALE = 1e-3


@dataclass(frozen=True)
class ShootingSettings:
    """Integrator and matching settings shared by all mode shooting calls."""

    step_off: float = 1e-4
    match_point: float = 0.5
    rtol: float = 1e-10
    atol: float = 1e-10
    tolerance: float = 1e-10
    max_newton: int = 40
    method: str = "DOP853"

    def __post_init__(self):
        check_scalar(self.step_off, "step_off", min_val=0.0, include_boundaries="neither")
        check_scalar(self.match_point, "match_point", min_val=self.step_off,
                     max_val=1.0 - self.step_off, include_boundaries="neither")
        for name in ("rtol", "atol", "tolerance"):
            check_scalar(getattr(self, name), name, min_val=0.0, include_boundaries="neither")
        check_int(self.max_newton, "max_newton", min_val=1)

    def refined(self, factor=10.0):
        return ShootingSettings(self.step_off, self.match_point, self.rtol / factor,
                                self.atol / factor, self.tolerance, self.max_newton, self.method)


@dataclass(frozen=True)
class ModeParams:
    lam: float
    a: float
    profile: Profile = field(repr=False)

    def __post_init__(self):
        check_scalar(self.lam, "lam")
        check_scalar(self.a, "a")
        if self.lam == 0.0:
            raise ValidationError("lambda = 0 is excluded: the lightcone condition divides by lambda")


@dataclass(frozen=True)
class EigenvalueEstimate:
    """An eigenvalue (real part) with provenance.

    ``method`` is ``"shooting"`` or ``"evolution"``; ``oscillation`` flags
    evidence of a non-zero imaginary part.
    """

    value: float
    uncertainty: float
    method: str
    profile_index: int
    oscillation: bool = False
    level: int | None = None
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.uncertainty > 0:
            raise ValidationError("uncertainty must be positive")
        if self.method not in ("shooting", "evolution"):
            raise ValidationError(f"unknown method {self.method!r}")

    def to_dict(self):
        out = {"level": self.level, "mu": self.value, "uncertainty": self.uncertainty,
               "oscillation": self.oscillation, "method": self.method,
               "profile_n": self.profile_index}
        out.update(self.details)
        return out


@dataclass(frozen=True, eq=False)
class EigenmodeSolution:
    """Accepted eigenpair with both shooting branches sampled.

    ``center`` and ``cone`` hold rows ``(rho, v, v')``; the centre branch is
    scaled by ``a`` and the lightcone branch is normalised to ``v(1) = 1``.
    """

    params: ModeParams
    center: np.ndarray
    cone: np.ndarray
    defect: np.ndarray

    def to_dict(self, samples=False):
        out = {"n": self.params.profile.excitation_index, "lambda": self.params.lam,
               "a": self.params.a, "defect": self.defect.tolist()}
        if samples:
            out["samples"] = np.vstack([self.center, self.cone[::-1]]).tolist()
        return out


def lightcone_condition(lam):
    """Required ``v'(1)`` for the analytic branch with ``v(1) = 1``."""
    if lam == 0:
        raise DomainError("lightcone condition is singular at lambda = 0")
    return -(lam * lam + lam - 2.0) / (2.0 * lam)


def _cos2f_ground(rho):
    r2 = rho * rho
    return (1.0 - 6.0 * r2 + r2 * r2) / (1.0 + r2) ** 2


def _coefficients(rho, lam, cos2f):
    den = rho * (rho + 1.0) * (rho - 1.0)
    p = 2.0 * ((lam + 1.0) * rho * rho - 1.0) / den
    q = (lam * (lam + 1.0) * rho * rho + 2.0 * cos2f) / (rho * den)
    return p, q


def mode_rhs(rho, v, vp, lam, profile):
    """``v''`` from the eigenmode ODE on the given profile."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr == 0.0) or np.any(np.abs(rho_arr) == 1.0):
        raise DomainError("eigenmode ODE is singular at rho = 0 and rho = 1")
    if profile.closed_form:
        cos2f = _cos2f_ground(rho_arr)
    else:
        cos2f = np.cos(2.0 * np.asarray(evaluate(profile, rho_arr)[0]))
    p, q = _coefficients(rho_arr, lam, cos2f)
    out = -p * vp - q * v
    return float(out) if np.ndim(out) == 0 else out


def mode_center_series(a, lam, rho, b):
    """Regular centre branch ``v = a (rho + v3 rho^3 + v5 rho^5)``.

    ``b`` is the centre slope of the underlying profile, which enters through
    ``cos(2 f) = 1 - 2 b^2 rho^2 + ...``.
    """
    rho = np.asarray(rho, dtype=float)
    l2 = lam * lam
    v3 = (l2 + 3.0 * lam + 2.0 - 4.0 * b * b) / 10.0
    v5 = (40.0 * b**4 - 8.0 * b * b * l2 - 40.0 * b * b * lam - 72.0 * b * b
          + l2 * l2 + 10.0 * l2 * lam + 35.0 * l2 + 50.0 * lam + 24.0) / 280.0
    r2 = rho * rho
    v = a * rho * (1.0 + r2 * (v3 + v5 * r2))
    vp = a * (1.0 + r2 * (3.0 * v3 + 5.0 * v5 * r2))
    if v.ndim == 0:
        return float(v), float(vp)
    return v, vp


def mode_lightcone_series(lam, rho):
    """Analytic lightcone branch ``v = 1 + w1 x + w2 x^2`` with ``x = rho - 1``.

    ``w2`` has a pole at ``lambda = -1`` where the two indicial exponents
    differ by two and the analytic branch acquires a logarithm.
    """
    w1 = lightcone_condition(lam)
    w2 = (lam**4 + 4.0 * lam**3 + 3.0 * lam * lam - 12.0 * lam - 4.0) / (8.0 * lam * (lam + 1.0))
    x = np.asarray(rho, dtype=float) - 1.0
    v = 1.0 + x * (w1 + w2 * x)
    vp = w1 + 2.0 * w2 * x
    if v.ndim == 0:
        return float(v), float(vp)
    return v, vp


class _Shooter:
    """Integrates both branches for a fixed profile; caches by ``lambda``."""

    def __init__(self, profile, settings):
        self.profile = profile
        self.s = settings
        self.b, self.c = profile.b, profile.c
        self.r_center = min(settings.step_off, _CENTER_SCALE / abs(self.b))
        self.r_cone = 1.0 - settings.step_off
        self._cache = {}

    def _rhs(self, lam):
        if self.profile.closed_form:
            def rhs(r, y):
                p, q = _coefficients(r, lam, _cos2f_ground(r))
                return (y[1], -p * y[1] - q * y[0])
        else:
            def rhs(r, y):
                f, fp, v, vp = y
                fpp = math.sin(2.0 * f) / (r * r * (1.0 - r * r)) - 2.0 * fp / r
                p, q = _coefficients(r, lam, math.cos(2.0 * f))
                return (fp, fpp, vp, -p * vp - q * v)
        return rhs

    def _start(self, lam, side):
        if side == "center":
            r0 = self.r_center
            v = mode_center_series(1.0, lam, r0, self.b)
            f = center_series(self.b, r0)
        else:
            r0 = self.r_cone
            v = mode_lightcone_series(lam, r0)
            f = lightcone_series(self.c, r0)
            f = (f[0] + (self.profile.sign - 1.0) * 0.5 * math.pi, f[1])
        y0 = list(v) if self.profile.closed_form else [*f, *v]
        return r0, y0

    def integrate(self, lam, side, dense=False):
        r0, y0 = self._start(lam, side)
        sol = solve_ivp(self._rhs(lam), (r0, self.s.match_point), y0, method=self.s.method,
                        rtol=self.s.rtol, atol=self.s.atol, dense_output=dense)
        if sol.status != 0:
            raise ConvergenceError(f"mode integration failed (lambda={lam}): {sol.message}")
        return sol

    def branches(self, lam):
        """``(C, L)``: centre branch with ``a = 1`` and lightcone branch at the match point."""
        key = float(lam)
        if key not in self._cache:
            if len(self._cache) > 256:
                self._cache.clear()
            out = []
            for side in ("center", "cone"):
                y = self.integrate(lam, side).y[:, -1]
                out.append(np.asarray(y[-2:], dtype=float))
            self._cache[key] = tuple(out)
        return self._cache[key]

    def defect(self, lam, a):
        C, L = self.branches(lam)
        return a * C - L


def _shooter(profile, settings):
    return _Shooter(profile, ShootingSettings() if settings is None else settings)


def matching_defect(params, rho_m=None, settings=None):
    """Mismatch ``(dv, dv')`` at the fitting point for the pair ``(lambda, a)``.

    The centre branch carries the free amplitude ``a``; the lightcone branch is
    normalised to ``v(1) = 1``.  The defect is affine in ``a``.
    """
    settings = ShootingSettings() if settings is None else settings
    if rho_m is not None:
        settings = ShootingSettings(settings.step_off, rho_m, settings.rtol, settings.atol,
                                    settings.tolerance, settings.max_newton, settings.method)
    return _shooter(params.profile, settings).defect(params.lam, params.a)


def _optimal_amplitude(C, L):
    return float(C @ L / (C @ C))


def _newton(sh, lam, a):
    tol = sh.s.tolerance
    x = np.array([lam, a], dtype=float)
    d = sh.defect(*x)
    last = math.inf
    for _ in range(sh.s.max_newton):
        if np.max(np.abs(d)) <= tol:
            break
        h = max(1e-6, 1e-6 * abs(x[0]))
        C, _ = sh.branches(x[0])
        dl = (sh.defect(x[0] + h, x[1]) - sh.defect(x[0] - h, x[1])) / (2.0 * h)
        jac = np.column_stack([dl, C])
        try:
            dx = np.linalg.solve(jac, -d)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Jacobian in eigenvalue Newton") from exc
        t, base = 1.0, np.max(np.abs(d))
        while True:
            trial = x + t * dx
            if abs(trial[0]) < LAMBDA_GUARD:
                raise ConvergenceError(
                    f"Newton iterate entered the lambda = 0 guard band (lambda={trial[0]:.3e})")
            dt = sh.defect(*trial)
            if np.max(np.abs(dt)) < base or t < 1.0 / 64:
                break
            t *= 0.5
        if np.max(np.abs(dt)) >= base:
            break
        last = abs(t * dx[0])
        x, d = trial, dt
    if np.max(np.abs(d)) > tol:
        raise ConvergenceError(
            f"eigenvalue Newton stalled at lambda={x[0]:.12g}: defect {np.max(np.abs(d)):.3e} > {tol:.1e}")
    return x, d, (0.0 if last == math.inf else last)


def find_eigenvalue(lam_guess, a_guess, profile, settings=None, samples=0):
    """Polish an eigenpair ``(lambda, a)`` by 2x2 Newton on the matching defect.

    Returns
    -------
    estimate : EigenvalueEstimate
        The eigenvalue with an uncertainty combining the last Newton step and
        the change under a tenfold tightening of the integrator tolerances.
    solution : EigenmodeSolution
        Both branches sampled at ``samples`` points each (0 keeps only the
        match-point defect).

    Raises
    ------
    ConvergenceError
        If Newton stalls or drifts into ``|lambda| < 1e-3``.
    """
    check_scalar(lam_guess, "lam_guess")
    if abs(lam_guess) < LAMBDA_GUARD:
        raise ValidationError("lam_guess lies inside the lambda = 0 guard band")
    if a_guess is None:
        C, L = _shooter(profile, settings).branches(lam_guess)
        a_guess = _optimal_amplitude(C, L)
    sh = _shooter(profile, settings)
    (lam, a), d, last = _newton(sh, lam_guess, a_guess)
    fine = _Shooter(profile, sh.s.refined())
    (lam_fine, _), _, _ = _newton(fine, lam, a)
    uncertainty = last + 2.0 * abs(lam_fine - lam) + 1e-12 * (1.0 + abs(lam))

    params = ModeParams(float(lam), float(a), profile)
    center = cone = np.empty((0, 3))
    if samples:
        center = _sample_branch(sh, lam, "center", samples, scale=a)
        cone = _sample_branch(sh, lam, "cone", samples)
    solution = EigenmodeSolution(params, center, cone, np.asarray(d, dtype=float))
    estimate = EigenvalueEstimate(float(lam), float(uncertainty), "shooting",
                                  profile.excitation_index,
                                  details={"a": float(a), "defect": float(np.max(np.abs(d)))})
    return estimate, solution


def _sample_branch(sh, lam, side, count, scale=1.0):
    sol = sh.integrate(lam, side, dense=True)
    rho = np.linspace(sol.t[0], sol.t[-1], count)
    y = sol.sol(rho)
    return np.column_stack([rho, scale * y[-2], scale * y[-1]])


def _excluded(lam, guard):
    return abs(lam) < guard or abs(lam + 1.0) < guard


def scan_eigenvalues(lam_range, steps, profile, settings=None, guard=LAMBDA_GUARD):
    """Locate candidate eigenvalues on a uniform ``lambda`` grid.

    For each ``lambda`` the amplitude ``a`` is eliminated in closed form (the
    defect is affine in ``a``), leaving the normalised cross product
    ``(C x L) / (|C| |L|)`` of the two branch vectors, which vanishes exactly
    when a matching ``a`` exists.  Sign changes are refined with Brent's
    method.  Grid points within ``guard`` of ``lambda = 0`` or ``lambda = -1``
    (poles of the lightcone series) split the scan into independent segments.

    Returns
    -------
    list of (lambda, a)
        Candidates ordered by decreasing ``lambda``.
    """
    lo, hi = check_interval(lam_range, "lam_range")
    check_int(steps, "steps", min_val=2)
    sh = _shooter(profile, settings)

    def sine(lam):
        C, L = sh.branches(lam)
        return (C[0] * L[1] - C[1] * L[0]) / (np.hypot(*C) * np.hypot(*L))

    grid = np.linspace(lo, hi, steps + 1)
    candidates = []
    prev_lam = prev_val = None
    for lam in grid:
        if _excluded(lam, guard):
            prev_lam = prev_val = None
            continue
        val = sine(lam)
        if prev_val is not None and prev_val * val <= 0 and not (prev_val == 0 and val == 0):
            if val == 0:
                root = lam
            else:
                root = brentq(sine, prev_lam, lam, xtol=1e-12, rtol=1e-12)
            C, L = sh.branches(root)
            candidates.append((float(root), _optimal_amplitude(C, L)))
        prev_lam, prev_val = lam, val
    uniq = []
    for lam, a in sorted(candidates, key=lambda t: -t[0]):
        if not uniq or abs(uniq[-1][0] - lam) > 1e-9:
            uniq.append((lam, a))
    return uniq


@dataclass(frozen=True)
class LightconeAnalyticity:
    """Behaviour of the centre-regular solution as ``rho -> 1``.

    Near the lightcone ``v'''`` is fitted by ``A + B log(1 - rho) + C (1 - rho)``.
    ``B`` measures the logarithmic term that a non-analytic solution carries
    there; an eigenfunction has ``B = 0``.  ``optimal_defect`` is the matching
    defect of the analytic-branch shooter at the best amplitude, and
    ``obstruction`` the coefficient that decides whether the lightcone
    Frobenius expansion needs a logarithm at all (only defined at
    ``lambda = -2``, where the exponents differ by an integer).
    """

    lam: float
    limit: float
    log_coefficient: float
    optimal_defect: float
    obstruction: float | None
    tolerance: float

    @property
    def relative_log(self):
        return abs(self.log_coefficient) / max(1.0, abs(self.limit))

    @property
    def analytic(self):
        return self.relative_log <= self.tolerance

    def to_dict(self):
        return {"lambda": self.lam, "limit": self.limit, "log_coefficient": self.log_coefficient,
                "relative_log": self.relative_log, "optimal_defect": self.optimal_defect,
                "obstruction": self.obstruction, "analytic": self.analytic}


def _third_derivative(r, y, lam):
    f, fp, v, vp = y
    Np, E = 2.0 * ((lam + 1.0) * r * r - 1.0), r**3 - r
    Npd, Ed = 4.0 * (lam + 1.0) * r, 3.0 * r * r - 1.0
    Nq, D = lam * (lam + 1.0) * r * r + 2.0 * math.cos(2.0 * f), r**4 - r * r
    Nqd, Dd = 2.0 * lam * (lam + 1.0) * r - 4.0 * math.sin(2.0 * f) * fp, 4.0 * r**3 - 2.0 * r
    p, q = Np / E, Nq / D
    pd, qd = (Npd * E - Np * Ed) / E**2, (Nqd * D - Nq * Dd) / D**2
    vpp = -p * vp - q * v
    return -pd * vp - p * vpp - qd * v - q * vp


def lightcone_analyticity(profile, lam=-2.0, distances=None, tolerance=1e-4, settings=None):
    """Test whether the centre-regular mode at ``lam`` is analytic at ``rho = 1``.

    The analytic-branch shooter cannot decide this when both lightcone
    exponents give analytic solutions, which happens on the ground state at
    ``lambda = -2``.  Here the centre-regular solution is integrated at tight
    tolerance towards the lightcone together with the profile and ``v'''``
    is evaluated from the equation at ``1 - rho`` in ``distances`` (default
    13 points from 1e-2 to 1e-5); a least-squares fit then separates the
    bounded part from a ``log(1 - rho)`` divergence.

    Parameters
    ----------
    profile : Profile
    lam : float
    distances : array_like, optional
    tolerance : float
        Largest ``|B| / max(1, |A|)`` accepted as analytic.
    """
    check_scalar(lam, "lam")
    if _excluded(lam, LAMBDA_GUARD):
        raise DomainError(f"lambda={lam} is on a pole of the lightcone expansion")
    ds = np.geomspace(1e-2, 1e-5, 13) if distances is None else np.sort(np.asarray(distances, float))[::-1]
    if ds.size < 4 or ds[0] >= 0.5 or ds[-1] <= 0:
        raise ValidationError("need at least four distances in (0, 0.5)")
    b = profile.b
    r0 = min(1e-4, _CENTER_SCALE / abs(b))
    y0 = [*center_series(b, r0), *mode_center_series(1.0, lam, r0, b)]

    def rhs(r, y):
        f, fp, v, vp = y
        fpp = math.sin(2.0 * f) / (r * r * (1.0 - r * r)) - 2.0 * fp / r
        p, q = _coefficients(r, lam, math.cos(2.0 * f))
        return (fp, fpp, vp, -p * vp - q * v)

    sol = solve_ivp(rhs, (r0, 1.0 - ds[-1]), y0, method="DOP853", rtol=1e-13, atol=1e-14,
                    t_eval=1.0 - ds)
    if sol.status != 0:
        raise ConvergenceError(f"integration towards the lightcone failed: {sol.message}")
    v3 = np.array([_third_derivative(r, sol.y[:, i], lam) for i, r in enumerate(sol.t)])
    X = np.column_stack([np.ones_like(ds), np.log(ds), ds])
    (A, B, _), *_ = np.linalg.lstsq(X, v3, rcond=None)

    sh = _shooter(profile, settings)
    C, L = sh.branches(lam)
    defect = float(np.max(np.abs(_optimal_amplitude(C, L) * C - L)))
    obstruction = 64.0 * (profile.c**2 - 1.0) if abs(lam + 2.0) < 1e-12 else None
    return LightconeAnalyticity(float(lam), float(A), float(B), defect, obstruction, tolerance)


def shooting_spectrum(profile, lam_range, steps=None, settings=None, samples=0):
    """Scan ``lam_range`` and polish every candidate with :func:`find_eigenvalue`.

    ``steps`` defaults to ten scan points per unit of ``lambda`` (at least 20).
    Returns ``(estimates, solutions)`` ordered by decreasing eigenvalue; an
    empty range gives two empty lists.
    """
    lo, hi = check_interval(lam_range, "lam_range")
    steps = max(20, int(math.ceil(10.0 * (hi - lo)))) if steps is None else steps
    estimates, solutions = [], []
    for lam, a in scan_eigenvalues((lo, hi), steps, profile, settings):
        est, sol = find_eigenvalue(lam, a, profile, settings, samples)
        if estimates and abs(estimates[-1].value - est.value) <= 1e-9 * (1.0 + abs(est.value)):
            continue
        estimates.append(est)
        solutions.append(sol)
    return estimates, solutions


def eigenfunction(solution, rho):
    """Evaluate ``(v, v')`` of an accepted eigenpair at ``rho`` in ``[0, 1 + 1/16]``.

    Inside the shooting interval the sampled branches are joined at the
    fitting point and interpolated with cubic Hermite splines on ``(v, v')``
    and ``(v', v'')`` (``v''`` from the ODE).  Outside it the centre and
    lightcone series are used.  The result is normalised to ``v(1) = 1``.
    """
    if solution.center.shape[0] < 4 or solution.cone.shape[0] < 4:
        raise ValidationError("solution carries no samples; call find_eigenvalue with samples > 0")
    lam, a, prof = solution.params.lam, solution.params.a, solution.params.profile
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(rho > 1.0 + 1.0 / 16.0):
        raise OutOfRangeError("eigenfunctions are available on [0, 1 + 1/16]")
    table = np.vstack([solution.center, solution.cone[::-1][1:]])
    r, v, vp = table.T
    vpp = mode_rhs(r, v, vp, lam, prof)
    lo, hi = r[0], r[-1]
    sv = CubicHermiteSpline(r, v, vp)
    svp = CubicHermiteSpline(r, vp, vpp)
    flat = np.atleast_1d(rho)
    out_v, out_vp = np.empty_like(flat), np.empty_like(flat)
    inner = (flat >= lo) & (flat <= hi)
    out_v[inner], out_vp[inner] = sv(flat[inner]), svp(flat[inner])
    left, right = flat < lo, flat > hi
    if np.any(left):
        out_v[left], out_vp[left] = mode_center_series(a, lam, flat[left], prof.b)
    if np.any(right):
        out_v[right], out_vp[right] = mode_lightcone_series(lam, flat[right])
    if rho.ndim == 0:
        return float(out_v[0]), float(out_vp[0])
    return out_v.reshape(rho.shape), out_vp.reshape(rho.shape)
