"""Self-similar profiles of the co-rotational SU(2) sigma model.

A blow-up solution ``u(t, r) = f(r / (T - t))`` reduces the wave equation to
the profile ODE

    f'' + (2/rho) f' - sin(2 f) / (rho^2 (1 - rho^2)) = 0,

which is singular at the centre ``rho = 0`` and at the past lightcone
``rho = 1``.  Smooth solutions satisfy ``f(0) = 0`` and ``f(1) = pi/2``.  The
ground state is ``f_0 = 2 arctan(rho)``; the excitations ``f_1, f_2, ...`` are
found by two-sided shooting from the singular points to an interior matching
point.

Notes
-----
Solutions are indexed by the ordering of their centre slopes ``b = f'(0)``:
``f_n`` is the ``n``-th smallest ``|b|`` for which the centre branch reaches
``pi/2`` regularly at ``rho = 1``.  On ``(0, 1)``, ``f_n`` crosses ``pi/2``
exactly ``n`` times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from ._validation import check_int, check_interval, check_scalar
from .exceptions import (
    AccuracyError,
    ConvergenceError,
    DomainError,
    IndexMismatchError,
    OutOfRangeError,
    ValidationError,
)

__all__ = [
    "ProfileSpec",
    "Profile",
    "ground_state",
    "ground_state_profile",
    "profile_rhs",
    "center_series",
    "lightcone_series",
    "shoot_profile",
    "extend_beyond_lightcone",
    "evaluate",
]

HALF_PI = 0.5 * math.pi

# Largest rho for which the outward continuation is considered validated.
MAX_EXTENSION = 1.5

# Centre step-off is shrunk so that |b| * rho stays in the series' comfort zone.
_CENTER_SCALE = 1e-3
# Distance from rho = 1 used when probing a centre branch during the scan.
_PROBE_OFFSET = 1e-3


def ground_state(rho):
    """Closed-form ground state ``(2 arctan(rho), 2 / (1 + rho^2))``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise DomainError("ground_state requires rho >= 0")
    f, fp = 2.0 * np.arctan(rho), 2.0 / (1.0 + rho * rho)
    if f.ndim == 0:
        return float(f), float(fp)
    return f, fp


def profile_rhs(rho, f, fp):
    """Second derivative ``f''`` from the profile ODE.

    Raises
    ------
    DomainError
        At the singular points ``rho = 0`` and ``rho = 1``.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho == 0.0) or np.any(rho == 1.0):
        raise DomainError("profile ODE is singular at rho = 0 and rho = 1")
    out = np.sin(2.0 * f) / (rho * rho * (1.0 - rho * rho)) - 2.0 * fp / rho
    return float(out) if np.ndim(out) == 0 else out


def _center_coefficients(b):
    f3 = -b * (2.0 * b * b - 3.0) / 15.0
    f5 = b * (b**4 - 3.0 * b * b + 3.0) / 35.0
    return f3, f5


def center_series(b, rho):
    """Regular branch at the centre, ``f = b rho + f3 rho^3 + f5 rho^5``.

    The coefficients follow from substituting the odd power series into the
    profile ODE: ``f3 = b (3 - 2 b^2) / 15`` and
    ``f5 = b (b^4 - 3 b^2 + 3) / 35``.  The truncation error is
    ``O(b (b rho)^6 rho)``; for the ground state (``b = 2``) the series is the
    Taylor expansion of ``2 arctan(rho)``.
    """
    rho = np.asarray(rho, dtype=float)
    f3, f5 = _center_coefficients(b)
    r2 = rho * rho
    f = rho * (b + r2 * (f3 + f5 * r2))
    fp = b + r2 * (3.0 * f3 + 5.0 * f5 * r2)
    if f.ndim == 0:
        return float(f), float(fp)
    return f, fp


def _center_series_fpp(b, rho):
    f3, f5 = _center_coefficients(b)
    return 6.0 * f3 * rho + 20.0 * f5 * rho**3


def lightcone_series(c, rho):
    """Analytic branch through ``rho = 1`` with ``f(1) = pi/2``, ``f'(1) = c``.

    With ``x = rho - 1``, regularity of the ODE forces
    ``f = pi/2 + c x - (c/2) x^2 + (c/6) x^3 + O(x^4)``.  The expansion is
    valid on both sides of the lightcone.
    """
    x = np.asarray(rho, dtype=float) - 1.0
    f = HALF_PI + c * x * (1.0 + x * (-0.5 + x / 6.0))
    fp = c * (1.0 + x * (-1.0 + 0.5 * x))
    if f.ndim == 0:
        return float(f), float(fp)
    return f, fp


def _signed_lightcone(c, rho, sign):
    # negating the family flips only the constant term
    f, fp = lightcone_series(c, rho)
    return f + (sign - 1.0) * HALF_PI, fp


def _lightcone_series_fpp(c, rho):
    return c * (rho - 1.0) - c


@dataclass(frozen=True)
class ProfileSpec:
    """Numerical settings for constructing ``f_n`` by shooting.

    Parameters
    ----------
    excitation_index : int
        ``n`` in ``f_n``.
    match_point : float
        Interior point where the centre and lightcone branches are matched.
    step_off : float
        Distance from the singular points at which integration starts.
    tolerance : float
        Convergence threshold on the infinity norm of the matching defect.
    rtol, atol : float
        Tolerances of the adaptive integrator.
    b_bracket : tuple of float
        Scan interval for the centre slope; a negative interval selects the
        negated family.
    scan_points : int
        Number of geometrically spaced slopes in the scan.
    samples : int
        Number of uniform samples in the stored table.
    rho_max : float
        Right end of the sample table (slightly beyond the lightcone).
    """

    excitation_index: int = 0
    match_point: float = 0.5
    step_off: float = 1e-4
    tolerance: float = 1e-10
    rtol: float = 1e-10
    atol: float = 1e-10
    b_bracket: tuple = (0.5, 1.0e4)
    scan_points: int = 120
    samples: int = 2049
    rho_max: float = 1.0 + 1.0 / 32.0
    max_newton: int = 40
    method: str = "DOP853"

    def __post_init__(self):
        check_int(self.excitation_index, "excitation_index", min_val=0)
        check_scalar(self.step_off, "step_off", min_val=0.0, include_boundaries="neither")
        check_scalar(self.match_point, "match_point", min_val=self.step_off,
                     max_val=1.0 - self.step_off, include_boundaries="neither")
        for name in ("tolerance", "rtol", "atol"):
            check_scalar(getattr(self, name), name, min_val=0.0, include_boundaries="neither")
        lo, hi = check_interval(self.b_bracket, "b_bracket")
        if lo * hi <= 0:
            raise ValidationError("b_bracket must not contain 0")
        object.__setattr__(self, "b_bracket", (lo, hi))
        check_int(self.scan_points, "scan_points", min_val=3)
        check_int(self.samples, "samples", min_val=16)
        check_scalar(self.rho_max, "rho_max", min_val=1.0, max_val=MAX_EXTENSION)
        check_int(self.max_newton, "max_newton", min_val=1)

    @property
    def sign(self):
        return 1.0 if self.b_bracket[0] > 0 else -1.0


@dataclass(frozen=True, eq=False)
class Profile:
    """A converged self-similar profile with its uniform sample table.

    The arrays ``rho``, ``f``, ``fprime`` and ``fsecond`` are read-only.
    Profiles built by :func:`ground_state_profile` carry
    ``closed_form=True`` and are evaluated exactly.
    """

    excitation_index: int
    b: float
    c: float
    defect: float
    rho: np.ndarray
    f: np.ndarray
    fprime: np.ndarray
    fsecond: np.ndarray
    closed_form: bool = False
    spec: ProfileSpec = field(default_factory=ProfileSpec)

    def __post_init__(self):
        for name in ("rho", "f", "fprime", "fsecond"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def rho_max(self):
        return float(self.rho[-1])

    @property
    def sign(self):
        return 1.0 if self.b >= 0 else -1.0

    @cached_property
    def _splines(self):
        return (CubicHermiteSpline(self.rho, self.f, self.fprime),
                CubicHermiteSpline(self.rho, self.fprime, self.fsecond))

    def evaluate(self, rho):
        return evaluate(self, rho)

    def to_dict(self):
        return {
            "n": self.excitation_index,
            "b": self.b,
            "c": self.c,
            "defect": self.defect,
            "closed_form": self.closed_form,
            "grid": {"rho_min": float(self.rho[0]), "rho_max": self.rho_max,
                     "count": int(self.rho.size)},
            "samples": np.column_stack([self.rho, self.f, self.fprime]).tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        samples = np.asarray(data["samples"], dtype=float)
        rho, f, fp = samples.T
        b, c = float(data["b"]), float(data["c"])
        grid = data.get("grid", {})
        if grid and int(grid["count"]) != rho.size:
            raise ValidationError("grid.count does not match the number of samples")
        return cls(excitation_index=int(data["n"]), b=b, c=c, defect=float(data["defect"]),
                   rho=rho, f=f, fprime=fp, fsecond=_second_derivative(rho, f, fp, b, c, 1e-4),
                   closed_form=bool(data.get("closed_form", False)))


def _second_derivative(rho, f, fp, b, c, step_off):
    """``f''`` on a sample table, using the series next to singular points."""
    fpp = np.empty_like(rho)
    near_center = rho <= max(step_off, 1e-12)
    near_cone = np.abs(rho - 1.0) <= step_off
    interior = ~(near_center | near_cone)
    fpp[interior] = profile_rhs(rho[interior], f[interior], fp[interior])
    fpp[near_center] = _center_series_fpp(b, rho[near_center])
    fpp[near_cone] = _lightcone_series_fpp(c, rho[near_cone])
    return fpp


def evaluate(p, rho):
    """Interpolate ``(f, f')`` of a profile at ``rho``.

    Closed-form profiles are evaluated exactly; shot profiles use cubic Hermite
    interpolation of ``(f, f')`` and ``(f', f'')``, which is fourth-order
    accurate in the table spacing.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < p.rho[0]) or np.any(rho > p.rho_max * (1 + 1e-14)):
        raise OutOfRangeError(
            f"rho outside sampled range [{p.rho[0]}, {p.rho_max}]")
    if p.closed_form:
        f, fp = ground_state(rho)
        if p.b < 0:
            return -f, -fp
        return f, fp
    sf, sfp = p._splines
    f, fp = sf(rho), sfp(rho)
    if f.ndim == 0:
        return float(f), float(fp)
    return f, fp


def ground_state_profile(samples=2049, rho_max=1.0 + 1.0 / 32.0):
    """Tabulate the closed-form ground state as a :class:`Profile`."""
    check_int(samples, "samples", min_val=16)
    check_scalar(rho_max, "rho_max", min_val=1.0, max_val=MAX_EXTENSION)
    rho = np.linspace(0.0, rho_max, samples)
    f, fp = ground_state(rho)
    fpp = -4.0 * rho / (1.0 + rho * rho) ** 2
    return Profile(0, 2.0, 1.0, 0.0, rho, f, fp, fpp, closed_form=True,
                   spec=ProfileSpec(samples=samples, rho_max=rho_max))


# --- integration ---------------------------------------------------------------

def _rhs(rho, y):
    f, fp = y
    return (fp, math.sin(2.0 * f) / (rho * rho * (1.0 - rho * rho)) - 2.0 * fp / rho)


def _integrate(y0, span, spec, dense=False):
    sol = solve_ivp(_rhs, span, y0, method=spec.method, rtol=spec.rtol, atol=spec.atol,
                    dense_output=dense)
    if sol.status != 0:
        raise ConvergenceError(f"profile integration failed on {span}: {sol.message}")
    return sol


def _center_start(b, step_off):
    return min(step_off, _CENTER_SCALE / max(abs(b), 1e-300))


def _center_branch(b, spec, rho_end, dense=False):
    r0 = _center_start(b, spec.step_off)
    return r0, _integrate(center_series(b, r0), (r0, rho_end), spec, dense)


def _cone_branch(c, spec, rho_end, dense=False):
    r0 = 1.0 - spec.step_off if rho_end < 1.0 else 1.0 + spec.step_off
    return r0, _integrate(_signed_lightcone(c, r0, spec.sign), (r0, rho_end), spec, dense)


def _matching_defect(b, c, spec):
    rm = spec.match_point
    yc = _center_branch(b, spec, rm)[1].y[:, -1]
    yl = _cone_branch(c, spec, rm)[1].y[:, -1]
    return yc - yl


def _probe(b, spec):
    """Signed distance of the centre branch from ``sign * pi/2`` near ``rho = 1``."""
    sol = _center_branch(b, spec, 1.0 - _PROBE_OFFSET)[1]
    return sol.y[0, -1] - spec.sign * HALF_PI, sol.y[1, -1]


def _scan_brackets(spec, wanted=None):
    """Brackets of ``b`` around regular solutions, ordered by ``|b|``.

    The scan stops early once ``wanted`` brackets have been found.
    """
    lo, hi = sorted(abs(v) for v in spec.b_bracket)
    slopes = spec.sign * np.geomspace(lo, hi, spec.scan_points)
    brackets = []
    prev = _probe(slopes[0], spec)[0]
    for b_prev, b in zip(slopes[:-1], slopes[1:]):
        val = _probe(b, spec)[0]
        if prev * val < 0:
            brackets.append((b_prev, b))
            if wanted is not None and len(brackets) >= wanted:
                break
        prev = val
    return brackets


def _newton(b, c, spec):
    x = np.array([b, c], dtype=float)
    d = _matching_defect(x[0], x[1], spec)
    for _ in range(spec.max_newton):
        if np.max(np.abs(d)) <= spec.tolerance:
            return x, d
        jac = np.empty((2, 2))
        for k in range(2):
            h = 1e-6 * max(1.0, abs(x[k]))
            e = np.zeros(2)
            e[k] = h
            jac[:, k] = (_matching_defect(*(x + e), spec) - _matching_defect(*(x - e), spec)) / (2 * h)
        try:
            dx = np.linalg.solve(jac, -d)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Jacobian in profile shooting") from exc
        t, base = 1.0, np.max(np.abs(d))
        while True:
            trial = x + t * dx
            dt = _matching_defect(trial[0], trial[1], spec)
            if np.max(np.abs(dt)) < base or t < 1.0 / 64:
                break
            t *= 0.5
        if np.max(np.abs(dt)) >= base:
            break
        x, d = trial, dt
    if np.max(np.abs(d)) <= spec.tolerance:
        return x, d
    raise ConvergenceError(
        f"profile shooting stalled at b={x[0]:.12g}, c={x[1]:.12g}, "
        f"defect={np.max(np.abs(d)):.3e} > {spec.tolerance:.1e}")


def _count_crossings(rho, f, level, upper):
    mask = (rho > 0) & (rho < upper)
    s = np.sign(f[mask] - level)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _tabulate(b, c, spec, rho):
    """Fill ``(f, f')`` on ``rho`` from series and dense integrator output."""
    f = np.empty_like(rho)
    fp = np.empty_like(rho)
    eps, rm = spec.step_off, spec.match_point
    r0, center = _center_branch(b, spec, rm, dense=True)
    _, inner = _cone_branch(c, spec, rm, dense=True)
    pieces = [
        (rho <= r0, lambda r: center_series(b, r)),
        ((rho > r0) & (rho <= rm), center.sol),
        ((rho > rm) & (rho < 1.0 - eps), inner.sol),
        (np.abs(rho - 1.0) <= eps, lambda r: _signed_lightcone(c, r, spec.sign)),
    ]
    beyond = rho > 1.0 + eps
    if np.any(beyond):
        _, outer = _cone_branch(c, spec, float(rho[beyond][-1]), dense=True)
        pieces.append((beyond, outer.sol))
    for mask, fn in pieces:
        if np.any(mask):
            vals = fn(rho[mask])
            f[mask], fp[mask] = vals[0], vals[1]
    return f, fp


def shoot_profile(spec=None):
    """Construct ``f_n`` by two-sided shooting.

    The centre branch (slope ``b``) is integrated forward from the centre
    step-off point, the lightcone branch (slope ``c``) backward from
    ``1 - step_off``; damped Newton on ``(b, c)`` zeroes the mismatch of
    ``(f, f')`` at ``match_point``.  Starting values come from a geometric scan
    of ``b`` for sign changes of ``f(1 - 1e-3) - pi/2``.

    Raises
    ------
    ConvergenceError
        If the scan finds no bracket for index ``n`` or Newton stalls.
    IndexMismatchError
        If the converged solution has the wrong number of ``pi/2`` crossings.
    """
    spec = ProfileSpec() if spec is None else spec
    n = spec.excitation_index
    brackets = _scan_brackets(spec, wanted=n + 1)
    if len(brackets) <= n:
        raise ConvergenceError(
            f"scan of b over {spec.b_bracket} found {len(brackets)} solution(s); "
            f"cannot construct index {n}")
    lo, hi = brackets[n]
    b0 = brentq(lambda b: _probe(b, spec)[0], lo, hi, xtol=1e-13 * abs(lo), rtol=1e-13)
    c0 = _probe(b0, spec)[1]
    (b, c), d = _newton(b0, c0, spec)

    rho = np.linspace(0.0, spec.rho_max, spec.samples)
    f, fp = _tabulate(b, c, spec, rho)
    level = spec.sign * HALF_PI
    crossings = _count_crossings(rho, f, level, 1.0 - spec.step_off)
    if crossings != n or (n == 0 and np.any(spec.sign * fp[rho <= 1.0] <= 0)):
        raise IndexMismatchError(
            f"converged profile (b={b:.10g}) crosses pi/2 {crossings} times, expected {n}")
    fpp = _second_derivative(rho, f, fp, b, c, spec.step_off)
    return Profile(n, float(b), float(c), float(np.max(np.abs(d))), rho, f, fp, fpp,
                   closed_form=False, spec=spec)


def extend_beyond_lightcone(p, rho_max):
    """Append samples on ``(p.rho_max, rho_max]`` at the table's spacing.

    The continuation starts from the lightcone series at ``1 + step_off`` and
    integrates the profile ODE outward.  Requests inside the current table
    return ``p`` unchanged.
    """
    check_scalar(rho_max, "rho_max", min_val=0.0)
    if rho_max <= p.rho_max:
        return p
    if rho_max > MAX_EXTENSION:
        raise AccuracyError(
            f"extension to rho={rho_max} exceeds validated range rho <= {MAX_EXTENSION}")
    h = p.rho[1] - p.rho[0]
    extra = int(math.ceil((rho_max - p.rho_max) / h - 1e-9))
    new_rho = p.rho_max + h * np.arange(1, extra + 1)
    if p.closed_form:
        f, fp = ground_state(new_rho)
        if p.b < 0:
            f, fp = -f, -fp
    else:
        f, fp = _tabulate(p.b, p.c, p.spec, new_rho)
    rho = np.concatenate([p.rho, new_rho])
    f = np.concatenate([p.f, f])
    fp = np.concatenate([p.fprime, fp])
    fpp = _second_derivative(rho, f, fp, p.b, p.c, p.spec.step_off)
    return Profile(p.excitation_index, p.b, p.c, p.defect, rho, f, fp, fpp,
                   closed_form=p.closed_form, spec=p.spec)
