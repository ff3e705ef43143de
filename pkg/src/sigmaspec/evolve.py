"""Linearised evolution in adapted coordinates.

With ``u1 = w``, ``u2 = w_tau`` and ``u3 = w_rho`` the perturbation equation
becomes the first-order system ``u_tau = A u_rho + B u`` with

    A = [[0, 0, 0], [0, -2 rho, 1 - rho^2], [0, 1, 0]]
    B = [[0, 1, 0], [-2 cos(2 f_n) / rho^2, -1, 2 (1 - rho^2) / rho], [0, 0, 0]].

The non-zero eigenvalues of ``A`` are ``1 - rho`` and ``-1 - rho``.  Spatial
derivatives are split along the two characteristic families and each is
discretised with a one-sided three-point stencil on its upwind side; time is
advanced with Heun's method.  The grid is ``rho_i = i / N`` for
``i = 0 .. N + 1``: one point beyond the lightcone suffices because both
speeds are non-positive for ``rho >= 1``, so no outer boundary condition is
needed.  At the centre, ghost points are filled by reflection (``u1`` and
``u2`` odd, ``u3`` even).

Constraint handling
-------------------
The first-order reduction carries the constraint ``u3 = d(u1)/d(rho)``.  Any
``u1`` paired with a suitable ``u3`` is a stationary solution of the
unconstrained system, so its discretisation has a cluster of about ``N``
spurious eigenvalues at ``O(Delta rho)`` that swamps every decaying mode.  By
default (``constraint="reconstruct"``) ``u1`` is therefore rebuilt after each
stage as the cumulative trapezoid integral of ``u3``.  This leaves the
continuum dynamics unchanged because ``d/dtau int u3 = u2``.
``constraint="free"`` evolves ``u1`` with ``du1/dtau = u2`` instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from ._validation import check_int, check_scalar
from .exceptions import GridMismatchError, InstabilityError, ValidationError
from .profiles import Profile, evaluate, extend_beyond_lightcone

__all__ = [
    "Grid",
    "State",
    "SchemeConfig",
    "characteristic_speeds",
    "characteristic_projectors",
    "spatial_operator",
    "step",
    "apply_center_bc",
    "evolve",
    "initial_data",
    "eigenmode_state",
    "DEFAULT_DATA",
    "max_stable_cfl",
    "self_convergence",
    "gauge_mode",
    "gauge_mode_error",
]

GHOSTS = 2
# Heun's method is stable for the three-point upwind stencil up to a Courant
# number of exactly 1/2.
_HEUN_COURANT_LIMIT = 0.5


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``rho_i = i / N`` for ``i = 0 .. N + 1``."""

    N: int

    def __post_init__(self):
        check_int(self.N, "N", min_val=32)

    @property
    def h(self):
        return 1.0 / self.N

    @property
    def size(self):
        return self.N + 2

    @cached_property
    def rho(self):
        r = np.arange(self.N + 2) * self.h
        r[self.N] = 1.0
        r.setflags(write=False)
        return r


@dataclass(frozen=True, eq=False)
class State:
    """Grid functions ``(u1, u2, u3) = (w, w_tau, w_rho)`` at time ``tau``.

    ``u`` has shape ``(3, N + 2)`` and is stored read-only.
    """

    tau: float
    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim != 2 or u.shape[0] != 3 or u.shape[1] < 34:
            raise ValidationError(f"state array must have shape (3, N + 2) with N >= 32, got {u.shape}")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def grid(self):
        return Grid(self.u.shape[1] - 2)

    @property
    def u1(self):
        return self.u[0]

    @property
    def u2(self):
        return self.u[1]

    @property
    def u3(self):
        return self.u[2]

    def padded(self):
        """Copy of ``u`` with two reflected ghost columns prepended."""
        return _pad(self.u)

    def __add__(self, other):
        _same_grid(self, other)
        return State(self.tau, self.u + other.u)

    def __mul__(self, alpha):
        return State(self.tau, alpha * self.u)

    __rmul__ = __mul__


def _same_grid(x, y):
    if x.u.shape != y.u.shape:
        raise GridMismatchError(f"grid mismatch: {x.u.shape} vs {y.u.shape}")


def _pad(u):
    out = np.empty(u.shape[:-1] + (u.shape[-1] + GHOSTS,))
    out[..., GHOSTS:] = u
    # ghost index -k mirrors +k: u1, u2 odd, u3 even
    for k in (1, 2):
        out[..., 0:2, GHOSTS - k] = -u[..., 0:2, k]
        out[..., 2, GHOSTS - k] = u[..., 2, k]
    return out


def characteristic_speeds(rho):
    """``(lambda_minus, lambda_plus) = (-1 - rho, 1 - rho)``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValidationError("rho must be non-negative")
    lm, lp = -1.0 - rho, 1.0 - rho
    if lm.ndim == 0:
        return float(lm), float(lp)
    return lm, lp


def characteristic_projectors(rho):
    """Spectral projectors ``(A_minus, A_plus)`` of ``A`` as 3x3 matrices.

    The ``(u2, u3)`` block ``M`` has eigenvalues ``lambda_pm = -rho pm 1``, so
    ``A_plus = (M - lambda_minus I) / 2`` and ``A_minus = (lambda_plus I - M) / 2``.
    They are oblique for ``rho > 0``: the block is symmetric only at the centre.
    """
    rho = float(rho)
    if rho < 0:
        raise ValidationError("rho must be non-negative")
    lm, lp = characteristic_speeds(rho)
    m = np.array([[-2.0 * rho, 1.0 - rho * rho], [1.0, 0.0]])
    eye = np.eye(2)
    a_minus = np.zeros((3, 3))
    a_plus = np.zeros((3, 3))
    a_plus[1:, 1:] = (m - lm * eye) / 2.0
    a_minus[1:, 1:] = (lp * eye - m) / 2.0
    return a_minus, a_plus


def max_stable_cfl(N):
    """Largest ``kappa`` with ``kappa * (2 + 1/N) <= 1/2``."""
    return _HEUN_COURANT_LIMIT / (2.0 + 1.0 / N)


@dataclass(frozen=True, eq=False)
class SchemeConfig:
    """Evolution settings.

    Parameters
    ----------
    profile : Profile
        Background ``f_n``.  It must cover ``rho <= 1 + 1/N`` (profiles are
        extended automatically within the validated range).
    cfl : float
        ``kappa`` in ``Delta tau = kappa * Delta rho``.  Stability of Heun's
        method with the upwind stencils requires ``kappa (2 + Delta rho) <= 1/2``.
    tau_end : float
        Final time.
    stride : int or None
        Observer stride in steps; ``None`` samples roughly every 0.01 in tau.
    constraint : {"reconstruct", "free"}
        How ``u1`` is advanced, see the module notes.
    growth_limit : float
        Abort if the norm grows faster than ``exp(growth_limit * Delta tau)``
        within a single step.
    """

    profile: Profile
    cfl: float = 0.2
    tau_end: float = 12.0
    stride: int | None = None
    constraint: str = "reconstruct"
    growth_limit: float = 20.0

    def __post_init__(self):
        if not isinstance(self.profile, Profile):
            raise ValidationError("profile must be a Profile")
        check_scalar(self.cfl, "cfl", min_val=0.0, max_val=0.5, include_boundaries="right")
        check_scalar(self.tau_end, "tau_end", min_val=0.0)
        if self.stride is not None:
            check_int(self.stride, "stride", min_val=1)
        if self.constraint not in ("reconstruct", "free"):
            raise ValidationError(f"constraint must be 'reconstruct' or 'free', got {self.constraint!r}")
        check_scalar(self.growth_limit, "growth_limit", min_val=0.0, include_boundaries="neither")

    def time_step(self, N):
        return self.cfl / N

    def steps(self, N, tau_end=None):
        """Number of steps and the (possibly shortened) uniform step to reach ``tau_end``."""
        tau_end = self.tau_end if tau_end is None else tau_end
        n = int(math.ceil(tau_end / self.time_step(N) - 1e-9))
        return n, (tau_end / n if n else 0.0)

    def observer_stride(self, N):
        if self.stride is not None:
            return self.stride
        return max(1, int(round(0.01 / self.time_step(N))))

    @cached_property
    def _schemes(self):
        return {}

    def scheme(self, N):
        cache = self._schemes
        if N not in cache:
            cache[N] = _Scheme(Grid(N), self)
        return cache[N]


class _Scheme:
    """Precomputed coefficient arrays for one grid; operates on stacked levels."""

    def __init__(self, grid, cfg):
        N = grid.N
        if cfg.cfl > max_stable_cfl(N) * (1 + 1e-12):
            raise ValidationError(
                f"cfl={cfg.cfl} is unstable on N={N}: Heun with three-point upwind "
                f"stencils needs cfl <= {max_stable_cfl(N):.6f}")
        self.grid, self.cfg = grid, cfg
        self.N, self.h = N, grid.h
        rho = grid.rho
        lm, lp = characteristic_speeds(rho)
        # lambda_- A_- and lambda_+ A_+ entries of the (u2, u3) block
        self.m11, self.m12 = lm * (1.0 + rho) / 2.0, -lm * (1.0 - rho * rho) / 2.0
        self.m21, self.m22 = -lm / 2.0, lm * (1.0 - rho) / 2.0
        self.p11, self.p12 = lp * (1.0 - rho) / 2.0, lp * (1.0 - rho * rho) / 2.0
        self.p21, self.p22 = lp / 2.0, lp * (1.0 + rho) / 2.0
        # right-sided stencils only where lambda_+ > 0, i.e. i < N
        self.n_right = N

        profile = extend_beyond_lightcone(cfg.profile, float(rho[-1]))
        f = np.asarray(evaluate(profile, rho)[0])
        r = rho[1:]
        self.c_u3 = 2.0 * (1.0 - r * r) / r
        self.c_u1 = -2.0 * np.cos(2.0 * f[1:]) / (r * r)
        self.reconstruct = cfg.constraint == "reconstruct"

        co = np.zeros((10, grid.size))
        co[:8] = [self.m11, self.m12, self.m21, self.m22, self.p11, self.p12, self.p21, self.p22]
        co[8, 1:], co[9, 1:] = self.c_u3, self.c_u1
        self.co = co

    def rhs(self, U):
        """Time derivative of stacked states ``U`` with shape ``(..., 3, N + 2)``."""
        h, n = self.h, self.n_right
        P = _pad(U)
        u2, u3 = P[..., 1, :], P[..., 2, :]
        left2 = (3.0 * u2[..., 2:] - 4.0 * u2[..., 1:-1] + u2[..., :-2]) / (2.0 * h)
        left3 = (3.0 * u3[..., 2:] - 4.0 * u3[..., 1:-1] + u3[..., :-2]) / (2.0 * h)
        up2, up3 = left2.copy(), left3.copy()
        v2, v3 = U[..., 1, :], U[..., 2, :]
        up2[..., :n] = (-3.0 * v2[..., :n] + 4.0 * v2[..., 1:n + 1] - v2[..., 2:n + 2]) / (2.0 * h)
        up3[..., :n] = (-3.0 * v3[..., :n] + 4.0 * v3[..., 1:n + 1] - v3[..., 2:n + 2]) / (2.0 * h)

        dU = np.empty_like(U)
        dU[..., 0, :] = v2
        dU[..., 1, :] = self.m11 * left2 + self.m12 * left3 + self.p11 * up2 + self.p12 * up3
        dU[..., 2, :] = self.m21 * left2 + self.m22 * left3 + self.p21 * up2 + self.p22 * up3
        dU[..., 1, 1:] += -v2[..., 1:] + self.c_u3 * v3[..., 1:] + self.c_u1 * U[..., 0, 1:]
        # the centre is Dirichlet for u1 and u2; no singular coefficient is evaluated there
        dU[..., 0:2, 0] = 0.0
        return dU

    def enforce(self, U):
        """Centre conditions and, in reconstruct mode, ``u1 = int_0^rho u3``."""
        U[..., 0:2, 0] = 0.0
        if self.reconstruct:
            u3 = U[..., 2, :]
            U[..., 0, 1:] = np.cumsum(0.5 * self.h * (u3[..., 1:] + u3[..., :-1]), axis=-1)
        return U

    def step(self, U, dt):
        k1 = self.rhs(U)
        U1 = self.enforce(U + dt * k1)
        k2 = self.rhs(U1)
        return self.enforce(0.5 * (U + U1 + dt * k2))

    def advance(self, U, dt, steps=1):
        """Compiled equivalent of ``steps`` calls to :meth:`step`, in place on a 3-d stack."""
        k1, U1 = np.empty_like(U), np.empty_like(U)
        for _ in range(steps):
            _kernels.heun(U, dt, self.h, self.N, self.co, self.reconstruct, k1, U1)
        return U


def _check_state(s, cfg):
    N = s.u.shape[1] - 2
    return cfg.scheme(N)


def spatial_operator(s, cfg):
    """Semi-discrete time derivative of ``s`` (array of shape ``(3, N + 2)``)."""
    return _check_state(s, cfg).rhs(np.asarray(s.u))


def apply_center_bc(s):
    """Impose ``u1(0) = u2(0) = 0``; ghost reflections live in :meth:`State.padded`."""
    u = np.array(s.u)
    u[0:2, 0] = 0.0
    return State(s.tau, u)


def step(s, cfg, dt=None):
    """Advance one Heun step of size ``dt`` (default ``cfl * Delta rho``).

    Raises
    ------
    InstabilityError
        If the discrete norm grows by more than ``exp(growth_limit * dt)``.
    """
    scheme = _check_state(s, cfg)
    dt = cfg.time_step(scheme.N) if dt is None else dt
    U = scheme.step(np.array(s.u), dt)
    _check_growth(s.u, U, dt, cfg, s.tau + dt, scheme.h)
    return State(s.tau + dt, U)


def _check_growth(U0, U1, dt, cfg, tau, h):
    """Raise if any level of the stack grew faster than ``growth_limit``."""
    n0 = _kernels.norms2(np.ascontiguousarray(U0).reshape(-1, 3, U0.shape[-1]), h)
    n1 = _kernels.norms2(np.ascontiguousarray(U1).reshape(-1, 3, U1.shape[-1]), h)
    _check_norm_growth(n0, n1, dt, cfg, tau)


def _check_norm_growth(n0, n1, dt, cfg, tau):
    if not np.all(np.isfinite(n1)):
        raise InstabilityError(f"non-finite state at tau={tau:.6g}", tau=tau)
    limit = math.exp(2.0 * cfg.growth_limit * dt)
    bad = (n0 > 0) & (n1 > n0 * limit)
    if np.any(bad):
        growth = float(np.max(0.5 * np.log(n1[bad] / n0[bad]) / dt))
        raise InstabilityError(
            f"norm growth rate {growth:.3g} exceeds {cfg.growth_limit} at tau={tau:.6g}",
            tau=tau, growth=growth)


def evolve(initial, cfg, observer=None, tau_end=None):
    """Evolve ``initial`` to ``tau_end`` (default ``cfg.tau_end``).

    The step is ``tau_end / ceil(tau_end / (cfl Delta rho))``, never larger
    than ``cfl * Delta rho``.  ``observer(tau, state)`` is called at the
    initial time, every ``cfg.observer_stride(N)`` steps and at the end.
    """
    scheme = _check_state(initial, cfg)
    tau_end = cfg.tau_end if tau_end is None else tau_end
    check_scalar(tau_end, "tau_end", min_val=0.0)
    n, dt = cfg.steps(scheme.N, tau_end)
    stride = cfg.observer_stride(scheme.N)
    U = scheme.enforce(np.array(initial.u)[None])
    tau0 = initial.tau
    if observer is not None:
        observer(tau0, State(tau0, U[0]))
    prev = np.empty_like(U)
    for k in range(1, n + 1):
        prev[:] = U
        scheme.advance(U, dt)
        _check_growth(prev, U, dt, cfg, tau0 + k * dt, scheme.h)
        if observer is not None and (k % stride == 0 or k == n):
            observer(tau0 + k * dt, State(tau0 + k * dt, U[0]))
    U = U[0]
    return State(tau0 + n * dt, U)


# --- initial data -------------------------------------------------------------

def _phi(r):
    return r**3 * (1.0 - 0.5 * r * r), 0.0 * r, 3.0 * r * r - 2.5 * r**4


def _psi(r):
    s = 1.0 - r * r
    return r * s * s, 0.0 * r, s * s - 4.0 * r * r * s


def _quintic(r):
    return r**5, 0.0 * r, 5.0 * r**4


def _kick(r):
    s = 1.0 - r * r
    return 0.0 * r, r * s * s, 0.0 * r


_LIBRARY = {"phi": _phi, "psi": _psi, "quintic": _quintic, "kick": _kick}
DEFAULT_DATA = ("phi", "psi", "quintic", "kick")


def initial_data(name, grid, tau=0.0):
    """Smooth odd initial data from the built-in library.

    ``phi``: ``w = rho^3 (1 - rho^2 / 2)``; ``psi``: ``w = rho (1 - rho^2)^2``;
    ``quintic``: ``w = rho^5``; all with ``w_tau = 0``.  ``kick`` has ``w = 0``
    and ``w_tau = rho (1 - rho^2)^2``.
    """
    try:
        fn = _LIBRARY[name]
    except KeyError:
        raise ValidationError(f"unknown initial data {name!r}; choose from {sorted(_LIBRARY)}") from None
    if isinstance(grid, int):
        grid = Grid(grid)
    return State(tau, np.vstack(fn(grid.rho)))


def eigenmode_state(grid, v, vp, lam, tau=0.0):
    """Data ``(v, lambda v, v')`` of a separated solution ``exp(lambda tau) v``."""
    if isinstance(grid, int):
        grid = Grid(grid)
    v = np.asarray(v(grid.rho) if callable(v) else v, dtype=float)
    vp = np.asarray(vp(grid.rho) if callable(vp) else vp, dtype=float)
    return State(tau, np.vstack([v, lam * v, vp]))


# --- convergence diagnostics ---------------------------------------------------

def _restrict(u, factor):
    """Values of a fine-grid array on the coarse points ``rho <= 1``."""
    n_fine = u.shape[1] - 2
    n = n_fine // factor
    return u[:, : n_fine + 1 : factor][:, : n + 1]


def self_convergence(cfg, grids=(256, 512, 1024), data="phi"):
    """Observed order from three resolutions ``N, 2N, 4N`` at ``cfg.tau_end``.

    Returns a dict with the differences ``|u_N - u_2N|`` and ``|u_2N - u_4N|``
    (discrete L2 over ``[0, 1]`` at the coarse points) and
    ``order = log2`` of their ratio.
    """
    grids = tuple(int(g) for g in grids)
    if len(grids) != 3 or grids[1] != 2 * grids[0] or grids[2] != 2 * grids[1]:
        raise ValidationError("grids must be N, 2N, 4N")
    sol = [evolve(initial_data(data, g), cfg).u for g in grids]
    coarse = grids[0]

    def dist(a, b, factor):
        d = _restrict(a, factor // 2 if factor > 1 else 1) - _restrict(b, factor)
        return float(np.sqrt(np.sum(d * d) / coarse))

    e1 = dist(sol[0], sol[1], 2)
    e2 = float(np.sqrt(np.sum((_restrict(sol[1], 2) - _restrict(sol[2], 4)) ** 2) / coarse))
    order = math.log2(e1 / e2) if e1 > 0 and e2 > 0 else float("nan")
    return {"grids": list(grids), "tau_end": cfg.tau_end, "data": data,
            "differences": [e1, e2], "order": order}


def gauge_mode(profile, rho):
    """The ``lambda = 1`` mode ``v = rho f'(rho)`` and its derivative."""
    rho = np.asarray(rho, dtype=float)
    p = extend_beyond_lightcone(profile, float(np.max(rho)))
    _, fp = evaluate(p, rho)
    if p.closed_form:
        fpp = -4.0 * np.sign(p.b) * rho / (1.0 + rho * rho) ** 2
    else:
        fpp = p._splines[1](rho, 1)
    return rho * fp, fp + rho * fpp


def gauge_mode_error(cfg, N):
    """Relative max error after evolving gauge-mode data against ``exp(tau)`` growth."""
    g = Grid(N)
    v, vp = gauge_mode(cfg.profile, g.rho)
    s0 = eigenmode_state(g, v, vp, 1.0)
    s = evolve(s0, cfg)
    exact = math.exp(s.tau - s0.tau) * s0.u
    return float(np.max(np.abs(s.u - exact)) / np.max(np.abs(exact)))
