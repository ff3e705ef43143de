"""scikit-learn style front-ends.

Hyperparameters go to ``__init__`` and are stored unchanged, so
``get_params``/``set_params``/``clone`` work; all computation happens in
``fit``, and fitted attributes carry a trailing underscore.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_interval
from .evolve import SchemeConfig
from .exceptions import ValidationError
from .modes import ShootingSettings, eigenfunction, shooting_spectrum
from .profiles import Profile, ProfileSpec, evaluate, ground_state_profile, shoot_profile
from .spectra import extract_spectrum
from .tables import SHOOTING_RANGES

__all__ = ["ProfileShooter", "ShootingSpectrum", "EvolutionSpectrum"]


def _as_rho(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValidationError("X must have a single column of rho values")
        X = X[:, 0]
    if X.ndim != 1:
        raise ValidationError("X must be a 1-d array of rho values")
    return X


def _resolve_profile(profile, excitation_index, samples=2049):
    if profile is not None:
        if not isinstance(profile, Profile):
            raise ValidationError("profile must be a Profile")
        return profile
    if excitation_index == 0:
        return ground_state_profile(samples)
    return shoot_profile(ProfileSpec(excitation_index=excitation_index, samples=samples))


class ProfileShooter(BaseEstimator):
    """Construct the self-similar profile ``f_n``.

    Parameters
    ----------
    excitation_index : int
    closed_form : bool
        For ``n = 0`` use ``2 arctan(rho)`` instead of shooting.
    samples : int
        Size of the stored table.
    tolerance : float
        Matching-defect threshold for Newton.

    Attributes
    ----------
    profile_ : Profile
    b_, c_, defect_ : float
    """

    def __init__(self, excitation_index=0, closed_form=False, samples=2049, tolerance=1e-10):
        self.excitation_index = excitation_index
        self.closed_form = closed_form
        self.samples = samples
        self.tolerance = tolerance

    def fit(self, X=None, y=None):
        check_int(self.excitation_index, "excitation_index", min_val=0)
        if self.closed_form:
            if self.excitation_index != 0:
                raise ValidationError("only the ground state has a closed form")
            self.profile_ = ground_state_profile(self.samples)
        else:
            self.profile_ = shoot_profile(ProfileSpec(
                excitation_index=self.excitation_index, samples=self.samples,
                tolerance=self.tolerance))
        self.b_, self.c_, self.defect_ = self.profile_.b, self.profile_.c, self.profile_.defect
        return self

    def predict(self, X):
        """``f(rho)`` at the points in ``X``."""
        check_is_fitted(self, "profile_")
        return np.asarray(evaluate(self.profile_, _as_rho(X))[0])

    def transform(self, X):
        """Columns ``(f, f')`` at the points in ``X``."""
        check_is_fitted(self, "profile_")
        return np.column_stack(evaluate(self.profile_, _as_rho(X)))


class ShootingSpectrum(BaseEstimator):
    """Eigenvalues of the linearised operator by two-sided shooting.

    Parameters
    ----------
    excitation_index : int
        Background profile, ignored when ``profile`` is given.
    lambda_range : (float, float) or None
        Scan interval; ``None`` uses the default range for the profile.
    steps : int or None
        Scan points.
    profile : Profile or None
    tolerance : float
        Newton threshold on the matching defect.

    Attributes
    ----------
    eigenvalues_ : ndarray
        Decreasing.
    uncertainties_ : ndarray
    amplitudes_ : ndarray
        Centre amplitudes ``a`` of the normalised eigenfunctions.
    estimates_ : list of EigenvalueEstimate
    """

    def __init__(self, excitation_index=0, lambda_range=None, steps=None, profile=None,
                 tolerance=1e-10):
        self.excitation_index = excitation_index
        self.lambda_range = lambda_range
        self.steps = steps
        self.profile = profile
        self.tolerance = tolerance

    def fit(self, X=None, y=None):
        check_int(self.excitation_index, "excitation_index", min_val=0)
        self.profile_ = _resolve_profile(self.profile, self.excitation_index)
        n = self.profile_.excitation_index
        rng = self.lambda_range if self.lambda_range is not None else SHOOTING_RANGES.get(n, (-1.0, 8.0))
        rng = check_interval(rng, "lambda_range")
        settings = ShootingSettings(tolerance=self.tolerance)
        est, sols = shooting_spectrum(self.profile_, rng, self.steps, settings, samples=257)
        self.estimates_, self.solutions_ = est, sols
        self.eigenvalues_ = np.array([e.value for e in est])
        self.uncertainties_ = np.array([e.uncertainty for e in est])
        self.amplitudes_ = np.array([s.params.a for s in sols])
        return self

    def predict(self, X):
        """Eigenfunctions (columns, normalised to ``v(1) = 1``) at ``rho`` in ``X`` within ``[0, 1 + 1/16]``."""
        check_is_fitted(self, "estimates_")
        rho = _as_rho(X)
        out = np.empty((rho.size, len(self.solutions_)))
        for k, sol in enumerate(self.solutions_):
            out[:, k] = eigenfunction(sol, rho)[0]
        return out


class EvolutionSpectrum(BaseEstimator):
    """Eigenvalue real parts from filtered time evolution.

    Parameters
    ----------
    excitation_index : int
    levels : int
        Number of eigenvalues (1 to 4).
    grid : int
        ``N``; the spacing is ``1 / N``.
    cfl : float
    tau_end : float
    window : "auto" or (float, float)
    coarse : bool
        Also run on ``N / 2`` to measure the discretisation error.
    profile : Profile or None

    Attributes
    ----------
    eigenvalues_, uncertainties_ : ndarray
    oscillation_ : ndarray of bool
    tau_, log_norms_ : ndarray
        The log-norm series, shape ``(levels, samples)``.
    intercepts_ : ndarray
    """

    def __init__(self, excitation_index=0, levels=4, grid=2048, cfl=0.2, tau_end=12.0,
                 window="auto", coarse=True, profile=None):
        self.excitation_index = excitation_index
        self.levels = levels
        self.grid = grid
        self.cfl = cfl
        self.tau_end = tau_end
        self.window = window
        self.coarse = coarse
        self.profile = profile

    def fit(self, X=None, y=None):
        check_int(self.excitation_index, "excitation_index", min_val=0)
        self.profile_ = _resolve_profile(self.profile, self.excitation_index)
        cfg = SchemeConfig(self.profile_, cfl=self.cfl, tau_end=self.tau_end)
        res = extract_spectrum(self.profile_, self.levels, cfg, N=self.grid,
                               window=self.window, coarse=self.coarse)
        self.result_ = res
        self.estimates_ = list(res.estimates)
        self.eigenvalues_ = res.values
        self.uncertainties_ = np.array([e.uncertainty for e in res])
        self.oscillation_ = np.array([e.oscillation for e in res])
        self.intercepts_ = np.array([e.details["intercept"] for e in res])
        self.tau_, self.log_norms_ = res.bank.tau, res.bank.log_norms
        return self

    def predict(self, X):
        """Fitted log-norm lines ``mu_j tau + beta_j`` at the times in ``X``."""
        check_is_fitted(self, "estimates_")
        tau = _as_rho(X)
        return tau[:, None] * self.eigenvalues_[None, :] + self.intercepts_[None, :]

    def score(self, X=None, y=None):
        """Negative mean RMS residual of the level fits (higher is better)."""
        check_is_fitted(self, "estimates_")
        return -float(np.mean([e.details["rms"] for e in self.estimates_]))
