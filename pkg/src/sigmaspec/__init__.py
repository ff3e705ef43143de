"""Linear stability spectra of self-similar wave maps.

Submodules
----------
profiles
    The self-similar profiles ``f_n`` (closed form for ``n = 0``, shooting otherwise).
modes
    Eigenvalues of the linearised operator by two-sided shooting.
evolve
    Second-order characteristic scheme for the linearised evolution.
spectra
    Growth rates of filtered evolution data.
estimators
    scikit-learn style wrappers.
"""
__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    AccuracyError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    GridMismatchError,
    IndexMismatchError,
    InstabilityError,
    OutOfRangeError,
    SigmaSpecError,
    ValidationError,
)
from .profiles import Profile, ProfileSpec, ground_state_profile, shoot_profile  # noqa: E402
from .modes import (  # noqa: E402
    EigenvalueEstimate,
    find_eigenvalue,
    lightcone_analyticity,
    scan_eigenvalues,
    shooting_spectrum,
)
from .evolve import Grid, SchemeConfig, State, evolve, initial_data  # noqa: E402
from .spectra import co_evolve_filtered, extract_spectrum, fit_growth_rate  # noqa: E402
from .estimators import EvolutionSpectrum, ProfileShooter, ShootingSpectrum  # noqa: E402

__all__ = [
    "__version__",
    "SigmaSpecError", "ValidationError", "DomainError", "OutOfRangeError", "GridMismatchError",
    "ConvergenceError", "IndexMismatchError", "AccuracyError", "DegeneracyError",
    "InstabilityError",
    "Profile", "ProfileSpec", "ground_state_profile", "shoot_profile",
    "EigenvalueEstimate", "find_eigenvalue", "scan_eigenvalues", "shooting_spectrum",
    "lightcone_analyticity",
    "Grid", "SchemeConfig", "State", "evolve", "initial_data",
    "co_evolve_filtered", "extract_spectrum", "fit_growth_rate",
    "ProfileShooter", "ShootingSpectrum", "EvolutionSpectrum",
]
