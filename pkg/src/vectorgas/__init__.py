"""Non-centered Wishart spectra, the two-type Coulomb gas behind them and the
constrained vector equilibrium problem describing their limit."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    AdmissibilityError,
    ConvergenceError,
    DomainError,
    InfeasibleError,
    MassMismatchError,
    SingularPointError,
    TruncationError,
    UnsupportedRouteError,
)
from .fields import ModelParams, make_field, q_field, script_v, v_n  # noqa: E402
from .measures import (  # noqa: E402
    ConstraintMeasure,
    EmpiricalMeasure,
    GridMeasure,
    Lattice,
    SphereMeasure,
    bl_distance,
    lattice_points,
    quantile_discretize,
    sigma_density,
    snap_to_lattice,
    stereo_push,
)
from .special import bessel_j, bessel_zero, log_bessel_i, ml_ratio, zero_table  # noqa: E402

__all__ = [
    "AdmissibilityError",
    "ConvergenceError",
    "DomainError",
    "InfeasibleError",
    "MassMismatchError",
    "SingularPointError",
    "TruncationError",
    "UnsupportedRouteError",
    "ModelParams",
    "make_field",
    "q_field",
    "script_v",
    "v_n",
    "ConstraintMeasure",
    "EmpiricalMeasure",
    "GridMeasure",
    "Lattice",
    "SphereMeasure",
    "bl_distance",
    "lattice_points",
    "quantile_discretize",
    "sigma_density",
    "snap_to_lattice",
    "stereo_push",
    "bessel_j",
    "bessel_zero",
    "log_bessel_i",
    "ml_ratio",
    "zero_table",
]
