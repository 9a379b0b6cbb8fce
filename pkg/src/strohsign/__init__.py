"""Surface waves in anisotropic and laterally periodic half-spaces via the matrix sign function."""

from .elastic import ElasticMaterial, ElasticTensor, IsotropicParams, isotropic_material
from .errors import (
    AxisSpectrumError,
    ConfigError,
    ConvergenceError,
    DefectiveMatrixError,
    InvalidParameterError,
    NoSurfaceWaveError,
    NotSubsonicError,
    SingularMatrixError,
    StrohSignError,
)
from .matsign import sign
from .periodic import LaminateSpec, Lattice, dispersion_sweep, solve_periodic_speed
from .stroh import Geometry, build_stroh, limiting_speed
from .surface import barnett_lothe, impedance, solve_surface_speed

__version__ = "0.1.0"
