"""bmlab: numerics for matrix-weighted Bourgain-Morrey space theory.

Computes windowed Bourgain-Morrey norms, reducing operators and their
certified equivalence constants, Muckenhoupt-type class characteristics
and growth dimensions, dyadic averaging operators, and constructive
epsilon-net precompactness certificates, all from closed-form weight
and field families so every number is reproducible from a config file.
"""

__version__ = "0.1.0"

from .dyadic import Box, DyadicIndex, LatticeWindow, as_box, containing_cube, \
    cube_geometry, cubes_in_window, dyadic_parent
from .linalg import DEFAULT_POLICY, NumericError, NumericPolicy, hermitian_eig, \
    matrix_power, spectral_norm, vector_norm
from .weights import MatrixWeightSpec, WeightDomainError, eval_weight, ellipticity_check
from .quadrature import IntegralResult, QuadratureError, QuadratureSpec, \
    integrate_cube, p_integral, weight_mass
from .fields import BallTruncation, ConstantField, CoordinateField, GaussianBump, \
    PiecewiseConstantField, PowerTail, TranslateField, combine, difference, \
    field_from_config, gradient_field, indicator_cube, translate
from .spaces import INF, NormReport, SobolevNormReport, SpaceParams, bm_norm, \
    embedding_check, lp_norm, scalar_bm_norm, sobolev_norm, window_for_family
