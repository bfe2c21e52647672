"""Moment formulas for polynomial processes.

Conditional moments of finite-dimensional polynomial diffusions by matrix
exponentials of the dual generator, VIX moments in Bergomi-type and Volterra
forward-variance models, and the expected signature of Brownian motion.
Monte Carlo oracles for each live in :mod:`polymoments.mcsim`.
"""

__version__ = "0.1.0"

from .generator import (
    DegreeIncrease,
    DualMatrix,
    GeneratorSpec,
    apply_generator,
    brownian_spec,
    build_dual_matrix,
    jacobi_spec,
    validate_generator,
)
from .moments import conditional_moment, expm, moment_vector
from .polybasis import Polynomial, basis_index, enumerate_basis, evaluate_basis
from .forwardvariance import (
    ExponentialCurve,
    ExponentialKernel,
    FlatCurve,
    RoughKernel,
    TabulatedCurve,
    VixQuery,
    bergomi_vix_moment,
    classical_bergomi_vix_moment,
    rough_lognormal_bounds,
    rough_spot_moment,
    volterra_vix_moment_closed,
)
from .signature import (
    TruncatedTensor,
    chen_signature,
    expected_signature_bm,
    expm_L1,
    tensor_exp,
)
