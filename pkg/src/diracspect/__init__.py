"""Direct and inverse spectral problems for 1D Dirac operators on (0, 1).

The library computes eigenvalues and norming constants of the operators
with Neumann-Dirichlet / Neumann type boundary conditions for potentials
that are merely p-integrable, rebuilds the characteristic functions from
their zeros, and reconstructs the potential from spectral data through a
convolution-kernel integral equation with a positivity certificate.
"""

from .core import B, Grid, J, Potential, lp_norm, mat2_exp, rotation
from .cauchy import CauchySolution, char_values, phi_dot, propagate
from .direct_spectra import (NormingData, SpectrumPair, asymptotic_residuals,
                             find_eigenvalues, norming_quadrature)
from .spectral_products import (eval_phi, eval_psi, norming_from_two_spectra,
                                phi_dot_at_zero, validate_sd)
from .transform_kernel import TriKernel, apply_transform, assemble_K, build_P_series
from .glm_krein import (KreinSolution, ToeplitzSlice, build_F, build_H,
                        check_positivity, discrete_factorization,
                        recover_potential, solve_glm, solve_krein)
from .fourier_algebra import (CoeffSeq, circ_conv, fejer_sum, fourier_coeff,
                              wiener_invert)

__version__ = "0.1.0"
