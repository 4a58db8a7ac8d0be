"""causalfock: desk-scale engine for causal perturbative QFT on truncated
Fock spaces.

Point creation/annihilation operators over discretized spin-momentum
grids, integral kernel operators and their contraction calculus, Wick
normal-ordering combinatorics, dispersion-relation splitting of causal
distributions, epsilon-regularized adiabatic-limit experiments, and the
weighted shell-coordinate construction behind the test-space chains.
"""

__version__ = "0.1.0"

from .backend import backend_name  # noqa: F401
from .grids import (Species, SpinMomentumGrid, delta_argument,  # noqa: F401
                    line_momenta, spherical_points)
from .fock import (FockVector, FockBasis, KreinMetric, a_apply,  # noqa: F401
                   a_dagger_apply, commutator_check, fock_inner,
                   krein_adjoint, one_particle, random_state, vacuum)
from .kernels import (KernelLM, OperatorSum, contract,  # noqa: F401
                      eta_function, pairing_check, scalar_kernel, xi_apply)
from .testfns import TestFunctionSpec, gaussian_test, vanishing_test  # noqa: F401
from .fields import (GAMMA, PAULI, METRIC, classify_kernel_regularity,  # noqa: F401
                     dirac_kernel, em_kernel, u_spinor, v_spinor)
from .wick import (WickMonomial, ContractionScheme,  # noqa: F401
                   classify_operator_class, enumerate_contractions,
                   parse_monomial, pointwise_wick_kernels,
                   wick_decompose_product)
from .causal import (CausalDistribution, DensityModel,  # noqa: F401
                     build_A_R_D, causal_support_probe, inverse_series,
                     natural_normalization_coeffs, richardson,
                     singularity_degree, sokhotski_limit,
                     split_retarded_advanced, vacuum_polarization)
from .adiabatic import (ChainSpec, EpsilonFamily, chain_family,  # noqa: F401
                        chain_kernel, classify_contribution, decompose_1d,
                        epsilon_verdict, ir_l2_probe,
                        psi_int_first_order_kernel)
from .gelfand import (RadialGrid, a3_apply, h1_eigenvalues,  # noqa: F401
                      h_n_apply, nu_weight, u_map)
