"""saddlekit: saddle-shaped solutions of nonlocal Allen-Cahn type equations.

Desk-scale numerical construction and property verification for semilinear
integro-differential equations driven by uniformly elliptic radial kernels:
kernel admissibility and dimensional reduction, the cone-averaged operator on
doubly radial odd functions, transition layers, first odd eigenpairs,
monotone-iteration saddle solutions, parabolic barrier dynamics, and a
maximum-principle verification harness.
"""

__version__ = "0.1.0"

from .kernels import (RadialKernel, Kernel1D, frac_constant, frac_kernel,
                      check_ellipticity, check_sqrt_convexity, reduce_to_1d)
from .radial_geometry import (QuadrantPoint, star, AveragedKernelCache, kbar,
                              kernel_difference, zero_order_coefficient)
from .operators import (TriangularGrid, OddGridFunction, OddOperator2D,
                        Operator1D, solve_torsion, apply_odd, apply_1d)
from .layer1d import (Nonlinearity, allen_cahn, peierls, validate_nonlinearity,
                      solve_layer, check_layer_decay, check_second_derivative,
                      build_asymptotic_profile, LayerProfile)
from .eigen import first_odd_eigenpair, scaling_study, OddEigenpair
from .saddle import (build_subsolution, supersolution, monotone_iteration,
                     saddle_solve, asymptotic_error, uniqueness_probe,
                     SaddleSolution)
from .parabolic import (evolve, ode_barrier, discrete_barrier,
                        barrier_comparison, harnack_ratio,
                        EvolutionOperator1D)
from .config import RunConfig, ConfigError
