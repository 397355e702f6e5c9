"""Spectral solvers for time-periodic parabolic problems on T x R^n and T x R^n_+."""

import os

# cap BLAS/numba pools before numpy is imported
if os.environ.get("TPPAR_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["TPPAR_THREADS"])

from . import errors  # noqa: E402
from ._kernels import USING_NUMBA  # noqa: E402
from .grid import (GroupGrid, TPField, TraceSpaceSpec, apply_multiplier, bessel_norm,  # noqa: E402
                   extend_zero, forward, inverse, lp_norm, make_grid, project_mean,
                   project_osc, restrict_half, sobolev_norm, trace_norm)
from .halfspace import (BoundaryKernel, FactorTable, HalfSpaceProblem,  # noqa: E402
                        apply_factor_inverse, boundary_values, build_boundary_kernel,
                        build_factor_table, estimate_ratio_hs, lift_dirichlet,
                        solve_general, solve_zero_trace)
from .symbols import (DifferentialSymbol, OperatorTuple, check_agmon_ray, check_all,  # noqa: E402
                      check_complementing, check_properly_elliptic, char_matrix,
                      parabolic_length, split_roots)
from .wholespace import (WholeSpaceProblem, estimate_ratio_ws, residual_wholespace,  # noqa: E402
                         solve_wholespace)

__version__ = "0.1.0"
