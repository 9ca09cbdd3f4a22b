"""Identifiable NMF by determinant minimisation with column-sum constraints.

Main entry points:

    solve_proposed      the column-sum-constrained determinant criterion
    solve_volmin_mves   VolMin baseline (row-stochastic H)
    solve_plain_nmf     least-squares NMF baseline (HALS)
    solve_regularized   determinant-regularised least squares
    generate, mse       synthetic instances and the matched MSE
"""
from . import kernels
from .baselines import (BaselineOptions, project_simplex, solve_plain_nmf,
                        solve_regularized, solve_volmin_mves)
from .errors import *  # noqa: F401,F403
from .geometry import (SecondOrderCone, ScatterVerdict, check_separability,
                       check_sufficiently_scattered, dual_cone_extreme_rays,
                       refute_by_sampling, soc_member)
from .linprog import LinearProgram, LpOutcome, solve_lp
from .numerics import (ReducedModel, cofactor_vector, determinant, gram_det,
                       minor, svd_reduce)
from .solver import SolverOptions, SolverResult, ao_sweep, init_q, solve_proposed
from .synthlab import GenSpec, Instance, generate, mse

__version__ = "0.1.0"
