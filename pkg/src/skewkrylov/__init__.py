"""Short-recurrence Krylov solvers for skew-symmetric and shifted skew-symmetric systems."""
from .factorizations import (EquivalenceReport, Parity, ParityReport, TerminationSide, check_gk_lanczos_equivalence,
                             check_ssy_lanczos_equivalence, run_golub_kahan, run_lanczos, run_ssy,
                             termination_parity)
from .history import ConvergenceHistory, IterationRecord, Outcome, SolverConfig
from .operators import (LinearOperator, Structure, example_rhs, from_matrix, load_matrix_market,
                        make_conv2d_skew, make_tridiag_skew, random_rhs, shifted, write_matrix_market)
from .shifted_solvers import (error_bound, estimate_spectral_interval, s3cg_solve, s3lq_solve, s3mr_solve,
                              usymlq_solve, usymqr_solve)
from .skew_solvers import craig_solve, lsqr_solve, s2cg_solve, s2mr_solve

__version__ = "0.1.0"
