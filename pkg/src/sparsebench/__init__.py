"""Sparse representation solver suite.

Greedy, constrained, proximal and homotopy solvers behind one problem
model, plus dictionary learning, sparse classifiers, patch-based image
denoising and a benchmark harness exposed through a FastAPI service and
the `sparsebench` CLI.
"""

__version__ = "0.1.0"

from .constrained import adm_solve, gpsr_solve, tnipm_solve
from .dictlearn import (
    LearnedDictionary,
    TrainingSet,
    dksvd_train,
    ksvd_train,
    lcksvd_train,
    llc_codebook_optimize,
    llc_encode,
    load_model,
    mod_update,
    save_model,
    supervised_classify,
)
from .classify import (
    ClassifierSpec,
    LabeledDataset,
    evaluate_split,
    src_classify,
    tptsr_classify,
)
from .denoise import DenoiseSettings, denoise_image, extract_patches, psnr, read_pgm, write_pgm
from .greedy import batch_omp, mp_solve, omp_solve
from .homotopy import HomotopyPathPoint, bpdn_homotopy, lasso_homotopy, reweighted_homotopy
from .linalg import (
    SingularSystemError,
    SvdResult,
    norm_l0,
    norm_l21,
    norm_lp,
    pca_reduce,
    ridge_least_squares,
    svd,
)
from .problem import (
    ConstraintMismatchError,
    Dictionary,
    Interpolating,
    Lagrangian,
    ResidualBound,
    SolverConfig,
    Sparsity,
    SparseProblem,
    SparseSolution,
    check_optimality_l1,
    lasso_objective,
    normalize_columns,
    solution_from_alpha,
)
from .proximal import (
    dalm_solve,
    fista_solve,
    half_proximal_solve,
    half_threshold,
    ista_solve,
    palm_solve,
    soft_threshold,
    sparsa_solve,
)
from .solvers import SOLVER_NAMES, solve_by_name

__all__ = [name for name in dir() if not name.startswith("_")]
