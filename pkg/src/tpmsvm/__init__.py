"""Twin parametric-margin support vector machines.

Binary and one-versus-all multiclass classifiers with one hyperplane per
class, linear or kernel-induced, trained either deterministically (box-and-
simplex QP duals) or robustly against bounded-by-norm perturbations of the
samples (second-order cone programs).  Includes a benchmark harness with
stratified splitting, unit-interval scaling, grid search and repeated-run
reporting.
"""

from .errors import (
    ConicSolveError,
    DataWarning,
    DegenerateClassifier,
    HarnessError,
    IndefiniteKernel,
    InvalidHyperparams,
    InvalidInput,
    IoError,
    NumericsWarning,
    ParseError,
    SplitError,
    TpmsvmError,
    TrainingWarning,
    UnsupportedRadiusMapping,
)
from .kernels import KernelSpec, eval_kernel, feature_radius, gram
from .qp import QpProblem, QpSolution, interior_index_set, solve_box_simplex_qp
from .conic import ConeBlock, ConicProgram, ProgramBuilder, dump_program, encode_norm_epigraph
from .socp import ConicSolution, solve_socp
from .trainer import (
    BinaryModelPair,
    Dataset,
    Hyperparams,
    KernelClassModel,
    LinearClassModel,
    MulticlassModel,
    UncertaintySpec,
    load_model,
    save_model,
    train_binary,
    train_kernel_class,
    train_linear_class,
    train_multiclass,
    train_robust_kernel_class,
    train_robust_linear_class,
)
from .predict import (
    classify_argmax,
    classify_argmin,
    classify_binary,
    distance_vector,
    signed_distance,
)
from .data import (
    RawTable,
    ScalingParams,
    SplitPlan,
    load_csv,
    scale_unit_interval,
    stratified_split,
)

__version__ = "0.1.0"
