"""Alignment kernels for variable-length multivariate time series."""

from .alignments import (
    Alignment,
    AlignmentBudget,
    BudgetExceededError,
    DEFAULT_BUDGET,
    InvalidAlignmentError,
    count_alignments,
    enumerate_alignments,
    is_valid,
    product_weight,
    score,
)
from .dtw import DtwResult, dtw_best_path, kdtw1, kdtw2, resolve_mean_mode
from .ga import (
    GaResult,
    ga_kernel,
    ga_kernel_bruteforce,
    ga_kernel_linear_reference,
    ga_log_matrix,
    softmax_of_scores,
)
from .gram import (
    CrossGram,
    EigConvergenceError,
    GramMatrix,
    KernelSelector,
    NonRepresentableError,
    PsdReport,
    build_cross_gram,
    build_gram,
    cross_from_gram,
    jacobi_eigenvalues,
    load_gram,
    min_eigenvalue,
    psd_check,
    regularize,
    save_gram,
    submatrix,
    with_sigma,
)
from .ground import (
    CpdScoreSpec,
    GroundKernelSpec,
    eval_cpd,
    eval_kernel,
    eval_log,
    ratio_transform_check,
)
from .svm import (
    CvConfig,
    CvReport,
    ExperimentResult,
    OvaModel,
    SmoConvergenceError,
    SvmBinaryModel,
    cross_validate,
    decision_function,
    default_sigma_grid,
    grid_select,
    kkt_residual,
    predict,
    run_experiment,
    train_binary,
    train_ova,
)
from .timeseries import (
    DatasetError,
    DEFAULT_SYNTH,
    LabeledDataset,
    LabeledItem,
    SynthSpec,
    TimeSeries,
    generate_synthetic,
    load_dataset,
    split_train_test,
    write_dataset,
)

__version__ = "0.1.0"
