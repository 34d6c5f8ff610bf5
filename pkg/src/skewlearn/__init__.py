"""skewlearn: sparse cost-sensitive class-imbalance learning and
point-anomaly detection.

Online learners (passive-aggressive family and an accelerated
stochastic proximal learner), distributed L1-regularized batch trainers
over a simulated message-passing runtime, a one-class kernel detector,
and the Gmean-centric evaluation pipeline.
"""

from .data import (
    DatasetStats,
    LabeledInstance,
    LibsvmParseError,
    RowMatrix,
    SparseVector,
    apply_normalizer,
    fit_normalizer,
    format_libsvm_line,
    load_libsvm_file,
    loads_libsvm,
    normalize_instances,
    parse_libsvm_line,
    stream_minibatches,
)
from .distributed import (
    AllreduceBus,
    CilsdRun,
    ConsensusState,
    DscilRun,
    WorkerPartition,
    cilsd_train,
    dscil_train,
    partition_rows,
    training_time_report,
)
from .losses import (
    ClassState,
    CostPair,
    WeightedSmoothHinge,
    batch_objective,
    hinge_cs,
    make_smooth_problem,
    rho,
    smooth_hinge_cs,
    smooth_hinge_grad,
)
from .metrics import (
    ConfusionCounts,
    MetricTrace,
    accuracy,
    fmeasure,
    gmean,
    mistake_rate,
    sensitivity,
    specificity,
    sum_metric,
    update_confusion,
)
from .online import (
    AspgdModel,
    PaModel,
    acceleration_blend,
    make_learner,
    pa_tau,
    predict,
    run_stream,
)
from .solvers import (
    CoordState,
    DivergenceError,
    SmoothProblem,
    SolveReport,
    SolverStallError,
    critical_lambda,
    fista_minimize,
    lambda_max,
    lbfgs_minimize,
    rcd_minimize,
    soft_threshold,
)
from .svdd import (
    DetectionResult,
    SvddModel,
    rbf_kernel,
    svdd_detect,
    svdd_fit,
    svdd_per_feature,
)

__version__ = "0.1.0"
