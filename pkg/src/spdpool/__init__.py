"""Second-order pooling of per-frame feature trajectories.

Sequences become symmetric positive (semi-)definite descriptors via
cross-product or RBF-similarity pooling, are compared with log-Euclidean or
log-det geometry, classified with kernel SVMs, and verified end-to-end with
gradient-checked training losses. A companion image module summarizes raw
frames into multi-channel motion images.
"""

from .trajectory import (
    Dataset,
    FeatureTrajectory,
    SequenceRecord,
    TrajectoryKind,
    WeightProfile,
    apply_weights,
    average_pool,
    load_dataset,
    load_labels,
    load_trajectory,
    max_pool,
    normalize_scores,
    save_labels,
    save_trajectory,
    synth_coactivation,
)
from .pooling import (
    BkcpConfig,
    BlockDescriptor,
    RbfParams,
    SpdDescriptor,
    bkcp,
    kcp,
    load_descriptor,
    save_descriptor,
    tcp,
)
from .spd import (
    SteinBandwidth,
    SymEig,
    combine_kernels,
    gram,
    jbld,
    le_dist,
    le_kernel,
    load_gram,
    log_vectorize,
    regularize,
    save_gram,
    spd_log,
    stein_kernel,
    sym_eig,
    validate_stein_bandwidth,
)
from .learning import (
    GradCheckReport,
    LabelMatrix,
    LinearMap,
    TrainResult,
    cp_scaled,
    encode_label,
    fd_gradient,
    frob_loss,
    frob_loss_grad,
    jbld_loss,
    jbld_loss_grad,
    load_linear_map,
    save_linear_map,
    train_linear,
)
# The motion-stack op itself lives at spdpool.smaid.smaid so the submodule
# name stays importable.
from .smaid import (
    BoundingBox,
    GrayFrame,
    SmaidConfig,
    SmaidImage,
    localize,
    maid,
    read_pnm,
    to_gray,
    write_pnm,
    write_smaid,
)
from .classify import (
    EvalReport,
    KernelSpec,
    SvmModel,
    average_precision,
    evaluate,
    fuse_concat,
    kfold,
    load_model,
    max_kkt_violation,
    save_model,
    svm_predict,
    svm_train,
)

__version__ = "0.1.0"
