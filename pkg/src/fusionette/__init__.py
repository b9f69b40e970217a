"""fusionette: desk-scale multimodal crisis-post classification.

Guided cross-attention gating fused with differential attention over
frozen image/text embeddings, on a tiny float64 autodiff engine, with a
deterministic training/evaluation harness and an ablation runner.
"""

__version__ = "0.1.0"

from .autodiff import (
    Tape,
    Tensor,
    add,
    backward,
    concat_last,
    cross_entropy,
    matmul,
    mul,
    narrow_last,
    relu,
    reshape,
    scale,
    sgd_step,
    sigmoid,
    softmax_rows,
    sub,
    sum_all,
    transpose,
)
from .attention import DiffAttnParams, TokenView, cross_attn, diff_attn, reshape_tokens, self_attn
from .data import (
    LABEL_MAPS,
    TABLE1,
    CountReport,
    DatasetSplit,
    EmbeddingRecord,
    LabelMap,
    RawRow,
    Table1Row,
    apply_label_map,
    gen_synthetic,
    load_dataset_dir,
    read_split,
    synthetic_directions,
    validate_counts,
    write_split,
)
from .errors import (
    ChecksumError,
    DataError,
    DimensionError,
    FormatError,
    TrainingError,
    TruncationError,
)
from .fusion import (
    VARIANT_NAMES,
    FusionActivations,
    GuidedCAParams,
    VariantSpec,
    forward_batch,
    forward_with_activations,
    guided_ca_fuse,
    guided_gate,
    model_forward,
)
from .metrics import (
    MetricsReport,
    average_reports,
    confusion_matrix,
    report_from_confusion,
    report_from_labels,
)
from .model import (
    ClassifierParams,
    Model,
    build_variant,
    init_model,
    load_model,
    predict,
    save_model,
)
from .train import (
    EarlyStopper,
    MultiRunResult,
    TrainConfig,
    TrainHistory,
    evaluate,
    multi_run,
    train,
)
