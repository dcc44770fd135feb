"""Joint cervix segmentation and preterm-birth classification toolkit."""

from .annotations import (
    CervixAnnotation,
    SegMask,
    annotation_to_mask,
    eval_cubic_bezier,
    parse_annotation,
    serialize_annotation,
)
from .losses import LossWeights, bce, dice_loss, total_loss
from .metrics import ConfusionMatrix, MetricsReport, confusion_and_rates, iou, roc_auc
from .model import BatchOutput, MultiTaskUNet, NetworkConfig, build_model, expose_activations
from .phantom import PhantomSpec, Sample, generate_dataset, generate_sample
from .preprocess import (
    AugmentationPolicy,
    SplitManifest,
    augment,
    balance_and_augment,
    detect_markers,
    prepare_image,
    split_by_patient,
)
from .inpaint import telea_inpaint
from .trainer import RunRecord, TrainConfig, evaluate, overfit_probe, train
from .explain import CamHeatmap, grad_cam, overlay

__version__ = "0.1.0"
