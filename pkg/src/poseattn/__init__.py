"""Pose-supervised spatial attention for small-image PPE classification.

The package is self-contained on numpy: a reverse-mode autodiff engine
(:mod:`poseattn.autodiff`), a small CNN with a spatial attention gate
(:mod:`poseattn.model`), keypoint-derived attention supervision
(:mod:`poseattn.supervision`), losses and training (:mod:`poseattn.training`),
classification/detection metrics (:mod:`poseattn.metrics`), a synthetic
stick-figure dataset (:mod:`poseattn.synthdata`), and a CLI with stable
on-disk formats (:mod:`poseattn.cli` and friends).
"""

from .autodiff import (Parameter, Tensor, broadcast_mul, channel_reduce, conv2d,
                       dense, gather_rows, global_avg_pool, maxpool2, relu,
                       sigmoid, stack_channels)
from .gradcheck import grad_check, standard_checks
from .metrics import (Detection, GroundTruth, average_precision,
                      classification_report, iou, mean_ap)
from .model import ClassifierModel, SamBlock, classify_crop
from .optim import adam_step
from .supervision import (PPE_TYPES, NoSupervision, PpeTypeConfig, crop_region,
                          pseudo_gt_mask)
from .synthdata import Sample, SynthConfig, generate_dataset, render_sample
from .training import (TrainConfig, TrainResult, bce_attention, bce_class,
                       joint_loss, stratified_split, train)

__version__ = "0.1.0"
