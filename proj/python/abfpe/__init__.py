"""Anchor-based fingertip position estimation.

Thin wrapper over the C++ core: anchor-grid geometry, target
encode/decode, the training loop, and the evaluation suite.
"""

from ._core import (
    FINGER_NAMES,
    anchor_grid,
    cde_curve,
    decode_predictions,
    encode_targets,
    evaluate,
    generate_synthetic,
    huber,
    iou,
    match_fingertips,
    nearest_anchor,
    poly_lr,
    precision_recall_f1,
    predict_image,
    save_oracle_checkpoint,
    train,
)

__all__ = [
    "FINGER_NAMES",
    "anchor_grid",
    "cde_curve",
    "decode_predictions",
    "encode_targets",
    "evaluate",
    "generate_synthetic",
    "huber",
    "iou",
    "match_fingertips",
    "nearest_anchor",
    "poly_lr",
    "precision_recall_f1",
    "predict_image",
    "save_oracle_checkpoint",
    "train",
]
