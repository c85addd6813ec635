"""Python bindings for the mgca library."""

from ._mgca import (
    ConfigError,
    DataError,
    IoError,
    LossConfig,
    NumericError,
    Session,
    ShapeError,
    gen_synthetic,
    gradcheck,
    loss_object,
    loss_pixel,
    loss_region,
    loss_total,
    mask_cardinality,
    mine_pixel_pairs,
    miou,
    object_representation,
    object_representations,
    sample_meta_points,
    semi_hard_rank,
    similarity,
    softmax,
    topk_mask,
    window_offsets,
)

__all__ = [
    "ConfigError",
    "DataError",
    "IoError",
    "LossConfig",
    "NumericError",
    "Session",
    "ShapeError",
    "gen_synthetic",
    "gradcheck",
    "loss_object",
    "loss_pixel",
    "loss_region",
    "loss_total",
    "mask_cardinality",
    "mine_pixel_pairs",
    "miou",
    "object_representation",
    "object_representations",
    "sample_meta_points",
    "semi_hard_rank",
    "similarity",
    "softmax",
    "topk_mask",
    "window_offsets",
]
