"""Global-aggregation / local-distribution attention numerics.

Thin numpy-facing surface over the C++ core: seeded tensors, convolution,
GA heads, the composed GALD head, local attention, segmentation metrics,
the closed-form MAC model, and the toy training pipeline.
"""

from ._core import (
    boundary_fscore,
    conv2d,
    flop_model,
    ga_forward,
    gald_forward,
    load_tensor,
    local_attention,
    miou,
    save_tensor,
    seeded_uniform,
    train_toy,
)

__all__ = [
    "boundary_fscore",
    "conv2d",
    "flop_model",
    "ga_forward",
    "gald_forward",
    "load_tensor",
    "local_attention",
    "miou",
    "save_tensor",
    "seeded_uniform",
    "train_toy",
]
