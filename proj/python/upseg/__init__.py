"""U-Net segmentation with extra up-scaling stages for low-resolution inputs."""

from ._upseg import (
    ConfigError,
    FormatError,
    MismatchError,
    Model,
    ShapeError,
    UpsegError,
    analytic_upscale_params,
    cross_entropy,
    dice_jaccard,
    evaluate,
    generate,
    multiscale_loss,
    read_tensor_file,
    run_cli,
    upscale_prediction,
    write_tensor_file,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "MismatchError",
    "Model",
    "ShapeError",
    "UpsegError",
    "analytic_upscale_params",
    "cross_entropy",
    "dice_jaccard",
    "evaluate",
    "generate",
    "multiscale_loss",
    "read_tensor_file",
    "run_cli",
    "upscale_prediction",
    "write_tensor_file",
]
