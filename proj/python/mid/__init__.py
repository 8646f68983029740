"""Iterative denoising framework: Python interface to the C++ core."""

from _mid import (  # noqa: F401
    Checkpoint,
    ConfigError,
    DataError,
    NumericError,
    denoise,
    denoise_points,
    estimate_step,
    gen_scene,
    gen_signal_pair,
    gen_texture_image,
    load_checkpoint,
    mix_at_snr,
    noise_to,
    psnr,
    read_tensor,
    recall_auc,
    rmse,
    save_checkpoint,
    ssim,
    train,
    write_tensor,
)

__all__ = [
    "Checkpoint",
    "ConfigError",
    "DataError",
    "NumericError",
    "denoise",
    "denoise_points",
    "estimate_step",
    "gen_scene",
    "gen_signal_pair",
    "gen_texture_image",
    "load_checkpoint",
    "mix_at_snr",
    "noise_to",
    "psnr",
    "read_tensor",
    "recall_auc",
    "rmse",
    "save_checkpoint",
    "ssim",
    "train",
    "write_tensor",
]
