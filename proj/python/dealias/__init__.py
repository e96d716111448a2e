"""Spatial de-aliasing lab.

Spectrograms are complex128 arrays ``[channel, bin, frame]`` and time signals
float64 arrays ``[channel, sample]``. Virtual microphones are ordered (right,
left) for the cardioid pair and (W, X, Y) for planar FOA.
"""

from ._dealias import (
    ConfigurationError,
    CorruptWeights,
    DealiasError,
    InvalidArgument,
    IoError,
    NotAWeightFile,
    NumericError,
    UndefinedMetric,
    UnsupportedConfiguration,
    aliasing_frequency,
    beamform,
    c_si_snr,
    features_from_vmics,
    istft,
    load_weights,
    phasen_loss,
    preset_config,
    read_dalw,
    render_scenes,
    run_pipeline,
    save_weights,
    stft,
    target_encoder,
    targets,
    unet_forward,
)

__all__ = [name for name in dir() if not name.startswith("_")]
