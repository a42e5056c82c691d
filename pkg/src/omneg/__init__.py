"""Entanglement between a mechanical oscillator and its output light."""

__version__ = "0.1.0"

from .covariance import GaussianState, ModeGrid, discretized_state
from .entangle import (
    closed_form_white_threshold,
    conditional_state_test,
    find_threshold,
    indicator,
    log_negativity,
    no_sensing_criterion,
    symplectic_eigenvalues,
)
from .ratfact import Rational, spectral_factorize, wiener_hopf_solve
from .spectra import NoiseModel, OscillatorParams, RationalSpectrum, WhiteNoiseParams, white_noise_model
from .squeeze import SqueezeTransform, fd_squeeze_transform, filter_cavity_params

__all__ = [
    "GaussianState",
    "ModeGrid",
    "NoiseModel",
    "OscillatorParams",
    "Rational",
    "RationalSpectrum",
    "SqueezeTransform",
    "WhiteNoiseParams",
    "closed_form_white_threshold",
    "conditional_state_test",
    "discretized_state",
    "fd_squeeze_transform",
    "filter_cavity_params",
    "find_threshold",
    "indicator",
    "log_negativity",
    "no_sensing_criterion",
    "spectral_factorize",
    "symplectic_eigenvalues",
    "white_noise_model",
    "wiener_hopf_solve",
]
