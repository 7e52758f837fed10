"""Simulation and training toolkit for amplitude-only Fourier-plane optical
convolution on a pair of digital micromirror devices."""
from .field_math import ComplexField, dft2, idft2, shift_layout
from .optics import SystemConfig, ideal_config, nominal_config, propagate_4f
from .fourier_cnn import FourierCNN, TrainConfig

__version__ = "0.1.0"
