"""Thermal-wave interference in multi-layer coatings and thickness estimation
from lock-in thermography phase spectra."""

from .errors import DivergenceError, DomainError, InputError, SingularityError
from .forward import FrequencyGrid, NoiseModel, PhaseSpectrum, forward_phases, synthesize_measurement
from .inverse import FitProblem, FitResult, jacobian, residuals, solve
from .wavecore import (
    CoatingStack,
    Layer,
    MaterialProperties,
    diffusion_length,
    effective_reflection,
    interface_coefficients,
    surface_response,
    wave_number,
)

__version__ = "0.1.0"
