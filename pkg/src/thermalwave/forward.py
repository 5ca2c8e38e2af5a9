"""Phase spectra of a coating stack over a frequency grid, noiseless or synthetic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import wavecore
from .errors import DomainError
from .wavecore import CoatingStack


@dataclass(frozen=True)
class FrequencyGrid:
    """Modulation frequencies in Hz, strictly positive and strictly increasing."""

    frequencies: np.ndarray

    def __post_init__(self):
        f = np.array(self.frequencies, dtype=float).reshape(-1)
        if f.size < 1:
            raise DomainError("frequency grid is empty")
        if not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise DomainError("frequencies must be finite and > 0")
        if np.any(np.diff(f) <= 0):
            raise DomainError("frequencies must be strictly increasing")
        f.setflags(write=False)
        object.__setattr__(self, "frequencies", f)

    @classmethod
    def logspace(cls, f_min: float, f_max: float, count: int) -> "FrequencyGrid":
        if count == 1:
            return cls(np.array([f_min]))
        return cls(np.geomspace(f_min, f_max, count))

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * math.pi * self.frequencies

    def __len__(self):
        return self.frequencies.size


@dataclass(frozen=True)
class PhaseSpectrum:
    grid: FrequencyGrid
    phases: np.ndarray
    amplitudes: np.ndarray | None = None

    def __post_init__(self):
        p = np.array(self.phases, dtype=float).reshape(-1)
        if p.size != len(self.grid):
            raise DomainError(f"{p.size} phases for a grid of {len(self.grid)} frequencies")
        if np.any(p > math.pi) or np.any(p <= -math.pi):
            raise DomainError("phases must lie in (-pi, pi]")
        p.setflags(write=False)
        object.__setattr__(self, "phases", p)
        if self.amplitudes is not None:
            a = np.array(self.amplitudes, dtype=float).reshape(-1)
            if a.size != p.size:
                raise DomainError("amplitude and phase channels differ in length")
            a.setflags(write=False)
            object.__setattr__(self, "amplitudes", a)

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies


@dataclass(frozen=True)
class NoiseModel:
    """Additive phase noise. ``sigma`` is in radians."""

    kind: str = "none"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise DomainError("noise sigma must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    @classmethod
    def gaussian_deg(cls, sigma_deg: float, seed: int = 0) -> "NoiseModel":
        return cls("gaussian", math.radians(sigma_deg), seed)

    def generator(self, stream: int = 0) -> np.random.Generator:
        # Philox is counter-based: (seed, stream) keys give independent,
        # order-free streams for parallel generation.
        return np.random.Generator(np.random.Philox(key=[int(self.seed), int(stream)]))


def forward_phases(stack: CoatingStack, grid: FrequencyGrid, excitation_lag: bool = False) -> PhaseSpectrum:
    """Phase angle of the surface temperature at every grid frequency."""
    resp = wavecore.surface_response(stack, grid.omega, excitation_lag=excitation_lag)
    return PhaseSpectrum(grid, resp.phase, resp.amplitude)


def synthesize_measurement(stack: CoatingStack, grid: FrequencyGrid,
                           noise: NoiseModel = NoiseModel(), stream: int = 0,
                           excitation_lag: bool = False) -> PhaseSpectrum:
    """Noiseless forward phases plus noise drawn from ``noise``.

    The same ``(noise.seed, stream)`` always yields the same output.
    """
    clean = forward_phases(stack, grid, excitation_lag)
    if noise.kind == "none" or noise.sigma == 0:
        return clean
    eps = noise.generator(stream).normal(0.0, noise.sigma, len(grid))
    return PhaseSpectrum(grid, wavecore.wrap_phase(clean.phases + eps), clean.amplitudes)
