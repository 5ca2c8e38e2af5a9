"""Thermal-wave primitives for an n-layer coating on a thermally thick substrate.

All quantities are SI. Layers are indexed top to bottom; the ambient medium
(air) sits above layer 1 and the substrate below layer n. Interface
coefficients are taken in the downward direction, except at the top surface
where the reflection is from layer 1 back into layer 1 against the ambient.

The surface temperature returned here is the normalized complex amplitude,
i.e. without the time factor and without the constant -pi/4 lag of a
semi-infinite body. Pass ``excitation_lag=True`` to re-add the lag.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, SingularityError

#: Order-of-magnitude effusivity of still air, W s^0.5 / (m^2 K).
AIR_EFFUSIVITY = 6.0

EXCITATION_LAG = -math.pi / 4


def _positive(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class MaterialProperties:
    """Thermal properties of one material.

    Construct either from ``(diffusivity, effusivity)`` directly or with
    :meth:`from_conductivity`. When conductivity and heat capacity are both
    present they must reproduce the diffusivity/effusivity pair.
    """

    diffusivity: float
    effusivity: float
    conductivity: float | None = None
    heat_capacity: float | None = None

    def __post_init__(self):
        _positive("diffusivity", self.diffusivity)
        _positive("effusivity", self.effusivity)
        k, c = self.conductivity, self.heat_capacity
        if (k is None) != (c is None):
            raise DomainError("conductivity and heat_capacity must be given together")
        if k is not None:
            _positive("conductivity", k)
            _positive("heat_capacity", c)
            if not math.isclose(self.diffusivity, k / c, rel_tol=1e-12):
                raise DomainError("diffusivity inconsistent with k/c")
            if not math.isclose(self.effusivity, math.sqrt(k * c), rel_tol=1e-12):
                raise DomainError("effusivity inconsistent with sqrt(k*c)")

    @classmethod
    def from_conductivity(cls, conductivity: float, heat_capacity: float) -> "MaterialProperties":
        """Build from conductivity k [W/(m K)] and volumetric heat capacity c [J/(m^3 K)]."""
        _positive("conductivity", conductivity)
        _positive("heat_capacity", heat_capacity)
        return cls(
            diffusivity=conductivity / heat_capacity,
            effusivity=math.sqrt(conductivity * heat_capacity),
            conductivity=conductivity,
            heat_capacity=heat_capacity,
        )


@dataclass(frozen=True)
class Layer:
    material: MaterialProperties
    thickness: float
    name: str = ""

    def __post_init__(self):
        L = self.thickness
        if not math.isfinite(L) or L < 0:
            raise DomainError(f"layer thickness must be >= 0, got {L!r}")
        if L == 0:
            warnings.warn(
                f"layer {self.name or '?'} has zero thickness; adjacent interfaces are composed directly",
                stacklevel=3,
            )


@dataclass(frozen=True)
class CoatingStack:
    """Coating layers (top first) on a substrate, exposed to an ambient medium.

    The substrate is thermally thick, so only its effusivity enters.
    """

    layers: tuple[Layer, ...]
    substrate_effusivity: float
    ambient_effusivity: float = AIR_EFFUSIVITY

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) < 1:
            raise DomainError("a coating stack needs at least one layer")
        _positive("substrate_effusivity", self.substrate_effusivity)
        _positive("ambient_effusivity", self.ambient_effusivity)

    @classmethod
    def from_arrays(
        cls,
        diffusivities: Sequence[float],
        effusivities: Sequence[float],
        thicknesses: Sequence[float],
        ambient_effusivity: float = AIR_EFFUSIVITY,
        names: Sequence[str] | None = None,
    ) -> "CoatingStack":
        """Build from ``alpha_1..alpha_n``, ``e_1..e_{n+1}`` and ``L_1..L_n``.

        The last effusivity belongs to the substrate.
        """
        n = len(thicknesses)
        if len(diffusivities) != n or len(effusivities) != n + 1:
            raise DomainError(
                f"expected {n} diffusivities and {n + 1} effusivities, "
                f"got {len(diffusivities)} and {len(effusivities)}"
            )
        names = names or [""] * n
        layers = tuple(
            Layer(MaterialProperties(float(a), float(e)), float(L), nm)
            for a, e, L, nm in zip(diffusivities, effusivities, thicknesses, names)
        )
        return cls(layers, float(effusivities[-1]), float(ambient_effusivity))

    @property
    def n(self) -> int:
        return len(self.layers)

    @property
    def thicknesses(self) -> np.ndarray:
        return np.array([layer.thickness for layer in self.layers])

    @property
    def diffusivities(self) -> np.ndarray:
        return np.array([layer.material.diffusivity for layer in self.layers])

    @property
    def effusivities(self) -> np.ndarray:
        """``e_0, e_1, ..., e_{n+1}``: ambient, each layer, substrate."""
        inner = [layer.material.effusivity for layer in self.layers]
        return np.array([self.ambient_effusivity, *inner, self.substrate_effusivity])

    def with_thicknesses(self, thicknesses: Sequence[float]) -> "CoatingStack":
        if len(thicknesses) != self.n:
            raise DomainError(f"expected {self.n} thicknesses, got {len(thicknesses)}")
        layers = tuple(
            Layer(layer.material, float(L), layer.name)
            for layer, L in zip(self.layers, thicknesses)
        )
        return CoatingStack(layers, self.substrate_effusivity, self.ambient_effusivity)

    def scaled(self, factor: float, include_ambient: bool = True) -> "CoatingStack":
        """Apply ``alpha -> f^2 alpha``, ``e -> f^2 e``, ``L -> f L``.

        With ``include_ambient`` the ambient effusivity is scaled as well so
        that every interface contrast is preserved.
        """
        _positive("factor", factor)
        f2 = factor * factor
        e = self.effusivities * f2
        if not include_ambient:
            e[0] = self.ambient_effusivity
        names = [layer.name for layer in self.layers]
        return CoatingStack.from_arrays(
            self.diffusivities * f2, e[1:], self.thicknesses * factor, e[0], names
        )


@dataclass(frozen=True)
class ComplexWaveNumber:
    sigma: complex
    diffusion_length: float


@dataclass(frozen=True)
class InterfaceCoefficients:
    refraction_index: float
    reflection: float
    transmission: float


@dataclass(frozen=True)
class SurfaceResponse:
    """``value == amplitude * exp(1j * phase)``; arrays when evaluated on a grid."""

    value: complex | np.ndarray
    amplitude: float | np.ndarray
    phase: float | np.ndarray = field(default=0.0)


def wrap_phase(phase):
    """Map angles into (-pi, pi]. Values already inside are returned untouched."""
    phase = np.asarray(phase, dtype=float)
    outside = (phase > math.pi) | (phase <= -math.pi)
    if np.any(outside):
        phase = np.where(outside, math.pi - np.mod(math.pi - phase, 2 * math.pi), phase)
    return phase if phase.ndim else float(phase)


def diffusion_length(alpha, omega):
    """Thermal diffusion length ``sqrt(2 alpha / omega)`` in metres."""
    _positive("diffusivity", alpha)
    _positive("angular frequency", omega)
    return np.sqrt(2.0 * np.asarray(alpha, dtype=float) / np.asarray(omega, dtype=float))


def wave_number(alpha: float, omega: float) -> ComplexWaveNumber:
    mu = float(diffusion_length(alpha, omega))
    return ComplexWaveNumber(sigma=complex(1.0, 1.0) / mu, diffusion_length=mu)


def reflection_coefficient(e_from, e_to):
    """Downward reflection coefficient ``(1 - b) / (1 + b)`` with ``b = e_to / e_from``.

    Written as ``(e_from - e_to) / (e_from + e_to)`` so that swapping the
    arguments negates the result exactly. Broadcasts over arrays.
    """
    e_from = np.asarray(e_from, dtype=float)
    e_to = np.asarray(e_to, dtype=float)
    return (e_from - e_to) / (e_from + e_to)


def interface_coefficients(e_from: float, e_to: float) -> InterfaceCoefficients:
    _positive("effusivity", e_from)
    _positive("effusivity", e_to)
    R = float(reflection_coefficient(e_from, e_to))
    # 2 / (1 + b) rather than 1 + R, which cancels badly as R -> -1
    T = 2.0 * e_from / (e_from + e_to)
    return InterfaceCoefficients(refraction_index=e_to / e_from, reflection=R, transmission=T)


def _propagators(alpha, thick, omega):
    """``exp(-2 sigma_i L_i)`` for every layer, shape (n, m)."""
    mu = np.sqrt(2.0 * alpha[:, None] / omega[None, :])
    x = -2.0 * thick[:, None] / mu
    return np.exp(x * (1.0 + 1.0j))


def _gamma_and_top(alpha, effusivity, thick, omega):
    """Return ``Gamma_1(omega)`` and the top-layer propagator ``exp(-2 sigma_1 L_1)``."""
    R = reflection_coefficient(effusivity[1:-1], effusivity[2:])
    E = _propagators(alpha, thick, omega)
    gamma = np.full(omega.shape, R[-1], dtype=complex)
    for i in range(len(thick) - 2, -1, -1):
        ge = gamma * E[i + 1]
        gamma = (R[i] + ge) / (1.0 + R[i] * ge)
    return gamma, E[0]


def surface_ratio(alpha, effusivity, thick, omega):
    """Normalized complex surface temperature for raw parameter arrays.

    ``alpha`` holds ``alpha_1..alpha_n``, ``effusivity`` holds
    ``e_0..e_{n+1}``, ``thick`` holds ``L_1..L_n``; ``omega`` is a 1-D array.
    No validation; this is the inner loop of the fitting code.
    """
    gamma, E1 = _gamma_and_top(alpha, effusivity, thick, omega)
    R0 = reflection_coefficient(effusivity[1], effusivity[0])
    ge = gamma * E1
    den = 1.0 - R0 * ge
    if np.any(np.abs(den) < 1e-300):
        raise SingularityError("surface temperature denominator vanished")
    return (1.0 + ge) / den


def surface_phase(alpha, effusivity, thick, omega):
    return wrap_phase(np.angle(surface_ratio(alpha, effusivity, thick, omega)))


def _omega_array(omega):
    _positive("angular frequency", omega)
    arr = np.asarray(omega, dtype=float)
    return arr, arr.ndim == 0


def effective_reflection(stack: CoatingStack, omega):
    """Effective reflection coefficient ``Gamma_1`` seen from layer 1.

    Built bottom-up: ``Gamma_n = R_n`` and each higher interface folds in the
    round trip through the layer beneath it.
    """
    w, scalar = _omega_array(omega)
    gamma, _ = _gamma_and_top(
        stack.diffusivities, stack.effusivities, stack.thicknesses, np.atleast_1d(w)
    )
    return complex(gamma[0]) if scalar else gamma.reshape(w.shape)


def surface_response(
    stack: CoatingStack,
    omega,
    source_scale: float = 1.0,
    excitation_lag: bool = False,
) -> SurfaceResponse:
    """Complex surface temperature amplitude, its magnitude and its phase.

    ``source_scale`` is the positive real prefactor of the incident wave; it
    scales the amplitude and never touches the phase.
    """
    _positive("source_scale", source_scale)
    w, scalar = _omega_array(omega)
    ratio = surface_ratio(
        stack.diffusivities, stack.effusivities, stack.thicknesses, np.atleast_1d(w)
    )
    phase = wrap_phase(np.angle(ratio))
    if excitation_lag:
        phase = wrap_phase(np.asarray(phase) + EXCITATION_LAG)
        ratio = ratio * np.exp(1j * EXCITATION_LAG)
    value = source_scale * ratio
    amplitude = source_scale * np.abs(ratio)
    if scalar:
        return SurfaceResponse(complex(value[0]), float(amplitude[0]), float(np.atleast_1d(phase)[0]))
    return SurfaceResponse(value.reshape(w.shape), amplitude.reshape(w.shape), np.reshape(phase, w.shape))


def one_layer_phase_closed_form(R0, R1, thickness, mu):
    """Phase of the single-coating surface temperature in polar form.

    ``x = -2 L / mu``; the quadrant is resolved with ``arctan2``.
    """
    x = -2.0 * np.asarray(thickness, dtype=float) / np.asarray(mu, dtype=float)
    ex = np.exp(x)
    num = (1.0 + R0) * (R1 * ex * np.sin(x))
    den = 1.0 + (1.0 - R0) * R1 * ex * np.cos(x) - R1 * R1 * R0 * np.exp(2.0 * x)
    return np.arctan2(num, den)


def one_layer_amplitude_closed_form(R0, R1, thickness, mu, source_scale=1.0):
    """Magnitude of the single-coating surface temperature in polar form."""
    x = -2.0 * np.asarray(thickness, dtype=float) / np.asarray(mu, dtype=float)
    ex = np.exp(x)
    re = 1.0 + R1 * (1.0 - R0) * ex * np.cos(x) - R1 * R1 * R0 * np.exp(2.0 * x)
    im = R1 * (1.0 + R0) * ex * np.sin(x)
    den = (1.0 - R0 * R1 * ex * np.cos(x)) ** 2 + (R0 * R1 * ex * np.sin(x)) ** 2
    return source_scale * np.sqrt(re * re + im * im) / den
