"""Reference automotive paint and aluminium properties for fixtures and demos.

Densities in kg/m^3, conductivities in W/(m K), specific heats in J/(kg K),
measured by photoacoustic scanning (paint) and handbook values (aluminium).
"""

from __future__ import annotations

from .wavecore import AIR_EFFUSIVITY, CoatingStack, Layer, MaterialProperties

# name: (density, conductivity, specific heat)
PAINTS = {
    "paint-1": (1331.0, 1.45, 5184.0),
    "paint-2": (1303.0, 0.74, 2557.0),
    "paint-3": (1251.0, 0.74, 1670.0),
    "paint-4": (1162.0, 0.57, 2835.0),
}
ALUMINIUM = (2700.0, 238.0, 945.0)


def material(density: float, conductivity: float, specific_heat: float) -> MaterialProperties:
    return MaterialProperties.from_conductivity(conductivity, density * specific_heat)


def reference_stack(n: int = 2, thickness: float = 50e-6,
                    ambient_effusivity: float = AIR_EFFUSIVITY) -> CoatingStack:
    """``n`` paint layers (1 <= n <= 4) of equal thickness on aluminium."""
    if not 1 <= n <= len(PAINTS):
        raise ValueError(f"reference stacks have 1..{len(PAINTS)} layers")
    layers = tuple(
        Layer(material(*props), thickness, name)
        for name, props in list(PAINTS.items())[:n]
    )
    return CoatingStack(layers, material(*ALUMINIUM).effusivity, ambient_effusivity)
