"""Brute-force wave-train summation.

Each reflection order is added explicitly instead of using the geometric
series closed forms, so these routines serve as an independent check on
:mod:`thermalwave.wavecore`. They are scalar, pure Python and slow on purpose.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import DivergenceError
from .wavecore import CoatingStack, reflection_coefficient


@dataclass(frozen=True)
class TruncationPolicy:
    """How many reflection orders to sum.

    ``order(ratio)`` is the smaller of ``max_order`` and the first N with
    ``|ratio|**N < target_tail_bound``.
    """

    max_order: int = 10_000
    target_tail_bound: float = 1e-16

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError("max_order must be >= 1")
        if not 0 < self.target_tail_bound < 1:
            raise ValueError("target_tail_bound must lie in (0, 1)")

    def order(self, ratio: complex) -> int:
        r = abs(ratio)
        if r >= 1:
            raise DivergenceError(f"series ratio magnitude {r:.6g} >= 1")
        if r == 0:
            return 1
        needed = math.floor(math.log(self.target_tail_bound) / math.log(r)) + 1
        return max(1, min(self.max_order, needed))


DEFAULT_POLICY = TruncationPolicy()


class _ComplexAccumulator:
    """Neumaier-compensated running sum, real and imaginary parts separately."""

    __slots__ = ("re", "im", "c_re", "c_im")

    def __init__(self):
        self.re = self.im = self.c_re = self.c_im = 0.0

    @staticmethod
    def _add(s, c, x):
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        return t, c

    def add(self, z: complex):
        self.re, self.c_re = self._add(self.re, self.c_re, z.real)
        self.im, self.c_im = self._add(self.im, self.c_im, z.imag)

    @property
    def value(self) -> complex:
        return complex(self.re + self.c_re, self.im + self.c_im)


def _geometric_terms(first: complex, ratio: complex, count: int):
    term = first
    for _ in range(count):
        yield term
        term *= ratio


def one_layer_series(R0: float, R1: complex, sigma_L: complex,
                     policy: TruncationPolicy = DEFAULT_POLICY) -> complex:
    """Sum the two families of wave trains reaching the surface of one coating.

    Family a starts at the top surface, family b after the first reflection
    at the coating/substrate interface; both pick up one ``R0 R1 E`` per
    round trip with ``E = exp(-2 sigma_1 L_1)``. ``R1`` may be complex (an
    effective reflection coefficient). The source prefactor is 1.
    """
    E = cmath.exp(-2.0 * sigma_L)
    ratio = R0 * R1 * E
    N = policy.order(ratio)
    acc = _ComplexAccumulator()
    for a in _geometric_terms(1.0 + 0j, ratio, N):
        acc.add(a)
    for b in _geometric_terms(R1 * E, ratio, N):
        acc.add(b)
    return acc.value


def two_layer_gamma_series(R1: float, R2: complex, sigma_L: complex,
                           policy: TruncationPolicy = DEFAULT_POLICY) -> complex:
    """Effective reflection at interface 1 from trains trapped in layer 2.

    Direct reflection ``R1`` plus transmission down and back up
    (``T1 T1' = 1 - R1**2``) with repeated round trips inside layer 2, where
    the upward reflection is ``R1' = -R1``. ``R2`` may itself be complex.
    """
    E = cmath.exp(-2.0 * sigma_L)
    ratio = -R1 * R2 * E
    N = policy.order(ratio)
    acc = _ComplexAccumulator()
    acc.add(complex(R1))
    for t in _geometric_terms((1.0 - R1 * R1) * R2 * E, ratio, N):
        acc.add(t)
    return acc.value


def _sigma_L(layer, omega):
    mu = math.sqrt(2.0 * layer.material.diffusivity / omega)
    return complex(1.0, 1.0) * layer.thickness / mu


def recursive_truncated_stack(stack: CoatingStack, omega: float,
                              policy: TruncationPolicy = DEFAULT_POLICY) -> complex:
    """``Gamma_1`` by applying :func:`two_layer_gamma_series` bottom-up."""
    e = stack.effusivities
    gamma = complex(reflection_coefficient(e[stack.n], e[stack.n + 1]))
    for i in range(stack.n - 2, -1, -1):
        R = float(reflection_coefficient(e[i + 1], e[i + 2]))
        gamma = two_layer_gamma_series(R, gamma, _sigma_L(stack.layers[i + 1], omega), policy)
    return gamma


def surface_series(stack: CoatingStack, omega: float,
                   policy: TruncationPolicy = DEFAULT_POLICY) -> complex:
    """Normalized surface temperature summed train by train for any stack."""
    e = stack.effusivities
    R0 = float(reflection_coefficient(e[1], e[0]))
    gamma = recursive_truncated_stack(stack, omega, policy)
    return one_layer_series(R0, gamma, _sigma_L(stack.layers[0], omega), policy)


def one_layer_closed_form(R0, R1, sigma_L):
    E = cmath.exp(-2.0 * sigma_L)
    return (1.0 + R1 * E) / (1.0 - R0 * R1 * E)


def two_layer_gamma_closed_form(R1, R2, sigma_L):
    E = cmath.exp(-2.0 * sigma_L)
    return (R1 + R2 * E) / (1.0 + R1 * R2 * E)
