"""Two-step calibration: thermal properties from known samples, then thicknesses.

A batch of samples with known layer thicknesses is split in two. The first
``k1`` samples (the training set) fix the thermal properties in one joint
fit with the thicknesses frozen; the rest (the confirmation set) are then
fitted for thickness with those properties, and the squared thickness error
over the confirmation set decides whether the calibration passes.

Fitting properties and thicknesses together is hopeless: scaling every
diffusivity by c^2 and every thickness by c leaves the phases unchanged.
Freezing known thicknesses removes that freedom.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import inverse
from .errors import DomainError
from .forward import FrequencyGrid, NoiseModel, PhaseSpectrum, synthesize_measurement
from .wavecore import AIR_EFFUSIVITY, CoatingStack

DIFFUSIVITY_BOUNDS = (1e-9, 1e-3)
EFFUSIVITY_BOUNDS = (10.0, 3e4)


class DegenerateDesignWarning(UserWarning):
    """The training set cannot pin down the thermal properties."""


@dataclass(frozen=True)
class CalibrationSample:
    known_thicknesses: np.ndarray
    spectrum: PhaseSpectrum

    def __post_init__(self):
        L = np.array(self.known_thicknesses, dtype=float).reshape(-1)
        if L.size < 1 or np.any(L <= 0):
            raise DomainError("known thicknesses must be positive")
        object.__setattr__(self, "known_thicknesses", L)


@dataclass(frozen=True)
class CalibrationBatch:
    """Samples of one coating system; ``split`` is k1, the training-set size."""

    samples: tuple[CalibrationSample, ...]
    split: int | None = None
    ambient_effusivity: float = AIR_EFFUSIVITY

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        k = len(samples)
        if k < 3:
            raise DomainError("a calibration batch needs at least 3 samples")
        split = self.split if self.split is not None else math.ceil(2 * k / 3)
        if not 1 < split < k:
            raise DomainError(f"split must satisfy 1 < k1 < k = {k}, got {split}")
        object.__setattr__(self, "split", int(split))
        n = samples[0].known_thicknesses.size
        f0 = samples[0].spectrum.frequencies
        for s in samples:
            if s.known_thicknesses.size != n:
                raise DomainError("samples disagree on the number of layers")
            if not np.array_equal(s.spectrum.frequencies, f0):
                raise DomainError("samples must share one frequency grid")
        if not self.ambient_effusivity > 0:
            raise DomainError("ambient effusivity must be > 0")

    @property
    def n(self) -> int:
        return self.samples[0].known_thicknesses.size

    @property
    def training(self) -> tuple[CalibrationSample, ...]:
        return self.samples[:self.split]

    @property
    def confirmation(self) -> tuple[CalibrationSample, ...]:
        return self.samples[self.split:]

    @property
    def grid(self) -> FrequencyGrid:
        return self.samples[0].spectrum.grid


@dataclass
class PropertyEstimate:
    diffusivities: np.ndarray
    effusivities: np.ndarray  # e_1..e_{n+1}, substrate last
    objective: float
    converged: bool
    degenerate: bool
    fit: inverse.FitResult | None = None

    def stack(self, thicknesses, ambient_effusivity=AIR_EFFUSIVITY) -> CoatingStack:
        return CoatingStack.from_arrays(self.diffusivities, self.effusivities,
                                        thicknesses, ambient_effusivity)


@dataclass
class ValidationError:
    total: float  # sum of squared Euclidean norms, m^2
    per_layer_rms: np.ndarray  # m
    per_layer_max_relative: np.ndarray


@dataclass
class CalibrationReport:
    properties: PropertyEstimate
    fitted_thicknesses: list[np.ndarray]
    known_thicknesses: list[np.ndarray]
    fits_converged: list[bool]
    error: ValidationError
    threshold: float
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.error.total <= self.threshold)

    @property
    def converged(self) -> bool:
        return self.properties.converged and all(self.fits_converged)

    def to_dict(self) -> dict:
        p = self.properties
        return {
            "properties": {
                "diffusivities_m2_s": p.diffusivities.tolist(),
                "effusivities_SI": p.effusivities.tolist(),
                "step1_objective": p.objective,
                "step1_converged": p.converged,
                "degenerate_design": p.degenerate,
            },
            "confirmation": [
                {"known_m": k.tolist(), "fitted_m": f.tolist(), "converged": c}
                for k, f, c in zip(self.known_thicknesses, self.fitted_thicknesses, self.fits_converged)
            ],
            "validation_error_m2": self.error.total,
            "per_layer_rms_m": self.error.per_layer_rms.tolist(),
            "per_layer_max_relative": self.error.per_layer_max_relative.tolist(),
            "threshold_m2": self.threshold,
            "passed": self.passed,
            "converged": self.converged,
            "warnings": list(self.warnings),
        }


def design_problems(batch: CalibrationBatch) -> list[str]:
    """Reasons the training set may not identify the properties, if any."""
    issues = []
    train = batch.training
    distinct = {tuple(s.known_thicknesses) for s in train}
    if len(distinct) < 2:
        issues.append("training samples share a single thickness vector")
    unknowns = 2 * batch.n + 1
    data = len(batch.grid) * len(train)
    if data < unknowns:
        issues.append(f"{data} training phases for {unknowns} unknown properties")
    return issues


def _property_bounds(n, diffusivity_bounds, effusivity_bounds):
    lower = [diffusivity_bounds[0]] * n + [effusivity_bounds[0]] * (n + 1)
    upper = [diffusivity_bounds[1]] * n + [effusivity_bounds[1]] * (n + 1)
    return np.array(lower), np.array(upper)


def step1_estimate_properties(batch: CalibrationBatch,
                              diffusivity_bounds=DIFFUSIVITY_BOUNDS,
                              effusivity_bounds=EFFUSIVITY_BOUNDS,
                              starts=None, start_count: int | None = None,
                              seed: int = 0) -> PropertyEstimate:
    """Fit ``alpha_1..alpha_n, e_1..e_{n+1}`` to all training spectra at once."""
    issues = design_problems(batch)
    for msg in issues:
        warnings.warn(msg, DegenerateDesignWarning, stacklevel=2)
    n = batch.n
    lower, upper = _property_bounds(n, diffusivity_bounds, effusivity_bounds)
    mid = np.sqrt(lower * upper)
    templates = [
        CoatingStack.from_arrays(mid[:n], mid[n:], s.known_thicknesses, batch.ambient_effusivity)
        for s in batch.training
    ]
    problem = inverse.FitProblem(
        templates, [s.spectrum for s in batch.training], lower, upper,
        parameterization="properties", starts=starts,
        start_count=start_count, seed=seed,
    )
    fit = inverse.solve(problem)
    return PropertyEstimate(
        diffusivities=fit.params[:n].copy(),
        effusivities=fit.params[n:].copy(),
        objective=fit.objective,
        converged=fit.converged,
        degenerate=bool(issues),
        fit=fit,
    )


def default_thickness_bounds(batch: CalibrationBatch):
    """Per-layer box from one fifth of the thinnest to five times the thickest training value."""
    L = np.array([s.known_thicknesses for s in batch.training])
    return L.min(axis=0) / 5.0, L.max(axis=0) * 5.0


def step2_fit_thicknesses(batch: CalibrationBatch, properties: PropertyEstimate,
                          thickness_bounds=None, start_count: int | None = None,
                          seed: int = 0) -> list[inverse.FitResult]:
    """Fit each confirmation sample's thicknesses with the properties frozen."""
    lower, upper = thickness_bounds or default_thickness_bounds(batch)
    results = []
    for s in batch.confirmation:
        template = properties.stack(np.sqrt(np.asarray(lower) * np.asarray(upper)),
                                    batch.ambient_effusivity)
        problem = inverse.FitProblem(template, s.spectrum, lower, upper,
                                     parameterization="thicknesses",
                                     start_count=start_count, seed=seed)
        results.append(inverse.solve(problem))
    return results


def validation_error(known: Sequence, fitted: Sequence) -> ValidationError:
    """Sum of squared thickness-vector errors with per-layer breakdown."""
    if len(known) != len(fitted) or not known:
        raise DomainError("need matching, non-empty lists of known and fitted thicknesses")
    K = [np.asarray(k, dtype=float) for k in known]
    F = [np.asarray(f, dtype=float) for f in fitted]
    if any(k.shape != f.shape for k, f in zip(K, F)) or len({k.shape for k in K}) != 1:
        raise DomainError("thickness vectors differ in length")
    K, F = np.array(K), np.array(F)
    diff = F - K
    total = math.fsum(float(d @ d) for d in diff)
    return ValidationError(
        total=total,
        per_layer_rms=np.sqrt(np.mean(diff ** 2, axis=0)),
        per_layer_max_relative=np.max(np.abs(diff) / K, axis=0),
    )


def calibrate(batch: CalibrationBatch, threshold: float, **options) -> CalibrationReport:
    """Run both steps and score the confirmation set against ``threshold`` (m^2).

    ``options`` may hold ``diffusivity_bounds``, ``effusivity_bounds``,
    ``thickness_bounds``, ``start_count`` and ``seed``.
    """
    if not threshold >= 0:
        raise DomainError("threshold must be >= 0")
    step1_opts = {k: options[k] for k in ("diffusivity_bounds", "effusivity_bounds", "start_count", "seed")
                  if k in options}
    step2_opts = {k: options[k] for k in ("thickness_bounds", "seed") if k in options}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateDesignWarning)
        props = step1_estimate_properties(batch, **step1_opts)
    for w in caught:
        warnings.warn(w.message, w.category, stacklevel=2)
    fits = step2_fit_thicknesses(batch, props, **step2_opts)
    known = [s.known_thicknesses for s in batch.confirmation]
    fitted = [f.params for f in fits]
    return CalibrationReport(
        properties=props,
        fitted_thicknesses=fitted,
        known_thicknesses=known,
        fits_converged=[f.converged for f in fits],
        error=validation_error(known, fitted),
        threshold=float(threshold),
        warnings=[str(w.message) for w in caught],
    )


def synthetic_batch(properties_stack: CoatingStack, thickness_sets: Sequence[Sequence[float]],
                    grid: FrequencyGrid, noise: NoiseModel = NoiseModel(),
                    split: int | None = None) -> CalibrationBatch:
    """Batch generated from one coating system at several thickness vectors.

    Sample ``j`` draws its noise from stream ``j`` of ``noise``.
    """
    samples = []
    for j, L in enumerate(thickness_sets):
        spec = synthesize_measurement(properties_stack.with_thicknesses(L), grid, noise, stream=j)
        samples.append(CalibrationSample(np.asarray(L, dtype=float), spec))
    return CalibrationBatch(tuple(samples), split, properties_stack.ambient_effusivity)
