"""Reading and writing stack configs, phase CSV files and batch manifests.

Configs and manifests are YAML. Every key carries its unit suffix
(``thickness_m``, ``diffusivity_m2_s``, ``effusivity_SI``, ...); there are
no implicit units. Validation errors point at the offending line and column.

Stack config::

    ambient:                      # optional, defaults to air
      effusivity_SI: 6.0
    layers:
      - name: primer
        thickness_m: 50.0e-6      # "?" marks an unknown for `fit`
        diffusivity_m2_s: 2.1e-7
        effusivity_SI: 3163.0
      - name: base
        thickness_m: 40.0e-6
        conductivity_W_mK: 0.74
        volumetric_heat_capacity_J_m3K: 3.33e6
    substrate:
      effusivity_SI: 24640.0
    frequencies_hz: [0.5, 1.0, 2.0]   # or {start: 0.5, stop: 50, count: 10}
    noise:                        # optional, used by `synth`
      sigma_deg: 0.1
      seed: 42

Phase CSV: header ``frequency_hz,phase_rad[,amplitude]``, one row per
frequency, ``#`` comment lines allowed, floats written with 17 significant
digits so that a write/read cycle reproduces every value bit for bit.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .calibration import CalibrationBatch, CalibrationSample
from .errors import DomainError, InputError
from .forward import FrequencyGrid, NoiseModel, PhaseSpectrum
from .wavecore import AIR_EFFUSIVITY, CoatingStack, Layer, MaterialProperties

UNKNOWN = "?"
PLACEHOLDER_THICKNESS = 1e-4


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 insists on a dot in floats; accept 1e-6 as well.
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                   |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                   |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                   |[-+]?\.(?:inf|Inf|INF)
                   |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


class _Node:
    """A loaded YAML value together with where it came from."""

    __slots__ = ("value", "line", "column", "path")

    def __init__(self, value, mark, path):
        self.value = value
        self.line = mark.line + 1
        self.column = mark.column + 1
        self.path = path

    def error(self, message):
        return InputError(message, self.path, self.line, self.column)


def _wrap(loader, node, path):
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = loader.construct_object(k, deep=True)
            out[key] = _wrap(loader, v, path)
        return _Node(out, node.start_mark, path)
    if isinstance(node, yaml.SequenceNode):
        return _Node([_wrap(loader, v, path) for v in node.value], node.start_mark, path)
    return _Node(loader.construct_object(node, deep=True), node.start_mark, path)


def _load_yaml(path) -> _Node:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror}", path) from None
    loader = _Loader(text)
    try:
        root = loader.get_single_node()
        if root is None:
            raise InputError("empty document", path, 1, 1)
        return _wrap(loader, root, path)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise InputError(exc.problem or str(exc), path,
                         mark.line + 1 if mark else None,
                         mark.column + 1 if mark else None) from None
    finally:
        loader.dispose()


def _mapping(node: _Node, what: str) -> dict:
    if not isinstance(node.value, dict):
        raise node.error(f"{what} must be a mapping")
    return node.value


def _check_keys(node: _Node, allowed, what):
    for key in _mapping(node, what):
        if key not in allowed:
            raise node.value[key].error(f"unknown key {key!r} in {what}; expected one of {sorted(allowed)}")


def _required(node: _Node, key: str, what: str) -> _Node:
    m = _mapping(node, what)
    if key not in m:
        raise node.error(f"{what} is missing required key {key!r}")
    return m[key]


def _number(node: _Node, what: str, positive=True) -> float:
    v = node.value
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise node.error(f"{what} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v) or (positive and v <= 0):
        raise node.error(f"{what} must be a finite {'positive ' if positive else ''}number, got {v!r}")
    return v


def _integer(node: _Node, what: str, minimum=None) -> int:
    v = node.value
    if isinstance(v, bool) or not isinstance(v, int):
        raise node.error(f"{what} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise node.error(f"{what} must be >= {minimum}")
    return v


def _number_list(node: _Node, what: str) -> list[float]:
    if not isinstance(node.value, list):
        raise node.error(f"{what} must be a list")
    return [_number(item, f"{what} entry") for item in node.value]


@dataclass(frozen=True)
class StackConfig:
    stack: CoatingStack
    grid: FrequencyGrid | None
    noise: NoiseModel | None
    unknown: tuple[int, ...]  # 0-based indices of layers with thickness "?"


def _parse_grid(node: _Node) -> FrequencyGrid:
    if isinstance(node.value, dict):
        _check_keys(node, {"start", "stop", "count", "spacing"}, "frequencies_hz")
        start = _number(_required(node, "start", "frequencies_hz"), "start")
        stop = _number(_required(node, "stop", "frequencies_hz"), "stop")
        count = _integer(_required(node, "count", "frequencies_hz"), "count", 1)
        spacing = node.value["spacing"].value if "spacing" in node.value else "log"
        if spacing not in ("log", "linear"):
            raise node.value["spacing"].error("spacing must be 'log' or 'linear'")
        f = np.geomspace(start, stop, count) if spacing == "log" else np.linspace(start, stop, count)
    else:
        f = _number_list(node, "frequencies_hz")
    try:
        return FrequencyGrid(np.asarray(f))
    except DomainError as exc:
        raise node.error(str(exc)) from None


def _parse_layer(node: _Node, index: int, allow_unknown: bool):
    what = f"layer {index + 1}"
    direct = {"diffusivity_m2_s", "effusivity_SI"}
    derived = {"conductivity_W_mK", "volumetric_heat_capacity_J_m3K"}
    _check_keys(node, {"name", "thickness_m"} | direct | derived, what)
    m = node.value
    name = str(m["name"].value) if "name" in m else f"layer-{index + 1}"
    t_node = _required(node, "thickness_m", what)
    unknown = t_node.value == UNKNOWN
    if unknown and not allow_unknown:
        raise t_node.error(f"{what}: unknown thickness '?' is only allowed for fit templates")
    thickness = PLACEHOLDER_THICKNESS if unknown else _number(t_node, f"{what} thickness_m")
    has_direct, has_derived = direct & m.keys(), derived & m.keys()
    try:
        if has_direct and has_derived:
            raise node.error(f"{what}: give either diffusivity/effusivity or conductivity/heat capacity, not both")
        if has_direct == direct:
            mat = MaterialProperties(_number(m["diffusivity_m2_s"], "diffusivity_m2_s"),
                                     _number(m["effusivity_SI"], "effusivity_SI"))
        elif has_derived == derived:
            mat = MaterialProperties.from_conductivity(
                _number(m["conductivity_W_mK"], "conductivity_W_mK"),
                _number(m["volumetric_heat_capacity_J_m3K"], "volumetric_heat_capacity_J_m3K"))
        else:
            raise node.error(f"{what}: needs diffusivity_m2_s + effusivity_SI "
                             "or conductivity_W_mK + volumetric_heat_capacity_J_m3K")
    except DomainError as exc:
        raise node.error(f"{what}: {exc}") from None
    return Layer(mat, thickness, name), unknown


def load_stack_config(path, allow_unknown: bool = False) -> StackConfig:
    root = _load_yaml(path)
    _check_keys(root, {"ambient", "layers", "substrate", "frequencies_hz", "noise"}, "stack config")
    m = root.value
    ambient = AIR_EFFUSIVITY
    if "ambient" in m:
        _check_keys(m["ambient"], {"effusivity_SI"}, "ambient")
        ambient = _number(_required(m["ambient"], "effusivity_SI", "ambient"), "ambient effusivity_SI")
    layers_node = _required(root, "layers", "stack config")
    if not isinstance(layers_node.value, list) or not layers_node.value:
        raise layers_node.error("layers must be a non-empty list")
    parsed = [_parse_layer(item, i, allow_unknown) for i, item in enumerate(layers_node.value)]
    sub = _required(root, "substrate", "stack config")
    _check_keys(sub, {"effusivity_SI"}, "substrate")
    sub_e = _number(_required(sub, "effusivity_SI", "substrate"), "substrate effusivity_SI")
    stack = CoatingStack(tuple(layer for layer, _ in parsed), sub_e, ambient)
    grid = _parse_grid(m["frequencies_hz"]) if "frequencies_hz" in m else None
    noise = None
    if "noise" in m:
        nn = m["noise"]
        _check_keys(nn, {"sigma_deg", "seed"}, "noise")
        sigma = _number(_required(nn, "sigma_deg", "noise"), "sigma_deg", positive=False)
        if sigma < 0:
            raise nn.value["sigma_deg"].error("sigma_deg must be >= 0")
        seed = _integer(nn.value["seed"], "seed", 0) if "seed" in nn.value else 0
        noise = NoiseModel.gaussian_deg(sigma, seed)
    unknown = tuple(i for i, (_, u) in enumerate(parsed) if u)
    return StackConfig(stack, grid, noise, unknown)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_phase_csv(path, spectrum: PhaseSpectrum, with_amplitude: bool = False):
    if with_amplitude and spectrum.amplitudes is None:
        raise DomainError("spectrum has no amplitude channel")
    header = "frequency_hz,phase_rad" + (",amplitude" if with_amplitude else "")
    lines = [header]
    for i, (f, p) in enumerate(zip(spectrum.frequencies, spectrum.phases)):
        row = [_fmt(f), _fmt(p)]
        if with_amplitude:
            row.append(_fmt(spectrum.amplitudes[i]))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_phase_csv(path) -> PhaseSpectrum:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror}", path) from None
    header = None
    freq, phase, amp = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            if cells not in (["frequency_hz", "phase_rad"], ["frequency_hz", "phase_rad", "amplitude"]):
                raise InputError("header must be 'frequency_hz,phase_rad[,amplitude]'", path, lineno, 1)
            header = cells
            continue
        if len(cells) != len(header):
            raise InputError(f"expected {len(header)} columns, got {len(cells)}", path, lineno, 1)
        values = []
        col = 1
        for cell in cells:
            try:
                values.append(float(cell))
            except ValueError:
                raise InputError(f"not a number: {cell!r}", path, lineno, col) from None
            col += len(cell) + 1
        f, p = values[0], values[1]
        if not (math.isfinite(f) and f > 0):
            raise InputError("frequency must be positive", path, lineno, 1)
        if freq and f <= freq[-1]:
            raise InputError("frequencies must be strictly increasing", path, lineno, 1)
        if not -math.pi < p <= math.pi:
            raise InputError("phase must lie in (-pi, pi]", path, lineno, len(cells[0]) + 2)
        freq.append(f)
        phase.append(p)
        if len(values) == 3:
            amp.append(values[2])
    if header is None:
        raise InputError("missing header row", path)
    if not freq:
        raise InputError("no data rows", path)
    return PhaseSpectrum(FrequencyGrid(np.array(freq)), np.array(phase), np.array(amp) if amp else None)


def write_plot_data(path, frequencies, phases):
    """Whitespace-separated ``frequency_hz phase_deg`` columns for plotting tools."""
    lines = ["# frequency_hz phase_deg"]
    lines += [f"{_fmt(f)} {_fmt(math.degrees(p))}" for f, p in zip(frequencies, phases)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class Manifest:
    batch: CalibrationBatch
    threshold: float
    options: dict


def _bounds_pair(node: _Node, what: str):
    vals = _number_list(node, what)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise node.error(f"{what} must be [lower, upper] with lower < upper")
    return tuple(vals)


def load_manifest(path) -> Manifest:
    """Parse a calibration manifest.

    Keys: ``threshold_m2`` (required), ``split`` (k1), ``ambient_effusivity_SI``,
    ``bounds`` with ``diffusivity_m2_s`` / ``effusivity_SI`` / ``thickness_m``
    pairs, ``fit`` with ``starts`` / ``seed``, and ``samples``: a list of
    ``{thicknesses_m: [...], data: file.csv}``. Data paths are relative to
    the manifest.
    """
    path = Path(path)
    root = _load_yaml(path)
    _check_keys(root, {"threshold_m2", "split", "ambient_effusivity_SI", "bounds", "fit", "samples"},
                "manifest")
    m = root.value
    threshold = _number(_required(root, "threshold_m2", "manifest"), "threshold_m2", positive=False)
    if threshold < 0:
        raise m["threshold_m2"].error("threshold_m2 must be >= 0")
    ambient = AIR_EFFUSIVITY
    if "ambient_effusivity_SI" in m:
        ambient = _number(m["ambient_effusivity_SI"], "ambient_effusivity_SI")
    options = {}
    if "bounds" in m:
        b = m["bounds"]
        _check_keys(b, {"diffusivity_m2_s", "effusivity_SI", "thickness_m"}, "bounds")
        key_map = {"diffusivity_m2_s": "diffusivity_bounds", "effusivity_SI": "effusivity_bounds"}
        for key, opt in key_map.items():
            if key in b.value:
                options[opt] = _bounds_pair(b.value[key], f"bounds.{key}")
        if "thickness_m" in b.value:
            options["thickness_bounds"] = _bounds_pair(b.value["thickness_m"], "bounds.thickness_m")
    if "fit" in m:
        _check_keys(m["fit"], {"starts", "seed"}, "fit")
        fv = m["fit"].value
        if "starts" in fv:
            options["start_count"] = _integer(fv["starts"], "starts", 1)
        if "seed" in fv:
            options["seed"] = _integer(fv["seed"], "seed", 0)
    samples_node = _required(root, "samples", "manifest")
    if not isinstance(samples_node.value, list) or not samples_node.value:
        raise samples_node.error("samples must be a non-empty list")
    samples = []
    n = None
    for i, item in enumerate(samples_node.value):
        what = f"sample {i + 1}"
        _check_keys(item, {"thicknesses_m", "data"}, what)
        t_node = _required(item, "thicknesses_m", what)
        L = _number_list(t_node, f"{what} thicknesses_m")
        if n is None:
            n = len(L)
        elif len(L) != n:
            raise t_node.error(f"{what} has {len(L)} thicknesses, earlier samples have {n}")
        d_node = _required(item, "data", what)
        data_path = path.parent / os.fspath(str(d_node.value))
        if not data_path.is_file():
            raise d_node.error(f"{what}: data file {data_path} does not exist")
        samples.append(CalibrationSample(np.array(L), read_phase_csv(data_path)))
    split = None
    if "split" in m:
        split = _integer(m["split"], "split")
        if not 1 < split < len(samples):
            raise m["split"].error(f"split must satisfy 1 < k1 < k = {len(samples)}")
    try:
        batch = CalibrationBatch(tuple(samples), split, ambient)
    except DomainError as exc:
        raise root.error(str(exc)) from None
    if "thickness_bounds" in options:
        lo, hi = options["thickness_bounds"]
        options["thickness_bounds"] = (np.full(n, lo), np.full(n, hi))
    return Manifest(batch, threshold, options)
