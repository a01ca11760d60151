"""Tool configuration: one YAML document drives every command.

Sections: device (budget, ports, roofline peaks), model (layer count and
default lengths), dse (objective weights, bounds, grids), reconfig (swap
time and trigger), plus an optional calibration section pointing at the
measurement file. Malformed fields raise ConfigError naming the field and
the violated constraint; unknown keys are warned about and ignored.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import yaml

from .dse import DseConfig, default_resource_table
from .perf import BaselineConfig, PhaseLatencyModel, prefill_latency
from .resources import RESOURCE_CLASSES, ResourceVector, kkvv_ports, qkvo_ports
from .simulate import ModelShape, ReconfigParams, Trigger


class ConfigError(ValueError):
    """A required field is missing or fails its constraint."""


_MISSING = object()


def _field(doc: dict, section: str, key: str, default=_MISSING):
    if key in doc:
        return doc[key]
    if default is _MISSING:
        raise ConfigError(f"{section}.{key}: required field is missing")
    return default


def _positive(section: str, key: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}: must be a number, got {value!r}") from None
    if not v > 0 or not math.isfinite(v):
        raise ConfigError(f"{section}.{key}: must be a positive finite number, got {value!r}")
    return v


def _count(section: str, key: str, value) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{section}.{key}: must be a positive integer, got {value!r}")
    return value


def _warn_unknown(section: str, doc: dict, allowed: set[str]) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        warnings.warn(f"config section '{section}' has unknown keys, ignored: {unknown}", stacklevel=3)


@dataclass(frozen=True)
class DeviceSection:
    resources: ResourceVector
    n_ports: int
    per_port_bw: float
    peak_flops: float
    peak_bw: float


@dataclass(frozen=True)
class ModelSection:
    n_layers: int
    hidden_dim: int
    n_heads: int
    l_prefill: int
    l_sweep: tuple[int, ...]
    n_gen: int

    def shape(self) -> ModelShape:
        return ModelShape(self.n_layers)


@dataclass(frozen=True)
class DseSection:
    alpha: float
    l_long: int
    l_short: int
    t_pre_max_factor: float
    routability_margin: float
    proj_par_grid: tuple[int, ...]
    pe_pre_grid: tuple[int, ...]
    par_dec_grid: tuple[int, ...]
    exhaustive_cap: int


@dataclass(frozen=True)
class ToolConfig:
    device: DeviceSection
    model: ModelSection
    dse: DseSection
    reconfig: ReconfigParams
    measurements_path: Path | None
    calibration_baseline: tuple[int, int, int] = (1, 4, 4)  # proj_parallelism, pe_pre, par_dec

    def baseline_config(self) -> BaselineConfig:
        """Per-module split of the measured baseline hardware configuration."""
        ports = qkvo_ports(self.device.per_port_bw)
        d = default_resource_table().design_point(*self.calibration_baseline, ports, ports)
        return BaselineConfig(d.r_proj, d.r_att_pre, d.r_att_dec, d.port_map_pre, d.port_map_dec)

    def dse_config(self, m: PhaseLatencyModel, alpha: float | None = None) -> DseConfig:
        """Bind the DSE section to a calibrated model.

        The prefill bound is t_pre_max_factor times the model's baseline
        prefill latency at the configured prompt length.
        """
        b = m.baseline
        baseline_pre = prefill_latency(m, b.r_proj, b.r_att_pre, self.model.l_prefill, b.ports_pre)
        return DseConfig(
            r_total=self.device.resources,
            t_pre_max=self.dse.t_pre_max_factor * baseline_pre,
            alpha=self.dse.alpha if alpha is None else alpha,
            l_long=self.dse.l_long,
            l_short=self.dse.l_short,
            l_prefill=self.model.l_prefill,
            routability_margin=self.dse.routability_margin,
            proj_par_grid=self.dse.proj_par_grid,
            pe_pre_grid=self.dse.pe_pre_grid,
            par_dec_grid=self.dse.par_dec_grid,
            exhaustive_cap=self.dse.exhaustive_cap,
            table=default_resource_table(),
            ports_pre=qkvo_ports(self.device.per_port_bw),
            ports_dec=kkvv_ports(self.device.per_port_bw),
        )


def _parse_device(doc: dict) -> DeviceSection:
    _warn_unknown("device", doc, {"resources", "n_ports", "per_port_bw", "peak_flops", "peak_bw"})
    res_doc = _field(doc, "device", "resources")
    if not isinstance(res_doc, dict):
        raise ConfigError("device.resources: must be a mapping of resource classes")
    _warn_unknown("device.resources", res_doc, set(RESOURCE_CLASSES))
    values = {c: _positive("device.resources", c, _field(res_doc, "device.resources", c)) for c in RESOURCE_CLASSES}
    return DeviceSection(
        resources=ResourceVector(**values),
        n_ports=_count("device", "n_ports", _field(doc, "device", "n_ports", 4)),
        per_port_bw=_positive("device", "per_port_bw", _field(doc, "device", "per_port_bw")),
        peak_flops=_positive("device", "peak_flops", _field(doc, "device", "peak_flops")),
        peak_bw=_positive("device", "peak_bw", _field(doc, "device", "peak_bw")),
    )


def _parse_grid(section: str, key: str, value) -> tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{section}.{key}: must be a nonempty list of positive integers")
    grid = tuple(_count(section, key, v) for v in value)
    if list(grid) != sorted(set(grid)):
        raise ConfigError(f"{section}.{key}: must be strictly ascending")
    return grid


def _parse_model(doc: dict) -> ModelSection:
    _warn_unknown("model", doc, {"n_layers", "hidden_dim", "n_heads", "l_prefill", "l_sweep", "n_gen"})
    sweep = _field(doc, "model", "l_sweep", [64, 128, 256, 512, 1024, 2048])
    return ModelSection(
        n_layers=_count("model", "n_layers", _field(doc, "model", "n_layers")),
        hidden_dim=_count("model", "hidden_dim", _field(doc, "model", "hidden_dim")),
        n_heads=_count("model", "n_heads", _field(doc, "model", "n_heads")),
        l_prefill=_count("model", "l_prefill", _field(doc, "model", "l_prefill", 768)),
        l_sweep=_parse_grid("model", "l_sweep", sweep),
        n_gen=_count("model", "n_gen", _field(doc, "model", "n_gen", 32)),
    )


def _parse_dse(doc: dict) -> DseSection:
    _warn_unknown(
        "dse",
        doc,
        {
            "alpha", "l_long", "l_short", "t_pre_max_factor", "routability_margin",
            "proj_par_grid", "pe_pre_grid", "par_dec_grid", "exhaustive_cap",
        },
    )
    alpha = _field(doc, "dse", "alpha", 0.7)
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise ConfigError(f"dse.alpha: must be a number, got {alpha!r}") from None
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"dse.alpha: must be in [0, 1], got {alpha}")
    margin = _positive("dse", "routability_margin", _field(doc, "dse", "routability_margin", 0.87))
    if margin > 1.0:
        raise ConfigError(f"dse.routability_margin: must be in (0, 1], got {margin}")
    l_long = _count("dse", "l_long", _field(doc, "dse", "l_long", 2048))
    l_short = _count("dse", "l_short", _field(doc, "dse", "l_short", 64))
    if l_long <= l_short:
        raise ConfigError(f"dse.l_long: must exceed dse.l_short, got {l_long} <= {l_short}")
    return DseSection(
        alpha=alpha,
        l_long=l_long,
        l_short=l_short,
        t_pre_max_factor=_positive("dse", "t_pre_max_factor", _field(doc, "dse", "t_pre_max_factor", 1.25)),
        routability_margin=margin,
        proj_par_grid=_parse_grid("dse", "proj_par_grid", _field(doc, "dse", "proj_par_grid", [1, 2])),
        pe_pre_grid=_parse_grid("dse", "pe_pre_grid", _field(doc, "dse", "pe_pre_grid", [1, 2, 4, 8])),
        par_dec_grid=_parse_grid("dse", "par_dec_grid", _field(doc, "dse", "par_dec_grid", [1, 2, 4, 8])),
        exhaustive_cap=_count("dse", "exhaustive_cap", _field(doc, "dse", "exhaustive_cap", 10000)),
    )


def _parse_reconfig(doc: dict) -> ReconfigParams:
    _warn_unknown("reconfig", doc, {"t_reconfig", "trigger", "confirm_before_decode"})
    trigger_raw = _field(doc, "reconfig", "trigger", "after_last_attention")
    try:
        trigger = Trigger(trigger_raw)
    except ValueError:
        valid = [t.value for t in Trigger]
        raise ConfigError(f"reconfig.trigger: must be one of {valid}, got {trigger_raw!r}") from None
    confirm = _field(doc, "reconfig", "confirm_before_decode", True)
    if not isinstance(confirm, bool):
        raise ConfigError(f"reconfig.confirm_before_decode: must be a boolean, got {confirm!r}")
    return ReconfigParams(
        t_reconfig=_positive("reconfig", "t_reconfig", _field(doc, "reconfig", "t_reconfig")),
        trigger=trigger,
        confirm_before_decode=confirm,
    )


def load_config(path: str | Path) -> ToolConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping of sections")
    _warn_unknown("<top-level>", doc, {"device", "model", "dse", "reconfig", "calibration"})
    for section in ("device", "model", "dse", "reconfig"):
        if section not in doc:
            raise ConfigError(f"{section}: required section is missing")
        if not isinstance(doc[section], dict):
            raise ConfigError(f"{section}: must be a mapping")

    measurements = None
    baseline = (1, 4, 4)
    if "calibration" in doc:
        cal = doc["calibration"]
        if not isinstance(cal, dict):
            raise ConfigError("calibration: must be a mapping")
        _warn_unknown("calibration", cal, {"measurements", "proj_parallelism", "pe_pre", "par_dec"})
        measurements = Path(str(_field(cal, "calibration", "measurements")))
        if not measurements.is_absolute():
            measurements = Path(path).parent / measurements
        baseline = (
            _count("calibration", "proj_parallelism", _field(cal, "calibration", "proj_parallelism", 1)),
            _count("calibration", "pe_pre", _field(cal, "calibration", "pe_pre", 4)),
            _count("calibration", "par_dec", _field(cal, "calibration", "par_dec", 4)),
        )

    return ToolConfig(
        device=_parse_device(doc["device"]),
        model=_parse_model(doc["model"]),
        dse=_parse_dse(doc["dse"]),
        reconfig=_parse_reconfig(doc["reconfig"]),
        measurements_path=measurements,
        calibration_baseline=baseline,
    )
