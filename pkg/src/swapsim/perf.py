"""Roofline-based analytic latency model.

Prefill cost is linear in prompt length for the projection layers plus
quadratic for attention; a decode step has a fixed projection cost plus an
attention cost linear in context length; both carry the weight-loading
constant. Coefficients are calibrated by least squares against measurements
taken at one baseline hardware configuration, and resource-dependent
speedup factors scale each term relative to that baseline.

Speedup functions follow the roofline shape: the achievable factor is the
minimum of a compute-unit ratio (dominant resource classes of the module)
and a bandwidth ratio (ports feeding the module), both normalized to 1.0 at
the calibration baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .resources import KV_ROLES, PortMap, ResourceVector, Role, qkvo_ports

# Dominant resource classes per module: attention engines are LUT-bound once
# multipliers are folded into lookups; the projection engine spends both.
ATTN_COMPUTE_CLASSES = ("lut",)
PROJ_COMPUTE_CLASSES = ("lut", "dsp")

DEFAULT_PER_PORT_BW = 4.8e9  # bytes/s per 128-bit HP port at ~300 MHz


class CalibrationError(ValueError):
    """Measurements cannot identify the latency coefficients."""


@dataclass(frozen=True)
class SpeedupFunction:
    """min(compute ratio, bandwidth ratio) relative to a baseline.

    bandwidth_roles names the port roles whose aggregate bandwidth roofs the
    module (the KV streams for decode attention). None marks a module that
    stays compute-bound across the explored space, so only the compute ratio
    applies. Either way the factor is nondecreasing in every resource
    component and exactly 1.0 at the baseline configuration.
    """

    baseline_resources: ResourceVector
    compute_classes: tuple[str, ...]
    baseline_ports: PortMap
    bandwidth_roles: frozenset[Role] | None = None

    def __post_init__(self) -> None:
        if self._units(self.baseline_resources) <= 0:
            raise ValueError("baseline configuration must allocate the module's compute classes")

    def _units(self, r: ResourceVector) -> float:
        return sum(getattr(r, c) for c in self.compute_classes)

    def __call__(self, r: ResourceVector, ports: PortMap | None = None) -> float:
        compute = self._units(r) / self._units(self.baseline_resources)
        if self.bandwidth_roles is None or ports is None:
            return compute
        bw = ports.bandwidth(self.bandwidth_roles) / self.baseline_ports.bandwidth(self.bandwidth_roles)
        return min(compute, bw)


@dataclass(frozen=True)
class BaselineConfig:
    """The hardware configuration the coefficients were measured on."""

    r_proj: ResourceVector
    r_att_pre: ResourceVector
    r_att_dec: ResourceVector
    ports_pre: PortMap
    ports_dec: PortMap

    @classmethod
    def uniform(cls, r: ResourceVector, per_port_bw: float = DEFAULT_PER_PORT_BW) -> BaselineConfig:
        """Degenerate baseline where every module is normalized to the same vector."""
        ports = qkvo_ports(per_port_bw)
        return cls(r, r, r, ports, ports)


@dataclass(frozen=True)
class PhaseLatencyModel:
    """Calibrated phase cost coefficients plus per-module speedup functions.

    p_proj: seconds per prefill token (projection);
    p_atten: seconds per squared prefill token (attention);
    d_proj: seconds per decode step (projection);
    d_atten: seconds per context token per decode step (attention);
    t_weights: weight-loading seconds, shared by both phases.
    """

    p_proj: float
    p_atten: float
    d_proj: float
    d_atten: float
    t_weights: float
    baseline: BaselineConfig
    # filled from the baseline when not supplied explicitly
    f_pre: SpeedupFunction | None = field(repr=False, default=None)
    f_dec: SpeedupFunction | None = field(repr=False, default=None)
    g_pre: SpeedupFunction | None = field(repr=False, default=None)
    g_dec: SpeedupFunction | None = field(repr=False, default=None)

    def __post_init__(self) -> None:
        # Calibrated coefficients are positive; zero is tolerated so degenerate
        # single-term models remain constructible.
        for name in ("p_proj", "p_atten", "d_proj", "d_atten", "t_weights"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        b = self.baseline
        if self.f_pre is None:
            object.__setattr__(self, "f_pre", SpeedupFunction(b.r_proj, PROJ_COMPUTE_CLASSES, b.ports_pre))
        if self.f_dec is None:
            object.__setattr__(self, "f_dec", SpeedupFunction(b.r_proj, PROJ_COMPUTE_CLASSES, b.ports_dec))
        if self.g_pre is None:
            object.__setattr__(self, "g_pre", SpeedupFunction(b.r_att_pre, ATTN_COMPUTE_CLASSES, b.ports_pre))
        if self.g_dec is None:
            object.__setattr__(
                self, "g_dec", SpeedupFunction(b.r_att_dec, ATTN_COMPUTE_CLASSES, b.ports_dec, KV_ROLES)
            )

    def coefficients(self) -> dict[str, float]:
        return {
            "p_proj": self.p_proj,
            "p_atten": self.p_atten,
            "d_proj": self.d_proj,
            "d_atten": self.d_atten,
            "t_weights": self.t_weights,
        }


def _term(cost: float, speedup: float) -> float:
    if speedup <= 0:
        return 0.0 if cost == 0 else math.inf
    return cost / speedup


def prefill_latency(
    m: PhaseLatencyModel,
    r_proj: ResourceVector,
    r_att: ResourceVector,
    tokens: int,
    ports: PortMap | None = None,
) -> float:
    """Prompt-processing latency: linear projection + quadratic attention + weights."""
    if tokens < 1:
        raise ValueError(f"token count must be >= 1, got {tokens}")
    return (
        _term(m.p_proj * tokens, m.f_pre(r_proj, ports))
        + _term(m.p_atten * tokens * tokens, m.g_pre(r_att, ports))
        + m.t_weights
    )


def decode_step_latency(
    m: PhaseLatencyModel,
    r_proj: ResourceVector,
    r_att: ResourceVector,
    context: int,
    ports: PortMap | None = None,
) -> float:
    """Per-token generation latency; affine in the context length."""
    if context < 1:
        raise ValueError(f"context length must be >= 1, got {context}")
    return (
        _term(m.d_proj, m.f_dec(r_proj, ports))
        + _term(m.d_atten, m.g_dec(r_att, ports)) * context
        + m.t_weights
    )


@dataclass(frozen=True)
class RooflinePoint:
    flops: float
    bytes: float
    intensity: float
    bound: str  # "compute" | "memory"
    attainable: float  # achievable flops/s under the roofline


def classify_roofline(flops: float, nbytes: float, peak_flops: float, peak_bw: float) -> RooflinePoint:
    """Place a kernel on the roofline; ties at machine balance count as compute-bound."""
    if nbytes <= 0:
        raise ValueError(f"byte count must be positive, got {nbytes}")
    if peak_flops <= 0 or peak_bw <= 0:
        raise ValueError("machine peaks must be positive")
    intensity = flops / nbytes
    balance = peak_flops / peak_bw
    bound = "compute" if intensity >= balance else "memory"
    return RooflinePoint(flops, nbytes, intensity, bound, min(peak_flops, intensity * peak_bw))


@dataclass(frozen=True)
class Measurement:
    """One observed latency at the baseline configuration."""

    phase: str  # "prefill" | "decode"
    tokens: int  # prompt length (prefill) or context length (decode)
    resources: ResourceVector
    seconds: float

    def __post_init__(self) -> None:
        if self.phase not in ("prefill", "decode"):
            raise ValueError(f"phase must be 'prefill' or 'decode', got {self.phase!r}")
        if self.tokens < 1:
            raise ValueError(f"tokens must be >= 1, got {self.tokens}")
        if self.seconds <= 0:
            raise ValueError(f"seconds must be positive, got {self.seconds}")


@dataclass(frozen=True)
class CalibrationResult:
    model: PhaseLatencyModel
    prefill_residuals: tuple[float, ...]
    decode_residuals: tuple[float, ...]

    @property
    def max_abs_residual(self) -> float:
        return max((abs(r) for r in self.prefill_residuals + self.decode_residuals), default=0.0)


def calibrate(
    measurements: list[Measurement],
    baseline: BaselineConfig | None = None,
) -> CalibrationResult:
    """Least-squares fit of the five coefficients to baseline measurements.

    Prefill points fit (p_proj, p_atten, t_weights); decode points fit
    (d_proj, d_atten) with t_weights shared from the prefill fit. Three
    distinct prefill lengths pin the prefill fit uniquely; with exactly two
    the minimum-norm solution is returned. All measurements must share one
    resource configuration, which becomes the model baseline unless an
    explicit per-module baseline is supplied.
    """
    prefill = [m for m in measurements if m.phase == "prefill"]
    decode = [m for m in measurements if m.phase == "decode"]
    if len({m.tokens for m in prefill}) < 2:
        raise CalibrationError("need >= 2 prefill measurements at distinct lengths")
    if len({m.tokens for m in decode}) < 2:
        raise CalibrationError("need >= 2 decode measurements at distinct lengths")
    configs = {m.resources for m in measurements}
    if len(configs) != 1:
        raise CalibrationError("all measurements must share the baseline resource configuration")
    measured = next(iter(configs))
    if baseline is None:
        baseline = BaselineConfig.uniform(measured)
    else:
        expected = baseline.r_proj + baseline.r_att_pre.max(baseline.r_att_dec)
        for cls in ("lut", "ff", "dsp", "bram", "uram"):
            a, b = getattr(measured, cls), getattr(expected, cls)
            if abs(a - b) > 1e-6 * max(1.0, abs(b)):
                raise CalibrationError(
                    f"measurements were not taken at the given baseline: {cls} is {a}, expected {b}"
                )

    lp = np.array([m.tokens for m in prefill], dtype=np.float64)
    yp = np.array([m.seconds for m in prefill], dtype=np.float64)
    ap = np.column_stack([lp, lp * lp, np.ones_like(lp)])
    coef_p, _, _, _ = np.linalg.lstsq(ap, yp, rcond=None)
    p_proj, p_atten, t_weights = (max(float(c), 0.0) for c in coef_p)

    ld = np.array([m.tokens for m in decode], dtype=np.float64)
    yd = np.array([m.seconds for m in decode], dtype=np.float64) - t_weights
    ad = np.column_stack([np.ones_like(ld), ld])
    coef_d, _, _, _ = np.linalg.lstsq(ad, yd, rcond=None)
    d_proj, d_atten = (max(float(c), 0.0) for c in coef_d)

    model = PhaseLatencyModel(p_proj, p_atten, d_proj, d_atten, t_weights, baseline)
    res_p = tuple(float(r) for r in ap @ np.array([p_proj, p_atten, t_weights]) - yp)
    res_d = tuple(float(r) for r in ad @ np.array([d_proj, d_atten]) - yd)
    return CalibrationResult(model, res_p, res_d)
