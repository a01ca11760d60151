"""Shared test fixtures: reference performance anchors and model builders.

The modeled platform's published figures (throughputs, TTFT, speedup
ratios) pin two latency models: one for the phase-swapped design and one
for a static baseline on the same device. Coefficients are solved from the
anchors, measurements are generated from the solved models, and tests
calibrate from those measurements.
"""

from __future__ import annotations

import numpy as np

from swapsim.dse import DesignPoint, default_resource_table
from swapsim.perf import (
    BaselineConfig,
    Measurement,
    PhaseLatencyModel,
    decode_step_latency,
    prefill_latency,
)
from swapsim.resources import qkvo_ports

# Published figures the calibrated models must reproduce.
SWAP_PREFILL_TPS = 148.0  # prompt tokens/s, measured at L_THROUGHPUT
STATIC_PREFILL_TPS = 143.0
SWAP_TTFT_768 = 8.80  # seconds at a 768-token prompt
STATIC_TTFT_768 = 11.10
SWAP_DECODE_TPS_64 = 27.8  # tokens/s at short context
SWAP_DECODE_TPS_2048 = 10.3  # tokens/s at long context
DECODE_RATIO_64 = 1.11  # swapped vs static decode throughput
DECODE_RATIO_2048 = 2.02

L_THROUGHPUT = 256  # prompt length behind the prefill-throughput figures
T_WEIGHTS = 0.02  # weight-load seconds shared by both phases
N_LAYERS = 24

PREFILL_CAL_POINTS = (L_THROUGHPUT, 768, 1536)
DECODE_CAL_POINTS = (64, 512, 2048)


def baseline_design() -> DesignPoint:
    table = default_resource_table()
    ports = qkvo_ports(4.8e9)
    return table.design_point(1, 4, 4, ports, ports)


def baseline_config() -> BaselineConfig:
    d = baseline_design()
    return BaselineConfig(d.r_proj, d.r_att_pre, d.r_att_dec, d.port_map_pre, d.port_map_dec)


def _solve_prefill(tps_at_lthr: float, ttft_768: float) -> tuple[float, float]:
    a = np.array([[L_THROUGHPUT, L_THROUGHPUT**2], [768.0, 768.0**2]])
    b = np.array([L_THROUGHPUT / tps_at_lthr - T_WEIGHTS, ttft_768 - T_WEIGHTS])
    p_proj, p_atten = np.linalg.solve(a, b)
    return float(p_proj), float(p_atten)


def _solve_decode(step_64: float, step_2048: float) -> tuple[float, float]:
    d_atten = (step_2048 - step_64) / (2048.0 - 64.0)
    d_proj = step_64 - 64.0 * d_atten - T_WEIGHTS
    return float(d_proj), float(d_atten)


def swap_truth_model() -> PhaseLatencyModel:
    p_proj, p_atten = _solve_prefill(SWAP_PREFILL_TPS, SWAP_TTFT_768)
    d_proj, d_atten = _solve_decode(1.0 / SWAP_DECODE_TPS_64, 1.0 / SWAP_DECODE_TPS_2048)
    return PhaseLatencyModel(p_proj, p_atten, d_proj, d_atten, T_WEIGHTS, baseline_config())


def static_truth_model() -> PhaseLatencyModel:
    p_proj, p_atten = _solve_prefill(STATIC_PREFILL_TPS, STATIC_TTFT_768)
    d_proj, d_atten = _solve_decode(
        DECODE_RATIO_64 / SWAP_DECODE_TPS_64, DECODE_RATIO_2048 / SWAP_DECODE_TPS_2048
    )
    return PhaseLatencyModel(p_proj, p_atten, d_proj, d_atten, T_WEIGHTS, baseline_config())


def measurements_from(model: PhaseLatencyModel) -> list[Measurement]:
    """Exact baseline measurements generated by a model."""
    d = baseline_design()
    at_baseline = d.r_proj + d.r_att_pre.max(d.r_att_dec)
    b = model.baseline
    out = []
    for tokens in PREFILL_CAL_POINTS:
        seconds = prefill_latency(model, b.r_proj, b.r_att_pre, tokens)
        out.append(Measurement("prefill", tokens, at_baseline, seconds))
    for tokens in DECODE_CAL_POINTS:
        seconds = decode_step_latency(model, b.r_proj, b.r_att_dec, tokens)
        out.append(Measurement("decode", tokens, at_baseline, seconds))
    return out
