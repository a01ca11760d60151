"""Event timeline simulation of inference with a runtime logic swap.

Prefill is laid out layer by layer (attention, output projection, FFN per
layer) on a single compute lane, with the aggregate phase latency split
uniformly across layers: each layer's attention event carries 1/n_layers of
the quadratic term and its projection+FFN events carry 1/n_layers of the
linear term. Weight loading occupies the region before the first event.

The partition swap may start as soon as the final layer's attention event
ends; loading proceeds on a separate lane concurrently with the remaining
projection/FFN tail, and decode conservatively begins only once the swap
has completed. The exposed overhead is whatever part of the swap outlasts
the tail.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .dse import DesignPoint
from .perf import PhaseLatencyModel, _term, decode_step_latency, prefill_latency


class Trigger(enum.Enum):
    AFTER_LAST_ATTENTION = "after_last_attention"
    AFTER_PREFILL_COMPLETE = "after_prefill_complete"


@dataclass(frozen=True)
class ModelShape:
    """Layer structure driving the timeline; embedding/head costs sit in
    the weight-loading constant. out_proj_share splits each layer's linear
    time between the output projection and the FFN block."""

    n_layers: int
    out_proj_share: float = 0.25

    def __post_init__(self) -> None:
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if not 0.0 <= self.out_proj_share <= 1.0:
            raise ValueError(f"out_proj_share must be in [0, 1], got {self.out_proj_share}")


@dataclass(frozen=True)
class ReconfigParams:
    """Partial-bitstream load time and the moment the load is triggered."""

    t_reconfig: float
    trigger: Trigger = Trigger.AFTER_LAST_ATTENTION
    confirm_before_decode: bool = True

    def __post_init__(self) -> None:
        if self.t_reconfig <= 0:
            raise ValueError(f"t_reconfig must be positive, got {self.t_reconfig}")


PREFILL_KINDS = ("prefill_attn", "prefill_proj", "prefill_ffn")


@dataclass(frozen=True)
class TimelineEvent:
    kind: str  # prefill_attn | prefill_proj | prefill_ffn | reconfig_start | reconfig_end | decode_step
    index: int  # layer index or decode step index
    start: float
    end: float


@dataclass(frozen=True)
class SwapTimeline:
    events: tuple[TimelineEvent, ...]
    t_reconfig: float | None = None  # configured swap duration, None for static designs
    confirmed_decode: bool = True

    def of_kind(self, kind: str) -> tuple[TimelineEvent, ...]:
        return tuple(e for e in self.events if e.kind == kind)

    @property
    def prefill_end(self) -> float:
        return max(e.end for e in self.events if e.kind in PREFILL_KINDS)

    @property
    def has_reconfig(self) -> bool:
        return any(e.kind == "reconfig_start" for e in self.events)

    @property
    def reconfig_end(self) -> float:
        ends = self.of_kind("reconfig_end")
        if not ends:
            raise ValueError("timeline has no reconfiguration events")
        return ends[0].end

    @property
    def exposed_overhead(self) -> float:
        """Swap time not hidden under the concurrent prefill tail."""
        if not self.has_reconfig:
            return 0.0
        trigger = self.of_kind("reconfig_start")[0].start
        duration = self.t_reconfig if self.t_reconfig is not None else self.reconfig_end - trigger
        tail = self.prefill_end - trigger
        return max(0.0, duration - tail)

    def validate(self) -> None:
        compute = [e for e in self.events if e.kind in PREFILL_KINDS or e.kind == "decode_step"]
        for prev, cur in zip(compute, compute[1:]):
            if cur.start < prev.end - 1e-12:
                raise ValueError(f"compute-lane events overlap: {prev} then {cur}")
        if self.has_reconfig:
            last_attn = max(e.end for e in self.of_kind("prefill_attn"))
            if self.of_kind("reconfig_start")[0].start < last_attn - 1e-12:
                raise ValueError("reconfiguration must not start before the last prefill attention")
            decodes = self.of_kind("decode_step")
            if self.confirmed_decode and decodes and decodes[0].start < self.reconfig_end - 1e-12:
                raise ValueError("decode must not start before reconfiguration completes")


def simulate_prefill(
    m: PhaseLatencyModel,
    shape: ModelShape,
    d: DesignPoint,
    tokens: int,
    rp: ReconfigParams | None,
) -> SwapTimeline:
    """Per-layer prefill timeline with the swap trigger placed per rp.

    rp=None models a static design with no swap events.
    """
    compute_total = prefill_latency(m, d.r_proj, d.r_att_pre, tokens, d.port_map_pre) - m.t_weights
    if not math.isfinite(compute_total):
        raise ValueError("prefill latency is unbounded for this design point")
    linear_total = _term(m.p_proj * tokens, m.f_pre(d.r_proj, d.port_map_pre))
    attn_total = compute_total - linear_total

    attn_dur = attn_total / shape.n_layers
    layer_linear = linear_total / shape.n_layers
    proj_dur = layer_linear * shape.out_proj_share
    ffn_dur = layer_linear - proj_dur

    events: list[TimelineEvent] = []
    t = m.t_weights
    last_attn_end = t
    for layer in range(shape.n_layers):
        events.append(TimelineEvent("prefill_attn", layer, t, t + attn_dur))
        t += attn_dur
        last_attn_end = t
        events.append(TimelineEvent("prefill_proj", layer, t, t + proj_dur))
        t += proj_dur
        events.append(TimelineEvent("prefill_ffn", layer, t, t + ffn_dur))
        t += ffn_dur

    if rp is not None:
        trigger_t = last_attn_end if rp.trigger is Trigger.AFTER_LAST_ATTENTION else t
        events.append(TimelineEvent("reconfig_start", 0, trigger_t, trigger_t))
        events.append(TimelineEvent("reconfig_end", 0, trigger_t + rp.t_reconfig, trigger_t + rp.t_reconfig))

    timeline = SwapTimeline(
        tuple(events),
        t_reconfig=rp.t_reconfig if rp is not None else None,
        confirmed_decode=rp.confirm_before_decode if rp is not None else True,
    )
    timeline.validate()
    return timeline


@dataclass(frozen=True)
class EndToEndResult:
    timeline: SwapTimeline
    ttft: float
    decode_throughput: float  # tokens/s across the generated stretch


def simulate_end_to_end(
    m: PhaseLatencyModel,
    shape: ModelShape,
    d: DesignPoint,
    l_prompt: int,
    n_gen: int,
    rp: ReconfigParams | None,
) -> EndToEndResult:
    """Prefill, swap, then n_gen autoregressive steps at growing context."""
    if n_gen < 1:
        raise ValueError(f"n_gen must be >= 1, got {n_gen}")
    prefill = simulate_prefill(m, shape, d, l_prompt, rp)
    events = list(prefill.events)

    t = prefill.prefill_end
    if rp is not None and rp.confirm_before_decode:
        t = max(t, prefill.reconfig_end)
    total_decode = 0.0
    first_step = 0.0
    for i in range(1, n_gen + 1):
        dur = decode_step_latency(m, d.r_proj, d.r_att_dec, l_prompt + i, d.port_map_dec)
        events.append(TimelineEvent("decode_step", i, t, t + dur))
        t += dur
        total_decode += dur
        if i == 1:
            first_step = dur

    timeline = SwapTimeline(
        tuple(events), t_reconfig=prefill.t_reconfig, confirmed_decode=prefill.confirmed_decode
    )
    timeline.validate()
    ttft = prefill.prefill_end + first_step
    if rp is not None and rp.confirm_before_decode:
        ttft += prefill.exposed_overhead
    return EndToEndResult(timeline, ttft, n_gen / total_decode)


def overhead_report(timeline: SwapTimeline, rp: ReconfigParams) -> dict[str, float]:
    """Exposed swap time and the fraction hidden under computation."""
    if not timeline.has_reconfig:
        raise ValueError("timeline has no reconfiguration events")
    exposed = timeline.exposed_overhead
    return {
        "exposed_ms": exposed * 1e3,
        "hidden_fraction": 1.0 - exposed / rp.t_reconfig,
    }


COMPARE_COLUMNS = (
    "l",
    "ttft_baseline_s",
    "ttft_candidate_s",
    "throughput_baseline_tps",
    "throughput_candidate_tps",
    "ttft_ratio",
    "throughput_ratio",
)


def compare_designs(
    baseline: tuple[PhaseLatencyModel, DesignPoint, ReconfigParams | None],
    candidate: tuple[PhaseLatencyModel, DesignPoint, ReconfigParams | None],
    sweep: list[int],
    shape: ModelShape,
    n_gen: int = 32,
) -> list[dict[str, float]]:
    """Sweep prompt lengths and tabulate TTFT/throughput plus ratios.

    Ratios are baseline/candidate for TTFT and candidate/baseline for
    throughput, so >1 means the candidate wins. Row and column order are
    deterministic.
    """
    m_base, d_base, rp_base = baseline
    m_cand, d_cand, rp_cand = candidate
    rows: list[dict[str, float]] = []
    for l_prompt in sweep:
        base = simulate_end_to_end(m_base, shape, d_base, l_prompt, n_gen, rp_base)
        cand = simulate_end_to_end(m_cand, shape, d_cand, l_prompt, n_gen, rp_cand)
        rows.append(
            {
                "l": float(l_prompt),
                "ttft_baseline_s": base.ttft,
                "ttft_candidate_s": cand.ttft,
                "throughput_baseline_tps": base.decode_throughput,
                "throughput_candidate_tps": cand.decode_throughput,
                "ttft_ratio": base.ttft / cand.ttft,
                "throughput_ratio": cand.decode_throughput / base.decode_throughput,
            }
        )
    return rows
