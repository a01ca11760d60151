"""Modeling toolkit for a phase-specialized ternary LLM accelerator.

Functional reference kernels (table-lookup ternary matmul, blocked causal
attention, decode attention over a KV cache), a calibrated roofline latency
model, a constrained design-space search for the static/swapped partition
split, and an event timeline simulator of the runtime logic swap.
"""

from .attention import (
    AttentionInputs,
    BlockSchedule,
    KVCache,
    decode_attention,
    flash_attention_prefill,
    make_forward_schedule,
    make_reverse_schedule,
    naive_attention,
    schedule_stats,
)
from .dse import (
    DesignPoint,
    DseConfig,
    DseResult,
    feasible,
    objective,
    search,
    search_with_shrink,
    shrink_until_routable,
)
from .perf import (
    BaselineConfig,
    Measurement,
    PhaseLatencyModel,
    calibrate,
    classify_roofline,
    decode_step_latency,
    prefill_latency,
)
from .resources import PortMap, ResourceVector, effective_kv_bandwidth, kkvv_ports, qkvo_ports
from .simulate import (
    ModelShape,
    ReconfigParams,
    SwapTimeline,
    compare_designs,
    overhead_report,
    simulate_end_to_end,
    simulate_prefill,
)
from .tlmm import (
    ActivationVector,
    PackedWeights,
    TernaryMatrix,
    build_lookup_table,
    naive_ternary_gemv,
    pack_weights,
    tlmm_gemm,
    tlmm_gemv,
    unpack_weights,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationVector",
    "AttentionInputs",
    "BaselineConfig",
    "BlockSchedule",
    "DesignPoint",
    "DseConfig",
    "DseResult",
    "KVCache",
    "Measurement",
    "ModelShape",
    "PackedWeights",
    "PhaseLatencyModel",
    "PortMap",
    "ReconfigParams",
    "ResourceVector",
    "SwapTimeline",
    "TernaryMatrix",
    "build_lookup_table",
    "calibrate",
    "classify_roofline",
    "compare_designs",
    "decode_attention",
    "decode_step_latency",
    "effective_kv_bandwidth",
    "feasible",
    "flash_attention_prefill",
    "kkvv_ports",
    "make_forward_schedule",
    "make_reverse_schedule",
    "naive_attention",
    "naive_ternary_gemv",
    "objective",
    "overhead_report",
    "pack_weights",
    "prefill_latency",
    "qkvo_ports",
    "schedule_stats",
    "search",
    "search_with_shrink",
    "shrink_until_routable",
    "simulate_end_to_end",
    "simulate_prefill",
    "tlmm_gemm",
    "tlmm_gemv",
    "unpack_weights",
]
