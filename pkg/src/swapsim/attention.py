"""Phase-specialized attention reference kernels.

Prefill runs blocked attention with an online-softmax state (running max,
running exponent sum, unnormalized output) over a causal block schedule.
The schedule assigns Q blocks to processing elements in descending waves so
a loaded Q block is reused across every K/V block it may attend to; K blocks
stream in ascending order and PEs drop out as the causal boundary passes.

Decode is the degenerate single-query case: one query attends to the whole
KV cache with the same streaming update at block size 1.

Kernels compute in float32; the materialized-score oracle accumulates in
float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

DEFAULT_BLOCK_SIZE = 16


class ScheduleError(ValueError):
    """A block schedule violates causality, completeness, or residency."""


@dataclass(frozen=True)
class AttentionInputs:
    """Q, K, V operands sharing sequence length and head dimension."""

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    causal: bool = True

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=np.float32)
        k = np.asarray(self.k, dtype=np.float32)
        v = np.asarray(self.v, dtype=np.float32)
        if q.ndim != 2 or q.shape != k.shape or q.shape != v.shape:
            raise ValueError(f"Q, K, V must share one NxD shape, got {q.shape}, {k.shape}, {v.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def d_k(self) -> int:
        return self.q.shape[1]


class AttentionBlockState:
    """Online-softmax state for one Q block: running max m, exponent sum l,
    and the unnormalized output accumulator O. Final output is O / l."""

    def __init__(self, block_rows: int, d: int):
        self.m = np.full(block_rows, -np.inf, dtype=np.float32)
        self.l = np.zeros(block_rows, dtype=np.float32)
        self.o = np.zeros((block_rows, d), dtype=np.float32)

    def absorb(self, scores: np.ndarray, v_block: np.ndarray) -> None:
        """Absorb one score block (rows x keys) and its V block."""
        rmax = scores.max(axis=1)
        m_new = np.maximum(self.m, rmax)
        assert (m_new >= self.m).all(), "running max must be nondecreasing"
        carry = np.exp(self.m - m_new)  # 0 on the first absorbed block
        p = np.exp(scores - rmax[:, None])
        scale = np.exp(rmax - m_new)
        self.l = carry * self.l + scale * p.sum(axis=1)
        self.o = carry[:, None] * self.o + scale[:, None] * (p @ v_block)
        self.m = m_new

    def normalized(self) -> np.ndarray:
        return self.o / self.l[:, None]


class Step(NamedTuple):
    pe_id: int
    q_block: int
    k_block: int


@dataclass(frozen=True)
class BlockSchedule:
    """Ordered (pe, q_block, k_block) work items covering the causal pairs."""

    block_size: int
    n_pe: int
    steps: tuple[Step, ...]

    @property
    def n_blocks(self) -> int:
        return max(s.q_block for s in self.steps) + 1 if self.steps else 0

    def validate(self, n_blocks: int | None = None) -> None:
        """Check causality, completeness, and Q-residency contiguity."""
        nb = self.n_blocks if n_blocks is None else n_blocks
        wanted = {(q, k) for q in range(nb) for k in range(q + 1)}
        seen = [(s.q_block, s.k_block) for s in self.steps]
        if any(k > q for q, k in seen):
            raise ScheduleError("causal legality violated: k_block > q_block")
        if len(seen) != len(set(seen)) or set(seen) != wanted:
            raise ScheduleError("schedule must cover every causal (q, k) pair exactly once")
        for pe in range(self.n_pe):
            held: set[int] = set()
            prev = -1
            for s in self.steps:
                if s.pe_id != pe:
                    continue
                if s.q_block != prev:
                    if s.q_block in held:
                        raise ScheduleError(f"Q residency broken: q_block {s.q_block} reloaded on pe {pe}")
                    held.add(s.q_block)
                    prev = s.q_block


def make_reverse_schedule(
    n_blocks: int, n_pe: int, block_size: int = DEFAULT_BLOCK_SIZE
) -> BlockSchedule:
    """Descending-Q waves with ascending K streaming and causal PE drop-out.

    Wave w assigns q blocks {n_blocks-1-w*n_pe, ...} to PEs 0..n_pe-1; within
    the wave, k blocks broadcast in ascending order and a PE participates only
    while k <= its q block. Each Q block is loaded exactly once.
    """
    if n_blocks < 1 or n_pe < 1:
        raise ValueError(f"n_blocks and n_pe must be >= 1, got {n_blocks}, {n_pe}")
    steps: list[Step] = []
    for wave_top in range(n_blocks - 1, -1, -n_pe):
        wave_q = [wave_top - p for p in range(min(n_pe, wave_top + 1))]
        for k in range(wave_top + 1):
            for pe, q in enumerate(wave_q):
                if k <= q:
                    steps.append(Step(pe, q, k))
    return BlockSchedule(block_size, n_pe, tuple(steps))


def make_forward_schedule(
    n_blocks: int, n_pe: int, block_size: int = DEFAULT_BLOCK_SIZE
) -> BlockSchedule:
    """Ascending-Q waves, ascending K; the naive counterpart for comparison."""
    if n_blocks < 1 or n_pe < 1:
        raise ValueError(f"n_blocks and n_pe must be >= 1, got {n_blocks}, {n_pe}")
    steps: list[Step] = []
    for wave_lo in range(0, n_blocks, n_pe):
        wave_q = list(range(wave_lo, min(wave_lo + n_pe, n_blocks)))
        for k in range(max(wave_q) + 1):
            for pe, q in enumerate(wave_q):
                if k <= q:
                    steps.append(Step(pe, q, k))
    return BlockSchedule(block_size, n_pe, tuple(steps))


def schedule_stats(schedule: BlockSchedule) -> dict[str, int]:
    """Reuse metrics for a schedule.

    q_loads counts (pe, q_block) residency intervals; kv_streams counts
    k-block fetch events assuming each maximal run of equal k_block is one
    broadcast; pe_idle_steps counts broadcast slots inside a wave where an
    assigned PE has causally dropped out. A wave boundary is where k_block
    resets (decreases) in the step order.
    """
    schedule.validate()
    steps = schedule.steps

    q_loads = 0
    for pe in range(schedule.n_pe):
        qs = [s.q_block for s in steps if s.pe_id == pe]
        q_loads += sum(1 for i, q in enumerate(qs) if i == 0 or q != qs[i - 1])

    # Split into waves, each wave into k-broadcast slots.
    waves: list[list[Step]] = []
    for s in steps:
        if not waves or s.k_block < waves[-1][-1].k_block:
            waves.append([s])
        else:
            waves[-1].append(s)

    kv_streams = 0
    pe_idle_steps = 0
    for wave in waves:
        slots = sorted({s.k_block for s in wave})
        kv_streams += len(slots)
        for pe in {s.pe_id for s in wave}:
            pe_idle_steps += len(slots) - sum(1 for s in wave if s.pe_id == pe)

    return {"q_loads": q_loads, "kv_streams": kv_streams, "pe_idle_steps": pe_idle_steps}


def naive_attention(inp: AttentionInputs) -> np.ndarray:
    """Materialized-score softmax attention; float64 oracle."""
    q = inp.q.astype(np.float64)
    k = inp.k.astype(np.float64)
    v = inp.v.astype(np.float64)
    scores = q @ k.T / np.sqrt(inp.d_k)
    if inp.causal:
        scores = np.where(np.triu(np.ones_like(scores, dtype=bool), k=1), -np.inf, scores)
    p = np.exp(scores - scores.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    return p @ v


def naive_single_query(q: np.ndarray, k_hist: np.ndarray, v_hist: np.ndarray) -> np.ndarray:
    """Single-query oracle: softmax over the full history, no masking."""
    qv = np.asarray(q, dtype=np.float64).reshape(-1)
    k = np.asarray(k_hist, dtype=np.float64)
    v = np.asarray(v_hist, dtype=np.float64)
    scores = k @ qv / np.sqrt(qv.shape[0])
    p = np.exp(scores - scores.max())
    p /= p.sum()
    return p @ v


def flash_attention_prefill(
    inp: AttentionInputs,
    schedule: BlockSchedule,
    return_state: bool = False,
) -> np.ndarray | tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blocked causal attention driven by a block schedule.

    Each step absorbs one (q_block, k_block) score block into the q block's
    online-softmax state; the final normalization divides by the exponent
    sum. Output is schedule-order independent up to rounding. With
    return_state the per-row running max and sum are returned as well.
    """
    if not inp.causal:
        raise ValueError("prefill attention is causal; set causal=True")
    bs = schedule.block_size
    n_blocks = -(-inp.n // bs)
    schedule.validate(n_blocks)

    inv_scale = np.float32(1.0 / np.sqrt(inp.d_k))
    states: dict[int, AttentionBlockState] = {}
    for _, qb, kb in schedule.steps:
        q0, q1 = qb * bs, min((qb + 1) * bs, inp.n)
        k0, k1 = kb * bs, min((kb + 1) * bs, inp.n)
        scores = (inp.q[q0:q1] @ inp.k[k0:k1].T) * inv_scale
        if kb == qb:
            q_idx = np.arange(q0, q1)[:, None]
            k_idx = np.arange(k0, k1)[None, :]
            scores = np.where(k_idx > q_idx, np.float32(-np.inf), scores)
        if qb not in states:
            states[qb] = AttentionBlockState(q1 - q0, inp.d_k)
        states[qb].absorb(scores, inp.v[k0:k1])

    out = np.empty_like(inp.q)
    m_rows = np.empty(inp.n, dtype=np.float32)
    l_rows = np.empty(inp.n, dtype=np.float32)
    for qb, st in states.items():
        q0, q1 = qb * bs, min((qb + 1) * bs, inp.n)
        out[q0:q1] = st.normalized()
        m_rows[q0:q1] = st.m
        l_rows[q0:q1] = st.l
    if return_state:
        return out, m_rows, l_rows
    return out


@dataclass
class KVCache:
    """Append-only key/value history for autoregressive decode."""

    k_hist: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.float32))
    v_hist: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.float32))

    def __post_init__(self) -> None:
        self.k_hist = np.asarray(self.k_hist, dtype=np.float32)
        self.v_hist = np.asarray(self.v_hist, dtype=np.float32)
        if self.k_hist.shape != self.v_hist.shape:
            raise ValueError("K and V histories must have equal shapes")

    @property
    def t(self) -> int:
        return self.k_hist.shape[0]

    def append(self, k: np.ndarray, v: np.ndarray) -> KVCache:
        k = np.asarray(k, dtype=np.float32).reshape(1, -1)
        v = np.asarray(v, dtype=np.float32).reshape(1, -1)
        if k.shape != v.shape:
            raise ValueError("k and v rows must have equal length")
        if self.t == 0:
            self.k_hist, self.v_hist = k, v
            return self
        if k.shape[1] != self.k_hist.shape[1]:
            raise ValueError(f"dimension mismatch: cache is d={self.k_hist.shape[1]}, row is d={k.shape[1]}")
        self.k_hist = np.vstack([self.k_hist, k])
        self.v_hist = np.vstack([self.v_hist, v])
        return self


def kv_append(cache: KVCache, k: np.ndarray, v: np.ndarray) -> KVCache:
    return cache.append(k, v)


def decode_attention(q: np.ndarray, cache: KVCache, d_k: int | None = None) -> np.ndarray:
    """Single-query attention over the full cache, streamed at block size 1."""
    if cache.t < 1:
        raise ValueError("cannot decode against an empty KV cache")
    qv = np.asarray(q, dtype=np.float32).reshape(-1)
    if qv.shape[0] != cache.k_hist.shape[1]:
        raise ValueError(f"dimension mismatch: q is d={qv.shape[0]}, cache is d={cache.k_hist.shape[1]}")
    dk = qv.shape[0] if d_k is None else d_k
    inv_scale = np.float32(1.0 / np.sqrt(dk))

    m = np.float32(-np.inf)
    l = np.float32(0.0)
    o = np.zeros(cache.v_hist.shape[1], dtype=np.float32)
    for t in range(cache.t):
        s = np.float32(qv @ cache.k_hist[t]) * inv_scale
        m_new = max(m, s)
        carry = np.exp(m - m_new, dtype=np.float32)
        scale = np.exp(s - m_new, dtype=np.float32)
        l = carry * l + scale
        o = carry * o + scale * cache.v_hist[t]
        m = m_new
    return o / l
