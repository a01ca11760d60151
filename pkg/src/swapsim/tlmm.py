"""Table-lookup ternary matrix multiplication reference kernels.

Ternary weights in {-1, 0, +1} are packed into base-3 group indices: a group
of G weights maps to sum_k (w_k + 1) * 3^k, so each index lies in [0, 3^G).
A lookup table built from G activations holds every signed combination of
those activations; a GEMV then reduces to index-lookup-accumulate per group.

All kernel arithmetic is integer (int64 accumulators), so results are
exactly comparable against the naive multiply-accumulate oracle.
Dequantization is an explicit separate step.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

DEFAULT_GROUP_SIZE = 5
MAX_GROUP_SIZE = 6  # 3^6 = 729 indices; larger groups gain nothing at table cost


def _check_group_size(group_size: int) -> None:
    if not 1 <= group_size <= MAX_GROUP_SIZE:
        raise ValueError(f"group_size must be in 1..{MAX_GROUP_SIZE}, got {group_size}")


@dataclass(frozen=True)
class TernaryMatrix:
    """Dense ternary weight matrix, row-major, every element in {-1, 0, +1}."""

    rows: int
    cols: int
    values: np.ndarray = field(repr=False)  # shape (rows, cols), int8

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.int8).reshape(self.rows, self.cols)
        if not np.isin(v, (-1, 0, 1)).all():
            raise ValueError("ternary matrix elements must be -1, 0 or +1")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_array(cls, array: np.ndarray) -> TernaryMatrix:
        a = np.asarray(array)
        if a.ndim != 2:
            raise ValueError(f"expected a 2-D array, got ndim={a.ndim}")
        return cls(a.shape[0], a.shape[1], a.astype(np.int8))


@dataclass(frozen=True)
class PackedWeights:
    """Base-3 packed ternary weights: one index in [0, 3^G) per weight group."""

    rows: int
    cols: int
    group_size: int
    packed: np.ndarray = field(repr=False)  # shape (rows, n_groups), int32

    def __post_init__(self) -> None:
        _check_group_size(self.group_size)
        n_groups = -(-self.cols // self.group_size)
        p = np.asarray(self.packed, dtype=np.int32).reshape(self.rows, n_groups)
        if p.size and (p.min() < 0 or p.max() >= 3**self.group_size):
            raise ValueError(f"packed indices must lie in [0, {3 ** self.group_size})")
        object.__setattr__(self, "packed", p)

    @property
    def n_groups(self) -> int:
        return self.packed.shape[1]


@dataclass(frozen=True)
class LookupTable:
    """Precomputed signed sums of one activation group, indexed by weight code.

    entries[idx] = sum_k w_k(idx) * x_k where w_k(idx) is the k-th base-3
    digit of idx mapped to {-1, 0, +1}.
    """

    group_size: int
    entries: np.ndarray = field(repr=False)  # shape (3^G,), int64

    def __post_init__(self) -> None:
        _check_group_size(self.group_size)
        e = np.asarray(self.entries, dtype=np.int64)
        if e.shape != (3**self.group_size,):
            raise ValueError(f"expected {3 ** self.group_size} entries, got {e.shape}")
        object.__setattr__(self, "entries", e)

    @property
    def zero_index(self) -> int:
        """Index whose weights are all zero (every base-3 digit equals 1)."""
        return (3**self.group_size - 1) // 2

    def mirror(self, idx: int) -> int:
        """Index with every weight negated."""
        return 3**self.group_size - 1 - idx


@dataclass(frozen=True)
class ActivationVector:
    """INT8 activations plus the dequantization scale."""

    values: np.ndarray = field(repr=False)
    scale: float = 1.0

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.ndim != 1:
            raise ValueError("activation vector must be 1-D")
        if v.size and (v.min() < -128 or v.max() > 127):
            raise ValueError("activations must fit the signed 8-bit range")
        object.__setattr__(self, "values", v.astype(np.int8))

    @property
    def length(self) -> int:
        return self.values.shape[0]


@functools.lru_cache(maxsize=MAX_GROUP_SIZE)
def _digit_weights(group_size: int) -> np.ndarray:
    """All 3^G weight groups: row idx holds the digits of idx mapped to {-1,0,+1}."""
    idx = np.arange(3**group_size, dtype=np.int64)
    digits = (idx[:, None] // 3 ** np.arange(group_size, dtype=np.int64)) % 3
    return (digits - 1).astype(np.int64)


def pack_weights(w: TernaryMatrix, group_size: int = DEFAULT_GROUP_SIZE) -> PackedWeights:
    """Pack a ternary matrix into base-3 group indices.

    A final partial group is zero-padded (digit 1), which leaves lookup
    results unchanged. Round-trips exactly through unpack_weights.
    """
    _check_group_size(group_size)
    n_groups = -(-w.cols // group_size)
    padded = np.ones((w.rows, n_groups * group_size), dtype=np.int64)  # digit 1 == weight 0
    padded[:, : w.cols] = w.values.astype(np.int64) + 1
    digits = padded.reshape(w.rows, n_groups, group_size)
    powers = 3 ** np.arange(group_size, dtype=np.int64)
    packed = (digits * powers).sum(axis=2)
    return PackedWeights(w.rows, w.cols, group_size, packed.astype(np.int32))


def unpack_weights(p: PackedWeights) -> TernaryMatrix:
    """Inverse of pack_weights; padding digits are dropped."""
    idx = p.packed.astype(np.int64)
    digits = (idx[:, :, None] // 3 ** np.arange(p.group_size, dtype=np.int64)) % 3
    values = (digits - 1).reshape(p.rows, -1)[:, : p.cols]
    return TernaryMatrix(p.rows, p.cols, values.astype(np.int8))


def build_lookup_table(x_group: np.ndarray, group_size: int | None = None) -> LookupTable:
    """Precompute every add/subtract combination of one activation group."""
    x = np.asarray(x_group, dtype=np.int64)
    if x.ndim != 1:
        raise ValueError("activation group must be 1-D")
    g = x.shape[0] if group_size is None else group_size
    if x.shape[0] != g:
        raise ValueError(f"expected {g} activations, got {x.shape[0]}")
    _check_group_size(g)
    entries = _digit_weights(g) @ x
    return LookupTable(g, entries)


def _group_tables(x: np.ndarray, group_size: int, n_groups: int) -> np.ndarray:
    """Lookup tables for every group of x, shape (3^G, n_groups)."""
    padded = np.zeros(n_groups * group_size, dtype=np.int64)
    padded[: x.shape[0]] = x.astype(np.int64)
    groups = padded.reshape(n_groups, group_size)
    return _digit_weights(group_size) @ groups.T


def tlmm_gemv(w: PackedWeights, x: ActivationVector) -> np.ndarray:
    """Index-lookup-accumulate GEMV; exact int64 accumulators.

    Tables are rebuilt per call from the activation groups, mirroring the
    per-value-group precompute of the engine.
    """
    if x.length != w.cols:
        raise ValueError(f"dimension mismatch: weights have {w.cols} cols, x has {x.length}")
    tables = _group_tables(x.values, w.group_size, w.n_groups)
    looked_up = tables[w.packed, np.arange(w.n_groups)]
    return looked_up.sum(axis=1, dtype=np.int64)


def tlmm_gemm(w: PackedWeights, batch: np.ndarray) -> np.ndarray:
    """Batch of independent GEMVs; batch column n is one activation vector.

    Returns an int64 array of shape (rows, n); column order is preserved.
    """
    x = np.asarray(batch)
    if x.ndim != 2 or x.shape[0] != w.cols:
        raise ValueError(f"dimension mismatch: expected ({w.cols}, n) batch, got {x.shape}")
    out = np.empty((w.rows, x.shape[1]), dtype=np.int64)
    for n in range(x.shape[1]):
        out[:, n] = tlmm_gemv(w, ActivationVector(x[:, n]))
    return out


def naive_ternary_gemv(w: TernaryMatrix, x: ActivationVector) -> np.ndarray:
    """Ground-truth multiply-accumulate, independent of the lookup path."""
    if x.length != w.cols:
        raise ValueError(f"dimension mismatch: weights have {w.cols} cols, x has {x.length}")
    return (w.values.astype(np.int64) * x.values.astype(np.int64)).sum(axis=1)


def dequantize(accumulators: np.ndarray, scale: float) -> np.ndarray:
    """Explicit dequantization step: integer accumulators times the scale."""
    return np.asarray(accumulators, dtype=np.float64) * scale
