"""Hardware resource vectors and DDR port mappings.

A configuration is described per resource class (LUT/FF/DSP/BRAM/URAM);
BRAM counts may be fractional (half-blocks exist on the target family).
Port maps assign each high-performance DDR port a tensor role and expose
the bandwidth effectively available for KV-cache streaming.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields

RESOURCE_CLASSES = ("lut", "ff", "dsp", "bram", "uram")


@dataclass(frozen=True)
class ResourceVector:
    """Per-class resource allocation. Componentwise ordering and max."""

    lut: float = 0.0
    ff: float = 0.0
    dsp: float = 0.0
    bram: float = 0.0
    uram: float = 0.0

    def __post_init__(self) -> None:
        for f in fields(self):
            v = float(getattr(self, f.name))
            if v < 0:
                raise ValueError(f"resource {f.name} must be nonnegative, got {v}")
            object.__setattr__(self, f.name, v)

    def __add__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(*(getattr(self, c) + getattr(other, c) for c in RESOURCE_CLASSES))

    def scale(self, factor: float) -> ResourceVector:
        return ResourceVector(*(getattr(self, c) * factor for c in RESOURCE_CLASSES))

    def max(self, other: ResourceVector) -> ResourceVector:
        """Elementwise maximum (the partition must fit each variant per class)."""
        return ResourceVector(*(max(getattr(self, c), getattr(other, c)) for c in RESOURCE_CLASSES))

    def fits_within(self, bound: ResourceVector) -> bool:
        """Componentwise <= comparison, boundary inclusive."""
        return all(getattr(self, c) <= getattr(bound, c) for c in RESOURCE_CLASSES)

    def as_dict(self) -> dict[str, float]:
        return {c: getattr(self, c) for c in RESOURCE_CLASSES}


class Role(enum.Enum):
    """Tensor role assigned to a DDR port."""

    Q = "Q"
    K = "K"
    V = "V"
    OUT = "OUT"
    SHARED = "SHARED"


@dataclass(frozen=True)
class PortMap:
    """Role assignment for the device's HP DDR ports, one role per port."""

    roles: tuple[Role, ...]
    per_port_bw: float  # bytes/s per port

    def __post_init__(self) -> None:
        if len(self.roles) < 1:
            raise ValueError("port map needs at least one port")
        if self.per_port_bw <= 0:
            raise ValueError(f"per_port_bw must be positive, got {self.per_port_bw}")
        for r in self.roles:
            if not isinstance(r, Role):
                raise ValueError(f"invalid port role: {r!r}")

    @property
    def n_ports(self) -> int:
        return len(self.roles)

    def bandwidth(self, roles: frozenset[Role] | None = None) -> float:
        """Aggregate bandwidth of the ports serving the given roles (all if None)."""
        if roles is None:
            return self.per_port_bw * self.n_ports
        return self.per_port_bw * sum(1 for r in self.roles if r in roles)


KV_ROLES = frozenset({Role.K, Role.V})


def effective_kv_bandwidth(ports: PortMap) -> float:
    """Bandwidth available for KV-cache reads: ports assigned K or V."""
    return ports.bandwidth(KV_ROLES)


def qkvo_ports(per_port_bw: float) -> PortMap:
    """Baseline mapping: one port each for Q, K, V, and the output stream."""
    return PortMap((Role.Q, Role.K, Role.V, Role.OUT), per_port_bw)


def kkvv_ports(per_port_bw: float) -> PortMap:
    """Decode-optimized mapping: two ports on K and two on V.

    Q is a single token streamed through a bypass at kernel launch and the
    output token is buffered locally, so neither consumes a dedicated port
    while the KV cache is being read.
    """
    return PortMap((Role.K, Role.K, Role.V, Role.V), per_port_bw)
