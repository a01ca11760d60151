"""Design-space exploration for the static/swapped partition split.

A design point allocates resources to the always-resident projection engine
and to the two attention variants that time-share the reconfigurable
partition, so the partition is sized by the elementwise max of the two
variants. The solver minimizes prefill latency plus an alpha-weighted pair
of decode step latencies (long and short context) subject to the device
budget, a routability margin below it, and a prefill responsiveness bound.

The space is a discrete grid over projection parallelism and per-variant PE
counts, mapped to resource vectors through a linear per-unit footprint
table. Small grids are enumerated exhaustively; larger ones are seeded by a
coarse subsample and refined by coordinate descent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

from .perf import DEFAULT_PER_PORT_BW, PhaseLatencyModel, decode_step_latency, prefill_latency
from .resources import RESOURCE_CLASSES, PortMap, ResourceVector, kkvv_ports, qkvo_ports

EQ2 = "eq2"
EQ4 = "eq4"
ROUTABILITY = "routability"

# KV260-class device budget.
KV260_TOTAL = ResourceVector(lut=117120, ff=234240, dsp=1248, bram=144, uram=64)


class InfeasibleDesignError(ValueError):
    def __init__(self, violation: str):
        self.violation = violation
        super().__init__(f"design point is infeasible: {violation}")


class NoRoutableDesignError(ValueError):
    def __init__(self, trace: tuple[tuple[DesignPoint, str], ...]):
        self.trace = trace
        super().__init__("no routable design: shrink grid exhausted")


@dataclass(frozen=True)
class ResourceTable:
    """Linear footprint estimates: static overhead plus per-unit module costs."""

    proj_static: ResourceVector
    proj_unit: ResourceVector
    attn_pre_unit: ResourceVector
    attn_dec_unit: ResourceVector

    def design_point(
        self,
        proj_par: int,
        pe_pre: int,
        par_dec: int,
        ports_pre: PortMap,
        ports_dec: PortMap,
    ) -> DesignPoint:
        if min(proj_par, pe_pre, par_dec) < 1:
            raise ValueError("parallelism counts must be >= 1")
        return DesignPoint(
            r_proj=self.proj_static + self.proj_unit.scale(proj_par),
            r_att_pre=self.attn_pre_unit.scale(pe_pre),
            r_att_dec=self.attn_dec_unit.scale(par_dec),
            port_map_pre=ports_pre,
            port_map_dec=ports_dec,
            pe_count_pre=pe_pre,
            pe_count_dec=par_dec,
            proj_parallelism=proj_par,
        )


def default_resource_table() -> ResourceTable:
    """Footprint estimates for the KV260-class target, per measured module
    breakdowns of comparable engines; attention units are per-PE costs."""
    return ResourceTable(
        proj_static=ResourceVector(lut=27642, ff=33608, dsp=52, bram=38, uram=40),
        proj_unit=ResourceVector(lut=42854, ff=50752, dsp=320, bram=5.5, uram=0),
        attn_pre_unit=ResourceVector(lut=7100, ff=10513, dsp=76, bram=3.5, uram=1),
        attn_dec_unit=ResourceVector(lut=6605, ff=6809, dsp=70, bram=4, uram=1),
    )


@dataclass(frozen=True)
class DesignPoint:
    """One candidate allocation; the attention variants share the partition."""

    r_proj: ResourceVector
    r_att_pre: ResourceVector
    r_att_dec: ResourceVector
    port_map_pre: PortMap
    port_map_dec: PortMap
    pe_count_pre: int
    pe_count_dec: int
    proj_parallelism: int

    @property
    def dynamic_partition(self) -> ResourceVector:
        return self.r_att_pre.max(self.r_att_dec)

    @property
    def total(self) -> ResourceVector:
        return self.r_proj + self.dynamic_partition


@dataclass(frozen=True)
class DseConfig:
    r_total: ResourceVector
    t_pre_max: float
    alpha: float = 0.7
    l_long: int = 2048
    l_short: int = 64
    l_prefill: int = 768
    routability_margin: float = 0.87
    proj_par_grid: tuple[int, ...] = (1, 2)
    pe_pre_grid: tuple[int, ...] = (1, 2, 4, 8)
    par_dec_grid: tuple[int, ...] = (1, 2, 4, 8)
    exhaustive_cap: int = 10000
    table: ResourceTable = field(default_factory=default_resource_table)
    ports_pre: PortMap = field(default_factory=lambda: qkvo_ports(DEFAULT_PER_PORT_BW))
    ports_dec: PortMap = field(default_factory=lambda: kkvv_ports(DEFAULT_PER_PORT_BW))

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.l_long > self.l_short >= 1:
            raise ValueError(f"need l_long > l_short >= 1, got {self.l_long}, {self.l_short}")
        if not 0.0 < self.routability_margin <= 1.0:
            raise ValueError(f"routability_margin must be in (0, 1], got {self.routability_margin}")
        if self.t_pre_max <= 0:
            raise ValueError(f"t_pre_max must be positive, got {self.t_pre_max}")
        for name in ("proj_par_grid", "pe_pre_grid", "par_dec_grid"):
            grid = getattr(self, name)
            if not grid or list(grid) != sorted(set(grid)) or grid[0] < 1:
                raise ValueError(f"{name} must be a nonempty ascending grid of positive counts")

    def point(self, proj_par: int, pe_pre: int, par_dec: int) -> DesignPoint:
        return self.table.design_point(proj_par, pe_pre, par_dec, self.ports_pre, self.ports_dec)


@dataclass(frozen=True)
class Feasibility:
    ok: bool
    violation: str | None = None


def feasible(d: DesignPoint, c: DseConfig, m: PhaseLatencyModel) -> Feasibility:
    """Classify a design: device budget, routability margin, prefill bound."""
    total = d.total
    if not total.fits_within(c.r_total):
        return Feasibility(False, EQ2)
    if not total.fits_within(c.r_total.scale(c.routability_margin)):
        return Feasibility(False, ROUTABILITY)
    t_pre = prefill_latency(m, d.r_proj, d.r_att_pre, c.l_prefill, d.port_map_pre)
    if not math.isfinite(t_pre) or t_pre > c.t_pre_max:
        return Feasibility(False, EQ4)
    return Feasibility(True, None)


def _latencies(m: PhaseLatencyModel, d: DesignPoint, c: DseConfig) -> tuple[float, float, float]:
    t_pre = prefill_latency(m, d.r_proj, d.r_att_pre, c.l_prefill, d.port_map_pre)
    t_long = decode_step_latency(m, d.r_proj, d.r_att_dec, c.l_long, d.port_map_dec)
    t_short = decode_step_latency(m, d.r_proj, d.r_att_dec, c.l_short, d.port_map_dec)
    return t_pre, t_long, t_short


def objective(m: PhaseLatencyModel, d: DesignPoint, c: DseConfig) -> float:
    """Prefill latency plus alpha-weighted long/short decode step latencies."""
    feas = feasible(d, c, m)
    if not feas.ok:
        raise InfeasibleDesignError(feas.violation or "unknown")
    t_pre, t_long, t_short = _latencies(m, d, c)
    return t_pre + c.alpha * t_long + (1.0 - c.alpha) * t_short


@dataclass(frozen=True)
class EvaluatedPoint:
    design: DesignPoint
    t_pre: float
    t_dec_long: float
    t_dec_short: float
    objective: float
    feasibility: str  # "ok" or the violated constraint
    grid_index: tuple[int, int, int]


@dataclass(frozen=True)
class DseResult:
    best: DesignPoint | None
    objective: float
    pareto: tuple[tuple[DesignPoint, float, float, float], ...]
    infeasible_count: int
    evaluated: tuple[EvaluatedPoint, ...]
    shrink_trace: tuple[tuple[DesignPoint, str], ...] = ()

    @property
    def feasible_found(self) -> bool:
        return self.best is not None


def _tie_key(p: EvaluatedPoint) -> tuple:
    dyn = p.design.dynamic_partition
    lex = tuple(getattr(p.design.total, cls) for cls in RESOURCE_CLASSES)
    return (p.objective, dyn.lut, lex, p.grid_index)


def _pareto_filter(points: list[EvaluatedPoint]) -> list[EvaluatedPoint]:
    ranked = sorted(points, key=lambda p: (p.t_pre, p.t_dec_long, p.t_dec_short, p.grid_index))
    kept: list[EvaluatedPoint] = []
    for p in ranked:
        dominated = any(
            q.t_pre <= p.t_pre
            and q.t_dec_long <= p.t_dec_long
            and q.t_dec_short <= p.t_dec_short
            and (q.t_pre < p.t_pre or q.t_dec_long < p.t_dec_long or q.t_dec_short < p.t_dec_short)
            for q in kept
        )
        if not dominated:
            kept.append(p)
    return kept


def _evaluate(c: DseConfig, m: PhaseLatencyModel, idx: tuple[int, int, int]) -> EvaluatedPoint:
    d = c.point(c.proj_par_grid[idx[0]], c.pe_pre_grid[idx[1]], c.par_dec_grid[idx[2]])
    feas = feasible(d, c, m)
    t_pre, t_long, t_short = _latencies(m, d, c)
    obj = t_pre + c.alpha * t_long + (1.0 - c.alpha) * t_short
    return EvaluatedPoint(d, t_pre, t_long, t_short, obj, feas.violation or "ok", idx)


def search(c: DseConfig, m: PhaseLatencyModel) -> DseResult:
    """Minimize the objective over the grid.

    Exhaustive when the grid is within the cap; otherwise a coarse subsample
    seeds coordinate descent over the full grid. Deterministic either way.
    An empty feasible set is reported explicitly (best is None).
    """
    dims = (len(c.proj_par_grid), len(c.pe_pre_grid), len(c.par_dec_grid))
    size = dims[0] * dims[1] * dims[2]
    seen: dict[tuple[int, int, int], EvaluatedPoint] = {}

    def eval_at(idx: tuple[int, int, int]) -> EvaluatedPoint:
        if idx not in seen:
            seen[idx] = _evaluate(c, m, idx)
        return seen[idx]

    if size <= c.exhaustive_cap:
        for idx in itertools.product(*(range(n) for n in dims)):
            eval_at(idx)
    else:
        stride = max(1, math.ceil((size / c.exhaustive_cap) ** (1.0 / 3.0)))
        for idx in itertools.product(*(range(0, n, stride) for n in dims)):
            eval_at(idx)
        seeds = [p for p in seen.values() if p.feasibility == "ok"]
        if seeds:
            current = min(seeds, key=_tie_key)
            improved = True
            while improved:
                improved = False
                for dim in range(3):
                    for delta in (-1, 1):
                        idx = list(current.grid_index)
                        idx[dim] += delta
                        if not 0 <= idx[dim] < dims[dim]:
                            continue
                        cand = eval_at(tuple(idx))
                        if cand.feasibility == "ok" and _tie_key(cand) < _tie_key(current):
                            current = cand
                            improved = True

    evaluated = tuple(seen[idx] for idx in sorted(seen))
    ok_points = [p for p in evaluated if p.feasibility == "ok"]
    infeasible_count = len(evaluated) - len(ok_points)
    if not ok_points:
        return DseResult(None, math.inf, (), infeasible_count, evaluated)
    best = min(ok_points, key=_tie_key)
    pareto = tuple(
        (p.design, p.t_pre, p.t_dec_long, p.t_dec_short) for p in _pareto_filter(ok_points)
    )
    return DseResult(best.design, best.objective, pareto, infeasible_count, evaluated)


def search_with_shrink(c: DseConfig, m: PhaseLatencyModel) -> DseResult:
    """Search as if fully routable, then walk the winner down to the margin.

    Models the implementation fallback: the solver picks a point ignoring
    congestion, timing closure fails, and the dynamic partition shrinks one
    grid level at a time until it fits. Evaluated points are reclassified
    against the real margin so the reported result stays consistent.
    """
    relaxed = replace(c, routability_margin=1.0)
    searched = search(relaxed, m)
    evaluated = tuple(
        replace(p, feasibility=feasible(p.design, c, m).violation or "ok")
        for p in searched.evaluated
    )
    ok_points = [p for p in evaluated if p.feasibility == "ok"]
    infeasible_count = len(evaluated) - len(ok_points)
    pareto = tuple(
        (p.design, p.t_pre, p.t_dec_long, p.t_dec_short) for p in _pareto_filter(ok_points)
    )
    if searched.best is None:
        return DseResult(None, math.inf, pareto, infeasible_count, evaluated)
    shrunk = shrink_until_routable(searched.best, c, m)
    return DseResult(
        best=shrunk.design,
        objective=objective(m, shrunk.design, c),
        pareto=pareto,
        infeasible_count=infeasible_count,
        evaluated=evaluated,
        shrink_trace=shrunk.trace,
    )


@dataclass(frozen=True)
class ShrinkResult:
    design: DesignPoint
    trace: tuple[tuple[DesignPoint, str], ...]


def shrink_until_routable(d: DesignPoint, c: DseConfig, m: PhaseLatencyModel) -> ShrinkResult:
    """Step the dynamic partition down grid levels until the design fits.

    Mirrors the implementation fallback when timing closure fails: reduce
    PE count or parallelism in the reconfigurable partition, largest module
    first, one grid level at a time. Raises when the grid is exhausted.
    """
    trace: list[tuple[DesignPoint, str]] = []
    current = d
    while True:
        feas = feasible(current, c, m)
        if feas.ok:
            return ShrinkResult(current, tuple(trace))
        i_pre = c.pe_pre_grid.index(current.pe_count_pre)
        i_dec = c.par_dec_grid.index(current.pe_count_dec)
        # Shrink the variant currently binding the partition's dominant class.
        prefer_pre = current.r_att_pre.lut >= current.r_att_dec.lut
        order = [("pre", i_pre), ("dec", i_dec)] if prefer_pre else [("dec", i_dec), ("pre", i_pre)]
        stepped = False
        for which, level in order:
            if level == 0:
                continue
            if which == "pre":
                nxt = c.point(current.proj_parallelism, c.pe_pre_grid[level - 1], current.pe_count_dec)
                reason = f"{feas.violation}: pe_pre {current.pe_count_pre} -> {nxt.pe_count_pre}"
            else:
                nxt = c.point(current.proj_parallelism, current.pe_count_pre, c.par_dec_grid[level - 1])
                reason = f"{feas.violation}: par_dec {current.pe_count_dec} -> {nxt.pe_count_dec}"
            trace.append((nxt, reason))
            current = nxt
            stepped = True
            break
        if not stepped:
            raise NoRoutableDesignError(tuple(trace))
