"""Online algorithms: water-filling cover, primal-dual cover+matching.

A step processes one arrival: solve for the water level y, raise lagging
neighbors to y, give the newcomer potential 1-y.  The primal-dual variant
additionally writes edge values that keep the cover cost exactly beta
times the matching value.  Per-step monitors track dual feasibility and
the two primal-dual invariants; violations beyond tolerance raise (they
indicate a bug, not an expected runtime condition).

States are owned by a single run and mutated in place; allocation
functions are shared read-only.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .allocation import AllocationFunction, beta_of
from .errors import (
    InvariantViolation,
    NumericError,
    SideError,
    ValidationError,
)
from .instance import InstanceStream, Side, VertexEvent

DEFAULT_EPS = 1e-10
FEAS_EPS = 1e-9
INV_EPS = 1e-8


@dataclass
class WaterLevelOutcome:
    """Solved level, the raised neighbors, and which side of the dichotomy."""

    level: float
    raised: list[tuple[int, float, float]]
    saturated: bool


def _solve_level(pots, ws, v_weight, func, eps):
    """Maximal y <= 1 with sum_u w_u max(y - y_u, 0) <= v_weight * f(y).

    Breakpoints are the sorted neighbor potentials; between them the
    constraint gap H is smooth, so bisection from the rightmost breakpoint
    with H <= 0 certifies the maximal crossing.  Returns (level, saturated)
    with the dichotomy certified to eps.
    """
    order = np.argsort(pots, kind="stable")
    sp = pots[order]
    sw = ws[order]
    csw = np.concatenate(([0.0], np.cumsum(sw)))
    cswp = np.concatenate(([0.0], np.cumsum(sw * sp)))
    scale = max(1.0, float(csw[-1]), v_weight)

    def gap(t: float) -> float:
        i = int(np.searchsorted(sp, t, side="left"))
        return csw[i] * t - cswp[i] - v_weight * float(func(t))

    if gap(1.0) <= eps:
        return 1.0, False

    lo = 0.0
    if sp.size:
        vals = csw[: sp.size] * sp - cswp[: sp.size] - v_weight * np.asarray(func(sp))
        feas = np.flatnonzero(vals <= 0.0)
        if feas.size:
            lo = float(sp[feas[-1]])
    if gap(lo) > 0.0:
        lo = 0.0
    hi = 1.0
    for _ in range(200):
        if hi - lo <= 1e-15:
            break
        mid = 0.5 * (lo + hi)
        if gap(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    residual = abs(gap(lo))
    if residual > eps * scale:
        raise NumericError(
            f"water level not certified: |gap({lo})| = {residual:.3e} "
            f"exceeds {eps * scale:.3e}"
        )
    return lo, True


def water_level(
    neighbor_potentials,
    v_weight: float,
    func: AllocationFunction,
    eps: float = DEFAULT_EPS,
) -> WaterLevelOutcome:
    """Solve one arrival's level given (potential, weight) pairs.

    The returned raised list holds (input index, old, new) for every
    neighbor strictly below the level.  Exactly one of level = 1 or
    saturation holds, certified within eps.
    """
    pairs = list(neighbor_potentials)
    pots = np.array([p for p, _ in pairs], dtype=float)
    ws = np.array([w for _, w in pairs], dtype=float)
    if pots.size and (pots.min() < 0.0 or pots.max() > 1.0):
        raise ValidationError("neighbor potentials must lie in [0, 1]")
    if v_weight < 0.0 or eps <= 0.0:
        raise ValidationError("v_weight must be >= 0 and eps > 0")
    level, saturated = _solve_level(pots, ws, v_weight, func, eps)
    raised = [
        (i, float(pots[i]), level) for i in range(pots.size) if pots[i] < level
    ]
    return WaterLevelOutcome(level=level, raised=raised, saturated=saturated)


# ------------------------------------------------------------------- states


@dataclass
class CoverState:
    """Monotone fractional cover potentials with arrival values."""

    weights: np.ndarray
    y: np.ndarray
    z_arrival: np.ndarray
    arrived: list[int]
    is_arrived: np.ndarray
    total_cost: float = 0.0

    @classmethod
    def fresh(cls, n: int, weights=None) -> "CoverState":
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        return cls(
            weights=w,
            y=np.zeros(n),
            z_arrival=np.zeros(n),
            arrived=[],
            is_arrived=np.zeros(n, dtype=bool),
        )


@dataclass
class MatchingState:
    """Edge values set once at creation, plus per-vertex aggregates."""

    x_agg: np.ndarray
    x_by_step: dict[int, tuple[np.ndarray, np.ndarray]]
    total_value: float = 0.0
    matched_to: np.ndarray | None = None  # greedy baseline partners
    # primal-dual monitor: f(1-z_u) - F(z_u) frozen at arrival, and the
    # current slack of each vertex's budget inequality
    inv1_base: np.ndarray | None = None
    inv1_slack: np.ndarray | None = None

    @classmethod
    def fresh(cls, n: int) -> "MatchingState":
        return cls(x_agg=np.zeros(n), x_by_step={})

    def x_of(self, u: int, v: int) -> float:
        """Value of edge (u, v) where v is the later arrival."""
        nbrs, vals = self.x_by_step[v]
        idx = np.flatnonzero(nbrs == u)
        if idx.size == 0:
            raise KeyError(f"no edge ({u}, {v})")
        return float(vals[idx[0]])


def _arrive(cover: CoverState, event: VertexEvent):
    if np.any(~cover.is_arrived[event.neighbors]):
        raise ValidationError(f"event {event.id}: neighbor not yet arrived")
    if cover.is_arrived[event.id]:
        raise ValidationError(f"event {event.id} arrived twice")


def greedy_allocation_step(
    cover: CoverState,
    event: VertexEvent,
    func: AllocationFunction,
    eps: float = DEFAULT_EPS,
) -> tuple[CoverState, WaterLevelOutcome]:
    """Water-filling cover update for one arrival (state is mutated)."""
    _arrive(cover, event)
    nbrs = event.neighbors
    pots = cover.y[nbrs]
    level, saturated = _solve_level(
        pots, cover.weights[nbrs], float(event.weight), func, eps
    )
    raised_mask = pots < level
    ridx = nbrs[raised_mask]
    raised = [(int(u), float(p), level) for u, p in zip(ridx, pots[raised_mask])]
    cover.total_cost += float(
        np.sum(cover.weights[ridx] * (level - pots[raised_mask]))
    )
    cover.y[ridx] = level
    v = event.id
    cover.y[v] = 1.0 - level
    cover.z_arrival[v] = 1.0 - level
    cover.total_cost += event.weight * (1.0 - level)
    cover.is_arrived[v] = True
    cover.arrived.append(v)
    return cover, WaterLevelOutcome(level=level, raised=raised, saturated=saturated)


def primal_dual_step(
    cover: CoverState,
    matching: MatchingState,
    event: VertexEvent,
    func: AllocationFunction,
    beta: float,
    eps: float = DEFAULT_EPS,
) -> tuple[CoverState, MatchingState, WaterLevelOutcome]:
    """Cover update as in water-filling, plus edge values for raised neighbors.

    Raised edge (u, v) gets w_u (y - y_u) / beta * (1 + (1-y)/f(y)); other
    new edges get 0.  Both maintained invariants are re-checked for every
    touched vertex; failure beyond tolerance raises InvariantViolation.
    """
    if matching.inv1_base is None:
        matching.inv1_base = np.zeros(len(cover.y))
        matching.inv1_slack = np.full(len(cover.y), -np.inf)
    nbrs = event.neighbors
    old_pots = cover.y[nbrs].copy()
    cover, outcome = greedy_allocation_step(cover, event, func, eps)
    level = outcome.level
    v = event.id

    if level < 1.0:
        fy = float(func(level))
        factor = 1.0 + (1.0 - level) / fy if fy > 0.0 else 1.0
    else:
        factor = 1.0  # (1-y)/f(y) vanishes as y -> 1
    raised_mask = old_pots < level
    xvals = np.zeros(nbrs.size)
    xvals[raised_mask] = (
        cover.weights[nbrs[raised_mask]] * (level - old_pots[raised_mask]) / beta * factor
    )
    matching.x_by_step[v] = (nbrs, xvals)
    matching.x_agg[nbrs] += xvals
    xv = float(xvals.sum())
    matching.x_agg[v] += xv
    matching.total_value += xv

    # refresh budget slacks for touched vertices; all others are unchanged
    tbl = func.table()
    zv = cover.z_arrival[v]
    matching.inv1_base[v] = float(func(1.0 - zv)) - float(tbl.eval(zv))
    touched = np.concatenate((nbrs[raised_mask], [v])).astype(np.int64)
    w_t = cover.weights[touched]
    rhs = w_t * (cover.y[touched] + matching.inv1_base[touched] + tbl.eval(cover.y[touched])) / beta
    matching.inv1_slack[touched] = matching.x_agg[touched] - rhs

    worst = float(np.max(matching.inv1_slack[touched]))
    if worst > INV_EPS * max(1.0, float(np.max(w_t))):
        bad = int(touched[int(np.argmax(matching.inv1_slack[touched]))])
        raise InvariantViolation(
            f"budget invariant failed at vertex {bad} (slack {worst:.3e})",
            vertex=bad,
            slack=worst,
        )
    inv2 = abs(cover.total_cost - beta * matching.total_value)
    if inv2 > INV_EPS * max(1.0, cover.total_cost):
        raise InvariantViolation(
            f"cost-coupling invariant failed after vertex {v} "
            f"(|dual - beta*primal| = {inv2:.3e})",
            vertex=v,
            slack=inv2,
        )
    return cover, matching, outcome


def greedy_baseline_step(
    cover: CoverState,
    matching: MatchingState,
    event: VertexEvent,
) -> tuple[CoverState, MatchingState, WaterLevelOutcome]:
    """Match to the lowest-id unmatched arrived neighbor; cover both ends."""
    if event.weight != 1.0 or np.any(cover.weights != 1.0):
        raise ValidationError("greedy baseline requires unit weights")
    _arrive(cover, event)
    if matching.matched_to is None:
        matching.matched_to = np.full(len(cover.y), -1, dtype=np.int64)
    v = event.id
    partner = -1
    for u in sorted(int(u) for u in event.neighbors):
        if matching.matched_to[u] < 0:
            partner = u
            break
    raised = []
    if partner >= 0:
        matching.matched_to[partner] = v
        matching.matched_to[v] = partner
        nbrs = event.neighbors
        xvals = np.where(nbrs == partner, 1.0, 0.0)
        matching.x_by_step[v] = (nbrs, xvals)
        matching.x_agg[partner] += 1.0
        matching.x_agg[v] += 1.0
        matching.total_value += 1.0
        for u in (partner, v):
            if cover.y[u] < 1.0:
                raised.append((u, float(cover.y[u]), 1.0))
                cover.total_cost += 1.0 - cover.y[u]
                cover.y[u] = 1.0
    else:
        matching.x_by_step[v] = (event.neighbors, np.zeros(event.neighbors.size))
    cover.is_arrived[v] = True
    cover.arrived.append(v)
    level = 1.0 - cover.y[v]
    return cover, matching, WaterLevelOutcome(level=float(level), raised=raised, saturated=False)


# ----------------------------------------------------------------- rounding


def round_bipartite(final_y, sides, t: float) -> set[int]:
    """Threshold rounding: lefts with y >= t, rights with y >= 1 - t.

    With dual-feasible potentials every revealed edge ends up covered, and
    because potentials only rise, a fixed t yields a monotone integral
    cover across the run.
    """
    y = np.asarray(final_y, dtype=float)
    cover: set[int] = set()
    for v, side in enumerate(sides):
        if side is Side.LEFT:
            if y[v] >= t:
                cover.add(v)
        elif side is Side.RIGHT:
            if y[v] >= 1.0 - t:
                cover.add(v)
        else:
            raise SideError(f"vertex {v} has no side label")
    return cover


def check_rounding_covers(stream: InstanceStream, cover: set[int], upto: int | None = None) -> bool:
    u, v = stream.edge_arrays()
    if upto is not None:
        keep = v < upto
        u, v = u[keep], v[keep]
    in_cover = np.zeros(len(stream), dtype=bool)
    in_cover[list(cover)] = True
    return bool(np.all(in_cover[u] | in_cover[v]))


# -------------------------------------------------------------------- runs


@dataclass
class StepRow:
    step: int
    vertex: int
    level: float
    cover_cost: float
    matching_value: float
    inv1_slack: float
    inv2_slack: float


@dataclass
class RunTrace:
    """Per-arrival totals plus final states and run-wide monitors."""

    algo: str
    func_desc: str
    rows: list[StepRow]
    cover: CoverState
    matching: MatchingState | None
    feas_slack: float  # most negative y_u + y_v - 1 seen on a revealed edge
    zero_weight_arrivals: list[int] = field(default_factory=list)

    def cover_costs(self) -> list[float]:
        return [r.cover_cost for r in self.rows]

    def matching_values(self) -> list[float]:
        return [r.matching_value for r in self.rows]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("step,vertex,level,cover_cost,matching_value,inv1_slack,inv2_slack\n")
        for r in self.rows:
            out.write(
                f"{r.step},{r.vertex},{r.level:.17g},{r.cover_cost:.17g},"
                f"{r.matching_value:.17g},{r.inv1_slack:.17g},{r.inv2_slack:.17g}\n"
            )
        return out.getvalue()


ALGOS = ("waterfill", "primal-dual", "greedy")


def run_stream(
    stream: InstanceStream,
    algo: str,
    func: AllocationFunction | None = None,
    eps: float = DEFAULT_EPS,
    trace_prefixes: bool = True,
) -> RunTrace:
    """Process all arrivals in order and record per-arrival totals.

    Fully deterministic: identical inputs give identical traces.  Dual
    feasibility of each newly revealed edge is checked as it appears
    (earlier edges stay feasible because potentials never decrease).
    """
    if algo not in ALGOS:
        raise ValidationError(f"unknown algorithm {algo!r}")
    if algo != "greedy" and func is None:
        raise ValidationError(f"{algo} requires an allocation function")
    n = len(stream)
    cover = CoverState.fresh(n, stream.weights())
    matching = MatchingState.fresh(n) if algo != "waterfill" else None
    beta = beta_of(func).beta if algo == "primal-dual" else 0.0
    rows: list[StepRow] = []
    feas_slack = 0.0
    zero_weight: list[int] = []

    for event in stream.events:
        if event.weight == 0.0 and event.id >= stream.offline_count:
            zero_weight.append(event.id)
        if algo == "waterfill":
            cover, outcome = greedy_allocation_step(cover, event, func, eps)
            inv1 = inv2 = 0.0
            total_match = 0.0
        elif algo == "primal-dual":
            cover, matching, outcome = primal_dual_step(
                cover, matching, event, func, beta, eps
            )
            inv1 = float(np.max(matching.inv1_slack[cover.arrived]))
            inv2 = abs(cover.total_cost - beta * matching.total_value) / max(
                1.0, cover.total_cost
            )
            total_match = matching.total_value
        else:
            cover, matching, outcome = greedy_baseline_step(cover, matching, event)
            inv1 = inv2 = 0.0
            total_match = matching.total_value
        if event.neighbors.size:
            edge_gap = float(
                np.min(cover.y[event.neighbors] + cover.y[event.id] - 1.0)
            )
            feas_slack = min(feas_slack, edge_gap)
            if edge_gap < -FEAS_EPS:
                raise InvariantViolation(
                    f"dual feasibility failed at vertex {event.id} "
                    f"(gap {edge_gap:.3e})",
                    vertex=event.id,
                    slack=edge_gap,
                )
        rows.append(
            StepRow(
                step=len(rows),
                vertex=event.id,
                level=outcome.level,
                cover_cost=cover.total_cost,
                matching_value=total_match,
                inv1_slack=inv1,
                inv2_slack=inv2,
            )
        )
    return RunTrace(
        algo=algo,
        func_desc=func.describe() if func is not None else "none",
        rows=rows,
        cover=cover,
        matching=matching,
        feas_slack=feas_slack,
        zero_weight_arrivals=zero_weight,
    )


# -------------------------------------------------------------- full checks


@dataclass
class InvariantReport:
    max_inv1_slack: float
    inv2_rel_slack: float
    min_edge_gap: float
    max_capacity_excess: float


def check_invariants(
    cover: CoverState,
    matching: MatchingState,
    func: AllocationFunction,
    beta: float,
    stream: InstanceStream,
    upto: int | None = None,
) -> InvariantReport:
    """Recompute every invariant from scratch over an arrival prefix.

    Independent of the incremental bookkeeping the steps maintain: edge
    values are re-aggregated, totals re-summed, and the per-vertex budget
    inequality re-derived with fresh quadrature.  Reports slacks, never
    raises.
    """
    n = len(stream) if upto is None else upto
    arrived = [i for i in cover.arrived if i < n]
    x_agg = np.zeros(len(cover.y))
    total_x = 0.0
    for v in arrived:
        if v in matching.x_by_step:
            nbrs, vals = matching.x_by_step[v]
            x_agg[nbrs] += vals
            x_agg[v] += vals.sum()
            total_x += float(vals.sum())
    tbl = func.table()
    max_inv1 = -np.inf
    for u in arrived:
        zu = cover.z_arrival[u]
        rhs = (
            cover.weights[u]
            * (cover.y[u] + float(func(1.0 - zu)) + float(tbl.eval(cover.y[u])) - float(tbl.eval(zu)))
            / beta
        )
        max_inv1 = max(max_inv1, float(x_agg[u] - rhs))
    total_y = float(np.sum(cover.weights[arrived] * cover.y[arrived]))
    inv2 = abs(total_y - beta * total_x) / max(1.0, total_y)
    u, v = stream.edge_arrays()
    keep = v < n
    if keep.any():
        min_gap = float(np.min(cover.y[u[keep]] + cover.y[v[keep]] - 1.0))
    else:
        min_gap = 0.0
    cap_excess = float(np.max(x_agg[arrived] - cover.weights[arrived])) if arrived else 0.0
    return InvariantReport(
        max_inv1_slack=max_inv1 if arrived else 0.0,
        inv2_rel_slack=inv2,
        min_edge_gap=min_gap,
        max_capacity_excess=cap_excess,
    )
