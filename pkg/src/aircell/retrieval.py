"""Multi-channel retrieval planning under tuning and switching constraints.

A client that has already read the aggregate index knows, for every desired
object, its channel and slot within the cycle. It can listen to one channel
at a time; retrieving an object occupies its slot; hopping channels costs
``switch_slots`` extra slots, so two retrievals on different channels must
be at least 1 + switch_slots apart while same-channel retrievals only need
to land on distinct slots.

Planners: Row Scan (one pass per interesting channel, minimal switches),
Next Object Access (earliest-feasible greedy), a TSP-style order search
(nearest-neighbour order refined by 2-opt on the simulated elapsed time),
and an exhaustive permutation search for small requests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .air_schedule import BroadcastProgram


class RefusedSize(Exception):
    """Too many objects for exhaustive search (factorial guard)."""


@dataclass(frozen=True)
class CostModel:
    """Timing and energy constants for one client radio."""

    switch_slots: int = 1
    e_active: float = 1.0
    e_doze: float = 0.05
    e_switch: float = 0.5

    def __post_init__(self) -> None:
        if self.switch_slots < 1:
            raise ValueError("channel switching consumes at least one slot")
        if min(self.e_active, self.e_doze, self.e_switch) < 0:
            raise ValueError("energies must be nonnegative")
        if not self.e_doze < self.e_active:
            raise ValueError("dozing must cost less than active listening")


@dataclass(frozen=True)
class PlannedRead:
    object_id: str
    channel: int
    slot: int  # absolute


@dataclass(frozen=True)
class RetrievalPlan:
    reads: tuple[PlannedRead, ...]
    start_slot: int
    total_slots: int  # response time: slots from start through last read
    switches: int
    active_slots: int


@dataclass(frozen=True)
class RetrievalRequest:
    desired: frozenset[str]
    program: BroadcastProgram
    start: int  # first absolute slot available for retrieval

    def __post_init__(self) -> None:
        missing = [o for o in self.desired if o not in self.program.directory]
        if missing:
            raise ValueError(f"not in program: {sorted(missing)}")
        if not self.desired:
            raise ValueError("desired set is empty")


def _next_occurrence(cycle_slot: int, length: int, min_abs: int) -> int:
    """Smallest absolute slot >= min_abs congruent to cycle_slot mod length."""
    return min_abs + (cycle_slot - min_abs) % length


def _earliest_feasible(
    channel: int,
    cycle_slot: int,
    length: int,
    prev_slot: int | None,
    prev_channel: int | None,
    start: int,
    sigma: int,
) -> tuple[int, bool]:
    """Earliest retrieval slot for an object given the previous read."""
    if prev_slot is None:
        return _next_occurrence(cycle_slot, length, start), False
    if channel == prev_channel:
        return _next_occurrence(cycle_slot, length, prev_slot + 1), False
    return _next_occurrence(cycle_slot, length, prev_slot + 1 + sigma), True


def simulate_order(
    order: list[str], program: BroadcastProgram, start: int, cost: CostModel
) -> RetrievalPlan:
    """Schedule a fixed retrieval order, each object at its earliest slot."""
    length = program.cycle_len_slots
    reads: list[PlannedRead] = []
    switches = 0
    prev_slot: int | None = None
    prev_channel: int | None = None
    for obj in order:
        channel, cycle_slot = program.directory[obj]
        slot, switched = _earliest_feasible(
            channel, cycle_slot, length, prev_slot, prev_channel, start, cost.switch_slots
        )
        switches += switched
        reads.append(PlannedRead(obj, channel, slot))
        prev_slot, prev_channel = slot, channel
    return RetrievalPlan(
        reads=tuple(reads),
        start_slot=start,
        total_slots=reads[-1].slot - start + 1,
        switches=switches,
        active_slots=len(reads),
    )


def row_scan(
    req: RetrievalRequest, cost: CostModel, channel_order: str = "ascending"
) -> RetrievalPlan:
    """One pass over each channel that carries desired objects.

    Channels are visited in ascending index order by default (or by first
    desired occurrence with channel_order="first_object"); within a pass the
    channel's desired objects are taken in the order they come around, so
    each channel needs at most one cycle and the switch count is exactly
    (interesting channels - 1).
    """
    program, length = req.program, req.program.cycle_len_slots
    by_channel: dict[int, list[tuple[int, str]]] = {}
    for obj in sorted(req.desired):
        channel, cycle_slot = program.directory[obj]
        by_channel.setdefault(channel, []).append((cycle_slot, obj))

    if channel_order == "ascending":
        channels = sorted(by_channel)
    elif channel_order == "first_object":
        channels = sorted(
            by_channel,
            key=lambda ch: min(
                (s - req.start) % length for s, _ in by_channel[ch]
            ),
        )
    else:
        raise ValueError(f"unknown channel_order {channel_order!r}")

    order: list[str] = []
    tune_in = req.start
    for ch in channels:
        in_pass = sorted(by_channel[ch], key=lambda e: ((e[0] - tune_in) % length, e[1]))
        order.extend(obj for _, obj in in_pass)
        last = _next_occurrence(in_pass[-1][0], length, tune_in)
        tune_in = last + 1 + cost.switch_slots
    return simulate_order(order, program, req.start, cost)


def next_object_access(req: RetrievalRequest, cost: CostModel) -> RetrievalPlan:
    """Greedy: always fetch the remaining object with the earliest feasible slot."""
    program, length = req.program, req.program.cycle_len_slots
    remaining = sorted(req.desired)
    order: list[str] = []
    prev_slot: int | None = None
    prev_channel: int | None = None
    while remaining:
        best: tuple[int, bool, int, str] | None = None
        for obj in remaining:
            channel, cycle_slot = program.directory[obj]
            slot, switched = _earliest_feasible(
                channel, cycle_slot, length, prev_slot, prev_channel,
                req.start, cost.switch_slots,
            )
            key = (slot, switched, channel, obj)
            if best is None or key < best:
                best = key
        slot, _, channel, obj = best
        order.append(obj)
        remaining.remove(obj)
        prev_slot, prev_channel = slot, channel
    return simulate_order(order, program, req.start, cost)


def tsp_order(
    req: RetrievalRequest, cost: CostModel, max_iterations: int = 10_000
) -> RetrievalPlan:
    """Nearest-neighbour order (the greedy plan) improved by 2-opt reversals.

    Tour cost is the simulated elapsed slot count of executing the order
    under the conflict rules; the search is deterministic and stops at a
    local optimum or after ``max_iterations`` candidate reversals.
    """
    program = req.program
    order = [r.object_id for r in next_object_access(req, cost).reads]
    best_plan = simulate_order(order, program, req.start, cost)
    n = len(order)
    iterations = 0
    improved = True
    while improved and iterations < max_iterations:
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                iterations += 1
                candidate = order[:i] + order[i : j + 1][::-1] + order[j + 1 :]
                plan = simulate_order(candidate, program, req.start, cost)
                if plan.total_slots < best_plan.total_slots:
                    order, best_plan = candidate, plan
                    improved = True
                if iterations >= max_iterations:
                    break
            if iterations >= max_iterations:
                break
    return best_plan


def brute_force(
    req: RetrievalRequest, cost: CostModel, max_objects: int = 8
) -> RetrievalPlan:
    """Exact optimum over all retrieval orders (small requests only).

    Minimizes response slots, then switch count; among remaining ties the
    lexicographically smallest object order wins (guaranteed by enumerating
    permutations of the sorted ids).
    """
    if len(req.desired) > max_objects:
        raise RefusedSize(f"{len(req.desired)} objects > limit {max_objects}")
    best: RetrievalPlan | None = None
    for perm in itertools.permutations(sorted(req.desired)):
        plan = simulate_order(list(perm), req.program, req.start, cost)
        if best is None or (plan.total_slots, plan.switches) < (
            best.total_slots,
            best.switches,
        ):
            best = plan
    return best


def plan_as_dict(plan: RetrievalPlan) -> dict:
    """JSON-ready trace of a plan, for dumping into run artifacts."""
    return {
        "start_slot": plan.start_slot,
        "total_slots": plan.total_slots,
        "switches": plan.switches,
        "active_slots": plan.active_slots,
        "reads": [
            {"object_id": r.object_id, "channel": r.channel, "slot": r.slot}
            for r in plan.reads
        ],
    }


def account(plan: RetrievalPlan, cost: CostModel) -> dict[str, float]:
    """Response time and energy for a plan: listen, doze, and switch terms."""
    doze = plan.total_slots - plan.active_slots - cost.switch_slots * plan.switches
    energy = (
        plan.active_slots * cost.e_active
        + doze * cost.e_doze
        + plan.switches * cost.e_switch
    )
    return {
        "response_slots": plan.total_slots,
        "active_slots": plan.active_slots,
        "doze_slots": doze,
        "switches": plan.switches,
        "energy": energy,
    }
