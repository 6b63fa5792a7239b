"""Independent reference implementations used to pin expected values.

Everything here deliberately avoids the code paths under test: the normal
CDF is numerically integrated rather than using erf, the bandwidth split is
a brute-force grid search rather than golden-section, utility maximization
is exhaustive, and plan feasibility is re-derived from first principles.
"""

from __future__ import annotations

import math
from collections import OrderedDict

import numpy as np


def mean_and_pop_std(xs: list[float]) -> tuple[float, float]:
    n = len(xs)
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / n
    return mean, math.sqrt(var)


def normal_cdf(z: float) -> float:
    """Standard normal CDF by Simpson quadrature of the density."""
    if z < -12:
        return 0.0
    if z > 12:
        return 1.0
    lo, hi = 0.0, abs(z)
    n = max(4, 2 * int(2000 * (hi - lo) + 1))
    xs = np.linspace(lo, hi, n + 1)
    pdf = np.exp(-0.5 * xs * xs) / math.sqrt(2 * math.pi)
    h = (hi - lo) / n
    area = (h / 3) * (pdf[0] + pdf[-1] + 4 * pdf[1:-1:2].sum() + 2 * pdf[2:-1:2].sum())
    return 0.5 + area if z >= 0 else 0.5 - area


def access_time_raw(
    k: int, pub_rate: float, od_rate: float, b_b: float, b_d: float,
    size: float, request_size: float,
) -> float:
    t_b = (k * size) / (2.0 * b_b) if b_b > 0 else math.inf
    mu = b_d / (size + request_size)
    if od_rate > 0 and mu <= od_rate:
        return math.inf
    t_d = 1.0 / (mu - od_rate) if mu > od_rate else math.inf
    total = 0.0
    if pub_rate > 0:
        total += pub_rate * t_b
    if od_rate > 0:
        total += od_rate * t_d
    return total


def grid_search_split(
    k: int, pub_rate: float, od_rate: float, total_b: float,
    size: float, request_size: float, step_frac: float = 1e-4,
) -> tuple[float, float]:
    """Argmin of the access time over a uniform b_b grid (stable region only)."""
    if od_rate == 0:
        return total_b, 0.0
    if k == 0 or pub_rate == 0:
        return 0.0, total_b
    step = step_frac * total_b
    upper = total_b - od_rate * (size + request_size)
    if upper <= 0:
        raise ValueError("no stable split")
    grid = np.arange(step, upper, step)
    mu = (total_b - grid) / (size + request_size)
    values = pub_rate * (k * size) / (2.0 * grid) + od_rate / (mu - od_rate)
    best = int(np.argmin(values))
    return float(grid[best]), float(total_b - grid[best])


def replay_partition(
    rates: dict[str, float], total_b: float, size: float, request_size: float,
    threshold: float, step_frac: float = 1e-4,
) -> tuple[list[str], bool, float]:
    """Re-run the publish-most-demanded-first loop with the grid split oracle."""
    order = sorted(rates, key=lambda o: (-rates[o], o))

    def evaluate(k: int) -> float:
        pub = sum(rates[o] for o in order[:k])
        od = sum(rates[o] for o in order[k:])
        try:
            b_b, b_d = grid_search_split(
                k, pub, od, total_b, size, request_size, step_frac
            )
        except ValueError:
            return math.inf
        return access_time_raw(k, pub, od, b_b, b_d, size, request_size)

    t0 = evaluate(0)
    if not (math.isfinite(t0) and t0 <= threshold):
        return [], False, t0
    current_k, current_t = 0, t0
    for k in range(1, len(order) + 1):
        t = evaluate(k)
        if not (math.isfinite(t) and t <= threshold):
            break
        current_k, current_t = k, t
    return order[:current_k], True, current_t


def check_plan(plan, request, cost) -> list[str]:
    """First-principles feasibility audit of a retrieval plan."""
    problems = []
    program = request.program
    length = program.cycle_len_slots
    if {r.object_id for r in plan.reads} != set(request.desired):
        problems.append("plan does not cover the desired set exactly")
    prev = None
    switches = 0
    for read in plan.reads:
        channel, cycle_slot = program.directory[read.object_id]
        if channel != read.channel:
            problems.append(f"{read.object_id}: wrong channel {read.channel}")
        if read.slot % length != cycle_slot:
            problems.append(f"{read.object_id}: slot {read.slot} not on its phase")
        if read.slot < request.start:
            problems.append(f"{read.object_id}: before start {request.start}")
        if prev is not None:
            if read.slot <= prev.slot:
                problems.append("slots not strictly increasing")
            if read.channel == prev.channel:
                if read.slot - prev.slot < 1:
                    problems.append("same-channel separation < 1")
            else:
                switches += 1
                if read.slot - prev.slot < 1 + cost.switch_slots:
                    problems.append("cross-channel separation < 1 + switch time")
        prev = read
    if plan.switches != switches:
        problems.append(f"switch count {plan.switches} != recomputed {switches}")
    if plan.reads and plan.total_slots != plan.reads[-1].slot - plan.start_slot + 1:
        problems.append("total_slots inconsistent with the last read")
    if plan.active_slots != len(plan.reads):
        problems.append("active_slots != number of reads")
    return problems


def exhaustive_max_utility(suppliers, utilities, weights, feasible):
    """Global maximum by evaluating every supplier and configuration."""
    from aircell.fidelity import config_utility

    best = None
    for supplier in sorted(suppliers, key=lambda s: s.supplier_id):
        for config in feasible.get(supplier.supplier_id, ()):
            u = config_utility(config, utilities, weights, supplier.f_s)
            if best is None or u > best[0]:
                best = (u, supplier.supplier_id, tuple(config))
    return best


def lru_reference(capacity: int, accesses: list[tuple[str, str]]):
    """Doubly-linked-list style LRU: ("get"|"put", key) -> (keys, evictions)."""
    order: OrderedDict[str, bool] = OrderedDict()
    evictions = []
    for op, key in accesses:
        if op == "get":
            if key in order:
                order.move_to_end(key)
        else:
            if key in order:
                order.move_to_end(key)
                continue
            if len(order) == capacity:
                victim, _ = order.popitem(last=False)
                evictions.append(victim)
            order[key] = True
    return list(order), evictions


def score_admission_replay(capacity: int, offers: list[tuple[str, float, float]]):
    """Replay of score-based admission: (object, score, offered_at) -> kept set.

    Admit into free space; otherwise admit only on a strictly higher score
    than the current minimum, evicting the oldest minimum-score entry.
    """
    kept: dict[str, tuple[float, float]] = {}
    for object_id, score, offered_at in offers:
        if object_id in kept:
            kept[object_id] = (score, offered_at)
            continue
        if len(kept) < capacity:
            kept[object_id] = (score, offered_at)
            continue
        min_score = min(s for s, _ in kept.values())
        if score <= min_score:
            continue
        victim = min(
            (at, oid) for oid, (s, at) in kept.items() if s == min_score
        )[1]
        del kept[victim]
        kept[object_id] = (score, offered_at)
    return set(kept)
