"""Deterministic slot-based engine composing the cell's mechanisms.

A scenario fully determines a run: sources with normally distributed
inter-update times (resampled if nonpositive), clients with caches and QoS
settings arranged in a neighbour topology, and either a peer-to-peer
resolution chain or a broadcast cell with a published/on-demand split,
air indexing, and request batching. Every random draw comes from a named
substream of the master seed, so toggling one subsystem never perturbs
another's stream and identical seeds give byte-identical metrics.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import air_schedule, broadcast_plan, fidelity, retrieval
from .cache import CacheEntry, ClientCache, PolicyKind
from .freshness import SourceObject, accepts
from .p2p import InformationManager, LinkCosts, P2PCell, Resolution

SCHEMA_ID = "aircell-scenario/1"


class ScenarioError(ValueError):
    """One or more schema violations; carries the full list."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


def substream(seed: int, *labels) -> np.random.Generator:
    """A generator for one named entity, split off the master seed."""
    tag = "/".join(str(x) for x in labels)
    digest = hashlib.sha256(tag.encode()).digest()[:8]
    return np.random.default_rng(
        np.random.SeedSequence([seed, int.from_bytes(digest, "big")])
    )


# --------------------------------------------------------------------------
# Scenario schema
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectSpec:
    object_id: str
    mtbu: float
    stdv_mtbu: float
    reachable: bool = True


@dataclass(frozen=True)
class ClientSpec:
    client_id: str
    cache_capacity: int
    policy: PolicyKind
    default_qos: float
    request_rate: float
    qos_overrides: dict[str, float] = field(default_factory=dict)
    providers: tuple[str, ...] = ()


@dataclass(frozen=True)
class CellSpec:
    channels: int = 1
    scheme: str = "one_m"
    m: int = 1
    slot_duration: float = 1.0
    dedicated_index_channel: bool = False
    total_bandwidth: float = 10.0
    request_size: float = 0.25
    threshold: float = math.inf
    batching_window: float = 0.0
    replan_interval: int = 0
    cost_model: retrieval.CostModel = retrieval.CostModel()


@dataclass(frozen=True)
class Scenario:
    seed: int
    duration_slots: int
    objects: tuple[ObjectSpec, ...]
    clients: tuple[ClientSpec, ...]
    adjacency: dict[str, set[str]]
    resolution_mode: str = "p2p"  # "p2p" | "broadcast"
    caching: bool = True
    p2p: bool = True
    overhearing: bool = False
    zipf_theta: float = 0.8
    costs: LinkCosts = LinkCosts()
    cell: CellSpec | None = None
    default_ttl: float | None = None
    tick_interval: int = 1
    read_window: int = 256
    history_burnin: int = 12
    fidelity_config: dict | None = None
    schema_id: str = SCHEMA_ID

    def index_scheme(self) -> air_schedule.IndexScheme:
        cell = self.cell
        if cell.scheme == "one_m":
            return air_schedule.one_m(cell.m)
        return air_schedule.IndexScheme(cell.scheme)


_TOP_KEYS = {
    "schema_id", "seed", "duration_slots", "objects", "clients", "adjacency",
    "resolution_mode", "toggles", "workload", "costs", "cell", "cache",
    "history_burnin", "fidelity",
}
_OBJECT_KEYS = {"object_id", "mtbu", "stdv_mtbu", "reachable"}
_OBJECTS_COMPACT_KEYS = {"count", "mtbu", "stdv_mtbu", "mtbu_range", "id_prefix"}
_CLIENT_KEYS = {
    "client_id", "cache_capacity", "policy", "default_qos", "request_rate",
    "qos", "providers",
}
_CLIENTS_COMPACT_KEYS = {
    "count", "cache_capacity", "policy", "default_qos", "request_rate", "qos",
    "id_prefix",
}
_CELL_KEYS = {
    "channels", "scheme", "m", "slot_duration", "dedicated_index_channel",
    "total_bandwidth", "request_size", "threshold", "batching_window",
    "replan_interval", "cost_model",
}


def _expand_objects(spec, seed: int, errs: list[str]) -> list[ObjectSpec]:
    if isinstance(spec, dict):
        for key in spec.keys() - _OBJECTS_COMPACT_KEYS:
            errs.append(f"objects: unknown key {key!r}")
        count = spec.get("count", 0)
        prefix = spec.get("id_prefix", "obj")
        if "mtbu_range" in spec:
            lo, hi = spec["mtbu_range"]
            rng = substream(seed, "object-params")
            mtbus = rng.uniform(lo, hi, size=count)
        else:
            mtbus = [spec.get("mtbu", 100.0)] * count
        stdv = spec.get("stdv_mtbu", 0.2 * float(np.mean(mtbus)) if count else 0.0)
        width = len(str(max(count - 1, 1)))
        return [
            ObjectSpec(f"{prefix}{i:0{width}d}", float(mtbus[i]), float(stdv))
            for i in range(count)
        ]
    out = []
    for i, o in enumerate(spec):
        for key in o.keys() - _OBJECT_KEYS:
            errs.append(f"objects[{i}]: unknown key {key!r}")
        try:
            out.append(
                ObjectSpec(
                    str(o["object_id"]), float(o["mtbu"]),
                    float(o.get("stdv_mtbu", 0.0)), bool(o.get("reachable", True)),
                )
            )
        except KeyError as e:
            errs.append(f"objects[{i}]: missing key {e.args[0]!r}")
    return out


def _expand_clients(spec, errs: list[str]) -> list[ClientSpec]:
    def parse_one(c: dict, where: str, client_id: str) -> ClientSpec | None:
        try:
            policy = PolicyKind(c.get("policy", "lru"))
        except ValueError:
            errs.append(f"{where}: unknown policy {c.get('policy')!r}")
            return None
        qos = {str(k): float(v) for k, v in c.get("qos", {}).items()}
        return ClientSpec(
            client_id, int(c.get("cache_capacity", 8)), policy,
            float(c.get("default_qos", 0.0)), float(c.get("request_rate", 0.0)),
            qos, tuple(c.get("providers", ())),
        )

    if isinstance(spec, dict):
        for key in spec.keys() - _CLIENTS_COMPACT_KEYS:
            errs.append(f"clients: unknown key {key!r}")
        count = spec.get("count", 0)
        prefix = spec.get("id_prefix", "client")
        width = len(str(max(count - 1, 1)))
        out = []
        for i in range(count):
            parsed = parse_one(spec, "clients", f"{prefix}{i:0{width}d}")
            if parsed is not None:
                out.append(parsed)
        return out
    out = []
    for i, c in enumerate(spec):
        for key in c.keys() - _CLIENT_KEYS:
            errs.append(f"clients[{i}]: unknown key {key!r}")
        if "client_id" not in c:
            errs.append(f"clients[{i}]: missing key 'client_id'")
            continue
        parsed = parse_one(c, f"clients[{i}]", str(c["client_id"]))
        if parsed is not None:
            out.append(parsed)
    return out


def _expand_adjacency(
    spec, client_ids: list[str], errs: list[str]
) -> dict[str, set[str]]:
    if spec is None:
        return {cid: set() for cid in client_ids}
    if isinstance(spec, dict) and spec.get("kind") == "ring":
        degree = int(spec.get("degree", 2))
        half = degree // 2
        n = len(client_ids)
        adj: dict[str, set[str]] = {cid: set() for cid in client_ids}
        for i, cid in enumerate(client_ids):
            for step in range(1, half + 1):
                adj[cid].add(client_ids[(i + step) % n])
                adj[cid].add(client_ids[(i - step) % n])
            adj[cid].discard(cid)
        return adj
    adj = {cid: set() for cid in client_ids}
    known = set(client_ids)
    for cid, neighbors in spec.items():
        if cid == "kind":
            errs.append(f"adjacency: unknown topology kind {spec.get('kind')!r}")
            return adj
        if cid not in known:
            errs.append(f"adjacency: unknown client {cid!r}")
            continue
        for nid in neighbors:
            if nid not in known:
                errs.append(f"adjacency[{cid}]: unknown neighbour {nid!r}")
            elif nid != cid:
                adj[cid].add(nid)
    # symmetrize: radio links are bidirectional
    for cid, neighbors in list(adj.items()):
        for nid in neighbors:
            adj[nid].add(cid)
    return adj


def scenario_from_dict(data: dict) -> Scenario:
    """Validate a parsed scenario document, collecting every violation."""
    errs: list[str] = []
    if not isinstance(data, dict):
        raise ScenarioError(["scenario document must be a mapping"])
    for key in data.keys() - _TOP_KEYS:
        errs.append(f"unknown key {key!r}")
    schema_id = data.get("schema_id", SCHEMA_ID)
    if schema_id != SCHEMA_ID:
        errs.append(f"schema_id: expected {SCHEMA_ID!r}, got {schema_id!r}")

    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        errs.append("seed: must be an integer")
        seed = 0
    duration = data.get("duration_slots", 0)
    if not isinstance(duration, int) or duration < 0:
        errs.append("duration_slots: must be a nonnegative integer")
        duration = 0

    objects = _expand_objects(data.get("objects", []), seed, errs)
    for i, o in enumerate(objects):
        if o.mtbu <= 0:
            errs.append(f"objects[{i}]: mtbu must be > 0")
        if o.stdv_mtbu < 0:
            errs.append(f"objects[{i}]: stdv_mtbu must be >= 0")
    if len({o.object_id for o in objects}) != len(objects):
        errs.append("objects: duplicate object ids")

    clients = _expand_clients(data.get("clients", []), errs)
    if len({c.client_id for c in clients}) != len(clients):
        errs.append("clients: duplicate client ids")
    object_ids = {o.object_id for o in objects}
    for i, c in enumerate(clients):
        if c.cache_capacity < 1:
            errs.append(f"clients[{i}]: cache_capacity must be >= 1")
        if not 0.0 <= c.default_qos <= 1.0:
            errs.append(f"clients[{i}]: default_qos must be in [0, 1]")
        if c.request_rate < 0:
            errs.append(f"clients[{i}]: request_rate must be >= 0")
        for oid, q in c.qos_overrides.items():
            if oid not in object_ids:
                errs.append(f"clients[{i}].qos: unknown object {oid!r}")
            if not 0.0 <= q <= 1.0:
                errs.append(f"clients[{i}].qos[{oid}]: must be in [0, 1]")
        for oid in c.providers:
            if oid not in object_ids:
                errs.append(f"clients[{i}].providers: unknown object {oid!r}")

    adjacency = _expand_adjacency(
        data.get("adjacency"), [c.client_id for c in clients], errs
    )

    toggles = data.get("toggles", {})
    for key in toggles.keys() - {"p2p", "caching", "overhearing"}:
        errs.append(f"toggles: unknown key {key!r}")
    workload = data.get("workload", {})
    for key in workload.keys() - {"zipf_theta"}:
        errs.append(f"workload: unknown key {key!r}")
    zipf_theta = float(workload.get("zipf_theta", 0.8))
    if zipf_theta < 0:
        errs.append("workload.zipf_theta: must be >= 0")

    costs_d = data.get("costs", {})
    for key in costs_d.keys() - {"local", "hop", "source"}:
        errs.append(f"costs: unknown key {key!r}")
    costs = LinkCosts(
        float(costs_d.get("local", 0.0)), float(costs_d.get("hop", 1.0)),
        float(costs_d.get("source", 5.0)),
    )
    if min(costs.local, costs.hop, costs.source) < 0:
        errs.append("costs: latencies must be >= 0")

    mode = data.get("resolution_mode", "p2p")
    if mode not in ("p2p", "broadcast"):
        errs.append(f"resolution_mode: must be 'p2p' or 'broadcast', got {mode!r}")

    cell = None
    if "cell" in data:
        c = data["cell"]
        for key in c.keys() - _CELL_KEYS:
            errs.append(f"cell: unknown key {key!r}")
        cm = c.get("cost_model", {})
        try:
            cost_model = retrieval.CostModel(
                int(cm.get("switch_slots", 1)), float(cm.get("e_active", 1.0)),
                float(cm.get("e_doze", 0.05)), float(cm.get("e_switch", 0.5)),
            )
        except ValueError as e:
            errs.append(f"cell.cost_model: {e}")
            cost_model = retrieval.CostModel()
        cell = CellSpec(
            channels=int(c.get("channels", 1)),
            scheme=str(c.get("scheme", "one_m")),
            m=int(c.get("m", 1)),
            slot_duration=float(c.get("slot_duration", 1.0)),
            dedicated_index_channel=bool(c.get("dedicated_index_channel", False)),
            total_bandwidth=float(c.get("total_bandwidth", 10.0)),
            request_size=float(c.get("request_size", 0.25)),
            threshold=float(c.get("threshold", math.inf)),
            batching_window=float(c.get("batching_window", 0.0)),
            replan_interval=int(c.get("replan_interval", 0)),
            cost_model=cost_model,
        )
        if cell.channels < 1:
            errs.append("cell.channels: must be >= 1")
        if cell.total_bandwidth <= 0:
            errs.append("cell.total_bandwidth: must be > 0")
        if cell.request_size < 0:
            errs.append("cell.request_size: must be >= 0")
        if cell.batching_window < 0:
            errs.append("cell.batching_window: must be >= 0")
        if cell.scheme not in ("none", "distributed", "once_per_cycle", "one_m"):
            errs.append(f"cell.scheme: unknown scheme {cell.scheme!r}")
        if cell.m < 1:
            errs.append("cell.m: must be >= 1")
    elif mode == "broadcast":
        errs.append("resolution_mode 'broadcast' requires a cell section")
    if mode == "broadcast" and not objects:
        errs.append("resolution_mode 'broadcast' requires at least one object")

    cache_d = data.get("cache", {})
    for key in cache_d.keys() - {"default_ttl", "tick_interval", "read_window"}:
        errs.append(f"cache: unknown key {key!r}")
    if cache_d.get("default_ttl") is not None and float(cache_d["default_ttl"]) <= 0:
        errs.append("cache.default_ttl: must be > 0")
    if int(cache_d.get("tick_interval", 1)) < 1:
        errs.append("cache.tick_interval: must be >= 1")
    if int(cache_d.get("read_window", 256)) < 2:
        errs.append("cache.read_window: must be >= 2")

    burnin = int(data.get("history_burnin", 12))
    if burnin < 3:
        errs.append("history_burnin: need at least 3 writes for usable statistics")

    if errs:
        raise ScenarioError(errs)
    return Scenario(
        seed=seed,
        duration_slots=duration,
        objects=tuple(objects),
        clients=tuple(clients),
        adjacency=adjacency,
        resolution_mode=mode,
        caching=bool(toggles.get("caching", True)),
        p2p=bool(toggles.get("p2p", True)),
        overhearing=bool(toggles.get("overhearing", False)),
        zipf_theta=zipf_theta,
        costs=costs,
        cell=cell,
        default_ttl=(
            float(cache_d["default_ttl"]) if cache_d.get("default_ttl") is not None
            else None
        ),
        tick_interval=int(cache_d.get("tick_interval", 1)),
        read_window=int(cache_d.get("read_window", 256)),
        history_burnin=burnin,
        fidelity_config=data.get("fidelity"),
        schema_id=schema_id,
    )


def scenario_to_dict(scn: Scenario) -> dict:
    """Serialize back to the document form (round-trips through the parser)."""
    doc: dict = {
        "schema_id": scn.schema_id,
        "seed": scn.seed,
        "duration_slots": scn.duration_slots,
        "objects": [
            {
                "object_id": o.object_id, "mtbu": o.mtbu,
                "stdv_mtbu": o.stdv_mtbu, "reachable": o.reachable,
            }
            for o in scn.objects
        ],
        "clients": [
            {
                "client_id": c.client_id, "cache_capacity": c.cache_capacity,
                "policy": c.policy.value, "default_qos": c.default_qos,
                "request_rate": c.request_rate, "qos": dict(c.qos_overrides),
                "providers": list(c.providers),
            }
            for c in scn.clients
        ],
        "adjacency": {cid: sorted(ns) for cid, ns in sorted(scn.adjacency.items())},
        "resolution_mode": scn.resolution_mode,
        "toggles": {
            "p2p": scn.p2p, "caching": scn.caching, "overhearing": scn.overhearing,
        },
        "workload": {"zipf_theta": scn.zipf_theta},
        "costs": {
            "local": scn.costs.local, "hop": scn.costs.hop, "source": scn.costs.source,
        },
        "cache": {
            "default_ttl": scn.default_ttl, "tick_interval": scn.tick_interval,
            "read_window": scn.read_window,
        },
        "history_burnin": scn.history_burnin,
    }
    if scn.cell is not None:
        cm = scn.cell.cost_model
        doc["cell"] = {
            "channels": scn.cell.channels, "scheme": scn.cell.scheme,
            "m": scn.cell.m, "slot_duration": scn.cell.slot_duration,
            "dedicated_index_channel": scn.cell.dedicated_index_channel,
            "total_bandwidth": scn.cell.total_bandwidth,
            "request_size": scn.cell.request_size,
            "threshold": scn.cell.threshold,
            "batching_window": scn.cell.batching_window,
            "replan_interval": scn.cell.replan_interval,
            "cost_model": {
                "switch_slots": cm.switch_slots, "e_active": cm.e_active,
                "e_doze": cm.e_doze, "e_switch": cm.e_switch,
            },
        }
    if scn.fidelity_config is not None:
        doc["fidelity"] = scn.fidelity_config
    return doc


# --------------------------------------------------------------------------
# Workload
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Workload:
    """Per-client request streams: (slot, object_id), reproducible from seed."""

    per_client: dict[str, tuple[tuple[int, str], ...]]

    def total_requests(self) -> int:
        return sum(len(v) for v in self.per_client.values())


def zipf_pmf(n: int, theta: float) -> np.ndarray:
    """Popularity of ranks 0..n-1, proportional to 1 / (rank+1)^theta."""
    weights = 1.0 / np.power(np.arange(1, n + 1, dtype=float), theta)
    return weights / weights.sum()


def generate_workload(scenario: Scenario) -> Workload:
    """Poisson arrivals per client with Zipf-distributed object popularity."""
    n = len(scenario.objects)
    pmf = zipf_pmf(n, scenario.zipf_theta) if n else None
    ids = [o.object_id for o in scenario.objects]
    per_client: dict[str, tuple[tuple[int, str], ...]] = {}
    for spec in sorted(scenario.clients, key=lambda c: c.client_id):
        rng = substream(scenario.seed, "workload", spec.client_id)
        times: list[float] = []
        if spec.request_rate > 0 and n:
            t = rng.exponential(1.0 / spec.request_rate)
            while t < scenario.duration_slots:
                times.append(t)
                t += rng.exponential(1.0 / spec.request_rate)
        if times:
            picks = rng.choice(n, size=len(times), p=pmf)
            stream = tuple((int(t), ids[k]) for t, k in zip(times, picks))
        else:
            stream = ()
        per_client[spec.client_id] = stream
    return Workload(per_client)


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QueryRecord:
    query_id: int
    client_id: str
    object_id: str
    issued_at: int
    resolution: str
    latency_slots: float
    staleness_slots: float
    qos: float
    qos_met: bool
    p_nm: float


@dataclass
class Metrics:
    schema_id: str
    seed: int
    duration_slots: int
    records: list[QueryRecord] = field(default_factory=list)
    counters: dict[str, float] = field(default_factory=dict)
    per_client_energy: dict[str, float] = field(default_factory=dict)
    plan: dict | None = None
    fidelity_selection: dict | None = None

    def summary(self) -> dict[str, float]:
        served = [r for r in self.records if r.resolution != "unresolved"]
        cached = [
            r for r in self.records
            if r.resolution in ("local_cache", "neighbor_cache")
        ]
        violations = sum(1 for r in cached if not r.qos_met)
        out = {
            "issued": float(self.counters.get("issued", 0)),
            "answered": float(self.counters.get("answered", 0)),
            "unresolved": float(self.counters.get("unresolved", 0)),
            "source_load": float(self.counters.get("source_load", 0)),
            "requeries": float(self.counters.get("requeries", 0)),
            "qos_violations": float(violations),
            "mean_latency_slots": (
                sum(r.latency_slots for r in served) / len(served) if served else 0.0
            ),
            "mean_staleness_slots": (
                sum(r.staleness_slots for r in served) / len(served) if served else 0.0
            ),
            "broadcast_slots": float(self.counters.get("broadcast_slots", 0)),
            "on_demand_responses": float(self.counters.get("on_demand_responses", 0)),
            "batching_saved": float(self.counters.get("batching_saved", 0)),
            "total_energy": float(sum(self.per_client_energy.values())),
        }
        return out

    def to_dict(self) -> dict:
        return {
            "schema_id": self.schema_id,
            "seed": self.seed,
            "duration_slots": self.duration_slots,
            "counters": {k: self.counters[k] for k in sorted(self.counters)},
            "per_client_energy": {
                k: self.per_client_energy[k] for k in sorted(self.per_client_energy)
            },
            "plan": self.plan,
            "fidelity_selection": self.fidelity_selection,
            "summary": self.summary(),
            "records": [
                {
                    "query_id": r.query_id, "client_id": r.client_id,
                    "object_id": r.object_id, "issued_at": r.issued_at,
                    "resolution": r.resolution, "latency_slots": r.latency_slots,
                    "staleness_slots": r.staleness_slots, "qos": r.qos,
                    "qos_met": r.qos_met, "p_nm": r.p_nm,
                }
                for r in self.records
            ],
        }

    def to_json_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, indent=None).encode()

    CSV_COLUMNS = (
        "query_id", "client_id", "object_id", "resolution",
        "latency_slots", "staleness_slots", "qos", "qos_met",
    )

    def to_csv_bytes(self) -> bytes:
        lines = [",".join(self.CSV_COLUMNS)]
        for r in self.records:
            lines.append(
                f"{r.query_id},{r.client_id},{r.object_id},{r.resolution},"
                f"{r.latency_slots!r},{r.staleness_slots!r},{r.qos!r},"
                f"{int(r.qos_met)}"
            )
        for key, value in self.summary().items():
            lines.append(f"summary,*,{key},{value!r},,,,")
        for client in sorted(self.per_client_energy):
            lines.append(
                f"summary,{client},energy,{self.per_client_energy[client]!r},,,,"
            )
        return ("\n".join(lines) + "\n").encode()


# --------------------------------------------------------------------------
# Engine
# --------------------------------------------------------------------------

class _UpdateProcess:
    """Normal inter-update draws, resampled if nonpositive."""

    def __init__(self, spec: ObjectSpec, seed: int, burnin: int):
        self.spec = spec
        self.rng = substream(seed, "updates", spec.object_id)
        self.source = SourceObject(spec.object_id, reachable=spec.reachable)
        draws = [self._draw() for _ in range(burnin)]
        acc = 0.0
        past = []
        for d in draws:
            acc += d
            past.append(-acc)
        for t in sorted(past):
            self.source.write(t)
        self.next_update = past[0] + self._draw()

    def _draw(self) -> float:
        if self.spec.stdv_mtbu == 0.0:
            return self.spec.mtbu
        while True:
            d = float(self.rng.normal(self.spec.mtbu, self.spec.stdv_mtbu))
            if d > 0:
                return d

    def advance_to(self, t: float) -> None:
        while self.next_update <= t:
            self.source.write(self.next_update)
            self.next_update += self._draw()


def _plan_cell(
    scenario: Scenario, rates: dict[str, float]
) -> tuple[broadcast_plan.PartitionResult, air_schedule.BroadcastProgram | None]:
    demands = [
        broadcast_plan.ObjectDemand(o.object_id, rates.get(o.object_id, 0.0))
        for o in scenario.objects
    ]
    params = broadcast_plan.PlanParams(
        scenario.cell.total_bandwidth, scenario.cell.request_size,
        scenario.cell.threshold,
    )
    result = broadcast_plan.partition_objects(demands, params)
    program = None
    if result.partition.published:
        program = air_schedule.build_program(
            list(result.partition.published),
            scenario.cell.channels,
            scenario.index_scheme(),
            scenario.cell.slot_duration,
            scenario.cell.dedicated_index_channel,
        )
    return result, program


def _select_fidelity(config: dict) -> dict:
    params = []
    for p in config["parameters"]:
        if p["kind"] == "discrete":
            params.append(fidelity.discrete(p["name"], p["values"]))
        else:
            params.append(fidelity.continuous(p["name"], p["lo"], p["hi"]))
    domain = fidelity.FidelityDomain(tuple(params))
    utilities = []
    for p in params:
        u = config["utilities"][p.name]
        if "table" in u:
            table = {
                v: u["table"][str(v)] for v in p.values
            }
            utilities.append(fidelity.table_utility(table))
        else:
            lo, hi = u["sigmoid"]
            utilities.append(fidelity.sigmoid_utility(lo, hi))
    weights = [config["weights"][p.name] for p in params]
    models = [
        fidelity.ResourceModel(m["resource_id"], tuple(m["coefficients"]), m["intercept"])
        for m in config.get("models", [])
    ]
    available = config.get("limits")
    suppliers = [
        fidelity.Supplier(s["supplier_id"], s["f_s"], domain)
        for s in config["suppliers"]
    ]
    grid_points = int(config.get("continuous_points", 32))
    feasible = {
        s.supplier_id: fidelity.feasible_configs(models, domain, available, grid_points)
        for s in suppliers
    }
    result = fidelity.maximize_utility(suppliers, utilities, weights, feasible)
    return {
        "supplier_id": result.supplier_id,
        "config": list(result.config),
        "utility": result.utility,
        "evaluated_suppliers": list(result.evaluated_suppliers),
    }


def run(scenario: Scenario) -> Metrics:
    """Advance the slot clock through one fully seeded scenario."""
    metrics = Metrics(scenario.schema_id, scenario.seed, scenario.duration_slots)
    counters = metrics.counters
    for key in (
        "issued", "answered", "unresolved", "source_load", "requeries",
        "ttl_drops", "broadcast_slots", "on_demand_responses", "batching_saved",
        "index_reads",
    ):
        counters[key] = 0

    processes = {
        o.object_id: _UpdateProcess(o, scenario.seed, scenario.history_burnin)
        for o in scenario.objects
    }
    sources = {oid: p.source for oid, p in processes.items()}

    cell = P2PCell(
        scenario.adjacency, sources, scenario.costs,
        p2p_enabled=scenario.p2p, overhearing=scenario.overhearing,
    )
    qos_of: dict[str, dict[str, float]] = {}
    ims: dict[str, InformationManager] = {}
    for spec in sorted(scenario.clients, key=lambda c: c.client_id):
        cache = None
        if scenario.caching:
            overrides = spec.qos_overrides
            default_q = spec.default_qos
            cache = ClientCache(
                spec.cache_capacity, spec.policy,
                qos_for=lambda oid, o=overrides, d=default_q: o.get(oid, d),
                default_ttl=scenario.default_ttl,
                read_window=scenario.read_window,
            )
        im = InformationManager(spec.client_id, cell, cache)
        for service in spec.providers:
            im.register_provider(service)
        ims[spec.client_id] = im
        qos_of[spec.client_id] = dict(spec.qos_overrides)

    workload = generate_workload(scenario)
    by_slot: dict[int, list[tuple[str, str]]] = {}
    for cid in sorted(workload.per_client):
        for slot, oid in workload.per_client[cid]:
            by_slot.setdefault(slot, []).append((cid, oid))

    client_default_qos = {c.client_id: c.default_qos for c in scenario.clients}
    energy = {c.client_id: 0.0 for c in scenario.clients}

    plan_result = None
    program = None
    batching = None
    observed_requests: dict[str, int] = {o.object_id: 0 for o in scenario.objects}
    if scenario.resolution_mode == "broadcast":
        total_rate = sum(c.request_rate for c in scenario.clients)
        pmf = zipf_pmf(len(scenario.objects), scenario.zipf_theta)
        rates = {
            o.object_id: total_rate * float(pmf[i])
            for i, o in enumerate(scenario.objects)
        }
        plan_result, program = _plan_cell(scenario, rates)
        batching = broadcast_plan.BatchingServer(scenario.cell.batching_window)
        metrics.plan = _plan_summary(plan_result)

    if scenario.fidelity_config is not None:
        metrics.fidelity_selection = _select_fidelity(scenario.fidelity_config)

    pending: dict[str, list[tuple[int, str, int, float]]] = {}
    query_seq = 0

    def qos_for(cid: str, oid: str) -> float:
        return qos_of[cid].get(oid, client_default_qos[cid])

    def record(
        qid: int, cid: str, oid: str, issued: int, resolution: str,
        latency: float, write_t: float | None, p_nm: float, qos: float,
    ) -> None:
        if write_t is None:
            staleness = 0.0
        else:
            staleness = sources[oid].t_last_update - write_t
        met = accepts(qos, p_nm) if resolution != "unresolved" else False
        metrics.records.append(
            QueryRecord(qid, cid, oid, issued, resolution, latency, staleness,
                        qos, met, p_nm)
        )

    for t in range(scenario.duration_slots):
        for process in processes.values():
            process.advance_to(t)

        if (
            scenario.resolution_mode == "broadcast"
            and scenario.cell.replan_interval > 0
            and t > 0
            and t % scenario.cell.replan_interval == 0
        ):
            observed_rates = {oid: n / t for oid, n in observed_requests.items()}
            new_result, new_program = _plan_cell(scenario, observed_rates)
            if new_result.feasible:
                plan_result, program = new_result, new_program
                metrics.plan = _plan_summary(plan_result)

        for cid, oid in by_slot.get(t, ()):
            qid = query_seq
            query_seq += 1
            counters["issued"] += 1
            observed_requests[oid] += 1
            qos = qos_for(cid, oid)

            if scenario.resolution_mode == "p2p":
                outcome = ims[cid].resolve_query(oid, qos, t)
                assert outcome.payload_write_time <= t + 1  # causality
                if outcome.resolution is Resolution.UNRESOLVED:
                    counters["unresolved"] += 1
                    record(qid, cid, oid, t, "unresolved", outcome.latency,
                           None, 0.0, qos)
                else:
                    counters["answered"] += 1
                    if outcome.resolution is Resolution.SOURCE:
                        counters["source_load"] += 1
                    record(qid, cid, oid, t, outcome.resolution.value,
                           outcome.latency, outcome.payload_write_time,
                           outcome.p_nm, qos)
                continue

            # broadcast mode
            if program is not None and oid in program.directory:
                counters["index_reads"] += 1
                cost = scenario.cell.cost_model
                idx_end = air_schedule.next_index_read_end(program, t)
                channel, cycle_slot = program.directory[oid]
                index_channel = 0 if program.dedicated_index_channel else channel
                if channel == index_channel:
                    min_abs, switches = idx_end + 1, 0
                else:
                    min_abs, switches = idx_end + 1 + cost.switch_slots, 1
                length = program.cycle_len_slots
                slot = min_abs + (cycle_slot - min_abs) % length
                span = slot - t + 1
                active = 2  # one index slot + one data slot
                doze = span - active - cost.switch_slots * switches
                energy[cid] += (
                    active * cost.e_active + doze * cost.e_doze
                    + switches * cost.e_switch
                )
                counters["answered"] += 1
                record(qid, cid, oid, t, "broadcast", float(span),
                       sources[oid].t_last_update, 1.0, qos)
            else:
                batching.submit(oid, t)
                pending.setdefault(oid, []).append((qid, cid, t, qos))

        if batching is not None:
            for multicast in batching.advance(t):
                waiting = pending.get(multicast.object_id, [])
                batch, rest = (
                    waiting[: multicast.batch_size],
                    waiting[multicast.batch_size :],
                )
                pending[multicast.object_id] = rest
                counters["source_load"] += 1
                for qid, cid, issued, qos in batch:
                    counters["answered"] += 1
                    record(
                        qid, cid, multicast.object_id, issued, "on_demand",
                        multicast.response_time - issued + 1.0,
                        sources[multicast.object_id].t_last_update, 1.0, qos,
                    )

        if scenario.caching and t % max(1, scenario.tick_interval) == 0:
            for cid in sorted(ims):
                im = ims[cid]
                if im.query_cache is None:
                    continue
                for action in im.query_cache.tick(t):
                    if action.action == "drop":
                        counters["ttl_drops"] += 1
                        continue
                    source = sources[action.object_id]
                    if not source.reachable:
                        continue
                    payload, stats = source.read(t)
                    im.query_cache.insert(
                        CacheEntry(action.object_id, payload, stats, cached_at=t), t
                    )
                    counters["requeries"] += 1
                    counters["source_load"] += 1

    if batching is not None:
        # flush batches still open at the end of the run
        for multicast in batching.advance(math.inf):
            waiting = pending.get(multicast.object_id, [])
            batch = waiting[: multicast.batch_size]
            pending[multicast.object_id] = waiting[multicast.batch_size :]
            counters["source_load"] += 1
            for qid, cid, issued, qos in batch:
                counters["answered"] += 1
                record(
                    qid, cid, multicast.object_id, issued, "on_demand",
                    multicast.response_time - issued + 1.0,
                    sources[multicast.object_id].t_last_update, 1.0, qos,
                )
        counters["on_demand_responses"] = batching.responses_sent
        counters["batching_saved"] = batching.saved

    if scenario.resolution_mode == "broadcast" and program is not None:
        counters["broadcast_slots"] = program.n_channels * scenario.duration_slots

    metrics.records.sort(key=lambda r: r.query_id)
    metrics.per_client_energy = energy
    assert counters["answered"] + counters["unresolved"] == counters["issued"]
    return metrics


def _plan_summary(result: broadcast_plan.PartitionResult) -> dict:
    return {
        "published_count": len(result.partition.published),
        "published": list(result.partition.published),
        "b_b": result.partition.b_b,
        "b_d": result.partition.b_d,
        "expected_access_raw": result.access.raw,
        "expected_access_normalized": result.access.normalized,
        "feasible": result.feasible,
    }
