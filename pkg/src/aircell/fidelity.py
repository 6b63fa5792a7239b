"""Adaptive fidelity: consumption models, utilities, and configuration choice.

Three phases. Logging collects (configuration, measured consumption)
samples per resource. Learning fits one linear model per resource by
ordinary least squares over the fidelity parameters. Online, the models
prune the configuration grid to those satisfying the live resource limits,
and the surviving configuration with the greatest utility

    f_s * prod_p F_p(c_p) ** w_p

is chosen across suppliers, visiting them in descending preference f_s and
stopping early once no remaining supplier's f_s can beat the best utility
found (the product term never exceeds 1).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InsufficientSamples(Exception):
    """Fewer samples than unknown coefficients for some resource."""


class RankDeficient(Exception):
    """The design matrix does not determine the coefficients."""


class NoConfiguration(Exception):
    """Every supplier's feasible configuration set is empty."""


@dataclass(frozen=True)
class Parameter:
    name: str
    kind: str  # "discrete" | "continuous"
    values: tuple = ()
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self) -> None:
        if self.kind == "discrete":
            if not self.values:
                raise ValueError(f"{self.name}: discrete domain is empty")
        elif self.kind == "continuous":
            if not self.lo < self.hi:
                raise ValueError(f"{self.name}: need lo < hi")
        else:
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")

    def contains(self, value) -> bool:
        if self.kind == "discrete":
            return value in self.values
        return isinstance(value, (int, float)) and self.lo <= value <= self.hi

    def grid_values(self, continuous_points: int) -> tuple:
        if self.kind == "discrete":
            return self.values
        return tuple(np.linspace(self.lo, self.hi, continuous_points))

    def encode(self, value) -> float:
        """Numeric coordinate of a value; categorical values map to their rank."""
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        return float(self.values.index(value))


def discrete(name: str, values: Iterable) -> Parameter:
    return Parameter(name, "discrete", tuple(values))


def continuous(name: str, lo: float, hi: float) -> Parameter:
    return Parameter(name, "continuous", (), lo, hi)


@dataclass(frozen=True)
class FidelityDomain:
    parameters: tuple[Parameter, ...]

    def __post_init__(self) -> None:
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")

    def contains(self, config: Sequence) -> bool:
        return len(config) == len(self.parameters) and all(
            p.contains(v) for p, v in zip(self.parameters, config)
        )

    def grid(self, continuous_points: int = 32) -> list[tuple]:
        """Full Cartesian configuration domain, continuous axes discretized."""
        axes = [p.grid_values(continuous_points) for p in self.parameters]
        return list(itertools.product(*axes))

    def encode(self, config: Sequence) -> tuple[float, ...]:
        """Numeric coordinates of a configuration, for the linear models."""
        return tuple(p.encode(v) for p, v in zip(self.parameters, config))


@dataclass
class SampleStore:
    """Logged (configuration, per-resource consumption) observations."""

    domain: FidelityDomain
    samples: list[tuple[tuple, dict[str, float]]] = field(default_factory=list)

    def resources(self) -> list[str]:
        seen: set[str] = set()
        for _, measured in self.samples:
            seen.update(measured)
        return sorted(seen)


def log_sample(store: SampleStore, config: Sequence, measured: dict[str, float]) -> SampleStore:
    """Append one observation; the configuration must lie in the domain."""
    config = tuple(config)
    if not store.domain.contains(config):
        raise ValueError(f"configuration {config!r} outside the domain")
    if not measured:
        raise ValueError("no consumption measurements given")
    store.samples.append((config, dict(measured)))
    return store


@dataclass(frozen=True)
class ResourceModel:
    """Linear map from a fidelity configuration to one resource's consumption.

    Operates on numeric coordinates; pass raw configurations through
    ``FidelityDomain.encode`` first so categorical values are well defined.
    """

    resource_id: str
    coefficients: tuple[float, ...]  # one per fidelity parameter
    intercept: float

    def predict(self, encoded_config: Sequence[float]) -> float:
        return self.intercept + sum(
            c * float(v) for c, v in zip(self.coefficients, encoded_config)
        )


def fit_models(store: SampleStore) -> list[ResourceModel]:
    """Ordinary least squares per resource, via the normal equations.

    Solved with a pivoted LU factorization; a rank-deficient design is
    reported rather than regularized away.
    """
    n_params = len(store.domain.parameters)
    models = []
    for resource in store.resources():
        rows = [(cfg, m[resource]) for cfg, m in store.samples if resource in m]
        if len(rows) < n_params + 1:
            raise InsufficientSamples(
                f"{resource}: {len(rows)} samples for {n_params + 1} coefficients"
            )
        x = np.array(
            [list(store.domain.encode(cfg)) + [1.0] for cfg, _ in rows]
        )
        y = np.array([val for _, val in rows])
        if np.linalg.matrix_rank(x) < n_params + 1:
            raise RankDeficient(f"{resource}: design matrix is rank deficient")
        beta = np.linalg.solve(x.T @ x, x.T @ y)
        models.append(
            ResourceModel(resource, tuple(float(b) for b in beta[:-1]), float(beta[-1]))
        )
    return models


def feasible_configs(
    models: Sequence[ResourceModel],
    domain: FidelityDomain,
    available: dict[str, float] | None,
    continuous_points: int = 32,
) -> list[tuple]:
    """Configurations whose predicted consumption fits every resource limit.

    With no limits the full (discretized) Cartesian domain is returned; an
    empty result is a valid outcome meaning nothing fits.
    """
    grid = domain.grid(continuous_points)
    if not available:
        return grid
    binding = [m for m in models if m.resource_id in available]
    kept = []
    for cfg in grid:
        coords = domain.encode(cfg)
        if all(m.predict(coords) <= available[m.resource_id] for m in binding):
            kept.append(cfg)
    return kept


@dataclass(frozen=True)
class UtilityFn:
    """Per-parameter utility: a value table or a two-knee sigmoid."""

    kind: str  # "table" | "sigmoid"
    table: dict = field(default_factory=dict)
    knee_lo: float = 0.0
    knee_hi: float = 1.0

    def __post_init__(self) -> None:
        if self.kind == "table":
            if not self.table:
                raise ValueError("empty utility table")
            bad = {k: v for k, v in self.table.items() if not 0.0 <= v <= 1.0}
            if bad:
                raise ValueError(f"utilities outside [0, 1]: {bad}")
        elif self.kind == "sigmoid":
            if not self.knee_lo < self.knee_hi:
                raise ValueError("need knee_lo < knee_hi")
        else:
            raise ValueError(f"unknown utility kind {self.kind!r}")

    def eval(self, value) -> float:
        if self.kind == "table":
            if value not in self.table:
                raise ValueError(f"no utility mapped for value {value!r}")
            return self.table[value]
        return sigmoid_eval(self, value)


def table_utility(mapping: dict) -> UtilityFn:
    return UtilityFn("table", dict(mapping))


def sigmoid_utility(knee_lo: float, knee_hi: float) -> UtilityFn:
    return UtilityFn("sigmoid", {}, knee_lo, knee_hi)


# Logistic spread placing utility 0.05 at the lower knee and 0.95 at the upper.
_KNEE_LOGIT = math.log(19.0)


def sigmoid_eval(fn: UtilityFn, x: float) -> float:
    """Monotone logistic utility anchored at the knees, limits 0 and 1."""
    if fn.kind != "sigmoid":
        raise ValueError("not a sigmoid utility")
    mid = 0.5 * (fn.knee_lo + fn.knee_hi)
    spread = (fn.knee_hi - fn.knee_lo) / (2.0 * _KNEE_LOGIT)
    z = (x - mid) / spread
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass(frozen=True)
class Supplier:
    supplier_id: str
    f_s: float  # user's preference for this provider
    domain: FidelityDomain

    def __post_init__(self) -> None:
        if not 0.0 <= self.f_s <= 1.0:
            raise ValueError("supplier preference must be in [0, 1]")


def _check_weights(weights: Sequence[float]) -> None:
    if any(not 0.0 <= w <= 1.0 for w in weights):
        raise ValueError("weights must be in [0, 1]")


def config_utility(
    config: Sequence,
    utilities: Sequence[UtilityFn],
    weights: Sequence[float],
    f_s: float,
    invert_weights: bool = False,
) -> float:
    """Overall utility of one configuration under one supplier.

    Per-parameter utilities are raised to their weights and multiplied, then
    scaled by the supplier preference; any zero factor with positive weight
    zeroes the whole product. ``invert_weights`` switches to the reading in
    which 0 is the strongest weight (exponent 1 - w).
    """
    if not len(config) == len(utilities) == len(weights):
        raise ValueError("config, utilities, and weights lengths differ")
    _check_weights(weights)
    product = 1.0
    for value, fn, w in zip(config, utilities, weights):
        exponent = (1.0 - w) if invert_weights else w
        product *= fn.eval(value) ** exponent
    return f_s * product


@dataclass(frozen=True)
class MaxUtilityResult:
    supplier_id: str
    config: tuple
    utility: float
    evaluated_suppliers: tuple[str, ...]  # in visit order


def maximize_utility(
    suppliers: Sequence[Supplier],
    utilities: Sequence[UtilityFn],
    weights: Sequence[float],
    feasible: dict[str, Sequence[tuple]],
    invert_weights: bool = False,
) -> MaxUtilityResult:
    """Utility-maximal (supplier, configuration) with sound early termination.

    Suppliers are visited in descending preference; because the weighted
    product is at most 1, a supplier whose f_s is below the best utility so
    far cannot win, and neither can any later one.
    """
    ordered = sorted(suppliers, key=lambda s: (-s.f_s, s.supplier_id))
    best: tuple[float, str, tuple] | None = None
    visited: list[str] = []
    for supplier in ordered:
        if best is not None and supplier.f_s < best[0]:
            break
        visited.append(supplier.supplier_id)
        for config in feasible.get(supplier.supplier_id, ()):
            u = config_utility(config, utilities, weights, supplier.f_s, invert_weights)
            if best is None or u > best[0]:
                best = (u, supplier.supplier_id, tuple(config))
    if best is None:
        raise NoConfiguration("no feasible configuration under any supplier")
    return MaxUtilityResult(best[1], best[2], best[0], tuple(visited))
