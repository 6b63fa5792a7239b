"""Resource management toolkit for a service-oriented wireless cell.

Subpackages cover freshness-aware caching (freshness, cache, p2p),
broadcast planning and air indexing (broadcast_plan, air_schedule,
retrieval), utility-driven fidelity adaptation (fidelity), and the
deterministic slot-based engine tying them together (sim, cli).
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    air_schedule,
    broadcast_plan,
    cache,
    cli,
    fidelity,
    freshness,
    p2p,
    retrieval,
    sim,
)
