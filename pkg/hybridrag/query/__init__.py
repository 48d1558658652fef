from hybridrag.query.augment import AugmentedQuery, Entity, IntentCues, RawQuery, WhIntent
from hybridrag.query.router import RouteDecision, RouteLabel, RouteSource

__all__ = [
    "AugmentedQuery",
    "Entity",
    "IntentCues",
    "RawQuery",
    "RouteDecision",
    "RouteLabel",
    "RouteSource",
    "WhIntent",
]
