from .store import ReviewStore, PilotRating, aggregate_pilot

__all__ = ["ReviewStore", "PilotRating", "aggregate_pilot"]
