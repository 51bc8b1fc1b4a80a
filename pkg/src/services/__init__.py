"""Service layer: adapters, memory, tracking pipeline, metrics and run orchestration."""

from src.services.memory import MemoryPool
from src.services.tracker import TrackerParams, TrackerSession

__all__ = [
    "MemoryPool",
    "TrackerParams",
    "TrackerSession",
]
