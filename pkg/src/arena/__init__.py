"""Embodied-task competition stack: simulator, missions, orchestration, evaluation."""

__version__ = "0.1.0"
