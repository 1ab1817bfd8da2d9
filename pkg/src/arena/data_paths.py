"""Locations of the packaged fixture data (registry, scenes, missions)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_root() -> Path:
    return Path(str(resources.files("arena").joinpath("data")))


def default_registry_path() -> Path:
    return data_root() / "registry.json"


def default_scene_dir() -> Path:
    return data_root() / "scenes"


def default_mission_dir() -> Path:
    return data_root() / "missions"


def default_solution_dir() -> Path:
    return data_root() / "solutions"


def default_transcript_dir() -> Path:
    return data_root() / "transcripts"
