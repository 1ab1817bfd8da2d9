from __future__ import annotations

import json
from pathlib import Path

import pytest

from arena.baseline import BaselineAgent
from arena.core.registry import load_registry
from arena.core.world import load_scene
from arena.metrics import RecordStore
from arena.missions import SceneIndex, load_catalog
from arena.orchestrator import (
    LocalInferenceClient,
    SessionService,
    SessionStore,
    TurnLimits,
)

REPO = Path(__file__).resolve().parents[1]
DATA = REPO / "src" / "arena" / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"

RASTER = (96, 54)


@pytest.fixture(scope="session")
def registry():
    return load_registry(DATA / "registry.json")


@pytest.fixture(scope="session")
def scenes():
    return SceneIndex(DATA / "scenes")


@pytest.fixture(scope="session")
def catalog(registry, scenes):
    return load_catalog(DATA / "missions", registry, scenes)


@pytest.fixture()
def lab_world(registry):
    return load_scene(DATA / "scenes" / "lab.scene.json", registry)


@pytest.fixture(scope="session")
def lab_scene_graph(registry, scenes):
    return scenes.load("lab", registry).scene


def load_golden(name: str):
    return json.loads((GOLDEN / name).read_text(encoding="utf-8"))


def load_transcript(mission_id: str) -> dict:
    path = DATA / "transcripts" / f"{mission_id}.json"
    return json.loads(path.read_text(encoding="utf-8"))


def load_solution(mission_id: str) -> dict:
    path = DATA / "solutions" / f"{mission_id}.json"
    return json.loads(path.read_text(encoding="utf-8"))


class FixedClock:
    """Deterministic clock advancing one second per call."""

    def __init__(self, start: float = 1_700_000_000.0):
        self.now = start

    def __call__(self) -> float:
        self.now += 1.0
        return self.now

    def advance(self, seconds: float):
        self.now += seconds


def sequential_ids(prefix: str = "sess"):
    counter = {"n": 0}

    def factory() -> str:
        counter["n"] += 1
        return f"{prefix}-{counter['n']:04d}"

    return factory


def build_service(tmp_path, registry, scenes, catalog, inference=None,
                  clock=None, limits=None, **kwargs) -> SessionService:
    if inference is None:
        graph = scenes.load("lab", registry).scene
        agent = BaselineAgent(graph, registry)
        inference = LocalInferenceClient(agent.infer)
    return SessionService(
        catalog=catalog,
        registry=registry,
        scenes=scenes,
        inference=inference,
        store=SessionStore(tmp_path / "sessions.sqlite"),
        metrics=RecordStore(tmp_path / "records.ndjson"),
        limits=limits or TurnLimits(),
        raster=RASTER,
        clock=clock or FixedClock(),
        id_factory=sequential_ids(),
        **kwargs,
    )
