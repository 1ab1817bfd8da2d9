"""Exception hierarchy shared across the stack."""

from __future__ import annotations


class ArenaError(Exception):
    """Base class for every error raised by this package."""


# -- scene / registry loading -------------------------------------------------

class SchemaError(ArenaError):
    """Document does not match its declared schema."""


class DanglingReference(ArenaError):
    """A document references a room, class, or instance that does not exist."""


class DuplicateId(ArenaError):
    """Two entities in one document share an id."""


# -- simulator ----------------------------------------------------------------

class DecorHasNoAction(ArenaError):
    """The decor property licenses no interaction verb."""


class CoordinateOutOfBounds(ArenaError):
    """An (x, y) raster coordinate lies outside the observation."""


class SceneMismatch(ArenaError):
    """Two world states do not share an instance-id universe."""


# -- missions -----------------------------------------------------------------

class OverrideUnlicensed(ArenaError):
    """A mission override sets a state key the target class does not license."""


class SceneNotFound(ArenaError):
    pass


class SelectorUnresolvable(ArenaError):
    """A goal selector matches nothing in the scene."""


class CatalogError(ArenaError):
    """Mission catalog failed to load; message aggregates per-file errors."""


# -- wire protocol ------------------------------------------------------------

class MalformedPayload(ArenaError):
    pass


class SchemaVersionUnsupported(ArenaError):
    pass


# -- orchestrator -------------------------------------------------------------

class MissionNotFound(ArenaError):
    pass


class CapacityExceeded(ArenaError):
    pass


class SessionNotFound(ArenaError):
    pass


class TurnInFlight(ArenaError):
    """A second utterance arrived while a turn was still executing."""


class SessionNotActive(ArenaError):
    """The session already completed, ended, or was abandoned."""


class InferenceTimeout(ArenaError):
    pass


class InferenceProtocolError(ArenaError):
    pass


class RatingAlreadySubmitted(ArenaError):
    pass


class ScoreOutOfRange(ArenaError):
    pass


class SessionNotRatable(ArenaError):
    pass


class SessionActive(ArenaError):
    """Operation requires an ended or completed session."""


# -- evaluation harness -------------------------------------------------------

class HashChainBroken(ArenaError):
    """Replay diverged from a recorded log at `event_index`."""

    def __init__(self, event_index: int, message: str = ""):
        self.event_index = event_index
        super().__init__(message or f"hash chain broken at event {event_index}")


class ModelRaised(ArenaError):
    """The model under evaluation raised; recorded as an instance failure."""


class EmptySuite(ArenaError):
    pass


# -- metrics ------------------------------------------------------------------

class DegenerateSeries(ArenaError):
    """Pearson input has length < 2 or zero variance."""
