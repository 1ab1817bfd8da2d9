"""Competition analytics: success rates, rating windows, leaderboards.

Records live in an append-only newline-delimited JSON file, one interaction
per line. Aggregation is a pure fold over a snapshot of those records; all
window arithmetic is UTC. Undefined aggregates (empty denominators) are None,
never a division by zero. Abandoned sessions are ingested as unsuccessful
interactions, so they count in MSR denominators; report output flags this.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

from arena.errors import DegenerateSeries, SchemaError

UNDEFINED_RENDERING = "-"
MSR_DENOMINATOR_NOTE = "MSR denominator includes abandoned sessions"


@dataclass(frozen=True, slots=True)
class InteractionRecord:
    team_id: str
    timestamp: str  # ISO-8601, UTC
    mission_id: str
    mission_seen: bool
    success: bool
    rating: Optional[int] = None

    def __post_init__(self):
        if self.rating is not None and not (1 <= self.rating <= 5):
            raise SchemaError(f"rating {self.rating!r} outside 1..5")

    @property
    def when(self) -> datetime:
        dt = datetime.fromisoformat(self.timestamp)
        return dt if dt.tzinfo else dt.replace(tzinfo=timezone.utc)

    def to_doc(self) -> dict:
        return {
            "team_id": self.team_id,
            "timestamp": self.timestamp,
            "mission_id": self.mission_id,
            "mission_seen": self.mission_seen,
            "success": self.success,
            "rating": self.rating,
        }

    @staticmethod
    def from_doc(doc: dict) -> "InteractionRecord":
        return InteractionRecord(
            team_id=str(doc["team_id"]),
            timestamp=str(doc["timestamp"]),
            mission_id=str(doc["mission_id"]),
            mission_seen=bool(doc["mission_seen"]),
            success=bool(doc["success"]),
            rating=doc.get("rating"),
        )


class RecordStore:
    """Append-only NDJSON record file with thread-safe ingestion."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: InteractionRecord):
        line = json.dumps(record.to_doc(), sort_keys=True)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()

    def load(self) -> list[InteractionRecord]:
        if not self.path.exists():
            return []
        records = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(InteractionRecord.from_doc(json.loads(line)))
        return records


# -- core statistics ------------------------------------------------------------

def msr(records: Iterable[InteractionRecord]) -> Optional[float]:
    """Succeeded missions over total missions; None when there are none."""
    total = successes = 0
    for r in records:
        total += 1
        successes += 1 if r.success else 0
    if total == 0:
        return None
    return successes / total


def mean_rating(records: Iterable[InteractionRecord]) -> Optional[float]:
    """Average of present ratings; unrated records are excluded."""
    rated = [r.rating for r in records if r.rating is not None]
    if not rated:
        return None
    return sum(rated) / len(rated)


def _window_end(at: date | datetime) -> datetime:
    if isinstance(at, datetime):
        return at if at.tzinfo else at.replace(tzinfo=timezone.utc)
    # a bare date means "through the end of that day"
    return datetime(at.year, at.month, at.day, 23, 59, 59, 999999, tzinfo=timezone.utc)


def window_records(
    records: Iterable[InteractionRecord],
    at: date | datetime,
    window_days: int = 7,
) -> list[InteractionRecord]:
    end = _window_end(at)
    start = end - timedelta(days=window_days)
    return [r for r in records if start < r.when <= end]


def rolling_average(
    records: Iterable[InteractionRecord],
    metric: str,
    window_days: int = 7,
    at: date | datetime | None = None,
) -> Optional[float]:
    """Windowed mean of `rating` or `msr`; None when the window is empty."""
    if window_days < 1:
        raise ValueError("window_days must be >= 1")
    if metric not in ("rating", "msr"):
        raise ValueError(f"unknown metric {metric!r}")
    if at is None:
        raise ValueError("an anchor date is required")
    inside = window_records(records, at, window_days)
    if metric == "rating":
        return mean_rating(inside)
    return msr(inside)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation; raises DegenerateSeries when undefined."""
    if len(xs) != len(ys):
        raise DegenerateSeries("series lengths differ")
    n = len(xs)
    if n < 2:
        raise DegenerateSeries("need at least two points")
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise DegenerateSeries("zero variance")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


# -- splits and formatting ---------------------------------------------------------

def seen_unseen_split(records: Iterable[InteractionRecord]) -> dict:
    """Per-split MSR and their difference in percentage points."""
    records = list(records)
    seen = msr([r for r in records if r.mission_seen])
    unseen = msr([r for r in records if not r.mission_seen])
    variance = None
    if seen is not None and unseen is not None:
        variance = (unseen - seen) * 100.0
    return {"seen": seen, "unseen": unseen, "variance_pp": variance}


def format_percent(fraction: Optional[float]) -> str:
    if fraction is None:
        return UNDEFINED_RENDERING
    return f"{round(fraction * 100):.0f}%"


def format_split(split: dict) -> dict:
    variance = split.get("variance_pp")
    return {
        "seen": format_percent(split.get("seen")),
        "unseen": format_percent(split.get("unseen")),
        "variance": UNDEFINED_RENDERING if variance is None else f"{round(variance):.0f}%",
    }


# -- leaderboard ---------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class LeaderboardRow:
    team_label: str
    avg_rating: Optional[float]
    msr: Optional[float]
    n_sessions: int
    window: str  # "rolling-7d@YYYY-MM-DD" or "cumulative"

    def to_doc(self) -> dict:
        return {
            "team_label": self.team_label,
            "avg_rating": self.avg_rating,
            "msr": self.msr,
            "n_sessions": self.n_sessions,
            "window": self.window,
        }


def anonymize_roster(roster: Sequence[str], at: date, salt: str = "") -> dict[str, str]:
    """Per-emission bijection team_id -> label, permuted by the date seed."""
    seed = hashlib.sha256(f"{at.isoformat()}|{salt}".encode("utf-8")).digest()
    keyed = sorted(
        roster,
        key=lambda team: hashlib.sha256(seed + team.encode("utf-8")).hexdigest(),
    )
    return {team: f"Robot {chr(ord('A') + i)}" for i, team in enumerate(keyed)}


def emit_leaderboard(
    records: Iterable[InteractionRecord],
    at: date,
    roster: Sequence[str],
    salt: str = "",
) -> tuple[list[LeaderboardRow], dict]:
    """Anonymized rows (rolling 7-day and cumulative per team) plus a report.

    Deterministic in (records, date, roster, salt); two emissions for the
    same date are identical, and labels permute across dates.
    """
    records = [r for r in records if r.team_id in set(roster)]
    labels = anonymize_roster(roster, at, salt)
    end = _window_end(at)
    rows: list[LeaderboardRow] = []
    for window_name in ("rolling-7d", "cumulative"):
        per_team = []
        for team in roster:
            mine = [r for r in records if r.team_id == team and r.when <= end]
            if window_name == "rolling-7d":
                mine = window_records(mine, at, 7)
            per_team.append(LeaderboardRow(
                team_label=labels[team],
                avg_rating=mean_rating(mine),
                msr=msr(mine),
                n_sessions=len(mine),
                window=f"rolling-7d@{at.isoformat()}" if window_name == "rolling-7d" else "cumulative",
            ))
        per_team.sort(key=lambda row: (
            -(row.avg_rating if row.avg_rating is not None else -1.0),
            -(row.msr if row.msr is not None else -1.0),
            row.team_label,
        ))
        rows.extend(per_team)
    report = {
        "schema": "arena-leaderboard/1",
        "date": at.isoformat(),
        "rows": [row.to_doc() for row in rows],
        "notes": [MSR_DENOMINATOR_NOTE],
    }
    return rows, report


def render_leaderboard_table(rows: Iterable[LeaderboardRow]) -> str:
    lines = [f"{'window':<22} {'team':<10} {'rating':>7} {'msr':>6} {'n':>5}"]
    for row in rows:
        rating = UNDEFINED_RENDERING if row.avg_rating is None else f"{row.avg_rating:.2f}"
        lines.append(
            f"{row.window:<22} {row.team_label:<10} {rating:>7} "
            f"{format_percent(row.msr):>6} {row.n_sessions:>5}"
        )
    return "\n".join(lines)


def team_series(records: Iterable[InteractionRecord],
                roster: Sequence[str]) -> tuple[list[float], list[float]]:
    """Per-team (mean rating, MSR) series for correlating CSAT against MSR."""
    xs, ys = [], []
    for team in sorted(roster):
        mine = [r for r in records if r.team_id == team]
        rating = mean_rating(mine)
        rate = msr(mine)
        if rating is None or rate is None:
            continue
        xs.append(rating)
        ys.append(rate)
    return xs, ys
