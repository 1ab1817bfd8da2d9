"""Deterministic synthetic record fixtures for analytics tests and demos.

Real competition numbers came from live human traffic and cannot be
reproduced at desk scale; these generators exist to exercise the metrics
pipeline with data whose statistics are known in closed form. Everything is
formula-driven (no RNG) so goldens stay byte-stable.
"""

from __future__ import annotations

from datetime import date, datetime, timedelta, timezone

from arena.metrics import InteractionRecord

MISSION_CYCLE = [
    ("repair_bowl", True), ("fill_mug", True), ("heat_soup", True),
    ("chill_soda", True), ("toggle_printer", True), ("clean_plate", True),
    ("slice_bread", True), ("spanner_delivery", True),
    ("cook_potato", False), ("disinfect_dish", False), ("snack_time", False),
    ("smash_jar", False), ("lab_lockdown", False),
]


def _iso(day: date, hour: int) -> str:
    return datetime(day.year, day.month, day.day, hour, tzinfo=timezone.utc).isoformat()


def weekly_target_rating(week: int, weeks: int = 22) -> float:
    """Linear ramp from 3.0 to 3.9, quantized to the 0.1 grid integers allow."""
    return round(3.0 + 0.9 * week / (weeks - 1), 1)


def synthetic_competition_records(
    teams: int = 10,
    weeks: int = 22,
    sessions_per_week: int = 10,
    start: date = date(2022, 10, 19),
) -> list[InteractionRecord]:
    """A full competition's worth of records with a 3.0 -> 3.9 rating ramp.

    Each team's weekly ratings average exactly the week's target (k fours and
    10-k threes). Success rates climb slowly; unseen missions appear from
    week 17 onward, mirroring a mid-competition content drop.
    """
    records: list[InteractionRecord] = []
    for team_index in range(teams):
        team = f"team{team_index:02d}"
        for week in range(weeks):
            target = weekly_target_rating(week, weeks)
            fours = round((target - 3.0) * 10)
            for j in range(sessions_per_week):
                day = start + timedelta(days=7 * week + (j % 7))
                rating = 4 if j < fours else 3
                if j == sessions_per_week - 1:
                    # zero-sum stagger so teams differ but the aggregate mean
                    # stays exactly on the ramp
                    rating += 1 if team_index % 2 else -1
                # successes drift upward over the competition; higher-rated
                # teams also complete more missions, so CSAT tracks MSR
                threshold = 3 + 2 * (team_index % 2) + week // 8
                success = (j + week) % 10 < threshold
                if week >= 16 and j >= 7:
                    mission, seen = MISSION_CYCLE[8 + (j + week) % 5]
                else:
                    mission, seen = MISSION_CYCLE[(j + week) % 8]
                records.append(InteractionRecord(
                    team_id=team,
                    timestamp=_iso(day, 9 + (j % 8)),
                    mission_id=mission,
                    mission_seen=seen,
                    success=success,
                    rating=rating,
                ))
    return records


def split_fixture_records(
    seen_successes: int, seen_total: int,
    unseen_successes: int, unseen_total: int,
    team: str = "fixture",
    day: date = date(2023, 3, 1),
) -> list[InteractionRecord]:
    """Records with exact seen/unseen success tallies, for format fixtures."""
    records = []
    for index in range(seen_total):
        records.append(InteractionRecord(
            team_id=team,
            timestamp=_iso(day, 1),
            mission_id=MISSION_CYCLE[index % 8][0],
            mission_seen=True,
            success=index < seen_successes,
        ))
    for index in range(unseen_total):
        records.append(InteractionRecord(
            team_id=team,
            timestamp=_iso(day, 2),
            mission_id=MISSION_CYCLE[8 + index % 5][0],
            mission_seen=False,
            success=index < unseen_successes,
        ))
    return records
