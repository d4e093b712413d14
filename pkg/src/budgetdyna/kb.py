"""Synthetic movie-ticket knowledge base, queries, and the user-goal space.

The KB replaces a proprietary dialogue corpus: rows are generated from small
per-slot vocabularies, goals are projections of rows onto constraint subsets
(so every goal is satisfiable by construction), and goals sharing a slot
signature are grouped into categories for the active sampler.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .domain import INFORMABLE_SLOTS, UserGoal

KbRow = dict  # one value per informable slot

MOVIES = (
    "creed", "deadpool", "zootopia", "race", "the witch", "spotlight",
    "brooklyn", "room", "star wars", "the revenant", "triple 9",
    "gods of egypt", "risen", "the big short", "eddie the eagle",
    "london has fallen", "the perfect match", "joy", "sisters", "carol",
    "whiskey tango foxtrot", "the boy", "the forest", "dirty grandpa",
)
THEATERS = (
    "century eastport 16", "carmike summit 16", "regal meridian 16",
    "amc lowes oak tree 6", "cinemark lincoln square", "pacific place 11",
    "regal thornton place", "varsity theatre", "big picture", "cinerama",
    "admiral theater", "ark lodge cinemas", "carmike 16", "century rowland plaza",
)
CITIES = ("regency", "seattle", "bellevue", "birmingham", "portland", "boston", "chicago", "hamilton")
CHAINS = ("century", "carmike", "regal", "amc", "cinemark", "pacific")
DATES = ("tonight", "tomorrow", "this weekend", "friday", "saturday", "sunday", "next monday")
STARTTIMES = ("around noon", "2pm", "5pm", "7pm", "around 8pm", "9:30pm")
PRICES = ("8", "9.5", "10", "12", "15")
VIDEO_FORMATS = ("standard", "3d", "imax")
PEOPLE = ("one", "two", "three", "four", "five", "six")
DISTANCES = ("downtown", "within 5 miles", "near me")

# Extra constraint slots a goal may add on top of moviename.
GOAL_EXTRA_SLOTS = (
    "city", "date", "starttime", "theater", "numberofpeople",
    "video_format", "theater_chain", "price",
)
GOAL_REQUEST_EXTRAS = ("theater", "starttime", "price")

# Users come in recurring shapes: each archetype fixes which attributes the
# goal constrains beyond the movie name. Asking about slots outside the
# user's archetype annoys them, so knowing these patterns (and how they
# overlap) is what separates a practiced agent from a novice.
GOAL_ARCHETYPES = (
    ("date", "starttime", "numberofpeople", "video_format"),
    ("date", "starttime", "theater", "city"),
    ("date", "starttime", "price", "theater_chain"),
    ("date", "numberofpeople", "video_format", "theater"),
    ("date", "price", "starttime", "theater", "numberofpeople"),
    ("city", "theater", "video_format", "starttime"),
    ("city", "theater", "starttime", "numberofpeople", "date"),
    ("city", "date", "numberofpeople", "video_format", "price"),
    ("city", "price", "theater_chain", "starttime"),
    ("city", "theater", "date", "numberofpeople"),
    ("starttime", "theater_chain", "price", "video_format"),
    ("starttime", "video_format", "numberofpeople", "city", "theater_chain"),
    ("theater", "numberofpeople", "price", "date"),
    ("theater", "theater_chain", "date", "starttime", "video_format"),
    ("numberofpeople", "price", "date", "city", "starttime", "theater"),
    ("video_format", "theater_chain", "starttime", "city", "price", "numberofpeople"),
    ("city", "date", "numberofpeople", "starttime"),
)


def generate_kb(seed: int, n_movies: int, n_theaters: int, n_cities: int) -> list[KbRow]:
    """Build a deterministic synthetic KB: movies x theaters x dates x 2 times.

    Every theater carries its city/chain/zip, every movie shows in every
    theater (so each (city, date) pair has rows), and the
    (moviename, theater, date, starttime) combination is unique.
    """
    if n_movies < 1 or n_theaters < 1 or n_cities < 1:
        raise ValueError("all counts must be >= 1")
    if n_movies > len(MOVIES) or n_theaters > len(THEATERS) or n_cities > len(CITIES):
        raise ValueError("counts exceed the built-in vocabularies")
    rng = np.random.default_rng(seed)
    movies = [str(m) for m in rng.choice(MOVIES, size=n_movies, replace=False)]
    theaters = [str(t) for t in rng.choice(THEATERS, size=n_theaters, replace=False)]
    cities = [str(c) for c in rng.choice(CITIES, size=n_cities, replace=False)]

    theater_city = {t: cities[i % n_cities] for i, t in enumerate(theaters)}
    theater_chain = {t: str(rng.choice(CHAINS)) for t in theaters}
    theater_zip = {t: str(98100 + int(rng.integers(0, 900))) for t in theaters}

    rows: list[KbRow] = []
    for theater in theaters:
        for movie in movies:
            for date in DATES:
                times = rng.choice(STARTTIMES, size=2, replace=False)
                for starttime in times:
                    rows.append({
                        "city": theater_city[theater],
                        "date": date,
                        "distanceconstraints": str(rng.choice(DISTANCES)),
                        "moviename": movie,
                        "numberofpeople": str(rng.choice(PEOPLE)),
                        "price": str(rng.choice(PRICES)),
                        "starttime": str(starttime),
                        "theater": theater,
                        "theater_chain": theater_chain[theater],
                        "video_format": str(rng.choice(VIDEO_FORMATS)),
                        "zip": theater_zip[theater],
                    })
    return rows


def kb_query(kb: list[KbRow], constraints: dict[str, str]) -> list[KbRow]:
    """Rows matching every constraint, exact string match after case-folding."""
    for slot in constraints:
        if slot not in INFORMABLE_SLOTS:
            raise ValueError(f"not an informable slot: {slot!r}")
    if not constraints:
        return list(kb)
    wanted = {k: v.casefold() for k, v in constraints.items()}
    return [row for row in kb if all(row[k].casefold() == v for k, v in wanted.items())]


class KnowledgeBase:
    """Immutable row set with a query cache (queries run once per turn)."""

    def __init__(self, rows: list[KbRow]):
        self.rows = list(rows)
        self._cache: dict[tuple, list[KbRow]] = {}

    def __len__(self) -> int:
        return len(self.rows)

    def query(self, constraints: dict[str, str]) -> list[KbRow]:
        key = tuple(sorted((k, v.casefold()) for k, v in constraints.items()))
        hit = self._cache.get(key)
        if hit is None:
            hit = kb_query(self.rows, constraints)
            self._cache[key] = hit
        return hit

    def match_count(self, constraints: dict[str, str]) -> int:
        return len(self.query(constraints))

    def top_match(self, constraints: dict[str, str]) -> KbRow | None:
        rows = self.query(constraints)
        return rows[0] if rows else None


def save_kb(path, rows: list[KbRow]) -> None:
    ordered = [{slot: row[slot] for slot in INFORMABLE_SLOTS} for row in rows]
    with open(path, "w") as f:
        json.dump(ordered, f, indent=1)


def load_kb(path) -> list[KbRow]:
    with open(path) as f:
        return json.load(f)


def enumerate_goals(kb: list[KbRow], seed: int, max_goals: int) -> list[UserGoal]:
    """Sample satisfiable goals: constraints project a KB row onto an archetype.

    Every goal constrains moviename plus one archetype's slots and requests
    ticket plus optional extras drawn from {theater, starttime, price} minus
    the constraint slots. Deterministic for a given seed; every goal is
    satisfiable because its values come straight from a row.
    """
    if not kb:
        raise ValueError("empty KB")
    rng = np.random.default_rng(seed)
    goals: list[UserGoal] = []
    seen: set[tuple] = set()
    attempts = 0
    while len(goals) < max_goals and attempts < max_goals * 8:
        attempts += 1
        row = kb[int(rng.integers(len(kb)))]
        archetype = GOAL_ARCHETYPES[int(rng.integers(len(GOAL_ARCHETYPES)))]
        constraint_slots = ["moviename"] + [s for s in archetype if s in row]
        constraints = {s: row[s] for s in constraint_slots}
        req_pool = [s for s in GOAL_REQUEST_EXTRAS if s not in constraints]
        n_req = int(rng.integers(0, len(req_pool) + 1))
        rng.shuffle(req_pool)
        requests = frozenset(["ticket"] + req_pool[:n_req])
        goal = UserGoal(constraints=constraints, requests=requests)
        if goal.key() in seen:
            continue
        seen.add(goal.key())
        goals.append(goal)
    return goals


@dataclass
class GoalCategory:
    """Goals sharing one (constraint-slot, request-slot) signature."""

    id: int
    signature: tuple[tuple[str, ...], tuple[str, ...]]
    goals: list[UserGoal] = field(default_factory=list)


def categorize_goals(goals: list[UserGoal], l_max: int) -> list[GoalCategory]:
    """Partition goals by slot signature, keeping the l_max most populous."""
    if not goals:
        raise ValueError("no goals to categorize")
    groups: dict[tuple, list[UserGoal]] = {}
    for goal in goals:
        groups.setdefault(goal.signature(), []).append(goal)
    ranked = sorted(groups.items(), key=lambda item: (-len(item[1]), item[0]))
    kept = ranked[:l_max]
    return [GoalCategory(id=i, signature=sig, goals=members) for i, (sig, members) in enumerate(kept)]


def save_goals(path, goals: list[UserGoal]) -> None:
    with open(path, "w") as f:
        json.dump([g.to_json() for g in goals], f, indent=1)


def load_goals(path) -> list[UserGoal]:
    with open(path) as f:
        return [UserGoal.from_json(obj) for obj in json.load(f)]
