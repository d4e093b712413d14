"""Budget scheduling, active goal sampling, and experience-routing control.

The scheduler draws each epoch's budget from a Poisson whose mean decays
linearly across epochs (lambda = 2b/(m+1) makes the expected total exactly b);
the sampler picks goal categories Thompson-style, favoring failure-prone or
unexplored ones; the controller routes each sampled goal to human-human
demonstration (cost 2), human-agent interaction (cost 1), or free simulation
based on the agent's estimated success on that goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import DialogueOutcome, UserGoal
from .kb import GoalCategory

ROUTE_COSTS = {"hh": 2, "ha": 1, "sim": 0}

LAMBDA_HIGH = 2.0 / 3.0  # success at or above this simulates
LAMBDA_LOW = 1.0 / 3.0   # success at or below this buys a demonstration

EMA_DECAY = 0.9


@dataclass
class BudgetLedger:
    """Hard budget accounting; spent_total can never exceed total_b."""

    total_b: int
    spent_total: int = 0
    spent_by_route: dict[str, int] = field(default_factory=lambda: {"hh": 0, "ha": 0, "sim": 0})
    route_counts: dict[str, int] = field(default_factory=lambda: {"hh": 0, "ha": 0, "sim": 0})

    @property
    def remaining(self) -> int:
        return self.total_b - self.spent_total

    def charge(self, route: str) -> int:
        cost = ROUTE_COSTS[route]
        if cost > self.remaining:
            raise ValueError(f"route {route} costs {cost}, only {self.remaining} left")
        self.spent_total += cost
        self.spent_by_route[route] += cost
        self.route_counts[route] += 1
        return cost

    def snapshot(self) -> dict:
        return {
            "total": self.total_b,
            "spent": self.spent_total,
            "by_route": dict(self.spent_by_route),
            "dialogues_by_route": dict(self.route_counts),
        }


def poisson_pmf(n: int, lam: float) -> float:
    """P{X = n} for X ~ Poisson(lam); log-space above n = 20."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if n <= 20:
        return lam**n / math.factorial(n) * math.exp(-lam)
    return math.exp(n * math.log(lam) - lam - math.lgamma(n + 1))


def decayed_lambda(b: int, m: int, k: int) -> float:
    """lambda_k = (m+1-k)/m * lambda with lambda = 2b/(m+1); decreasing in k."""
    if not 1 <= k <= m:
        raise ValueError(f"epoch {k} outside 1..{m}")
    lam = 2.0 * b / (m + 1)
    return (m + 1 - k) / m * lam


def flat_lambda(b: int, m: int) -> float:
    """Ablation variant: constant lambda = b/m."""
    return b / m


def expected_total_allocation(b: int, m: int) -> int:
    """Sum over k of E[b_k] under the decayed schedule, in exact arithmetic.

    sum_k 2b(m+1-k) = 2b * m(m+1)/2 = b*m*(m+1), so dividing by m(m+1)
    recovers b exactly.
    """
    numerator = sum(2 * b * (m + 1 - k) for k in range(1, m + 1))
    total, rem = divmod(numerator, m * (m + 1))
    if rem:
        raise AssertionError("allocation identity violated")
    return total


def schedule_budget(b: int, m: int, k: int, rng: np.random.Generator,
                    remaining: int | None = None, lam_k: float | None = None) -> int:
    """Draw b_k ~ Poisson(lambda_k), clamped so allocation never exceeds what
    is left of the total budget."""
    if b <= 0:
        raise ValueError("budget must be positive")
    if lam_k is None:
        lam_k = decayed_lambda(b, m, k)
    draw = int(rng.poisson(lam_k)) if lam_k > 0 else 0
    cap = b if remaining is None else remaining
    return min(draw, max(cap, 0))


@dataclass
class CategoryStats:
    """Per-category failure rates and sample counts for the active sampler."""

    failure_rates: list[float]
    counts: list[int]

    @classmethod
    def fresh(cls, n_categories: int) -> "CategoryStats":
        # Pessimistic start: unseen categories look like failures.
        return cls(failure_rates=[1.0] * n_categories, counts=[0] * n_categories)

    @property
    def total(self) -> int:
        return sum(self.counts)


def update_category_stats(stats: CategoryStats, category_id: int,
                          outcomes: list[DialogueOutcome], decay: float = EMA_DECAY) -> CategoryStats:
    """EMA of the failure indicator; counts grow by the number of outcomes."""
    f = stats.failure_rates[category_id]
    for outcome in outcomes:
        f = decay * f + (1.0 - decay) * (0.0 if outcome.success else 1.0)
    stats.failure_rates[category_id] = f
    stats.counts[category_id] += len(outcomes)
    return stats


def sample_goal(categories: list[GoalCategory], stats: CategoryStats, l: int,
                rng: np.random.Generator) -> tuple[UserGoal, int]:
    """Thompson-style pick: p_i ~ N(f_i, sqrt(l ln N / n_i)), argmax wins.

    Categories never sampled before are selected first, uniformly among
    themselves, so ln N / n_i is always well defined when the Gaussian path
    runs.
    """
    if not categories:
        raise ValueError("no categories")
    unexplored = [c.id for c in categories if stats.counts[c.id] == 0]
    if unexplored:
        cid = int(unexplored[int(rng.integers(len(unexplored)))])
    else:
        n_total = stats.total
        log_n = math.log(n_total) if n_total > 1 else 0.0
        means = np.array([stats.failure_rates[c.id] for c in categories])
        sigmas = np.sqrt([l * log_n / stats.counts[c.id] for c in categories])
        draws = rng.normal(means, sigmas)
        cid = categories[int(np.argmax(draws))].id
    category = next(c for c in categories if c.id == cid)
    goal = category.goals[int(rng.integers(len(category.goals)))]
    return goal, cid


def uniform_sample_goal(categories: list[GoalCategory],
                        rng: np.random.Generator) -> tuple[UserGoal, int]:
    """Ablation variant: uniform category, then uniform goal within it."""
    category = categories[int(rng.integers(len(categories)))]
    goal = category.goals[int(rng.integers(len(category.goals)))]
    return goal, category.id


def controller_route(s_gu: float, b_k: int, lambda1: float = LAMBDA_HIGH,
                     lambda2: float = LAMBDA_LOW) -> tuple[str, int]:
    """Route one sampled goal; boundary values are inclusive as written."""
    if s_gu >= lambda1 or b_k == 0:
        return "sim", 0
    if s_gu <= lambda2 and b_k >= 2:
        return "hh", 2
    return "ha", 1
