"""Seed-probability curves, user profiles, discount allocations, and actions.

A user offered discount ``c`` accepts with probability ``p(c)`` where ``p``
is monotone with ``p(0) = 0`` and ``p(1) = 1``.  Three analytic curves are
built in; arbitrary monotone curves can be supplied as tabulated
breakpoints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

BUDGET_TOL = 1e-9

_BUILTIN_KINDS = ("quadratic-slow", "linear", "quadratic-fast")


@dataclass(frozen=True)
class SeedProbFn:
    """Acceptance-probability curve on [0, 1].

    ``kind`` is one of the built-ins (`quadratic-slow` = c^2, `linear` = c,
    `quadratic-fast` = 2c - c^2) or "tabulated" with piecewise-linear
    breakpoints covering (0, 0) to (1, 1).
    """

    kind: str
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind == "tabulated":
            t = self.table
            if not t or t[0] != (0.0, 0.0) or t[-1] != (1.0, 1.0):
                raise ValueError("tabulated curve must span (0,0) to (1,1)")
            cs = [p[0] for p in t]
            ps = [p[1] for p in t]
            if any(b < a for a, b in zip(cs, cs[1:])) or any(b < a for a, b in zip(ps, ps[1:])):
                raise ValueError("tabulated curve must be monotone")
        elif self.kind not in _BUILTIN_KINDS:
            raise ValueError(f"unknown seed probability kind {self.kind!r}")

    def __call__(self, c):
        c_arr = np.asarray(c, dtype=np.float64)
        if np.any(c_arr < 0.0) or np.any(c_arr > 1.0):
            raise ValueError("discount outside [0, 1]")
        if self.kind == "quadratic-slow":
            out = c_arr * c_arr
        elif self.kind == "linear":
            out = c_arr
        elif self.kind == "quadratic-fast":
            out = 2.0 * c_arr - c_arr * c_arr
        else:
            xs = np.array([p[0] for p in self.table])
            ys = np.array([p[1] for p in self.table])
            out = np.interp(c_arr, xs, ys)
        return float(out) if np.isscalar(c) or c_arr.ndim == 0 else out


QUADRATIC_SLOW = SeedProbFn("quadratic-slow")
LINEAR = SeedProbFn("linear")
QUADRATIC_FAST = SeedProbFn("quadratic-fast")


def step_curve(threshold: float) -> SeedProbFn:
    """Tabulated near-step curve: rejects below ``threshold``, accepts from it on."""
    eps = 1e-12
    if threshold <= 0.0:
        return SeedProbFn("tabulated", ((0.0, 0.0), (eps, 1.0), (1.0, 1.0)))
    return SeedProbFn("tabulated", ((0.0, 0.0), (threshold - eps, 0.0), (threshold, 1.0), (1.0, 1.0)))


ProfileMap = dict[int, SeedProbFn]


def eval_seed_prob(fn: SeedProbFn, c: float) -> float:
    """Acceptance probability for discount ``c`` (argument-checked)."""
    return fn(c)


# -- profile mixes -------------------------------------------------------

# Experiment presets: fractions of users per curve.
SETTING_1 = ((0.05, "quadratic-slow"), (0.10, "linear"), (0.85, "quadratic-fast"))
SETTING_2 = ((0.15, "quadratic-slow"), (0.20, "linear"), (0.65, "quadratic-fast"))


def validate_mix(mix) -> list[tuple[float, str]]:
    mix = [(float(f), str(k)) for f, k in mix]
    if abs(sum(f for f, _ in mix) - 1.0) > 1e-9:
        raise ValueError("profile-mix fractions must sum to 1")
    for _, kind in mix:
        if kind not in _BUILTIN_KINDS:
            raise ValueError(f"unknown profile kind {kind!r}")
    return mix


def assign_profiles(users: Iterable[int], mix, rng: np.random.Generator) -> ProfileMap:
    """Randomly assign curves to users in the given fractions.

    Counts use largest-remainder rounding so the split is exact up to
    integrality; the shuffle is seeded for reproducibility.
    """
    mix = validate_mix(mix)
    users = sorted(int(u) for u in users)
    n = len(users)
    raw = [f * n for f, _ in mix]
    counts = [int(x) for x in raw]
    for _ in range(n - sum(counts)):
        i = max(range(len(mix)), key=lambda j: (raw[j] - counts[j], -j))
        counts[i] += 1
    order = rng.permutation(n)
    profiles: ProfileMap = {}
    pos = 0
    for (_, kind), cnt in zip(mix, counts):
        fn = SeedProbFn(kind)
        for idx in order[pos:pos + cnt]:
            profiles[users[idx]] = fn
        pos += cnt
    return profiles


def profiles_to_json(profiles: ProfileMap) -> str:
    return json.dumps({str(u): fn.kind for u, fn in sorted(profiles.items())})


def profiles_from_json(text: str) -> ProfileMap:
    return {int(u): SeedProbFn(kind) for u, kind in json.loads(text).items()}


# -- allocations ---------------------------------------------------------


@dataclass(frozen=True)
class DiscountAllocation:
    """Map user -> discount in [0, 1] under a budget cap."""

    entries: dict[int, float]
    budget: float

    def __post_init__(self):
        total = 0.0
        for u, c in self.entries.items():
            if not (-BUDGET_TOL <= c <= 1.0 + BUDGET_TOL):
                raise ValueError(f"discount {c} for user {u} outside [0, 1]")
            total += c
        if total > self.budget + BUDGET_TOL:
            raise ValueError(f"allocation total {total} exceeds budget {self.budget}")

    @classmethod
    def zeros(cls, users: Iterable[int], budget: float) -> "DiscountAllocation":
        return cls({int(u): 0.0 for u in users}, budget)

    def get(self, u: int) -> float:
        return self.entries.get(u, 0.0)

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def users(self) -> list[int]:
        return sorted(self.entries)

    def items(self):
        return sorted(self.entries.items())

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class DiscountRateSet:
    """Strictly increasing discrete discount rates in (0, 1], topped by 1.0."""

    rates: tuple[float, ...]

    def __post_init__(self):
        if not self.rates:
            raise ValueError("rate set must be nonempty")
        for r in self.rates:
            if not 0.0 < r <= 1.0:
                raise ValueError(f"rate {r} outside (0, 1]")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rates must be strictly increasing")
        if self.rates[-1] != 1.0:
            raise ValueError("rate set must contain 1.0")

    def __iter__(self):
        return iter(self.rates)

    def __len__(self):
        return len(self.rates)

    @property
    def smallest(self) -> float:
        return self.rates[0]


DEFAULT_RATES = DiscountRateSet(tuple(i / 10 for i in range(1, 11)))
STAGE2_RATES = DiscountRateSet((0.5, 1.0))


class Action(NamedTuple):
    """A (user, discount) probe."""

    user: int
    discount: float


def action_space(users: Iterable[int], rates: DiscountRateSet) -> list[Action]:
    """Cartesian product of users and rates, ordered by (user, discount)."""
    return [Action(u, d) for u in sorted(set(int(x) for x in users)) for d in rates]


# -- probabilistic seed sets ----------------------------------------------


def seed_set_probability(alloc: DiscountAllocation, profiles: ProfileMap, subset) -> float:
    """Probability that exactly ``subset`` accepts under the allocation."""
    subset = {int(u) for u in subset}
    domain = set(alloc.entries)
    if not subset <= domain:
        raise ValueError("subset contains users outside the allocation")
    prob = 1.0
    for u, c in alloc.items():
        p = profiles[u](c)
        prob *= p if u in subset else (1.0 - p)
    return prob


def sample_seed_set(alloc: DiscountAllocation, profiles: ProfileMap, rng: np.random.Generator) -> set[int]:
    """Independent acceptance draw for every user in the allocation."""
    users = alloc.users()
    if not users:
        return set()
    probs = np.array([profiles[u](alloc.entries[u]) for u in users])
    hits = rng.random(len(users)) < probs
    return {u for u, h in zip(users, hits) if h}


def acceptance_probs(alloc: DiscountAllocation, profiles: ProfileMap) -> tuple[list[int], np.ndarray]:
    """Sorted users and their acceptance probabilities under the allocation."""
    users = alloc.users()
    return users, np.array([profiles[u](alloc.entries[u]) for u in users])
