"""Negative samplers: random (RNS), popularity-biased (PNS), and
dynamic (DNS).

Item ids are 1..item_count (0 is the pad and never sampled). All draws
are with replacement across a request. Samplers are pure functions of
(inputs, rng), so per-task derived generators give bit-identical
streams regardless of worker count.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllDegreesZero,
    AllZeroWeights,
    ConfigError,
    DataError,
    NoNegativesAvailable,
)

# below this free fraction, rejection sampling gives way to explicit
# complement enumeration
_REJECTION_CUTOVER = 0.9


@dataclass(frozen=True)
class SamplerSpec:
    strategy: str  # "rns" | "pns" | "dns"
    alpha: float = 0.0
    dns_candidates: int = 1
    per_positive: int = 1

    def __post_init__(self):
        if self.strategy not in ("rns", "pns", "dns"):
            raise ConfigError(f"unknown sampling strategy {self.strategy!r}")
        if not np.isfinite(self.alpha):
            raise ConfigError("alpha must be finite")
        if self.dns_candidates < 1:
            raise ConfigError("dns candidate count must be >= 1")
        if self.per_positive < 1:
            raise ConfigError("per_positive must be >= 1")


class PositiveSet:
    """Per-user sets of training-positive item ids (O(1) membership)."""

    __slots__ = ("_sets",)

    def __init__(self, n_users: int):
        self._sets: list[set[int]] = [set() for _ in range(n_users + 1)]

    @classmethod
    def from_pairs(cls, users, items, n_users: int) -> "PositiveSet":
        ps = cls(n_users)
        sets = ps._sets
        for u, i in zip(users, items):
            sets[int(u)].add(int(i))
        return ps

    def items_of(self, user: int) -> set[int]:
        return self._sets[user]

    def count(self, user: int) -> int:
        return len(self._sets[user])


class AliasTable:
    """Walker alias structure: O(n) build, O(1) per draw."""

    __slots__ = ("prob", "alias")

    def __init__(self, prob: np.ndarray, alias: np.ndarray):
        self.prob = prob
        self.alias = alias

    def __len__(self) -> int:
        return int(self.prob.shape[0])

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        slots = rng.integers(0, len(self), size=size)
        accept = rng.random(size) < self.prob[slots]
        return np.where(accept, slots, self.alias[slots])


def build_alias_table(weights) -> AliasTable:
    weights = np.asarray(weights, np.float64)
    if np.any(weights < 0):
        raise DataError("alias weights must be nonnegative")
    total = float(weights.sum())
    if not total > 0:
        raise AllZeroWeights("alias table needs a positive weight sum")
    n = weights.shape[0]
    scaled = weights * (n / total)
    prob = np.ones(n, np.float64)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        lg = large.pop()
        prob[s] = scaled[s]
        alias[s] = lg
        scaled[lg] = scaled[lg] - (1.0 - scaled[s])
        if scaled[lg] < 1.0:
            small.append(lg)
        else:
            large.append(lg)
    # leftovers are 1 up to float rounding
    for i in small:
        prob[i] = 1.0
    for i in large:
        prob[i] = 1.0
    return AliasTable(prob, alias)


class DegreeTable:
    """Training-split item degrees plus the deg^alpha alias table over
    the deg>0 support."""

    __slots__ = ("deg", "alpha", "support", "alias")

    def __init__(self, deg: np.ndarray, alpha: float):
        deg = np.asarray(deg, np.int64)
        self.deg = deg
        self.alpha = float(alpha)
        support = np.flatnonzero(deg > 0)
        support = support[support != 0]  # id 0 is the pad
        self.support = support
        if support.size == 0:
            self.alias = None
        else:
            weights = deg[support].astype(np.float64) ** self.alpha
            self.alias = build_alias_table(weights)

    @classmethod
    def from_interactions(cls, items, item_count: int,
                          alpha: float) -> "DegreeTable":
        deg = np.bincount(np.asarray(items, np.int64),
                          minlength=item_count + 1)
        return cls(deg, alpha)


def sample_rns(user: int, n: int, positives: PositiveSet, item_count: int,
               rng: np.random.Generator) -> np.ndarray:
    """n uniform draws (with replacement) from items outside the user's
    positives."""
    if n == 0:
        return np.zeros(0, np.int64)
    pos = positives.items_of(user)
    n_pos = len(pos)
    if n_pos >= item_count:
        raise NoNegativesAvailable(
            f"user {user} has interacted with all {item_count} items"
        )
    if n_pos / item_count > _REJECTION_CUTOVER:
        comp = np.array([i for i in range(1, item_count + 1)
                         if i not in pos], np.int64)
        return comp[rng.integers(0, comp.shape[0], size=n)]
    out = np.empty(n, np.int64)
    filled = 0
    while filled < n:
        want = n - filled
        batch = rng.integers(1, item_count + 1, size=max(16, 2 * want))
        for v in batch:
            if int(v) not in pos:
                out[filled] = v
                filled += 1
                if filled == n:
                    break
    return out


def sample_pns(user: int, n: int, alpha: float, degrees: DegreeTable,
               positives: PositiveSet, rng: np.random.Generator
               ) -> np.ndarray:
    """n popularity-biased draws, p(i) proportional to deg(i)^alpha over
    the deg>0 support, rejecting the user's positives."""
    if degrees.alias is None:
        raise AllDegreesZero("no item has positive degree")
    if alpha != degrees.alpha:
        raise ConfigError(
            f"degree table was built for alpha={degrees.alpha}, "
            f"sampling requested alpha={alpha}"
        )
    if n == 0:
        return np.zeros(0, np.int64)
    pos = positives.items_of(user)
    support = degrees.support
    blocked = sum(1 for i in pos if degrees.deg[i] > 0)
    free = support.shape[0] - blocked
    if free <= 0:
        raise NoNegativesAvailable(
            f"user {user} has interacted with every positive-degree item"
        )
    if free / support.shape[0] < 1.0 - _REJECTION_CUTOVER:
        keep = np.array([i for i in support if int(i) not in pos], np.int64)
        weights = degrees.deg[keep].astype(np.float64) ** degrees.alpha
        return rng.choice(keep, size=n, p=weights / weights.sum())
    out = np.empty(n, np.int64)
    filled = 0
    while filled < n:
        want = n - filled
        draws = support[degrees.alias.draw(rng, max(16, 2 * want))]
        for v in draws:
            if int(v) not in pos:
                out[filled] = v
                filled += 1
                if filled == n:
                    break
    return out


def sample_dns(user: int, positives: PositiveSet, item_count: int, m: int,
               scorer, rng: np.random.Generator) -> int:
    """Draw m uniform non-positive candidates and keep the one the
    scorer ranks highest; ties go to the lowest item id."""
    if m < 1:
        raise ConfigError("dns candidate count must be >= 1")
    candidates = sample_rns(user, m, positives, item_count, rng)
    scores = np.asarray(scorer(user, candidates), np.float64)
    best = scores.max()
    return int(candidates[scores == best].min())
