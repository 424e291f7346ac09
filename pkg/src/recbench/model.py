"""Pairwise matrix factorization trained with the BPR objective, plus a
popularity baseline.

Loss per (u, i+, i-) triple: -ln sigmoid(s(u,i+) - s(u,i-)) +
reg * (|p_u|^2 + |q_i+|^2 + |q_i-|^2), minimized by plain SGD with the
L2 term folded into the gradient. Row 0 of both factor matrices is the
pad and is never touched by updates.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DivergenceDetected
from .kernels import bpr_epoch
from .pipeline import BatchPlan, iterate_epoch
from .sampling import (
    DegreeTable,
    PositiveSet,
    SamplerSpec,
    sample_dns,
    sample_pns,
    sample_rns,
)
from .seeds import derive_rng, derive_seed

_MAGIC = b"RBMF"
_VERSION = 1


@dataclass
class MfModel:
    user_factors: np.ndarray  # (n_users + 1, d), row 0 = pad
    item_factors: np.ndarray  # (n_items + 1, d), row 0 = pad

    @property
    def d(self) -> int:
        return int(self.user_factors.shape[1])

    def score(self, user: int, item: int) -> float:
        return float(self.user_factors[user] @ self.item_factors[item])

    def score_users(self, users) -> np.ndarray:
        """Scores for a block of users against every item column."""
        return self.user_factors[np.asarray(users, np.int64)] \
            @ self.item_factors.T

    def save(self, path) -> None:
        u, d = self.user_factors.shape
        i, _ = self.item_factors.shape
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<IQQQ", _VERSION, u, i, d))
            f.write(np.ascontiguousarray(
                self.user_factors, "<f8").tobytes())
            f.write(np.ascontiguousarray(
                self.item_factors, "<f8").tobytes())

    @classmethod
    def load(cls, path) -> "MfModel":
        try:
            f = open(path, "rb")
        except FileNotFoundError:
            raise DataError(f"checkpoint file not found: {path}") \
                from None
        with f:
            magic = f.read(4)
            if magic != _MAGIC:
                raise DataError(f"bad checkpoint magic {magic!r}")
            header = f.read(28)
            if len(header) != 28:
                raise DataError("truncated checkpoint header")
            version, u, i, d = struct.unpack("<IQQQ", header)
            if version != _VERSION:
                raise DataError(f"unsupported checkpoint version {version}")
            body = f.read((u + i) * d * 8)
            if len(body) != (u + i) * d * 8:
                raise DataError("truncated checkpoint payload")
            uf = np.frombuffer(body[:u * d * 8], "<f8").reshape(u, d)
            itf = np.frombuffer(body[u * d * 8:], "<f8").reshape(i, d)
        return cls(uf.astype(np.float64), itf.astype(np.float64))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    l2_reg: float
    epochs: int
    d: int
    seed: int
    sampler: SamplerSpec
    batch_size: int = 1024

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.d < 1:
            raise ConfigError("embedding size must be >= 1")
        if self.l2_reg < 0:
            raise ConfigError("l2_reg must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


def init_factors(n_users: int, n_items: int, d: int, seed: int
                 ) -> tuple[np.ndarray, np.ndarray]:
    # N(0, 0.1^2/sqrt(d)) variance, i.e. std = 0.1 / d^0.25
    rng = derive_rng(seed, "init")
    std = 0.1 / d ** 0.25
    user_f = rng.normal(0.0, std, (n_users + 1, d))
    item_f = rng.normal(0.0, std, (n_items + 1, d))
    return user_f, item_f


def _softplus(x: float) -> float:
    if x >= 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def bpr_loss(pu, qi, qj, reg: float) -> float:
    """Reference loss for one triple (mirrors the update kernel)."""
    x = float(np.dot(pu, qi - qj))
    return _softplus(-x) + reg * float(
        np.dot(pu, pu) + np.dot(qi, qi) + np.dot(qj, qj))


def bpr_grads(pu, qi, qj, reg: float
              ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of bpr_loss w.r.t. (pu, qi, qj)."""
    x = float(np.dot(pu, qi - qj))
    if x >= 0.0:
        e = math.exp(-x)
        g = e / (1.0 + e)
    else:
        e = math.exp(x)
        g = 1.0 / (1.0 + e)
    gpu = -g * (qi - qj) + 2.0 * reg * pu
    gqi = -g * pu + 2.0 * reg * qi
    gqj = g * pu + 2.0 * reg * qj
    return gpu, gqi, gqj


def _make_collate(users, items, positives, n_items, spec: SamplerSpec,
                  degrees, rng, snapshot_fn):
    pp = spec.per_positive

    def collate(block):
        bu = users[block]
        bi = items[block]
        negs = np.empty(block.shape[0] * pp, np.int64)
        if spec.strategy == "dns":
            snap_u, snap_i = snapshot_fn()

            def scorer(u, cands):
                return snap_u[u] @ snap_i[cands].T

            w = 0
            for u in bu:
                for _ in range(pp):
                    negs[w] = sample_dns(int(u), positives, n_items,
                                         spec.dns_candidates, scorer, rng)
                    w += 1
        elif spec.strategy == "pns":
            for r, u in enumerate(bu):
                negs[r * pp:(r + 1) * pp] = sample_pns(
                    int(u), pp, spec.alpha, degrees, positives, rng)
        else:
            for r, u in enumerate(bu):
                negs[r * pp:(r + 1) * pp] = sample_rns(
                    int(u), pp, positives, n_items, rng)
        return np.repeat(bu, pp), np.repeat(bi, pp), negs

    return collate


def train_bpr(train_users, train_items, n_users: int, n_items: int,
              config: TrainConfig) -> tuple[MfModel, list[float]]:
    """SGD over per-epoch shuffled positives with sampled negatives.

    Returns the model and the per-epoch mean loss trace (loss measured
    at pre-update parameters, averaged over gradient steps).
    """
    train_users = np.asarray(train_users, np.int64)
    train_items = np.asarray(train_items, np.int64)
    n = train_users.shape[0]
    if n == 0:
        raise DataError("training split is empty")
    user_f, item_f = init_factors(n_users, n_items, config.d, config.seed)
    positives = PositiveSet.from_pairs(train_users, train_items, n_users)
    degrees = None
    if config.sampler.strategy == "pns":
        degrees = DegreeTable.from_interactions(
            train_items, n_items, config.sampler.alpha)

    def snapshot_fn():
        return user_f.copy(), item_f.copy()

    losses: list[float] = []
    steps_per_epoch = n * config.sampler.per_positive
    for epoch in range(config.epochs):
        rng = derive_rng(config.seed, "negatives", epoch)
        plan = BatchPlan(config.batch_size, True,
                         derive_seed(config.seed, "order", epoch))
        total = 0.0
        for eu, ei, ej in iterate_epoch(n, plan, _make_collate(
                train_users, train_items, positives, n_items,
                config.sampler, degrees, rng, snapshot_fn), workers=1):
            total += bpr_epoch(eu, ei, ej, user_f, item_f,
                               config.learning_rate, config.l2_reg)
        mean = total / steps_per_epoch
        if not math.isfinite(mean):
            raise DivergenceDetected(f"loss diverged at epoch {epoch}")
        losses.append(mean)
    return MfModel(user_f, item_f), losses


class PopularityScorer:
    """score(u, i) = training-split degree of i, for every user."""

    def __init__(self, deg: np.ndarray):
        self.deg = np.asarray(deg, np.float64)

    def score_users(self, users) -> np.ndarray:
        return np.broadcast_to(self.deg,
                               (len(np.atleast_1d(users)),
                                self.deg.shape[0]))


def popularity_baseline(train_items, n_items: int) -> PopularityScorer:
    deg = np.bincount(np.asarray(train_items, np.int64),
                      minlength=n_items + 1)
    deg[0] = 0
    return PopularityScorer(deg)
