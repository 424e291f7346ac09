"""Hyper-parameter search: grid, random, and a Tree-structured Parzen
Estimator, dispatched over a thread pool.

The scheduler owns the trial queue and history; workers only run the
trial function on an immutable assignment. TPE suggestions condition
on whatever trials have completed at suggestion time, so runs with
workers > 1 trade run-to-run identity for throughput (grid and random
use a fixed schedule and stay order-independent).
"""

import ast
import concurrent.futures
import enum
import itertools
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContinuousDomainInGrid, TrialFailed
from .seeds import derive_seed

_TPE_WARMUP = 10  # completed trials before the KDE model kicks in
_DENSITY_EPS = 1e-10


@dataclass(frozen=True)
class Choice:
    values: tuple

    def __post_init__(self):
        if len(self.values) == 0:
            raise ConfigError("choice domain must be nonempty")


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"need lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ConfigError(
                f"loguniform needs 0 < lo < hi, got [{self.lo}, {self.hi}]"
            )


@dataclass(frozen=True)
class Param:
    name: str
    domain: object


@dataclass(frozen=True)
class SearchSpace:
    params: tuple

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ConfigError("parameter names must be unique")
        if not self.params:
            raise ConfigError("search space must not be empty")


class TrialStatus(enum.Enum):
    DONE = "done"
    FAILED = "failed"


@dataclass
class TrialRecord:
    trial_id: int
    params: dict
    objective: float | None
    wall_clock: float
    status: TrialStatus
    error: str | None = None


@dataclass(frozen=True)
class TunerSpec:
    strategy: str  # "grid" | "random" | "tpe"
    max_trials: int | None
    seed: int
    workers: int = 1
    objective: str = "objective"
    gamma: float = 0.25
    n_candidates: int = 24

    def __post_init__(self):
        if self.strategy not in ("grid", "random", "tpe"):
            raise ConfigError(f"unknown tuner strategy {self.strategy!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.strategy != "grid" and (self.max_trials is None
                                        or self.max_trials < 1):
            raise ConfigError("random/tpe need max_trials >= 1")
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma must be in (0, 1]")
        if self.n_candidates < 1:
            raise ConfigError("n_candidates must be >= 1")


def parse_space_file(path) -> SearchSpace:
    """One parameter per line: ``name choice v1 v2 ...``,
    ``name uniform lo hi`` or ``name loguniform lo hi``.
    Blank lines and #-comments are skipped."""
    params = []
    for lineno, raw in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ConfigError(f"space file line {lineno}: too few tokens")
        name, kind, *args = parts
        if kind == "choice":
            params.append(Param(name, Choice(tuple(
                _parse_literal(a) for a in args))))
        elif kind in ("uniform", "loguniform"):
            if len(args) != 2:
                raise ConfigError(
                    f"space file line {lineno}: {kind} takes lo hi")
            lo, hi = float(args[0]), float(args[1])
            dom = Uniform(lo, hi) if kind == "uniform" \
                else LogUniform(lo, hi)
            params.append(Param(name, dom))
        else:
            raise ConfigError(
                f"space file line {lineno}: unknown domain {kind!r}")
    return SearchSpace(tuple(params))


def _parse_literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def grid_search(space: SearchSpace) -> list[dict]:
    """Full Cartesian product, lexicographic in declaration order."""
    for p in space.params:
        if not isinstance(p.domain, Choice):
            raise ContinuousDomainInGrid(
                f"parameter {p.name!r} is continuous; grid search "
                f"needs choice domains"
            )
    names = [p.name for p in space.params]
    pools = [p.domain.values for p in space.params]
    return [dict(zip(names, combo)) for combo in itertools.product(*pools)]


def _draw_assignment(space: SearchSpace, rng: np.random.Generator) -> dict:
    out = {}
    for p in space.params:
        dom = p.domain
        if isinstance(dom, Choice):
            out[p.name] = dom.values[int(rng.integers(len(dom.values)))]
        elif isinstance(dom, Uniform):
            out[p.name] = float(rng.uniform(dom.lo, dom.hi))
        else:
            out[p.name] = float(math.exp(
                rng.uniform(math.log(dom.lo), math.log(dom.hi))))
    return out


def random_search(space: SearchSpace, n: int, seed: int) -> list[dict]:
    """n i.i.d. assignments; Choice uniform, Uniform uniform,
    LogUniform log-uniform."""
    if n < 1:
        raise ConfigError("random search needs n >= 1")
    rng = np.random.default_rng(seed)
    return [_draw_assignment(space, rng) for _ in range(n)]


def _scott_bandwidth(obs: np.ndarray, width: float) -> float:
    bw = 1.06 * float(np.std(obs)) * obs.shape[0] ** -0.2
    return max(bw, 1e-3 * width)


def _kde_logpdf(x: float, obs: np.ndarray, bw: float, width: float) -> float:
    if obs.shape[0] == 0:
        return math.log(1.0 / width + _DENSITY_EPS)
    z = (x - obs) / bw
    dens = float(np.mean(np.exp(-0.5 * z * z))) / (bw * math.sqrt(2 * math.pi))
    return math.log(dens + _DENSITY_EPS)


def _cat_probs(values: tuple, obs: list) -> np.ndarray:
    # Laplace-smoothed frequencies: (count + 1) / (n + K)
    counts = np.array([sum(1 for o in obs if o == v) for v in values],
                      np.float64)
    return (counts + 1.0) / (len(obs) + len(values))


def tpe_suggest(space: SearchSpace, history: list, seed: int,
                gamma: float = 0.25, n_candidates: int = 24) -> dict:
    """One TPE assignment: split completed trials into good/bad by
    objective, model each side per parameter (Gaussian KDE with Scott
    bandwidth for numeric domains, smoothed frequencies for choices),
    sample candidates from the good model and return the candidate with
    the highest summed log density ratio.

    Falls back to a random draw while fewer than 10 completed trials
    exist.
    """
    rng = np.random.default_rng(seed)
    done = [r for r in history if r.status is TrialStatus.DONE]
    if len(done) < _TPE_WARMUP:
        return _draw_assignment(space, rng)

    ranked = sorted(done, key=lambda r: (-r.objective, r.trial_id))
    n_good = math.ceil(gamma * len(ranked))
    good = ranked[:n_good]
    bad = ranked[n_good:]

    # per-parameter observation sets in model space (log for LogUniform)
    models = {}
    for p in space.params:
        dom = p.domain
        if isinstance(dom, Choice):
            models[p.name] = ("cat", _cat_probs(
                dom.values, [r.params[p.name] for r in good]),
                _cat_probs(dom.values, [r.params[p.name] for r in bad]))
        else:
            to_model = (lambda v: math.log(v)) \
                if isinstance(dom, LogUniform) else (lambda v: v)
            lo = to_model(dom.lo)
            hi = to_model(dom.hi)
            g_obs = np.array([to_model(r.params[p.name]) for r in good])
            b_obs = np.array([to_model(r.params[p.name]) for r in bad])
            width = hi - lo
            g_bw = _scott_bandwidth(g_obs, width) if g_obs.size else 0.0
            b_bw = _scott_bandwidth(b_obs, width) if b_obs.size else 0.0
            models[p.name] = ("num", lo, hi, g_obs, g_bw, b_obs, b_bw)

    best_score = -math.inf
    best: dict | None = None
    for _ in range(n_candidates):
        cand = {}
        score = 0.0
        for p in space.params:
            model = models[p.name]
            if model[0] == "cat":
                _, g_probs, b_probs = model
                idx = int(rng.choice(len(p.domain.values), p=g_probs))
                cand[p.name] = p.domain.values[idx]
                score += math.log(g_probs[idx] + _DENSITY_EPS)
                score -= math.log(b_probs[idx] + _DENSITY_EPS)
            else:
                _, lo, hi, g_obs, g_bw, b_obs, b_bw = model
                center = float(g_obs[int(rng.integers(g_obs.shape[0]))])
                x = center + float(rng.normal(0.0, g_bw))
                x = min(max(x, lo), hi)  # truncate to the domain
                score += _kde_logpdf(x, g_obs, g_bw, hi - lo)
                score -= _kde_logpdf(x, b_obs, b_bw, hi - lo)
                cand[p.name] = float(math.exp(x)) \
                    if isinstance(p.domain, LogUniform) else float(x)
        if score > best_score:
            best_score = score
            best = cand
    return best


def _run_one(trial_id: int, params: dict, trial_fn) -> TrialRecord:
    start = time.perf_counter()
    try:
        objective = float(trial_fn(params))
    except Exception as exc:  # noqa: BLE001  trial isolation by design
        return TrialRecord(trial_id, params, None,
                           time.perf_counter() - start,
                           TrialStatus.FAILED, f"{type(exc).__name__}: {exc}")
    return TrialRecord(trial_id, params, objective,
                       time.perf_counter() - start, TrialStatus.DONE)


def run_tuning(spec: TunerSpec, space: SearchSpace, trial_fn
               ) -> tuple[TrialRecord, list[TrialRecord]]:
    """Dispatch trials to a worker pool; returns (best record, history
    in trial_id order). Best = highest objective, ties to the lowest
    trial_id; failed trials are recorded but excluded from best and
    from TPE conditioning."""
    if spec.strategy == "grid":
        schedule: list[dict] | None = grid_search(space)
        total = len(schedule)
    elif spec.strategy == "random":
        schedule = random_search(space, spec.max_trials, spec.seed)
        total = spec.max_trials
    else:
        schedule = None
        total = spec.max_trials

    records: dict[int, TrialRecord] = {}

    def assignment_for(trial_id: int) -> dict:
        if schedule is not None:
            return schedule[trial_id]
        completed = [records[i] for i in sorted(records)]
        return tpe_suggest(space, completed,
                           derive_seed(spec.seed, "tpe", trial_id),
                           spec.gamma, spec.n_candidates)

    with concurrent.futures.ThreadPoolExecutor(spec.workers) as ex:
        pending: dict[concurrent.futures.Future, int] = {}
        next_id = 0
        while next_id < total and len(pending) < spec.workers:
            pending[ex.submit(_run_one, next_id,
                              assignment_for(next_id), trial_fn)] = next_id
            next_id += 1
        while pending:
            done, _ = concurrent.futures.wait(
                pending, return_when=concurrent.futures.FIRST_COMPLETED)
            for fut in done:
                tid = pending.pop(fut)
                records[tid] = fut.result()
            while next_id < total and len(pending) < spec.workers:
                pending[ex.submit(_run_one, next_id,
                                  assignment_for(next_id),
                                  trial_fn)] = next_id
                next_id += 1

    history = [records[i] for i in range(total)]
    finished = [r for r in history if r.status is TrialStatus.DONE]
    if not finished:
        raise TrialFailed("every trial failed")
    best = max(finished, key=lambda r: (r.objective, -r.trial_id))
    return best, history


def write_trial_log(history: list[TrialRecord], path) -> None:
    """Tab-separated trial log, one row per trial in trial_id order."""
    lines = ["trial_id\tstatus\tobjective\twall_clock_s\tparams"]
    for r in history:
        obj = "" if r.objective is None else f"{r.objective:.10f}"
        lines.append(
            f"{r.trial_id}\t{r.status.value}\t{obj}\t"
            f"{r.wall_clock:.6f}\t{json.dumps(r.params, sort_keys=True)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
