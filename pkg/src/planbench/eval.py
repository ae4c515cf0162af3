"""Episodic and dataset-driven goal-conditioned evaluation, plus
single-factor robustness sweeps."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .core import ContractError, EpisodeError
from .data import TrajectoryFile
from .rng import episode_seed, episode_stream, make_rng
from .worlds.variation import ResetOptions, VariationError

CSV_COLUMNS = ("factor", "n", "success_rate", "mean_time_to_goal", "mean_latency_s")


@dataclass
class EvalConfig:
    """``budget`` caps environment steps per episode. The dataset fields are
    used by :func:`evaluate_from_dataset` only; when ``episode_indices`` and
    ``start_steps`` are omitted, ``episodes`` pairs are drawn from ``seed``."""

    episodes: int = 100
    seed: int = 0
    budget: int = 50
    options: Any = None
    dataset: str | None = None
    episode_indices: Sequence[int] | None = None
    start_steps: Sequence[int] | None = None
    goal_offset: int = 25
    timing: bool = True

    def __post_init__(self):
        if self.budget < 1:
            raise ContractError("budget must be >= 1")
        if self.episodes < 1:
            raise ContractError("episodes must be >= 1")
        if self.goal_offset < 1:
            raise ContractError("goal_offset must be >= 1")

    def echo(self) -> dict:
        opts = ResetOptions.coerce(self.options)
        variation = [opts.variation] if isinstance(opts.variation, str) else list(opts.variation)
        return {
            "episodes": self.episodes,
            "seed": self.seed,
            "budget": self.budget,
            "variation": variation,
            "variation_values": {k: _jsonable(v) for k, v in sorted(opts.variation_values.items())},
            "dataset": self.dataset,
            "goal_offset": self.goal_offset if self.dataset else None,
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


@dataclass
class EpisodeRecord:
    index: int
    seed: int
    success: bool
    steps: int
    time_to_goal: int | None
    latency_s: float | None = None
    source: list | None = None  # (dataset episode, start step) in dataset mode


@dataclass
class EvalReport:
    episodes: list
    config: dict = field(default_factory=dict)
    label: str = ""

    @property
    def flags(self) -> list:
        return [e.success for e in self.episodes]

    @property
    def n(self) -> int:
        return len(self.episodes)

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.flags)) if self.episodes else 0.0

    @property
    def time_to_goal(self) -> list:
        return [e.time_to_goal for e in self.episodes if e.success]

    @property
    def mean_time_to_goal(self) -> float | None:
        ttg = self.time_to_goal
        return float(np.mean(ttg)) if ttg else None

    @property
    def seeds(self) -> list:
        return [e.seed for e in self.episodes]

    def _latencies(self) -> list:
        return [e.latency_s for e in self.episodes if e.latency_s is not None]

    @property
    def mean_latency_s(self) -> float | None:
        lat = self._latencies()
        return float(np.mean(lat)) if lat else None

    @property
    def p95_latency_s(self) -> float | None:
        lat = self._latencies()
        return float(np.percentile(lat, 95)) if lat else None

    def summary(self) -> dict:
        return {
            "label": self.label,
            "n": self.n,
            "success_rate": self.success_rate,
            "mean_time_to_goal": self.mean_time_to_goal,
            "mean_latency_s": self.mean_latency_s,
            "p95_latency_s": self.p95_latency_s,
            "config": self.config,
        }

    def emit(self) -> str:
        """Line-delimited JSON: a summary line, then one line per episode."""
        lines = [json.dumps({"type": "summary", **self.summary()}, sort_keys=True)]
        for e in self.episodes:
            lines.append(json.dumps({"type": "episode", **asdict(e)}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "EvalReport":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("type") != "summary":
            raise ValueError("report must start with a summary line")
        head = rows[0]
        eps = []
        for r in rows[1:]:
            r = dict(r)
            r.pop("type")
            eps.append(EpisodeRecord(**r))
        return cls(eps, head.get("config", {}), head.get("label", ""))


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def reports_to_csv(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Comma-separated table, one row per ``(factor, report)``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for factor, rep in rows:
        w.writerow([factor, rep.n, _fmt(rep.success_rate), _fmt(rep.mean_time_to_goal), _fmt(rep.mean_latency_s)])
    return buf.getvalue()


def _run(env, policy, slot, info, budget: int, timing: bool):
    """Drive one episode from the env's current state; returns
    ``(success, steps, time_to_goal, mean latency)``."""
    if env.success(env.state, env.goal):
        return True, 0, 0, None
    lat = 0.0
    for t in range(budget):
        t0 = time.perf_counter()
        action = policy.get_action(info, slot)
        lat += time.perf_counter() - t0
        _, done, info = env.step(action)
        if done:
            return True, t + 1, t + 1, (lat / (t + 1) if timing else None)
    return False, budget, None, (lat / budget if timing else None)


def evaluate_episodic(pool, policy, cfg: EvalConfig, label: str = "") -> EvalReport:
    """Run ``cfg.episodes`` episodes; episode ``i`` is reset with a seed
    derived from ``(cfg.seed, i)`` whatever slot runs it."""
    opts = ResetOptions.coerce(cfg.options)

    def one(env, slot, i):
        seed = episode_seed(cfg.seed, i)
        try:
            _, info = env.reset(seed, opts)
            policy.on_reset(env, slot, rng=episode_stream(cfg.seed, i), episode=i)
            ok, steps, ttg, lat = _run(env, policy, slot, info, cfg.budget, cfg.timing)
        except (VariationError, ContractError):
            raise
        except Exception as exc:
            raise EpisodeError(f"evaluate: episode {i}: {type(exc).__name__}: {exc}") from exc
        return EpisodeRecord(i, seed, ok, steps, ttg, lat)

    return EvalReport(pool.map(one, list(range(cfg.episodes))), cfg.echo(), label)


def dataset_pairs(data: TrajectoryFile, cfg: EvalConfig) -> list:
    """``(episode, start)`` pairs to evaluate, validated against ``goal_offset``."""
    delta = cfg.goal_offset
    if cfg.episode_indices is not None or cfg.start_steps is not None:
        if cfg.episode_indices is None or cfg.start_steps is None:
            raise ContractError("episode_indices and start_steps must be given together")
        if len(cfg.episode_indices) != len(cfg.start_steps):
            raise ContractError("episode_indices and start_steps differ in length")
        pairs = [(int(e), int(t)) for e, t in zip(cfg.episode_indices, cfg.start_steps)]
        for e, t in pairs:
            if not 0 <= e < len(data):
                raise IndexError(f"dataset episode {e} out of range (file has {len(data)})")
            last = int(data.lengths[e]) - 1
            if t < 0 or t + delta > last:
                raise IndexError(
                    f"dataset episode {e}: start {t} + goal offset {delta} beyond its last step {last}"
                )
        return pairs
    eligible = np.flatnonzero(data.lengths - 1 >= delta)
    if eligible.size == 0:
        raise IndexError(f"no dataset episode is longer than the goal offset {delta}")
    rng = make_rng(cfg.seed).split(2**20)
    pairs = []
    for _ in range(cfg.episodes):
        e = int(eligible[rng.integers(eligible.size)])
        t = int(rng.integers(int(data.lengths[e]) - delta))
        pairs.append((e, t))
    return pairs


def evaluate_from_dataset(pool, policy, cfg: EvalConfig, label: str = "") -> EvalReport:
    """Start each episode at a stored state with the stored factor values and
    use the state ``goal_offset`` steps later as the goal."""
    if not cfg.dataset:
        raise ContractError("dataset mode needs cfg.dataset")
    with TrajectoryFile(cfg.dataset) as data:
        world = data.meta.get("world")
        if world is not None and world != pool.name:
            raise ContractError(f"dataset was recorded in {world!r}, pool runs {pool.name!r}")
        pairs = dataset_pairs(data, cfg)
        starts, goals, variations = [], [], []
        for e, t in pairs:
            w = data.read_window(e, t, cfg.goal_offset + 1, columns=["state"])["state"]
            starts.append(w[0].astype(float))
            goals.append(w[-1].astype(float))
            variations.append(data.variation(e))

    def one(env, slot, k):
        e, t = pairs[k]
        seed = episode_seed(cfg.seed, k)
        try:
            values = env.variations.unflatten(variations[k])
        except VariationError as exc:
            raise VariationError(f"dataset episode {e}: cannot re-apply factor values: {exc}") from None
        try:
            env.reset(seed, {"variation_values": values})
            env.set_state(starts[k])
            env.set_goal(goals[k])
            policy.on_reset(env, slot, rng=episode_stream(cfg.seed, k), episode=k)
            ok, steps, ttg, lat = _run(env, policy, slot, env.current_info(), cfg.budget, cfg.timing)
        except (VariationError, ContractError):
            raise
        except Exception as exc:
            raise EpisodeError(f"evaluate: pair {k} (dataset episode {e}, step {t}): {exc}") from exc
        return EpisodeRecord(k, seed, ok, steps, ttg, lat, [e, t])

    return EvalReport(pool.map(one, list(range(len(pairs)))), cfg.echo(), label)


def fov_sweep(pool, policy, cfg: EvalConfig, keys: Sequence[str]) -> list:
    """Baseline row plus one row per factor, each factor sampled alone.

    Every row reuses ``cfg.seed``, so episode ``i`` sees the same task draw
    in every row up to the varied factor.
    """
    space = pool.envs[0].variations
    for k in keys:
        space[k]  # raises on unknown keys
    base = ResetOptions.coerce(cfg.options)
    rows = [("baseline", evaluate_episodic(pool, policy, cfg, "baseline"))]
    for k in keys:
        opts = ResetOptions(variation=[k], variation_values=dict(base.variation_values))
        rows.append((k, evaluate_episodic(pool, policy, replace(cfg, options=opts), k)))
    return rows
