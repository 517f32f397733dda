"""Experiment runner: configs, seeded trials, metrics, aggregation and CSV I/O.

A trial is compiled end to end: one ``lax.scan`` runs the whole trajectory
and returns the profile at every checkpoint (step 0, every ``eval_every``
steps and the last step). Metrics are then computed from the checkpoints.
"""
from __future__ import annotations

import csv
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from functools import lru_cache

import jax
import jax.numpy as jnp
import numpy as np

from . import evaluation as ev
from .exceptions import ConfigError, UnsupportedMethodError
from .games import GAME_IDS, make_game
from .games.base import FiniteGame, Game
from .games.continuous import GlicksbergGross, SaddleGame, SecurityGame
from .games.gan import GanGame
from .games.kuhn import KuhnPoker
from .methods import METHOD_IDS, MethodConfig, get_method

DIVERGENCE_NORM = 1e6
DIVERGED = "diverged"
CSV_HEADER = ("game", "method", "trial", "step", "metric", "value")
METRICS = ("distance", "exploitability", "approx_exploitability", "ks", "ewd")
EWD_SAMPLES = 256
KS_SAMPLES = 1024


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    kind: str  # "constant" or "harmonic"
    value: float

    @classmethod
    def parse(cls, text: str, eta: float) -> "Schedule":
        text = text.strip().replace(" ", "")
        if text == "constant":
            return cls("constant", float(eta))
        m = re.fullmatch(r"harmonic\(([^)]*)\)", text)
        if m:
            c = float(m.group(1))
            if c <= 0:
                raise ConfigError("harmonic schedule needs c > 0")
            return cls("harmonic", c)
        raise ConfigError(f"unknown step-size schedule {text!r}; use 'constant' or 'harmonic(c)'")


def schedule_step(schedule: Schedule, t):
    """Step size at step ``t >= 1``: ``eta`` or ``c / t``."""
    if schedule.kind == "constant":
        return schedule.value
    return schedule.value / t


@dataclass(frozen=True)
class ExperimentConfig:
    game: str
    method: str
    steps: int = 1000
    eta: float = 1e-3
    gamma: float = 1e-1
    trials: int = 64
    seed: int = 0
    batch_size: int = 64
    ensemble_size: int = 10
    brf_hidden: int = 32
    eval_every: int = 10
    schedule: str = "constant"
    metrics: tuple = ()
    out: str | None = None
    gan_eta: float | None = None  # step size used instead of eta on GAN games
    ewd_samples: int = EWD_SAMPLES

    def __post_init__(self):
        if isinstance(self.metrics, str):
            object.__setattr__(self, "metrics", tuple(m for m in self.metrics.split(",") if m))
        else:
            object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.steps < 1 or self.trials < 1 or self.eval_every < 1:
            raise ConfigError("steps, trials and eval_every must all be at least 1")
        if self.eta < 0 or self.gamma < 0:
            raise ConfigError("eta and gamma must be non-negative")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}; known: {', '.join(METRICS)}")

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for k, v in values.items():
            if k not in types:
                raise ConfigError(f"unknown config key {k!r}")
            kwargs[k] = _coerce(k, v, types[k])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def method_config(self, game: Game) -> MethodConfig:
        eta = self.gan_eta if isinstance(game, GanGame) and self.gan_eta is not None else self.eta
        return MethodConfig(self.method, eta, self.gamma, self.ensemble_size, self.brf_hidden)


def _coerce(key, value, typ):
    if not isinstance(value, str):
        return value
    value = value.strip()
    if key == "metrics":
        return tuple(m.strip() for m in value.split(",") if m.strip())
    if key in ("out", "gan_eta") and value.lower() in ("", "none"):
        return None
    try:
        if typ == "int":
            return int(value)
        if typ in ("float", "float | None"):
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value, got {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


# -- seeds -------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(seed: int, trial: int) -> int:
    """Independent 32-bit seed for each (experiment seed, trial) pair."""
    return splitmix64(splitmix64(seed & _MASK64) ^ trial) & 0xFFFFFFFF


# -- metrics -----------------------------------------------------------------


def default_metrics(game: Game) -> tuple:
    if isinstance(game, SaddleGame):
        return ("distance",)
    if isinstance(game, KuhnPoker):
        return ("exploitability",)
    if isinstance(game, FiniteGame):
        return ("exploitability", "distance") if game.has_known_ne else ("exploitability",)
    if isinstance(game, GlicksbergGross):
        return ("ks",)
    if isinstance(game, SecurityGame):
        return ("approx_exploitability",)
    if isinstance(game, GanGame):
        return ("ewd",)
    return ("approx_exploitability",)


def _check_metric(game: Game, metric: str):
    ok = {
        "distance": game.has_known_ne,
        "exploitability": game.has_oracle,
        "approx_exploitability": True,
        "ks": isinstance(game, GlicksbergGross),
        "ewd": isinstance(game, GanGame),
    }[metric]
    if not ok:
        raise ConfigError(f"metric {metric!r} is not available on {game.name}")


@lru_cache(maxsize=None)
def _batched(game: Game, name: str):
    return jax.jit(jax.vmap(getattr(game, name)))


def metric_values(game: Game, metric: str, xs, key, ewd_samples: int = EWD_SAMPLES) -> np.ndarray:
    """Metric at each row of ``xs``; ``key`` fixes the evaluation noise."""
    xs = jnp.asarray(xs)
    if metric == "exploitability":
        return np.maximum(np.asarray(_batched(game, "exploitability")(xs)), 0.0)
    if metric == "distance":
        return np.asarray(_batched(game, "distance_to_ne")(xs))
    if metric == "ks":
        sampler = _gg_sampler(game)
        samples = np.asarray(sampler(xs, key))
        return np.array([np.mean([ev.gg_cdf_distance(s) for s in row]) for row in samples])
    if metric == "approx_exploitability":
        return np.array([ev.approx_exploitability(game, x, rng=key).total for x in xs])
    if metric == "ewd":
        return np.array([ev.gan_ewd(game, x, ewd_samples, key) for x in xs])
    raise ConfigError(f"unknown metric {metric!r}")


@lru_cache(maxsize=None)
def _gg_sampler(game):
    def one(x, key):
        return jnp.stack([s[:, 0] for s in game.samples(x, key, batch=KS_SAMPLES)])

    return jax.jit(jax.vmap(one, in_axes=(0, None)))


# -- trials ------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    step: int
    metric: str
    value: float  # nan marks a diverged trial


def checkpoint_steps(steps: int, eval_every: int) -> list[int]:
    out = list(range(0, steps + 1, eval_every))
    if out[-1] != steps:
        out.append(steps)
    return out


def _tree_where(flag, a, b):
    return jax.tree_util.tree_map(lambda u, v: jnp.where(flag, u, v), a, b)


def _tree_finite(tree):
    ok = jnp.asarray(True)
    for leaf in jax.tree_util.tree_leaves(tree):
        ok = ok & jnp.all(jnp.isfinite(leaf))
    return ok


@lru_cache(maxsize=None)
def _trajectory_fn(game, mcfg: MethodConfig, schedule: Schedule, steps: int, eval_every: int):
    """Compiled ``(x0, state0, key, t0) -> (checkpoints, final_state, diverged_at)``.

    Steps are numbered from ``t0 + 1``; the number feeds the schedule and
    the per-step noise key.
    """
    method = get_method(mcfg.method)
    n_chunks, rem = divmod(steps, eval_every)

    def one_step(carry, t):
        x, state, key, div_at = carry
        eta = schedule_step(schedule, t.astype(jnp.float64))
        x_new, state_new = method.step(game, x, state, jax.random.fold_in(key, t), eta, mcfg)
        bad = ~(_tree_finite(x_new) & _tree_finite(state_new)) | (jnp.linalg.norm(x_new) > DIVERGENCE_NORM)
        alive = div_at < 0
        newly = alive & bad
        div_at = jnp.where(newly, t, div_at)
        keep = alive & ~bad
        x = jnp.where(keep, x_new, x)
        state = _tree_where(keep, state_new, state)
        return (x, state, key, div_at), None

    def chunk(carry, start, length):
        ts = start + jnp.arange(1, length + 1)
        carry, _ = jax.lax.scan(one_step, carry, ts)
        return carry

    def run(x0, state0, key, t0):
        carry = (x0, state0, key, jnp.asarray(-1, dtype=t0.dtype))

        def body(carry, c):
            carry = chunk(carry, t0 + c * eval_every, eval_every)
            return carry, carry[0]

        carry, xs = jax.lax.scan(body, carry, jnp.arange(n_chunks))
        xs = jnp.concatenate([x0[None], xs])
        if rem:
            carry = chunk(carry, t0 + n_chunks * eval_every, rem)
            xs = jnp.concatenate([xs, carry[0][None]])
        return xs, carry[1], carry[3]

    return jax.jit(run)


@lru_cache(maxsize=None)
def _game(game_id: str, batch_size: int) -> Game:
    # one instance per id keeps compiled trajectories cached across experiments
    return make_game(game_id, batch_size=batch_size)


def _validate(config: ExperimentConfig):
    if config.game not in GAME_IDS:
        raise ConfigError(f"unknown game {config.game!r}; known games: {', '.join(GAME_IDS)}")
    if config.method not in METHOD_IDS:
        raise ConfigError(f"unknown method {config.method!r}; known methods: {', '.join(METHOD_IDS)}")
    game = _game(config.game, config.batch_size)
    try:
        get_method(config.method).check(game)
    except UnsupportedMethodError as exc:
        raise ConfigError(str(exc)) from None
    metrics = config.metrics or default_metrics(game)
    for m in metrics:
        _check_metric(game, m)
    schedule = Schedule.parse(config.schedule, config.eta)
    return game, metrics, schedule


def run_trial(config: ExperimentConfig, trial: int, game=None, metrics=None, schedule=None):
    """Run one trial and return its records."""
    if game is None:
        game, metrics, schedule = _validate(config)
    mcfg = config.method_config(game)
    if schedule.kind == "constant":
        schedule = Schedule("constant", mcfg.eta)
    key = jax.random.PRNGKey(trial_seed(config.seed, trial))
    k_init, k_state, k_run, k_eval = jax.random.split(key, 4)
    x0 = game.init_params(k_init)
    state0 = get_method(config.method).init_state(game, x0, k_state, mcfg)
    fn = _trajectory_fn(game, mcfg, schedule, config.steps, config.eval_every)
    xs, _, div_at = fn(x0, state0, k_run, jnp.asarray(0))
    xs = np.asarray(xs)
    div_at = int(div_at)
    steps = checkpoint_steps(config.steps, config.eval_every)
    alive = np.array([div_at < 0 or s < div_at for s in steps])
    records = []
    for m in metrics:
        vals = np.full(len(steps), np.nan)
        if alive.any():
            vals[alive] = metric_values(game, m, xs[alive], k_eval, config.ewd_samples)
        records.extend(TrialRecord(trial, s, m, float(v)) for s, v in zip(steps, vals))
    return records


def _workers() -> int:
    env = os.environ.get("NASHDYN_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"NASHDYN_WORKERS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_experiment(config: ExperimentConfig) -> list[TrialRecord]:
    """Run all trials. Records come back in (trial, metric, step) order whatever the worker count."""
    game, metrics, schedule = _validate(config)
    workers = min(_workers(), config.trials)

    def job(t):
        return run_trial(config, t, game, metrics, schedule)

    if workers == 1:
        per_trial = [job(t) for t in range(config.trials)]
    else:
        with ThreadPoolExecutor(workers) as pool:
            per_trial = list(pool.map(job, range(config.trials)))
    records = [r for rs in per_trial for r in rs]
    if config.out:
        emit_csv(records, config.out, config.game, config.method)
    return records


# -- aggregation and CSV -----------------------------------------------------


@dataclass(frozen=True)
class Aggregate:
    step: int
    metric: str
    mean: float
    stderr: float
    n: int
    diverged: int


def aggregate(records) -> list[Aggregate]:
    """Per (metric, step) mean and standard error over non-diverged trials."""
    groups: dict[tuple[str, int], list[float]] = {}
    for r in records:
        groups.setdefault((r.metric, r.step), []).append(r.value)
    out = []
    for (metric, step), vals in groups.items():
        vals = np.asarray(vals, dtype=float)
        ok = vals[np.isfinite(vals)]
        n = ok.size
        if n == 0:
            mean = stderr = math.nan
        else:
            mean = float(ok.mean())
            stderr = float(ok.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append(Aggregate(step, metric, mean, stderr, n, int(vals.size - n)))
    return out


def final_values(records, metric: str) -> np.ndarray:
    """Per-trial value at the last recorded step of ``metric``."""
    last = {}
    for r in records:
        if r.metric == metric and (r.trial not in last or r.step >= last[r.trial].step):
            last[r.trial] = r
    return np.array([last[t].value for t in sorted(last)])


def metric_matrix(records, metric: str):
    """``(steps, values)`` with values shaped ``(trials, checkpoints)``."""
    rows = [r for r in records if r.metric == metric]
    steps = sorted({r.step for r in rows})
    trials = sorted({r.trial for r in rows})
    si = {s: k for k, s in enumerate(steps)}
    ti = {t: k for k, t in enumerate(trials)}
    out = np.full((len(trials), len(steps)), np.nan)
    for r in rows:
        out[ti[r.trial], si[r.step]] = r.value
    return np.asarray(steps), out


def format_value(v: float) -> str:
    return DIVERGED if not math.isfinite(v) else "%.12g" % v


def _rows(items, game, method):
    for item in items:
        if isinstance(item, Aggregate):
            yield (game, method, -1, item.step, f"{item.metric}_mean", format_value(item.mean))
            yield (game, method, -1, item.step, f"{item.metric}_stderr", format_value(item.stderr))
            yield (game, method, -1, item.step, f"{item.metric}_n", str(item.n))
            yield (game, method, -1, item.step, f"{item.metric}_diverged", str(item.diverged))
        else:
            yield (game, method, item.trial, item.step, item.metric, format_value(item.value))


def emit_csv(items, path, game: str, method: str):
    """Write records and/or aggregates; UTF-8 with LF line endings."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows(_rows(items, game, method))
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list[tuple]:
    """Rows as ``(game, method, trial, step, metric, value)`` with ``nan`` for diverged."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            return [
                (g, m, int(t), int(s), name, math.nan if v == DIVERGED else float(v))
                for g, m, t, s, name, v in reader
            ]
    except OSError as exc:
        raise OSError(f"cannot read CSV from {path}: {exc}") from exc


def records_from_csv(path) -> list[TrialRecord]:
    return [TrialRecord(t, s, name, v) for _, _, t, s, name, v in read_csv(path) if t >= 0]


__all__ = [
    "Aggregate", "ExperimentConfig", "Schedule", "TrialRecord", "aggregate", "checkpoint_steps",
    "default_metrics", "emit_csv", "final_values", "metric_matrix", "metric_values", "read_config_file",
    "read_csv", "records_from_csv", "run_experiment", "run_trial", "schedule_step", "splitmix64",
    "trial_seed",
]
