"""Parallel batch execution, throughput measurement, and determinism audits.

Environments are single-threaded, so a batch is N independent instances
spread round-robin over W forked worker processes (worker w owns envs
w, w+W, w+2W, ...). Per-env trajectories depend only on (base_seed,
env_index, episode_index), never on the worker layout, so any W yields
bit-identical observation streams.
"""

from __future__ import annotations

import csv
import multiprocessing
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .audio import load_track_bank
from .errors import BatchError, ComparisonError
from .world import Env, EnvConfig, EpisodeResult, make_policy, observation_digest

BENCH_CSV_HEADER = (
    "scenario,n_envs,n_workers,sound,steps_per_env,frameskip,"
    "env_frames_total,wall_seconds,frames_per_second"
)


def episode_seed(base_seed: int, env_index: int, episode: int) -> int:
    """Per-episode seed, stable across worker layouts.

    Env i starts its first episode at base_seed + i; auto-reset episodes
    derive follow-up seeds from that root.
    """
    root = base_seed + env_index
    if episode == 0:
        return root
    ss = np.random.SeedSequence((root, episode))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class BatchConfig:
    env_config: EnvConfig
    n_envs: int = 1
    n_workers: int = 1
    steps_per_env: int = 100
    sound_enabled: bool = True
    base_seed: int = 0
    policy: str = "random"

    def validate(self) -> None:
        if self.n_envs < 1:
            raise ComparisonError(f"n_envs must be >= 1, got {self.n_envs}")
        if self.n_workers < 1:
            raise ComparisonError(f"n_workers must be >= 1, got {self.n_workers}")
        if self.steps_per_env < 1:
            raise ComparisonError(f"steps_per_env must be >= 1, got {self.steps_per_env}")


@dataclass(slots=True)
class EnvRunResult:
    env_index: int
    episodes: list[EpisodeResult]
    steps: int
    saturation_count: int
    digests: list[bytes] | None


@dataclass(slots=True)
class WorkerReport:
    worker_index: int
    env_indices: list[int]
    wall_seconds: float


@dataclass(slots=True)
class BenchReport:
    """Frame accounting: env_frames_total = n_envs * steps_per_env * frameskip
    exactly; wall time covers stepping only (track banks load beforehand)."""

    scenario: str
    n_envs: int
    n_workers: int
    sound_enabled: bool
    steps_per_env: int
    frameskip: int
    env_frames_total: int
    wall_seconds: float
    frames_per_second: float
    saturation_count: int = 0
    env_results: list = field(default_factory=list)
    workers: list = field(default_factory=list)


_WORKER_BANK = None
_WORKER_CFG = None


def _worker_init(env_config: EnvConfig):
    # Load (and cache) the track bank before any timing starts.
    global _WORKER_BANK, _WORKER_CFG
    _WORKER_CFG = env_config
    _WORKER_BANK = load_track_bank(
        env_config.track_bank or None, env_config.sample_rate
    )


def _run_one_env(env_index: int, cfg: BatchConfig, bank, collect: bool) -> EnvRunResult:
    env = Env(cfg.env_config, bank=bank, sound_enabled=cfg.sound_enabled)
    policy = make_policy(cfg.policy)
    digests: list[bytes] | None = [] if collect else None
    episodes: list[EpisodeResult] = []

    episode = 0
    seed = episode_seed(cfg.base_seed, env_index, episode)
    try:
        obs = env.reset(seed)
        policy.reset(seed)
        if collect:
            digests.append(observation_digest(obs))
        ep_return = 0.0
        ep_steps = 0
        touched = 0
        for _ in range(cfg.steps_per_env):
            action = policy(obs, env)
            obs = env.step(action)
            ep_return += obs.reward
            ep_steps += 1
            if obs.info["touched_id"]:
                touched = obs.info["touched_id"]
            if collect:
                digests.append(observation_digest(obs))
            if obs.done:
                episodes.append(
                    EpisodeResult(seed, ep_return, ep_steps, env.state.tic, touched)
                )
                episode += 1
                seed = episode_seed(cfg.base_seed, env_index, episode)
                obs = env.reset(seed)
                policy.reset(seed)
                if collect:
                    digests.append(observation_digest(obs))
                ep_return = 0.0
                ep_steps = 0
                touched = 0
    except Exception as exc:
        raise BatchError(
            f"env {env_index} (episode seed {seed}) failed: {exc!r}"
        ) from exc
    return EnvRunResult(
        env_index, episodes, cfg.steps_per_env, env.saturation_count, digests
    )


def _run_env_slice(args):
    worker_index, env_indices, cfg, collect = args
    bank = _WORKER_BANK if _WORKER_BANK is not None else load_track_bank(
        cfg.env_config.track_bank or None, cfg.env_config.sample_rate
    )
    t0 = time.perf_counter()
    results = [_run_one_env(i, cfg, bank, collect) for i in env_indices]
    wall = time.perf_counter() - t0
    return WorkerReport(worker_index, list(env_indices), wall), results


def run_batch(cfg: BatchConfig, collect_digests: bool = False) -> BenchReport:
    """Run n_envs for steps_per_env steps each and time the stepping."""
    cfg.validate()
    cfg.env_config.validate()
    make_policy(cfg.policy)  # fail fast on bad names
    assignments = [
        (w, list(range(w, cfg.n_envs, cfg.n_workers)), cfg, collect_digests)
        for w in range(cfg.n_workers)
    ]
    assignments = [a for a in assignments if a[1]]

    # Warm the parent's bank cache first: forked workers inherit it, so the
    # initializer is a cache hit and asset loading stays out of the timing.
    _worker_init(cfg.env_config)
    if cfg.n_workers == 1:
        t0 = time.perf_counter()
        packed = [_run_env_slice(assignments[0])]
        wall = time.perf_counter() - t0
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(
            processes=len(assignments),
            initializer=_worker_init,
            initargs=(cfg.env_config,),
        ) as pool:
            t0 = time.perf_counter()
            packed = pool.map(_run_env_slice, assignments)
            wall = time.perf_counter() - t0

    workers = [p[0] for p in packed]
    env_results = [r for p in packed for r in p[1]]
    env_results.sort(key=lambda r: r.env_index)

    frames = cfg.n_envs * cfg.steps_per_env * cfg.env_config.frameskip
    return BenchReport(
        scenario=cfg.env_config.scenario,
        n_envs=cfg.n_envs,
        n_workers=cfg.n_workers,
        sound_enabled=cfg.sound_enabled,
        steps_per_env=cfg.steps_per_env,
        frameskip=cfg.env_config.frameskip,
        env_frames_total=frames,
        wall_seconds=wall,
        frames_per_second=frames / wall if wall > 0 else float("inf"),
        saturation_count=sum(r.saturation_count for r in env_results),
        env_results=env_results,
        workers=workers,
    )


def overhead_ratio(report_on: BenchReport, report_off: BenchReport) -> float:
    """fps(sound on) / fps(sound off) for otherwise identical runs."""
    if not report_on.sound_enabled or report_off.sound_enabled:
        raise ComparisonError(
            "expected one sound-on report and one sound-off report"
        )
    for name in ("scenario", "n_envs", "n_workers", "steps_per_env", "frameskip"):
        a, b = getattr(report_on, name), getattr(report_off, name)
        if a != b:
            raise ComparisonError(f"reports differ in {name}: {a} vs {b}")
    return report_on.frames_per_second / report_off.frames_per_second


def append_bench_csv(path, report: BenchReport) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        if new:
            w.writerow(BENCH_CSV_HEADER.split(","))
        w.writerow(
            [
                report.scenario,
                report.n_envs,
                report.n_workers,
                "on" if report.sound_enabled else "off",
                report.steps_per_env,
                report.frameskip,
                report.env_frames_total,
                f"{report.wall_seconds:.6f}",
                f"{report.frames_per_second:.2f}",
            ]
        )


# ---------------------------------------------------------------------------
# Determinism audit
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class AuditResult:
    passed: bool
    n_runs: int
    n_envs: int
    first_divergence: tuple[int, int] | None  # (env position, obs index)

    def describe(self) -> str:
        if self.passed:
            return (
                f"audit passed: {self.n_runs} runs x {self.n_envs} envs produced "
                f"identical observation streams"
            )
        env_pos, obs_index = self.first_divergence
        return (
            f"audit FAILED: env #{env_pos} diverged at observation {obs_index} "
            f"(0 is the reset observation)"
        )


def _default_env_factory(env_config: EnvConfig, sound_enabled: bool) -> Env:
    return Env(env_config, sound_enabled=sound_enabled)


def _audit_one(env_factory, env_config, sound, seed, actions) -> list[bytes]:
    env = env_factory(env_config, sound)
    obs = env.reset(seed)
    digests = [observation_digest(obs)]
    for action in actions:
        if obs.done:
            break
        obs = env.step(action)
        digests.append(observation_digest(obs))
    return digests


def _audit_worker(args):
    env_indices, env_factory, env_config, sound, seeds, actions = args
    return [
        (i, _audit_one(env_factory, env_config, sound, seeds[i], actions))
        for i in env_indices
    ]


def determinism_audit(
    env_config: EnvConfig,
    seeds,
    n_steps: int = 50,
    n_workers_list=(1, 4),
    repeats: int = 2,
    action_seed: int = 0,
    action_script=None,
    sound_enabled: bool = True,
    env_factory=None,
) -> AuditResult:
    """Replay one action script on the same seeds under every worker layout,
    ``repeats`` times each, and compare per-step observation digests.

    ``action_script`` fixes the actions explicitly; otherwise a random
    script of ``n_steps`` actions is drawn from ``action_seed``.
    ``env_factory(config, sound_enabled)`` is injectable so tests can prove
    the audit catches a nondeterministic environment.
    """
    env_config.validate()
    seeds = list(seeds)
    if not seeds:
        raise ComparisonError("audit needs at least one seed")
    if env_factory is None:
        env_factory = _default_env_factory
    load_track_bank(env_config.track_bank or None, env_config.sample_rate)
    if action_script is not None:
        actions = [int(a) for a in action_script]
    else:
        rng = np.random.default_rng(action_seed)
        actions = [int(a) for a in rng.integers(0, 5, size=n_steps)]

    runs: list[list[list[bytes]]] = []
    for n_workers in n_workers_list:
        for _ in range(repeats):
            per_env: list = [None] * len(seeds)
            groups = [
                (list(range(w, len(seeds), n_workers)), env_factory, env_config,
                 sound_enabled, seeds, actions)
                for w in range(n_workers)
            ]
            groups = [g for g in groups if g[0]]
            if n_workers == 1:
                packed = [_audit_worker(groups[0])]
            else:
                ctx = multiprocessing.get_context("fork")
                with ctx.Pool(processes=len(groups)) as pool:
                    packed = pool.map(_audit_worker, groups)
            for chunk in packed:
                for i, digests in chunk:
                    per_env[i] = digests
            runs.append(per_env)

    reference = runs[0]
    for run in runs[1:]:
        for env_pos, (a, b) in enumerate(zip(reference, run)):
            if a == b:
                continue
            length = min(len(a), len(b))
            for obs_index in range(length):
                if a[obs_index] != b[obs_index]:
                    return AuditResult(False, len(runs), len(seeds), (env_pos, obs_index))
            return AuditResult(False, len(runs), len(seeds), (env_pos, length))
    return AuditResult(True, len(runs), len(seeds), None)
