"""Handle-based environment interface for RL frameworks.

``make``/``reset``/``step``/``close`` drive opaque integer handles so the
caller never holds simulator objects, and ``spec`` describes the buffers a
handle will produce. Observation arrays are row-major little-endian
(audio float32, image uint8, ray distances float32), copied once out of
the native observation: two observations never alias, and the bytes match
the native trajectory for the same (config, seed, actions) exactly.

A handle must not be shared across threads; distinct handles may be
driven from distinct threads concurrently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from echosim import ACTION_NAMES, Env, EnvConfig, config_from_mapping, load_config

__all__ = [
    "ClosedHandleError",
    "EnvSpec",
    "close",
    "make",
    "reset",
    "spec",
    "step",
]

__version__ = "0.1.0"


class ClosedHandleError(Exception):
    """Operation on a handle that is closed or was never created."""


@dataclass(frozen=True)
class EnvSpec:
    """Buffer contract of one handle: observation shapes/dtypes (as numpy
    little-endian dtype strings) and the action enumeration, where the
    index of a name is the integer to pass to :func:`step`."""

    observations: dict
    actions: tuple
    sample_rate: int
    tic_rate: int
    frameskip: int


_envs: dict[int, Env] = {}
_next_handle = itertools.count(1)


def make(config_path: str | None = None, **overrides) -> int:
    """Create an environment and return its handle.

    ``config_path`` is a ``key = value`` file; ``overrides`` are config
    fields (string or typed values) applied on top. Config problems raise
    with the native message.
    """
    cfg = load_config(config_path) if config_path is not None else EnvConfig()
    if overrides:
        cfg = config_from_mapping(overrides, base=cfg)
    env = Env(cfg)
    handle = next(_next_handle)
    _envs[handle] = env
    return handle


def _env(handle: int) -> Env:
    try:
        return _envs[handle]
    except KeyError:
        raise ClosedHandleError(
            f"handle {handle!r} is closed or was never created"
        ) from None


def _export(obs) -> dict:
    n = len(obs.audio.samples_left)
    audio = np.empty((2, n), dtype="<f4")
    audio[0] = obs.audio.samples_left
    audio[1] = obs.audio.samples_right
    return {
        "audio": audio,
        "image": np.ascontiguousarray(obs.image, dtype=np.uint8).copy(),
        "ray_dists": obs.ray_dists.astype("<f4"),
    }


def reset(handle: int, seed: int) -> dict:
    """Start an episode; returns the observation mapping."""
    return _export(_env(handle).reset(seed))


def step(handle: int, action: int):
    """Apply one action; returns (observation, reward, done, info).

    Reward is a float, done a bool, info a string-keyed mapping. Raises
    the native typed errors for invalid actions and step-after-done.
    """
    obs = _env(handle).step(action)
    return _export(obs), float(obs.reward), bool(obs.done), dict(obs.info)


def close(handle: int) -> None:
    """Release a handle. Every further use of it raises, including close."""
    if _envs.pop(handle, None) is None:
        raise ClosedHandleError(f"handle {handle!r} is closed or was never created")


def spec(handle: int) -> EnvSpec:
    env = _env(handle)
    cfg = env.config
    return EnvSpec(
        observations={
            "audio": ((2, env.stack_samples), "<f4"),
            "image": ((cfg.vis_height, cfg.vis_width), "|u1"),
            "ray_dists": ((cfg.vis_width,), "<f4"),
        },
        actions=ACTION_NAMES,
        sample_rate=cfg.sample_rate,
        tic_rate=cfg.tic_rate,
        frameskip=cfg.frameskip,
    )
