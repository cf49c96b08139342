"""Scenario simulation: four-room arena, pillar layout, agent kinematics,
reward/termination rules, and multimodal observation assembly.

Three scenarios share one map: six visually distinct pillars spread over
four connected rooms, layout and agent spawn randomized per episode.

* ``music``: every pillar loops its own melody, one pillar plays the
  designated target melody; touching it pays +1, touching any other pillar
  ends the episode with 0.
* ``instruction``: a non-spatialized cue naming the target pillar repeats
  with a fixed silence gap; touching the commanded pillar pays +1.
* ``instruction_once``: the cue plays exactly once at episode start.

Everything is a deterministic function of (config, seed, actions).
"""

from __future__ import annotations

import dataclasses
import math
import struct
import typing
from dataclasses import dataclass, field, replace
from enum import IntEnum
from hashlib import blake2b

import numpy as np

from . import _kernels
from .audio import (
    ListenerPose,
    MixState,
    RenderParams,
    SoundSource,
    SoundTrack,
    load_track_bank,
    pack_sources,
    render_packed,
    samples_per_step,
)
from .dsp import AudioBuffer
from .errors import ConfigError, EpisodeDoneError

SCENARIOS = ("music", "instruction", "instruction_once")
N_PILLARS = 6
TARGET_TRACK_ID = "target"
CUE_PREFIX = "cue_"


class Action(IntEnum):
    FORWARD = 0
    BACKWARD = 1
    TURN_LEFT = 2
    TURN_RIGHT = 3
    NOOP = 4


ACTION_NAMES = tuple(a.name.lower() for a in Action)


@dataclass(frozen=True, slots=True)
class EnvConfig:
    """Immutable scenario configuration.

    ``audio_stack_steps`` is measured in tics; 0 means "match frameskip".
    ``track_bank`` is a manifest path; empty selects the built-in bank.
    """

    scenario: str = "music"
    sample_rate: int = 22050
    tic_rate: int = 35
    frameskip: int = 4
    audio_stack_steps: int = 0
    vis_width: int = 128
    vis_height: int = 72
    episode_timeout_tics: int = 2100
    arena_width: float = 20.0
    arena_height: float = 20.0
    doorway_width: float = 2.0
    pillar_radius: float = 0.35
    pillar_wall_margin: float = 1.2
    pillar_doorway_clearance: float = 1.5
    pillar_min_separation: float = 3.0
    touch_radius: float = 0.6
    agent_radius: float = 0.2
    agent_speed: float = 2.5
    turn_step_deg: float = 10.0
    fov_deg: float = 90.0
    wall_scale: float = 1.0
    ray_max_dist: float = 50.0
    ref_distance: float = 1.0
    rolloff: float = 4.0
    max_distance: float = 12.0
    source_gain: float = 1.0
    instruction_gap_tics: int = 35
    track_bank: str = ""
    seed: int = 0

    @property
    def stack_tics(self) -> int:
        return self.audio_stack_steps if self.audio_stack_steps > 0 else self.frameskip

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; valid: {', '.join(SCENARIOS)}"
            )
        if self.frameskip < 1:
            raise ConfigError(f"frameskip must be >= 1, got {self.frameskip}")
        if self.audio_stack_steps and self.audio_stack_steps < self.frameskip:
            raise ConfigError(
                f"audio_stack_steps {self.audio_stack_steps} below frameskip {self.frameskip}"
            )
        if self.vis_width < 1 or self.vis_height < 1:
            raise ConfigError("vis_width and vis_height must be >= 1")
        if self.episode_timeout_tics < self.frameskip:
            raise ConfigError("episode_timeout_tics must cover at least one step")
        if min(self.arena_width, self.arena_height) < 8.0:
            raise ConfigError("arena must be at least 8 x 8 meters")
        if self.doorway_width <= 2 * self.agent_radius + 0.2:
            raise ConfigError("doorway_width too small for the agent to pass")
        if self.pillar_radius + self.agent_radius >= self.touch_radius:
            raise ConfigError(
                "touch_radius must exceed pillar_radius + agent_radius so a "
                "touch registers before the body collision stops the agent"
            )
        if self.pillar_min_separation <= 2 * self.touch_radius:
            raise ConfigError("pillar_min_separation must exceed twice touch_radius")
        RenderParams(self.sample_rate, self.tic_rate)  # checks divisibility
        samples_per_step(RenderParams(self.sample_rate, self.tic_rate), self.frameskip)

    def render_params(self) -> RenderParams:
        return RenderParams(self.sample_rate, self.tic_rate)


def _config_field_types() -> dict:
    hints = typing.get_type_hints(EnvConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(EnvConfig)}


def config_from_mapping(mapping: dict, base: EnvConfig | None = None) -> EnvConfig:
    """Build a config from string-or-typed key/value pairs."""
    types = _config_field_types()
    kwargs = {}
    for key, value in mapping.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        target = types[key]
        try:
            if isinstance(value, str) and target is not str:
                value = target(value)
            elif target is float and isinstance(value, int):
                value = float(value)
        except ValueError:
            raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from None
        kwargs[key] = value
    cfg = replace(base, **kwargs) if base is not None else EnvConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path, base: EnvConfig | None = None) -> EnvConfig:
    """Parse a UTF-8 ``key = value`` config file (# comments allowed)."""
    mapping = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in mapping:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            mapping[key] = value
    return config_from_mapping(mapping, base)


def save_config(config: EnvConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for fld in dataclasses.fields(EnvConfig):
            f.write(f"{fld.name} = {getattr(config, fld.name)}\n")


# ---------------------------------------------------------------------------
# Arena geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Doorway:
    x: float
    y: float
    rooms: tuple[int, int]
    axis: str  # "v" gap in the vertical wall, "h" gap in the horizontal wall


@dataclass(frozen=True)
class Arena:
    """Rectangular bounds split into four rooms by two gapped walls.

    Rooms index as 0 SW, 1 SE, 2 NW, 3 NE; every adjacent pair shares one
    doorway, so all rooms are mutually reachable.
    """

    width: float
    height: float
    walls: np.ndarray  # (n, 4) float64 segments x0,y0,x1,y1 (sorted ends)
    doorways: tuple[Doorway, ...]

    def room_of(self, x: float, y: float) -> int:
        col = 1 if x >= self.width / 2 else 0
        row = 1 if y >= self.height / 2 else 0
        return row * 2 + col

    def room_center(self, room: int) -> tuple[float, float]:
        cx = self.width * (0.25 + 0.5 * (room % 2))
        cy = self.height * (0.25 + 0.5 * (room // 2))
        return cx, cy

    def room_rect(self, room: int) -> tuple[float, float, float, float]:
        x0 = 0.0 if room % 2 == 0 else self.width / 2
        y0 = 0.0 if room // 2 == 0 else self.height / 2
        return x0, y0, x0 + self.width / 2, y0 + self.height / 2

    def doorway_between(self, a: int, b: int) -> Doorway | None:
        for d in self.doorways:
            if set(d.rooms) == {a, b}:
                return d
        return None


def build_arena(config: EnvConfig) -> Arena:
    w, h = config.arena_width, config.arena_height
    cx, cy = w / 2, h / 2
    g = config.doorway_width / 2
    segs = [
        (0, 0, w, 0),
        (0, h, w, h),
        (0, 0, 0, h),
        (w, 0, w, h),
        # vertical wall with gaps at y = h/4 and y = 3h/4
        (cx, 0, cx, h / 4 - g),
        (cx, h / 4 + g, cx, 3 * h / 4 - g),
        (cx, 3 * h / 4 + g, cx, h),
        # horizontal wall with gaps at x = w/4 and x = 3w/4
        (0, cy, w / 4 - g, cy),
        (w / 4 + g, cy, 3 * w / 4 - g, cy),
        (3 * w / 4 + g, cy, w, cy),
    ]
    walls = np.array(
        [
            (min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))
            for x0, y0, x1, y1 in segs
        ],
        dtype=np.float64,
    )
    doorways = (
        Doorway(cx, h / 4, (0, 1), "v"),
        Doorway(cx, 3 * h / 4, (2, 3), "v"),
        Doorway(w / 4, cy, (0, 2), "h"),
        Doorway(3 * w / 4, cy, (1, 3), "h"),
    )
    return Arena(w, h, walls, doorways)


def _point_clear(x, y, walls, circles, radius) -> bool:
    qx = np.clip(x, walls[:, 0], walls[:, 2])
    qy = np.clip(y, walls[:, 1], walls[:, 3])
    if np.any((x - qx) ** 2 + (y - qy) ** 2 < radius * radius):
        return False
    if len(circles):
        rr = radius + circles[:, 2]
        if np.any((x - circles[:, 0]) ** 2 + (y - circles[:, 1]) ** 2 < rr * rr):
            return False
    return True


# ---------------------------------------------------------------------------
# Episode state and observations
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class Pillar:
    x: float
    y: float
    visual_id: int  # 1..6, id 0 is wall/empty
    track_id: str
    is_target: bool


@dataclass(slots=True)
class EnvState:
    agent: ListenerPose
    pillars: list[Pillar]
    sources: list[SoundSource]
    target_index: int
    tic: int
    done: bool
    rng: np.random.Generator


@dataclass(slots=True)
class Observation:
    """One multimodal step result.

    ``audio`` always spans exactly stack_tics * samples_per_tic samples.
    ``ray_ids``/``ray_dists`` are per-column nearest hits; ``image`` is the
    expanded id picture. ``info`` carries the simulation clock, the
    privileged target id, the agent pose, and the touched pillar id.
    """

    audio: AudioBuffer
    ray_ids: np.ndarray
    ray_dists: np.ndarray
    image: np.ndarray
    reward: float
    done: bool
    info: dict


def observation_digest(obs: Observation) -> bytes:
    """16-byte digest of the canonical wire encoding of an observation."""
    h = blake2b(digest_size=16)
    h.update(np.ascontiguousarray(obs.audio.samples_left, dtype="<f4").tobytes())
    h.update(np.ascontiguousarray(obs.audio.samples_right, dtype="<f4").tobytes())
    h.update(obs.ray_ids.tobytes())
    h.update(np.ascontiguousarray(obs.ray_dists, dtype="<f4").tobytes())
    h.update(obs.image.tobytes())
    h.update(struct.pack("<dBq", obs.reward, obs.done, obs.info["tic"]))
    return h.digest()


class Env:
    """One scenario instance. Strictly single-threaded; run many in parallel
    by creating independently seeded instances."""

    def __init__(self, config: EnvConfig, bank=None, kernels=None, sound_enabled=True):
        config.validate()
        self.config = config
        self.params = config.render_params()
        self.arena = build_arena(config)
        self.kernels = kernels if kernels is not None else _kernels.get_backend()
        self.bank = (
            bank
            if bank is not None
            else load_track_bank(config.track_bank or None, config.sample_rate)
        )
        self.sound_enabled = sound_enabled
        self.state: EnvState | None = None
        self._mix_state: MixState | None = None
        self.saturation_count = 0

        spt = self.params.samples_per_tic
        self.step_samples = spt * config.frameskip
        self.stack_samples = spt * config.stack_tics
        self._mix = (np.zeros(self.step_samples), np.zeros(self.step_samples))
        self._ring = (
            (np.zeros(self.stack_samples), np.zeros(self.stack_samples))
            if self.stack_samples > self.step_samples
            else None
        )
        half_fov = math.radians(config.fov_deg) / 2
        self._ray_offsets = np.linspace(half_fov, -half_fov, config.vis_width)
        self._walls = self.arena.walls
        self._circles = np.zeros((N_PILLARS, 3))
        self._circle_ids = np.zeros(N_PILLARS, dtype=np.uint8)
        self._step_len = config.agent_speed / config.tic_rate
        self._turn_rad = math.radians(config.turn_step_deg)

    # -- episode lifecycle ---------------------------------------------------

    def reset(self, seed: int) -> Observation:
        """Start a new episode, a pure function of (config, seed).

        Renders the first frameskip tics of audio at the spawn pose so the
        initial observation already carries sound (instruction cues start
        at tic 0).
        """
        cfg = self.config
        rng = np.random.default_rng(seed)
        pillar_xy = self._sample_pillars(rng)
        target_index = int(rng.integers(N_PILLARS))
        pillars = [
            Pillar(x, y, i + 1, "", i == target_index)
            for i, (x, y) in enumerate(pillar_xy)
        ]
        self._assign_tracks(pillars, target_index, rng)
        sources = self._wire_sources(pillars, target_index)

        for i, p in enumerate(pillars):
            self._circles[i, 0] = p.x
            self._circles[i, 1] = p.y
            self._circles[i, 2] = cfg.pillar_radius
            self._circle_ids[i] = p.visual_id

        ax, ay = self._sample_spawn(rng)
        heading = float(rng.uniform(-math.pi, math.pi))
        agent = ListenerPose(ax, ay, heading)

        self.state = EnvState(agent, pillars, sources, target_index, 0, False, rng)
        self._mix_state = pack_sources(sources)
        if self._ring is not None:
            self._ring[0][:] = 0.0
            self._ring[1][:] = 0.0
        audio = self._render_audio()
        return self._observe(audio, 0.0, False, touched_id=0)

    def step(self, action) -> Observation:
        """Apply one action for frameskip tics, then render and observe."""
        st = self.state
        if st is None:
            raise EpisodeDoneError("reset() must be called before step()")
        if st.done:
            raise EpisodeDoneError("step() called on a finished episode")
        action = int(action)
        if not 0 <= action <= 4:
            raise ValueError(f"invalid action {action}; expected 0..4")

        cfg = self.config
        x, y, heading = self.kernels.move_agent(
            st.agent.x,
            st.agent.y,
            st.agent.heading,
            action,
            cfg.frameskip,
            self._step_len,
            self._turn_rad,
            self._walls,
            self._circles,
            cfg.agent_radius,
        )
        st.agent.x = x
        st.agent.y = y
        st.agent.heading = heading
        st.tic += cfg.frameskip

        reward = 0.0
        touched_id = 0
        dists = [math.hypot(p.x - x, p.y - y) for p in st.pillars]
        nearest = min(range(N_PILLARS), key=dists.__getitem__)
        if dists[nearest] <= cfg.touch_radius:
            touched_id = st.pillars[nearest].visual_id
            reward = 1.0 if nearest == st.target_index else 0.0
            st.done = True
        elif st.tic >= cfg.episode_timeout_tics:
            st.done = True

        audio = self._render_audio()
        return self._observe(audio, reward, st.done, touched_id)

    # -- internals -----------------------------------------------------------

    def _sample_pillars(self, rng) -> list[tuple[float, float]]:
        cfg = self.config
        arena = self.arena
        margin = cfg.pillar_wall_margin
        for _ in range(50):
            rooms = list(range(4)) + list(rng.choice(4, size=N_PILLARS - 4, replace=False))
            rng.shuffle(rooms)
            positions: list[tuple[float, float]] = []
            ok = True
            for room in rooms:
                x0, y0, x1, y1 = arena.room_rect(room)
                placed = False
                for _ in range(500):
                    x = float(rng.uniform(x0 + margin, x1 - margin))
                    y = float(rng.uniform(y0 + margin, y1 - margin))
                    if any(
                        math.hypot(x - px, y - py) < cfg.pillar_min_separation
                        for px, py in positions
                    ):
                        continue
                    if any(
                        math.hypot(x - d.x, y - d.y) < cfg.pillar_doorway_clearance
                        for d in arena.doorways
                    ):
                        continue
                    positions.append((x, y))
                    placed = True
                    break
                if not placed:
                    ok = False
                    break
            if ok:
                return positions
        raise ConfigError(
            "could not place pillars: arena too small for the separation and "
            "margin constraints"
        )

    def _sample_spawn(self, rng) -> tuple[float, float]:
        cfg = self.config
        clearance = max(cfg.touch_radius + 0.4, 1.0)
        body = cfg.agent_radius + 0.05
        for _ in range(1000):
            x = float(rng.uniform(body, cfg.arena_width - body))
            y = float(rng.uniform(body, cfg.arena_height - body))
            if not _point_clear(x, y, self._walls, self._circles, cfg.agent_radius + 0.1):
                continue
            if any(
                math.hypot(x - p[0], y - p[1]) < clearance
                for p in self._circles[:, :2]
            ):
                continue
            return x, y
        raise ConfigError("could not place the agent spawn")

    def _assign_tracks(self, pillars, target_index, rng) -> None:
        if self.config.scenario != "music":
            return
        music_ids = sorted(
            tid
            for tid in self.bank
            if tid != TARGET_TRACK_ID and not tid.startswith(CUE_PREFIX)
        )
        if TARGET_TRACK_ID not in self.bank or len(music_ids) < N_PILLARS:
            raise ConfigError(
                f"music scenario needs a {TARGET_TRACK_ID!r} track plus at least "
                f"{N_PILLARS} others; bank has {len(music_ids)} and "
                f"{'a' if TARGET_TRACK_ID in self.bank else 'no'} target"
            )
        perm = rng.permutation(len(music_ids))
        for i, p in enumerate(pillars):
            p.track_id = music_ids[int(perm[i])]
        pillars[target_index].track_id = TARGET_TRACK_ID

    def _wire_sources(self, pillars, target_index) -> list[SoundSource]:
        cfg = self.config
        if cfg.scenario == "music":
            return [
                SoundSource(
                    track=replace(self.bank[p.track_id], loop=True),
                    position=(p.x, p.y),
                    gain=cfg.source_gain,
                    ref_distance=cfg.ref_distance,
                    rolloff=cfg.rolloff,
                    max_distance=cfg.max_distance,
                    spatialized=True,
                )
                for p in pillars
            ]
        # Instruction scenarios: a single in-head cue, no pillar audio.
        cue_id = f"{CUE_PREFIX}{pillars[target_index].visual_id}"
        if cue_id not in self.bank:
            raise ConfigError(f"cue bank is missing {cue_id!r}")
        cue = self.bank[cue_id]
        if cfg.scenario == "instruction_once":
            track = replace(cue, loop=False)
        else:
            gap = np.zeros(cfg.instruction_gap_tics * self.params.samples_per_tic)
            track = SoundTrack(
                f"{cue_id}+gap", np.concatenate([cue.samples, gap]), loop=True
            )
        return [
            SoundSource(
                track=track,
                position=(0.0, 0.0),
                gain=cfg.source_gain,
                spatialized=False,
            )
        ]

    def _render_audio(self) -> AudioBuffer:
        st = self.state
        rate = self.config.sample_rate
        if not self.sound_enabled:
            return AudioBuffer.silence(self.stack_samples, rate)
        ms = self._mix_state
        if self._ring is None:
            out_l = np.empty(self.step_samples)
            out_r = np.empty(self.step_samples)
            self.saturation_count += render_packed(
                ms, st.agent, self.kernels, out_l, out_r
            )
            return AudioBuffer(out_l, out_r, rate)
        self.saturation_count += render_packed(
            ms, st.agent, self.kernels, self._mix[0], self._mix[1]
        )
        n = self.step_samples
        for ring, fresh in zip(self._ring, self._mix):
            ring[:-n] = ring[n:]
            ring[-n:] = fresh
        return AudioBuffer(self._ring[0].copy(), self._ring[1].copy(), rate)

    def sync_sources(self) -> list[SoundSource]:
        """Copy kernel-side playhead/active state back onto the source
        objects and return them. Rendering runs on packed arrays, so the
        objects go stale between calls; sync before inspecting them."""
        ms = self._mix_state
        for i, src in enumerate(self.state.sources):
            src.playhead = int(ms.playheads[i])
            src.active = bool(ms.active[i])
        return self.state.sources

    def _observe(self, audio, reward, done, touched_id) -> Observation:
        st = self.state
        cfg = self.config
        angles = st.agent.heading + self._ray_offsets
        dir_x = np.cos(angles)
        dir_y = np.sin(angles)
        ray_ids, ray_dists = self.kernels.raycast(
            st.agent.x,
            st.agent.y,
            dir_x,
            dir_y,
            self._walls,
            self._circles,
            self._circle_ids,
            cfg.ray_max_dist,
        )
        image = np.empty((cfg.vis_height, cfg.vis_width), dtype=np.uint8)
        self.kernels.paint_image(ray_ids, ray_dists, cfg.vis_height, cfg.wall_scale, image)
        info = {
            "tic": st.tic,
            "target_id": st.pillars[st.target_index].visual_id,
            "touched_id": touched_id,
            "agent_x": st.agent.x,
            "agent_y": st.agent.y,
            "agent_heading": st.agent.heading,
        }
        return Observation(audio, ray_ids, ray_dists, image, reward, done, info)


# ---------------------------------------------------------------------------
# Policies and rollouts
# ---------------------------------------------------------------------------


class NoopPolicy:
    def reset(self, seed: int) -> None:
        pass

    def __call__(self, obs, env) -> int:
        return int(Action.NOOP)


class RandomPolicy:
    """Uniform actions from a per-episode generator, so trajectories are a
    function of the episode seed alone."""

    def __init__(self, seed: int = 0):
        self._rng = np.random.default_rng(seed)

    def reset(self, seed: int) -> None:
        self._rng = np.random.default_rng(np.random.SeedSequence((seed, 0xA11)))

    def __call__(self, obs, env) -> int:
        return int(self._rng.integers(len(Action)))


class OraclePolicy:
    """Privileged waypoint controller: reads the target identity and poses
    from the environment state, routes between rooms through doorway
    waypoints, and steers around non-target pillars."""

    DOOR_PUSH = 0.9
    AVOID_RADIUS = 1.6

    def __init__(self):
        self._prev_pos = None
        self._last_action = int(Action.NOOP)
        self._escape = 0

    def reset(self, seed: int) -> None:
        self.__init__()

    def __call__(self, obs, env) -> int:
        st = env.state
        cfg = env.config
        arena = env.arena
        x, y, heading = st.agent.x, st.agent.y, st.agent.heading
        target = st.pillars[st.target_index]

        # Blocked forward progress: spin out of the corner deterministically.
        if self._last_action == int(Action.FORWARD) and self._prev_pos is not None:
            if math.hypot(x - self._prev_pos[0], y - self._prev_pos[1]) < 1e-3:
                self._escape = 2
        self._prev_pos = (x, y)
        if self._escape > 0:
            self._escape -= 1
            self._last_action = int(Action.TURN_LEFT)
            return self._last_action

        gx, gy = self._goal_point(arena, x, y, target)
        vx, vy = gx - x, gy - y
        norm = math.hypot(vx, vy)
        if norm > 1e-9:
            vx /= norm
            vy /= norm
        for i, p in enumerate(st.pillars):
            if i == st.target_index:
                continue
            d = math.hypot(p.x - x, p.y - y)
            if d < self.AVOID_RADIUS:
                w = (self.AVOID_RADIUS - d) * 2.0 / max(d, 1e-6)
                vx += (x - p.x) / max(d, 1e-6) * w * self.AVOID_RADIUS
                vy += (y - p.y) / max(d, 1e-6) * w * self.AVOID_RADIUS

        bearing = math.atan2(vy, vx)
        err = self._wrap(bearing - heading)
        tol = math.radians(0.5 * cfg.turn_step_deg * cfg.frameskip + 2.0)
        if abs(err) > tol:
            a = Action.TURN_LEFT if err > 0 else Action.TURN_RIGHT
        else:
            a = Action.FORWARD
        self._last_action = int(a)
        return self._last_action

    @staticmethod
    def _wrap(h: float) -> float:
        return h - 2 * math.pi * math.floor((h + math.pi) / (2 * math.pi))

    def _goal_point(self, arena: Arena, x, y, target) -> tuple[float, float]:
        room = arena.room_of(x, y)
        troom = arena.room_of(target.x, target.y)
        if room == troom:
            return target.x, target.y
        nxt = _room_next_hop(room, troom)
        door = arena.doorway_between(room, nxt)
        ncx, ncy = arena.room_center(nxt)
        if door.axis == "v":
            return door.x + math.copysign(self.DOOR_PUSH, ncx - door.x), door.y
        return door.x, door.y + math.copysign(self.DOOR_PUSH, ncy - door.y)


_ROOM_EDGES = ((0, 1), (2, 3), (0, 2), (1, 3))


def _room_next_hop(src: int, dst: int) -> int:
    # BFS over the four-room graph, neighbors in ascending order.
    adjacency = {r: [] for r in range(4)}
    for a, b in _ROOM_EDGES:
        adjacency[a].append(b)
        adjacency[b].append(a)
    prev = {src: src}
    queue = [src]
    while queue:
        cur = queue.pop(0)
        for nb in sorted(adjacency[cur]):
            if nb not in prev:
                prev[nb] = cur
                queue.append(nb)
    node = dst
    while prev[node] != src:
        node = prev[node]
    return node


_POLICIES = {
    "noop": NoopPolicy,
    "random": RandomPolicy,
    "oracle": OraclePolicy,
}


def make_policy(name: str):
    try:
        return _POLICIES[name]()
    except KeyError:
        raise ConfigError(
            f"unknown policy {name!r}; valid: {', '.join(sorted(_POLICIES))}"
        ) from None


@dataclass(slots=True)
class EpisodeResult:
    seed: int
    return_: float
    steps: int
    tics: int
    touched_id: int


def episode_rollout(config, seed, policy, env=None, on_obs=None) -> EpisodeResult:
    """Run reset + steps until done (timeout included; timeout returns 0).

    ``on_obs(step_index, action, obs)`` is called for every observation;
    the reset observation has step_index 0 and action None.
    """
    if env is None:
        env = Env(config)
    if isinstance(policy, str):
        policy = make_policy(policy)
    obs = env.reset(seed)
    if hasattr(policy, "reset"):
        policy.reset(seed)
    if on_obs is not None:
        on_obs(0, None, obs)
    total = 0.0
    steps = 0
    touched = 0
    while not obs.done:
        action = policy(obs, env)
        obs = env.step(action)
        steps += 1
        total += obs.reward
        if on_obs is not None:
            on_obs(steps, action, obs)
        if obs.info["touched_id"]:
            touched = obs.info["touched_id"]
    return EpisodeResult(seed, total, steps, env.state.tic, touched)


def format_trace_row(step: int, action: int, obs: Observation) -> str:
    """One trace CSV line: tic,action,reward,done,x,y,heading.

    Floats use shortest round-trip formatting so byte equality is
    well-defined for bit-equal trajectories.
    """
    info = obs.info
    return (
        f"{info['tic']},{ACTION_NAMES[action]},{obs.reward!r},{int(obs.done)},"
        f"{info['agent_x']!r},{info['agent_y']!r},{info['agent_heading']!r}"
    )


TRACE_HEADER = "tic,action,reward,done,x,y,heading"
