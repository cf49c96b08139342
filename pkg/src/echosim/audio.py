"""Lock-step software audio rendering.

Positional sources are mixed into a stereo block per simulation step with
distance attenuation and bearing panning. Rendering is decoupled from any
audio device or wall clock: a render call is a pure function of the source
states, so simulation can run as fast as the CPU allows. Also houses WAV
i/o, the melody synthesizer, and track bank loading.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dsp import AudioBuffer
from .errors import ConfigError, WavParseError

DEFAULT_SAMPLE_RATE = 22050
DEFAULT_TIC_RATE = 35


@dataclass(slots=True)
class SoundTrack:
    """Mono sample data at engine rate, identified by a stable id."""

    id: str
    samples: np.ndarray  # float64 in [-1, 1], non-empty
    loop: bool = False

    def validate(self) -> None:
        if len(self.samples) == 0:
            raise ConfigError(f"track {self.id!r} is empty")
        if self.samples.min() < -1.0 or self.samples.max() > 1.0:
            raise ConfigError(f"track {self.id!r} exceeds [-1, 1]")


@dataclass(slots=True)
class SoundSource:
    """One emitter: a track bound to a world position and playback state."""

    track: SoundTrack
    position: tuple[float, float]
    gain: float = 1.0
    ref_distance: float = 1.0
    rolloff: float = 4.0
    max_distance: float = 12.0
    playhead: int = 0
    active: bool = True
    spatialized: bool = True

    def validate(self) -> None:
        if self.ref_distance <= 0 or self.max_distance <= 0:
            raise ConfigError("ref_distance and max_distance must be positive")
        if self.ref_distance > self.max_distance:
            raise ConfigError("ref_distance must not exceed max_distance")
        if self.gain < 0 or self.rolloff < 0:
            raise ConfigError("gain and rolloff must be non-negative")


@dataclass(slots=True)
class ListenerPose:
    """Agent ear frame: position plus heading in [-pi, pi)."""

    x: float
    y: float
    heading: float


@dataclass(frozen=True, slots=True)
class RenderParams:
    sample_rate: int = DEFAULT_SAMPLE_RATE
    tic_rate: int = DEFAULT_TIC_RATE

    def __post_init__(self):
        if self.sample_rate <= 0 or self.tic_rate <= 0:
            raise ConfigError("sample_rate and tic_rate must be positive")
        if self.sample_rate % self.tic_rate != 0:
            raise ConfigError(
                f"sample_rate {self.sample_rate} not divisible by tic rate {self.tic_rate}"
            )

    @property
    def samples_per_tic(self) -> int:
        return self.sample_rate // self.tic_rate


def samples_per_step(params: RenderParams, frameskip: int) -> int:
    """Samples covering ``frameskip`` tics of simulated time."""
    if frameskip < 1:
        raise ConfigError(f"frameskip must be >= 1, got {frameskip}")
    return params.samples_per_tic * frameskip


def attenuation_gain(source: SoundSource, distance: float) -> float:
    """Inverse-distance-clamped gain; exactly 0 beyond max_distance."""
    if distance > source.max_distance:
        return 0.0
    d = distance
    if d < source.ref_distance:
        d = source.ref_distance
    return source.ref_distance / (
        source.ref_distance + source.rolloff * (d - source.ref_distance)
    )


def pan_gains(listener: ListenerPose, source_pos: tuple[float, float]):
    """Stereo gains from source bearing; positive bearing is the agent's left.

    g_left = (1 + sin b)/2, g_right = (1 - sin b)/2, so the pair sums to 1.
    A source at the listener position pans center.
    """
    dx = source_pos[0] - listener.x
    dy = source_pos[1] - listener.y
    if dx == 0.0 and dy == 0.0:
        return 0.5, 0.5
    bearing = math.atan2(dy, dx) - listener.heading
    s = math.sin(bearing)
    return (1.0 + s) * 0.5, (1.0 - s) * 0.5


def render_step(
    sources,
    listener: ListenerPose,
    params: RenderParams,
    n_samples: int,
    kernels=None,
    out: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[AudioBuffer, int]:
    """Mix all active sources into one stereo block of ``n_samples``.

    Attenuation and panning are evaluated once at call start and held for
    the whole block. Playheads advance by ``n_samples`` (sources mutate):
    looping tracks wrap, finite ones deactivate at the end; inaudible
    sources still advance so time never pauses. The mix is hard-clamped
    into [-1, 1]; returns the buffer and the clamped-sample count.

    When ``out`` arrays are supplied the returned buffer views them.
    """
    k = kernels if kernels is not None else _kernels.get_backend()
    if out is None:
        out_l = np.zeros(n_samples)
        out_r = np.zeros(n_samples)
    else:
        out_l, out_r = out
        out_l[:] = 0.0
        out_r[:] = 0.0

    for src in sources:
        if not src.active:
            continue
        if src.spatialized:
            # sqrt of the explicit sum, not hypot: both kernel backends must
            # reproduce this distance bit-for-bit, and libm sqrt is the only
            # variant that is correctly rounded everywhere.
            dx = src.position[0] - listener.x
            dy = src.position[1] - listener.y
            dist = math.sqrt(dx * dx + dy * dy)
            att = attenuation_gain(src, dist)
            p_l, p_r = pan_gains(listener, src.position)
        else:
            att = 1.0
            p_l = p_r = 0.5
        g = src.gain * att
        track = src.track.samples
        if g == 0.0:
            # Inaudible but still playing: advance time without mixing.
            if src.track.loop:
                src.playhead = (src.playhead + n_samples) % len(track)
            else:
                src.playhead = min(src.playhead + n_samples, len(track))
                src.active = src.playhead < len(track)
            continue
        ph, active = k.mix_into(
            out_l, out_r, track, src.playhead, g * p_l, g * p_r, src.track.loop
        )
        src.playhead = int(ph)
        src.active = bool(active)

    clamped = int(k.clamp_stereo(out_l, out_r))
    return AudioBuffer(out_l, out_r, params.sample_rate), clamped


@dataclass(slots=True)
class MixState:
    """Struct-of-arrays snapshot of a source list for the fused render kernel.

    Track samples are concatenated into one buffer with per-source offsets;
    ``playheads`` and ``active`` are the mutable runtime state. The fused
    path computes exactly what :func:`render_step` computes, one call per
    block instead of one call per source.
    """

    data: np.ndarray  # float64, all tracks back to back
    offsets: np.ndarray  # int64 (n+1,)
    loops: np.ndarray  # uint8
    pos: np.ndarray  # float64 (n, 2)
    gains: np.ndarray
    refs: np.ndarray
    rolloffs: np.ndarray
    maxds: np.ndarray
    spatial: np.ndarray  # uint8
    playheads: np.ndarray  # int64, mutated by renders
    active: np.ndarray  # uint8, mutated by renders


def pack_sources(sources) -> MixState:
    n = len(sources)
    offsets = np.zeros(n + 1, dtype=np.int64)
    for i, s in enumerate(sources):
        s.validate()
        offsets[i + 1] = offsets[i] + len(s.track.samples)
    data = (
        np.concatenate([s.track.samples for s in sources])
        if n
        else np.zeros(0, dtype=np.float64)
    )
    return MixState(
        data=np.ascontiguousarray(data, dtype=np.float64),
        offsets=offsets,
        loops=np.array([s.track.loop for s in sources], dtype=np.uint8),
        pos=np.array([s.position for s in sources], dtype=np.float64).reshape(n, 2),
        gains=np.array([s.gain for s in sources], dtype=np.float64),
        refs=np.array([s.ref_distance for s in sources], dtype=np.float64),
        rolloffs=np.array([s.rolloff for s in sources], dtype=np.float64),
        maxds=np.array([s.max_distance for s in sources], dtype=np.float64),
        spatial=np.array([s.spatialized for s in sources], dtype=np.uint8),
        playheads=np.array([s.playhead for s in sources], dtype=np.int64),
        active=np.array([s.active for s in sources], dtype=np.uint8),
    )


def render_packed(state: MixState, listener: ListenerPose, kernels, out_l, out_r) -> int:
    """Fused equivalent of :func:`render_step` over a packed source list.

    Overwrites ``out_l``/``out_r``, advances ``state`` playheads, and
    returns the clamped-sample count. Bit-identical to the per-source path.
    """
    return int(
        kernels.render_sources(
            state.data,
            state.offsets,
            state.loops,
            state.pos,
            state.gains,
            state.refs,
            state.rolloffs,
            state.maxds,
            state.spatial,
            state.playheads,
            state.active,
            listener.x,
            listener.y,
            listener.heading,
            out_l,
            out_r,
        )
    )


# ---------------------------------------------------------------------------
# WAV i/o (RIFF containers, PCM16 or IEEE float32)
# ---------------------------------------------------------------------------


def _walk_chunks(data: bytes):
    if len(data) < 12:
        raise WavParseError("RIFF: file too short for a RIFF header")
    if data[0:4] != b"RIFF":
        raise WavParseError(f"RIFF: bad container magic {data[0:4]!r}")
    if data[8:12] != b"WAVE":
        raise WavParseError(f"WAVE: bad form type {data[8:12]!r}")
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = data[pos + 8 : pos + 8 + size]
        if len(body) != size:
            raise WavParseError(f"{cid.decode('ascii', 'replace')}: chunk truncated")
        yield cid, body
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def load_wav_stereo(data: bytes, resample_to: int | None = None) -> AudioBuffer:
    """Decode WAV bytes into a stereo buffer (mono is duplicated).

    Accepts PCM16 and IEEE float32, any channel count >= 1 (extra channels
    beyond the first two are ignored). Amplitudes are normalized to [-1, 1]
    with the PCM16 convention -32768 -> -1.0. Optionally resamples with
    linear interpolation.
    """
    fmt = None
    payload = None
    for cid, body in _walk_chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise WavParseError("fmt : chunk shorter than 16 bytes")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            payload = body
    if fmt is None:
        raise WavParseError("fmt : chunk missing")
    if payload is None:
        raise WavParseError("data: chunk missing")

    audio_format, channels, rate, _, _, bits = fmt
    if channels < 1:
        raise WavParseError(f"fmt : invalid channel count {channels}")
    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(payload, dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        raw = np.frombuffer(payload, dtype="<f4")
        samples = np.clip(raw.astype(np.float64), -1.0, 1.0)
    else:
        raise WavParseError(
            f"fmt : unsupported codec (format {audio_format}, {bits}-bit); "
            "expected PCM16 or IEEE float32"
        )

    n_frames = len(samples) // channels
    samples = samples[: n_frames * channels].reshape(n_frames, channels)
    left = samples[:, 0].copy()
    right = samples[:, 1].copy() if channels >= 2 else left.copy()
    if resample_to is not None and resample_to != rate:
        left = resample_linear(left, rate, resample_to)
        right = resample_linear(right, rate, resample_to)
        rate = resample_to
    return AudioBuffer(left, right, int(rate))


def load_wav(data: bytes, track_id: str, engine_rate: int, loop: bool = False) -> SoundTrack:
    """Decode WAV bytes into a mono engine-rate track.

    Stereo files are downmixed by channel average, then resampled to the
    engine rate when needed.
    """
    buf = load_wav_stereo(data)
    mono = 0.5 * (buf.samples_left + buf.samples_right)
    if buf.sample_rate != engine_rate:
        mono = resample_linear(mono, buf.sample_rate, engine_rate)
    track = SoundTrack(track_id, mono, loop)
    track.validate()
    return track


def save_wav(buf: AudioBuffer, path) -> None:
    """Write a stereo IEEE float32 WAV file."""
    n = len(buf)
    interleaved = np.empty(2 * n, dtype="<f4")
    interleaved[0::2] = buf.samples_left
    interleaved[1::2] = buf.samples_right
    payload = interleaved.tobytes()
    fmt = struct.pack("<HHIIHH", 3, 2, buf.sample_rate, buf.sample_rate * 8, 8, 32)
    fact = struct.pack("<I", n)
    size = 4 + (8 + len(fmt)) + (8 + len(fact)) + (8 + len(payload))
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", size) + b"WAVE")
        f.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
        f.write(b"fact" + struct.pack("<I", len(fact)) + fact)
        f.write(b"data" + struct.pack("<I", len(payload)) + payload)


def resample_linear(x: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Linear-interpolation resampler; output length rounds n*out/in."""
    if rate_in == rate_out:
        return x.copy()
    n_in = len(x)
    n_out = round(n_in * rate_out / rate_in)
    if n_in == 0 or n_out == 0:
        return np.zeros(0)
    positions = np.arange(n_out) * (rate_in / rate_out)
    return np.interp(positions, np.arange(n_in), x)


# ---------------------------------------------------------------------------
# Melody synthesizer and track banks
# ---------------------------------------------------------------------------

_WAVEFORMS = ("sine", "square", "triangle", "saw")
# Major pentatonic steps; note sequences are drawn from these.
_NOTE_RATIOS = (1.0, 9.0 / 8.0, 5.0 / 4.0, 3.0 / 2.0, 5.0 / 3.0)
_EDGE_RAMP_S = 0.005


def synth_track(
    waveform: str,
    base_freq: float,
    pattern_seed: int,
    duration: float,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    track_id: str | None = None,
    loop: bool = False,
    amplitude: float = 0.8,
    notes_per_second: float = 4.0,
) -> SoundTrack:
    """Deterministic seeded melody: piecewise tonal segments.

    The note sequence is a pure function of ``pattern_seed``, so the same
    spec always yields a bit-identical track, and distinct seeds give
    weakly correlated tracks.
    """
    if waveform not in _WAVEFORMS:
        raise ConfigError(f"unknown waveform {waveform!r}; expected one of {_WAVEFORMS}")
    if not (0 < base_freq < sample_rate / 2):
        raise ConfigError(f"base_freq {base_freq} outside (0, sample_rate/2)")
    if duration <= 0:
        raise ConfigError(f"duration must be positive, got {duration}")

    n = round(duration * sample_rate)
    n_notes = max(1, round(duration * notes_per_second))
    rng = np.random.default_rng(pattern_seed)
    degrees = rng.integers(0, len(_NOTE_RATIOS), size=n_notes)
    bounds = np.round(np.linspace(0, n, n_notes + 1)).astype(np.int64)

    freq = np.empty(n)
    envelope = np.ones(n)
    ramp = max(1, round(_EDGE_RAMP_S * sample_rate))
    for i in range(n_notes):
        a, b = bounds[i], bounds[i + 1]
        freq[a:b] = base_freq * _NOTE_RATIOS[degrees[i]]
        seg = b - a
        r = min(ramp, seg // 2)
        if r > 0:
            fade = np.linspace(0.0, 1.0, r, endpoint=False)
            envelope[a : a + r] = np.minimum(envelope[a : a + r], fade)
            envelope[b - r : b] = np.minimum(envelope[b - r : b], fade[::-1])

    phase = np.cumsum(2.0 * np.pi * freq / sample_rate)
    if waveform == "sine":
        wave = np.sin(phase)
    elif waveform == "square":
        wave = np.sign(np.sin(phase))
    elif waveform == "triangle":
        wave = 2.0 / np.pi * np.arcsin(np.sin(phase))
    else:  # saw
        wave = 2.0 * ((phase / (2.0 * np.pi)) % 1.0) - 1.0

    track = SoundTrack(track_id or f"synth_{waveform}_{pattern_seed}", amplitude * envelope * wave, loop)
    track.validate()
    return track


# Built-in bank: six looping melodies, one distinct target melody, and one
# short cue "word" per pillar visual id.
_DEFAULT_BANK_SPECS = {
    "track_0": ("sine", 196.0, 11, 3.0, True),
    "track_1": ("square", 220.0, 12, 3.0, True),
    "track_2": ("sine", 247.0, 13, 3.0, True),
    "track_3": ("triangle", 262.0, 14, 3.0, True),
    "track_4": ("sine", 294.0, 15, 3.0, True),
    "track_5": ("saw", 330.0, 16, 3.0, True),
    "target": ("square", 523.0, 77, 3.0, True),
    "cue_1": ("sine", 330.0, 201, 0.6, False),
    "cue_2": ("sine", 392.0, 202, 0.6, False),
    "cue_3": ("sine", 454.0, 203, 0.6, False),
    "cue_4": ("sine", 516.0, 204, 0.6, False),
    "cue_5": ("sine", 578.0, 205, 0.6, False),
    "cue_6": ("sine", 640.0, 206, 0.6, False),
}

_BANK_CACHE: dict = {}


def default_track_bank(sample_rate: int = DEFAULT_SAMPLE_RATE) -> dict[str, SoundTrack]:
    """The built-in synthesized bank (cached per sample rate)."""
    key = (None, sample_rate)
    if key not in _BANK_CACHE:
        bank = {}
        for tid, (waveform, freq, seed, dur, loop) in _DEFAULT_BANK_SPECS.items():
            bank[tid] = synth_track(waveform, freq, seed, dur, sample_rate, tid, loop)
        _BANK_CACHE[key] = bank
    return _BANK_CACHE[key]


def _parse_synth_spec(tid: str, spec: str, sample_rate: int) -> SoundTrack:
    params = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"track {tid!r}: bad synth parameter {part!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        params[k] = v
    waveform = params.pop("waveform", "sine")
    loop = params.pop("loop", "false").lower() in ("1", "true", "yes")
    try:
        base_freq = float(params.pop("base_freq"))
        seed = int(params.pop("seed"))
        duration = float(params.pop("duration"))
    except KeyError as e:
        raise ConfigError(f"track {tid!r}: missing synth parameter {e.args[0]}") from None
    if params:
        raise ConfigError(f"track {tid!r}: unknown synth parameters {sorted(params)}")
    return synth_track(waveform, base_freq, seed, duration, sample_rate, tid, loop)


def load_track_bank(path, sample_rate: int = DEFAULT_SAMPLE_RATE) -> dict[str, SoundTrack]:
    """Load a track bank manifest, or the built-in bank when path is None.

    Manifest lines are ``id = wav:relative/path.wav`` or
    ``id = synth:base_freq=440,seed=3,duration=2.0[,waveform=sine][,loop=true]``.
    Blank lines and ``#`` comments are ignored. Banks are cached.
    """
    if path is None:
        return default_track_bank(sample_rate)
    path = os.path.abspath(os.fspath(path))
    key = (path, sample_rate)
    if key in _BANK_CACHE:
        return _BANK_CACHE[key]

    bank: dict[str, SoundTrack] = {}
    base_dir = os.path.dirname(path)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'id = spec'")
            tid, spec = (s.strip() for s in line.split("=", 1))
            if not tid:
                raise ConfigError(f"{path}:{lineno}: empty track id")
            if tid in bank:
                raise ConfigError(f"{path}:{lineno}: duplicate track id {tid!r}")
            if spec.startswith("wav:"):
                wav_path = os.path.join(base_dir, spec[4:].strip())
                with open(wav_path, "rb") as wf:
                    bank[tid] = load_wav(wf.read(), tid, sample_rate)
            elif spec.startswith("synth:"):
                bank[tid] = _parse_synth_spec(tid, spec[6:], sample_rate)
            else:
                raise ConfigError(f"{path}:{lineno}: unknown track source {spec!r}")
    _BANK_CACHE[key] = bank
    return bank
