"""Deterministic signal-processing kernels for the audio encoder front-ends.

Three front-ends operate on one channel of an :class:`AudioBuffer`:

* plain decimation (every k-th sample) feeding a 1D-conv style encoder,
* log-magnitude spectrum of the whole buffer,
* log-mel spectrogram (windowed FFT, triangular mel filterbank).

All functions are pure: identical inputs give bit-identical outputs, and
nothing here touches global state, so they are safe to call from any number
of workers.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

# Epsilon added inside every log so silence maps to a finite floor.
LOG_FLOOR = 1e-5

# Feature kinds and their codes in the binary dump format.
KIND_STRIDE = "stride"
KIND_LOGFFT = "logfft"
KIND_MEL = "mel"
_KIND_CODES = {KIND_STRIDE: 1, KIND_LOGFFT: 2, KIND_MEL: 3}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

FEATURE_MAGIC = b"EFV1"


@dataclass(slots=True)
class AudioBuffer:
    """Planar stereo sample block at a fixed sample rate.

    Both channels have equal length and amplitudes within [-1, 1].
    """

    samples_left: np.ndarray
    samples_right: np.ndarray
    sample_rate: int

    def __len__(self) -> int:
        return len(self.samples_left)

    def channel(self, name: str) -> np.ndarray:
        if name == "left":
            return self.samples_left
        if name == "right":
            return self.samples_right
        raise ValueError(f"unknown channel {name!r}")

    def validate(self) -> None:
        if self.samples_left.ndim != 1 or self.samples_right.ndim != 1:
            raise ShapeError("audio channels must be one-dimensional")
        if len(self.samples_left) != len(self.samples_right):
            raise ShapeError(
                "channel lengths differ: "
                f"{len(self.samples_left)} vs {len(self.samples_right)}"
            )
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        for name in ("left", "right"):
            ch = self.channel(name)
            if len(ch) and not np.all(np.isfinite(ch)):
                raise ShapeError(f"{name} channel contains non-finite samples")
            if len(ch) and (ch.min() < -1.0 or ch.max() > 1.0):
                raise ShapeError(f"{name} channel exceeds [-1, 1]")

    @staticmethod
    def silence(n: int, sample_rate: int) -> "AudioBuffer":
        return AudioBuffer(np.zeros(n), np.zeros(n), sample_rate)


@dataclass(slots=True)
class FeatureVector:
    values: np.ndarray
    channel: str  # "left" | "right"
    kind: str     # "stride" | "logfft" | "mel"


@dataclass(slots=True)
class MelFilterbank:
    n_mels: int
    n_fft_bins: int
    weights: np.ndarray  # (n_mels, n_fft_bins), non-negative triangles
    sample_rate: int


@dataclass(slots=True)
class MelSpectrogram:
    frames: int
    n_mels: int
    values: np.ndarray  # (frames, n_mels) log-mel energies
    channel: str = ""


def stride_downsample(x: np.ndarray, stride: int = 8) -> np.ndarray:
    """Take every ``stride``-th sample starting at index 0.

    Output length is ceil(n / stride). This is plain decimation without an
    anti-alias filter; the post-decimation Nyquist is sample_rate/(2*stride).
    """
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    x = np.asarray(x, dtype=np.float64)
    return x[::stride].copy()


def fft_log_magnitude(x: np.ndarray) -> np.ndarray:
    """Natural log of the DFT magnitudes, first floor(n/2) bins.

    Uses a general mixed-radix transform so non-power-of-two lengths are
    handled without padding; magnitudes equal the direct DFT definition.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ShapeError(f"need at least 2 samples, got {n}")
    mags = np.abs(np.fft.rfft(x))[: n // 2]
    return np.log(mags + LOG_FLOOR)


def maxpool_1d(v: np.ndarray, kernel: int) -> np.ndarray:
    """Max over non-overlapping windows of size ``kernel`` (stride = kernel).

    A trailing remainder shorter than the kernel is dropped.
    """
    if kernel < 1:
        raise ConfigError(f"kernel must be >= 1, got {kernel}")
    v = np.asarray(v, dtype=np.float64)
    n_out = len(v) // kernel
    if n_out == 0:
        return np.empty(0)
    return v[: n_out * kernel].reshape(n_out, kernel).max(axis=1)


def hz_to_mel(f):
    """HTK mel scale: 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def build_mel_filterbank(
    sample_rate: int,
    n_fft: int,
    n_mels: int = 80,
    f_min: float = 0.0,
    f_max: float | None = None,
) -> MelFilterbank:
    """Triangular filters with centers equally spaced on the mel scale.

    ``n_fft`` is the transform length; the filterbank has n_fft//2 + 1 bin
    columns matching a real FFT of that length.
    """
    if f_max is None:
        f_max = sample_rate / 2.0
    if not (0.0 <= f_min < f_max <= sample_rate / 2.0):
        raise ConfigError(
            f"need 0 <= f_min < f_max <= sample_rate/2, got "
            f"f_min={f_min}, f_max={f_max}, sample_rate={sample_rate}"
        )
    if n_mels < 1:
        raise ConfigError(f"n_mels must be >= 1, got {n_mels}")

    n_bins = n_fft // 2 + 1
    bin_freqs = np.arange(n_bins) * (sample_rate / n_fft)
    mel_pts = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)

    weights = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, center, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        weights[m] = np.maximum(0.0, np.minimum(rising, falling))

    row_sums = weights.sum(axis=1)
    if np.any(row_sums <= 0.0):
        bad = int(np.argmin(row_sums))
        raise ConfigError(
            f"mel filter {bad} has zero weight; n_fft={n_fft} gives too few "
            f"bins for {n_mels} filters over [{f_min}, {f_max}] Hz"
        )
    return MelFilterbank(n_mels, n_bins, weights, sample_rate)


def stft_geometry(n: int, sample_rate: int, win_ms: float, hop_ms: float):
    """(win, hop, frames) for the windowed transform.

    win rounds half-to-even, hop truncates; at 22050 Hz and the 25/10 ms
    defaults this gives win=551, hop=220.
    """
    win = round(win_ms * sample_rate / 1000.0)
    hop = math.floor(hop_ms * sample_rate / 1000.0)
    if win < 1 or hop < 1:
        raise ConfigError(f"window/hop too small: win={win}, hop={hop}")
    if n < win:
        raise ShapeError(f"need at least {win} samples for one frame, got {n}")
    frames = 1 + (n - win) // hop
    return win, hop, frames


def mel_spectrogram(
    x: np.ndarray,
    sample_rate: int,
    win_ms: float = 25.0,
    hop_ms: float = 10.0,
    n_mels: int = 80,
    filterbank: MelFilterbank | None = None,
) -> np.ndarray:
    """Log-mel spectrogram, shape (frames, n_mels).

    Each frame is Hann-windowed, transformed, squared to a power spectrum,
    projected through the filterbank and floored log-compressed.
    """
    x = np.asarray(x, dtype=np.float64)
    win, hop, frames = stft_geometry(len(x), sample_rate, win_ms, hop_ms)
    if filterbank is None:
        filterbank = build_mel_filterbank(sample_rate, win, n_mels)
    elif filterbank.n_fft_bins != win // 2 + 1:
        raise ShapeError(
            f"filterbank has {filterbank.n_fft_bins} bins, window needs {win // 2 + 1}"
        )

    window = np.hanning(win)
    out = np.empty((frames, filterbank.n_mels))
    for i in range(frames):
        frame = x[i * hop : i * hop + win] * window
        power = np.abs(np.fft.rfft(frame)) ** 2
        out[i] = np.log(filterbank.weights @ power + LOG_FLOOR)
    return out


def encode_channel(buf: AudioBuffer, channel: str, kind: str, stride: int = 8):
    """Apply one front-end to one channel of a stereo buffer."""
    x = buf.channel(channel)
    if kind == KIND_STRIDE:
        return FeatureVector(stride_downsample(x, stride), channel, kind)
    if kind == KIND_LOGFFT:
        return FeatureVector(fft_log_magnitude(x), channel, kind)
    if kind == KIND_MEL:
        values = mel_spectrogram(x, buf.sample_rate)
        return MelSpectrogram(values.shape[0], values.shape[1], values, channel)
    raise ConfigError(f"unknown encoder kind {kind!r}; expected stride|logfft|mel")


def encode_stereo(buf: AudioBuffer, kind: str, stride: int = 8):
    """Run the chosen front-end on each channel independently.

    Returns (left, right) in that order.
    """
    return (
        encode_channel(buf, "left", kind, stride),
        encode_channel(buf, "right", kind, stride),
    )


def write_feature_dump(path, kind: str, left, right) -> tuple[int, int]:
    """Write the binary feature dump.

    Layout: magic "EFV1", kind code u32, rows u32, cols u32 (all little
    endian), then rows*cols float32 values row-major. Stereo data is stacked
    left block then right block; vector kinds have one row per channel.
    Returns (rows, cols).
    """
    code = _KIND_CODES.get(kind)
    if code is None:
        raise ConfigError(f"unknown feature kind {kind!r}")
    if kind == KIND_MEL:
        data = np.vstack([left.values, right.values])
    else:
        data = np.stack([left.values, right.values])
    rows, cols = data.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIII", FEATURE_MAGIC, code, rows, cols))
        f.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
    return rows, cols


def read_feature_dump(path) -> tuple[str, np.ndarray]:
    """Read a dump written by :func:`write_feature_dump`."""
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) != 16:
            raise ShapeError("feature dump truncated before header end")
        magic, code, rows, cols = struct.unpack("<4sIII", header)
        if magic != FEATURE_MAGIC:
            raise ShapeError(f"bad feature dump magic {magic!r}")
        kind = _CODE_KINDS.get(code)
        if kind is None:
            raise ShapeError(f"unknown feature kind code {code}")
        payload = f.read(rows * cols * 4)
        if len(payload) != rows * cols * 4:
            raise ShapeError("feature dump truncated before data end")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return kind, data
