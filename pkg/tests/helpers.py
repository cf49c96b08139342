"""Independent oracles used by the test suite.

Everything in here is deliberately written against a different algorithm
than the library under test: direct matrix DFT instead of FFT, scalar
log10 mel formulas instead of the vectorized filterbank builder,
parametric line geometry instead of the kernel raycaster.  Slow is fine,
agreeing by construction is not.
"""

import math

import numpy as np


def direct_dft(x):
    """O(n^2) matrix DFT. No FFT anywhere, so it cannot share bugs with one."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return w @ x


def naive_resample(x, rate_in, rate_out):
    """Per-sample linear interpolation loop mirroring the resampler contract."""
    n_in = len(x)
    n_out = int(round(n_in * rate_out / rate_in))
    step = rate_in / rate_out
    out = np.empty(n_out, dtype=np.float64)
    for i in range(n_out):
        p = i * step
        j = int(math.floor(p))
        if j >= n_in - 1:
            out[i] = x[n_in - 1]
        else:
            f = p - j
            out[i] = x[j] * (1.0 - f) + x[j + 1] * f
    return out


def windowed_ncc(template, signal):
    """Max normalized cross-correlation of template against signal windows.

    Template-matching normalization: each window of len(template) samples is
    normalized by its own energy, not the whole signal's.  A global-norm NCC
    tops out around sqrt(len(t)/len(s)) for a perfect embedded copy, which
    would make any fixed threshold meaningless.
    """
    t = np.asarray(template, dtype=np.float64)
    s = np.asarray(signal, dtype=np.float64)
    n = len(t)
    if len(s) < n:
        s, t = t, s
        n = len(t)
    t_norm = math.sqrt(float(np.dot(t, t)))
    if t_norm == 0.0:
        return 0.0
    m = len(s) - n + 1
    # full correlation via FFT; corr[i] = sum_j t[j] * s[i + j]
    size = 1
    while size < len(s) + n:
        size *= 2
    corr = np.fft.irfft(np.fft.rfft(s, size) * np.fft.rfft(t[::-1], size), size)
    corr = corr[n - 1 : n - 1 + m]
    sq = np.concatenate(([0.0], np.cumsum(s * s)))
    energy = sq[n:] - sq[:-n]
    denom = t_norm * np.sqrt(np.maximum(energy, 1e-30))
    return float(np.max(np.abs(corr) / denom))


def hz_to_mel_scalar(f):
    return 2595.0 * math.log10(1.0 + f / 700.0)


def mel_to_hz_scalar(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def triangle_response(f, f_lo, f_mid, f_hi):
    """Single HTK triangular filter evaluated at one frequency."""
    if f <= f_lo or f >= f_hi:
        return 0.0
    if f <= f_mid:
        return (f - f_lo) / (f_mid - f_lo)
    return (f_hi - f) / (f_hi - f_mid)


def mel_points(f_min, f_max, n_mels):
    """Filter edge frequencies: n_mels + 2 points equally spaced in mel."""
    lo = hz_to_mel_scalar(f_min)
    hi = hz_to_mel_scalar(f_max)
    return [
        mel_to_hz_scalar(lo + (hi - lo) * i / (n_mels + 1)) for i in range(n_mels + 2)
    ]


def ray_hit_oracle(px, py, dx, dy, walls, circles, circle_ids, max_dist):
    """Nearest hit for a single ray, via unrelated formulas.

    Walls are checked with the parametric form t = (c - p) / d against each
    segment's axis (works for the axis-aligned arena walls and for arbitrary
    segments via the perpendicular projection), circles with closest-approach
    projection rather than the abc quadratic.
    """
    best_t = max_dist
    best_id = 0
    for i in range(walls.shape[0]):
        x0, y0, x1, y1 = walls[i]
        ex, ey = x1 - x0, y1 - y0
        # distance of ray to the infinite line through the segment
        denom = dx * ey - dy * ex
        if abs(denom) < 1e-12:
            continue
        t = ((x0 - px) * ey - (y0 - py) * ex) / denom
        if t <= 1e-9 or t >= best_t:
            continue
        hx, hy = px + t * dx, py + t * dy
        # within-segment test by projection onto the segment direction
        seg_len2 = ex * ex + ey * ey
        u = ((hx - x0) * ex + (hy - y0) * ey) / seg_len2
        if 0.0 <= u <= 1.0:
            best_t = t
    for i in range(circles.shape[0]):
        cx, cy, r = circles[i]
        # project center onto the ray: closest approach at s, offset h
        sx, sy = cx - px, cy - py
        s = sx * dx + sy * dy
        h2 = sx * sx + sy * sy - s * s
        if h2 > r * r:
            continue
        half = math.sqrt(r * r - h2)
        t = s - half
        if t <= 1e-9:
            t = s + half
        if t > 1e-9 and t < best_t:
            best_t = t
            best_id = int(circle_ids[i])
    return best_id, best_t
