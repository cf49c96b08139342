"""Pure-Python/numpy reference kernels.

Fallback used when the compiled module is unavailable. Every function here
is the bit-exact twin of its compiled counterpart: same formula structure,
same operation order, scalar trig through libm (``math``), so the two
backends produce identical float64 results.
"""

from __future__ import annotations

import math

import numpy as np

NAME = "python"

_TWO_PI = 2.0 * math.pi


def wrap_angle(h: float) -> float:
    """Normalize an angle into [-pi, pi)."""
    return h - _TWO_PI * math.floor((h + math.pi) / _TWO_PI)


def mix_into(out_l, out_r, track, playhead, g_l, g_r, loop):
    """Accumulate one source into stereo float64 buffers.

    Reads len(out_l) samples of ``track`` starting at ``playhead``, scaled
    per channel. Looping tracks wrap; finite ones stop at the end. Returns
    (new_playhead, still_active).
    """
    n = out_l.shape[0]
    m = track.shape[0]
    if loop:
        idx = (playhead + np.arange(n)) % m
        seg = track[idx]
        out_l += g_l * seg
        out_r += g_r * seg
        return (playhead + n) % m, True
    avail = m - playhead
    k = n if n < avail else avail
    if k > 0:
        seg = track[playhead : playhead + k]
        out_l[:k] += g_l * seg
        out_r[:k] += g_r * seg
    ph = playhead + k
    return ph, ph < m


def clamp_stereo(out_l, out_r):
    """Clamp both channels into [-1, 1] in place; count clamped samples."""
    clamped = 0
    for ch in (out_l, out_r):
        over = ch > 1.0
        under = ch < -1.0
        clamped += int(np.count_nonzero(over)) + int(np.count_nonzero(under))
        np.clip(ch, -1.0, 1.0, out=ch)
    return clamped


def render_sources(
    data,
    offsets,
    loops,
    pos,
    gains,
    refs,
    rolloffs,
    maxds,
    spatial,
    playheads,
    active,
    lx,
    ly,
    heading,
    out_l,
    out_r,
):
    """Fused one-call mix of a packed source list (see audio.MixState).

    Zeroes the output block, applies per-source attenuation/pan gains held
    for the block, advances playheads in place, clamps, and returns the
    clamped-sample count. Formula structure matches the per-source path
    exactly so both give bit-identical blocks.
    """
    out_l[:] = 0.0
    out_r[:] = 0.0
    n = out_l.shape[0]
    for s in range(gains.shape[0]):
        if not active[s]:
            continue
        lo = int(offsets[s])
        hi = int(offsets[s + 1])
        m = hi - lo
        track = data[lo:hi]
        if spatial[s]:
            dx = pos[s, 0] - lx
            dy = pos[s, 1] - ly
            dist = math.sqrt(dx * dx + dy * dy)
            if dist > maxds[s]:
                att = 0.0
            else:
                d = dist
                if d < refs[s]:
                    d = refs[s]
                att = refs[s] / (refs[s] + rolloffs[s] * (d - refs[s]))
            if dx == 0.0 and dy == 0.0:
                p_l = 0.5
                p_r = 0.5
            else:
                bearing = math.atan2(dy, dx) - heading
                sb = math.sin(bearing)
                p_l = (1.0 + sb) * 0.5
                p_r = (1.0 - sb) * 0.5
        else:
            att = 1.0
            p_l = 0.5
            p_r = 0.5
        g = gains[s] * att
        ph = int(playheads[s])
        if g == 0.0:
            # Inaudible but still playing: advance time without mixing.
            if loops[s]:
                playheads[s] = (ph + n) % m
            else:
                ph = min(ph + n, m)
                playheads[s] = ph
                active[s] = 1 if ph < m else 0
            continue
        g_l = g * p_l
        g_r = g * p_r
        if loops[s]:
            idx = (ph + np.arange(n)) % m
            seg = track[idx]
            out_l += g_l * seg
            out_r += g_r * seg
            playheads[s] = (ph + n) % m
        else:
            avail = m - ph
            k = n if n < avail else avail
            if k > 0:
                seg = track[ph : ph + k]
                out_l[:k] += g_l * seg
                out_r[:k] += g_r * seg
            ph += k
            playheads[s] = ph
            active[s] = 1 if ph < m else 0
    return clamp_stereo(out_l, out_r)


def _position_free(x, y, walls, solids, radius):
    r2 = radius * radius
    for i in range(walls.shape[0]):
        x0 = walls[i, 0]
        y0 = walls[i, 1]
        x1 = walls[i, 2]
        y1 = walls[i, 3]
        qx = min(max(x, x0), x1)
        qy = min(max(y, y0), y1)
        dx = x - qx
        dy = y - qy
        if dx * dx + dy * dy < r2:
            return False
    for i in range(solids.shape[0]):
        dx = x - solids[i, 0]
        dy = y - solids[i, 1]
        rr = radius + solids[i, 2]
        if dx * dx + dy * dy < rr * rr:
            return False
    return True


def move_agent(x, y, heading, action, n_tics, step_len, turn_rad, walls, solids, radius):
    """Advance the agent ``n_tics`` tics applying one action each tic.

    Actions: 0 forward, 1 backward, 2 turn left, 3 turn right, 4 noop.
    Blocked moves slide along the obstructing axis.
    """
    for _ in range(n_tics):
        if action == 2:
            heading = wrap_angle(heading + turn_rad)
        elif action == 3:
            heading = wrap_angle(heading - turn_rad)
        elif action == 0 or action == 1:
            sign = 1.0 if action == 0 else -1.0
            dx = math.cos(heading) * step_len * sign
            dy = math.sin(heading) * step_len * sign
            nx = x + dx
            ny = y + dy
            if _position_free(nx, ny, walls, solids, radius):
                x = nx
                y = ny
            elif _position_free(nx, y, walls, solids, radius):
                x = nx
            elif _position_free(x, ny, walls, solids, radius):
                y = ny
    return x, y, heading


_RAY_EPS = 1e-9


def raycast(px, py, dir_x, dir_y, walls, circles, circle_ids, max_dist):
    """Nearest hit per ray against wall segments and circles.

    Ray directions are precomputed unit vectors (one per output column).
    Returns (ids uint8, distances float64); id 0 is wall/no-hit, circles
    carry their listed id. Obstacles are scanned walls first then circles,
    a later obstacle wins only when strictly closer.
    """
    n_rays = dir_x.shape[0]
    best = np.full(n_rays, max_dist)
    ids = np.zeros(n_rays, dtype=np.uint8)
    for i in range(walls.shape[0]):
        x0 = walls[i, 0]
        y0 = walls[i, 1]
        ex = walls[i, 2] - x0
        ey = walls[i, 3] - y0
        denom = dir_x * ey - dir_y * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((x0 - px) * ey - (y0 - py) * ex) / denom
            u = ((x0 - px) * dir_y - (y0 - py) * dir_x) / denom
        valid = (
            (np.abs(denom) > _RAY_EPS)
            & (t > _RAY_EPS)
            & (u >= 0.0)
            & (u <= 1.0)
            & (t < best)
        )
        best = np.where(valid, t, best)
    for i in range(circles.shape[0]):
        fx = px - circles[i, 0]
        fy = py - circles[i, 1]
        r = circles[i, 2]
        b = 2.0 * (fx * dir_x + fy * dir_y)
        c = fx * fx + fy * fy - r * r
        disc = b * b - 4.0 * c
        with np.errstate(invalid="ignore"):
            sq = np.sqrt(disc)
            t1 = (-b - sq) * 0.5
            t2 = (-b + sq) * 0.5
            t = np.where(t1 > _RAY_EPS, t1, t2)
        valid = (disc >= 0.0) & (t > _RAY_EPS) & (t < best)
        best = np.where(valid, t, best)
        ids = np.where(valid, np.uint8(circle_ids[i]), ids)
    return ids, best


def paint_image(ids, dists, height, wall_scale, out):
    """Paint hit ids into a (height, W) uint8 column image.

    Column height is wall_scale*height/distance truncated and clamped,
    centered vertically; id 0 paints nothing (background stays 0).
    """
    out[:, :] = 0
    hf = (wall_scale * height) / np.maximum(dists, 1e-6)
    h = hf.astype(np.int64)
    h = np.minimum(h, height)
    top = (height - h) // 2
    rows = np.arange(height)[:, None]
    mask = (ids[None, :] > 0) & (rows >= top[None, :]) & (rows < (top + h)[None, :])
    np.copyto(out, np.broadcast_to(ids[None, :], out.shape), where=mask)
