# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot-path kernels.

Bit-exact twin of ``pyref``: identical formula structure and operation
order, libm trig, no fast-math, so results match the fallback to the bit.
"""

from libc.math cimport M_PI, atan2, cos, fabs, floor, sin, sqrt

import numpy as np

NAME = "cython"

cdef double TWO_PI = 2.0 * M_PI
cdef double RAY_EPS = 1e-9


cpdef double wrap_angle(double h):
    """Normalize an angle into [-pi, pi)."""
    return h - TWO_PI * floor((h + M_PI) / TWO_PI)


def mix_into(double[::1] out_l, double[::1] out_r, double[::1] track,
             Py_ssize_t playhead, double g_l, double g_r, bint loop):
    """Accumulate one source into stereo float64 buffers.

    Same contract as the reference kernel: returns (new_playhead, active).
    """
    cdef Py_ssize_t n = out_l.shape[0]
    cdef Py_ssize_t m = track.shape[0]
    cdef Py_ssize_t i, k, ph = playhead
    cdef double s
    if loop:
        for i in range(n):
            s = track[(ph + i) % m]
            out_l[i] += g_l * s
            out_r[i] += g_r * s
        return (ph + n) % m, True
    k = m - ph
    if n < k:
        k = n
    for i in range(k):
        s = track[ph + i]
        out_l[i] += g_l * s
        out_r[i] += g_r * s
    ph += k
    return ph, ph < m


def clamp_stereo(double[::1] out_l, double[::1] out_r):
    """Clamp both channels into [-1, 1] in place; count clamped samples."""
    cdef Py_ssize_t n = out_l.shape[0]
    cdef Py_ssize_t i
    cdef long clamped = 0
    for i in range(n):
        if out_l[i] > 1.0:
            out_l[i] = 1.0
            clamped += 1
        elif out_l[i] < -1.0:
            out_l[i] = -1.0
            clamped += 1
    for i in range(n):
        if out_r[i] > 1.0:
            out_r[i] = 1.0
            clamped += 1
        elif out_r[i] < -1.0:
            out_r[i] = -1.0
            clamped += 1
    return clamped


def render_sources(double[::1] data, long long[::1] offsets,
                   unsigned char[::1] loops, double[:, ::1] pos,
                   double[::1] gains, double[::1] refs,
                   double[::1] rolloffs, double[::1] maxds,
                   unsigned char[::1] spatial, long long[::1] playheads,
                   unsigned char[::1] active, double lx, double ly,
                   double heading, double[::1] out_l, double[::1] out_r):
    """Fused one-call mix of a packed source list (see audio.MixState).

    Same math and operation order as mix_into driven per source, so the
    block is bit-identical to the per-source path and to the reference
    kernel.
    """
    cdef Py_ssize_t n = out_l.shape[0]
    cdef Py_ssize_t ns = gains.shape[0]
    cdef Py_ssize_t i, s, k, m, lo, j, tp
    cdef long long ph
    cdef double dx, dy, dist, att, d, bearing, sb, p_l, p_r, g, g_l, g_r, v
    cdef long clamped = 0
    for i in range(n):
        out_l[i] = 0.0
        out_r[i] = 0.0
    for s in range(ns):
        if not active[s]:
            continue
        lo = <Py_ssize_t> offsets[s]
        m = <Py_ssize_t> offsets[s + 1] - lo
        if spatial[s]:
            dx = pos[s, 0] - lx
            dy = pos[s, 1] - ly
            dist = sqrt(dx * dx + dy * dy)
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
                bearing = atan2(dy, dx) - heading
                sb = sin(bearing)
                p_l = (1.0 + sb) * 0.5
                p_r = (1.0 - sb) * 0.5
        else:
            att = 1.0
            p_l = 0.5
            p_r = 0.5
        g = gains[s] * att
        ph = playheads[s]
        if g == 0.0:
            # Inaudible but still playing: advance time without mixing.
            if loops[s]:
                playheads[s] = (ph + n) % m
            else:
                ph = ph + n
                if ph > m:
                    ph = m
                playheads[s] = ph
                active[s] = 1 if ph < m else 0
            continue
        g_l = g * p_l
        g_r = g * p_r
        if loops[s]:
            # Contiguous runs between wrap points: same samples in the same
            # order as a per-sample modulo walk, without the divisions.
            j = 0
            tp = <Py_ssize_t> ph
            while j < n:
                k = m - tp
                if n - j < k:
                    k = n - j
                for i in range(k):
                    v = data[lo + tp + i]
                    out_l[j + i] += g_l * v
                    out_r[j + i] += g_r * v
                j += k
                tp += k
                if tp == m:
                    tp = 0
            playheads[s] = (ph + n) % m
        else:
            k = m - <Py_ssize_t> ph
            if n < k:
                k = n
            for i in range(k):
                v = data[lo + <Py_ssize_t> ph + i]
                out_l[i] += g_l * v
                out_r[i] += g_r * v
            ph = ph + k
            playheads[s] = ph
            active[s] = 1 if ph < m else 0
    for i in range(n):
        if out_l[i] > 1.0:
            out_l[i] = 1.0
            clamped += 1
        elif out_l[i] < -1.0:
            out_l[i] = -1.0
            clamped += 1
    for i in range(n):
        if out_r[i] > 1.0:
            out_r[i] = 1.0
            clamped += 1
        elif out_r[i] < -1.0:
            out_r[i] = -1.0
            clamped += 1
    return clamped


cdef bint _position_free(double x, double y, double[:, ::1] walls,
                         double[:, ::1] solids, double radius) nogil:
    cdef double r2 = radius * radius
    cdef double x0, y0, x1, y1, qx, qy, dx, dy, rr
    cdef Py_ssize_t i
    for i in range(walls.shape[0]):
        x0 = walls[i, 0]
        y0 = walls[i, 1]
        x1 = walls[i, 2]
        y1 = walls[i, 3]
        qx = x if x > x0 else x0
        if qx > x1:
            qx = x1
        qy = y if y > y0 else y0
        if qy > y1:
            qy = y1
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


def move_agent(double x, double y, double heading, int action, int n_tics,
               double step_len, double turn_rad, double[:, ::1] walls,
               double[:, ::1] solids, double radius):
    """Advance the agent ``n_tics`` tics applying one action each tic."""
    cdef int t
    cdef double sign, dx, dy, nx, ny
    for t in range(n_tics):
        if action == 2:
            heading = wrap_angle(heading + turn_rad)
        elif action == 3:
            heading = wrap_angle(heading - turn_rad)
        elif action == 0 or action == 1:
            sign = 1.0 if action == 0 else -1.0
            dx = cos(heading) * step_len * sign
            dy = sin(heading) * step_len * sign
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


def raycast(double px, double py, double[::1] dir_x, double[::1] dir_y,
            double[:, ::1] walls, double[:, ::1] circles,
            unsigned char[::1] circle_ids, double max_dist):
    """Nearest hit per ray; see the reference kernel for the contract."""
    cdef Py_ssize_t n_rays = dir_x.shape[0]
    ids_arr = np.zeros(n_rays, dtype=np.uint8)
    best_arr = np.full(n_rays, max_dist)
    cdef unsigned char[::1] ids = ids_arr
    cdef double[::1] best = best_arr
    cdef Py_ssize_t r, i
    cdef double dx, dy, x0, y0, ex, ey, denom, t, u
    cdef double fx, fy, rad, b, c, disc, sq, t1, t2
    for r in range(n_rays):
        dx = dir_x[r]
        dy = dir_y[r]
        for i in range(walls.shape[0]):
            x0 = walls[i, 0]
            y0 = walls[i, 1]
            ex = walls[i, 2] - x0
            ey = walls[i, 3] - y0
            denom = dx * ey - dy * ex
            if fabs(denom) > RAY_EPS:
                t = ((x0 - px) * ey - (y0 - py) * ex) / denom
                u = ((x0 - px) * dy - (y0 - py) * dx) / denom
                if t > RAY_EPS and u >= 0.0 and u <= 1.0 and t < best[r]:
                    best[r] = t
        for i in range(circles.shape[0]):
            fx = px - circles[i, 0]
            fy = py - circles[i, 1]
            rad = circles[i, 2]
            b = 2.0 * (fx * dx + fy * dy)
            c = fx * fx + fy * fy - rad * rad
            disc = b * b - 4.0 * c
            if disc >= 0.0:
                sq = sqrt(disc)
                t1 = (-b - sq) * 0.5
                t2 = (-b + sq) * 0.5
                t = t1 if t1 > RAY_EPS else t2
                if t > RAY_EPS and t < best[r]:
                    best[r] = t
                    ids[r] = circle_ids[i]
    return ids_arr, best_arr


def paint_image(unsigned char[::1] ids, double[::1] dists, int height,
                double wall_scale, unsigned char[:, ::1] out):
    """Paint hit ids into a (height, W) uint8 column image."""
    cdef Py_ssize_t n_cols = ids.shape[0]
    cdef Py_ssize_t c, row
    cdef double hf, d
    cdef long h, top
    out[:, :] = 0
    for c in range(n_cols):
        if ids[c] == 0:
            continue
        d = dists[c]
        if d < 1e-6:
            d = 1e-6
        hf = (wall_scale * height) / d
        h = <long> hf
        if h > height:
            h = height
        top = (height - h) // 2
        for row in range(top, top + h):
            out[row, c] = ids[c]
