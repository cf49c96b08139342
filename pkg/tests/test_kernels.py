"""Backend selection, geometry kernels, and cross-backend bit parity.

Parity tests assert exact equality, not closeness: both backends must be
interchangeable under digest comparison, so a single flipped bit is a bug.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echosim import ConfigError
from echosim._kernels import available_backends, get_backend, pyref

from helpers import ray_hit_oracle

HAVE_CYTHON = "cython" in available_backends()
needs_cython = pytest.mark.skipif(not HAVE_CYTHON, reason="compiled kernels not built")


def backends():
    out = [get_backend("python")]
    if HAVE_CYTHON:
        out.append(get_backend("cython"))
    return out


class TestSelection:
    def test_python_always_available(self):
        assert "python" in available_backends()
        assert get_backend("python") is pyref
        assert get_backend("python").NAME == "python"

    def test_auto_resolves(self):
        k = get_backend("auto")
        assert k.NAME in ("python", "cython")

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("ECHOSIM_KERNELS", "python")
        assert get_backend(None).NAME == "python"

    def test_env_bad_value(self, monkeypatch):
        monkeypatch.setenv("ECHOSIM_KERNELS", "fortran")
        with pytest.raises(ConfigError, match="fortran"):
            get_backend(None)

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            get_backend("cuda")

    @needs_cython
    def test_cython_selectable(self):
        assert get_backend("cython").NAME == "cython"


@settings(deadline=None, max_examples=80)
@given(h=st.floats(min_value=-50.0, max_value=50.0))
def test_wrap_angle_range(h):
    w = pyref.wrap_angle(h)
    assert -math.pi <= w < math.pi
    # same direction modulo full turns
    assert abs(math.sin(w) - math.sin(h)) < 1e-9
    assert abs(math.cos(w) - math.cos(h)) < 1e-9


@needs_cython
@settings(deadline=None, max_examples=80)
@given(h=st.floats(min_value=-50.0, max_value=50.0))
def test_wrap_angle_parity(h):
    a = get_backend("python").wrap_angle(h)
    b = get_backend("cython").wrap_angle(h)
    assert a == b


class TestMixInto:
    def test_loop_wraps(self):
        track = np.arange(5, dtype=np.float64) / 10.0
        out_l = np.zeros(8)
        out_r = np.zeros(8)
        ph, active = pyref.mix_into(out_l, out_r, track, 3, 1.0, 0.5, True)
        assert active
        assert ph == (3 + 8) % 5
        want = track[(3 + np.arange(8)) % 5]
        assert np.array_equal(out_l, want)
        assert np.array_equal(out_r, 0.5 * want)

    def test_oneshot_stops_at_end(self):
        track = np.ones(4)
        out_l = np.zeros(10)
        out_r = np.zeros(10)
        ph, active = pyref.mix_into(out_l, out_r, track, 2, 1.0, 1.0, False)
        assert not active
        assert ph == 4
        assert np.array_equal(out_l, np.array([1.0, 1.0] + [0.0] * 8))

    def test_accumulates_rather_than_overwrites(self):
        track = np.full(4, 0.25)
        out_l = np.full(4, 0.5)
        out_r = np.full(4, -0.5)
        pyref.mix_into(out_l, out_r, track, 0, 1.0, 1.0, True)
        assert np.all(out_l == 0.75)
        assert np.all(out_r == -0.25)

    @needs_cython
    def test_parity_randomized(self):
        kc = get_backend("cython")
        rng = np.random.default_rng(11)
        for _ in range(60):
            m = int(rng.integers(1, 400))
            n = int(rng.integers(1, 700))
            track = rng.normal(scale=0.4, size=m)
            ph = int(rng.integers(0, m))
            g_l, g_r = rng.uniform(0, 1.2, size=2)
            loop = bool(rng.integers(0, 2))
            a_l = rng.normal(size=n)
            a_r = rng.normal(size=n)
            b_l = a_l.copy()
            b_r = a_r.copy()
            ra = pyref.mix_into(a_l, a_r, track, ph, g_l, g_r, loop)
            rb = kc.mix_into(b_l, b_r, track, ph, g_l, g_r, loop)
            assert ra == rb
            assert np.array_equal(a_l, b_l)
            assert np.array_equal(a_r, b_r)


class TestClampStereo:
    def test_counts_and_clamps(self):
        out_l = np.array([0.5, 1.5, -2.0, 1.0])
        out_r = np.array([-1.0001, 0.0, 0.0, 0.0])
        n = pyref.clamp_stereo(out_l, out_r)
        assert n == 3
        assert np.array_equal(out_l, [0.5, 1.0, -1.0, 1.0])
        assert np.array_equal(out_r, [-1.0, 0.0, 0.0, 0.0])

    def test_exact_bounds_not_counted(self):
        out = np.array([1.0, -1.0])
        assert pyref.clamp_stereo(out.copy(), out.copy()) == 0

    @needs_cython
    def test_parity_randomized(self):
        kc = get_backend("cython")
        rng = np.random.default_rng(5)
        for _ in range(40):
            n = int(rng.integers(1, 500))
            a_l = rng.normal(scale=1.2, size=n)
            a_r = rng.normal(scale=1.2, size=n)
            b_l, b_r = a_l.copy(), a_r.copy()
            ca = pyref.clamp_stereo(a_l, a_r)
            cb = kc.clamp_stereo(b_l, b_r)
            assert ca == cb
            assert np.array_equal(a_l, b_l) and np.array_equal(a_r, b_r)


def random_pack(rng, n_sources, n_out):
    """Random packed source arrays in the layout render_sources expects."""
    lens = rng.integers(50, 900, size=n_sources)
    offsets = np.zeros(n_sources + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(lens)
    data = rng.normal(scale=0.4, size=int(offsets[-1]))
    loops = rng.integers(0, 2, size=n_sources).astype(np.uint8)
    pos = rng.uniform(0, 20, size=(n_sources, 2))
    gains = rng.uniform(0.0, 1.0, size=n_sources)
    refs = np.full(n_sources, 1.0)
    rolloffs = np.full(n_sources, 4.0)
    maxds = rng.uniform(5.0, 14.0, size=n_sources)
    spatial = rng.integers(0, 2, size=n_sources).astype(np.uint8)
    playheads = np.array([rng.integers(0, L) for L in lens], dtype=np.int64)
    active = (rng.uniform(size=n_sources) < 0.9).astype(np.uint8)
    return (data, offsets, loops, pos, gains, refs, rolloffs, maxds, spatial,
            playheads, active)


class TestRenderSources:
    def run_one(self, kern, args, lx, ly, heading, n_out):
        (data, offsets, loops, pos, gains, refs, rolloffs, maxds, spatial,
         playheads, active) = args
        out_l = np.empty(n_out)
        out_r = np.empty(n_out)
        ph = playheads.copy()
        ac = active.copy()
        clamped = kern.render_sources(
            data, offsets, loops, pos, gains, refs, rolloffs, maxds, spatial,
            ph, ac, lx, ly, heading, out_l, out_r,
        )
        return out_l, out_r, ph, ac, clamped

    def test_no_sources_is_exact_silence(self):
        for kern in backends():
            out = self.run_one(
                kern,
                random_pack(np.random.default_rng(0), 0, 64),
                1.0, 2.0, 0.3, 64,
            )
            assert np.all(out[0] == 0.0) and np.all(out[1] == 0.0)
            assert out[4] == 0

    def test_inactive_sources_silent_and_frozen(self):
        rng = np.random.default_rng(3)
        args = list(random_pack(rng, 4, 128))
        args[10] = np.zeros(4, dtype=np.uint8)  # all inactive
        for kern in backends():
            out_l, out_r, ph, ac, clamped = self.run_one(kern, tuple(args), 5, 5, 0.0, 128)
            assert np.all(out_l == 0.0) and np.all(out_r == 0.0)
            assert np.array_equal(ph, args[9])

    def test_beyond_max_distance_silent_but_playhead_runs(self):
        rng = np.random.default_rng(4)
        args = list(random_pack(rng, 1, 64))
        args[3] = np.array([[100.0, 100.0]])  # far away
        args[2] = np.ones(1, dtype=np.uint8)  # looping
        args[8] = np.ones(1, dtype=np.uint8)  # spatial
        args[10] = np.ones(1, dtype=np.uint8)
        m = int(args[1][1] - args[1][0])
        start = int(args[9][0])
        for kern in backends():
            out_l, out_r, ph, ac, clamped = self.run_one(kern, tuple(args), 0, 0, 0.0, 64)
            assert np.all(out_l == 0.0) and np.all(out_r == 0.0)
            assert ph[0] == (start + 64) % m
            assert ac[0] == 1

    @needs_cython
    def test_parity_randomized(self):
        kp = get_backend("python")
        kc = get_backend("cython")
        rng = np.random.default_rng(99)
        for trial in range(40):
            n_src = int(rng.integers(0, 8))
            n_out = int(rng.integers(1, 2600))
            args = random_pack(rng, n_src, n_out)
            lx, ly = rng.uniform(0, 20, size=2)
            heading = float(rng.uniform(-math.pi, math.pi))
            ra = self.run_one(kp, args, lx, ly, heading, n_out)
            rb = self.run_one(kc, args, lx, ly, heading, n_out)
            for a, b in zip(ra, rb):
                if isinstance(a, np.ndarray):
                    assert np.array_equal(a, b)
                else:
                    assert a == b


class TestMoveAgent:
    WALLS = np.array([[1.0, -10.0, 1.0, 10.0]])  # vertical wall at x=1
    NO_SOLIDS = np.zeros((0, 3))
    STEP = 2.5 / 35.0
    TURN = math.radians(10.0)

    def move(self, kern, x, y, h, action, n=1, walls=None, solids=None, radius=0.2):
        walls = self.WALLS if walls is None else walls
        solids = self.NO_SOLIDS if solids is None else solids
        return kern.move_agent(x, y, h, action, n, self.STEP, self.TURN, walls, solids, radius)

    def test_noop_is_identity(self):
        for kern in backends():
            assert self.move(kern, 0.3, 0.4, 1.0, 4, n=7) == (0.3, 0.4, 1.0)

    def test_turns_are_inverse(self):
        for kern in backends():
            x, y, h = self.move(kern, 0.0, 0.0, 0.5, 2)
            x, y, h = self.move(kern, x, y, h, 3)
            assert (x, y) == (0.0, 0.0)
            assert abs(h - 0.5) < 1e-12

    def test_forward_distance(self):
        for kern in backends():
            x, y, h = self.move(kern, -5.0, 0.0, 0.0, 0, n=35)
            assert abs(x - (-5.0 + 2.5)) < 1e-9
            assert y == 0.0

    def test_wall_blocks(self):
        for kern in backends():
            x, y, h = self.move(kern, 0.75, 0.0, 0.0, 0, n=50)
            assert x <= 1.0 - 0.2 + 1e-12

    def test_blocked_forward_slides_along_wall(self):
        h0 = math.pi / 4
        for kern in backends():
            x, y, h = self.move(kern, 0.79, 0.0, h0, 0, n=3)
            assert x == 0.79          # x motion blocked at the wall margin
            assert y > 0.0            # y component still applies
            assert h == h0

    def test_solid_blocks(self):
        solids = np.array([[2.0, 0.0, 0.35]])
        for kern in backends():
            x, y, h = self.move(
                kern, 0.0, 0.0, 0.0, 0, n=60,
                walls=np.zeros((0, 4)), solids=solids,
            )
            assert x <= 2.0 - 0.35 - 0.2 + 1e-12

    def test_never_penetrates(self):
        rng = np.random.default_rng(21)
        walls = np.array([[0.0, 0.0, 4.0, 0.0], [0.0, 0.0, 0.0, 4.0],
                          [4.0, 0.0, 4.0, 4.0], [0.0, 4.0, 4.0, 4.0]])
        solids = np.array([[2.0, 2.0, 0.35]])
        radius = 0.2
        for kern in backends():
            x, y, h = 1.0, 1.0, 0.0
            for _ in range(300):
                a = int(rng.integers(0, 5))
                x, y, h = kern.move_agent(
                    x, y, h, a, 4, self.STEP, self.TURN, walls, solids, radius)
                for wx0, wy0, wx1, wy1 in walls:
                    qx = min(max(x, wx0), wx1)
                    qy = min(max(y, wy0), wy1)
                    assert (x - qx) ** 2 + (y - qy) ** 2 >= radius**2 - 1e-12
                d = math.sqrt((x - 2.0) ** 2 + (y - 2.0) ** 2)
                assert d >= radius + 0.35 - 1e-12

    @needs_cython
    def test_parity_randomized(self):
        kp = get_backend("python")
        kc = get_backend("cython")
        rng = np.random.default_rng(8)
        walls = np.array([[0.0, 0.0, 6.0, 0.0], [0.0, 0.0, 0.0, 6.0],
                          [6.0, 0.0, 6.0, 6.0], [0.0, 6.0, 6.0, 6.0],
                          [3.0, 0.0, 3.0, 2.5]])
        solids = np.array([[1.5, 4.0, 0.35], [4.5, 1.5, 0.35]])
        pa = pb = (1.0, 1.0, 0.25)
        for _ in range(200):
            a = int(rng.integers(0, 5))
            pa = kp.move_agent(*pa, a, 4, self.STEP, self.TURN, walls, solids, 0.2)
            pb = kc.move_agent(*pb, a, 4, self.STEP, self.TURN, walls, solids, 0.2)
            assert pa == pb


def random_scene(rng):
    walls = np.array([
        [0.0, 0.0, 20.0, 0.0],
        [0.0, 0.0, 0.0, 20.0],
        [20.0, 0.0, 20.0, 20.0],
        [0.0, 20.0, 20.0, 20.0],
        [rng.uniform(4, 16), rng.uniform(4, 16), rng.uniform(4, 16), rng.uniform(4, 16)],
    ])
    # fifth wall: make it a proper axis-aligned segment
    if rng.integers(0, 2):
        walls[4, 2] = walls[4, 0]
    else:
        walls[4, 3] = walls[4, 1]
    walls[4] = [min(walls[4, 0], walls[4, 2]), min(walls[4, 1], walls[4, 3]),
                max(walls[4, 0], walls[4, 2]), max(walls[4, 1], walls[4, 3])]
    n_c = int(rng.integers(0, 5))
    circles = np.column_stack([
        rng.uniform(2, 18, size=n_c),
        rng.uniform(2, 18, size=n_c),
        np.full(n_c, 0.35),
    ])
    ids = rng.integers(1, 7, size=n_c).astype(np.uint8)
    return walls, circles, ids


class TestRaycast:
    def test_matches_geometry_oracle(self):
        rng = np.random.default_rng(13)
        checked = 0
        for kern in backends():
            for _ in range(25):
                walls, circles, ids = random_scene(rng)
                px, py = rng.uniform(3, 17, size=2)
                angles = rng.uniform(-math.pi, math.pi, size=16)
                dir_x = np.cos(angles)
                dir_y = np.sin(angles)
                got_ids, got_d = kern.raycast(px, py, dir_x, dir_y, walls, circles, ids, 50.0)
                for j in range(16):
                    want_id, want_d = ray_hit_oracle(
                        px, py, dir_x[j], dir_y[j], walls, circles, ids, 50.0)
                    assert got_ids[j] == want_id
                    assert abs(got_d[j] - want_d) <= 1e-7 * max(want_d, 1.0)
                    checked += 1
        assert checked >= 200

    def test_wall_dead_ahead(self):
        walls = np.array([[2.0, -5.0, 2.0, 5.0]])
        none = np.zeros((0, 3))
        for kern in backends():
            ids, d = kern.raycast(1.0, 0.0, np.array([1.0]), np.array([0.0]),
                                  walls, none, np.zeros(0, dtype=np.uint8), 50.0)
            assert ids[0] == 0
            assert abs(d[0] - 1.0) < 1e-9

    def test_circle_dead_ahead_and_occlusion(self):
        walls = np.array([[4.0, -5.0, 4.0, 5.0]])
        circles = np.array([[2.0, 0.0, 0.5]])
        cids = np.array([3], dtype=np.uint8)
        for kern in backends():
            ids, d = kern.raycast(0.0, 0.0, np.array([1.0]), np.array([0.0]),
                                  walls, circles, cids, 50.0)
            assert ids[0] == 3
            assert abs(d[0] - 1.5) < 1e-9
            # from the far side the wall occludes the circle
            ids, d = kern.raycast(8.0, 0.0, np.array([-1.0]), np.array([0.0]),
                                  walls, circles, cids, 50.0)
            assert ids[0] == 0
            assert abs(d[0] - 4.0) < 1e-9

    def test_exact_tie_goes_to_wall(self):
        # wall at t=2 and circle whose near edge is also exactly t=2
        walls = np.array([[2.0, -5.0, 2.0, 5.0]])
        circles = np.array([[3.0, 0.0, 1.0]])
        cids = np.array([6], dtype=np.uint8)
        for kern in backends():
            ids, d = kern.raycast(0.0, 0.0, np.array([1.0]), np.array([0.0]),
                                  walls, circles, cids, 50.0)
            assert ids[0] == 0
            assert d[0] == 2.0

    def test_miss_returns_max_dist(self):
        for kern in backends():
            ids, d = kern.raycast(0.0, 0.0, np.array([1.0]), np.array([0.0]),
                                  np.zeros((0, 4)), np.zeros((0, 3)),
                                  np.zeros(0, dtype=np.uint8), 42.0)
            assert ids[0] == 0
            assert d[0] == 42.0

    def test_ray_inside_circle_uses_far_intersection(self):
        circles = np.array([[0.0, 0.0, 1.0]])
        cids = np.array([2], dtype=np.uint8)
        for kern in backends():
            ids, d = kern.raycast(0.0, 0.0, np.array([1.0]), np.array([0.0]),
                                  np.zeros((0, 4)), circles, cids, 50.0)
            assert ids[0] == 2
            assert abs(d[0] - 1.0) < 1e-9

    @needs_cython
    def test_parity_randomized(self):
        kp = get_backend("python")
        kc = get_backend("cython")
        rng = np.random.default_rng(17)
        for _ in range(30):
            walls, circles, ids = random_scene(rng)
            px, py = rng.uniform(1, 19, size=2)
            angles = rng.uniform(-math.pi, math.pi, size=64)
            da = kp.raycast(px, py, np.cos(angles), np.sin(angles), walls, circles, ids, 50.0)
            db = kc.raycast(px, py, np.cos(angles), np.sin(angles), walls, circles, ids, 50.0)
            assert np.array_equal(da[0], db[0])
            assert np.array_equal(da[1], db[1])


class TestPaintImage:
    def test_formula_and_background(self):
        ids = np.array([0, 3, 5], dtype=np.uint8)
        dists = np.array([1.0, 4.0, 0.01])
        height = 72
        for kern in backends():
            out = np.empty((height, 3), dtype=np.uint8)
            kern.paint_image(ids, dists, height, 1.0, out)
            assert np.all(out[:, 0] == 0)  # wall id paints nothing
            h = int(1.0 * height / 4.0)
            top = (height - h) // 2
            col = out[:, 1]
            assert np.all(col[top : top + h] == 3)
            assert np.all(col[:top] == 0) and np.all(col[top + h :] == 0)
            assert np.all(out[:, 2] == 5)  # close hit fills the column

    def test_overwrites_previous_contents(self):
        ids = np.zeros(4, dtype=np.uint8)
        dists = np.full(4, 5.0)
        for kern in backends():
            out = np.full((8, 4), 9, dtype=np.uint8)
            kern.paint_image(ids, dists, 8, 1.0, out)
            assert np.all(out == 0)

    @needs_cython
    def test_parity_randomized(self):
        kp = get_backend("python")
        kc = get_backend("cython")
        rng = np.random.default_rng(30)
        for _ in range(25):
            w = int(rng.integers(1, 128))
            hgt = int(rng.integers(1, 72))
            ids = rng.integers(0, 7, size=w).astype(np.uint8)
            dists = rng.uniform(0.05, 30.0, size=w)
            a = np.empty((hgt, w), dtype=np.uint8)
            b = np.empty((hgt, w), dtype=np.uint8)
            kp.paint_image(ids, dists, hgt, 1.0, a)
            kc.paint_image(ids, dists, hgt, 1.0, b)
            assert np.array_equal(a, b)
