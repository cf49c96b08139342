#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-Python reference.

Every kernel is first run on identical inputs under both backends and the
outputs are required to match bit for bit; only then is speed measured, so
a throughput win can never hide numeric drift. The last section times
whole-environment stepping with each backend and cross-checks the
observation streams.

Typical output on one core:

    kernel                 cython       python   speedup  bit-identical
    render_sources         7.6 us      53.0 us      7.0x  yes
    ...
"""

import argparse
import copy
import math
import time

import numpy as np

from echosim import Env, EnvConfig, ListenerPose, observation_digest, pack_sources
from echosim._kernels import available_backends, get_backend


def best_time(fn, calls, repeats):
    """Best-of-N wall time per call, in seconds."""
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        best = min(best, (time.perf_counter() - t0) / calls)
    return best


def build_workloads(seed):
    """Realistic per-kernel inputs taken from a live episode."""
    cfg = EnvConfig()
    env = Env(cfg)
    env.reset(seed)
    st = env.state

    walls = env.arena.walls
    circles = np.array([[p.x, p.y, cfg.pillar_radius] for p in st.pillars])
    circle_ids = np.array([p.visual_id for p in st.pillars], dtype=np.uint8)
    half_fov = math.radians(cfg.fov_deg) / 2
    offsets = np.linspace(half_fov, -half_fov, cfg.vis_width)
    heading = st.agent.heading
    dir_x = np.cos(heading + offsets)
    dir_y = np.sin(heading + offsets)

    mix = pack_sources(st.sources)
    # Force every source to loop so the render workload stays steady instead
    # of decaying once the one-shot cue finishes.
    mix.loops[:] = 1
    mix.active[:] = 1

    rng = np.random.default_rng(seed)
    block = 2520
    track = rng.normal(scale=0.3, size=66150)
    hot = rng.normal(scale=0.6, size=block)  # ~5% of samples beyond +-1

    return {
        "cfg": cfg,
        "agent": (st.agent.x, st.agent.y, heading),
        "walls": walls,
        "circles": circles,
        "circle_ids": circle_ids,
        "dir_x": dir_x,
        "dir_y": dir_y,
        "mix": mix,
        "block": block,
        "track": track,
        "hot": hot,
    }


def kernel_cases(w):
    """(name, runner) pairs; runner(backend, state) -> comparable outputs.

    Each case owns its mutable state via ``fresh()`` so both backends see
    the same starting point and repeated timing calls stay well defined.
    """
    cfg = w["cfg"]
    ax, ay, heading = w["agent"]
    block = w["block"]

    def case_render():
        def fresh():
            return copy.deepcopy(w["mix"]), np.zeros(block), np.zeros(block)

        def run(k, state):
            mix, out_l, out_r = state
            clamped = k.render_sources(
                mix.data, mix.offsets, mix.loops, mix.pos, mix.gains,
                mix.refs, mix.rolloffs, mix.maxds, mix.spatial,
                mix.playheads, mix.active, ax, ay, heading, out_l, out_r,
            )
            return clamped, out_l, out_r, mix.playheads, mix.active

        return fresh, run

    def case_mix_into():
        def fresh():
            return np.zeros(block), np.zeros(block)

        def run(k, state):
            out_l, out_r = state
            ph, alive = k.mix_into(out_l, out_r, w["track"], 63000, 0.4, 0.6, True)
            return ph, alive, out_l, out_r

        return fresh, run

    def case_clamp():
        def fresh():
            return (w["hot"].copy(), w["hot"][::-1].copy())

        def run(k, state):
            out_l, out_r = state
            return k.clamp_stereo(out_l, out_r), out_l, out_r

        return fresh, run

    def case_move():
        def run(k, _state):
            return k.move_agent(
                ax, ay, heading, 0, cfg.frameskip,
                cfg.agent_speed / cfg.tic_rate, math.radians(cfg.turn_step_deg),
                w["walls"], w["circles"], cfg.agent_radius,
            )

        return (lambda: None), run

    def case_raycast():
        def run(k, _state):
            return k.raycast(
                ax, ay, w["dir_x"], w["dir_y"], w["walls"], w["circles"],
                w["circle_ids"], cfg.ray_max_dist,
            )

        return (lambda: None), run

    def case_paint():
        ref = get_backend("python")
        ids, dists = ref.raycast(
            ax, ay, w["dir_x"], w["dir_y"], w["walls"], w["circles"],
            w["circle_ids"], cfg.ray_max_dist,
        )

        def fresh():
            return np.zeros((cfg.vis_height, cfg.vis_width), dtype=np.uint8)

        def run(k, out):
            k.paint_image(ids, dists, cfg.vis_height, cfg.wall_scale, out)
            return (out,)

        return fresh, run

    return [
        ("render_sources", *case_render()),
        ("mix_into", *case_mix_into()),
        ("clamp_stereo", *case_clamp()),
        ("move_agent", *case_move()),
        ("raycast", *case_raycast()),
        ("paint_image", *case_paint()),
    ]


def outputs_equal(a, b):
    if type(a) is not type(b) and not (
        isinstance(a, (int, float, np.generic)) and isinstance(b, (int, float, np.generic))
    ):
        return False
    if isinstance(a, tuple):
        return len(a) == len(b) and all(outputs_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.dtype == b.dtype and np.array_equal(a, b)
    return a == b


def bench_kernels(backends, calls, repeats):
    w = build_workloads(seed=7)
    rows = []
    all_equal = True
    for name, fresh, run in kernel_cases(w):
        outs = [run(get_backend(b), fresh()) for b in backends]
        equal = all(outputs_equal(outs[0], o) for o in outs[1:])
        all_equal &= equal

        times = {}
        for b in backends:
            k = get_backend(b)
            state = fresh()
            times[b] = best_time(lambda: run(k, state), calls, repeats)
        rows.append((name, times, equal))

    print(f"{'kernel':<16}", end="")
    for b in backends:
        print(f"{b:>13}", end="")
    if len(backends) > 1:
        print(f"{'speedup':>10}", end="")
    print("  bit-identical")
    for name, times, equal in rows:
        print(f"{name:<16}", end="")
        for b in backends:
            print(f"{times[b] * 1e6:>10.1f} us", end="")
        if len(backends) > 1:
            print(f"{times['python'] / times[backends[0]]:>9.1f}x", end="")
        print(f"  {'yes' if equal else 'NO'}")
    return all_equal


def bench_env(backends, steps):
    """Steps/s per backend on one env, plus a stream cross-check."""
    cfg = EnvConfig()
    actions = np.random.default_rng(3).integers(0, 5, size=steps)
    results = {}
    for b in backends:
        env = Env(cfg, kernels=get_backend(b))
        obs = env.reset(11)
        digests = [observation_digest(obs)]
        t0 = time.perf_counter()
        for i in range(steps):
            obs = env.step(int(actions[i]))
            digests.append(observation_digest(obs))
            if obs.done:
                obs = env.reset(11)
        wall = time.perf_counter() - t0
        results[b] = (steps / wall, digests)

    streams = [d for _, d in results.values()]
    match = all(s == streams[0] for s in streams[1:])
    print(f"\n{'env stepping':<16}", end="")
    for b in backends:
        print(f"{results[b][0]:>11.0f}/s", end="")
    if len(backends) > 1:
        print(f"{results[backends[0]][0] / results['python'][0]:>9.1f}x", end="")
    print(f"  {'yes' if match else 'NO'}")
    return match


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--calls", type=int, default=300,
                    help="kernel calls per timing batch (default 300)")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing batches per kernel, best wins (default 5)")
    ap.add_argument("--steps", type=int, default=2000,
                    help="env steps per backend (default 2000)")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("note: compiled kernels not built; timing the Python reference only")
    print(f"backends: {', '.join(backends)}\n")

    ok = bench_kernels(backends, args.calls, args.repeats)
    ok &= bench_env(backends, args.steps)
    if not ok:
        print("\nFAILED: backends disagree bit for bit")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
