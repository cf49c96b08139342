"""Command line front end.

Subcommands:

* ``run``      roll out episodes with a policy, optional trace/WAV dumps
* ``bench``    time a parallel batch and append a CSV row
* ``features`` encode a WAV file and write a feature dump
* ``audit``    replay fixed action scripts across worker layouts

Exit codes: 0 success, 1 runtime or I/O failure, 2 invalid configuration
(argparse errors also exit 2).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import _kernels
from .audio import load_wav_stereo, save_wav
from .dsp import (
    KIND_LOGFFT,
    KIND_MEL,
    KIND_STRIDE,
    AudioBuffer,
    encode_stereo,
    write_feature_dump,
)
from .errors import ConfigError, EchosimError
from .harness import (
    BatchConfig,
    append_bench_csv,
    determinism_audit,
    overhead_ratio,
    run_batch,
)
from .world import (
    SCENARIOS,
    TRACE_HEADER,
    Env,
    EnvConfig,
    episode_rollout,
    format_trace_row,
    load_config,
)

TRACK_BANK_ENV = "ECHOSIM_TRACK_BANK"

_ENCODER_KINDS = {"stride": KIND_STRIDE, "fft": KIND_LOGFFT, "mel": KIND_MEL}


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")


def _resolve_env_config(args) -> EnvConfig:
    cfg = EnvConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "scenario", None):
        overrides["scenario"] = args.scenario
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "track_bank", None):
        overrides["track_bank"] = args.track_bank
    elif not cfg.track_bank and os.environ.get(TRACK_BANK_ENV):
        overrides["track_bank"] = os.environ[TRACK_BANK_ENV]
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _echo_config(cfg: EnvConfig, out=None) -> None:
    # resolve the stream at call time so redirected stdout is honored
    out = out if out is not None else sys.stdout
    pairs = " ".join(
        f"{f.name}={getattr(cfg, f.name)}" for f in dataclasses.fields(EnvConfig)
    )
    print(f"config: {pairs}", file=out)
    print(f"kernels: {_kernels.get_backend().NAME}", file=out)


def _episode_path(path: str, index: int, total: int) -> str:
    if total == 1:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}_ep{index}{ext}"


def _cmd_run(args) -> int:
    cfg = _resolve_env_config(args)
    _echo_config(cfg)
    if args.dump_wav:
        os.makedirs(args.dump_wav, exist_ok=True)
    env = Env(cfg)
    successes = 0
    total_steps = 0
    for i in range(args.episodes):
        seed = cfg.seed + i
        trace_rows: list[str] = []
        audio_chunks: list[tuple[np.ndarray, np.ndarray]] = []

        def on_obs(step, action, obs):
            if action is not None:
                trace_rows.append(format_trace_row(step, action, obs))
            if args.dump_wav:
                n = env.step_samples
                audio_chunks.append(
                    (obs.audio.samples_left[-n:], obs.audio.samples_right[-n:])
                )

        result = episode_rollout(cfg, seed, args.policy, env=env, on_obs=on_obs)
        successes += int(result.return_ > 0)
        total_steps += result.steps
        print(
            f"episode seed={seed} return={result.return_} steps={result.steps} "
            f"tics={result.tics} touched={result.touched_id}"
        )
        if args.dump_trace:
            path = _episode_path(args.dump_trace, i, args.episodes)
            with open(path, "w", encoding="utf-8") as f:
                f.write(TRACE_HEADER + "\n")
                f.write("\n".join(trace_rows) + "\n")
            print(f"trace: {path}")
        if args.dump_wav:
            path = os.path.join(args.dump_wav, f"episode_{i:03d}_seed{seed}.wav")
            left = np.concatenate([c[0] for c in audio_chunks])
            right = np.concatenate([c[1] for c in audio_chunks])
            save_wav(AudioBuffer(left, right, cfg.sample_rate), path)
            print(f"wav: {path}")
    print(
        f"episodes={args.episodes} success_rate={successes / args.episodes:.3f} "
        f"mean_steps={total_steps / args.episodes:.1f}"
    )
    return 0


def _bench_once(cfg: EnvConfig, args, sound: bool):
    batch = BatchConfig(
        env_config=cfg,
        n_envs=args.envs,
        n_workers=args.workers,
        steps_per_env=args.steps,
        sound_enabled=sound,
        base_seed=cfg.seed,
        policy=args.policy,
    )
    report = run_batch(batch)
    print(
        f"bench scenario={report.scenario} envs={report.n_envs} "
        f"workers={report.n_workers} steps={report.steps_per_env} "
        f"frameskip={report.frameskip} sound={'on' if sound else 'off'} "
        f"frames={report.env_frames_total} wall={report.wall_seconds:.3f}s "
        f"fps={report.frames_per_second:.1f} saturation={report.saturation_count}"
    )
    if args.csv:
        append_bench_csv(args.csv, report)
    return report


def _cmd_bench(args) -> int:
    cfg = _resolve_env_config(args)
    _echo_config(cfg)
    if args.sound == "both":
        report_off = _bench_once(cfg, args, sound=False)
        report_on = _bench_once(cfg, args, sound=True)
        print(f"overhead_ratio={overhead_ratio(report_on, report_off):.3f}")
    else:
        _bench_once(cfg, args, sound=(args.sound == "on"))
    return 0


def _cmd_features(args) -> int:
    with open(args.wav, "rb") as f:
        data = f.read()
    buf = load_wav_stereo(data)
    kind = _ENCODER_KINDS[args.encoder]
    left, right = encode_stereo(buf, kind, stride=args.stride)
    rows, cols = write_feature_dump(args.out, kind, left, right)
    n = len(buf.samples_left)
    print(f"encoder={args.encoder} input_samples={n} sample_rate={buf.sample_rate}")
    if kind == KIND_MEL:
        print(f"shape: (2, {left.frames}, {left.n_mels})")
    else:
        print(f"shape: (2, {left.values.shape[0]})")
    print(f"wrote {args.out} ({rows} rows x {cols} cols)")
    return 0


def _cmd_audit(args) -> int:
    cfg = _resolve_env_config(args)
    _echo_config(cfg)
    result = determinism_audit(
        cfg,
        seeds=args.seeds,
        n_steps=args.steps,
        n_workers_list=args.workers,
        repeats=args.repeats,
        action_seed=args.action_seed,
        sound_enabled=(args.sound == "on"),
    )
    print(result.describe())
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echosim",
        description="Audio-first scenario simulator: rollouts, benchmarks, "
        "feature encoding, determinism audits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--scenario", choices=SCENARIOS)
        p.add_argument("--seed", type=int, help="base seed (default from config)")
        p.add_argument("--track-bank", help=f"track manifest (or ${TRACK_BANK_ENV})")

    p_run = sub.add_parser("run", help="roll out complete episodes")
    add_common(p_run)
    p_run.add_argument("--episodes", type=_positive_int, default=1)
    p_run.add_argument(
        "--policy", choices=("noop", "random", "oracle"), default="oracle"
    )
    p_run.add_argument("--dump-trace", help="write per-step trace CSV")
    p_run.add_argument(
        "--dump-wav", metavar="DIR", help="write each episode's rendered audio here"
    )
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="measure batch throughput")
    add_common(p_bench)
    p_bench.add_argument("--envs", type=_positive_int, default=8)
    p_bench.add_argument("--workers", type=_positive_int, default=4)
    p_bench.add_argument("--steps", type=_positive_int, default=200)
    p_bench.add_argument("--sound", choices=("on", "off", "both"), default="on")
    p_bench.add_argument(
        "--policy", choices=("noop", "random", "oracle"), default="random"
    )
    p_bench.add_argument("--csv", help="append a result row to this CSV")
    p_bench.set_defaults(func=_cmd_bench)

    p_feat = sub.add_parser("features", help="encode a WAV into a feature dump")
    p_feat.add_argument("--wav", required=True, help="input WAV (PCM16 or float32)")
    p_feat.add_argument("--encoder", choices=sorted(_ENCODER_KINDS), required=True)
    p_feat.add_argument("--out", required=True, help="feature dump path")
    p_feat.add_argument("--stride", type=_positive_int, default=8)
    p_feat.set_defaults(func=_cmd_features)

    p_audit = sub.add_parser("audit", help="cross-layout determinism check")
    add_common(p_audit)
    p_audit.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3])
    p_audit.add_argument("--steps", type=_positive_int, default=50)
    p_audit.add_argument("--workers", type=_int_list, default=[1, 4])
    p_audit.add_argument("--repeats", type=_positive_int, default=2)
    p_audit.add_argument("--action-seed", type=int, default=0)
    p_audit.add_argument("--sound", choices=("on", "off"), default="on")
    p_audit.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EchosimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
