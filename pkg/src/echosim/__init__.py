"""echosim: a deterministic audio-first scenario simulator.

Software-rendered positional audio, a raycast visual channel, and simple
kinematics run in lock step with a tic clock, decoupled from wall time, so
batches of environments can be stepped as fast as the host allows while
every observation stays a pure function of (config, seed, actions).
"""

from . import _kernels
from .audio import (
    DEFAULT_SAMPLE_RATE,
    DEFAULT_TIC_RATE,
    ListenerPose,
    MixState,
    RenderParams,
    SoundSource,
    SoundTrack,
    attenuation_gain,
    default_track_bank,
    load_track_bank,
    load_wav,
    load_wav_stereo,
    pack_sources,
    pan_gains,
    render_packed,
    render_step,
    resample_linear,
    samples_per_step,
    save_wav,
    synth_track,
)
from .dsp import (
    KIND_LOGFFT,
    KIND_MEL,
    KIND_STRIDE,
    LOG_FLOOR,
    AudioBuffer,
    FeatureVector,
    MelSpectrogram,
    build_mel_filterbank,
    encode_channel,
    encode_stereo,
    fft_log_magnitude,
    hz_to_mel,
    maxpool_1d,
    mel_spectrogram,
    mel_to_hz,
    read_feature_dump,
    stft_geometry,
    stride_downsample,
    write_feature_dump,
)
from .errors import (
    BatchError,
    ComparisonError,
    ConfigError,
    EchosimError,
    EpisodeDoneError,
    ShapeError,
    WavParseError,
)
from .harness import (
    BENCH_CSV_HEADER,
    AuditResult,
    BatchConfig,
    BenchReport,
    append_bench_csv,
    determinism_audit,
    episode_seed,
    overhead_ratio,
    run_batch,
)
from .world import (
    ACTION_NAMES,
    SCENARIOS,
    TRACE_HEADER,
    Action,
    Arena,
    Env,
    EnvConfig,
    EpisodeResult,
    NoopPolicy,
    Observation,
    OraclePolicy,
    RandomPolicy,
    build_arena,
    config_from_mapping,
    episode_rollout,
    format_trace_row,
    load_config,
    make_policy,
    observation_digest,
    save_config,
)

__version__ = "0.1.0"
