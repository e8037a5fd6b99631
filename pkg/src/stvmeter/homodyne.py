"""Monte Carlo homodyne detection of a Gaussian state.

Samples quadrature outcomes x at local-oscillator phases theta from an
StvState through a lossy detector: efficiency eta acts as a beam splitter
mixing in vacuum (variance map v -> eta*v + (1-eta)/4), and an optional
additive electronic-noise floor is parameterized by its clearance below
shot noise in dB.

Determinism contract: the stream of samples is a pure function of
(state, config) including the seed. Internally the sample index range is
split into fixed-size chunks and every chunk derives its own RNG from
(seed, stream, chunk), so the output does not depend on how many workers
produced it or in what order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .states import StvState, from_photon_numbers, photon_numbers, quadrature_variance

TWO_PI = 2.0 * math.pi

# Fixed chunking of the sample index space; part of the determinism
# contract, do not change casually.
CHUNK = 1 << 18

_STREAM_X = 0
_STREAM_PHASE = 1
_STREAM_JITTER = 2

# Electronic-noise clearance applied when a config enables the noise
# floor without giving a figure.
DEFAULT_ELECTRONIC_CLEARANCE_DB = 15.0


@dataclass(frozen=True)
class FixedPhase:
    """Hold the local oscillator at one phase."""

    phi: float


@dataclass(frozen=True)
class UniformScan:
    """Scan the local oscillator over [0, 2pi).

    Default is N equally spaced phases plus a seed-dependent global
    offset, which covers the circle exactly; iid=True draws independent
    uniform phases instead (useful for validating variance formulas that
    assume independent phases).
    """

    iid: bool = False


@dataclass(frozen=True)
class DetectionConfig:
    eta: float
    n_samples: int
    tau_s: float
    phase_strategy: FixedPhase | UniformScan
    electronic_noise_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0, 1]")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.tau_s <= 0.0:
            raise ValueError("tau_s must be positive")
        if self.electronic_noise_db is not None and self.electronic_noise_db <= 0.0:
            raise ValueError("electronic noise clearance must be positive (dB)")
        if not isinstance(self.phase_strategy, (FixedPhase, UniformScan)):
            raise ValueError("phase_strategy must be FixedPhase or UniformScan")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class QuadratureSample:
    x: float
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta < TWO_PI:
            raise ValueError("theta must lie in [0, 2pi)")


class SampleBatch:
    """Columnar batch of quadrature samples (theta, x)."""

    __slots__ = ("theta", "x")

    def __init__(self, theta, x):
        theta = np.asarray(theta, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if theta.shape != x.shape or theta.ndim != 1:
            raise ValueError("theta and x must be equal-length vectors")
        self.theta = theta
        self.x = x

    def __len__(self):
        return self.x.size

    def __getitem__(self, index):
        if isinstance(index, slice):
            return SampleBatch(self.theta[index], self.x[index])
        return QuadratureSample(float(self.x[index]), float(self.theta[index]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class VarianceEstimate:
    """Unbiased sample variance with its own 1-sigma confidence value."""

    value: float
    confidence: float
    n_used: int


@dataclass(frozen=True)
class JitterConfig:
    """Synthetic block-to-block gain fluctuation (diagnostic only).

    Each block of `block_size` consecutive samples sees the squeezed
    photon number multiplied by an independent factor 1 + gain_jitter_rel*z
    (z standard normal, clipped so the multiplier stays non-negative),
    which turns the output into a mixture of Gaussians with positive
    excess kurtosis.
    """

    gain_jitter_rel: float
    block_size: int

    def __post_init__(self):
        if self.gain_jitter_rel < 0.0:
            raise ValueError("gain_jitter_rel must be non-negative")
        if self.block_size < 1:
            raise ValueError("block_size must be at least 1")


def _rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream, chunk))
    return np.random.Generator(np.random.PCG64(ss))


def electronic_noise_variance(cfg: DetectionConfig) -> float:
    """Additive noise-floor variance implied by the configured clearance."""
    if cfg.electronic_noise_db is None:
        return 0.0
    return 0.25 * 10.0 ** (-cfg.electronic_noise_db / 10.0)


def detected_variance(state: StvState, cfg: DetectionConfig, theta) -> np.ndarray:
    """Variance of the detected quadrature at phase(s) theta."""
    theta = np.asarray(theta, dtype=np.float64)
    mean = 0.5 * (state.var_x + state.var_y)
    half_diff = 0.5 * (state.var_x - state.var_y)
    true_var = mean + half_diff * np.cos(2.0 * (theta - state.orientation))
    return cfg.eta * true_var + (1.0 - cfg.eta) * 0.25 + electronic_noise_variance(cfg)


def _phases(cfg: DetectionConfig, start: int, stop: int) -> np.ndarray:
    strategy = cfg.phase_strategy
    n = cfg.n_samples
    if isinstance(strategy, FixedPhase):
        return np.full(stop - start, strategy.phi % TWO_PI)
    if strategy.iid:
        chunk = start // CHUNK
        return _rng(cfg.seed, _STREAM_PHASE, chunk).uniform(0.0, TWO_PI, stop - start)
    offset = _rng(cfg.seed, _STREAM_PHASE, 0).uniform(0.0, TWO_PI)
    j = np.arange(start, stop, dtype=np.float64)
    return (offset + TWO_PI * j / n) % TWO_PI


def _chunk_ranges(n: int):
    for start in range(0, n, CHUNK):
        yield start, min(start + CHUNK, n)


def sample(state: StvState, cfg: DetectionConfig) -> SampleBatch:
    """Draw N homodyne samples from the state through the detector model."""
    n = cfg.n_samples
    theta = np.empty(n, dtype=np.float64)
    x = np.empty(n, dtype=np.float64)
    for start, stop in _chunk_ranges(n):
        th = _phases(cfg, start, stop)
        sigma = np.sqrt(detected_variance(state, cfg, th))
        z = _rng(cfg.seed, _STREAM_X, start // CHUNK).standard_normal(stop - start)
        theta[start:stop] = th
        x[start:stop] = sigma * z
    return SampleBatch(theta, x)


def inject_jitter(state: StvState, jitter: JitterConfig, cfg: DetectionConfig) -> SampleBatch:
    """Sample with block-wise gain fluctuation of the squeezed photons.

    Uses the same noise stream as `sample`, so gain_jitter_rel = 0
    reproduces its output exactly.
    """
    n = cfg.n_samples
    n_th, n_sq = photon_numbers(state)
    n_blocks = (n + jitter.block_size - 1) // jitter.block_size
    gains = 1.0 + jitter.gain_jitter_rel * _rng(
        cfg.seed, _STREAM_JITTER, 0
    ).standard_normal(n_blocks)
    np.clip(gains, 0.0, None, out=gains)

    block_var_x = np.empty(n_blocks, dtype=np.float64)
    block_var_y = np.empty(n_blocks, dtype=np.float64)
    for b in range(n_blocks):
        s = from_photon_numbers(n_th, n_sq * gains[b], state.orientation)
        block_var_x[b] = s.var_x
        block_var_y[b] = s.var_y

    theta = np.empty(n, dtype=np.float64)
    x = np.empty(n, dtype=np.float64)
    noise_floor = (1.0 - cfg.eta) * 0.25 + electronic_noise_variance(cfg)
    for start, stop in _chunk_ranges(n):
        th = _phases(cfg, start, stop)
        blocks = np.arange(start, stop) // jitter.block_size
        mean = 0.5 * (block_var_x[blocks] + block_var_y[blocks])
        half_diff = 0.5 * (block_var_x[blocks] - block_var_y[blocks])
        true_var = mean + half_diff * np.cos(2.0 * (th - state.orientation))
        sigma = np.sqrt(cfg.eta * true_var + noise_floor)
        z = _rng(cfg.seed, _STREAM_X, start // CHUNK).standard_normal(stop - start)
        theta[start:stop] = th
        x[start:stop] = sigma * z
    return SampleBatch(theta, x)


def mixture_kurtosis(state: StvState, jitter: JitterConfig, cfg: DetectionConfig) -> float:
    """Excess kurtosis the jittered sampler should show, from its own
    realized per-sample variances: K = 3*(E[v^2]/E[v]^2 - 1).

    Only meaningful for a fixed-phase config (with scanned phases the
    variance also varies within a block)."""
    if not isinstance(cfg.phase_strategy, FixedPhase):
        raise ValueError("mixture kurtosis is defined for fixed-phase sampling only")
    n = cfg.n_samples
    n_th, n_sq = photon_numbers(state)
    n_blocks = (n + jitter.block_size - 1) // jitter.block_size
    gains = 1.0 + jitter.gain_jitter_rel * _rng(
        cfg.seed, _STREAM_JITTER, 0
    ).standard_normal(n_blocks)
    np.clip(gains, 0.0, None, out=gains)
    counts = np.full(n_blocks, jitter.block_size, dtype=np.float64)
    if n % jitter.block_size:
        counts[-1] = n % jitter.block_size
    variances = np.empty(n_blocks, dtype=np.float64)
    for b in range(n_blocks):
        s = from_photon_numbers(n_th, n_sq * gains[b], state.orientation)
        variances[b] = detected_variance(s, cfg, _phases(cfg, 0, 1))[0]
    w = counts / counts.sum()
    mean_v = float(np.sum(w * variances))
    mean_v2 = float(np.sum(w * variances**2))
    return 3.0 * (mean_v2 / mean_v**2 - 1.0)


def _window_mask(theta: np.ndarray, phase_window) -> np.ndarray:
    lo, hi = phase_window
    lo %= TWO_PI
    hi %= TWO_PI
    if lo <= hi:
        return (theta >= lo) & (theta < hi)
    return (theta >= lo) | (theta < hi)


def _windowed_x(samples: SampleBatch, phase_window) -> np.ndarray:
    if phase_window is None:
        return samples.x
    return samples.x[_window_mask(samples.theta, phase_window)]


def sample_variance(samples: SampleBatch, phase_window=None) -> VarianceEstimate:
    """Unbiased variance of the x values (optionally phase-windowed) with
    the 1-sigma confidence sqrt(2/N)*variance of a Gaussian variance
    estimate."""
    x = _windowed_x(samples, phase_window)
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples in the phase window")
    _, m2, _ = kernels.central_moments(x)
    var = m2 * n / (n - 1)
    return VarianceEstimate(var, math.sqrt(2.0 / n) * var, n)


def kurtosis(samples: SampleBatch, phase_window=None) -> float:
    """Excess kurtosis m4/m2^2 - 3 of the (windowed) x values."""
    x = _windowed_x(samples, phase_window)
    if x.size < 4:
        raise ValueError("kurtosis needs at least four samples")
    _, m2, m4 = kernels.central_moments(x)
    if m2 == 0.0:
        raise ValueError("kurtosis undefined for zero-variance data")
    return m4 / (m2 * m2) - 3.0


SAMPLES_CSV_HEADER = ["theta", "x"]


def save_samples_csv(samples: SampleBatch, path) -> None:
    """Write samples as CSV `theta,x` at full float round-trip precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLES_CSV_HEADER)
        for th, xv in zip(samples.theta, samples.x):
            writer.writerow([repr(float(th)), repr(float(xv))])


def load_samples_csv(path) -> SampleBatch:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SAMPLES_CSV_HEADER:
            raise ValueError(f"unexpected sample CSV header: {header}")
        theta = []
        x = []
        for row in reader:
            theta.append(float(row[0]))
            x.append(float(row[1]))
    return SampleBatch(np.array(theta), np.array(x))
