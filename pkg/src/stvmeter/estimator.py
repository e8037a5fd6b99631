"""Transmittivity estimation and measurement budgets.

Four routes lead from up/down-stream state measurements to the sample
transmittivity T: the excess-variance ratio at one analysis phase, the
same ratio expressed through photon numbers, the total-photon-number
ratio (exactly proportional to T), and the per-channel photon ratios
inverted through their straight-line coefficients. All agree exactly on
noiseless inputs.

The budget half compares the photon dose and accuracy of this scheme
against a direct power measurement with a classical coherent beam on a
noisy detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .linfit import ols
from .states import (
    VACUUM_VARIANCE,
    LinearizationCoefficients,
    StvState,
    from_photon_numbers,
    photon_numbers,
    quadrature_variance,
    total_photons,
)

HBAR = 1.054571817e-34  # J*s

# Treat an upstream excess variance below this as vacuum: the ratio
# estimators lose all conditioning there.
DENOM_EPS = 1e-6

_METHODS = ("variance_ratio", "photon_ratio", "ntot_ratio", "nsq_ratio", "nth_ratio")

_SCHEMES = ("squeezed", "classical", "squeezed_plus_coherent")


class UnmeasurableError(ValueError):
    """The requested estimate has no finite answer at this operating point
    (vacuum upstream state, vanishing denominator, T -> 0 divergence)."""


@dataclass(frozen=True)
class TransmittivityEstimate:
    t_hat: float
    std_error: float
    method: str

    def __post_init__(self):
        if self.std_error < 0.0:
            raise ValueError("std_error must be non-negative")
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class ClassicalConfig:
    """Operating point of the classical coherent-beam measurement."""

    nep: float  # noise-equivalent power, W
    bandwidth_b: float  # detection bandwidth, Hz
    omega0: float  # optical angular frequency, rad/s
    snr: float  # P0 / NEP
    n_samples: int
    tau_s: float  # sampling interval, s

    def __post_init__(self):
        for name in ("nep", "bandwidth_b", "omega0", "snr", "tau_s"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")

    @property
    def shot_term(self) -> float:
        """hbar*omega0*B/(NEP*N): size of the shot-noise correction."""
        return HBAR * self.omega0 * self.bandwidth_b / (self.nep * self.n_samples)


@dataclass(frozen=True)
class ErrorBudget:
    rel_error: float
    photon_dose: float
    scheme: str

    def __post_init__(self):
        if self.rel_error < 0.0 or self.photon_dose < 0.0:
            raise ValueError("budget entries must be non-negative")
        base = self.scheme.split(":", 1)[0]
        if base not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")


def t_from_variances(
    var_phi_t: float,
    var_phi_0: float,
    d_var_t: float = 0.0,
    d_var_0: float = 0.0,
) -> TransmittivityEstimate:
    """T as the ratio of excess variances at one analysis phase.

    Both variances must be measured at the same phase and corrected to
    the same (pre-detection) frame. Confidence intervals, when given,
    propagate to first order.
    """
    v0 = var_phi_0 - VACUUM_VARIANCE
    if abs(v0) <= DENOM_EPS:
        raise UnmeasurableError(
            "upstream state indistinguishable from vacuum at this phase"
        )
    t_hat = (var_phi_t - VACUUM_VARIANCE) / v0
    std_error = math.hypot(d_var_t, t_hat * d_var_0) / abs(v0)
    return TransmittivityEstimate(t_hat, std_error, "variance_ratio")


def t_from_photon_numbers(
    n_th_t: float,
    n_sq_t: float,
    n_th_0: float,
    n_sq_0: float,
    phi: float,
) -> TransmittivityEstimate:
    """T from up/down-stream photon numbers at analysis phase phi.

    Equivalent to t_from_variances with the variances reconstructed from
    the photon numbers, and exactly consistent with it.
    """
    up = from_photon_numbers(n_th_0, n_sq_0)
    down = from_photon_numbers(n_th_t, n_sq_t)
    v0 = quadrature_variance(up, phi) - VACUUM_VARIANCE
    if abs(v0) <= DENOM_EPS:
        raise UnmeasurableError("upstream excess variance vanishes at this phase")
    t_hat = (quadrature_variance(down, phi) - VACUUM_VARIANCE) / v0
    return TransmittivityEstimate(t_hat, 0.0, "photon_ratio")


def t_from_ntot(
    ntot_t: float,
    ntot_0: float,
    d_ntot_t: float = 0.0,
    d_ntot_0: float = 0.0,
) -> TransmittivityEstimate:
    """T as the total-photon-number ratio (exact proportionality)."""
    if ntot_0 <= DENOM_EPS:
        raise UnmeasurableError("upstream total photon number is consistent with vacuum")
    t_hat = ntot_t / ntot_0
    std_error = math.hypot(d_ntot_t, t_hat * d_ntot_0) / ntot_0
    return TransmittivityEstimate(t_hat, std_error, "ntot_ratio")


def t_from_channel_ratio(
    ratio: float,
    coeffs: LinearizationCoefficients,
    channel: str,
    d_ratio: float = 0.0,
) -> TransmittivityEstimate:
    """Invert a per-channel photon ratio through its line A + B*t."""
    if channel == "th":
        a, b, method = coeffs.a_th, coeffs.b_th, "nth_ratio"
    elif channel == "sq":
        a, b, method = coeffs.a_sq, coeffs.b_sq, "nsq_ratio"
    else:
        raise ValueError("channel must be 'th' or 'sq'")
    if a is None or b is None:
        raise UnmeasurableError(f"channel {channel!r} has no ratio for this state")
    return TransmittivityEstimate((ratio - a) / b, d_ratio / abs(b), method)


def squeezed_accuracy(var_phi_0: float, t: float, n_samples: float) -> float:
    """Relative error on T for the excess-variance route, in closed form.

    Assumes the same number of samples up- and down-stream and Gaussian
    variance estimates with confidence sqrt(2/N)*variance.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    if t > 1.0:
        raise ValueError("transmittivity cannot exceed 1")
    if t <= 0.0:
        raise UnmeasurableError("relative error diverges as T -> 0")
    v0 = abs(var_phi_0 - VACUUM_VARIANCE)
    if v0 <= DENOM_EPS:
        raise UnmeasurableError("upstream state indistinguishable from vacuum")
    inner = (1.0 - 1.0 / t) ** 2 / 16.0 + 0.5 * v0 * (1.0 / t + 3.0 + 4.0 * v0)
    return math.sqrt(2.0 / n_samples) * math.sqrt(inner) / v0


def accuracy_from_confidences(
    var_phi_0: float, t: float, d_var_t: float, d_var_0: float
) -> float:
    """General first-order relative error on T from the two variance
    confidence intervals."""
    v0 = abs(var_phi_0 - VACUUM_VARIANCE)
    if v0 <= DENOM_EPS:
        raise UnmeasurableError("upstream state indistinguishable from vacuum")
    if t <= 0.0:
        raise UnmeasurableError("relative error diverges as T -> 0")
    return math.sqrt(d_var_t**2 / t**2 + d_var_0**2) / v0


def samples_for_target_accuracy(var_phi_0: float, t: float, target: float) -> float:
    """Samples needed for squeezed_accuracy to reach `target` (exact
    inverse of the closed form; not rounded)."""
    if target <= 0.0:
        raise ValueError("target relative error must be positive")
    v0 = abs(var_phi_0 - VACUUM_VARIANCE)
    if v0 <= DENOM_EPS:
        raise UnmeasurableError("upstream state indistinguishable from vacuum")
    if t <= 0.0:
        raise UnmeasurableError("relative error diverges as T -> 0")
    if t > 1.0:
        raise ValueError("transmittivity cannot exceed 1")
    inner = (1.0 - 1.0 / t) ** 2 / 16.0 + 0.5 * v0 * (1.0 / t + 3.0 + 4.0 * v0)
    return 2.0 * inner / (target * v0) ** 2


def squeezed_dose(state: StvState, n_samples: float, kappa_tau_s: float) -> float:
    """Photons through the sample: N_tot * N * kappa*tau_s."""
    if n_samples < 0 or kappa_tau_s <= 0.0:
        raise ValueError("sample count and kappa*tau_s must be positive")
    return total_photons(state) * n_samples * kappa_tau_s


def classical_accuracy(cfg: ClassicalConfig, t: float) -> float:
    """Relative error of the classical power-ratio measurement."""
    if not 0.0 < t <= 1.0:
        raise ValueError("transmittivity must lie in (0, 1]")
    z = cfg.shot_term
    down = (1.0 + math.sqrt(z * cfg.snr * t)) ** 2 / (t * t)
    up = (1.0 + math.sqrt(z * cfg.snr)) ** 2
    return math.sqrt(down + up) / cfg.snr


def limiting_snr(t: float, rel_error: float) -> float:
    """Minimum SNR for a target relative error, in the large-N limit."""
    if not 0.0 < t <= 1.0:
        raise ValueError("transmittivity must lie in (0, 1]")
    if rel_error <= 0.0:
        raise ValueError("target relative error must be positive")
    return math.sqrt(1.0 / (t * t) + 1.0) / rel_error


def classical_dose(cfg: ClassicalConfig) -> float:
    """Photons through the sample: SNR * (NEP/hbar*omega0) * N * tau_s."""
    return cfg.snr * cfg.nep / (HBAR * cfg.omega0) * cfg.n_samples * cfg.tau_s


def squeezed_coherent_bandwidth(state: StvState, theta: float) -> float:
    """Effective bandwidth factor B_eff/B when the state is mixed with a
    coherent beam at relative phase theta.

    Below 1 means the added noise is smaller than the coherent beam's own
    shot noise; the factor never falls below 1/2.
    """
    n_th, n_sq = photon_numbers(state)
    return (
        1.0
        + n_sq
        + n_th
        + 2.0 * n_sq * n_th
        + math.sqrt((1.0 + n_sq) * n_sq) * math.cos(2.0 * theta)
    )


def composite_transmittivity(t1: float, t_slab: float, t2: float) -> float:
    """Product of the interface and bulk transmittivities."""
    for name, value in (("t1", t1), ("t_slab", t_slab), ("t2", t2)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    return t1 * t_slab * t2


@dataclass(frozen=True)
class LinearFit:
    a: float
    b: float
    a_err: float
    b_err: float
    n_points: int


def fit_linear(t_values, ratios) -> LinearFit:
    """Ordinary least squares of ratios against t, with standard errors."""
    xs = [float(v) for v in t_values]
    ys = [float(v) for v in ratios]
    a, b, a_err, b_err = ols(xs, ys)
    return LinearFit(a, b, a_err, b_err, len(xs))
