"""Pattern-function estimation of quadrature moments from phase scans.

Every sample contributes a kernel value whose average is an unbiased
estimate of the quadrature variance at an arbitrary analysis phase,
provided the sample phases cover [0, 2pi) uniformly. The kernel inverts
the detector's vacuum admixture, so estimates refer to the state BEFORE
detection losses; eta is quoted separately by callers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .homodyne import SampleBatch, sample_variance
from .linfit import ols
from .states import (
    PHYSICALITY_TOL,
    VACUUM_VARIANCE,
    StvState,
    photon_numbers,
    total_photons,
)

# Below this many samples the variance of the kernel average is not a
# useful confidence figure.
MIN_SCAN_SAMPLES = 100


@dataclass(frozen=True)
class KernelEstimate:
    value: float
    std_error: float
    n_used: int

    def __post_init__(self):
        if self.std_error < 0.0:
            raise ValueError("std_error must be non-negative")
        if self.n_used < 2:
            raise ValueError("n_used must be at least 2")


def kernel_second_moment(x, theta, phi, eta):
    """Single-sample kernel for the quadrature variance at phase phi.

    R = (x^2 * (1 + 2*cos(2*(theta - phi))) - (1 - eta)/4) / eta

    Averaged over uniformly scanned phases this is unbiased for the
    pre-detection variance at analysis phase phi under the beam-splitter
    efficiency model. Accepts scalars or equal-length arrays.
    """
    scalar = np.isscalar(x) and np.isscalar(theta)
    values = kernels.kernel_values(
        np.atleast_1d(np.asarray(x, dtype=np.float64)),
        np.atleast_1d(np.asarray(theta, dtype=np.float64)),
        phi,
        eta,
    )
    return float(values[0]) if scalar else values


def estimate_variance(samples: SampleBatch, phi: float, eta: float) -> KernelEstimate:
    """Average the kernel over a phase-scanned batch.

    value is the kernel mean; std_error is the sample standard deviation
    of the kernel values divided by sqrt(N).
    """
    n = len(samples)
    if n < MIN_SCAN_SAMPLES:
        raise ValueError(f"need at least {MIN_SCAN_SAMPLES} phase-scanned samples")
    if np.ptp(samples.theta) == 0.0:
        raise ValueError(
            "samples were taken at a fixed phase; use homodyne.sample_variance "
            "for fixed-phase variance estimation"
        )
    r = kernels.kernel_values(samples.x, samples.theta, phi, eta)
    mean, m2, _ = kernels.central_moments(r)
    std = math.sqrt(m2 * n / (n - 1))
    return KernelEstimate(mean, std / math.sqrt(n), n)


@dataclass(frozen=True)
class KernelVarianceCoefficients:
    """Coefficients of the closed-form kernel variance
    c0 + c1*cos(2*phi) + c2*cos(4*phi)."""

    c0: float
    c1: float
    c2: float

    def __post_init__(self):
        if self.c2 < -1e-12:
            raise ValueError("c2 is a squared amplitude and cannot be negative")


def kernel_variance_coefficients(
    state_observed: StvState, eta: float
) -> KernelVarianceCoefficients:
    """Closed-form phase-dependence coefficients of the kernel variance.

    Takes the true (pre-detection) principal variances of the observed
    state; the detection efficiency enters explicitly.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must be in (0, 1]")
    vx, vy = state_observed.var_x, state_observed.var_y
    c0 = 0.25 * (
        13.5 * (vx * vx + vy * vy)
        + 9.0 * vx * vy
        + (1.0 - 3.0 / eta) * (vx + vy)
        + 0.25 * (3.0 / (eta * eta) - 2.0 / eta + 1.0)
    )
    c1 = 0.5 * (vx - vy) * (3.0 * (vx + vy) - 1.0)
    c2 = 0.375 * (vx - vy) ** 2
    return KernelVarianceCoefficients(c0, c1, c2)


def kernel_variance_closed_form(state_observed: StvState, phi: float, eta: float) -> float:
    """Closed-form kernel variance at analysis phase phi."""
    c = kernel_variance_coefficients(state_observed, eta)
    return c.c0 + c.c1 * math.cos(2.0 * phi) + c.c2 * math.cos(4.0 * phi)


@dataclass(frozen=True)
class StateEstimate:
    """Tomographic state reconstruction with first-order error propagation.

    `clamped` marks estimates whose raw variances violated the
    uncertainty bound and were scaled back to the boundary (preserving
    their ratio); downstream consumers must not treat such a point as a
    free measurement of n_th (it is zero by construction there).
    """

    state: StvState
    var_x_err: float
    var_y_err: float
    n_th: float
    n_sq: float
    n_tot: float
    n_th_err: float
    n_sq_err: float
    n_tot_err: float
    clamped: bool
    n_used: int


def _clamp_to_physical(vx: float, vy: float) -> tuple[float, float, bool]:
    if vx > 0.0 and vy > 0.0:
        if 16.0 * vx * vy >= 1.0 - PHYSICALITY_TOL:
            return vx, vy, False
        scale = 1.0 / (4.0 * math.sqrt(vx * vy))
        return vx * scale, vy * scale, True
    # A non-positive variance estimate carries no usable shape information;
    # fall back to the boundary state nearest to whatever survives.
    if vx > 0.0:
        return vx, 1.0 / (16.0 * vx), True
    if vy > 0.0:
        return 1.0 / (16.0 * vy), vy, True
    return VACUUM_VARIANCE, VACUUM_VARIANCE, True


def _fit_orientation(samples: SampleBatch, n_bins: int = 64) -> float:
    """Phase of the cos(2 theta) modulation of the binned second moment."""
    bins = (samples.theta / (2.0 * math.pi) * n_bins).astype(np.int64) % n_bins
    sums = np.bincount(bins, weights=samples.x**2, minlength=n_bins)
    counts = np.bincount(bins, minlength=n_bins)
    valid = counts > 1
    second = sums[valid] / counts[valid]
    centers = (np.arange(n_bins)[valid] + 0.5) * 2.0 * math.pi / n_bins
    c = float(np.mean(second * np.cos(2.0 * centers))) * 2.0
    s = float(np.mean(second * np.sin(2.0 * centers))) * 2.0
    return 0.5 * math.atan2(s, c)


def estimate_state(
    samples: SampleBatch, eta: float, fit_orientation: bool = False
) -> StateEstimate:
    """Reconstruct the state's Gaussian parameters from a phase scan.

    Estimates the principal variances at phi = orientation and
    orientation + pi/2 (orientation 0 unless fit_orientation is set),
    converts them to photon numbers, and propagates the kernel confidence
    intervals to first order. Unphysical variance pairs are clamped to
    the uncertainty boundary and flagged, never returned raw.
    """
    orientation = _fit_orientation(samples) if fit_orientation else 0.0
    ex = estimate_variance(samples, orientation, eta)
    ey = estimate_variance(samples, orientation + math.pi / 2.0, eta)
    vx, vy, clamped = _clamp_to_physical(ex.value, ey.value)
    state = StvState(vx, vy, orientation)
    n_th, n_sq = photon_numbers(state)
    n_tot = total_photons(state)

    sx, sy = ex.std_error, ey.std_error
    dn_th_dvx = math.sqrt(vy / vx)
    dn_th_dvy = math.sqrt(vx / vy)
    root = math.sqrt(vx / vy)
    dn_sq_dvx = (root - 1.0 / root) / (8.0 * vx)
    dn_sq_dvy = (1.0 / root - root) / (8.0 * vy)
    n_th_err = math.hypot(dn_th_dvx * sx, dn_th_dvy * sy)
    n_sq_err = math.hypot(dn_sq_dvx * sx, dn_sq_dvy * sy)
    # identity: n_tot = var_x + var_y - 1/2
    n_tot_err = math.hypot(sx, sy)

    return StateEstimate(
        state=state,
        var_x_err=sx,
        var_y_err=sy,
        n_th=n_th,
        n_sq=n_sq,
        n_tot=n_tot,
        n_th_err=n_th_err,
        n_sq_err=n_sq_err,
        n_tot_err=n_tot_err,
        clamped=clamped,
        n_used=len(samples),
    )


def phase_averaged_variance(samples: SampleBatch, eta: float, n_phases: int = 32) -> float:
    """Mean over analysis phases of the estimated quadrature variance.

    For any state this converges to (2n_th+1)(2n_sq+1)/4, the
    phase-averaged variance.
    """
    phis = np.linspace(0.0, math.pi, n_phases, endpoint=False)
    return float(
        np.mean([estimate_variance(samples, float(p), eta).value for p in phis])
    )


ESTIMATES_CSV_HEADER = ["quantity", "value", "std_error", "n"]


def write_estimates_csv(rows, path) -> None:
    """Write (quantity, value, std_error, n) rows.

    `rows` is an iterable of 4-tuples; floats are rendered at full
    round-trip precision.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ESTIMATES_CSV_HEADER)
        for quantity, value, std_error, n in rows:
            writer.writerow([quantity, repr(float(value)), repr(float(std_error)), int(n)])


# re-exported for callers estimating at a fixed phase
__all__ = [
    "KernelEstimate",
    "KernelVarianceCoefficients",
    "StateEstimate",
    "estimate_state",
    "estimate_variance",
    "kernel_second_moment",
    "kernel_variance_closed_form",
    "kernel_variance_coefficients",
    "phase_averaged_variance",
    "sample_variance",
    "write_estimates_csv",
]
