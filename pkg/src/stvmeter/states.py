"""Squeezed-thermal-vacuum state algebra.

A state is a zero-mean Gaussian field mode described either by its
principal quadrature variances (var_x, var_y) or by the equivalent photon
numbers (n_th, n_sq): a thermal background of n_th photons squeezed so
that n_sq photons sit in the squeezing. The vacuum quadrature variance is
1/4 throughout (quadrature X_phi = (a e^{-i phi} + a' e^{i phi})/2).

Everything here is a pure function of immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .linfit import ols

VACUUM_VARIANCE = 0.25

# Absolute slack on 16*var_x*var_y >= 1, absorbing roundoff from upstream
# spectral formulas.
PHYSICALITY_TOL = 1e-9


@dataclass(frozen=True)
class StvState:
    """Principal quadrature variances of a squeezed thermal vacuum state.

    Parameters
    ----------
    var_x, var_y : float
        Variances along the principal axes (vacuum = 1/4).
    orientation : float, optional
        Angle (radians) of the var_x principal axis relative to the
        phi = 0 measurement axis.
    """

    var_x: float
    var_y: float
    orientation: float = 0.0

    def __post_init__(self):
        if not (self.var_x > 0.0 and self.var_y > 0.0):
            raise ValueError("quadrature variances must be positive")
        if 16.0 * self.var_x * self.var_y < 1.0 - PHYSICALITY_TOL:
            raise ValueError(
                "unphysical state: 16*var_x*var_y = "
                f"{16.0 * self.var_x * self.var_y:.12g} < 1"
            )


@dataclass(frozen=True)
class PRepresentationParams:
    """Excess variances (var - 1/4) parameterizing the state's P function.

    A squeezed axis has negative excess; the hard floor -1/4 corresponds
    to a vanishing physical variance.
    """

    excess_x: float
    excess_y: float

    def __post_init__(self):
        if self.excess_x < -VACUUM_VARIANCE or self.excess_y < -VACUUM_VARIANCE:
            raise ValueError("excess variances cannot fall below -1/4")

    @classmethod
    def from_state(cls, state: StvState) -> "PRepresentationParams":
        return cls(state.var_x - VACUUM_VARIANCE, state.var_y - VACUUM_VARIANCE)

    def to_state(self, orientation: float = 0.0) -> StvState:
        return StvState(
            VACUUM_VARIANCE + self.excess_x,
            VACUUM_VARIANCE + self.excess_y,
            orientation,
        )


def photon_numbers(state: StvState) -> tuple[float, float]:
    """Thermal and squeezed photon numbers (n_th, n_sq) of a state.

    n_th = 2*(sqrt(var_x*var_y) - 1/4)
    n_sq = (sqrt(var_x/var_y) + sqrt(var_y/var_x) - 2)/4

    Both are clamped at 0 when roundoff drives them infinitesimally
    negative; a state violating the uncertainty bound beyond tolerance is
    rejected by the StvState constructor already.
    """
    vx, vy = state.var_x, state.var_y
    n_th = 2.0 * (math.sqrt(vx * vy) - VACUUM_VARIANCE)
    ratio = math.sqrt(vx / vy)
    n_sq = (ratio + 1.0 / ratio - 2.0) / 4.0
    return max(n_th, 0.0), max(n_sq, 0.0)


def from_photon_numbers(n_th: float, n_sq: float, orientation: float = 0.0) -> StvState:
    """Build the state with the given photon numbers, squeezing along y."""
    if n_th < 0.0 or n_sq < 0.0:
        raise ValueError("photon numbers must be non-negative")
    base = (2.0 * n_th + 1.0) / 4.0
    spread = 2.0 * math.sqrt((1.0 + n_sq) * n_sq)
    var_x = base * (1.0 + 2.0 * n_sq + spread)
    var_y = base * (1.0 + 2.0 * n_sq - spread)
    return StvState(var_x, var_y, orientation)


def total_photons(state: StvState) -> float:
    """Mean total photon number n_sq + n_th + 2*n_sq*n_th."""
    n_th, n_sq = photon_numbers(state)
    return n_sq + n_th + 2.0 * n_sq * n_th


def quadrature_variance(state: StvState, phi: float) -> float:
    """Variance of the quadrature at measurement angle phi.

    Evaluates (var_x+var_y)/2 + (var_x-var_y)/2 * cos(2*(phi-orientation)),
    which interpolates the principal variances and reduces to the photon
    number form (2n_th+1)/4 * (1 + 2n_sq + 2*sqrt((1+n_sq)*n_sq)*cos 2phi)
    when var_x >= var_y.
    """
    mean = 0.5 * (state.var_x + state.var_y)
    half_diff = 0.5 * (state.var_x - state.var_y)
    return mean + half_diff * math.cos(2.0 * (phi - state.orientation))


def apply_loss(state: StvState, t: float) -> StvState:
    """Propagate through a beam splitter of transmittivity t.

    Each principal excess variance scales by t; total_photons scales by t
    exactly. The output of a physical input is always physical.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("transmittivity must lie in [0, 1]")
    return StvState(
        VACUUM_VARIANCE + t * (state.var_x - VACUUM_VARIANCE),
        VACUUM_VARIANCE + t * (state.var_y - VACUUM_VARIANCE),
        state.orientation,
    )


def downstream_photon_numbers(n_th0: float, n_sq0: float, t: float) -> tuple[float, float]:
    """Photon numbers after propagation at transmittivity t, in closed form.

    Independent of the variance route (apply_loss then photon_numbers);
    the two agree to roundoff and are cross-checked in tests.
    """
    if n_th0 < 0.0 or n_sq0 < 0.0:
        raise ValueError("photon numbers must be non-negative")
    if not 0.0 <= t <= 1.0:
        raise ValueError("transmittivity must lie in [0, 1]")
    s = 1.0 - t + t * (1.0 + 2.0 * n_th0) * (1.0 + 2.0 * n_sq0)
    p = 2.0 * t * (1.0 + 2.0 * n_th0) * math.sqrt((1.0 + n_sq0) * n_sq0)
    # s^2 - p^2 = (2*n_th_T + 1)^2 >= 1 analytically; guard roundoff
    root = math.sqrt(max(s * s - p * p, 1.0))
    n_th_t = (root - 1.0) / 2.0
    n_sq_t = (s / root - 1.0) / 2.0
    return max(n_th_t, 0.0), max(n_sq_t, 0.0)


@dataclass(frozen=True)
class LinearizationCoefficients:
    """Straight-line coefficients ratio ~= A + B*t for each photon channel.

    A channel whose reference photon number vanishes has no ratio; its
    coefficients are None and `channel_errors` carries the reason.
    """

    a_th: float | None
    b_th: float | None
    a_sq: float | None
    b_sq: float | None
    channel_errors: dict[str, str]


def linearization_coefficients(
    n_th0: float,
    n_sq0: float,
    fit_range: tuple[float, float] = (0.5, 0.8),
    n_points: int = 101,
) -> LinearizationCoefficients:
    """Fit n_th,T/n_th,0 and n_sq,T/n_sq,0 against t by least squares.

    The downstream photon numbers are almost but not exactly linear in t,
    so the coefficients depend (weakly) on the fit window. The default
    window [0.5, 0.8] covers the mid-range transmittivities where the
    tabulated reference coefficients for the (0.55, 0.11) source were
    taken; widen it to match whatever range a measurement actually spans.
    """
    if n_th0 < 0.0 or n_sq0 < 0.0:
        raise ValueError("photon numbers must be non-negative")
    lo, hi = fit_range
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError("fit_range must satisfy 0 <= lo < hi <= 1")
    if n_points < 2:
        raise ValueError("need at least two grid points")

    ts = [lo + (hi - lo) * i / (n_points - 1) for i in range(n_points)]
    errors: dict[str, str] = {}
    results: dict[str, tuple[float, float]] = {}
    for channel, ref in (("th", n_th0), ("sq", n_sq0)):
        if ref == 0.0:
            errors[channel] = f"n_{channel},0 = 0: ratio undefined"
            continue
        pairs = [downstream_photon_numbers(n_th0, n_sq0, t) for t in ts]
        ratios = [(p[0] if channel == "th" else p[1]) / ref for p in pairs]
        a, b, _, _ = ols(ts, ratios)
        results[channel] = (a, b)

    th = results.get("th", (None, None))
    sq = results.get("sq", (None, None))
    return LinearizationCoefficients(th[0], th[1], sq[0], sq[1], errors)
