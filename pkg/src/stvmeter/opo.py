"""Below-threshold optical parametric oscillator output spectra.

Computes the principal quadrature variances of the cavity output at an
analysis frequency offset, as functions of the mirror/crystal damping
rates, parametric gain, and detuning. All rates are normalized to the
total damping kappa = kappa1 + kappa2 at construction, so gamma, psi and
omega are handled in units of kappa internally regardless of the input
scale.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .states import StvState, photon_numbers, total_photons

# Reject evaluation when the spectral denominator collapses (operating
# point at/above the threshold resonance).
DENOMINATOR_GUARD = 1e-12

SWEEP_CSV_HEADER = ["kappa1_over_kappa", "psi", "E", "omega", "n_th", "n_sq", "N_tot"]


@dataclass(frozen=True)
class OpoParams:
    """Cavity and gain parameters, stored normalized to kappa = 1.

    kappa1 is the damping rate of the useful output mirror, kappa2 the
    rate of the second mirror plus internal losses, gamma the parametric
    gain, psi the cavity detuning and omega the analysis frequency offset.
    Stability below threshold requires gamma^2 < kappa^2 + psi^2.
    """

    kappa1: float
    kappa2: float
    gamma: float
    psi: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.kappa1 < 0.0 or self.kappa2 < 0.0:
            raise ValueError("damping rates must be non-negative")
        kappa = self.kappa1 + self.kappa2
        if kappa <= 0.0:
            raise ValueError("total damping rate must be positive")
        if kappa != 1.0:
            for name in ("kappa1", "kappa2", "gamma", "psi", "omega"):
                object.__setattr__(self, name, getattr(self, name) / kappa)
        if self.gamma**2 >= 1.0 + self.psi**2:
            raise ValueError(
                "operating point at or above threshold: "
                "gamma^2 must stay below kappa^2 + psi^2"
            )

    @property
    def coupling(self) -> float:
        """Output coupling efficiency kappa1/kappa."""
        return self.kappa1

    @property
    def threshold_distance(self) -> float:
        """E = gamma^2/kappa^2, the fractional distance to threshold."""
        return self.gamma**2


def _variance(params: OpoParams, gamma: float) -> float:
    om, psi = params.omega, params.psi
    d = complex(1.0 - gamma * gamma - (om * om - psi * psi), 2.0 * om)
    denom = 4.0 * abs(d) ** 2
    if denom < DENOMINATOR_GUARD:
        raise ValueError("spectral denominator vanishes at this operating point")
    c1 = complex(1.0 + gamma, om - psi)
    num = abs(d - 2.0 * params.kappa1 * c1) ** 2
    num += 4.0 * params.kappa1 * params.kappa2 * abs(c1) ** 2
    return num / denom


def variance_x(params: OpoParams) -> float:
    """Output variance along the amplified quadrature axis."""
    return _variance(params, params.gamma)


def variance_y(params: OpoParams) -> float:
    """Output variance along the deamplified axis (gain sign flipped)."""
    return _variance(params, -params.gamma)


def output_state(params: OpoParams) -> StvState:
    """The output mode as an StvState (orientation 0).

    Raises if the computed variances violate the uncertainty bound beyond
    tolerance, which would indicate an invalid operating point.
    """
    return StvState(variance_x(params), variance_y(params))


@dataclass(frozen=True)
class SweepRow:
    """One grid point of a parameter sweep; `error` is set when the point
    could not be evaluated and the photon-number fields are then None."""

    kappa1_over_kappa: float
    psi: float
    e: float
    omega: float
    n_th: float | None
    n_sq: float | None
    n_tot: float | None
    error: str | None = None


def sweep(params_grid) -> list[SweepRow]:
    """Evaluate output photon numbers over a parameter grid.

    Rows come back in input order; a failing point produces a row with an
    error marker instead of aborting the sweep.
    """
    rows = []
    for params in params_grid:
        base = dict(
            kappa1_over_kappa=params.coupling,
            psi=params.psi,
            e=params.threshold_distance,
            omega=params.omega,
        )
        try:
            state = output_state(params)
            n_th, n_sq = photon_numbers(state)
            rows.append(
                SweepRow(**base, n_th=n_th, n_sq=n_sq, n_tot=total_photons(state))
            )
        except ValueError as exc:
            rows.append(SweepRow(**base, n_th=None, n_sq=None, n_tot=None, error=str(exc)))
    return rows


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def write_sweep_csv(rows, path) -> None:
    """Write sweep rows as CSV; failed rows leave the derived columns empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER)
        for row in rows:
            writer.writerow(
                [
                    repr(row.kappa1_over_kappa),
                    repr(row.psi),
                    repr(row.e),
                    repr(row.omega),
                    _fmt(row.n_th),
                    _fmt(row.n_sq),
                    _fmt(row.n_tot),
                ]
            )


def params_from_design(
    kappa1_over_kappa: float,
    e: float,
    psi: float = 0.0,
    omega: float = 0.0,
) -> OpoParams:
    """Build OpoParams from the design-curve parameterization.

    kappa1_over_kappa is the output coupling efficiency and e the
    fractional threshold distance gamma^2/kappa^2; psi and omega are in
    units of kappa.
    """
    if not 0.0 <= kappa1_over_kappa <= 1.0:
        raise ValueError("kappa1_over_kappa must lie in [0, 1]")
    if e < 0.0:
        raise ValueError("threshold distance must be non-negative")
    return OpoParams(
        kappa1=kappa1_over_kappa,
        kappa2=1.0 - kappa1_over_kappa,
        gamma=math.sqrt(e),
        psi=psi,
        omega=omega,
    )
