"""stvmeter: transmittivity measurement with squeezed vacuum, simulated.

The package models the full chain of a quantum absorption measurement:
a below-threshold optical parametric oscillator emitting squeezed
thermal vacuum (`opo`), lossy propagation through a sample (`states`),
balanced homodyne detection with phase scanning (`homodyne`),
pattern-function reconstruction of the state from quadrature samples
(`tomography`), and transmittivity estimators with accuracy and
photon-dose budgets against a classical coherent-beam measurement
(`estimator`).

The sample-level hot loops live in `kernels`, which picks a compiled
backend when the extension is available and falls back to a pure
NumPy implementation otherwise; both produce bit-identical reductions.
"""

from .states import StvState, apply_loss, from_photon_numbers, photon_numbers

__version__ = "0.1.0"

__all__ = [
    "StvState",
    "apply_loss",
    "from_photon_numbers",
    "photon_numbers",
    "__version__",
]
