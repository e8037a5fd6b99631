"""Reduction and kernel-evaluation core with a compiled fast path.

The compiled extension (`_fast`, Cython) is used when importable; the
pure-numpy twin (`_ref`) is the fallback. `STVMETER_FORCE_REF=1` forces
the fallback, which is how the two implementations are compared in tests
and benchmarks. Reductions are bit-identical across backends; elementwise
transcendentals agree to floating-point roundoff.
"""

import os

import numpy as np

from . import _ref

if os.environ.get("STVMETER_FORCE_REF") == "1":
    _impl = _ref
    BACKEND = "ref"
else:
    try:
        from . import _fast as _impl

        BACKEND = "fast"
    except ImportError:
        _impl = _ref
        BACKEND = "ref"


def _as_vector(values, name):
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def pairwise_sum(values):
    """Deterministic pairwise sum of a 1-d float array."""
    return _impl.pairwise_sum(_as_vector(values, "values"))


def central_moments(values):
    """(mean, m2, m4) of a 1-d float array; m2/m4 are 1/n central moments."""
    arr = _as_vector(values, "values")
    if arr.size == 0:
        raise ValueError("central_moments requires at least one value")
    return _impl.central_moments(arr)


def kernel_values(x, theta, phi, eta):
    """Second-moment kernel evaluated per sample; see tomography module."""
    xv = _as_vector(x, "x")
    tv = _as_vector(theta, "theta")
    if xv.size != tv.size:
        raise ValueError("x and theta must have equal length")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must be in (0, 1]")
    return _impl.kernel_values(xv, tv, float(phi), float(eta))
