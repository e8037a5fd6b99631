"""Pure-numpy backend for the hot reduction and kernel loops.

The reduction tree here is the contract: the compiled backend must
reproduce these sums bit for bit, so both walk the same adjacent-pair
tree (odd trailing element passes through unchanged to the next level).
"""

import numpy as np


def pairwise_sum(values):
    """Sum a float64 array with a fixed adjacent-pair reduction tree.

    The result does not depend on how the caller chunked or scheduled the
    work that produced `values`, only on the array contents.
    """
    buf = np.array(values, dtype=np.float64, copy=True)
    n = buf.size
    if n == 0:
        return 0.0
    while n > 1:
        m = n // 2
        odd = n - 2 * m
        head = buf[: 2 * m]
        level = head[0::2] + head[1::2]
        buf[:m] = level
        if odd:
            buf[m] = buf[n - 1]
        n = m + odd
    return float(buf[0])


def central_moments(values):
    """Return (mean, m2, m4): the mean and the 2nd/4th central moments.

    Moments are the biased (1/n) versions; callers apply their own
    finite-sample corrections.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    mean = pairwise_sum(x) / n
    d = x - mean
    d2 = d * d
    m2 = pairwise_sum(d2) / n
    d4 = d2 * d2
    m4 = pairwise_sum(d4) / n
    return mean, m2, m4


def kernel_values(x, theta, phi, eta):
    """Evaluate the second-moment estimation kernel per sample.

    R_j = (x_j^2 * (1 + 2*cos(2*(theta_j - phi))) - (1 - eta)/4) / eta
    """
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    c = np.cos(2.0 * (theta - phi))
    return (x * x * (1.0 + 2.0 * c) - (1.0 - eta) * 0.25) / eta
