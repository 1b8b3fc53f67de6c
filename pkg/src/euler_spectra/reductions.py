"""Deterministic floating-point reductions.

Summing a large array with a data-dependent or thread-dependent order
makes integrals differ between otherwise identical runs.  Everything in
this package that reduces a grid to a number funnels through
:func:`pairwise_sum`, which uses a fixed halving order independent of
platform SIMD width or thread count.
"""

import numpy as np


def pairwise_sum(values) -> float:
    """Sum an array in a fixed pairwise order.

    The input is flattened in C order, zero-padded to the next power of
    two, and repeatedly folded in half; the result is bit-reproducible
    for a given input regardless of BLAS/SIMD configuration, and carries
    the usual O(log n) pairwise error growth.

    Parameters
    ----------
    values : array_like
        Real values to reduce.

    Returns
    -------
    float
        The pairwise sum as a Python float.
    """
    a = np.asarray(values, dtype=np.float64).ravel(order="C")
    if a.size == 0:
        return 0.0
    size = 1 << int(np.ceil(np.log2(a.size)))
    if size != a.size:
        padded = np.zeros(size, dtype=np.float64)
        padded[: a.size] = a
        a = padded
    else:
        a = a.copy()
    while a.size > 1:
        half = a.size // 2
        a = a[:half] + a[half:]
    return float(a[0])
