"""Small numerical helpers shared by several modules."""

import numpy as np


def compensated_sum(x, axis=-1):
    """Sum along ``axis`` with error-free pairwise (cascaded TwoSum) accumulation.

    Each pairwise addition records its exact rounding error; the errors are
    summed separately and added back once, so the result is as accurate as
    summation in roughly twice the working precision. Works for real and
    complex input (complex addition rounds componentwise).
    """
    s = np.moveaxis(np.asarray(x), axis, -1)
    if s.shape[-1] == 0:
        return np.zeros(s.shape[:-1], dtype=s.dtype)
    err = np.zeros_like(s)
    while s.shape[-1] > 1:
        if s.shape[-1] % 2:
            pad = [(0, 0)] * (s.ndim - 1) + [(0, 1)]
            s = np.pad(s, pad)
            err = np.pad(err, pad)
        a, b = s[..., 0::2], s[..., 1::2]
        t = a + b
        bv = t - a
        e = (a - (t - bv)) + (b - bv)
        err = err[..., 0::2] + err[..., 1::2] + e
        s = t
    return s[..., 0] + err[..., 0]
