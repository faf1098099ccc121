"""
Common utility functions
"""
import logging
import math

import numpy as np
from scipy import stats

from .errors import DimensionMismatchError

lgr = logging.getLogger()

# Stream identifiers mixed into every derived seed
STREAM_THETA = 0
STREAM_TRAIN = 1
STREAM_TEST = 2
STREAM_COIN = 3


def mix(master_seed, *keys):
    """
    Deterministically mixes a master seed with integer keys into a 64-bit seed.
    Identical inputs give identical seeds on every platform, thread and process.
    @param master_seed: The run level seed
    @type master_seed: int
    @param keys: Non-negative integers naming the stream, e.g. (d, theta_index, replicate, stream)
    @type keys: int
    @return: The derived seed
    @rtype: int
    """
    if master_seed < 0 or any(k < 0 for k in keys):
        raise ValueError('seeds and stream keys must be non-negative')
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed):
    """Returns a numpy Generator for an int seed, passing Generators through untouched"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def unit_rows(rng, size, d):
    """
    Draws `size` standard Gaussian vectors in R^d and scales each to unit length.
    Zero-norm draws (probability zero, but possible in floating point) are redrawn.
    @rtype: numpy.ndarray of shape (size, d)
    """
    rows = rng.standard_normal((size, d))
    norms = np.linalg.norm(rows, axis=1)
    bad = norms == 0.0
    while np.any(bad):  # pragma: nocover
        rows[bad] = rng.standard_normal((int(bad.sum()), d))
        norms[bad] = np.linalg.norm(rows[bad], axis=1)
        bad = norms == 0.0
    return rows / norms[:, None]


def wilson_interval(errors, trials, confidence=0.95):
    """
    Wilson score interval for a binomial proportion.
    @param errors: Number of error outcomes
    @type errors: int
    @param trials: Number of trials
    @type trials: int
    @param confidence: Two sided confidence level
    @type confidence: float
    @return: (lower, upper) clipped to [0, 1]
    @rtype: tuple
    """
    if trials == 0:
        return 0.0, 1.0
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p_hat = errors / trials
    z_sq = z * z
    denominator = 1.0 + z_sq / trials
    center = (p_hat + z_sq / (2.0 * trials)) / denominator
    margin = z * math.sqrt(p_hat * (1.0 - p_hat) / trials + z_sq / (4.0 * trials * trials)) / denominator
    low = 0.0 if errors == 0 else max(0.0, center - margin)
    high = 1.0 if errors == trials else min(1.0, center + margin)
    return float(low), float(high)


def as_rows(x, d):
    """
    Views a single vector or a stack of row vectors as a 2-d array, checking the width.
    @return: (rows, was_vector)
    @rtype: tuple
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    rows = arr[None, :] if single else arr
    if rows.ndim != 2 or rows.shape[1] != d:
        raise DimensionMismatchError(f'expected vectors of dimension {d}, got shape {arr.shape}')
    return rows, single
