"""
Dataset synthesis and the auxiliary statistics V and W of the sphere model
"""
import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .analytic import q_function
from .errors import DimensionMismatchError, DomainError
from .paramsets import sample_sphere_uniform
from .utils import make_rng

lgr = logging.getLogger()

# Rows per block when sampling proof statistics directly
PROOF_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class Dataset:
    xs: np.ndarray
    ys: np.ndarray
    theta_id: str = ''
    seed: int = -1

    def __post_init__(self):
        if self.xs.ndim != 2 or self.xs.shape[0] != self.ys.shape[0]:
            raise DimensionMismatchError(f'{self.xs.shape[0]} samples but {self.ys.shape[0]} labels')
        if not np.all(np.abs(self.ys) == 1):
            raise DomainError('labels must be +1 or -1')

    @property
    def n(self):
        return self.xs.shape[0]

    @property
    def d(self):
        return self.xs.shape[1]

    def class_rows(self, label):
        return self.xs[self.ys == label]


def gen_dataset(theta, n, rng):
    """
    Draws n i.i.d. pairs: Y uniform on {-1, +1}, X = mu_Y + Sigma^(1/2) Z with Z standard normal.
    @param theta: The model parameters
    @type theta: ModelParams
    @param n: Number of samples
    @type n: int
    @param rng: An int seed or a numpy Generator
    @rtype: Dataset
    """
    if n < 1:
        raise DomainError(f'n must be at least 1, got {n}')
    seed = int(rng) if isinstance(rng, (int, np.integer)) else -1
    rng = make_rng(rng)
    ys = np.where(rng.random(n) < 0.5, -1, 1)
    zs = rng.standard_normal((n, theta.d))
    xs = theta.mean_of(ys) + theta.cov.sqrt_apply(zs)
    return Dataset(xs=xs, ys=ys, theta_id=theta.tag, seed=seed)


@dataclass(frozen=True, eq=False)
class ProofStatistics:
    v: np.ndarray
    ht_v: float
    v_norm_sq: float
    w: float

    @property
    def denominator(self):
        """1 + 2 H^T V + ||V||^2"""
        return 1.0 + 2.0 * self.ht_v + self.v_norm_sq

    def recomputed_w(self):
        return (1.0 + self.ht_v) / math.sqrt(self.denominator)


def proof_statistics(theta, data):
    """
    V = (1/n) sum Y_i Z_i with Z_i = X_i - Y_i h recovered exactly from the known h,
    together with H^T V, ||V||^2 and W = (1 + H^T V) / sqrt(1 + 2 H^T V + ||V||^2).
    @param theta: The sphere model the data was drawn from
    @type theta: SphereTheta
    @type data: Dataset
    @rtype: ProofStatistics
    """
    if data.d != theta.h.shape[0]:
        raise DimensionMismatchError(f'data has dimension {data.d}, h has {theta.h.shape[0]}')
    zs = data.xs - np.outer(data.ys, theta.h)
    v = (data.ys @ zs) / data.n
    ht_v = float(theta.h @ v)
    v_norm_sq = float(v @ v)
    w = (1.0 + ht_v) / math.sqrt(1.0 + 2.0 * ht_v + v_norm_sq)
    return ProofStatistics(v=v, ht_v=ht_v, v_norm_sq=v_norm_sq, w=w)


def matched_filter_error(stats, beta):
    """Error of sign(x^T sum y_i x_i) given one training draw: Q(W / beta)"""
    return q_function(stats.w / beta)


@dataclass(frozen=True, eq=False)
class ProofSample:
    """Replicate arrays of H^T V, ||V||^2 and W"""

    ht_v: np.ndarray
    v_norm_sq: np.ndarray

    @property
    def denominator(self):
        return 1.0 + 2.0 * self.ht_v + self.v_norm_sq

    @property
    def w(self):
        return (1.0 + self.ht_v) / np.sqrt(self.denominator)


def sample_proof_statistics(d, n, beta, replicates, rng, chunk=PROOF_CHUNK):
    """
    Draws (H, V) pairs with a fresh H uniform on the sphere and V ~ N(0, (beta^2 / n) I),
    the exact law of (1/n) sum Y_i Z_i, without materialising datasets.
    @rtype: ProofSample
    """
    if d < 2 or n < 1 or beta <= 0 or replicates < 1:
        raise DomainError(f'invalid proof sampling arguments d={d}, n={n}, beta={beta}, replicates={replicates}')
    rng = make_rng(rng)
    scale = beta / math.sqrt(n)
    ht_v = np.empty(replicates)
    v_norm_sq = np.empty(replicates)
    chunk = max(1, min(chunk, replicates))
    for start in range(0, replicates, chunk):
        size = min(chunk, replicates - start)
        hs = sample_sphere_uniform(d, rng, size=size)
        vs = scale * rng.standard_normal((size, d))
        ht_v[start:start + size] = np.einsum('ij,ij->i', hs, vs)
        v_norm_sq[start:start + size] = np.einsum('ij,ij->i', vs, vs)
    return ProofSample(ht_v=ht_v, v_norm_sq=v_norm_sq)


def dump_dataset(data, path):
    """
    Saves a dataset to csv: a d,n,seed header line, its values, then y,x1..xd rows
    @return: Boolean to indicate the status of the operation
    @rtype: bool
    """
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['d', 'n', 'seed'])
        writer.writerow([data.d, data.n, data.seed])
        writer.writerow(['y'] + [f'x{j + 1}' for j in range(data.d)])
        for y, x in zip(data.ys, data.xs):
            writer.writerow([int(y)] + [repr(float(v)) for v in x])
    lgr.info(f'Dumped dataset ({data.n} x {data.d}) to {path}')
    return True


def load_dataset(path):
    """Loads a dataset written by dump_dataset"""
    with open(path, newline='') as f:
        reader = csv.reader(f)
        next(reader)
        d, n, seed = (int(v) for v in next(reader))
        next(reader)
        rows = [row for row in reader if row]
    if len(rows) != n or any(len(row) != d + 1 for row in rows):
        raise DimensionMismatchError(f'{path} does not hold {n} rows of dimension {d}')
    ys = np.array([int(row[0]) for row in rows])
    xs = np.array([[float(v) for v in row[1:]] for row in rows])
    return Dataset(xs=xs.reshape(n, d), ys=ys, seed=seed)
