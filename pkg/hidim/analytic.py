"""
Exact quantities of the two-class Gaussian model with a shared covariance:
the Q-function, the Bayes error, the MAP rule, structured covariance algebra
and the quadratic-form moments used by the concentration diagnostics.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg, special

from .errors import DomainError, DimensionMismatchError, DegenerateModelError, NotPSDError
from .utils import as_rows, make_rng

lgr = logging.getLogger()

UNIT_NORM_TOL = 1e-12
SYMMETRY_TOL = 1e-10
# Eigenvalues below EIGEN_CUTOFF * lambda_max count as zero (pseudoinverse semantics)
EIGEN_CUTOFF = 1e-10
DEGENERATE_ALPHA = 1e-12


def q_function(t):
    """
    Standard normal upper tail probability Q(t) = P(N(0, 1) > t).
    Accepts a scalar or an array; +/-inf map to the limits 0 and 1.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(t_arr)):
        raise DomainError('Q-function is undefined for NaN')
    q = 0.5 * special.erfc(t_arr / math.sqrt(2.0))
    return float(q) if q.ndim == 0 else q


def _check_symmetric(matrix, name):
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError(f'{name} must be a square matrix, got shape {matrix.shape}')
    scale = np.max(np.abs(matrix)) if matrix.size else 0.0
    if np.max(np.abs(matrix - matrix.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise DomainError(f'{name} is not symmetric')


class CovarianceModel:
    """Base class for the structured covariance representations"""

    dim = None

    def check_dim(self, d):
        if self.dim is not None and self.dim != d:
            raise DimensionMismatchError(f'covariance has dimension {self.dim}, model has {d}')

    def whiten(self, v):
        """Applies (Sigma^+)^(1/2) to a vector or to each row of a matrix"""
        raise NotImplementedError

    def sqrt_apply(self, z):
        """Applies Sigma^(1/2) to a vector or to each row of a matrix"""
        raise NotImplementedError

    def matrix(self, d):
        raise NotImplementedError

    @property
    def noise_level(self):
        """Standard deviation beta of the white component"""
        raise DomainError(f'{type(self).__name__} has no white-noise level')


@dataclass(frozen=True, eq=False)
class Spherical(CovarianceModel):
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f'beta must be positive and finite, got {self.beta}')

    def whiten(self, v):
        return np.asarray(v, dtype=float) / self.beta

    def sqrt_apply(self, z):
        return self.beta * np.asarray(z, dtype=float)

    def matrix(self, d):
        return self.beta ** 2 * np.eye(d)

    @property
    def noise_level(self):
        return self.beta


@dataclass(frozen=True, eq=False)
class RankOnePlusSpherical(CovarianceModel):
    """Sigma = gamma^2 h h^T + beta^2 I with a unit vector h"""

    h: np.ndarray
    gamma: float
    beta: float

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.ndim != 1:
            raise DomainError('h must be a vector')
        if abs(np.linalg.norm(h) - 1.0) > UNIT_NORM_TOL:
            raise DomainError(f'h must have unit norm, got {np.linalg.norm(h)}')
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise DomainError(f'gamma must be nonnegative, got {self.gamma}')
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f'beta must be positive and finite, got {self.beta}')
        object.__setattr__(self, 'h', h)

    @property
    def dim(self):
        return self.h.shape[0]

    @property
    def total_scale(self):
        """sqrt(beta^2 + gamma^2), the standard deviation along h"""
        return math.sqrt(self.beta ** 2 + self.gamma ** 2)

    def _along_h(self, x, factor):
        rows, single = as_rows(x, self.dim)
        out = rows + factor * np.outer(rows @ self.h, self.h)
        return out[0] if single else out

    def whiten(self, v):
        return self._along_h(v, self.beta / self.total_scale - 1.0) / self.beta

    def sqrt_apply(self, z):
        return self.beta * self._along_h(z, self.total_scale / self.beta - 1.0)

    def matrix(self, d=None):
        return self.gamma ** 2 * np.outer(self.h, self.h) + self.beta ** 2 * np.eye(self.dim)

    @property
    def noise_level(self):
        return self.beta


@dataclass(frozen=True, eq=False)
class Dense(CovarianceModel):
    """An explicit symmetric PSD matrix, handled through its eigendecomposition"""

    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        _check_symmetric(sigma, 'covariance')
        object.__setattr__(self, 'sigma', 0.5 * (sigma + sigma.T))

    @property
    def dim(self):
        return self.sigma.shape[0]

    @cached_property
    def spectrum(self):
        """
        Eigendecomposition with the pseudoinverse cutoff applied.
        @return: (eigenvalues, eigenvectors, mask of retained eigenvalues)
        @rtype: tuple
        """
        eigvals, eigvecs = linalg.eigh(self.sigma)
        lam_max = max(float(eigvals[-1]), 0.0)
        if eigvals[0] < -EIGEN_CUTOFF * lam_max:
            raise NotPSDError(f'covariance has eigenvalue {eigvals[0]:.3e} below the PSD tolerance')
        keep = eigvals > EIGEN_CUTOFF * lam_max
        return eigvals, eigvecs, keep

    def _spectral_apply(self, x, scale):
        rows, single = as_rows(x, self.dim)
        _, eigvecs, _ = self.spectrum
        out = ((rows @ eigvecs) * scale) @ eigvecs.T
        return out[0] if single else out

    def whiten(self, v):
        eigvals, _, keep = self.spectrum
        scale = np.zeros_like(eigvals)
        scale[keep] = 1.0 / np.sqrt(eigvals[keep])
        return self._spectral_apply(v, scale)

    def sqrt_apply(self, z):
        eigvals, _, _ = self.spectrum
        return self._spectral_apply(z, np.sqrt(np.clip(eigvals, 0.0, None)))

    def matrix(self, d=None):
        return self.sigma.copy()


@dataclass(frozen=True, eq=False)
class ModelParams:
    """theta = (mu_plus, mu_minus, Sigma); tag is an opaque provenance label"""

    mu_plus: np.ndarray
    mu_minus: np.ndarray
    cov: CovarianceModel
    tag: str = ''

    def __post_init__(self):
        mu_plus = np.array(self.mu_plus, dtype=float)
        mu_minus = np.array(self.mu_minus, dtype=float)
        if mu_plus.ndim != 1 or mu_plus.shape != mu_minus.shape:
            raise DimensionMismatchError(
                f'class means must be vectors of one dimension, got {mu_plus.shape} and {mu_minus.shape}')
        self.cov.check_dim(mu_plus.shape[0])
        if np.array_equal(mu_plus, mu_minus):
            raise DegenerateModelError('class means coincide')
        object.__setattr__(self, 'mu_plus', mu_plus)
        object.__setattr__(self, 'mu_minus', mu_minus)

    @property
    def d(self):
        return self.mu_plus.shape[0]

    @property
    def midpoint(self):
        return 0.5 * (self.mu_plus + self.mu_minus)

    @property
    def delta(self):
        return self.mu_plus - self.mu_minus

    def mean_of(self, labels):
        """Rows mu_y for an array of +/-1 labels"""
        labels = np.asarray(labels)
        return np.where(labels[:, None] > 0, self.mu_plus, self.mu_minus)


@dataclass(frozen=True)
class Difficulty:
    alpha: float
    bayes_error: float


def whiten_apply(cov, v):
    """(Sigma^+)^(1/2) v"""
    return cov.whiten(v)


def cov_sqrt_apply(cov, z):
    """Sigma^(1/2) z"""
    return cov.sqrt_apply(z)


def difficulty_of(theta):
    """
    Mahalanobis separation alpha of the class means and the Bayes error Q(alpha / 2)
    @param theta: The model parameters
    @type theta: ModelParams
    @rtype: Difficulty
    """
    alpha = float(np.linalg.norm(whiten_apply(theta.cov, theta.delta)))
    if alpha <= DEGENERATE_ALPHA:
        raise DegenerateModelError(f'separation {alpha:.3e} is numerically zero')
    return Difficulty(alpha=alpha, bayes_error=q_function(alpha / 2.0))


def map_weight(theta):
    """Sigma^+ Delta, the normal of the MAP decision boundary"""
    return theta.cov.whiten(theta.cov.whiten(theta.delta))


def map_classify(theta, x):
    """
    The optimum (MAP) rule sign(Delta^T Sigma^+ (x - mu)), predicting +1 on the boundary.
    @param x: One test vector or a stack of row vectors
    @return: A label, or an array of labels for a stack
    """
    rows, single = as_rows(x, theta.d)
    score = (rows - theta.midpoint) @ map_weight(theta)
    labels = np.where(score >= 0, 1, -1)
    return int(labels[0]) if single else labels


def gaussian_quadratic_variance(mu, cov, lam):
    """
    var(e^T L e) for e ~ N(mu, Sigma): 2 tr(L Sigma L Sigma) + 4 mu^T L Sigma L mu
    """
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    _check_symmetric(lam, 'Lambda')
    d = mu.shape[0]
    if lam.shape != (d, d):
        raise DimensionMismatchError(f'Lambda has shape {lam.shape}, mean has dimension {d}')
    cov.check_dim(d)
    lam_sigma = lam @ cov.matrix(d)
    return float(2.0 * np.trace(lam_sigma @ lam_sigma) + 4.0 * mu @ lam_sigma @ lam @ mu)


def radial_mgf_with_error(t, d, samples, rng):
    """
    Monte Carlo estimate of g(t) = E[exp(t H_1)] for H uniform on the unit sphere in R^d.
    Only the first coordinate is needed: H_1 = Z_1 / sqrt(Z_1^2 + chi2_(d-1)).
    @return: (estimate, standard error)
    @rtype: tuple
    """
    if not t >= 0:
        raise DomainError(f't must be nonnegative, got {t}')
    if d < 2 or samples < 1:
        raise DomainError(f'need d >= 2 and samples >= 1, got d={d}, samples={samples}')
    if t == 0:
        return 1.0, 0.0
    rng = make_rng(rng)
    z1 = rng.standard_normal(samples)
    rest = rng.chisquare(d - 1, samples)
    values = np.exp(t * z1 / np.sqrt(z1 * z1 + rest))
    se = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return float(values.mean()), se


def radial_mgf(t, d, samples, rng):
    return radial_mgf_with_error(t, d, samples, rng)[0]


@dataclass(frozen=True)
class RadialProfile:
    t_grid: tuple
    estimates: tuple
    std_errors: tuple
    nondecreasing: tuple
    convex: tuple

    @property
    def passed(self):
        return all(self.nondecreasing) and all(self.convex)


def check_radial_profile(t_grid, d, samples, seed, slack=3.0):
    """
    Checks that g(t) = E[exp(t H_1)] is nondecreasing and convex on a t-grid, up to
    `slack` standard errors. Every grid point reuses the same H sample.
    @rtype: RadialProfile
    """
    t_grid = tuple(float(t) for t in t_grid)
    if len(t_grid) < 3 or any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise DomainError('t_grid must be strictly increasing with at least three points')
    pairs = [radial_mgf_with_error(t, d, samples, make_rng(seed)) for t in t_grid]
    g = [p[0] for p in pairs]
    se = [p[1] for p in pairs]

    nondecreasing = tuple(
        g[i + 1] >= g[i] - slack * math.hypot(se[i], se[i + 1]) for i in range(len(g) - 1))
    convex = []
    for i in range(1, len(g) - 1):
        weight = (t_grid[i + 1] - t_grid[i]) / (t_grid[i + 1] - t_grid[i - 1])
        chord = weight * g[i - 1] + (1.0 - weight) * g[i + 1]
        combined = math.sqrt(se[i] ** 2 + (weight * se[i - 1]) ** 2 + ((1.0 - weight) * se[i + 1]) ** 2)
        convex.append(g[i] <= chord + slack * combined)
    lgr.debug(f'Radial profile d={d}: {dict(zip(t_grid, g))}')
    return RadialProfile(t_grid, tuple(g), tuple(se), nondecreasing, tuple(convex))
