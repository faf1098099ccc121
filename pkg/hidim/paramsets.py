"""
Constant-difficulty parameter families (sphere, sensing-aware), the exponential and
polynomial sparsity classes of the mean direction h, and the spherical-region tools
used to split an average over the sphere into a region and its complement.
"""
import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import ModelParams, Spherical, RankOnePlusSpherical, UNIT_NORM_TOL
from .errors import DomainError
from .estimates import ErrorEstimate, CI_Z
from .utils import make_rng, unit_rows

lgr = logging.getLogger()


def _unit(h):
    h = np.array(h, dtype=float)
    if h.ndim != 1 or abs(np.linalg.norm(h) - 1.0) > UNIT_NORM_TOL:
        raise DomainError('h must be a unit vector')
    return h


def _positive(value, name):
    if not (np.isfinite(value) and value > 0):
        raise DomainError(f'{name} must be positive, got {value}')
    return float(value)


def sample_sphere_uniform(d, rng, size=None):
    """
    Uniform draw(s) from the unit sphere S^(d-1): normalized standard Gaussian vectors.
    @param size: None for one vector, otherwise the number of rows
    """
    if d < 2:
        raise DomainError(f'sphere sampling needs d >= 2, got {d}')
    rows = unit_rows(make_rng(rng), 1 if size is None else size, d)
    return rows[0] if size is None else rows


@dataclass(frozen=True, eq=False)
class SphereTheta:
    """(h, -h, beta^2 I) with beta = 2 / alpha"""

    h: np.ndarray
    alpha: float
    beta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'h', _unit(self.h))
        alpha = _positive(self.alpha, 'alpha')
        object.__setattr__(self, 'alpha', alpha)
        object.__setattr__(self, 'beta', 2.0 / alpha)

    @property
    def params(self):
        return ModelParams(self.h, -self.h, Spherical(self.beta), tag='sphere')

    @classmethod
    def from_params(cls, theta):
        """Recovers the sphere form of a ModelParams built by theta_sphere"""
        if not isinstance(theta.cov, Spherical) or not np.allclose(theta.mu_plus, -theta.mu_minus):
            raise DomainError('model is not a member of the sphere family')
        return cls(theta.mu_plus, 2.0 / theta.cov.beta)


def theta_sphere(h, alpha):
    return SphereTheta(h, alpha).params


@dataclass(frozen=True, eq=False)
class SensingAwareTheta:
    """(m1 h, m2 h, gamma^2 h h^T + beta^2 I)"""

    h: np.ndarray
    m1: float
    m2: float
    gamma: float
    beta: float

    @property
    def alpha(self):
        return abs(self.m1 - self.m2) / math.sqrt(self.gamma ** 2 + self.beta ** 2)

    @property
    def params(self):
        return ModelParams(self.m1 * self.h, self.m2 * self.h,
                           RankOnePlusSpherical(self.h, self.gamma, self.beta), tag='sensing_aware')


def sensing_aware_theta(h, gamma, beta, alpha, midpoint=0.0):
    h = _unit(h)
    alpha = _positive(alpha, 'alpha')
    beta = _positive(beta, 'beta')
    if not (np.isfinite(gamma) and gamma >= 0):
        raise DomainError(f'gamma must be nonnegative, got {gamma}')
    half_gap = 0.5 * alpha * math.sqrt(gamma ** 2 + beta ** 2)
    return SensingAwareTheta(h, midpoint + half_gap, midpoint - half_gap, float(gamma), beta)


def theta_sensing_aware(h, gamma, beta, alpha, midpoint=0.0):
    return sensing_aware_theta(h, gamma, beta, alpha, midpoint).params


class SparsityClass:
    """Unit vectors whose sorted magnitudes follow a fixed decay law"""

    label = ''

    def log_decay(self):
        """Logs of the unnormalized magnitudes for k = 1..d"""
        raise NotImplementedError

    @property
    def normalizer(self):
        raise NotImplementedError

    @property
    def parameter(self):
        raise NotImplementedError

    def log_magnitudes(self):
        """log |h_(k)|, exact even where the magnitudes themselves underflow"""
        return math.log(self.normalizer) + self.log_decay()

    def magnitudes(self):
        """
        Sorted magnitudes. For fast decay and large d the tail underflows to 0.0
        (a = 0.5 past k of about 1075); log_magnitudes keeps the law there.
        """
        return np.exp(self.log_magnitudes())


@dataclass(frozen=True)
class ExpSparsity(SparsityClass):
    """|h_(k)| = M1(d) a^k, 0 < a < 1"""

    a: float
    d: int
    label = 'exp'

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise DomainError(f'decay rate a must lie in (0, 1), got {self.a}')
        if self.d < 1:
            raise DomainError(f'd must be positive, got {self.d}')

    def log_decay(self):
        return np.arange(1, self.d + 1, dtype=float) * math.log(self.a)

    @property
    def normalizer(self):
        a_sq = self.a ** 2
        return math.sqrt((1.0 - a_sq) / (a_sq * (1.0 - a_sq ** self.d)))

    @property
    def parameter(self):
        return self.a


@dataclass(frozen=True)
class PolySparsity(SparsityClass):
    """|h_(k)| = M2(d) k^(-b), b > 1/2"""

    b: float
    d: int
    label = 'poly'

    def __post_init__(self):
        if not self.b > 0.5:
            raise DomainError(f'decay exponent b must exceed 0.5, got {self.b}')
        if self.d < 1:
            raise DomainError(f'd must be positive, got {self.d}')

    def log_decay(self):
        return -self.b * np.log(np.arange(1, self.d + 1, dtype=float))

    @property
    def normalizer(self):
        return 1.0 / math.sqrt(float(np.sum(np.power(np.arange(1, self.d + 1, dtype=float), -2.0 * self.b))))

    @property
    def parameter(self):
        return self.b


def make_sparse_h(sparsity, rng):
    """
    Draws h from a sparsity class: the declared magnitudes with i.i.d. random signs,
    placed at uniformly permuted coordinates.
    @type sparsity: SparsityClass
    @rtype: numpy.ndarray
    """
    rng = make_rng(rng)
    magnitudes = sparsity.magnitudes()
    signs = rng.choice(np.array([-1.0, 1.0]), size=sparsity.d)
    h = np.empty(sparsity.d)
    h[rng.permutation(sparsity.d)] = signs * magnitudes
    return h


def sparsity_curve(sparsity):
    """(k, |h_(k)|) pairs for k = 1..d"""
    return [(k, float(m)) for k, m in enumerate(sparsity.magnitudes(), start=1)]


def write_sparsity_curves(classes, path):
    """
    Saves the sorted magnitude profiles of several sparsity classes to a csv file
    @param classes: Sparsity classes to tabulate
    @type classes: list
    @param path: The output csv path
    @type path: str
    @return: Number of rows written
    @rtype: int
    """
    rows = 0
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['class', 'param', 'd', 'k', 'magnitude'])
        for sparsity in classes:
            for k, magnitude in sparsity_curve(sparsity):
                writer.writerow([sparsity.label, f'{sparsity.parameter:.10g}', sparsity.d, k, f'{magnitude:.10g}'])
                rows += 1
    lgr.info(f'Saved {rows} sparsity curve rows to {path}')
    return rows


@dataclass(frozen=True)
class CapRegion:
    """The spherical region {h : |h_1| > c} or, with inside=False, its complement"""

    c: float
    inside: bool = True

    def contains(self, h):
        rows = np.atleast_2d(h)
        member = np.abs(rows[:, 0]) > self.c
        return member if self.inside else ~member

    @property
    def complement(self):
        return CapRegion(self.c, not self.inside)


def cap_region(c):
    if not 0 <= c < 1:
        raise DomainError(f'cap threshold must lie in [0, 1), got {c}')
    return CapRegion(float(c))


def estimate_region_volume(d, region, samples, rng):
    """Monte Carlo membership frequency of a region under the uniform law on S^(d-1)"""
    points = sample_sphere_uniform(d, rng, size=samples)
    return float(np.mean(region.contains(points)))


def sample_sphere_region(d, region, rng, max_tries=100000):
    """Rejection sample of the uniform law restricted to a region"""
    rng = make_rng(rng)
    for _ in range(max_tries):
        h = sample_sphere_uniform(d, rng)
        if region.contains(h)[0]:
            return h
    raise DomainError(f'no draw landed in {region} after {max_tries} tries')


def volume_split_errors(err_in, err_out, vol):
    """
    Recombines conditional error estimates over a region and its complement into the
    estimate over the whole sphere: vol * err_in + (1 - vol) * err_out.
    The two estimates are independent, so their variances add with squared weights.
    @rtype: ErrorEstimate
    """
    if not 0 <= vol <= 1:
        raise DomainError(f'volume must lie in [0, 1], got {vol}')
    if vol == 1:
        return err_in
    if vol == 0:
        return err_out
    p_hat = vol * err_in.p_hat + (1.0 - vol) * err_out.p_hat
    sigma = math.hypot(vol * err_in.half_width / CI_Z, (1.0 - vol) * err_out.half_width / CI_Z)
    return ErrorEstimate(
        p_hat=p_hat,
        ci_low=max(0.0, p_hat - CI_Z * sigma),
        ci_high=min(1.0, p_hat + CI_Z * sigma),
        trials=err_in.trials + err_out.trials,
        resample_events=err_in.resample_events + err_out.resample_events,
    )
