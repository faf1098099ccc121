"""
Trainable decision rules behind one train/predict interface: the Bayes oracle, the
matched filter, plug-in ML rules, ML and soft-threshold projections and a coin flip.
"""
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .analytic import EIGEN_CUTOFF, map_classify
from .errors import DomainError, UntrainableError
from .utils import as_rows, make_rng

lgr = logging.getLogger()

FALLBACK = 'constant_plus_one'


class RuleKind(enum.Enum):
    BAYES_ORACLE = 'BayesOracle'
    MATCHED_FILTER = 'MatchedFilter'
    PLUGIN_ML = 'PluginML'
    ML_PROJECTION = 'MLProjection'
    SOFT_THRESHOLD = 'SoftThreshold'
    COIN_FLIP = 'CoinFlip'


@dataclass(frozen=True, eq=False)
class TrainedRule:
    """
    A trained rule. Linear rules predict sign(weight^T x + offset) with ties going to +1;
    a rule whose weight vanished predicts +1 everywhere and says so in metadata['fallback'].
    """

    kind: RuleKind
    d: int
    weight: np.ndarray = None
    offset: float = 0.0
    metadata: dict = field(default_factory=dict)
    theta: object = None
    rng: object = None

    @property
    def is_constant(self):
        return self.metadata.get('fallback') == FALLBACK


@dataclass(frozen=True)
class Known:
    """Plug-in covariance mode: the covariance is known"""

    cov: object


@dataclass(frozen=True)
class PooledML:
    """Plug-in covariance mode: pooled within-class ML estimate (1/n normalizer)"""


def _linear_rule(kind, weight, offset=0.0, **metadata):
    weight = np.asarray(weight, dtype=float)
    if not np.any(weight):
        lgr.debug(f'{kind.value}: weight vanished, falling back to the constant +1 rule')
        metadata['fallback'] = FALLBACK
        weight = np.zeros_like(weight)
        offset = 0.0
    return TrainedRule(kind=kind, d=weight.shape[0], weight=weight, offset=float(offset), metadata=metadata)


def _check_training(data):
    if data.n < 1:
        raise UntrainableError('empty training set')


def _ml_direction(data):
    """(1/n) sum y_i x_i, the ML estimate of h in the sphere model"""
    return (data.ys @ data.xs) / data.n


def train_matched_filter(data):
    """sign(x^T sum_i y_i x_i)"""
    _check_training(data)
    return _linear_rule(RuleKind.MATCHED_FILTER, data.ys @ data.xs)


def _class_means(data):
    plus = data.class_rows(1)
    minus = data.class_rows(-1)
    if not len(plus) or not len(minus):
        raise UntrainableError(f'training set of {data.n} samples lacks a class')
    return plus.mean(axis=0), minus.mean(axis=0)


def _pooled_pinv_apply(data, mu_plus, mu_minus, vector):
    """
    Applies the pseudoinverse of the pooled ML covariance (1/n) R^T R to a vector,
    with R the n x d within-class residuals, through the thin SVD of R.
    """
    residuals = data.xs - np.where(data.ys[:, None] > 0, mu_plus, mu_minus)
    _, singular, vt = linalg.svd(residuals, full_matrices=False)
    eigvals = singular ** 2 / data.n
    lam_max = eigvals.max() if eigvals.size else 0.0
    keep = eigvals > EIGEN_CUTOFF * lam_max if lam_max > 0 else np.zeros_like(eigvals, dtype=bool)
    coeffs = vt[keep] @ vector
    return vt[keep].T @ (coeffs / eigvals[keep])


def train_plugin_ml(data, cov_mode):
    """
    The MAP rule with class means replaced by per-class averages and the covariance
    either known or replaced by its pooled ML estimate.
    @param cov_mode: Known(cov) or PooledML()
    @rtype: TrainedRule
    """
    _check_training(data)
    if isinstance(cov_mode, PooledML) and data.n < 2:
        raise UntrainableError('pooled covariance needs at least two samples')
    mu_plus, mu_minus = _class_means(data)
    delta = mu_plus - mu_minus
    midpoint = 0.5 * (mu_plus + mu_minus)
    if isinstance(cov_mode, Known):
        weight = cov_mode.cov.whiten(cov_mode.cov.whiten(delta))
        mode = 'known'
    elif isinstance(cov_mode, PooledML):
        weight = _pooled_pinv_apply(data, mu_plus, mu_minus, delta)
        mode = 'pooled'
    else:
        raise DomainError(f'unknown covariance mode {cov_mode!r}')
    return _linear_rule(RuleKind.PLUGIN_ML, weight, -float(weight @ midpoint), cov_mode=mode)


def train_ml_projection(data, beta):
    """sign(h_ML^T x) with h_ML = (1/n) sum y_i x_i"""
    _check_training(data)
    return _linear_rule(RuleKind.ML_PROJECTION, _ml_direction(data), beta=beta)


def soft_threshold(values, lam):
    """Componentwise sign(v) max(|v| - lam, 0)"""
    return np.sign(values) * np.maximum(np.abs(values) - lam, 0.0)


def universal_threshold(beta, d, n, c=1.0):
    """lambda = c beta sqrt(2 ln(d) / n)"""
    return c * beta * math.sqrt(2.0 * math.log(d) / n)


def train_soft_threshold(data, beta, c=1.0):
    """Projection onto the soft-thresholded ML estimate of h"""
    _check_training(data)
    if not c > 0:
        raise DomainError(f'threshold multiplier must be positive, got {c}')
    lam = universal_threshold(beta, data.d, data.n, c)
    h_st = soft_threshold(_ml_direction(data), lam)
    return _linear_rule(RuleKind.SOFT_THRESHOLD, h_st, threshold=lam, retained=int(np.count_nonzero(h_st)))


def train_bayes_oracle(theta):
    """The MAP rule of the true parameters; no training data involved"""
    return TrainedRule(kind=RuleKind.BAYES_ORACLE, d=theta.d, theta=theta)


def train_coin_flip(seed, d):
    return TrainedRule(kind=RuleKind.COIN_FLIP, d=d, rng=make_rng(seed))


def predict(rule, x):
    """
    Labels for one vector or a stack of row vectors
    @type rule: TrainedRule
    @return: A label, or an array of labels for a stack
    """
    rows, single = as_rows(x, rule.d)
    if rule.kind is RuleKind.BAYES_ORACLE:
        labels = map_classify(rule.theta, rows)
    elif rule.kind is RuleKind.COIN_FLIP:
        labels = np.where(rule.rng.random(rows.shape[0]) < 0.5, -1, 1)
    else:
        labels = np.where(rows @ rule.weight + rule.offset >= 0, 1, -1)
    return int(labels[0]) if single else labels


def _noise_level(theta):
    return theta.cov.noise_level


# name -> factory(data, theta, aux_seed, options)
_TRAINERS = {
    'BayesOracle': lambda data, theta, seed, opts: train_bayes_oracle(theta),
    'MatchedFilter': lambda data, theta, seed, opts: train_matched_filter(data),
    'PluginML': lambda data, theta, seed, opts: train_plugin_ml(data, Known(theta.cov)),
    'PluginMLPooled': lambda data, theta, seed, opts: train_plugin_ml(data, PooledML()),
    'MLProjection': lambda data, theta, seed, opts: train_ml_projection(data, _noise_level(theta)),
    'SoftThreshold': lambda data, theta, seed, opts: train_soft_threshold(
        data, _noise_level(theta), opts.get('soft_threshold_c', 1.0)),
    'CoinFlip': lambda data, theta, seed, opts: train_coin_flip(seed, theta.d),
}

TRAINER_NAMES = tuple(_TRAINERS)


def get_trainer(name, **options):
    """
    Retrieves a trainer callable (data, theta, aux_seed) -> TrainedRule by name.
    aux_seed feeds rules with their own randomness (CoinFlip).
    @return: The trainer, or None when the name is unknown
    """
    factory = _TRAINERS.get(name)
    if factory is None:
        lgr.warning(f'Trainer {name} does not exist')
        return None

    def trainer(data, theta, aux_seed=0):
        return factory(data, theta, aux_seed, options)

    trainer.__name__ = name
    return trainer
