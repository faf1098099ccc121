"""
Monte Carlo experiment engine: per-theta and worst-case error estimates along
(d, n/d) -> (infinity, 0) trajectories, plus the concentration diagnostics of the
matched-filter lower bound.
"""
import enum
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace

import numpy as np

from .analytic import q_function
from .classifiers import TRAINER_NAMES, get_trainer, predict
from .datagen import gen_dataset, sample_proof_statistics
from .errors import DomainError, InsufficientTrialsError, InvalidPlanError, UntrainableError
from .estimates import ErrorEstimate
from .paramsets import (ExpSparsity, PolySparsity, make_sparse_h, sample_sphere_uniform,
                        sensing_aware_theta, theta_sphere)
from .utils import STREAM_COIN, STREAM_TEST, STREAM_THETA, STREAM_TRAIN, make_rng, mix

lgr = logging.getLogger()

DEFAULT_TEST_POINTS = 512
TARGET_TRIALS = 100000
MIN_POOLED_TRIALS = 100
MAX_TRAIN_ATTEMPTS = 32
INVALID_FRACTION = 0.1
MIN_DIAGNOSTIC_REPLICATES = 10000
W_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def _fmt(value):
    return f'{value:g}'


def _draw_uniform(value, rng):
    """A scalar passes through, a (low, high) pair is drawn uniformly"""
    if isinstance(value, (tuple, list)):
        low, high = value
        return float(rng.uniform(low, high))
    return float(value)


@dataclass(frozen=True)
class PowerRule:
    """n(d) = ceil(d^gamma) with 0 < gamma < 1, so that n/d -> 0"""

    gamma: float

    def n_for(self, d, index):
        return max(1, math.ceil(d ** self.gamma - 1e-9))

    def validate(self, d_grid):
        if not 0 < self.gamma < 1:
            raise InvalidPlanError(f'power rule needs 0 < gamma < 1, got {self.gamma}')


@dataclass(frozen=True)
class FixedRule:
    n: int

    def n_for(self, d, index):
        return self.n

    def validate(self, d_grid):
        if self.n < 1:
            raise InvalidPlanError(f'n must be at least 1, got {self.n}')


@dataclass(frozen=True)
class ExplicitRule:
    """One n per entry of the d-grid"""

    values: tuple

    def n_for(self, d, index):
        return self.values[index]

    def validate(self, d_grid):
        if len(self.values) != len(d_grid) or any(n < 1 for n in self.values):
            raise InvalidPlanError('explicit n values must be positive, one per grid dimension')


@dataclass(frozen=True)
class SphereFamily:
    alpha: float
    sup_is_exact = True

    @property
    def label(self):
        return f'sphere:alpha={_fmt(self.alpha)}'

    def draw(self, d, rng):
        return theta_sphere(sample_sphere_uniform(d, rng), self.alpha)


@dataclass(frozen=True)
class SensingAwareFamily:
    """gamma, beta and midpoint are scalars or (low, high) ranges drawn per theta"""

    alpha: float
    beta: object = 1.0
    gamma: object = 1.0
    midpoint: object = 0.0
    sup_is_exact = False

    @property
    def label(self):
        parts = [f'alpha={_fmt(self.alpha)}']
        for name in ('beta', 'gamma', 'midpoint'):
            value = getattr(self, name)
            if isinstance(value, (tuple, list)):
                parts.append(f'{name}={_fmt(value[0])}..{_fmt(value[1])}')
            else:
                parts.append(f'{name}={_fmt(value)}')
        return 'sensing_aware:' + ':'.join(parts)

    def draw(self, d, rng):
        h = sample_sphere_uniform(d, rng)
        return sensing_aware_theta(h, _draw_uniform(self.gamma, rng), _draw_uniform(self.beta, rng),
                                   self.alpha, _draw_uniform(self.midpoint, rng)).params


@dataclass(frozen=True)
class SparseExpFamily:
    a: float
    alpha: float
    sup_is_exact = True

    @property
    def label(self):
        return f'sparse_exp:a={_fmt(self.a)}:alpha={_fmt(self.alpha)}'

    def draw(self, d, rng):
        return theta_sphere(make_sparse_h(ExpSparsity(self.a, d), rng), self.alpha)


@dataclass(frozen=True)
class SparsePolyFamily:
    b: float
    alpha: float
    sup_is_exact = True

    @property
    def label(self):
        return f'sparse_poly:b={_fmt(self.b)}:alpha={_fmt(self.alpha)}'

    def draw(self, d, rng):
        return theta_sphere(make_sparse_h(PolySparsity(self.b, d), rng), self.alpha)


@dataclass(frozen=True)
class SweepPlan:
    d_grid: tuple
    n_rule: object
    family: object
    classifiers: tuple
    theta_draws: int = 8
    replicates_per_theta: int = None
    test_points_per_replicate: int = DEFAULT_TEST_POINTS
    master_seed: int = 0
    soft_threshold_c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'd_grid', tuple(int(d) for d in self.d_grid))
        object.__setattr__(self, 'classifiers', tuple(self.classifiers))
        if self.replicates_per_theta is None:
            object.__setattr__(self, 'replicates_per_theta',
                               math.ceil(TARGET_TRIALS / self.test_points_per_replicate))
        self.validate()

    def validate(self):
        if not self.d_grid or any(d < 2 for d in self.d_grid):
            raise InvalidPlanError('d_grid needs at least one dimension, each >= 2')
        self.n_rule.validate(self.d_grid)
        if not self.classifiers:
            raise InvalidPlanError('no classifiers requested')
        for name in self.classifiers:
            if name not in TRAINER_NAMES:
                raise InvalidPlanError(f'unknown classifier {name}')
        for name in ('theta_draws', 'replicates_per_theta', 'test_points_per_replicate'):
            if getattr(self, name) < 1:
                raise InvalidPlanError(f'{name} must be at least 1')
        if self.test_points_per_replicate * self.replicates_per_theta < MIN_POOLED_TRIALS:
            raise InvalidPlanError(f'need at least {MIN_POOLED_TRIALS} pooled trials per theta')
        if self.master_seed < 0:
            raise InvalidPlanError('master_seed must be non-negative')

    def n_for(self, index):
        return self.n_rule.n_for(self.d_grid[index], index)


@dataclass(frozen=True)
class SweepRow:
    d: int
    n: int
    family: str
    classifier: str
    theta: str
    estimate: ErrorEstimate
    wall_ms: float

    @property
    def sort_key(self):
        order = {'max': (0, 0), 'mean': (1, 0)}.get(self.theta)
        return self.d, self.classifier, order if order else (2, int(self.theta))


@dataclass
class SweepResult:
    rows: list
    metadata: dict = field(default_factory=dict)

    def cell(self, d, classifier, theta='max'):
        for row in self.rows:
            if row.d == d and row.classifier == classifier and row.theta == theta:
                return row
        return None

    def series(self, classifier, theta='max'):
        """Rows of one classifier, ordered by d"""
        return sorted((r for r in self.rows if r.classifier == classifier and r.theta == theta),
                      key=lambda r: r.d)

    @property
    def invalid_cells(self):
        return [(r.d, r.classifier) for r in self.rows if r.theta == 'max' and not r.estimate.valid]


def _replicate_counts(named_trainers, theta, n, m, seed, r):
    """
    One replicate: a fresh test set, then for every trainer a training set (resampled with
    the next derived seed while the trainer rejects it), training and counting errors.
    @return: name -> (errors, trials, resample_events, untrainable)
    """
    test = gen_dataset(theta, m, mix(seed, r, STREAM_TEST))
    training = {}
    counts = {}
    for name, trainer in named_trainers:
        rule = None
        attempt = 0
        while attempt < MAX_TRAIN_ATTEMPTS:
            if attempt not in training:
                training[attempt] = gen_dataset(theta, n, mix(seed, r, STREAM_TRAIN, attempt))
            try:
                rule = trainer(training[attempt], theta, mix(seed, r, STREAM_COIN))
                break
            except UntrainableError:
                attempt += 1
        if rule is None:
            lgr.warning(f'{name}: replicate {r} untrainable after {attempt} attempts')
            counts[name] = (0, 0, attempt, 1)
            continue
        errors = int(np.count_nonzero(predict(rule, test.xs) != test.ys))
        counts[name] = (errors, m, attempt, 0)
    return counts


def _timed_replicate(named_trainers, theta, n, m, seed, r):
    start = time.perf_counter()
    counts = _replicate_counts(named_trainers, theta, n, m, seed, r)
    return counts, 1000.0 * (time.perf_counter() - start)


class _Tally:
    """Order-independent integer accumulator of replicate outcomes"""

    def __init__(self):
        self.errors = self.trials = self.resamples = self.untrainable = 0
        self.counted = self.errors_sq = 0

    def add(self, errors, trials, resamples, untrainable):
        self.errors += errors
        self.trials += trials
        self.resamples += resamples
        self.untrainable += untrainable
        if trials:
            self.counted += 1
            self.errors_sq += errors * errors

    def merge(self, other):
        for attr in ('errors', 'trials', 'resamples', 'untrainable', 'counted', 'errors_sq'):
            setattr(self, attr, getattr(self, attr) + getattr(other, attr))

    def estimate(self, replicates):
        valid = self.untrainable <= INVALID_FRACTION * replicates and self.trials > 0
        return ErrorEstimate.from_counts(self.errors, self.trials, self.resamples, self.untrainable, valid,
                                         replicates=self.counted, errors_sq=self.errors_sq)


def _run_tasks(tasks, threads):
    """
    Runs (key, callable) tasks on a thread pool and yields (key, result) as they complete.
    Callers aggregate with order-independent operations only.
    """
    if threads <= 1:
        for key, task in tasks:
            yield key, task()
        return
    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = {executor.submit(task): key for key, task in tasks}
        for future in as_completed(futures):
            yield futures[future], future.result()


def estimate_error(rule_trainer, theta, n, m, replicates, seed, threads=1, name=None):
    """
    Pooled error probability of a trained rule at a fixed theta, averaged over training
    sets and test points, with a 95 % Wilson interval.
    @param rule_trainer: Callable (data, theta, aux_seed) -> TrainedRule
    @param m: Test points per replicate
    @param replicates: Number of independent training sets R
    @param seed: Seed all replicate streams derive from
    @rtype: ErrorEstimate
    """
    if m * replicates < MIN_POOLED_TRIALS:
        raise InvalidPlanError(f'need m * R >= {MIN_POOLED_TRIALS}, got {m * replicates}')
    name = name or getattr(rule_trainer, '__name__', 'rule')
    named = [(name, rule_trainer)]
    tally = _Tally()
    tasks = [(r, lambda r=r: _replicate_counts(named, theta, n, m, seed, r)) for r in range(replicates)]
    for _, counts in _run_tasks(tasks, threads):
        tally.add(*counts[name])
    return tally.estimate(replicates)


def estimate_mixture_error(rule_trainer, theta_sampler, n, m, replicates, seed, threads=1):
    """
    Error probability averaged over a distribution of theta: every replicate draws its
    own theta from theta_sampler(rng) before drawing data.
    @rtype: ErrorEstimate
    """
    name = getattr(rule_trainer, '__name__', 'rule')
    named = [(name, rule_trainer)]

    def replicate(r):
        theta = theta_sampler(make_rng(mix(seed, r, STREAM_THETA)))
        return _replicate_counts(named, theta, n, m, seed, r)

    tally = _Tally()
    for _, counts in _run_tasks([(r, lambda r=r: replicate(r)) for r in range(replicates)], threads):
        tally.add(*counts[name])
    return tally.estimate(replicates)


def run_sweep(plan, threads=1):
    """
    Runs every (d, classifier) cell of a plan: K theta draws per d, R replicates per theta,
    all classifiers sharing training and test data. Emits a per-theta row, a "max" row
    (the empirical supremum over the family) and a pooled "mean" row per cell.
    Results depend only on the plan, never on the number of threads.
    @type plan: SweepPlan
    @rtype: SweepResult
    """
    named = [(name, get_trainer(name, soft_threshold_c=plan.soft_threshold_c)) for name in plan.classifiers]
    R = plan.replicates_per_theta
    m = plan.test_points_per_replicate
    K = plan.theta_draws
    label = plan.family.label

    thetas = {}
    tasks = []
    for index, d in enumerate(plan.d_grid):
        n = plan.n_for(index)
        for k in range(K):
            thetas[d, k] = plan.family.draw(d, make_rng(mix(plan.master_seed, d, k, STREAM_THETA)))
            seed = mix(plan.master_seed, d, k)
            for r in range(R):
                tasks.append(((d, k), lambda th=thetas[d, k], n=n, seed=seed, r=r:
                              _timed_replicate(named, th, n, m, seed, r)))
    lgr.info(f'Running {len(tasks)} replicates over {len(plan.d_grid)} dimension(s) with {threads} thread(s)')

    tallies = {key: {name: _Tally() for name, _ in named} for key in thetas}
    wall_ms = {key: 0.0 for key in thetas}
    remaining = {key: R for key in thetas}
    for key, (counts, elapsed) in _run_tasks(tasks, threads):
        for name, outcome in counts.items():
            tallies[key][name].add(*outcome)
        wall_ms[key] += elapsed
        remaining[key] -= 1
        if not remaining[key]:
            lgr.info(f'Finished d={key[0]} theta {key[1] + 1}/{K}')

    rows = []
    for index, d in enumerate(plan.d_grid):
        n = plan.n_for(index)
        for name, _ in named:
            per_theta = [tallies[d, k][name].estimate(R) for k in range(K)]
            pooled = _Tally()
            for k in range(K):
                pooled.merge(tallies[d, k][name])
            cell_ms = sum(wall_ms[d, k] for k in range(K))
            valid = all(e.valid for e in per_theta)
            worst = max(range(K), key=lambda k: (per_theta[k].p_hat, -k))
            mean = pooled.estimate(R * K)
            rows.append(SweepRow(d, n, label, name, 'max', _with_validity(per_theta[worst], valid), cell_ms))
            rows.append(SweepRow(d, n, label, name, 'mean', _with_validity(mean, valid), cell_ms))
            rows.extend(SweepRow(d, n, label, name, str(k), per_theta[k], wall_ms[d, k]) for k in range(K))
    rows.sort(key=lambda row: row.sort_key)

    result = SweepResult(rows=rows, metadata={
        'family': label,
        'sup_is_lower_bound': not plan.family.sup_is_exact,
        'master_seed': plan.master_seed,
        'resample_events': sum(r.estimate.resample_events for r in rows if r.theta == 'mean'),
    })
    result.metadata['invalid_cells'] = [f'd={d}:{name}' for d, name in result.invalid_cells]
    if result.metadata['invalid_cells']:
        lgr.warning(f'Invalid cells: {", ".join(result.metadata["invalid_cells"])}')
    return result


def _with_validity(estimate, valid):
    if estimate.valid == valid:
        return estimate
    return replace(estimate, valid=valid)


class Verdict(enum.Enum):
    PASS = 'PASS'
    FAIL = 'FAIL'
    INCONCLUSIVE = 'INCONCLUSIVE'


def trend_test(result, classifier, target, slack=0.02):
    """
    PASS when the max-error series of a classifier is nondecreasing in d up to overlapping
    confidence intervals and the last interval reaches target - slack.
    @rtype: Verdict
    """
    series = result.series(classifier, 'max')
    if len(series) < 3:
        return Verdict.INCONCLUSIVE
    for prev, cur in zip(series, series[1:]):
        if cur.estimate.ci_high < prev.estimate.ci_low:
            lgr.info(f'{classifier}: error drops between d={prev.d} and d={cur.d}')
            return Verdict.FAIL
    if series[-1].estimate.ci_high < target - slack:
        return Verdict.FAIL
    return Verdict.PASS


def matched_filter_oracle(d, n, beta, draws, seed):
    """
    E[Q((1 + H^T V) / (beta sqrt(1 + 2 H^T V + ||V||^2)))] by simulating (H^T V, ||V||^2)
    alone. Rotation invariance lets H = e_1, so H^T V ~ N(0, beta^2 / n) and
    ||V||^2 - (H^T V)^2 ~ (beta^2 / n) chi2(d - 1), independently.
    @return: (mean, standard error)
    @rtype: tuple
    """
    if d < 2 or n < 1 or beta <= 0 or draws < 2:
        raise DomainError(f'invalid oracle arguments d={d}, n={n}, beta={beta}, draws={draws}')
    rng = make_rng(seed)
    variance = beta * beta / n
    ht_v = math.sqrt(variance) * rng.standard_normal(draws)
    v_norm_sq = ht_v * ht_v + variance * rng.chisquare(d - 1, draws)
    values = q_function((1.0 + ht_v) / (beta * np.sqrt(1.0 + 2.0 * ht_v + v_norm_sq)))
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(draws))


@dataclass(frozen=True)
class DiagnosticRow:
    quantity: str
    closed_form: float
    empirical: float
    relative_error: float
    tolerance: str
    passed: bool


@dataclass(frozen=True)
class DiagnosticReport:
    d: int
    n: int
    beta: float
    replicates: int
    rows: tuple
    w_quantiles: dict

    @property
    def passed(self):
        return all(row.passed for row in self.rows)


def _relative_row(quantity, closed_form, empirical, tolerance):
    rel = abs(empirical - closed_form) / abs(closed_form)
    return DiagnosticRow(quantity, closed_form, empirical, rel, f'{tolerance:.0%}', rel <= tolerance)


def lemma2_diagnostics(d, n, beta, replicates, seed):
    """
    Empirical moments of H^T V and 1 + 2 H^T V + ||V||^2 against their closed forms,
    with a fresh H per replicate, plus quantiles of W.
    @rtype: DiagnosticReport
    """
    if replicates < MIN_DIAGNOSTIC_REPLICATES:
        raise InsufficientTrialsError(f'diagnostics need at least {MIN_DIAGNOSTIC_REPLICATES} replicates')
    sample = sample_proof_statistics(d, n, beta, replicates, make_rng(seed))
    b2 = beta * beta
    den = sample.denominator
    mean_ht_v = float(sample.ht_v.mean())
    se_ht_v = float(sample.ht_v.std(ddof=1) / math.sqrt(replicates))
    rows = (
        DiagnosticRow('E[HtV]', 0.0, mean_ht_v, float('nan'), '5 SE', abs(mean_ht_v) <= 5.0 * se_ht_v),
        _relative_row('var(HtV)', b2 / n, float(sample.ht_v.var(ddof=1)), 0.05),
        _relative_row('E[1+2HtV+|V|^2]', 1.0 + b2 * d / n, float(den.mean()), 0.01),
        _relative_row('var(1+2HtV+|V|^2)', 4.0 * b2 / n + 2.0 * b2 * b2 * d / n ** 2, float(den.var(ddof=1)), 0.10),
        _relative_row('E[|V|^4]', 2.0 * b2 * b2 * d / n ** 2 + b2 * b2 * d * d / n ** 2,
                      float(np.mean(sample.v_norm_sq ** 2)), 0.05),
    )
    quantiles = dict(zip(W_QUANTILES, (float(q) for q in np.quantile(sample.w, W_QUANTILES))))
    for row in rows:
        lgr.debug(f'{row.quantity}: closed form {row.closed_form:.6g}, empirical {row.empirical:.6g}')
    return DiagnosticReport(d, n, beta, replicates, rows, quantiles)


def w_concentration(d_grid, n_exponent, beta, eps_grid, replicates, seed):
    """
    Empirical P(|W| > eps) along a d-grid with n = ceil(d^n_exponent)
    @return: Rows of dicts with keys d, n, eps, exceedance
    @rtype: list
    """
    rule = PowerRule(n_exponent)
    rule.validate(d_grid)
    rows = []
    for index, d in enumerate(d_grid):
        n = rule.n_for(d, index)
        w = sample_proof_statistics(d, n, beta, replicates, make_rng(mix(seed, d))).w
        for eps in eps_grid:
            rows.append({'d': d, 'n': n, 'eps': eps, 'exceedance': float(np.mean(np.abs(w) > eps))})
    return rows
