import math
import pytest
import numpy as np
from hidim.analytic import difficulty_of, q_function
from hidim.classifiers import get_trainer
from hidim.errors import InsufficientTrialsError, InvalidPlanError, DomainError
from hidim.estimates import CI_Z, ErrorEstimate
from hidim.paramsets import (cap_region, estimate_region_volume, sample_sphere_region, sample_sphere_uniform,
                             theta_sphere, volume_split_errors)
from hidim.sweep import (PowerRule, FixedRule, ExplicitRule, SphereFamily, SensingAwareFamily, SparseExpFamily,
                         SparsePolyFamily, SweepPlan, SweepRow, SweepResult, Verdict, estimate_error,
                         estimate_mixture_error, run_sweep, trend_test, matched_filter_oracle, lemma2_diagnostics,
                         w_concentration)


def e1(d):
    h = np.zeros(d)
    h[0] = 1.0
    return h


@pytest.mark.parametrize('d, gamma, n', [(64, 0.25, 3), (256, 0.25, 4), (1024, 0.25, 6), (4096, 0.25, 8), (64, 0.5, 8)])
def test_power_rule(d, gamma, n):
    assert PowerRule(gamma).n_for(d, 0) == n


def test_n_rules():
    assert FixedRule(5).n_for(1000, 3) == 5
    assert ExplicitRule((3, 9)).n_for(200, 1) == 9
    with pytest.raises(InvalidPlanError):
        PowerRule(1.0).validate((64,))
    with pytest.raises(InvalidPlanError):
        ExplicitRule((3,)).validate((64, 128))


def test_family_labels_have_no_commas():
    families = [SphereFamily(4.0), SensingAwareFamily(2.0, beta=(0.5, 1.0)), SparseExpFamily(0.5, 4.0),
                SparsePolyFamily(1.0, 4.0)]
    for family in families:
        assert ',' not in family.label
    assert SphereFamily(4.0).label == 'sphere:alpha=4'
    assert not SensingAwareFamily(2.0).sup_is_exact


@pytest.mark.parametrize('family', [SphereFamily(4.0), SensingAwareFamily(2.0, beta=(0.5, 1.0), gamma=(0.0, 2.0)),
                                    SparseExpFamily(0.5, 4.0), SparsePolyFamily(1.0, 2.0)])
def test_family_draws_keep_difficulty(family):
    theta = family.draw(32, np.random.default_rng(3))
    assert theta.d == 32
    assert difficulty_of(theta).alpha == pytest.approx(family.alpha)


def test_sweep_plan_defaults_and_validation():
    plan = SweepPlan(d_grid=[64], n_rule=PowerRule(0.25), family=SphereFamily(4.0), classifiers=['MatchedFilter'])
    assert plan.replicates_per_theta == 196, 'Smallest R with R * 512 >= 100000'
    assert plan.n_for(0) == 3
    base = dict(d_grid=(64,), n_rule=FixedRule(3), family=SphereFamily(4.0), classifiers=('MatchedFilter',))
    with pytest.raises(InvalidPlanError):
        SweepPlan(**dict(base, classifiers=('Perceptron',)))
    with pytest.raises(InvalidPlanError):
        SweepPlan(**dict(base, replicates_per_theta=1, test_points_per_replicate=50))
    with pytest.raises(InvalidPlanError):
        SweepPlan(**dict(base, theta_draws=0))
    with pytest.raises(InvalidPlanError):
        SweepPlan(**dict(base, d_grid=()))


def test_estimate_error_bayes_floor():
    theta = theta_sphere(e1(5), 2.0)
    estimate = estimate_error(get_trainer('BayesOracle'), theta, n=4, m=1000, replicates=200, seed=1)
    assert estimate.trials == 200000
    assert estimate.ci_low <= estimate.p_hat <= estimate.ci_high
    assert estimate.within(q_function(1.0), k=5)


def test_estimate_error_coin_flip(sphere_theta):
    estimate = estimate_error(get_trainer('CoinFlip'), sphere_theta, n=4, m=500, replicates=100, seed=2)
    assert estimate.within(0.5, k=5)
    assert estimate.replicates == 100
    assert estimate.replicate_sigma == pytest.approx(estimate.sigma, rel=0.3)


def test_replicate_sigma_from_per_replicate_counts():
    # two replicates of 100 test points with 10 and 30 errors: rates 0.1 and 0.3
    estimate = ErrorEstimate.from_counts(40, 200, replicates=2, errors_sq=10 ** 2 + 30 ** 2)
    assert estimate.replicate_sigma == pytest.approx(0.1)
    assert ErrorEstimate.from_counts(40, 200).replicate_sigma == estimate.sigma


def test_estimate_error_rejects_small_budgets(sphere_theta):
    with pytest.raises(InvalidPlanError):
        estimate_error(get_trainer('CoinFlip'), sphere_theta, n=4, m=9, replicates=10, seed=2)


def test_estimate_error_is_thread_independent(sphere_theta):
    trainer = get_trainer('MatchedFilter')
    single = estimate_error(trainer, sphere_theta, n=3, m=40, replicates=30, seed=4, threads=1)
    pooled = estimate_error(trainer, sphere_theta, n=3, m=40, replicates=30, seed=4, threads=4)
    assert single == pooled


def test_untrainable_replicates_flag_the_estimate(sphere_theta):
    estimate = estimate_error(get_trainer('PluginMLPooled'), sphere_theta, n=1, m=50, replicates=4, seed=5)
    assert not estimate.valid
    assert estimate.untrainable == 4
    assert estimate.resample_events > 0


def test_matched_filter_oracle():
    mean, se = matched_filter_oracle(1000, 10, 0.5, 200000, 8)
    assert 0.3 < mean < 0.4
    assert se < 1e-3
    with pytest.raises(DomainError):
        matched_filter_oracle(1, 10, 0.5, 100, 8)


@pytest.mark.parametrize('n', [5, 10, 20])
@pytest.mark.parametrize('d', [100, 400, 1600])
def test_matched_filter_agrees_with_oracle(d, n):
    theta = theta_sphere(sample_sphere_uniform(d, np.random.default_rng(d)), 4.0)
    estimate = estimate_error(get_trainer('MatchedFilter'), theta, n=n, m=250, replicates=400, seed=d + n)
    oracle, oracle_se = matched_filter_oracle(d, n, 0.5, 200000, seed=n)
    assert abs(estimate.p_hat - oracle) < 3 * math.hypot(estimate.replicate_sigma, oracle_se)


def test_run_sweep_rows(small_plan):
    result = run_sweep(small_plan)
    assert len(result.rows) == 2 * 2 * (2 + 3)
    group = [row.theta for row in result.rows if row.d == 16 and row.classifier == 'MatchedFilter']
    assert group == ['max', 'mean', '0', '1', '2']
    for d in (16, 32):
        for name in ('MatchedFilter', 'CoinFlip'):
            top = result.cell(d, name, 'max')
            assert top.estimate.p_hat >= result.cell(d, name, 'mean').estimate.p_hat
            assert top.estimate.p_hat == max(result.cell(d, name, str(k)).estimate.p_hat for k in range(3))
            assert result.cell(d, name, 'mean').estimate.trials == 3 * 20 * 50
            assert top.n == 4
    assert result.invalid_cells == []
    assert result.metadata['sup_is_lower_bound'] is False
    assert [row.d for row in result.series('CoinFlip')] == [16, 32]


def test_run_sweep_is_deterministic(small_plan):
    first = run_sweep(small_plan, threads=1)
    second = run_sweep(small_plan, threads=4)
    assert [(r.d, r.classifier, r.theta, r.estimate) for r in first.rows] == \
        [(r.d, r.classifier, r.theta, r.estimate) for r in second.rows]


def test_sphere_family_symmetry():
    """Per-theta errors of rotation-equivariant rules agree up to Monte Carlo noise"""
    plan = SweepPlan(d_grid=(16,), n_rule=FixedRule(4), family=SphereFamily(4.0),
                     classifiers=('MatchedFilter', 'PluginML'), theta_draws=8, replicates_per_theta=400,
                     test_points_per_replicate=50, master_seed=3)
    result = run_sweep(plan, threads=2)
    for name in plan.classifiers:
        values = [result.cell(16, name, str(k)).estimate.p_hat for k in range(8)]
        assert max(values) - min(values) < 0.05


def test_harder_problems_err_more():
    def mean_error(alpha):
        plan = SweepPlan(d_grid=(16,), n_rule=FixedRule(4), family=SphereFamily(alpha),
                         classifiers=('MatchedFilter',), theta_draws=2, replicates_per_theta=200,
                         test_points_per_replicate=50, master_seed=5)
        return run_sweep(plan).cell(16, 'MatchedFilter', 'mean').estimate
    hard, easy = mean_error(2.0), mean_error(4.0)
    assert hard.p_hat > easy.p_hat


def test_oracle_dominance():
    """No trained rule beats the Bayes oracle on random small problems"""
    rng = np.random.default_rng(17)
    for trial in range(20):
        d = int(rng.integers(2, 7))
        n = int(rng.integers(4, 21))
        theta = theta_sphere(sample_sphere_uniform(d, rng), float(rng.uniform(1.0, 4.0)))
        oracle = estimate_error(get_trainer('BayesOracle'), theta, n, 200, 25, seed=trial)
        for name in ('MatchedFilter', 'PluginML'):
            rule = estimate_error(get_trainer(name), theta, n, 200, 25, seed=trial)
            assert oracle.p_hat <= rule.p_hat + 3 * math.hypot(oracle.sigma, rule.sigma)


def test_mixture_error_volume_split():
    """Recombining cap and complement errors by volume recovers the whole-sphere error"""
    d, n, alpha = 50, 7, 4.0
    region = cap_region(0.146)
    vol = estimate_region_volume(d, region, 20000, np.random.default_rng(1))
    assert 0.2 < vol < 0.4
    trainer = get_trainer('MatchedFilter')

    def sampler_for(part):
        return lambda rng: theta_sphere(sample_sphere_region(d, part, rng), alpha)

    err_in = estimate_mixture_error(trainer, sampler_for(region), n, 100, 300, seed=2)
    err_out = estimate_mixture_error(trainer, sampler_for(region.complement), n, 100, 300, seed=3)
    whole = estimate_mixture_error(trainer, lambda rng: theta_sphere(sample_sphere_uniform(d, rng), alpha),
                                   n, 100, 300, seed=4)
    combined = volume_split_errors(err_in, err_out, vol)
    assert abs(combined.p_hat - whole.p_hat) < 3 * math.hypot(combined.half_width / CI_Z, whole.replicate_sigma)


def test_lemma2_diagnostics():
    report = lemma2_diagnostics(1000, 10, 1.0, 40000, seed=6)
    assert report.passed
    closed = {row.quantity: row.closed_form for row in report.rows}
    assert closed['var(HtV)'] == pytest.approx(0.1)
    assert closed['E[1+2HtV+|V|^2]'] == pytest.approx(101.0)
    assert closed['var(1+2HtV+|V|^2)'] == pytest.approx(20.4)
    assert closed['E[|V|^4]'] == pytest.approx(10020.0)
    assert sorted(report.w_quantiles) == [0.05, 0.25, 0.5, 0.75, 0.95]
    assert report.w_quantiles[0.05] <= report.w_quantiles[0.95]
    with pytest.raises(InsufficientTrialsError):
        lemma2_diagnostics(1000, 10, 1.0, 10, seed=6)


def _series_result(classifier, values, trials=10000):
    rows = [SweepRow(d, 4, 'sphere:alpha=4', classifier, 'max',
                     ErrorEstimate.from_counts(int(round(p * trials)), trials), 0.0)
            for d, p in zip((64, 256, 1024, 4096), values)]
    return SweepResult(rows=rows)


def test_trend_test():
    assert trend_test(_series_result('CoinFlip', [0.5, 0.5, 0.5]), 'CoinFlip', 0.5) is Verdict.PASS
    assert trend_test(_series_result('MatchedFilter', [0.4, 0.3, 0.2]), 'MatchedFilter', 0.5) is Verdict.FAIL
    assert trend_test(_series_result('MatchedFilter', [0.2, 0.3, 0.35]), 'MatchedFilter', 0.5) is Verdict.FAIL
    assert trend_test(_series_result('MatchedFilter', [0.2, 0.3]), 'MatchedFilter', 0.5) is Verdict.INCONCLUSIVE


def test_w_concentration():
    rows = w_concentration((64, 1024, 4096), 0.25, 0.5, (0.15,), 2000, seed=3)
    assert [row['n'] for row in rows] == [3, 6, 8]
    assert rows[0]['exceedance'] > 0.9
    assert rows[-1]['exceedance'] < 0.1, 'W should concentrate at zero as d grows'


@pytest.mark.slow
def test_impossibility_trend():
    plan = SweepPlan(d_grid=(64, 256, 1024, 4096), n_rule=PowerRule(0.25), family=SphereFamily(4.0),
                     classifiers=('MatchedFilter', 'PluginML', 'MLProjection', 'CoinFlip'), theta_draws=2,
                     replicates_per_theta=100, test_points_per_replicate=500, master_seed=2024)
    result = run_sweep(plan, threads=4)
    for name in ('MatchedFilter', 'PluginML', 'MLProjection'):
        assert result.cell(4096, name).estimate.p_hat >= 0.40
    assert trend_test(result, 'MatchedFilter', 0.43) is Verdict.PASS
    assert trend_test(result, 'CoinFlip', 0.5) is Verdict.PASS
    oracle, oracle_se = matched_filter_oracle(4096, 8, 0.5, 200000, seed=1)
    assert abs(result.cell(4096, 'MatchedFilter', 'mean').estimate.p_hat - oracle) < 0.02


@pytest.mark.slow
def test_sparse_positive_control():
    plan = SweepPlan(d_grid=(4096,), n_rule=FixedRule(100), family=SparseExpFamily(0.5, 4.0),
                     classifiers=('SoftThreshold', 'MatchedFilter'), theta_draws=1, replicates_per_theta=40,
                     test_points_per_replicate=500, master_seed=99)
    result = run_sweep(plan, threads=4)
    assert result.cell(4096, 'SoftThreshold').estimate.p_hat <= 0.06
    assert result.cell(4096, 'MatchedFilter').estimate.p_hat >= 0.22
