import os
import pytest
import numpy as np
import yaml
from hidim.analytic import Spherical, RankOnePlusSpherical
from hidim.paramsets import sample_sphere_uniform, theta_sphere, theta_sensing_aware
from hidim.sweep import FixedRule, SphereFamily, SweepPlan


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_h(rng):
    return sample_sphere_uniform(8, rng)


@pytest.fixture
def sphere_theta(unit_h):
    return theta_sphere(unit_h, 4.0)


@pytest.fixture
def sensing_theta(unit_h):
    return theta_sensing_aware(unit_h, gamma=1.5, beta=0.5, alpha=3.0, midpoint=0.25)


@pytest.fixture
def rank_one_cov(unit_h):
    return RankOnePlusSpherical(unit_h, 1.5, 0.5)


@pytest.fixture
def spherical_cov():
    return Spherical(0.5)


@pytest.fixture
def small_plan():
    return SweepPlan(
        d_grid=(16, 32), n_rule=FixedRule(4), family=SphereFamily(4.0),
        classifiers=('MatchedFilter', 'CoinFlip'), theta_draws=3,
        replicates_per_theta=20, test_points_per_replicate=50, master_seed=7)


@pytest.fixture
def valid_config(tmpdir):
    return {
        'output_path': str(os.path.join(tmpdir, 'out')), 'threads': 1, 'plot': False, 'timing': False,
        'master_seed': 11,
        'sweep': {
            'd_grid': [64], 'n_rule': {'kind': 'fixed', 'n': 4},
            'family': {'kind': 'sphere', 'alpha': 4.0}, 'classifiers': ['MatchedFilter'],
            'theta_draws': 1, 'replicates_per_theta': 4, 'test_points_per_replicate': 50},
        'curves': {'d': 16, 'exp_rates': [0.5], 'poly_exponents': [1.0]}}


@pytest.fixture
def settings_file(tmpdir, valid_config):
    def write_settings(config=None, name='settings.yaml'):
        path = os.path.join(tmpdir, name)
        with open(path, 'w') as f:
            yaml.safe_dump(valid_config if config is None else config, f)
        return path
    return write_settings
