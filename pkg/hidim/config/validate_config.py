import os
import logging
import numbers

import yaml

from ..classifiers import TRAINER_NAMES
from ..errors import InvalidPlanError
from ..sweep import (ExplicitRule, FixedRule, PowerRule, SensingAwareFamily, SparseExpFamily,
                     SparsePolyFamily, SphereFamily, SweepPlan)

lgr = logging.getLogger()

# A number, or a [low, high] pair drawn uniformly per theta
RANGE = 'range'

VALID_CONFIG = {
    'output_path': (str, 'results'),
    'log_path': (str, ''),
    'settings': (str, ''),
    'threads': (int, 1),
    'plot': (bool, True),
    'timing': (bool, False),
    'master_seed': (int, 0),
    'sweep': (dict, {
        'd_grid': (list, [64, 256, 1024, 4096]),
        'n_rule': (dict, {
            'kind': (str, 'power'),
            'gamma': (float, 0.25),
            'n': (int, 1),
            'values': (list, []),
        }),
        'family': (dict, {
            'kind': (str, 'sphere'),
            'alpha': (float, 4.0),
            'a': (float, 0.5),
            'b': (float, 1.0),
            'beta': (RANGE, 1.0),
            'gamma': (RANGE, 1.0),
            'midpoint': (RANGE, 0.0),
        }),
        'classifiers': (list, ['MatchedFilter', 'PluginML', 'MLProjection', 'CoinFlip']),
        'theta_draws': (int, 8),
        'replicates_per_theta': (int, None),
        'test_points_per_replicate': (int, 512),
        'soft_threshold_c': (float, 1.0),
    }),
    'curves': (dict, {
        'd': (int, 256),
        'exp_rates': (list, [0.5, 0.8, 0.95]),
        'poly_exponents': (list, [0.75, 1.0, 2.0]),
    }),
}

N_RULES = ('power', 'fixed', 'explicit')
FAMILIES = ('sphere', 'sensing_aware', 'sparse_exp', 'sparse_poly')


class ConfigError(Exception):
    def __init__(self, *args):
        self.args = args

    def __str__(self):
        message = self.args[0] if self.args else None
        if message:
            return f'ConfigError: {message} config is invalid'
        return 'ConfigError: the configuration passed is invalid'


def _is_number(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _check_value(value, expected, key):
    """Type-checks one leaf value and returns it normalized"""
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(key)
    elif expected is int:
        if not isinstance(value, numbers.Integral) or isinstance(value, bool):
            raise ConfigError(key)
        value = int(value)
    elif expected is float:
        if not _is_number(value):
            raise ConfigError(key)
        value = float(value)
    elif expected is RANGE:
        if isinstance(value, (list, tuple)):
            if len(value) != 2 or not all(_is_number(v) for v in value) or value[0] > value[1]:
                raise ConfigError(key)
            value = [float(v) for v in value]
        elif _is_number(value):
            value = float(value)
        else:
            raise ConfigError(key)
    elif not isinstance(value, expected):
        raise ConfigError(key)
    return value


def apply_schema(section, schema, prefix=''):
    """
    Checks a config mapping against a VALID_CONFIG style schema, rejecting unknown keys
    and filling in defaults for missing ones
    @return: The normalized mapping
    @rtype: dict
    """
    if not isinstance(section, dict):
        raise ConfigError(prefix.rstrip('.') or 'root')
    for key in section:
        if key not in schema:
            raise ConfigError(f'{prefix}{key}')
    normalized = {}
    for key, (expected, default) in schema.items():
        value = section.get(key)
        if expected is dict:
            normalized[key] = apply_schema(value if value is not None else {}, default, f'{prefix}{key}.')
        elif value is None:
            normalized[key] = list(default) if isinstance(default, list) else default
        else:
            normalized[key] = _check_value(value, expected, f'{prefix}{key}')
    return normalized


def _positive(value, key):
    values = value if isinstance(value, list) else [value]
    if not all(v > 0 for v in values):
        raise ConfigError(key)


def validate_sweep(sweep):
    """Range checks of the sweep section"""
    d_grid = sweep['d_grid']
    if not d_grid or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 2 for d in d_grid):
        raise ConfigError('sweep.d_grid')

    rule = sweep['n_rule']
    if rule['kind'] not in N_RULES:
        raise ConfigError('sweep.n_rule.kind')
    if rule['kind'] == 'power' and not 0 < rule['gamma'] < 1:
        raise ConfigError('sweep.n_rule.gamma')
    if rule['kind'] == 'fixed' and rule['n'] < 1:
        raise ConfigError('sweep.n_rule.n')
    if rule['kind'] == 'explicit' and (
            len(rule['values']) != len(d_grid) or not all(isinstance(n, int) and n >= 1 for n in rule['values'])):
        raise ConfigError('sweep.n_rule.values')

    family = sweep['family']
    if family['kind'] not in FAMILIES:
        raise ConfigError('sweep.family.kind')
    _positive(family['alpha'], 'sweep.family.alpha')
    if family['kind'] == 'sparse_exp' and not 0 < family['a'] < 1:
        raise ConfigError('sweep.family.a')
    if family['kind'] == 'sparse_poly' and not family['b'] > 0.5:
        raise ConfigError('sweep.family.b')
    if family['kind'] == 'sensing_aware':
        _positive(family['beta'], 'sweep.family.beta')
        gammas = family['gamma'] if isinstance(family['gamma'], list) else [family['gamma']]
        if any(g < 0 for g in gammas):
            raise ConfigError('sweep.family.gamma')

    classifiers = sweep['classifiers']
    if not classifiers or any(name not in TRAINER_NAMES for name in classifiers):
        raise ConfigError('sweep.classifiers')
    for key in ('theta_draws', 'test_points_per_replicate'):
        if sweep[key] < 1:
            raise ConfigError(f'sweep.{key}')
    if sweep['replicates_per_theta'] is not None and sweep['replicates_per_theta'] < 1:
        raise ConfigError('sweep.replicates_per_theta')
    _positive(sweep['soft_threshold_c'], 'sweep.soft_threshold_c')


def validate_curves(curves):
    if curves['d'] < 1:
        raise ConfigError('curves.d')
    if not all(_is_number(a) and 0 < a < 1 for a in curves['exp_rates']):
        raise ConfigError('curves.exp_rates')
    if not all(_is_number(b) and b > 0.5 for b in curves['poly_exponents']):
        raise ConfigError('curves.poly_exponents')


def validate_output_path(path, config):
    """Validates the output path defined, creating the directory when missing"""
    if not path or not isinstance(path, str):
        raise ConfigError('output_path')
    if not os.path.exists(path):
        os.makedirs(path)
    config['output_path'] = os.path.abspath(path)


def validate_conf(conf, create_output=True):
    """
    Validates a config before running anything, filling in defaults in place.
    Raises ConfigError for invalid settings and OSError when the output directory
    cannot be created.
    @rtype: dict
    """
    normalized = apply_schema(conf, VALID_CONFIG)
    if normalized['threads'] < 1:
        raise ConfigError('threads')
    if normalized['master_seed'] < 0:
        raise ConfigError('master_seed')
    validate_sweep(normalized['sweep'])
    validate_curves(normalized['curves'])
    build_plan(normalized)
    conf.clear()
    conf.update(normalized)
    if create_output:
        validate_output_path(conf['output_path'], conf)
    return conf


def _build_rule(rule):
    if rule['kind'] == 'power':
        return PowerRule(rule['gamma'])
    if rule['kind'] == 'fixed':
        return FixedRule(rule['n'])
    return ExplicitRule(tuple(rule['values']))


def _build_family(family):
    kind = family['kind']
    if kind == 'sphere':
        return SphereFamily(family['alpha'])
    if kind == 'sparse_exp':
        return SparseExpFamily(family['a'], family['alpha'])
    if kind == 'sparse_poly':
        return SparsePolyFamily(family['b'], family['alpha'])

    def freeze(value):
        return tuple(value) if isinstance(value, list) else value
    return SensingAwareFamily(family['alpha'], freeze(family['beta']), freeze(family['gamma']),
                              freeze(family['midpoint']))


def build_plan(conf):
    """
    Turns a validated config into a SweepPlan
    @rtype: SweepPlan
    """
    sweep = conf['sweep']
    try:
        return SweepPlan(
            d_grid=tuple(sweep['d_grid']),
            n_rule=_build_rule(sweep['n_rule']),
            family=_build_family(sweep['family']),
            classifiers=tuple(sweep['classifiers']),
            theta_draws=sweep['theta_draws'],
            replicates_per_theta=sweep['replicates_per_theta'],
            test_points_per_replicate=sweep['test_points_per_replicate'],
            master_seed=conf['master_seed'],
            soft_threshold_c=sweep['soft_threshold_c'],
        )
    except InvalidPlanError as ex:
        lgr.error(str(ex))
        raise ConfigError('sweep')


def dump_config(conf, path):
    """
    Writes a resolved config back as yaml; parsing and validating the file again
    yields the same settings
    """
    with open(path, 'w') as f:
        yaml.safe_dump(conf, f, default_flow_style=False, sort_keys=True)
    lgr.info(f'Saved resolved config to {path}')
    return True
