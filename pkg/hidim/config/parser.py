import os
import logging
import argparse
import yaml

lgr = logging.getLogger()

base_path = os.path.dirname(os.path.abspath(__file__))
DEFAULT_SETTINGS_PATH = os.path.normpath(
    os.path.join(base_path, 'settings.yaml'))

THREADS_ENV = 'HIDIM_THREADS'


def build_cli_parser():
    """Argument parser of the hidim command and its subcommands"""
    parser = argparse.ArgumentParser(
        prog='hidim',
        description='Monte Carlo experiments on Gaussian classification with few samples in high dimension.')
    subparsers = parser.add_subparsers(dest='command', required=True)

    for name, help_text in (('sweep', 'Run an error sweep over a dimension grid'),
                            ('curves', 'Tabulate sparsity-class magnitude profiles')):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument(
            'settings', nargs='?', default=None,
            help='The path to a settings yaml file. Defaults to the packaged settings')
        sub.add_argument(
            '--o', '-o', type=str, dest='output_path', action='store', required=False,
            help='The directory where result files are written')
        sub.add_argument(
            '--threads', type=int, dest='threads', action='store', required=False,
            help='Number of worker threads')
        sub.add_argument(
            '--seed', type=int, dest='master_seed', action='store', required=False,
            help='Master seed all random streams derive from')
        sub.add_argument(
            '--no-plot', dest='plot', action='store_const', const=False, default=None,
            help='Skip the SVG charts')

    diagnose = subparsers.add_parser('diagnose', help='Check the concentration identities of V and W')
    diagnose.add_argument('--d', type=int, required=True)
    diagnose.add_argument('--n', type=int, required=True)
    diagnose.add_argument('--beta', type=float, default=1.0)
    diagnose.add_argument('--reps', type=int, default=100000)
    diagnose.add_argument('--seed', type=int, default=0)

    bayes = subparsers.add_parser('bayes', help='Print the Bayes error Q(alpha / 2)')
    bayes.add_argument('--alpha', type=float, required=True)
    return parser


def parse_cli_args(args):
    """Parses arguments passed through cli"""
    return build_cli_parser().parse_args(args)


def parse_yaml_args(settings_path=''):
    """Parses config from a settings yaml file"""
    settings_path = os.path.abspath(
        settings_path) if settings_path else DEFAULT_SETTINGS_PATH
    if os.path.exists(settings_path):
        with open(settings_path, 'r') as yaml_conf:
            settings = yaml.load(yaml_conf, Loader=yaml.SafeLoader)
        return settings if settings else {}
    lgr.error(f'Missing settings file {settings_path}')
    raise FileNotFoundError(f'Settings file {settings_path} does not exist')


def apply_env_overrides(config, environ=None):
    """HIDIM_THREADS takes precedence over both the settings file and cli flags"""
    environ = os.environ if environ is None else environ
    threads = environ.get(THREADS_ENV)
    if threads:
        try:
            config['threads'] = int(threads)
        except ValueError:
            lgr.warning(f'Ignoring {THREADS_ENV}={threads!r}: not an integer')
    return config


def parse_config(args, environ=None):
    """
    Parses all config args for the sweep and curves commands, prioritizing cli args
    over those declared in the settings file
    @return: The merged config and the parsed cli namespace
    @rtype: tuple
    """
    cli_config = parse_cli_args(args)
    settings = getattr(cli_config, 'settings', None)
    config = parse_yaml_args(settings_path=settings)
    if settings:
        config['settings'] = settings
    for k in ('output_path', 'threads', 'master_seed', 'plot'):
        v = getattr(cli_config, k, None)
        if v is not None:
            config[k] = v
    return apply_env_overrides(config, environ), cli_config
