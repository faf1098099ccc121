import os
import sys
import logging
import time
from datetime import datetime

import yaml

from hidim.analytic import q_function
from hidim.config.parser import parse_config
from hidim.config.validate_config import ConfigError, build_plan, dump_config, validate_conf
from hidim.errors import DomainError, InsufficientTrialsError
from hidim.output import format_diagnostics, plot_error_curves, plot_sparsity_curves, save_csv
from hidim.paramsets import ExpSparsity, PolySparsity, write_sparsity_curves
from hidim.sweep import lemma2_diagnostics, run_sweep

lgr = logging.getLogger()

EXIT_OK = 0
EXIT_DIAGNOSTIC_FAILED = 1
EXIT_INVALID_CONFIG = 2
EXIT_INVALID_CELLS = 3
EXIT_UNWRITABLE_OUTPUT = 4
EXIT_INSUFFICIENT_TRIALS = 5

LOG_FORMAT = '%(asctime)s %(levelname)s %(message)s'

_installed_handlers = []


def configure_logging(log_path=''):
    """Logs to stderr and, when log_path is set, to a file as well"""
    while _installed_handlers:
        handler = _installed_handlers.pop()
        lgr.removeHandler(handler)
        handler.close()
    lgr.setLevel('INFO')
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(logging.Formatter(LOG_FORMAT))
    lgr.addHandler(stream)
    _installed_handlers.append(stream)
    if log_path:
        file_handler = logging.FileHandler(log_path)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        lgr.addHandler(file_handler)
        _installed_handlers.append(file_handler)


def cmd_sweep(config):
    """
    Runs the configured sweep and writes results.csv, config.yaml, sweep.yaml and
    optionally errors.svg to the output directory
    @param config: A validated config
    @return: Exit code
    @rtype: int
    """
    plan = build_plan(config)
    output_path = config['output_path']
    result = run_sweep(plan, threads=config['threads'])
    csv_path = os.path.join(output_path, 'results.csv')
    save_csv(result, csv_path, timing=config['timing'])
    dump_config(config, os.path.join(output_path, 'config.yaml'))
    with open(os.path.join(output_path, 'sweep.yaml'), 'w') as f:
        yaml.safe_dump(result.metadata, f, default_flow_style=False, sort_keys=True)
    if config['plot']:
        bayes_error = float(q_function(plan.family.alpha / 2.0))
        plot_error_curves(csv_path, os.path.join(output_path, 'errors.svg'), bayes_error)
    if result.invalid_cells:
        lgr.error(f'{len(result.invalid_cells)} cell(s) flagged invalid')
        return EXIT_INVALID_CELLS
    return EXIT_OK


def cmd_curves(config):
    """Writes the magnitude profiles of the configured sparsity classes"""
    curves = config['curves']
    classes = [ExpSparsity(a, curves['d']) for a in curves['exp_rates']]
    classes += [PolySparsity(b, curves['d']) for b in curves['poly_exponents']]
    csv_path = os.path.join(config['output_path'], 'sparsity_curves.csv')
    write_sparsity_curves(classes, csv_path)
    if config['plot']:
        plot_sparsity_curves(csv_path, os.path.join(config['output_path'], 'sparsity_curves.svg'))
    return EXIT_OK


def cmd_diagnose(d, n, beta, replicates, seed):
    """Prints the V and W identity table; exit 0 iff every identity holds"""
    try:
        report = lemma2_diagnostics(d, n, beta, replicates, seed)
    except InsufficientTrialsError as ex:
        lgr.error(str(ex))
        return EXIT_INSUFFICIENT_TRIALS
    print(format_diagnostics(report))
    return EXIT_OK if report.passed else EXIT_DIAGNOSTIC_FAILED


def cmd_bayes(alpha):
    """Prints the Bayes error Q(alpha / 2) to 8 decimals"""
    if not alpha > 0:
        lgr.error(f'alpha must be positive, got {alpha}')
        return EXIT_INVALID_CONFIG
    print(f'{float(q_function(alpha / 2.0)):.8f}')
    return EXIT_OK


def main(args=None):
    """
    Entry point of the hidim command
    @return: Exit code
    @rtype: int
    """
    t_start = time.perf_counter()
    args = sys.argv[1:] if args is None else args
    configure_logging()
    try:
        config, cli = parse_config(args)
    except SystemExit as ex:
        return EXIT_INVALID_CONFIG if ex.code else EXIT_OK
    except (FileNotFoundError, yaml.YAMLError) as ex:
        lgr.error(str(ex))
        return EXIT_INVALID_CONFIG

    try:
        if cli.command == 'bayes':
            return cmd_bayes(cli.alpha)
        if cli.command == 'diagnose':
            return cmd_diagnose(cli.d, cli.n, cli.beta, cli.reps, cli.seed)

        try:
            validate_conf(config)
        except ConfigError as ex:
            lgr.error(str(ex))
            return EXIT_INVALID_CONFIG
        if config['log_path']:
            configure_logging(config['log_path'])
        lgr.info(f'Initialized hidim {cli.command} at {datetime.now().strftime("%d/%m/%y %H:%M %p")}')
        if cli.command == 'sweep':
            code = cmd_sweep(config)
        else:
            code = cmd_curves(config)
    except DomainError as ex:
        lgr.error(str(ex))
        return EXIT_INVALID_CONFIG
    except OSError as ex:
        lgr.error(f'Cannot write output: {ex}')
        return EXIT_UNWRITABLE_OUTPUT

    lgr.info(f'Complete!! hidim ran for {round(time.perf_counter() - t_start, 2)} second(s)')
    return code


if __name__ == '__main__':
    sys.exit(main())
