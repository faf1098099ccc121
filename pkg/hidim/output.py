"""
Result files: the sweep csv, its reader, the static SVG charts drawn from written csv
files only, and the diagnostics table.
"""
import csv
import logging
from collections import defaultdict

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

lgr = logging.getLogger()

FIELDNAMES = ['d', 'n', 'family', 'classifier', 'theta', 'trials', 'p_hat', 'ci_low', 'ci_high',
              'resamples', 'wall_ms']
INT_FIELDS = ('d', 'n', 'trials', 'resamples')
FLOAT_FIELDS = ('p_hat', 'ci_low', 'ci_high', 'wall_ms')


def _num(value):
    return f'{value:.10g}'


def save_csv(result, path, timing=True):
    """
    Saves sweep rows to a csv file, sorted by (d, classifier, theta) with max and mean
    first in every group.
    @param result: The sweep result
    @type result: SweepResult
    @param timing: Writes wall_ms as 0 when False, so reruns are byte-identical
    @return: Number of rows written
    @rtype: int
    """
    rows = sorted(result.rows, key=lambda row: row.sort_key)
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=FIELDNAMES, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            est = row.estimate
            writer.writerow({
                'd': row.d, 'n': row.n, 'family': row.family, 'classifier': row.classifier,
                'theta': row.theta, 'trials': est.trials, 'p_hat': _num(est.p_hat),
                'ci_low': _num(est.ci_low), 'ci_high': _num(est.ci_high),
                'resamples': est.resample_events, 'wall_ms': _num(row.wall_ms if timing else 0.0)})
    lgr.info(f'Saved {len(rows)} rows to {path}')
    return len(rows)


def load_csv(path):
    """
    Loads a csv written by save_csv
    @return: One dict per row with numeric fields converted
    @rtype: list
    """
    rows = []
    with open(path, newline='') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != FIELDNAMES:
            raise ValueError(f'{path} is not a sweep result file')
        for row in reader:
            for key in INT_FIELDS:
                row[key] = int(row[key])
            for key in FLOAT_FIELDS:
                row[key] = float(row[key])
            rows.append(row)
    return rows


def plot_error_curves(csv_path, svg_path, bayes_error=None):
    """
    Error-vs-d chart of the max rows of every classifier with their confidence bands,
    a 0.5 reference line and, when given, the Bayes error floor.
    """
    series = defaultdict(list)
    for row in load_csv(csv_path):
        if row['theta'] == 'max':
            series[row['classifier']].append(row)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for classifier in sorted(series):
        points = sorted(series[classifier], key=lambda r: r['d'])
        ds = [r['d'] for r in points]
        ax.plot(ds, [r['p_hat'] for r in points], marker='o', label=classifier)
        ax.fill_between(ds, [r['ci_low'] for r in points], [r['ci_high'] for r in points], alpha=0.2)
    ax.axhline(0.5, color='black', linestyle='--', linewidth=1, label='chance')
    if bayes_error is not None:
        ax.axhline(bayes_error, color='grey', linestyle=':', linewidth=1, label='Bayes error')
    ax.set_xscale('log', base=2)
    ax.set_xlabel('d')
    ax.set_ylabel('worst-case error probability')
    ax.set_ylim(0.0, 0.55)
    ax.legend(loc='lower right')
    fig.tight_layout()
    fig.savefig(svg_path, format='svg')
    plt.close(fig)
    lgr.info(f'Saved chart to {svg_path}')


def plot_sparsity_curves(csv_path, svg_path):
    """Sorted magnitude profiles from a csv written by write_sparsity_curves"""
    series = defaultdict(list)
    with open(csv_path, newline='') as f:
        for row in csv.DictReader(f):
            series[f"{row['class']} {row['param']}"].append((int(row['k']), float(row['magnitude'])))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in sorted(series):
        ks, magnitudes = zip(*series[label])
        ax.plot(ks, magnitudes, label=label)
    ax.set_xscale('log')
    ax.set_yscale('log')
    ax.set_xlabel('k')
    ax.set_ylabel('|h_(k)|')
    ax.legend(loc='upper right')
    fig.tight_layout()
    fig.savefig(svg_path, format='svg')
    plt.close(fig)
    lgr.info(f'Saved chart to {svg_path}')


def format_diagnostics(report):
    """
    @type report: DiagnosticReport
    @return: The printable table
    @rtype: str
    """
    lines = [f'{"quantity":<20} {"closed_form":>14} {"empirical":>14} {"relative_error":>15} '
             f'{"tolerance":>9} status']
    for row in report.rows:
        rel = '-' if row.relative_error != row.relative_error else f'{row.relative_error:.4f}'
        lines.append(f'{row.quantity:<20} {row.closed_form:>14.6g} {row.empirical:>14.6g} {rel:>15} '
                     f'{row.tolerance:>9} {"pass" if row.passed else "FAIL"}')
    lines.append('')
    lines.append('W quantiles')
    for q, value in report.w_quantiles.items():
        lines.append(f'{q:>5.0%} {value:.6f}')
    return '\n'.join(lines)
