import os
import pytest
from hidim.output import save_csv, load_csv, plot_error_curves, plot_sparsity_curves, format_diagnostics, FIELDNAMES
from hidim.paramsets import ExpSparsity, PolySparsity, write_sparsity_curves
from hidim.sweep import run_sweep, lemma2_diagnostics


@pytest.fixture
def saved_csv(tmpdir, small_plan):
    def save(name='results.csv', threads=1, timing=False):
        path = os.path.join(tmpdir, name)
        save_csv(run_sweep(small_plan, threads=threads), path, timing=timing)
        return path
    return save


def test_save_csv_schema(saved_csv):
    path = saved_csv()
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == 'd,n,family,classifier,theta,trials,p_hat,ci_low,ci_high,resamples,wall_ms'
    assert len(lines) == 1 + 2 * 2 * (2 + 3)
    first = lines[1].split(',')
    assert first[:5] == ['16', '4', 'sphere:alpha=4', 'CoinFlip', 'max']
    assert first[-1] == '0', 'wall_ms is zeroed when timing is off'
    assert float(first[7]) <= float(first[6]) <= float(first[8])


def test_load_csv(saved_csv):
    rows = load_csv(saved_csv())
    assert list(rows[0]) == FIELDNAMES
    assert isinstance(rows[0]['d'], int) and isinstance(rows[0]['p_hat'], float)
    keys = [(row['d'], row['classifier']) for row in rows]
    assert keys == sorted(keys), 'Rows are sorted by dimension and classifier'
    for row in rows:
        assert row['ci_low'] <= row['p_hat'] <= row['ci_high']


def test_load_csv_fail(tmpdir):
    path = os.path.join(tmpdir, 'other.csv')
    with open(path, 'w') as f:
        f.write('a,b\n1,2\n')
    with pytest.raises(ValueError):
        load_csv(path)


def test_csv_is_byte_identical_across_thread_counts(saved_csv):
    with open(saved_csv('one.csv', threads=1), 'rb') as f:
        one = f.read()
    with open(saved_csv('eight.csv', threads=8), 'rb') as f:
        eight = f.read()
    assert one == eight


def test_timing_only_changes_wall_ms(saved_csv):
    timed = load_csv(saved_csv('timed.csv', timing=True))
    untimed = load_csv(saved_csv('untimed.csv', timing=False))
    for a, b in zip(timed, untimed):
        assert {k: v for k, v in a.items() if k != 'wall_ms'} == {k: v for k, v in b.items() if k != 'wall_ms'}
    assert all(row['wall_ms'] == 0 for row in untimed)


def test_plot_error_curves(tmpdir, saved_csv):
    path = saved_csv()
    with open(path, 'rb') as f:
        before = f.read()
    svg_path = os.path.join(tmpdir, 'errors.svg')
    plot_error_curves(path, svg_path, bayes_error=0.02275013)
    with open(svg_path) as f:
        assert '<svg' in f.read()
    with open(path, 'rb') as f:
        assert f.read() == before, 'Plotting never touches the csv'


def test_plot_sparsity_curves(tmpdir):
    csv_path = os.path.join(tmpdir, 'curves.csv')
    write_sparsity_curves([ExpSparsity(0.8, 30), PolySparsity(1.0, 30)], csv_path)
    svg_path = os.path.join(tmpdir, 'curves.svg')
    plot_sparsity_curves(csv_path, svg_path)
    assert os.path.getsize(svg_path) > 0


def test_format_diagnostics():
    table = format_diagnostics(lemma2_diagnostics(1000, 10, 1.0, 10000, seed=1))
    lines = table.splitlines()
    assert lines[0].split() == ['quantity', 'closed_form', 'empirical', 'relative_error', 'tolerance', 'status']
    var_row = next(line for line in lines if line.startswith('var(HtV)'))
    assert var_row.split()[1] == '0.1'
    assert 'W quantiles' in table
