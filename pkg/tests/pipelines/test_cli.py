"""
Testes para a interface de linha de comando (pipelines/cli.py).

Testes:
- `test_usage_error_exit_code`: Argumentos inválidos saem com código 2 e uma linha JSON no stderr.
- `test_runtime_error_exit_code`: Arquivo inexistente sai com código 1.
- `test_simulate_requires_n`: Validação própria do simulate é erro de uso.
- `test_config_precedence`: Opção explícita > arquivo --config > padrão.
- `test_unknown_config_key`: Chaves desconhecidas no --config são erro de uso.
- `test_config_file_for_bootstrap_metrics_reproduce`: O --config também vale para bootstrap, metrics e reproduce.
- `test_phi_outside_grid_is_usage_error`: φ fora da grade do cenário 1 sai com código 2.
- `test_simulate_fit_metrics_pipeline`: simulate -> fit -> metrics gera os artefatos e o manifesto; o truth.json registra a semente.
- `test_rerun_reproduces_fit`: rerun do manifesto gera o mesmo fit.json.
"""

import json

import pytest

from pipelines.artifacts import read_json
from pipelines.cli import (
    EXIT_OK,
    EXIT_RUNTIME_ERROR,
    EXIT_USAGE_ERROR,
    UsageError,
    DEFAULT_LEVEL,
    DEFAULT_REPLICATES,
    build_bootstrap_config,
    build_fit_config,
    build_metrics_config,
    build_reproduce_config,
    build_parser,
    main,
)


def _last_error(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith('{')]
    return json.loads(lines[-1])


def test_usage_error_exit_code(capsys):
    assert main(['fit']) == EXIT_USAGE_ERROR
    assert _last_error(capsys)['error'] == 'usage'
    assert main(['unknown-command']) == EXIT_USAGE_ERROR


def test_runtime_error_exit_code(tmp_path, capsys):
    code = main(['fit', str(tmp_path / 'missing.csv'), '--q', '2', '-o', str(tmp_path)])
    assert code == EXIT_RUNTIME_ERROR
    assert _last_error(capsys)['error'] == 'FileNotFoundError'


def test_simulate_requires_n(tmp_path, capsys):
    assert main(['simulate', 'scenario2', '-o', str(tmp_path)]) == EXIT_USAGE_ERROR
    assert '--n' in _last_error(capsys)['message']


def test_config_precedence(tmp_path):
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({'d_max': 2, 'seed': 5, 'estimator': 'kernel'}), encoding='utf-8')
    args = build_parser().parse_args(['fit', 'events.csv', '--q', '2', '--dmax', '1', '--config', str(config)])
    settings = build_fit_config(args)
    assert settings['d_max'] == 1
    assert settings['seed'] == 5
    assert settings['estimator'] == 'kernel'
    assert settings['nb_iter'] == 50


def test_unknown_config_key(tmp_path):
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({'dmax': 2}), encoding='utf-8')
    args = build_parser().parse_args(['fit', 'events.csv', '--q', '2', '--config', str(config)])
    with pytest.raises(UsageError):
        build_fit_config(args)


def test_config_file_for_bootstrap_metrics_reproduce(tmp_path):
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({'level': 0.5, 'replicates': 20}), encoding='utf-8')
    args = build_parser().parse_args(['bootstrap', 'fit.json', '--config', str(config)])
    settings = build_bootstrap_config(args)
    assert settings['level'] == 0.5 and settings['replicates'] == 20

    args = build_parser().parse_args(['bootstrap', 'fit.json', '-B', '30', '--config', str(config)])
    assert build_bootstrap_config(args)['replicates'] == 30

    args = build_parser().parse_args(['bootstrap', 'fit.json'])
    settings = build_bootstrap_config(args)
    assert settings['level'] == DEFAULT_LEVEL and settings['replicates'] == DEFAULT_REPLICATES

    grid = tmp_path / 'grid.json'
    grid.write_text(json.dumps({'grid_size': 128}), encoding='utf-8')
    args = build_parser().parse_args(['metrics', 'fit.json', '--truth', 'truth.json', '--config', str(grid)])
    assert build_metrics_config(args)['grid_size'] == 128

    suite = tmp_path / 'suite.json'
    suite.write_text(json.dumps({'replicates': 7}), encoding='utf-8')
    args = build_parser().parse_args(['reproduce', 'oracle', '--config', str(suite)])
    assert build_reproduce_config(args)['replicates'] == 7


def test_phi_outside_grid_is_usage_error(tmp_path, capsys):
    code = main(['simulate', 'scenario1', '--phi', '0.3', '--n', '5', '-o', str(tmp_path)])
    assert code == EXIT_USAGE_ERROR
    assert _last_error(capsys)['error'] == 'usage'


def test_simulate_fit_metrics_pipeline(tmp_path):
    sim_dir, fit_dir, met_dir = tmp_path / 'sim', tmp_path / 'fit', tmp_path / 'metrics'

    assert main(['simulate', 'scenario1', '--phi', '0.5', '--n', '12', '--seed', '3', '-o', str(sim_dir)]) == EXIT_OK
    assert (sim_dir / 'events.csv').exists() and (sim_dir / 'events.json').exists()
    truth = read_json(sim_dir / 'truth.json')
    assert len(truth['labels']) == 12 and min(truth['labels']) >= 1
    assert truth['seed'] == 3

    assert main([
        'fit', str(sim_dir / 'events.csv'), '--q', '2', '--seed', '4', '--workers', '1',
        '--l-part', '1', '-o', str(fit_dir),
    ]) == EXIT_OK
    fit = read_json(fit_dir / 'fit.json')
    assert fit['Q'] == 2 and fit['seed'] == 4 and fit['icl'] is not None
    assert fit['n'] == 12 and fit['directed'] is False

    assert main([
        'metrics', str(fit_dir / 'fit.json'), '--truth', str(sim_dir / 'truth.json'),
        '--grid-size', '256', '-o', str(met_dir),
    ]) == EXIT_OK
    metrics = read_json(met_dir / 'metrics.json')
    assert -1.0 <= metrics['ari'] <= 1.0
    assert sorted(metrics['permutation']) == [1, 2]
    assert (met_dir / 'risks.csv').exists()

    manifest = read_json(fit_dir / 'manifest.json')
    assert manifest['subcommand'] == 'fit'
    assert manifest['outputs'] == [str(fit_dir / 'fit.json')]
    assert manifest['config']['d_max'] == 3 and manifest['config']['l_part'] == 1


def test_rerun_reproduces_fit(tmp_path):
    sim_dir, fit_dir = tmp_path / 'sim', tmp_path / 'fit'
    assert main(['simulate', 'scenario2', '--n', '9', '--seed', '1', '-o', str(sim_dir)]) == EXIT_OK
    assert main([
        'fit', str(sim_dir / 'events.csv'), '--q', '2', '--seed', '2', '--workers', '2',
        '--estimator', 'kernel', '-o', str(fit_dir),
    ]) == EXIT_OK
    first = read_json(fit_dir / 'fit.json')

    assert main(['rerun', str(fit_dir / 'manifest.json')]) == EXIT_OK
    second = read_json(fit_dir / 'fit.json')
    assert second == first
    assert first['icl'] is None
