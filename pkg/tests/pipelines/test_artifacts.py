"""
Testes para a escrita de artefatos (pipelines/artifacts.py).

Testes:
- `test_write_json_keeps_full_precision`: Floats voltam idênticos após a releitura.
- `test_csv_keeps_full_precision`: CSV com o repr mais curto relido sem perda.
- `test_manifest_round_trip`: write_manifest/load_manifest preservam os campos.
- `test_load_manifest_rejects_unknown_fields`: Manifesto com campos estranhos é inválido.
- `test_write_replicate_dataset_is_repeatable`: Reescrever o dataset mantém os mesmos arquivos.
- `test_write_replicate_dataset_empty`: DataFrame vazio não cria nada.
"""

import json

import pandas as pd
import pytest

from pipelines.artifacts import (
    MANIFEST_NAME,
    RunManifest,
    load_manifest,
    read_json,
    write_csv,
    write_json,
    write_manifest,
    write_replicate_dataset,
)


def test_write_json_keeps_full_precision(tmp_path):
    value = 0.1 + 0.2
    path = write_json({'x': value, 'nested': {'y': [1 / 3]}}, tmp_path / 'out' / 'data.json')
    data = read_json(path)
    assert data['x'] == value and data['nested']['y'][0] == 1 / 3


def test_csv_keeps_full_precision(tmp_path):
    df = pd.DataFrame({'t': [1 / 3, 2 / 7]})
    path = write_csv(df, tmp_path / 'values.csv')
    assert pd.read_csv(path, float_precision='round_trip')['t'].tolist() == [1 / 3, 2 / 7]


def test_manifest_round_trip(tmp_path):
    manifest = RunManifest(subcommand='fit', argv=['fit', 'events.csv', '--q', '2'], config={'d_max': 3}, seed=7,
                           inputs=['events.csv'], outputs=['fit.json'], duration_seconds=1.5)
    path = write_manifest(manifest, tmp_path)
    assert path.name == MANIFEST_NAME
    assert load_manifest(path) == manifest


def test_load_manifest_rejects_unknown_fields(tmp_path):
    path = tmp_path / MANIFEST_NAME
    path.write_text(json.dumps({'subcommand': 'fit', 'argv': [], 'config': {}, 'seed': 0, 'extra': 1}), encoding='utf-8')
    with pytest.raises(ValueError, match="Manifesto inválido"):
        load_manifest(path)


def test_write_replicate_dataset_is_repeatable(tmp_path):
    df = pd.DataFrame({'n': [10, 10, 30], 'replicate': [0, 1, 0], 'ari': [1.0, 0.5, 0.75]})
    base = tmp_path / 'replicates'
    write_replicate_dataset(df, base, ['n'])
    first = sorted(p.relative_to(base) for p in base.rglob('*.parquet'))
    write_replicate_dataset(df, base, ['n'])
    second = sorted(p.relative_to(base) for p in base.rglob('*.parquet'))
    assert first == second
    loaded = pd.read_parquet(base).sort_values(['replicate', 'ari']).reset_index(drop=True)
    assert len(loaded) == 3


def test_write_replicate_dataset_empty(tmp_path):
    write_replicate_dataset(pd.DataFrame(), tmp_path / 'nothing', ['n'])
    assert not (tmp_path / 'nothing').exists()
