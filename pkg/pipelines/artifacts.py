"""
Escrita dos artefatos de execução: JSON, CSV em precisão total, datasets
Parquet particionados das réplicas e o manifesto de cada diretório de saída.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
import pyarrow as pa
import pyarrow.parquet as pq

SOFTWARE_VERSION = "1.0.0"
MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    subcommand: str
    argv: List[str]
    config: Dict
    seed: Optional[int]
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    version: str = SOFTWARE_VERSION
    duration_seconds: float = 0.0


def write_json(data: Dict, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # json usa repr dos floats: precisão total, sem formatação de locale
    path.write_text(json.dumps(data, indent=2, allow_nan=True) + "\n", encoding='utf-8')
    return path


def read_json(path: Path) -> Dict:
    return json.loads(Path(path).read_text(encoding='utf-8'))


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator='\n')
    return path


def write_replicate_dataset(
    df: pd.DataFrame,
    base_path: Path,
    partition_cols: List[str],
    schema: Optional[pa.Schema] = None,
) -> None:
    """
    Escreve as réplicas em um dataset Parquet particionado. Nomes de arquivo
    fixos (part-{i}) mantêm reexecuções idênticas.
    """
    if df.empty:
        logging.info("DataFrame de réplicas vazio, nenhuma escrita necessária.")
        return
    try:
        table = pa.Table.from_pandas(df, schema=schema, preserve_index=False)
        logging.info(f"Escrevendo {len(df)} réplicas em {base_path} particionado por {partition_cols}")
        pq.write_to_dataset(
            table,
            root_path=str(base_path),
            partition_cols=partition_cols,
            basename_template='part-{i}.parquet',
            existing_data_behavior='delete_matching',
        )
    except Exception as e:
        logging.error(f"Falha ao escrever o dataset Parquet em {base_path}: {e}", exc_info=True)
        raise


def write_manifest(manifest: RunManifest, output_dir: Path) -> Path:
    return write_json(asdict(manifest), Path(output_dir) / MANIFEST_NAME)


def load_manifest(path: Path) -> RunManifest:
    data = read_json(path)
    try:
        return RunManifest(**data)
    except TypeError as e:
        raise ValueError(f"Manifesto inválido em {path}: {e}") from e
