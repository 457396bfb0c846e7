"""
Orquestrador da suíte de experimentos (`reproduce`).

Executa as etapas em sequência e interrompe na primeira falha:
1. scenario1: ARI sobre a grade de φ e n (separação e dificuldade monotônica).
2. selection: frequências de Q̂ pelo ICL no Cenário 2.
3. oracle: riscos L2 dos ajustes por histograma e núcleo contra os oráculos.
4. bootstrap: cobertura das bandas de 90% e contador de réplicas com grupo vazio,
   incluindo a demonstração com um grupo de 3%.

Cada etapa grava um Parquet particionado com as réplicas em
`<saida>/replicates/<etapa>` e um CSV de resumo em `<saida>/<etapa>_summary.csv`.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Hashable, List

import numpy as np
import pandas as pd
import pyarrow as pa

from estimation.selection import select_Q
from estimation.vem import MAX_WORKERS, FitConfig, run_vem
from evaluation.bootstrap import bootstrap_ci
from evaluation.metrics import adjusted_rand_index, align_groups, l2_risk, oracle_estimates
from pipelines.artifacts import write_csv, write_replicate_dataset
from simulation.intensities import ConstantIntensity, PiecewiseConstantIntensity
from simulation.ppsbm_simulator import IntensityModel, sample_memberships, simulate_given_labels, spawn_generator
from simulation.scenarios import SCENARIO1_PHIS, scenario1, scenario1_model, scenario2

# --- Configuração do Logger Principal ---
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - [PPSBM-REPRODUCE] - %(message)s'
)

STAGE_ORDER = ('scenario1', 'selection', 'oracle', 'bootstrap')
SCENARIO1_NS = (10, 30)
SELECTION_N = 50
SELECTION_Q_MAX = 6
ORACLE_N = 50
BOOTSTRAP_N = 30
BOOTSTRAP_PHI = 0.5
BOOTSTRAP_LEVEL = 0.9
SMALL_GROUP_PI = (0.97, 0.03)

SCENARIO1_SCHEMA = pa.schema([
    ('phi', pa.float64()), ('n', pa.int64()), ('replicate', pa.int64()),
    ('ari', pa.float64()), ('J', pa.float64()), ('converged', pa.bool_()),
])
SELECTION_SCHEMA = pa.schema([('replicate', pa.int64()), ('Q_hat', pa.int64()), ('n_events', pa.int64())])
ORACLE_SCHEMA = pa.schema([
    ('replicate', pa.int64()), ('q', pa.int64()), ('l', pa.int64()), ('truth_kind', pa.string()),
    ('histogram', pa.float64()), ('kernel', pa.float64()),
    ('oracle_histogram', pa.float64()), ('oracle_kernel', pa.float64()),
])


@dataclass(frozen=True)
class ReproduceSettings:
    output_dir: Path
    replicates: int = 50
    seed: int = 0
    workers: int = MAX_WORKERS
    cfg: FitConfig = field(default_factory=lambda: FitConfig(workers=1))


def run_replicates(tasks: Dict[Hashable, Callable[[], List[Dict]]], workers: int, label: str) -> List[Dict]:
    """
    Executa as tarefas em paralelo; falhas individuais são registradas e
    ignoradas. Os registros voltam na ordem das chaves.
    """
    results: Dict[Hashable, List[Dict]] = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_key = {executor.submit(task): key for key, task in tasks.items()}
        for future in as_completed(future_to_key):
            key = future_to_key[future]
            try:
                results[key] = future.result()
            except Exception as e:
                logging.error(f"Réplica {key} de '{label}' falhou: {e}", exc_info=True)
    if not results:
        raise RuntimeError(f"Todas as réplicas de '{label}' falharam.")
    logging.info(f"'{label}': {len(results)}/{len(tasks)} réplicas concluídas.")
    return [record for key in sorted(results) for record in results[key]]


# --- Etapa 1: Cenário 1 ---

def _scenario1_replicate(phi_idx: int, n: int, k: int, settings: ReproduceSettings) -> List[Dict]:
    phi = SCENARIO1_PHIS[phi_idx]
    rng = spawn_generator(settings.seed, 1, phi_idx, n, k)
    stream, labels, _ = scenario1(phi, n, rng)
    fit = run_vem(stream, 2, settings.cfg, 'histogram', rng)
    return [{
        'phi': phi, 'n': n, 'replicate': k,
        'ari': adjusted_rand_index(fit.map_labels(), labels), 'J': fit.J, 'converged': fit.converged,
    }]


def run_scenario1_stage(settings: ReproduceSettings) -> pd.DataFrame:
    tasks = {
        (phi_idx, n, k): (lambda phi_idx=phi_idx, n=n, k=k: _scenario1_replicate(phi_idx, n, k, settings))
        for phi_idx in range(len(SCENARIO1_PHIS)) for n in SCENARIO1_NS for k in range(settings.replicates)
    }
    df = pd.DataFrame(run_replicates(tasks, settings.workers, 'scenario1'))
    write_replicate_dataset(df, settings.output_dir / 'replicates' / 'scenario1', ['n'], SCENARIO1_SCHEMA)
    summary = (
        df.groupby(['phi', 'n'])['ari']
        .agg(median_ari='median', mean_ari='mean', min_ari='min', max_ari='max')
        .reset_index()
    )
    write_csv(summary, settings.output_dir / 'scenario1_summary.csv')
    return summary


# --- Etapa 2: Seleção de Q ---

def _selection_replicate(k: int, settings: ReproduceSettings) -> List[Dict]:
    rng = spawn_generator(settings.seed, 2, k)
    stream, _, _ = scenario2(SELECTION_N, rng)
    report = select_Q(stream, SELECTION_Q_MAX, settings.cfg, seed=int(rng.integers(0, 2 ** 31 - 1)))
    return [{'replicate': k, 'Q_hat': report.Q_hat, 'n_events': stream.n_events}]


def run_selection_stage(settings: ReproduceSettings) -> pd.DataFrame:
    tasks = {k: (lambda k=k: _selection_replicate(k, settings)) for k in range(settings.replicates)}
    df = pd.DataFrame(run_replicates(tasks, settings.workers, 'selection'))
    write_replicate_dataset(df, settings.output_dir / 'replicates' / 'selection', ['Q_hat'], SELECTION_SCHEMA)
    counts = df['Q_hat'].value_counts().reindex(range(1, SELECTION_Q_MAX + 1), fill_value=0)
    summary = pd.DataFrame({'Q_hat': counts.index, 'count': counts.values, 'frequency': counts.values / len(df)})
    write_csv(summary, settings.output_dir / 'selection_summary.csv')
    return summary


# --- Etapa 3: Riscos contra oráculos ---

def _truth_kind(intensity) -> str:
    return 'piecewise_constant' if isinstance(intensity, (ConstantIntensity, PiecewiseConstantIntensity)) else 'smooth'


def _oracle_replicate(k: int, settings: ReproduceSettings) -> List[Dict]:
    rng = spawn_generator(settings.seed, 3, k)
    stream, labels, model = scenario2(ORACLE_N, rng)
    Q, T = model.Q, model.T
    fitted = {
        estimator: align_groups(run_vem(stream, Q, settings.cfg, estimator, rng).alpha_hat, model.alpha, T, False).risks
        for estimator in ('histogram', 'kernel')
    }
    oracles = {
        estimator: oracle_estimates(stream, labels, Q, estimator, settings.cfg)[0]
        for estimator in ('histogram', 'kernel')
    }
    records = []
    for q in range(Q):
        for l in range(q, Q):
            truth = model.alpha[q][l]
            records.append({
                'replicate': k, 'q': q + 1, 'l': l + 1, 'truth_kind': _truth_kind(truth),
                'histogram': float(fitted['histogram'][q, l]),
                'kernel': float(fitted['kernel'][q, l]),
                'oracle_histogram': l2_risk(oracles['histogram'][q][l], truth, T),
                'oracle_kernel': l2_risk(oracles['kernel'][q][l], truth, T),
            })
    return records


def run_oracle_stage(settings: ReproduceSettings) -> pd.DataFrame:
    tasks = {k: (lambda k=k: _oracle_replicate(k, settings)) for k in range(settings.replicates)}
    df = pd.DataFrame(run_replicates(tasks, settings.workers, 'oracle'))
    write_replicate_dataset(df, settings.output_dir / 'replicates' / 'oracle', ['truth_kind'], ORACLE_SCHEMA)
    summary = (
        df.groupby(['q', 'l', 'truth_kind'])[['histogram', 'kernel', 'oracle_histogram', 'oracle_kernel']]
        .mean()
        .reset_index()
    )
    summary['histogram_within_2x_oracle'] = summary['histogram'] <= 2.0 * summary['oracle_histogram']
    write_csv(summary, settings.output_dir / 'oracle_summary.csv')
    return summary


# --- Etapa 4: Bootstrap ---

def _bootstrap_setting(name: str, model: IntensityModel, labels: np.ndarray, settings: ReproduceSettings, key: int) -> Dict:
    rng = spawn_generator(settings.seed, 4, key)
    stream = simulate_given_labels(model.alpha, labels, model.T, model.directed, rng)
    fit = run_vem(stream, model.Q, settings.cfg, 'histogram', rng)
    bands = bootstrap_ci(
        fit, settings.replicates, BOOTSTRAP_LEVEL, seed=int(rng.integers(0, 2 ** 31 - 1)),
        cfg=settings.cfg, workers=settings.workers,
    )
    write_csv(bands.to_frame(), settings.output_dir / f'bootstrap_bands_{name}.csv')
    # Verdade na numeração do ajuste: par (σ(q), σ(l)) recebe α^(q,l)
    perm = align_groups(fit.alpha_hat, model.alpha, model.T, model.directed).permutation
    Q = model.Q
    truth_in_fit_order = [[None] * Q for _ in range(Q)]
    for q in range(Q):
        for l in range(Q):
            truth_in_fit_order[perm[q]][perm[l]] = model.alpha[q][l]
    coverage = bands.coverage(truth_in_fit_order)
    off_diagonal = coverage[~np.eye(Q, dtype=bool)]
    return {
        'setting': name,
        'n_replicates': bands.n_replicates,
        'n_failed': bands.n_failed,
        'n_empty_group': bands.n_empty_group,
        'empty_fraction': bands.n_empty_group / bands.n_replicates,
        'coverage_in': float(np.mean(np.diag(coverage))),
        'coverage_out': float(np.mean(off_diagonal)) if off_diagonal.size else float('nan'),
    }


def run_bootstrap_stage(settings: ReproduceSettings) -> pd.DataFrame:
    rng = spawn_generator(settings.seed, 4)
    base = scenario1_model(BOOTSTRAP_PHI)
    labels = sample_memberships(base.pi, BOOTSTRAP_N, rng)

    small = IntensityModel(pi=np.array(SMALL_GROUP_PI), alpha=base.alpha, T=base.T, directed=base.directed)
    small_labels = sample_memberships(small.pi, BOOTSTRAP_N, rng)
    if not np.any(small_labels == 1):
        # O grupo pequeno precisa existir nos dados observados
        small_labels[0] = 1

    records = [
        _bootstrap_setting('scenario1', base, labels, settings, 1),
        _bootstrap_setting('small_group', small, small_labels, settings, 2),
    ]
    summary = pd.DataFrame(records)
    write_csv(summary, settings.output_dir / 'bootstrap_summary.csv')
    return summary


# --- Orquestração ---

def run_full_suite(stages: List[str], settings: ReproduceSettings) -> bool:
    """
    Executa as etapas pedidas na ordem canônica; para na primeira falha.
    Retorna True se todas concluíram.
    """
    stage_functions = {
        'scenario1': run_scenario1_stage,
        'selection': run_selection_stage,
        'oracle': run_oracle_stage,
        'bootstrap': run_bootstrap_stage,
    }
    unknown = [s for s in stages if s not in stage_functions]
    if unknown:
        raise ValueError(f"Etapas desconhecidas: {unknown}")
    ordered = [s for s in STAGE_ORDER if s in stages]

    suite_start_time = time.time()
    logging.info("=" * 80)
    logging.info(">>> INICIANDO SUÍTE DE EXPERIMENTOS PPSBM <<<")
    logging.info("=" * 80)
    success = False
    try:
        settings.output_dir.mkdir(parents=True, exist_ok=True)
        for idx, name in enumerate(ordered, start=1):
            logging.info("-" * 80)
            logging.info(f">>> [ETAPA {idx}/{len(ordered)}] EXECUTANDO: {name}...")
            stage_start_time = time.time()
            stage_functions[name](settings)
            stage_duration = time.time() - stage_start_time
            logging.info(f">>> [ETAPA {idx}/{len(ordered)}] CONCLUÍDA: {name} finalizada em {stage_duration:.2f} segundos.")
        logging.info("=" * 80)
        logging.info(">>> SUCESSO: Suíte completa finalizada com êxito. <<<")
        success = True
    except Exception as e:
        logging.error("=" * 80)
        logging.error(f"!!! FALHA CRÍTICA: A suíte foi interrompida. Erro: {e} !!!", exc_info=True)
    finally:
        suite_duration = time.time() - suite_start_time
        logging.info(f"Tempo total de execução da suíte: {suite_duration:.2f} segundos.")
        logging.info("=" * 80)
    return success
