"""
Interface de linha de comando do PPSBM.

Subcomandos: simulate, fit, select-q, bootstrap, metrics, reproduce, rerun.
Cada execução grava seus artefatos e um `manifest.json` no diretório de saída;
`rerun <manifest>` repete a execução a partir do argv registrado.

Códigos de saída: 0 sucesso, 2 erro de uso, 1 erro de execução. Erros são
emitidos no stderr como uma linha JSON {"error": ..., "message": ...}.

Uso, a partir da raiz do projeto:
`python -m pipelines.cli fit events.csv --q 2 --estimator histogram --dmax 3 --seed 7`
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

# Adiciona o diretório raiz ao PYTHONPATH
root_dir = Path(__file__).parent.parent
sys.path.append(str(root_dir))

from estimation.selection import icl, select_Q
from estimation.sparse import run_vem_sparse
from estimation.vem import ESTIMATORS, MAX_WORKERS, FitConfig, FitResult, run_vem
from evaluation.bootstrap import bootstrap_ci
from evaluation.metrics import DEFAULT_RISK_GRID, adjusted_rand_index, align_groups
from ingestion.event_stream import load_event_csv, write_event_csv
from pipelines.artifacts import RunManifest, load_manifest, read_json, write_csv, write_json, write_manifest
from pipelines.run_all import STAGE_ORDER, ReproduceSettings, run_full_suite
from simulation.ppsbm_simulator import IntensityModel, simulate_ppsbm, simulate_sparse, spawn_generator
from simulation.scenarios import SCENARIO1_PHIS, scenario1, scenario2

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - [PPSBM-CLI] - %(message)s'
)

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_USAGE_ERROR = 2

DEFAULT_REPLICATES = 50
DEFAULT_LEVEL = 0.9

# Parâmetro de FitConfig -> opção de linha de comando
FIT_FLAGS = {
    'd_max': '--dmax',
    'bandwidth': '--bandwidth',
    'epsilon': '--epsilon',
    'nb_iter': '--nb-iter',
    'fix_iter': '--fix-iter',
    'fix_eps': '--fix-eps',
    'n_perturb': '--n-perturb',
    'perc_perturb': '--perc-perturb',
    'l_part': '--l-part',
    'intensity_floor': '--intensity-floor',
    'grid_size': '--grid-size',
}


class UsageError(Exception):
    """Argumentos inválidos (código de saída 2)."""


class JsonErrorParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({'error': kind, 'message': message}, ensure_ascii=False) + "\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--seed', type=int, default=None, help="Semente (padrão: config ou 0).")
    parser.add_argument('--workers', type=int, default=None, help=f"Tamanho do pool (padrão {MAX_WORKERS}).")
    parser.add_argument('--config', type=Path, default=None, help="Arquivo JSON de configuração.")
    parser.add_argument('--output-dir', '-o', type=Path, default=Path('.'), help="Diretório de saída.")


def _add_fit_options(parser: argparse.ArgumentParser) -> None:
    types = {f.name: f.type for f in fields(FitConfig)}
    for name, flag in FIT_FLAGS.items():
        kind = int if types[name] in (int, 'int') else float
        parser.add_argument(flag, dest=name, type=kind, default=None)
    parser.add_argument('--estimator', choices=ESTIMATORS, default=None)
    parser.add_argument('--directed', action=argparse.BooleanOptionalAction, default=None,
                        help="Modo direcionado (padrão: metadados do arquivo).")
    parser.add_argument('--sparse', action='store_true', default=None)
    parser.add_argument('--n', type=int, default=None, help="Número de nós (padrão: inferido).")
    parser.add_argument('--T', dest='horizon', type=float, default=None, help="Horizonte (padrão: inferido).")


def build_parser() -> argparse.ArgumentParser:
    parser = JsonErrorParser(prog='ppsbm', description="PPSBM: agrupamento de redes de interação temporais.")
    sub = parser.add_subparsers(dest='command', required=True)

    sim = sub.add_parser('simulate', help="Simula eventos de um cenário ou modelo.")
    sim.add_argument('scenario', choices=('scenario1', 'scenario2', 'model'))
    sim.add_argument('--phi', type=float, choices=SCENARIO1_PHIS, default=None)
    sim.add_argument('--n', type=int, default=None)
    sim.add_argument('--truth', type=Path, default=None, help="Descritor JSON do modelo (cenário 'model').")
    sim.add_argument('--beta', type=float, default=None, help="Probabilidade uniforme de ativação (variante esparsa).")
    _add_common(sim)

    fit = sub.add_parser('fit', help="Ajusta o PPSBM com Q grupos.")
    fit.add_argument('events', type=Path)
    fit.add_argument('--q', type=int, required=True)
    _add_fit_options(fit)
    _add_common(fit)

    sel = sub.add_parser('select-q', help="Escolhe Q pelo ICL.")
    sel.add_argument('events', type=Path)
    sel.add_argument('--q-max', type=int, required=True)
    _add_fit_options(sel)
    _add_common(sel)

    boot = sub.add_parser('bootstrap', help="Bandas de confiança por bootstrap paramétrico.")
    boot.add_argument('fit', type=Path)
    boot.add_argument('--replicates', '-B', type=int, default=None, help=f"Réplicas (padrão {DEFAULT_REPLICATES}).")
    boot.add_argument('--level', type=float, default=None, help=f"Nível (padrão {DEFAULT_LEVEL}).")
    boot.add_argument('--n', type=int, default=None)
    _add_common(boot)

    met = sub.add_parser('metrics', help="ARI e riscos L2 de um ajuste contra a verdade.")
    met.add_argument('fit', type=Path)
    met.add_argument('--truth', type=Path, required=True)
    met.add_argument('--grid-size', type=int, default=None, help=f"Pontos da grade (padrão {DEFAULT_RISK_GRID}).")
    _add_common(met)

    rep = sub.add_parser('reproduce', help="Suíte de experimentos.")
    rep.add_argument('stage', choices=STAGE_ORDER + ('all',))
    rep.add_argument('--replicates', type=int, default=None, help=f"Réplicas (padrão {DEFAULT_REPLICATES}).")
    _add_common(rep)

    rerun = sub.add_parser('rerun', help="Repete uma execução a partir do manifesto.")
    rerun.add_argument('manifest', type=Path)
    return parser


def resolve_settings(args: argparse.Namespace, keys: List[str], defaults: Dict) -> Dict:
    """Precedência: opção explícita > arquivo --config > padrão."""
    config = read_json(args.config) if getattr(args, 'config', None) else {}
    unknown = set(config) - set(keys)
    if unknown:
        raise UsageError(f"Chaves desconhecidas no arquivo de configuração: {sorted(unknown)}")
    resolved = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key, defaults.get(key))
        resolved[key] = value
    return resolved


def build_fit_config(args: argparse.Namespace) -> Dict:
    keys = list(FIT_FLAGS) + ['estimator', 'directed', 'sparse', 'n', 'horizon', 'seed', 'workers']
    defaults = {f.name: f.default for f in fields(FitConfig)}
    defaults.update({'estimator': 'histogram', 'sparse': False, 'seed': 0, 'workers': MAX_WORKERS})
    return resolve_settings(args, keys, defaults)


def build_bootstrap_config(args: argparse.Namespace) -> Dict:
    defaults = {'replicates': DEFAULT_REPLICATES, 'level': DEFAULT_LEVEL, 'seed': 0, 'workers': MAX_WORKERS}
    return resolve_settings(args, ['replicates', 'level', 'n', 'seed', 'workers'], defaults)


def build_metrics_config(args: argparse.Namespace) -> Dict:
    return resolve_settings(args, ['grid_size'], {'grid_size': DEFAULT_RISK_GRID})


def build_reproduce_config(args: argparse.Namespace) -> Dict:
    defaults = {'replicates': DEFAULT_REPLICATES, 'seed': 0, 'workers': MAX_WORKERS}
    return resolve_settings(args, ['replicates', 'seed', 'workers'], defaults)


def _fit_config(settings: Dict) -> FitConfig:
    return FitConfig(workers=settings['workers'], **{k: settings[k] for k in FIT_FLAGS})


def _load_stream(path: Path, settings: Dict):
    return load_event_csv(path, directed=settings['directed'], n=settings['n'], T=settings['horizon'])


# --- Subcomandos ---

def cmd_simulate(args) -> Dict:
    s = resolve_settings(args, ['phi', 'n', 'beta', 'seed'], {'seed': 0})
    if s['n'] is None:
        raise UsageError("simulate exige --n.")
    if args.scenario == 'scenario1' and s['phi'] is None:
        raise UsageError(f"scenario1 exige --phi em {SCENARIO1_PHIS}.")
    if args.scenario == 'model' and args.truth is None:
        raise UsageError("O cenário 'model' exige --truth.")
    if args.scenario != 'model' and s['beta'] is not None:
        raise UsageError("--beta só se aplica ao cenário 'model'.")
    rng = spawn_generator(s['seed'])

    active = None
    if args.scenario == 'scenario1':
        stream, labels, model = scenario1(s['phi'], s['n'], rng)
    elif args.scenario == 'scenario2':
        stream, labels, model = scenario2(s['n'], rng)
    else:
        model = IntensityModel.from_dict(read_json(args.truth))
        if s['beta'] is not None:
            stream, labels, active = simulate_sparse(model, np.full((model.Q, model.Q), s['beta']), s['n'], rng)
        else:
            stream, labels = simulate_ppsbm(model, s['n'], rng)

    out = args.output_dir
    events_path = out / 'events.csv'
    write_event_csv(stream, events_path)
    truth = {'model': model.to_dict(), 'labels': (labels + 1).tolist(), 'n': stream.n, 'seed': s['seed']}
    if active is not None:
        truth['active'] = active.astype(int).tolist()
        truth['beta'] = s['beta']
    truth_path = write_json(truth, out / 'truth.json')
    logging.info(f"Simulação gravada: {stream.n_events} eventos, n={stream.n}.")
    return {'config': s, 'seed': s['seed'], 'inputs': [] if args.truth is None else [str(args.truth)],
            'outputs': [str(events_path), str(events_path.with_suffix('.json')), str(truth_path)]}


def cmd_fit(args) -> Dict:
    s = build_fit_config(args)
    cfg = _fit_config(s)
    stream = _load_stream(args.events, s)
    rng = spawn_generator(s['seed'])
    fitter = run_vem_sparse if s['sparse'] else run_vem
    result = fitter(stream, args.q, cfg, s['estimator'], rng)
    # ICL só existe para ajustes por histograma
    score = icl(result, stream) if result.estimator == 'histogram' else None
    result = replace(result, seed=s['seed'], icl=score)
    fit_path = write_json(result.to_dict(), args.output_dir / 'fit.json')
    return {'config': {**s, 'q': args.q}, 'seed': s['seed'], 'inputs': [str(args.events)], 'outputs': [str(fit_path)]}


def cmd_select_q(args) -> Dict:
    s = build_fit_config(args)
    if s['estimator'] != 'histogram':
        raise UsageError("select-q só aceita o estimador histogram.")
    cfg = _fit_config(s)
    stream = _load_stream(args.events, s)
    report = select_Q(stream, args.q_max, cfg, seed=s['seed'], sparse=s['sparse'], workers=s['workers'])
    report_path = write_json(report.to_dict(), args.output_dir / 'icl_report.json')
    return {'config': {**s, 'q_max': args.q_max}, 'seed': s['seed'], 'inputs': [str(args.events)],
            'outputs': [str(report_path)]}


def cmd_bootstrap(args) -> Dict:
    s = build_bootstrap_config(args)
    fit = FitResult.from_dict(read_json(args.fit))
    bands = bootstrap_ci(fit, s['replicates'], s['level'], seed=s['seed'], n=s['n'], workers=s['workers'])
    bands_path = write_csv(bands.to_frame(), args.output_dir / 'bands.csv')
    summary_path = write_json(bands.summary(), args.output_dir / 'bootstrap_summary.json')
    return {'config': s, 'seed': s['seed'], 'inputs': [str(args.fit)], 'outputs': [str(bands_path), str(summary_path)]}


def cmd_metrics(args) -> Dict:
    s = build_metrics_config(args)
    fit = FitResult.from_dict(read_json(args.fit))
    truth = read_json(args.truth)
    model = IntensityModel.from_dict(truth['model'])
    labels = np.asarray(truth['labels']) - 1
    if model.Q != fit.Q:
        raise ValueError(f"O ajuste tem Q={fit.Q} mas a verdade tem Q={model.Q}.")
    report = align_groups(fit.alpha_hat, model.alpha, fit.T, fit.directed, grid_size=s['grid_size'])
    metrics = {
        'ari': adjusted_rand_index(fit.map_labels(), labels),
        'total_risk': report.total,
        'permutation': [k + 1 for k in report.permutation],
    }
    metrics_path = write_json(metrics, args.output_dir / 'metrics.json')
    risks_path = write_csv(report.to_frame(), args.output_dir / 'risks.csv')
    logging.info(f"ARI={metrics['ari']:.4f}, risco total={report.total:.4f}")
    return {'config': s, 'seed': None, 'inputs': [str(args.fit), str(args.truth)],
            'outputs': [str(metrics_path), str(risks_path)]}


def cmd_reproduce(args) -> Dict:
    s = build_reproduce_config(args)
    stages = list(STAGE_ORDER) if args.stage == 'all' else [args.stage]
    settings = ReproduceSettings(output_dir=args.output_dir, replicates=s['replicates'], seed=s['seed'],
                                 workers=s['workers'])
    if not run_full_suite(stages, settings):
        raise RuntimeError(f"A suíte '{args.stage}' foi interrompida; veja o log.")
    outputs = sorted(str(p) for p in args.output_dir.glob('*_summary.csv'))
    return {'config': {**s, 'stage': args.stage, 'fit': asdict(settings.cfg)}, 'seed': s['seed'],
            'inputs': [], 'outputs': outputs}


COMMANDS = {
    'simulate': cmd_simulate,
    'fit': cmd_fit,
    'select-q': cmd_select_q,
    'bootstrap': cmd_bootstrap,
    'metrics': cmd_metrics,
    'reproduce': cmd_reproduce,
}


def dispatch(argv: List[str]) -> int:
    start = time.time()
    try:
        args = build_parser().parse_args(argv)
        if args.command == 'rerun':
            manifest = load_manifest(args.manifest)
            logging.info(f"Reexecutando '{manifest.subcommand}' a partir de {args.manifest}")
            return dispatch(manifest.argv)
        args.output_dir.mkdir(parents=True, exist_ok=True)
        record = COMMANDS[args.command](args)
    except UsageError as e:
        logging.error(f"Erro de uso: {e}")
        _emit_error('usage', str(e))
        return EXIT_USAGE_ERROR
    except Exception as e:
        logging.error(f"Falha na execução: {e}", exc_info=True)
        _emit_error(type(e).__name__, str(e))
        return EXIT_RUNTIME_ERROR

    manifest = RunManifest(
        subcommand=args.command,
        argv=list(argv),
        config=record['config'],
        seed=record['seed'],
        inputs=record['inputs'],
        outputs=record['outputs'],
        duration_seconds=time.time() - start,
    )
    write_manifest(manifest, args.output_dir)
    logging.info(f"'{args.command}' concluído em {manifest.duration_seconds:.2f} segundos.")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
