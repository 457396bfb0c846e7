"""
Bandas de confiança pontuais por bootstrap paramétrico (método percentil).

Para cada réplica b: Z* ~ Multinomial(1, π̂), eventos simulados com α̂^(Z*_i, Z*_j),
reajuste com o mesmo protocolo, alinhamento do reajuste ao ajuste original
pela permutação de risco mínimo e avaliação na grade. As bandas são os
quantis (1 − nível)/2 e 1 − (1 − nível)/2 entre as réplicas.

Réplicas com algum grupo vazio em Z* são mantidas e contadas.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from estimation.statistics import pair_mask
from estimation.vem import FitConfig, FitError, FitResult, run_vem
from evaluation.metrics import align_groups
from simulation.ppsbm_simulator import sample_memberships, simulate_given_labels, spawn_generator

MIN_REPLICATES = 10
DEFAULT_BAND_GRID = 200


@dataclass(frozen=True)
class BootstrapBands:
    grid: np.ndarray
    estimate: np.ndarray   # Q x Q x G
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    level: float
    n_replicates: int
    n_failed: int
    n_empty_group: int
    directed: bool

    def to_frame(self) -> pd.DataFrame:
        """Tabela longa (q, l, t, estimate, lower, median, upper) com grupos 1-based."""
        Q = self.estimate.shape[0]
        frames = []
        for q, l in zip(*np.nonzero(pair_mask(Q, self.directed))):
            frames.append(pd.DataFrame({
                'q': q + 1,
                'l': l + 1,
                't': self.grid,
                'estimate': self.estimate[q, l],
                'lower': self.lower[q, l],
                'median': self.median[q, l],
                'upper': self.upper[q, l],
            }))
        return pd.concat(frames, ignore_index=True)

    def coverage(self, truth: List[List], interior: bool = True) -> np.ndarray:
        """Fração (por par) dos pontos da grade em que lower ≤ α ≤ upper."""
        Q = self.estimate.shape[0]
        points = slice(1, -1) if interior else slice(None)
        grid = self.grid[points]
        result = np.zeros((Q, Q))
        for q in range(Q):
            for l in range(Q):
                values = np.asarray(truth[q][l].evaluate(grid))
                inside = (self.lower[q, l, points] <= values) & (values <= self.upper[q, l, points])
                result[q, l] = inside.mean()
        return result

    def summary(self) -> Dict:
        return {
            'level': self.level,
            'n_replicates': self.n_replicates,
            'n_failed': self.n_failed,
            'n_empty_group': self.n_empty_group,
            'grid_size': len(self.grid),
        }


def _grid_values(alpha: List[List], grid: np.ndarray) -> np.ndarray:
    Q = len(alpha)
    return np.array([[alpha[q][l].evaluate(grid) for l in range(Q)] for q in range(Q)])


def _replicate(fit: FitResult, n: int, cfg: FitConfig, seed: int, k: int, grid: np.ndarray):
    rng = spawn_generator(seed, k)
    labels = sample_memberships(fit.pi, n, rng)
    empty_group = len(np.unique(labels)) < fit.Q
    stream = simulate_given_labels(fit.alpha_hat, labels, fit.T, fit.directed, rng)
    refit = run_vem(stream, fit.Q, cfg, fit.estimator, rng)
    report = align_groups(refit.alpha_hat, fit.alpha_hat, fit.T, fit.directed, grid_size=len(grid))
    perm = np.asarray(report.permutation)
    values = _grid_values(refit.alpha_hat, grid)[np.ix_(perm, perm)]
    return values, empty_group


def bootstrap_ci(
    fit: FitResult,
    B: int,
    level: float,
    seed: int,
    n: Optional[int] = None,
    cfg: Optional[FitConfig] = None,
    workers: int = 1,
    grid_size: int = DEFAULT_BAND_GRID,
) -> BootstrapBands:
    if B < MIN_REPLICATES:
        raise ValueError(f"São necessárias ao menos {MIN_REPLICATES} réplicas (recebido {B}).")
    if not 0.0 < level < 1.0:
        raise ValueError(f"O nível deve estar em (0, 1) (recebido {level}).")
    n = fit.n if n is None else n
    # Paralelismo fica entre réplicas
    cfg = replace(cfg or fit.config, workers=1)
    grid = np.linspace(0.0, fit.T, grid_size)

    results: Dict[int, tuple] = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_k = {executor.submit(_replicate, fit, n, cfg, seed, k, grid): k for k in range(B)}
        for future in as_completed(future_to_k):
            k = future_to_k[future]
            try:
                results[k] = future.result()
            except Exception as e:
                logging.error(f"Réplica bootstrap {k} falhou: {e}", exc_info=True)

    if not results:
        raise FitError(f"Todas as {B} réplicas bootstrap falharam.")
    n_failed = B - len(results)
    n_empty = sum(1 for k in results if results[k][1])
    if n_failed:
        logging.warning(f"{n_failed} de {B} réplicas bootstrap falharam e foram descartadas.")
    if n_empty:
        logging.warning(f"{n_empty} de {len(results)} réplicas bootstrap têm grupo vazio (mantidas).")

    stack = np.stack([results[k][0] for k in sorted(results)])
    alpha_low = (1.0 - level) / 2.0
    lower, median, upper = np.quantile(stack, [alpha_low, 0.5, 1.0 - alpha_low], axis=0)
    return BootstrapBands(
        grid=grid,
        estimate=_grid_values(fit.alpha_hat, grid),
        lower=lower,
        median=median,
        upper=upper,
        level=level,
        n_replicates=len(results),
        n_failed=n_failed,
        n_empty_group=n_empty,
        directed=fit.directed,
    )
