"""
Métricas de avaliação: concordância de partições (ARI), risco L2 das
intensidades estimadas com alinhamento de rótulos, e estimadores oráculo
(rótulos verdadeiros conhecidos).
"""

import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score

from estimation.statistics import VariationalState, compute_stats, pair_mask
from estimation.vem import FitConfig, m_step
from ingestion.event_stream import EventStream

DEFAULT_RISK_GRID = 4096
MAX_EXHAUSTIVE_Q = 8


def adjusted_rand_index(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"Partições de tamanhos diferentes: {len(a)} e {len(b)}.")
    return float(adjusted_rand_score(a, b))


def risk_grid(T: float, grid_size: int = DEFAULT_RISK_GRID) -> np.ndarray:
    return np.linspace(0.0, T, grid_size)


def l2_risk(estimate, truth, T: float, grid_size: int = DEFAULT_RISK_GRID) -> float:
    """‖α̂ − α‖₂ em [0, T] pela regra do trapézio."""
    grid = risk_grid(T, grid_size)
    diff = np.asarray(estimate.evaluate(grid)) - np.asarray(truth.evaluate(grid))
    return float(np.sqrt(trapezoid(diff ** 2, grid)))


def _grid_values(alpha: List[List], grid: np.ndarray) -> np.ndarray:
    Q = len(alpha)
    values = np.empty((Q, Q, len(grid)))
    for q in range(Q):
        for l in range(Q):
            values[q, l] = alpha[q][l].evaluate(grid)
    return values


def _risks_under(perm: Tuple[int, ...], est: np.ndarray, true: np.ndarray, grid: np.ndarray) -> np.ndarray:
    idx = np.asarray(perm)
    aligned = est[np.ix_(idx, idx)]
    return np.sqrt(trapezoid((aligned - true) ** 2, grid, axis=-1))


@dataclass(frozen=True)
class RiskReport:
    """risks[q, l]: distância L2 entre α̂^(σ(q),σ(l)) e α^(q,l); σ = permutation."""
    risks: np.ndarray
    permutation: Tuple[int, ...]
    directed: bool

    def __post_init__(self):
        if np.any(np.asarray(self.risks) < 0):
            raise ValueError("Riscos devem ser não-negativos.")

    @property
    def total(self) -> float:
        return float(np.sum(self.risks[pair_mask(len(self.permutation), self.directed)]))

    def to_records(self) -> List[Dict]:
        mask = pair_mask(len(self.permutation), self.directed)
        return [
            {'q': q + 1, 'l': l + 1, 'risk': float(self.risks[q, l]), 'estimated_q': self.permutation[q] + 1,
             'estimated_l': self.permutation[l] + 1}
            for q, l in zip(*np.nonzero(mask))
        ]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.to_records())


def align_groups(
    estimate: List[List],
    truth: List[List],
    T: float,
    directed: bool,
    grid_size: int = DEFAULT_RISK_GRID,
) -> RiskReport:
    """
    Permutação σ que minimiza o risco total Σ_{(q,l)} ‖α̂^(σ(q),σ(l)) − α^(q,l)‖₂.
    Busca exaustiva até 8 grupos; acima disso, atribuição ótima sobre os
    riscos diagonais.
    """
    Q = len(truth)
    if len(estimate) != Q:
        raise ValueError(f"Grades de intensidade com tamanhos diferentes: {len(estimate)} e {Q}.")
    grid = risk_grid(T, grid_size)
    est = _grid_values(estimate, grid)
    true = _grid_values(truth, grid)
    mask = pair_mask(Q, directed)

    if Q <= MAX_EXHAUSTIVE_Q:
        best_perm, best_total, best_risks = None, np.inf, None
        for perm in itertools.permutations(range(Q)):
            risks = _risks_under(perm, est, true, grid)
            total = float(np.sum(risks[mask]))
            if total < best_total:
                best_perm, best_total, best_risks = perm, total, risks
        return RiskReport(risks=best_risks, permutation=tuple(int(k) for k in best_perm), directed=directed)

    diag_cost = np.sqrt(trapezoid((est.diagonal(axis1=0, axis2=1).T[None, :, :]
                                   - true.diagonal(axis1=0, axis2=1).T[:, None, :]) ** 2, grid, axis=-1))
    rows, cols = linear_sum_assignment(diag_cost)
    perm = tuple(int(c) for _, c in sorted(zip(rows, cols)))
    return RiskReport(risks=_risks_under(perm, est, true, grid), permutation=perm, directed=directed)


def relabel(labels: np.ndarray, permutation: Tuple[int, ...]) -> np.ndarray:
    """Traduz rótulos estimados para a numeração verdadeira via σ."""
    inverse = np.empty(len(permutation), dtype=np.int64)
    inverse[np.asarray(permutation)] = np.arange(len(permutation))
    return inverse[np.asarray(labels)]


def oracle_estimates(
    stream: EventStream,
    labels: np.ndarray,
    Q: int,
    estimator: str,
    cfg: Optional[FitConfig] = None,
) -> Tuple[List[List], Optional[np.ndarray]]:
    """Estimador de intensidades com os rótulos verdadeiros (τ one-hot)."""
    cfg = cfg or FitConfig()
    tau = VariationalState.from_labels(labels, Q).tau
    stats = compute_stats(stream, tau, cfg.d_max)
    return m_step(stream, stats, estimator, cfg)
