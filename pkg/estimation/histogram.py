"""
Passo M por histogramas adaptativos sobre partições diádicas regulares.

Para cada par (q,l), a profundidade d̂ ∈ {0, ..., d_max} minimiza o critério
de mínimos quadrados penalizado na forma simplificada
    2^d { −Σ_{E∈𝓔_d} N(E)² + 2^{d_max+1} sup_{E'∈𝓔_{d_max}} N(E') },
com empates resolvidos para a partição mais grossa. A altura em cada célula
é N(E) / (Y·|E|), com |E| = T·2^{−d}; se Y = 0 a estimativa é nula e d̂ = 0.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np


@dataclass(frozen=True)
class HistogramEstimate:
    depth: int
    values: np.ndarray
    T: float

    def __post_init__(self):
        if len(self.values) != 2 ** self.depth:
            raise ValueError(f"Esperadas {2 ** self.depth} alturas para profundidade {self.depth}.")
        if np.any(np.asarray(self.values) < 0):
            raise ValueError("Alturas de histograma devem ser não-negativas.")

    def evaluate(self, t) -> np.ndarray:
        n_cells = len(self.values)
        idx = np.floor(np.asarray(t, dtype=float) * n_cells / self.T).astype(np.int64)
        return np.asarray(self.values)[np.clip(idx, 0, n_cells - 1)]

    def integral(self) -> float:
        return float(np.sum(self.values) * self.T / len(self.values))

    def upper_bound(self) -> float:
        return float(np.max(self.values))

    def cell_boundaries(self) -> np.ndarray:
        return np.linspace(0.0, self.T, len(self.values) + 1)

    def to_dict(self) -> Dict:
        return {
            'kind': 'histogram',
            'depth': int(self.depth),
            'heights': np.asarray(self.values, dtype=float).tolist(),
            'boundaries': self.cell_boundaries().tolist(),
            'T': self.T,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "HistogramEstimate":
        return cls(depth=int(data['depth']), values=np.asarray(data['heights'], dtype=float), T=float(data['T']))


def cell_counts_at_depth(finest_counts: np.ndarray, d: int) -> np.ndarray:
    """Agrega blocos adjacentes de 2^{d_max − d} células finas."""
    finest_counts = np.asarray(finest_counts, dtype=float)
    d_max = int(np.log2(len(finest_counts)))
    if 2 ** d_max != len(finest_counts):
        raise ValueError(f"O vetor fino deve ter tamanho potência de 2 (recebido {len(finest_counts)}).")
    if not 0 <= d <= d_max:
        raise ValueError(f"Profundidade {d} fora de [0, {d_max}].")
    return finest_counts.reshape(2 ** d, -1).sum(axis=1)


def depth_criterion(finest_counts: np.ndarray, d_max: int) -> np.ndarray:
    """Valores do critério penalizado para d = 0, ..., d_max."""
    finest_counts = np.asarray(finest_counts, dtype=float)
    sup_fine = finest_counts.max() if len(finest_counts) else 0.0
    crit = np.empty(d_max + 1)
    for d in range(d_max + 1):
        coarse = cell_counts_at_depth(finest_counts, d)
        crit[d] = 2.0 ** d * (-np.sum(coarse ** 2) + 2.0 ** (d_max + 1) * sup_fine)
    return crit


def select_depth(finest_counts: np.ndarray, Y: float, d_max: int) -> int:
    if Y <= 0:
        return 0
    # argmin devolve o primeiro mínimo: empate -> partição mais grossa
    return int(np.argmin(depth_criterion(finest_counts, d_max)))


def histogram_estimate(finest_counts: np.ndarray, Y: float, depth: int, T: float) -> HistogramEstimate:
    if Y < 0:
        raise ValueError(f"Massa de díades negativa: {Y}")
    if Y == 0:
        return HistogramEstimate(depth=depth, values=np.zeros(2 ** depth), T=T)
    coarse = cell_counts_at_depth(finest_counts, depth)
    width = T / 2 ** depth
    return HistogramEstimate(depth=depth, values=np.maximum(coarse, 0.0) / (Y * width), T=T)


def adaptive_histogram(finest_counts: np.ndarray, Y: float, d_max: int, T: float) -> HistogramEstimate:
    """Seleção de profundidade seguida do estimador na profundidade escolhida."""
    depth = select_depth(finest_counts, Y, d_max)
    return histogram_estimate(finest_counts, Y, depth, T)
