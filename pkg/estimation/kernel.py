"""
Passo M por suavização de núcleo (Epanechnikov) dos processos ponderados.

    α̂^(q,l)(t) = (1/(b·Y^(q,l))) Σ_m τ_m^(q,l) K((t − t_m)/b),  K(u) = 0.75(1 − u²) em |u| ≤ 1,

e α̂ ≡ 0 quando Y^(q,l) = 0. Sem correção de borda.

Como K é polinomial no suporte, a soma em qualquer ponto é calculada
exatamente por somas prefixadas de w, w·t e w·t² sobre a janela [t − b, t + b];
a massa cumulativa ∫₀ᵀ α̂ usa a primitiva fechada de K.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

DEFAULT_GRID_SIZE = 512


def epanechnikov(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u ** 2), 0.0)


def epanechnikov_cdf(u) -> np.ndarray:
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    return 0.5 + 0.75 * (u - u ** 3 / 3.0)


def default_bandwidth(weights: np.ndarray, T: float) -> float:
    """b = T·M_eff^{−1/5}, com M_eff = Σ w, limitada a T."""
    m_eff = float(np.sum(weights))
    if m_eff <= 1.0:
        return float(T)
    return float(T * m_eff ** (-0.2))


@dataclass(frozen=True)
class KernelEstimate:
    bandwidth: float
    times: np.ndarray
    weights: np.ndarray
    Y: float
    T: float
    grid_size: int = DEFAULT_GRID_SIZE
    grid_values: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError(f"A largura de banda deve ser positiva (recebido {self.bandwidth}).")
        if self.grid_size < 2:
            raise ValueError(f"A grade precisa de ao menos 2 pontos (recebido {self.grid_size}).")
        order = np.argsort(self.times, kind='stable')
        object.__setattr__(self, 'times', np.asarray(self.times, dtype=float)[order])
        object.__setattr__(self, 'weights', np.asarray(self.weights, dtype=float)[order])
        if self.grid_values is None:
            object.__setattr__(self, 'grid_values', self.evaluate(self.grid()))

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.grid_size)

    def _prefix_sums(self):
        centered = self.times - 0.5 * self.T
        w = self.weights
        return (
            np.concatenate([[0.0], np.cumsum(w)]),
            np.concatenate([[0.0], np.cumsum(w * centered)]),
            np.concatenate([[0.0], np.cumsum(w * centered ** 2)]),
        )

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.Y <= 0 or len(self.times) == 0:
            return np.zeros(t.shape)
        b = self.bandwidth
        s0, s1, s2 = self._prefix_sums()
        lo = np.searchsorted(self.times, t - b, side='left')
        hi = np.searchsorted(self.times, t + b, side='right')
        w0 = s0[hi] - s0[lo]
        w1 = s1[hi] - s1[lo]
        w2 = s2[hi] - s2[lo]
        c = t - 0.5 * self.T
        total = 0.75 * ((1.0 - c ** 2 / b ** 2) * w0 + 2.0 * c * w1 / b ** 2 - w2 / b ** 2)
        return np.maximum(total, 0.0) / (b * self.Y)

    def integral(self) -> float:
        if self.Y <= 0:
            return 0.0
        b = self.bandwidth
        mass = epanechnikov_cdf((self.T - self.times) / b) - epanechnikov_cdf(-self.times / b)
        return float(np.sum(self.weights * mass) / self.Y)

    def upper_bound(self) -> float:
        """0.75/(bY) vezes o maior peso acumulado numa janela de largura 2b."""
        if self.Y <= 0 or len(self.times) == 0:
            return 0.0
        s0 = np.concatenate([[0.0], np.cumsum(self.weights)])
        hi = np.searchsorted(self.times, self.times + 2.0 * self.bandwidth, side='right')
        window = s0[hi] - s0[np.arange(len(self.times))]
        return float(0.75 * window.max() / (self.bandwidth * self.Y))

    def to_dict(self) -> Dict:
        return {
            'kind': 'kernel',
            'bandwidth': self.bandwidth,
            'grid': self.grid().tolist(),
            'grid_values': np.asarray(self.grid_values, dtype=float).tolist(),
            'T': self.T,
            'Y': self.Y,
            'times': self.times.tolist(),
            'weights': self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "KernelEstimate":
        return cls(
            bandwidth=float(data['bandwidth']),
            times=np.asarray(data['times'], dtype=float),
            weights=np.asarray(data['weights'], dtype=float),
            Y=float(data['Y']),
            T=float(data['T']),
            grid_size=len(data['grid_values']),
        )


def kernel_estimate(
    times: np.ndarray,
    weights: np.ndarray,
    Y: float,
    bandwidth: Optional[float],
    T: float,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> KernelEstimate:
    """Estimativa de núcleo para um par (q,l); `bandwidth=None` usa a regra padrão."""
    weights = np.asarray(weights, dtype=float)
    if bandwidth is None:
        bandwidth = default_bandwidth(weights, T)
    return KernelEstimate(
        bandwidth=float(bandwidth),
        times=np.asarray(times, dtype=float),
        weights=weights,
        Y=float(Y),
        T=float(T),
        grid_size=grid_size,
    )
