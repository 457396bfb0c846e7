"""
Descritores analíticos de funções de intensidade em [0, T].

Cada descritor sabe se avaliar, calcular a intensidade cumulativa
A(t) = ∫₀ᵗ α, fornecer um limitante superior analítico λ_max (usado pelo
thinning) e se serializar em JSON.

Tipos suportados:
- `ConstantIntensity`: α(t) = c.
- `SinusoidIntensity`: α(t) = a·(1 + sin(2π(t + φ)/T)).
- `PiecewiseConstantIntensity`: alturas sobre 2^d (ou k) células regulares semiabertas.
- `TentIntensity`: α(t) = pico·max(0, 1 − |t − centro|/meia_largura).
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np


@dataclass(frozen=True)
class ConstantIntensity:
    value: float
    T: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"Intensidade constante negativa: {self.value}")

    def evaluate(self, t) -> np.ndarray:
        return np.full(np.shape(t), float(self.value))

    def cumulative(self, t) -> np.ndarray:
        return self.value * np.asarray(t, dtype=float)

    def integral(self) -> float:
        return float(self.value * self.T)

    def upper_bound(self) -> float:
        return float(self.value)

    def to_dict(self) -> Dict:
        return {'kind': 'constant', 'value': self.value, 'T': self.T}


@dataclass(frozen=True)
class SinusoidIntensity:
    """a·(1 + sin(2π(t + φ)/T)); não-negativa para a ≥ 0."""
    amplitude: float
    phase: float
    T: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"Amplitude negativa: {self.amplitude}")

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.amplitude * (1.0 + np.sin(2.0 * np.pi * (t + self.phase) / self.T))

    def cumulative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        w = 2.0 * np.pi / self.T
        return self.amplitude * (t - (np.cos(w * (t + self.phase)) - np.cos(w * self.phase)) / w)

    def integral(self) -> float:
        return float(self.cumulative(self.T))

    def upper_bound(self) -> float:
        return 2.0 * self.amplitude

    def to_dict(self) -> Dict:
        return {'kind': 'sinusoid', 'amplitude': self.amplitude, 'phase': self.phase, 'T': self.T}


@dataclass(frozen=True)
class PiecewiseConstantIntensity:
    """Alturas constantes em células regulares [kT/K, (k+1)T/K)."""
    heights: Tuple[float, ...]
    T: float

    def __post_init__(self):
        if len(self.heights) == 0:
            raise ValueError("Uma intensidade constante por partes precisa de ao menos uma célula.")
        if min(self.heights) < 0:
            raise ValueError(f"Altura negativa na intensidade constante por partes: {self.heights}")

    def _cells(self, t) -> np.ndarray:
        k = len(self.heights)
        idx = np.floor(np.asarray(t, dtype=float) * k / self.T).astype(np.int64)
        return np.clip(idx, 0, k - 1)

    def evaluate(self, t) -> np.ndarray:
        return np.asarray(self.heights, dtype=float)[self._cells(t)]

    def cumulative(self, t) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.T)
        heights = np.asarray(self.heights, dtype=float)
        width = self.T / len(heights)
        before = np.concatenate([[0.0], np.cumsum(heights) * width])
        idx = self._cells(t)
        return before[idx] + heights[idx] * (t - idx * width)

    def integral(self) -> float:
        return float(np.sum(self.heights) * self.T / len(self.heights))

    def upper_bound(self) -> float:
        return float(max(self.heights))

    def to_dict(self) -> Dict:
        return {'kind': 'piecewise', 'heights': list(self.heights), 'T': self.T}


@dataclass(frozen=True)
class TentIntensity:
    """pico·max(0, 1 − |t − centro|/meia_largura)."""
    peak: float
    center: float
    half_width: float
    T: float

    def __post_init__(self):
        if self.peak < 0:
            raise ValueError(f"Pico negativo: {self.peak}")
        if self.half_width <= 0:
            raise ValueError(f"A meia-largura deve ser positiva: {self.half_width}")

    def evaluate(self, t) -> np.ndarray:
        u = np.asarray(t, dtype=float) - self.center
        return self.peak * np.maximum(0.0, 1.0 - np.abs(u) / self.half_width)

    def _antiderivative(self, u) -> np.ndarray:
        w = self.half_width
        u = np.clip(np.asarray(u, dtype=float), -w, w)
        left = (u + w) ** 2 / (2.0 * w)
        right = w - (w - u) ** 2 / (2.0 * w)
        return np.where(u <= 0, left, right)

    def cumulative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.peak * (self._antiderivative(t - self.center) - self._antiderivative(-self.center))

    def integral(self) -> float:
        return float(self.cumulative(self.T))

    def upper_bound(self) -> float:
        return float(self.peak)

    def to_dict(self) -> Dict:
        return {
            'kind': 'tent', 'peak': self.peak, 'center': self.center,
            'half_width': self.half_width, 'T': self.T,
        }


def intensity_from_dict(data: Dict):
    """Reconstrói um descritor a partir do JSON gerado por `to_dict`."""
    kind = data.get('kind')
    if kind == 'constant':
        return ConstantIntensity(value=float(data['value']), T=float(data['T']))
    if kind == 'sinusoid':
        return SinusoidIntensity(amplitude=float(data['amplitude']), phase=float(data['phase']), T=float(data['T']))
    if kind == 'piecewise':
        return PiecewiseConstantIntensity(heights=tuple(float(h) for h in data['heights']), T=float(data['T']))
    if kind == 'tent':
        return TentIntensity(
            peak=float(data['peak']), center=float(data['center']),
            half_width=float(data['half_width']), T=float(data['T']),
        )
    raise ValueError(f"Tipo de intensidade desconhecido: {kind}")


def cumulative_matrix(alpha: List[List]) -> np.ndarray:
    """Matriz Q x Q de A^(q,l)(T) para uma grade de intensidades."""
    Q = len(alpha)
    return np.array([[alpha[q][l].integral() for l in range(Q)] for q in range(Q)])
