"""
Simulação do modelo de blocos estocástico com processos de Poisson (PPSBM).

Responsabilidades:
1. Representar o parâmetro verdadeiro θ = (π, α) como `IntensityModel`.
2. Sortear pertencimentos latentes i.i.d. multinomiais.
3. Simular processos de Poisson inomogêneos por thinning (Lewis–Shedler)
   a partir de um limitante analítico λ_max do descritor.
4. Simular o modelo denso e a variante esparsa (ativação U_ij ~ Bernoulli(β)).

Toda a aleatoriedade passa por um `numpy.random.Generator`; geradores de
réplicas derivam de (semente, índice) via `spawn_generator`.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ingestion.event_stream import EventStream
from simulation.intensities import cumulative_matrix, intensity_from_dict

PI_TOLERANCE = 1e-12


def spawn_generator(seed: int, *keys: int) -> np.random.Generator:
    """Gerador PCG64 determinado apenas por (semente, chaves)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


@dataclass(frozen=True)
class IntensityModel:
    """
    Parâmetro θ = (π, α) do PPSBM. `alpha` é uma grade Q x Q de objetos com
    `evaluate`, `integral`, `upper_bound` e `to_dict`; modelos não-direcionados
    são simétricos (alpha[q][l] igual a alpha[l][q]).
    """
    pi: np.ndarray
    alpha: List[List]
    T: float
    directed: bool

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        Q = len(pi)
        if abs(pi.sum() - 1.0) > PI_TOLERANCE or np.any(pi <= 0):
            raise ValueError(f"As proporções π devem ser positivas e somar 1 (recebido {pi.tolist()}).")
        if len(self.alpha) != Q or any(len(row) != Q for row in self.alpha):
            raise ValueError(f"A grade de intensidades deve ser {Q} x {Q}.")
        for q in range(Q):
            for l in range(Q):
                if self.alpha[q][l].upper_bound() < 0:
                    raise ValueError(f"Intensidade negativa no par ({q + 1}, {l + 1}).")
                if not self.directed and q < l:
                    a, b = self.alpha[q][l], self.alpha[l][q]
                    if a is not b and a.to_dict() != b.to_dict():
                        raise ValueError(f"Modelo não-direcionado não simétrico no par ({q + 1}, {l + 1}).")

    @property
    def Q(self) -> int:
        return len(self.pi)

    def cumulative(self) -> np.ndarray:
        return cumulative_matrix(self.alpha)

    def expected_events_per_dyad(self) -> float:
        """Média de mistura Σ_{q,l} π_q π_l A^(q,l)(T) para uma díade."""
        pi = np.asarray(self.pi, dtype=float)
        return float(pi @ self.cumulative() @ pi)

    def to_dict(self) -> Dict:
        return {
            'pi': np.asarray(self.pi, dtype=float).tolist(),
            'alpha': [[a.to_dict() for a in row] for row in self.alpha],
            'T': self.T,
            'directed': self.directed,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "IntensityModel":
        alpha = [[intensity_from_dict(a) for a in row] for row in data['alpha']]
        return cls(pi=np.asarray(data['pi'], dtype=float), alpha=alpha,
                   T=float(data['T']), directed=bool(data['directed']))


def sample_memberships(pi: Sequence[float], n: int, rng: np.random.Generator) -> np.ndarray:
    """Rótulos i.i.d. em {0, ..., Q-1} com probabilidades π."""
    pi = np.asarray(pi, dtype=float)
    return rng.choice(len(pi), size=n, p=pi / pi.sum())


def sample_inhomogeneous_poisson(intensity, T: float, rng: np.random.Generator) -> np.ndarray:
    """
    Thinning de Lewis–Shedler: candidatos de um Poisson homogêneo de taxa
    λ_max em [0, T), aceitos com probabilidade α(t)/λ_max.
    """
    lambda_max = intensity.upper_bound()
    if lambda_max < 0:
        raise ValueError(f"Limitante de intensidade negativo: {lambda_max}")
    if lambda_max == 0:
        return np.empty(0)
    n_candidates = rng.poisson(lambda_max * T)
    candidates = rng.uniform(0.0, T, size=n_candidates)
    accepted = rng.uniform(0.0, lambda_max, size=n_candidates) < intensity.evaluate(candidates)
    return np.sort(candidates[accepted])


def _dyads(n: int, directed: bool) -> List[Tuple[int, int]]:
    if directed:
        return [(i, j) for i in range(n) for j in range(n) if i != j]
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _merge_events(chunks: List[Tuple[np.ndarray, int, int]], n: int, T: float, directed: bool) -> EventStream:
    if chunks:
        times = np.concatenate([c[0] for c in chunks])
        senders = np.concatenate([np.full(len(c[0]), c[1]) for c in chunks])
        receivers = np.concatenate([np.full(len(c[0]), c[2]) for c in chunks])
    else:
        times, senders, receivers = np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return EventStream.from_arrays(times, senders, receivers, n=n, T=T, directed=directed)


def simulate_given_labels(
    alpha: List[List],
    labels: np.ndarray,
    T: float,
    directed: bool,
    rng: np.random.Generator,
) -> EventStream:
    """Para cada díade, um processo de Poisson com α^(Z_i, Z_j), com rótulos fixos."""
    n = len(labels)
    chunks = []
    for i, j in _dyads(n, directed):
        times = sample_inhomogeneous_poisson(alpha[labels[i]][labels[j]], T, rng)
        if len(times):
            chunks.append((times, i, j))
    return _merge_events(chunks, n, T, directed)


def simulate_ppsbm(model: IntensityModel, n: int, rng: np.random.Generator) -> Tuple[EventStream, np.ndarray]:
    """Sorteia os rótulos e simula cada díade com α^(Z_i, Z_j)."""
    if n < 2:
        raise ValueError(f"São necessários ao menos 2 nós (recebido {n}).")
    labels = sample_memberships(model.pi, n, rng)
    stream = simulate_given_labels(model.alpha, labels, model.T, model.directed, rng)
    logging.debug(f"Simulação PPSBM concluída: n={n}, M={stream.n_events}")
    return stream, labels


def simulate_sparse(
    model: IntensityModel,
    beta: np.ndarray,
    n: int,
    rng: np.random.Generator,
) -> Tuple[EventStream, np.ndarray, np.ndarray]:
    """
    Variante esparsa: cada díade é ativa com probabilidade β_{Z_i, Z_j};
    díades inativas não emitem eventos. Retorna também a matriz de ativação.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (model.Q, model.Q) or np.any(beta < 0) or np.any(beta > 1):
        raise ValueError(f"β deve ser uma matriz {model.Q} x {model.Q} com entradas em [0, 1].")
    if n < 2:
        raise ValueError(f"São necessários ao menos 2 nós (recebido {n}).")
    labels = sample_memberships(model.pi, n, rng)
    active = np.zeros((n, n), dtype=bool)
    chunks = []
    for i, j in _dyads(n, model.directed):
        # β = 1 não consome sorteio: mesma sequência da simulação densa
        if beta[labels[i], labels[j]] < 1.0 and rng.random() >= beta[labels[i], labels[j]]:
            continue
        active[i, j] = True
        if not model.directed:
            active[j, i] = True
        times = sample_inhomogeneous_poisson(model.alpha[labels[i]][labels[j]], model.T, rng)
        if len(times):
            chunks.append((times, i, j))
    stream = _merge_events(chunks, n, model.T, model.directed)
    logging.debug(f"Simulação esparsa concluída: n={n}, M={stream.n_events}, díades ativas={int(active.sum())}")
    return stream, labels, active
