"""
Estatísticas suficientes variacionais do PPSBM.

Para τ ∈ 𝒯, substituindo os indicadores latentes Z^{i,q} por τ^{i,q}:
- Y^(q,l): massa variacional de díades do par de grupos (q,l);
- N^(q,l)(E): contagem ponderada de eventos em cada célula diádica fina;
- τ_m^(q,l) = τ^{i_m,q} τ^{j_m,l}: peso de cada evento.

No modo não-direcionado as estatísticas são simetrizadas: para q ≠ l,
Y^(q,l) = Σ_{i<j}(τ^{i,q}τ^{j,l} + τ^{i,l}τ^{j,q}); para q = l,
Y^(q,q) = Σ_{i<j} τ^{i,q}τ^{j,q}. As somas sobre pares usam então q ≤ l.
"""

from dataclasses import dataclass

import numpy as np

from ingestion.event_stream import EventStream

ROW_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class VariationalState:
    """Matriz n x Q de pertencimentos suaves; linhas não-negativas somando 1."""
    tau: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if tau.ndim != 2:
            raise ValueError("τ deve ser uma matriz n x Q.")
        if np.any(tau < 0):
            raise ValueError("τ possui entradas negativas.")
        if np.any(np.abs(tau.sum(axis=1) - 1.0) > ROW_SUM_TOLERANCE):
            raise ValueError("Cada linha de τ deve somar 1.")

    @property
    def n(self) -> int:
        return self.tau.shape[0]

    @property
    def Q(self) -> int:
        return self.tau.shape[1]

    def map_labels(self) -> np.ndarray:
        """Rótulos MAP; empates vão para o menor índice de grupo."""
        return np.argmax(self.tau, axis=1)

    @classmethod
    def from_labels(cls, labels, Q: int) -> "VariationalState":
        labels = np.asarray(labels, dtype=np.int64)
        tau = np.zeros((len(labels), Q))
        tau[np.arange(len(labels)), labels] = 1.0
        return cls(tau=tau)


@dataclass(frozen=True)
class SufficientStats:
    Y: np.ndarray              # Q x Q
    cell_counts: np.ndarray    # Q x Q x 2^d_max
    event_weights: np.ndarray  # M x Q x Q
    d_max: int
    directed: bool

    @property
    def pair_mask(self) -> np.ndarray:
        return pair_mask(self.Y.shape[0], self.directed)


def pair_mask(Q: int, directed: bool) -> np.ndarray:
    """Pares (q,l) livres: todos se direcionado, q ≤ l caso contrário."""
    if directed:
        return np.ones((Q, Q), dtype=bool)
    return np.triu(np.ones((Q, Q), dtype=bool))


def symmetrize_pairs(x: np.ndarray) -> np.ndarray:
    """X + Xᵀ com a diagonal mantida, nos dois últimos eixos."""
    sym = x + np.swapaxes(x, -1, -2)
    diag = np.arange(x.shape[-1])
    sym[..., diag, diag] = x[..., diag, diag]
    return sym


def pair_mass(tau: np.ndarray, dyad_weights: np.ndarray, directed: bool) -> np.ndarray:
    """
    Σ_{(i,j)∈𝓡} W_ij τ^{i,q} τ^{j,l} para uma matriz n x n de pesos por díade
    (diagonal ignorada). No modo não-direcionado W deve ser simétrica e o
    resultado segue a convenção simetrizada.
    """
    weights = np.array(dyad_weights, dtype=float, copy=True)
    np.fill_diagonal(weights, 0.0)
    mass = tau.T @ weights @ tau
    if not directed:
        diag = np.arange(mass.shape[0])
        mass[diag, diag] *= 0.5
    return mass


def event_weights(stream: EventStream, tau: np.ndarray) -> np.ndarray:
    """τ_m^(q,l) para cada evento (M x Q x Q), simetrizado se não-direcionado."""
    w = tau[stream.senders][:, :, None] * tau[stream.receivers][:, None, :]
    if not stream.directed:
        w = symmetrize_pairs(w)
    return w


def compute_stats(stream: EventStream, tau: np.ndarray, d_max: int) -> SufficientStats:
    """Calcula Y, N^(q,l)(E) na grade fina 2^d_max e τ_m^(q,l), sem aproximações."""
    tau = np.asarray(tau, dtype=float)
    n, Q = tau.shape
    if n != stream.n:
        raise ValueError(f"τ tem {n} linhas mas o fluxo tem n={stream.n}.")
    Y = pair_mass(tau, np.ones((n, n)), stream.directed)
    weights = event_weights(stream, tau)
    counts = np.zeros((2 ** d_max, Q, Q))
    np.add.at(counts, stream.cell_index(d_max), weights)
    return SufficientStats(
        Y=Y,
        cell_counts=np.moveaxis(counts, 0, -1),
        event_weights=weights,
        d_max=d_max,
        directed=stream.directed,
    )


def update_pi(tau: np.ndarray) -> np.ndarray:
    """π̂_q = (1/n) Σ_i τ^{i,q}."""
    tau = np.asarray(tau, dtype=float)
    pi = tau.mean(axis=0)
    return pi / pi.sum()


def r_dyads(n: int, directed: bool) -> int:
    """r = n(n−1) díades ordenadas, ou n(n−1)/2 se não-direcionado."""
    return n * (n - 1) if directed else n * (n - 1) // 2


def icl_penalty(Q: int, n: int, directed: bool, depths: np.ndarray, extra_per_pair: int = 0) -> float:
    """
    ½(Q−1) log n + ½ log r · Σ_{pares livres} (extra_per_pair + 2^{d̂^(q,l)}).
    `extra_per_pair = 1` conta o β_{q,l} da variante esparsa.
    """
    mask = pair_mask(Q, directed)
    n_params = extra_per_pair * int(mask.sum()) + float(np.sum(2.0 ** np.asarray(depths)[mask]))
    return float(0.5 * (Q - 1) * np.log(n) + 0.5 * np.log(r_dyads(n, directed)) * n_params)
