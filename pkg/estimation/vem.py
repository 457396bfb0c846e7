"""
Algoritmo EM variacional semiparamétrico (VEM) para o PPSBM.

Responsabilidades:
1. Configuração do ajuste (`FitConfig`) e resultado (`FitResult`).
2. Passo M: atualização de π e estimação não-paramétrica de α
   (histograma adaptativo ou núcleo).
3. Passo E variacional: equação de ponto fixo τ^{i,q} ∝ π_q exp{D_iq(τ, α)},
   normalizada no domínio logarítmico.
4. Critério J(θ, τ) e regra de parada pela variação relativa de J.
5. Inicializações por k-means sobre agregações diádicas dos dados, com
   perturbações, executadas em paralelo; vence a execução de maior J.
"""

import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp, xlogy
from sklearn.cluster import KMeans

from estimation.histogram import HistogramEstimate, adaptive_histogram
from estimation.kernel import DEFAULT_GRID_SIZE, KernelEstimate, kernel_estimate
from estimation.statistics import (
    SufficientStats,
    VariationalState,
    compute_stats,
    pair_mask,
    update_pi,
)
from ingestion.event_stream import EventStream, dense_counts
from simulation.intensities import cumulative_matrix

# --- Valores padrão do ajuste ---
DEFAULT_EPSILON = 1e-6
DEFAULT_NB_ITER = 50
DEFAULT_FIX_ITER = 10
DEFAULT_FIX_EPS = 1e-6
DEFAULT_D_MAX = 3
DEFAULT_INTENSITY_FLOOR = 1e-10
DEFAULT_N_PERTURB = 2
DEFAULT_PERC_PERTURB = 0.2
DEFAULT_L_PART = 2
DECREASE_PATIENCE = 3
KMEANS_MAX_ITER = 50
MAX_WORKERS = 4

ESTIMATORS = ('histogram', 'kernel')


class FitError(RuntimeError):
    """Nenhuma inicialização produziu um ajuste válido."""


class UnsupportedEstimatorError(ValueError):
    """Operação indisponível para o estimador usado no ajuste."""


@dataclass(frozen=True)
class FitConfig:
    d_max: int = DEFAULT_D_MAX
    bandwidth: Optional[float] = None
    epsilon: float = DEFAULT_EPSILON
    nb_iter: int = DEFAULT_NB_ITER
    fix_iter: int = DEFAULT_FIX_ITER
    fix_eps: float = DEFAULT_FIX_EPS
    n_perturb: int = DEFAULT_N_PERTURB
    perc_perturb: float = DEFAULT_PERC_PERTURB
    l_part: int = DEFAULT_L_PART
    intensity_floor: float = DEFAULT_INTENSITY_FLOOR
    grid_size: int = DEFAULT_GRID_SIZE
    workers: int = MAX_WORKERS

    def __post_init__(self):
        if self.epsilon <= 0 or self.fix_eps <= 0 or self.intensity_floor <= 0:
            raise ValueError("As tolerâncias e o piso de intensidade devem ser positivos.")
        if not 0.0 <= self.perc_perturb <= 1.0:
            raise ValueError(f"perc_perturb deve estar em [0, 1] (recebido {self.perc_perturb}).")
        if self.d_max < 0 or self.l_part < 0 or self.n_perturb < 0:
            raise ValueError("d_max, l_part e n_perturb devem ser não-negativos.")
        if self.nb_iter < 1 or self.fix_iter < 1 or self.workers < 1:
            raise ValueError("nb_iter, fix_iter e workers devem ser >= 1.")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError(f"A largura de banda deve ser positiva (recebido {self.bandwidth}).")


@dataclass(frozen=True)
class IntensityEvaluation:
    """log α^(q,l)(t_m) com piso (M x Q x Q) e A^(q,l)(T) (Q x Q)."""
    log_values: np.ndarray
    cumulative: np.ndarray


@dataclass(frozen=True)
class EStepResult:
    state: VariationalState
    converged: bool
    iterations: int


@dataclass(frozen=True)
class FitResult:
    Q: int
    estimator: str
    tau: VariationalState
    pi: np.ndarray
    alpha_hat: List[List]
    depths: Optional[np.ndarray]
    J: float
    J_trace: List[float]
    converged: bool
    stop_reason: str
    fixed_point_converged: bool
    init_index: int
    n_inits: int
    directed: bool
    n: int
    T: float
    config: FitConfig
    seed: Optional[int] = None
    sparse: Optional[object] = None
    icl: Optional[float] = None

    def map_labels(self) -> np.ndarray:
        return self.tau.map_labels()

    def to_dict(self) -> Dict:
        mask = pair_mask(self.Q, self.directed)
        intensities = []
        for q in range(self.Q):
            for l in range(self.Q):
                if mask[q, l]:
                    entry = {'q': q + 1, 'l': l + 1}
                    entry.update(self.alpha_hat[q][l].to_dict())
                    intensities.append(entry)
        data = {
            'Q': self.Q,
            'estimator': self.estimator,
            'directed': self.directed,
            'n': self.n,
            'T': self.T,
            'tau': self.tau.tau.tolist(),
            'labels': (self.map_labels() + 1).tolist(),
            'pi': np.asarray(self.pi).tolist(),
            'intensities': intensities,
            'depths': None if self.depths is None else np.asarray(self.depths).tolist(),
            'J': self.J,
            'J_trace': list(self.J_trace),
            'converged': self.converged,
            'stop_reason': self.stop_reason,
            'fixed_point_converged': self.fixed_point_converged,
            'init_index': self.init_index,
            'n_inits': self.n_inits,
            'seed': self.seed,
            'config': asdict(self.config),
            'icl': self.icl,
        }
        if self.sparse is not None:
            data['beta'] = np.asarray(self.sparse.beta).tolist()
            data['rho_ql'] = np.asarray(self.sparse.rho_ql).tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "FitResult":
        """Reconstrói um ajuste salvo (estado esparso não é reidratado)."""
        Q = int(data['Q'])
        directed = bool(data['directed'])
        alpha: List[List] = [[None] * Q for _ in range(Q)]
        for entry in data['intensities']:
            q, l = entry['q'] - 1, entry['l'] - 1
            estimate = HistogramEstimate.from_dict(entry) if entry['kind'] == 'histogram' else KernelEstimate.from_dict(entry)
            alpha[q][l] = estimate
            if not directed:
                alpha[l][q] = estimate
        return cls(
            Q=Q,
            estimator=data['estimator'],
            tau=VariationalState(tau=np.asarray(data['tau'], dtype=float)),
            pi=np.asarray(data['pi'], dtype=float),
            alpha_hat=alpha,
            depths=None if data.get('depths') is None else np.asarray(data['depths'], dtype=np.int64),
            J=float(data['J']),
            J_trace=list(data['J_trace']),
            converged=bool(data['converged']),
            stop_reason=data['stop_reason'],
            fixed_point_converged=bool(data['fixed_point_converged']),
            init_index=int(data['init_index']),
            n_inits=int(data['n_inits']),
            directed=directed,
            n=int(data['n']),
            T=float(data['T']),
            config=FitConfig(**data['config']),
            seed=data.get('seed'),
            icl=data.get('icl'),
        )


# --- Passo M ---

def m_step(
    stream: EventStream,
    stats: SufficientStats,
    estimator: str,
    cfg: FitConfig,
    Y: Optional[np.ndarray] = None,
) -> Tuple[List[List], Optional[np.ndarray]]:
    """
    Estima α^(q,l) para cada par livre (espelhando se não-direcionado).
    `Y` substitui a massa de díades das estatísticas (usado pela variante esparsa).
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"Estimador desconhecido: {estimator}")
    Y = stats.Y if Y is None else Y
    Q = Y.shape[0]
    mask = pair_mask(Q, stream.directed)
    alpha: List[List] = [[None] * Q for _ in range(Q)]
    depths = np.zeros((Q, Q), dtype=np.int64) if estimator == 'histogram' else None
    for q in range(Q):
        for l in range(Q):
            if not mask[q, l]:
                continue
            if estimator == 'histogram':
                estimate = adaptive_histogram(stats.cell_counts[q, l], float(Y[q, l]), cfg.d_max, stream.T)
                depths[q, l] = estimate.depth
            else:
                estimate = kernel_estimate(
                    stream.times, stats.event_weights[:, q, l], float(Y[q, l]),
                    cfg.bandwidth, stream.T, cfg.grid_size,
                )
            alpha[q][l] = estimate
            if not stream.directed:
                alpha[l][q] = estimate
                if depths is not None:
                    depths[l, q] = depths[q, l]
    return alpha, depths


def evaluate_intensities(alpha: List[List], stream: EventStream, floor: float) -> IntensityEvaluation:
    """Avalia log(max(α, piso)) em todos os tempos de evento e A(T) por par."""
    Q = len(alpha)
    log_values = np.empty((stream.n_events, Q, Q))
    for q in range(Q):
        for l in range(Q):
            if not stream.directed and l < q:
                log_values[:, q, l] = log_values[:, l, q]
                continue
            values = alpha[q][l].evaluate(stream.times)
            log_values[:, q, l] = np.log(np.maximum(values, floor))
    return IntensityEvaluation(log_values=log_values, cumulative=cumulative_matrix(alpha))


# --- Passo E ---

def compute_D(i: int, q: int, tau: np.ndarray, stream: EventStream, evaluation: IntensityEvaluation) -> float:
    """D_iq(τ, α) para um único par (nó, grupo)."""
    tau = np.asarray(tau, dtype=float)
    A = evaluation.cumulative
    Q = tau.shape[1]
    others = np.delete(tau, i, axis=0).sum(axis=0)
    if stream.directed:
        value = -sum(others[l] * (A[q, l] + A[l, q]) for l in range(Q))
    else:
        value = -sum(others[l] * A[q, l] for l in range(Q))
    for m in np.flatnonzero(stream.senders == i):
        j = stream.receivers[m]
        value += sum(tau[j, l] * evaluation.log_values[m, q, l] for l in range(Q))
    for m in np.flatnonzero(stream.receivers == i):
        j = stream.senders[m]
        value += sum(tau[j, l] * evaluation.log_values[m, l, q] for l in range(Q))
    return float(value)


def event_terms(tau: np.ndarray, stream: EventStream, log_values: np.ndarray) -> np.ndarray:
    """Parcela dos eventos de D (n x Q): termos de emissão e de recepção."""
    terms = np.zeros_like(tau)
    if stream.n_events == 0:
        return terms
    as_sender = np.einsum('ml,mql->mq', tau[stream.receivers], log_values)
    as_receiver = np.einsum('ml,mlq->mq', tau[stream.senders], log_values)
    np.add.at(terms, stream.senders, as_sender)
    np.add.at(terms, stream.receivers, as_receiver)
    return terms


def compute_D_matrix(tau: np.ndarray, stream: EventStream, evaluation: IntensityEvaluation) -> np.ndarray:
    """Todos os D_iq de uma vez (n x Q)."""
    A = evaluation.cumulative
    others = tau.sum(axis=0)[None, :] - tau
    cumulative_part = others @ (A + A.T) if stream.directed else others @ A
    return -cumulative_part + event_terms(tau, stream, evaluation.log_values)


def fixed_point(
    tau0: np.ndarray,
    pi: np.ndarray,
    d_function: Callable[[np.ndarray], np.ndarray],
    cfg: FitConfig,
) -> EStepResult:
    """
    Itera τ^{i,q} ∝ π_q exp{D_iq(τ)} com normalização log-sum-exp até
    max|Δτ| < fix_eps ou fix_iter iterações.
    """
    with np.errstate(divide='ignore'):
        log_pi = np.log(np.asarray(pi, dtype=float))
    tau = np.asarray(tau0, dtype=float)
    converged = False
    iterations = 0
    for iterations in range(1, cfg.fix_iter + 1):
        logits = log_pi[None, :] + d_function(tau)
        new_tau = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        new_tau /= new_tau.sum(axis=1, keepdims=True)
        delta = np.max(np.abs(new_tau - tau)) if tau.size else 0.0
        tau = new_tau
        if delta < cfg.fix_eps:
            converged = True
            break
    if not converged:
        logging.debug(f"Ponto fixo não convergiu em {cfg.fix_iter} iterações; último iterado mantido.")
    return EStepResult(state=VariationalState(tau=tau), converged=converged, iterations=iterations)


def e_step(
    tau0: np.ndarray,
    pi: np.ndarray,
    evaluation: IntensityEvaluation,
    stream: EventStream,
    cfg: FitConfig,
) -> EStepResult:
    return fixed_point(tau0, pi, lambda tau: compute_D_matrix(tau, stream, evaluation), cfg)


# --- Critério ---

def entropy_and_prior(pi: np.ndarray, tau: np.ndarray) -> float:
    """Σ_{i,q} τ^{i,q} log(π_q / τ^{i,q}) com 0·log 0 = 0."""
    tau = np.asarray(tau, dtype=float)
    return float(np.sum(xlogy(tau, np.asarray(pi)[None, :])) - np.sum(xlogy(tau, tau)))


def evaluate_J(pi: np.ndarray, evaluation: IntensityEvaluation, stats: SufficientStats, tau: np.ndarray) -> float:
    mask = stats.pair_mask
    cumulative_term = -np.sum(mask * stats.Y * evaluation.cumulative)
    event_term = np.sum(mask * np.einsum('mql,mql->ql', stats.event_weights, evaluation.log_values))
    return float(cumulative_term + event_term + entropy_and_prior(pi, tau))


def expected_complete_loglik(pi, evaluation: IntensityEvaluation, stats: SufficientStats, tau: np.ndarray) -> float:
    """E_τ[log L(O, Z | θ)]: J sem a entropia de τ."""
    return evaluate_J(pi, evaluation, stats, tau) + float(np.sum(xlogy(tau, tau)))


# --- Inicialização ---

def _kmeans_features(stream: EventStream, depth: int) -> np.ndarray:
    counts = dense_counts(stream, depth)
    rows = counts.reshape(stream.n, -1)
    if not stream.directed:
        return rows
    incoming = counts.transpose(1, 0, 2).reshape(stream.n, -1)
    return np.hstack([rows, incoming])


def _perturb(labels: np.ndarray, perc_perturb: float, rng: np.random.Generator) -> np.ndarray:
    """Embaralha os rótulos de round(perc·n) nós sorteados."""
    perturbed = labels.copy()
    k = int(round(perc_perturb * len(labels)))
    if k == 0:
        return perturbed
    chosen = rng.choice(len(labels), size=k, replace=False)
    perturbed[chosen] = labels[chosen][rng.permutation(k)]
    return perturbed


def init_classifications(
    stream: EventStream,
    Q: int,
    cfg: FitConfig,
    rng: np.random.Generator,
) -> List[VariationalState]:
    """
    Para cada profundidade 0..l_part: k-means (k-means++, 50 iterações) sobre
    as linhas de contagens agregadas, mais n_perturb cópias perturbadas.
    """
    if Q > stream.n:
        raise ValueError(f"Q={Q} maior que o número de nós n={stream.n}.")
    states: List[VariationalState] = []
    for depth in range(cfg.l_part + 1):
        try:
            features = _kmeans_features(stream, depth)
        except ValueError as e:
            logging.warning(f"Agregação de profundidade {depth} ignorada: {e}")
            continue
        with warnings.catch_warnings():
            # Poucos pontos distintos geram avisos de convergência do k-means
            warnings.simplefilter('ignore')
            kmeans = KMeans(
                n_clusters=Q, init='k-means++', n_init=1,
                max_iter=KMEANS_MAX_ITER, random_state=int(rng.integers(0, 2 ** 31 - 1)),
            )
            labels = kmeans.fit_predict(features)
        states.append(VariationalState.from_labels(labels, Q))
        for _ in range(cfg.n_perturb):
            states.append(VariationalState.from_labels(_perturb(labels, cfg.perc_perturb, rng), Q))
    logging.debug(f"{len(states)} inicializações geradas para Q={Q}.")
    return states


# --- Laço VEM ---

@dataclass
class StoppingRule:
    """
    Regra de parada: |ΔJ/J| < ε, τ inalterado, J decrescente por
    DECREASE_PATIENCE iterações seguidas, ou nb_iter atingido.
    """
    epsilon: float
    nb_iter: int
    trace: List[float] = field(default_factory=list)
    decreases: int = 0

    def update(self, J: float, tau_unchanged: bool) -> Tuple[bool, bool, str]:
        """Devolve (parar, convergiu, motivo)."""
        self.trace.append(J)
        if tau_unchanged:
            return True, True, 'tau_stationary'
        if len(self.trace) >= 2:
            previous = self.trace[-2]
            scale = abs(previous) if previous != 0 else 1.0
            if abs(J - previous) / scale < self.epsilon:
                return True, True, 'relative_change'
            self.decreases = self.decreases + 1 if J < previous else 0
            if self.decreases >= DECREASE_PATIENCE:
                return True, False, 'decreasing'
        if len(self.trace) >= self.nb_iter:
            return True, False, 'max_iterations'
        return False, False, ''


@dataclass(frozen=True)
class _RunOutcome:
    tau: VariationalState
    pi: np.ndarray
    alpha: List[List]
    depths: Optional[np.ndarray]
    J: float
    trace: List[float]
    converged: bool
    stop_reason: str
    fixed_point_converged: bool
    extra: Optional[object] = None


def _run_from_init(
    stream: EventStream,
    tau0: VariationalState,
    cfg: FitConfig,
    estimator: str,
) -> _RunOutcome:
    tau = tau0.tau
    rule = StoppingRule(cfg.epsilon, cfg.nb_iter)
    best: Optional[_RunOutcome] = None
    while True:
        pi = update_pi(tau)
        stats = compute_stats(stream, tau, cfg.d_max)
        alpha, depths = m_step(stream, stats, estimator, cfg)
        evaluation = evaluate_intensities(alpha, stream, cfg.intensity_floor)
        e_result = e_step(tau, pi, evaluation, stream, cfg)
        new_tau = e_result.state.tau
        J = evaluate_J(pi, evaluation, compute_stats(stream, new_tau, cfg.d_max), new_tau)
        stop, converged, reason = rule.update(J, np.array_equal(new_tau, tau))
        if best is None or J > best.J:
            best = _RunOutcome(
                tau=e_result.state, pi=pi, alpha=alpha, depths=depths, J=J, trace=[],
                converged=False, stop_reason='', fixed_point_converged=e_result.converged,
            )
        tau = new_tau
        if stop:
            return replace(best, trace=list(rule.trace), converged=converged, stop_reason=reason)


def run_initializations(
    inits: List[VariationalState],
    runner: Callable[[VariationalState], _RunOutcome],
    workers: int,
    label: str,
) -> Tuple[int, _RunOutcome]:
    """Executa as inicializações em paralelo e devolve (índice, melhor execução)."""
    outcomes: Dict[int, _RunOutcome] = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_index = {executor.submit(runner, init): idx for idx, init in enumerate(inits)}
        for future in as_completed(future_to_index):
            idx = future_to_index[future]
            try:
                outcomes[idx] = future.result()
            except Exception as e:
                logging.error(f"Inicialização {idx} falhou ({label}): {e}", exc_info=True)
    if not outcomes:
        raise FitError(f"Todas as {len(inits)} inicializações falharam ({label}).")
    # Ordem fixa dos índices: empates de J ficam com a primeira inicialização
    best_idx = max(sorted(outcomes), key=lambda k: (outcomes[k].J, -k))
    return best_idx, outcomes[best_idx]


def run_vem(
    stream: EventStream,
    Q: int,
    cfg: FitConfig,
    estimator: str,
    rng: np.random.Generator,
    inits: Optional[List[VariationalState]] = None,
) -> FitResult:
    """
    Ajusta o PPSBM com Q grupos a partir de todas as inicializações e devolve
    a execução de maior J final.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"Estimador desconhecido: {estimator}")
    if Q < 1 or Q > stream.n:
        raise FitError(f"Q={Q} inválido para n={stream.n} nós.")
    start = time.time()
    if inits is None:
        inits = init_classifications(stream, Q, cfg, rng)
    label = f"Q={Q}, {estimator}"
    best_idx, best = run_initializations(
        inits, lambda init: _run_from_init(stream, init, cfg, estimator), cfg.workers, label,
    )
    logging.info(
        f"Ajuste VEM concluído ({label}): J={best.J:.6f}, inicialização {best_idx}/{len(inits)}, "
        f"iterações={len(best.trace)}, motivo={best.stop_reason}, {time.time() - start:.2f} s"
    )
    return FitResult(
        Q=Q,
        estimator=estimator,
        tau=best.tau,
        pi=best.pi,
        alpha_hat=best.alpha,
        depths=best.depths,
        J=best.J,
        J_trace=best.trace,
        converged=best.converged,
        stop_reason=best.stop_reason,
        fixed_point_converged=best.fixed_point_converged,
        init_index=best_idx,
        n_inits=len(inits),
        directed=stream.directed,
        n=stream.n,
        T=stream.T,
        config=cfg,
        sparse=best.extra,
    )
