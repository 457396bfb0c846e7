"""
Variante esparsa do PPSBM: cada díade (i,j) é ativa com probabilidade
β_{q,l} (variável U_{i,j}); díades inativas nunca interagem.

A distribuição condicional exata de U dado os dados é
    ρ(i,j,q,l) = 1                               se N_{i,j}(T) > 0,
    ρ(i,j,q,l) = ρ_θ(q,l) = β e^{−A} / (1 − β + β e^{−A})   caso contrário,
com A = A^(q,l)(T). Como ρ depende da díade apenas pelo indicador
1{N_{i,j}(T) = 0}, todas as somas por díade se reduzem a duas massas
variacionais: a das díades com eventos (Y⁺) e a das díades sem eventos (Y⁰).

Convenções: ψ(ρ) = ρ log ρ + (1 − ρ) log(1 − ρ) com 0·log 0 = 0, e β
limitado a [1e-12, 1 − 1e-12] apenas dentro dos logaritmos.
"""

import logging
import time
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import xlogy

from estimation.statistics import (
    SufficientStats,
    VariationalState,
    compute_stats,
    icl_penalty,
    pair_mass,
    update_pi,
)
from estimation.vem import (
    ESTIMATORS,
    EStepResult,
    FitConfig,
    FitError,
    FitResult,
    UnsupportedEstimatorError,
    IntensityEvaluation,
    StoppingRule,
    _RunOutcome,
    entropy_and_prior,
    evaluate_intensities,
    event_terms,
    fixed_point,
    init_classifications,
    m_step,
    run_initializations,
)
from ingestion.event_stream import EventStream

LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class SparseState:
    beta: np.ndarray         # Q x Q
    rho_ql: np.ndarray       # Q x Q
    zero_dyads: np.ndarray   # n x n, 1{N_ij(T) = 0} fora da diagonal
    empty_pairs: np.ndarray  # Q x Q, pares com denominador nulo na última atualização de β

    def __post_init__(self):
        for name in ('beta', 'rho_ql'):
            values = np.asarray(getattr(self, name))
            if np.any(values < 0) or np.any(values > 1):
                raise ValueError(f"{name} deve ter entradas em [0, 1].")


def compute_rho(beta, A_T):
    """ρ_θ(q,l) para díades sem eventos; vetorizado em (β, A(T))."""
    beta = np.asarray(beta, dtype=float)
    A_T = np.asarray(A_T, dtype=float)
    if np.any(beta < 0) or np.any(beta > 1) or np.any(A_T < 0):
        raise ValueError("compute_rho exige β em [0, 1] e A(T) >= 0.")
    # β / (β + (1 − β) e^{A}) evita 0/0 quando e^{−A} é subnormal
    with np.errstate(over='ignore'):
        denom = beta + (1.0 - beta) * np.exp(A_T)
    rho = np.where(beta >= 1.0, 1.0, np.divide(beta, denom, out=np.zeros_like(denom), where=denom > 0))
    return rho if rho.ndim else float(rho)


def psi(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    return xlogy(rho, rho) + xlogy(1.0 - rho, 1.0 - rho)


def dyad_masks(stream: EventStream) -> Tuple[np.ndarray, np.ndarray]:
    """(díades com eventos, díades sem eventos), ambas sem a diagonal."""
    totals = stream.dyad_totals()
    positive = totals > 0
    zero = ~positive
    np.fill_diagonal(positive, False)
    np.fill_diagonal(zero, False)
    return positive, zero


def _log_beta(beta: np.ndarray) -> np.ndarray:
    return np.log(np.clip(beta, LOG_CLAMP, 1.0))


def _log_one_minus_beta(beta: np.ndarray) -> np.ndarray:
    return np.log(np.clip(1.0 - beta, LOG_CLAMP, 1.0))


def update_beta(
    tau: np.ndarray,
    rho_ql: np.ndarray,
    masks: Tuple[np.ndarray, np.ndarray],
    directed: bool,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    β_{q,l} = Σ_{i≠j} τ^{i,q}τ^{j,l}ρ(i,j,q,l) / Σ_{i≠j} τ^{i,q}τ^{j,l}, com
    ρ = 1 nas díades com eventos e ρ_{q,l} nas demais, ou seja
    (Y⁺ + ρ·Y⁰)/(Y⁺ + Y⁰). Pares sem massa recebem β = 1 e são sinalizados.
    """
    positive, zero = masks
    tau = np.asarray(tau, dtype=float)
    Y_pos = pair_mass(tau, positive, directed)
    Y_zero = pair_mass(tau, zero, directed)
    denom = Y_pos + Y_zero
    empty = denom <= 0
    beta = np.ones_like(denom)
    np.divide(Y_pos + rho_ql * Y_zero, denom, out=beta, where=~empty)
    if np.any(empty):
        logging.warning(f"{int(empty.sum())} par(es) de grupos sem massa variacional; β fixado em 1.")
    return np.clip(beta, 0.0, 1.0), empty


def init_sparse(stream: EventStream, tau: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    β₀ = fração (ponderada por τ) de díades com eventos;
    A₀(T) = média de eventos por díade ativa; ρ₀ = compute_rho(β₀, A₀).
    """
    tau = np.asarray(tau, dtype=float)
    positive, zero = dyad_masks(stream)
    Y_pos = pair_mass(tau, positive, stream.directed)
    Y_all = pair_mass(tau, positive | zero, stream.directed)
    N_mass = pair_mass(tau, stream.dyad_totals(), stream.directed)
    beta0 = np.ones_like(Y_all)
    np.divide(Y_pos, Y_all, out=beta0, where=Y_all > 0)
    A0 = np.zeros_like(Y_pos)
    np.divide(N_mass, Y_pos, out=A0, where=Y_pos > 0)
    flagged = (Y_all <= 0) | (Y_pos <= 0)
    if np.any(flagged):
        logging.warning(f"Inicialização esparsa: {int(flagged.sum())} par(es) sem díades; β₀ = 1 e A₀ = 0.")
        beta0[Y_all <= 0] = 1.0
    beta0 = np.clip(beta0, 0.0, 1.0)
    return beta0, A0, compute_rho(beta0, A0)


def _pair_costs(beta: np.ndarray, rho_ql: np.ndarray, A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Contribuições por par (q,l) de uma díade com eventos (sem os termos de evento) e sem eventos."""
    log_beta = _log_beta(beta)
    c_pos = -A + log_beta
    c_zero = -rho_ql * A - psi(rho_ql) + rho_ql * log_beta + (1.0 - rho_ql) * _log_one_minus_beta(beta)
    return c_pos, c_zero


def compute_D_sparse(
    tau: np.ndarray,
    stream: EventStream,
    evaluation: IntensityEvaluation,
    beta: np.ndarray,
    rho_ql: np.ndarray,
    positive: np.ndarray,
    zero: np.ndarray,
) -> np.ndarray:
    """D̃_iq para todos os nós (n x Q)."""
    c_pos, c_zero = _pair_costs(beta, rho_ql, evaluation.cumulative)
    P = positive.astype(float)
    Z = zero.astype(float)
    if stream.directed:
        dyad_part = (P @ tau) @ c_pos.T + (Z @ tau) @ c_zero.T + (P.T @ tau) @ c_pos + (Z.T @ tau) @ c_zero
    else:
        dyad_part = (P @ tau) @ c_pos + (Z @ tau) @ c_zero
    return dyad_part + event_terms(tau, stream, evaluation.log_values)


def e_step_sparse(
    tau0: np.ndarray,
    pi: np.ndarray,
    evaluation: IntensityEvaluation,
    beta: np.ndarray,
    rho_ql: np.ndarray,
    stream: EventStream,
    cfg: FitConfig,
    masks: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> EStepResult:
    positive, zero = masks if masks is not None else dyad_masks(stream)
    return fixed_point(
        tau0, pi,
        lambda tau: compute_D_sparse(tau, stream, evaluation, beta, rho_ql, positive, zero),
        cfg,
    )


def evaluate_J_sparse(
    pi: np.ndarray,
    evaluation: IntensityEvaluation,
    beta: np.ndarray,
    tau: np.ndarray,
    rho_ql: np.ndarray,
    stats: SufficientStats,
    masks: Tuple[np.ndarray, np.ndarray],
) -> float:
    """J̃ com θ nas duas posições; o termo ψ usa a simplificação por díades sem eventos."""
    positive, zero = masks
    mask = stats.pair_mask
    Y_pos = pair_mass(tau, positive, stats.directed)
    Y_zero = pair_mass(tau, zero, stats.directed)
    c_pos, c_zero = _pair_costs(beta, rho_ql, evaluation.cumulative)
    dyad_term = np.sum(mask * (Y_pos * c_pos + Y_zero * c_zero))
    event_term = np.sum(mask * np.einsum('mql,mql->ql', stats.event_weights, evaluation.log_values))
    return float(dyad_term + event_term + entropy_and_prior(pi, tau))


def _run_sparse_from_init(
    stream: EventStream,
    tau0: VariationalState,
    cfg: FitConfig,
    estimator: str,
    masks: Tuple[np.ndarray, np.ndarray],
) -> _RunOutcome:
    positive, zero = masks
    tau = tau0.tau
    _, _, rho_ql = init_sparse(stream, tau)
    rule = StoppingRule(cfg.epsilon, cfg.nb_iter)
    best: Optional[_RunOutcome] = None
    while True:
        pi = update_pi(tau)
        Y_pos = pair_mass(tau, positive, stream.directed)
        Y_zero = pair_mass(tau, zero, stream.directed)
        beta, empty = update_beta(tau, rho_ql, masks, stream.directed)
        stats = compute_stats(stream, tau, cfg.d_max)
        # Ñ = N: eventos só ocorrem em díades com ρ = 1
        alpha, depths = m_step(stream, stats, estimator, cfg, Y=Y_pos + rho_ql * Y_zero)
        evaluation = evaluate_intensities(alpha, stream, cfg.intensity_floor)
        rho_ql = compute_rho(beta, evaluation.cumulative)
        e_result = e_step_sparse(tau, pi, evaluation, beta, rho_ql, stream, cfg, masks)
        new_tau = e_result.state.tau
        new_stats = compute_stats(stream, new_tau, cfg.d_max)
        J = evaluate_J_sparse(pi, evaluation, beta, new_tau, rho_ql, new_stats, masks)
        stop, converged, reason = rule.update(J, np.array_equal(new_tau, tau))
        if best is None or J > best.J:
            best = _RunOutcome(
                tau=e_result.state, pi=pi, alpha=alpha, depths=depths, J=J, trace=[],
                converged=False, stop_reason='', fixed_point_converged=e_result.converged,
                extra=SparseState(beta=beta, rho_ql=rho_ql, zero_dyads=zero, empty_pairs=empty),
            )
        tau = new_tau
        if stop:
            return replace(best, trace=list(rule.trace), converged=converged, stop_reason=reason)


def run_vem_sparse(
    stream: EventStream,
    Q: int,
    cfg: FitConfig,
    estimator: str,
    rng: np.random.Generator,
    inits: Optional[List[VariationalState]] = None,
) -> FitResult:
    """VEM esparso: π, β, α (denominador ponderado por ρ), ρ e por fim τ."""
    if estimator not in ESTIMATORS:
        raise ValueError(f"Estimador desconhecido: {estimator}")
    if Q < 1 or Q > stream.n:
        raise FitError(f"Q={Q} inválido para n={stream.n} nós.")
    start = time.time()
    masks = dyad_masks(stream)
    if inits is None:
        inits = init_classifications(stream, Q, cfg, rng)
    label = f"Q={Q}, {estimator}, esparso"
    best_idx, best = run_initializations(
        inits, lambda init: _run_sparse_from_init(stream, init, cfg, estimator, masks), cfg.workers, label,
    )
    logging.info(
        f"Ajuste VEM esparso concluído ({label}): J̃={best.J:.6f}, inicialização {best_idx}/{len(inits)}, "
        f"iterações={len(best.trace)}, {time.time() - start:.2f} s"
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


def icl_sparse(fit: FitResult, stream: EventStream) -> float:
    """
    ICL esparso: (J̃ + Σ τ log τ) − ½(Q−1) log n − ½ log r (n_pares + Σ 2^{d̂}),
    com n_pares = Q² (direcionado) ou Q(Q+1)/2 (não-direcionado).
    """
    if fit.sparse is None:
        raise ValueError("icl_sparse exige um ajuste esparso.")
    if fit.estimator != 'histogram' or fit.depths is None:
        raise UnsupportedEstimatorError("O ICL só está definido para ajustes por histograma.")
    tau = fit.tau.tau
    log_p = fit.J + float(np.sum(xlogy(tau, tau)))
    logging.info("ICL esparso: log P interpretado como J̃ sem a entropia de τ (inclui ψ(ρ)).")
    return float(log_p - icl_penalty(fit.Q, stream.n, stream.directed, fit.depths, extra_per_pair=1))
