"""
Escolha do número de grupos Q pelo critério ICL.

    ICL(Q) = log P_θ̂{O, τ̂} − ½(Q−1) log n − ½ log r · Σ_{(q,l)} 2^{d̂^(q,l)}

O termo log P é interpretado como a log-verossimilhança completa esperada
sob τ̂, isto é, J sem a entropia de τ. Os pares (q,l) somados são todos os
Q² no modo direcionado e os Q(Q+1)/2 pares q ≤ l no modo não-direcionado.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, List

import numpy as np
from scipy.special import xlogy

from estimation.sparse import icl_sparse, run_vem_sparse
from estimation.statistics import icl_penalty
from estimation.vem import FitConfig, FitResult, UnsupportedEstimatorError, run_vem
from ingestion.event_stream import EventStream
from simulation.ppsbm_simulator import spawn_generator

LOG_P_NOTE = "ICL: log P interpretado como a log-verossimilhança completa esperada sob τ̂ (J sem a entropia de τ)."


def icl(fit: FitResult, stream: EventStream) -> float:
    if fit.estimator != 'histogram' or fit.depths is None:
        logging.error(f"ICL solicitado para ajuste '{fit.estimator}'.")
        raise UnsupportedEstimatorError("O ICL só está definido para ajustes por histograma.")
    if fit.sparse is not None:
        return icl_sparse(fit, stream)
    tau = fit.tau.tau
    log_p = fit.J + float(np.sum(xlogy(tau, tau)))
    logging.info(LOG_P_NOTE)
    return float(log_p - icl_penalty(fit.Q, stream.n, stream.directed, fit.depths))


@dataclass(frozen=True)
class SelectionReport:
    icl_values: Dict[int, float]
    fits: Dict[int, FitResult]
    Q_hat: int

    def __post_init__(self):
        best = max(self.icl_values.values())
        # Empates ficam com o menor Q
        expected = min(Q for Q, value in self.icl_values.items() if value == best)
        if self.Q_hat != expected:
            raise ValueError(f"Q̂={self.Q_hat} não corresponde ao argmax do ICL ({expected}).")

    def to_records(self) -> List[Dict]:
        """Tabela (Q, ICL, J, resumo de d̂) em ordem crescente de Q."""
        records = []
        for Q in sorted(self.fits):
            fit = self.fits[Q]
            records.append({
                'Q': Q,
                'icl': self.icl_values[Q],
                'J': fit.J,
                'depths': np.asarray(fit.depths).tolist(),
                'mean_depth': float(np.mean(fit.depths)),
                'converged': fit.converged,
                'selected': Q == self.Q_hat,
            })
        return records

    def to_dict(self) -> Dict:
        return {'Q_hat': self.Q_hat, 'table': self.to_records()}


def select_Q(
    stream: EventStream,
    Q_max: int,
    cfg: FitConfig,
    seed: int,
    sparse: bool = False,
    workers: int = 1,
) -> SelectionReport:
    """
    Ajusta Q = 1..Q_max (protocolo completo de inicializações em cada Q),
    em paralelo, e devolve o argmax do ICL. O gerador de cada Q deriva de
    (seed, Q), logo o resultado independe da ordem de conclusão.
    """
    if Q_max < 1:
        raise ValueError(f"Q_max deve ser >= 1 (recebido {Q_max}).")
    Q_values = list(range(1, min(Q_max, stream.n) + 1))
    if len(Q_values) < Q_max:
        logging.warning(f"Q_max={Q_max} limitado a n={stream.n}.")
    fitter = run_vem_sparse if sparse else run_vem

    fits: Dict[int, FitResult] = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_Q = {
            executor.submit(fitter, stream, Q, cfg, 'histogram', spawn_generator(seed, Q)): Q
            for Q in Q_values
        }
        for future in as_completed(future_to_Q):
            Q = future_to_Q[future]
            fits[Q] = future.result()

    icl_values = {}
    for Q in sorted(fits):
        icl_values[Q] = icl(fits[Q], stream)
        logging.info(f"Q={Q}: ICL={icl_values[Q]:.4f}, J={fits[Q].J:.4f}")
    best = max(icl_values.values())
    Q_hat = min(Q for Q, value in icl_values.items() if value == best)
    logging.info(f"Q̂ = {Q_hat} (Q_max={Q_max}).")
    return SelectionReport(icl_values=icl_values, fits=fits, Q_hat=Q_hat)
