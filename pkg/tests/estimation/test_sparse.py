"""
Testes para a variante esparsa do VEM (estimation/sparse.py).

Testes Unitários:
- `test_compute_rho_examples`: A = 0 dá β; β = 1 dá 1; β = 0.5 e A = log 2 dão 1/3.
- `test_compute_rho_monotone`: ρ decresce em A e cresce em β.
- `test_psi_boundaries`: ψ(0) = ψ(1) = 0 e ψ(1/2) = log(1/2).
- `test_update_beta_matches_loops`: β̂ contra a soma direta em i ≠ j, com ρ = 1 nas díades com eventos.
- `test_update_beta_extremes`: Sem díades ativas, ρ ≡ 1 dá β̂ ≡ 1 e ρ ≡ 0 dá β̂ ≡ 0; todas ativas dão β̂ ≡ 1.
- `test_init_sparse_example`: β₀ e A₀ calculados à mão num fluxo pequeno.
- `test_compute_D_sparse_matches_brute_force`: D̃ vetorizado contra laços por díade.
- `test_e_step_sparse_fixed_point_residual`: O ponto fixo esparso convergido satisfaz a própria equação (< 1e-8).
- `test_dense_reduction_of_D_and_J`: Com todas as díades ativas e β ≡ 1, D̃ = D e J̃ = J.
- `test_run_vem_sparse_reduces_to_dense`: Por inicialização, mesmos J, τ, π e alturas, com β̂ ≡ 1.
- `test_run_vem_sparse_single_group`: Q = 1 produz β̂ escalar em [0, 1].

Testes de Integração:
- `test_sparse_recovers_beta`: Com Q = 1 e β = 0.5, β̂ fica a até 3 erros-padrão binomiais de 0.5.
"""

import numpy as np
import pytest

from estimation.sparse import (
    compute_D_sparse,
    compute_rho,
    dyad_masks,
    e_step_sparse,
    evaluate_J_sparse,
    init_sparse,
    psi,
    run_vem_sparse,
    update_beta,
)
from estimation.statistics import VariationalState, compute_stats
from estimation.vem import (
    FitConfig,
    compute_D_matrix,
    evaluate_intensities,
    evaluate_J,
    run_vem,
)
from ingestion.event_stream import EventStream
from simulation.intensities import ConstantIntensity
from simulation.ppsbm_simulator import IntensityModel, simulate_sparse, spawn_generator


@pytest.fixture
def complete_stream():
    """n=6 não-direcionado com eventos em todas as díades."""
    times, senders, receivers = [], [], []
    for i in range(6):
        for j in range(i + 1, 6):
            same = (i < 3) == (j < 3)
            for k in range(3 if same else 1):
                times.append((0.05 + 0.31 * k + 0.02 * (i + j)) % 1.0)
                senders.append(i)
                receivers.append(j)
    return EventStream.from_arrays(times, senders, receivers, n=6, T=1.0, directed=False)


def test_compute_rho_examples():
    assert compute_rho(0.3, 0.0) == pytest.approx(0.3)
    assert compute_rho(1.0, 5.0) == 1.0
    assert compute_rho(0.5, np.log(2)) == pytest.approx(1 / 3)
    assert compute_rho(0.0, 2.0) == 0.0
    # A(T) enorme não produz NaN
    assert compute_rho(0.5, 1e4) == 0.0
    with pytest.raises(ValueError):
        compute_rho(1.5, 1.0)


def test_compute_rho_monotone():
    A = np.linspace(0, 10, 50)
    rho = compute_rho(np.full(50, 0.4), A)
    assert np.all(np.diff(rho) < 0)
    beta = np.linspace(0.01, 0.99, 50)
    assert np.all(np.diff(compute_rho(beta, np.full(50, 2.0))) > 0)


def test_psi_boundaries():
    np.testing.assert_array_equal(psi([0.0, 1.0]), [0.0, 0.0])
    assert psi(0.5) == pytest.approx(np.log(0.5))


def _brute_beta(tau, positive, rho_ql):
    n, Q = tau.shape
    expected = np.zeros((Q, Q))
    for q in range(Q):
        for l in range(Q):
            num = den = 0.0
            for i in range(n):
                for j in range(n):
                    if i != j:
                        rho = 1.0 if positive[i, j] else rho_ql[q, l]
                        num += tau[i, q] * tau[j, l] * rho
                        den += tau[i, q] * tau[j, l]
            expected[q, l] = num / den
    return expected


@pytest.mark.parametrize("directed", [True, False])
def test_update_beta_matches_loops(make_tau, directed):
    rng = np.random.default_rng(0)
    tau = make_tau(rng, 6, 2)
    positive = rng.uniform(size=(6, 6)) < 0.4
    if not directed:
        positive = np.triu(positive, 1)
        positive = positive | positive.T
    np.fill_diagonal(positive, False)
    zero = ~positive
    np.fill_diagonal(zero, False)
    rho_ql = rng.uniform(size=(2, 2))
    if not directed:
        rho_ql = (rho_ql + rho_ql.T) / 2
    beta, empty = update_beta(tau, rho_ql, (positive, zero), directed)
    np.testing.assert_allclose(beta, _brute_beta(tau, positive, rho_ql), atol=1e-12)
    assert not empty.any()


def test_update_beta_extremes(make_tau):
    tau = make_tau(np.random.default_rng(1), 4, 3)
    positive = np.zeros((4, 4), dtype=bool)
    zero = ~np.eye(4, dtype=bool)
    beta, _ = update_beta(tau, np.ones((3, 3)), (positive, zero), True)
    np.testing.assert_allclose(beta, np.ones((3, 3)))
    beta, _ = update_beta(tau, np.zeros((3, 3)), (positive, zero), True)
    np.testing.assert_allclose(beta, np.zeros((3, 3)))
    # Todas as díades com eventos: β̂ ≡ 1 qualquer que seja ρ
    beta, _ = update_beta(tau, np.zeros((3, 3)), (zero, positive), True)
    np.testing.assert_allclose(beta, np.ones((3, 3)))


def test_init_sparse_example(toy_directed):
    tau = VariationalState.from_labels([0, 0, 1, 1], 2).tau
    beta0, A0, rho0 = init_sparse(toy_directed, tau)
    # Díades com eventos: (0,1), (1,0), (2,3), (3,1), (0,2)
    np.testing.assert_allclose(beta0, [[1.0, 0.25], [0.25, 0.5]])
    np.testing.assert_allclose(A0, np.ones((2, 2)))
    np.testing.assert_allclose(rho0, compute_rho(beta0, A0))
    assert rho0[0, 0] == 1.0


def _brute_D_sparse(stream, tau, alpha, beta, rho):
    n, Q = tau.shape
    A = np.array([[alpha[q][l].integral() for l in range(Q)] for q in range(Q)])
    log_beta = np.log(np.clip(beta, 1e-12, 1.0))
    log_other = np.log(np.clip(1.0 - beta, 1e-12, 1.0))
    c_pos = -A + log_beta
    c_zero = -rho * A - psi(rho) + rho * log_beta + (1.0 - rho) * log_other
    totals = stream.dyad_totals()
    D = np.zeros((n, Q))
    for i in range(n):
        for q in range(Q):
            for j in range(n):
                if j == i:
                    continue
                for l in range(Q):
                    out = c_pos[q, l] if totals[i, j] > 0 else c_zero[q, l]
                    inc = c_pos[l, q] if totals[j, i] > 0 else c_zero[l, q]
                    for t, s, r in zip(stream.times, stream.senders, stream.receivers):
                        if (s, r) == (i, j):
                            out += np.log(max(float(alpha[q][l].evaluate(t)), 1e-10))
                        elif (s, r) == (j, i):
                            inc += np.log(max(float(alpha[l][q].evaluate(t)), 1e-10))
                    D[i, q] += tau[j, l] * (out + inc)
    return D


def test_compute_D_sparse_matches_brute_force(tiny_directed, piecewise_alpha, make_tau):
    tau = make_tau(np.random.default_rng(2), 3, 2)
    beta = np.array([[0.7, 0.2], [0.4, 0.9]])
    evaluation = evaluate_intensities(piecewise_alpha, tiny_directed, 1e-10)
    rho = compute_rho(beta, evaluation.cumulative)
    positive, zero = dyad_masks(tiny_directed)
    result = compute_D_sparse(tau, tiny_directed, evaluation, beta, rho, positive, zero)
    np.testing.assert_allclose(result, _brute_D_sparse(tiny_directed, tau, piecewise_alpha, beta, rho), atol=1e-10)


def test_e_step_sparse_fixed_point_residual(toy_directed, make_tau):
    alpha = [[ConstantIntensity(value=v, T=1.0) for v in row] for row in ([1.0, 0.8], [0.9, 1.1])]
    evaluation = evaluate_intensities(alpha, toy_directed, 1e-10)
    beta = np.array([[0.8, 0.6], [0.5, 0.9]])
    rho = compute_rho(beta, evaluation.cumulative)
    masks = dyad_masks(toy_directed)
    pi = np.array([0.6, 0.4])
    cfg = FitConfig(fix_iter=500, fix_eps=1e-13)
    tau0 = make_tau(np.random.default_rng(5), 4, 2)
    result = e_step_sparse(tau0, pi, evaluation, beta, rho, toy_directed, cfg, masks)
    assert result.converged
    tau = result.state.tau
    logits = np.log(pi)[None, :] + compute_D_sparse(tau, toy_directed, evaluation, beta, rho, *masks)
    plugged = np.exp(logits - logits.max(axis=1, keepdims=True))
    plugged /= plugged.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(plugged, tau, atol=1e-8)


def test_dense_reduction_of_D_and_J(complete_stream, make_tau):
    tau = make_tau(np.random.default_rng(3), 6, 2)
    alpha = [[ConstantIntensity(value=2.0, T=1.0), ConstantIntensity(value=0.7, T=1.0)],
             [ConstantIntensity(value=0.7, T=1.0), ConstantIntensity(value=1.6, T=1.0)]]
    evaluation = evaluate_intensities(alpha, complete_stream, 1e-10)
    beta = np.ones((2, 2))
    rho = compute_rho(beta, evaluation.cumulative)
    masks = dyad_masks(complete_stream)
    assert not masks[1].any()
    np.testing.assert_allclose(
        compute_D_sparse(tau, complete_stream, evaluation, beta, rho, *masks),
        compute_D_matrix(tau, complete_stream, evaluation),
        atol=1e-10,
    )
    pi = np.array([0.4, 0.6])
    stats = compute_stats(complete_stream, tau, d_max=2)
    assert evaluate_J_sparse(pi, evaluation, beta, tau, rho, stats, masks) == pytest.approx(
        evaluate_J(pi, evaluation, stats, tau), abs=1e-9
    )


def test_run_vem_sparse_reduces_to_dense(complete_stream):
    cfg = FitConfig(workers=1)
    inits = [
        VariationalState.from_labels([0, 0, 0, 1, 1, 1], 2),
        VariationalState.from_labels([0, 1, 0, 1, 0, 1], 2),
    ]
    for init in inits:
        dense = run_vem(complete_stream, 2, cfg, 'histogram', spawn_generator(0), inits=[init])
        sparse = run_vem_sparse(complete_stream, 2, cfg, 'histogram', spawn_generator(0), inits=[init])
        assert sparse.J == pytest.approx(dense.J, rel=1e-8)
        np.testing.assert_allclose(sparse.tau.tau, dense.tau.tau, atol=1e-8)
        np.testing.assert_allclose(sparse.pi, dense.pi, atol=1e-8)
        np.testing.assert_array_equal(sparse.depths, dense.depths)
        for q in range(2):
            for l in range(2):
                np.testing.assert_allclose(sparse.alpha_hat[q][l].values, dense.alpha_hat[q][l].values, atol=1e-8)
        np.testing.assert_allclose(sparse.sparse.beta, np.ones((2, 2)))
        assert not sparse.sparse.zero_dyads.any()


def test_run_vem_sparse_single_group(toy_undirected):
    fit = run_vem_sparse(toy_undirected, 1, FitConfig(workers=1), 'histogram', spawn_generator(1))
    beta = fit.sparse.beta
    assert beta.shape == (1, 1) and 0.0 <= beta[0, 0] <= 1.0
    assert fit.to_dict()['beta'] == beta.tolist()


@pytest.mark.integration
def test_sparse_recovers_beta():
    rate = ConstantIntensity(value=3.0, T=1.0)
    model = IntensityModel(pi=np.array([1.0]), alpha=[[rate]], T=1.0, directed=False)
    n = 20
    standard_error = np.sqrt(0.25 / (n * (n - 1) // 2))
    estimates = []
    for k in range(50):
        stream, _, _ = simulate_sparse(model, np.full((1, 1), 0.5), n, spawn_generator(2, k))
        fit = run_vem_sparse(stream, 1, FitConfig(workers=1), 'histogram', spawn_generator(3, k))
        estimates.append(fit.sparse.beta[0, 0])
    within = np.abs(np.array(estimates) - 0.5) <= 3 * standard_error
    assert within.mean() >= 0.95
