"""Instâncias pequenas compartilhadas pelos testes de estimação."""

import numpy as np
import pytest

from ingestion.event_stream import EventStream
from simulation.intensities import PiecewiseConstantIntensity


@pytest.fixture
def make_tau():
    """Fábrica de τ aleatórios com linhas estritamente positivas."""
    def _make(rng: np.random.Generator, n: int, Q: int) -> np.ndarray:
        tau = rng.uniform(0.1, 1.0, size=(n, Q))
        return tau / tau.sum(axis=1, keepdims=True)
    return _make


@pytest.fixture
def toy_directed():
    """n=4, M=5, direcionado, T=1."""
    return EventStream.from_arrays(
        times=[0.05, 0.3, 0.45, 0.62, 0.9],
        senders=[0, 1, 2, 3, 0],
        receivers=[1, 0, 3, 1, 2],
        n=4, T=1.0, directed=True,
    )


@pytest.fixture
def toy_undirected():
    """n=4, M=5, não-direcionado, T=1."""
    return EventStream.from_arrays(
        times=[0.1, 0.2, 0.55, 0.7, 0.95],
        senders=[0, 1, 2, 0, 1],
        receivers=[1, 3, 3, 2, 2],
        n=4, T=1.0, directed=False,
    )


@pytest.fixture
def tiny_directed():
    """n=3 com 2 eventos, usado nos oráculos de D_iq."""
    return EventStream.from_arrays(times=[0.2, 0.7], senders=[0, 2], receivers=[1, 0], n=3, T=1.0, directed=True)


@pytest.fixture
def piecewise_alpha():
    """Grade 2 x 2 direcionada de intensidades constantes por partes."""
    return [
        [PiecewiseConstantIntensity(heights=(3.0, 1.0), T=1.0), PiecewiseConstantIntensity(heights=(0.5, 2.0), T=1.0)],
        [PiecewiseConstantIntensity(heights=(1.5, 1.5, 0.0, 4.0), T=1.0), PiecewiseConstantIntensity(heights=(2.5,), T=1.0)],
    ]


@pytest.fixture
def two_cliques():
    """n=10 não-direcionado: grupos {0..4} e {5..9}, eventos só dentro dos grupos."""
    times, senders, receivers = [], [], []
    for block in (range(0, 5), range(5, 10)):
        for i in block:
            for j in block:
                if i < j:
                    for k in range(3):
                        times.append((0.1 + 0.3 * k + 0.01 * (i + j)) % 1.0)
                        senders.append(i)
                        receivers.append(j)
    return EventStream.from_arrays(times, senders, receivers, n=10, T=1.0, directed=False)
