"""
Cenários sintéticos não-direcionados com T = 1.

Cenário 1: modelo de afiliação com Q = 2, π = (1/2, 1/2),
    α_in(t) = 10(1 + sin 2πt) e α_out(t) = 10(1 + sin 2π(t + φ)).
Cenário 2: Q = 3, π = 1/3 cada, seis intensidades de formas e amplitudes
    distintas (constantes por partes e suaves):
    (1,1) 4 em [0, 0.5), 1 em [0.5, 1)
    (1,2) 8(1 + sin 2πt)
    (1,3) 3
    (2,2) 12·max(0, 1 − 2|t − 0.5|)
    (2,3) constante por partes em 4 células: (2, 14, 6, 10)
    (3,3) 5(1 + cos 2πt)
"""

from typing import Tuple

import numpy as np

from ingestion.event_stream import EventStream
from simulation.intensities import (
    ConstantIntensity,
    PiecewiseConstantIntensity,
    SinusoidIntensity,
    TentIntensity,
)
from simulation.ppsbm_simulator import IntensityModel, simulate_ppsbm

SCENARIO_T = 1.0
SCENARIO1_PHIS = (0.01, 0.05, 0.1, 0.2, 0.5)
SCENARIO1_AMPLITUDE = 10.0


def scenario1_model(phi: float) -> IntensityModel:
    if phi not in SCENARIO1_PHIS:
        raise ValueError(f"φ deve estar em {SCENARIO1_PHIS} (recebido {phi}).")
    alpha_in = SinusoidIntensity(amplitude=SCENARIO1_AMPLITUDE, phase=0.0, T=SCENARIO_T)
    alpha_out = SinusoidIntensity(amplitude=SCENARIO1_AMPLITUDE, phase=phi, T=SCENARIO_T)
    return IntensityModel(
        pi=np.array([0.5, 0.5]),
        alpha=[[alpha_in, alpha_out], [alpha_out, alpha_in]],
        T=SCENARIO_T,
        directed=False,
    )


def scenario2_model() -> IntensityModel:
    a11 = PiecewiseConstantIntensity(heights=(4.0, 1.0), T=SCENARIO_T)
    a12 = SinusoidIntensity(amplitude=8.0, phase=0.0, T=SCENARIO_T)
    a13 = ConstantIntensity(value=3.0, T=SCENARIO_T)
    a22 = TentIntensity(peak=12.0, center=0.5, half_width=0.5, T=SCENARIO_T)
    a23 = PiecewiseConstantIntensity(heights=(2.0, 14.0, 6.0, 10.0), T=SCENARIO_T)
    # 1 + cos 2πt = 1 + sin 2π(t + 1/4)
    a33 = SinusoidIntensity(amplitude=5.0, phase=0.25, T=SCENARIO_T)
    return IntensityModel(
        pi=np.full(3, 1.0 / 3.0),
        alpha=[[a11, a12, a13], [a12, a22, a23], [a13, a23, a33]],
        T=SCENARIO_T,
        directed=False,
    )


def scenario1(phi: float, n: int, rng: np.random.Generator) -> Tuple[EventStream, np.ndarray, IntensityModel]:
    if n < 2:
        raise ValueError(f"O cenário 1 exige n >= 2 (recebido {n}).")
    model = scenario1_model(phi)
    stream, labels = simulate_ppsbm(model, n, rng)
    return stream, labels, model


def scenario2(n: int, rng: np.random.Generator) -> Tuple[EventStream, np.ndarray, IntensityModel]:
    if n < 3:
        raise ValueError(f"O cenário 2 exige n >= 3 (recebido {n}).")
    model = scenario2_model()
    stream, labels = simulate_ppsbm(model, n, rng)
    return stream, labels, model
