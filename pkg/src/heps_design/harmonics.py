"""Fourier-series model of the bridge voltages and inductor current."""
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from heps_design.domain import ConverterSpec, ModulationPoint, Strategy
from heps_design.errors import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HarmonicSeries:
    """
    Odd harmonics 1..K of vp, vs and iL.

    Every quantity is stored as amplitude/phase of ``amp * sin(k*omega0*t + phase)``.
    """

    K: int
    orders: np.ndarray
    omega0: float
    phi_o: float
    phi_v1: float
    phi_v2: float
    vp_amp: np.ndarray
    vp_phase: np.ndarray
    vs_amp: np.ndarray
    vs_phase: np.ndarray
    iL_amp: np.ndarray
    iL_phase: np.ndarray


def _square_wave_phasor(V: float, k: np.ndarray, phi_v: float, shift: float) -> np.ndarray:
    # three-level wave with a zero plateau of phi_v rad, delayed by ``shift`` rad
    return (4.0 * V / (k * math.pi)) * np.cos(k * phi_v / 2.0) * np.exp(-1j * k * shift)


def harmonic_spectrum(spec: ConverterSpec, mod: ModulationPoint, V2: float, K: int) -> HarmonicSeries:
    """
    Phasors of the odd harmonics up to ``K``, aligned to :func:`gate_schedule`.

    Args:
        spec (ConverterSpec): Converter parameters.
        mod (ModulationPoint): Modulation point.
        V2 (float): Output dc voltage (V).
        K (int): Highest harmonic order, odd and >= 1.

    Returns:
        HarmonicSeries: Amplitudes and phases per order.

    Raises:
        DomainError: If K is even or smaller than 1.
    """
    if K < 1 or K % 2 == 0:
        raise DomainError(f"K must be odd and >= 1, got {K}", field="K")
    if not V2 > 0:
        raise DomainError(f"V2 must be > 0, got {V2}", field="V2")

    k = np.arange(1, K + 1, 2, dtype=float)
    omega0 = 2.0 * math.pi * spec.fs
    phi_o = math.pi * mod.Do
    phi_v = (1.0 - mod.Din) * math.pi
    if mod.S is Strategy.EPS1:
        phi_v1, phi_v2 = phi_v, 0.0
        vp = _square_wave_phasor(spec.V1, k, phi_v1, phi_v1 / 2.0)
        vs = _square_wave_phasor(V2, k, 0.0, phi_o)
    else:
        phi_v1, phi_v2 = 0.0, phi_v
        vp = _square_wave_phasor(spec.V1, k, 0.0, 0.0)
        vs = _square_wave_phasor(V2, k, phi_v2, phi_o - phi_v2 / 2.0)
    iL = (vp - spec.n * vs) / (1j * k * omega0 * spec.Lr)

    return HarmonicSeries(
        K=K,
        orders=k.astype(int),
        omega0=omega0,
        phi_o=phi_o,
        phi_v1=phi_v1,
        phi_v2=phi_v2,
        vp_amp=np.abs(vp),
        vp_phase=np.angle(vp),
        vs_amp=np.abs(vs),
        vs_phase=np.angle(vs),
        iL_amp=np.abs(iL),
        iL_phase=np.angle(iL),
    )


def _evaluate(amp: np.ndarray, phase: np.ndarray, orders: np.ndarray, omega0: float, t):
    t_arr = np.asarray(t, dtype=float)
    arg = np.multiply.outer(t_arr, orders * omega0) + phase
    values = np.sin(arg) @ amp
    return float(values) if np.ndim(values) == 0 else values


def eval_harmonic_current(series: HarmonicSeries, t: Union[float, np.ndarray]):
    """Sum of the iL harmonic terms at time(s) ``t``, in A."""
    return _evaluate(series.iL_amp, series.iL_phase, series.orders, series.omega0, t)


def eval_harmonic_voltages(series: HarmonicSeries, t: Union[float, np.ndarray]):
    """Truncated-series (vp, vs) at time(s) ``t``."""
    return (
        _evaluate(series.vp_amp, series.vp_phase, series.orders, series.omega0, t),
        _evaluate(series.vs_amp, series.vs_phase, series.orders, series.omega0, t),
    )


def harmonic_power(series: HarmonicSeries) -> float:
    """Transferred power summed over the harmonics, 0.5 * |Vp| * |I| * cos(angle) per order."""
    return float(np.sum(0.5 * series.vp_amp * series.iL_amp * np.cos(series.vp_phase - series.iL_phase)))
