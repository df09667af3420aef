"""
Time-stepping references for the analytic solver.

``simulate_transient`` integrates the inductor current with a fixed step and
``simulate_commutation`` follows the drain-source voltage of a leg through its
dead time. ``soft_turn_on_from_levels`` reads ZVS off the bridge levels around
each edge instead of the per-leg current table.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict

import numpy as np

from heps_design.converter import PRIMARY_LEGS, gate_schedule
from heps_design.domain import ConverterSpec, ModulationPoint
from heps_design.errors import DomainError
from heps_design.losses import zvs_threshold

logger = logging.getLogger(__name__)

MIN_STEPS_PER_PERIOD = 5000
COMMUTATION_STEPS = 400


@dataclass(frozen=True)
class TransientTrace:
    dt: float
    samples: np.ndarray

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt


def _levels(schedule, t: np.ndarray, V1: float, V2: float):
    half = schedule.Ts / 2.0
    h = {e.leg: (np.mod(t - e.rising, schedule.Ts) < half).astype(float) for e in schedule.legs}
    return V1 * (h["A"] - h["B"]), V2 * (h["C"] - h["D"])


def simulate_transient(spec: ConverterSpec, mod: ModulationPoint, V2: float, dt: float) -> TransientTrace:
    """
    Explicit fixed-step integration of L*diL/dt = vp - n*vs over one period.

    The run starts from iL = 0; the period mean is subtracted afterwards,
    which picks the antisymmetric steady state of the ideal circuit.

    Args:
        spec (ConverterSpec): Converter parameters.
        mod (ModulationPoint): Modulation point.
        V2 (float): Output dc voltage (V).
        dt (float): Step size (s), at most Ts/5000.

    Returns:
        TransientTrace: round(Ts/dt) current samples with zero mean.

    Raises:
        DomainError: If dt is not positive or too coarse.
    """
    Ts = spec.Ts
    if not 0 < dt <= Ts / MIN_STEPS_PER_PERIOD * (1.0 + 1e-12):
        raise DomainError(f"dt must lie in (0, Ts/{MIN_STEPS_PER_PERIOD}], got {dt}", field="dt")
    steps = int(round(Ts / dt))
    schedule = gate_schedule(spec, mod)
    # bridge levels held at each step midpoint
    vp, vs = _levels(schedule, (np.arange(steps) + 0.5) * dt, spec.V1, V2)
    increments = (vp - spec.n * vs) * (dt / spec.Lr)
    samples = np.concatenate(([0.0], np.cumsum(increments[:-1])))
    samples -= samples.mean()
    return TransientTrace(dt=dt, samples=samples)


@dataclass(frozen=True)
class CommutationTrace:
    """Drain-source voltage of the incoming device across one dead time."""

    device: str
    t: np.ndarray
    vds: np.ndarray
    zvs: bool
    transition_time: float


def simulate_commutation(event, spec: ConverterSpec) -> CommutationTrace:
    """
    Follow the switch-node voltage of one leg through the dead time.

    Both output capacitances of the leg are driven by the commutation current,
    so the node moves at I/(2*Coss_eff) and the body diodes clamp it at the
    rails. ZVS holds when the incoming device's vds has reached zero by the
    end of the dead time.

    Args:
        event (SwitchingEvent): Edge to examine.
        spec (ConverterSpec): Supplies Coss_eff and the dead time.

    Returns:
        CommutationTrace: Sampled vds and the ZVS verdict.
    """
    V = event.v_dc
    coss = spec.loss_params.coss_eff
    t = np.linspace(0.0, spec.t_dead, COMMUTATION_STEPS + 1)
    # commutation currents leave primary switch nodes and enter secondary ones
    i_into_node = -event.current if event.leg in PRIMARY_LEGS else event.current
    rising = event.direction == "rising"
    v_start = 0.0 if rising else V

    if coss > 0:
        v_node = np.clip(v_start + i_into_node / (2.0 * coss) * t, 0.0, V)
        rate = abs(i_into_node) / (2.0 * coss)
        transition_time = V / rate if rate > 0 else math.inf
    else:
        v_node = np.full_like(t, V if i_into_node > 0 else 0.0)
        v_node[0] = v_start
        transition_time = 0.0 if i_into_node != 0 else math.inf

    vds = V - v_node if rising else v_node
    zvs = bool(vds[-1] <= 1e-9 * V) and transition_time <= spec.t_dead
    return CommutationTrace(device=event.device, t=t, vds=vds, zvs=zvs, transition_time=transition_time)


# high-side and low-side device of each leg
_LEG_DEVICES = {"A": ("S1", "S2"), "B": ("S3", "S4"), "C": ("Q1", "Q2"), "D": ("Q3", "Q4")}


def _leg_step(schedule, leg: str, t: float, eps: float):
    """Bridge-voltage step caused by ``leg`` alone at its edge ``t``, and the leg level after it."""
    held = tuple(
        replace(e, rising=e.rising + 2.0 * eps, falling=e.falling + 2.0 * eps) if e.leg == leg else e
        for e in schedule.legs
    )
    after = np.array([t + eps])
    vp, vs = _levels(schedule, after, 1.0, 1.0)
    vp_held, vs_held = _levels(replace(schedule, legs=held), after, 1.0, 1.0)
    level = {e.leg: float(np.mod(t + eps - e.rising, schedule.Ts) < schedule.Ts / 2.0) for e in schedule.legs}
    return float(vp[0] - vp_held[0]), float(vs[0] - vs_held[0]), level[leg]


def soft_turn_on_from_levels(spec: ConverterSpec, mod: ModulationPoint, V2: float, wf) -> Dict[str, bool]:
    """
    Soft turn-on of every device, read off the bridge levels around each edge.

    The primary bridge sources the link current, so its node capacitances
    swing toward the new level only when iL opposes the vp step; the
    secondary bridge sinks n*iL, which has to follow the vs step. The
    current has to exceed the dead-time threshold in that direction.

    Args:
        spec (ConverterSpec): Converter parameters and ZVS mode.
        mod (ModulationPoint): Modulation point.
        V2 (float): Output dc voltage (V).
        wf (PiecewiseWaveform): Solved waveform of the same point.

    Returns:
        Dict[str, bool]: Device name -> soft turn-on.
    """
    schedule = gate_schedule(spec, mod)
    eps = schedule.Ts * 1e-9
    flags = {}
    for edges in schedule.legs:
        for t in (edges.rising, edges.falling):
            dvp, dvs, level = _leg_step(schedule, edges.leg, t, eps)
            i_link = wf.current_at(t)
            if edges.leg in PRIMARY_LEGS:
                drive = -np.sign(dvp) * i_link
                i_th = zvs_threshold(spec, spec.V1)
            else:
                drive = np.sign(dvs) * spec.n * i_link
                i_th = zvs_threshold(spec, V2)
            high, low = _LEG_DEVICES[edges.leg]
            flags[high if level > 0.5 else low] = bool(drive > i_th)
    return flags
