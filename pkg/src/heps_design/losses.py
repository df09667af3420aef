"""
ZVS checking and loss estimation for a solved operating point.

This replaces circuit-simulator loss measurement with a parameterized
analytic model: device conduction, winding copper, edge switching energies
and an optional Steinmetz core term.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from heps_design.converter import (
    PRIMARY_LEGS,
    PiecewiseWaveform,
    SwitchingSchedule,
    gate_schedule,
    peak_current,
    rms_current,
    solve_outer_shift,
    solve_steady_state,
)
from heps_design.domain import ConverterSpec, ModulationPoint, Strategy
from heps_design.errors import Unreachable

logger = logging.getLogger(__name__)

DEVICES = ("S1", "S2", "S3", "S4", "Q1", "Q2", "Q3", "Q4")

# incoming device per (leg, edge direction)
INCOMING_DEVICE = {
    ("A", "rising"): "S1",
    ("A", "falling"): "S2",
    ("B", "rising"): "S3",
    ("B", "falling"): "S4",
    ("C", "rising"): "Q1",
    ("C", "falling"): "Q2",
    ("D", "rising"): "Q3",
    ("D", "falling"): "Q4",
}

# commutation current seen by each leg as a multiple of iL
_LEG_CURRENT_SIGN = {"A": 1.0, "B": -1.0, "C": 1.0, "D": -1.0}


@dataclass(frozen=True)
class SwitchingEvent:
    leg: str
    time: float
    direction: str
    device: str
    current: float
    v_dc: float

    @property
    def is_primary(self) -> bool:
        return self.leg in PRIMARY_LEGS


@dataclass(frozen=True)
class ZvsReport:
    flags: Dict[str, bool]
    n_zvs: int
    i_th: float


@dataclass(frozen=True)
class LossBreakdown:
    conduction: float = 0.0
    copper: float = 0.0
    switching: float = 0.0
    core: float = 0.0

    @property
    def total(self) -> float:
        return self.conduction + self.copper + self.switching + self.core

    def as_dict(self) -> Dict[str, float]:
        return {
            "conduction_W": self.conduction,
            "copper_W": self.copper,
            "switching_W": self.switching,
            "core_W": self.core,
            "total_W": self.total,
        }


@dataclass(frozen=True)
class OperatingPointResult:
    """
    Everything known about one (P, V2, S, Din) point.

    Infeasible points keep their coordinates and carry zeroed metrics.
    """

    P: float
    V2: float
    S: Strategy
    Din: float
    Do: float
    I_rms: float
    I_pk: float
    I1: float
    I2: float
    n_zvs: int
    P_loss: float
    eta: float
    feasible: bool
    breakdown: Optional[LossBreakdown] = None


def commutation_currents(wf: PiecewiseWaveform, schedule: SwitchingSchedule, n: float) -> List[SwitchingEvent]:
    """
    Link current at every gate edge, referred to the side of the switching leg.

    Args:
        wf (PiecewiseWaveform): Solved waveform.
        schedule (SwitchingSchedule): Gate edges of the same operating point.
        n (float): Turns ratio; secondary legs see n*iL.

    Returns:
        List[SwitchingEvent]: Eight events ordered by leg then direction.
    """
    events = []
    for edges in schedule.legs:
        primary = edges.leg in PRIMARY_LEGS
        scale = _LEG_CURRENT_SIGN[edges.leg] * (1.0 if primary else n)
        v_dc = wf.V1 if primary else wf.V2
        for direction, t in (("rising", edges.rising), ("falling", edges.falling)):
            events.append(
                SwitchingEvent(
                    leg=edges.leg,
                    time=t,
                    direction=direction,
                    device=INCOMING_DEVICE[(edges.leg, direction)],
                    current=scale * wf.current_at(t),
                    v_dc=v_dc,
                )
            )
    return events


def zvs_threshold(spec: ConverterSpec, v_dc: float) -> float:
    """Minimum commutation current that swings both Coss within the dead time."""
    params = spec.loss_params
    if params.zvs_mode == "sign":
        return 0.0
    if spec.t_dead == 0:
        return math.inf
    return 2.0 * params.coss_eff * v_dc / spec.t_dead


def _achieves_zvs(event: SwitchingEvent, i_th: float) -> bool:
    # the incoming device's body diode must be conducting before its gate edge
    wants_negative = event.is_primary == (event.direction == "rising")
    if wants_negative:
        return event.current < -i_th
    return event.current > i_th


def zvs_count(events: List[SwitchingEvent], spec: ConverterSpec) -> ZvsReport:
    """
    Count the devices whose turn-on is soft.

    Args:
        events (List[SwitchingEvent]): All edges of one period.
        spec (ConverterSpec): Supplies the ZVS mode, Coss_eff and dead time.

    Returns:
        ZvsReport: Per-device flags, n_ZVS and the primary-side threshold.
    """
    flags = {device: False for device in DEVICES}
    i_th_report = 0.0
    for event in events:
        i_th = zvs_threshold(spec, event.v_dc)
        if event.is_primary:
            i_th_report = i_th
        flags[event.device] = _achieves_zvs(event, i_th)
    return ZvsReport(flags=flags, n_zvs=sum(flags.values()), i_th=i_th_report)


def _peak_flux_density(wf: PiecewiseWaveform, spec: ConverterSpec) -> float:
    params = spec.loss_params
    volt_seconds = sum(s.vp * s.duration for s in wf.segments if s.vp > 0)
    return volt_seconds / (2.0 * params.turns * params.core_area)


def loss_breakdown(wf: PiecewiseWaveform, events: List[SwitchingEvent], zvs: ZvsReport,
                   spec: ConverterSpec) -> LossBreakdown:
    """
    Split the converter losses into their physical components.

    Args:
        wf (PiecewiseWaveform): Solved waveform.
        events (List[SwitchingEvent]): Edges of the same point.
        zvs (ZvsReport): ZVS verdicts for the events.
        spec (ConverterSpec): Converter and loss parameters.

    Returns:
        LossBreakdown: Conduction, copper, switching and core losses in W.
    """
    params = spec.loss_params
    i_rms = rms_current(wf)
    # two devices per bridge conduct at any instant
    conduction = 2.0 * params.rds_on * (i_rms ** 2 + (spec.n * i_rms) ** 2)
    copper = params.r_w * i_rms ** 2

    energy = 0.0
    for event in events:
        vi = event.v_dc * abs(event.current)
        energy += params.k_off * vi
        if not zvs.flags[event.device]:
            energy += params.k_on * vi
    switching = spec.fs * energy

    core = 0.0
    if params.k_c > 0:
        b_pk = _peak_flux_density(wf, spec)
        core = params.k_c * spec.fs ** params.alpha * b_pk ** params.beta * params.core_volume

    return LossBreakdown(conduction=conduction, copper=copper, switching=switching, core=core)


def infeasible_result(P: float, V2: float, S: Strategy, Din: float) -> OperatingPointResult:
    return OperatingPointResult(
        P=P, V2=V2, S=S, Din=Din, Do=0.0, I_rms=0.0, I_pk=0.0, I1=0.0, I2=0.0,
        n_zvs=0, P_loss=0.0, eta=0.0, feasible=False,
    )


def analyze_point(spec: ConverterSpec, mod: ModulationPoint, V2: float) -> Tuple[PiecewiseWaveform, List[SwitchingEvent], ZvsReport, LossBreakdown]:
    """Solve, commutate, check ZVS and split losses at a fixed modulation point."""
    wf = solve_steady_state(spec, mod, V2)
    events = commutation_currents(wf, gate_schedule(spec, mod), spec.n)
    zvs = zvs_count(events, spec)
    return wf, events, zvs, loss_breakdown(wf, events, zvs, spec)


def evaluate_operating_point(spec: ConverterSpec, P: float, V2: float, S, Din: float) -> OperatingPointResult:
    """
    Realize power ``P`` at (V2, S, Din) and measure ZVS and losses.

    Unreachable commands come back with ``feasible=False``; nothing is raised
    for them.

    Args:
        spec (ConverterSpec): Converter parameters.
        P (float): Commanded power (W).
        V2 (float): Output dc voltage (V).
        S (Strategy | str | int): EPS strategy.
        Din (float): Inner phase shift.

    Returns:
        OperatingPointResult: Composite result.
    """
    S = Strategy.parse(S)
    try:
        Do = solve_outer_shift(spec, S, Din, V2, P)
    except Unreachable:
        return infeasible_result(P, V2, S, Din)

    mod = ModulationPoint(S=S, Do=Do, Din=Din)
    wf, _, zvs, breakdown = analyze_point(spec, mod, V2)
    p_loss = breakdown.total
    eta = P / (P + p_loss) if P + p_loss > 0 else 0.0
    return OperatingPointResult(
        P=P,
        V2=V2,
        S=S,
        Din=Din,
        Do=Do,
        I_rms=rms_current(wf),
        I_pk=peak_current(wf),
        I1=P / spec.V1,
        I2=P / V2,
        n_zvs=zvs.n_zvs,
        P_loss=p_loss,
        eta=eta,
        feasible=True,
        breakdown=breakdown,
    )
