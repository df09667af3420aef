"""
Exact steady-state analysis of the DAB converter under EPS1 / EPS2.

Both bridges produce three-level voltages built from four half-bridge legs.
Between consecutive gate edges the inductor sees a constant voltage, so the
inductor current is piecewise linear and the whole period can be solved in
closed form segment by segment.

Gate convention: leg A's rising edge anchors t = 0. The inner shift opens a
zero plateau of (1 - Din) * Ts/2 that precedes each primary pulse (EPS1) or
trails each secondary pulse (EPS2); in both cases the fundamentals are
displaced by Do - (1 - Din)/2 half periods, so transferred power rises
monotonically with Do over [0, 0.5].
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple, Union

import numpy as np

from heps_design.domain import ConverterSpec, ModulationPoint, Strategy
from heps_design.errors import DomainError, Unreachable

logger = logging.getLogger(__name__)

LEGS = ("A", "B", "C", "D")
PRIMARY_LEGS = ("A", "B")
MAX_BISECTIONS = 60

# edges closer than this fraction of Ts are treated as simultaneous
_MERGE_TOL = 1e-12


def design_leakage_inductance(n: float, V1: float, V2_min: float, fs: float, P_max: float) -> float:
    """
    Upper bound on the leakage inductance that still admits ``P_max``.

    Args:
        n (float): Transformer turns ratio.
        V1 (float): Input dc voltage (V).
        V2_min (float): Lowest output voltage of the operating range (V).
        fs (float): Switching frequency (Hz).
        P_max (float): Largest power to transfer (W).

    Returns:
        float: Inductance bound in henry.

    Raises:
        DomainError: If any argument is not strictly positive.
    """
    for name, value in (("n", n), ("V1", V1), ("V2_min", V2_min), ("fs", fs), ("P_max", P_max)):
        if not value > 0:
            raise DomainError(f"{name} must be > 0, got {value}", field=name)
    return n * V1 * V2_min / (8.0 * fs * P_max)


def sps_power(spec: ConverterSpec, Do: float, V2: float) -> float:
    """Closed-form single-phase-shift power n*V1*V2*Do*(1-Do)/(2*fs*Lr)."""
    return spec.n * spec.V1 * V2 * Do * (1.0 - Do) / (2.0 * spec.fs * spec.Lr)


def _wrap(t: float, Ts: float) -> float:
    t = math.fmod(t, Ts)
    if t < 0.0:
        t += Ts
    if Ts - t <= _MERGE_TOL * Ts:
        t = 0.0
    return t


@dataclass(frozen=True)
class LegEdges:
    """The two gate edges of one half-bridge leg.

    ``rising`` turns the high-side device on, ``falling`` the low-side one.
    """

    leg: str
    rising: float
    falling: float

    def high_side_on(self, t: float, Ts: float) -> bool:
        return math.fmod(t - self.rising + Ts, Ts) < Ts / 2.0


@dataclass(frozen=True)
class SwitchingSchedule:
    """Gate edges of legs A, B (primary) and C, D (secondary) over one period."""

    legs: Tuple[LegEdges, ...]
    Ts: float

    def leg(self, name: str) -> LegEdges:
        for edges in self.legs:
            if edges.leg == name:
                return edges
        raise KeyError(name)

    def edge_times(self) -> List[float]:
        return sorted({t for edges in self.legs for t in (edges.rising, edges.falling)})


def _rising_edges(S: Strategy, Do: float, Din: float, half: float) -> Tuple[float, float, float, float]:
    # written so that EPS1 and EPS2 give bit-identical edges at Din = 1
    if S is Strategy.EPS1:
        return 0.0, half + (1.0 - Din) * half, Do * half, Do * half + half
    return 0.0, half, Do * half, Do * half + Din * half


def gate_schedule(spec: ConverterSpec, mod: ModulationPoint) -> SwitchingSchedule:
    """
    Gate edges of the four legs for a modulation point.

    Args:
        spec (ConverterSpec): Converter parameters.
        mod (ModulationPoint): Strategy, outer and inner phase shift.

    Returns:
        SwitchingSchedule: Rising/falling edge per leg, all reduced into [0, Ts).
    """
    Ts = spec.Ts
    half = Ts / 2.0
    legs = []
    for name, rising in zip(LEGS, _rising_edges(mod.S, mod.Do, mod.Din, half)):
        r = _wrap(rising, Ts)
        legs.append(LegEdges(leg=name, rising=r, falling=_wrap(r + half, Ts)))
    return SwitchingSchedule(legs=tuple(legs), Ts=Ts)


@dataclass(frozen=True)
class Segment:
    """Interval of constant bridge voltages; ``slope`` is diL/dt in A/s."""

    t_start: float
    t_end: float
    vp: float
    vs: float
    i_start: float
    slope: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def i_end(self) -> float:
        return self.i_start + self.slope * self.duration


@dataclass(frozen=True)
class PiecewiseWaveform:
    """One period of the exact inductor-current solution."""

    segments: Tuple[Segment, ...]
    V1: float
    V2: float
    n: float
    Ts: float

    @cached_property
    def _arrays(self) -> Dict[str, np.ndarray]:
        return {
            "t0": np.array([s.t_start for s in self.segments]),
            "i0": np.array([s.i_start for s in self.segments]),
            "slope": np.array([s.slope for s in self.segments]),
            "vp": np.array([s.vp for s in self.segments]),
            "vs": np.array([s.vs for s in self.segments]),
        }

    def _index(self, t):
        return np.searchsorted(self._arrays["t0"], t, side="right") - 1

    def current_at(self, t: Union[float, np.ndarray]):
        """Inductor current at time(s) ``t`` in [0, Ts]; t = Ts returns the period end."""
        t_arr = np.asarray(t, dtype=float)
        a = self._arrays
        idx = np.clip(self._index(t_arr), 0, len(self.segments) - 1)
        values = a["i0"][idx] + a["slope"][idx] * (t_arr - a["t0"][idx])
        return float(values) if np.ndim(values) == 0 else values

    def voltages_at(self, t: Union[float, np.ndarray]):
        """Bridge voltages (vp, vs) at time(s) ``t``."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.clip(self._index(t_arr), 0, len(self.segments) - 1)
        return self._arrays["vp"][idx], self._arrays["vs"][idx]

    @property
    def breakpoints(self) -> List[float]:
        return [s.t_start for s in self.segments]


def _segment_table(V1: float, V2: float, n: float, Lr: float, Ts: float,
                   rising: Tuple[float, float, float, float]) -> List[Tuple[float, float, float, float, float]]:
    """Merge leg edges into breakpoints; return (t0, t1, vp, vs, slope) per segment."""
    half = Ts / 2.0
    rises = [_wrap(r, Ts) for r in rising]
    times = sorted({0.0, half, *rises, *(_wrap(r + half, Ts) for r in rises)})
    breakpoints = [times[0]]
    for t in times[1:]:
        if t - breakpoints[-1] > _MERGE_TOL * Ts:
            breakpoints.append(t)
    breakpoints.append(Ts)

    table = []
    for t0, t1 in zip(breakpoints[:-1], breakpoints[1:]):
        mid = 0.5 * (t0 + t1)
        h = [1.0 if math.fmod(mid - r + Ts, Ts) < half else 0.0 for r in rises]
        vp = V1 * (h[0] - h[1])
        vs = V2 * (h[2] - h[3])
        table.append((t0, t1, vp, vs, (vp - n * vs) / Lr))
    return table


def _initial_current(table, half: float) -> float:
    # half-wave antisymmetry: iL(0) = -iL(Ts/2)
    rise = sum(slope * (t1 - t0) for t0, t1, _, _, slope in table if t1 <= half * (1.0 + _MERGE_TOL))
    return -0.5 * rise


def solve_steady_state(spec: ConverterSpec, mod: ModulationPoint, V2: float) -> PiecewiseWaveform:
    """
    Solve one period of the inductor current segment by segment.

    Args:
        spec (ConverterSpec): Converter parameters.
        mod (ModulationPoint): Modulation point.
        V2 (float): Output dc voltage (V).

    Returns:
        PiecewiseWaveform: Continuous, periodic and half-wave antisymmetric solution.

    Raises:
        DomainError: If V2 is not strictly positive.
    """
    if not V2 > 0:
        raise DomainError(f"V2 must be > 0, got {V2}", field="V2")
    Ts = spec.Ts
    table = _segment_table(spec.V1, V2, spec.n, spec.Lr, Ts, _rising_edges(mod.S, mod.Do, mod.Din, Ts / 2.0))
    i = _initial_current(table, Ts / 2.0)
    segments = []
    for t0, t1, vp, vs, slope in table:
        segments.append(Segment(t_start=t0, t_end=t1, vp=vp, vs=vs, i_start=i, slope=slope))
        i += slope * (t1 - t0)
    return PiecewiseWaveform(segments=tuple(segments), V1=spec.V1, V2=V2, n=spec.n, Ts=Ts)


def _power_from_table(table, Ts: float) -> float:
    i = _initial_current(table, Ts / 2.0)
    energy = 0.0
    for t0, t1, vp, _, slope in table:
        dt = t1 - t0
        energy += vp * (i * dt + 0.5 * slope * dt * dt)
        i += slope * dt
    return energy / Ts


def average_power(wf: PiecewiseWaveform) -> float:
    """Lossless transferred power (1/Ts)*integral of vp*iL, in W."""
    energy = 0.0
    for s in wf.segments:
        dt = s.duration
        energy += s.vp * (s.i_start * dt + 0.5 * s.slope * dt * dt)
    return energy / wf.Ts


def rms_current(wf: PiecewiseWaveform) -> float:
    """Exact RMS of the piecewise-linear inductor current, in A."""
    acc = 0.0
    for s in wf.segments:
        a, b, dt = s.i_start, s.slope, s.duration
        acc += a * a * dt + a * b * dt * dt + b * b * dt ** 3 / 3.0
    return math.sqrt(max(acc / wf.Ts, 0.0))


def peak_current(wf: PiecewiseWaveform) -> float:
    """Largest |iL| over the period (reached at a breakpoint)."""
    return max(max(abs(s.i_start), abs(s.i_end)) for s in wf.segments)


def _negative_area(a: float, b: float, dt: float) -> float:
    """Integral of min(p, 0) for p varying linearly from a to b over dt."""
    if a >= 0.0 and b >= 0.0:
        return 0.0
    if a <= 0.0 and b <= 0.0:
        return 0.5 * (a + b) * dt
    if a < 0.0:
        return 0.5 * a * dt * (-a) / (b - a)
    return 0.5 * b * dt * (-b) / (a - b)


def backflow_power(wf: PiecewiseWaveform) -> float:
    """Average power flowing back into the primary source, in W (>= 0)."""
    area = 0.0
    for s in wf.segments:
        if s.vp != 0.0:
            area += _negative_area(s.vp * s.i_start, s.vp * s.i_end, s.duration)
    return -area / wf.Ts


def sample_waveform(wf: PiecewiseWaveform, n_points: int = 1000) -> Dict[str, np.ndarray]:
    """
    Sample vp, vs and iL on a uniform grid over one period.

    Args:
        wf (PiecewiseWaveform): Solved waveform.
        n_points (int): Number of samples.

    Returns:
        Dict[str, np.ndarray]: Columns ``t_s``, ``vp_V``, ``vs_V``, ``iL_A``.
    """
    if n_points < 2:
        raise DomainError("n_points must be >= 2", field="n_points")
    t = np.arange(n_points) * (wf.Ts / n_points)
    vp, vs = wf.voltages_at(t)
    return {"t_s": t, "vp_V": vp, "vs_V": vs, "iL_A": wf.current_at(t)}


def transfer_power(spec: ConverterSpec, S: Strategy, Din: float, V2: float, Do: float) -> float:
    """Power at (S, Do, Din, V2) without building the waveform objects."""
    Ts = spec.Ts
    table = _segment_table(spec.V1, V2, spec.n, spec.Lr, Ts, _rising_edges(S, Do, Din, Ts / 2.0))
    return _power_from_table(table, Ts)


def max_power(spec: ConverterSpec, S: Strategy, Din: float, V2: float) -> float:
    """Largest forward power reachable with ``Din`` (attained at Do = 0.5)."""
    return transfer_power(spec, Strategy.parse(S), Din, V2, 0.5)


def solve_outer_shift(spec: ConverterSpec, S: Strategy, Din: float, V2: float, P_target: float) -> float:
    """
    Find the outer shift that transfers ``P_target``.

    P(Do) increases monotonically on [0, 0.5], so plain bisection is used.

    Args:
        spec (ConverterSpec): Converter parameters.
        S (Strategy): EPS strategy.
        Din (float): Inner phase shift in [0, 1].
        V2 (float): Output dc voltage (V).
        P_target (float): Commanded power (W), >= 0.

    Returns:
        float: Do in [0, 0.5].

    Raises:
        DomainError: If P_target is negative or Din is out of range.
        Unreachable: If P_target exceeds the power available at Do = 0.5.
    """
    S = Strategy.parse(S)
    if P_target < 0:
        raise DomainError(f"P_target must be >= 0, got {P_target}", field="P_target")
    if not 0.0 <= Din <= 1.0:
        raise DomainError(f"Din must lie in [0, 1], got {Din}", field="Din")
    if not V2 > 0:
        raise DomainError(f"V2 must be > 0, got {V2}", field="V2")
    tol = max(0.01, 1e-6 * P_target)

    if transfer_power(spec, S, Din, V2, 0.0) >= P_target:
        return 0.0
    p_hi = transfer_power(spec, S, Din, V2, 0.5)
    if p_hi < P_target - tol:
        raise Unreachable(P_target, p_hi)
    if abs(p_hi - P_target) <= tol:
        return 0.5

    lo, hi = 0.0, 0.5
    mid = 0.25
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        p = transfer_power(spec, S, Din, V2, mid)
        if abs(p - P_target) <= tol:
            return mid
        if p < P_target:
            lo = mid
        else:
            hi = mid
    logger.debug("bisection stopped after %d halvings at Do=%.9f", MAX_BISECTIONS, mid)
    return mid
