import numpy as np
import pytest

from heps_design.converter import peak_current, rms_current, solve_steady_state
from heps_design.domain import ModulationPoint, Strategy
from heps_design.errors import DomainError
from heps_design.losses import SwitchingEvent
from heps_design.transient import simulate_commutation, simulate_transient


class TestTransient:
    @pytest.mark.parametrize("S, Do, Din, V2", [
        (Strategy.EPS1, 0.212, 1.0, 200.0),
        (Strategy.EPS1, 0.35, 0.6, 170.0),
        (Strategy.EPS2, 0.15, 0.45, 225.0),
    ])
    def test_rms_agrees_with_piecewise(self, spec, S, Do, Din, V2):
        mod = ModulationPoint(S=S, Do=Do, Din=Din)
        wf = solve_steady_state(spec, mod, V2)
        trace = simulate_transient(spec, mod, V2, spec.Ts / 20000)
        assert abs(trace.rms - rms_current(wf)) <= 0.005 * peak_current(wf)

    def test_samples_follow_waveform(self, spec):
        mod = ModulationPoint(S=Strategy.EPS1, Do=0.212, Din=1.0)
        wf = solve_steady_state(spec, mod, 200.0)
        trace = simulate_transient(spec, mod, 200.0, spec.Ts / 20000)
        assert len(trace.samples) == 20000
        assert np.max(np.abs(trace.samples - wf.current_at(trace.times))) <= 0.01 * peak_current(wf)

    def test_rejects_coarse_step(self, spec):
        mod = ModulationPoint(S=Strategy.EPS1, Do=0.2, Din=1.0)
        with pytest.raises(DomainError):
            simulate_transient(spec, mod, 200.0, spec.Ts / 100)


def _event(leg, direction, current, v_dc=200.0):
    device = {"A": ("S1", "S2"), "C": ("Q1", "Q2")}[leg][direction == "falling"]
    return SwitchingEvent(leg=leg, time=0.0, direction=direction, device=device, current=current, v_dc=v_dc)


class TestCommutation:
    def test_primary_rising_needs_negative_current(self, spec):
        assert simulate_commutation(_event("A", "rising", -2.0), spec).zvs
        assert not simulate_commutation(_event("A", "rising", 2.0), spec).zvs

    def test_secondary_rising_needs_positive_current(self, spec):
        assert simulate_commutation(_event("C", "rising", 2.0), spec).zvs
        assert not simulate_commutation(_event("C", "rising", -2.0), spec).zvs

    def test_small_current_cannot_finish_transition(self, spec):
        # 0.05 A moves 2 x 100 pF by 200 V in 800 ns, longer than the dead time
        trace = simulate_commutation(_event("A", "falling", 0.05), spec)
        assert not trace.zvs
        assert trace.transition_time == pytest.approx(800e-9)

    def test_vds_reaches_zero(self, spec):
        trace = simulate_commutation(_event("A", "falling", 1.0), spec)
        assert trace.vds[0] == pytest.approx(200.0)
        assert trace.vds[-1] == pytest.approx(0.0, abs=1e-9)
        assert trace.device == "S2"
