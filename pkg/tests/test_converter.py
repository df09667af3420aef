import numpy as np
import pytest

from heps_design.converter import (
    average_power,
    backflow_power,
    design_leakage_inductance,
    gate_schedule,
    max_power,
    peak_current,
    rms_current,
    sample_waveform,
    solve_outer_shift,
    solve_steady_state,
    sps_power,
    transfer_power,
)
from heps_design.domain import ModulationPoint, Strategy
from heps_design.errors import DomainError, Unreachable


class TestLeakageInductance:
    def test_reference_bound(self):
        assert design_leakage_inductance(1.0, 200.0, 160.0, 20e3, 1000.0) == pytest.approx(200e-6)

    def test_reference_inductance_satisfies_bound(self, spec):
        assert spec.Lr <= design_leakage_inductance(spec.n, spec.V1, 160.0, spec.fs, 1000.0)

    @pytest.mark.parametrize("field", ["n", "V1", "V2_min", "fs", "P_max"])
    def test_non_positive_argument(self, field):
        args = {"n": 1.0, "V1": 200.0, "V2_min": 160.0, "fs": 20e3, "P_max": 1000.0}
        args[field] = 0.0
        with pytest.raises(DomainError) as excinfo:
            design_leakage_inductance(**args)
        assert excinfo.value.field == field


class TestGateSchedule:
    def test_sps_edges(self, spec):
        half = spec.Ts / 2
        schedule = gate_schedule(spec, ModulationPoint(S=Strategy.EPS1, Do=0.2, Din=1.0))
        assert schedule.leg("A").rising == pytest.approx(0.0, abs=1e-15)
        assert schedule.leg("A").falling == pytest.approx(half)
        assert schedule.leg("B").rising == pytest.approx(half)
        assert schedule.leg("B").falling == pytest.approx(0.0, abs=1e-15)
        assert schedule.leg("C").rising == pytest.approx(0.2 * half)
        assert schedule.leg("D").rising == pytest.approx(1.2 * half)

    def test_strategies_coincide_at_unit_inner_shift(self, spec):
        eps1 = gate_schedule(spec, ModulationPoint(S=Strategy.EPS1, Do=0.3, Din=1.0))
        eps2 = gate_schedule(spec, ModulationPoint(S=Strategy.EPS2, Do=0.3, Din=1.0))
        assert eps1.legs == eps2.legs

    def test_eps2_inner_shift_moves_leg_d(self, spec):
        half = spec.Ts / 2
        schedule = gate_schedule(spec, ModulationPoint(S=Strategy.EPS2, Do=0.2, Din=0.6))
        assert schedule.leg("D").rising == pytest.approx(0.2 * half + 0.6 * half)

    def test_edges_stay_in_period(self, spec):
        schedule = gate_schedule(spec, ModulationPoint(S=Strategy.EPS1, Do=0.5, Din=0.0))
        assert all(0.0 <= t < spec.Ts for t in schedule.edge_times())


class TestSteadyState:
    def test_sps_reference_point(self, spec):
        wf = solve_steady_state(spec, ModulationPoint(S=Strategy.EPS1, Do=0.212, Din=1.0), 200.0)
        assert wf.current_at(0.0) == pytest.approx(-6.347, abs=1e-3)
        assert rms_current(wf) == pytest.approx(5.8817, abs=1e-3)
        assert average_power(wf) == pytest.approx(1000.3, abs=0.5)
        assert peak_current(wf) == pytest.approx(6.347, abs=1e-3)

    def test_power_matches_closed_form(self, spec):
        for V2 in (160.0, 200.0, 240.0):
            for Do in (0.05, 0.25, 0.45):
                wf = solve_steady_state(spec, ModulationPoint(S=Strategy.EPS1, Do=Do, Din=1.0), V2)
                assert average_power(wf) == pytest.approx(sps_power(spec, Do, V2), rel=1e-9)

    @pytest.mark.parametrize("S", [Strategy.EPS1, Strategy.EPS2])
    def test_half_wave_antisymmetry(self, spec, S):
        wf = solve_steady_state(spec, ModulationPoint(S=S, Do=0.17, Din=0.63), 185.0)
        t = np.linspace(0.0, spec.Ts / 2, 97, endpoint=False)
        residual = wf.current_at(t + spec.Ts / 2) + wf.current_at(t)
        assert np.max(np.abs(residual)) <= 1e-9 * peak_current(wf)

    def test_periodic_and_continuous(self, spec):
        wf = solve_steady_state(spec, ModulationPoint(S=Strategy.EPS2, Do=0.31, Din=0.4), 230.0)
        assert wf.segments[-1].i_end == pytest.approx(wf.segments[0].i_start, abs=1e-9)
        for prev, nxt in zip(wf.segments, wf.segments[1:]):
            assert nxt.i_start == pytest.approx(prev.i_end, abs=1e-12)

    def test_zero_primary_voltage(self, spec):
        wf = solve_steady_state(spec, ModulationPoint(S=Strategy.EPS1, Do=0.0, Din=0.0), 160.0)
        samples = sample_waveform(wf, 200)
        assert np.all(samples["vp_V"] == 0.0)
        assert average_power(wf) == pytest.approx(0.0, abs=1e-12)
        assert backflow_power(wf) == 0.0

    def test_backflow_non_negative(self, spec):
        wf = solve_steady_state(spec, ModulationPoint(S=Strategy.EPS1, Do=0.05, Din=1.0), 240.0)
        assert backflow_power(wf) > 0.0

    def test_rejects_non_positive_output_voltage(self, spec):
        with pytest.raises(DomainError):
            solve_steady_state(spec, ModulationPoint(S=Strategy.EPS1, Do=0.1, Din=1.0), 0.0)

    def test_sample_columns(self, spec):
        wf = solve_steady_state(spec, ModulationPoint(S=Strategy.EPS1, Do=0.1, Din=1.0), 200.0)
        samples = sample_waveform(wf, 50)
        assert set(samples) == {"t_s", "vp_V", "vs_V", "iL_A"}
        assert len(samples["t_s"]) == 50


class TestModulationPoint:
    def test_outer_shift_range(self):
        with pytest.raises(DomainError) as excinfo:
            ModulationPoint(S=Strategy.EPS1, Do=0.6, Din=1.0)
        assert excinfo.value.field == "Do"

    def test_parses_strategy_names(self):
        assert ModulationPoint(S="eps2", Do=0.1, Din=0.5).S is Strategy.EPS2


class TestOuterShift:
    def test_rated_point(self, spec):
        assert solve_outer_shift(spec, Strategy.EPS1, 1.0, 200.0, 1000.0) == pytest.approx(0.211903, abs=1e-4)

    def test_zero_power(self, spec):
        assert solve_outer_shift(spec, Strategy.EPS1, 1.0, 200.0, 0.0) == 0.0

    def test_unreachable(self, spec):
        with pytest.raises(Unreachable) as excinfo:
            solve_outer_shift(spec, Strategy.EPS1, 1.0, 200.0, 5000.0)
        assert excinfo.value.p_max == pytest.approx(max_power(spec, Strategy.EPS1, 1.0, 200.0))

    def test_eps1_zero_inner_shift_unreachable(self, spec):
        with pytest.raises(Unreachable):
            solve_outer_shift(spec, Strategy.EPS1, 0.0, 200.0, 100.0)

    @pytest.mark.parametrize("kwargs", [{"P_target": -1.0}, {"Din": 1.5}, {"V2": 0.0}])
    def test_domain_errors(self, spec, kwargs):
        args = {"S": Strategy.EPS1, "Din": 1.0, "V2": 200.0, "P_target": 500.0}
        args.update(kwargs)
        with pytest.raises(DomainError):
            solve_outer_shift(spec, **args)

    @pytest.mark.parametrize("S", [Strategy.EPS1, Strategy.EPS2])
    def test_power_increases_with_outer_shift(self, spec, S):
        powers = [transfer_power(spec, S, 0.6, 180.0, Do) for Do in np.linspace(0.0, 0.5, 26)]
        assert all(b > a for a, b in zip(powers, powers[1:]))

    def test_solution_delivers_target(self, spec):
        Do = solve_outer_shift(spec, Strategy.EPS2, 0.7, 240.0, 600.0)
        assert transfer_power(spec, Strategy.EPS2, 0.7, 240.0, Do) == pytest.approx(600.0, abs=0.01)
