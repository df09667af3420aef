import numpy as np
import pytest

from heps_design.converter import average_power, peak_current, solve_steady_state
from heps_design.domain import ModulationPoint, Strategy
from heps_design.errors import DomainError
from heps_design.harmonics import eval_harmonic_current, eval_harmonic_voltages, harmonic_power, harmonic_spectrum

POINTS = [
    (ModulationPoint(S=Strategy.EPS1, Do=0.212, Din=1.0), 200.0),
    (ModulationPoint(S=Strategy.EPS1, Do=0.3, Din=0.7), 165.0),
    (ModulationPoint(S=Strategy.EPS2, Do=0.25, Din=0.55), 235.0),
]


class TestSpectrum:
    @pytest.mark.parametrize("K", [0, 2, 100])
    def test_rejects_even_or_small_order(self, spec, K):
        with pytest.raises(DomainError):
            harmonic_spectrum(spec, POINTS[0][0], 200.0, K)

    def test_only_odd_orders(self, spec):
        series = harmonic_spectrum(spec, POINTS[0][0], 200.0, 9)
        assert list(series.orders) == [1, 3, 5, 7, 9]

    def test_fundamental_amplitude(self, spec):
        series = harmonic_spectrum(spec, POINTS[0][0], 200.0, 1)
        assert series.vp_amp[0] == pytest.approx(4 * 200.0 / np.pi)


class TestEquivalence:
    @pytest.mark.parametrize("mod, V2", POINTS)
    def test_current_converges_to_piecewise(self, spec, mod, V2):
        wf = solve_steady_state(spec, mod, V2)
        t = np.linspace(0.0, spec.Ts, 800, endpoint=False)
        exact = wf.current_at(t)
        errors = [
            np.max(np.abs(eval_harmonic_current(harmonic_spectrum(spec, mod, V2, K), t) - exact))
            for K in (1, 11, 101, 301)
        ]
        assert errors[-1] <= 0.01 * peak_current(wf)
        assert all(b <= a for a, b in zip(errors, errors[1:]))

    @pytest.mark.parametrize("mod, V2", POINTS)
    def test_power_matches_piecewise(self, spec, mod, V2):
        wf = solve_steady_state(spec, mod, V2)
        series = harmonic_spectrum(spec, mod, V2, 301)
        assert harmonic_power(series) == pytest.approx(average_power(wf), rel=5e-3, abs=0.5)

    def test_voltage_plateau(self, spec):
        mod = ModulationPoint(S=Strategy.EPS1, Do=0.2, Din=0.5)
        wf = solve_steady_state(spec, mod, 200.0)
        series = harmonic_spectrum(spec, mod, 200.0, 301)
        t = np.linspace(0.0, spec.Ts, 400, endpoint=False)
        vp_exact, _ = wf.voltages_at(t)
        vp, _ = eval_harmonic_voltages(series, t)
        # away from the edges the truncated series sits on the exact level
        mask = np.abs(np.subtract.outer(t, np.array(wf.breakpoints + [spec.Ts]))).min(axis=1) > 0.02 * spec.Ts
        assert np.max(np.abs(vp[mask] - vp_exact[mask])) < 0.05 * spec.V1
