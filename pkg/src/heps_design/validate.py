"""
Oracle cross-checks of the design toolkit.

Each suite returns a CheckResult; the ``validate`` command runs the quick
suites by default and adds the map-level suites with ``--full``.
"""
import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, List, Optional

import numpy as np

from heps_design.config import RunConfig
from heps_design.converter import (
    average_power,
    design_leakage_inductance,
    gate_schedule,
    peak_current,
    rms_current,
    solve_outer_shift,
    solve_steady_state,
    sps_power,
)
from heps_design.domain import ConverterSpec, ModulationPoint, Strategy
from heps_design.harmonics import eval_harmonic_current, harmonic_spectrum
from heps_design.losses import commutation_currents, evaluate_operating_point, zvs_count
from heps_design.pipeline import (
    direct_map,
    direct_objective,
    generate_dataset,
    map_agreement,
    optimize_map,
    train_surrogates,
)
from heps_design.pso import SwarmConfig, optimize, velocity_limit
from heps_design.transient import simulate_commutation, simulate_transient, soft_turn_on_from_levels
from heps_design.utils import derive_seed, format_seconds

logger = logging.getLogger(__name__)

HARMONIC_ORDERS = (1, 11, 101, 301)
GRID_SEARCH_STEP = 1e-3


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({format_seconds(self.seconds)})"


def _timed(name: str, check: Callable[[], tuple]) -> CheckResult:
    start = time.perf_counter()
    passed, detail = check()
    result = CheckResult(name=name, passed=bool(passed), detail=detail, seconds=time.perf_counter() - start)
    logger.info(result.line())
    return result


def _random_point(rng: np.random.Generator) -> tuple:
    S = Strategy(int(rng.integers(0, 2)))
    return ModulationPoint(S=S, Do=float(rng.uniform(0.0, 0.5)), Din=float(rng.uniform(0.0, 1.0))), float(
        rng.uniform(160.0, 240.0))


def solver_cross_validation(spec: ConverterSpec, n_points: int = 200, seed: int = 0) -> CheckResult:
    """Piecewise solution against brute-force integration, plus antisymmetry and periodicity."""

    def check():
        rng = np.random.default_rng(derive_seed(seed, "validate", "solver"))
        dt = spec.Ts / 20000
        worst_rms = worst_sym = 0.0
        failures = 0
        for _ in range(n_points):
            mod, V2 = _random_point(rng)
            wf = solve_steady_state(spec, mod, V2)
            i_pk = peak_current(wf)
            scale = max(i_pk, 1e-12)
            rms_err = abs(rms_current(wf) - simulate_transient(spec, mod, V2, dt).rms) / scale
            t = np.array([b for b in wf.breakpoints if b < spec.Ts / 2.0])
            antisym = np.max(np.abs(wf.current_at(t + spec.Ts / 2.0) + wf.current_at(t))) / scale
            periodic = abs(wf.segments[-1].i_end - wf.segments[0].i_start) / scale
            worst_rms = max(worst_rms, rms_err)
            worst_sym = max(worst_sym, antisym, periodic)
            if rms_err > 0.005 or (i_pk > 0 and max(antisym, periodic) > 1e-9):
                failures += 1
        return failures == 0, (f"{n_points} points, worst RMS error {worst_rms:.2e} of I_pk, "
                               f"worst symmetry residual {worst_sym:.1e}")

    return _timed("solver cross-validation", check)


def harmonic_equivalence(spec: ConverterSpec, n_points: int = 50, seed: int = 0, n_samples: int = 2000) -> CheckResult:
    """Truncated harmonic current against the piecewise solution."""

    def check():
        rng = np.random.default_rng(derive_seed(seed, "validate", "harmonics"))
        t = np.arange(n_samples) * (spec.Ts / n_samples)
        worst = 0.0
        failures = 0
        for _ in range(n_points):
            mod, V2 = _random_point(rng)
            wf = solve_steady_state(spec, mod, V2)
            exact = wf.current_at(t)
            scale = max(peak_current(wf), 1e-12)
            errors = [
                float(np.max(np.abs(eval_harmonic_current(harmonic_spectrum(spec, mod, V2, K), t) - exact))) / scale
                for K in HARMONIC_ORDERS
            ]
            monotone = all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))
            worst = max(worst, errors[-1])
            if errors[-1] > 0.01 or not monotone:
                failures += 1
        return failures == 0, f"{n_points} points, worst error at K={HARMONIC_ORDERS[-1]}: {worst:.2e} of I_pk"

    return _timed("harmonic equivalence", check)


def closed_form_checks(spec: ConverterSpec) -> CheckResult:
    """Inductance bound, SPS power formula and the rated outer shift."""

    def check():
        notes, ok = [], True
        bound = design_leakage_inductance(spec.n, spec.V1, 160.0, spec.fs, 1000.0)
        ok &= spec.Lr <= bound
        notes.append(f"Lr bound {bound * 1e6:.1f} uH")
        worst = 0.0
        for V2 in (160.0, 200.0, 240.0):
            for Do in (0.1, 0.25, 0.4):
                p = average_power(solve_steady_state(spec, ModulationPoint(S=Strategy.EPS1, Do=Do, Din=1.0), V2))
                worst = max(worst, abs(p - sps_power(spec, Do, V2)) / sps_power(spec, Do, V2))
        ok &= worst <= 1e-3
        notes.append(f"SPS power error {worst:.1e}")
        # rated shift on the reference design, independent of the configured converter
        Do = solve_outer_shift(ConverterSpec(), Strategy.EPS1, 1.0, 200.0, 1000.0)
        ok &= abs(Do - 0.2119) <= 1e-3
        notes.append(f"Do(1000 W) = {Do:.4f}")
        return ok, ", ".join(notes)

    return _timed("closed-form checks", check)


def commutation_check(spec: ConverterSpec) -> CheckResult:
    """ZVS sign table against the bridge levels and dead-time charge transfer on hand-picked points."""
    points = [
        (ModulationPoint(S=Strategy.EPS1, Do=0.2, Din=1.0), 200.0),
        (ModulationPoint(S=Strategy.EPS1, Do=0.25, Din=0.8), 160.0),
        (ModulationPoint(S=Strategy.EPS1, Do=0.05, Din=1.0), 240.0),
        (ModulationPoint(S=Strategy.EPS2, Do=0.25, Din=0.8), 240.0),
        (ModulationPoint(S=Strategy.EPS2, Do=0.1, Din=0.6), 180.0),
    ]
    charge_spec = replace(spec, loss_params=replace(spec.loss_params, zvs_mode="charge"))

    def check():
        mismatches, total = 0, 0
        for mod, V2 in points:
            wf = solve_steady_state(charge_spec, mod, V2)
            events = commutation_currents(wf, gate_schedule(charge_spec, mod), charge_spec.n)
            flags = zvs_count(events, charge_spec).flags
            from_levels = soft_turn_on_from_levels(charge_spec, mod, V2, wf)
            for event in events:
                total += 1
                if from_levels[event.device] != flags[event.device]:
                    mismatches += 1
                elif simulate_commutation(event, charge_spec).zvs != flags[event.device]:
                    mismatches += 1
        return mismatches == 0, f"{total} edges, {mismatches} disagreements"

    return _timed("commutation sign table", check)


def optimizer_quality(spec: ConverterSpec, swarm: SwarmConfig, n_cells: int = 100, seed: int = 0) -> CheckResult:
    """Swarm optimum against a fine grid search on random cells."""

    def check():
        rng = np.random.default_rng(derive_seed(seed, "validate", "pso"))
        grid = np.arange(0.0, 1.0 + GRID_SEARCH_STEP / 2, GRID_SEARCH_STEP) * swarm.span + swarm.lo
        matched, monotone = 0, True
        for k in range(n_cells):
            P, V2 = float(rng.uniform(100.0, 1000.0)), float(rng.uniform(160.0, 240.0))
            S = Strategy(int(rng.integers(0, 2)))
            objective = direct_objective(spec, P, V2, S, swarm.c_zvs)
            result = optimize(objective, replace(swarm, seed=derive_seed(seed, "validate", "pso", k)))
            reference = min(objective(float(x)) for x in grid)
            if result.fitness <= reference + 0.005 * abs(reference):
                matched += 1
            monotone &= all(b <= a for a, b in zip(result.trace, result.trace[1:]))
        vl_exact = (abs(velocity_limit(0.0, swarm) - swarm.vl_min * swarm.span) <= 1e-12
                    and abs(velocity_limit(1.0, swarm) - swarm.vl_max * swarm.span) <= 1e-12)
        ok = matched >= math.ceil(0.95 * n_cells) and monotone and vl_exact
        return ok, f"{matched}/{n_cells} cells within 0.5%, traces monotone: {monotone}, VL endpoints exact: {vl_exact}"

    return _timed("optimizer quality", check)


def efficiency_properties(spec: ConverterSpec) -> CheckResult:
    """Rated-point efficiency window and light-load trend under SPS."""

    def check():
        rated = evaluate_operating_point(spec, 1000.0, 200.0, Strategy.EPS1, 1.0)
        in_window = rated.feasible and 0.94 <= rated.eta <= 0.985
        light = [
            evaluate_operating_point(spec, P, 240.0, Strategy.EPS1, 1.0).eta
            for P in (300.0, 250.0, 200.0, 150.0, 100.0)
        ]
        decreasing = all(b < a for a, b in zip(light, light[1:]))
        return in_window and decreasing, (
            f"rated efficiency {rated.eta:.4f}, light-load efficiency decreasing: {decreasing}"
        )

    return _timed("efficiency properties", check)


def map_structure(cfg: RunConfig, n_jobs: int = 1, progress: bool = False) -> CheckResult:
    """Direct map with sign-only ZVS: buck/boost partition, unit-gain Din, full ZVS and SPS dominance."""
    spec = replace(cfg.converter, loss_params=replace(cfg.loss, zvs_mode="sign"))

    def check():
        smap = direct_map(spec, cfg.grid.P_grid(), cfg.grid.V2_grid(), cfg.swarm, cfg.seed, n_jobs, progress)
        unit = spec.V1 / spec.n
        chosen, din, nzvs, ploss = smap.chosen, smap.din_opt, smap.nzvs_opt, smap.ploss_opt
        partition = din_unit = dominance = True
        for i, j, P, V2 in smap.cells():
            if V2 < unit - 1e-9:
                partition &= chosen[i, j] == int(Strategy.EPS1)
            elif V2 > unit + 1e-9:
                partition &= chosen[i, j] == int(Strategy.EPS2)
            else:
                din_unit &= bool(np.all(np.abs(smap.cand_din[:, i, j] - 1.0) <= 0.02))
            sps = evaluate_operating_point(spec, P, V2, Strategy.EPS1, 1.0)
            if sps.feasible:
                dominance &= ploss[i, j] <= sps.P_loss * (1 + 1e-9)
        full_zvs = bool(np.all(nzvs == 8))
        ok = partition and din_unit and full_zvs and dominance
        return ok, (f"partition {partition}, unit-gain Din {din_unit}, full ZVS {full_zvs}, "
                    f"SPS dominance {dominance}")

    return _timed("direct-map structure", check)


def surrogate_fidelity(cfg: RunConfig, n_jobs: int = 1, progress: bool = False) -> CheckResult:
    """Full Stage I and Stage II against the direct map."""

    def check():
        rows = generate_dataset(cfg.converter, cfg.sweep, n_jobs, progress)
        bundle = train_surrogates(rows, cfg.train_loss, cfg.train_zvs, cfg.seed, progress=progress)
        P_grid, V2_grid = cfg.grid.P_grid(), cfg.grid.V2_grid()
        smap = optimize_map(bundle, P_grid, V2_grid, cfg.swarm, cfg.seed, n_jobs, progress)
        reference = direct_map(cfg.converter, P_grid, V2_grid, cfg.swarm, cfg.seed, n_jobs, progress)
        agreement = map_agreement(smap, reference, cfg.converter)
        r2, accuracy = bundle.metrics["loss"]["r2"], bundle.metrics["zvs"]["accuracy"]
        ok = (r2 >= 0.99 and accuracy >= 0.97 and agreement["strategy_agreement"] >= 0.95
              and agreement["din_agreement"] >= 0.90)
        return ok, (f"loss R2 {r2:.4f}, ZVS accuracy {accuracy:.3f}, strategy agreement "
                    f"{agreement['strategy_agreement']:.3f}, Din agreement {agreement['din_agreement']:.3f}")

    return _timed("surrogate fidelity", check)


def run_suites(cfg: RunConfig, full: bool = False, n_jobs: int = 1, progress: bool = False,
               seed: Optional[int] = None) -> List[CheckResult]:
    """
    Run the validation suites.

    Args:
        cfg (RunConfig): Configuration supplying the converter, swarm and grids.
        full (bool): Add the map-level suites.
        n_jobs (int): Worker processes for the map-level suites.
        progress (bool): Show progress bars.
        seed (Optional[int]): Master seed; ``cfg.seed`` when omitted.

    Returns:
        List[CheckResult]: One result per suite, in run order.
    """
    seed = cfg.seed if seed is None else seed
    spec = cfg.converter
    results = [
        solver_cross_validation(spec, seed=seed),
        harmonic_equivalence(spec, seed=seed),
        closed_form_checks(spec),
        commutation_check(spec),
        optimizer_quality(spec, cfg.swarm, seed=seed),
        efficiency_properties(spec),
    ]
    if full:
        results.append(map_structure(cfg, n_jobs, progress))
        results.append(surrogate_fidelity(cfg, n_jobs, progress))
    return results
