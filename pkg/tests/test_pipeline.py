from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from heps_design.config import SweepPlan
from heps_design.domain import ConverterSpec, Strategy
from heps_design.errors import CoverageError, DomainError
from heps_design.gbdt import TrainConfig
from heps_design.pipeline import (
    DATASET_COLUMNS,
    StrategyMap,
    SurrogateBundle,
    cell_seed,
    direct_map,
    direct_objective,
    feasibility_floor,
    generate_dataset,
    load_dataset,
    map_agreement,
    optimize_map,
    save_dataset,
    select_modulation,
    surrogate_deviation,
    train_surrogates,
)

SMALL_PLAN = SweepPlan(n_P=3, n_V2=3, n_Din=5)
TRAIN_PLAN = SweepPlan(n_P=5, n_V2=5, n_Din=10)
QUICK_TREES = TrainConfig(max_depth=3, max_trees=20, early_stopping_rounds=5)


@pytest.fixture(scope="module")
def small_dataset():
    return generate_dataset(ConverterSpec(), SMALL_PLAN)


@pytest.fixture(scope="module")
def bundle():
    rows = generate_dataset(ConverterSpec(), TRAIN_PLAN)
    return train_surrogates(rows, QUICK_TREES, QUICK_TREES, seed=3, min_rows=50)


def uniform_map(din_eps1, din_eps2, ploss_eps1=10.0, ploss_eps2=20.0, nzvs_eps2=8.0):
    P_grid, V2_grid = np.array([100.0, 1000.0]), np.array([160.0, 240.0])
    shape = (2, 2, 2)
    cand_din = np.empty(shape)
    cand_din[0], cand_din[1] = din_eps1, din_eps2
    cand_ploss = np.empty(shape)
    cand_ploss[0], cand_ploss[1] = ploss_eps1, ploss_eps2
    cand_nzvs = np.full(shape, 8.0)
    cand_nzvs[1] = nzvs_eps2
    cand_fitness = cand_ploss + 100.0 * (8.0 - cand_nzvs)
    return StrategyMap(P_grid=P_grid, V2_grid=V2_grid, provenance="direct", cand_din=cand_din,
                       cand_fitness=cand_fitness, cand_ploss=cand_ploss, cand_nzvs=cand_nzvs)


class TestDataset:
    def test_row_count_and_columns(self, small_dataset):
        assert len(small_dataset) == SMALL_PLAN.n_rows == 90
        assert list(small_dataset.columns) == DATASET_COLUMNS

    def test_lexicographic_order(self, small_dataset):
        assert small_dataset["S"].tolist() == ["EPS1"] * 45 + ["EPS2"] * 45
        assert small_dataset["Din"].tolist()[:5] == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert small_dataset["V2_V"].tolist()[:15:5] == [160.0, 200.0, 240.0]
        assert small_dataset["P_W"].tolist()[:45:15] == [100.0, 550.0, 1000.0]

    def test_zero_primary_shift_is_infeasible(self, small_dataset):
        rows = small_dataset[(small_dataset["S"] == "EPS1") & (small_dataset["Din"] == 0.0)]
        assert len(rows) == 9
        assert not rows["feasible"].any()
        assert (rows["Ploss_W"] == 0.0).all()

    def test_both_strategies_agree_at_full_shift(self, small_dataset):
        full = small_dataset[small_dataset["Din"] == 1.0]
        eps1 = full[full["S"] == "EPS1"]["Ploss_W"].to_numpy()
        eps2 = full[full["S"] == "EPS2"]["Ploss_W"].to_numpy()
        assert np.allclose(eps1, eps2, rtol=1e-9)

    def test_single_point_plan(self):
        plan = SweepPlan(P_min=500.0, P_max=500.0, n_P=1, V2_min=200.0, V2_max=200.0, n_V2=1, n_Din=1)
        frame = generate_dataset(ConverterSpec(), plan)
        assert frame["S"].tolist() == ["EPS1", "EPS2"]
        assert frame["Din"].tolist() == [1.0, 1.0]
        assert frame["feasible"].all()

    def test_parallel_matches_serial(self, small_dataset):
        parallel = generate_dataset(ConverterSpec(), SMALL_PLAN, n_jobs=2)
        pd.testing.assert_frame_equal(parallel, small_dataset)

    def test_save_and_load(self, small_dataset, tmp_path):
        csv_path, parquet_path = save_dataset(small_dataset, str(tmp_path))
        assert parquet_path.endswith("dataset.parquet")
        loaded = load_dataset(csv_path)
        assert loaded["feasible"].tolist() == small_dataset["feasible"].tolist()
        assert np.allclose(loaded["Ploss_W"], small_dataset["Ploss_W"], rtol=1e-11)


class TestFeasibilityFloor:
    def test_smallest_feasible_din(self):
        frame = pd.DataFrame({
            "S": ["EPS1"] * 3 + ["EPS2"] * 3,
            "P_W": [500.0] * 6,
            "V2_V": [200.0] * 6,
            "Din": [0.0, 0.5, 1.0] * 2,
            "feasible": [False, True, True, False, False, False],
        })
        floor = feasibility_floor(frame)
        assert floor["S"].tolist() == ["EPS1", "EPS2"]
        assert floor["Din_min"].tolist() == [0.5, 1.0]


class TestSurrogates:
    def test_metrics(self, bundle):
        rows = bundle.metrics["rows"]
        assert rows["train"] + rows["validation"] + rows["test"] == rows["feasible"]
        assert 0.0 <= bundle.metrics["zvs"]["accuracy"] <= 1.0
        assert bundle.metrics["loss"]["n_trees"] <= QUICK_TREES.max_trees

    def test_floor_covers_sweep_grid(self, bundle):
        assert bundle.din_floor.shape == (2, 5, 5)
        assert np.all((bundle.din_floor >= 0.0) & (bundle.din_floor <= 1.0))
        # the primary bridge cannot transfer power with zero inner shift
        assert np.all(bundle.din_floor[int(Strategy.EPS1)] > 0.0)

    def test_infeasible_below_floor(self, bundle):
        floor = bundle.floor(1000.0, 160.0, Strategy.EPS1)
        objective = bundle.objective(1000.0, 160.0, Strategy.EPS1, 100.0)
        values = objective(np.array([floor / 2.0, 1.0]))
        assert values[0] == 1e6
        assert values[1] < 1e6

    def test_too_few_rows(self):
        rows = generate_dataset(ConverterSpec(), SMALL_PLAN)
        with pytest.raises(DomainError):
            train_surrogates(rows, QUICK_TREES, QUICK_TREES, seed=0)

    def test_save_and_load(self, bundle, tmp_path):
        bundle.save(str(tmp_path))
        loaded = SurrogateBundle.load(str(tmp_path))
        din = np.linspace(0.2, 1.0, 7)
        for original, restored in zip(bundle.predict(700.0, 210.0, "EPS2", din),
                                      loaded.predict(700.0, 210.0, "EPS2", din)):
            assert np.allclose(original, restored, rtol=1e-12)
        assert np.allclose(loaded.din_floor, bundle.din_floor)
        assert loaded.metrics["rows"] == bundle.metrics["rows"]


class TestOptimizeMap:
    P_grid = np.array([300.0, 900.0])
    V2_grid = np.array([170.0, 230.0])

    def test_shapes_and_determinism(self, bundle, quick_swarm):
        first = optimize_map(bundle, self.P_grid, self.V2_grid, quick_swarm, seed=11)
        second = optimize_map(bundle, self.P_grid, self.V2_grid, quick_swarm, seed=11)
        assert first.cand_din.shape == (2, 2, 2)
        assert first.provenance == "surrogate"
        assert np.array_equal(first.cand_din, second.cand_din)
        assert np.array_equal(first.chosen, second.chosen)
        assert np.all((first.cand_din >= 0.0) & (first.cand_din <= 1.0))

    def test_parallel_matches_serial(self, bundle, quick_swarm):
        serial = optimize_map(bundle, self.P_grid, self.V2_grid, quick_swarm, seed=11)
        parallel = optimize_map(bundle, self.P_grid, self.V2_grid, quick_swarm, seed=11, n_jobs=2)
        assert np.array_equal(serial.cand_fitness, parallel.cand_fitness)

    def test_never_worse_than_full_shift(self, bundle, quick_swarm):
        smap = optimize_map(bundle, self.P_grid, self.V2_grid, quick_swarm, seed=5)
        for i, j, P, V2 in smap.cells():
            for S in (Strategy.EPS1, Strategy.EPS2):
                at_full = bundle.objective(P, V2, S, quick_swarm.c_zvs)(np.array([1.0]))[0]
                assert smap.cand_fitness[int(S), i, j] <= at_full

    def test_save_and_load(self, bundle, quick_swarm, tmp_path):
        smap = optimize_map(bundle, self.P_grid, self.V2_grid, quick_swarm, seed=11)
        paths = smap.save(str(tmp_path))
        assert [p.rsplit("/", 1)[-1] for p in paths] == [
            "strategy_map.csv", "map_candidates.csv", "strategy_map.parquet",
        ]
        loaded = StrategyMap.load(str(tmp_path))
        assert loaded.provenance == "surrogate"
        assert np.array_equal(loaded.P_grid, self.P_grid)
        assert np.allclose(loaded.cand_din, smap.cand_din, rtol=1e-11, atol=1e-12)
        assert np.array_equal(loaded.chosen, smap.chosen)


class TestDirectMap:
    @pytest.fixture
    def smap(self, sign_spec, quick_swarm):
        return direct_map(sign_spec, [500.0, 1000.0], [160.0, 240.0], quick_swarm, seed=1)

    def test_buck_cells_choose_primary_shift(self, smap):
        assert smap.provenance == "direct"
        assert (smap.chosen[:, 0] == int(Strategy.EPS1)).all()

    def test_full_zvs_on_every_cell(self, smap):
        assert (smap.nzvs_opt == 8).all()

    def test_boost_cells_favour_secondary_shift(self, smap):
        assert (smap.cand_fitness[1, :, 1] <= smap.cand_fitness[0, :, 1]).all()

    def test_not_worse_than_single_phase_shift(self, smap, sign_spec, quick_swarm):
        for i, j, P, V2 in smap.cells():
            sps = direct_objective(sign_spec, P, V2, Strategy.EPS1, quick_swarm.c_zvs)(1.0)
            assert smap.cand_fitness[:, i, j].min() <= sps * (1 + 1e-9)

    def test_agrees_with_itself(self, smap, sign_spec):
        agreement = map_agreement(smap, smap, sign_spec)
        assert agreement["strategy_agreement"] == 1.0
        assert agreement["din_agreement"] == 1.0
        assert agreement["cells"] == 4

    def test_deviation_of_analytic_map_vanishes(self, smap, sign_spec):
        deviation = surrogate_deviation(sign_spec, smap)
        assert deviation["cells"] == 4
        assert deviation["infeasible"] == 0
        assert deviation["eta_max_abs"] == pytest.approx(0.0, abs=1e-12)


class TestStrategyMap:
    def test_ties_go_to_primary_shift(self):
        smap = uniform_map(0.5, 0.5, ploss_eps1=10.0, ploss_eps2=10.0)
        assert (smap.chosen == int(Strategy.EPS1)).all()

    def test_strictly_lower_secondary_loss_wins(self):
        smap = uniform_map(0.5, 0.7, ploss_eps1=10.0, ploss_eps2=9.0)
        assert (smap.chosen == int(Strategy.EPS2)).all()
        assert np.allclose(smap.din_opt, 0.7)

    def test_choice_follows_loss_not_penalized_fitness(self):
        # EPS2 loses two soft turn-ons, so its fitness is far worse while its loss is lower
        smap = uniform_map(0.9, 0.6, ploss_eps1=12.0, ploss_eps2=5.0, nzvs_eps2=6.0)
        assert (smap.cand_fitness[1] > smap.cand_fitness[0]).all()
        assert (smap.chosen == int(Strategy.EPS2)).all()
        assert np.all(smap.ploss_opt <= smap.cand_ploss.min(axis=0))
        assert np.allclose(smap.nzvs_opt, 6.0)

    def test_different_grids(self, spec):
        smap = uniform_map(0.5, 0.5)
        other = replace(smap, P_grid=np.array([100.0]), cand_din=smap.cand_din[:, :1],
                        cand_fitness=smap.cand_fitness[:, :1])
        with pytest.raises(DomainError):
            map_agreement(other, smap, spec)

    def test_cell_seeds_differ_per_strategy(self):
        assert cell_seed(0, 3, Strategy.EPS1) != cell_seed(0, 3, Strategy.EPS2)
        assert cell_seed(0, 3, Strategy.EPS1) == cell_seed(0, 3, Strategy.EPS1)


class TestSelectModulation:
    @pytest.fixture
    def smap(self):
        din_eps1 = np.array([[0.2, 0.2], [0.6, 0.6]])
        return uniform_map(din_eps1, 0.8)

    def test_unit_gain(self, smap, spec):
        choice = select_modulation(smap, 200.0, 500.0, spec)
        assert choice.mode == "unit-gain"
        assert choice.S is Strategy.EPS1
        assert (choice.Din1, choice.Din2) == (1.0, 1.0)
        assert choice.M == pytest.approx(1.0)

    def test_buck(self, smap, spec):
        choice = select_modulation(smap, 160.0, 550.0, spec)
        assert choice.mode == "buck"
        assert choice.S is Strategy.EPS1
        assert choice.Din1 == pytest.approx(0.4)
        assert choice.Din2 == 1.0
        assert choice.Din == choice.Din1

    def test_boost(self, smap, spec):
        choice = select_modulation(smap, 240.0, 1000.0, spec)
        assert choice.mode == "boost"
        assert choice.S is Strategy.EPS2
        assert choice.Din1 == 1.0
        assert choice.Din2 == pytest.approx(0.8)
        assert choice.M == pytest.approx(1.2)

    @pytest.mark.parametrize("V_ref, P", [(150.0, 500.0), (250.0, 500.0), (200.0, 50.0), (200.0, 1200.0)])
    def test_outside_map(self, smap, spec, V_ref, P):
        with pytest.raises(CoverageError):
            select_modulation(smap, V_ref, P, spec)
