"""
Two-stage design flow.

Stage I sweeps the analytic evaluator over (S, P, V2, Din) and trains the loss
and ZVS surrogates on the feasible rows. Stage II runs the swarm per (P, V2)
cell and strategy, keeps the better strategy and stores the result as a
strategy map; the runtime selector reads that map.
"""
import json
import logging
import math
import os
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from heps_design.config import MapGrid, SweepPlan
from heps_design.domain import ConverterSpec, Strategy
from heps_design.errors import CoverageError, DomainError
from heps_design.executor import LocalExecutor
from heps_design.gbdt import BoostedEnsemble, Dataset, TrainConfig, fit, load_model, save_model, score, split_dataset
from heps_design.io import read_csv, read_text, write_csv, write_parquet, write_text_atomic
from heps_design.losses import OperatingPointResult, evaluate_operating_point
from heps_design.pso import INFEASIBLE_FITNESS, N_DEVICES, SwarmConfig, fitness, optimize
from heps_design.schema import SCHEMAS
from heps_design.utils import derive_seed, format_seconds

logger = logging.getLogger(__name__)

__all__ = [
    "DatasetRow",
    "MapGrid",
    "SelectorOutput",
    "StrategyMap",
    "SurrogateBundle",
    "SweepPlan",
    "compare_strategies",
    "direct_map",
    "generate_dataset",
    "map_agreement",
    "optimize_map",
    "select_modulation",
    "surrogate_deviation",
    "train_surrogates",
]

DATASET_COLUMNS = [f.name for f in SCHEMAS["dataset"]]
STRATEGIES = (Strategy.EPS1, Strategy.EPS2)
UNIT_GAIN_BAND = 0.005
STRATEGY_TIE_RTOL = 1e-9
MIN_TRAIN_ROWS = 1000


@dataclass(frozen=True)
class DatasetRow:
    P: float
    V2: float
    S: Strategy
    Din: float
    Do: float
    P_loss: float
    n_zvs: int
    I_rms: float
    eta: float
    feasible: bool

    @classmethod
    def from_result(cls, result: OperatingPointResult) -> "DatasetRow":
        return cls(
            P=result.P, V2=result.V2, S=result.S, Din=result.Din, Do=result.Do, P_loss=result.P_loss,
            n_zvs=result.n_zvs, I_rms=result.I_rms, eta=result.eta, feasible=result.feasible,
        )

    def as_record(self) -> tuple:
        return (self.P, self.V2, self.S.name, self.Din, self.Do, self.P_loss, self.n_zvs, self.I_rms,
                self.eta, self.feasible)


# ---------------------------------------------------------------------------
# Stage I: dataset


def _sweep_block(task) -> List[tuple]:
    spec, S, P, V2_grid, Din_grid = task
    return [
        DatasetRow.from_result(evaluate_operating_point(spec, P, V2, S, Din)).as_record()
        for V2 in V2_grid
        for Din in Din_grid
    ]


def rows_to_frame(records: Sequence[tuple]) -> pd.DataFrame:
    frame = pd.DataFrame.from_records(list(records), columns=DATASET_COLUMNS)
    return frame.astype({"nZVS": "int64", "feasible": bool, "S": str})


def generate_dataset(spec: ConverterSpec, plan: SweepPlan, n_jobs: int = 1, progress: bool = False) -> pd.DataFrame:
    """
    Evaluate every (S, P, V2, Din) combination of the sweep.

    Args:
        spec (ConverterSpec): Converter parameters.
        plan (SweepPlan): Sweep grids.
        n_jobs (int): Worker processes.
        progress (bool): Show a progress bar.

    Returns:
        pd.DataFrame: One row per combination with the dataset columns, in
        lexicographic (S, P, V2, Din) order. Infeasible rows are kept and flagged.
    """
    V2_grid = tuple(float(v) for v in plan.V2_grid())
    Din_grid = tuple(float(d) for d in plan.Din_grid())
    tasks = [(spec, S, float(P), V2_grid, Din_grid) for S in STRATEGIES for P in plan.P_grid()]
    start = time.perf_counter()
    blocks = LocalExecutor(n_jobs, progress, desc="sweep").map(_sweep_block, tasks)
    frame = rows_to_frame(record for block in blocks for record in block)
    logger.info(
        "generated %d rows (%d infeasible) in %s",
        len(frame), int((~frame["feasible"]).sum()), format_seconds(time.perf_counter() - start),
    )
    return frame


def strategy_codes(names: pd.Series) -> np.ndarray:
    return names.map(lambda s: int(Strategy.parse(s))).to_numpy(dtype=float)


def feature_matrix(frame: pd.DataFrame) -> np.ndarray:
    return np.column_stack([
        frame["P_W"].to_numpy(dtype=float),
        frame["V2_V"].to_numpy(dtype=float),
        strategy_codes(frame["S"]),
        frame["Din"].to_numpy(dtype=float),
    ])


def save_dataset(frame: pd.DataFrame, out_dir: str) -> List[str]:
    paths = [os.path.join(out_dir, "dataset.csv"), os.path.join(out_dir, "dataset.parquet")]
    write_csv(frame, paths[0])
    write_parquet(frame, paths[1], SCHEMAS["dataset"])
    return paths


def load_dataset(path: str) -> pd.DataFrame:
    return read_csv(path, SCHEMAS["dataset"])


# ---------------------------------------------------------------------------
# Stage I: surrogates


def _interp2(P_grid: np.ndarray, V2_grid: np.ndarray, values: np.ndarray, P: float, V2: float) -> float:
    """Bilinear interpolation on a (P, V2) grid; singleton axes are dropped."""
    axes, point = [], []
    if len(P_grid) > 1:
        axes.append(P_grid)
        point.append(P)
    else:
        values = values[0]
    if len(V2_grid) > 1:
        axes.append(V2_grid)
        point.append(V2)
    else:
        values = values[..., 0]
    if not axes:
        return float(values)
    interpolator = RegularGridInterpolator(tuple(axes), values, method="linear", bounds_error=False, fill_value=None)
    return float(interpolator(np.array([point]))[0])


@dataclass
class SurrogateBundle:
    """
    Trained loss and ZVS models plus the feasibility floor of the sweep.

    ``din_floor`` holds the smallest feasible Din seen per (S, P, V2) on the
    sweep grid, so the optimizer can reject Din values that cannot deliver
    the commanded power.
    """

    loss_model: BoostedEnsemble
    zvs_model: BoostedEnsemble
    metrics: Dict[str, Dict[str, float]]
    floor_P: np.ndarray
    floor_V2: np.ndarray
    din_floor: np.ndarray

    def floor(self, P: float, V2: float, S) -> float:
        return _interp2(self.floor_P, self.floor_V2, self.din_floor[int(Strategy.parse(S))], P, V2)

    def predict(self, P: float, V2: float, S, Din) -> Tuple[np.ndarray, np.ndarray]:
        """Predicted (P_loss, n_ZVS) for one or more Din values at a cell."""
        din = np.atleast_1d(np.asarray(Din, dtype=float))
        X = np.column_stack([
            np.full(len(din), float(P)),
            np.full(len(din), float(V2)),
            np.full(len(din), float(int(Strategy.parse(S)))),
            din,
        ])
        return self.loss_model.predict_batch(X), self.zvs_model.predict_batch(X)

    def objective(self, P: float, V2: float, S, c_zvs: float):
        """Vectorized Din -> fitness for the swarm."""
        floor = self.floor(P, V2, S)

        def evaluate(din):
            din = np.asarray(din, dtype=float)
            p_loss, n_zvs = self.predict(P, V2, S, din)
            return fitness(p_loss, n_zvs, c_zvs, feasible=din >= floor - 1e-12)

        return evaluate

    def save(self, out_dir: str) -> List[str]:
        paths = [os.path.join(out_dir, name) for name in
                 ("loss_model.json", "zvs_model.json", "surrogate_floor.csv", "train_metrics.json")]
        save_model(self.loss_model, paths[0])
        save_model(self.zvs_model, paths[1])
        write_csv(self.floor_frame(), paths[2])
        write_text_atomic(paths[3], json.dumps(self.metrics, indent=2, sort_keys=True) + "\n")
        return paths

    def floor_frame(self) -> pd.DataFrame:
        records = [
            (S.name, float(P), float(V2), float(self.din_floor[int(S), i, j]))
            for S in STRATEGIES
            for i, P in enumerate(self.floor_P)
            for j, V2 in enumerate(self.floor_V2)
        ]
        return pd.DataFrame.from_records(records, columns=["S", "P_W", "V2_V", "Din_min"])

    @classmethod
    def load(cls, out_dir: str) -> "SurrogateBundle":
        floor = pd.read_csv(os.path.join(out_dir, "surrogate_floor.csv"))
        P, V2, table = _floor_table(floor)
        return cls(
            loss_model=load_model(os.path.join(out_dir, "loss_model.json")),
            zvs_model=load_model(os.path.join(out_dir, "zvs_model.json")),
            metrics=json.loads(read_text(os.path.join(out_dir, "train_metrics.json"))),
            floor_P=P,
            floor_V2=V2,
            din_floor=table,
        )


def _floor_table(floor: pd.DataFrame) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    P = np.sort(floor["P_W"].unique())
    V2 = np.sort(floor["V2_V"].unique())
    table = np.ones((2, len(P), len(V2)))
    for row in floor.itertuples(index=False):
        table[int(Strategy.parse(row.S)), np.searchsorted(P, row.P_W), np.searchsorted(V2, row.V2_V)] = row.Din_min
    return P, V2, table


def feasibility_floor(frame: pd.DataFrame) -> pd.DataFrame:
    """Smallest feasible Din per (S, P, V2); 1.0 where no row is feasible."""
    keys = ["S", "P_W", "V2_V"]
    feasible = frame[frame["feasible"]].groupby(keys, sort=True)["Din"].min()
    cells = frame[keys].drop_duplicates().sort_values(keys)
    merged = cells.merge(feasible.rename("Din_min").reset_index(), on=keys, how="left")
    merged["Din_min"] = merged["Din_min"].fillna(1.0)
    return merged.reset_index(drop=True)


def train_surrogates(rows: pd.DataFrame, cfg_loss: TrainConfig, cfg_zvs: TrainConfig, seed: int,
                     min_rows: int = MIN_TRAIN_ROWS, progress: bool = False) -> SurrogateBundle:
    """
    Fit the loss and ZVS surrogates on the feasible rows of a dataset.

    Both models share one 70/15/15 split derived from ``seed``.

    Args:
        rows (pd.DataFrame): Dataset from :func:`generate_dataset`.
        cfg_loss (TrainConfig): Hyper-parameters of the loss model.
        cfg_zvs (TrainConfig): Hyper-parameters of the ZVS model.
        seed (int): Master seed.
        min_rows (int): Minimum number of feasible rows.
        progress (bool): Show boosting progress.

    Returns:
        SurrogateBundle: Models, test metrics and feasibility floor.

    Raises:
        DomainError: If fewer than ``min_rows`` rows are feasible.
    """
    feasible = rows[rows["feasible"]]
    if len(feasible) < min_rows:
        raise DomainError(f"need at least {min_rows} feasible rows, got {len(feasible)}", field="rows")
    X = feature_matrix(feasible)
    targets = {
        "loss": feasible["Ploss_W"].to_numpy(dtype=float),
        "zvs": feasible["nZVS"].to_numpy(dtype=float),
    }
    split_seed = derive_seed(seed, "split")
    index = Dataset(np.arange(len(feasible), dtype=float).reshape(-1, 1), np.zeros(len(feasible)))
    train_idx, val_idx, test_idx = (part.X[:, 0].astype(int) for part in split_dataset(index, split_seed))

    models, metrics = {}, {}
    for name, cfg in (("loss", cfg_loss), ("zvs", cfg_zvs)):
        start = time.perf_counter()
        y = targets[name]
        data = Dataset(X, y)
        model = fit(data.take(train_idx), data.take(val_idx), replace(cfg, seed=derive_seed(seed, "train", name)),
                    progress=progress)
        test = data.take(test_idx)
        result = score(model, test)
        result["n_trees"] = model.n_trees
        if name == "zvs":
            rounded = np.clip(np.rint(model.predict_batch(test.X)), 0, N_DEVICES)
            result["accuracy"] = float(np.mean(rounded == test.y))
        models[name], metrics[name] = model, result
        logger.info("%s surrogate: %d trees, test R2 %.5f (%s)", name, model.n_trees, result["r2"],
                    format_seconds(time.perf_counter() - start))
    metrics["rows"] = {
        "feasible": len(feasible), "train": len(train_idx), "validation": len(val_idx), "test": len(test_idx),
    }

    P, V2, table = _floor_table(feasibility_floor(rows))
    return SurrogateBundle(
        loss_model=models["loss"], zvs_model=models["zvs"], metrics=metrics,
        floor_P=P, floor_V2=V2, din_floor=table,
    )


# ---------------------------------------------------------------------------
# Stage II: strategy map


@dataclass
class StrategyMap:
    """
    Per-cell optimum of each strategy and the chosen one.

    Candidate arrays have shape (2, n_P, n_V2) indexed by strategy code;
    chosen arrays have shape (n_P, n_V2).
    """

    P_grid: np.ndarray
    V2_grid: np.ndarray
    provenance: str
    cand_din: np.ndarray
    cand_fitness: np.ndarray
    cand_ploss: np.ndarray
    cand_nzvs: np.ndarray

    @property
    def chosen(self) -> np.ndarray:
        """Strategy with the lower optimal loss per cell; EPS1 unless EPS2 is strictly lower."""
        p1, p2 = self.cand_ploss[0], self.cand_ploss[1]
        return np.where(p2 < p1 - STRATEGY_TIE_RTOL * np.abs(p1), int(Strategy.EPS2), int(Strategy.EPS1))

    def _pick(self, values: np.ndarray) -> np.ndarray:
        return np.take_along_axis(values, self.chosen[None], axis=0)[0]

    @property
    def din_opt(self) -> np.ndarray:
        return self._pick(self.cand_din)

    @property
    def ploss_opt(self) -> np.ndarray:
        return self._pick(self.cand_ploss)

    @property
    def nzvs_opt(self) -> np.ndarray:
        return self._pick(self.cand_nzvs)

    def cells(self):
        for i, P in enumerate(self.P_grid):
            for j, V2 in enumerate(self.V2_grid):
                yield i, j, float(P), float(V2)

    def to_frame(self) -> pd.DataFrame:
        chosen, din, ploss, nzvs = self.chosen, self.din_opt, self.ploss_opt, self.nzvs_opt
        records = [
            (P, V2, Strategy(int(chosen[i, j])).name, float(din[i, j]), float(ploss[i, j]), float(nzvs[i, j]),
             self.provenance)
            for i, j, P, V2 in self.cells()
        ]
        return pd.DataFrame.from_records(records, columns=[f.name for f in SCHEMAS["map"]])

    def candidates_frame(self) -> pd.DataFrame:
        records = [
            (P, V2, S.name, float(self.cand_din[s, i, j]), float(self.cand_fitness[s, i, j]),
             float(self.cand_ploss[s, i, j]), float(self.cand_nzvs[s, i, j]))
            for i, j, P, V2 in self.cells()
            for s, S in enumerate(STRATEGIES)
        ]
        return pd.DataFrame.from_records(records, columns=[f.name for f in SCHEMAS["candidates"]])

    def save(self, out_dir: str) -> List[str]:
        paths = [os.path.join(out_dir, name) for name in
                 ("strategy_map.csv", "map_candidates.csv", "strategy_map.parquet")]
        frame = self.to_frame()
        write_csv(frame, paths[0])
        write_csv(self.candidates_frame(), paths[1])
        write_parquet(frame, paths[2], SCHEMAS["map"])
        return paths

    @classmethod
    def load(cls, out_dir: str) -> "StrategyMap":
        smap = read_csv(os.path.join(out_dir, "strategy_map.csv"), SCHEMAS["map"])
        cand = read_csv(os.path.join(out_dir, "map_candidates.csv"), SCHEMAS["candidates"])
        P = np.sort(cand["P_W"].unique())
        V2 = np.sort(cand["V2_V"].unique())
        shape = (2, len(P), len(V2))
        arrays = {key: np.zeros(shape) for key in ("Din_opt", "fitness", "Ploss_W", "nZVS")}
        for row in cand.itertuples(index=False):
            s, i, j = int(Strategy.parse(row.S)), np.searchsorted(P, row.P_W), np.searchsorted(V2, row.V2_V)
            for key in arrays:
                arrays[key][s, i, j] = getattr(row, key)
        provenance = str(smap["provenance"].iloc[0]) if len(smap) else "unknown"
        return cls(P_grid=P, V2_grid=V2, provenance=provenance, cand_din=arrays["Din_opt"],
                   cand_fitness=arrays["fitness"], cand_ploss=arrays["Ploss_W"], cand_nzvs=arrays["nZVS"])


_WORKER_BUNDLE: Optional[SurrogateBundle] = None


def _install_bundle(bundle: SurrogateBundle) -> None:
    global _WORKER_BUNDLE
    _WORKER_BUNDLE = bundle


def cell_seed(master: int, cell_index: int, S: Strategy) -> int:
    return derive_seed(master, "map", cell_index, S.name)


def direct_objective(spec: ConverterSpec, P: float, V2: float, S: Strategy, c_zvs: float):
    """Din -> penalized fitness straight from the analytic evaluator."""

    def evaluate(din: float) -> float:
        result = evaluate_operating_point(spec, P, V2, S, din)
        return fitness(result.P_loss, result.n_zvs, c_zvs, feasible=result.feasible)

    return evaluate


def _keep_upper_bound(best, objective, hi: float, vectorized: bool = False) -> Tuple[float, float]:
    # the upper bound is the single-phase-shift point; the optimum must never lose to it
    value = float(np.asarray(objective(np.array([hi]) if vectorized else hi)).reshape(-1)[0])
    if value < best.fitness:
        return hi, value
    return best.x, best.fitness


def _surrogate_cell(task) -> List[Tuple[float, float, float, float]]:
    P, V2, cell_index, swarm, master = task
    out = []
    for S in STRATEGIES:
        cfg = replace(swarm, seed=cell_seed(master, cell_index, S))
        objective = _WORKER_BUNDLE.objective(P, V2, S, swarm.c_zvs)
        x, value = _keep_upper_bound(optimize(objective, cfg, vectorized=True), objective, swarm.hi, vectorized=True)
        p_loss, n_zvs = _WORKER_BUNDLE.predict(P, V2, S, x)
        out.append((x, value, float(p_loss[0]), float(n_zvs[0])))
    return out


def _direct_cell(task) -> List[Tuple[float, float, float, float]]:
    spec, P, V2, cell_index, swarm, master = task
    out = []
    for S in STRATEGIES:
        cfg = replace(swarm, seed=cell_seed(master, cell_index, S))
        objective = direct_objective(spec, P, V2, S, swarm.c_zvs)
        x, value = _keep_upper_bound(optimize(objective, cfg), objective, swarm.hi)
        result = evaluate_operating_point(spec, P, V2, S, x)
        if result.feasible:
            out.append((x, value, result.P_loss, float(result.n_zvs)))
        else:
            out.append((x, value, INFEASIBLE_FITNESS, 0.0))
    return out


def _assemble(P_grid, V2_grid, provenance: str, results) -> StrategyMap:
    shape = (2, len(P_grid), len(V2_grid))
    arrays = [np.zeros(shape) for _ in range(4)]
    for cell_index, cell in enumerate(results):
        i, j = divmod(cell_index, len(V2_grid))
        for s, values in enumerate(cell):
            for array, value in zip(arrays, values):
                array[s, i, j] = value
    return StrategyMap(P_grid=np.asarray(P_grid, dtype=float), V2_grid=np.asarray(V2_grid, dtype=float),
                       provenance=provenance, cand_din=arrays[0], cand_fitness=arrays[1], cand_ploss=arrays[2],
                       cand_nzvs=arrays[3])


def _cell_coordinates(P_grid, V2_grid):
    return [(float(P), float(V2)) for P in P_grid for V2 in V2_grid]


def optimize_map(bundle: SurrogateBundle, P_grid, V2_grid, swarm: SwarmConfig, seed: int, n_jobs: int = 1,
                 progress: bool = False) -> StrategyMap:
    """
    Stage II on the surrogates.

    Args:
        bundle (SurrogateBundle): Trained surrogates.
        P_grid: Power values of the map (W).
        V2_grid: Output voltages of the map (V).
        swarm (SwarmConfig): Swarm settings; the seed is replaced per cell and strategy.
        seed (int): Master seed.
        n_jobs (int): Worker processes.
        progress (bool): Show a progress bar.

    Returns:
        StrategyMap: Provenance ``surrogate``.
    """
    start = time.perf_counter()
    tasks = [(P, V2, k, swarm, seed) for k, (P, V2) in enumerate(_cell_coordinates(P_grid, V2_grid))]
    executor = LocalExecutor(n_jobs, progress, desc="surrogate map", initializer=_install_bundle, initargs=(bundle,))
    results = executor.map(_surrogate_cell, tasks)
    logger.info("optimized %d cells on the surrogates in %s", len(tasks), format_seconds(time.perf_counter() - start))
    return _assemble(P_grid, V2_grid, "surrogate", results)


def direct_map(spec: ConverterSpec, P_grid, V2_grid, swarm: SwarmConfig, seed: int, n_jobs: int = 1,
               progress: bool = False) -> StrategyMap:
    """Stage II with the analytic evaluator as objective; provenance ``direct``."""
    start = time.perf_counter()
    tasks = [(spec, P, V2, k, swarm, seed) for k, (P, V2) in enumerate(_cell_coordinates(P_grid, V2_grid))]
    results = LocalExecutor(n_jobs, progress, desc="direct map").map(_direct_cell, tasks)
    logger.info("optimized %d cells directly in %s", len(tasks), format_seconds(time.perf_counter() - start))
    return _assemble(P_grid, V2_grid, "direct", results)


# ---------------------------------------------------------------------------
# Runtime selector


@dataclass(frozen=True)
class SelectorOutput:
    mode: str
    S: Strategy
    Din1: float
    Din2: float
    M: float

    @property
    def Din(self) -> float:
        """Inner shift of the bridge that carries it."""
        return self.Din1 if self.S is Strategy.EPS1 else self.Din2


def _check_coverage(smap: StrategyMap, V_ref: float, P: float) -> None:
    for name, value, grid in (("P", P, smap.P_grid), ("V_ref", V_ref, smap.V2_grid)):
        lo, hi = float(grid[0]), float(grid[-1])
        slack = 1e-9 * max(1.0, abs(hi))
        if not lo - slack <= value <= hi + slack:
            raise CoverageError(f"{name} = {value} lies outside the map range [{lo}, {hi}]", field=name)


def select_modulation(smap: StrategyMap, V_ref: float, P: float, spec: ConverterSpec) -> SelectorOutput:
    """
    Pick strategy and inner shifts from the voltage conversion gain.

    Args:
        smap (StrategyMap): Map to interpolate.
        V_ref (float): Output voltage reference (V).
        P (float): Power (W).
        spec (ConverterSpec): Supplies V1 and n.

    Returns:
        SelectorOutput: Unit gain runs SPS; buck uses EPS1 with an
        interpolated primary shift; boost uses EPS2 with an interpolated
        secondary shift.

    Raises:
        CoverageError: If (P, V_ref) lies outside the map.
    """
    _check_coverage(smap, V_ref, P)
    M = spec.gain(V_ref)
    if abs(M - 1.0) <= UNIT_GAIN_BAND:
        return SelectorOutput(mode="unit-gain", S=Strategy.EPS1, Din1=1.0, Din2=1.0, M=M)
    S = Strategy.EPS1 if M < 1.0 else Strategy.EPS2
    din = _interp2(smap.P_grid, smap.V2_grid, smap.cand_din[int(S)], P, V_ref)
    din = min(max(din, 0.0), 1.0)
    if S is Strategy.EPS1:
        return SelectorOutput(mode="buck", S=S, Din1=din, Din2=1.0, M=M)
    return SelectorOutput(mode="boost", S=S, Din1=1.0, Din2=din, M=M)


# ---------------------------------------------------------------------------
# Comparisons


def compare_strategies(spec: ConverterSpec, smap: StrategyMap, V2: float, P_grid, swarm: SwarmConfig, seed: int,
                       n_jobs: int = 1, progress: bool = False) -> pd.DataFrame:
    """
    SPS, best EPS1, best EPS2 and the hybrid selection along a V2 slice.

    The EPS optima come from a direct swarm search per point; the hybrid row
    evaluates whatever the selector returns for (V2, P).

    Returns:
        pd.DataFrame: Rows in comparison-schema order, four schemes per P.
    """
    tasks = [(spec, smap, float(V2), float(P), swarm, seed) for P in P_grid]
    blocks = LocalExecutor(n_jobs, progress, desc="compare").map(_compare_point, tasks)
    records = [record for block in blocks for record in block]
    return pd.DataFrame.from_records(records, columns=[f.name for f in SCHEMAS["comparison"]])


def _comparison_record(scheme: str, result: OperatingPointResult) -> tuple:
    return (result.P, result.V2, scheme, result.S.name, result.Din, result.P_loss, result.n_zvs, result.eta,
            result.feasible)


def _compare_point(task) -> List[tuple]:
    spec, smap, V2, P, swarm, seed = task
    records = [_comparison_record("SPS", evaluate_operating_point(spec, P, V2, Strategy.EPS1, 1.0))]
    for S in STRATEGIES:
        cfg = replace(swarm, seed=derive_seed(seed, "compare", P, V2, S.name))
        best = optimize(direct_objective(spec, P, V2, S, swarm.c_zvs), cfg)
        records.append(_comparison_record(f"best-{S.name}", evaluate_operating_point(spec, P, V2, S, best.x)))
    choice = select_modulation(smap, V2, P, spec)
    records.append(_comparison_record("HEPS", evaluate_operating_point(spec, P, V2, choice.S, choice.Din)))
    return records


def surrogate_deviation(spec: ConverterSpec, smap: StrategyMap, n_jobs: int = 1,
                        progress: bool = False) -> Dict[str, float]:
    """
    Efficiency error of the surrogate map against the analytic evaluator.

    The surrogate's efficiency at each cell is P / (P + P_loss*) from the map;
    the analytic one re-evaluates the chosen (S, Din) exactly.

    Returns:
        Dict[str, float]: Mean and max absolute efficiency error, the mean
        absolute loss error (W) and the number of cells whose optimum turned
        out infeasible.
    """
    chosen, din, ploss = smap.chosen, smap.din_opt, smap.ploss_opt
    tasks = [(spec, P, V2, Strategy(int(chosen[i, j])), float(din[i, j])) for i, j, P, V2 in smap.cells()]
    results = LocalExecutor(n_jobs, progress, desc="deviation").map(_evaluate_task, tasks)
    eta_err, loss_err, infeasible = [], [], 0
    for (i, j, P, _), result in zip(smap.cells(), results):
        if not result.feasible:
            infeasible += 1
            continue
        eta_pred = P / (P + ploss[i, j]) if P + ploss[i, j] > 0 else 0.0
        eta_err.append(abs(eta_pred - result.eta))
        loss_err.append(abs(ploss[i, j] - result.P_loss))
    return {
        "cells": len(tasks),
        "infeasible": infeasible,
        "eta_mean_abs": float(np.mean(eta_err)) if eta_err else math.nan,
        "eta_max_abs": float(np.max(eta_err)) if eta_err else math.nan,
        "ploss_mean_abs_W": float(np.mean(loss_err)) if loss_err else math.nan,
    }


def _evaluate_task(task) -> OperatingPointResult:
    spec, P, V2, S, Din = task
    return evaluate_operating_point(spec, P, V2, S, Din)


def map_agreement(candidate: StrategyMap, reference: StrategyMap, spec: ConverterSpec, band: float = 0.02,
                  din_tol: float = 0.05) -> Dict[str, float]:
    """
    Compare two maps over the same grid.

    Strategy agreement skips cells with |M - 1| <= band. Din agreement
    compares, per cell, the candidate Din of the strategy the reference chose.
    """
    if candidate.cand_din.shape != reference.cand_din.shape:
        raise DomainError("maps are defined on different grids", field="grid")
    gain = spec.n * reference.V2_grid / spec.V1
    outside = np.broadcast_to(np.abs(gain - 1.0) > band, reference.chosen.shape)
    same = candidate.chosen == reference.chosen
    ref_choice = reference.chosen[None]
    din_ref = np.take_along_axis(reference.cand_din, ref_choice, axis=0)[0]
    din_cand = np.take_along_axis(candidate.cand_din, ref_choice, axis=0)[0]
    return {
        "strategy_agreement": float(np.mean(same[outside])) if outside.any() else 1.0,
        "din_agreement": float(np.mean(np.abs(din_cand - din_ref) <= din_tol)),
        "cells": int(same.size),
    }
