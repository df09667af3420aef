"""
Plot-ready tables derived from a strategy map.

Nothing here renders figures; every table is a CSV a plotting tool can read
directly.
"""
import logging
import os
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from heps_design.domain import ConverterSpec, Strategy
from heps_design.errors import CoverageError
from heps_design.executor import LocalExecutor
from heps_design.io import write_csv
from heps_design.losses import OperatingPointResult, evaluate_operating_point
from heps_design.pipeline import StrategyMap, select_modulation

logger = logging.getLogger(__name__)

EFFICIENCY_V2_SLICES = (160.0, 200.0, 240.0)
EFFICIENCY_P_SLICES = (1000.0, 600.0, 200.0)


def din_surfaces(smap: StrategyMap) -> pd.DataFrame:
    """Optimal Din of both strategies over the map grid."""
    records = [
        (P, V2, float(smap.cand_din[0, i, j]), float(smap.cand_din[1, i, j]))
        for i, j, P, V2 in smap.cells()
    ]
    return pd.DataFrame.from_records(records, columns=["P_W", "V2_V", "Din_EPS1", "Din_EPS2"])


def zvs_regions(smap: StrategyMap) -> pd.DataFrame:
    """Predicted ZVS count of both strategies and the chosen one per cell."""
    chosen = smap.chosen
    records = [
        (P, V2, float(smap.cand_nzvs[0, i, j]), float(smap.cand_nzvs[1, i, j]), Strategy(int(chosen[i, j])).name)
        for i, j, P, V2 in smap.cells()
    ]
    return pd.DataFrame.from_records(records, columns=["P_W", "V2_V", "nZVS_EPS1", "nZVS_EPS2", "S"])


def _evaluate(task) -> OperatingPointResult:
    spec, P, V2, S, Din = task
    return evaluate_operating_point(spec, P, V2, S, Din)


def _sps_and_hybrid(spec: ConverterSpec, smap: StrategyMap, points, n_jobs: int, progress: bool, desc: str):
    tasks = []
    for P, V2 in points:
        choice = select_modulation(smap, V2, P, spec)
        tasks.append((spec, P, V2, Strategy.EPS1, 1.0))
        tasks.append((spec, P, V2, choice.S, choice.Din))
    results = LocalExecutor(n_jobs, progress, desc=desc).map(_evaluate, tasks)
    return list(zip(results[0::2], results[1::2]))


def _curve_records(slice_name: str, pairs) -> List[tuple]:
    return [
        (slice_name, sps.P, sps.V2, sps.eta, hybrid.eta, sps.n_zvs, hybrid.n_zvs, hybrid.S.name, hybrid.Din)
        for sps, hybrid in pairs
    ]


CURVE_COLUMNS = ["slice", "P_W", "V2_V", "eta_SPS", "eta_HEPS", "nZVS_SPS", "nZVS_HEPS", "S", "Din"]


def _in_range(value: float, grid: np.ndarray) -> bool:
    return float(grid[0]) <= value <= float(grid[-1])


def efficiency_curves(spec: ConverterSpec, smap: StrategyMap, V2_slices: Sequence[float] = EFFICIENCY_V2_SLICES,
                      P_slices: Sequence[float] = EFFICIENCY_P_SLICES, n_jobs: int = 1,
                      progress: bool = False) -> pd.DataFrame:
    """
    SPS against hybrid efficiency along fixed-V2 and fixed-P slices.

    Slices outside the map are skipped with a warning.

    Returns:
        pd.DataFrame: One row per point, ``slice`` naming e.g. ``V2=160`` or ``P=600``.
    """
    records = []
    for V2 in V2_slices:
        if not _in_range(V2, smap.V2_grid):
            logger.warning("skipping V2 slice %g V outside the map", V2)
            continue
        points = [(float(P), float(V2)) for P in smap.P_grid]
        pairs = _sps_and_hybrid(spec, smap, points, n_jobs, progress, f"V2={V2:g}")
        records.extend(_curve_records(f"V2={V2:g}", pairs))
    for P in P_slices:
        if not _in_range(P, smap.P_grid):
            logger.warning("skipping P slice %g W outside the map", P)
            continue
        points = [(float(P), float(V2)) for V2 in smap.V2_grid]
        pairs = _sps_and_hybrid(spec, smap, points, n_jobs, progress, f"P={P:g}")
        records.extend(_curve_records(f"P={P:g}", pairs))
    return pd.DataFrame.from_records(records, columns=CURVE_COLUMNS)


def hybrid_loss(spec: ConverterSpec, smap: StrategyMap, n_jobs: int = 1, progress: bool = False) -> pd.DataFrame:
    """Analytic loss of SPS and of the map optimum for every cell."""
    chosen, din = smap.chosen, smap.din_opt
    tasks = []
    for i, j, P, V2 in smap.cells():
        tasks.append((spec, P, V2, Strategy.EPS1, 1.0))
        tasks.append((spec, P, V2, Strategy(int(chosen[i, j])), float(din[i, j])))
    results = LocalExecutor(n_jobs, progress, desc="hybrid loss").map(_evaluate, tasks)
    records = [
        (sps.P, sps.V2, sps.P_loss if sps.feasible else np.nan, hyb.S.name, hyb.Din,
         hyb.P_loss if hyb.feasible else np.nan, hyb.n_zvs)
        for sps, hyb in zip(results[0::2], results[1::2])
    ]
    return pd.DataFrame.from_records(
        records, columns=["P_W", "V2_V", "Ploss_SPS_W", "S", "Din", "Ploss_HEPS_W", "nZVS_HEPS"]
    )


def write_report(spec: ConverterSpec, smap: StrategyMap, out_dir: str, n_jobs: int = 1,
                 progress: bool = False) -> List[str]:
    """
    Write every report table under ``out_dir/report``.

    Args:
        spec (ConverterSpec): Converter used for the analytic re-evaluation.
        smap (StrategyMap): Map to report on.
        out_dir (str): Output directory root.
        n_jobs (int): Worker processes.
        progress (bool): Show progress bars.

    Returns:
        List[str]: Paths written.

    Raises:
        CoverageError: If the map is empty.
    """
    if smap.cand_din.size == 0:
        raise CoverageError("strategy map has no cells", field="map")
    report_dir = os.path.join(out_dir, "report")
    os.makedirs(report_dir, exist_ok=True)
    tables: Dict[str, pd.DataFrame] = {
        "din_surfaces.csv": din_surfaces(smap),
        "zvs_regions.csv": zvs_regions(smap),
        "efficiency_curves.csv": efficiency_curves(spec, smap, n_jobs=n_jobs, progress=progress),
        "hybrid_loss.csv": hybrid_loss(spec, smap, n_jobs=n_jobs, progress=progress),
    }
    paths = []
    for name, frame in tables.items():
        path = os.path.join(report_dir, name)
        write_csv(frame, path)
        paths.append(path)
    logger.info("wrote %d report tables to %s", len(paths), report_dir)
    return paths
