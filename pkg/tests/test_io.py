import os

import numpy as np
import pandas as pd
import pytest

from heps_design.errors import DomainError
from heps_design.io import atomic_path, read_csv, read_parquet, write_csv, write_parquet, write_text_atomic
from heps_design.schema import SCHEMAS


@pytest.fixture
def comparison_frame():
    return pd.DataFrame({
        "P_W": [100.0, 550.0],
        "V2_V": [160.0, 240.0],
        "scheme": ["SPS", "HEPS"],
        "S": ["EPS1", "EPS2"],
        "Din": [1.0, 0.123456789012345],
        "Ploss_W": [5.5, 7.25],
        "nZVS": [6, 8],
        "eta": [0.95, 0.987],
        "feasible": [True, False],
    })


class TestCsv:
    def test_round_trip_keeps_types(self, comparison_frame, tmp_path):
        path = str(tmp_path / "comparison.csv")
        write_csv(comparison_frame, path)
        loaded = read_csv(path, SCHEMAS["comparison"])
        assert loaded["feasible"].tolist() == [True, False]
        assert loaded["nZVS"].tolist() == [6, 8]
        assert loaded["S"].tolist() == ["EPS1", "EPS2"]
        assert loaded["Din"].iloc[1] == pytest.approx(0.123456789012, abs=1e-12)

    def test_twelve_significant_digits(self, comparison_frame, tmp_path):
        path = tmp_path / "comparison.csv"
        write_csv(comparison_frame, str(path))
        assert "0.123456789012," in path.read_text()

    def test_missing_column(self, comparison_frame, tmp_path):
        path = str(tmp_path / "partial.csv")
        write_csv(comparison_frame.drop(columns=["eta"]), path)
        with pytest.raises(DomainError):
            read_csv(path, SCHEMAS["comparison"])


class TestParquet:
    def test_round_trip(self, comparison_frame, tmp_path):
        path = str(tmp_path / "comparison.parquet")
        write_parquet(comparison_frame, path, SCHEMAS["comparison"], chunk_size=1)
        loaded = read_parquet(path)
        assert list(loaded.columns) == [f.name for f in SCHEMAS["comparison"]]
        assert np.array_equal(loaded["Din"].to_numpy(), comparison_frame["Din"].to_numpy())

    def test_empty_frame(self, tmp_path):
        path = str(tmp_path / "empty.parquet")
        columns = [f.name for f in SCHEMAS["waveform"]]
        write_parquet(pd.DataFrame({c: pd.Series(dtype=float) for c in columns}), path, SCHEMAS["waveform"])
        assert len(read_parquet(path)) == 0


class TestAtomicWrites:
    def test_failed_write_leaves_nothing(self, tmp_path):
        target = tmp_path / "out.txt"
        with pytest.raises(RuntimeError):
            with atomic_path(str(target)) as temp_path:
                with open(temp_path, "w") as handle:
                    handle.write("partial")
                raise RuntimeError("boom")
        assert os.listdir(tmp_path) == []

    def test_replaces_existing(self, tmp_path):
        target = tmp_path / "out.txt"
        target.write_text("old")
        write_text_atomic(str(target), "new")
        assert target.read_text() == "new"
        assert os.listdir(tmp_path) == ["out.txt"]
