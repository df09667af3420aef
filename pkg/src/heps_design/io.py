"""File persistence: atomic writes, CSV tables and chunked Parquet mirrors."""
import logging
import os
import tempfile
from contextlib import contextmanager
from typing import Dict, Iterator, Optional

import pandas as pd
import pyarrow as pa
import pyarrow.parquet as pq

from heps_design.errors import DomainError

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.12g"
PARQUET_CHUNK_ROWS = 10000


@contextmanager
def atomic_path(path: str, suffix: str = "") -> Iterator[str]:
    """
    Yield a temporary path next to ``path`` and move it into place on success.

    Args:
        path (str): Final destination.
        suffix (str): Suffix of the temporary file.

    Yields:
        str: Temporary file path to write to.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=directory, suffix=suffix, delete=False) as temp_file:
        temp_path = temp_file.name
    try:
        yield temp_path
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise


def write_text_atomic(path: str, text: str) -> None:
    with atomic_path(path, suffix=".tmp") as temp_path:
        with open(temp_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)


def read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def write_csv(frame: pd.DataFrame, path: str) -> None:
    """Write a table with floats at 12 significant digits."""
    with atomic_path(path, suffix=".csv") as temp_path:
        frame.to_csv(temp_path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.debug("wrote %d rows to %s", len(frame), path)


def read_csv(path: str, schema: Optional[pa.Schema] = None) -> pd.DataFrame:
    """
    Read a table written by :func:`write_csv`.

    Args:
        path (str): CSV file.
        schema (Optional[pa.Schema]): When given, required columns and their types.

    Returns:
        pd.DataFrame: The table, columns cast to the schema types.

    Raises:
        DomainError: If a schema column is missing.
    """
    if schema is None:
        return pd.read_csv(path)
    dtypes = {f.name: ("string" if pa.types.is_string(f.type) else None) for f in schema}
    frame = pd.read_csv(path, dtype={k: v for k, v in dtypes.items() if v})
    missing = [f.name for f in schema if f.name not in frame.columns]
    if missing:
        raise DomainError(f"{path} lacks columns {missing}", field="columns")
    for f in schema:
        if pa.types.is_string(f.type):
            frame[f.name] = frame[f.name].astype(str)
        elif pa.types.is_boolean(f.type):
            frame[f.name] = frame[f.name].astype(bool)
        elif pa.types.is_integer(f.type):
            frame[f.name] = frame[f.name].astype("int64")
        else:
            frame[f.name] = frame[f.name].astype(float)
    return frame[[f.name for f in schema]]


def create_arrays_from_chunk(chunk: pd.DataFrame, schema: pa.Schema) -> Dict[str, pa.Array]:
    arrays = {}
    for field in schema:
        values = chunk[field.name]
        if pa.types.is_string(field.type):
            arrays[field.name] = pa.array(values.astype(str).tolist(), type=field.type)
        else:
            arrays[field.name] = pa.array(values.to_numpy(), type=field.type)
    return arrays


def write_parquet(frame: pd.DataFrame, path: str, schema: pa.Schema, chunk_size: int = PARQUET_CHUNK_ROWS) -> None:
    """
    Mirror a table to Parquet, written chunk by chunk with a fixed schema.

    Args:
        frame (pd.DataFrame): Rows to write; must hold every schema column.
        path (str): Destination file.
        schema (pa.Schema): Column names and types.
        chunk_size (int): Rows per written row group.
    """
    with atomic_path(path, suffix=".parquet") as temp_path:
        with pq.ParquetWriter(temp_path, schema) as writer:
            for start in range(0, max(len(frame), 1), chunk_size):
                chunk = frame.iloc[start:start + chunk_size]
                table = pa.Table.from_pydict(create_arrays_from_chunk(chunk, schema), schema=schema)
                writer.write_table(table)
    logger.debug("wrote %d rows to %s", len(frame), path)


def read_parquet(path: str) -> pd.DataFrame:
    return pq.read_table(path).to_pandas()
