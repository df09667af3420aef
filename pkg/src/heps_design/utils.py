import hashlib

import numpy as np

from heps_design.errors import DomainError


def derive_seed(master: int, *labels) -> int:
    """
    Derive a 63-bit seed from a master seed and a purpose label.

    The same (master, labels) always gives the same seed, independent of
    process, platform and call order.
    """
    text = "/".join([str(int(master))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def uniform_grid(lo: float, hi: float, count: int) -> np.ndarray:
    """``count`` evenly spaced points on [lo, hi]; a single point sits at ``lo``."""
    if count < 1:
        raise DomainError(f"grid size must be >= 1, got {count}", field="count")
    if count == 1:
        return np.array([float(lo)])
    if hi < lo:
        raise DomainError(f"grid upper bound {hi} is below lower bound {lo}", field="hi")
    return np.linspace(lo, hi, count)


def format_seconds(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:.2f} s"
    return f"{int(seconds // 60)} min {seconds % 60:.1f} s"
