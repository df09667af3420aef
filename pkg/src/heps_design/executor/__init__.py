from heps_design.executor.local import LocalExecutor

__all__ = ["LocalExecutor"]
