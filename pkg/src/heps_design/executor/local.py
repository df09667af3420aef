import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, Tuple

from tqdm import tqdm

logger = logging.getLogger(__name__)


class LocalExecutor:
    """
    Order-preserving map over tasks, in-process or on a process pool.

    Results always come back in task order, so anything assembled from them
    does not depend on worker scheduling.

    Args:
        n_jobs (int): Worker processes; 1 runs in the calling process.
        progress (bool): Show a tqdm bar.
        desc (Optional[str]): Label of the progress bar.
        initializer (Optional[Callable]): Run once per worker (or once
            in-process) before any task, e.g. to install a large shared model.
        initargs (Tuple): Arguments of ``initializer``.
    """

    def __init__(self, n_jobs: int = 1, progress: bool = True, desc: Optional[str] = None,
                 initializer: Optional[Callable] = None, initargs: Tuple = ()):
        self.n_jobs = max(1, int(n_jobs))
        self.progress = progress
        self.desc = desc
        self.initializer = initializer
        self.initargs = initargs

    def map(self, function: Callable, tasks: Iterable) -> List:
        tasks = list(tasks)
        bar = tqdm(total=len(tasks), desc=self.desc, disable=not self.progress)
        results = []
        try:
            if self.n_jobs == 1 or len(tasks) <= 1:
                if self.initializer is not None:
                    self.initializer(*self.initargs)
                for task in tasks:
                    results.append(function(task))
                    bar.update(1)
            else:
                logger.debug("dispatching %d tasks to %d workers", len(tasks), self.n_jobs)
                chunksize = max(1, len(tasks) // (self.n_jobs * 8))
                with ProcessPoolExecutor(max_workers=self.n_jobs, initializer=self.initializer,
                                         initargs=self.initargs) as pool:
                    for result in pool.map(function, tasks, chunksize=chunksize):
                        results.append(result)
                        bar.update(1)
        finally:
            bar.close()
        return results
