"""Worker pool over independent cells, results returned in task order."""
import logging
from multiprocessing import Pool
from typing import Callable, Iterable, List, Optional, Sequence

from tqdm import tqdm

logger = logging.getLogger(__name__)


def map_cells(
    func: Callable,
    tasks: Sequence,
    workers: int = 1,
    desc: Optional[str] = None,
    on_result: Optional[Callable] = None,
    show_progress: bool = False
) -> List:
    """
    Apply func to every task. workers == 1 runs in-process; otherwise a
    process pool with ordered imap, so the output order never depends on
    scheduling. on_result(index, result) is called as results arrive.
    """
    results = []
    progress = tqdm(total=len(tasks), desc=desc, unit="cell", disable=not show_progress)
    try:
        if workers <= 1 or len(tasks) <= 1:
            iterator: Iterable = map(func, tasks)
            results = _collect(iterator, progress, on_result)
        else:
            logger.info(f"Starting pool of {workers} workers for {len(tasks)} cells")
            with Pool(processes=workers) as pool:
                results = _collect(pool.imap(func, tasks), progress, on_result)
    finally:
        progress.close()
    return results


def _collect(iterator: Iterable, progress: tqdm, on_result: Optional[Callable]) -> List:
    results = []
    for i, result in enumerate(iterator):
        results.append(result)
        if on_result is not None:
            on_result(i, result)
        progress.update(1)
    return results
