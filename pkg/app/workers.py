"""Ordered parallel map for sweeps.

Grid points are independent, so they are evaluated on a thread pool; results
come back in input order no matter which worker finishes first.
"""
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor

from tqdm import tqdm

import metrics
from config import settings
from errors import FrequencyRowError, GndlineError
from otel import span

_LOG = logging.getLogger(__name__)


def resolve_threads() -> int:
    n = int(settings.threads or 0)
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)


def map_ordered(fn, items, desc: str | None = None) -> list:
    items = list(items)
    threads = min(resolve_threads(), len(items)) if items else 1
    _LOG.debug("map_ordered %s: %d items on %d threads", desc or "", len(items), threads)
    bar = tqdm(total=len(items), desc=desc, disable=not settings.progress, leave=False)
    try:
        if threads <= 1:
            out = []
            for item in items:
                out.append(fn(item))
                bar.update(1)
            return out
        results = [None] * len(items)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(fn, item): i for i, item in enumerate(items)}
            # Walk in submission order so the first failing row is the lowest one.
            for future, i in futures.items():
                results[i] = future.result()
                bar.update(1)
        return results
    finally:
        bar.close()


def sweep_frequencies(kind: str, freqs, fn) -> list:
    """Evaluate ``fn(freq)`` over a grid, naming the frequency of any failing row."""

    def _row(freq):
        try:
            return fn(float(freq))
        except GndlineError as exc:
            metrics.record_row_failure(kind)
            raise FrequencyRowError(float(freq), exc) from exc

    freqs = list(freqs)
    start = time.perf_counter()
    with span(f"sweep.{kind}", rows=len(freqs)):
        rows = map_ordered(_row, freqs, desc=kind)
    elapsed = time.perf_counter() - start
    metrics.record_sweep(kind, len(rows), elapsed)
    _LOG.info(json.dumps({"event": "sweep_done", "kind": kind, "rows": len(rows),
                          "seconds": round(elapsed, 6)}))
    return rows
