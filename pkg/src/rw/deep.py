"""Run recursion-heavy work on a thread with a large stack.

CPython's C stack limits recursion well below `sys.getrecursionlimit()` on
the main thread; deep terms (thousands of nested lets or long list spines)
need both a raised limit and a bigger stack.
"""

import sys
import threading

from .errors import BenchTimeout

STACK_BYTES = 512 * 1024 * 1024
RECURSION_LIMIT = 1_000_000


def run_deep(fn, *args, timeout=None, **kwargs):
    box = {}

    def worker():
        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(RECURSION_LIMIT)
        try:
            box["value"] = fn(*args, **kwargs)
        except BaseException as ex:  # re-raised on the caller's thread
            box["error"] = ex
        finally:
            sys.setrecursionlimit(old_limit)

    old_size = threading.stack_size(STACK_BYTES)
    try:
        th = threading.Thread(target=worker, daemon=True)
        th.start()
    finally:
        threading.stack_size(old_size)
    th.join(timeout)
    if th.is_alive():
        raise BenchTimeout(f"work exceeded {timeout} seconds")
    if "error" in box:
        raise box["error"]
    return box["value"]
