"""Collects one verdict line per acceptance criterion."""
import contextlib
import time

LINES = []


class _Verdict:
    def __init__(self):
        self.detail = ""


@contextlib.contextmanager
def criterion(number, title):
    """Record PASS when the block completes, FAIL (with the reason) when it raises."""
    v = _Verdict()
    t0 = time.perf_counter()
    try:
        yield v
    except BaseException as exc:
        reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        _emit(f"FAIL criterion {number:2d} ({title}): {reason}", t0)
        raise
    _emit(f"PASS criterion {number:2d} ({title}): {v.detail}", t0)


def _emit(line, t0):
    line = f"{line} [{time.perf_counter() - t0:.1f} s]"
    LINES.append(line)
    print(line)
