"""Collects one verdict line per acceptance criterion for the terminal summary."""

import time
from contextlib import contextmanager

RESULTS: dict[int, str] = {}
DETAILS: dict[int, list[str]] = {}


@contextmanager
def criterion(number: int, title: str, budget_s: float | None = None):
    """Time the enclosed block and record PASS or FAIL, re-raising any failure."""
    start = time.perf_counter()
    DETAILS[number] = []
    try:
        yield
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        reason = (str(exc).strip().splitlines() or [type(exc).__name__])[0]
        RESULTS[number] = f"FAIL criterion {number:2d} {title} ({elapsed:.2f} s){_details(number)}: {reason}"
        raise
    elapsed = time.perf_counter() - start
    if budget_s is not None and elapsed >= budget_s:
        RESULTS[number] = (f"FAIL criterion {number:2d} {title} ({elapsed:.2f} s){_details(number)}: "
                           f"over the {budget_s:g} s budget")
        raise AssertionError(RESULTS[number])
    RESULTS[number] = f"PASS criterion {number:2d} {title} ({elapsed:.2f} s){_details(number)}"


def note(number: int, detail: str) -> None:
    """Attach a measured value to a criterion's line."""
    DETAILS.setdefault(number, []).append(detail)


def _details(number: int) -> str:
    return f" [{'; '.join(DETAILS[number])}]" if DETAILS.get(number) else ""
