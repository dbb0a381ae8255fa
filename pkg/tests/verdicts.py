"""One summary line per acceptance criterion, printed at the end of the run."""

LINES = {}


def record(number, ok, detail):
    LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok
