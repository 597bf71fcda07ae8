"""Collects one result line per acceptance criterion for the terminal summary."""

LINES = {}


def record(criterion, passed: bool, detail: str) -> str:
    line = f"criterion {criterion!s:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    LINES[criterion] = line
    print(line)
    return line
