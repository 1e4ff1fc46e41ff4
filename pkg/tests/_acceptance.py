"""Collects one verdict line per acceptance criterion for the terminal summary."""

RESULTS: dict[int, str] = {}


def record(n: int, status: str, text: str) -> str:
    line = f"[criterion {n:>2}] {status}: {text}"
    RESULTS[n] = line
    print(line)
    return line
