"""
Wall-clock timing of simulation stages.

Accumulates per-stage durations (governor, control, plant, telemetry,
audit) across many repetitions so a run can log where its time went.
Timings are logged only and never enter telemetry.
"""

import time
from contextlib import contextmanager


class StageTimer:
    """Accumulates wall-clock time and call counts for named stages."""

    def __init__(self) -> None:
        self._totals: dict[str, float] = {}
        self._counts: dict[str, int] = {}

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self._totals[name] = self._totals.get(name, 0.0) + time.perf_counter() - start
            self._counts[name] = self._counts.get(name, 0) + 1

    def get_metrics(self) -> dict[str, float]:
        """Stage totals in seconds plus a ``total`` key."""
        metrics = {name: round(total, 4) for name, total in self._totals.items()}
        metrics["total"] = round(sum(self._totals.values()), 4)
        return metrics

    def format_metrics(self) -> str:
        lines = []
        for name, total in self._totals.items():
            calls = self._counts[name]
            lines.append(f"  {name}: {total:.3f}s over {calls} calls ({1e6 * total / calls:.1f} µs each)")
        lines.append("  ─────────────────")
        lines.append(f"  total: {sum(self._totals.values()):.3f}s")
        return "\n".join(lines)
