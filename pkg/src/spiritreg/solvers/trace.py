from __future__ import annotations

import json
import time
from dataclasses import dataclass, field


class SolverError(RuntimeError):
    """Iteration aborted; ``trace`` holds everything recorded up to the failure."""

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


@dataclass
class SolverTrace:
    """Per-iteration record of an iterative solve.

    ``decrease_margin`` is only filled by FISTA: the slack of the
    sufficient-decrease test at the accepted step (nonnegative up to rounding).
    """

    objective: list = field(default_factory=list)
    step: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    wall_clock: list = field(default_factory=list)
    decrease_margin: list = field(default_factory=list)
    backtracks: int = 0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def record(self, objective, step, residual, margin=None):
        self.objective.append(float(objective))
        self.step.append(float(step))
        self.residual.append(float(residual))
        self.wall_clock.append(time.perf_counter() - self._t0)
        if margin is not None:
            self.decrease_margin.append(float(margin))

    def __len__(self):
        return len(self.objective)

    def to_jsonl(self, timing: bool = True) -> str:
        """One JSON object per iteration; ``timing=False`` leaves out wall-clock
        so that the file is reproducible bit for bit."""
        lines = []
        for i in range(len(self)):
            row = {
                "iter": i + 1,
                "objective": self.objective[i],
                "step": self.step[i],
                "residual": self.residual[i],
            }
            if timing:
                row["wall_clock"] = self.wall_clock[i]
            lines.append(json.dumps(row))
        return "\n".join(lines) + ("\n" if lines else "")

    def write_jsonl(self, path, timing: bool = True) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl(timing))
