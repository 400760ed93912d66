"""Text artifacts of a run: trace files, coverage reports, stats blocks and the
machine-readable RunManifest."""
from __future__ import annotations

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Literal

from pydantic import BaseModel, Field

from .explorer import CoverageReport, SearchStats, TraceStep, Verdict

if TYPE_CHECKING:
    from .ltl.search import Lasso

logger = logging.getLogger(__name__)

TRACE_HEADER = "# step pid stmt label digest"
CYCLE_MARKER = "# cycle"


def format_trace(steps: list[TraceStep] | tuple[TraceStep, ...]) -> str:
    lines = [TRACE_HEADER] + [step.line() for step in steps]
    return "\n".join(lines) + "\n"


def format_lasso(lasso: Lasso) -> str:
    lines = [TRACE_HEADER] + [step.line() for step in lasso.prefix]
    lines.append(CYCLE_MARKER)
    lines.extend(step.line() for step in lasso.cycle)
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Read (owner, ordinal) pairs back from a trace file: (prefix, cycle)."""
    prefix: list[tuple[int, int]] = []
    cycle: list[tuple[int, int]] = []
    target = prefix
    for line in text.splitlines():
        if line.strip() == CYCLE_MARKER:
            target = cycle
            continue
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split()
        target.append((int(fields[1]), int(fields[2])))
    return prefix, cycle


def format_coverage(report: CoverageReport) -> str:
    lines = ["# unreached statements: ordinal name [label]"]
    for stmt in report.unreached:
        line = f"{stmt.ordinal} {stmt.name}"
        if stmt.label:
            line += f" [{stmt.label}]"
        note = report.notes.get(stmt.ordinal)
        if note:
            line += f"  # {note}"
        lines.append(line)
    unreached = len(report.unreached)
    lines.append(f"# total={report.total} reached={report.total - unreached} unreached={unreached}")
    return "\n".join(lines) + "\n"


def format_stats(stats: SearchStats, style: Literal["text", "kv"] = "text") -> str:
    values = stats.as_dict()
    if style == "kv":
        return "\n".join(f"{key}={value}" for key, value in values.items()) + "\n"
    return (
        f"States stored:      {stats.states_stored}\n"
        f"Transitions fired:  {stats.transitions_fired}\n"
        f"Max depth:          {stats.max_depth}\n"
        f"Elapsed:            {stats.elapsed:.2f} s\n"
        f"Memory estimate:    {stats.memory_estimate / (1024 * 1024):.1f} MB\n"
        f"Truncated moves:    {stats.truncated}\n"
    )


def write_text(path: str | Path, text: str) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {path}")
    return str(path)


class RunManifest(BaseModel):
    """Everything needed to interpret one CLI run."""
    command: str
    config: dict
    property: str | None = None
    formula: str | None = None
    mutation: str = "none"
    limits: dict[str, int | bool]
    verdict: str
    complete: bool
    check: str | None = None
    detail: str = ""
    exit_status: int
    stats: dict[str, int | float]
    artifacts: dict[str, str] = Field(default_factory=dict)
    finished_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))

    @classmethod
    def from_run(cls, command: str, config: dict, verdict: Verdict, stats: SearchStats,
                 exit_status: int, **extra) -> RunManifest:
        return cls(
            command=command,
            config=config,
            verdict=verdict.kind.value,
            complete=verdict.complete,
            check=verdict.check,
            detail=verdict.detail,
            exit_status=exit_status,
            stats=stats.as_dict(),
            **extra,
        )
