"""Run reports: accuracy summaries, text tables, and run comparison."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .exceptions import DupError, RunComparisonError

log = logging.getLogger(__name__)

__all__ = [
    "Report",
    "DeltaRow",
    "DeltaTable",
    "build_report",
    "write_report",
    "load_report",
    "recount",
    "compare_runs",
    "compare_report_sets",
]

REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"


def round_accuracy(correct: int, total: int) -> float:
    """Percentage accuracy rounded half-up to one decimal place."""
    if total == 0:
        return 0.0
    value = (Decimal(correct) * 100 / Decimal(total)).quantize(
        Decimal("0.1"), rounding=ROUND_HALF_UP
    )
    return float(value)


@dataclass
class Report:
    """Aggregate outcome of one experiment run."""

    dataset: str
    method: str
    model: str
    config: dict
    total: int
    correct: int
    accuracy: float
    accuracy_raw: float
    per_problem: list[dict]
    usage: dict
    started_at: str = ""
    finished_at: str = ""

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method,
            "model": self.model,
            "config": self.config,
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "accuracy_raw": self.accuracy_raw,
            "per_problem": self.per_problem,
            "usage": self.usage,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        return cls(**data)

    def to_table(self) -> str:
        lines = [
            f"dataset        {self.dataset}",
            f"method         {self.method}",
            f"model          {self.model}",
            f"problems       {self.total}",
            f"correct        {self.correct}",
            f"accuracy       {self.accuracy:.1f}",
            f"gateway calls  {self.usage.get('calls', 0)}"
            f" ({self.usage.get('cached_calls', 0)} cached)",
            f"tokens         {self.usage.get('prompt_tokens', 0)} prompt /"
            f" {self.usage.get('completion_tokens', 0)} completion",
        ]
        return "\n".join(lines) + "\n"


def build_report(config, problems, transcripts: dict) -> Report:
    """Fold per-problem transcripts into a Report.

    per_problem rows keep only what recounting and comparison need; the
    transcript files stay the source of full detail.
    """
    per_problem = []
    correct = 0
    calls = cached_calls = prompt_tokens = completion_tokens = 0
    started = ""
    finished = ""
    for problem in problems:
        transcript = transcripts.get(problem.id)
        if transcript is None:
            raise DupError(f"missing transcript for problem {problem.id}")
        graded = transcript.graded
        if graded is not None and graded.correct:
            correct += 1
        for record in transcript.records:
            if record.error is None:
                calls += 1
                cached_calls += int(record.cached)
                prompt_tokens += record.prompt_tokens
                completion_tokens += record.completion_tokens
        per_problem.append(
            {
                "problem_id": problem.id,
                "correct": bool(graded.correct) if graded else False,
                "predicted": transcript.predicted.to_dict() if transcript.predicted else None,
                "extraction_source": graded.extraction_source if graded else "none",
                "errors": list(transcript.errors),
            }
        )
        if not started or (transcript.started_at and transcript.started_at < started):
            started = transcript.started_at
        if transcript.finished_at and transcript.finished_at > finished:
            finished = transcript.finished_at
    total = len(problems)
    return Report(
        dataset=config.dataset,
        method=config.method.value if hasattr(config.method, "value") else str(config.method),
        model=config.model,
        config=config.to_dict(),
        total=total,
        correct=correct,
        accuracy=round_accuracy(correct, total),
        accuracy_raw=(correct / total) if total else 0.0,
        per_problem=per_problem,
        usage={
            "calls": calls,
            "cached_calls": cached_calls,
            "prompt_tokens": prompt_tokens,
            "completion_tokens": completion_tokens,
        },
        started_at=started,
        finished_at=finished,
    )


def write_report(report: Report, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / REPORT_JSON
    path.write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / REPORT_TEXT).write_text(report.to_table(), encoding="utf-8")
    return path


def load_report(path: str | Path) -> Report:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_JSON
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DupError(f"cannot read report at {path}: {exc}") from exc
    return Report.from_dict(data)


def recount(out_dir: str | Path) -> Report:
    """Regrade a finished run purely from its persisted transcripts.

    Useful after grading fixes: no gateway traffic, just a fresh report
    from what is on disk.
    """
    from .grading import GradedResult, grade
    from .runner import load_problems, load_transcript, select_problems, stored_config

    out_dir = Path(out_dir)
    config = stored_config(out_dir)
    problems = select_problems(load_problems(config), config.max_problems, config.seed)
    transcripts = {}
    for problem in problems:
        transcript = load_transcript(out_dir, problem.id)
        if transcript is None:
            raise DupError(f"recount needs a completed transcript for {problem.id}")
        predicted = transcript.predicted
        source = transcript.graded.extraction_source if transcript.graded else "none"
        transcript.graded = GradedResult(
            problem_id=problem.id,
            predicted=predicted,
            correct=predicted is not None and grade(predicted, problem.gold),
            extraction_source=source if predicted is not None else "none",
        )
        transcripts[problem.id] = transcript
    report = build_report(config, problems, transcripts)
    write_report(report, out_dir)
    return report


@dataclass(frozen=True)
class DeltaRow:
    dataset: str
    baseline_accuracy: float
    candidate_accuracy: float
    delta: float

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "baseline_accuracy": self.baseline_accuracy,
            "candidate_accuracy": self.candidate_accuracy,
            "delta": self.delta,
        }


@dataclass
class DeltaTable:
    rows: list[DeltaRow] = field(default_factory=list)
    average_delta: float = 0.0

    def to_dict(self) -> dict:
        return {
            "rows": [row.to_dict() for row in self.rows],
            "average_delta": self.average_delta,
        }

    def to_table(self) -> str:
        header = f"{'dataset':<16} {'baseline':>9} {'candidate':>9} {'delta':>7}"
        lines = [header, "-" * len(header)]
        for row in self.rows:
            lines.append(
                f"{row.dataset:<16} {row.baseline_accuracy:>9.1f}"
                f" {row.candidate_accuracy:>9.1f} {row.delta:>+7.1f}"
            )
        lines.append(f"{'average delta':<16} {'':>9} {'':>9} {self.average_delta:>+7.1f}")
        return "\n".join(lines) + "\n"


def _one_decimal(value: Decimal) -> float:
    return float(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def compare_runs(baseline: Report, candidate: Report) -> DeltaRow:
    """Accuracy delta (candidate minus baseline) for one matched pair.

    Both runs must cover the same dataset and the same problem ids,
    otherwise the numbers are not comparable.
    """
    if baseline.dataset != candidate.dataset:
        raise RunComparisonError(
            f"dataset mismatch: baseline ran {baseline.dataset!r},"
            f" candidate ran {candidate.dataset!r}"
        )
    base_ids = {row["problem_id"] for row in baseline.per_problem}
    cand_ids = {row["problem_id"] for row in candidate.per_problem}
    if base_ids != cand_ids:
        only_base = sorted(base_ids - cand_ids)
        only_cand = sorted(cand_ids - base_ids)
        raise RunComparisonError(
            "problem sets differ; only in baseline: "
            f"{only_base or 'none'}; only in candidate: {only_cand or 'none'}"
        )
    delta = _one_decimal(Decimal(str(candidate.accuracy)) - Decimal(str(baseline.accuracy)))
    return DeltaRow(
        dataset=baseline.dataset,
        baseline_accuracy=baseline.accuracy,
        candidate_accuracy=candidate.accuracy,
        delta=delta,
    )


def compare_report_sets(baselines: list[Report], candidates: list[Report]) -> DeltaTable:
    """Pair reports by dataset and tabulate per-dataset and average deltas."""
    by_dataset = {}
    for report in baselines:
        if report.dataset in by_dataset:
            raise RunComparisonError(f"duplicate baseline for dataset {report.dataset!r}")
        by_dataset[report.dataset] = report
    rows = []
    seen = set()
    for candidate in candidates:
        baseline = by_dataset.get(candidate.dataset)
        if baseline is None:
            raise RunComparisonError(f"no baseline run for dataset {candidate.dataset!r}")
        if candidate.dataset in seen:
            raise RunComparisonError(f"duplicate candidate for dataset {candidate.dataset!r}")
        seen.add(candidate.dataset)
        rows.append(compare_runs(baseline, candidate))
    unmatched = sorted(set(by_dataset) - seen)
    if unmatched:
        raise RunComparisonError(f"baselines without candidates: {unmatched}")
    if not rows:
        raise RunComparisonError("nothing to compare: no report pairs supplied")
    average = _one_decimal(
        sum((Decimal(str(row.delta)) for row in rows), Decimal(0)) / len(rows)
    )
    return DeltaTable(rows=rows, average_delta=average)
