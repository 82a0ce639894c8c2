"""Experiment orchestration: per-problem pipelines, persistence, resume.

Each problem produces a Transcript recording every prompt, raw response,
and extracted artifact in execution order. Transcripts are written to
out_dir/transcripts/<id>.json as soon as a problem finishes (atomic
rename), so an interrupted run resumes by skipping completed ids. Stage
calls are independent stateless completions: every prompt carries all the
context it needs, which keeps calls cache-friendly.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .consistency import Vote, VoteSet, aggregate
from .datasets import canonical_dataset_id, load_dataset, load_from_manifest, load_manifest
from .exceptions import DupError, GatewayError, InvalidInputError
from .extraction import STAGE_EXTRACTION, dup_s_answer_segment, extract_answer
from .gateway import ChatRequest, Gateway, ProviderConfig, build_gateway, build_messages
from .grading import GradedResult, NormalizedAnswer, grade
from .prompts import (
    MethodVariant,
    render_core_question_prompt,
    render_cot_prompt,
    render_dup_s_prompt,
    render_final_answer_prompt,
    render_info_extraction_prompt,
    render_last_letter_prompt,
)

log = logging.getLogger(__name__)

__all__ = [
    "StageConfig",
    "RunConfig",
    "StageRecord",
    "Transcript",
    "resolve_method",
    "run_problem",
    "run_experiment",
    "select_problems",
    "load_problems",
    "load_transcript",
    "transcript_path",
    "stored_config",
    "build_run_gateway",
]

STAGE_CORE = "core_question"
STAGE_INFO = "solving_info"
STAGE_ANSWER = "answer"

_TRANSCRIPT_DIR = "transcripts"
_CONFIG_FILE = "config.json"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class StageConfig:
    """Which of the three pipeline stages are enabled (ablation toggles)."""

    stage1: bool = True
    stage2: bool = True
    stage3: bool = True

    @classmethod
    def from_string(cls, spec: str) -> "StageConfig":
        """Parse "1,2,3"-style subsets; "none" or "" disables everything."""
        spec = spec.strip().lower()
        if spec in ("", "none"):
            return cls(False, False, False)
        enabled = set()
        for token in spec.split(","):
            token = token.strip()
            if token not in ("1", "2", "3"):
                raise InvalidInputError(f"bad stage token {token!r}; expected 1, 2 or 3")
            enabled.add(int(token))
        return cls(1 in enabled, 2 in enabled, 3 in enabled)

    def to_dict(self) -> dict:
        return {"stage1": self.stage1, "stage2": self.stage2, "stage3": self.stage3}

    @classmethod
    def from_dict(cls, data: dict) -> "StageConfig":
        return cls(bool(data["stage1"]), bool(data["stage2"]), bool(data["stage3"]))


@dataclass
class RunConfig:
    """Everything one experiment run needs, serializable for resume."""

    dataset: str
    method: MethodVariant = MethodVariant.DUP
    stages: StageConfig = field(default_factory=StageConfig)
    model: str = "gpt-3.5-turbo"
    extractor_model: str | None = None  # overrides stages 1-2 only
    temperature: float = 0.0
    n_samples: int = 1
    max_problems: int | None = None
    seed: int = 0
    cache_dir: str | None = None
    out_dir: str = "runs/out"
    dataset_path: str | None = None
    manifest: str | None = None
    answer_type: str | None = None
    max_tokens: int = 1024
    system_message: str | None = None
    workers: int = 4
    # None = auto: the Last Letters dataset swaps in the simplified
    # single-prompt method; set False to force the full pipeline there.
    last_letter_simplified: bool | None = None
    # Provider wiring (never secrets); stored so resume can rebuild the
    # gateway without repeating flags.
    backend: str = "http"
    base_url: str | None = None
    mock_script: str | dict | None = None

    def validate(self) -> None:
        if not self.dataset:
            raise InvalidInputError("dataset identifier is required")
        if self.n_samples < 1:
            raise InvalidInputError("n_samples must be >= 1")
        if self.n_samples > 1 and self.temperature <= 0:
            raise InvalidInputError("self-consistency sampling requires temperature > 0")
        if self.temperature < 0:
            raise InvalidInputError("temperature must be >= 0")
        if self.max_problems is not None and self.max_problems < 0:
            raise InvalidInputError("max_problems must be >= 0")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method.value,
            "stages": self.stages.to_dict(),
            "model": self.model,
            "extractor_model": self.extractor_model,
            "temperature": self.temperature,
            "n_samples": self.n_samples,
            "max_problems": self.max_problems,
            "seed": self.seed,
            "cache_dir": self.cache_dir,
            "out_dir": self.out_dir,
            "dataset_path": self.dataset_path,
            "manifest": self.manifest,
            "answer_type": self.answer_type,
            "max_tokens": self.max_tokens,
            "system_message": self.system_message,
            "workers": self.workers,
            "last_letter_simplified": self.last_letter_simplified,
            "backend": self.backend,
            "base_url": self.base_url,
            "mock_script": self.mock_script,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        data["method"] = MethodVariant(data.get("method", "dup"))
        data["stages"] = StageConfig.from_dict(data.get("stages", StageConfig().to_dict()))
        return cls(**data)


@dataclass
class StageRecord:
    """One gateway exchange inside a transcript."""

    stage: str
    prompt: str
    response: str | None = None
    artifact: str | None = None
    sample_index: int = 0
    duration_s: float = 0.0
    cached: bool = False
    prompt_tokens: int = 0
    completion_tokens: int = 0
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "prompt": self.prompt,
            "response": self.response,
            "artifact": self.artifact,
            "sample_index": self.sample_index,
            "duration_s": round(self.duration_s, 6),
            "cached": self.cached,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StageRecord":
        return cls(**data)


@dataclass
class Transcript:
    """Append-only per-problem record of a pipeline run."""

    problem_id: str
    dataset: str
    method: str
    stages: dict
    records: list[StageRecord] = field(default_factory=list)
    votes: list[Vote] = field(default_factory=list)
    predicted: NormalizedAnswer | None = None
    graded: GradedResult | None = None
    errors: list[str] = field(default_factory=list)
    completed: bool = False
    started_at: str = field(default_factory=_utc_now)
    finished_at: str | None = None

    def vote_set(self) -> VoteSet:
        return VoteSet(tuple(self.votes))

    @property
    def answer_text(self) -> str | None:
        """Raw reasoning text of the (first) answer-stage completion."""
        for record in self.records:
            if record.stage == STAGE_ANSWER and record.response is not None:
                return record.response
        return None

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "dataset": self.dataset,
            "method": self.method,
            "stages": self.stages,
            "records": [record.to_dict() for record in self.records],
            "votes": [vote.to_dict() for vote in self.votes],
            "predicted": self.predicted.to_dict() if self.predicted else None,
            "graded": self.graded.to_dict() if self.graded else None,
            "errors": self.errors,
            "completed": self.completed,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Transcript":
        predicted = data.get("predicted")
        graded = data.get("graded")
        return cls(
            problem_id=data["problem_id"],
            dataset=data["dataset"],
            method=data["method"],
            stages=data["stages"],
            records=[StageRecord.from_dict(r) for r in data.get("records", [])],
            votes=[
                Vote(
                    sample_index=v["sample_index"],
                    answer=NormalizedAnswer.from_dict(v["answer"]) if v.get("answer") else None,
                )
                for v in data.get("votes", [])
            ],
            predicted=NormalizedAnswer.from_dict(predicted) if predicted else None,
            graded=GradedResult(
                problem_id=graded["problem_id"],
                predicted=NormalizedAnswer.from_dict(graded["predicted"])
                if graded.get("predicted")
                else None,
                correct=graded["correct"],
                extraction_source=graded["extraction_source"],
            )
            if graded
            else None,
            errors=data.get("errors", []),
            completed=data.get("completed", False),
            started_at=data.get("started_at", ""),
            finished_at=data.get("finished_at"),
        )


def resolve_method(config: RunConfig, dataset: str) -> MethodVariant:
    """Apply the Last Letters auto-simplification unless explicitly disabled."""
    if (
        config.method is MethodVariant.DUP
        and canonical_dataset_id(dataset) == "last_letters"
        and config.last_letter_simplified is not False
    ):
        return MethodVariant.LAST_LETTER_SIMPLIFIED
    return config.method


def _call(
    gateway: Gateway,
    transcript: Transcript,
    stage: str,
    prompt: str,
    model: str,
    config: RunConfig,
    temperature: float = 0.0,
    sample_index: int = 0,
    tag_suffix: str = "",
) -> str:
    """Issue one stage completion and append its record; returns the content."""
    request = ChatRequest(
        model=model,
        messages=build_messages(prompt, config.system_message),
        temperature=temperature,
        max_tokens=config.max_tokens,
        sample_index=sample_index,
        tag=f"{stage}:{transcript.problem_id}{tag_suffix}",
    )
    start = time.perf_counter()
    try:
        response = gateway.complete_cached(request)
    except GatewayError as exc:
        transcript.records.append(
            StageRecord(stage=stage, prompt=prompt, sample_index=sample_index, error=str(exc))
        )
        transcript.errors.append(f"{stage}: {exc}")
        raise
    transcript.records.append(
        StageRecord(
            stage=stage,
            prompt=prompt,
            response=response.content,
            artifact=response.content.strip(),
            sample_index=sample_index,
            duration_s=time.perf_counter() - start,
            cached=response.cached,
            prompt_tokens=response.prompt_tokens,
            completion_tokens=response.completion_tokens,
        )
    )
    return response.content


def _answer_prompts(
    problem, config: RunConfig, method: MethodVariant, gateway: Gateway, transcript: Transcript
) -> str:
    """Run any enabled extraction stages and return the answer-stage prompt."""
    question = problem.question
    if method is MethodVariant.ZERO_SHOT_COT:
        return render_cot_prompt(question)
    if method is MethodVariant.DUP_S:
        return render_dup_s_prompt(question)
    if method is MethodVariant.LAST_LETTER_SIMPLIFIED:
        return render_last_letter_prompt(question)

    extractor = config.extractor_model or config.model
    core = ""
    info = ""
    if config.stages.stage1:
        prompt = render_core_question_prompt(question)
        core = _call(gateway, transcript, STAGE_CORE, prompt, extractor, config).strip()
    if config.stages.stage2:
        # Without stage 1 there is no extracted core question; the original
        # question stands in so stage 2 can still run alone.
        core_ref = core if config.stages.stage1 else question
        prompt = render_info_extraction_prompt(question, core_ref)
        info = _call(gateway, transcript, STAGE_INFO, prompt, extractor, config).strip()
    return render_final_answer_prompt(
        question,
        core_question=core,
        info=info,
        include_instruction=config.stages.stage3,
    )


def run_problem(problem, config: RunConfig, gateway: Gateway) -> Transcript:
    """Run the full pipeline for one problem and grade the outcome.

    Gateway failures at any stage are contained: the transcript records the
    error, the problem grades incorrect, and the caller moves on.
    """
    config.validate()
    method = resolve_method(config, problem.dataset)
    transcript = Transcript(
        problem_id=problem.id,
        dataset=problem.dataset,
        method=method.value,
        stages=config.stages.to_dict(),
    )
    try:
        answer_prompt = _answer_prompts(problem, config, method, gateway, transcript)
        votes: list[Vote] = []
        sources: list[str] = []
        for i in range(config.n_samples):
            suffix = f"#{i}" if config.n_samples > 1 else ""
            reasoning = _call(
                gateway,
                transcript,
                STAGE_ANSWER,
                answer_prompt,
                config.model,
                config,
                temperature=config.temperature,
                sample_index=i,
                tag_suffix=suffix,
            )
            extraction_input = (
                dup_s_answer_segment(reasoning) if method is MethodVariant.DUP_S else reasoning
            )
            outcome = extract_answer(
                extraction_input,
                problem.answer_type,
                gateway,
                model=config.model,
                max_tokens=config.max_tokens,
                tag=f"{STAGE_EXTRACTION}:{problem.id}{suffix}",
                gold=problem.gold,
                system_message=config.system_message,
            )
            transcript.records.append(
                StageRecord(
                    stage=STAGE_EXTRACTION,
                    prompt=outcome.prompt,
                    response=outcome.response_text,
                    artifact=str(outcome.answer.value) if outcome.answer else None,
                    sample_index=i,
                    duration_s=outcome.duration_s,
                    cached=outcome.cached,
                    prompt_tokens=outcome.prompt_tokens,
                    completion_tokens=outcome.completion_tokens,
                )
            )
            votes.append(Vote(sample_index=i, answer=outcome.answer))
            sources.append(outcome.source)
        transcript.votes = votes
        predicted = aggregate(transcript.vote_set())
        transcript.predicted = predicted
        if predicted is None:
            source = "none"
        else:
            source = next(
                sources[v.sample_index]
                for v in votes
                if v.answer is not None and grade(v.answer, predicted)
            )
        correct = predicted is not None and grade(predicted, problem.gold)
        transcript.graded = GradedResult(
            problem_id=problem.id,
            predicted=predicted,
            correct=correct,
            extraction_source=source,
        )
    except GatewayError:
        transcript.predicted = None
        transcript.graded = GradedResult(
            problem_id=problem.id, predicted=None, correct=False, extraction_source="none"
        )
    transcript.completed = True
    transcript.finished_at = _utc_now()
    return transcript


def select_problems(problems: list, max_problems: int | None, seed: int) -> list:
    """Seeded-shuffle subsample; full file order when no limit applies."""
    if max_problems is None or max_problems >= len(problems):
        return list(problems)
    shuffled = list(problems)
    random.Random(seed).shuffle(shuffled)
    return shuffled[:max_problems]


def load_problems(config: RunConfig) -> list:
    """Resolve the dataset source: explicit path first, then the manifest."""
    if config.dataset_path:
        answer_type = None
        if config.answer_type:
            from .prompts import AnswerType

            answer_type = AnswerType(config.answer_type)
        return load_dataset(config.dataset_path, config.dataset, answer_type=answer_type)
    if config.manifest:
        return load_from_manifest(load_manifest(config.manifest), config.dataset)
    raise DupError("config needs dataset_path or manifest to locate the dataset file")


def _write_json_atomic(path: Path, payload: dict) -> None:
    tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def transcript_path(out_dir: str | Path, problem_id: str) -> Path:
    safe_id = "".join(c if c.isalnum() or c in "-_." else "_" for c in problem_id)
    return Path(out_dir) / _TRANSCRIPT_DIR / f"{safe_id}.json"


def load_transcript(out_dir: str | Path, problem_id: str) -> Transcript | None:
    path = transcript_path(out_dir, problem_id)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    try:
        transcript = Transcript.from_dict(data)
    except (KeyError, TypeError, ValueError):
        log.warning("ignoring unreadable transcript %s", path)
        return None
    if transcript.problem_id != problem_id or not transcript.completed:
        return None
    return transcript


def _persist_config(config: RunConfig, out_dir: Path) -> None:
    path = out_dir / _CONFIG_FILE
    current = config.to_dict()
    if path.exists():
        stored = json.loads(path.read_text(encoding="utf-8"))
        if stored != current:
            raise DupError(
                f"{path} holds a different run configuration; use a fresh --out-dir "
                "or resume with the stored settings"
            )
        return
    _write_json_atomic(path, current)


def stored_config(out_dir: str | Path) -> RunConfig:
    """Load the configuration persisted by a previous run (for resume)."""
    path = Path(out_dir) / _CONFIG_FILE
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DupError(f"cannot read stored config at {path}: {exc}") from exc
    return RunConfig.from_dict(data)


def build_run_gateway(config: RunConfig) -> Gateway:
    """Wire up the gateway a run configuration describes."""
    provider = ProviderConfig(
        backend=config.backend,
        base_url=config.base_url,
        mock_script=config.mock_script,
        max_concurrency=config.workers,
    )
    return build_gateway(provider, Path(config.cache_dir) if config.cache_dir else None)


def run_experiment(config: RunConfig, gateway: Gateway):
    """Run every selected problem, persist transcripts, and emit the report.

    Fully resumable: problems whose transcript file is already complete are
    skipped, so re-running with the same out_dir finishes an interrupted
    run without re-issuing their requests.
    """
    from .reporting import build_report, write_report

    config.validate()
    problems = load_problems(config)
    selected = select_problems(problems, config.max_problems, config.seed)
    out_dir = Path(config.out_dir)
    (out_dir / _TRANSCRIPT_DIR).mkdir(parents=True, exist_ok=True)
    _persist_config(config, out_dir)

    transcripts: dict[str, Transcript] = {}
    todo = []
    for problem in selected:
        existing = load_transcript(out_dir, problem.id)
        if existing is not None:
            transcripts[problem.id] = existing
        else:
            todo.append(problem)
    log.info(
        "running %d problems (%d already complete) on %s",
        len(todo),
        len(transcripts),
        config.dataset,
    )

    def _run_one(problem):
        transcript = run_problem(problem, config, gateway)
        _write_json_atomic(transcript_path(out_dir, problem.id), transcript.to_dict())
        return transcript

    if config.workers == 1 or len(todo) <= 1:
        for problem in todo:
            transcripts[problem.id] = _run_one(problem)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for problem, transcript in zip(todo, pool.map(_run_one, todo)):
                transcripts[problem.id] = transcript

    report = build_report(config, selected, transcripts)
    write_report(report, out_dir)
    return report
