"""Self-consistency decoding: sample N reasoning paths, majority-vote the answer."""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import InvalidInputError
from .grading import NormalizedAnswer, grade

__all__ = ["Vote", "VoteSet", "aggregate", "run_sc"]


@dataclass(frozen=True)
class Vote:
    """One sampled reasoning path's extracted answer (None = extraction failed)."""

    sample_index: int
    answer: NormalizedAnswer | None

    def to_dict(self) -> dict:
        return {
            "sample_index": self.sample_index,
            "answer": self.answer.to_dict() if self.answer else None,
        }


@dataclass(frozen=True)
class VoteSet:
    """Votes in generation order, sample indices 0..N-1 and distinct."""

    votes: tuple[Vote, ...]

    def __post_init__(self):
        indices = [vote.sample_index for vote in self.votes]
        if sorted(indices) != list(range(len(indices))):
            raise InvalidInputError(f"sample indices must be a permutation of 0..N-1, got {indices}")

    def __len__(self) -> int:
        return len(self.votes)

    def __iter__(self):
        return iter(self.votes)


def aggregate(votes: VoteSet) -> NormalizedAnswer | None:
    """Pick the modal answer; ties break to the earliest first occurrence.

    Failed extractions are excluded from counting (a failure is absence of
    an answer, not an answer). Answer equality follows grading semantics,
    including the numeric tolerance, so counting groups votes rather than
    hashing them. Returns None when every vote failed.
    """
    if len(votes) == 0:
        raise InvalidInputError("cannot aggregate an empty vote set")
    # Groups in first-occurrence order: (representative, count).
    groups: list[tuple[NormalizedAnswer, int]] = []
    for vote in votes:
        if vote.answer is None:
            continue
        for i, (representative, count) in enumerate(groups):
            if grade(vote.answer, representative):
                groups[i] = (representative, count + 1)
                break
        else:
            groups.append((vote.answer, 1))
    if not groups:
        return None
    best = max(range(len(groups)), key=lambda i: groups[i][1])
    # max() already keeps the earliest index on ties, which is exactly the
    # first-occurrence rule because groups are created in encounter order.
    return groups[best][0]


def run_sc(problem, config, gateway):
    """Run one problem with self-consistency sampling of the answer stage.

    The core-question and information stages run once at temperature 0 and
    are shared across all samples; each sampled reasoning path goes through
    answer extraction independently. Returns (VoteSet, aggregated answer).
    """
    if config.n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    if config.n_samples > 1 and config.temperature <= 0:
        raise InvalidInputError("sampling more than one path requires temperature > 0")
    from .runner import run_problem  # deferred: runner builds on this module

    transcript = run_problem(problem, config, gateway)
    return transcript.vote_set(), transcript.predicted
