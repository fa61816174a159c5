"""In-memory data model for helpfulness-voting trajectories.

A question owns an ordered list of answers and a chronological stream of
vote events. Every event can be annotated with the context a voter saw at
that instant: the answer's displayed rank, its perceived positive-vote
ratio, and its length relative to the answers coexisting at that moment.
Context reconstruction is deterministic and uses strictly earlier events
only, so replaying it is idempotent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Optional, Sequence

REL_LENGTH_CLIP = 3.0
NEUTRAL_POS_RATIO = 0.5  # ratio before an answer has received any vote


class MalformedTrajectoryError(ValueError):
    """Raised when a trajectory violates its structural invariants."""


@dataclass(frozen=True)
class Answer:
    answer_id: str
    creation_time: int
    text_length: int
    accepted: bool = False
    acceptance_time: Optional[int] = None


@dataclass(frozen=True)
class VoteContext:
    """What the voter saw right before casting the vote."""

    rank: int            # 1-based displayed rank
    pos_ratio: float     # prior positive-vote ratio, 0.5 with no priors
    rel_length: float    # centered log-length, clipped to +-REL_LENGTH_CLIP
    prior_pos: int
    prior_neg: int


@dataclass(frozen=True)
class VoteEvent:
    answer_index: int
    time_index: int      # 1-based, contiguous within the question
    sign: int            # +1 or -1
    timestamp: int
    context: Optional[VoteContext] = None


@dataclass(frozen=True)
class QuestionTrajectory:
    question_id: str
    answers: tuple[Answer, ...]
    events: tuple[VoteEvent, ...]

    def accepted_answer_index(self) -> Optional[int]:
        for idx, ans in enumerate(self.answers):
            if ans.accepted:
                return idx
        return None


def _validate(traj: QuestionTrajectory) -> None:
    n_accepted = sum(1 for a in traj.answers if a.accepted)
    if n_accepted > 1:
        raise MalformedTrajectoryError(
            f"{traj.question_id}: {n_accepted} accepted answers")
    for a in traj.answers:
        if a.text_length < 1:
            raise MalformedTrajectoryError(
                f"{traj.question_id}/{a.answer_id}: text_length < 1")
        if a.accepted != (a.acceptance_time is not None):
            raise MalformedTrajectoryError(
                f"{traj.question_id}/{a.answer_id}: acceptance_time must be "
                "present iff accepted")
    times = [a.creation_time for a in traj.answers]
    if times != sorted(times):
        raise MalformedTrajectoryError(
            f"{traj.question_id}: answers not ordered by creation_time")
    prev_ts = None
    for pos, ev in enumerate(traj.events):
        if ev.sign not in (+1, -1):
            raise MalformedTrajectoryError(
                f"{traj.question_id}: event sign {ev.sign} not in {{+1,-1}}")
        if ev.time_index != pos + 1:
            raise MalformedTrajectoryError(
                f"{traj.question_id}: time_index not contiguous from 1")
        if prev_ts is not None and ev.timestamp < prev_ts:
            raise MalformedTrajectoryError(
                f"{traj.question_id}: events not ordered by timestamp")
        prev_ts = ev.timestamp
        if not 0 <= ev.answer_index < len(traj.answers):
            raise MalformedTrajectoryError(
                f"{traj.question_id}: answer_index {ev.answer_index} out of "
                "range")
        if traj.answers[ev.answer_index].creation_time >= ev.timestamp:
            raise MalformedTrajectoryError(
                f"{traj.question_id}: event at t={ev.timestamp} references "
                f"answer created at t="
                f"{traj.answers[ev.answer_index].creation_time}")


def displayed_order(traj: QuestionTrajectory, diffs: Sequence[int],
                    timestamp: int, voted_index: Optional[int] = None
                    ) -> list[int]:
    """Answer indices in display order at `timestamp`.

    Ordering is by vote difference descending, earlier creation first on
    ties. The accepted answer stops occupying a rank after its acceptance
    time, except when it is itself the answer being voted on.
    """
    existing = [i for i, a in enumerate(traj.answers)
                if a.creation_time < timestamp]
    acc = traj.accepted_answer_index()
    if (acc is not None and acc != voted_index
            and traj.answers[acc].acceptance_time is not None
            and timestamp > traj.answers[acc].acceptance_time):
        existing = [i for i in existing if i != acc]
    return sorted(existing,
                  key=lambda i: (-diffs[i], traj.answers[i].creation_time))


def reconstruct_contexts(traj: QuestionTrajectory) -> QuestionTrajectory:
    """Return a copy whose events carry the context each voter saw.

    Contexts are computed from strictly earlier events only, so running
    this twice yields bit-identical results.
    """
    _validate(traj)
    pos = [0] * len(traj.answers)
    neg = [0] * len(traj.answers)
    log_len = [math.log(a.text_length) for a in traj.answers]
    new_events = []
    for ev in traj.events:
        j = ev.answer_index
        n_prior = pos[j] + neg[j]
        ratio = pos[j] / n_prior if n_prior else NEUTRAL_POS_RATIO

        diffs = [p - n for p, n in zip(pos, neg)]
        order = displayed_order(traj, diffs, ev.timestamp, voted_index=j)
        rank = order.index(j) + 1

        existing = [i for i, a in enumerate(traj.answers)
                    if a.creation_time < ev.timestamp]
        mean_ll = sum(log_len[i] for i in existing) / len(existing)
        rel_len = max(-REL_LENGTH_CLIP,
                      min(REL_LENGTH_CLIP, log_len[j] - mean_ll))

        ctx = VoteContext(rank=rank, pos_ratio=ratio, rel_length=rel_len,
                          prior_pos=pos[j], prior_neg=neg[j])
        new_events.append(replace(ev, context=ctx))
        if ev.sign > 0:
            pos[j] += 1
        else:
            neg[j] += 1
    return replace(traj, events=tuple(new_events))


def drop_first_votes(traj: QuestionTrajectory) -> QuestionTrajectory:
    """Drop each answer's chronologically first vote.

    The surviving events keep the contexts they were given against the
    full history; only the event list shrinks.
    """
    seen: set[int] = set()
    kept = []
    for ev in traj.events:
        if ev.answer_index in seen:
            kept.append(ev)
        else:
            seen.add(ev.answer_index)
    return replace(traj, events=tuple(kept))


def final_vote_diffs(traj: QuestionTrajectory) -> dict[str, int]:
    """Final (positive - negative) vote count per answer_id."""
    diffs = [0] * len(traj.answers)
    for ev in traj.events:
        diffs[ev.answer_index] += ev.sign
    return {a.answer_id: d for a, d in zip(traj.answers, diffs)}


def final_rel_lengths(traj: QuestionTrajectory) -> dict[str, float]:
    """End-of-trajectory relative length per answer_id.

    Centered log-length over all answers of the question, clipped the same
    way as event contexts.
    """
    log_len = [math.log(a.text_length) for a in traj.answers]
    mean_ll = sum(log_len) / len(log_len)
    return {a.answer_id: max(-REL_LENGTH_CLIP,
                             min(REL_LENGTH_CLIP, ll - mean_ll))
            for a, ll in zip(traj.answers, log_len)}


# --- JSONL wire format -------------------------------------------------
#
# One question per line:
#   {"question_id": ..., "answers": [{"answer_id", "creation_time",
#    "text_length", "accepted", "acceptance_time"}, ...],
#    "events": [{"answer_index", "timestamp", "sign"}, ...]}
# Contexts and time indices are derived state and never serialized.


def trajectory_to_json_line(traj: QuestionTrajectory) -> str:
    obj = {
        "question_id": traj.question_id,
        "answers": [
            {
                "answer_id": a.answer_id,
                "creation_time": a.creation_time,
                "text_length": a.text_length,
                "accepted": a.accepted,
                "acceptance_time": a.acceptance_time,
            }
            for a in traj.answers
        ],
        "events": [
            {
                "answer_index": ev.answer_index,
                "timestamp": ev.timestamp,
                "sign": ev.sign,
            }
            for ev in traj.events
        ],
    }
    return json.dumps(obj, separators=(",", ":"))


def trajectory_from_json(obj: dict) -> QuestionTrajectory:
    answers = tuple(
        Answer(
            answer_id=a["answer_id"],
            creation_time=a["creation_time"],
            text_length=a["text_length"],
            accepted=a["accepted"],
            acceptance_time=a.get("acceptance_time"),
        )
        for a in obj["answers"]
    )
    events = tuple(
        VoteEvent(
            answer_index=e["answer_index"],
            time_index=k + 1,
            sign=e["sign"],
            timestamp=e["timestamp"],
        )
        for k, e in enumerate(obj["events"])
    )
    return QuestionTrajectory(question_id=obj["question_id"],
                              answers=answers, events=events)


def write_trajectories(trajs: Iterable[QuestionTrajectory], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajs:
            fh.write(trajectory_to_json_line(traj))
            fh.write("\n")


def iter_trajectories(path) -> Iterator[QuestionTrajectory]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield trajectory_from_json(json.loads(line))


def read_trajectories(path) -> list[QuestionTrajectory]:
    return list(iter_trajectories(path))
