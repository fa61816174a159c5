"""StackExchange data-dump ingestion.

Parses the Posts, Votes and PostHistory XML files (one <row .../> element
per line) into question trajectories and applies the preprocessing
filters: ever-closed-or-locked questions are dropped, questions need a
minimum number of non-accepted answers, votes cast on an accepted answer
after its acceptance are removed, and a community with too few surviving
questions is rejected outright.

Dump vote timestamps have day granularity, so same-day votes are ordered
by their monotonically assigned vote ids and each vote receives a
synthetic timestamp strictly after both its predecessor and the voted
answer's creation; trajectory invariants then hold exactly.
"""

from __future__ import annotations

import csv
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator, Optional, Union

from .trajectory import Answer, QuestionTrajectory, VoteEvent

log = logging.getLogger(__name__)

VOTE_ACCEPTED = 1
VOTE_UP = 2
VOTE_DOWN = 3

HISTORY_CLOSED = 10
HISTORY_LOCKED = 14

LABEL_SOURCES = ("comment_sentiment", "llm_helpfulness", "synthetic_truth")


@dataclass(frozen=True)
class RawVoteRow:
    vote_id: int
    post_id: int
    vote_type: int
    creation_date: int  # epoch seconds at day granularity


@dataclass(frozen=True)
class QualityLabel:
    answer_id: str
    score: float
    source: str


@dataclass(frozen=True)
class ParsedQuestion:
    trajectory: QuestionTrajectory
    closed_or_locked: bool


class RejectLog:
    """Collects skipped input rows as (line number, reason) pairs."""

    def __init__(self):
        self.entries: list[tuple[int, str]] = []

    def add(self, lineno: int, reason: str) -> None:
        self.entries.append((lineno, reason))

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for lineno, reason in self.entries:
                fh.write(f"{lineno}\t{reason}\n")

    def __len__(self) -> int:
        return len(self.entries)


def _parse_date(text: str) -> int:
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _iter_rows(path, rejects: RejectLog, kind: str
               ) -> Iterator[tuple[int, dict[str, str]]]:
    """Yield (line number, attributes) for each <row/> line of a dump file.

    Anything that is not a parseable row element goes to the reject log;
    wrapper lines (declaration, opening/closing list tags) are skipped
    silently.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if "<row" not in stripped:
                continue
            try:
                elem = ET.fromstring(stripped)
            except ET.ParseError as exc:
                rejects.add(lineno, f"{kind}: malformed XML row ({exc})")
                continue
            if elem.tag != "row":
                rejects.add(lineno, f"{kind}: unexpected element "
                                    f"<{elem.tag}>")
                continue
            yield lineno, elem.attrib


def _require(attrs: dict[str, str], names: Iterable[str]) -> list[str]:
    return [n for n in names if n not in attrs]


@dataclass
class _QuestionRecord:
    question_id: int
    accepted_answer_id: Optional[int]
    closed: bool


@dataclass
class _AnswerRecord:
    answer_id: int
    parent_id: int
    creation_time: int
    text_length: int
    acceptance_time: Optional[int] = None
    votes: list[RawVoteRow] = field(default_factory=list)


def parse_dump(posts_path, votes_path, posthistory_path,
               rejects: Optional[RejectLog] = None
               ) -> list[ParsedQuestion]:
    """Parse a community dump into per-question trajectories.

    Questions are emitted in ascending post-id order with answers in
    creation order and vote events ordered by (creation date, vote id).
    """
    if rejects is None:
        rejects = RejectLog()

    questions: dict[int, _QuestionRecord] = {}
    answers: dict[int, _AnswerRecord] = {}
    for lineno, attrs in _iter_rows(posts_path, rejects, "posts"):
        missing = _require(attrs, ("Id", "PostTypeId", "CreationDate"))
        if missing:
            rejects.add(lineno, f"posts: missing {','.join(missing)}")
            continue
        post_type = attrs["PostTypeId"]
        if post_type == "1":
            accepted = attrs.get("AcceptedAnswerId")
            questions[int(attrs["Id"])] = _QuestionRecord(
                question_id=int(attrs["Id"]),
                accepted_answer_id=int(accepted) if accepted else None,
                closed="ClosedDate" in attrs)
        elif post_type == "2":
            missing = _require(attrs, ("ParentId", "Body"))
            if missing:
                rejects.add(lineno, f"posts: missing {','.join(missing)}")
                continue
            if len(attrs["Body"]) < 1:
                rejects.add(lineno, "posts: empty Body")
                continue
            answers[int(attrs["Id"])] = _AnswerRecord(
                answer_id=int(attrs["Id"]),
                parent_id=int(attrs["ParentId"]),
                creation_time=_parse_date(attrs["CreationDate"]),
                text_length=len(attrs["Body"]))
        # other post types (wiki, tag excerpts, ...) are not ingested

    for lineno, attrs in _iter_rows(votes_path, rejects, "votes"):
        missing = _require(attrs, ("Id", "PostId", "VoteTypeId",
                                   "CreationDate"))
        if missing:
            rejects.add(lineno, f"votes: missing {','.join(missing)}")
            continue
        vote_type = int(attrs["VoteTypeId"])
        if vote_type not in (VOTE_ACCEPTED, VOTE_UP, VOTE_DOWN):
            continue
        row = RawVoteRow(vote_id=int(attrs["Id"]),
                         post_id=int(attrs["PostId"]),
                         vote_type=vote_type,
                         creation_date=_parse_date(attrs["CreationDate"]))
        record = answers.get(row.post_id)
        if record is None:
            continue  # vote on a question or an unknown post
        if row.vote_type == VOTE_ACCEPTED:
            record.acceptance_time = row.creation_date
        else:
            record.votes.append(row)

    closed_by_history: set[int] = set()
    for lineno, attrs in _iter_rows(posthistory_path, rejects,
                                    "posthistory"):
        missing = _require(attrs, ("Id", "PostHistoryTypeId", "PostId"))
        if missing:
            rejects.add(lineno, f"posthistory: missing "
                                f"{','.join(missing)}")
            continue
        if int(attrs["PostHistoryTypeId"]) in (HISTORY_CLOSED,
                                               HISTORY_LOCKED):
            closed_by_history.add(int(attrs["PostId"]))

    by_question: dict[int, list[_AnswerRecord]] = {}
    for record in answers.values():
        if record.parent_id in questions:
            by_question.setdefault(record.parent_id, []).append(record)

    out = []
    for qid in sorted(questions):
        qrec = questions[qid]
        arecs = sorted(by_question.get(qid, []),
                       key=lambda r: (r.creation_time, r.answer_id))
        traj = _assemble(qrec, arecs)
        closed = qrec.closed or qid in closed_by_history
        out.append(ParsedQuestion(trajectory=traj, closed_or_locked=closed))
    return out


def _assemble(qrec: _QuestionRecord,
              arecs: list[_AnswerRecord]) -> QuestionTrajectory:
    index_of = {rec.answer_id: i for i, rec in enumerate(arecs)}
    answer_objs = tuple(
        Answer(answer_id=str(rec.answer_id),
               creation_time=rec.creation_time,
               text_length=rec.text_length,
               accepted=(qrec.accepted_answer_id == rec.answer_id
                         and rec.acceptance_time is not None),
               acceptance_time=rec.acceptance_time
               if qrec.accepted_answer_id == rec.answer_id else None)
        for rec in arecs
    )
    # flat (creation_date, vote_id) ordering across the question's answers
    all_votes = sorted(((v, rec.answer_id) for rec in arecs
                        for v in rec.votes),
                       key=lambda pair: (pair[0].creation_date,
                                         pair[0].vote_id))
    events = []
    prev_t = None
    for k, (vote, aid) in enumerate(all_votes, start=1):
        creation = arecs[index_of[aid]].creation_time
        t = max(vote.creation_date, creation + 1)
        if prev_t is not None:
            t = max(t, prev_t + 1)
        prev_t = t
        events.append(VoteEvent(
            answer_index=index_of[aid], time_index=k,
            sign=+1 if vote.vote_type == VOTE_UP else -1, timestamp=t))
    return QuestionTrajectory(question_id=str(qrec.question_id),
                              answers=answer_objs, events=tuple(events))


@dataclass
class FilterReport:
    trajectories: list[QuestionTrajectory]
    community_ok: bool
    min_questions: int
    counts: dict[str, int]


def apply_filters(parsed: Iterable[Union[ParsedQuestion,
                                         QuestionTrajectory]],
                  min_answers: int = 5,
                  min_questions: int = 100) -> FilterReport:
    """Apply the preprocessing filters and report what fired.

    Bare trajectories are treated as never closed or locked. The report's
    community_ok flag turns false when fewer than min_questions questions
    survive; callers must not treat an empty result as success.
    """
    survivors = []
    counts = {"input": 0, "dropped_closed_or_locked": 0,
              "dropped_min_answers": 0, "votes_dropped_post_acceptance": 0,
              "surviving": 0}
    for item in parsed:
        counts["input"] += 1
        if isinstance(item, ParsedQuestion):
            traj, closed = item.trajectory, item.closed_or_locked
        else:
            traj, closed = item, False
        if closed:
            counts["dropped_closed_or_locked"] += 1
            continue
        non_accepted = sum(1 for a in traj.answers if not a.accepted)
        if non_accepted < min_answers:
            counts["dropped_min_answers"] += 1
            continue
        traj, n_dropped = _drop_post_acceptance_votes(traj)
        counts["votes_dropped_post_acceptance"] += n_dropped
        survivors.append(traj)
    counts["surviving"] = len(survivors)
    ok = len(survivors) >= min_questions
    if not ok:
        log.warning("community rejected: %d surviving questions < %d",
                    len(survivors), min_questions)
    return FilterReport(trajectories=survivors, community_ok=ok,
                        min_questions=min_questions, counts=counts)


def _drop_post_acceptance_votes(traj: QuestionTrajectory
                                ) -> tuple[QuestionTrajectory, int]:
    acc = traj.accepted_answer_index()
    if acc is None:
        return traj, 0
    cutoff = traj.answers[acc].acceptance_time
    kept = [ev for ev in traj.events
            if not (ev.answer_index == acc and ev.timestamp > cutoff)]
    n_dropped = len(traj.events) - len(kept)
    if n_dropped == 0:
        return traj, 0
    events = tuple(VoteEvent(answer_index=ev.answer_index, time_index=k,
                             sign=ev.sign, timestamp=ev.timestamp,
                             context=None)
                   for k, ev in enumerate(kept, start=1))
    return QuestionTrajectory(question_id=traj.question_id,
                              answers=traj.answers, events=events), n_dropped


def load_labels(path) -> dict[str, QualityLabel]:
    """Read the answer-quality label CSV (answer_id,score,source).

    Out-of-range scores and unknown sources are rejected row by row;
    duplicate answer ids keep the last occurrence.
    """
    labels: dict[str, QualityLabel] = {}
    n_duplicates = 0
    n_rejected = 0
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["answer_id", "score", "source"]
        if reader.fieldnames != expected:
            raise ValueError(f"label CSV header must be "
                             f"{','.join(expected)}, got "
                             f"{reader.fieldnames}")
        for row in reader:
            try:
                score = float(row["score"])
            except (TypeError, ValueError):
                n_rejected += 1
                log.warning("label row rejected (bad score): %r", row)
                continue
            if not -1.0 <= score <= 1.0:
                n_rejected += 1
                log.warning("label row rejected (score out of [-1,1]): %r",
                            row)
                continue
            if row["source"] not in LABEL_SOURCES:
                n_rejected += 1
                log.warning("label row rejected (unknown source): %r", row)
                continue
            if row["answer_id"] in labels:
                n_duplicates += 1
            labels[row["answer_id"]] = QualityLabel(
                answer_id=row["answer_id"], score=score,
                source=row["source"])
    if n_duplicates:
        log.warning("%d duplicate label rows (last occurrence wins)",
                    n_duplicates)
    if n_rejected:
        log.warning("%d label rows rejected", n_rejected)
    return labels
