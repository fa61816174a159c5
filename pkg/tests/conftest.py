"""Shared test helpers: random valid trajectories and brute-force oracles."""

from pathlib import Path

import numpy as np
import pytest

from cva.trajectory import Answer, QuestionTrajectory, VoteEvent

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_DIR = DATA_DIR / "golden"


def random_trajectory(rng: np.random.Generator, question_id="q",
                      max_answers=5, max_events=30,
                      allow_accepted=True) -> QuestionTrajectory:
    """A structurally valid random trajectory for oracle tests."""
    n_answers = int(rng.integers(1, max_answers + 1))
    creations = np.sort(rng.integers(0, 40, size=n_answers))
    accepted_idx = None
    acceptance_time = None
    answers = []
    n_events = int(rng.integers(1, max_events + 1))
    last_t = 40 + 3 * n_events + 5
    if allow_accepted and n_answers > 1 and rng.random() < 0.5:
        accepted_idx = int(rng.integers(0, n_answers))
        acceptance_time = int(rng.integers(45, last_t))
    for i, c in enumerate(creations):
        answers.append(Answer(
            answer_id=f"a{i}",
            creation_time=int(c),
            text_length=int(rng.integers(1, 5000)),
            accepted=(i == accepted_idx),
            acceptance_time=acceptance_time if i == accepted_idx else None))

    events = []
    t = 41  # all answers exist before the first event
    for k in range(n_events):
        t += int(rng.integers(1, 4))
        j = int(rng.integers(0, n_answers))
        sign = +1 if rng.random() < 0.6 else -1
        events.append(VoteEvent(answer_index=j, time_index=k + 1,
                                sign=sign, timestamp=t))
    return QuestionTrajectory(question_id=question_id,
                              answers=tuple(answers), events=tuple(events))


def oracle_rank(traj: QuestionTrajectory, event_pos: int) -> int:
    """Rank of the voted answer computed by a from-scratch re-sort.

    Replays all earlier events to rebuild the vote state, then sorts the
    answers existing at that instant. Independent O(E*J) path used to
    cross-check the incremental reconstruction.
    """
    ev = traj.events[event_pos]
    diffs = [0] * len(traj.answers)
    for earlier in traj.events[:event_pos]:
        diffs[earlier.answer_index] += earlier.sign
    pool = [i for i, a in enumerate(traj.answers)
            if a.creation_time < ev.timestamp]
    acc = traj.accepted_answer_index()
    if (acc is not None and acc != ev.answer_index
            and ev.timestamp > traj.answers[acc].acceptance_time):
        pool = [i for i in pool if i != acc]
    ordered = sorted(pool, key=lambda i: (-diffs[i],
                                          traj.answers[i].creation_time))
    return ordered.index(ev.answer_index) + 1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
