"""Semi-synthetic trajectory generation with known ground-truth quality.

Events are produced one at a time: a question is drawn from a weight
distribution, a Chinese-restaurant gate decides between writing a new
answer and voting on an existing one, voters pick answers with
probability inverse to the displayed rank, and vote signs follow the
forward voting model under chosen generating coefficients. All draws
come from a single seeded generator, so identical configs reproduce
byte-identical data.

Also houses the hand-pinned toy scenarios used to demonstrate position
and herding debiasing on six-vote examples.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import expit

from .configio import parse_key_values
from .trajectory import (Answer, QuestionTrajectory, VoteContext, VoteEvent,
                         NEUTRAL_POS_RATIO, REL_LENGTH_CLIP,
                         read_trajectories)

log = logging.getLogger(__name__)

ALPHA_LO = 1e-6
ALPHA_HI = 1e6


@dataclass(frozen=True)
class SimConfig:
    n_questions: int
    n_events: int
    crp_alpha: Union[float, str] = 5.0   # positive float or "auto"
    quality_mean: float = 0.0
    quality_sd: float = 1.0
    true_lambda: float = 0.0
    true_beta: float = 0.0
    true_nu: float = 0.0
    length_source: str = "lognormal:6.0,1.0"
    question_weight_source: str = "uniform"
    seed: int = 0

    def validate(self) -> None:
        if self.n_questions < 1:
            raise ValueError("n_questions must be >= 1")
        if self.n_events < self.n_questions:
            raise ValueError("n_events must be >= n_questions")
        if self.quality_sd <= 0:
            raise ValueError("quality_sd must be > 0")
        if isinstance(self.crp_alpha, str):
            if self.crp_alpha != "auto":
                raise ValueError(f"crp_alpha must be a positive number or "
                                 f"'auto', got {self.crp_alpha!r}")
        elif self.crp_alpha <= 0:
            raise ValueError("crp_alpha must be > 0")
        _parse_source(self.length_source, ("lognormal", "empirical"))
        _parse_source(self.question_weight_source,
                      ("uniform", "zipf", "empirical"))


_SIM_CONFIG_TYPES = {
    "n_questions": int,
    "n_events": int,
    "crp_alpha": "alpha",
    "quality_mean": float,
    "quality_sd": float,
    "true_lambda": float,
    "true_beta": float,
    "true_nu": float,
    "length_source": str,
    "question_weight_source": str,
    "seed": int,
}


def parse_sim_config(path) -> SimConfig:
    raw = parse_key_values(path)
    kwargs = {}
    for key, value in raw.items():
        if key not in _SIM_CONFIG_TYPES:
            raise ValueError(f"unknown sim config key: {key}")
        caster = _SIM_CONFIG_TYPES[key]
        if caster == "alpha":
            kwargs[key] = value if value == "auto" else float(value)
        else:
            kwargs[key] = caster(value)
    config = SimConfig(**kwargs)
    config.validate()
    return config


def _parse_source(source: str, allowed: tuple[str, ...]
                  ) -> tuple[str, str]:
    kind, _, arg = source.partition(":")
    if kind not in allowed:
        raise ValueError(f"unknown source {source!r}, expected one of "
                         f"{allowed}")
    if kind in ("lognormal", "zipf", "empirical") and not arg:
        raise ValueError(f"source {kind!r} needs an argument: "
                         f"{source!r}")
    return kind, arg


def crp_new_answer(rng: np.random.Generator, n_prior: int,
                   alpha: float) -> bool:
    """Open-a-new-answer gate: True with probability alpha/(n_prior+alpha)."""
    return rng.random() < alpha / (n_prior + alpha)


def pick_inverse_rank(rng: np.random.Generator, n_ranks: int) -> int:
    """Pick a display position 0..n_ranks-1 with probability ~ 1/(pos+1)."""
    weights = 1.0 / (1.0 + np.arange(n_ranks))
    return int(rng.choice(n_ranks, p=weights / weights.sum()))


class _QuestionState:
    def __init__(self, question_id: str):
        self.question_id = question_id
        self.answers: list[Answer] = []
        self.true_q: list[float] = []
        self.pos: list[int] = []
        self.neg: list[int] = []
        self.events: list[VoteEvent] = []
        self.n_crp_events = 0  # answers written + votes cast

    def display_order(self) -> list[int]:
        diffs = [p - n for p, n in zip(self.pos, self.neg)]
        return sorted(range(len(self.answers)),
                      key=lambda i: (-diffs[i],
                                     self.answers[i].creation_time))

    def rel_length(self, j: int) -> float:
        logs = [math.log(a.text_length) for a in self.answers]
        rel = logs[j] - sum(logs) / len(logs)
        return max(-REL_LENGTH_CLIP, min(REL_LENGTH_CLIP, rel))


def _length_sampler(source: str, rng: np.random.Generator):
    kind, arg = _parse_source(source, ("lognormal", "empirical"))
    if kind == "lognormal":
        mu, sigma = (float(x) for x in arg.split(","))
        return lambda: max(1, round(rng.lognormal(mu, sigma)))
    pool = np.asarray([a.text_length for t in read_trajectories(arg)
                       for a in t.answers], dtype=int)
    if pool.size == 0:
        raise ValueError(f"no answers found in {arg}")
    return lambda: int(pool[rng.integers(pool.size)])


def _question_weights(source: str, n_questions: int,
                      rng: np.random.Generator) -> np.ndarray:
    kind, arg = _parse_source(source, ("uniform", "zipf", "empirical"))
    if kind == "uniform":
        weights = np.ones(n_questions)
    elif kind == "zipf":
        s = float(arg)
        weights = 1.0 / np.arange(1, n_questions + 1) ** s
    else:
        counts = np.asarray([len(t.answers) + len(t.events)
                             for t in read_trajectories(arg)], dtype=float)
        if counts.size == 0:
            raise ValueError(f"no questions found in {arg}")
        if counts.size != n_questions:
            counts = counts[rng.integers(counts.size, size=n_questions)]
        weights = counts
    return weights / weights.sum()


def _resolve_alpha(config: SimConfig) -> float:
    if config.crp_alpha != "auto":
        return float(config.crp_alpha)
    for source in (config.question_weight_source, config.length_source):
        kind, arg = source.partition(":")[::2]
        if kind == "empirical":
            return estimate_crp_alpha(read_trajectories(arg))
    raise ValueError("crp_alpha='auto' needs an empirical data source")


def generate(config: SimConfig
             ) -> tuple[list[QuestionTrajectory], dict[str, float]]:
    """Generate trajectories plus the answer_id -> true quality map.

    Contexts are recorded while generating and coincide with a context
    reconstruction replay. Questions the weight distribution never picks
    are omitted from the output.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    alpha = _resolve_alpha(config)
    sample_length = _length_sampler(config.length_source, rng)
    weights = _question_weights(config.question_weight_source,
                                config.n_questions, rng)

    states = [_QuestionState(f"q{i:04d}") for i in range(config.n_questions)]
    truth: dict[str, float] = {}

    for step in range(1, config.n_events + 1):
        state = states[int(rng.choice(config.n_questions, p=weights))]
        write_answer = (state.n_crp_events == 0
                        or crp_new_answer(rng, state.n_crp_events, alpha))
        if write_answer:
            aid = f"{state.question_id}-a{len(state.answers)}"
            answer = Answer(answer_id=aid, creation_time=step,
                            text_length=sample_length())
            state.answers.append(answer)
            state.true_q.append(float(rng.normal(config.quality_mean,
                                                 config.quality_sd)))
            state.pos.append(0)
            state.neg.append(0)
            truth[aid] = state.true_q[-1]
        else:
            order = state.display_order()
            j = order[pick_inverse_rank(rng, len(order))]
            rank = order.index(j) + 1
            n_prior = state.pos[j] + state.neg[j]
            ratio = state.pos[j] / n_prior if n_prior else NEUTRAL_POS_RATIO
            rel_len = state.rel_length(j)
            x = (state.true_q[j] + config.true_lambda * ratio
                 + config.true_nu * rel_len
                 + config.true_beta / (1.0 + rank))
            positive = rng.random() < expit(x)
            ctx = VoteContext(rank=rank, pos_ratio=ratio, rel_length=rel_len,
                              prior_pos=state.pos[j], prior_neg=state.neg[j])
            state.events.append(VoteEvent(
                answer_index=j, time_index=len(state.events) + 1,
                sign=+1 if positive else -1, timestamp=step, context=ctx))
            if positive:
                state.pos[j] += 1
            else:
                state.neg[j] += 1
        state.n_crp_events += 1

    trajectories = [
        QuestionTrajectory(question_id=s.question_id,
                           answers=tuple(s.answers), events=tuple(s.events))
        for s in states if s.answers
    ]
    return trajectories, truth


def scale_truth(truth: dict[str, float]) -> dict[str, float]:
    """Min-max scale raw qualities to [-1, 1] for label compatibility."""
    if not truth:
        return {}
    values = np.asarray(list(truth.values()))
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return {aid: 0.0 for aid in truth}
    return {aid: 2.0 * (v - lo) / (hi - lo) - 1.0
            for aid, v in truth.items()}


def estimate_crp_alpha(trajectories: Sequence[QuestionTrajectory]) -> float:
    """Maximum-likelihood concentration from answers-vs-events counts.

    Solves sum_q J_q = sum_q sum_{k=0}^{n_q-1} alpha/(alpha+k) by
    bisection; J_q counts answers, n_q counts answers plus votes.
    """
    if not trajectories:
        raise ValueError("need at least one trajectory")
    n_answers = [len(t.answers) for t in trajectories]
    n_events = [len(t.answers) + len(t.events) for t in trajectories]
    if all(n == 1 for n in n_events):
        raise ValueError("alpha is unidentifiable: every question has a "
                         "single event")
    total_answers = float(sum(n_answers))

    def expected_answers(alpha: float) -> float:
        return sum(float(np.sum(alpha / (alpha + np.arange(n))))
                   for n in n_events)

    lo, hi = ALPHA_LO, ALPHA_HI
    if expected_answers(hi) <= total_answers:
        log.warning("alpha estimate hit the upper bisection bound %g", hi)
        return hi
    if expected_answers(lo) >= total_answers:
        log.warning("alpha estimate hit the lower bisection bound %g", lo)
        return lo
    while (hi - lo) > 1e-9 * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if expected_answers(mid) < total_answers:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- pinned toy scenarios ----------------------------------------------


def _pinned_events(votes: Sequence[tuple[int, int]], ranks: Sequence[int]
                   ) -> tuple[VoteEvent, ...]:
    """Build events with explicit contexts: votes is [(answer_index, sign)],
    ranks pins the displayed rank per answer index. Lengths play no role
    in the toys, so rel_length is 0 throughout."""
    pos: dict[int, int] = {}
    neg: dict[int, int] = {}
    events = []
    for t, (j, sign) in enumerate(votes, start=1):
        n_prior = pos.get(j, 0) + neg.get(j, 0)
        ratio = pos.get(j, 0) / n_prior if n_prior else NEUTRAL_POS_RATIO
        ctx = VoteContext(rank=ranks[j], pos_ratio=ratio, rel_length=0.0,
                          prior_pos=pos.get(j, 0), prior_neg=neg.get(j, 0))
        events.append(VoteEvent(answer_index=j, time_index=t, sign=sign,
                                timestamp=10 * t, context=ctx))
        if sign > 0:
            pos[j] = pos.get(j, 0) + 1
        else:
            neg[j] = neg.get(j, 0) + 1
    return tuple(events)


def toy_scenario(name: str) -> list[QuestionTrajectory]:
    """Six-vote demonstration scenarios with hand-pinned ranks.

    's1a': two answers, A above B, three positive votes each (A first).
    's1b': the negative mirror of s1a.
    's2':  A and B as separate single-answer questions pinned at rank 1;
           A gets +,+,+,-,-,-  and B alternates +,-,+,-,+,-.
    """
    two = (Answer("A", creation_time=1, text_length=100),
           Answer("B", creation_time=2, text_length=100))
    if name == "s1a":
        votes = [(0, +1)] * 3 + [(1, +1)] * 3
        return [QuestionTrajectory("toy1a", two,
                                   _pinned_events(votes, ranks=(1, 2)))]
    if name == "s1b":
        votes = [(1, -1)] * 3 + [(0, -1)] * 3
        return [QuestionTrajectory("toy1b", two,
                                   _pinned_events(votes, ranks=(1, 2)))]
    if name == "s2":
        a_events = _pinned_events(
            [(0, s) for s in (+1, +1, +1, -1, -1, -1)], ranks=(1,))
        b_events = _pinned_events(
            [(0, s) for s in (+1, -1, +1, -1, +1, -1)], ranks=(1,))
        return [
            QuestionTrajectory(
                "toy2a", (Answer("A", creation_time=1, text_length=100),),
                a_events),
            QuestionTrajectory(
                "toy2b", (Answer("B", creation_time=1, text_length=100),),
                b_events),
        ]
    raise ValueError(f"unknown toy scenario {name!r} "
                     "(expected s1a, s1b or s2)")
