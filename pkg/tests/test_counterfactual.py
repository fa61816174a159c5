import numpy as np
import pytest
from scipy.special import expit

from cva.counterfactual import (ContextPopulation, build_population,
                                counterfactual_curve, estimate_quality,
                                fit_power_law)
from cva.model import CommunityModel
from cva.simulate import toy_scenario
from cva.trainer import FitConfig, fit
from cva.trajectory import (Answer, QuestionTrajectory, VoteEvent,
                            reconstruct_contexts)


def population(ratios, ranks, lengths=None, times=None, seed=0):
    n = len(ratios)
    return ContextPopulation(
        ratios=np.asarray(ratios, dtype=float),
        ranks=np.asarray(ranks, dtype=float),
        lengths=np.asarray(lengths if lengths is not None else [0.0] * n,
                           dtype=float),
        times=np.asarray(times if times is not None else [1] * n,
                         dtype=int),
        seed=seed)


def single_answer_traj(question_id="q", n_votes=0, length=100):
    answers = (Answer(f"{question_id}-a", creation_time=0,
                      text_length=length),)
    events = tuple(VoteEvent(0, k + 1, +1, 100 + k)
                   for k in range(n_votes))
    return QuestionTrajectory(question_id, answers, events)


class TestEstimateQuality:
    def test_degenerate_population_recovers_sigmoid(self):
        model = CommunityModel(q={"q": {"q-a": 0.8}}, nu={"q": 0.0})
        pop = population([0.5], [1])
        out = estimate_quality(model, [single_answer_traj()], pop)
        assert out[("q", "q-a")] == pytest.approx(expit(0.8), abs=1e-12)

    def test_matches_brute_force_average(self):
        trajs = toy_scenario("s1a")
        model = fit(trajs, FitConfig(use_length=False))
        pop = build_population(trajs)
        out = estimate_quality(model, trajs, pop)
        for aid in ("A", "B"):
            q = model.q["toy1a"][aid]
            expected = np.mean([
                expit(q + model.lam * r + model.beta / (1.0 + d))
                for r, d in zip(pop.ratios, pop.ranks)])
            assert out[("toy1a", aid)] == pytest.approx(float(expected),
                                                        abs=1e-12)
        assert out[("toy1a", "B")] > out[("toy1a", "A")]

    def test_symmetry_identical_parameters(self):
        model = CommunityModel(q={"q": {"a0": 0.4, "a1": 0.4}},
                               nu={"q": 0.0}, lam=1.0, beta=2.0)
        answers = (Answer("a0", 0, 100), Answer("a1", 1, 100))
        traj = QuestionTrajectory("q", answers, ())
        pop = population([0.2, 0.8, 0.5], [1, 2, 3])
        out = estimate_quality(model, [traj], pop)
        assert out[("q", "a0")] == out[("q", "a1")]

    def test_population_permutation_invariance(self):
        model = CommunityModel(q={"q": {"q-a": 0.3}}, nu={"q": 0.5},
                               lam=0.7, beta=1.1)
        traj = single_answer_traj()
        ratios = [0.1, 0.9, 0.4, 0.6, 0.5]
        ranks = [1, 2, 3, 4, 5]
        fwd = estimate_quality(model, [traj],
                               population(ratios, ranks))[("q", "q-a")]
        rev = estimate_quality(model, [traj],
                               population(ratios[::-1],
                                          ranks[::-1]))[("q", "q-a")]
        assert fwd == pytest.approx(rev, abs=1e-12)

    def test_monotone_in_quality(self):
        pop = population([0.2, 0.7], [1, 4])
        traj = single_answer_traj()
        values = []
        for q in np.linspace(-2, 2, 9):
            model = CommunityModel(q={"q": {"q-a": float(q)}},
                                   nu={"q": 0.0}, lam=1.0, beta=1.0)
            values.append(estimate_quality(model, [traj],
                                           pop)[("q", "q-a")])
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_within_question_order_matches_raw_quality(self):
        # equal lengths => shared length term => Q_hat order follows q
        model = CommunityModel(
            q={"q": {"a0": -0.5, "a1": 0.2, "a2": 1.4}}, nu={"q": 0.8},
            lam=1.2, beta=2.0)
        answers = tuple(Answer(f"a{i}", i, 100) for i in range(3))
        traj = QuestionTrajectory("q", answers, ())
        pop = population([0.1, 0.5, 0.9], [1, 2, 6])
        out = estimate_quality(model, [traj], pop)
        ordered = sorted(out, key=out.get)
        assert ordered == [("q", "a0"), ("q", "a1"), ("q", "a2")]

    def test_unmodeled_answer_skipped(self, caplog):
        model = CommunityModel(q={"q": {"q-a": 0.0}}, nu={"q": 0.0})
        other = single_answer_traj(question_id="other")
        out = estimate_quality(model, [other], population([0.5], [1]))
        assert out == {}

    def test_per_time_sum_mode(self):
        model = CommunityModel(q={"q": {"q-a": 0.2}}, nu={"q": 0.0},
                               lam=1.0, beta=1.0)
        traj = single_answer_traj(n_votes=2)
        ratios = [1.0] * 30 + [0.0] * 30
        ranks = [1] * 30 + [9] * 30
        times = [1] * 30 + [2] * 30
        pop = population(ratios, ranks, times=times)
        out = estimate_quality(model, [traj], pop,
                               aggregate="per_time_sum")
        expected = expit(0.2 + 1.0 + 0.5) + expit(0.2 + 0.1)
        assert out[("q", "q-a")] == pytest.approx(float(expected),
                                                  abs=1e-12)

    def test_per_time_sum_falls_back_to_global_on_thin_slice(self):
        model = CommunityModel(q={"q": {"q-a": 0.0}}, nu={"q": 0.0},
                               lam=1.0, beta=0.0)
        traj = single_answer_traj(n_votes=3)
        # slice t=3 has a single sample; global mean applies instead
        ratios = [1.0] * 30 + [0.0] * 30 + [0.5]
        times = [1] * 30 + [2] * 30 + [3]
        pop = population(ratios, [1] * 61, times=times)
        out = estimate_quality(model, [traj], pop,
                               aggregate="per_time_sum")
        global_mean = float(np.mean(expit(np.asarray(ratios))))
        expected = expit(1.0) + expit(0.0) + global_mean
        assert out[("q", "q-a")] == pytest.approx(float(expected),
                                                  abs=1e-12)

    def test_integrate_length_uses_population_lengths(self):
        model = CommunityModel(q={"q": {"q-a": 0.0}}, nu={"q": 1.0})
        traj = single_answer_traj()
        pop = population([0.5, 0.5], [1, 1], lengths=[-2.0, 2.0])
        fixed = estimate_quality(model, [traj], pop)[("q", "q-a")]
        integ = estimate_quality(model, [traj], pop,
                                 integrate_length=True)[("q", "q-a")]
        assert fixed == pytest.approx(0.5)  # own rel length is 0
        expected = 0.5 * (expit(-2.0) + expit(2.0))
        assert integ == pytest.approx(float(expected), abs=1e-12)

    def test_large_population_subsampled_deterministically(self):
        model = CommunityModel(q={"q": {"q-a": 0.0}}, nu={"q": 0.0},
                               lam=1.0)
        traj = single_answer_traj()
        rng = np.random.default_rng(0)
        big = population(rng.random(150_000), np.ones(150_000), seed=11)
        a = estimate_quality(model, [traj], big)[("q", "q-a")]
        big2 = population(big.ratios, big.ranks, seed=11)
        b = estimate_quality(model, [traj], big2)[("q", "q-a")]
        assert a == b

    def test_empty_population_rejected(self):
        with pytest.raises(ValueError):
            population([], [])


class TestCounterfactualCurve:
    def build_mixed_traj(self):
        # one answer with both positive and negative vote climates
        votes = [(0, +1), (0, +1), (0, -1), (0, -1), (0, -1), (0, +1)]
        answers = (Answer("a0", 0, 100),)
        events = tuple(VoteEvent(0, k + 1, s, 100 + k)
                       for k, (_, s) in enumerate(votes))
        return reconstruct_contexts(
            QuestionTrajectory("q", answers, events))

    def test_mood_ordering_and_rank_decay(self):
        traj = self.build_mixed_traj()
        model = CommunityModel(q={"q": {"a0": 0.1}}, nu={"q": 0.0},
                               lam=1.5, beta=2.0)
        curves = {m: counterfactual_curve(model, [traj], 10, m)
                  for m in ("pos", "neutral", "neg")}
        for m in curves:
            assert not curves[m].empty
        pos = [p for _, p in curves["pos"].points]
        neu = [p for _, p in curves["neutral"].points]
        neg = [p for _, p in curves["neg"].points]
        assert all(a >= b >= c for a, b, c in zip(pos, neu, neg))
        for seq in (pos, neu, neg):
            assert all(a > b for a, b in zip(seq, seq[1:]))

    def test_flat_when_no_position_or_herding_terms(self):
        traj = self.build_mixed_traj()
        model = CommunityModel(q={"q": {"a0": 0.1}}, nu={"q": 0.0},
                               lam=0.0, beta=0.0)
        curves = [counterfactual_curve(model, [traj], 5, m)
                  for m in ("pos", "neutral", "neg")]
        values = {p for c in curves for _, p in c.points}
        assert len(values) == 1

    def test_no_qualifying_answers_gives_empty_curve(self):
        traj = reconstruct_contexts(single_answer_traj(n_votes=1))
        model = CommunityModel(q={"q": {"q-a": 0.0}}, nu={"q": 0.0})
        # the single vote saw the neutral 0.5 ratio: neither pos nor neg
        result = counterfactual_curve(model, [traj], 5, "pos")
        assert result.empty and result.points == ()

    def test_bad_arguments(self):
        model = CommunityModel()
        with pytest.raises(ValueError):
            counterfactual_curve(model, [], 1, "pos")
        with pytest.raises(ValueError):
            counterfactual_curve(model, [], 5, "upbeat")


class TestFitPowerLaw:
    def test_recovers_unit_exponent(self):
        curve = [(r, 1.0 / (r + 1.0)) for r in range(1, 11)]
        f = fit_power_law(curve)
        assert abs(f.b - 1.0) < 1e-3
        assert abs(f.c - 0.0) < 1e-3
        assert f.sse < 1e-10

    def test_recovers_square_exponent_with_offset(self):
        curve = [(r, 1.0 / (r ** 2 + 1.0) + 0.1) for r in range(1, 11)]
        f = fit_power_law(curve)
        assert abs(f.b - 2.0) < 1e-3
        assert abs(f.c - 0.1) < 1e-3

    def test_constant_curve(self):
        f = fit_power_law([(r, 0.6) for r in range(1, 8)])
        assert f.b == 0.0
        assert f.c == pytest.approx(0.1, abs=1e-12)
        assert f.sse == pytest.approx(0.0, abs=1e-15)

    def test_sse_no_worse_than_generator(self):
        for b_true, c_true in ((0.7, 0.05), (1.8, -0.02), (3.2, 0.2)):
            curve = [(r, 1.0 / (r ** b_true + 1.0) + c_true)
                     for r in range(1, 12)]
            f = fit_power_law(curve)
            truth_sse = sum(
                (p - (1.0 / (r ** b_true + 1.0) + c_true)) ** 2
                for r, p in curve)
            assert f.sse <= truth_sse + 1e-15

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            fit_power_law([(1, 0.5), (2, 0.4)])
