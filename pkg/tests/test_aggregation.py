import random

import httpx
import pytest

from idsampling.aggregation import (
    Candidate,
    CandidateSet,
    HttpRewardScorer,
    ScoringRequiredError,
    StubScorer,
    best_of_n,
    candidate_equivalent,
    consensus_answer,
    group_equivalent,
    majority_vote,
    score_candidates,
)
from idsampling.checker import RawAnswer, opaque_key, try_parse


def make_candidates(texts, scores=None, corrects=None):
    candidates = []
    for i, text in enumerate(texts):
        expr = try_parse(text)
        candidates.append(
            Candidate(
                raw=RawAnswer(span=text, origin="boxed"),
                expr=expr,
                key=expr.render() if expr else opaque_key(text),
                score=None if scores is None else scores[i],
                correct=None if corrects is None else corrects[i],
            )
        )
    return CandidateSet(question_id="q0", question="q?", candidates=tuple(candidates))


def closure_oracle(candidates, eq):
    """Brute-force all-pairs transitive closure."""
    n = len(candidates)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if eq(candidates[i], candidates[j]):
                pi, pj = find(i), find(j)
                if pi != pj:
                    parent[max(pi, pj)] = min(pi, pj)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


class TestBestOfN:
    def test_tie_goes_to_lowest_index(self):
        cset = make_candidates(["1", "2", "3"], scores=[0.2, 0.9, 0.9])
        assert best_of_n(cset, 3) is cset.candidates[1]

    def test_k1_is_first_candidate(self):
        cset = make_candidates(["5", "6"], scores=[0.1, 0.99])
        assert best_of_n(cset, 1) is cset.candidates[0]

    def test_matches_brute_force_argmax(self):
        rng = random.Random(21)
        for _ in range(100):
            n = rng.randint(1, 12)
            scores = [rng.random() for _ in range(n)]
            cset = make_candidates([str(i) for i in range(n)], scores=scores)
            k = rng.randint(1, n)
            picked = best_of_n(cset, k)
            best = max(range(k), key=lambda i: (scores[i], -i))
            assert picked is cset.candidates[best]

    def test_missing_scores_raise(self):
        cset = make_candidates(["1", "2"], scores=[0.5, None])
        with pytest.raises(ScoringRequiredError):
            best_of_n(cset, 2)

    def test_k_bounds(self):
        cset = make_candidates(["1"], scores=[0.5])
        with pytest.raises(ValueError):
            best_of_n(cset, 0)
        with pytest.raises(ValueError):
            best_of_n(cset, 2)


class TestGroupEquivalent:
    def test_gcd_reductions_group(self):
        cset = make_candidates(["1/2", "2/4", "3/6", "1/3"])
        partition = group_equivalent(cset)
        assert partition.classes == ((0, 1, 2), (3,))

    def test_radical_equivalence_groups(self):
        cset = make_candidates(["1/sqrt(3)", "sqrt(3)/3"])
        assert group_equivalent(cset).classes == ((0, 1),)

    def test_opaque_and_parsed_never_mix(self):
        cset = make_candidates(["1/2", "x + 1", "x +  1"])
        partition = group_equivalent(cset)
        assert partition.classes == ((0,), (1, 2))

    def test_matches_closure_oracle_with_bounded_comparisons(self):
        rng = random.Random(31)
        variants = [
            ["1/2", "2/4", "0.5"],
            ["1/3", "2/6"],
            ["sqrt(2)", "\\sqrt{2}", "sqrt(8)/2"],
            ["7"],
            ["2/3"],
            ["opaque-a", " opaque-a"],
            ["opaque-b"],
        ]
        for _ in range(100):
            n = rng.randint(1, 32)
            texts = [rng.choice(rng.choice(variants)) for _ in range(n)]
            cset = make_candidates(texts)
            partition = group_equivalent(cset)
            oracle = closure_oracle(cset.candidates, candidate_equivalent)
            assert [list(c) for c in partition.classes] == oracle
            assert partition.comparisons <= n * len(partition.classes)

    def test_partition_order_independence(self):
        texts = ["1/2", "1/3", "2/4", "2/6", "1/2"]
        base = group_equivalent(make_candidates(texts))
        rng = random.Random(5)
        for _ in range(10):
            order = list(range(len(texts)))
            rng.shuffle(order)
            shuffled = group_equivalent(make_candidates([texts[i] for i in order]))
            # same partition as sets of original texts
            def as_text_sets(cset_texts, classes):
                return sorted(sorted(cset_texts[i] for i in cls) for cls in classes)
            assert as_text_sets([texts[i] for i in order], shuffled.classes) == as_text_sets(
                texts, base.classes
            )


class TestMajorityVote:
    def test_most_frequent_wins(self):
        cset = make_candidates(["7", "8", "7"])
        tally = majority_vote(cset, 3)
        assert tally.winning_candidates == (0, 2)
        assert consensus_answer(cset, tally).key == "7"

    def test_weighted_variant(self):
        cset = make_candidates(["7", "8"])
        tally = majority_vote(cset, 2, weights=[0.4, 0.9])
        assert tally.winning_candidates == (1,)

    def test_tie_breaks_to_lowest_index(self):
        cset = make_candidates(["7", "8"])
        tally = majority_vote(cset, 2)
        assert tally.winning_candidates == (0,)

    def test_unweighted_equals_unit_weights(self):
        rng = random.Random(41)
        for _ in range(50):
            n = rng.randint(1, 16)
            texts = [str(rng.randint(0, 4)) for _ in range(n)]
            cset = make_candidates(texts)
            k = rng.randint(1, n)
            assert majority_vote(cset, k) == majority_vote(cset, k, weights=[1.0] * n)

    def test_classes_partition_and_winner_is_max(self):
        rng = random.Random(51)
        for _ in range(50):
            n = rng.randint(1, 24)
            cset = make_candidates([str(rng.randint(0, 6)) for _ in range(n)])
            k = rng.randint(1, n)
            tally = majority_vote(cset, k)
            members = sorted(i for cls in tally.classes for i in cls)
            assert members == list(range(k))
            assert all(tally.weights[tally.winner] >= w for w in tally.weights)

    def test_negative_weights_rejected(self):
        cset = make_candidates(["7", "8"])
        with pytest.raises(ValueError):
            majority_vote(cset, 2, weights=[1.0, -0.1])

    def test_deterministic(self):
        cset = make_candidates(["1/2", "2/4", "1/3"])
        assert majority_vote(cset, 3) == majority_vote(cset, 3)


class TestStubScorer:
    def test_oracle_scores(self):
        scorer = StubScorer(seed=1)
        assert scorer.score("q", "r", correct=True) == 1.0
        assert scorer.score("q", "r", correct=False) == 0.0

    def test_oracle_bon_picks_correct_when_one_exists(self):
        scorer = StubScorer(seed=2)
        rng = random.Random(6)
        for _ in range(50):
            n = rng.randint(1, 10)
            corrects = [rng.random() < 0.4 for _ in range(n)]
            cset = make_candidates([str(i) for i in range(n)], corrects=corrects)
            scored = score_candidates(cset, scorer)
            picked = best_of_n(scored, n)
            if any(corrects):
                assert picked.correct

    def test_deterministic_given_seed(self):
        a = StubScorer(seed=3, inversion_probability=0.3)
        b = StubScorer(seed=3, inversion_probability=0.3)
        assert a.score("q", "resp", correct=True) == b.score("q", "resp", correct=True)

    def test_inversion_degrades_selection(self):
        oracle = StubScorer(seed=4)
        noisy = StubScorer(seed=4, inversion_probability=0.3)
        rng = random.Random(7)
        oracle_hits = noisy_hits = trials = 0
        for t in range(300):
            corrects = [rng.random() < 0.3 for _ in range(8)]
            cset = make_candidates([f"{t}-{i}" for i in range(8)], corrects=corrects)
            trials += 1
            oracle_hits += best_of_n(score_candidates(cset, oracle), 8).correct
            noisy_hits += best_of_n(score_candidates(cset, noisy), 8).correct
        assert noisy_hits < oracle_hits

    def test_validation(self):
        with pytest.raises(ValueError):
            StubScorer(inversion_probability=1.5)
        with pytest.raises(ValueError):
            StubScorer(noise=-1)


class TestHttpScorer:
    def test_uniform_scores_tie_break_to_first(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(200, json={"score": 0.5})

        scorer = HttpRewardScorer("http://prm.test", transport=httpx.MockTransport(handler))
        cset = make_candidates(["1", "2", "3"])
        scored = score_candidates(cset, scorer)
        assert [c.score for c in scored.candidates] == [0.5, 0.5, 0.5]
        assert best_of_n(scored, 3) is scored.candidates[0]

    def test_request_shape(self):
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            import json as _json

            seen.update(_json.loads(request.content))
            seen["url"] = str(request.url)
            return httpx.Response(200, json={"score": 0.7})

        scorer = HttpRewardScorer("http://prm.test", transport=httpx.MockTransport(handler))
        assert scorer.score("which?", "this response") == 0.7
        assert seen == {"question": "which?", "response": "this response", "url": "http://prm.test/score"}

    def test_non_finite_score_rejected(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(200, json={"score": "NaN"})

        scorer = HttpRewardScorer("http://prm.test", transport=httpx.MockTransport(handler))
        cset = make_candidates(["1"])
        scored = score_candidates(cset, scorer)
        assert scored.candidates[0].score is None
        assert "non-finite" in scored.candidates[0].score_error

    def test_failure_marks_candidate_unscored(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(500)

        scorer = HttpRewardScorer(
            "http://prm.test", attempts=2, backoff_base=0.0,
            transport=httpx.MockTransport(handler),
        )
        cset = make_candidates(["1", "2"])
        scored = score_candidates(cset, scorer)
        assert all(c.score is None for c in scored.candidates)
        assert all(c.score_error for c in scored.candidates)
        with pytest.raises(ScoringRequiredError):
            best_of_n(scored, 2)
