"""Linear-chain CRF against exhaustive enumeration."""
import itertools
import math

import numpy as np
import pytest

from nameform.crf import (
    CrfHead,
    crf_loss_grad,
    log_likelihood,
    log_partition,
    sequence_score,
    viterbi_decode,
)
from nameform.nn.autograd import Parameter
from nameform.nn import autograd as ag

from gradcheck_util import numeric_grad, rel_error


def brute_force_scores(emissions, transitions):
    """Score of every possible label sequence, by direct summation."""
    n, c = emissions.shape
    start, stop = c, c + 1
    scores = {}
    for path in itertools.product(range(c), repeat=n):
        s = transitions[start, path[0]] + transitions[path[-1], stop]
        s += sum(emissions[t, y] for t, y in enumerate(path))
        s += sum(transitions[a, b] for a, b in zip(path, path[1:]))
        scores[path] = s
    return scores


def random_instance(rng, n, c, scale=1.0):
    emissions = rng.standard_normal((n, c)) * scale
    transitions = rng.standard_normal((c + 2, c + 2)) * scale
    return emissions, transitions


class TestLogLikelihood:
    def test_uniform_potentials_give_uniform_distribution(self):
        n, c = 5, 3
        emissions = np.zeros((n, c))
        transitions = np.zeros((c + 2, c + 2))
        ll = log_likelihood(emissions, transitions, [0, 2, 1, 1, 0])
        assert abs(ll - (-n * math.log(c))) < 1e-12

    def test_matches_enumeration(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            n = int(rng.integers(1, 7))
            c = int(rng.integers(2, 5))
            emissions, transitions = random_instance(rng, n, c)
            scores = brute_force_scores(emissions, transitions)
            log_z = math.log(sum(math.exp(s) for s in scores.values()))
            labels = [int(rng.integers(c)) for _ in range(n)]
            expected = scores[tuple(labels)] - log_z
            got = log_likelihood(emissions, transitions, labels)
            assert abs(got - expected) < 1e-8

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(1, 6))
            c = int(rng.integers(2, 5))
            emissions, transitions = random_instance(rng, n, c)
            total = sum(
                math.exp(log_likelihood(emissions, transitions, list(path)))
                for path in itertools.product(range(c), repeat=n)
            )
            assert abs(total - 1.0) < 1e-8

    def test_never_positive(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            emissions, transitions = random_instance(rng, 4, 3, scale=2.0)
            labels = [int(rng.integers(3)) for _ in range(4)]
            assert log_likelihood(emissions, transitions, labels) <= 0.0

    def test_large_potentials_stay_finite(self):
        rng = np.random.default_rng(5)
        emissions = rng.uniform(-50, 50, size=(12, 5))
        transitions = rng.uniform(-50, 50, size=(7, 7))
        labels = [int(rng.integers(5)) for _ in range(12)]
        ll = log_likelihood(emissions, transitions, labels)
        assert np.isfinite(ll)

    def test_label_out_of_range(self):
        emissions = np.zeros((2, 3))
        transitions = np.zeros((5, 5))
        with pytest.raises(ValueError):
            log_likelihood(emissions, transitions, [0, 3])


class TestViterbi:
    def test_decoupled_chain_is_positionwise_argmax(self):
        rng = np.random.default_rng(11)
        emissions = rng.standard_normal((6, 4))
        emissions[np.arange(6), [1, 3, 0, 2, 2, 1]] += 100.0
        transitions = np.zeros((6, 6))
        path, _ = viterbi_decode(emissions, transitions)
        assert path == [1, 3, 0, 2, 2, 1]

    def test_matches_brute_force_argmax(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            n = int(rng.integers(1, 7))
            c = int(rng.integers(2, 5))
            emissions, transitions = random_instance(rng, n, c)
            scores = brute_force_scores(emissions, transitions)
            best_path = max(scores, key=scores.get)
            path, score = viterbi_decode(emissions, transitions)
            assert tuple(path) == best_path
            assert abs(score - scores[best_path]) < 1e-10

    def test_length_one(self):
        rng = np.random.default_rng(17)
        emissions, transitions = random_instance(rng, 1, 4)
        path, score = viterbi_decode(emissions, transitions)
        totals = transitions[4, :4] + emissions[0] + transitions[:4, 5]
        assert path == [int(totals.argmax())]
        assert abs(score - totals.max()) < 1e-12

    def test_beats_random_sequences(self):
        rng = np.random.default_rng(19)
        emissions, transitions = random_instance(rng, 8, 4)
        _, best = viterbi_decode(emissions, transitions)
        for _ in range(200):
            labels = [int(rng.integers(4)) for _ in range(8)]
            assert best >= sequence_score(emissions, transitions, labels) - 1e-12

    def test_tie_break_lowest_index(self):
        # all-zero potentials: every path ties; decode must pick all zeros
        emissions = np.zeros((4, 3))
        transitions = np.zeros((5, 5))
        path, _ = viterbi_decode(emissions, transitions)
        assert path == [0, 0, 0, 0]


class TestLossGrad:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(23)
        emissions, transitions = random_instance(rng, 5, 3)
        labels = [0, 2, 1, 1, 0]
        _, d_em, d_trans = crf_loss_grad(emissions, transitions, labels)
        num_em = numeric_grad(
            lambda: -log_likelihood(emissions, transitions, labels), emissions
        )
        num_trans = numeric_grad(
            lambda: -log_likelihood(emissions, transitions, labels), transitions
        )
        assert rel_error(d_em, num_em) < 1e-4
        assert rel_error(d_trans, num_trans) < 1e-4

    def test_transition_grad_sums_to_zero(self):
        # expected and observed transition counts both total n + 1
        rng = np.random.default_rng(29)
        for _ in range(10):
            n = int(rng.integers(1, 7))
            c = int(rng.integers(2, 5))
            emissions, transitions = random_instance(rng, n, c)
            labels = [int(rng.integers(c)) for _ in range(n)]
            _, _, d_trans = crf_loss_grad(emissions, transitions, labels)
            assert abs(d_trans.sum()) < 1e-10

    def test_uniform_potentials_closed_form(self):
        # with flat potentials the marginal at each position is uniform, so
        # the loss gradient is uniform minus the gold one-hot
        n, c = 4, 3
        emissions = np.zeros((n, c))
        transitions = np.zeros((c + 2, c + 2))
        labels = [2, 0, 1, 2]
        _, d_em, _ = crf_loss_grad(emissions, transitions, labels)
        expected = np.full((n, c), 1.0 / c)
        expected[np.arange(n), labels] -= 1.0
        assert np.allclose(d_em, expected, atol=1e-12)

    def test_nll_non_negative(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            emissions, transitions = random_instance(rng, 4, 3)
            labels = [int(rng.integers(3)) for _ in range(4)]
            nll, _, _ = crf_loss_grad(emissions, transitions, labels)
            assert nll >= 0.0


class TestCrfHead:
    def test_end_to_end_gradients(self):
        rng = np.random.default_rng(37)
        head = CrfHead("crf", d_in=4, n_classes=3, rng=rng)
        head.transitions.data[...] = rng.standard_normal(head.transitions.shape) * 0.3
        features = Parameter("features", rng.standard_normal((5, 4)))
        labels = [0, 2, 1, 0, 2]

        from gradcheck_util import check_grads

        check_grads(
            lambda: head.nll(features, labels),
            head.parameters() + [features],
        )

    def test_decode_returns_valid_path(self):
        rng = np.random.default_rng(41)
        head = CrfHead("crf", d_in=4, n_classes=3, rng=rng)
        features = ag.Tensor(rng.standard_normal((6, 4)))
        path, score = head.decode(features)
        assert len(path) == 6
        assert all(0 <= y < 3 for y in path)
        assert np.isfinite(score)
