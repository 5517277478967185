import math

import mpmath
import numpy as np
import pytest

from setconv.episodic import (
    AdamState,
    TrainConfig,
    adam_step,
    episode_loss,
    episode_loss_and_grads,
    episode_step,
    round_half_up,
    sample_episode,
    split_support,
    train,
)
from setconv.errors import ConfigError, InsufficientDataError
from setconv.layer import SetConvParams, init_params, setconv_forward
from setconv.linalg import make_rng


class TestSplitSupport:
    @pytest.mark.parametrize(
        "args, expected",
        [((64, 900, 100), (58, 6)), ((64, 500, 500), (32, 32)), ((64, 1000, 2), (63, 1))],
    )
    def test_examples(self, args, expected):
        assert split_support(*args) == expected

    def test_round_half_up(self):
        assert [round_half_up(v) for v in (0.5, 1.5, 2.5, 2.4999)] == [1, 2, 3, 2]

    def test_always_both_classes(self):
        for s in range(2, 80):
            for n_min in (1, 3, 50, 500):
                n1, n2 = split_support(s, 1000, n_min)
                assert n1 + n2 == s and n1 >= 1 and n2 >= 1

    def test_errors(self):
        with pytest.raises(ConfigError):
            split_support(1, 10, 10)
        with pytest.raises(InsufficientDataError):
            split_support(64, 10, 0)


@pytest.fixture
def pools(rng):
    return rng.normal(size=(900, 3)), rng.normal(size=(100, 3)) + 5.0


class TestSampleEpisode:
    def test_composition(self, pools):
        ep = sample_episode(*pools, 64, make_rng(0))
        assert ep.support_maj.shape == (58, 3) and ep.support_min.shape == (6, 3)
        assert ep.query_maj.shape == (3,) and ep.query_min.shape == (3,)
        assert len(set(ep.maj_index)) == 59 and len(set(ep.min_index)) == 7

    def test_rows_come_from_pools(self, pools):
        x_maj, x_min = pools
        ep = sample_episode(x_maj, x_min, 64, make_rng(1))
        np.testing.assert_array_equal(ep.support_maj, x_maj[ep.maj_index[:-1]])
        np.testing.assert_array_equal(ep.query_min, x_min[ep.min_index[-1]])

    def test_deterministic(self, pools):
        a = sample_episode(*pools, 64, make_rng(3))
        b = sample_episode(*pools, 64, make_rng(3))
        np.testing.assert_array_equal(a.maj_index, b.maj_index)
        np.testing.assert_array_equal(a.min_index, b.min_index)

    def test_thousand_episodes_keep_counts(self, pools):
        rng = make_rng(11)
        for _ in range(1000):
            ep = sample_episode(*pools, 64, rng)
            assert (len(ep.support_maj), len(ep.support_min)) == (58, 6)
            assert ep.min_index[-1] not in ep.min_index[:-1]
            assert ep.maj_index[-1] not in ep.maj_index[:-1]

    def test_small_class_keeps_query_out(self):
        x_maj, x_min = np.zeros((100, 2)), np.ones((3, 2))
        ep = sample_episode(x_maj, x_min, 8, make_rng(0))
        assert len(ep.support_min) <= 2 and len(set(ep.min_index)) == len(ep.min_index)

    def test_too_few(self):
        with pytest.raises(InsufficientDataError):
            sample_episode(np.zeros((10, 2)), np.zeros((1, 2)), 8, make_rng(0))


def loss_oracle(s_maj, s_min, q_maj, q_min):
    mpmath.mp.dps = 50
    total = mpmath.mpf(0)
    for q, target in ((q_maj, 0), (q_min, 1)):
        logits = [mpmath.fsum(mpmath.mpf(float(a)) * mpmath.mpf(float(b)) for a, b in zip(q, s))
                  for s in (s_maj, s_min)]
        total -= logits[target] - mpmath.log(mpmath.exp(logits[0]) + mpmath.exp(logits[1]))
    return float(total / 2)


class TestEpisodeLoss:
    def test_symmetric(self):
        v = np.array([1.0, 0.0])
        assert episode_loss(v, v, v, v) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_ln9_margin(self):
        c = math.log(9.0)
        s_maj, s_min = np.array([c, 0.0]), np.array([0.0, c])
        q_maj, q_min = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert episode_loss(s_maj, s_min, q_maj, q_min) == pytest.approx(-math.log(0.9), abs=1e-12)
        assert episode_loss(s_maj, s_min, q_maj, q_min) == pytest.approx(0.105361, abs=1e-6)

    def test_matches_high_precision_oracle(self, rng):
        for _ in range(50):
            vs = [rng.normal(0, 2, size=6) for _ in range(4)]
            assert abs(episode_loss(*vs) - loss_oracle(*vs)) <= 1e-12

    def test_no_overflow_for_large_dots(self):
        v = np.array([100.0])
        assert episode_loss(v, -v, v, -v) == pytest.approx(0.0, abs=1e-300)
        assert math.isfinite(episode_loss(v, -v, -v, v))

    def test_gradients_finite_differences(self, rng):
        vs = [rng.normal(size=4) for _ in range(4)]
        _, grads = episode_loss_and_grads(*vs)
        eps = 1e-6
        for a in range(4):
            for j in range(4):
                up = [v.copy() for v in vs]
                dn = [v.copy() for v in vs]
                up[a][j] += eps
                dn[a][j] -= eps
                num = (episode_loss(*up) - episode_loss(*dn)) / (2 * eps)
                assert grads[a][j] == pytest.approx(num, abs=1e-8)


def scalar_params(values):
    w, w1, b1, w2, b2 = values
    return SetConvParams(np.array([[w]]), np.array([[w1]]), np.array([b1]),
                         np.array([[w2]]), np.array([b2]))


class TestAdam:
    config = TrainConfig()

    def test_zero_gradient_no_move(self, rng):
        p = init_params(3, 2, 4, rng)
        new, state = adam_step(p, p.zeros_like(), AdamState.zeros(p), self.config)
        assert new.equals(p) and state.step == 1

    @pytest.mark.parametrize("g", [3.7, -0.002, 1e4])
    def test_first_step_magnitude_is_lr(self, g):
        p = scalar_params([0.0] * 5)
        grads = scalar_params([g] * 5)
        new, _ = adam_step(p, grads, AdamState.zeros(p), self.config)
        expected = -0.01 * g / (abs(g) + 1e-8)
        for a in new.arrays().values():
            assert a.item() == pytest.approx(expected, rel=1e-12)

    def test_inputs_not_mutated(self, rng):
        p = init_params(2, 2, 2, rng)
        before = p.copy()
        state = AdamState.zeros(p)
        adam_step(p, p, state, self.config)
        assert p.equals(before) and state.step == 0
        assert all(np.all(m == 0) for m in state.m.values())

    def test_five_steps_on_quadratic_match_hand_trace(self):
        # f(p) = 0.5 * sum(c_k * p_k^2), gradient c_k * p_k
        curv = [1.0, 3.0, 0.5, 10.0, 0.1]
        start = [1.0, -2.0, 0.3, 0.7, -5.0]
        lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8

        trace = list(start)
        m = [0.0] * 5
        v = [0.0] * 5
        for t in range(1, 6):
            for k in range(5):
                g = curv[k] * trace[k]
                m[k] = b1 * m[k] + (1 - b1) * g
                v[k] = b2 * v[k] + (1 - b2) * g * g
                m_hat = m[k] / (1 - b1**t)
                v_hat = v[k] / (1 - b2**t)
                trace[k] -= lr * m_hat / (math.sqrt(v_hat) + eps)

        p = scalar_params(start)
        state = AdamState.zeros(p)
        for _ in range(5):
            grads = scalar_params([c * a.item() for c, a in zip(curv, p.arrays().values())])
            p, state = adam_step(p, grads, state, self.config)
        got = [a.item() for a in p.arrays().values()]
        for a, b in zip(got, trace):
            assert abs(a - b) <= 1e-12
        assert state.step == 5


def blobs(seed, n_maj=300, n_min=30, d=4, sep=4.0):
    rng = make_rng(seed)
    x_maj = rng.normal(size=(n_maj, d))
    x_min = rng.normal(size=(n_min, d))
    x_maj[:, 0] -= sep / 2
    x_min[:, 0] += sep / 2
    return x_maj, x_min


class TestTrain:
    def test_zero_iterations_returns_init(self):
        x_maj, x_min = blobs(0)
        cfg = TrainConfig(iterations=0, hidden=8, d_out=4, seed=5)
        res = train(x_maj, x_min, cfg)
        assert res.params.equals(init_params(4, 4, 8, make_rng(5)))
        assert res.losses == []
        np.testing.assert_array_equal(res.anchor, x_min.mean(axis=0))

    def test_deterministic(self):
        x_maj, x_min = blobs(1)
        cfg = TrainConfig(iterations=30, hidden=8, d_out=8, seed=2)
        a, b = train(x_maj, x_min, cfg), train(x_maj, x_min, cfg)
        assert a.params.equals(b.params) and a.losses == b.losses

    def test_anchor_fixed_and_params_move(self):
        x_maj, x_min = blobs(2)
        res = train(x_maj, x_min, TrainConfig(iterations=5, hidden=8, d_out=8))
        np.testing.assert_array_equal(res.anchor, x_min.mean(axis=0))
        assert not res.params.equals(init_params(4, 8, 8, make_rng(0)))

    def test_callback(self):
        x_maj, x_min = blobs(3)
        seen = []
        res = train(x_maj, x_min, TrainConfig(iterations=7, hidden=4, d_out=4),
                    on_iteration=lambda it, loss: seen.append((it, loss)))
        assert [i for i, _ in seen] == list(range(7))
        assert [l for _, l in seen] == res.losses

    def test_loss_decreases(self):
        x_maj, x_min = blobs(4, n_maj=900, n_min=100, d=16)
        res = train(x_maj, x_min, TrainConfig(iterations=600, hidden=32, d_out=32))
        assert np.mean(res.losses[-100:]) < np.mean(res.losses[:100])

    def test_episode_step_gradient_matches_finite_differences(self, rng):
        x_maj, x_min = blobs(5, n_maj=40, n_min=10, d=3)
        params = init_params(3, 2, 4, rng)
        params.b1 = rng.normal(0, 0.3, 4)
        anchor = x_min.mean(axis=0)
        ep = sample_episode(x_maj, x_min, 8, make_rng(0))
        _, grads = episode_step(params, anchor, ep)

        def loss_of(p):
            sets = [ep.support_maj, ep.support_min, ep.query_maj[None], ep.query_min[None]]
            return episode_loss(*(setconv_forward(s, p, anchor) for s in sets))

        step = 1e-6
        for name, g in grads.arrays().items():
            for idx in np.ndindex(g.shape):
                up, dn = params.copy(), params.copy()
                getattr(up, name)[idx] += step
                getattr(dn, name)[idx] -= step
                num = (loss_of(up) - loss_of(dn)) / (2 * step)
                assert g[idx] == pytest.approx(num, rel=1e-5, abs=1e-8)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(support_size=1)
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(iterations=-1)
