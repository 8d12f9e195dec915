import numpy as np
import pytest
from scipy import stats

from skytask.ddqn import (
    EvalRecord,
    QNetwork,
    ReplayBuffer,
    TrainConfig,
    Transition,
    TransitionBatch,
    apply_gradients,
    batch_loss,
    ddqn_targets,
    epsilon_greedy,
    forward,
    forward_batch,
    gradients,
    greedy_action,
    normalize_obs,
    random_policy,
    subseed,
    tabular_q_update,
    train,
)
from skytask.env import N_ACTIONS, StepResult
from skytask.errors import IndexOutOfRange, NonFiniteParameters, ShapeMismatch


def small_net(sizes=(4, 8, 5), seed=0, dtype=np.float64):
    return QNetwork.initialize(sizes, np.random.default_rng(seed), dtype=dtype)


def random_batch(net, batch=16, seed=1):
    rng = np.random.default_rng(seed)
    obs = rng.normal(size=(batch, net.sizes[0]))
    actions = rng.integers(net.sizes[-1], size=batch)
    targets = rng.normal(size=batch)
    return obs, actions, targets


class TestForward:
    def test_zero_parameters_zero_q(self):
        net = small_net()
        for w in net.weights:
            w[:] = 0
        for b in net.biases:
            b[:] = 0
        np.testing.assert_array_equal(forward(net, np.ones(4)), np.zeros(5))

    def test_final_layer_linearity(self):
        net = small_net(seed=3)
        obs = np.random.default_rng(0).normal(size=4)
        q1 = forward(net, obs)
        net.weights[-1] *= 3.0
        net.biases[-1] *= 3.0
        np.testing.assert_allclose(forward(net, obs), 3.0 * q1, rtol=1e-12)

    def test_hand_computed_tiny_net(self):
        # sizes (1, 2, 2): z0 = [2.5, -3.75] -> relu [2.5, 0]
        # out = [2.5*1 + 0*3 - 1, 2.5*2 + 0*4 + 2] = [1.5, 7.0]
        net = QNetwork(
            sizes=(1, 2, 2),
            weights=[np.array([[1.0, -2.0]]), np.array([[1.0, 2.0], [3.0, 4.0]])],
            biases=[np.array([0.5, 0.25]), np.array([-1.0, 2.0])],
            dtype=np.float64,
        )
        np.testing.assert_allclose(forward(net, np.array([2.0])), [1.5, 7.0], rtol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            forward(small_net(), np.ones(5))
        with pytest.raises(ShapeMismatch):
            forward_batch(small_net(), np.ones((3, 7)))

    def test_batch_matches_single(self):
        net = small_net(seed=4)
        rng = np.random.default_rng(2)
        x = rng.normal(size=(6, 4))
        batch = forward_batch(net, x)
        for i in range(6):
            np.testing.assert_allclose(batch[i], forward(net, x[i]), rtol=1e-12)


class TestGradients:
    def test_zero_when_target_equals_q(self):
        net = small_net(seed=5)
        obs, actions, _ = random_batch(net)
        q = forward_batch(net, obs)
        targets = q[np.arange(len(actions)), actions]
        dws, dbs = gradients(net, obs, actions, targets)
        for g in dws + dbs:
            np.testing.assert_allclose(g, 0.0, atol=1e-14)

    def test_matches_finite_differences(self):
        net = small_net(sizes=(3, 6, 5), seed=6)
        obs, actions, targets = random_batch(net, batch=8, seed=7)
        dws, dbs = gradients(net, obs, actions, targets)
        h = 1e-6
        worst = 0.0
        for params, grads in ((net.weights, dws), (net.biases, dbs)):
            for p, g in zip(params, grads):
                it = np.nditer(p, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    orig = p[idx]
                    p[idx] = orig + h
                    lo_hi = batch_loss(net, obs, actions, targets)
                    p[idx] = orig - h
                    lo_lo = batch_loss(net, obs, actions, targets)
                    p[idx] = orig
                    fd = (lo_hi - lo_lo) / (2 * h)
                    denom = max(abs(fd), abs(g[idx]), 1e-8)
                    worst = max(worst, abs(fd - g[idx]) / denom)
        assert worst < 1e-5

    def test_batch_gradient_is_mean_of_items(self):
        net = small_net(seed=8)
        obs, actions, targets = random_batch(net, batch=10, seed=9)
        dws, dbs = gradients(net, obs, actions, targets)
        acc_w = [np.zeros_like(w) for w in net.weights]
        acc_b = [np.zeros_like(b) for b in net.biases]
        for i in range(10):
            iw, ib = gradients(net, obs[i:i + 1], actions[i:i + 1], targets[i:i + 1])
            for a, g in zip(acc_w, iw):
                a += g / 10.0
            for a, g in zip(acc_b, ib):
                a += g / 10.0
        for a, g in zip(acc_w + acc_b, dws + dbs):
            np.testing.assert_allclose(a, g, atol=1e-12)

    def test_single_step_decreases_loss(self):
        # alpha <= 1e-4, 100 seeded trials, zero failures allowed
        for trial in range(100):
            net = small_net(sizes=(5, 12, 5), seed=1000 + trial)
            obs, actions, targets = random_batch(net, batch=32, seed=2000 + trial)
            before = batch_loss(net, obs, actions, targets)
            apply_gradients(net, gradients(net, obs, actions, targets), alpha=1e-4)
            after = batch_loss(net, obs, actions, targets)
            assert after < before


class TestDdqnTargets:
    def make_batch(self, rng, net, batch=12, done=None):
        obs = rng.normal(size=(batch, net.sizes[0])).astype(np.float32)
        nxt = rng.normal(size=(batch, net.sizes[0])).astype(np.float32)
        if done is None:
            done = rng.random(batch) < 0.3
        return TransitionBatch(
            observations=obs,
            actions=rng.integers(5, size=batch),
            rewards=rng.normal(size=batch).astype(np.float32),
            next_observations=nxt,
            dones=done,
        )

    def test_gamma_zero(self):
        net = small_net(sizes=(4, 8, 5), seed=10)
        batch = self.make_batch(np.random.default_rng(11), net)
        y = ddqn_targets(net, net.copy(), batch, gamma=0.0)
        np.testing.assert_allclose(y, batch.rewards, rtol=1e-7)

    def test_done_ignores_next_state(self):
        net = small_net(sizes=(4, 8, 5), seed=12)
        batch = self.make_batch(np.random.default_rng(13), net, done=np.ones(12, dtype=bool))
        y = ddqn_targets(net, net.copy(), batch, gamma=0.97)
        np.testing.assert_allclose(y, batch.rewards, rtol=1e-7)

    def test_identical_weights_collapse_to_dqn(self):
        net = small_net(sizes=(4, 8, 5), seed=14)
        batch = self.make_batch(np.random.default_rng(15), net)
        y = ddqn_targets(net, net.copy(), batch, gamma=0.9)
        q_next = forward_batch(net, normalize_obs(batch.next_observations))
        expected = batch.rewards + 0.9 * q_next.max(axis=1) * ~batch.dones
        np.testing.assert_allclose(y, expected, rtol=1e-6)

    def test_never_exceeds_max_evaluate(self):
        rng = np.random.default_rng(16)
        online = small_net(sizes=(4, 8, 5), seed=17)
        target = small_net(sizes=(4, 8, 5), seed=18)
        for _ in range(20):
            batch = self.make_batch(rng, online)
            y = ddqn_targets(online, target, batch, gamma=0.95)
            bound = batch.rewards + 0.95 * forward_batch(
                target, normalize_obs(batch.next_observations)).max(axis=1) * ~batch.dones
            assert np.all(y <= bound + 1e-6)

    def test_stale_target_gives_identical_targets(self):
        online = small_net(sizes=(4, 8, 5), seed=19)
        target = small_net(sizes=(4, 8, 5), seed=20)
        batch = self.make_batch(np.random.default_rng(21), online)
        y1 = ddqn_targets(online, target, batch, gamma=0.9)
        y2 = ddqn_targets(online, target, batch, gamma=0.9)
        np.testing.assert_array_equal(y1, y2)


class TestFusedStep:
    def test_matches_public_operations(self):
        from skytask.ddqn import _fused_train_step
        rng = np.random.default_rng(40)
        for dtype, tol in ((np.float64, 1e-12), (np.float32, 1e-5)):
            online = small_net(sizes=(6, 16, 5), seed=41, dtype=dtype)
            target = small_net(sizes=(6, 16, 5), seed=42, dtype=dtype)
            batch = TransitionBatch(
                observations=rng.normal(size=(8, 6)).astype(np.float32),
                actions=rng.integers(5, size=8),
                rewards=rng.normal(size=8).astype(np.float32),
                next_observations=rng.normal(size=(8, 6)).astype(np.float32),
                dones=rng.random(8) < 0.3,
            )
            ref = online.copy()
            y = ddqn_targets(ref, target, batch, gamma=0.95)
            apply_gradients(ref, gradients(ref, normalize_obs(batch.observations),
                                           batch.actions, y), alpha=0.01)
            _fused_train_step(online, target, batch, gamma=0.95, alpha=0.01,
                              rows=np.arange(8))
            for a, b in zip(online.weights + online.biases, ref.weights + ref.biases):
                np.testing.assert_allclose(a, b, rtol=tol, atol=tol)


class TestPolicies:
    def test_epsilon_zero_is_argmax(self):
        q = np.array([0.1, -2.0, 3.5, 3.4, 0.0])
        assert epsilon_greedy(q, 0.0, None) == 2

    def test_tie_break_lowest_index(self):
        assert epsilon_greedy(np.array([1.0, 3.0, 3.0, 0.0, 0.0]), 0.0, None) == 1

    def test_epsilon_one_frequencies(self):
        rng = np.random.default_rng(22)
        q = np.zeros(5)
        counts = np.zeros(5)
        for _ in range(10_000):
            counts[epsilon_greedy(q, 1.0, rng)] += 1
        np.testing.assert_allclose(counts / 10_000, 0.2, atol=0.02)

    def test_argmax_invariant_to_constant_shift(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            q = rng.normal(size=5)
            assert epsilon_greedy(q, 0.0, None) == epsilon_greedy(q + 17.3, 0.0, None)

    def test_random_policy_frequencies(self):
        rng = np.random.default_rng(24)
        counts = np.zeros(5)
        for _ in range(10_000):
            counts[random_policy(rng)] += 1
        np.testing.assert_allclose(counts / 10_000, 0.2, atol=0.02)

    def test_random_policy_deterministic_for_fixed_state(self):
        a = [random_policy(np.random.default_rng(7)) for _ in range(3)]
        assert a[0] == a[1] == a[2]
        assert all(0 <= x < N_ACTIONS for x in a)


class TestReplayBuffer:
    def test_eviction_keeps_most_recent(self):
        buf = ReplayBuffer(capacity=8, obs_size=2)
        for i in range(11):
            buf.push(Transition(np.array([i, i]), 0, float(i), np.array([i, i]), False))
        assert len(buf) == 8
        rng = np.random.default_rng(25)
        seen = {float(buf.sample(64, rng).rewards[j]) for _ in range(50) for j in range(64)}
        assert seen == {float(i) for i in range(3, 11)}

    def test_uniform_sampling_chi_squared(self):
        buf = ReplayBuffer(capacity=50, obs_size=1)
        for i in range(50):
            buf.push(Transition(np.array([0.0]), 0, float(i), np.array([0.0]), False))
        rng = np.random.default_rng(26)
        draws = buf.sample(100_000, rng).rewards.astype(int)
        counts = np.bincount(draws, minlength=50)
        assert counts.min() > 0
        _, p_value = stats.chisquare(counts)
        assert p_value > 0.001

    def test_empty_sample_raises(self):
        with pytest.raises(ValueError):
            ReplayBuffer(4, 1).sample(2, np.random.default_rng(0))


class TestTabular:
    def test_alpha_zero_unchanged(self):
        q = np.arange(12.0).reshape(3, 4)
        out = tabular_q_update(q, 1, 2, 5.0, 0, alpha=0.0, gamma=0.9)
        np.testing.assert_array_equal(out, q)

    def test_full_overwrite(self):
        q = np.zeros((2, 2))
        out = tabular_q_update(q, 0, 1, 7.0, 1, alpha=1.0, gamma=0.0)
        assert out[0, 1] == 7.0

    def test_hand_arithmetic(self):
        # Q(s,a)=2, r=1, gamma=0.9, max next = 4, alpha=0.5 -> 3.3
        q = np.array([[2.0, 0.0], [4.0, 1.0]])
        out = tabular_q_update(q, 0, 0, 1.0, 1, alpha=0.5, gamma=0.9)
        assert out[0, 0] == pytest.approx(3.3)
        assert out[0, 1] == 0.0
        np.testing.assert_array_equal(out[1], q[1])

    def test_index_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            tabular_q_update(np.zeros((2, 2)), 2, 0, 0.0, 0, 0.5, 0.9)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        net = small_net(sizes=(6, 10, 5), seed=30, dtype=np.float32)
        path = tmp_path / "net.npz"
        net.save(path)
        loaded = QNetwork.load(path)
        assert loaded.sizes == net.sizes
        assert loaded.dtype == net.dtype
        for a, b in zip(loaded.weights + loaded.biases, net.weights + net.biases):
            np.testing.assert_array_equal(a, b)

    def test_version_check(self, tmp_path):
        net = small_net(dtype=np.float32)
        path = tmp_path / "net.npz"
        np.savez(path, version=np.int64(99), sizes=np.array(net.sizes),
                 dtype=np.bytes_("<f4"))
        with pytest.raises(ValueError):
            QNetwork.load(path)

    def test_nan_guard(self):
        net = small_net()
        net.weights[0][0, 0] = np.nan
        with pytest.raises(NonFiniteParameters):
            net.check_finite()


class ChainEnv:
    """Deterministic 2-state chain: start -> middle (reward 0) -> terminal.

    The terminal move pays 1.0 for action 2 and 0.5 otherwise, so with
    gamma = 0.9 the fixed point is Q(start, *) = 0.9, Q(middle, 2) = 1.0,
    Q(middle, other) = 0.5.
    """

    observation_size = 2
    OBS = {0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0])}

    def reset(self, seed):
        self.state = 0
        return self.OBS[0].copy()

    def step(self, action):
        if self.state == 0:
            self.state = 1
            return StepResult(self.OBS[1].copy(), 0.0, False, [])
        reward = 1.0 if action == 2 else 0.5
        return StepResult(self.OBS[1].copy(), reward, True, [])


def bellman_fixed_point(gamma=0.9):
    # two-state value iteration as the independent oracle
    q = np.zeros((2, 5))
    for _ in range(200):
        q_mid = np.array([0.5, 0.5, 1.0, 0.5, 0.5])       # terminal payoffs
        q_start = gamma * q_mid.max() * np.ones(5)
        q = np.vstack([q_start, q_mid])
    return q


class TestTrain:
    def test_zero_iterations(self):
        env = ChainEnv()
        cfg = TrainConfig(iterations=0, rng_seed=1)
        net, records = train(env, cfg)
        assert records == []
        ref = QNetwork.initialize((2, 100, 100, 5),
                                  np.random.default_rng(subseed(1, 0)), dtype="float32")
        for a, b in zip(net.weights, ref.weights):
            np.testing.assert_array_equal(a, b)

    def test_deterministic_metrics(self):
        from skytask.env import EnvConfig, Environment
        cfg = TrainConfig(iterations=6, episodes_per_iteration=2, eval_interval=3,
                          eval_episodes=2, rng_seed=5, batch_size=16,
                          buffer_capacity=500, learning_starts=16, hidden_sizes=(16,))
        outs = []
        for _ in range(2):
            env = Environment(EnvConfig(n_satellites=4, episode_steps=6, seed=2))
            outs.append(train(env, cfg))
        (net1, rec1), (net2, rec2) = outs
        assert [r.iteration for r in rec1] == [r.iteration for r in rec2] == [3, 6]
        assert [r.average_return for r in rec1] == [r.average_return for r in rec2]
        for a, b in zip(net1.weights, net2.weights):
            np.testing.assert_array_equal(a, b)

    def test_chain_mdp_reaches_fixed_point(self):
        env = ChainEnv()
        cfg = TrainConfig(
            iterations=250, episodes_per_iteration=10, eval_interval=10_000,
            eval_episodes=1, alpha=0.05, gamma=0.9,
            epsilon_start=1.0, epsilon_end=0.2, epsilon_decay_steps=1000,
            batch_size=32, buffer_capacity=2000, learning_starts=32,
            target_sync_period=100,
            rng_seed=3, hidden_sizes=(32,), dtype="float64",
        )
        net, _ = train(env, cfg)
        ref = bellman_fixed_point(gamma=0.9)
        q_start = forward(net, normalize_obs(ChainEnv.OBS[0]))
        q_mid = forward(net, normalize_obs(ChainEnv.OBS[1]))
        np.testing.assert_allclose(q_start, ref[0], atol=1e-2)
        np.testing.assert_allclose(q_mid, ref[1], atol=1e-2)
        assert greedy_action(net, ChainEnv.OBS[1]) == 2
