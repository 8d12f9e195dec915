"""Double deep Q-network built from scratch on numpy: fully-connected
Q-network with hand-written backprop, circular replay buffer, epsilon-greedy
behaviour, online/target weight pair, and the training loop with periodic
greedy evaluation.

The network math runs in float32 on a single BLAS thread by default; at the
matrix sizes involved that is several times faster than threaded float64 and
keeps repeated runs bit-identical. Tests that need tight numerics build
float64 networks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .env import N_ACTIONS
from .errors import IndexOutOfRange, NonFiniteParameters, ShapeMismatch
from .sensor import Measurement

CHECKPOINT_VERSION = 1

# seed-derivation tags (see subseed)
TAG_INIT = 0
TAG_BEHAVIOR = 1
TAG_SAMPLER = 2
TAG_TRAIN_EP = 3
TAG_EVAL_EP = 4
TAG_MEAS_EP = 5


def subseed(*keys: int) -> np.random.SeedSequence:
    """Deterministic child seed from an ordered tuple of non-negative ints."""
    return np.random.SeedSequence([int(k) for k in keys])


def normalize_obs(obs: np.ndarray) -> np.ndarray:
    """Angle observations are O(pi); scale to O(1) before the network."""
    return np.asarray(obs) * (1.0 / np.pi)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 20_000
    episodes_per_iteration: int = 10
    eval_interval: int = 1_000
    eval_episodes: int = 10
    alpha: float = 1e-3
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 400_000
    batch_size: int = 64
    buffer_capacity: int = 100_000
    # no gradient steps until this many transitions are banked; keeps the
    # replay rich in fully-random trajectories before exploitation starts
    learning_starts: int = 100_000
    target_sync_period: int = 500
    rng_seed: int = 0
    hidden_sizes: tuple[int, ...] = (100, 100)
    dtype: str = "float32"

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie strictly between 0 and 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        if self.learning_starts < 0:
            raise ValueError("learning_starts must be non-negative")

    def epsilon_at(self, gradient_step: int) -> float:
        frac = min(gradient_step / max(self.epsilon_decay_steps, 1), 1.0)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


class QNetwork:
    """Rectifier MLP mapping an observation to one Q-value per action."""

    def __init__(self, sizes, weights, biases, dtype=np.float32):
        self.sizes = tuple(int(s) for s in sizes)
        self.weights = weights     # list of (fan_in, fan_out)
        self.biases = biases       # list of (fan_out,)
        self.dtype = np.dtype(dtype)

    @classmethod
    def initialize(cls, sizes, rng: np.random.Generator, dtype=np.float32) -> "QNetwork":
        """Symmetric uniform init scaled by 1/sqrt(fan_in)."""
        dtype = np.dtype(dtype)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
            biases.append(rng.uniform(-bound, bound, size=fan_out).astype(dtype))
        return cls(sizes, weights, biases, dtype)

    def copy(self) -> "QNetwork":
        return QNetwork(self.sizes, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.dtype)

    def check_finite(self):
        # any NaN/inf parameter poisons the running sum, so one scalar test
        # covers every array
        total = 0.0
        for w, b in zip(self.weights, self.biases):
            total += float(w.sum()) + float(b.sum())
        if not np.isfinite(total):
            raise NonFiniteParameters("network parameters are no longer finite")

    def save(self, path):
        arrays = {f"w{i}": w for i, w in enumerate(self.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(self.biases)})
        np.savez(path, version=np.int64(CHECKPOINT_VERSION),
                 sizes=np.array(self.sizes, dtype=np.int64),
                 dtype=np.bytes_(self.dtype.str), **arrays)

    @classmethod
    def load(cls, path) -> "QNetwork":
        with np.load(path) as data:
            version = int(data["version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            sizes = tuple(int(s) for s in data["sizes"])
            dtype = np.dtype(bytes(data["dtype"]).decode())
            n = len(sizes) - 1
            weights = [data[f"w{i}"] for i in range(n)]
            biases = [data[f"b{i}"] for i in range(n)]
        return cls(sizes, weights, biases, dtype)


def forward(net: QNetwork, obs: np.ndarray) -> np.ndarray:
    """Q-values for one observation."""
    x = np.asarray(obs, dtype=net.dtype)
    if x.shape != (net.sizes[0],):
        raise ShapeMismatch(f"expected observation of length {net.sizes[0]}, got {x.shape}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = x @ w + b
        if i < last:
            np.maximum(x, 0.0, out=x)
    return x


def forward_batch(net: QNetwork, x: np.ndarray) -> np.ndarray:
    """Q-values for a (batch, obs) array."""
    x = np.asarray(x, dtype=net.dtype)
    if x.ndim != 2 or x.shape[1] != net.sizes[0]:
        raise ShapeMismatch(f"expected (batch, {net.sizes[0]}), got {x.shape}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = x @ w + b
        if i < last:
            np.maximum(x, 0.0, out=x)
    return x


def gradients(net: QNetwork, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Gradient of the mean squared error between Q(obs)[action] and target.

    Reverse-mode accumulation through the rectifier stack; returns
    (weight gradients, bias gradients) shaped like the network parameters.
    """
    x = np.asarray(obs, dtype=net.dtype)
    if x.ndim != 2 or x.shape[1] != net.sizes[0]:
        raise ShapeMismatch(f"expected (batch, {net.sizes[0]}), got {x.shape}")
    if x.shape[0] == 0:
        raise ShapeMismatch("empty batch")
    actions = np.asarray(actions, dtype=np.intp)
    targets = np.asarray(targets, dtype=net.dtype)
    batch = x.shape[0]
    last = len(net.weights) - 1

    # forward with cached pre/post activations
    acts = [x]
    pre = []
    h = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)

    q = acts[-1]
    rows = np.arange(batch)
    err = q[rows, actions] - targets
    dq = np.zeros_like(q)
    dq[rows, actions] = (2.0 / batch) * err

    dws = [None] * len(net.weights)
    dbs = [None] * len(net.biases)
    delta = dq
    for i in range(last, -1, -1):
        if i < last:
            delta = delta * (pre[i] > 0)
        dws[i] = acts[i].T @ delta
        dbs[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ net.weights[i].T
    return dws, dbs


def apply_gradients(net: QNetwork, grads, alpha: float):
    """One in-place stochastic gradient descent step."""
    dws, dbs = grads
    a = net.dtype.type(alpha)
    for w, dw in zip(net.weights, dws):
        w -= a * dw
    for b, db in zip(net.biases, dbs):
        b -= a * db


def batch_loss(net: QNetwork, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> float:
    q = forward_batch(net, obs)
    err = q[np.arange(len(actions)), np.asarray(actions, dtype=np.intp)] - np.asarray(targets, dtype=net.dtype)
    return float(np.mean(err**2))


@dataclass(frozen=True)
class Transition:
    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    done: bool


class TransitionBatch:
    """Column views of sampled transitions."""

    __slots__ = ("observations", "actions", "rewards", "next_observations", "dones")

    def __init__(self, observations, actions, rewards, next_observations, dones):
        self.observations = observations
        self.actions = actions
        self.rewards = rewards
        self.next_observations = next_observations
        self.dones = dones

    def __len__(self):
        return len(self.actions)


class ReplayBuffer:
    """Fixed-capacity circular transition store with uniform sampling.

    Observations are kept as float32 rows in preallocated arrays; once full,
    each push overwrites the oldest entry.
    """

    def __init__(self, capacity: int, obs_size: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._obs = np.empty((capacity, obs_size), dtype=np.float32)
        self._next_obs = np.empty((capacity, obs_size), dtype=np.float32)
        self._actions = np.empty(capacity, dtype=np.int64)
        self._rewards = np.empty(capacity, dtype=np.float32)
        self._dones = np.empty(capacity, dtype=bool)
        self._cursor = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, t: Transition):
        i = self._cursor
        self._obs[i] = t.observation
        self._next_obs[i] = t.next_observation
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._dones[i] = t.done
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        return TransitionBatch(
            observations=self._obs[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_observations=self._next_obs[idx],
            dones=self._dones[idx],
        )


def ddqn_targets(online: QNetwork, target: QNetwork, batch: TransitionBatch,
                 gamma: float) -> np.ndarray:
    """Double-estimator bootstrap targets.

    The online network picks the next action, the target network prices it:
    y = r                                          if the transition ended
    y = r + gamma * Q_target(s')[argmax Q_online(s')]   otherwise
    Argmax ties break toward the lowest action index.
    """
    next_norm = normalize_obs(batch.next_observations)
    chosen = np.argmax(forward_batch(online, next_norm), axis=1)
    q_next = forward_batch(target, next_norm)[np.arange(len(batch)), chosen]
    live = ~np.asarray(batch.dones)
    return batch.rewards + gamma * q_next * live


def epsilon_greedy(q: np.ndarray, epsilon: float, rng: np.random.Generator | None) -> int:
    """Uniform random action with probability epsilon, else greedy argmax
    (lowest index on ties). rng may be None when epsilon is 0."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(q))


def random_policy(rng: np.random.Generator) -> int:
    """Uniform action choice; the paper's comparison baseline."""
    return int(rng.integers(N_ACTIONS))


def greedy_action(net: QNetwork, obs: np.ndarray) -> int:
    return epsilon_greedy(forward(net, normalize_obs(obs)), 0.0, None)


def tabular_q_update(q_table: np.ndarray, s: int, a: int, r: float, s_next: int,
                     alpha: float, gamma: float) -> np.ndarray:
    """Plain one-cell Q-learning update; the tabular reference the network
    targets collapse to when online and target weights coincide."""
    q_table = np.asarray(q_table, dtype=float)
    n_states, n_actions = q_table.shape
    if not (0 <= s < n_states and 0 <= s_next < n_states and 0 <= a < n_actions):
        raise IndexOutOfRange(f"indices (s={s}, a={a}, s'={s_next}) outside "
                              f"{n_states}x{n_actions} table")
    out = q_table.copy()
    out[s, a] = q_table[s, a] + alpha * (r + gamma * q_table[s_next].max() - q_table[s, a])
    return out


def _fused_train_step(net: QNetwork, target: QNetwork, batch: TransitionBatch,
                      gamma: float, alpha: float, rows: np.ndarray):
    """One gradient step with the s and s' forward passes fused.

    Equivalent to ddqn_targets + gradients + apply_gradients (up to float
    reassociation from the stacked matmuls); the hot loop calls this to keep
    the per-step matmul count down.
    """
    b = len(batch)
    stacked = normalize_obs(np.vstack((batch.observations, batch.next_observations)))
    stacked = stacked.astype(net.dtype, copy=False)
    last = len(net.weights) - 1

    acts = [stacked]
    pre = []
    h = stacked
    for i, (w, bias) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + bias
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    q_all = acts[-1]

    next_norm = stacked[b:]
    chosen = np.argmax(q_all[b:], axis=1)
    q_next = forward_batch(target, next_norm)[rows, chosen]
    y = batch.rewards + gamma * q_next * ~batch.dones

    err = q_all[rows, batch.actions] - y
    delta = np.zeros((b, net.sizes[-1]), dtype=net.dtype)
    delta[rows, batch.actions] = (net.dtype.type(2.0 / b)) * err

    a = net.dtype.type(alpha)
    for i in range(last, -1, -1):
        if i < last:
            delta = delta * (pre[i][:b] > 0)
        grad_w = acts[i][:b].T @ delta
        grad_b = delta.sum(axis=0)
        if i > 0:
            delta = delta @ net.weights[i].T
        net.weights[i] -= a * grad_w
        net.biases[i] -= a * grad_b


@dataclass
class EvalRecord:
    """One periodic-evaluation row produced during training."""

    iteration: int
    average_return: float
    measurement_log: list[list[Measurement]]
    episode_return: float   # return of the measurement-generating episode


def greedy_rollout(env, net: QNetwork, episode_seed) -> tuple[float, list[list[Measurement]]]:
    """One full greedy episode; returns (return, per-step measurement lists)."""
    obs = env.reset(episode_seed)
    total = 0.0
    log = []
    while True:
        res = env.step(greedy_action(net, obs))
        total += res.reward
        log.append(res.measurements)
        obs = res.observation
        if res.done:
            return total, log


def train(env, cfg: TrainConfig, progress=None):
    """Collect episodes with epsilon-greedy behaviour, take one gradient step
    per collected step once the replay warmup has filled, hard-sync the target
    weights on a fixed period, and evaluate the greedy policy periodically.

    The evaluation schedule is every cfg.eval_interval iterations plus the
    final iteration, so short runs still produce one record. Returns
    (trained network, list of EvalRecord). Deterministic given cfg.rng_seed.
    """
    obs_size = env.observation_size
    sizes = (obs_size, *cfg.hidden_sizes, N_ACTIONS)
    net = QNetwork.initialize(sizes, np.random.default_rng(subseed(cfg.rng_seed, TAG_INIT)),
                              dtype=cfg.dtype)
    target = net.copy()
    buffer = ReplayBuffer(cfg.buffer_capacity, obs_size)
    behavior_rng = np.random.default_rng(subseed(cfg.rng_seed, TAG_BEHAVIOR))
    sampler_rng = np.random.default_rng(subseed(cfg.rng_seed, TAG_SAMPLER))

    records: list[EvalRecord] = []
    grad_steps = 0
    batch_rows = np.arange(cfg.batch_size)
    warmup = max(cfg.batch_size, cfg.learning_starts)
    with threadpool_limits(limits=1):
        for it in range(1, cfg.iterations + 1):
            for ep in range(cfg.episodes_per_iteration):
                obs = env.reset(subseed(cfg.rng_seed, TAG_TRAIN_EP, it, ep))
                collected = 0
                while True:
                    eps = cfg.epsilon_at(grad_steps)
                    q = forward(net, normalize_obs(obs))
                    action = epsilon_greedy(q, eps, behavior_rng)
                    res = env.step(action)
                    buffer.push(Transition(obs, action, res.reward, res.observation, res.done))
                    obs = res.observation
                    collected += 1
                    if res.done:
                        break
                for _ in range(collected):
                    if len(buffer) < warmup:
                        break
                    batch = buffer.sample(cfg.batch_size, sampler_rng)
                    _fused_train_step(net, target, batch, cfg.gamma, cfg.alpha, batch_rows)
                    net.check_finite()
                    grad_steps += 1
                    if grad_steps % cfg.target_sync_period == 0:
                        target = net.copy()

            if it % cfg.eval_interval == 0 or it == cfg.iterations:
                returns = [
                    greedy_rollout(env, net, subseed(cfg.rng_seed, TAG_EVAL_EP, it, e))[0]
                    for e in range(cfg.eval_episodes)
                ]
                meas_return, meas_log = _measurement_episode(env, net, cfg, it)
                records.append(EvalRecord(
                    iteration=it,
                    average_return=float(np.mean(returns)),
                    measurement_log=meas_log,
                    episode_return=meas_return,
                ))
                if progress is not None:
                    progress(records[-1])
    return net, records


def _measurement_episode(env, net, cfg, it):
    ret, log = greedy_rollout(env, net, subseed(cfg.rng_seed, TAG_MEAS_EP, it))
    return ret, log
