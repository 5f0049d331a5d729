"""DDPG search over layer-wise keep ratios.

Deterministic-policy actor-critic with target networks and a FIFO replay
buffer. Episodes walk the prunable layers in order; the reward (top-1
accuracy of the pruned model) is only measurable once the whole strategy
is applied, so intermediate transitions carry reward 0 and the episode
reward rides on the terminal transition. A moving-average baseline is
subtracted inside the Bellman target to tame gradient variance.

The search loop is written against a small environment protocol
(begin_episode / apply / finish) so it can be driven by the real pruning
environment or by analytic test environments.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import modelgraph as mg
from . import pruning as pr
from .engine import mlp
from .errors import InvalidArgumentError

STATE_DIM = len(pr.STATE_FIELDS)  # 11


@dataclass
class AgentConfig:
    buffer_capacity: int = 500
    episodes: int = 400
    batch_size: int = 64
    gamma: float = 1.0
    sigma0: float = 0.5
    warmup_episodes: int = 100
    sigma_decay: float = 0.98
    baseline_decay: float = 0.95
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    tau: float = 0.01
    a_min: float = pr.A_MIN_DEFAULT
    hidden: tuple = (300, 300)
    seed: int = 0

    def validate(self):
        positive = (
            self.buffer_capacity, self.episodes, self.batch_size, self.sigma0,
            self.actor_lr, self.critic_lr, self.tau,
        )
        if any(v <= 0 for v in positive):
            raise InvalidArgumentError("agent config values must be positive")
        if not 0 <= self.gamma <= 1:
            raise InvalidArgumentError(f"gamma must be in [0,1], got {self.gamma}")


@dataclass
class Transition:
    s: np.ndarray
    a: float
    r: float
    s_next: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Capacity-bounded FIFO ring of transitions."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidArgumentError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._items = deque(maxlen=capacity)

    def push(self, t: Transition):
        self._items.append(t)

    def sample(self, rng: np.random.Generator, k: int):
        idx = rng.choice(len(self._items), size=k, replace=False)
        return [self._items[i] for i in idx]

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


@dataclass
class AgentNets:
    actor: mlp.MlpNet
    critic: mlp.MlpNet
    actor_target: mlp.MlpNet
    critic_target: mlp.MlpNet


def make_nets(config: AgentConfig, rng: np.random.Generator, state_dim: int = STATE_DIM) -> AgentNets:
    actor_dims = [state_dim, *config.hidden, 1]
    critic_dims = [state_dim + 1, *config.hidden, 1]
    actor = mlp.mlp_init(actor_dims, output_activation=mlp.SIGMOID, rng=rng)
    critic = mlp.mlp_init(critic_dims, output_activation=mlp.IDENTITY, rng=rng)
    return AgentNets(actor, critic, actor.copy(), critic.copy())


def policy(nets: AgentNets, state: np.ndarray, a_min: float, target: bool = False) -> float:
    net = nets.actor_target if target else nets.actor
    y, _ = mlp.mlp_forward(net, state)
    return float(min(1.0, max(a_min, y[0])))


def select_action(
    nets: AgentNets,
    state: np.ndarray,
    sigma: float,
    explore: bool,
    rng: np.random.Generator = None,
    a_min: float = pr.A_MIN_DEFAULT,
) -> float:
    """Policy output, optionally with truncated-normal exploration noise.

    Sampling is by rejection inside [a_min, 1] with a 100-attempt cap,
    after which the last draw is clamped (deterministic fallback).
    """
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")
    mu, _ = mlp.mlp_forward(nets.actor, state)
    mu = float(mu[0])
    if not explore or sigma == 0.0:
        return float(min(1.0, max(a_min, mu)))
    if rng is None:
        rng = np.random.default_rng()
    draw = mu
    for _ in range(100):
        draw = mu + sigma * rng.standard_normal()
        if a_min <= draw <= 1.0:
            return float(draw)
    return float(min(1.0, max(a_min, draw)))


def compute_target(t: Transition, nets: AgentNets, baseline: float, gamma: float) -> float:
    """Bellman target y through the target networks; terminal drops the tail."""
    if t.terminal:
        return t.r - baseline
    a_next, _ = mlp.mlp_forward(nets.actor_target, t.s_next)
    q_next, _ = mlp.mlp_forward(nets.critic_target, np.concatenate([t.s_next, a_next]))
    return t.r - baseline + gamma * float(q_next[0])


def critic_update(nets: AgentNets, batch, baseline: float, gamma: float, lr: float) -> float:
    """One SGD step on the mean squared Bellman residual; returns pre-step loss."""
    if not batch:
        raise InvalidArgumentError("critic update needs a non-empty batch")
    n = len(batch)
    xs = np.stack([np.concatenate([t.s, [t.a]]) for t in batch])
    ys = np.array([[compute_target(t, nets, baseline, gamma)] for t in batch])
    q, cache = mlp.mlp_forward(nets.critic, xs)
    loss = float(np.mean((ys - q) ** 2))
    grads = mlp.mlp_backward(nets.critic, cache, 2.0 * (q - ys) / n)
    nets.critic = mlp.sgd_step(nets.critic, grads, lr)
    return loss


def actor_update(nets: AgentNets, batch, lr: float) -> float:
    """Gradient ascent on mean Q(s, mu(s)); returns the pre-step objective."""
    if not batch:
        raise InvalidArgumentError("actor update needs a non-empty batch")
    n = len(batch)
    states = np.stack([t.s for t in batch])
    actions, actor_cache = mlp.mlp_forward(nets.actor, states)
    q, critic_cache = mlp.mlp_forward(nets.critic, np.hstack([states, actions]))
    objective = float(np.mean(q))
    dq = np.full((n, 1), 1.0 / n)
    dx = mlp.mlp_backward(nets.critic, critic_cache, dq).x
    da = dx[:, -1:]  # gradient w.r.t. the action input of the critic
    grads = mlp.mlp_backward(nets.actor, actor_cache, da)
    nets.actor = mlp.sgd_step(nets.actor, grads.scaled(-1.0), lr)  # ascent
    return objective


def soft_update(nets: AgentNets, tau: float):
    """target <- tau * main + (1 - tau) * target, elementwise, both nets."""
    for main, target in ((nets.actor, nets.actor_target), (nets.critic, nets.critic_target)):
        for tp, mp in zip(target.weights + target.biases, main.weights + main.biases):
            tp *= 1.0 - tau
            tp += tau * mp


def sigma_for_episode(config: AgentConfig, episode: int) -> float:
    """Fixed sigma0 during warmup, exponential decay afterwards."""
    if episode < config.warmup_episodes:
        return config.sigma0
    return config.sigma0 * config.sigma_decay ** (episode - config.warmup_episodes + 1)


@dataclass
class SearchResult:
    best_actions: dict
    best_reward: float
    best_episode: int
    trace: list = field(default_factory=list)  # per episode: reward, sigma, baseline

    def trace_rows(self):
        return [
            (i, t["reward"], t["sigma"], t["baseline"]) for i, t in enumerate(self.trace)
        ]


def ddpg_search(env, config: AgentConfig) -> SearchResult:
    """Algorithm core: episode loop, exploration, replay, net updates.

    `env` must expose state_dim, begin_episode() -> s1, apply(raw) ->
    (action, s_next | None, terminal), finish() -> reward, and actions.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    nets = make_nets(config, rng, state_dim=env.state_dim)
    buffer = ReplayBuffer(config.buffer_capacity)
    baseline = None
    best = SearchResult({}, -math.inf, -1)
    trace = []
    for ep in range(config.episodes):
        sigma = sigma_for_episode(config, ep)
        s = env.begin_episode()
        pending = []
        terminal = False
        while not terminal:
            raw = select_action(nets, s, sigma, explore=True, rng=rng, a_min=config.a_min)
            action, s_next, terminal = env.apply(raw)
            pending.append((s, action, s_next, terminal))
            if len(buffer) >= config.batch_size:
                batch = buffer.sample(rng, config.batch_size)
                critic_update(nets, batch, baseline or 0.0, config.gamma, config.critic_lr)
                actor_update(nets, batch, config.actor_lr)
                soft_update(nets, config.tau)
            if not terminal:
                s = s_next
        reward = float(env.finish())
        if baseline is None:
            baseline = reward
        else:
            baseline = config.baseline_decay * baseline + (1 - config.baseline_decay) * reward
        zero = np.zeros(env.state_dim)
        for s_i, a_i, sn_i, term_i in pending:
            buffer.push(
                Transition(s_i, a_i, reward if term_i else 0.0, zero if sn_i is None else sn_i, term_i)
            )
        trace.append({"reward": reward, "sigma": sigma, "baseline": baseline})
        if reward > best.best_reward:
            best = SearchResult(dict(env.actions), reward, ep)
    best.trace = trace
    return best


class PruningEnv:
    """Episode environment over a real model: clamp, prune, score accuracy."""

    state_dim = STATE_DIM

    def __init__(self, graph: mg.ModelGraph, valset: mg.ValidationSet, budget: float,
                 a_min: float = pr.A_MIN_DEFAULT):
        pr.check_budget_feasible(budget, a_min)
        self.pristine = graph
        self.valset = valset
        self.budget = budget
        self.a_min = a_min
        self.normalizer = pr.make_normalizer(graph, pr.make_ledger(graph))
        self.prunable = graph.prunable_indices
        self.work = None
        self.ledger = None
        self.actions = {}
        self._step = 0

    @property
    def num_steps(self):
        return len(self.prunable)

    def begin_episode(self):
        # the search evaluates strategies; every episode starts unpruned
        self.work = self.pristine.copy()
        self.ledger = pr.make_ledger(self.work)
        self.actions = {}
        self._step = 0
        return self._state(a_prev=1.0)

    def _state(self, a_prev):
        return pr.build_state(
            self.work, self.prunable[self._step], self.ledger, a_prev, self.normalizer
        ).normalized

    def apply(self, raw_action: float):
        idx = self.prunable[self._step]
        action = pr.clamp_action_for_budget(raw_action, idx, self.ledger, self.budget, self.a_min)
        pr.apply_action(self.work, idx, action, self.ledger)
        self.actions[idx] = action
        self._step += 1
        terminal = self._step >= len(self.prunable)
        s_next = None if terminal else self._state(a_prev=action)
        return action, s_next, terminal

    def finish(self) -> float:
        return pr.evaluate_accuracy(self.work, self.valset, k_list=(1,)).top_k[1]


def run_search(graph: mg.ModelGraph, valset: mg.ValidationSet, config: AgentConfig,
               budget: float):
    """Stage-1 optimization: returns (best PruningStrategy, SearchResult)."""
    env = PruningEnv(graph, valset, budget, config.a_min)
    result = ddpg_search(env, config)
    _, _, strategy = pr.apply_strategy(graph, result.best_actions)
    return strategy, result
