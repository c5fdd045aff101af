"""Centralized-critic training for delay-aware teams.

Training is centralized, execution decentralized: each agent owns a critic
over every agent's observations, delay estimates, actions, and waiting
times. Per update step the critic regresses on soft-target TD values, the
actor chain (encoder -> aggregator -> actor) ascends the critic, and the
waiting-time network ascends through a sigmoid-relaxed message-inclusion
path plus the critic's direct waiting-time input.

Message exchange is regenerated from stored observations during updates:
the per-peer delay estimates stored in the transition stand in for the
channel, and buffered fallbacks are not reconstructed (an unavailable peer
is simply absent), which keeps the inclusion gradient informative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import MLP, ParamBlock, Tensor
from .agent import DACOM, Team, TeamSpec
from .metrics import EpisodeMetrics
from .netchan import RadioParams, channel_state

__all__ = [
    "Hyper",
    "Transition",
    "ReplayBuffer",
    "Critic",
    "Trainer",
    "TrainingDiverged",
    "soft_update",
    "q_value",
    "train",
    "evaluate",
    "TrainResult",
]


@dataclass
class Hyper:
    """Training constants; the defaults are the reference settings."""

    lr: float = 0.005
    gamma: float = 0.95
    xi: float = 0.01
    batch: int = 1024
    buffer: int = 100_000
    hidden: int = 64
    heads: int = 2
    msg_dim: int = 6
    update_every: int = 1
    warmup: int = 1024
    noise_std: float = 0.3
    noise_min: float = 0.05
    noise_decay: float = 0.6     # fraction of episodes over which noise anneals
    team_reward: bool = False
    reward_scale: float = 1.0    # critic-side only; metrics keep raw rewards
    ewma_alpha: float = 0.3
    kappa_fraction: float = 0.05


@dataclass
class Transition:
    """One replay record: everyone's observations, delay estimates, actions,
    waits, rewards, successor observations, and the terminal flag."""

    obs: np.ndarray        # (N, obs_dim)
    net_obs: np.ndarray    # (N, N-1)
    actions: np.ndarray    # (N, act_dim)
    waits: np.ndarray      # (N,)
    rewards: np.ndarray    # (N,)
    next_obs: np.ndarray
    next_net_obs: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring of transitions; batches sample uniformly without
    replacement."""

    def __init__(self, capacity: int, n_agents: int, obs_dim: int, act_dim: int):
        self.capacity = capacity
        net_dim = n_agents - 1
        self.obs = np.zeros((capacity, n_agents, obs_dim))
        self.net_obs = np.zeros((capacity, n_agents, net_dim))
        self.actions = np.zeros((capacity, n_agents, act_dim))
        self.waits = np.zeros((capacity, n_agents))
        self.rewards = np.zeros((capacity, n_agents))
        self.next_obs = np.zeros((capacity, n_agents, obs_dim))
        self.next_net_obs = np.zeros((capacity, n_agents, net_dim))
        self.done = np.zeros(capacity)
        self._next = 0
        self.size = 0

    def add(self, tr: Transition):
        k = self._next
        self.obs[k] = tr.obs
        self.net_obs[k] = tr.net_obs
        self.actions[k] = tr.actions
        self.waits[k] = tr.waits
        self.rewards[k] = tr.rewards
        self.next_obs[k] = tr.next_obs
        self.next_net_obs[k] = tr.next_net_obs
        self.done[k] = float(tr.done)
        self._next = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        if batch > self.size:
            raise ValueError("not enough transitions to sample")
        idx = rng.choice(self.size, size=batch, replace=False)
        return {
            "obs": self.obs[idx],
            "net_obs": self.net_obs[idx],
            "actions": self.actions[idx],
            "waits": self.waits[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "next_net_obs": self.next_net_obs[idx],
            "done": self.done[idx],
        }


class Critic:
    """Delay-aware action-value network for one agent."""

    def __init__(self, spec: TeamSpec, rng: np.random.Generator, tag: str):
        h = spec.hidden
        self.spec = spec
        in_dim = spec.n_agents * (spec.obs_dim + spec.net_dim + spec.act_dim + 1)
        init_rng = np.random.default_rng(rng.integers(2 ** 63))
        self.block = ParamBlock(f"{tag}.online.critic")
        self.mlp = MLP(self.block, "q", [in_dim, h, h, h, 1], init_rng)
        self.target_block = ParamBlock(f"{tag}.target.critic")
        self.target_mlp = MLP(self.target_block, "q", [in_dim, h, h, h, 1],
                              np.random.default_rng(0))
        self.target_block.copy_values_from(self.block)


def _flat_inputs(spec: TeamSpec, O: np.ndarray, Onet: np.ndarray) -> np.ndarray:
    B = O.shape[0]
    return np.concatenate([O.reshape(B, -1),
                           Onet.reshape(B, -1) / spec.step_interval], axis=1)


def q_value(critic: Critic, O: np.ndarray, Onet: np.ndarray, A: np.ndarray,
            D: np.ndarray, target: bool = False) -> np.ndarray:
    """Scalar value per batch row from plain arrays (no gradients)."""
    spec = critic.spec
    B = O.shape[0]
    x = np.concatenate([
        _flat_inputs(spec, O, Onet),
        A.reshape(B, -1),
        D.reshape(B, -1) / spec.step_interval,
    ], axis=1)
    mlp = critic.target_mlp if target else critic.mlp
    with ad.no_grad():
        out = mlp(Tensor(x))
    return out.data[:, 0]


def _q_graph(critic: Critic, O: np.ndarray, Onet: np.ndarray,
             a_cols: list, d_cols: list) -> Tensor:
    """Critic graph whose action/wait columns may be live tensors."""
    spec = critic.spec
    parts = [Tensor(_flat_inputs(spec, O, Onet))]
    parts.extend(a_cols)
    parts.extend(d_cols)
    return critic.mlp(ad.concat_cols(parts))


def soft_update(online: ParamBlock, target: ParamBlock, xi: float):
    """target <- xi * online + (1 - xi) * target, elementwise."""
    for name, src in online.items():
        dst = target[name]
        if dst.data.shape != src.data.shape:
            raise ValueError(f"shape mismatch for {name!r}")
        dst.data = xi * src.data + (1.0 - xi) * dst.data


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path


class Trainer:
    """Runs the update chains for one team and its critics."""

    def __init__(self, team: Team, critics: list[Critic], hyper: Hyper,
                 rng: np.random.Generator):
        if len(critics) != team.spec.n_agents:
            raise ValueError("one critic per agent required")
        self.team = team
        self.critics = critics
        self.hyper = hyper
        self.rng = rng

    # -- updates -----------------------------------------------------------

    def _zero_everything(self):
        for blk in self.team.online_blocks():
            blk.zero_grads()
        for c in self.critics:
            c.block.zero_grads()

    def critic_update(self, batch: dict[str, np.ndarray]) -> float:
        """One Adam step per critic on the TD loss; returns the mean loss."""
        team, hyper = self.team, self.hyper
        spec = team.spec
        A_next, D_next = team.target_decisions(batch["next_obs"], batch["next_net_obs"])
        not_done = 1.0 - batch["done"]
        losses = []
        for i, critic in enumerate(self.critics):
            q_next = q_value(critic, batch["next_obs"], batch["next_net_obs"],
                             A_next, D_next, target=True)
            y = hyper.reward_scale * batch["rewards"][:, i] \
                + hyper.gamma * not_done * q_next
            a_cols = [Tensor(batch["actions"][:, j, :]) for j in range(spec.n_agents)]
            d_cols = [Tensor(batch["waits"][:, j:j + 1] / spec.step_interval)
                      for j in range(spec.n_agents)]
            q = _q_graph(critic, batch["obs"], batch["net_obs"], a_cols, d_cols)
            err = ad.sub(q, Tensor(y[:, None]))
            loss = ad.mean_all(ad.square(err))
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDiverged(f"critic {i} loss is not finite")
            ad.backward(loss)
            ad.adam_step(critic.block, hyper.lr)
            losses.append(value)
        self._zero_everything()
        return float(np.mean(losses))

    def actor_update(self, i: int, batch: dict[str, np.ndarray],
                     payloads=None) -> float:
        """Ascent on agent i's encoder, aggregator, and actor; other agents'
        actions and every wait come from the batch. Returns the gradient
        norm that was applied."""
        team, hyper = self.team, self.hyper
        spec = team.spec
        a_i, blocks = team.action_graph(i, batch["obs"], batch["net_obs"],
                                        batch["waits"], payloads=payloads)
        a_cols = [a_i if j == i else Tensor(batch["actions"][:, j, :])
                  for j in range(spec.n_agents)]
        d_cols = [Tensor(batch["waits"][:, j:j + 1] / spec.step_interval)
                  for j in range(spec.n_agents)]
        q = _q_graph(self.critics[i], batch["obs"], batch["net_obs"], a_cols, d_cols)
        loss = ad.scale(ad.mean_all(q), -1.0)
        if not math.isfinite(loss.item()):
            raise TrainingDiverged(f"actor {i} objective is not finite")
        ad.backward(loss)
        norm = math.sqrt(sum(b.grad_norm() ** 2 for b in blocks))
        for blk in blocks:
            ad.adam_step(blk, hyper.lr)
        self._zero_everything()
        return norm

    def timenet_update(self, i: int, batch: dict[str, np.ndarray],
                       payloads=None) -> float:
        """Ascent on agent i's waiting-time network through the relaxed
        message-inclusion chain and the critic's wait input."""
        team, hyper = self.team, self.hyper
        spec = team.spec
        a_i, d_i, blocks = team.timenet_graph(i, batch["obs"], batch["net_obs"],
                                              payloads=payloads)
        a_cols = [a_i if j == i else Tensor(batch["actions"][:, j, :])
                  for j in range(spec.n_agents)]
        d_cols = [ad.scale(d_i, 1.0 / spec.step_interval) if j == i
                  else Tensor(batch["waits"][:, j:j + 1] / spec.step_interval)
                  for j in range(spec.n_agents)]
        q = _q_graph(self.critics[i], batch["obs"], batch["net_obs"], a_cols, d_cols)
        loss = ad.scale(ad.mean_all(q), -1.0)
        if not math.isfinite(loss.item()):
            raise TrainingDiverged(f"timenet {i} objective is not finite")
        ad.backward(loss)
        norm = math.sqrt(sum(b.grad_norm() ** 2 for b in blocks))
        for blk in blocks:
            ad.adam_step(blk, hyper.lr)
        self._zero_everything()
        return norm

    def update(self, batch: dict[str, np.ndarray]) -> float:
        try:
            loss = self.critic_update(batch)
            payloads = None
            if self.team.communicates:
                payloads = self.team._messages_nograd(batch["obs"],
                                                      batch["net_obs"])
            for i in range(self.team.spec.n_agents):
                self.actor_update(i, batch, payloads=payloads)
                if self.team.kind_name == DACOM:
                    self.timenet_update(i, batch, payloads=payloads)
        except ad.NonFiniteError as exc:
            raise TrainingDiverged(f"non-finite value during update: {exc}") from exc
        self.soft_update_targets()
        return loss

    def soft_update_targets(self):
        xi = self.hyper.xi
        for online, target in self.team.block_pairs():
            soft_update(online, target, xi)
        for c in self.critics:
            soft_update(c.block, c.target_block, xi)


# ---------------------------------------------------------------------------
# rollouts and the outer loop


@dataclass
class TrainResult:
    metrics: list[EpisodeMetrics]
    checkpoint: dict[str, np.ndarray]
    final_loss: float | None = None


def _checkpoint_arrays(team: Team, critics: list[Critic] | None) -> dict[str, np.ndarray]:
    arrays = team.parameter_arrays()
    if critics is not None:
        for i, c in enumerate(critics):
            arrays.update(c.block.named_arrays(f"critic{i}/online/"))
            arrays.update(c.target_block.named_arrays(f"critic{i}/target/"))
    return arrays


def load_critic_arrays(critics: list[Critic], arrays: dict[str, np.ndarray]):
    for i, c in enumerate(critics):
        c.block.load_arrays(arrays, f"critic{i}/online/")
        c.target_block.load_arrays(arrays, f"critic{i}/target/")


def run_episode(env, team: Team, radio: RadioParams, map_scale: float,
                episode_index: int, rng_env: np.random.Generator,
                rng_explore: np.random.Generator | None,
                explore: tuple[float, float] | None,
                on_transition=None, trajectory_writer=None) -> EpisodeMetrics:
    """One episode; optionally reports every transition to `on_transition`
    and streams per-step kinematics records to `trajectory_writer` (lines of
    "step,entity,x,y,vx,vy,d")."""
    obs = env.reset(rng_env)
    team.reset()
    rewards_total = np.zeros(env.n_agents)
    wait_sum = 0.0
    msg_ratio_sum = 0.0
    collisions = 0
    arrivals = 0
    win = False
    steps = 0
    done = False
    while not done:
        channel = None
        if team.communicates:
            channel = channel_state(env.positions() * map_scale, radio)
        decision = team.step(obs, channel, steps, explore=explore, rng=rng_explore)
        next_obs, rewards, done, info = env.step(decision.actions, decision.waits)
        next_net = team.comms.net_observations()
        if trajectory_writer is not None:
            pos, vel = env.agent_kinematics()
            for k in range(env.n_agents):
                record = (steps, k, float(pos[k, 0]), float(pos[k, 1]),
                          float(vel[k, 0]), float(vel[k, 1]),
                          float(decision.waits[k]))
                trajectory_writer.write(
                    ",".join(repr(v) if isinstance(v, float) else str(v)
                             for v in record) + "\n")
        if on_transition is not None:
            on_transition(Transition(
                obs=obs, net_obs=decision.net_obs, actions=decision.actions,
                waits=decision.waits, rewards=rewards, next_obs=next_obs,
                next_net_obs=next_net, done=bool(info.get("terminal", False))))
        rewards_total += rewards
        wait_sum += float(decision.waits.mean()) / env.dt
        msg_ratio_sum += decision.msg_delay_ratio
        collisions += info["collisions"]
        if env.spec.scenario == "pp":
            arrivals += info["arrivals"]
        else:
            arrivals = info.get("arrived_total", info["arrivals"])
        win = win or bool(info["win"])
        obs = next_obs
        steps += 1
    return EpisodeMetrics(
        episode=episode_index,
        rewards=tuple(float(r) for r in rewards_total),
        wait_ratio=wait_sum / max(steps, 1),
        msg_delay_ratio=msg_ratio_sum / max(steps, 1),
        collisions=int(collisions),
        arrivals=int(arrivals),
        win=bool(win),
    )


def _noise_at(hyper: Hyper, episode: int, episodes: int) -> float:
    horizon = max(1.0, hyper.noise_decay * episodes)
    frac = max(0.0, 1.0 - episode / horizon)
    return max(hyper.noise_min, hyper.noise_std * frac)


def train(env, team: Team, critics: list[Critic], hyper: Hyper, episodes: int,
          seed: int, radio: RadioParams, map_scale: float,
          progress=None) -> TrainResult:
    """Full training run; reproducible as a function of `seed`.

    Raises TrainingDiverged when any loss goes non-finite, attaching a
    checkpoint of the diverged state to the exception.
    """
    ss = np.random.SeedSequence(seed)
    seeds = ss.spawn(3)
    rng_episodes = np.random.default_rng(seeds[0])
    rng_explore = np.random.default_rng(seeds[1])
    rng_replay = np.random.default_rng(seeds[2])

    buffer = ReplayBuffer(hyper.buffer, env.n_agents, env.obs_dim, env.act_dim)
    trainer = Trainer(team, critics, hyper, rng_replay)
    metrics: list[EpisodeMetrics] = []

    state = {"step_count": 0, "last_loss": None}

    def store_and_learn(tr: Transition):
        if hyper.team_reward:
            tr.rewards = np.full_like(tr.rewards, tr.rewards.mean())
        buffer.add(tr)
        state["step_count"] += 1
        if buffer.size >= max(hyper.warmup, hyper.batch) \
                and state["step_count"] % hyper.update_every == 0:
            batch = buffer.sample(hyper.batch, rng_replay)
            state["last_loss"] = trainer.update(batch)

    for ep in range(episodes):
        noise = _noise_at(hyper, ep, episodes)
        rng_env = np.random.default_rng(rng_episodes.integers(2 ** 63))
        try:
            row = run_episode(env, team, radio, map_scale, ep, rng_env,
                              rng_explore, explore=(noise, noise * 2.0),
                              on_transition=store_and_learn)
        except TrainingDiverged as exc:
            exc.dump = _checkpoint_arrays(team, critics)
            raise
        metrics.append(row)
        if progress is not None:
            progress(row)
    last_loss = state["last_loss"]
    return TrainResult(metrics=metrics,
                       checkpoint=_checkpoint_arrays(team, critics),
                       final_loss=last_loss)


def evaluate(env, team: Team, episodes: int, seed: int, radio: RadioParams,
             map_scale: float, trajectory_writer=None) -> list[EpisodeMetrics]:
    """Frozen-policy rollouts (no exploration noise, no updates)."""
    rng_episodes = np.random.default_rng(np.random.SeedSequence(seed))
    rows = []
    for ep in range(episodes):
        rng_env = np.random.default_rng(rng_episodes.integers(2 ** 63))
        rows.append(run_episode(env, team, radio, map_scale, ep, rng_env,
                                None, explore=None,
                                trajectory_writer=trajectory_writer))
    return rows
