"""Per-agent machinery: encoding, waiting-time scheduling, message buffers,
attention aggregation, and action selection.

Each agent encodes its observation into a fixed-width message, broadcasts
it over the channel, decides how long to wait for peers' messages, and acts
on the attention-aggregated set of whatever arrived in time plus buffered
leftovers. The same forward graphs serve both execution (batch of one,
gradients off) and training (batched, gradients on), so there is a single
source of truth for every network.

Slot ordering is fixed everywhere: peers appear sorted by agent index, and
message sets are sorted by (sender, sent_step) before aggregation, which
makes attention output bit-exactly invariant to arrival order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import MLP, MultiHeadAttention, ParamBlock, Tensor

__all__ = [
    "Observation",
    "Message",
    "Delivery",
    "MessageBuffer",
    "DelayEstimator",
    "AgentNets",
    "LocalAgentNets",
    "CommsState",
    "TeamSpec",
    "Team",
    "StepDecision",
    "encode",
    "schedule_wait",
    "collect",
    "aggregate",
    "act",
]

DACOM = "dacom"


@dataclass
class Observation:
    """Local environment features plus per-peer delay estimates (seconds)."""

    local: np.ndarray
    net: np.ndarray

    def __post_init__(self):
        self.local = np.asarray(self.local, dtype=np.float64)
        self.net = np.asarray(self.net, dtype=np.float64)
        if np.any(self.net < 0):
            raise ValueError("net observation entries must be >= 0")


@dataclass(eq=False)  # identity semantics; payload arrays have no useful ==
class Message:
    sender: int
    payload: np.ndarray
    sent_step: int
    arrival_offset: float  # total one-way delay (s)

    def __post_init__(self):
        if self.arrival_offset < 0:
            raise ValueError("arrival_offset must be >= 0")


@dataclass
class Delivery:
    """A message plus its arrival offset within the receiving step."""

    message: Message
    offset: float


class MessageBuffer:
    """Per-peer cache of the most recent received message.

    A slot's age is 0 exactly when it was refreshed this step. Arrivals that
    came too late for the agent's waiting threshold still refresh the slot,
    but only after action selection (they become visible next step).
    """

    def __init__(self):
        self._slots: dict[int, Message] = {}
        self._age: dict[int, int] = {}
        self._late: list[Message] = []
        self._refreshed: set[int] = set()

    def collect(self, d: float, deliveries: Sequence[Delivery]) -> list[Message]:
        """Messages usable at threshold d: current arrivals with offset <= d,
        plus the buffered message for every peer without a qualifying arrival.
        """
        current: list[Message] = []
        for dv in deliveries:
            if dv.offset <= d:
                current.append(dv.message)
            else:
                self._late.append(dv.message)
        heard = set()
        for msg in current:
            heard.add(msg.sender)
            slot = self._slots.get(msg.sender)
            if slot is None or msg.sent_step >= slot.sent_step:
                self._slots[msg.sender] = msg
            self._refreshed.add(msg.sender)
        available = list(current)
        for peer, slot in self._slots.items():
            if peer not in heard:
                available.append(slot)
        return available

    def finish_step(self):
        """Apply late refreshes and advance slot ages; call once per step."""
        for msg in self._late:
            slot = self._slots.get(msg.sender)
            if slot is None or msg.sent_step >= slot.sent_step:
                self._slots[msg.sender] = msg
            self._refreshed.add(msg.sender)
        self._late = []
        for peer in list(self._slots):
            self._age[peer] = 0 if peer in self._refreshed else self._age.get(peer, 0) + 1
        self._refreshed = set()

    def age(self, peer: int):
        return self._age.get(peer)

    def peers(self):
        return sorted(self._slots)


def collect(buffer: MessageBuffer, d: float, deliveries: Sequence[Delivery]) -> list[Message]:
    return buffer.collect(d, deliveries)


class DelayEstimator:
    """Exponentially weighted moving average of realized per-peer delays.

    Peers never heard from carry the configured prior (default: the step
    interval).
    """

    def __init__(self, peer_ids: Sequence[int], alpha: float, prior: float):
        if not (0.0 < alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        self.peer_ids = list(peer_ids)
        self.alpha = alpha
        self._est = np.full(len(self.peer_ids), float(prior))
        self._slot = {p: k for k, p in enumerate(self.peer_ids)}

    def update(self, peer: int, sample: float):
        k = self._slot[peer]
        self._est[k] = self.alpha * sample + (1.0 - self.alpha) * self._est[k]

    def snapshot(self) -> np.ndarray:
        return self._est.copy()


# ---------------------------------------------------------------------------
# network bundles


@dataclass(frozen=True)
class TeamSpec:
    """Widths and constants every agent's networks are built from."""

    n_agents: int
    obs_dim: int
    act_dim: int
    step_interval: float
    msg_dim: int = 6
    heads: int = 2
    hidden: int = 64
    ewma_alpha: float = 0.3
    kappa_fraction: float = 0.05  # sigmoid relaxation width, as a fraction of dt

    @property
    def net_dim(self) -> int:
        return self.n_agents - 1

    @property
    def in_dim(self) -> int:
        return self.obs_dim + self.net_dim


class AgentNets:
    """One communicating agent's parameters: encoder, timenet, aggregator,
    actor, and target copies of each. Every component owns its own parameter
    block so updates can step exactly the parameters they are meant to."""

    def __init__(self, spec: TeamSpec, rng: np.random.Generator, tag: str,
                 use_timenet: bool = True):
        h, m = spec.hidden, spec.msg_dim
        self.spec = spec
        self.use_timenet = use_timenet

        def build(prefix, seed_rng):
            blocks = {
                "encoder": ParamBlock(f"{tag}.{prefix}.encoder"),
                "timenet": ParamBlock(f"{tag}.{prefix}.timenet"),
                "aggregator": ParamBlock(f"{tag}.{prefix}.aggregator"),
                "actor": ParamBlock(f"{tag}.{prefix}.actor"),
            }
            enc = MLP(blocks["encoder"], "enc", [spec.in_dim, h, h, m], seed_rng)
            tau = (MLP(blocks["timenet"], "tau", [spec.in_dim, h, h, h, 1], seed_rng)
                   if use_timenet else None)
            agg = MultiHeadAttention(blocks["aggregator"], "agg", m, spec.heads, seed_rng)
            actor = MLP(blocks["actor"], "actor", [2 * m, h, h, h, spec.act_dim], seed_rng)
            return blocks, enc, tau, agg, actor

        init_rng = np.random.default_rng(rng.integers(2 ** 63))
        self.blocks, self.encoder, self.timenet, self.aggregator, self.actor = \
            build("online", init_rng)
        self.target_blocks, self.target_encoder, self.target_timenet, \
            self.target_aggregator, self.target_actor = \
            build("target", np.random.default_rng(0))
        for name, blk in self.target_blocks.items():
            blk.copy_values_from(self.blocks[name])

    def component_pairs(self):
        return [(self.blocks[k], self.target_blocks[k]) for k in self.blocks
                if self.use_timenet or k != "timenet"]

    def actor_side_blocks(self) -> list[ParamBlock]:
        return [self.blocks["encoder"], self.blocks["aggregator"], self.blocks["actor"]]

    def all_online_blocks(self) -> list[ParamBlock]:
        return [b for k, b in self.blocks.items() if self.use_timenet or k != "timenet"]


class LocalAgentNets:
    """Non-communicating agent: a single actor over the local observation."""

    def __init__(self, spec: TeamSpec, rng: np.random.Generator, tag: str):
        h = spec.hidden
        self.spec = spec
        init_rng = np.random.default_rng(rng.integers(2 ** 63))
        self.blocks = {"actor": ParamBlock(f"{tag}.online.actor")}
        self.actor = MLP(self.blocks["actor"], "actor",
                         [spec.obs_dim, h, h, h, spec.act_dim], init_rng)
        self.target_blocks = {"actor": ParamBlock(f"{tag}.target.actor")}
        self.target_actor = MLP(self.target_blocks["actor"], "actor",
                                [spec.obs_dim, h, h, h, spec.act_dim],
                                np.random.default_rng(0))
        self.target_blocks["actor"].copy_values_from(self.blocks["actor"])

    def component_pairs(self):
        return [(self.blocks["actor"], self.target_blocks["actor"])]

    def actor_side_blocks(self) -> list[ParamBlock]:
        return [self.blocks["actor"]]

    def all_online_blocks(self) -> list[ParamBlock]:
        return [self.blocks["actor"]]


# ---------------------------------------------------------------------------
# single-agent operations (execution form: batch of one, gradients off)


def _net_input(obs: Observation, dt: float) -> np.ndarray:
    return np.concatenate([obs.local, obs.net / dt])[None, :]


def encode(nets: AgentNets, obs: Observation) -> np.ndarray:
    """Fixed-width message payload from the agent's observation."""
    with ad.no_grad():
        out = nets.encoder(Tensor(_net_input(obs, nets.spec.step_interval)))
    return out.data[0]


def schedule_wait(nets: AgentNets, obs: Observation, step_interval: float,
                  pre_noise: float = 0.0) -> float:
    """Waiting time in [0, step_interval]: dt * sigmoid(timenet + noise)."""
    with ad.no_grad():
        pre = nets.timenet(Tensor(_net_input(obs, step_interval)))
        d = step_interval * float(ad.sigmoid(ad.shift(pre, pre_noise)).data[0, 0])
    return d


def aggregate(nets: AgentNets, own_payload: np.ndarray,
              others: Sequence[Message]) -> np.ndarray:
    """Attention over the agent's own message and the available set.

    Permutation-invariant over `others`: slots are sorted by
    (sender, sent_step) before attention, so any input ordering produces a
    bit-identical output.
    """
    ordered = sorted(others, key=lambda msg: (msg.sender, msg.sent_step))
    with ad.no_grad():
        query = Tensor(own_payload[None, :])
        slots = [query] + [Tensor(msg.payload[None, :]) for msg in ordered]
        out = nets.aggregator(query, ad.stack_rows(slots))
    return out.data[0]


def act(nets: AgentNets, own_payload: np.ndarray, aggregated: np.ndarray) -> np.ndarray:
    """Action in [-1, 1]^act_dim from the own and aggregated messages."""
    with ad.no_grad():
        x = Tensor(np.concatenate([own_payload, aggregated])[None, :])
        out = ad.tanh(nets.actor(x))
    return out.data[0]


# ---------------------------------------------------------------------------
# communication state shared by a team


class CommsState:
    """In-flight messages, per-agent buffers, and per-agent delay estimators."""

    def __init__(self, n_agents: int, dt: float, alpha: float, prior: float):
        self.n_agents = n_agents
        self.dt = dt
        self.buffers = [MessageBuffer() for _ in range(n_agents)]
        self.estimators = [
            DelayEstimator([j for j in range(n_agents) if j != i], alpha, prior)
            for i in range(n_agents)
        ]
        self._scheduled: dict[int, list[tuple[int, Delivery]]] = {}

    def send(self, sender: int, receiver: int, payload: np.ndarray, total_delay: float,
             step: int):
        """Schedule a message; an infinite delay never arrives."""
        if not math.isfinite(total_delay):
            return
        steps_ahead = max(0, math.ceil(total_delay / self.dt) - 1)
        offset = total_delay - steps_ahead * self.dt
        msg = Message(sender=sender, payload=payload, sent_step=step,
                      arrival_offset=total_delay)
        self._scheduled.setdefault(step + steps_ahead, []).append(
            (receiver, Delivery(message=msg, offset=offset)))

    def deliveries(self, step: int) -> list[list[Delivery]]:
        per_agent: list[list[Delivery]] = [[] for _ in range(self.n_agents)]
        for receiver, dv in self._scheduled.pop(step, []):
            per_agent[receiver].append(dv)
        return per_agent

    def net_observations(self) -> np.ndarray:
        return np.stack([est.snapshot() for est in self.estimators])

    def record_arrivals(self, receiver: int, deliveries: Sequence[Delivery]):
        for dv in deliveries:
            self.estimators[receiver].update(dv.message.sender, dv.message.arrival_offset)

    def finish_step(self):
        for buf in self.buffers:
            buf.finish_step()


# ---------------------------------------------------------------------------
# a team of agents sharing one algorithm


@dataclass
class StepDecision:
    actions: np.ndarray        # (N, act_dim)
    waits: np.ndarray          # (N,) seconds
    net_obs: np.ndarray        # (N, N-1) estimates used for this decision
    msg_delay_ratio: float     # mean over agents of max accepted offset / dt
    messages_used: int


class Team:
    """All agents of one algorithm plus their shared communication mechanics.

    `kind` is None for the delay-aware policy; baseline kinds (duck-typed
    with .name and parameters) reuse the identical machinery, differing only
    in message topology and waiting-time rule.
    """

    def __init__(self, spec: TeamSpec, rng: np.random.Generator, kind=None,
                 net_prior: float | None = None):
        self.spec = spec
        self.kind = kind
        self.kind_name = DACOM if kind is None else kind.name
        self.dt = spec.step_interval
        self.net_prior = self.dt if net_prior is None else net_prior
        if self.kind_name == "nocomm":
            self.agents = [LocalAgentNets(spec, rng, f"agent{i}")
                           for i in range(spec.n_agents)]
        else:
            use_tau = self.kind_name == DACOM
            self.agents = [AgentNets(spec, rng, f"agent{i}", use_timenet=use_tau)
                           for i in range(spec.n_agents)]
        self.comms = CommsState(spec.n_agents, self.dt, spec.ewma_alpha, self.net_prior)

    # -- bookkeeping ---------------------------------------------------

    @property
    def communicates(self) -> bool:
        return self.kind_name != "nocomm"

    def reset(self):
        self.comms = CommsState(self.spec.n_agents, self.dt, self.spec.ewma_alpha,
                                self.net_prior)

    def block_pairs(self) -> list[tuple[ParamBlock, ParamBlock]]:
        pairs = []
        for a in self.agents:
            pairs.extend(a.component_pairs())
        return pairs

    def online_blocks(self) -> list[ParamBlock]:
        out = []
        for a in self.agents:
            out.extend(a.all_online_blocks())
        return out

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, a in enumerate(self.agents):
            for name, blk in a.blocks.items():
                if blk.tensors():
                    out.update(blk.named_arrays(f"agent{i}/online/{name}/"))
            for name, blk in a.target_blocks.items():
                if blk.tensors():
                    out.update(blk.named_arrays(f"agent{i}/target/{name}/"))
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        for i, a in enumerate(self.agents):
            for name, blk in a.blocks.items():
                if blk.tensors():
                    blk.load_arrays(arrays, f"agent{i}/online/{name}/")
            for name, blk in a.target_blocks.items():
                if blk.tensors():
                    blk.load_arrays(arrays, f"agent{i}/target/{name}/")

    # -- waiting-time rules ---------------------------------------------

    def _baseline_wait(self, i: int, channel_delays_in: np.ndarray | None) -> float:
        name = self.kind_name
        if name == "fullcomm":
            if channel_delays_in is None:
                return self.dt
            peer_delays = np.delete(channel_delays_in, i)
            return float(min(peer_delays.max(), self.dt))
        if name == "fixed":
            return self.kind.fraction * self.dt
        if name == "central":
            return self.kind.delay_ratio * self.dt
        raise ValueError(f"unknown baseline kind {name!r}")

    # -- execution -------------------------------------------------------

    def step(self, local_obs: np.ndarray, channel, step: int,
             explore: tuple[float, float] | None = None,
             rng: np.random.Generator | None = None) -> StepDecision:
        """Select every agent's action and waiting time for one step.

        `local_obs` is (N, obs_dim); `channel` is a ChannelState (ignored by
        the no-communication kind). Exploration adds Gaussian noise to
        actions and to the waiting-time pre-activation.
        """
        n = self.spec.n_agents
        net_obs = self.comms.net_observations()
        actions = np.zeros((n, self.spec.act_dim))
        waits = np.zeros(n)

        if not self.communicates:
            for i, nets in enumerate(self.agents):
                with ad.no_grad():
                    a = ad.tanh(nets.actor(Tensor(local_obs[i][None, :]))).data[0]
                if explore is not None:
                    a = a + rng.normal(0.0, explore[0], size=a.shape)
                actions[i] = np.clip(a, -1.0, 1.0)
            return StepDecision(actions=actions, waits=waits, net_obs=net_obs,
                                msg_delay_ratio=0.0, messages_used=0)

        observations = [Observation(local=local_obs[i], net=net_obs[i]) for i in range(n)]
        payloads = [encode(self.agents[i], observations[i]) for i in range(n)]
        for i in range(n):
            if self.kind_name == DACOM:
                noise = rng.normal(0.0, explore[1]) if explore is not None else 0.0
                waits[i] = schedule_wait(self.agents[i], observations[i], self.dt,
                                         pre_noise=noise)
            else:
                row = channel.delay_matrix[i] if channel is not None else None
                waits[i] = self._baseline_wait(i, row)

        # broadcast this step's messages
        for j in range(n):
            for i in range(n):
                if i == j:
                    continue
                if self.kind_name == "central":
                    total = self.kind.delay_ratio * self.dt
                else:
                    total = float(channel.delay_matrix[i, j])
                    if self.kind_name == "fullcomm" and total > self.dt:
                        continue  # zero-filled below; never delivered
                self.comms.send(j, i, payloads[j], total, step)

        per_agent = self.comms.deliveries(step)
        used_offsets = []
        total_used = 0
        for i, nets in enumerate(self.agents):
            deliveries = per_agent[i]
            if self.kind_name == "fullcomm":
                arrived = {dv.message.sender: dv.message for dv in deliveries
                           if dv.offset <= waits[i]}
                available = []
                for j in range(n):
                    if j == i:
                        continue
                    msg = arrived.get(j)
                    if msg is None:
                        msg = Message(sender=j, payload=np.zeros(self.spec.msg_dim),
                                      sent_step=step, arrival_offset=0.0)
                    available.append(msg)
                current_offsets = [dv.offset for dv in deliveries if dv.offset <= waits[i]]
            else:
                available = self.comms.buffers[i].collect(waits[i], deliveries)
                current_offsets = [dv.offset for dv in deliveries if dv.offset <= waits[i]]
            used_offsets.append(max(current_offsets) if current_offsets else 0.0)
            total_used += len(available)
            agg = aggregate(nets, payloads[i], available)
            a = act(nets, payloads[i], agg)
            if explore is not None:
                a = a + rng.normal(0.0, explore[0], size=a.shape)
            actions[i] = np.clip(a, -1.0, 1.0)
            self.comms.record_arrivals(i, deliveries)
        self.comms.finish_step()
        ratio = float(np.mean(used_offsets) / self.dt) if used_offsets else 0.0
        return StepDecision(actions=actions, waits=waits, net_obs=net_obs,
                            msg_delay_ratio=ratio, messages_used=total_used)

    # -- batched graph builders (training) --------------------------------

    def _inputs(self, O: np.ndarray, Onet: np.ndarray, i: int) -> np.ndarray:
        return np.concatenate([O[:, i, :], Onet[:, i, :] / self.dt], axis=1)

    def _messages_nograd(self, O: np.ndarray, Onet: np.ndarray,
                         target: bool = False) -> list[np.ndarray]:
        out = []
        with ad.no_grad():
            for j, nets in enumerate(self.agents):
                enc = nets.target_encoder if target else nets.encoder
                out.append(enc(Tensor(self._inputs(O, Onet, j))).data)
        return out

    def _availability_mask(self, Onet: np.ndarray, i: int, d: np.ndarray) -> np.ndarray:
        """(B, 1+P) slot mask: self always on; peer j on iff est. delay <= d."""
        peer_est = Onet[:, i, :]  # (B, P) seconds, peers sorted by index
        mask = peer_est <= d.reshape(-1, 1)
        return np.concatenate([np.ones((mask.shape[0], 1), dtype=bool), mask], axis=1)

    def _slots_for(self, i: int, own: Tensor, peer_payloads: list[np.ndarray],
                   zero_fill: np.ndarray | None = None) -> list[Tensor]:
        """Attention slots [self] + peers (sorted by agent index, self removed)."""
        slots = [own]
        col = 0
        for j in range(self.spec.n_agents):
            if j == i:
                continue
            payload = peer_payloads[j]
            if zero_fill is not None:
                payload = payload * zero_fill[:, col:col + 1]
            slots.append(Tensor(payload))
            col += 1
        return slots

    def target_decisions(self, O: np.ndarray, Onet: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Target-network actions and waits regenerated from observations."""
        n = self.spec.n_agents
        B = O.shape[0]
        A = np.zeros((B, n, self.spec.act_dim))
        D = np.zeros((B, n))
        with ad.no_grad():
            if not self.communicates:
                for i, nets in enumerate(self.agents):
                    A[:, i, :] = ad.tanh(nets.target_actor(Tensor(O[:, i, :]))).data
                return A, D
            payloads = self._messages_nograd(O, Onet, target=True)
            for i, nets in enumerate(self.agents):
                x = Tensor(self._inputs(O, Onet, i))
                if self.kind_name == DACOM:
                    D[:, i] = self.dt * ad.sigmoid(nets.target_timenet(x)).data[:, 0]
                elif self.kind_name == "fullcomm":
                    peer_est = Onet[:, i, :]
                    D[:, i] = np.minimum(peer_est.max(axis=1), self.dt)
                elif self.kind_name == "fixed":
                    D[:, i] = self.kind.fraction * self.dt
                elif self.kind_name == "central":
                    D[:, i] = self.kind.delay_ratio * self.dt
                own = Tensor(payloads[i])
                mask, zero_fill = self._training_availability(Onet, i, D[:, i])
                slots = self._slots_for(i, own, payloads, zero_fill)
                m_g = nets.target_aggregator(own, ad.stack_rows(slots), mask=mask)
                A[:, i, :] = ad.tanh(nets.target_actor(ad.concat_cols([own, m_g]))).data
        return A, D

    def _training_availability(self, Onet: np.ndarray, i: int, d: np.ndarray):
        """Hard slot mask (and payload zero-fill for the full-communication
        kind) used when regenerating message exchange from stored
        observations. Buffered fallbacks are not reconstructed at training
        time: a peer whose estimated delay exceeds the wait is simply absent.
        """
        if self.kind_name == "fullcomm":
            peer_est = Onet[:, i, :]
            indicator = (peer_est <= self.dt).astype(np.float64)
            mask = None  # all slots attend; missing peers are zero vectors
            return mask, indicator
        if self.kind_name == "central":
            return None, None
        return self._availability_mask(Onet, i, d), None

    def action_graph(self, i: int, O: np.ndarray, Onet: np.ndarray,
                     D: np.ndarray, payloads: list[np.ndarray] | None = None
                     ) -> tuple[Tensor, list[ParamBlock]]:
        """Differentiable regenerated action a_i; gradients reach agent i's
        encoder, aggregator, and actor. Peers' messages are constants and may
        be precomputed once per batch and shared across agents' updates."""
        nets = self.agents[i]
        if not self.communicates:
            a = ad.tanh(nets.actor(Tensor(O[:, i, :])))
            return a, nets.actor_side_blocks()
        if payloads is None:
            payloads = self._messages_nograd(O, Onet)
        x = Tensor(self._inputs(O, Onet, i))
        own = nets.encoder(x)
        mask, zero_fill = self._training_availability(Onet, i, D[:, i])
        slots = self._slots_for(i, own, payloads, zero_fill)
        m_g = nets.aggregator(own, ad.stack_rows(slots), mask=mask)
        a = ad.tanh(nets.actor(ad.concat_cols([own, m_g])))
        return a, nets.actor_side_blocks()

    def timenet_graph(self, i: int, O: np.ndarray, Onet: np.ndarray,
                      payloads: list[np.ndarray] | None = None
                      ) -> tuple[Tensor, Tensor, list[ParamBlock]]:
        """Differentiable (a_i, d_i) chain for the waiting-time network.

        The hard inclusion indicator is relaxed to a sigmoid in d: each
        peer slot's softmax weight is scaled by sigma((d - l) / kappa),
        entering the logits as log-sigmoid (computed stably as -softplus).
        """
        if self.kind_name != DACOM:
            raise ValueError("timenet_graph applies to the delay-aware kind only")
        nets = self.agents[i]
        kappa = self.spec.kappa_fraction * self.dt
        if payloads is None:
            payloads = self._messages_nograd(O, Onet)
        x = Tensor(self._inputs(O, Onet, i))
        d = ad.scale(ad.sigmoid(nets.timenet(x)), self.dt)  # (B, 1)
        peer_est = Onet[:, i, :]  # (B, P)
        z = ad.scale(ad.sub(d, Tensor(peer_est)), 1.0 / kappa)
        logw_peers = ad.scale(ad.softplus(ad.scale(z, -1.0)), -1.0)
        B = O.shape[0]
        logw = ad.concat_cols([Tensor(np.zeros((B, 1))), logw_peers])
        own = Tensor(payloads[i])
        slots = self._slots_for(i, own, payloads)
        m_g = nets.aggregator(own, ad.stack_rows(slots), mask=None, log_weight=logw)
        a = ad.tanh(nets.actor(ad.concat_cols([own, m_g])))
        return a, d, [nets.blocks["timenet"]]
