# %% One step in an agent's life: encode the observation, schedule a
# waiting time, collect whatever arrived in time (plus buffered leftovers),
# aggregate with attention, act.

import numpy as np

from dacom import agent as ag
from dacom.agent import Delivery, Message, MessageBuffer, Observation, TeamSpec

rng = np.random.default_rng(4)
spec = TeamSpec(n_agents=4, obs_dim=5, act_dim=2, step_interval=0.1)
nets = ag.AgentNets(spec, rng, "agent0")

obs = Observation(local=rng.normal(size=5), net=np.array([0.02, 0.05, 0.08]))
print("local obs:", np.round(obs.local, 3))
print("per-peer delay estimates (s):", obs.net)

# %% Encode and schedule. The waiting time is a sigmoid-squashed network
# output scaled to [0, dt].
payload = ag.encode(nets, obs)
d = ag.schedule_wait(nets, obs, spec.step_interval)
print("message payload:", np.round(payload, 3))
print(f"scheduled wait: {d:.4f} s of {spec.step_interval} s")

# %% Collection honors the threshold inclusively; late arrivals refresh the
# buffer only after the action is chosen.
buffer = MessageBuffer()
stale = Message(sender=3, payload=rng.normal(size=6), sent_step=0,
                arrival_offset=0.02)
buffer.collect(0.1, [Delivery(stale, 0.02)])
buffer.finish_step()

arrivals = [
    Delivery(Message(1, rng.normal(size=6), 1, 0.015), 0.015),
    Delivery(Message(2, rng.normal(size=6), 1, 0.049), 0.049),
    Delivery(Message(3, rng.normal(size=6), 1, 0.093), 0.093),
]
available = buffer.collect(0.05, arrivals)
print("\nwait 0.05 s:")
for m in available:
    kind = "current" if m.sent_step == 1 else "buffered"
    print(f"  peer {m.sender}: {kind} (delay {m.arrival_offset:.3f} s)")
buffer.finish_step()
print("peer 3 slot age after the late refresh:", buffer.age(3))

# %% Aggregate and act. The slot order is sorted, so arrival order cannot
# change the result.
agg = ag.aggregate(nets, payload, available)
action = ag.act(nets, payload, agg)
print("\naggregated message:", np.round(agg, 3))
print("action:", np.round(action, 3))

# %% Delay estimates update as messages arrive (exponential moving average).
est = ag.DelayEstimator([1, 2, 3], alpha=0.3, prior=0.1)
for dv in arrivals:
    est.update(dv.message.sender, dv.message.arrival_offset)
print("updated delay estimates:", np.round(est.snapshot(), 4))
