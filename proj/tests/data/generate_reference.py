"""Dump Gymnasium Toy Text transition tables as reference data for test_envs.

Usage: python3 generate_reference.py  (requires gymnasium==0.29.1)
Each line: state action next_state reward terminated
"""
import gymnasium as gym
import numpy as np

ENVS = {
    "Taxi": dict(id="Taxi-v3"),
    "FrozenLake": dict(id="FrozenLake-v1", map_name="4x4", is_slippery=False),
    "CliffWalking": dict(id="CliffWalking-v0"),
}

for name, kwargs in ENVS.items():
    env = gym.make(**kwargs).unwrapped
    with open(f"reference_{name}.txt", "w") as out:
        for s in range(env.observation_space.n):
            for a in range(env.action_space.n):
                (prob, nxt, reward, done), = env.P[s][a]
                assert prob == 1.0
                out.write(f"{s} {a} {nxt} {reward:g} {int(done)}\n")
    isd = np.asarray(env.initial_state_distrib)
    with open(f"reference_{name}_mu0.txt", "w") as out:
        for s in np.flatnonzero(isd):
            out.write(f"{s} {isd[s]:.17g}\n")
