"""Shared scenario builders for the test suite.

The default channel constants (-100 dB gain, 1e-13 W noise) give an
effective noise of exactly 1 mW per node, so hand-computed rates stay
simple.
"""

import numpy as np

from ehcoop.model import INFINITE, ModelKind, Scenario


def make_scenario(model=ModelKind.TWC, harvests=((2.0, 5.0, 0.0, 0.0), (0.0, 4.0, 0.0, 7.0)),
                  capacity=(INFINITE, INFINITE), alpha=(0.5, 0.5),
                  gain_db=(-100.0, -100.0), noise_w=(1e-13, 1e-13), slot_seconds=1.0):
    return Scenario(
        model_kind=model,
        harvests=np.asarray(harvests, dtype=float),
        battery_capacity=np.asarray(capacity, dtype=float),
        transfer_efficiency=np.asarray(alpha, dtype=float),
        channel_gain_db=np.asarray(gain_db, dtype=float),
        noise_power_w=np.asarray(noise_w, dtype=float),
        slot_seconds=slot_seconds,
    )


def random_scenario(rng, model, finite=False, n_max=4, quantum=0.02):
    """Instances with quantum-aligned harvests so the DP oracle is tight."""
    n = int(rng.integers(2, n_max + 1))
    h = quantum * rng.integers(0, 11, size=(2, n)).astype(float)
    alpha = rng.uniform(0.3, 0.9, size=2)
    g = rng.uniform(-102, -97, size=2)
    caps = np.array([INFINITE, INFINITE])
    if finite:
        caps = quantum * rng.integers(2, 13, size=2).astype(float)
    return Scenario(model_kind=model, harvests=h, battery_capacity=caps,
                    transfer_efficiency=alpha, channel_gain_db=g,
                    noise_power_w=np.array([1e-13, 1e-13]), slot_seconds=1.0)


def random_feasible_policy(rng, sc):
    """A feasible, generally non-procrastinating TransferPolicy."""
    from ehcoop.model import TransferPolicy

    n = sc.n_slots
    dt = sc.slot_seconds
    alpha = sc.transfer_efficiency
    cap = sc.battery_capacity
    p = np.zeros((2, n))
    delta = np.zeros((2, n))
    s = np.zeros(2)
    for i in range(n):
        avail = s + sc.harvests[:, i]
        for k in range(2):
            delta[k, i] = rng.uniform(0.0, 0.6) * avail[k]
        for k in range(2):
            j = 1 - k
            room = avail[k] - delta[k, i] + alpha[j] * delta[j, i]
            p[k, i] = rng.uniform(0.0, 0.9) * max(room, 0.0) / dt
        for k in range(2):
            j = 1 - k
            s[k] = min(cap[k], avail[k] - p[k, i] * dt - delta[k, i]
                       + alpha[j] * delta[j, i])
    return TransferPolicy(p=p, delta=delta)
