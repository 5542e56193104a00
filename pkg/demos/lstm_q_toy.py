"""Fit the LSTM Q-network to a toy sequence task, then round-trip a checkpoint.

Two actions; the reward for action 1 is the last input value, for action 0
its negation. With gamma = 0 the learned Q-values should track +/- x_last.
"""

import tempfile
from pathlib import Path

import numpy as np

from dmdqsim import dqn


def batch(rng, n=32, w=4):
    xs = rng.uniform(-1, 1, size=(n, w, 1))
    acts = rng.integers(0, 2, n)
    rewards = np.where(acts == 1, xs[:, -1, 0], -xs[:, -1, 0])
    return [(x, int(a), float(r), x) for x, a, r in zip(xs, acts, rewards)]


def main():
    rng = np.random.default_rng(0)
    net = dqn.LstmQNet.initialized(1, 8, 2, rng)
    for step in range(3001):
        loss = dqn.train_step(net, batch(rng), gamma=0.0, lr=0.05)
        if step % 500 == 0:
            print(f"step {step:4d}  td loss {loss:.4f}")

    probe = np.array([[0.1], [0.2], [0.3], [0.8]])
    print("Q for x_last = 0.8:", np.round(dqn.forward(net, probe), 3), "(ideal [-0.8, 0.8])")

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "net.bin"
        net.save(path)
        back = dqn.LstmQNet.load(path)
        print(f"checkpoint: {path.stat().st_size} bytes, reload identical:",
              np.array_equal(back.flat(), net.flat()))


if __name__ == "__main__":
    main()
