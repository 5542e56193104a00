"""LSTM Q-network, experience replay and the TD trainer.

The network reads a window of ``W`` feature vectors with a single LSTM cell
(zero initial state) and maps the last hidden state to one Q-value per
action through a dense head. Gradients are exact backpropagation through
time; everything is plain numpy so it can be checked against finite
differences.
"""

from __future__ import annotations

import struct
import threading
from collections import deque

import numpy as np

# gate blocks inside the stacked 4H pre-activation
_I, _F, _O, _G = 0, 1, 2, 3


class LstmQNet:
    """Parameters of one LSTM cell plus a dense Q head.

    ``W`` (4H x D) and ``U`` (4H x H) stack the input, forget, output and
    candidate gates in that order; ``b`` is the matching 4H bias. ``V``
    (A x H) and ``c`` (A) form the head.
    """

    PARAM_NAMES = ("W", "U", "b", "V", "c")

    def __init__(self, input_dim: int, hidden_dim: int, n_actions: int, dtype=np.float64):
        if min(input_dim, hidden_dim, n_actions) < 1:
            raise ValueError("all network dimensions must be >= 1")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.n_actions = n_actions
        self.dtype = np.dtype(dtype)
        H = hidden_dim
        self.W = np.zeros((4 * H, input_dim), self.dtype)
        self.U = np.zeros((4 * H, H), self.dtype)
        self.b = np.zeros(4 * H, self.dtype)
        self.V = np.zeros((n_actions, H), self.dtype)
        self.c = np.zeros(n_actions, self.dtype)

    @classmethod
    def initialized(cls, input_dim, hidden_dim, n_actions, rng: np.random.Generator,
                    dtype=np.float64):
        """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1.

        The draws are float64 whatever ``dtype`` is, so a float32 net starts
        from the rounded float64 one.
        """
        net = cls(input_dim, hidden_dim, n_actions, dtype)
        k = 1.0 / np.sqrt(hidden_dim)
        for name in cls.PARAM_NAMES:
            arr = getattr(net, name)
            arr[...] = rng.uniform(-k, k, size=arr.shape)
        H = hidden_dim
        net.b[_F * H:(_F + 1) * H] = 1.0
        return net

    def params(self):
        return [getattr(self, n) for n in self.PARAM_NAMES]

    def copy(self) -> "LstmQNet":
        out = LstmQNet(self.input_dim, self.hidden_dim, self.n_actions, self.dtype)
        for n in self.PARAM_NAMES:
            getattr(out, n)[...] = getattr(self, n)
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        i = 0
        for p in self.params():
            n = p.size
            p[...] = vec[i:i + n].reshape(p.shape)
            i += n
        if i != vec.size:
            raise ValueError(f"expected {i} parameters, got {vec.size}")

    def save(self, path):
        """Write dims as three little-endian uint32 then the parameters as float64."""
        with open(path, "wb") as fh:
            fh.write(struct.pack("<3I", self.input_dim, self.hidden_dim, self.n_actions))
            fh.write(self.flat().astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "LstmQNet":
        with open(path, "rb") as fh:
            dims = struct.unpack("<3I", fh.read(12))
            data = np.frombuffer(fh.read(), dtype="<f8")
        net = cls(*dims)
        net.set_flat(data)
        return net


def _as_batch(net: LstmQNet, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=net.dtype)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != net.input_dim:
        raise ValueError(f"expected windows of shape (W, {net.input_dim}), got {x.shape[-2:]}")
    return x, single


def _gate_affine(H: int, dtype):
    # sigmoid(z) = (1 + tanh(z / 2)) / 2 for the i, f, o blocks; the g block is plain tanh
    scale = np.ones(4 * H, dtype)
    scale[:3 * H] = 0.5
    shift = np.zeros(4 * H, dtype)
    shift[:3 * H] = 0.5
    return scale, shift


# Several networks of identical shape are unrolled together: their
# parameters are stacked on a leading axis so every numpy call covers all of
# them. At these sizes per-call overhead dominates, so this is where the
# simulator spends its time.

_scratch = threading.local()


def _buffers(key, make):
    pool = getattr(_scratch, "pool", None)
    if pool is None:
        pool = _scratch.pool = {}
    bufs = pool.get(key)
    if bufs is None:
        bufs = pool[key] = make()
    return bufs


def _check_stack(nets):
    if not nets:
        raise ValueError("need at least one network")
    ref = nets[0]
    for n in nets[1:]:
        if (n.input_dim, n.hidden_dim, n.dtype) != (ref.input_dim, ref.hidden_dim, ref.dtype):
            raise ValueError("stacked networks must share input size, hidden size and dtype")
    return ref


def _unroll(nets, x: np.ndarray):
    """Run each ``nets[k]`` over ``x[k]``; ``x`` is (K, B, T, D).

    Returns time-major buffers (reused between calls with the same shape):
    ``hs``/``cs`` (T+1, K, B, H) with the zero initial state at index 0,
    raw tanh gate values ``us`` and activations ``acts`` (T, K, B, 4H), and
    ``tcs`` = tanh(cell) (T, K, B, H).
    """
    ref = nets[0]
    K, B, T, D = x.shape
    H = ref.hidden_dim
    dt = ref.dtype
    scale, shift = _gate_affine(H, dt)

    def make():
        return (np.empty((T, K, B, D), dt), np.empty((T, K, B, 4 * H), dt),
                np.empty((T, K, B, 4 * H), dt), np.zeros((T + 1, K, B, H), dt),
                np.zeros((T + 1, K, B, H), dt), np.empty((T, K, B, H), dt),
                np.empty((K, B, 4 * H), dt), np.empty((K, B, H), dt))

    # fresh arrays this size cost more in page faults than the arithmetic
    xt, us, acts, hs, cs, tcs, tmp, ig = _buffers(("fwd", dt, K, B, T, D, H), make)
    xt[...] = x.transpose(2, 0, 1, 3)
    WT = np.stack([n.W.T for n in nets]) * scale  # (K, D, 4H), gates pre-scaled
    UT = np.stack([n.U.T for n in nets]) * scale
    bias = (np.stack([n.b for n in nets]) * scale)[:, None, :]
    np.matmul(xt, WT, out=us)
    us += bias
    for t in range(T):
        u = us[t]
        np.matmul(hs[t], UT, out=tmp)
        u += tmp
        np.tanh(u, out=u)
        a = acts[t]
        np.multiply(u, scale, out=a)
        a += shift
        c = cs[t + 1]
        np.multiply(a[..., H:2 * H], cs[t], out=c)
        np.multiply(a[..., :H], a[..., 3 * H:], out=ig)
        c += ig
        np.tanh(c, out=tcs[t])
        np.multiply(a[..., 2 * H:3 * H], tcs[t], out=hs[t + 1])
    return xt, hs, cs, us, acts, tcs


def _bptt(nets, fwd, dh: np.ndarray):
    """Backpropagate ``dh`` (K, B, H) from the final hidden state.

    Only the first ``B`` batch rows of the forward pass take part, so a pass
    that also evaluated TD targets on extra rows can be reused as is.
    Returns per-network ``(dW, dU, db)``.
    """
    xt, hs, cs, us, acts, tcs = fwd
    K, B, H = dh.shape
    T = us.shape[0]
    dt = dh.dtype
    scale, _ = _gate_affine(H, dt)
    rows = slice(0, B)
    us, acts, tcs = us[:, :, rows], acts[:, :, rows], tcs[:, :, rows]
    cs, hs, xt = cs[:, :, rows], hs[:, :, rows], xt[:, :, rows]
    # d act / d pre-activation = scale**2 * (1 - u**2), independent of the recursion
    gate_slope = 1.0 - us * us
    gate_slope *= scale * scale
    tanh_slope = 1.0 - tcs * tcs
    tanh_slope *= acts[..., 2 * H:3 * H]
    U = np.stack([n.U for n in nets])  # (K, 4H, H)
    dcell = np.zeros((K, B, H), dt)
    dZ = np.empty((T, K, B, 4 * H), dt)
    tmp = np.empty((K, B, H), dt)
    for t in range(T - 1, -1, -1):
        a = acts[t]
        np.multiply(dh, tanh_slope[t], out=tmp)
        dcell += tmp
        dz = dZ[t]
        np.multiply(dcell, a[..., 3 * H:], out=dz[..., :H])
        np.multiply(dcell, cs[t], out=dz[..., H:2 * H])
        np.multiply(dh, tcs[t], out=dz[..., 2 * H:3 * H])
        np.multiply(dcell, a[..., :H], out=dz[..., 3 * H:])
        dz *= gate_slope[t]
        dh = np.matmul(dz, U)
        dcell *= a[..., H:2 * H]
    # (K, 4H, T*B) against (K, T*B, D | H)
    dZk = dZ.transpose(1, 3, 0, 2).reshape(K, 4 * H, T * B)
    dW = np.matmul(dZk, xt.transpose(1, 0, 2, 3).reshape(K, T * B, -1))
    dU = np.matmul(dZk, hs[:T].transpose(1, 0, 2, 3).reshape(K, T * B, H))
    db = dZk.sum(axis=2)
    return [(dW[k], dU[k], db[k]) for k in range(K)]


def _stack_windows(nets, windows):
    ref = _check_stack(nets)
    x = np.asarray(windows, dtype=ref.dtype)
    if x.ndim != 4 or x.shape[0] != len(nets) or x.shape[3] != ref.input_dim:
        raise ValueError(f"expected windows of shape ({len(nets)}, B, W, {ref.input_dim}), got {x.shape}")
    return x


def forward_many(nets, windows) -> list:
    """Q-values of ``nets[k]`` on ``windows[k]`` (each (B, W, D)) for every k."""
    x = _stack_windows(nets, windows)
    hs = _unroll(nets, x)[1]
    h = hs[-1]
    return [h[k] @ n.V.T + n.c for k, n in enumerate(nets)]


def forward(net: LstmQNet, x) -> np.ndarray:
    """Q-values for one window ``(W, D)`` or a batch ``(B, W, D)``."""
    xb, single = _as_batch(net, x)
    q = forward_many([net], xb[None])[0]
    return q[0] if single else q


def _mse_grad(q, actions, targets):
    B = len(targets)
    rows = np.arange(B)
    err = q[rows, actions] - targets
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / B
    return float(np.mean(err ** 2)), dq


def _head_grads(net, h, dq):
    # dV, dc, and the gradient flowing into the last hidden state
    return dq.T @ h, dq.sum(axis=0), dq @ net.V


def loss_and_grad(net: LstmQNet, windows, actions, targets):
    """Mean squared error of Q(window)[action] against fixed targets.

    Returns ``(loss, grads)`` with grads ordered as ``LstmQNet.PARAM_NAMES``.
    """
    x, _ = _as_batch(net, windows)
    actions = np.asarray(actions, dtype=int)
    targets = np.asarray(targets, dtype=net.dtype)
    fwd = _unroll([net], x[None])
    h = fwd[1][-1][0]
    q = h @ net.V.T + net.c
    loss, dq = _mse_grad(q, actions, targets)
    dV, dc, dh = _head_grads(net, h, dq)
    (dW, dU, db), = _bptt([net], fwd, dh[None])
    return loss, [dW, dU, db, dV, dc]


def td_targets(net: LstmQNet, rewards, next_windows, gamma: float) -> np.ndarray:
    q_next = forward(net, next_windows)
    return np.asarray(rewards, dtype=net.dtype) + gamma * q_next.max(axis=1)


def train_steps(nets, minibatches, gamma: float, lr: float) -> list:
    """``train_step`` for several independent networks in one stacked pass.

    Each network only ever sees its own minibatch; the result equals
    training them one after another.
    """
    ref = _check_stack(nets)
    if len(minibatches) != len(nets):
        raise ValueError("one minibatch per network")
    if lr < 0:
        raise ValueError("lr must be non-negative")
    B = len(minibatches[0]) if minibatches else 0
    if B == 0 or any(len(mb) != B for mb in minibatches):
        raise ValueError("minibatches must be non-empty and of equal size")
    # windows and next windows share one forward pass; only the first B rows
    # are backpropagated, the rest supply the (constant) TD targets
    x = np.stack([np.stack([m[0] for m in mb] + [m[3] for m in mb]) for mb in minibatches])
    x = _stack_windows(nets, x)
    fwd = _unroll(nets, x)
    h_all = fwd[1][-1]
    losses, dhs, heads = [], [], []
    for k, (net, mb) in enumerate(zip(nets, minibatches)):
        actions = np.fromiter((m[1] for m in mb), dtype=int, count=B)
        rewards = np.fromiter((m[2] for m in mb), dtype=ref.dtype, count=B)
        q = h_all[k] @ net.V.T + net.c
        targets = rewards + gamma * q[B:].max(axis=1)
        loss, dq = _mse_grad(q[:B], actions, targets)
        losses.append(loss)
        dV, dc, dh = _head_grads(net, h_all[k, :B], dq)
        heads.append((dV, dc))
        dhs.append(dh)
    if lr > 0:
        lstm = _bptt(nets, fwd, np.stack(dhs))
        for net, (dW, dU, db), (dV, dc) in zip(nets, lstm, heads):
            for p, g in zip(net.params(), (dW, dU, db, dV, dc)):
                p -= lr * g
    return losses


def train_step(net: LstmQNet, minibatch, gamma: float, lr: float) -> float:
    """One SGD step on the mean squared TD error; returns the pre-update loss.

    ``minibatch`` is a sequence of ``(window, action, reward, next_window)``.
    Targets use the current parameters and are held constant.
    """
    if len(minibatch) == 0:
        raise ValueError("minibatch must be non-empty")
    return train_steps([net], [minibatch], gamma, lr)[0]


class InsufficientSamples(ValueError):
    pass


class ReplayMemory:
    """Bounded FIFO of experiences; the oldest entry is evicted first."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = capacity
        self.buffer: deque = deque(maxlen=capacity) if capacity > 0 else deque(maxlen=0)

    def __len__(self):
        return len(self.buffer)


def replay_store(mem: ReplayMemory, item) -> None:
    if mem.capacity == 0:
        return
    mem.buffer.append(item)


def replay_sample(mem: ReplayMemory, k: int, rng: np.random.Generator) -> list:
    """``k`` distinct items drawn uniformly."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(mem):
        raise InsufficientSamples(f"requested {k} samples from a memory of {len(mem)}")
    idx = rng.choice(len(mem), size=k, replace=False)
    buf = mem.buffer
    return [buf[i] for i in idx]
