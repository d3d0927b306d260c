"""Dense MLPs with explicit tapes, reverse-mode gradients, Adam, and gradient checks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "identity")


def _act(name: str, x: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    if name == "identity":
        return x
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, pre: np.ndarray, out: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (pre > 0).astype(float)
    if name == "sigmoid":
        return out * (1.0 - out)
    if name == "identity":
        return np.ones_like(pre)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class Mlp:
    """Fully connected network; weights[i] has shape (n_out, n_in)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self) -> None:
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("layer lists must have equal length")
        for i, (w, b, a) in enumerate(zip(self.weights, self.biases, self.activations)):
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
            if w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: bias shape mismatch")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input dim does not chain")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_mlp(sizes: list[int], activations: list[str], rng) -> Mlp:
    """He-scaled random init; sizes = [in, hidden..., out]."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if len(sizes) < 2 or len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in))
        biases.append(np.zeros(n_out))
    return Mlp(weights, biases, list(activations))


def forward(m: Mlp, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Evaluate the network; returns (output, tape) for the matching backward.

    x may be a single vector (n_in,) or a batch (B, n_in); the tape keeps the
    promoted 2-D arrays.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != m.in_dim:
        raise ValueError(f"input dim {h.shape[1]} != expected {m.in_dim}")
    tape = []
    for w, b, a in zip(m.weights, m.biases, m.activations):
        pre = h @ w.T + b
        out = _act(a, pre)
        tape.append((h, pre, out))
        h = out
    return (h[0] if single else h), tape


def backward(m: Mlp, tape: list, dy: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact reverse-mode gradients from a forward tape.

    Returns (param_grads, dx) where param_grads interleaves [dW0, db0, dW1, ...]
    matching Mlp.params(); batch contributions are summed.
    """
    dy = np.asarray(dy, dtype=float)
    single = dy.ndim == 1
    d = dy[None, :] if single else dy
    grads: list[np.ndarray] = []
    for i in range(len(m.weights) - 1, -1, -1):
        h, pre, out = tape[i]
        dpre = d * _act_grad(m.activations[i], pre, out)
        grads.insert(0, dpre.sum(axis=0))          # db
        grads.insert(0, dpre.T @ h)                # dW
        d = dpre @ m.weights[i]
    return grads, (d[0] if single else d)


@dataclass
class AdamState:
    """Moment buffers for one flat parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: list[np.ndarray], lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """Standard bias-corrected Adam update, in place."""
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ValueError("parameter/gradient/state length mismatch")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for p, g, mm, vv in zip(params, grads, state.m, state.v):
        mm *= b1
        mm += (1 - b1) * g
        vv *= b2
        vv += (1 - b2) * g * g
        mhat = mm / (1 - b1 ** state.t)
        vhat = vv / (1 - b2 ** state.t)
        p -= state.lr * mhat / (np.sqrt(vhat) + state.eps)


def gradient_check(loss_fn, params: list[np.ndarray], analytic: list[np.ndarray],
                   step: float = 1e-5) -> float:
    """Max relative error between analytic grads and central finite differences.

    loss_fn() must read the (mutated in place) params and return a scalar.
    """
    worst = 0.0
    for p, g in zip(params, analytic):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + step
            up = loss_fn()
            flat_p[i] = orig - step
            down = loss_fn()
            flat_p[i] = orig
            num = (up - down) / (2 * step)
            denom = max(abs(num), abs(flat_g[i]), 1e-8)
            worst = max(worst, abs(num - flat_g[i]) / denom)
    return worst


# ---------------------------------------------------------------------------
# Checkpoint helpers
# ---------------------------------------------------------------------------


def mlp_to_obj(m: Mlp) -> dict:
    return {
        "sizes": [m.in_dim] + [w.shape[0] for w in m.weights],
        "activations": list(m.activations),
        "weights": [w.flatten().tolist() for w in m.weights],
        "biases": [b.tolist() for b in m.biases],
    }


def mlp_from_obj(obj: dict) -> Mlp:
    sizes = obj["sizes"]
    weights = [
        np.array(w, dtype=float).reshape(sizes[i + 1], sizes[i])
        for i, w in enumerate(obj["weights"])
    ]
    biases = [np.array(b, dtype=float) for b in obj["biases"]]
    return Mlp(weights, biases, list(obj["activations"]))


def adam_to_obj(state: AdamState) -> dict:
    return {
        "t": state.t,
        "lr": state.lr,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps": state.eps,
        "m": [a.flatten().tolist() for a in state.m],
        "v": [a.flatten().tolist() for a in state.v],
        "shapes": [list(a.shape) for a in state.m],
    }


def adam_from_obj(obj: dict) -> AdamState:
    shapes = [tuple(s) for s in obj["shapes"]]
    return AdamState(
        m=[np.array(a, dtype=float).reshape(s) for a, s in zip(obj["m"], shapes)],
        v=[np.array(a, dtype=float).reshape(s) for a, s in zip(obj["v"], shapes)],
        t=obj["t"], lr=obj["lr"], beta1=obj["beta1"], beta2=obj["beta2"], eps=obj["eps"],
    )
