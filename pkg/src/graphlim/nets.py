"""ReLU networks with exact reverse-mode gradients, the message-passing
GNN, and its continuous-limit counterpart.

Conventions: nodes (or samples) are rows everywhere, so layers act by
right-multiplication, ``x @ W + b``. Hidden activations are ReLU, output
layers are linear. The ReLU subgradient at 0 is fixed to 0, which keeps
gradients deterministic.

Message-passing layer and readout, for a shift matrix S:

    Z_l   = relu(Z_{l-1} theta0_{l-1} + S Z_{l-1} theta1_{l-1} + 1 b_l^T)
    out   = Z_{L-1} W_out + 1 b_out^T

The continuous recursion replaces S Z with the limit operator applied to
the function the rows sample, acting on latent-grid values; on SBMs this is
exact finite arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelModel, ShiftKind
from .limits import LimitFunction, apply_limit_operator, from_grid_values


def relu(x):
    return np.maximum(x, 0.0)


@dataclass(eq=False)
class MlpParams:
    """Dense ReLU network: weights[i] is d_i x d_{i+1}, biases[i] is d_{i+1}."""

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("one bias vector per weight matrix")
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError("inconsistent layer shapes")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError("parameters must be finite")
        for Wa, Wb in zip(self.weights[:-1], self.weights[1:]):
            if Wa.shape[1] != Wb.shape[0]:
                raise ValueError("layer widths do not chain")

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def copy(self) -> "MlpParams":
        return MlpParams([W.copy() for W in self.weights], [b.copy() for b in self.biases])


@dataclass(eq=False)
class MlpGrads:
    weights: list
    biases: list


def init_mlp(widths: list[int], rng: np.random.Generator) -> MlpParams:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); zero biases."""
    weights, biases = [], []
    for d_in, d_out in zip(widths[:-1], widths[1:]):
        a = np.sqrt(6.0 / (d_in + d_out))
        weights.append(rng.uniform(-a, a, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return MlpParams(weights=weights, biases=biases)


def identity_mlp(dim: int) -> MlpParams:
    """Exact identity on R^dim via relu(x) - relu(-x)."""
    eye = np.eye(dim)
    W1 = np.hstack([eye, -eye])
    W2 = np.vstack([eye, -eye])
    return MlpParams(weights=[W1, W2], biases=[np.zeros(2 * dim), np.zeros(dim)])


def constant_mlp(d_in: int, value) -> MlpParams:
    value = np.atleast_1d(np.asarray(value, dtype=float))
    return MlpParams(weights=[np.zeros((d_in, value.shape[0]))], biases=[value.copy()])


def clamp_mlp(bound: float) -> MlpParams:
    """Exact ReLU weights for t -> clamp(t, -bound, bound):
    relu(t + k) - relu(t - k) - k."""
    if not (bound > 0.0):
        raise ValueError("bound must be positive")
    k = float(bound)
    W1 = np.array([[1.0, 1.0]])
    b1 = np.array([k, -k])
    W2 = np.array([[1.0], [-1.0]])
    b2 = np.array([-k])
    return MlpParams(weights=[W1, W2], biases=[b1, b2])


def mlp_forward(p: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != p.widths[0]:
        raise ValueError(f"input width {h.shape[1]} != expected {p.widths[0]}")
    for W, b in zip(p.weights[:-1], p.biases[:-1]):
        h = relu(h @ W + b)
    h = h @ p.weights[-1] + p.biases[-1]
    return h[0] if single else h


def mlp_gradient(p: MlpParams, x: np.ndarray, upstream: np.ndarray) -> tuple[MlpGrads, np.ndarray]:
    """Exact reverse-mode gradients of sum(upstream * output) w.r.t. the
    parameters and the input."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    upstream = np.asarray(upstream, dtype=float)
    g = upstream[None, :] if single else upstream

    acts = [h]
    pres = []
    for W, b in zip(p.weights[:-1], p.biases[:-1]):
        z = acts[-1] @ W + b
        pres.append(z)
        acts.append(relu(z))
    out = acts[-1] @ p.weights[-1] + p.biases[-1]
    if g.shape != out.shape:
        raise ValueError("upstream shape does not match the output")

    dW = [None] * len(p.weights)
    db = [None] * len(p.biases)
    dW[-1] = acts[-1].T @ g
    db[-1] = g.sum(axis=0)
    d = g @ p.weights[-1].T
    for i in range(len(pres) - 1, -1, -1):
        d = d * (pres[i] > 0.0)
        dW[i] = acts[i].T @ d
        db[i] = d.sum(axis=0)
        d = d @ p.weights[i].T
    dx = d[0] if single else d
    return MlpGrads(weights=dW, biases=db), dx


# ---------------------------------------------------------------------------
# Message-passing GNN
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class GnnParams:
    """Message-passing layers (theta0, theta1, bias per layer) plus the
    final linear readout."""

    theta0: list
    theta1: list
    biases: list
    out_weight: np.ndarray
    out_bias: np.ndarray

    def __post_init__(self):
        if not (len(self.theta0) == len(self.theta1) == len(self.biases)):
            raise ValueError("per-layer parameter lists must have equal length")
        for t0, t1, b in zip(self.theta0, self.theta1, self.biases):
            if t0.shape != t1.shape or b.shape != (t0.shape[1],):
                raise ValueError("inconsistent layer shapes")
        widths = self.widths
        if self.out_weight.shape[0] != widths[-2]:
            raise ValueError("readout width does not chain")

    @property
    def widths(self) -> list[int]:
        ws = [self.theta0[0].shape[0]] if self.theta0 else [self.out_weight.shape[0]]
        ws += [t.shape[1] for t in self.theta0]
        ws.append(self.out_weight.shape[1])
        return ws

    @property
    def n_layers(self) -> int:
        """Total layer count L (message-passing layers plus readout)."""
        return len(self.theta0) + 1

    def copy(self) -> "GnnParams":
        return GnnParams(
            [t.copy() for t in self.theta0],
            [t.copy() for t in self.theta1],
            [b.copy() for b in self.biases],
            self.out_weight.copy(),
            self.out_bias.copy(),
        )


@dataclass(eq=False)
class GnnGrads:
    theta0: list
    theta1: list
    biases: list
    out_weight: np.ndarray
    out_bias: np.ndarray


def init_gnn(widths: list[int], rng: np.random.Generator) -> GnnParams:
    theta0, theta1, biases = [], [], []
    for d_in, d_out in zip(widths[:-2], widths[1:-1]):
        a = np.sqrt(6.0 / (d_in + d_out))
        theta0.append(rng.uniform(-a, a, size=(d_in, d_out)))
        theta1.append(rng.uniform(-a, a, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    a = np.sqrt(6.0 / (widths[-2] + widths[-1]))
    return GnnParams(
        theta0=theta0,
        theta1=theta1,
        biases=biases,
        out_weight=rng.uniform(-a, a, size=(widths[-2], widths[-1])),
        out_bias=np.zeros(widths[-1]),
    )


def mpnn_forward(S: np.ndarray, Z0: np.ndarray, p: GnnParams) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    Z = np.asarray(Z0, dtype=float)
    if Z.shape[0] != S.shape[0] or Z.shape[1] != p.widths[0]:
        raise ValueError("Z0 shape does not match S and the parameter widths")
    for t0, t1, b in zip(p.theta0, p.theta1, p.biases):
        Z = relu(Z @ t0 + S @ (Z @ t1) + b)
    return Z @ p.out_weight + p.out_bias


def mpnn_gradient(
    S: np.ndarray, Z0: np.ndarray, p: GnnParams, upstream: np.ndarray
) -> tuple[GnnGrads, np.ndarray]:
    """Reverse-mode gradients of sum(upstream * output) for every parameter
    and for the input features."""
    S = np.asarray(S, dtype=float)
    Z = np.asarray(Z0, dtype=float)
    acts = [Z]
    pres = []
    for t0, t1, b in zip(p.theta0, p.theta1, p.biases):
        z = acts[-1] @ t0 + S @ (acts[-1] @ t1) + b
        pres.append(z)
        acts.append(relu(z))
    out = acts[-1] @ p.out_weight + p.out_bias
    g = np.asarray(upstream, dtype=float)
    if g.shape != out.shape:
        raise ValueError("upstream shape does not match the output")

    d_out_w = acts[-1].T @ g
    d_out_b = g.sum(axis=0)
    d = g @ p.out_weight.T
    dt0 = [None] * len(p.theta0)
    dt1 = [None] * len(p.theta1)
    db = [None] * len(p.biases)
    for i in range(len(pres) - 1, -1, -1):
        d = d * (pres[i] > 0.0)
        s_act = S @ acts[i]
        dt0[i] = acts[i].T @ d
        dt1[i] = s_act.T @ d
        db[i] = d.sum(axis=0)
        d = d @ p.theta0[i].T + S.T @ (d @ p.theta1[i].T)
    grads = GnnGrads(theta0=dt0, theta1=dt1, biases=db, out_weight=d_out_w, out_bias=d_out_b)
    return grads, d


def gnn_lipschitz_factor(p: GnnParams, s_norm: float) -> float:
    """Product over layers of (||theta0|| + ||theta1|| ||S||), times the
    readout norm; a Lipschitz constant of Z -> mpnn(S, Z) in MSE norm."""
    factor = 1.0
    for t0, t1 in zip(p.theta0, p.theta1):
        factor *= np.linalg.norm(t0, 2) + np.linalg.norm(t1, 2) * s_norm
    return float(factor * np.linalg.norm(p.out_weight, 2))


def cgnn_eval(model: KernelModel, kind: ShiftKind, f0: LimitFunction, p: GnnParams) -> LimitFunction:
    """Continuous-limit GNN recursion applied to a latent-space function."""
    if f0.dim != p.widths[0]:
        raise ValueError("f0 dimension does not match the input width")
    f = f0
    for t0, t1, b in zip(p.theta0, p.theta1, p.biases):
        sf = apply_limit_operator(model, kind, f)
        vals = relu(f.values @ t0 + sf.values @ t1 + b)
        eval_fn = None
        if f.eval_fn is not None or f.discrete:
            eval_fn = _layer_closure(f, sf, t0, t1, b)
        f = from_grid_values(model, vals, eval_fn=eval_fn)
    out_vals = f.values @ p.out_weight + p.out_bias
    eval_fn = None
    if f.eval_fn is not None or f.discrete:
        w_out, b_out = p.out_weight, p.out_bias
        prev = f
        eval_fn = lambda x: prev.at(x) @ w_out + b_out
    return from_grid_values(model, out_vals, eval_fn=eval_fn)


def _layer_closure(f_prev: LimitFunction, sf: LimitFunction, t0, t1, b):
    def eval_fn(x):
        return relu(f_prev.at(x) @ t0 + sf.at(x) @ t1 + b)

    return eval_fn


# ---------------------------------------------------------------------------
# Sign-invariant and set aggregation pieces
# ---------------------------------------------------------------------------


def signnet_symmetrize(p: MlpParams, u: np.ndarray) -> np.ndarray:
    """f(u) + f(-u) coordinate-wise; output row per entry of u."""
    u = np.asarray(u, dtype=float).reshape(-1, 1)
    return mlp_forward(p, u) + mlp_forward(p, -u)


def deepset_aggregate(p: MlpParams, rows: np.ndarray) -> np.ndarray:
    """Mean over rows of the MLP applied row-wise."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return mlp_forward(p, rows).mean(axis=0)


# ---------------------------------------------------------------------------
# Parameter serialization (text tensor dump with shape headers)
# ---------------------------------------------------------------------------


def _write_arrays(fh, arrays: dict):
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=float)
        fh.write(f"# {name} {' '.join(str(d) for d in arr.shape)}\n")
        for v in arr.ravel():
            fh.write(f"{v!r}\n")


def _read_arrays(path) -> dict:
    arrays = {}
    name, shape, buf = None, None, []

    def flush():
        if name is not None:
            arrays[name] = np.array(buf, dtype=float).reshape(shape)

    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                flush()
                parts = line[1:].split()
                name, shape, buf = parts[0], tuple(int(d) for d in parts[1:]), []
            elif line:
                buf.append(float(line))
    flush()
    return arrays


def save_mlp_params(p: MlpParams, path) -> None:
    arrays = {}
    for i, (W, b) in enumerate(zip(p.weights, p.biases)):
        arrays[f"W{i}"] = W
        arrays[f"b{i}"] = b
    with open(path, "w") as fh:
        _write_arrays(fh, arrays)


def load_mlp_params(path) -> MlpParams:
    arrays = _read_arrays(path)
    n = sum(1 for k in arrays if k.startswith("W"))
    return MlpParams(
        weights=[arrays[f"W{i}"] for i in range(n)],
        biases=[arrays[f"b{i}"] for i in range(n)],
    )


def save_gnn_params(p: GnnParams, path) -> None:
    arrays = {}
    for i in range(len(p.theta0)):
        arrays[f"t0_{i}"] = p.theta0[i]
        arrays[f"t1_{i}"] = p.theta1[i]
        arrays[f"b_{i}"] = p.biases[i]
    arrays["out_w"] = p.out_weight
    arrays["out_b"] = p.out_bias
    with open(path, "w") as fh:
        _write_arrays(fh, arrays)


def load_gnn_params(path) -> GnnParams:
    arrays = _read_arrays(path)
    n = sum(1 for k in arrays if k.startswith("t0_"))
    return GnnParams(
        theta0=[arrays[f"t0_{i}"] for i in range(n)],
        theta1=[arrays[f"t1_{i}"] for i in range(n)],
        biases=[arrays[f"b_{i}"] for i in range(n)],
        out_weight=arrays["out_w"],
        out_bias=arrays["out_b"],
    )
