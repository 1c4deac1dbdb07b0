"""Coordinate MLP mapping encoded positions to physical-property values.

The network is evaluated in double precision with plain numpy so that
forward values, weight gradients and the full weight Jacobian are
bit-reproducible given a seed.  All weight vectors use one fixed
flattening: for each layer in order, W.ravel() (C order, shape
(fan_in, fan_out)) followed by the bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from nfinv.encoding import EncodedInput
from nfinv.errors import CapacityError

OUTPUT_ACTIVATIONS = ("tanh", "sigmoid", "relu", "none")


@dataclass
class Mlp:
    """Fully connected network with LeakyReLU hidden layers and scalar output.

    The physical-property head is ``offset + scale * act(raw)``; with a
    sigmoid head the output is confined to (offset, offset + scale).
    """

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_slope: float = 0.01
    output_activation: str = "tanh"
    output_scale: float = 1.0
    output_offset: float = 0.0
    seed: int | None = None

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def param_count(layer_dims) -> int:
    """Trainable parameter count for the given layer widths."""
    dims = list(layer_dims)
    return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


def init_kaiming(layer_dims, hidden_slope: float = 0.01,
                 output_activation: str = "tanh",
                 output_scale: float = 1.0, output_offset: float = 0.0,
                 seed: int = 0) -> Mlp:
    """Gaussian fan-in initialization, gain adjusted for the LeakyReLU slope.

    Weights ~ N(0, 2 / ((1 + slope^2) * fan_in)), biases zero.  Deterministic
    per seed.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer dims must be >= 1, got {dims}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ValueError(f"unknown output activation {output_activation!r}")

    rng = np.random.default_rng(seed)
    gain2 = 2.0 / (1.0 + hidden_slope ** 2)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        std = np.sqrt(gain2 / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases, hidden_slope, output_activation,
               output_scale, output_offset, seed)


def get_weights(mlp: Mlp) -> np.ndarray:
    """Flatten all parameters into a single vector (fixed layer order)."""
    parts = []
    for w, b in zip(mlp.weights, mlp.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def set_weights(mlp: Mlp, flat: np.ndarray) -> None:
    """Write a flat parameter vector back into the layer arrays."""
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (mlp.param_count,):
        raise ValueError(f"expected {mlp.param_count} parameters, "
                         f"got {flat.shape}")
    pos = 0
    for w, b in zip(mlp.weights, mlp.biases):
        w[...] = flat[pos:pos + w.size].reshape(w.shape)
        pos += w.size
        b[...] = flat[pos:pos + b.size]
        pos += b.size


def _as_matrix(z) -> np.ndarray:
    if isinstance(z, EncodedInput):
        return z.Z
    return np.asarray(z, dtype=float)


def _leaky(a: np.ndarray, slope: float) -> np.ndarray:
    return np.where(a > 0, a, slope * a)


def _leaky_deriv(a: np.ndarray, slope: float) -> np.ndarray:
    return np.where(a > 0, 1.0, slope)


def _out_act(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(a)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-a))
    if kind == "relu":
        return np.maximum(a, 0.0)
    return a


def _out_act_deriv(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        t = np.tanh(a)
        return 1.0 - t * t
    if kind == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-a))
        return s * (1.0 - s)
    if kind == "relu":
        return (a > 0).astype(float)
    return np.ones_like(a)


def _forward_cached(mlp: Mlp, x: np.ndarray):
    """Forward pass keeping layer inputs and pre-activations for backprop."""
    xs = [x]          # inputs to each layer
    pre = []          # pre-activation of each layer
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        a = xs[-1] @ w + b
        pre.append(a)
        if i < mlp.n_layers - 1:
            xs.append(_leaky(a, mlp.hidden_slope))
    raw = pre[-1][:, 0]
    m = mlp.output_offset + mlp.output_scale * _out_act(raw, mlp.output_activation)
    return m, xs, pre


def forward(mlp: Mlp, z) -> np.ndarray:
    """Evaluate the network on every row of Z; returns the model vector."""
    x = _as_matrix(z)
    if x.ndim != 2 or x.shape[1] != mlp.input_dim:
        raise ValueError(f"Z must have shape (n, {mlp.input_dim}), "
                         f"got {x.shape}")
    m, _, _ = _forward_cached(mlp, x)
    return m


def _output_deltas(mlp: Mlp, pre: list[np.ndarray], cotangent: np.ndarray):
    """Backprop sensitivities D_l of (cotangent . m) per layer, all cells."""
    raw = pre[-1][:, 0]
    d = (cotangent * mlp.output_scale *
         _out_act_deriv(raw, mlp.output_activation))[:, None]
    deltas = [None] * mlp.n_layers
    deltas[-1] = d
    for i in range(mlp.n_layers - 2, -1, -1):
        d = (d @ mlp.weights[i + 1].T) * _leaky_deriv(pre[i], mlp.hidden_slope)
        deltas[i] = d
    return deltas


def vjp(mlp: Mlp, z, cotangent: np.ndarray) -> np.ndarray:
    """Gradient of (cotangent . m(w)) with respect to the flat weights.

    Linear in the cotangent; this is one reverse-mode sweep over all cells.
    """
    x = _as_matrix(z)
    cotangent = np.asarray(cotangent, dtype=float)
    if cotangent.shape != (x.shape[0],):
        raise ValueError(f"cotangent must have length {x.shape[0]}, "
                         f"got {cotangent.shape}")
    _, xs, pre = _forward_cached(mlp, x)
    deltas = _output_deltas(mlp, pre, cotangent)
    parts = []
    for i in range(mlp.n_layers):
        parts.append((xs[i].T @ deltas[i]).ravel())
        parts.append(deltas[i].sum(axis=0))
    return np.concatenate(parts)


def jvp(mlp: Mlp, z, dw: np.ndarray) -> np.ndarray:
    """Directional derivative J @ dw of the model with respect to weights."""
    x = _as_matrix(z)
    dw = np.asarray(dw, dtype=float)
    if dw.shape != (mlp.param_count,):
        raise ValueError(f"expected {mlp.param_count} tangents, got {dw.shape}")
    pos = 0
    cur = x
    tan = np.zeros_like(x)
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        dwi = dw[pos:pos + w.size].reshape(w.shape)
        pos += w.size
        dbi = dw[pos:pos + b.size]
        pos += b.size
        a = cur @ w + b
        da = tan @ w + cur @ dwi + dbi
        if i < mlp.n_layers - 1:
            tan = da * _leaky_deriv(a, mlp.hidden_slope)
            cur = _leaky(a, mlp.hidden_slope)
        else:
            raw, draw = a[:, 0], da[:, 0]
    return mlp.output_scale * _out_act_deriv(raw, mlp.output_activation) * draw


class JacobianOperator:
    """Matrix-free handle on J = d(model)/d(weights), shape (n_cells, n_params).

    matvec is a forward-mode pass, rmatvec a reverse-mode pass; both are
    exact (no finite differencing).
    """

    def __init__(self, mlp: Mlp, z):
        self._mlp = mlp
        self._z = _as_matrix(z)
        self.shape = (self._z.shape[0], mlp.param_count)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return jvp(self._mlp, self._z, v)

    def rmatvec(self, u: np.ndarray) -> np.ndarray:
        return vjp(self._mlp, self._z, u)

    def matmat(self, v: np.ndarray) -> np.ndarray:
        return np.column_stack([self.matvec(col) for col in v.T])

    def rmatmat(self, u: np.ndarray) -> np.ndarray:
        return np.column_stack([self.rmatvec(col) for col in u.T])


def weight_jacobian(mlp: Mlp, z, max_bytes: int = 2 ** 30) -> np.ndarray:
    """Dense Jacobian d(model)/d(weights); row i is vjp with cotangent e_i.

    Rows for all cells are assembled in one batched sweep (cells are
    independent samples, so per-cell gradients never mix).  Refuses to
    allocate more than ``max_bytes``; use :class:`JacobianOperator` beyond
    that.
    """
    x = _as_matrix(z)
    n, p = x.shape[0], mlp.param_count
    need = n * p * 8
    if need > max_bytes:
        raise CapacityError(
            f"dense Jacobian needs {need} bytes (> budget {max_bytes}); "
            "use JacobianOperator for the matrix-free path")
    _, xs, pre = _forward_cached(mlp, x)
    deltas = _output_deltas(mlp, pre, np.ones(n))
    blocks = []
    for i in range(mlp.n_layers):
        jw = np.einsum("ni,nj->nij", xs[i], deltas[i]).reshape(n, -1)
        blocks.append(jw)
        blocks.append(deltas[i])
    return np.hstack(blocks)


def save_checkpoint(path, mlp: Mlp, epoch: int | None = None) -> None:
    """One-line JSON header followed by the little-endian float64 weights."""
    header = {
        "layer_dims": list(mlp.layer_dims),
        "hidden_slope": mlp.hidden_slope,
        "output_activation": mlp.output_activation,
        "output_scale": mlp.output_scale,
        "output_offset": mlp.output_offset,
        "seed": mlp.seed,
        "epoch": epoch,
        "dtype": "<f8",
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        f.write(get_weights(mlp).astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[Mlp, dict]:
    """Rebuild a network from :func:`save_checkpoint` output."""
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode())
        flat = np.frombuffer(f.read(), dtype="<f8").astype(float)
    mlp = init_kaiming(header["layer_dims"],
                       hidden_slope=header["hidden_slope"],
                       output_activation=header["output_activation"],
                       output_scale=header["output_scale"],
                       output_offset=header["output_offset"],
                       seed=header["seed"] or 0)
    set_weights(mlp, flat)
    return mlp, header
