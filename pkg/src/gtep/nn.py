"""From-scratch micro-MLP: exact-GELU forward pass, inverted dropout,
reverse-mode gradients, and Adam updates.

Parameters and activations are float32 by default (pass dtype=np.float64 to
init() for 64-bit work such as gradient checking); reductions that feed
metrics are accumulated in float64 by the callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .exceptions import InvalidArgumentError, InvalidStateError
from .rng import Rng

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x):
    """Exact GELU x * Phi(x), with Phi the standard normal CDF (erf form, not the tanh fit)."""
    x = np.asarray(x)
    return x * (0.5 * (1.0 + erf(x * x.dtype.type(_INV_SQRT2))))


def gelu_grad(x):
    """d/dx of exact GELU: Phi(x) + x * phi(x)."""
    x = np.asarray(x)
    phi = x.dtype.type(_INV_SQRT_2PI) * np.exp(x.dtype.type(-0.5) * x * x)
    return 0.5 * (1.0 + erf(x * x.dtype.type(_INV_SQRT2))) + x * phi


def param_count(dims) -> int:
    """Total parameter count sum(dims[i]*dims[i+1] + dims[i+1])."""
    dims = list(dims)
    if len(dims) < 2:
        raise InvalidArgumentError("need at least input and output dims")
    if any(d < 1 for d in dims):
        raise InvalidArgumentError("all dims must be >= 1")
    return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


DEFAULT_DIMS = (11, 64, 64, 32, 1)


@dataclass
class Mlp:
    """Feedforward net: GELU hidden layers, identity output.

    weights[l] has shape (dims[l+1], dims[l]); biases[l] has shape (dims[l+1],).
    """

    dims: tuple
    weights: list
    biases: list

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        return Mlp(self.dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init(dims, seed: int, dtype=np.float32) -> Mlp:
    """Deterministic init: weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases zero.

    Weights are drawn layer by layer in row-major order from one stream, so
    the full parameter vector is a pure function of (dims, seed).
    """
    dims = tuple(int(d) for d in dims)
    param_count(dims)  # validates
    rng = Rng(seed, stream=1)
    weights, biases = [], []
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        bound = np.sqrt(6.0 / fan_in)
        u = rng.uniforms(fan_out * fan_in)
        w = ((2.0 * u - 1.0) * bound).reshape(fan_out, fan_in).astype(dtype)
        weights.append(w)
        biases.append(np.zeros(fan_out, dtype=dtype))
    return Mlp(dims, weights, biases)


def _check_input(mlp: Mlp, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim not in (1, 2):
        raise InvalidArgumentError("input must be a 1-D or 2-D array")
    if x.shape[-1] != mlp.dims[0]:
        raise InvalidArgumentError(
            f"input last dim {x.shape[-1]} != model input dim {mlp.dims[0]}"
        )
    return x


def forward(mlp: Mlp, x):
    """Inference forward pass (no dropout). 1-D input -> float, 2-D (n, d) -> (n,) array."""
    x = _check_input(mlp, x)
    single = x.ndim == 1
    a = np.atleast_2d(x).astype(mlp.dtype, copy=False)
    last = mlp.n_layers - 1
    for l in range(last):
        a = gelu(a @ mlp.weights[l].T + mlp.biases[l])
    out = (a @ mlp.weights[last].T + mlp.biases[last]).ravel()
    return float(out[0]) if single else out


@dataclass
class ForwardCache:
    """Intermediates recorded by forward_train for the matching backward call."""

    n: int
    inputs: np.ndarray
    zs: list = field(default_factory=list)       # pre-activations per hidden layer
    acts: list = field(default_factory=list)     # post-dropout activations per hidden layer
    masks: list = field(default_factory=list)    # scaled keep-masks, or None when p == 0


def forward_train(mlp: Mlp, x, p: float, rng: Rng | None = None):
    """Training forward pass with inverted dropout after each hidden activation.

    Returns (predictions, cache).  With p == 0 the arithmetic is identical to
    forward(), bit for bit.  Masks scale surviving units by 1/(1-p) so
    inference needs no rescaling.
    """
    if not 0.0 <= p < 1.0:
        raise InvalidArgumentError("dropout probability must be in [0, 1)")
    if p > 0.0 and rng is None:
        raise InvalidArgumentError("dropout requires an rng")
    x = _check_input(mlp, x)
    a = np.atleast_2d(x).astype(mlp.dtype, copy=False)
    cache = ForwardCache(n=a.shape[0], inputs=a)
    last = mlp.n_layers - 1
    for l in range(last):
        z = a @ mlp.weights[l].T + mlp.biases[l]
        a = gelu(z)
        if p > 0.0:
            keep = rng.uniforms(z.size).reshape(z.shape) >= p
            mask = keep.astype(mlp.dtype) / mlp.dtype.type(1.0 - p)
            a = a * mask
        else:
            mask = None
        cache.zs.append(z)
        cache.acts.append(a)
        cache.masks.append(mask)
    pred = (a @ mlp.weights[last].T + mlp.biases[last]).ravel()
    return pred, cache


def backward(mlp: Mlp, cache: ForwardCache, dpred):
    """Gradients of a scalar loss given dpred = dL/dprediction per row.

    Returns (weight_grads, bias_grads) with shapes matching the parameters.
    """
    dpred = np.asarray(dpred, dtype=mlp.dtype).ravel()
    if len(cache.zs) != mlp.n_layers - 1 or dpred.shape[0] != cache.n:
        raise InvalidStateError("cache does not match this model/batch")
    last = mlp.n_layers - 1
    gw = [None] * mlp.n_layers
    gb = [None] * mlp.n_layers

    a_prev = cache.acts[-1] if last > 0 else cache.inputs
    delta = dpred[:, None]
    gw[last] = delta.T @ a_prev
    gb[last] = delta.sum(axis=0)
    grad_a = delta @ mlp.weights[last]

    for l in range(last - 1, -1, -1):
        if cache.masks[l] is not None:
            grad_a = grad_a * cache.masks[l]
        delta = grad_a * gelu_grad(cache.zs[l])
        a_prev = cache.acts[l - 1] if l > 0 else cache.inputs
        gw[l] = delta.T @ a_prev
        gb[l] = delta.sum(axis=0)
        if l > 0:
            grad_a = delta @ mlp.weights[l]
    return gw, gb


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter tensor."""

    m_w: list
    v_w: list
    m_b: list
    v_b: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(mlp: Mlp) -> AdamState:
    return AdamState(
        m_w=[np.zeros_like(w) for w in mlp.weights],
        v_w=[np.zeros_like(w) for w in mlp.weights],
        m_b=[np.zeros_like(b) for b in mlp.biases],
        v_b=[np.zeros_like(b) for b in mlp.biases],
    )


def adam_step(mlp: Mlp, grads, state: AdamState, lr: float = 1e-3):
    """One Adam update with bias-corrected moments; mutates mlp and state in place.

    Returns (mlp, state) for convenience.  Zero gradients leave parameters
    unchanged while still advancing the step counter.
    """
    if lr <= 0:
        raise InvalidArgumentError("lr must be > 0")
    gw, gb = grads
    if len(gw) != mlp.n_layers or len(gb) != mlp.n_layers:
        raise InvalidArgumentError("gradient list length mismatch")
    state.t += 1
    b1 = mlp.dtype.type(state.beta1)
    b2 = mlp.dtype.type(state.beta2)
    c1 = mlp.dtype.type(1.0 - state.beta1 ** state.t)
    c2 = mlp.dtype.type(1.0 - state.beta2 ** state.t)
    eps = mlp.dtype.type(state.eps)
    step = mlp.dtype.type(lr)
    one = mlp.dtype.type(1.0)
    for params, gs, ms, vs in (
        (mlp.weights, gw, state.m_w, state.v_w),
        (mlp.biases, gb, state.m_b, state.v_b),
    ):
        for i, g in enumerate(gs):
            if g.shape != params[i].shape:
                raise InvalidArgumentError(
                    f"gradient shape {g.shape} != parameter shape {params[i].shape}"
                )
            ms[i] *= b1
            ms[i] += (one - b1) * g
            vs[i] *= b2
            vs[i] += (one - b2) * (g * g)
            params[i] -= step * (ms[i] / c1) / (np.sqrt(vs[i] / c2) + eps)
    return mlp, state
