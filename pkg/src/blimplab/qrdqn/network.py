"""Quantile value network: obs -> [linear -> layernorm -> relu] x 2 -> linear.

Parameters live in a plain dict of float64 arrays so the optimizer,
checkpointing and the finite-difference checks can iterate over them
uniformly. The head emits ``n_actions * n_quantiles`` values, reshaped to
``(batch, n_actions, n_quantiles)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError

LN_EPS = 1e-5
PARAM_NAMES = ("W1", "b1", "g1", "o1", "W2", "b2", "g2", "o2", "W3", "b3")


@dataclass(frozen=True)
class QuantileTable:
    values: np.ndarray  # (n_actions, n_quantiles)

    @property
    def n_quantiles(self):
        return self.values.shape[1]

    @property
    def taus(self):
        return quantile_midpoints(self.n_quantiles)

    @property
    def means(self):
        return self.values.mean(axis=1)


def quantile_midpoints(n):
    return (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)


def init_params(rng, obs_dim=10, hidden=64, n_actions=7, n_quantiles=12):
    if not 2 <= n_quantiles <= 12:
        raise ValueError("n_quantiles must be in [2, 12]")

    def dense(fan_in, fan_out, gain):
        return rng.normal(0.0, gain / np.sqrt(fan_in), size=(fan_in, fan_out))

    out = n_actions * n_quantiles
    return {
        "W1": dense(obs_dim, hidden, np.sqrt(2.0)), "b1": np.zeros(hidden),
        "g1": np.ones(hidden), "o1": np.zeros(hidden),
        "W2": dense(hidden, hidden, np.sqrt(2.0)), "b2": np.zeros(hidden),
        "g2": np.ones(hidden), "o2": np.zeros(hidden),
        "W3": dense(hidden, out, 0.1), "b3": np.zeros(out),
    }


def copy_params(params):
    return {k: v.copy() for k, v in params.items()}


def _layernorm(z):
    mu = z.mean(axis=1, keepdims=True)
    xc = z - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + LN_EPS)
    return xc * inv, inv


def _layernorm_backward(dxhat, xhat, inv):
    d = xhat.shape[1]
    return inv / d * (d * dxhat - dxhat.sum(axis=1, keepdims=True)
                      - xhat * (dxhat * xhat).sum(axis=1, keepdims=True))


def forward_batch(params, x, n_actions=7, keep_cache=False):
    """Quantiles for a batch of observations, shape ``(B, n_actions, N)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    cache = {"x": x}
    h = x
    for i in (1, 2):
        z = h @ params[f"W{i}"] + params[f"b{i}"]
        xhat, inv = _layernorm(z)
        y = params[f"g{i}"] * xhat + params[f"o{i}"]
        a = np.maximum(y, 0.0)
        if not np.all(np.isfinite(a)):
            raise NumericalError(f"non-finite activation in hidden layer {i}", layer=i)
        if keep_cache:
            cache[i] = (h, xhat, inv, y)
        h = a
    out = h @ params["W3"] + params["b3"]
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite activation in output layer", layer=3)
    cache["h2"] = h
    out = out.reshape(x.shape[0], n_actions, -1)
    return (out, cache) if keep_cache else out


def forward(params, obs, n_actions=7):
    """QuantileTable for a single observation vector (or ``Observation``)."""
    vec = obs.vector if hasattr(obs, "vector") else obs
    return QuantileTable(forward_batch(params, vec, n_actions)[0])


def backward(params, cache, d_out):
    """Gradients of a scalar loss given ``d_out = dL/d(output)``, shape (B, A, N)."""
    g = {}
    d = d_out.reshape(d_out.shape[0], -1)
    g["W3"] = cache["h2"].T @ d
    g["b3"] = d.sum(axis=0)
    dh = d @ params["W3"].T
    for i in (2, 1):
        h_in, xhat, inv, y = cache[i]
        dy = dh * (y > 0)
        g[f"g{i}"] = (dy * xhat).sum(axis=0)
        g[f"o{i}"] = dy.sum(axis=0)
        dz = _layernorm_backward(dy * params[f"g{i}"], xhat, inv)
        g[f"W{i}"] = h_in.T @ dz
        g[f"b{i}"] = dz.sum(axis=0)
        dh = dz @ params[f"W{i}"].T
    return g
