"""Synthetic objectives with exact gradients, known smoothness constants and
controllable stochastic-gradient noise.

Noise is injected additively onto the exact gradient for every problem, so
the per-coordinate oracle scale sigma_i (and hence the batch-n standard
deviation sigma_i/sqrt(n)) is exactly known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import RngStream, STREAM_DATA, as_vector

NOISE_FAMILIES = ("gaussian", "uniform", "laplace", "asymmetric-bimodal")

# Asymmetric two-point mixture: +a with prob q, -b with prob 1-q, chosen so
# the mean is zero and the variance is 1. q = 0.1 gives a = 3, b = 1/3.
BIMODAL_Q = 0.1


@dataclass(frozen=True)
class NoiseSpec:
    family: str
    sigma: np.ndarray  # per-coordinate oracle std, >= 0

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family: {self.family!r}")
        object.__setattr__(self, "sigma", as_vector(self.sigma))
        if np.any(self.sigma < 0):
            raise ValueError("noise scales must be >= 0")


@dataclass(frozen=True)
class Problem:
    dim: int
    eval_f: Callable[[np.ndarray], float]
    eval_grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: np.ndarray  # per-coordinate L_i
    f_star: float
    noise: NoiseSpec
    name: str = "problem"


@dataclass(frozen=True)
class GradSample:
    grad: np.ndarray
    batch_size: int
    coord_std: np.ndarray  # sigma_i / sqrt(n)


def sample_unit_noise(family: str, size, rng: RngStream) -> np.ndarray:
    """Zero-mean, unit-variance draws from the named family."""
    if family == "gaussian":
        return rng.normal(size)
    if family == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
    if family == "laplace":
        return rng.laplace(1.0 / math.sqrt(2.0), size)
    if family == "asymmetric-bimodal":
        q = BIMODAL_Q
        a = math.sqrt((1.0 - q) / q)
        b = math.sqrt(q / (1.0 - q))
        u = rng.uniform(0.0, 1.0, size)
        return np.where(u < q, a, -b)
    raise ValueError(f"unknown noise family: {family!r}")


def sample_noise(spec: NoiseSpec, n: int, rng: RngStream) -> np.ndarray:
    """n independent oracle-noise vectors, shape (n, dim)."""
    unit = sample_unit_noise(spec.family, (n, spec.sigma.size), rng)
    return unit * spec.sigma


def stochastic_grad(p: Problem, x: np.ndarray, n: int, rng: RngStream) -> GradSample:
    """Mini-batch gradient: exact gradient plus the mean of n oracle-noise
    draws, so Var = sigma_i^2 / n exactly for unit-variance families."""
    if n < 1:
        raise ValueError("batch size must be >= 1")
    g = p.eval_grad(x)
    if np.any(p.noise.sigma > 0):
        g = g + sample_noise(p.noise, n, rng).mean(axis=0)
    return GradSample(grad=g, batch_size=n, coord_std=p.noise.sigma / math.sqrt(n))


def make_quadratic(lipschitz, x_opt, noise: NoiseSpec) -> Problem:
    """Separable quadratic f(x) = 1/2 sum_i L_i (x_i - x*_i)^2.

    The coordinate Lipschitz vector of this f is exactly `lipschitz` and
    f_star = 0, which makes it the sharpest substrate for rate checks.
    """
    L = as_vector(lipschitz)
    x_opt = as_vector(x_opt)
    if np.any(L < 0):
        raise ValueError("Lipschitz constants must be >= 0")
    if L.shape != x_opt.shape:
        raise ValueError("lipschitz and x_opt dimension mismatch")

    def eval_f(x):
        d = x - x_opt
        return float(0.5 * np.sum(L * d * d))

    def eval_grad(x):
        return L * (x - x_opt)

    return Problem(dim=L.size, eval_f=eval_f, eval_grad=eval_grad,
                   lipschitz=L, f_star=0.0, noise=noise, name="quadratic")


def make_logistic(dataset_seed: int, dim: int, n_points: int, noise: NoiseSpec,
                  reg: float = 1e-2) -> Problem:
    """L2-regularized logistic loss on a synthetic near-separable dataset.

    Per-coordinate curvature of the log-loss term is at most
    (1/4) mean_j a_{j,i}^2, so L_i = (1/4) mean_j a_{j,i}^2 + reg is a valid
    coordinate Lipschitz bound; f_star = 0 is a valid lower bound because
    both loss terms are nonnegative.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    data_rng = RngStream(dataset_seed, STREAM_DATA)
    w_true = data_rng.normal(dim)
    w_true /= np.linalg.norm(w_true)
    A = data_rng.normal((n_points, dim))
    margins = A @ w_true + 0.1 * data_rng.normal(n_points)
    y = np.where(margins >= 0, 1.0, -1.0)

    L = 0.25 * np.mean(A * A, axis=0) + reg

    def eval_f(x):
        z = -y * (A @ x)
        # log(1 + e^z) computed stably
        loss = np.mean(np.logaddexp(0.0, z))
        return float(loss + 0.5 * reg * (x @ x))

    def eval_grad(x):
        z = -y * (A @ x)
        s = 1.0 / (1.0 + np.exp(-z))  # sigmoid(z)
        return A.T @ (-y * s) / n_points + reg * x

    return Problem(dim=dim, eval_f=eval_f, eval_grad=eval_grad,
                   lipschitz=L, f_star=0.0, noise=noise, name="logistic")


def _layer_shapes(layer_widths: Sequence[int]):
    shapes = []
    for fan_in, fan_out in zip(layer_widths[:-1], layer_widths[1:]):
        shapes.append((fan_out, fan_in))  # weight
        shapes.append((fan_out,))         # bias
    return shapes


def _unpack(x: np.ndarray, shapes):
    out, pos = [], 0
    for s in shapes:
        size = int(np.prod(s))
        out.append(x[pos:pos + size].reshape(s))
        pos += size
    return out


def make_mlp(dataset_seed: int, layer_widths: Sequence[int], noise: NoiseSpec,
             n_points: int = 64) -> Problem:
    """Two-class cross-entropy over a tanh MLP on a synthetic two-cluster
    dataset, with gradients via manual backpropagation.

    layer_widths lists every layer size including the input and the scalar
    logit output, e.g. (2, 8, 1). The Lipschitz vector is a coarse
    trust-region estimate (curvature of the logistic head times a bound on
    squared activation magnitudes, assuming weights stay within +-B); it is
    deliberately conservative and is never used for rate verification.
    """
    widths = list(layer_widths)
    if len(widths) < 3:
        raise ValueError("need at least one hidden layer")
    if widths[-1] != 1:
        raise ValueError("output layer width must be 1 (scalar logit)")

    data_rng = RngStream(dataset_seed, STREAM_DATA)
    d_in = widths[0]
    half = n_points // 2
    mu = np.full(d_in, 1.5)
    X = np.vstack([
        mu + data_rng.normal((half, d_in)),
        -mu + data_rng.normal((n_points - half, d_in)),
    ])
    y = np.concatenate([np.ones(half), -np.ones(n_points - half)])

    shapes = _layer_shapes(widths)
    dim = sum(int(np.prod(s)) for s in shapes)
    n_layers = len(widths) - 1

    def forward(x):
        params = _unpack(x, shapes)
        acts = [X.T]  # (width, n_points) column-per-sample
        for l in range(n_layers):
            W, b = params[2 * l], params[2 * l + 1]
            pre = W @ acts[-1] + b[:, None]
            acts.append(pre if l == n_layers - 1 else np.tanh(pre))
        return params, acts

    def eval_f(x):
        _, acts = forward(x)
        z = -y * acts[-1][0]
        return float(np.mean(np.logaddexp(0.0, z)))

    def eval_grad(x):
        params, acts = forward(x)
        logits = acts[-1][0]
        # d loss / d logit = -y * sigmoid(-y z), averaged over samples
        dlogit = (-y / (1.0 + np.exp(y * logits))) / n_points
        delta = dlogit[None, :]
        grads = [None] * (2 * n_layers)
        for l in range(n_layers - 1, -1, -1):
            W = params[2 * l]
            grads[2 * l] = delta @ acts[l].T
            grads[2 * l + 1] = delta.sum(axis=1)
            if l > 0:
                delta = (W.T @ delta) * (1.0 - acts[l] * acts[l])
        return np.concatenate([g.ravel() for g in grads])

    # Coarse curvature bound: logistic head curvature 1/4, activations
    # bounded by max(|X|, 1) through tanh, weights assumed within +-B.
    B = 4.0
    act_bound = max(1.0, float(np.max(np.abs(X))))
    L_scalar = 0.25 * (act_bound ** 2) * (B ** (2 * (n_layers - 1)))
    L = np.full(dim, L_scalar)

    return Problem(dim=dim, eval_f=eval_f, eval_grad=eval_grad,
                   lipschitz=L, f_star=0.0, noise=noise, name="mlp")
