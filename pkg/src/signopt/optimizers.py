"""Step rules for the sign-based optimizer family as pure state transitions.

Covers plain SGD, SignSGD, SignSGD with momentum, pre-/post-sign dithered
variants, the projection-based learning-rate calibration, and the hybrid
sign-to-SGD switcher that freezes the calibrated stepsize at the switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import RngStream, inner, l2_norm_sq, sample_gaussian, sign_vec
from .dither import DEFAULT_GAMMA, DitherSchedule, dither_sigma_sq
from .problems import GradSample

PHASE_SIGN = "sign"
PHASE_SGD = "sgd"

DITHER_MODES = ("none", "pre", "post")


@dataclass(frozen=True)
class OptimizerConfig:
    delta: float = 0.01          # sign-phase learning rate
    beta: float = 0.9            # momentum decay
    alpha: float = 0.0           # dither scale (0 disables dithering)
    gamma: float = DEFAULT_GAMMA  # dither annealing exponent
    eta: float = 0.99            # EMA decay for the calibrated stepsize
    epsilon: float = 1e-12       # projection stabilizer
    t_switch: float = math.inf   # step index at which the hybrid switches
    dither_mode: str = "none"
    lambda_bias_correction: bool = False  # divide the frozen EMA by 1-eta^k

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must be in (0, 1)")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if not (0.0 < self.eta < 1.0):
            raise ValueError("eta must be in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.t_switch < 0:
            raise ValueError("t_switch must be >= 0")
        if self.dither_mode not in DITHER_MODES:
            raise ValueError(f"unknown dither mode: {self.dither_mode!r}")


@dataclass(frozen=True)
class OptimizerState:
    x: np.ndarray
    m: np.ndarray
    k: int = 0
    lambda_ema: float = 0.0
    phase: str = PHASE_SIGN
    last_lambda: float = 0.0


def init_state(x0: np.ndarray, lambda_ema: float = 0.0) -> OptimizerState:
    x0 = np.asarray(x0, dtype=np.float64)
    return OptimizerState(x=x0.copy(), m=np.zeros_like(x0),
                          lambda_ema=lambda_ema)


def sgd_step(state: OptimizerState, grad: GradSample, lr: float) -> OptimizerState:
    if lr < 0:
        raise ValueError("lr must be >= 0")
    return replace(state, x=state.x - lr * grad.grad, k=state.k + 1,
                   phase=PHASE_SGD, last_lambda=0.0)


def signsgd_step(state: OptimizerState, grad: GradSample,
                 cfg: OptimizerConfig) -> OptimizerState:
    return replace(state, x=state.x - cfg.delta * sign_vec(grad.grad),
                   k=state.k + 1, phase=PHASE_SIGN, last_lambda=0.0)


def _momentum(state: OptimizerState, grad: GradSample,
              cfg: OptimizerConfig) -> np.ndarray:
    return cfg.beta * state.m + (1.0 - cfg.beta) * grad.grad


def signsgdm_step(state: OptimizerState, grad: GradSample,
                  cfg: OptimizerConfig) -> OptimizerState:
    m_next = _momentum(state, grad, cfg)
    return replace(state, x=state.x - cfg.delta * sign_vec(m_next),
                   m=m_next, k=state.k + 1, phase=PHASE_SIGN)


def _dithered_direction(m_next: np.ndarray, k: int, cfg: OptimizerConfig,
                        rng: RngStream) -> np.ndarray:
    """Update direction of the sign step under the configured dither mode.

    sigma_k = 0 draws nothing, so the alpha = 0 trajectory is bitwise equal
    to the clean one on the same streams.
    """
    s2 = dither_sigma_sq(k, DitherSchedule(cfg.alpha, cfg.gamma))
    if s2 == 0.0 or cfg.dither_mode == "none":
        return sign_vec(m_next)
    xi = sample_gaussian(m_next.size, 0.0, math.sqrt(s2), rng)
    if cfg.dither_mode == "pre":
        return sign_vec(m_next + xi)
    return sign_vec(m_next) + xi  # post


def dithered_step(state: OptimizerState, grad: GradSample,
                  cfg: OptimizerConfig, rng: RngStream) -> OptimizerState:
    if cfg.dither_mode not in ("pre", "post"):
        raise ValueError("dithered_step requires dither_mode 'pre' or 'post'")
    m_next = _momentum(state, grad, cfg)
    direction = _dithered_direction(m_next, state.k, cfg, rng)
    return replace(state, x=state.x - cfg.delta * direction,
                   m=m_next, k=state.k + 1, phase=PHASE_SIGN)


def lambda_project(m_next: np.ndarray, grad: np.ndarray, delta: float,
                   epsilon: float) -> float:
    """Nonnegative scalar making an SGD step match the projection of the
    sign step onto the current stochastic gradient:
    delta * |<sign(m), g>| / (||g||^2 + epsilon)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    return delta * abs(inner(sign_vec(m_next), grad)) / (l2_norm_sq(grad) + epsilon)


def hybrid_step(state: OptimizerState, grad: GradSample,
                cfg: OptimizerConfig, rng: RngStream) -> OptimizerState:
    """Sign phase while k < t_switch (momentum sign step, optionally
    dithered, with the calibrated-stepsize EMA tracked from the un-dithered
    momentum); afterwards plain SGD with the EMA frozen at the switch."""
    if state.k < cfg.t_switch:
        m_next = _momentum(state, grad, cfg)
        lam = lambda_project(m_next, grad.grad, cfg.delta, cfg.epsilon)
        lam_ema = cfg.eta * state.lambda_ema + (1.0 - cfg.eta) * lam
        direction = _dithered_direction(m_next, state.k, cfg, rng)
        return OptimizerState(x=state.x - cfg.delta * direction, m=m_next,
                              k=state.k + 1, lambda_ema=lam_ema,
                              phase=PHASE_SIGN, last_lambda=lam)
    lam_bar = state.lambda_ema
    n_updates = min(state.k, cfg.t_switch)
    if cfg.lambda_bias_correction and n_updates > 0:
        # the EMA starts at zero, so early values are biased low by the
        # factor 1 - eta^n; the toggle removes it at the point of use
        lam_bar /= 1.0 - cfg.eta ** n_updates
    return replace(state, x=state.x - lam_bar * grad.grad,
                   k=state.k + 1, phase=PHASE_SGD, last_lambda=0.0)
