"""Experiment runner: single trajectories, multi-seed suites, CSV/JSON
output.

Per-step diagnostics (the l1 gradient norm and the SNR-weighted measure)
are always computed from the TRUE gradient at the current iterate and the
known batch noise scale, never from the stochastic sample, and the summary
averages cover every step regardless of the recording stride.
"""

from __future__ import annotations

import json
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream, STREAM_DITHER, STREAM_GRAD, l1_norm
from .config import (ExperimentConfig, build_problem, initial_point,
                     serialize_config)
from .dither import DitherSchedule, dither_sigma_sq
from .optimizers import (OptimizerConfig, OptimizerState, PHASE_SGD,
                         PHASE_SIGN, dithered_step, hybrid_step, init_state,
                         lambda_project, sgd_step, signsgd_step,
                         signsgdm_step)
from .problems import Problem, stochastic_grad
from .theory import SnrProfile, phi_measure

CSV_HEADER = "k,f,l1_grad,phi,lambda,lambda_ema,sigma_dither_sq,phase"

AUTO_STRIDE_LIMIT = 10_000


@dataclass(frozen=True)
class Row:
    k: int
    f: float
    l1_grad: float
    phi: float
    lam: float
    lambda_ema: float
    sigma_dither_sq: float
    phase: str


@dataclass
class RunRecord:
    rows: list = field(default_factory=list)
    iterates: list = field(default_factory=list)  # filled on request only
    seed: int = 0
    steps: int = 0
    final_f: float = math.nan
    avg_phi: float = math.nan
    avg_l1: float = math.nan
    delta_used: float = math.nan
    lambda_at_switch: float = math.nan
    oracle_calls: int = 0
    diverged: bool = False
    wall_time: float = 0.0

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "steps": self.steps,
            "final_f": self.final_f,
            "avg_phi": self.avg_phi,
            "avg_l1": self.avg_l1,
            "delta_used": self.delta_used,
            "lambda_at_switch": self.lambda_at_switch,
            "oracle_calls": self.oracle_calls,
            "diverged": self.diverged,
            "wall_time": self.wall_time,
        }


def default_stride(steps: int) -> int:
    if steps <= AUTO_STRIDE_LIMIT:
        return 1
    return math.ceil(steps / AUTO_STRIDE_LIMIT)


def theorem_delta(problem: Problem, steps: int) -> float:
    """Constant stepsize 1/sqrt(L1 * K) prescribed by the rate theorem."""
    return 1.0 / math.sqrt(float(np.sum(problem.lipschitz)) * steps)


def _make_opt_config(cfg: ExperimentConfig, delta: float) -> OptimizerConfig:
    o = cfg.optimizer
    return OptimizerConfig(delta=delta, beta=o.beta, alpha=o.alpha,
                           gamma=o.gamma, eta=o.eta, epsilon=o.epsilon,
                           t_switch=o.t_switch, dither_mode=o.dither_mode,
                           lambda_bias_correction=o.lambda_bias_correction)


def run_single(cfg: ExperimentConfig, seed: int,
               problem: Problem | None = None,
               collect_iterates: bool = False) -> RunRecord:
    """Execute one seeded trajectory of the configured optimizer."""
    t0 = time.perf_counter()
    if problem is None:
        problem = build_problem(cfg)
    algo = cfg.optimizer.algorithm
    K = cfg.run.steps
    n = cfg.run.batch_size
    delta = (theorem_delta(problem, K) if cfg.run.theorem_mode
             else cfg.optimizer.delta)
    opt_cfg = _make_opt_config(cfg, delta)
    lr = cfg.optimizer.lr

    grad_rng = RngStream(seed, STREAM_GRAD)
    dither_rng = RngStream(seed, STREAM_DITHER)
    state = init_state(initial_point(cfg, problem),
                       lambda_ema=cfg.optimizer.lambda_init)
    stride = cfg.run.record_stride or default_stride(K)
    coord_std = problem.noise.sigma / math.sqrt(n)
    schedule = DitherSchedule(opt_cfg.alpha, opt_cfg.gamma)

    rec = RunRecord(seed=seed, steps=K, delta_used=delta, oracle_calls=0)
    sum_phi = 0.0
    sum_l1 = 0.0
    prev_phase = state.phase
    if collect_iterates:
        rec.iterates.append(state.x.copy())

    for k in range(K):
        # overflow here is the divergence signal, not an error
        with np.errstate(over="ignore", invalid="ignore"):
            g_true = problem.eval_grad(state.x)
            f_val = problem.eval_f(state.x)
        if not math.isfinite(f_val):
            rec.diverged = True
            rec.final_f = f_val
            break
        l1 = l1_norm(g_true)
        phi = phi_measure(SnrProfile(g_true, coord_std))
        sum_phi += phi
        sum_l1 += l1

        if cfg.run.decay_every and k and k % cfg.run.decay_every == 0:
            delta *= cfg.run.decay_factor
            lr *= cfg.run.decay_factor
            opt_cfg = _make_opt_config(cfg, delta)

        gs = stochastic_grad(problem, state.x, n, grad_rng)
        rec.oracle_calls += 1
        new_state = _apply_step(algo, state, gs, opt_cfg, lr, dither_rng)
        lam = _step_lambda(algo, new_state, gs, opt_cfg)

        if new_state.phase == PHASE_SGD and prev_phase == PHASE_SIGN and algo == "hybrid":
            rec.lambda_at_switch = new_state.lambda_ema
        prev_phase = new_state.phase

        if k % stride == 0 or k == K - 1:
            sig2 = (dither_sigma_sq(k, schedule)
                    if opt_cfg.dither_mode != "none" else 0.0)
            rec.rows.append(Row(k=k, f=f_val, l1_grad=l1, phi=phi, lam=lam,
                                lambda_ema=new_state.lambda_ema,
                                sigma_dither_sq=sig2,
                                phase=new_state.phase))
        state = new_state
        if collect_iterates:
            rec.iterates.append(state.x.copy())

    if not rec.diverged:
        rec.final_f = problem.eval_f(state.x)
        if not math.isfinite(rec.final_f):
            rec.diverged = True
    rec.avg_phi = sum_phi / max(rec.oracle_calls, 1)
    rec.avg_l1 = sum_l1 / max(rec.oracle_calls, 1)
    rec.wall_time = time.perf_counter() - t0
    return rec


def _apply_step(algo, state, gs, opt_cfg, lr, dither_rng) -> OptimizerState:
    if algo == "sgd":
        return sgd_step(state, gs, lr)
    if algo == "signsgd":
        return signsgd_step(state, gs, opt_cfg)
    if algo == "signsgdm":
        return signsgdm_step(state, gs, opt_cfg)
    if algo == "dithered":
        return dithered_step(state, gs, opt_cfg, dither_rng)
    if algo == "hybrid":
        return hybrid_step(state, gs, opt_cfg, dither_rng)
    raise ValueError(f"unknown algorithm: {algo!r}")


def _step_lambda(algo, new_state, gs, opt_cfg) -> float:
    """Calibration scalar recorded for this step.

    The hybrid tracks it internally; for the other momentum methods it is
    recomputed from the just-updated momentum (identical arithmetic), and
    momentum-free methods record 0.
    """
    if algo == "hybrid":
        return new_state.last_lambda
    if algo in ("signsgdm", "dithered"):
        return lambda_project(new_state.m, gs.grad, opt_cfg.delta,
                              opt_cfg.epsilon)
    return 0.0


def run_seeds(cfg: ExperimentConfig, seeds=None,
              problem: Problem | None = None) -> list:
    if problem is None:
        problem = build_problem(cfg)
    if seeds is None:
        seeds = cfg.run.seeds
    return [run_single(cfg, s, problem) for s in seeds]


# ---------------------------------------------------------------------------
# Suites

def run_theorem_suite(cfg_base: ExperimentConfig, seeds, k_grid, n_grid) -> dict:
    """Average the per-step diagnostics over seeds for each (K, n) cell and
    compare against the closed-form rate bounds."""
    from dataclasses import replace as _replace
    from .theory import TheoremInputs, theorem_rhs_l1, theorem_rhs_phi

    problem = build_problem(cfg_base)
    x0 = initial_point(cfg_base, problem)
    f0 = problem.eval_f(x0)
    l1_L = float(np.sum(problem.lipschitz))
    l1_sigma = float(np.sum(problem.noise.sigma))

    cells = []
    all_pass = True
    for K in k_grid:
        for n in n_grid:
            cfg = _replace(cfg_base,
                           run=_replace(cfg_base.run, steps=K, batch_size=n,
                                        theorem_mode=True,
                                        record_stride=max(1, K // 10)))
            recs = run_seeds(cfg, seeds, problem)
            avg_phi = statistics.fmean(r.avg_phi for r in recs)
            avg_l1 = statistics.fmean(r.avg_l1 for r in recs)
            t = TheoremInputs(l1_lipschitz=l1_L, l1_sigma=l1_sigma, f0=f0,
                              f_star=problem.f_star, K=K, n=n)
            rhs_phi = theorem_rhs_phi(t)
            rhs_l1 = theorem_rhs_l1(t)
            ok = avg_phi <= rhs_phi and avg_l1 <= rhs_l1
            all_pass &= ok
            cells.append({"K": K, "n": n, "avg_phi": avg_phi,
                          "rhs_phi": rhs_phi, "avg_l1": avg_l1,
                          "rhs_l1": rhs_l1, "passed": ok})
    return {"cells": cells, "passed": all_pass, "f0": f0,
            "l1_lipschitz": l1_L, "l1_sigma": l1_sigma}


def run_switch_suite(cfg_base: ExperimentConfig, t_switch_grid, seeds) -> dict:
    """Hybrid runs across switch points against pure SignSGD-M and pure SGD
    baselines with matched step budgets."""
    from dataclasses import replace as _replace

    problem = build_problem(cfg_base)

    def median_final(cfg):
        recs = run_seeds(cfg, seeds, problem)
        return (statistics.median(r.final_f for r in recs), recs)

    entries = []
    for t in t_switch_grid:
        cfg = _replace(cfg_base,
                       optimizer=_replace(cfg_base.optimizer,
                                          algorithm="hybrid",
                                          t_switch=float(t)))
        med, recs = median_final(cfg)
        lam_switch = statistics.median(
            r.lambda_at_switch for r in recs
            if math.isfinite(r.lambda_at_switch)) if t < cfg.run.steps else math.nan
        entries.append({"t_switch": t, "median_final_f": med,
                        "median_lambda_at_switch": lam_switch})

    signm_cfg = _replace(cfg_base,
                         optimizer=_replace(cfg_base.optimizer,
                                            algorithm="signsgdm"))
    sgd_cfg = _replace(cfg_base,
                       optimizer=_replace(cfg_base.optimizer,
                                          algorithm="sgd"))
    med_sign, _ = median_final(signm_cfg)
    med_sgd, _ = median_final(sgd_cfg)
    best = min(entries, key=lambda e: e["median_final_f"])
    return {"entries": entries, "signsgdm_median_final_f": med_sign,
            "sgd_median_final_f": med_sgd, "best": best,
            "passed": best["median_final_f"] < med_sign}


# ---------------------------------------------------------------------------
# Serialization

def _fmt17(x: float) -> str:
    return f"{x:.17g}"


def emit_csv(record: RunRecord, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in record.rows:
            fh.write(",".join([
                str(r.k), _fmt17(r.f), _fmt17(r.l1_grad), _fmt17(r.phi),
                _fmt17(r.lam), _fmt17(r.lambda_ema),
                _fmt17(r.sigma_dither_sq), r.phase,
            ]) + "\n")


def load_csv(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header!r}")
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            rows.append(Row(k=int(parts[0]), f=float(parts[1]),
                            l1_grad=float(parts[2]), phi=float(parts[3]),
                            lam=float(parts[4]), lambda_ema=float(parts[5]),
                            sigma_dither_sq=float(parts[6]), phase=parts[7]))
    return rows


def emit_json(summary: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_summary(cfg: ExperimentConfig, record: RunRecord) -> dict:
    out = record.summary()
    out["config"] = serialize_config(cfg)
    return out
