"""Verification suites: every closed-form claim gets an empirical check
with pinned tolerances.

Each check function returns a CheckResult; `run_all` executes the full
battery (this is what the `selftest` CLI command runs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import (ExperimentConfig, OptimizerSpec, ProblemSpec, RunSpec,
                     parse_config, serialize_config)
from .core import RngStream, STREAM_MC, sign_vec
from .dither import expected_dithered_sign, mc_dithered_sign
from .harness import (Row, RunRecord, emit_csv, load_csv, run_single,
                      run_switch_suite, run_theorem_suite)
from .optimizers import lambda_project
from .theory import (GAUSS_SPLIT, gauss_bound, mc_sign_failure,
                     sign_agreement_lower_bound)

MC_SEED = 20240817

SYMMETRIC_FAMILIES = ("gaussian", "uniform", "laplace")
SNR_GRID = (0.1, 0.25, 0.5, GAUSS_SPLIT, 1.0, 2.0, 5.0)

DITHER_RATIO_GRID = (0.0, 0.1, -0.1, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0)

THEOREM_K_GRID = (100, 1000, 10000)
THEOREM_N_GRID = (1, 4, 16)
THEOREM_SEEDS = tuple(range(20))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}" + (f": {self.detail}" if self.detail else "")


def _theorem_base_config(sigma: float = 1.0) -> ExperimentConfig:
    return ExperimentConfig(
        problem=ProblemSpec(kind="quadratic", dim=10,
                            lipschitz=tuple(np.linspace(0.5, 4.0, 10)),
                            x_opt=(0.0,), x0=(1.0,),
                            noise_family="gaussian", sigma=(sigma,)),
        optimizer=OptimizerSpec(algorithm="signsgd"),
        run=RunSpec(steps=1000, batch_size=1, seeds=THEOREM_SEEDS,
                    theorem_mode=True),
    )


# -- 1 ----------------------------------------------------------------------

def check_gauss_bound_validity(trials: int = 10**6) -> CheckResult:
    """Sign-failure rate never exceeds the unimodal-symmetric bound."""
    rng = RngStream(MC_SEED, STREAM_MC)
    worst = None
    ok = True
    cell = 0
    for family in SYMMETRIC_FAMILIES:
        for S in SNR_GRID:
            p_hat, se = mc_sign_failure(family, S, trials, rng.derive(cell))
            cell += 1
            margin = gauss_bound(S) + 3.0 * se - p_hat
            if worst is None or margin < worst[0]:
                worst = (margin, family, S)
            if margin < 0:
                ok = False
    return CheckResult(
        "gauss-bound-validity", ok,
        f"min margin {worst[0]:.2e} at ({worst[1]}, S={worst[2]:.4g})")


# -- 2 ----------------------------------------------------------------------

def check_relaxation_inequality() -> CheckResult:
    """1 - 2*bound(S) >= min(1,S)/3 with zero tolerance on a dense grid."""
    grid = [0.001 * j for j in range(1, 10001)]
    grid += [GAUSS_SPLIT - 1e-9, GAUSS_SPLIT, GAUSS_SPLIT + 1e-9]
    bad = [S for S in grid
           if 1.0 - 2.0 * gauss_bound(S) < sign_agreement_lower_bound(S)]
    return CheckResult("sign-agreement-relaxation", not bad,
                       f"{len(grid)} grid points, {len(bad)} violations")


# -- 3 & 4 ------------------------------------------------------------------

def check_theorem_rate(seeds=THEOREM_SEEDS, k_grid=THEOREM_K_GRID,
                       n_grid=THEOREM_N_GRID):
    """Both rate bounds hold in every (K, n) cell; returns the phi-bound
    and l1-bound results separately."""
    report = run_theorem_suite(_theorem_base_config(1.0), seeds, k_grid, n_grid)
    phi_ok = all(c["avg_phi"] <= c["rhs_phi"] for c in report["cells"])
    l1_ok = all(c["avg_l1"] <= c["rhs_l1"] for c in report["cells"])
    phi_margin = min(c["rhs_phi"] / c["avg_phi"] for c in report["cells"])
    l1_margin = min(c["rhs_l1"] / c["avg_l1"] for c in report["cells"])
    res_phi = CheckResult("theorem-rate-phi", phi_ok,
                          f"min rhs/lhs ratio {phi_margin:.3f}")
    res_l1 = CheckResult("theorem-rate-l1", l1_ok,
                         f"min rhs/lhs ratio {l1_margin:.3f}")
    return res_phi, res_l1, report


def check_decay_exponent(k_grid=THEOREM_K_GRID) -> CheckResult:
    """Noiseless rate: the K-averaged measure decays like K^-p, p in
    [0.4, 0.6]."""
    cfg = _theorem_base_config(sigma=0.0)
    avgs = []
    for K in k_grid:
        c = replace(cfg, run=replace(cfg.run, steps=K, seeds=(0,),
                                     record_stride=max(1, K // 10)))
        rec = run_single(c, 0)
        avgs.append(rec.avg_phi)
    slope = np.polyfit(np.log(k_grid), np.log(avgs), 1)[0]
    p = -slope
    return CheckResult("noiseless-decay-exponent", 0.4 <= p <= 0.6,
                       f"fitted exponent {p:.3f}")


# -- 5 ----------------------------------------------------------------------

def check_dither_statistics(trials: int = 10**6) -> CheckResult:
    """MC dithered-sign mean matches 2*Phi(m/sigma)-1 on the ratio grid,
    and the small-ratio linearization is accurate to 0.1%."""
    rng = RngStream(MC_SEED + 1, STREAM_MC)
    ok = True
    worst = math.inf
    for i, r in enumerate(DITHER_RATIO_GRID):
        mean, se = mc_dithered_sign(r, 1.0, trials, rng.derive(i))
        analytic = expected_dithered_sign(r, 1.0)
        slack = 4.0 * se - abs(mean - analytic)
        worst = min(worst, slack)
        if slack < 0:
            ok = False
    analytic = expected_dithered_sign(0.01, 1.0)
    linear = 0.01 * math.sqrt(2.0 / math.pi)
    rel = abs(analytic - linear) / abs(analytic)
    ok = ok and rel <= 1e-3
    return CheckResult("dithered-sign-statistics", ok,
                       f"min MC slack {worst:.2e}, linearization rel err {rel:.2e}")


# -- 6 ----------------------------------------------------------------------

def check_projection_calibration(n_triples: int = 10**4) -> CheckResult:
    """Nonnegativity, the defining identity to 2 ulps, exact zero on
    orthogonal input, and the worked value delta/c."""
    rng = RngStream(MC_SEED + 2, STREAM_MC).generator
    eps = 1e-12
    ok = True
    for _ in range(n_triples):
        d = int(rng.integers(1, 9))
        m = rng.standard_normal(d)
        g = rng.standard_normal(d) * 10.0 ** rng.integers(-3, 4)
        delta = 10.0 ** rng.uniform(-4, 0)
        lam = lambda_project(m, g, delta, eps)
        if lam < 0:
            ok = False
            break
        lhs = lam * (float(g @ g) + eps)
        rhs = delta * abs(float(sign_vec(m) @ g))
        if abs(lhs - rhs) > 2.0 * np.spacing(max(abs(lhs), abs(rhs))):
            ok = False
            break
    # exactly orthogonal input -> exactly zero
    m = np.ones(4)
    g = np.array([1.0, -1.0, 2.0, -2.0])
    ok = ok and lambda_project(m, g, 0.1, eps) == 0.0
    # zero gradient -> zero (epsilon guards the division)
    ok = ok and lambda_project(m, np.zeros(4), 0.1, eps) == 0.0
    # worked value: g = c*sign(m), d=4, c=2, delta=0.1 -> delta/c = 0.05.
    # Exact only when epsilon is negligible against ||g||^2 = 16.
    g = 2.0 * sign_vec(m)
    exact = lambda_project(m, g, 0.1, 1e-300)
    ok = ok and exact == 0.05
    near = lambda_project(m, g, 0.1, eps)
    ok = ok and abs(near - 0.05) <= 1e-13 * 0.05
    return CheckResult("projection-calibration", ok,
                       f"{n_triples} random triples, worked value {exact!r}")


# -- 7 ----------------------------------------------------------------------

def _reduction_config(**opt_kwargs) -> ExperimentConfig:
    return ExperimentConfig(
        problem=ProblemSpec(kind="quadratic", dim=5,
                            lipschitz=(0.5, 1.0, 2.0, 3.0, 4.0),
                            x_opt=(0.0,), x0=(1.0,),
                            noise_family="gaussian", sigma=(0.5,)),
        optimizer=OptimizerSpec(**{"delta": 0.05, "beta": 0.9, **opt_kwargs}),
        run=RunSpec(steps=300, batch_size=1, seeds=(7,)),
    )


def _iterates(cfg: ExperimentConfig, seed: int = 7):
    return run_single(cfg, seed, collect_iterates=True).iterates


def _same_trajectory(a, b) -> bool:
    return len(a) == len(b) and all(
        np.array_equal(x, y) for x, y in zip(a, b))


def check_reduction_identities() -> CheckResult:
    """alpha=0 dithering, never-switching and immediately-switching hybrids
    collapse bitwise onto their base methods."""
    base = _iterates(_reduction_config(algorithm="signsgdm"))
    dith_pre = _iterates(_reduction_config(algorithm="dithered", alpha=0.0,
                                           dither_mode="pre"))
    dith_post = _iterates(_reduction_config(algorithm="dithered", alpha=0.0,
                                            dither_mode="post"))
    never = _iterates(_reduction_config(algorithm="hybrid",
                                        t_switch=math.inf))
    also_never = _iterates(_reduction_config(algorithm="hybrid",
                                             t_switch=10**9))
    lr = 0.02
    immediate = _iterates(_reduction_config(algorithm="hybrid", t_switch=0.0,
                                            lambda_init=lr))
    pure_sgd = _iterates(_reduction_config(algorithm="sgd", lr=lr))
    ok = (_same_trajectory(dith_pre, base)
          and _same_trajectory(dith_post, base)
          and _same_trajectory(dith_pre, dith_post)
          and _same_trajectory(never, base)
          and _same_trajectory(also_never, base)
          and _same_trajectory(immediate, pure_sgd))
    return CheckResult("reduction-identities", ok,
                       f"{len(base) - 1} steps compared bitwise")


# -- 8 ----------------------------------------------------------------------

def check_sign_phase_geometry() -> CheckResult:
    """Every sign-phase coordinate step is exactly -delta, 0 or +delta
    (dyadic delta so set membership is exact in floating point)."""
    delta = 1.0 / 32.0
    ok = True
    for algo, kwargs in (("signsgdm", {}),
                         ("signsgd", {}),
                         ("dithered", {"alpha": 0.1, "dither_mode": "pre"}),
                         ("hybrid", {"t_switch": math.inf})):
        cfg = _reduction_config(algorithm=algo, delta=delta, **kwargs)
        cfg = replace(cfg, problem=replace(cfg.problem, x0=(0.5,)))
        its = _iterates(cfg)
        for prev, nxt in zip(its[:-1], its[1:]):
            if not np.all(np.isin(nxt - prev, (-delta, 0.0, delta))):
                ok = False
    return CheckResult("sign-phase-geometry", ok,
                       "coordinate steps confined to {-d, 0, +d}")


def check_scale_invariance() -> CheckResult:
    """Scaling all gradients by c leaves the clean momentum-sign trajectory
    bitwise unchanged and scales the calibration scalar by 1/c."""
    c = 10.0
    base = ExperimentConfig(
        problem=ProblemSpec(kind="quadratic", dim=10, lipschitz=(2.0,),
                            x_opt=(0.0,), x0=(50.0,),
                            noise_family="gaussian", sigma=(0.0,)),
        optimizer=OptimizerSpec(algorithm="signsgdm", delta=1.0 / 32.0,
                                beta=0.9),
        run=RunSpec(steps=200, batch_size=1, seeds=(3,), record_stride=1),
    )
    scaled = replace(base, problem=replace(base.problem,
                                           lipschitz=(2.0 * c,)))
    rec_a = run_single(base, 3, collect_iterates=True)
    rec_b = run_single(scaled, 3, collect_iterates=True)
    ok = _same_trajectory(rec_a.iterates, rec_b.iterates)
    worst = 0.0
    for ra, rb in zip(rec_a.rows, rec_b.rows):
        err = abs(c * rb.lam - ra.lam)
        tol = 4.0 * np.spacing(ra.lam)
        worst = max(worst, err / np.spacing(ra.lam) if ra.lam else 0.0)
        if err > tol:
            ok = False
    return CheckResult("scale-invariance", ok,
                       f"lambda worst error {worst:.2f} ulps (limit 4)")


# -- 9 ----------------------------------------------------------------------

def check_switching_benefit(seeds=tuple(range(20))) -> CheckResult:
    """Some switch point beats pure momentum-sign descent on the noisy
    quadratic (median final loss over seeds)."""
    cfg = ExperimentConfig(
        problem=ProblemSpec(kind="quadratic", dim=10,
                            lipschitz=tuple(np.linspace(0.5, 4.0, 10)),
                            x_opt=(0.0,), x0=(1.0,),
                            noise_family="gaussian", sigma=(1.0,)),
        optimizer=OptimizerSpec(algorithm="hybrid", delta=0.05, beta=0.9,
                                eta=0.99, lr=0.01),
        run=RunSpec(steps=4000, batch_size=1, seeds=seeds,
                    record_stride=400),
    )
    report = run_switch_suite(cfg, (500, 1000, 2000), seeds)
    best = report["best"]
    ok = best["median_final_f"] < report["signsgdm_median_final_f"]
    return CheckResult(
        "switching-benefit", ok,
        f"best T={best['t_switch']} median f {best['median_final_f']:.4g} "
        f"vs signsgdm {report['signsgdm_median_final_f']:.4g}")


def check_sign_limit_cycle() -> CheckResult:
    """Noiseless fixed-step sign descent stalls in a delta-wide band: the
    loss cycle peak stays above max(L) * delta^2 / 8 and below the full
    band value."""
    delta = 0.05
    L = tuple(np.linspace(0.5, 4.0, 10))
    cfg = ExperimentConfig(
        problem=ProblemSpec(kind="quadratic", dim=10, lipschitz=L,
                            x_opt=(0.0,), x0=(1.0137,),
                            noise_family="gaussian", sigma=(0.0,)),
        optimizer=OptimizerSpec(algorithm="signsgd", delta=delta),
        run=RunSpec(steps=2000, batch_size=1, seeds=(0,), record_stride=1),
    )
    rec = run_single(cfg, 0, collect_iterates=True)
    tail_f = [r.f for r in rec.rows[-2:]]
    lower = max(L) * delta * delta / 8.0
    upper = 0.5 * sum(L) * delta * delta
    in_band = np.all(np.abs(rec.iterates[-1]) <= delta)
    ok = bool(max(tail_f) >= lower and max(tail_f) <= upper and in_band)
    return CheckResult(
        "sign-limit-cycle", ok,
        f"cycle peak {max(tail_f):.4g} in [{lower:.4g}, {upper:.4g}], "
        f"band confinement {bool(in_band)}")


# -- 10 ---------------------------------------------------------------------

def check_asymmetric_failure(trials: int = 10**6) -> CheckResult:
    """The symmetric-noise bound breaks under asymmetric-bimodal noise, and
    sign descent stalls where SGD converges on the matching 1-D quadratic."""
    rng = RngStream(MC_SEED + 3, STREAM_MC)
    violated = False
    for i, S in enumerate(SNR_GRID):
        p_hat, se = mc_sign_failure("asymmetric-bimodal", S, trials,
                                    rng.derive(i))
        if p_hat > gauss_bound(S) + 3.0 * se:
            violated = True
            break

    prob = ProblemSpec(kind="quadratic", dim=1, lipschitz=(1.0,),
                       x_opt=(0.0,), x0=(1.0,),
                       noise_family="asymmetric-bimodal", sigma=(3.0,))
    sign_cfg = ExperimentConfig(
        problem=prob,
        optimizer=OptimizerSpec(algorithm="signsgd", delta=0.01),
        run=RunSpec(steps=10000, batch_size=1, seeds=(1,), record_stride=1))
    sgd_cfg = replace(sign_cfg,
                      optimizer=OptimizerSpec(algorithm="sgd", lr=3e-4))
    f0 = 0.5  # f(x0) for L=1, x0 - x* = 1
    sign_min = min(r.f for r in run_single(sign_cfg, 1).rows)
    sgd_min = min(r.f for r in run_single(sgd_cfg, 1).rows)
    sign_stalls = sign_min >= 0.5 * f0
    sgd_converges = sgd_min < 0.01 * f0
    ok = violated and sign_stalls and sgd_converges
    return CheckResult(
        "asymmetric-noise-failure", ok,
        f"bound violated {violated}, sign min f {sign_min:.4g} "
        f"(>= {0.5 * f0}), sgd min f {sgd_min:.2e} (< {0.01 * f0})")


# -- 11 ---------------------------------------------------------------------

def _fd_gradient(f, x: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        g[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return g


def check_gradient_correctness(n_points: int = 100) -> CheckResult:
    """Analytic gradients of the logistic and MLP problems agree with
    central finite differences."""
    from .problems import NoiseSpec, make_logistic, make_mlp

    noise0 = NoiseSpec("gaussian", (0.0,) * 5)
    logi = make_logistic(11, 5, 60, noise0)
    rng = RngStream(MC_SEED + 4, STREAM_MC).generator
    worst_logi = 0.0
    for _ in range(n_points):
        x = rng.standard_normal(logi.dim)
        g = logi.eval_grad(x)
        g_fd = _fd_gradient(logi.eval_f, x, 1e-6)
        worst_logi = max(worst_logi,
                         float(np.linalg.norm(g - g_fd) / np.linalg.norm(g)))

    widths = (3, 6, 1)
    mlp = make_mlp(13, widths, NoiseSpec("gaussian", (0.0,)))
    worst_mlp = 0.0
    for _ in range(n_points):
        x = 0.5 * rng.standard_normal(mlp.dim)
        g = mlp.eval_grad(x)
        g_fd = _fd_gradient(mlp.eval_f, x, 1e-5)
        worst_mlp = max(worst_mlp,
                        float(np.linalg.norm(g - g_fd) / np.linalg.norm(g)))

    ok = worst_logi < 1e-6 and worst_mlp < 1e-4
    return CheckResult("gradient-correctness", ok,
                       f"logistic rel err {worst_logi:.2e} (< 1e-6), "
                       f"mlp rel err {worst_mlp:.2e} (< 1e-4)")


# -- 12 ---------------------------------------------------------------------

def check_serialization_roundtrip(tmp_dir=None) -> CheckResult:
    """Config text and trajectory CSV survive a round trip bit-exactly."""
    import tempfile
    from pathlib import Path

    cfg = ExperimentConfig(
        problem=ProblemSpec(kind="quadratic", dim=3,
                            lipschitz=(0.5, math.pi, 4.0),
                            x_opt=(0.1, -0.2, 0.3), x0=(1.0,),
                            noise_family="laplace", sigma=(1e-3, 0.1, 7.0)),
        optimizer=OptimizerSpec(algorithm="hybrid", delta=0.1, beta=0.9,
                                alpha=0.1, t_switch=50.0,
                                dither_mode="pre", epsilon=1e-12),
        run=RunSpec(steps=100, batch_size=2, seeds=(0, 1, 42),
                    record_stride=1),
    )
    cfg_ok = parse_config(serialize_config(cfg)) == cfg

    rec = run_single(cfg, 42)
    with tempfile.TemporaryDirectory(dir=tmp_dir) as td:
        path = Path(td) / "run.csv"
        emit_csv(rec, path)
        rows = load_csv(path)
    csv_ok = rows == rec.rows
    phases_ok = all(r.phase in ("sign", "sgd") for r in rows)
    ok = cfg_ok and csv_ok and phases_ok
    return CheckResult("serialization-roundtrip", ok,
                       f"config {cfg_ok}, csv {csv_ok}, phases {phases_ok}")


# ---------------------------------------------------------------------------

def run_all(fast: bool = False) -> list:
    """The complete verification battery. `fast` shrinks Monte Carlo sizes
    for smoke testing only; acceptance uses the defaults."""
    trials = 10**5 if fast else 10**6
    seeds = tuple(range(5)) if fast else THEOREM_SEEDS
    results = [
        check_gauss_bound_validity(trials),
        check_relaxation_inequality(),
    ]
    res_phi, res_l1, _ = check_theorem_rate(seeds=seeds)
    results += [res_phi, res_l1,
                check_decay_exponent(),
                check_dither_statistics(trials),
                check_projection_calibration(10**3 if fast else 10**4),
                check_reduction_identities(),
                check_sign_phase_geometry(),
                check_scale_invariance(),
                check_switching_benefit(seeds=seeds),
                check_sign_limit_cycle(),
                check_asymmetric_failure(trials),
                check_gradient_correctness(20 if fast else 100),
                check_serialization_roundtrip()]
    return results
