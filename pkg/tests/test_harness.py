import math
import statistics
from dataclasses import replace

import numpy as np
import pytest

from signopt.config import (ConfigError, ExperimentConfig, OptimizerSpec,
                            ProblemSpec, RunSpec, build_problem,
                            initial_point, parse_config, serialize_config)
from signopt.harness import (CSV_HEADER, emit_csv, emit_json, load_csv,
                             run_single, run_seeds, run_summary,
                             theorem_delta)
from signopt.theory import SnrProfile, phi_measure


def quad_cfg(**kw):
    problem = ProblemSpec(kind="quadratic", dim=4,
                          lipschitz=(0.5, 1.0, 2.0, 4.0),
                          x_opt=(0.0,), x0=(1.0,),
                          noise_family="gaussian",
                          sigma=kw.pop("sigma", (1.0,)))
    optimizer = OptimizerSpec(**kw.pop("optimizer", {}))
    run = RunSpec(**{"steps": 200, "batch_size": 1, "seeds": (0,),
                     "record_stride": 1, **kw.pop("run", {})})
    return ExperimentConfig(problem=problem, optimizer=optimizer, run=run)


class TestRunSingle:
    def test_noiseless_sgd_converges_like_linear_recurrence(self):
        cfg = quad_cfg(sigma=(0.0,),
                       optimizer={"algorithm": "sgd", "lr": 0.4},
                       run={"steps": 10000, "record_stride": 1000})
        rec = run_single(cfg, 0, collect_iterates=True)
        problem = build_problem(cfg)
        f0 = problem.eval_f(initial_point(cfg, problem))
        assert rec.final_f <= 1e-8 * f0
        # exact per-coordinate recurrence x_{k+1} = (1 - lr L) x_k
        factors = 1.0 - 0.4 * np.array([0.5, 1.0, 2.0, 4.0])
        expected = factors ** 50 * 1.0
        assert np.allclose(rec.iterates[50], expected, rtol=1e-10)

    def test_deterministic_given_seed(self):
        cfg = quad_cfg(optimizer={"algorithm": "signsgdm"})
        a = run_single(cfg, 3, collect_iterates=True)
        b = run_single(cfg, 3, collect_iterates=True)
        assert a.rows == b.rows
        assert all(np.array_equal(x, y)
                   for x, y in zip(a.iterates, b.iterates))

    def test_signsgd_limit_cycle_does_not_converge(self):
        cfg = quad_cfg(sigma=(0.0,),
                       optimizer={"algorithm": "signsgd", "delta": 0.05},
                       run={"steps": 2000})
        rec = run_single(cfg, 0)
        # stuck in the delta band: the loss cycle peak stays positive
        assert max(r.f for r in rec.rows[-2:]) >= 4.0 * 0.05**2 / 8.0

    def test_metric_integrity(self):
        cfg = quad_cfg(optimizer={"algorithm": "hybrid", "t_switch": 100.0},
                       run={"batch_size": 4})
        rec = run_single(cfg, 5, collect_iterates=True)
        problem = build_problem(cfg)
        s = problem.noise.sigma / math.sqrt(4)
        for row in rec.rows:
            g = problem.eval_grad(rec.iterates[row.k])
            assert row.phi == phi_measure(SnrProfile(g, s))
            assert row.l1_grad == float(np.sum(np.abs(g)))

    def test_budget_one_oracle_call_per_step(self):
        for algo in ("sgd", "signsgd", "signsgdm", "hybrid"):
            cfg = quad_cfg(optimizer={"algorithm": algo, "t_switch": 50.0},
                           run={"steps": 120})
            assert run_single(cfg, 0).oracle_calls == 120

    def test_theorem_mode_overrides_delta(self):
        cfg = quad_cfg(optimizer={"algorithm": "signsgd", "delta": 99.0},
                       run={"steps": 400, "theorem_mode": True})
        rec = run_single(cfg, 0)
        problem = build_problem(cfg)
        assert rec.delta_used == theorem_delta(problem, 400)
        assert rec.delta_used == pytest.approx(1.0 / math.sqrt(7.5 * 400))

    def test_divergence_reported_not_raised(self):
        cfg = quad_cfg(sigma=(0.0,),
                       optimizer={"algorithm": "sgd", "lr": 1e6},
                       run={"steps": 2000})
        rec = run_single(cfg, 0)
        assert rec.diverged
        assert rec.oracle_calls < 2000

    def test_hybrid_post_switch_contraction(self):
        cfg = quad_cfg(sigma=(0.0,),
                       optimizer={"algorithm": "hybrid", "t_switch": 50.0,
                                  "delta": 0.02},
                       run={"steps": 300})
        rec = run_single(cfg, 0, collect_iterates=True)
        lam = rec.lambda_at_switch
        assert lam > 0.0
        assert np.all(lam * np.array([0.5, 1.0, 2.0, 4.0]) < 2.0)
        # exact post-switch recurrence on the noiseless quadratic
        L = np.array([0.5, 1.0, 2.0, 4.0])
        for k in range(60, 70):
            predicted = rec.iterates[k] - lam * (L * rec.iterates[k])
            assert np.array_equal(rec.iterates[k + 1], predicted)
        dist = [np.linalg.norm(x) for x in rec.iterates[51:]]
        assert all(b <= a for a, b in zip(dist, dist[1:]))


class TestAggregation:
    def test_seed_order_invariance(self):
        cfg = quad_cfg(optimizer={"algorithm": "signsgdm"},
                       run={"steps": 100})
        fwd = run_seeds(cfg, seeds=(0, 1, 2, 3))
        rev = run_seeds(cfg, seeds=(3, 2, 1, 0))
        assert statistics.fmean(r.avg_phi for r in fwd) == \
            statistics.fmean(r.avg_phi for r in rev)


class TestSerialization:
    def test_csv_header_is_exact(self):
        assert CSV_HEADER == "k,f,l1_grad,phi,lambda,lambda_ema,sigma_dither_sq,phase"

    def test_csv_roundtrip(self, tmp_path):
        cfg = quad_cfg(optimizer={"algorithm": "hybrid", "t_switch": 60.0,
                                  "alpha": 0.1, "dither_mode": "pre"})
        rec = run_single(cfg, 9)
        path = tmp_path / "run.csv"
        emit_csv(rec, path)
        header = path.read_text().splitlines()[0]
        assert header == CSV_HEADER
        rows = load_csv(path)
        assert rows == rec.rows
        assert {r.phase for r in rows} == {"sign", "sgd"}

    def test_config_roundtrip(self):
        cfg = quad_cfg(optimizer={"algorithm": "dithered", "alpha": 0.3,
                                  "dither_mode": "post", "epsilon": 1e-12})
        assert parse_config(serialize_config(cfg)) == cfg

    def test_json_summary(self, tmp_path):
        cfg = quad_cfg(optimizer={"algorithm": "sgd", "lr": 0.1})
        rec = run_single(cfg, 1)
        out = tmp_path / "summary.json"
        emit_json(run_summary(cfg, rec), out)
        import json
        loaded = json.loads(out.read_text())
        assert loaded["seed"] == 1
        assert loaded["final_f"] == rec.final_f
        assert parse_config(loaded["config"]) == cfg


class TestConfigParsing:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("problem.unknown = 1\n")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("mystery.dim = 1\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("run.steps = soon\n")

    def test_bad_algorithm_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("optimizer.algorithm = adam\n")

    def test_comments_and_blank_lines_ok(self):
        cfg = parse_config("# a comment\n\nproblem.dim = 3\n"
                           "problem.lipschitz = 1.0\nrun.steps = 10\n")
        assert cfg.problem.dim == 3
        assert cfg.run.steps == 10

    def test_infinity_roundtrip(self):
        cfg = ExperimentConfig()
        text = serialize_config(cfg)
        assert "optimizer.t_switch = inf" in text
        assert parse_config(text).optimizer.t_switch == math.inf
