"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (shown in the terminal summary)
before asserting. Runs use the shipped presets and the public harness, so
solvers that share a seed see the same instance and the same 10^4 held-out
channel draws, which makes every comparison a paired one.
"""

from __future__ import annotations

import csv
import math
import time

import numpy as np
import pytest
from scipy import stats

from acceptance_log import record
from fsoalloc import neural, policy
from fsoalloc.harness.config import list_presets, load_config
from fsoalloc.harness.oracle import run_oracle
from fsoalloc.harness.runner import bench_execution, run
from fsoalloc.pddl import build_policy, policy_gradient_estimate
from structural import structurally_feasible
from toy import ToyPolicyProblem

SEED = 0


def paired(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Mean and standard error of a - b over shared samples."""
    d = a - b
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d)))


def lambdas_nonnegative(trace_path) -> bool:
    with open(trace_path) as fh:
        rows = list(csv.DictReader(fh))
    cols = [k for k in rows[0] if k.startswith("lambda_")]
    return all(float(r[c]) >= 0 for r in rows for c in cols)


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Lazily executed, cached full-budget runs keyed by (preset, solver)."""
    cache = {}
    root = tmp_path_factory.mktemp("acceptance")

    def get(preset: str, solver: str):
        if (preset, solver) not in cache:
            t0 = time.perf_counter()
            res = run(load_config(preset, {"seed": SEED, "solver": solver}), root / f"{preset}-{solver}")
            cache[preset, solver] = (res, time.perf_counter() - t0)
        return cache[preset, solver]

    return get


def test_criterion_1_oracle_optimality():
    t0 = time.perf_counter()
    report = run_oracle(load_config("oracle", {"seed": SEED}))
    seconds = time.perf_counter() - t0
    gap = abs(report["relative_gap"])
    ok = gap <= 0.02 and seconds < 120
    record(
        1,
        ok,
        f"SDG {report['sdg_objective']:.6g} vs brute force {report['oracle']['value']:.6g} "
        f"(relative gap {gap:.2e} <= 2e-2) in {seconds:.1f} s (< 120 s)",
    )
    assert ok


def test_criterion_2_rofso_feasibility(runs):
    sdg, _ = runs("rofso10", "sdg")
    pddl, _ = runs("rofso10", "pddl")
    p_t = load_config("rofso10").rofso.p_t
    c_sdg = abs(sdg.summary["final_constraints"][0])
    c_pddl = abs(pddl.summary["final_constraints"][0])
    lam_ok = lambdas_nonnegative(sdg.trace_path) and lambdas_nonnegative(pddl.trace_path)
    ok = c_sdg <= 0.02 * p_t and c_pddl <= 0.03 * p_t and lam_ok
    record(
        2,
        ok,
        f"trailing-500 |c| SDG {c_sdg:.2e} (<= {0.02 * p_t:.3g}), PDDL {c_pddl:.2e} (<= {0.03 * p_t:.3g}), "
        f"lambda >= 0 throughout: {lam_ok}",
    )
    assert ok


def test_criterion_3_rofso_policy_ordering(runs):
    sdg, _ = runs("rofso10", "sdg")
    pddl, pddl_s = runs("rofso10", "pddl")
    wf, _ = runs("rofso10", "waterfill")
    eq, _ = runs("rofso10", "equal_power")
    rnd, _ = runs("rofso10", "random_power")
    f = {k: r.eval_objective for k, r in {"sdg": sdg, "pddl": pddl, "wf": wf, "eq": eq, "rnd": rnd}.items()}
    means = {k: float(v.mean()) for k, v in f.items()}
    d_wf = paired(f["sdg"], f["wf"])
    margins = {
        f"{a}-{b}": paired(f[a], f[b]) for a in ("sdg", "pddl") for b in ("eq", "rnd")
    }
    ok = (
        d_wf[0] >= 0
        and means["pddl"] >= 0.9 * means["sdg"]
        and all(m > 0 for m, _ in margins.values())
        and pddl_s < 15 * 60
    )
    detail = ", ".join(f"{k} {v:.5f}" for k, v in means.items())
    gaps = ", ".join(f"{k} {m:+.4f} (se {s:.1e})" for k, (m, s) in margins.items())
    record(
        3,
        ok,
        f"held-out means {detail}; sdg-wf {d_wf[0]:+.5f} (se {d_wf[1]:.1e}); "
        f"pddl/sdg {means['pddl'] / means['sdg']:.4f}; {gaps}; PDDL run {pddl_s:.0f} s",
    )
    assert ok


def test_criterion_4_relay_ordering(runs):
    order = ["sdg", "pddl", "greedy", "random"]
    f = {s: runs("relay2x5", s)[0].eval_objective for s in order}
    assert all(len(v) == 10_000 for v in f.values())
    gaps = [paired(f[a], f[b]) for a, b in zip(order, order[1:])]
    ok = all(m >= 3 * s and m > 0 for m, s in gaps)
    text = ", ".join(
        f"{a}-{b} {m:+.4f} ({m / s:.1f} sigma)" for (a, b), (m, s) in zip(zip(order, order[1:]), gaps)
    )
    record(4, ok, f"means {', '.join(f'{s} {f[s].mean():.4f}' for s in order)}; {text}")
    assert ok


def test_criterion_5_fronthaul_congestion(runs):
    cfg = load_config("fronthaul5x2x5")
    c_t, m = cfg.link.c_t, cfg.scenario.m
    rnd, _ = runs("fronthaul5x2x5", "random")
    sdg, _ = runs("fronthaul5x2x5", "sdg")
    pddl, _ = runs("fronthaul5x2x5", "pddl")
    rnd_c = np.asarray(rnd.summary["eval"]["constraints_mean"][-m:])
    sdg_c = np.asarray(sdg.summary["final_constraints"][-m:])
    pddl_c = np.asarray(pddl.summary["final_constraints"][-m:])
    ok = np.all(rnd_c > 0) and np.all(sdg_c <= 0.02 * c_t) and np.all(pddl_c <= 0.02 * c_t)
    record(
        5,
        bool(ok),
        f"random congestion {np.round(rnd_c, 2).tolist()} (> 0); trailing-500 SDG {np.round(sdg_c, 3).tolist()}, "
        f"PDDL {np.round(pddl_c, 3).tolist()} (<= {0.02 * c_t:g})",
    )
    assert ok


def test_criterion_6_execution_latency():
    report = bench_execution(load_config("rofso10", {"seed": SEED}), n_calls=200, iterations=200)
    lat = {k: v["mean_us"] for k, v in report["latency"].items()}
    ok = lat["pddl"] < lat["sdg"] < lat["waterfill"] and 10 * lat["pddl"] <= lat["waterfill"]
    record(
        6,
        ok,
        f"mean latency PDDL {lat['pddl']:.0f} us < SDG {lat['sdg']:.0f} us < water-filling {lat['waterfill']:.0f} us "
        f"(speed-up {lat['waterfill'] / lat['pddl']:.0f}x >= 10x)",
    )
    assert ok


def _toy_gradient_check() -> tuple[bool, float]:
    toy = ToyPolicyProblem()
    net = neural.zeros_like_net(neural.MlpSpec((1, 2)))
    net.biases[0][0] = [0.3, -2.0]
    from fsoalloc.pddl import LearnedPolicy, Standardizer

    lp = LearnedPolicy(toy, net, toy.policy_layout(), Standardizer(np.zeros((1, 1)), np.ones((1, 1))))
    rng = np.random.default_rng(SEED)
    t = 10_000
    h = toy.sample_csi(rng, t)
    params, cache, cats, powers = lp.sample(h, rng)
    f = h[:, 0] * powers[:, 0]
    got = policy_gradient_estimate(lp, params, cache, cats, powers, f, np.zeros((t, 1)), [0.0], use_baseline=False)[1][0, 0]
    mu, sigma = params.mu[0, 0], params.sigma[0, 0]

    def mean(m):
        return stats.truncnorm((0 - m) / sigma, (0.6 - m) / sigma, loc=m, scale=sigma).mean()

    eps = 1e-6
    gate = 1 / (1 + math.exp(-0.3))
    exact = 1.25 * (mean(mu + eps) - mean(mu - eps)) / (2 * eps) * 0.6 * gate * (1 - gate)
    per = f * policy.score_outputs(params, lp.layout, cats, powers, np.ones((t, 1), bool))[:, 0]
    z = abs(got - exact) / (per.std(ddof=1) / math.sqrt(t))
    return z < 3, z


def _score_fd_error() -> float:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    eps = 1e-6
    for _ in range(200):
        mu, sigma, x = rng.uniform(-0.3, 0.6), rng.uniform(0.02, 0.5), rng.uniform(0, 0.3)

        def lp(m, s):
            return float(policy.truncnorm_logpdf(policy.TruncNormalParams(np.array(m), np.array(s), 0.0, 0.3), x))

        d_mu, d_sigma = policy.truncnorm_score(policy.TruncNormalParams(np.array(mu), np.array(sigma), 0.0, 0.3), x)
        fd = np.array([(lp(mu + eps, sigma) - lp(mu - eps, sigma)), (lp(mu, sigma + eps) - lp(mu, sigma - eps))]) / (2 * eps)
        worst = max(worst, float(np.max(np.abs(np.array([d_mu, d_sigma]) - fd) / np.maximum(1.0, np.abs(fd)))))
    logits = rng.normal(size=(8, 5))
    k = rng.integers(5, size=8)
    g = policy.categorical_score(policy.CategoricalParams(logits), k)
    for j in range(5):
        d = np.zeros(5)
        d[j] = eps
        fd = (
            policy.categorical_logpmf(policy.CategoricalParams(logits + d), k)
            - policy.categorical_logpmf(policy.CategoricalParams(logits - d), k)
        ) / (2 * eps)
        worst = max(worst, float(np.max(np.abs(g[:, j] - fd) / np.maximum(1.0, np.abs(fd)))))
    return worst


def _backprop_fd_error() -> float:
    rng = np.random.default_rng(SEED)
    net = neural.init_net(neural.MlpSpec((4, 8, 3)), rng)
    for b in net.biases:
        b += 0.1 * rng.normal(size=b.shape)
    x = rng.normal(size=(6, 1, 4))
    w = rng.normal(size=(6, 1, 3))
    _, cache = neural.mlp_forward(net, x)
    grads = neural.mlp_backward(net, cache, w)
    eps = 1e-6
    worst = 0.0
    for p, g in zip(net.params(), grads):
        for idx in np.ndindex(p.shape):
            keep = p[idx]
            p[idx] = keep + eps
            up = float(np.sum(w * neural.mlp_forward(net, x)[0]))
            p[idx] = keep - eps
            down = float(np.sum(w * neural.mlp_forward(net, x)[0]))
            p[idx] = keep
            fd = (up - down) / (2 * eps)
            worst = max(worst, abs(fd - g[idx]) / max(1.0, abs(fd)))
    return worst


def test_criterion_7_estimator_correctness():
    toy_ok, z = _toy_gradient_check()
    score_err = _score_fd_error()
    bp_err = _backprop_fd_error()
    ok = toy_ok and score_err < 1e-5 and bp_err < 1e-5
    record(
        7,
        ok,
        f"toy policy gradient off by {z:.2f} sigma (< 3); score finite-difference error {score_err:.1e}; "
        f"backprop finite-difference error {bp_err:.1e} (< 1e-5)",
    )
    assert ok


def test_criterion_8_structural_feasibility(rofso10, relay2x5, joint, fronthaul):
    rng = np.random.default_rng(SEED)
    total, bad = 0, 0
    for sc in (rofso10, relay2x5, joint, fronthaul):
        for _ in range(25):
            init, calib = rng.spawn(2)
            lp = build_policy(sc, init, calib, 64)
            # random (theta, h): rescale weights over three decades and randomize biases
            for w in lp.net.weights:
                w *= 10 ** rng.uniform(-1, 2)
            for b in lp.net.biases:
                b += rng.normal(scale=10 ** rng.uniform(-1, 1.5), size=b.shape)
            h = sc.sample_csi(rng, 1000)
            mode = "stochastic" if rng.random() < 0.8 else "deterministic"
            ok = structurally_feasible(sc, lp.act(h, rng, mode))
            total += len(ok)
            bad += int(np.sum(~ok))
    ok = total >= 100_000 and bad == 0
    record(8, ok, f"{total} random (theta, h) draws over 4 scenarios, {bad} structurally infeasible actions")
    assert ok


def test_criterion_9_determinism(tmp_path):
    presets, _ = list_presets()
    short = {
        "sdg": {"iterations": 25, "window": 10},
        "pddl": {"iterations": 25, "window": 10, "eval_every": 10, "eval_batch": 64, "calibration_batch": 256},
        "baseline": {"iterations": 25},
        "eval": {"samples": 64, "latency_calls": 2},
    }
    checked, mismatched = [], []
    for preset in presets:
        base = load_config(preset)
        for solver in sorted({base.solver, "pddl"}):
            cfg = load_config(preset, {"solver": solver, **short})
            a = run(cfg, tmp_path / f"{preset}-{solver}-a").trace_path.read_bytes()
            b = run(cfg, tmp_path / f"{preset}-{solver}-b").trace_path.read_bytes()
            checked.append(f"{preset}/{solver}")
            if a != b:
                mismatched.append(f"{preset}/{solver}")
    ok = not mismatched
    record(9, ok, f"{len(checked)} preset/solver re-runs byte-identical; mismatches: {mismatched or 'none'}")
    assert ok
