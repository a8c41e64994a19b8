"""End-to-end acceptance runs.

Each test settles one headline claim at its stated tolerance and budget and
records a PASS/FAIL line for the terminal scorecard. Budgets are wall-clock
seconds on a desktop-class machine; every statistical verdict carries an
explicit 3-sigma allowance from the estimator's own standard error.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from gbpa import (
    AdaptiveExperts,
    AdaptiveL2,
    FixedEta,
    GreedyAdaptive,
    IidGaussianClipped,
    IidRademacher,
    L2Ball,
    PotentialSpec,
    Simplex,
    bound_for_trace,
    builtin_cdf,
    check_generic_smoothing,
    check_gradient_fd,
    check_hessian_experts_bound,
    check_hessian_experts_structure,
    check_hessian_l2_bound,
    check_hessian_l2_ordering,
    check_max_gaussian,
    check_overestimation_telescope,
    decompose_regret,
    ftpl_to_ftrl,
    gumbel_hedge_check,
    potential_match_error,
    roundtrip_error,
    run_game,
)
from gbpa.smoothing import EntropicPotential, GaussianSmoothingConfig, QuadraticPotential
from gbpa.smoothing import GaussianMCPotential


def binary_entropy(w):
    w = np.clip(w, 1e-300, 1.0)
    v = np.clip(1.0 - w, 1e-300, 1.0)
    return w * np.log(w) + v * np.log(v)


def test_01_regret_decomposition_identity(criterion):
    t0 = time.perf_counter()
    dims = (2, 5, 10)
    schedules = (lambda: AdaptiveExperts(), lambda: FixedEta(1.0))
    adversaries = (lambda: IidRademacher(), lambda: IidGaussianClipped())
    worst = 0.0
    for seed in range(50):
        trace = run_game(
            Simplex(dims[seed % 3]),
            PotentialSpec("ftrl-entropy"),
            schedules[seed % 2](),
            adversaries[seed % 2](),
            100,
            seed,
        )
        worst = max(worst, abs(decompose_regret(trace).residual))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5.0
    assert criterion(
        1, ok, f"regret identity over 50 games: worst residual {worst:.2e} <= 1e-9", elapsed
    )


def test_02_experts_adaptive_regret_bound(criterion):
    t0 = time.perf_counter()
    bound = 4.0 * math.sqrt(1001.0 * math.log(10.0))  # 192.0369830251263

    def one(seed):
        trace = run_game(
            Simplex(10), PotentialSpec("gaussian-mc", mc_samples=2000),
            AdaptiveExperts(), IidRademacher(), 1000, seed,
        )
        return trace.realized_regret(), trace.aggregate_reward_std_error()

    with ThreadPoolExecutor(max_workers=4) as pool:
        results = list(pool.map(one, range(20)))
    excesses = [regret - (bound + 3.0 * se) for regret, se in results]
    elapsed = time.perf_counter() - t0
    ok = max(excesses) <= 0.0 and elapsed < 120.0
    assert criterion(
        2, ok,
        f"experts adaptive: all 20 seeds under {bound:.2f} "
        f"(worst headroom {-max(excesses):.1f})",
        elapsed,
    )


def test_03_euclidean_adaptive_regret_bound(criterion):
    t0 = time.perf_counter()
    bound = 2.0 * math.sqrt(501.0)  # rewards are clipped into the unit ball

    def one(seed):
        trace = run_game(
            L2Ball(5), PotentialSpec("gaussian-mc", mc_samples=2000),
            AdaptiveL2(5), IidGaussianClipped(1.0), 500, seed,
        )
        realized = bound_for_trace(trace)  # bound at the realized norms
        return trace.realized_regret(), trace.aggregate_reward_std_error(), realized

    with ThreadPoolExecutor(max_workers=4) as pool:
        results = list(pool.map(one, range(20)))
    ok = all(
        regret <= min(bound, realized) + 3.0 * se for regret, se, realized in results
    )
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 120.0
    worst = max(regret - 3.0 * se for regret, se, _ in results)
    assert criterion(
        3, ok, f"ball adaptive: all 20 seeds under {bound:.2f} (worst {worst:.1f})", elapsed
    )


def test_04_experts_hessian_mass_bound(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    reports = []
    for N in (2, 5, 10, 50):
        for eta in (0.5, 1.0, 2.0):
            for theta in (None, rng.standard_normal(N)):
                reports.append(check_hessian_experts_bound(N, theta, eta, 100_000, 7))
                reports.append(check_hessian_experts_structure(N, theta, eta, 100_000, 7))
    failing = [r for r in reports if not r.passed]
    elapsed = time.perf_counter() - t0
    ok = not failing and elapsed < 60.0
    assert criterion(
        4, ok,
        f"experts Hessian: {len(reports) - len(failing)}/{len(reports)} "
        "mass and structure checks under 2*sqrt(2 ln N)/eta",
        elapsed,
    )


def test_05_ball_spectral_bound_and_origin_ordering(criterion):
    t0 = time.perf_counter()
    reports = []
    for N in (1, 2, 4, 16):
        for eta in (1.0, 2.0):
            reports.append(check_hessian_l2_bound(N, None, eta, 100_000, 7))
        reports.append(check_hessian_l2_ordering(N, 1.0, 100_000, 7))
    base = check_hessian_l2_bound(1, None, 1.0, 100_000, 7)
    anchored = abs(base.measured - math.sqrt(2.0 / math.pi)) <= 3.0 * base.std_error + 1e-3
    failing = [r for r in reports if not r.passed]
    elapsed = time.perf_counter() - t0
    ok = not failing and anchored and elapsed < 60.0
    assert criterion(
        5, ok,
        f"ball spectral: {len(reports) - len(failing)}/{len(reports)} checks under "
        f"1/(eta sqrt(N)); N=1 anchor {base.measured:.4f} ~ 0.7979",
        elapsed,
    )


def test_06_expected_maximum_of_gaussians(criterion):
    t0 = time.perf_counter()
    reports = {N: check_max_gaussian(N, 1_000_000, 11) for N in (1, 2, 32, 1024)}
    two = reports[2]
    anchored = abs(two.measured - 1.0 / math.sqrt(math.pi)) <= 3.0 * two.std_error
    failing = [N for N, r in reports.items() if not r.passed]
    elapsed = time.perf_counter() - t0
    ok = not failing and anchored and elapsed < 30.0
    assert criterion(
        6, ok,
        f"E[max of N gaussians] <= sqrt(2 ln N) at N=1,2,32,1024; "
        f"N=2 anchor {two.measured:.4f} ~ 0.5642",
        elapsed,
    )


def test_07_perturbation_regularizer_duality(criterion):
    t0 = time.perf_counter()
    problems = []

    for name in ("uniform", "logistic", "gaussian"):
        err = roundtrip_error(builtin_cdf(name), 1000)
        if err > 1e-3:
            problems.append(f"{name} roundtrip {err:.2e}")
        sup_gap, max_se, _ = potential_match_error(builtin_cdf(name), 1000, samples=20_000, seed=1)
        if sup_gap > max(3.0 * max_se, 1e-3):
            problems.append(f"{name} potential gap {sup_gap:.2e}")

    quad = ftpl_to_ftrl(builtin_cdf("uniform"), 1000)
    gap = float(np.max(np.abs(quad.values - (quad.grid**2 / 2.0 - quad.grid))))
    if gap > 1e-3:
        problems.append(f"uniform regularizer gap {gap:.2e}")
    ent = ftpl_to_ftrl(builtin_cdf("logistic"), 1000)
    gap = float(np.max(np.abs(ent.values - binary_entropy(ent.grid))))
    if gap > 1e-3:
        problems.append(f"logistic regularizer gap {gap:.2e}")

    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 30.0
    assert criterion(
        7, ok,
        "duality: roundtrips <= 1e-3, analytic regularizers matched, "
        "potentials equal up to offset" + ("; " + "; ".join(problems) if problems else ""),
        elapsed,
    )


def test_08_gumbel_perturbation_reproduces_hedge(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(31)
    dims = (2, 3, 10)
    worst = 0.0
    ok = True
    for trial in range(10):
        N = dims[trial % 3]
        theta = rng.standard_normal(N)
        eta = float(rng.uniform(0.3, 3.0))
        res = gumbel_hedge_check(theta, eta, samples=100_000, seed=trial)
        worst = max(worst, res.sup_deviation)
        ok = ok and res.passed
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 30.0
    assert criterion(
        8, ok,
        f"gumbel argmax frequencies match softmax at 10 random configs "
        f"(worst deviation {worst:.4f})",
        elapsed,
    )


def test_09_overestimation_telescopes(criterion):
    t0 = time.perf_counter()
    ok = True
    for seed in (0, 1):
        schedule = AdaptiveExperts()
        trace = run_game(
            Simplex(3), PotentialSpec("gaussian-mc", mc_samples=1000),
            schedule, IidRademacher(), 50, seed,
        )
        report = check_overestimation_telescope(Simplex(3), schedule, trace, samples=20_000, seed=0)
        ok = ok and report.passed
    constant = FixedEta(1.0)
    trace = run_game(
        Simplex(3), PotentialSpec("gaussian-mc", mc_samples=1000),
        constant, IidRademacher(), 20, 0,
    )
    equality = check_overestimation_telescope(Simplex(3), constant, trace, samples=20_000, seed=0)
    ok = ok and equality.passed and equality.margin == 0.0
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 30.0
    assert criterion(
        9, ok,
        f"telescoped swap cost under eta_T * E[Phi(u)]; constant schedule "
        f"margin {equality.margin:.1e} (exact)",
        elapsed,
    )


def test_10_generic_smoothing_certificates(criterion):
    t0 = time.perf_counter()
    ok = True
    summary = []
    for set_ in (Simplex(2), Simplex(5), L2Ball(2), L2Ball(5)):
        L = set_.norm_bound("l2")
        for eta in (0.5, 2.0):
            cert, report = check_generic_smoothing(set_, eta, samples=10_000, seed=3)
            a_ok = cert.alpha <= L * math.sqrt(set_.dimension) + 3.0 * report.config["alpha_std_error"]
            b_ok = cert.beta <= L + 3.0 * report.config["beta_std_error"]
            ok = ok and a_ok and b_ok and report.passed
        summary.append(f"{set_.kind}({set_.dimension}) a={cert.alpha:.2f} b={cert.beta:.2f}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 60.0
    assert criterion(
        10, ok, "certificates alpha <= L sqrt(N), beta <= L: " + ", ".join(summary), elapsed
    )


def test_11_greedy_adversary_separates_ftl_from_smoothing(criterion):
    t0 = time.perf_counter()
    T = 200
    ftl = run_game(Simplex(2), PotentialSpec("ftl"), FixedEta(1.0), GreedyAdaptive(), T, 0)
    ftl_regret = ftl.realized_regret()
    smoothed = run_game(
        Simplex(2), PotentialSpec("ftrl-entropy"), AdaptiveExperts(), GreedyAdaptive(), T, 0
    )
    cap = bound_for_trace(smoothed)
    elapsed = time.perf_counter() - t0
    ok = ftl_regret >= 0.4 * T and smoothed.realized_regret() <= cap and elapsed < 10.0
    assert criterion(
        11, ok,
        f"greedy adversary: baseline regret {ftl_regret:.0f} >= {0.4 * T:.0f}, "
        f"entropic regret {smoothed.realized_regret():.1f} <= {cap:.1f}",
        elapsed,
    )


def test_12_gradients_match_finite_differences(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(123)
    ok = True
    for _ in range(10):
        theta = rng.standard_normal(4)
        eta = float(rng.uniform(0.5, 2.0))
        for pot in (EntropicPotential(eta), QuadraticPotential(eta)):
            report = check_gradient_fd(pot, theta)
            ok = ok and report.passed and report.bound == 1e-6
    sets = (Simplex(3), L2Ball(3))
    for trial in range(20):
        set_ = sets[trial % 2]
        pot = GaussianMCPotential(set_, GaussianSmoothingConfig(1.0, 4000, trial))
        report = check_gradient_fd(pot, rng.standard_normal(3))
        ok = ok and report.passed
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 30.0
    assert criterion(
        12, ok,
        "closed-form gradients within 1e-6 of central differences; "
        "MC gradients consistent with their own draws at 20 probes",
        elapsed,
    )
