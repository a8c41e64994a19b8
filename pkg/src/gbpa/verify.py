"""Numerical certification of the curvature and smoothing claims.

Each check measures one quantity, states the bound it must respect, and
reports both together with the Monte Carlo standard error. The verdict is
always the same rule: measured <= bound + 3*std_error. Deterministic
computations carry std_error 0 and, where exact cancellation is involved,
an explicit float-rounding allowance in the bound (echoed in the config so
nothing is loosened silently).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import subseed, substream
from .sets import DecisionSet, L2Ball, Simplex, lipschitz_constant
from .smoothing import (
    GaussianMCPotential,
    GaussianSmoothingConfig,
    next_eta,
)

__all__ = [
    "CheckReport",
    "SmoothingCertificate",
    "check_bregman_sandwich",
    "check_hessian_experts_bound",
    "check_hessian_experts_structure",
    "check_hessian_l2_bound",
    "check_hessian_l2_ordering",
    "check_max_gaussian",
    "check_overestimation_telescope",
    "check_generic_smoothing",
    "entropic_reference_certificate",
    "check_gradient_fd",
]

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class CheckReport:
    """One measured quantity against one bound, with its sampling error."""

    name: str
    measured: float
    bound: float
    std_error: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.measured - self.bound

    @property
    def passed(self) -> bool:
        # recomputed, never stored; the one tolerance rule for every check
        return self.measured <= self.bound + 3.0 * self.std_error

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "std_error": self.std_error,
            "margin": self.margin,
            "passed": self.passed,
            "config": self.config,
        }


@dataclass(frozen=True)
class SmoothingCertificate:
    """Estimated deviation/smoothness parameters of a smoothed potential."""

    alpha: float
    beta: float
    norm: str
    eta: float

    def __post_init__(self):
        if self.alpha < -1e-9 or self.beta < -1e-9:
            raise ValueError("smoothing parameters must be nonnegative")
        object.__setattr__(self, "alpha", max(0.0, self.alpha))
        object.__setattr__(self, "beta", max(0.0, self.beta))

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "norm": self.norm, "eta": self.eta}


def _describe_potential(potential) -> dict:
    out = {"potential": type(potential).__name__, "eta": float(getattr(potential, "eta", 0.0))}
    if getattr(potential, "is_stochastic", False):
        out["samples"] = potential.cfg.samples
        out["seed"] = potential.cfg.seed
    return out


def check_bregman_sandwich(potential, theta, v, segment_samples: int = 65) -> CheckReport:
    """Curvature sandwich on a segment: q_min/2 <= D(theta+v, theta) <= q_max/2.

    q(a) = v^T H(theta + a*v) v sampled at `segment_samples` points of
    [0, 1]; D is the directly computed Bregman divergence. Measured is the
    worst violation of either side, so the claim is measured <= 0 up to a
    float allowance.
    """
    if segment_samples < 2:
        raise ValueError("segment_samples must be at least 2")
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    stochastic = getattr(potential, "is_stochastic", False)

    val1 = potential.value(theta + v)
    val0 = potential.value(theta)
    g0 = potential.gradient(theta)
    lin = float(g0.vector @ v)
    D = val1.value - val0.value - lin
    se_lin = math.sqrt(float(np.sum((g0.std_error * v) ** 2)))
    se_D = math.hypot(math.hypot(val1.std_error, val0.std_error), se_lin)

    alphas = np.linspace(0.0, 1.0, segment_samples)
    qs = np.empty(segment_samples)
    qses = np.zeros(segment_samples)
    for k, a in enumerate(alphas):
        point = theta + a * v
        if stochastic:
            qs[k], qses[k] = potential.hessian_quadratic_form(point, v)
        else:
            qs[k] = float(v @ potential.hessian_exact(point) @ v)
    lo_i = int(np.argmin(qs))
    hi_i = int(np.argmax(qs))
    lower = qs[lo_i] / 2.0
    upper = qs[hi_i] / 2.0

    violation_low = lower - D
    violation_high = D - upper
    if violation_low >= violation_high:
        measured, q_se = violation_low, qses[lo_i] / 2.0
    else:
        measured, q_se = violation_high, qses[hi_i] / 2.0
    std_error = math.hypot(se_D, q_se)

    scale = abs(val0.value) + abs(val1.value) + abs(lin) + float(np.max(np.abs(qs))) + 1.0
    allowance = 1e-12 * scale
    return CheckReport(
        "bregman-sandwich",
        float(measured),
        allowance,
        float(std_error),
        {
            **_describe_potential(potential),
            "claimed_bound": 0.0,
            "float_allowance": allowance,
            "bregman": D,
            "segment_min_half": lower,
            "segment_max_half": upper,
            "segment_samples": segment_samples,
            "displacement_norm": float(np.linalg.norm(v)),
        },
    )


def _experts_potential(N: int, eta: float, samples: int, seed: int) -> GaussianMCPotential:
    cfg = GaussianSmoothingConfig(eta, samples, subseed(seed, "hessian-experts"))
    return GaussianMCPotential(Simplex(N), cfg)


def check_hessian_experts_bound(N: int, theta, eta: float, samples: int, seed: int) -> CheckReport:
    """Absolute-entry mass of the experts Hessian against 2*sqrt(2 log N)/eta."""
    pot = _experts_potential(N, eta, samples, seed)
    theta = pot.set.check_vector(np.zeros(N) if theta is None else theta)
    est = pot.hessian(theta, form="gradient")
    measured = float(np.sum(np.abs(est.matrix)))
    std_error = float(np.sqrt(np.sum(est.std_error**2)))
    bound = 2.0 * math.sqrt(2.0 * math.log(N)) / eta if N > 1 else 0.0

    off = ~np.eye(N, dtype=bool)
    offdiag_worst = float(np.max(est.matrix[off] - 3.0 * est.std_error[off])) if N > 1 else None
    diag_worst = float(np.max(-np.diag(est.matrix) - 3.0 * np.diag(est.std_error)))
    # entry sum of the raw estimate; per-sample scalar is sum(u)/eta because
    # every simplex maximizer has coordinate sum 1
    s = 0.0
    ssq = 0.0
    for u in pot.perturbation_chunks():
        r = u.sum(axis=1) / eta
        s += r.sum()
        ssq += float(r @ r)
    m = pot.cfg.samples
    entry_sum = s / m
    entry_sum_se = math.sqrt(max(0.0, (ssq / m - entry_sum**2)) / (m - 1))
    return CheckReport(
        "hessian-experts-bound",
        measured,
        bound,
        std_error,
        {
            "N": N,
            "eta": eta,
            "samples": samples,
            "seed": seed,
            "theta_norm": float(np.linalg.norm(theta)),
            "offdiag_worst_minus_3se": offdiag_worst,
            "diag_worst_minus_3se": diag_worst,
            "entry_sum": entry_sum,
            "entry_sum_std_error": entry_sum_se,
        },
    )


def check_hessian_experts_structure(N: int, theta, eta: float, samples: int, seed: int) -> CheckReport:
    """Sign structure of the experts Hessian: off-diagonals <= 0, diagonal >= 0,
    entries summing to 0, each claim taken with its own 3*std_error already
    folded into the measured violation (folded tolerances are echoed)."""
    rep = check_hessian_experts_bound(N, theta, eta, samples, seed)
    cfgd = rep.config
    entry_violation = abs(cfgd["entry_sum"]) - 3.0 * cfgd["entry_sum_std_error"]
    terms = [cfgd["diag_worst_minus_3se"], entry_violation]
    if cfgd["offdiag_worst_minus_3se"] is not None:
        terms.append(cfgd["offdiag_worst_minus_3se"])
    worst = max(terms)
    return CheckReport(
        "hessian-experts-structure",
        float(worst),
        0.0,
        0.0,
        {**cfgd, "tolerances": "per-claim 3*std_error folded into measured"},
    )


def _l2_lambda_max(N: int, theta, eta: float, samples: int, seed: int):
    cfg = GaussianSmoothingConfig(eta, samples, subseed(seed, "hessian-l2"))
    pot = GaussianMCPotential(L2Ball(N), cfg)
    theta = pot.set.check_vector(theta)
    est = pot.hessian(theta, form="gradient")
    lams, vecs = np.linalg.eigh(est.symmetrized)
    lead = vecs[:, -1]
    qf, qf_se = pot.hessian_quadratic_form(theta, lead)
    # qf equals the top eigenvalue by construction (same samples); keep the
    # eigen decomposition value and the quadratic-form standard error
    return float(lams[-1]), float(qf_se), float(qf)


def check_hessian_l2_bound(N: int, theta, eta: float, samples: int, seed: int) -> CheckReport:
    """Top Hessian eigenvalue on the L2 ball against 1/(eta*sqrt(N)); also
    echoes the radial ordering (curvature at Theta never above curvature at 0)."""
    theta = np.zeros(N) if theta is None else np.asarray(theta, dtype=float)
    lam, lam_se, _ = _l2_lambda_max(N, theta, eta, samples, seed)
    bound = 1.0 / (eta * math.sqrt(N))
    details = {"N": N, "eta": eta, "samples": samples, "seed": seed,
               "theta_norm": float(np.linalg.norm(theta))}
    if np.linalg.norm(theta) > 0:
        lam0, lam0_se, _ = _l2_lambda_max(N, np.zeros(N), eta, samples, seed)
        details["lambda_origin"] = lam0
        details["ordering_violation"] = lam - lam0
        details["ordering_std_error"] = math.hypot(lam_se, lam0_se)
        details["ordering_ok"] = lam - lam0 <= 3.0 * details["ordering_std_error"]
    return CheckReport("hessian-l2-bound", lam, bound, lam_se, details)


def check_hessian_l2_ordering(N: int, eta: float, samples: int, seed: int,
                              radius: float = 5.0) -> CheckReport:
    """Radial monotonicity of the top eigenvalue: lambda(radius*e1) <= lambda(0)."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    theta = np.zeros(N)
    theta[0] = radius
    lam_r, se_r, _ = _l2_lambda_max(N, theta, eta, samples, seed)
    lam_0, se_0, _ = _l2_lambda_max(N, np.zeros(N), eta, samples, seed)
    return CheckReport(
        "hessian-l2-ordering",
        lam_r - lam_0,
        0.0,
        math.hypot(se_r, se_0),
        {"N": N, "eta": eta, "samples": samples, "seed": seed, "radius": radius,
         "lambda_at_radius": lam_r, "lambda_origin": lam_0},
    )


def check_max_gaussian(N: int, samples: int, seed: int) -> CheckReport:
    """Mean of the max of N standard normals against sqrt(2 log N)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    rng = substream(seed, "max-gaussian")
    rows = max(1, 4_000_000 // N)
    s = 0.0
    ssq = 0.0
    left = samples
    while left > 0:
        m = min(rows, left)
        mx = rng.standard_normal((m, N)).max(axis=1)
        s += mx.sum()
        ssq += float(mx @ mx)
        left -= m
    mean = s / samples
    se = math.sqrt(max(0.0, ssq / samples - mean**2) / (samples - 1))
    return CheckReport(
        "max-gaussian",
        float(mean),
        math.sqrt(2.0 * math.log(N)),
        float(se),
        {"N": N, "samples": samples, "seed": seed},
    )


def check_overestimation_telescope(set_: DecisionSet, schedule, trace,
                                   samples: int = 20000, seed: int = 0) -> CheckReport:
    """Summed per-round overestimation against eta_T * E[Phi(u)].

    One common sample set across every round and every eta, so the
    comparison telescopes samplewise and the slack is itself measurable.
    """
    if set_.kind != trace.set_.kind or set_.dimension != trace.set_.dimension:
        raise ValueError("decision set does not match the trace")
    etas = np.asarray(trace.etas, dtype=float)
    T = len(etas)
    if T and float(np.min(np.diff(etas))) < 0.0:
        raise ValueError("overestimation telescope needs a non-decreasing eta schedule")
    if schedule is not None:
        norms = trace.reward_norms()
        for t in range(1, T + 1):
            hist = norms if schedule.requires_full_history else list(norms[: t - 1])
            want = next_eta(schedule, t, hist)
            if not math.isclose(want, etas[t - 1], rel_tol=1e-12, abs_tol=1e-12):
                raise ValueError(f"trace eta at round {t} does not match the schedule")

    n = set_.dimension
    u = substream(seed, "telescope").standard_normal((samples, n))
    base = set_.support_values(u)
    totals = np.zeros(samples)
    prev_theta = np.zeros(n)
    eta_prev = 0.0
    for t in range(T):
        totals += set_.support_values(prev_theta + etas[t] * u)
        totals -= set_.support_values(prev_theta + eta_prev * u)
        eta_prev = etas[t]
        prev_theta = trace.cumulative[t]
    eta_last = float(etas[-1]) if T else 0.0
    slack = eta_last * base - totals
    measured = float(np.mean(totals))
    se = float(np.std(totals, ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    bound = eta_last * float(np.mean(base))
    return CheckReport(
        "overestimation-telescope",
        measured,
        bound,
        se,
        {
            "rounds": T,
            "samples": samples,
            "seed": seed,
            "eta_last": eta_last,
            "bound_std_error": float(np.std(eta_last * base, ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0,
            "min_samplewise_slack": float(np.min(slack)) if T else 0.0,
        },
    )


def check_generic_smoothing(set_: DecisionSet, eta: float, samples: int = 10000,
                            probe_count: int = 32, seed: int = 0):
    """Estimate the deviation/smoothness certificate of Gaussian smoothing.

    alpha: max over probes of |smoothed - exact| / eta, claimed <= L*sqrt(N).
    beta: max over probe pairs of 2*eta*D(y, x)/||y-x||^2, claimed <= L.
    Probes sit at radii {0, 1, 10} in seeded random directions. Returns
    (SmoothingCertificate, CheckReport); measured is the worst excess over
    either claim.
    """
    if probe_count < 2:
        raise ValueError("need at least two probe points")
    n = set_.dimension
    L = lipschitz_constant(set_, "l2")
    alpha_bound = L * math.sqrt(n)
    beta_bound = L

    rng = substream(seed, "generic-probes")
    probes = [np.zeros(n)]
    radii = (1.0, 10.0)
    for k in range(probe_count - 1):
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        probes.append(radii[k % 2] * d)

    cfg = GaussianSmoothingConfig(eta, samples, subseed(seed, "generic-mc"))
    pot = GaussianMCPotential(set_, cfg)
    vals = [pot.value(p) for p in probes]
    grads = [pot.gradient(p) for p in probes]
    exact = [set_.argmax(p).value for p in probes]

    alpha_hat = -math.inf
    alpha_se = 0.0
    for v, e in zip(vals, exact):
        term = abs(v.value - e) / eta
        if term > alpha_hat:
            alpha_hat, alpha_se = term, v.std_error / eta

    beta_hat = -math.inf
    beta_se = 0.0
    min_bregman = math.inf
    for i in range(len(probes)):
        gi = grads[i]
        for j in range(len(probes)):
            if i == j:
                continue
            d = probes[j] - probes[i]
            dist2 = float(d @ d)
            if dist2 < 1e-18:  # coincident probes (low dimensions), no pair information
                continue
            D = vals[j].value - vals[i].value - float(gi.vector @ d)
            se_D = math.sqrt(
                vals[j].std_error**2
                + vals[i].std_error**2
                + float(np.sum((gi.std_error * d) ** 2))
            )
            min_bregman = min(min_bregman, D + 3.0 * se_D)
            term = 2.0 * eta * D / dist2
            if term > beta_hat:
                beta_hat, beta_se = term, 2.0 * eta * se_D / dist2

    if alpha_hat - alpha_bound >= beta_hat - beta_bound:
        measured, se = alpha_hat - alpha_bound, alpha_se
    else:
        measured, se = beta_hat - beta_bound, beta_se
    cert = SmoothingCertificate(alpha_hat, beta_hat, "l2", eta)
    report = CheckReport(
        "generic-smoothing",
        float(measured),
        0.0,
        float(se),
        {
            "set": set_.describe(),
            "eta": eta,
            "samples": samples,
            "probe_count": len(probes),
            "seed": seed,
            "lipschitz": L,
            "alpha": alpha_hat,
            "alpha_bound": alpha_bound,
            "alpha_std_error": alpha_se,
            "beta": beta_hat,
            "beta_bound": beta_bound,
            "beta_std_error": beta_se,
            "min_bregman_plus_3se": min_bregman,
        },
    )
    return cert, report


def entropic_reference_certificate(N: int, eta: float) -> SmoothingCertificate:
    """Closed-form certificate of entropic smoothing on the simplex, for
    side-by-side comparison with the Gaussian one; which tradeoff wins is
    left open."""
    return SmoothingCertificate(math.log(N) if N > 1 else 0.0, 1.0, "linf", eta)


def check_gradient_fd(potential, theta, step: float = 1e-5, sides: str = "central",
                      tolerance: float | None = None) -> CheckReport:
    """Finite differences of the value against the reported gradient.

    Closed forms: sup coordinate deviation against `tolerance` (1e-6 by
    default for central differences; one-sided runs must state their own,
    since they carry first-order curvature error). Monte Carlo forms:
    per-sample common-random-number differences, so the deviation is a mean
    with a standard error and the bound is only a float-rounding floor.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if sides not in ("central", "forward", "backward"):
        raise ValueError(f"sides must be central, forward or backward, got {sides!r}")
    if sides != "central" and tolerance is None:
        raise ValueError("one-sided differences need an explicit tolerance")
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    stochastic = getattr(potential, "is_stochastic", False)

    if not stochastic:
        g = potential.gradient(theta).vector
        fd = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            if sides == "central":
                fd[i] = (potential.value(theta + e).value - potential.value(theta - e).value) / (2 * step)
            elif sides == "forward":
                fd[i] = (potential.value(theta + e).value - potential.value(theta).value) / step
            else:
                fd[i] = (potential.value(theta).value - potential.value(theta - e).value) / step
        measured = float(np.max(np.abs(fd - g)))
        bound = 1e-6 if tolerance is None else float(tolerance)
        return CheckReport(
            "gradient-fd",
            measured,
            bound,
            0.0,
            {**_describe_potential(potential), "step": step, "sides": sides},
        )

    if sides != "central":
        raise ValueError("one-sided differences are only for closed-form potentials")
    set_ = potential.set
    eta = potential.eta
    m = potential.cfg.samples
    sums = np.zeros(n)
    sumsqs = np.zeros(n)
    scale = 0.0
    for u in potential.perturbation_chunks():
        base = theta + eta * u
        W, vals = set_.argmax_batch(base)
        scale = max(scale, float(np.max(np.abs(vals))))
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            d = (set_.support_values(base + e) - set_.support_values(base - e)) / (2 * step)
            d -= W[:, i]
            sums[i] += d.sum()
            sumsqs[i] += float(d @ d)
    means = sums / m
    variances = np.maximum(0.0, sumsqs / m - means**2)
    ses = np.sqrt(variances / max(1, m - 1))
    worst = int(np.argmax(np.abs(means)))
    allowance = 512.0 * _EPS * max(1.0, scale) / (2.0 * step)
    return CheckReport(
        "gradient-fd",
        float(abs(means[worst])),
        allowance,
        float(ses[worst]),
        {
            **_describe_potential(potential),
            "step": step,
            "sides": sides,
            "float_allowance": allowance,
            "claimed_bound": 0.0,
        },
    )
