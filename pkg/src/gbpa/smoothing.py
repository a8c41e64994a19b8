"""Smoothed potentials and scaling-parameter schedules.

Two smoothing routes over the baseline support function:

* stochastic: Phi_hat(Theta) = E[Phi(Theta + eta*u)] with Gaussian u,
  estimated by Monte Carlo (value, gradient, Hessian, all with standard
  errors; the gradient is the average of oracle maximizers and therefore
  an exact convex combination of actions);
* conjugate: closed-form regularized potentials max_w(<w,Theta> - eta*R(w))
  for the entropic and quadratic regularizers, with exact gradients and
  Hessians, plus a brute-force grid oracle for the equivalent inf-conv form.

All Monte Carlo work is a deterministic function of (seed, samples): draws
come from one PCG64 stream in fixed-size chunks, so two evaluations with the
same seed share their perturbations exactly (common random numbers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .sets import DecisionSet, L2Ball, Simplex

__all__ = [
    "DEFAULT_SAMPLES",
    "GaussianSmoothingConfig",
    "PotentialEstimate",
    "GradientEstimate",
    "HessianEstimate",
    "BaselinePotential",
    "EntropicPotential",
    "QuadraticPotential",
    "GaussianMCPotential",
    "gaussian_smoothed_value",
    "gaussian_smoothed_gradient",
    "gaussian_smoothed_hessian",
    "entropic_ftrl_potential",
    "quadratic_ftrl_potential",
    "infconv_bruteforce_value",
    "EtaSchedule",
    "FixedEta",
    "AdaptiveExperts",
    "HindsightExperts",
    "AdaptiveL2",
    "HindsightL2",
    "next_eta",
]

DEFAULT_SAMPLES = 10_000

# Draws are consumed sequentially from one stream, so the chunk size changes
# memory use but never the values drawn.
_CHUNK = 32_768


@dataclass(frozen=True)
class GaussianSmoothingConfig:
    """Parameters of one Gaussian smoothing: scale, sample budget, seed.

    covariance is an extension hook; only "identity" is implemented.
    """

    eta: float
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    covariance: str = "identity"

    def __post_init__(self):
        if not (self.eta > 0 and np.isfinite(self.eta)):
            raise ValueError(f"eta must be positive and finite, got {self.eta}")
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if self.covariance != "identity":
            raise ValueError("only identity covariance is implemented")


@dataclass(frozen=True)
class PotentialEstimate:
    value: float
    std_error: float
    samples_used: int


@dataclass(frozen=True)
class GradientEstimate:
    vector: np.ndarray
    std_error: np.ndarray  # per coordinate
    samples_used: int


@dataclass(frozen=True)
class HessianEstimate:
    matrix: np.ndarray  # raw estimator output
    symmetrized: np.ndarray  # (H + H^T)/2
    std_error: np.ndarray  # per entry, for the raw matrix
    samples_used: int
    form: str  # "value" or "gradient"


def _std_error(sum_, sumsq, m):
    """Standard error of an M-sample mean from running sums (elementwise)."""
    if m < 2:
        return np.zeros_like(np.asarray(sum_, dtype=float))
    var = (sumsq - sum_ * sum_ / m) / (m - 1)
    return np.sqrt(np.maximum(var, 0.0) / m)


class GaussianMCPotential:
    """Monte Carlo view of E[Phi(Theta + eta*u)], u ~ N(0, I).

    Immutable; every method re-draws the same sample set from the config
    seed, so evaluations at different points are common-random-number
    coupled and the mean of `maximizers` is bit-identical to `gradient`.
    """

    is_stochastic = True

    def __init__(self, set_: DecisionSet, cfg: GaussianSmoothingConfig):
        self.set = set_
        self.cfg = cfg

    @property
    def eta(self) -> float:
        return self.cfg.eta

    def perturbation_chunks(self):
        """The sample set, in chunks of shape (m, N).

        Regenerates the identical draws on every call; downstream estimators
        rely on this for common-random-number coupling.
        """
        rng = np.random.Generator(np.random.PCG64(self.cfg.seed))
        n, left = self.set.dimension, self.cfg.samples
        while left > 0:
            m = min(_CHUNK, left)
            yield rng.standard_normal((m, n))
            left -= m

    def value_samples(self, theta) -> np.ndarray:
        """Per-sample Phi(Theta + eta*u_j), shape (M,)."""
        theta = self.set.check_vector(theta)
        out = np.empty(self.cfg.samples)
        pos = 0
        for u in self.perturbation_chunks():
            _, vals = self.set.argmax_batch(theta + self.cfg.eta * u)
            out[pos : pos + len(vals)] = vals
            pos += len(vals)
        return out

    def value(self, theta) -> PotentialEstimate:
        vals = self.value_samples(theta)
        m = len(vals)
        se = float(np.std(vals, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
        return PotentialEstimate(float(np.mean(vals)), se, m)

    def gradient(self, theta) -> GradientEstimate:
        theta = self.set.check_vector(theta)
        n, m = self.set.dimension, self.cfg.samples
        s = np.zeros(n)
        ssq = np.zeros(n)
        for u in self.perturbation_chunks():
            W, _ = self.set.argmax_batch(theta + self.cfg.eta * u)
            s += W.sum(axis=0)
            ssq += (W * W).sum(axis=0)
        return GradientEstimate(s / m, _std_error(s, ssq, m), m)

    def maximizers(self, theta) -> np.ndarray:
        """All M oracle maximizers at Theta + eta*u_j, shape (M, N)."""
        theta = self.set.check_vector(theta)
        m, n = self.cfg.samples, self.set.dimension
        if m * n > 20_000_000:
            raise ValueError("sample matrix too large to materialize; reduce samples")
        W = np.empty((m, n))
        pos = 0
        for u in self.perturbation_chunks():
            Wc, _ = self.set.argmax_batch(theta + self.cfg.eta * u)
            W[pos : pos + len(Wc)] = Wc
            pos += len(Wc)
        return W

    def linear_reward_std_error(self, theta, reward) -> float:
        """Std error of <gradient(theta), reward> coming from the MC average."""
        theta = self.set.check_vector(theta)
        reward = self.set.check_vector(reward)
        s = 0.0
        ssq = 0.0
        for u in self.perturbation_chunks():
            W, _ = self.set.argmax_batch(theta + self.cfg.eta * u)
            proj = W @ reward
            s += proj.sum()
            ssq += (proj * proj).sum()
        return float(_std_error(np.asarray(s), np.asarray(ssq), self.cfg.samples))

    def hessian(self, theta, form: str = "gradient") -> HessianEstimate:
        theta = self.set.check_vector(theta)
        n, m, eta = self.set.dimension, self.cfg.samples, self.cfg.eta
        S1 = np.zeros((n, n))
        S2 = np.zeros((n, n))
        if form == "gradient":
            # (1/eta) E[ grad Phi(Theta+eta*u) u^T ]
            for u in self.perturbation_chunks():
                W, _ = self.set.argmax_batch(theta + eta * u)
                S1 += W.T @ u
                S2 += (W * W).T @ (u * u)
            scale = 1.0 / eta
        elif form == "value":
            # (1/eta^2) E[ Phi(Theta+eta*u) (u u^T - I) ]
            c1 = np.zeros(n)
            c0 = 0.0
            for u in self.perturbation_chunks():
                _, vals = self.set.argmax_batch(theta + eta * u)
                S1 += (u * vals[:, None]).T @ u
                v2 = vals * vals
                u2 = u * u
                S2 += (u2 * v2[:, None]).T @ u2
                c1 += v2 @ u2
                c0 += v2.sum()
                S1[np.diag_indices(n)] -= vals.sum()
            # per-sample diagonal terms are vals*(u_i^2 - 1), not vals*u_i^2
            d = np.diag_indices(n)
            S2[d] = S2[d] - 2.0 * c1 + c0
            scale = 1.0 / (eta * eta)
        else:
            raise ValueError(f"form must be 'gradient' or 'value', got {form!r}")
        raw = scale * S1 / m
        se = scale * _std_error(S1, S2, m)
        return HessianEstimate(raw, (raw + raw.T) / 2.0, se, m, form)

    def hessian_quadratic_form(self, theta, v, form: str = "gradient"):
        """(estimate, std_error) of v^T H v without materializing H."""
        theta = self.set.check_vector(theta)
        v = self.set.check_vector(v)
        eta = self.cfg.eta
        q = np.empty(self.cfg.samples)
        pos = 0
        for u in self.perturbation_chunks():
            if form == "gradient":
                W, _ = self.set.argmax_batch(theta + eta * u)
                qc = (W @ v) * (u @ v) / eta
            elif form == "value":
                _, vals = self.set.argmax_batch(theta + eta * u)
                qc = vals * ((u @ v) ** 2 - v @ v) / (eta * eta)
            else:
                raise ValueError(f"form must be 'gradient' or 'value', got {form!r}")
            q[pos : pos + len(qc)] = qc
            pos += len(qc)
        m = len(q)
        se = float(np.std(q, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
        return float(np.mean(q)), se


class BaselinePotential:
    """The unsmoothed support function itself (follow-the-leader)."""

    is_stochastic = False
    eta = 0.0

    def __init__(self, set_: DecisionSet):
        self.set = set_

    def value(self, theta) -> PotentialEstimate:
        return PotentialEstimate(self.set.argmax(theta).value, 0.0, 0)

    def gradient(self, theta) -> GradientEstimate:
        res = self.set.argmax(theta)
        n = self.set.dimension
        return GradientEstimate(res.maximizer, np.zeros(n), 0)

    def hessian_exact(self, theta) -> np.ndarray:
        # piecewise linear: zero curvature almost everywhere
        n = self.set.dimension
        return np.zeros((n, n))


class EntropicPotential:
    """eta-scaled log-sum-exp, the conjugate of the entropic regularizer on the simplex."""

    is_stochastic = False

    def __init__(self, eta: float):
        if not eta > 0:
            raise ValueError(f"eta must be positive, got {eta}")
        self.eta = float(eta)

    def value(self, theta) -> PotentialEstimate:
        v, _ = entropic_ftrl_potential(theta, self.eta)
        return PotentialEstimate(v, 0.0, 0)

    def gradient(self, theta) -> GradientEstimate:
        _, g = entropic_ftrl_potential(theta, self.eta)
        return GradientEstimate(g, np.zeros_like(g), 0)

    def hessian_exact(self, theta) -> np.ndarray:
        p = softmax(np.asarray(theta, dtype=float) / self.eta)
        return (np.diag(p) - np.outer(p, p)) / self.eta


class QuadraticPotential:
    """Conjugate of the quadratic regularizer on the L2 unit ball."""

    is_stochastic = False

    def __init__(self, eta: float):
        if not eta > 0:
            raise ValueError(f"eta must be positive, got {eta}")
        self.eta = float(eta)

    def value(self, theta) -> PotentialEstimate:
        v, _ = quadratic_ftrl_potential(theta, self.eta)
        return PotentialEstimate(v, 0.0, 0)

    def gradient(self, theta) -> GradientEstimate:
        _, g = quadratic_ftrl_potential(theta, self.eta)
        return GradientEstimate(g, np.zeros_like(g), 0)

    def hessian_exact(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        n = len(theta)
        r = float(np.linalg.norm(theta))
        if r < self.eta:
            return np.eye(n) / self.eta
        return (np.eye(n) - np.outer(theta, theta) / (r * r)) / r


def gaussian_smoothed_value(theta, cfg: GaussianSmoothingConfig, set_: DecisionSet) -> PotentialEstimate:
    """M-sample estimate of E[Phi(Theta + eta*u)] with u ~ N(0, I)."""
    return GaussianMCPotential(set_, cfg).value(theta)


def gaussian_smoothed_gradient(theta, cfg: GaussianSmoothingConfig, set_: DecisionSet) -> GradientEstimate:
    """Average of M oracle maximizers at Theta + eta*u; lies in X exactly."""
    return GaussianMCPotential(set_, cfg).gradient(theta)


def gaussian_smoothed_hessian(
    theta, cfg: GaussianSmoothingConfig, set_: DecisionSet, form: str = "gradient"
) -> HessianEstimate:
    """Hessian estimate; form 'gradient' (default, lower variance) or 'value'."""
    return GaussianMCPotential(set_, cfg).hessian(theta, form=form)


def entropic_ftrl_potential(theta, eta: float):
    """(value, gradient) of eta*log sum exp(Theta/eta); gradient = softmax(Theta/eta)."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    theta = np.asarray(theta, dtype=float)
    z = theta / eta
    return float(eta * logsumexp(z)), softmax(z)


def quadratic_ftrl_potential(theta, eta: float):
    """(value, gradient) of max_{||w||<=1} (<w,Theta> - eta*||w||^2/2)."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    theta = np.asarray(theta, dtype=float)
    r = float(np.linalg.norm(theta))
    if r <= eta:
        return r * r / (2.0 * eta), theta / eta
    return r - eta / 2.0, theta / r


def _conjugate_entropic(Z):
    # conjugate of sum w log w over the simplex
    return logsumexp(Z, axis=-1)


def _conjugate_quadratic(Z):
    # conjugate of ||w||^2/2 over the unit ball
    r = np.linalg.norm(Z, axis=-1)
    return np.where(r <= 1.0, r * r / 2.0, r - 0.5)


def infconv_bruteforce_value(theta, eta: float, regularizer: str, grid_resolution: int = 200) -> float:
    """Grid search of the infimal-convolution form of the regularized potential.

    inf over Theta* of Phi(Theta*) + eta*S((Theta - Theta*)/eta), where S is
    the conjugate of the named regularizer and Phi the matching support
    function (simplex for 'entropic', L2 ball for 'quadratic'). Independent
    oracle for the closed-form dual max; the returned grid minimum is never
    below the true infimum, and exceeds it by at most a Lipschitz-times-
    spacing correction (objective is 2-Lipschitz in Theta*).
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    if n > 2:
        raise ValueError("brute-force grid search supports dimension <= 2 only")
    if grid_resolution < 100:
        raise ValueError(f"grid_resolution must be >= 100, got {grid_resolution}")
    if regularizer == "entropic":
        support = lambda P: np.max(P, axis=-1)
        conj = _conjugate_entropic
    elif regularizer == "quadratic":
        support = lambda P: np.linalg.norm(P, axis=-1)
        conj = _conjugate_quadratic
    else:
        raise ValueError(f"regularizer must be 'entropic' or 'quadratic', got {regularizer!r}")
    pad = 4.0 * eta + 1.0
    axes = [
        np.linspace(min(t, 0.0) - pad, max(t, 0.0) + pad, grid_resolution) for t in theta
    ]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    obj = support(mesh) + eta * conj((theta - mesh) / eta)
    return float(np.min(obj))


class EtaSchedule:
    """Produces the scaling parameter eta_t for each round."""

    kind = "abstract"
    requires_full_history = False
    norm: str | None = None  # norm the history entries are measured in

    def eta_at(self, t: int, history) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


class FixedEta(EtaSchedule):
    kind = "fixed"

    def __init__(self, eta: float):
        if not eta > 0:
            raise ValueError(f"fixed eta must be positive, got {eta}")
        self.eta = float(eta)

    def eta_at(self, t, history) -> float:
        return self.eta

    def describe(self) -> dict:
        return {"kind": self.kind, "eta": self.eta}


class AdaptiveExperts(EtaSchedule):
    """eta_t = sqrt(2 (1 + sum_{s<t} ||theta_s||_inf^2)); never reads the future."""

    kind = "adaptive-experts"
    norm = "linf"

    def eta_at(self, t, history) -> float:
        if len(history) < t - 1:
            raise ValueError(f"round {t} needs {t - 1} past reward norms, got {len(history)}")
        past = np.asarray(history[: t - 1], dtype=float)
        return float(np.sqrt(2.0 * (1.0 + np.sum(past * past))))


class HindsightExperts(EtaSchedule):
    """Constant eta = sqrt(sum_t ||theta_t||_inf^2) over the full horizon."""

    kind = "hindsight-experts"
    requires_full_history = True
    norm = "linf"

    def __init__(self, horizon: int):
        if horizon < 0:
            raise ValueError(f"horizon must be >= 0, got {horizon}")
        self.horizon = int(horizon)

    def eta_at(self, t, history) -> float:
        if len(history) != self.horizon:
            raise ValueError(
                f"hindsight schedule needs the full {self.horizon}-round reward history, "
                f"got {len(history)} norms"
            )
        full = np.asarray(history, dtype=float)
        return float(np.sqrt(np.sum(full * full)))

    def describe(self) -> dict:
        return {"kind": self.kind, "horizon": self.horizon}


class AdaptiveL2(EtaSchedule):
    """eta_t = sqrt((1 + sum_{s<t} ||theta_s||_2^2)/N)."""

    kind = "adaptive-l2"
    norm = "l2"

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self.dimension = int(dimension)

    def eta_at(self, t, history) -> float:
        if len(history) < t - 1:
            raise ValueError(f"round {t} needs {t - 1} past reward norms, got {len(history)}")
        past = np.asarray(history[: t - 1], dtype=float)
        return float(np.sqrt((1.0 + np.sum(past * past)) / self.dimension))

    def describe(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension}


class HindsightL2(EtaSchedule):
    """Constant eta = sqrt(sum_t ||theta_t||_2^2 / (2N)) over the full horizon."""

    kind = "hindsight-l2"
    requires_full_history = True
    norm = "l2"

    def __init__(self, dimension: int, horizon: int):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        if horizon < 0:
            raise ValueError(f"horizon must be >= 0, got {horizon}")
        self.dimension = int(dimension)
        self.horizon = int(horizon)

    def eta_at(self, t, history) -> float:
        if len(history) != self.horizon:
            raise ValueError(
                f"hindsight schedule needs the full {self.horizon}-round reward history, "
                f"got {len(history)} norms"
            )
        full = np.asarray(history, dtype=float)
        return float(np.sqrt(np.sum(full * full) / (2.0 * self.dimension)))

    def describe(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension, "horizon": self.horizon}


def next_eta(schedule: EtaSchedule, t: int, history) -> float:
    """eta_t under the schedule; history holds realized reward norms.

    Adaptive kinds read rounds 1..t-1 of `history`; hindsight kinds require
    the full horizon and raise without it.
    """
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    return schedule.eta_at(t, history)
