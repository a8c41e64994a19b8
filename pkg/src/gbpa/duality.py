"""One-dimensional bridge between perturbation smoothing and regularization.

On X = [0,1] the baseline potential is Phi(z) = max(z, 0). Smoothing it with
an additive perturbation u ~ F gives the expected-leader potential whose
derivative is P[u > -Theta] = 1 - F(-Theta). The same potential arises from
regularization with

    R(w) - R(0) = -integral_0^w F^{-1}(1 - z) dz,

which is what `ftpl_to_ftrl` computes by quadrature. `ftrl_to_ftpl` inverts
the construction: the argmax map A(Theta) = argmax_w (w*Theta - R(w)) is the
CDF of the negated perturbation, so the perturbation CDF is F(x) = 1 - A(-x).
Composing the two directions is the identity up to quadrature error, which
`roundtrip_error` measures.

The Gumbel special case: argmax frequencies of Theta + eta*g over standard
Gumbel draws reproduce softmax(Theta/eta), i.e. the entropic-regularizer
play; `gumbel_hedge_check` measures the agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr, ndtri, softmax

from .rng import substream

__all__ = [
    "PerturbationCDF",
    "Regularizer1D",
    "builtin_cdf",
    "table_cdf",
    "BUILTIN_CDF_NAMES",
    "ftpl_to_ftrl",
    "default_probe_grid",
    "ftrl_to_ftpl",
    "roundtrip_error",
    "potential_match_error",
    "GumbelHedgeResult",
    "gumbel_hedge_check",
]

BUILTIN_CDF_NAMES = ("uniform", "logistic", "gaussian", "gumbel")


class PerturbationCDF:
    """A continuous perturbation distribution, seen through its CDF."""

    def __init__(self, evaluator, support=(-math.inf, math.inf), mean_finite=True,
                 name=None, quantile=None):
        self._evaluator = evaluator
        self.support = (float(support[0]), float(support[1]))
        self.mean_finite = bool(mean_finite)
        self.name = name
        self._quantile = quantile

    def __call__(self, x):
        return self._evaluator(np.asarray(x, dtype=float))

    def quantile(self, p: float) -> float:
        """F^{-1}(p) by bisection to 1e-10 (or the analytic inverse if known)."""
        if not 0.0 < p < 1.0:
            raise ValueError(f"quantile argument must be in (0,1), got {p}")
        if self._quantile is not None:
            return float(self._quantile(p))
        lo, hi = self.support
        if not math.isfinite(lo):
            lo = -1.0
            while self(lo) >= p:
                lo *= 2.0
                if lo < -1e12:
                    raise ValueError("bisection bracket not found; CDF lower tail never drops below p")
        if not math.isfinite(hi):
            hi = 1.0
            while self(hi) <= p:
                hi *= 2.0
                if hi > 1e12:
                    raise ValueError("bisection bracket not found; CDF upper tail never exceeds p")
        while hi - lo > 1e-10:
            mid = 0.5 * (lo + hi)
            if self(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-transform draws (loop over quantile; fine for check-scale M)."""
        U = rng.random(size)
        return np.array([self.quantile(u) for u in U])


def builtin_cdf(name: str) -> PerturbationCDF:
    if name == "uniform":
        return PerturbationCDF(
            lambda x: np.clip(x, 0.0, 1.0),
            support=(0.0, 1.0),
            name="uniform",
            quantile=lambda p: p,
        )
    if name == "logistic":
        return PerturbationCDF(
            expit, name="logistic", quantile=lambda p: math.log(p / (1.0 - p))
        )
    if name == "gaussian":
        return PerturbationCDF(ndtr, name="gaussian", quantile=ndtri)
    if name == "gumbel":
        return PerturbationCDF(
            lambda x: np.exp(-np.exp(-x)),
            name="gumbel",
            quantile=lambda p: -math.log(-math.log(p)),
        )
    raise ValueError(f"unknown distribution {name!r}; builtins are {BUILTIN_CDF_NAMES}")


def table_cdf(xs, Fs) -> PerturbationCDF:
    """CDF from a sampled table (monotone interpolation between the nodes)."""
    xs = np.asarray(xs, dtype=float)
    Fs = np.asarray(Fs, dtype=float)
    if xs.ndim != 1 or xs.shape != Fs.shape or len(xs) < 2:
        raise ValueError("CDF table needs matching 1-d x and F columns with >= 2 rows")
    if not (np.all(np.diff(xs) > 0) and np.all(np.diff(Fs) > 0)):
        raise ValueError("CDF table must have strictly increasing x and F columns")
    if Fs[0] < 0 or Fs[-1] > 1:
        raise ValueError("CDF table values must lie in [0, 1]")
    return PerturbationCDF(
        lambda x: np.interp(x, xs, Fs, left=0.0, right=1.0),
        support=(float(xs[0]), float(xs[-1])),
        name="table",
        quantile=lambda p: float(np.interp(p, Fs, xs, left=xs[0], right=xs[-1])),
    )


class Regularizer1D:
    """Convex regularizer on [0,1], tabulated on a uniform grid, R(0) = 0."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or len(values) < 2:
            raise ValueError("regularizer table must be a 1-d array with >= 2 values")
        if abs(values[0]) > 1e-12:
            raise ValueError("regularizer must be normalized to R(0) = 0")
        d2 = np.diff(values, 2)
        if d2.size and float(np.min(d2)) < -1e-9:
            raise ValueError("regularizer values are not convex along the grid")
        self.values = values
        self.values.setflags(write=False)

    @property
    def resolution(self) -> int:
        return len(self.values) - 1

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.values))

    @classmethod
    def from_function(cls, fn, K: int) -> "Regularizer1D":
        w = np.linspace(0.0, 1.0, K + 1)
        vals = np.array([fn(x) for x in w], dtype=float)
        return cls(vals - vals[0])

    def __call__(self, w):
        return np.interp(w, self.grid, self.values)

    def cell_slopes(self) -> np.ndarray:
        """Secant slope of R on each grid cell; non-decreasing by convexity."""
        return np.diff(self.values) * self.resolution

    def argmax_map(self, theta):
        """argmax_{w in [0,1]} (w*theta - R(w)).

        Grid maximization refined within the bracketing cell: the exact
        maximizer of the model with R' linear through the cell secants,
        i.e. the inverse of the slope curve, clamped to [0,1].
        """
        s = self.cell_slopes()
        if np.any(np.diff(s) <= 0):
            raise ValueError("argmax inversion needs a strictly convex regularizer")
        mids = (np.arange(self.resolution) + 0.5) / self.resolution
        theta = np.asarray(theta, dtype=float)
        w = np.interp(theta, s, mids)
        return np.where(theta <= s[0], 0.0, np.where(theta >= s[-1], 1.0, w))

    def potential(self, theta):
        """max_{w grid} (w*theta - R(w)), the regularized potential itself."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        vals = np.max(np.outer(theta, self.grid) - self.values[None, :], axis=1)
        return vals if vals.size > 1 else float(vals[0])


def ftpl_to_ftrl(cdf: PerturbationCDF, K: int) -> Regularizer1D:
    """Regularizer induced by the perturbation: R(w) = -int_0^w F^{-1}(1-z) dz.

    Composite trapezoid on the uniform grid; quantile arguments clamped to
    [1/(10K), 1 - 1/(10K)] to tame the endpoint divergence of F^{-1} (the
    integral itself is finite because the mean is).
    """
    if K < 100:
        raise ValueError(f"grid resolution K must be >= 100, got {K}")
    if not cdf.mean_finite:
        raise ValueError("the construction needs a finite-mean perturbation")
    z = np.linspace(0.0, 1.0, K + 1)
    zc = np.clip(z, 1.0 / (10.0 * K), 1.0 - 1.0 / (10.0 * K))
    integrand = np.array([-cdf.quantile(1.0 - zi) for zi in zc])
    if np.any(np.diff(integrand) < -1e-9):
        raise ValueError("quantile inversion produced a non-monotone integrand; CDF not strictly increasing?")
    # cumulative trapezoid of the integrand over the uniform grid
    steps = (integrand[1:] + integrand[:-1]) / (2.0 * K)
    values = np.concatenate([[0.0], np.cumsum(steps)])
    return Regularizer1D(values)


def ftrl_to_ftpl(reg: Regularizer1D) -> PerturbationCDF:
    """Perturbation distribution whose smoothed potential reproduces the FTRL one.

    The argmax map A(Theta) = argmax_w (w*Theta - R(w)) runs from 0 to 1 and
    is the CDF of the negated perturbation; the perturbation CDF is therefore
    F(x) = 1 - A(-x).
    """
    s = reg.cell_slopes()
    if np.any(np.diff(s) <= 0):
        raise ValueError("ftrl_to_ftpl needs a strictly convex regularizer")
    evaluator = lambda x: 1.0 - reg.argmax_map(-np.asarray(x, dtype=float))
    return PerturbationCDF(
        evaluator,
        support=(float(-s[-1]), float(-s[0])),
        mean_finite=True,
        name="recovered",
    )


_DEFAULT_PROBES = {
    "uniform": (-0.25, 1.25),
    "logistic": (-8.0, 8.0),
    "gaussian": (-4.0, 4.0),
    "gumbel": (-3.0, 7.0),
}


def default_probe_grid(cdf: PerturbationCDF, count: int = 201) -> np.ndarray:
    """Evaluation grid covering the interesting range of a distribution."""
    if cdf.name in _DEFAULT_PROBES:
        lo, hi = _DEFAULT_PROBES[cdf.name]
    else:
        lo, hi = cdf.quantile(1e-3) - 1.0, cdf.quantile(1.0 - 1e-3) + 1.0
    return np.linspace(lo, hi, count)


def roundtrip_error(cdf: PerturbationCDF, K: int, probes=None) -> float:
    """sup |F - ftrl_to_ftpl(ftpl_to_ftrl(F, K))| over the probe grid."""
    recovered = ftrl_to_ftpl(ftpl_to_ftrl(cdf, K))
    probes = default_probe_grid(cdf) if probes is None else np.asarray(probes, dtype=float)
    return float(np.max(np.abs(cdf(probes) - recovered(probes))))


def potential_match_error(cdf: PerturbationCDF, K: int, probes=None, samples: int = 20000,
                          seed: int = 0):
    """Compare the perturbed and the regularized potential, offset-matched at 0.

    Returns (sup gap, max std_error over probes, offset). The smoothed side
    is Monte Carlo with common random numbers across probes; the regularized
    side is the grid maximum over the induced regularizer.
    """
    reg = ftpl_to_ftrl(cdf, K)
    probes = default_probe_grid(cdf, count=41) if probes is None else np.asarray(probes, dtype=float)
    u = cdf.sample(substream(seed, "duality-match"), samples)
    sup_gap = 0.0
    max_se = 0.0
    mc0 = float(np.mean(np.maximum(u, 0.0)))
    off = mc0 - reg.potential(0.0)
    for th in probes:
        vals = np.maximum(th + u, 0.0)
        mc = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(samples))
        gap = abs(mc - reg.potential(th) - off)
        sup_gap = max(sup_gap, gap)
        max_se = max(max_se, se)
    return sup_gap, max_se, off


@dataclass(frozen=True)
class GumbelHedgeResult:
    softmax: np.ndarray
    frequencies: np.ndarray
    sup_deviation: float
    std_error: np.ndarray  # binomial, per coordinate
    samples_used: int

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.frequencies - self.softmax) <= 3.0 * self.std_error + 1e-12))


def gumbel_hedge_check(theta, eta: float, samples: int = 100_000, seed: int = 0) -> GumbelHedgeResult:
    """Frequencies of argmax_i(Theta_i + eta*g_i) over Gumbel draws vs softmax(Theta/eta)."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    rng = substream(seed, "gumbel")
    # inverse transform; exact, branch-free, reproducible
    g = -np.log(-np.log(rng.random((samples, n))))
    idx = np.argmax(theta + eta * g, axis=1)  # ties have probability 0; argmax is min-index
    freq = np.bincount(idx, minlength=n) / samples
    p = softmax(theta / eta)
    se = np.sqrt(p * (1.0 - p) / samples)
    return GumbelHedgeResult(p, freq, float(np.max(np.abs(freq - p))), se, samples)
