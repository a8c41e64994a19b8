"""The prediction game: play the smoothed-potential gradient, take the reward.

`run_game` executes the loop exactly: Theta_0 = 0; each round builds the
round potential from the schedule's eta_t and a per-round substream seed,
plays w_t = grad Phi_t(Theta_{t-1}), receives theta_t, accumulates. The
trace replays bit-identically from its root seed.

`decompose_regret` re-derives the same per-round potentials (same seeds) and
splits realized regret into divergence, overestimation, and underestimation
penalties. For Monte Carlo potentials the played w_t is exactly the gradient
of the empirical (sampled) potential, so the decomposition telescopes to the
realized regret up to float rounding; reported standard errors measure the
distance to the exact-expectation quantities instead.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .rng import subseed, substream
from .sets import DecisionSet, Interval01, L2Ball, Simplex, VertexSet
from .smoothing import (
    DEFAULT_SAMPLES,
    BaselinePotential,
    EntropicPotential,
    EtaSchedule,
    GaussianMCPotential,
    GaussianSmoothingConfig,
    QuadraticPotential,
    next_eta,
)

__all__ = [
    "PotentialSpec",
    "Adversary",
    "FixedSequence",
    "IidRademacher",
    "IidGaussianClipped",
    "GreedyAdaptive",
    "adversary_next",
    "GameTrace",
    "RegretLedger",
    "run_game",
    "decompose_regret",
    "theoretical_bound",
    "trace_to_csv",
]

POTENTIAL_KINDS = ("ftl", "ftrl-entropy", "ftrl-quadratic", "gaussian-mc")


@dataclass(frozen=True)
class PotentialSpec:
    """Recipe for the per-round potential; `build` instantiates it for one round."""

    kind: str
    mc_samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"potential kind must be one of {POTENTIAL_KINDS}, got {self.kind!r}")
        if self.mc_samples < 1:
            raise ValueError(f"mc_samples must be >= 1, got {self.mc_samples}")

    def build(self, set_: DecisionSet, eta: float, seed: int):
        if self.kind == "ftl":
            return BaselinePotential(set_)
        if self.kind == "ftrl-entropy":
            return EntropicPotential(eta)
        if self.kind == "ftrl-quadratic":
            return QuadraticPotential(eta)
        return GaussianMCPotential(
            set_, GaussianSmoothingConfig(eta=eta, samples=self.mc_samples, seed=seed)
        )

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "gaussian-mc":
            d["mc_samples"] = self.mc_samples
        return d


def _setting_norm(set_: DecisionSet, theta: np.ndarray) -> float:
    if set_.reward_norm == "linf":
        return float(np.max(np.abs(theta)))
    return float(np.linalg.norm(theta))


class Adversary:
    """Reward-sequence generator under a norm budget (in the setting's norm)."""

    kind = "abstract"
    pre_drawable = False  # can the whole sequence be fixed before play?

    def __init__(self, norm_budget: float = 1.0):
        if not norm_budget > 0:
            raise ValueError(f"norm_budget must be positive, got {norm_budget}")
        self.norm_budget = float(norm_budget)

    def emit(self, t: int, set_: DecisionSet, w_t, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "norm_budget": self.norm_budget}


class FixedSequence(Adversary):
    kind = "fixed-sequence"
    pre_drawable = True

    def __init__(self, sequence, norm_budget: float | None = None):
        seq = np.asarray(sequence, dtype=float)
        if seq.ndim != 2 or seq.shape[0] == 0:
            raise ValueError("sequence must be a nonempty list of reward vectors")
        if not np.all(np.isfinite(seq)):
            raise ValueError("non-finite entries in reward sequence")
        self.sequence = seq
        if norm_budget is None:
            # report the realized budget; still a valid bound on every row
            norm_budget = max(float(np.max(np.abs(seq))), float(np.max(np.linalg.norm(seq, axis=1))))
            norm_budget = max(norm_budget, 1e-300)
        super().__init__(norm_budget)

    def emit(self, t, set_, w_t, rng):
        if t > self.sequence.shape[0]:
            raise ValueError(f"fixed sequence has {self.sequence.shape[0]} rounds, asked for round {t}")
        return self.sequence[t - 1].copy()

    def describe(self) -> dict:
        return {"kind": self.kind, "norm_budget": self.norm_budget, "length": int(self.sequence.shape[0])}


class IidRademacher(Adversary):
    """Independent +-r coordinates; L-infinity norm exactly r."""

    kind = "iid-rademacher"
    pre_drawable = True

    def emit(self, t, set_, w_t, rng):
        signs = rng.integers(0, 2, size=set_.dimension) * 2 - 1
        return self.norm_budget * signs.astype(float)


class IidGaussianClipped(Adversary):
    """Standard Gaussian draw, rescaled into the budget when it violates it."""

    kind = "iid-gaussian-clipped"
    pre_drawable = True

    def emit(self, t, set_, w_t, rng):
        g = rng.standard_normal(set_.dimension)
        s = _setting_norm(set_, g)
        if s > self.norm_budget:
            g *= self.norm_budget / s
        return g


class GreedyAdaptive(Adversary):
    """One-step regret maximizer: theta_t = argmax over the budget ball of
    Phi(theta) - <w_t, theta>, the gain of the round's own leader over the
    learner's play. Against follow-the-leader this alternates signs and
    forces linear regret."""

    kind = "greedy-adaptive"
    pre_drawable = False

    def emit(self, t, set_, w_t, rng):
        w = np.asarray(w_t, dtype=float)
        r = self.norm_budget
        n = set_.dimension
        if set_.reward_norm == "linf":
            # farthest vertex from w in L1; for the simplex that is the
            # least-played coordinate (min-index tie-break via argmin/argmax)
            if isinstance(set_, Simplex):
                i = int(np.argmin(w))
                target = np.zeros(n)
                target[i] = 1.0
            elif isinstance(set_, VertexSet):
                i = int(np.argmax(np.sum(np.abs(set_.vertices - w), axis=1)))
                target = set_.vertices[i]
            else:
                raise ValueError(f"greedy adversary has no L-inf rule for {set_.kind}")
            return r * np.sign(target - w)
        # L2 budget: push toward the farthest point of X from w
        if isinstance(set_, L2Ball):
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                d = np.zeros(n)
                d[0] = 1.0
                return r * d
            return -r * w / nw
        if isinstance(set_, Interval01):
            target = 1.0 if w[0] <= 0.5 else 0.0
            return np.array([r if target > w[0] else -r])
        if isinstance(set_, VertexSet):
            dists = np.linalg.norm(set_.vertices - w, axis=1)
            i = int(np.argmax(dists))
            d = set_.vertices[i] - w
            nd = float(np.linalg.norm(d))
            if nd == 0.0:
                out = np.zeros(n)
                out[0] = r
                return out
            return r * d / nd
        raise ValueError(f"greedy adversary has no rule for {set_.kind}")


def adversary_next(adv: Adversary, set_: DecisionSet, t: int, w_t, root_seed: int) -> np.ndarray:
    """Reward vector for round t; random kinds draw from the per-round substream."""
    theta = adv.emit(t, set_, w_t, substream(root_seed, "adversary", t))
    s = _setting_norm(set_, theta)
    if s > adv.norm_budget * (1.0 + 1e-12) + 1e-300:
        raise ValueError(
            f"{adv.kind} emitted a reward with {set_.reward_norm} norm {s:.6g} "
            f"over budget {adv.norm_budget:.6g}"
        )
    return theta


@dataclass
class GameTrace:
    """Complete record of one game; enough to replay it bit-identically."""

    set_: DecisionSet
    potential: PotentialSpec
    schedule: EtaSchedule
    adversary_desc: dict
    root_seed: int
    etas: np.ndarray  # (T,)
    plays: np.ndarray  # (T, N) actions w_t
    rewards_vec: np.ndarray  # (T, N) adversary rewards theta_t
    cumulative: np.ndarray  # (T, N) Theta_t
    rewards: np.ndarray  # (T,) realized <w_t, theta_t>
    reward_std_error: np.ndarray  # (T,) MC error of each realized reward

    @property
    def horizon(self) -> int:
        return len(self.etas)

    def final_cumulative(self) -> np.ndarray:
        if self.horizon == 0:
            return np.zeros(self.set_.dimension)
        return self.cumulative[-1]

    def baseline_value(self) -> float:
        """Phi(Theta_T), the best fixed action's total reward."""
        return self.set_.argmax(self.final_cumulative()).value

    def realized_regret(self) -> float:
        return self.baseline_value() - float(np.sum(self.rewards))

    def aggregate_reward_std_error(self) -> float:
        return float(np.sqrt(np.sum(self.reward_std_error**2)))

    def reward_norms(self) -> np.ndarray:
        """Per-round reward norms in the setting's norm."""
        if self.set_.reward_norm == "linf":
            return np.max(np.abs(self.rewards_vec), axis=1)
        return np.linalg.norm(self.rewards_vec, axis=1)


@dataclass
class RegretLedger:
    """Per-round regret decomposition: divergence + overestimation streams,
    terminal underestimation, and their Monte Carlo standard errors."""

    divergence: np.ndarray
    overestimation: np.ndarray
    underestimation: float
    realized_regret: float
    divergence_std_error: np.ndarray
    overestimation_std_error: np.ndarray
    underestimation_std_error: float
    bound: float | None = None

    @property
    def reconstructed(self) -> float:
        return float(self.underestimation + np.sum(self.overestimation) + np.sum(self.divergence))

    @property
    def residual(self) -> float:
        return self.realized_regret - self.reconstructed

    @property
    def aggregate_std_error(self) -> float:
        return float(
            np.sqrt(
                np.sum(self.divergence_std_error**2)
                + np.sum(self.overestimation_std_error**2)
                + self.underestimation_std_error**2
            )
        )

    def totals(self) -> dict:
        return {
            "divergence_total": float(np.sum(self.divergence)),
            "overestimation_total": float(np.sum(self.overestimation)),
            "underestimation": float(self.underestimation),
            "realized_regret": float(self.realized_regret),
            "reconstructed": self.reconstructed,
            "residual": self.residual,
            "aggregate_std_error": self.aggregate_std_error,
            "bound": self.bound,
        }


def _validate_pairing(set_: DecisionSet, potential: PotentialSpec):
    if potential.kind == "ftrl-entropy" and not isinstance(set_, Simplex):
        raise ValueError("ftrl-entropy plays probability vectors; pair it with a simplex")
    if potential.kind == "ftrl-quadratic" and not isinstance(set_, L2Ball):
        raise ValueError("ftrl-quadratic plays L2-ball actions; pair it with l2ball")


def run_game(
    set_: DecisionSet,
    potential: PotentialSpec,
    schedule: EtaSchedule,
    adversary: Adversary,
    T: int,
    root_seed: int,
) -> GameTrace:
    """Play T rounds; returns the full trace."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    _validate_pairing(set_, potential)
    if schedule.requires_full_history and not adversary.pre_drawable:
        raise ValueError(
            "hindsight schedules need the whole reward sequence before play; "
            f"the {adversary.kind} adversary reacts to the learner and cannot be pre-drawn"
        )

    n = set_.dimension
    if schedule.requires_full_history:
        # two-pass protocol: fix the adversary's sequence first (draws use the
        # same per-round substreams as sequential play would)
        predrawn = np.stack(
            [adversary_next(adversary, set_, t, np.zeros(n), root_seed) for t in range(1, T + 1)]
        )
        full_norms = [_setting_norm(set_, th) for th in predrawn]
    else:
        predrawn = None
        full_norms = None

    etas = np.empty(T)
    plays = np.empty((T, n))
    thetas = np.empty((T, n))
    cumulative = np.empty((T, n))
    rewards = np.empty(T)
    reward_se = np.zeros(T)

    theta_cum = np.zeros(n)
    past_norms: list[float] = []
    for t in range(1, T + 1):
        history = full_norms if schedule.requires_full_history else past_norms
        eta_t = next_eta(schedule, t, history)
        pot = potential.build(set_, eta_t, subseed(root_seed, "round", t))
        w_t = pot.gradient(theta_cum).vector
        if predrawn is not None:
            theta_t = predrawn[t - 1]
        else:
            theta_t = adversary_next(adversary, set_, t, w_t, root_seed)
        rewards[t - 1] = float(w_t @ theta_t)
        if pot.is_stochastic:
            reward_se[t - 1] = pot.linear_reward_std_error(theta_cum, theta_t)
        theta_cum = theta_cum + theta_t
        etas[t - 1] = eta_t
        plays[t - 1] = w_t
        thetas[t - 1] = theta_t
        cumulative[t - 1] = theta_cum
        past_norms.append(_setting_norm(set_, theta_t))

    return GameTrace(
        set_=set_,
        potential=potential,
        schedule=schedule,
        adversary_desc=adversary.describe(),
        root_seed=root_seed,
        etas=etas,
        plays=plays,
        rewards_vec=thetas,
        cumulative=cumulative,
        rewards=rewards,
        reward_std_error=reward_se,
    )


def _mc_point_stats(pot: GaussianMCPotential, theta_prev, theta_next, reward):
    """One CRN pass per round: per-sample values at both points and reward projections."""
    set_, cfg = pot.set, pot.cfg
    theta_prev = set_.check_vector(theta_prev)
    theta_next = set_.check_vector(theta_next)
    m = cfg.samples
    prev_vals = np.empty(m)
    next_vals = np.empty(m)
    proj = np.empty(m)
    pos = 0
    for u in pot.perturbation_chunks():
        W, vp = set_.argmax_batch(theta_prev + cfg.eta * u)
        _, vn = set_.argmax_batch(theta_next + cfg.eta * u)
        k = len(vp)
        prev_vals[pos : pos + k] = vp
        next_vals[pos : pos + k] = vn
        proj[pos : pos + k] = W @ reward
        pos += k
    return prev_vals, next_vals, proj


def decompose_regret(trace: GameTrace) -> RegretLedger:
    """Split realized regret into its three penalty streams (exact identity)."""
    T = trace.horizon
    set_ = trace.set_
    spec = trace.potential
    div = np.zeros(T)
    over = np.zeros(T)
    div_se = np.zeros(T)
    over_se = np.zeros(T)

    # value of the previous round's potential at the point where it was left,
    # carried forward for the overestimation stream; Phi_0 is the baseline
    prev_value = 0.0  # Phi(Theta_0) = Phi(0) = 0
    prev_se = 0.0

    theta_prev = np.zeros(set_.dimension)
    for t in range(1, T + 1):
        eta_t = float(trace.etas[t - 1])
        theta_next = trace.cumulative[t - 1]
        theta_t = trace.rewards_vec[t - 1]
        reward_t = float(trace.rewards[t - 1])
        pot = spec.build(set_, eta_t, subseed(trace.root_seed, "round", t))
        if pot.is_stochastic:
            pv, nv, proj = _mc_point_stats(pot, theta_prev, theta_next, theta_t)
            m = len(pv)
            at_prev = float(np.mean(pv))
            at_next = float(np.mean(nv))
            d_samples = nv - pv - proj
            div[t - 1] = at_next - at_prev - reward_t
            div_se[t - 1] = float(np.std(d_samples, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
            se_prev = float(np.std(pv, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
            se_next = float(np.std(nv, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
        else:
            at_prev = pot.value(theta_prev).value
            at_next = pot.value(theta_next).value
            div[t - 1] = at_next - at_prev - reward_t
            se_prev = se_next = 0.0
        over[t - 1] = at_prev - prev_value
        over_se[t - 1] = math.hypot(se_prev, prev_se)
        prev_value, prev_se = at_next, se_next
        theta_prev = theta_next

    under = trace.baseline_value() - prev_value
    return RegretLedger(
        divergence=div,
        overestimation=over,
        underestimation=under,
        realized_regret=trace.realized_regret(),
        divergence_std_error=div_se,
        overestimation_std_error=over_se,
        underestimation_std_error=prev_se,
    )


def theoretical_bound(
    setting: str,
    schedule_kind: str,
    norms,
    N: int,
    *,
    eta: float | None = None,
    lipschitz: float = 1.0,
) -> float:
    """Closed-form regret bound for the (setting, schedule) pair.

    `norms` are the realized per-round reward norms in the setting's norm
    (L-inf for experts, L2 otherwise).
    """
    norms = np.asarray(norms, dtype=float)
    sq = float(np.sum(norms * norms))
    if setting == "experts":
        logn = math.log(N)
        if schedule_kind == "fixed":
            if eta is None:
                raise ValueError("fixed-schedule bound needs eta")
            return math.sqrt(2.0 * logn) * (eta + sq / eta)
        if schedule_kind in ("hindsight", "hindsight-experts"):
            return 2.0 * math.sqrt(2.0 * sq * logn)
        if schedule_kind in ("adaptive", "adaptive-experts"):
            return 4.0 * math.sqrt((1.0 + sq) * logn)
    elif setting == "l2ball":
        if schedule_kind == "fixed":
            if eta is None:
                raise ValueError("fixed-schedule bound needs eta")
            return eta * math.sqrt(N) + sq / (2.0 * math.sqrt(N) * eta)
        if schedule_kind in ("hindsight", "hindsight-l2"):
            return math.sqrt(2.0 * sq)
        if schedule_kind in ("adaptive", "adaptive-l2"):
            return 2.0 * math.sqrt(1.0 + sq)
    elif setting == "generic-l2":
        if schedule_kind == "fixed":
            if eta is None:
                raise ValueError("fixed-schedule bound needs eta")
            return lipschitz * (eta * math.sqrt(N) + sq / (2.0 * eta))
    raise ValueError(f"no bound for setting {setting!r} with schedule {schedule_kind!r}")


def bound_for_trace(trace: GameTrace) -> float | None:
    """Theoretical bound matching a trace's setting, schedule and potential.

    Bounds are only attached where the analysis actually covers the played
    potential: the experts bounds hold for Gaussian smoothing and dominate
    the entropic analysis at desk-scale N; the L2-ball schedule bounds are
    Gaussian-only; quadratic FTRL is covered by the generic fixed-eta bound;
    the unsmoothed baseline has no bound at all.
    """
    sched = trace.schedule
    norms = trace.reward_norms()
    set_ = trace.set_
    pot_kind = trace.potential.kind
    if pot_kind == "ftl":
        return None
    try:
        if (
            isinstance(set_, Simplex)
            and pot_kind in ("gaussian-mc", "ftrl-entropy")
            and sched.kind in ("fixed", "adaptive-experts", "hindsight-experts")
        ):
            eta = float(trace.etas[0]) if sched.kind == "fixed" else None
            return theoretical_bound("experts", sched.kind, norms, set_.dimension, eta=eta)
        if (
            isinstance(set_, L2Ball)
            and pot_kind == "gaussian-mc"
            and sched.kind in ("fixed", "adaptive-l2", "hindsight-l2")
        ):
            eta = float(trace.etas[0]) if sched.kind == "fixed" else None
            return theoretical_bound("l2ball", sched.kind, norms, set_.dimension, eta=eta)
        if sched.kind == "fixed" and pot_kind in ("gaussian-mc", "ftrl-quadratic"):
            return theoretical_bound(
                "generic-l2",
                "fixed",
                np.linalg.norm(trace.rewards_vec, axis=1),
                set_.dimension,
                eta=float(trace.etas[0]),
                lipschitz=set_.norm_bound("l2"),
            )
    except ValueError:
        return None
    return None


def trace_to_csv(trace: GameTrace, ledger: RegretLedger, path: str):
    """One row per round: t, eta, theta_1..N, w_1..N, reward, cum_regret,
    divergence, overestimation. Written atomically."""
    n = trace.set_.dimension
    header = (
        ["t", "eta"]
        + [f"theta_{i}" for i in range(1, n + 1)]
        + [f"w_{i}" for i in range(1, n + 1)]
        + ["reward", "cum_regret", "divergence", "overestimation"]
    )
    cum_reward = np.cumsum(trace.rewards)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(1, trace.horizon + 1):
            running_best = trace.set_.argmax(trace.cumulative[t - 1]).value
            row = (
                [t, repr(float(trace.etas[t - 1]))]
                + [repr(float(x)) for x in trace.rewards_vec[t - 1]]
                + [repr(float(x)) for x in trace.plays[t - 1]]
                + [
                    repr(float(trace.rewards[t - 1])),
                    repr(float(running_best - cum_reward[t - 1])),
                    repr(float(ledger.divergence[t - 1])),
                    repr(float(ledger.overestimation[t - 1])),
                ]
            )
            writer.writerow(row)
    os.replace(tmp, path)


def trace_summary(trace: GameTrace, ledger: RegretLedger) -> dict:
    """JSON-ready totals for one game."""
    return {
        "set": trace.set_.describe(),
        "potential": trace.potential.describe(),
        "schedule": trace.schedule.describe(),
        "adversary": trace.adversary_desc,
        "root_seed": trace.root_seed,
        "rounds": trace.horizon,
        "realized_regret": trace.realized_regret(),
        "reward_std_error": trace.aggregate_reward_std_error(),
        "ledger": ledger.totals(),
    }


def summary_to_json(summary: dict, path: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
