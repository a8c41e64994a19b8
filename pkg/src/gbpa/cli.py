"""Command-line front end: experiment runner, verification suite, duality tools.

Exit codes: 0 all checks passed, 1 a bound was violated, 2 bad input or
config. Every command is reproducible bit-for-bit given --seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .duality import (
    BUILTIN_CDF_NAMES,
    Regularizer1D,
    builtin_cdf,
    default_probe_grid,
    ftpl_to_ftrl,
    ftrl_to_ftpl,
    gumbel_hedge_check,
    table_cdf,
)
from .game import (
    POTENTIAL_KINDS,
    GreedyAdaptive,
    IidGaussianClipped,
    IidRademacher,
    PotentialSpec,
    bound_for_trace,
    decompose_regret,
    run_game,
    summary_to_json,
    trace_summary,
    trace_to_csv,
)
from .rng import substream
from .sets import Interval01, L2Ball, Simplex
from .smoothing import (
    AdaptiveExperts,
    AdaptiveL2,
    EntropicPotential,
    FixedEta,
    GaussianMCPotential,
    GaussianSmoothingConfig,
    HindsightExperts,
    HindsightL2,
    QuadraticPotential,
)
from .verify import (
    check_bregman_sandwich,
    check_generic_smoothing,
    check_gradient_fd,
    check_hessian_experts_bound,
    check_hessian_experts_structure,
    check_hessian_l2_bound,
    check_hessian_l2_ordering,
    check_max_gaussian,
    check_overestimation_telescope,
    entropic_reference_certificate,
)

SETTINGS = ("experts", "l2ball", "interval")
ADVERSARIES = ("rademacher", "gaussian", "greedy")
SELECTORS = (
    "all",
    "bregman",
    "hessian-experts",
    "hessian-l2",
    "maxgauss",
    "telescope",
    "generic",
    "gradfd",
)
DEFAULT_NS = (1, 2, 5, 10)
DEFAULT_ETAS = (0.5, 1.0, 2.0)
OUT_DIR_ENV = "GBPA_OUT_DIR"


class ConfigError(Exception):
    """Bad input: config file, table file, or flag combination."""


def _parse_schedule(text: str) -> tuple[str, float | None]:
    if text == "adaptive" or text == "hindsight":
        return text, None
    if text.startswith("fixed:"):
        try:
            eta = float(text.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"schedule {text!r}: eta is not a number") from None
        if not eta > 0:
            raise ConfigError(f"schedule {text!r}: eta must be positive")
        return "fixed", eta
    raise ConfigError(f"schedule must be 'fixed:<eta>', 'adaptive' or 'hindsight', got {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; round-trips through TOML losslessly."""

    setting: str
    N: int
    T: int
    potential: str
    schedule: str
    adversary: str
    norm_budget: float = 1.0
    mc_samples: int = 2000
    seeds: tuple = (0,)
    out_dir: str | None = None

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.setting == "interval" and self.N != 1:
            raise ConfigError("interval setting is one-dimensional; set N = 1")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if self.potential not in POTENTIAL_KINDS:
            raise ConfigError(f"potential must be one of {POTENTIAL_KINDS}, got {self.potential!r}")
        if self.potential == "ftrl-entropy" and self.setting != "experts":
            raise ConfigError("ftrl-entropy pairs with the experts setting only")
        if self.potential == "ftrl-quadratic" and self.setting != "l2ball":
            raise ConfigError("ftrl-quadratic pairs with the l2ball setting only")
        kind, _ = _parse_schedule(self.schedule)
        if self.adversary not in ADVERSARIES:
            raise ConfigError(f"adversary must be one of {ADVERSARIES}, got {self.adversary!r}")
        if kind == "hindsight" and self.adversary == "greedy":
            raise ConfigError(
                "hindsight schedule needs the reward sequence up front; "
                "the greedy adversary reacts to the learner and cannot be pre-drawn"
            )
        if not self.norm_budget > 0:
            raise ConfigError(f"norm_budget must be positive, got {self.norm_budget}")
        if self.mc_samples < 2:
            raise ConfigError(f"mc_samples must be >= 2, got {self.mc_samples}")
        if not self.seeds:
            raise ConfigError("seeds must be a non-empty list of integers")
        for s in self.seeds:
            if not isinstance(s, int) or isinstance(s, bool) or s < 0:
                raise ConfigError(f"seeds must be non-negative integers, got {s!r}")
        object.__setattr__(self, "seeds", tuple(self.seeds))

    _FIELDS = ("setting", "N", "T", "potential", "schedule", "adversary",
               "norm_budget", "mc_samples", "seeds", "out_dir")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        required = ("setting", "N", "T", "potential", "schedule", "adversary")
        missing = [k for k in required if k not in data]
        if missing:
            raise ConfigError(f"missing required keys: {', '.join(missing)}")
        unknown = [k for k in data if k not in cls._FIELDS]
        if unknown:
            raise ConfigError(f"unknown key {unknown[0]!r}")
        kwargs = dict(data)
        if "seeds" in kwargs:
            kwargs["seeds"] = tuple(kwargs["seeds"])
        if "norm_budget" in kwargs:
            kwargs["norm_budget"] = float(kwargs["norm_budget"])
        return cls(**kwargs)

    @classmethod
    def from_toml(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"{path}: no such file") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if set(data) != {"experiment"}:
            bad = next(iter(set(data) - {"experiment"}), None)
            if bad is not None:
                raise ConfigError(f"{_anchor(path, bad)}: unknown table {bad!r}")
            raise ConfigError(f"{path}: missing [experiment] table")
        try:
            return cls.from_dict(data["experiment"])
        except ConfigError as exc:
            msg = str(exc)
            if msg.startswith("unknown key"):
                key = msg.split("'")[1]
                raise ConfigError(f"{_anchor(path, key)}: unknown key {key!r}") from None
            raise ConfigError(f"{path}: {msg}") from None

    def to_dict(self) -> dict:
        out = {
            "setting": self.setting,
            "N": self.N,
            "T": self.T,
            "potential": self.potential,
            "schedule": self.schedule,
            "adversary": self.adversary,
            "norm_budget": self.norm_budget,
            "mc_samples": self.mc_samples,
            "seeds": list(self.seeds),
        }
        if self.out_dir is not None:
            out["out_dir"] = self.out_dir
        return out

    def to_toml(self) -> str:
        lines = ["[experiment]"]
        for key, value in self.to_dict().items():
            if isinstance(value, str):
                lines.append(f'{key} = "{value}"')
            elif isinstance(value, list):
                lines.append(f"{key} = [{', '.join(str(v) for v in value)}]")
            else:
                lines.append(f"{key} = {value!r}")
        return "\n".join(lines) + "\n"

    def build_set(self):
        if self.setting == "experts":
            return Simplex(self.N)
        if self.setting == "l2ball":
            return L2Ball(self.N)
        return Interval01()

    def build_schedule(self):
        kind, eta = _parse_schedule(self.schedule)
        if kind == "fixed":
            return FixedEta(eta)
        if self.setting == "experts":
            return AdaptiveExperts() if kind == "adaptive" else HindsightExperts(self.T)
        return AdaptiveL2(self.N) if kind == "adaptive" else HindsightL2(self.N, self.T)

    def build_adversary(self):
        if self.adversary == "rademacher":
            return IidRademacher(self.norm_budget)
        if self.adversary == "gaussian":
            return IidGaussianClipped(self.norm_budget)
        return GreedyAdaptive(self.norm_budget)

    def build_potential(self) -> PotentialSpec:
        return PotentialSpec(self.potential, mc_samples=self.mc_samples)


def _anchor(path: str, key: str) -> str:
    """Best-effort `path:line` pointer at the line defining `key`."""
    try:
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                stripped = line.split("#", 1)[0].strip()
                if stripped.startswith(key) and (
                    stripped[len(key):].lstrip().startswith("=")
                    or stripped.startswith(f"[{key}]")
                ):
                    return f"{path}:{i}"
                if stripped.startswith(f"[{key}]"):
                    return f"{path}:{i}"
    except OSError:
        pass
    return path


def _resolve_out_dir(explicit: str | None, config_dir: str | None) -> str:
    if explicit:
        return explicit
    if config_dir:
        return config_dir
    return os.environ.get(OUT_DIR_ENV, "runs")


def run_experiment(config: ExperimentConfig, out_dir: str) -> tuple[dict, int]:
    """Play every seed, write one CSV per seed plus summary.json; returns
    (summary, exit code)."""
    set_ = config.build_set()
    schedule = config.build_schedule()
    adversary = config.build_adversary()
    spec = config.build_potential()
    os.makedirs(out_dir, exist_ok=True)

    def one(seed: int) -> dict:
        t0 = time.perf_counter()
        trace = run_game(set_, spec, schedule, adversary, config.T, seed)
        ledger = decompose_regret(trace)
        bound = bound_for_trace(trace)
        csv_name = f"trace_seed{seed}.csv"
        trace_to_csv(trace, ledger, os.path.join(out_dir, csv_name))
        rec = trace_summary(trace, ledger)
        rec["seed"] = seed
        rec["bound"] = bound
        rec["trace_csv"] = csv_name
        rec["wall_clock_seconds"] = time.perf_counter() - t0
        return rec

    t0 = time.perf_counter()
    workers = min(8, len(config.seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, config.seeds))
    else:
        results = [one(config.seeds[0])]

    regrets = np.array([r["realized_regret"] for r in results])
    mc_ses = np.array([r["reward_std_error"] for r in results])
    residuals = np.array([abs(r["ledger"]["residual"]) for r in results])
    bounds = [r["bound"] for r in results]
    S = len(results)
    spread = float(np.var(regrets, ddof=1) / S) if S > 1 else 0.0
    se_mean = math.sqrt(spread + float(np.sum(mc_ses**2)) / (S * S))

    aggregate = {
        "seeds": S,
        "mean_regret": float(np.mean(regrets)),
        "max_regret": float(np.max(regrets)),
        "std_error_of_mean": se_mean,
        "max_abs_residual": float(np.max(residuals)),
        "wall_clock_seconds": time.perf_counter() - t0,
    }
    code = 0
    if float(np.max(residuals)) > 1e-9:
        code = 1
    if all(b is not None for b in bounds):
        mean_excess = float(np.mean(regrets - np.array(bounds)))
        aggregate["mean_bound"] = float(np.mean(np.array(bounds)))
        aggregate["mean_regret_within_bound"] = mean_excess <= 3.0 * se_mean
        if not aggregate["mean_regret_within_bound"]:
            code = 1
    summary = {"config": config.to_dict(), "results": results, "aggregate": aggregate}
    summary_to_json(summary, os.path.join(out_dir, "summary.json"))
    return summary, code


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_toml(args.config)
    out_dir = _resolve_out_dir(args.out_dir, config.out_dir)
    summary, code = run_experiment(config, out_dir)
    agg = summary["aggregate"]
    print(json.dumps(agg, sort_keys=True))
    print(f"summary written to {os.path.join(out_dir, 'summary.json')}", file=sys.stderr)
    return code


def run_verify(selector: str, Ns, etas, samples: int, seed: int) -> list:
    """The verification suite over a configuration grid; returns CheckReports."""
    if selector not in SELECTORS:
        raise ConfigError(f"unknown selector {selector!r}; choose from {SELECTORS}")
    want = lambda name: selector in ("all", name)
    reports = []

    if want("bregman"):
        for N in Ns:
            for eta in etas:
                rng = substream(seed, "cli-bregman", N, int(eta * 1000))
                if N > 1:
                    theta = rng.standard_normal(N)
                    v = rng.standard_normal(N)
                    reports.append(check_bregman_sandwich(EntropicPotential(eta), theta, v))
                d1 = rng.standard_normal(N)
                d2 = rng.standard_normal(N)
                th_q = 0.25 * eta * d1 / np.linalg.norm(d1)
                v_q = 0.25 * eta * d2 / np.linalg.norm(d2)
                reports.append(check_bregman_sandwich(QuadraticPotential(eta), th_q, v_q))
                pot = GaussianMCPotential(
                    Simplex(N), GaussianSmoothingConfig(eta, min(samples, 5000), seed)
                )
                reports.append(
                    check_bregman_sandwich(
                        pot, rng.standard_normal(N), rng.standard_normal(N), segment_samples=17
                    )
                )

    if want("hessian-experts"):
        for N in Ns:
            for eta in etas:
                reports.append(check_hessian_experts_bound(N, None, eta, samples, seed))
                rng = substream(seed, "cli-hess-exp", N, int(eta * 1000))
                theta = rng.standard_normal(N)
                reports.append(check_hessian_experts_bound(N, theta, eta, samples, seed))
                reports.append(check_hessian_experts_structure(N, theta, eta, samples, seed))

    if want("hessian-l2"):
        for N in Ns:
            for eta in etas:
                reports.append(check_hessian_l2_bound(N, None, eta, samples, seed))
            reports.append(check_hessian_l2_ordering(N, 1.0, samples, seed, radius=5.0))

    if want("maxgauss"):
        for N in Ns:
            reports.append(check_max_gaussian(N, samples, seed))

    if want("telescope"):
        for N in Ns:
            set_ = Simplex(N)
            spec = PotentialSpec("gaussian-mc", mc_samples=1000)
            sched = AdaptiveExperts()
            trace = run_game(set_, spec, sched, IidRademacher(1.0), 50, seed)
            reports.append(check_overestimation_telescope(set_, sched, trace, samples, seed))
            fixed = FixedEta(1.0)
            trace_c = run_game(set_, spec, fixed, IidRademacher(1.0), 20, seed)
            reports.append(check_overestimation_telescope(set_, fixed, trace_c, samples, seed))

    if want("generic"):
        for N in Ns:
            for eta in etas:
                for set_ in (Simplex(N), L2Ball(N)):
                    cert, rep = check_generic_smoothing(
                        set_, eta, min(samples, 10000), probe_count=32, seed=seed
                    )
                    if set_.kind == "simplex":
                        # the open tradeoff: both certificates, no verdict
                        rep.config["entropic_reference"] = entropic_reference_certificate(
                            N, eta
                        ).to_dict()
                    reports.append(rep)

    if want("gradfd"):
        for N in Ns:
            for eta in etas:
                rng = substream(seed, "cli-gradfd", N, int(eta * 1000))
                theta = rng.standard_normal(N)
                reports.append(check_gradient_fd(EntropicPotential(eta), theta))
                reports.append(check_gradient_fd(QuadraticPotential(eta), 3.0 * eta * theta))
                pot = GaussianMCPotential(
                    Simplex(N), GaussianSmoothingConfig(eta, min(samples, 20000), seed)
                )
                reports.append(check_gradient_fd(pot, rng.standard_normal(N)))

    return reports


def _cmd_verify(args) -> int:
    Ns = (args.N,) if args.N is not None else DEFAULT_NS
    etas = (args.eta,) if args.eta is not None else DEFAULT_ETAS
    reports = run_verify(args.selector, Ns, etas, args.samples, args.seed)
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in reports]
    for line in lines:
        print(line)
    if args.out:
        _atomic_write(args.out, "\n".join(lines) + "\n")
    passed = sum(r.passed for r in reports)
    print(f"{passed}/{len(reports)} checks passed", file=sys.stderr)
    return 0 if passed == len(reports) else 1


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_table(path: str, header: tuple[str, str], rows):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    os.replace(tmp, path)


def _read_table(path: str, header: tuple[str, str]) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            head = next(reader, None)
            if head is None or [h.strip() for h in head] != list(header):
                raise ConfigError(
                    f"{path}: expected header '{','.join(header)}', got {head!r}"
                )
            rows = [(float(a), float(b)) for a, b in reader]
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if len(rows) < 2:
        raise ConfigError(f"{path}: table needs at least two rows")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def _load_cdf(source: str):
    if source in BUILTIN_CDF_NAMES:
        return builtin_cdf(source)
    xs, Fs = _read_table(source, ("x", "F"))
    try:
        return table_cdf(xs, Fs)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _load_regularizer(source: str, K: int) -> Regularizer1D:
    if source in BUILTIN_CDF_NAMES:
        return ftpl_to_ftrl(builtin_cdf(source), K)
    ws, Rs = _read_table(source, ("w", "R"))
    grid = np.linspace(0.0, 1.0, len(ws))
    if not np.allclose(ws, grid, atol=1e-9):
        raise ConfigError(f"{source}: w column must sample [0, 1] uniformly")
    try:
        return Regularizer1D(Rs)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _cmd_duality(args) -> int:
    out_dir = os.environ.get(OUT_DIR_ENV, ".")
    os.makedirs(out_dir, exist_ok=True)

    def out_path(default: str) -> str:
        return args.out if args.out else os.path.join(out_dir, default)

    if args.direction == "gumbel-hedge":
        if not args.theta:
            raise ConfigError("gumbel-hedge needs --theta, e.g. --theta 1,0")
        try:
            theta = np.array([float(x) for x in args.theta.split(",")])
        except ValueError:
            raise ConfigError(f"--theta {args.theta!r} is not a comma-separated number list") from None
        if not args.eta > 0:
            raise ConfigError(f"--eta must be positive, got {args.eta}")
        res = gumbel_hedge_check(theta, args.eta, args.M, args.seed)
        table = out_path("frequencies.csv")
        _write_table(table, ("i", "frequency"), list(enumerate(res.frequencies, start=1)))
        report = {
            "direction": args.direction,
            "theta": theta.tolist(),
            "eta": args.eta,
            "samples": res.samples_used,
            "seed": args.seed,
            "softmax": res.softmax.tolist(),
            "frequencies": res.frequencies.tolist(),
            "sup_deviation": res.sup_deviation,
            "binomial_std_error": res.std_error.tolist(),
            "passed": res.passed,
            "table": table,
        }
        _finish_duality(args, report)
        return 0 if res.passed else 1

    if not args.source:
        raise ConfigError(f"{args.direction} needs a distribution name or table path")

    if args.direction == "to-ftrl":
        cdf = _load_cdf(args.source)
        try:
            reg = ftpl_to_ftrl(cdf, args.K)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        table = out_path("regularizer.csv")
        _write_table(table, ("w", "R"), zip(reg.grid, reg.values))
        report = {
            "direction": args.direction,
            "source": args.source,
            "K": args.K,
            "R_at_half": float(reg(0.5)),
            "R_at_one": float(reg(1.0)),
            "convex": True,
            "table": table,
        }
        _finish_duality(args, report)
        return 0

    if args.direction == "to-ftpl":
        reg = _load_regularizer(args.source, args.K)
        try:
            cdf = ftrl_to_ftpl(reg)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        lo, hi = cdf.support
        pad = 0.05 * (hi - lo)
        xs = np.linspace(lo - pad, hi + pad, 401)
        table = out_path("cdf.csv")
        _write_table(table, ("x", "F"), zip(xs, np.asarray(cdf(xs))))
        report = {
            "direction": args.direction,
            "source": args.source,
            "K": args.K,
            "support": [lo, hi],
            "F_far_left": float(cdf(np.array(-1e6))),
            "F_far_right": float(cdf(np.array(1e6))),
            "table": table,
        }
        _finish_duality(args, report)
        return 0

    # roundtrip
    cdf = _load_cdf(args.source)
    try:
        recovered = ftrl_to_ftpl(ftpl_to_ftrl(cdf, args.K))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    probes = default_probe_grid(cdf)
    errors = np.abs(np.asarray(cdf(probes)) - np.asarray(recovered(probes)))
    sup_error = float(np.max(errors))
    table = out_path("roundtrip.csv")
    _write_table(table, ("x", "abs_error"), zip(probes, errors))
    report = {
        "direction": args.direction,
        "source": args.source,
        "K": args.K,
        "sup_error": sup_error,
        "tolerance": 1e-3,
        "passed": sup_error <= 1e-3,
        "table": table,
    }
    _finish_duality(args, report)
    return 0 if sup_error <= 1e-3 else 1


def _finish_duality(args, report: dict):
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    print(text, end="")
    if args.report:
        _atomic_write(args.report, text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gbpa",
        description="Run smoothed-potential online-learning games, verify the "
        "curvature and regret bounds, and convert between perturbation "
        "distributions and regularizers.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="play a configured game over all seeds")
    pr.add_argument("config", help="TOML config with an [experiment] table")
    pr.add_argument("--out-dir", help=f"output directory (default: config, then ${OUT_DIR_ENV}, then ./runs)")
    pr.set_defaults(fn=_cmd_run)

    pv = sub.add_parser("verify", help="run bound-certification checks")
    pv.add_argument("selector", choices=SELECTORS)
    pv.add_argument("--N", type=int, help="restrict the grid to one dimension")
    pv.add_argument("--eta", type=float, help="restrict the grid to one eta")
    pv.add_argument("--samples", type=int, default=20000)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--out", help="also write the JSON report lines to this file")
    pv.set_defaults(fn=_cmd_verify)

    pd = sub.add_parser("duality", help="one-dimensional perturbation/regularizer conversions")
    pd.add_argument("direction", choices=("to-ftrl", "to-ftpl", "roundtrip", "gumbel-hedge"))
    pd.add_argument("source", nargs="?", help="builtin distribution name or table file")
    pd.add_argument("--K", type=int, default=1000, help="grid resolution")
    pd.add_argument("--theta", help="comma-separated scores for gumbel-hedge")
    pd.add_argument("--eta", type=float, default=1.0)
    pd.add_argument("--M", type=int, default=100_000, help="Monte Carlo draws")
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("--out", help="output table path")
    pd.add_argument("--report", help="JSON report path")
    pd.set_defaults(fn=_cmd_duality)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
