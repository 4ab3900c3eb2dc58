"""Experiment runner: ``harris <experiment> [--config FILE] [--key value ...] --seed N --out PATH``.

Settings come from an optional JSON config document; command-line flags
override its fields.  Each run writes ``summary.json`` and one CSV into the
output directory.  Exit codes: 0 success, 2 configuration error, 3 numerical
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .core import RngStream, format_float, standard_normal
from .diagnostics import (
    Hyperplane,
    NumericalError,
    QuadConfig,
    batch_first_accepts,
    communicating_classes,
    coord_balance,
    CoverageReport,
    estimate_escape,
    grid_kernel,
    hitting_probability,
    hyperplane_integral,
    mh_balance,
    period,
    tv_sequence,
)
from .diagnostics.report import canonical_json, digest, dumps_report, make_report
from .metropolis import GaussianRandomWalk
from .pathologies import (
    EXAMPLES,
    Example3Chain,
    escape_closed_form,
    ex9_on_line,
    example3,
    example4,
    example9,
    example9_chain,
    example14,
    example14_chain,
)
from .transdim import TransDimSampler, make_state, theorem_hypothesis_monitor, toy_family

EXPERIMENTS = ("escape", "tv", "classes", "integrability", "coverage", "transdim-marginal", "balance")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

# which examples each experiment understands
SUPPORTED = {
    "escape": ("ex3", "ex4", "ex9"),
    "tv": ("ex3",),
    "classes": ("ex14",),
    "integrability": ("ex9", "ex14"),
    "coverage": ("ex9", "ex14"),
    "balance": ("ex9", "ex14", "normal"),
}

DEFAULTS = {
    "escape": {"horizon": 10_000, "replicas": 1_000},
    "tv": {"n": 10_000, "truncation": 100_000, "start": 5},
    "classes": {"grid": 0.25},
    "integrability": {"quad_budget": 10},
    "coverage": {"horizon": 10_000, "replicas": 1_000},
    "transdim-marginal": {"steps": 1_000_000, "replicas": 100, "replica_steps": 10_000,
                          "models": 3, "weights": [0.5, 0.3, 0.2], "a": 0.5, "start_model": 3},
    "balance": {"replicas": 10_000},
}

FIELDS = ("experiment", "example", "start", "horizon", "replicas", "seed", "grid", "subchain", "fix",
          "quad_budget", "n", "truncation", "steps", "replica_steps", "models", "weights", "a",
          "start_model", "refine", "out")


class ConfigError(Exception):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass
class ExperimentConfig:
    experiment: str
    seed: Optional[int] = None
    out: Optional[str] = None
    example: Optional[str] = None
    params: dict = field(default_factory=dict)

    def get(self, key, default=None):
        if key in self.params and self.params[key] is not None:
            return self.params[key]
        return DEFAULTS.get(self.experiment, {}).get(key, default)

    def canonical(self) -> dict:
        d = {"experiment": self.experiment, "seed": self.seed, "example": self.example}
        d.update({k: v for k, v in sorted(self.params.items()) if v is not None})
        return d


def validate(config: ExperimentConfig) -> list:
    """All violations in ``config`` (empty list means valid).  No side effects."""
    v = []
    if config.experiment not in EXPERIMENTS:
        v.append(f"experiment: unknown {config.experiment!r}; valid: {', '.join(EXPERIMENTS)}")
        return v
    if config.seed is None:
        v.append("seed: required (explicit seed, no wall-clock seeding)")
    elif not isinstance(config.seed, int) or not 0 <= config.seed < 2**64:
        v.append("seed: must be an unsigned 64-bit integer")
    if config.experiment in SUPPORTED:
        if config.example is None:
            v.append(f"example: required; valid ids: {', '.join(SUPPORTED[config.experiment])}")
        elif config.example not in SUPPORTED[config.experiment]:
            valid = SUPPORTED[config.experiment]
            known = "" if config.example in EXAMPLES or config.example == "normal" else "unknown example id; "
            v.append(f"example: {known}{config.example!r} not valid for {config.experiment}; valid ids: {', '.join(valid)}")
    for key in ("replicas", "horizon", "n", "steps", "replica_steps", "truncation", "quad_budget", "models"):
        val = config.get(key)
        if val is None:
            continue
        if not isinstance(val, int) or isinstance(val, bool):
            v.append(f"{key}: must be an integer")
        elif key == "n" and val < 0:
            v.append("n: must be >= 0")
        elif key != "n" and val < 1:
            v.append(f"{key} ≥ 1" if key in ("replicas", "horizon") else f"{key}: must be >= 1")
    if config.experiment == "escape" and isinstance(config.get("replicas"), int) and 1 <= config.get("replicas") < 100:
        v.append("replicas: escape estimation needs at least 100 replicas")
    grid = config.get("grid")
    if grid is not None and not (isinstance(grid, (int, float)) and grid > 0):
        v.append("grid: must be a positive number")
    if config.experiment == "transdim-marginal":
        a = config.get("a")
        if not isinstance(a, (int, float)) or not 0 < a < 1:
            v.append("a: must lie strictly between 0 and 1")
        w = config.get("weights")
        m = config.get("models")
        if not isinstance(w, list) or (isinstance(m, int) and len(w) != m):
            v.append("weights: need one weight per model")
        elif any((not isinstance(x, (int, float))) or x <= 0 for x in w) or abs(sum(w) - 1) > 1e-12:
            v.append("weights: must be positive and sum to 1")
        sm = config.get("start_model")
        if isinstance(m, int) and not (isinstance(sm, int) and 1 <= sm <= m):
            v.append("start_model: must be a model id 1..models")
    if config.experiment in ("escape", "coverage") and config.example in SUPPORTED.get(config.experiment, ()):
        try:
            _parse_start(config)
        except (ValueError, ZeroDivisionError) as exc:
            v.append(f"start: {exc}")
    if config.get("fix") is not None:
        try:
            _parse_fix(config.get("fix"))
        except ValueError as exc:
            v.append(f"fix: {exc}")
    if config.get("subchain") is not None:
        try:
            _parse_subchain(config.get("subchain"))
        except ValueError as exc:
            v.append(f"subchain: {exc}")
    return v


def _parse_fix(spec) -> dict:
    if isinstance(spec, dict):
        items = spec.items()
    else:
        items = []
        for part in str(spec).split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise ValueError(f"expected xI=value, got {part!r}")
            items.append(part.split("=", 1))
    out = {}
    for k, val in items:
        k = str(k).strip().lstrip("x")
        if not k.isdigit():
            raise ValueError(f"bad coordinate name {k!r}")
        out[int(k)] = float(val)
    return out


def _parse_subchain(spec) -> list:
    if isinstance(spec, list):
        vals = spec
    else:
        vals = [s for s in str(spec).split(",") if s.strip()]
    out = [int(s) for s in vals]
    if not out:
        raise ValueError("empty coordinate subset")
    return out


def _parse_start(config):
    ex = config.example
    start = config.get("start")
    if ex == "ex3":
        s = 2 if start is None else int(start)
        if s < 1:
            raise ValueError("ex3 states are positive integers")
        return s
    if ex == "ex4":
        f = Fraction(str(start if start is not None else "1/2"))
        if not 0 <= f <= 1:
            raise ValueError("ex4 states lie in [0, 1]")
        return f
    if ex in ("ex9", "ex14"):
        if start is None:
            return np.array([10.0, 0.0] if ex == "ex9" else [4.5, 0.0])
        vals = start if isinstance(start, list) else str(start).split(",")
        x = np.array([float(s) for s in vals])
        if x.shape != (2,):
            raise ValueError("start must have two coordinates")
        return x
    return start


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_float(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _run_escape(cfg):
    ex = cfg.example
    start = _parse_start(cfg)
    horizon, replicas = cfg.get("horizon"), cfg.get("replicas")
    extra = {}
    if ex == "ex3":
        chain, null = example3(), (lambda X: X >= 2)
        extra["closed_form"] = escape_closed_form(start) if start >= 2 else None
    elif ex == "ex4":
        chain, null = example4(), example4().null_set
        m = chain.parse_state(start)
        extra["closed_form"] = escape_closed_form(m.m) if getattr(m, "m", 0) >= 2 else None
    else:
        chain, null = example9_chain(), ex9_on_line
        extra["union_bound"] = max(0.0, 1.0 - horizon * math.exp(-2.0 * float(start[0])))
    est = estimate_escape(chain, null, start, horizon, replicas, cfg.seed)
    summary = make_report("estimate_escape", cfg.canonical(), {"estimate": est.estimate, **extra},
                          ci=[est.ci_low, est.ci_high], bias_bound=est.truncation_bias_bound,
                          verdict="not Harris recurrent" if est.ci_low > 0 else None)
    rows = [(r, int(s) if s >= 0 else "", int(s < 0)) for r, s in enumerate(est.exit_steps)]
    return summary, _csv(["replica", "exit_step", "stayed"], rows)


def _run_tv(cfg):
    chain = example3()
    trunc, n, start = cfg.get("truncation"), cfg.get("n"), int(cfg.get("start"))
    k = chain.truncated_kernel(trunc)
    checkpoints = sorted({0, n} | {10**j for j in range(int(math.log10(max(n, 1))) + 1) if 10**j <= n})
    seq = tv_sequence(k, start, checkpoints, {1: 1.0})
    hit = hitting_probability(k, {1}, start) if start != 1 else 1.0
    closed = escape_closed_form(start) if start >= 2 else 0.0
    summary = make_report("tv_exact", cfg.canonical(),
                          {"tv": seq[-1][1], "hitting_probability": hit, "closed_form": closed},
                          bias_bound=k.tail_bias,
                          verdict="not Harris recurrent" if seq[-1][1] > 0 else None)
    return summary, _csv(["n", "tv"], [(a, b) for a, b in seq])


def _ex14_chain(cfg):
    chain = example14_chain()
    sub = cfg.get("subchain")
    if sub is not None:
        chain = chain.restrict(_parse_subchain(sub))
    return chain


def _run_classes(cfg):
    chain = _ex14_chain(cfg)
    grid = float(cfg.get("grid"))
    base = _parse_start(cfg) if cfg.get("start") is not None else np.array([4.5, 0.0])
    k = grid_kernel(chain, grid, -5.0, 5.0, base=base)
    classes = communicating_classes(k)
    per = period(k) if len(classes) == 1 else None
    summary = make_report("communicating_classes", cfg.canonical(),
                          {"classes": len(classes), "states": k.n, "period": per},
                          verdict="irreducible" if len(classes) == 1 else "reducible")
    rows = [(ci, ";".join(format_float(v) for v in s)) for ci, cls in enumerate(classes) for s in cls]
    return summary, _csv(["class", "state"], rows)


def _run_integrability(cfg):
    target, _ = example9() if cfg.example == "ex9" else example14()
    fix = _parse_fix(cfg.get("fix") or {})
    qc = QuadConfig(k_max=cfg.get("quad_budget"))
    if cfg.get("refine"):
        qc = qc.refined()
    rep = hyperplane_integral(target, Hyperplane(2, fix), qc)
    summary = make_report("hyperplane_integral", cfg.canonical(), {"partial_integrals": rep.partial_integrals,
                                                                    "growth": rep.growth},
                          verdict=rep.verdict, message=rep.message)
    rows = list(zip(range(1, len(rep.partial_integrals) + 1), rep.half_widths, rep.partial_integrals))
    return summary, _csv(["k", "half_width", "partial_integral"], rows)


def _run_coverage(cfg):
    chain = example9_chain() if cfg.example == "ex9" else _ex14_chain(cfg)
    start = _parse_start(cfg)
    horizon, replicas = cfg.get("horizon"), cfg.get("replicas")
    first = batch_first_accepts(chain, start, horizon, replicas, cfg.seed)
    cps = sorted({c for c in (1, 10, 100, 1000, 10_000, 100_000, horizon) if c <= horizon})
    rep = CoverageReport.from_first_accepts(first, cps)
    summary = make_report("coverage_report", cfg.canonical(), rep.to_dict())
    rows = [(r, c + 1, int(first[r, c]) if first[r, c] >= 0 else "")
            for r in range(first.shape[0]) for c in range(first.shape[1])]
    return summary, _csv(["replica", "coord", "first_accept_step"], rows)


def _run_transdim(cfg):
    n_models = cfg.get("models")
    target, R, maps = toy_family(n_models, cfg.get("weights"))
    sampler = TransDimSampler(target, R, maps, float(cfg.get("a")))
    steps = cfg.get("steps")
    _, _, counts = sampler.run(make_state(target, 1, [0.0]), steps, RngStream(cfg.seed, 0), record=False)
    freqs = {m: counts[m] / steps for m in target.models}
    sm = cfg.get("start_model")
    rows = []
    all_ok = True
    for r in range(cfg.get("replicas")):
        _, tr, _ = sampler.run(make_state(target, sm, [0.0] * target.dims[sm]), cfg.get("replica_steps"),
                               RngStream(cfg.seed, r + 1))
        mon = theorem_hypothesis_monitor(tr)
        all_ok &= (not mon.event_d) and mon.all_covered
        rows.append((r, mon.first_within_accept if mon.first_within_accept is not None else "",
                     int(mon.event_d), int(mon.all_covered)))
    summary = make_report("transdim_marginal", cfg.canonical(),
                          {"frequencies": freqs, "weights": dict(target.weights),
                           "max_abs_dev": max(abs(freqs[m] - target.weights[m]) for m in target.models)},
                          verdict="hypotheses observed in all replicas" if all_ok else "hypotheses not observed")
    return summary, _csv(["replica", "first_within_accept", "event_d", "all_covered"], rows)


def _run_balance(cfg):
    gen = RngStream(cfg.seed, 0)
    n = cfg.get("replicas")
    worst, max_alpha = 0.0, -math.inf
    rows = []
    if cfg.example == "normal":
        target, prop = standard_normal(2), GaussianRandomWalk(1.0)
        for r in range(n):
            x, y = gen.normal(size=2), gen.normal(size=2) * 2
            lhs, rhs, res = mh_balance(target, prop, x, y)
            rows.append((r, 0, res))
    else:
        target, props = example9() if cfg.example == "ex9" else example14()
        for r in range(n):
            x = _sample_support(cfg.example, gen)
            cp = props[int(gen.integers(0, 2))]
            z = cp.sample_z(x, gen)
            lhs, rhs, res = coord_balance(target, cp, x, z)
            rows.append((r, cp.index, res))
    worst = max(res for _, _, res in rows)
    summary = make_report("detailed_balance", cfg.canonical(), {"max_residual": worst, "pairs": n},
                          verdict="balanced" if worst <= 1e-12 else "violated")
    return summary, _csv(["pair", "direction", "residual"], rows)


def _sample_support(example, rng):
    if example == "ex9":
        x1 = 1.0 + rng.generator.exponential(1.0) + 1e-9
        x2 = rng.generator.laplace(0.0, math.exp(-2 * x1)) if rng.random() < 0.8 else 0.0
        return np.array([x1, x2])
    r = math.sqrt(rng.uniform(16.0, 25.0))
    th = rng.uniform(0.0, 2 * math.pi)
    return np.array([r * math.cos(th), r * math.sin(th)])


RUNNERS = {
    "escape": _run_escape,
    "tv": _run_tv,
    "classes": _run_classes,
    "integrability": _run_integrability,
    "coverage": _run_coverage,
    "transdim-marginal": _run_transdim,
    "balance": _run_balance,
}

CSV_NAMES = {
    "escape": "escape.csv",
    "tv": "tv.csv",
    "classes": "classes.csv",
    "integrability": "integrability.csv",
    "coverage": "coverage.csv",
    "transdim-marginal": "transdim.csv",
    "balance": "balance.csv",
}


def run(config: ExperimentConfig) -> int:
    """Validate and execute ``config``, writing artifacts under ``config.out``."""
    problems = validate(config)
    if config.out is None:
        problems.append("out: output path required")
    if problems:
        raise ConfigError(problems)
    summary, table = RUNNERS[config.experiment](config)
    summary["config_digest"] = digest(config.canonical())
    summary["version"] = __version__
    summary["config"] = config.canonical()
    os.makedirs(config.out, exist_ok=True)
    with open(os.path.join(config.out, "summary.json"), "w", newline="\n") as fh:
        fh.write(dumps_report(summary))
    with open(os.path.join(config.out, CSV_NAMES[config.experiment]), "w", newline="\n") as fh:
        fh.write(table)
    return EXIT_OK


def _coerce(value: str):
    try:
        return json.loads(value)
    except (ValueError, TypeError):
        return value


def build_config(argv) -> ExperimentConfig:
    """Parse ``argv`` into a config; JSON file first, flags override."""
    args = list(argv)
    if args and args[0] == "run":
        args = args[1:]
    parser = argparse.ArgumentParser(prog="harris", description="Harris recurrence experiments")
    parser.add_argument("experiment")
    parser.add_argument("--config")
    for f in FIELDS:
        if f in ("experiment",):
            continue
        parser.add_argument("--" + f.replace("_", "-"), dest=f)
    ns = parser.parse_args(args)
    doc = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError([f"config: cannot read {ns.config}: {exc}"])
        if not isinstance(doc, dict):
            raise ConfigError(["config: top level must be a JSON object"])
    for f in FIELDS:
        val = getattr(ns, f, None)
        if val is not None and f != "experiment":
            doc[f] = val if f in ("out", "example", "fix", "start", "subchain") else _coerce(val)
    exp = ns.experiment
    seed = doc.pop("seed", None)
    if isinstance(seed, str):
        seed = _coerce(seed)
    out = doc.pop("out", None)
    example = doc.pop("example", None)
    doc.pop("experiment", None)
    unknown = [k for k in doc if k not in FIELDS]
    if unknown:
        raise ConfigError([f"{k}: unknown field" for k in unknown])
    return ExperimentConfig(exp, seed, out, example, doc)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    validate_only = bool(argv) and argv[0] == "validate"
    if validate_only:
        argv = argv[1:]
    try:
        cfg = build_config(argv)
        if validate_only:
            problems = validate(cfg)
            if problems:
                raise ConfigError(problems)
            print("ok")
            return EXIT_OK
        return run(cfg)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc} (residual {exc.residual})", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
