"""``rstre-lab``: replicated sweeps over (n, beta) grids with CSV output.

Every (cell, replicate) task is a pure function of the master seed, so the
CSV is identical for any ``--workers``.  Exit codes: 0 ok, 1 a requested
threshold failed, 2 bad configuration, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from . import oracles
from .electrical import ConditioningError, InfeasibleError, build_network
from .env import (
    DENSE_LIMIT,
    component_stats,
    derive_seed,
    sample_environment,
    sample_low_weight_environment,
    snapshot_graph,
)
from .locallimit import (
    BallHistogram,
    ball,
    ball_edges,
    count_tree_maps,
    poisson_survive_histogram,
    poisson_survive_law_r1,
    poisson_survive_moment,
    rooted_trees_up_to,
    tv_distance,
)
from .observables import (
    ZETA3,
    expected_length_exact,
    length_theory_low,
    mst_length,
    overlap_exact,
    overlap_theory_low,
    tree_length,
)
from .spanning import SizeLimitError, TreeSampler, kruskal_mst, mst_max_degree

log = logging.getLogger("rstre")

HEADER = ["subcommand", "n", "beta", "env_seed", "replicate", "observable", "value", "stderr", "status"]
SUBCOMMANDS = ("overlap", "length", "local", "graph", "verify")
# seed-path tags per subcommand
TAGS = {"overlap": 1, "length": 2, "local": 3, "graph": 4, "verify": 5}


class ConfigError(ValueError):
    """Invalid configuration: reported with exit code 2."""


# --------------------------------------------------------------------------
# beta expressions


class _Parser:
    """Recursive descent over ``+ - * / ^``, unary minus, ``n``, ``log(...)`` and numbers."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str):
        raise ConfigError(f"{msg} at position {self.pos} in {self.text!r}")

    def peek(self) -> str:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def parse(self):
        node = self.expr()
        if self.peek():
            self.error(f"unexpected {self.peek()!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() and self.peek() in "+-":
            op = self.text[self.pos]
            self.pos += 1
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() and self.peek() in "*/":
            op = self.text[self.pos]
            self.pos += 1
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.take("-"):
            return ("neg", self.unary())
        if self.take("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.take("^"):
            return ("^", base, self.unary())
        return base

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if not self.take(")"):
                self.error("expected ')'")
            return node
        if ch.isdigit() or ch == ".":
            start = self.pos
            while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] == "."):
                self.pos += 1
            if self.pos < len(self.text) and self.text[self.pos] in "eE":
                j = self.pos + 1
                if j < len(self.text) and self.text[j] in "+-":
                    j += 1
                if j < len(self.text) and self.text[j].isdigit():
                    self.pos = j
                    while self.pos < len(self.text) and self.text[self.pos].isdigit():
                        self.pos += 1
            try:
                return ("num", float(self.text[start:self.pos]))
            except ValueError:
                self.pos = start
                self.error("malformed number")
        if ch.isalpha():
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isalnum():
                self.pos += 1
            name = self.text[start:self.pos]
            if name == "n":
                return ("n",)
            if name == "log":
                if not self.take("("):
                    self.error("expected '(' after log")
                arg = self.expr()
                if not self.take(")"):
                    self.error("expected ')'")
                return ("log", arg)
            self.pos = start
            self.error(f"unknown name {name!r}")
        self.error("unexpected end of expression" if not ch else f"unexpected {ch!r}")


def _evaluate(node, n: float) -> float:
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "n":
        return float(n)
    if kind == "neg":
        return -_evaluate(node[1], n)
    if kind == "log":
        x = _evaluate(node[1], n)
        return math.log(x) if x > 0 else math.nan
    a, b = _evaluate(node[1], n), _evaluate(node[2], n)
    try:
        if kind == "+":
            return a + b
        if kind == "-":
            return a - b
        if kind == "*":
            return a * b
        if kind == "/":
            return a / b if b != 0 else math.nan
        return a**b if not (a < 0 and b != int(b)) else math.nan
    except OverflowError:
        return math.inf


def evaluate_expression(text: str, n: int) -> float:
    """Value of an expression in ``n`` (natural log), e.g. ``"n*log(n)^2"``."""
    return float(_evaluate(_Parser(text).parse(), n))


# --------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    subcommand: str
    n_values: list
    beta_spec: list
    env_replicates: int = 50
    mc_samples: int = 200
    radius: int = 1
    master_seed: int = 0
    output_path: str | None = None
    worker_count: int = 1
    thresholds: dict = field(default_factory=dict)
    inject_fault: str | None = None

    def betas(self, n: int) -> list[float]:
        out = []
        for text in self.beta_spec:
            x = evaluate_expression(text, n)
            if not math.isfinite(x) or x < 0:
                raise ConfigError(f"{text!r} gives {x} at n={n}; need a finite value >= 0")
            if self.subcommand == "graph" and x > 1:
                raise ConfigError(f"{text!r} gives p={x} > 1 at n={n}")
            out.append(x)
        return out


DEFAULTS = {
    "n": None,
    "beta": None,
    "p": ["2/n"],
    "env_reps": 50,
    "mc": 200,
    "radius": 1,
    "seed": 0,
    "out": None,
    "workers": 1,
}
THRESHOLD_KEYS = {
    "overlap": ("ratio_band", "min_frac", "sigma"),
    "length": ("ratio_band", "zeta_band", "mst_band", "sigma"),
    "local": ("tv_max", "agreement_min"),
    "graph": ("c2_factor", "degree_factor", "connectivity"),
    "verify": (),
}


def _split_list(values) -> list[str]:
    if values is None:
        return []
    if isinstance(values, (str, int, float)):
        values = [values]
    out = []
    for v in values:
        # commas separate items, except inside parentheses
        depth, cur = 0, ""
        for ch in str(v):
            depth += ch == "("
            depth -= ch == ")"
            if ch == "," and depth == 0:
                out.append(cur.strip())
                cur = ""
            else:
                cur += ch
        out.append(cur.strip())
    return [x for x in out if x]


def _band(text) -> tuple[float, float]:
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).split(",")
    try:
        lo, hi = (float(x) for x in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"band must be 'LO,HI', got {text!r}") from None
    if not lo <= hi:
        raise ConfigError(f"band {text!r} has LO > HI")
    return lo, hi


def _as_int(key, value, lo=0) -> int:
    try:
        x = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"--{key.replace('_', '-')} must be an integer, got {value!r}") from None
    if x != float(value) or x < lo:
        raise ConfigError(f"--{key.replace('_', '-')} must be an integer >= {lo}, got {value!r}")
    return x


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, the ``--config`` JSON file and explicit flags (in that order)."""
    merged = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in loaded.items():
            key = key.replace("-", "_")
            if key not in merged and key not in THRESHOLD_KEYS[args.subcommand] + ("inject_fault",):
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = value
    for key, value in vars(args).items():
        if key in ("subcommand", "config", "verbose") or value is None:
            continue
        merged[key] = value

    sub = args.subcommand
    n_values = [_as_int("n", x, 1) for x in _split_list(merged["n"])] if merged["n"] is not None else None
    if n_values is None:
        n_values = [4, 5, 6] if sub == "verify" else []
    if not n_values:
        raise ConfigError("--n needs at least one value")
    if sub == "graph":
        spec = _split_list(merged["p"])
    elif sub == "verify":
        spec = []
    else:
        spec = _split_list(merged["beta"]) if merged["beta"] is not None else ["log(n)"]
    if sub != "verify" and not spec:
        raise ConfigError("need at least one beta (or p) expression")
    for text in spec:
        _Parser(text).parse()

    cfg = ExperimentConfig(
        subcommand=sub,
        n_values=n_values,
        beta_spec=spec,
        env_replicates=_as_int("env_reps", merged["env_reps"], 1),
        mc_samples=_as_int("mc", merged["mc"], 0),
        radius=_as_int("radius", merged["radius"], 0),
        master_seed=_as_int("seed", merged["seed"], 0),
        output_path=merged["out"],
        worker_count=_as_int("workers", merged["workers"], 1),
        inject_fault=merged.get("inject_fault"),
    )
    for key in THRESHOLD_KEYS[sub]:
        value = merged.get(key)
        if value is None:
            continue
        cfg.thresholds[key] = _band(value) if key.endswith("band") else float(value)
    if sub == "local" and cfg.mc_samples < 1:
        raise ConfigError("local needs --mc >= 1 sampled trees per environment")
    if sub in ("overlap", "length", "local"):
        big = [n for n in n_values if n > DENSE_LIMIT]
        if big:
            raise ConfigError(f"{sub} builds dense networks; n must be <= {DENSE_LIMIT}, got {big}")
        if min(n_values) < 2:
            raise ConfigError("n must be at least 2")
    if sub == "graph" and min(n_values) < 2:
        raise ConfigError("n must be at least 2")
    if cfg.inject_fault is not None and cfg.inject_fault not in oracles.FAULTS:
        raise ConfigError(f"unknown fault {cfg.inject_fault!r}; choose from {oracles.FAULTS}")
    for n in n_values:
        cfg.betas(n)
    return cfg


# --------------------------------------------------------------------------
# tasks (top-level so they pickle)


def _beta_bits(beta: float) -> int:
    return int(np.float64(beta).view(np.uint64))


def _env_seed(cfg: ExperimentConfig, n: int, rep: int) -> int:
    return derive_seed(cfg.master_seed, n, rep)


def _mc_seed(cfg: ExperimentConfig, n: int, rep: int, beta: float) -> int:
    return derive_seed(cfg.master_seed, TAGS[cfg.subcommand], n, rep, _beta_bits(beta))


def _overlap_task(cfg, n, beta, rep):
    env = sample_environment(n, _env_seed(cfg, n, rep))
    out = {"theory_low": overlap_theory_low(beta), "reference_high": float(n)}
    try:
        out["exact"] = overlap_exact(env, beta)
    except ConditioningError:
        out["exact"] = None
    if cfg.mc_samples:
        sampler = TreeSampler(build_network(env, beta))
        rng = np.random.default_rng(_mc_seed(cfg, n, rep, beta))
        vals = []
        for _ in range(cfg.mc_samples):
            a, b = sampler.sample(rng), sampler.sample(rng)
            vals.append(len(set(a.edges).intersection(b.edges)))
        out["mc"] = _mean_se(vals)
    return out


def _length_task(cfg, n, beta, rep):
    env = sample_environment(n, _env_seed(cfg, n, rep))
    out = {"theory_low": length_theory_low(n, beta), "mst": mst_length(env)}
    try:
        out["exact"] = expected_length_exact(env, beta)
    except ConditioningError:
        out["exact"] = None
    if cfg.mc_samples:
        sampler = TreeSampler(build_network(env, beta))
        rng = np.random.default_rng(_mc_seed(cfg, n, rep, beta))
        vals = [tree_length(sampler.sample(rng), env) for _ in range(cfg.mc_samples)]
        if min(vals) < out["mst"] - 1e-12:
            raise AssertionError("sampled tree lighter than the minimum spanning tree")
        out["mc"] = _mean_se(vals)
    return out


MOMENT_TREES = tuple(rooted_trees_up_to(3))


def _local_task(cfg, n, beta, rep):
    env = sample_environment(n, _env_seed(cfg, n, rep))
    r = cfg.radius
    target = ball_edges(kruskal_mst(env), 0, r)
    sampler = TreeSampler(build_network(env, beta))
    rng = np.random.default_rng(_mc_seed(cfg, n, rep, beta))
    hist = {}
    hits = 0
    moments = dict.fromkeys(MOMENT_TREES, 0)
    for _ in range(cfg.mc_samples):
        tree = sampler.sample(rng)
        code = ball(tree, 0, r).code
        hist[code] = hist.get(code, 0) + 1
        hits += ball_edges(tree, 0, r) == target
        for t in MOMENT_TREES:
            moments[t] += count_tree_maps(tree, 0, t)
    return {"hist": hist, "hits": hits, "moments": moments}


def _graph_task(cfg, n, ps, rep):
    seed = _env_seed(cfg, n, rep)
    if n > DENSE_LIMIT:
        env = sample_low_weight_environment(n, seed, min(1.0, max(max(ps), 5.0 * math.log(n) / n)))
    else:
        env = sample_environment(n, seed)
    per_p = []
    for p in ps:
        stats = component_stats(snapshot_graph(env, p))
        sizes = stats.sizes
        per_p.append((sizes[0], sizes[1] if len(sizes) > 1 else 0, int(stats.is_connected)))
    try:
        degree = mst_max_degree(kruskal_mst(env))
    except InfeasibleError:
        degree = None
    return {"env_seed": seed, "per_p": per_p, "degree": degree}


def _mean_se(vals):
    x = np.asarray(vals, dtype=np.float64)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


TASKS = {"overlap": _overlap_task, "length": _length_task, "local": _local_task}


def _run_task(job):
    cfg, key, n, beta, rep = job
    if cfg.subcommand == "graph":
        return key, _graph_task(cfg, n, beta, rep)
    return key, TASKS[cfg.subcommand](cfg, n, beta, rep)


def _execute(cfg: ExperimentConfig, jobs) -> dict:
    results = {}
    if cfg.worker_count == 1:
        for job in jobs:
            key, res = _run_task(job)
            results[key] = res
            log.info("done %s", key)
    else:
        with ProcessPoolExecutor(max_workers=cfg.worker_count) as pool:
            for key, res in pool.map(_run_task, jobs):
                results[key] = res
                log.info("done %s", key)
    return results


# --------------------------------------------------------------------------
# reduction and output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


class _Rows:
    def __init__(self, sub: str):
        self.sub = sub
        self.rows = []

    def add(self, n, beta, env_seed, rep, name, value, stderr=None, status="ok"):
        if status != "ok":
            value = stderr = None
        self.rows.append([self.sub, _fmt(n), _fmt(beta), _fmt(env_seed), _fmt(rep), name,
                          _fmt(value), _fmt(stderr), status])


class _Checks:
    """Outcome of the threshold checks requested on the command line."""

    def __init__(self):
        self.lines = []
        self.failed = False

    def record(self, label: str, ok: bool, detail: str):
        self.failed |= not ok
        self.lines.append(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")


def _in_band(x, band) -> bool:
    return x is not None and band[0] <= x <= band[1]


def _reduce_overlap(cfg, results, rows, checks):
    th = cfg.thresholds
    for n in cfg.n_values:
        for beta in cfg.betas(n):
            ratios, means = [], []
            for rep in range(cfg.env_replicates):
                res = results[(n, beta, rep)]
                seed = _env_seed(cfg, n, rep)
                exact = res["exact"]
                rows.add(n, beta, seed, rep, "overlap_exact", exact,
                         status="ok" if exact is not None else "conditioning_refused")
                if "mc" in res:
                    rows.add(n, beta, seed, rep, "overlap_mc", *res["mc"])
                    means.append(res["mc"][0])
                rows.add(n, beta, seed, rep, "overlap_theory_low", res["theory_low"])
                rows.add(n, beta, seed, rep, "overlap_reference_high", res["reference_high"])
                if exact is not None:
                    ratios.append(exact / res["theory_low"])
                    if "mc" in res and "sigma" in th:
                        est, se = res["mc"]
                        gap = abs(est - exact)
                        checks.record(f"overlap exact vs mc n={n} beta={beta:g} rep={rep}",
                                      gap <= th["sigma"] * se or gap <= 1e-12,
                                      f"|diff|={gap:.4g}, {th['sigma']:g} sigma={th['sigma'] * se:.4g}")
            median = statistics.median(ratios) if ratios else None
            rows.add(n, beta, None, -1, "overlap_exact_ratio_median", median,
                     status="ok" if ratios else "conditioning_refused")
            if means:
                rows.add(n, beta, None, -1, "overlap_mc_mean", *_mean_se(means))
            if "ratio_band" in th:
                checks.record(f"overlap ratio n={n} beta={beta:g}", _in_band(median, th["ratio_band"]),
                              f"median exact/theory_low = {median}, band {th['ratio_band']}")
            if "min_frac" in th:
                mean = float(np.mean(means)) if means else None
                checks.record(f"overlap fraction n={n} beta={beta:g}",
                              mean is not None and mean >= th["min_frac"] * n,
                              f"mean overlap / n = {mean / n if mean is not None else None}, min {th['min_frac']}")


def _reduce_length(cfg, results, rows, checks):
    th = cfg.thresholds
    for n in cfg.n_values:
        for beta in cfg.betas(n):
            ratios, means, msts = [], [], []
            for rep in range(cfg.env_replicates):
                res = results[(n, beta, rep)]
                seed = _env_seed(cfg, n, rep)
                exact = res["exact"]
                rows.add(n, beta, seed, rep, "length_exact", exact,
                         status="ok" if exact is not None else "conditioning_refused")
                if "mc" in res:
                    rows.add(n, beta, seed, rep, "length_mc", *res["mc"])
                    means.append(res["mc"][0])
                rows.add(n, beta, seed, rep, "length_theory_low", res["theory_low"])
                rows.add(n, beta, seed, rep, "zeta3", ZETA3)
                rows.add(n, beta, seed, rep, "mst_length", res["mst"])
                msts.append(res["mst"])
                if exact is not None:
                    ratios.append(exact / res["theory_low"])
                    if "mc" in res and "sigma" in th:
                        est, se = res["mc"]
                        gap = abs(est - exact)
                        checks.record(f"length exact vs mc n={n} beta={beta:g} rep={rep}",
                                      gap <= th["sigma"] * se or gap <= 1e-12,
                                      f"|diff|={gap:.4g}, {th['sigma']:g} sigma={th['sigma'] * se:.4g}")
            median = statistics.median(ratios) if ratios else None
            rows.add(n, beta, None, -1, "length_exact_ratio_median", median,
                     status="ok" if ratios else "conditioning_refused")
            mean = None
            if means:
                mean, se = _mean_se(means)
                rows.add(n, beta, None, -1, "length_mc_mean", mean, se)
            mst_mean = float(np.mean(msts))
            rows.add(n, beta, None, -1, "mst_length_mean", *_mean_se(msts))
            if "ratio_band" in th:
                checks.record(f"length ratio n={n} beta={beta:g}", _in_band(median, th["ratio_band"]),
                              f"median exact/theory_low = {median}, band {th['ratio_band']}")
            if "zeta_band" in th:
                r = mean / ZETA3 if mean is not None else None
                checks.record(f"length vs zeta(3) n={n} beta={beta:g}", _in_band(r, th["zeta_band"]),
                              f"mean sampled length / zeta(3) = {r}, band {th['zeta_band']}")
            if "mst_band" in th:
                r = mst_mean / ZETA3
                checks.record(f"mst length vs zeta(3) n={n}", _in_band(r, th["mst_band"]),
                              f"mean MST length / zeta(3) = {r}, band {th['mst_band']}")


def _reference_histogram(cfg, n, beta, total) -> BallHistogram:
    if cfg.radius == 1:
        return poisson_survive_law_r1()
    return poisson_survive_histogram(cfg.radius, max(total, 10_000),
                                     derive_seed(cfg.master_seed, TAGS["local"], n, _beta_bits(beta)))


def _reduce_local(cfg, results, rows, checks):
    th = cfg.thresholds
    for n in cfg.n_values:
        for beta in cfg.betas(n):
            pooled = BallHistogram(cfg.radius)
            moments = dict.fromkeys(MOMENT_TREES, 0)
            rates = []
            for rep in range(cfg.env_replicates):
                res = results[(n, beta, rep)]
                for code in sorted(res["hist"]):
                    pooled.add(code, res["hist"][code])
                for t in MOMENT_TREES:
                    moments[t] += res["moments"][t]
                rate = res["hits"] / cfg.mc_samples
                rates.append(rate)
                rows.add(n, beta, _env_seed(cfg, n, rep), rep, "ball_agreement", rate,
                         math.sqrt(rate * (1 - rate) / cfg.mc_samples))
            tv = tv_distance(pooled, _reference_histogram(cfg, n, beta, int(pooled.total)))
            rows.add(n, beta, None, -1, "tv_poisson_survive", tv)
            agree = _mean_se(rates)
            rows.add(n, beta, None, -1, "ball_agreement_mean", *agree)
            total = cfg.env_replicates * cfg.mc_samples
            for t in MOMENT_TREES:
                rows.add(n, beta, None, -1, f"tree_moment:{t}", moments[t] / total)
                rows.add(n, beta, None, -1, f"tree_moment_ref:{t}", poisson_survive_moment(t))
            if "tv_max" in th:
                checks.record(f"local TV n={n} beta={beta:g} r={cfg.radius}", tv <= th["tv_max"],
                              f"TV = {tv:.4g}, max {th['tv_max']:g}")
            if "agreement_min" in th:
                checks.record(f"ball agreement n={n} beta={beta:g} r={cfg.radius}",
                              agree[0] >= th["agreement_min"],
                              f"mean agreement = {agree[0]:.4g}, min {th['agreement_min']:g}")


def _reduce_graph(cfg, results, rows, checks):
    th = cfg.thresholds
    for n in cfg.n_values:
        ps = cfg.betas(n)
        c2 = {p: [] for p in ps}
        conn = {p: [] for p in ps}
        degrees = []
        for rep in range(cfg.env_replicates):
            res = results[(n, None, rep)]
            for p, (c1, second, connected) in zip(ps, res["per_p"]):
                rows.add(n, p, res["env_seed"], rep, "largest_component", c1)
                rows.add(n, p, res["env_seed"], rep, "second_component", second)
                rows.add(n, p, res["env_seed"], rep, "connected", connected)
                c2[p].append(second)
                conn[p].append(connected)
            if res["degree"] is None:
                rows.add(n, None, res["env_seed"], rep, "mst_max_degree", None, status="infeasible")
            else:
                rows.add(n, None, res["env_seed"], rep, "mst_max_degree", res["degree"])
                degrees.append(res["degree"])
        for p in ps:
            frac = 1.0 - float(np.mean(conn[p]))
            rows.add(n, p, None, -1, "disconnected_fraction", frac)
            rows.add(n, p, None, -1, "second_component_max", max(c2[p]))
            if "c2_factor" in th:
                bound = th["c2_factor"] * math.log(n)
                checks.record(f"second component n={n} p={p:g}", max(c2[p]) <= bound,
                              f"max |C2| = {max(c2[p])}, bound {bound:.4g}")
            if "connectivity" in th:
                checks.record(f"disconnected fraction n={n} p={p:g}", frac <= th["connectivity"],
                              f"fraction = {frac:.4g}, max {th['connectivity']:g}")
        worst = max(degrees) if degrees else None
        rows.add(n, None, None, -1, "mst_max_degree_max", worst,
                 status="ok" if degrees else "infeasible")
        if "degree_factor" in th:
            bound = th["degree_factor"] * math.log(n)
            ok = worst is not None and len(degrees) == cfg.env_replicates and worst <= bound
            checks.record(f"MST max degree n={n}", ok, f"max degree = {worst}, bound {bound:.4g}")


REDUCERS = {"overlap": _reduce_overlap, "length": _reduce_length, "local": _reduce_local,
            "graph": _reduce_graph}


def run_sweep(cfg: ExperimentConfig):
    """Run a sweep; returns ``(rows, checks)`` with rows in deterministic order."""
    jobs = []
    for n in cfg.n_values:
        if cfg.subcommand == "graph":
            ps = tuple(cfg.betas(n))
            jobs += [(cfg, (n, None, rep), n, ps, rep) for rep in range(cfg.env_replicates)]
            continue
        for beta in cfg.betas(n):
            jobs += [(cfg, (n, beta, rep), n, beta, rep) for rep in range(cfg.env_replicates)]
    results = _execute(cfg, jobs)
    rows, checks = _Rows(cfg.subcommand), _Checks()
    REDUCERS[cfg.subcommand](cfg, results, rows, checks)
    return rows.rows, checks


def run_verify(cfg: ExperimentConfig):
    over = [n for n in cfg.n_values if n > 8]
    if over:
        raise SizeLimitError(f"enumeration is limited to 8 vertices, got {over}")
    if min(cfg.n_values) < 3:
        raise ConfigError("verify needs n >= 3")
    rows, checks = _Rows("verify"), _Checks()
    for res in oracles.run_all(seed=cfg.master_seed, n_values=tuple(cfg.n_values), fault=cfg.inject_fault):
        rows.add(None, None, None, None, res.name, res.metric)
        checks.record(res.name, res.passed, res.detail)
    return rows.rows, checks


def render_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    writer.writerows(rows)
    return buf.getvalue()


def _tool_version() -> str:
    try:
        return version("rstre")
    except PackageNotFoundError:
        return "unknown"


def _write_outputs(cfg: ExperimentConfig, text: str) -> None:
    if cfg.output_path is None:
        sys.stdout.write(text)
        return
    with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    side = {"tool": "rstre-lab", "version": _tool_version(), "config": asdict(cfg)}
    with open(cfg.output_path + ".json", "w", encoding="utf-8") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rstre-lab", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", action="append", help="vertex counts, comma separated or repeated")
    common.add_argument("--env-reps", type=int, help="environments per cell (default 50)")
    common.add_argument("--mc", type=int, help="Monte-Carlo samples or pairs per environment (default 200)")
    common.add_argument("--radius", type=int, help="ball radius for 'local' (default 1)")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--out", help="CSV path (stdout if absent); a .json sidecar is written next to it")
    common.add_argument("--workers", type=int, help="worker processes (default 1)")
    common.add_argument("--config", help="JSON file with the same keys; flags override it")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    def with_beta(p):
        p.add_argument("--beta", action="append",
                       help="expressions in n, e.g. 'log(n)' or 'n*log(n)^2' (default log(n))")
        return p

    ov = with_beta(subs.add_parser("overlap", parents=[common], help="edge overlap of two independent trees"))
    ov.add_argument("--ratio-band", help="LO,HI for the median exact/theory_low ratio")
    ov.add_argument("--min-frac", type=float, help="require mean MC overlap >= FRAC * n")
    ov.add_argument("--sigma", type=float, help="require |exact - mc| <= SIGMA * stderr")

    ln = with_beta(subs.add_parser("length", parents=[common], help="total tree length"))
    ln.add_argument("--ratio-band", help="LO,HI for the median exact/theory_low ratio")
    ln.add_argument("--zeta-band", help="LO,HI for mean sampled length / zeta(3)")
    ln.add_argument("--mst-band", help="LO,HI for mean MST length / zeta(3)")
    ln.add_argument("--sigma", type=float, help="require |exact - mc| <= SIGMA * stderr")

    lo = with_beta(subs.add_parser("local", parents=[common], help="root balls and tree moments"))
    lo.add_argument("--tv-max", type=float, help="maximum TV distance to the Poisson-survive law")
    lo.add_argument("--agreement-min", type=float, help="minimum mean MST ball agreement")

    gr = subs.add_parser("graph", parents=[common], help="coupled G(n, p) components and MST degree")
    gr.add_argument("--p", action="append", help="edge-probability expressions in n (default 2/n)")
    gr.add_argument("--c2-factor", type=float, help="require |C2| <= FACTOR * log n in every replicate")
    gr.add_argument("--degree-factor", type=float, help="require MST max degree <= FACTOR * log n")
    gr.add_argument("--connectivity", type=float, help="maximum disconnected fraction")

    ve = subs.add_parser("verify", parents=[common], help="small-n exact oracle suite")
    ve.add_argument("--inject-fault", choices=oracles.FAULTS, help="perturb one path to exercise failure")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        if cfg.subcommand == "verify":
            rows, checks = run_verify(cfg)
        else:
            rows, checks = run_sweep(cfg)
        _write_outputs(cfg, render_csv(rows))
    except (ConfigError, SizeLimitError) as err:
        print(f"rstre-lab: configuration error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001
        log.exception("internal error")
        print(f"rstre-lab: internal error: {err}", file=sys.stderr)
        return 3
    for line in checks.lines:
        print(line, file=sys.stderr)
    return 1 if checks.failed else 0


if __name__ == "__main__":
    sys.exit(main())
