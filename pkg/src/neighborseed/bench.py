"""Experiment harness: dataset ingestion, algorithm roster, reports.

Reproduces the evaluation protocol at configurable scale: sample the
accessible users, assign acceptance curves, optimize under each algorithm,
then score every final artifact with independent Monte Carlo cascades
(never with the optimizer's own estimator).  A fixed master seed fixes
every stream, so reports are reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .adaptive import PolicyConfig, baseline_ada, run_policy
from .diffusion import monte_carlo_spread, spread_under_allocation
from .estimator import build_rr_index, default_theta, estimate_alloc_influence, estimate_influence
from .graph import Graph, fp_statistics, load_edge_list, preferential_attachment, sample_accessible
from .nonadaptive import (
    CDConfig,
    baseline_cd_one_stage,
    baseline_im_greedy,
    baseline_rf,
    two_stage_cd,
)
from .oracle import MAX_ORACLE_EDGES, MAX_ORACLE_NODES, ExactInstance
from .rng import spawn
from .seeding import (
    DEFAULT_RATES,
    DiscountAllocation,
    DiscountRateSet,
    SETTING_1,
    SETTING_2,
    assign_profiles,
    profiles_to_json,
    validate_mix,
)

ALGORITHMS = ("rf", "im", "cd", "2cd", "ada", "ada-cd", "ada-gs", "ada-mgs")


class ConfigError(ValueError):
    """Bad experiment configuration (exit code 2)."""


class DatasetError(ValueError):
    """Missing or unreadable dataset (exit code 3)."""


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    synthetic: tuple[int, int] | None = (10_000, 5)
    directed: bool = True
    alpha: float = 1.0
    x_size: int = 100
    budgets: tuple[float, ...] = (10.0,)
    split: tuple[float, float] = (1.0, 4.0)
    theta: int | None = None
    mix: tuple = SETTING_1
    algorithms: tuple[str, ...] = ("rf",)
    seed: int = 0
    reps: int = 1
    eval_runs: int = 20_000
    workers: int | None = None
    stage1_samples: int = 200
    cd_iters: int = 50
    two_stage_iters: int = 10
    policy_cd_iters: int = 20
    rates: DiscountRateSet = DEFAULT_RATES
    stage2_rates: DiscountRateSet = DiscountRateSet((0.5, 1.0))
    mgs_candidate_cap: int | None = 16
    out_dir: str | None = None
    stable_timings: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.reps < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.split[0] <= 0 or self.split[1] <= 0:
            raise ConfigError("split parts must be positive")
        if self.eval_runs < 1:
            raise ConfigError("eval_runs must be >= 1")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r} (choose from {ALGORITHMS})")
        validate_mix(self.mix)
        return self

    def dataset_name(self) -> str:
        if self.dataset:
            return os.path.splitext(os.path.basename(self.dataset))[0]
        n, m = self.synthetic
        return f"pa-n{n}-m{m}"

    def split_budget(self, b: float) -> tuple[float, float]:
        s1, s2 = self.split
        return b * s1 / (s1 + s2), b * s2 / (s1 + s2)


def load_dataset(config: ExperimentConfig) -> Graph:
    if config.dataset:
        try:
            with open(config.dataset, "r", encoding="ascii") as fh:
                return load_edge_list(fh, config.directed, config.alpha)
        except OSError as exc:
            raise DatasetError(f"cannot read dataset {config.dataset}: {exc}") from exc
    n, m = config.synthetic
    return preferential_attachment(n, m, spawn(config.seed, "pa-graph"), config.alpha)


def _degrees(g: Graph, users) -> dict[int, float]:
    deg = g.total_degree
    return {int(u): float(deg[int(u)]) for u in users}


def _policy_config(config: ExperimentConfig, mode: str, b1: float, b2: float,
                   theta: int) -> PolicyConfig:
    return PolicyConfig(
        b1=b1, b2=b2, rates=config.rates, stage2_mode=mode,
        stage2_rates=config.stage2_rates, theta=theta,
        cd_iters=config.policy_cd_iters,
        mgs_candidate_cap=config.mgs_candidate_cap, workers=config.workers)


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute the configured roster; write CSV/JSON reports and traces."""
    config.validate()
    g = load_dataset(config)
    theta = config.theta or default_theta(g.node_count)
    master = config.seed
    x = sorted(sample_accessible(g, min(config.x_size, g.node_count), spawn(master, "x")))
    profiles = assign_profiles(range(g.node_count), config.mix, spawn(master, "profiles"))
    needs_idx = any(a in ("im", "cd", "2cd") for a in config.algorithms)
    idx = build_rr_index(g, theta, spawn(master, "rr"), config.workers) if needs_idx else None
    out_dir = config.out_dir
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "profiles.json"), "w") as fh:
            fh.write(profiles_to_json(profiles))
    rows = []
    artifacts: dict[str, dict] = {}
    for algo in config.algorithms:
        for b in config.budgets:
            b1, b2 = config.split_budget(b)
            for rep in range(config.reps):
                opt_rng = spawn(master, "opt", algo, int(b * 1000), rep)
                eval_rng = spawn(master, "eval", algo, int(b * 1000), rep)
                t0 = time.perf_counter()
                artifact = _run_algorithm(config, g, idx, profiles, x, algo, b, b1, b2,
                                          theta, opt_rng)
                spread, stderr = _evaluate(config, g, profiles, artifact, eval_rng)
                wall_ms = 0.0 if config.stable_timings else (time.perf_counter() - t0) * 1e3
                rows.append({
                    "dataset": config.dataset_name(), "algorithm": algo,
                    "alpha": config.alpha, "B": b, "B1": b1, "B2": b2, "rep": rep,
                    "spread": spread, "stderr": stderr, "wall_ms": round(wall_ms, 3),
                    "seed": master,
                })
                artifacts[f"{algo}-B{b:g}-rep{rep}"] = artifact
    report = _summarize(config, rows)
    if out_dir:
        _write_outputs(config, out_dir, rows, report, artifacts)
    report["rows"] = rows
    report["artifacts"] = artifacts
    return report


def _run_algorithm(config, g, idx, profiles, x, algo, b, b1, b2, theta, rng) -> dict:
    if algo == "rf":
        out = baseline_rf(g, x, b1, b2, rng)
        return {"kind": "alloc", "alloc": out.c2, "outcome": out}
    if algo == "im":
        seeds = baseline_im_greedy(idx, x, int(b))
        return {"kind": "seeds", "seeds": seeds}
    if algo == "cd":
        cfg = CDConfig(max_iters=config.cd_iters, init_strategy="degree-uniform",
                       degrees=_degrees(g, x))
        alloc, trace = baseline_cd_one_stage(g, x, b, idx, profiles, rng, cfg)
        return {"kind": "alloc", "alloc": alloc, "trace": trace}
    if algo == "2cd":
        cfg1 = CDConfig(max_iters=config.two_stage_iters, init_strategy="degree-uniform",
                        degrees=_degrees(g, range(g.node_count)))
        cfg2 = CDConfig(max_iters=config.two_stage_iters, init_strategy="degree-uniform",
                        degrees=_degrees(g, range(g.node_count)))
        out = two_stage_cd(g, x, b1, b2, idx, profiles, rng,
                           samples=config.stage1_samples, cfg1=cfg1, cfg2=cfg2)
        return {"kind": "alloc", "alloc": out.c2, "outcome": out,
                "trace": out.trace1, "trace2": out.trace2}
    if algo == "ada":
        hist = baseline_ada(g, x, profiles, b, config.rates, rng, theta=theta,
                            workers=config.workers)
        return {"kind": "policy", "history": hist}
    mode = {"ada-cd": "cd", "ada-gs": "gs", "ada-mgs": "mgs"}[algo]
    cfg = _policy_config(config, mode, b1, b2, theta)
    hist = run_policy(g, x, profiles, cfg, rng)
    return {"kind": "policy", "history": hist}


def _evaluate(config, g, profiles, artifact, eval_rng) -> tuple[float, float]:
    """Score the final artifact with independent Monte Carlo cascades."""
    if artifact["kind"] == "seeds":
        seeds = artifact["seeds"]
        if not seeds:
            return 0.0, 0.0
        return monte_carlo_spread(g, seeds, config.eval_runs, eval_rng, config.workers)
    if artifact["kind"] == "alloc":
        alloc = artifact["alloc"]
        if not len(alloc):
            return 0.0, 0.0
        return spread_under_allocation(g, alloc, profiles, config.eval_runs, eval_rng,
                                       config.workers)
    seeds = sorted(artifact["history"].all_stage2_seeds())
    if not seeds:
        return 0.0, 0.0
    return monte_carlo_spread(g, seeds, config.eval_runs, eval_rng, config.workers)


def _summarize(config, rows) -> dict:
    cells: dict[str, dict] = {}
    for algo in config.algorithms:
        for b in config.budgets:
            sub = [r["spread"] for r in rows if r["algorithm"] == algo and r["B"] == b]
            if not sub:
                continue
            arr = np.array(sub)
            cells[f"{algo}|B={b:g}"] = {
                "algorithm": algo, "B": b, "mean_spread": float(arr.mean()),
                "stderr": float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0,
                "reps": len(arr),
            }
    return {"dataset": config.dataset_name(), "alpha": config.alpha,
            "seed": config.seed, "cells": cells}


CSV_FIELDS = ("dataset", "algorithm", "alpha", "B", "B1", "B2", "rep",
              "spread", "stderr", "wall_ms", "seed")


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: r[k] for k in CSV_FIELDS})
    return buf.getvalue()


def _write_outputs(config, out_dir, rows, report, artifacts) -> None:
    with open(os.path.join(out_dir, "results.csv"), "w") as fh:
        fh.write(rows_to_csv(rows))
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    for name, artifact in artifacts.items():
        if artifact["kind"] == "alloc" and "trace" in artifact:
            _write_alloc_json(config, os.path.join(out_dir, f"alloc-{name}.json"), artifact)
        if artifact["kind"] == "policy":
            with open(os.path.join(out_dir, f"trace-{name}.jsonl"), "w") as fh:
                fh.write(artifact["history"].to_json_lines() + "\n")


def _write_alloc_json(config, path, artifact) -> None:
    alloc: DiscountAllocation = artifact["alloc"]
    payload = {
        "allocation": {str(u): c for u, c in alloc.items()},
        "budget": alloc.budget,
        "iterations": max(0, len(artifact.get("trace", [])) - 1),
        "objective_trace": artifact.get("trace", []),
    }
    if "trace2" in artifact:
        payload["stage2_objective_trace"] = artifact["trace2"]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


# -- auxiliary commands --------------------------------------------------------


def budget_split_heuristic(g: Graph, x) -> tuple[float, float]:
    """Shares of the budget proportional to the average degrees of X and N(X)."""
    from .graph import neighborhood

    x = sorted(set(int(u) for u in x))
    nx = neighborhood(g, x)
    if not nx:
        warnings.warn("X has no neighborhood; allotting the whole budget to stage 1")
        return 1.0, 0.0
    stats = fp_statistics(g, x)
    total = stats.avg_deg_x + stats.avg_deg_nx
    return stats.avg_deg_x / total, stats.avg_deg_nx / total


def cmd_fp_check(config: ExperimentConfig, trials: int = 100) -> dict:
    """Sample X repeatedly and tabulate the degree statistics of X vs N(X)."""
    config.validate()
    g = load_dataset(config)
    rows = []
    holds = 0
    for trial in range(trials):
        x = sample_accessible(g, min(config.x_size, g.node_count), spawn(config.seed, "fp", trial))
        stats = fp_statistics(g, x)
        holds += int(stats.paradox_holds)
        rows.append({"trial": trial, "avg_deg_x": stats.avg_deg_x,
                     "avg_deg_nx": stats.avg_deg_nx})
    csv_text = "trial,avg_deg_x,avg_deg_nx\n" + "\n".join(
        f"{r['trial']},{r['avg_deg_x']:.6f},{r['avg_deg_nx']:.6f}" for r in rows) + "\n"
    report = {"trials": trials, "paradox_fraction": holds / trials, "rows": rows,
              "csv": csv_text}
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        with open(os.path.join(config.out_dir, "fp_check.csv"), "w") as fh:
            fh.write(csv_text)
    return report


def cmd_estimate(config: ExperimentConfig, input_path: str) -> dict:
    """Compare RR, Monte Carlo, and (when enumerable) exact influence."""
    config.validate()
    try:
        with open(input_path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read input file {input_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"input file {input_path} is not valid JSON: {exc}") from exc
    g = load_dataset(config)
    theta = config.theta or default_theta(g.node_count)
    label_to_id = {int(lab): i for i, lab in enumerate(g.labels)}
    profiles = assign_profiles(range(g.node_count), config.mix, spawn(config.seed, "profiles"))
    idx = build_rr_index(g, theta, spawn(config.seed, "rr"), config.workers)
    exact_ok = g.edge_count <= MAX_ORACLE_EDGES and g.node_count <= MAX_ORACLE_NODES
    inst = ExactInstance(g, profiles) if exact_ok else None
    out: dict = {"theta": theta}
    eval_rng = spawn(config.seed, "eval")
    if "seeds" in payload:
        seeds = [label_to_id[int(s)] for s in payload["seeds"]]
        out["mode"] = "seeds"
        out["rr"] = estimate_influence(idx, seeds)
        if seeds:
            mc, se = monte_carlo_spread(g, seeds, config.eval_runs, eval_rng, config.workers)
        else:
            mc, se = 0.0, 0.0
        out["mc"], out["mc_stderr"] = mc, se
        if inst is not None:
            out["exact"] = inst.exact_influence(seeds)
    elif "alloc" in payload:
        entries = {label_to_id[int(u)]: float(c) for u, c in payload["alloc"].items()}
        alloc = DiscountAllocation(entries, budget=sum(entries.values()) + 1e-9)
        out["mode"] = "alloc"
        out["rr"] = estimate_alloc_influence(idx, alloc, profiles)
        if entries:
            mc, se = spread_under_allocation(g, alloc, profiles, config.eval_runs,
                                             eval_rng, config.workers)
        else:
            mc, se = 0.0, 0.0
        out["mc"], out["mc_stderr"] = mc, se
        if inst is not None:
            out["exact"] = inst.exact_q(alloc)
    else:
        raise ConfigError("input file must contain a 'seeds' list or an 'alloc' map")
    return out
