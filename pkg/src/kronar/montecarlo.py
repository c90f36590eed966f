"""Seeded Monte Carlo comparison of estimators on random Kronecker models."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import covariance_lags
from .pipeline import METHODS, EstimationConfig, estimate
from .solver import SolverOptions
from .synth import metric_err, metric_esp, random_kgm_model, simulate, spectral_factorize

__all__ = ["MonteCarloConfig", "RunRecord", "run_one", "monte_carlo", "summarize", "write_report", "CSV_COLUMNS"]

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["run", "seed", "method", "e_sp", "err", "outer_iterations", "inner_iterations", "status", "error"]


@dataclass
class MonteCarloConfig:
    runs: int = 20
    m1: int = 4
    m2: int = 4
    n: int = 1
    N: int = 2000
    eta1: float = 0.3
    eta2: float = 0.3
    methods: tuple = ("K1", "S", "BURG")
    seed: int = 0
    workers: int = 1
    grid: int = 256
    eps: float = 1e-3
    outer_tol: float = 1e-3
    max_outer: int = 50
    burnin: int = 1000

    def __post_init__(self):
        self.methods = tuple(self.methods)
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        for eta in (self.eta1, self.eta2):
            if not 0 < eta <= 1:
                raise ValueError("eta1 and eta2 must lie in (0, 1]")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"unknown methods {bad}; expected a subset of {', '.join(METHODS)}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class RunRecord:
    run: int
    seed: int
    method: str
    e_sp: float = float("nan")
    err: float = float("nan")
    outer_iterations: int = 0
    inner_iterations: int = 0
    status: str = ""
    error: str = ""
    wall_time: float = field(default=0.0, compare=False)


def run_seed(master: int, run: int) -> int:
    """Per-run seed derived from the master seed and the run index."""
    return int(np.random.SeedSequence([master, run]).generate_state(1)[0])


def run_one(cfg: MonteCarloConfig, run: int) -> list[RunRecord]:
    """One experiment: draw a model, simulate, and score every method. Failures are recorded."""
    seed = run_seed(cfg.seed, run)
    rng = np.random.default_rng(seed)
    try:
        sigma, ks = random_kgm_model(cfg.m1, cfg.m2, cfg.n, cfg.eta1, cfg.eta2, rng)
        ar = spectral_factorize(sigma)
        lags = covariance_lags(simulate(ar, cfg.N, rng, cfg.burnin), cfg.n)
    except Exception as exc:  # a broken draw is reported, not fatal
        logger.warning("run %d: data generation failed: %s", run, exc)
        return [RunRecord(run, seed, m, status="failed", error=f"{type(exc).__name__}: {exc}") for m in cfg.methods]

    out = []
    for method in cfg.methods:
        rec = RunRecord(run, seed, method)
        t = time.perf_counter()
        try:
            ecfg = EstimationConfig(
                method, cfg.m1, cfg.m2, cfg.n, eps=cfg.eps, outer_tol=cfg.outer_tol, max_outer=cfg.max_outer,
                grid=cfg.grid, solver=SolverOptions(),
                E1=ks.E1 if method == "HARD" else None, E2=ks.E2 if method == "HARD" else None,
            )
            res = estimate(lags, ecfg)
            rec.e_sp = metric_esp(ks, res.support)
            rec.err = metric_err(res.poly, sigma)
            rec.outer_iterations = len(res.inner_iterations)
            rec.inner_iterations = int(sum(res.inner_iterations))
            rec.status = res.status
        except Exception as exc:
            logger.warning("run %d, %s failed: %s", run, method, exc)
            rec.status = "failed"
            rec.error = f"{type(exc).__name__}: {exc}"
        rec.wall_time = time.perf_counter() - t
        out.append(rec)
    return out


def _run_star(args):
    return run_one(*args)


def monte_carlo(cfg: MonteCarloConfig) -> list[RunRecord]:
    """All runs, ordered by (run, method); the result does not depend on ``workers``."""
    jobs = [(cfg, r) for r in range(cfg.runs)]
    if cfg.workers == 1:
        chunks = [_run_star(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            chunks = list(ex.map(_run_star, jobs))
    return [rec for chunk in chunks for rec in chunk]


def summarize(records: list[RunRecord], cfg: MonteCarloConfig) -> dict:
    """Per-method medians and quartiles of e_SP and err over successful runs."""
    methods = {}
    for method in cfg.methods:
        ok = [r for r in records if r.method == method and r.status != "failed"]
        entry = {"runs": len(ok), "failed": sum(r.method == method and r.status == "failed" for r in records)}
        for key in ("e_sp", "err"):
            vals = np.array([getattr(r, key) for r in ok])
            if vals.size:
                q1, med, q3 = np.percentile(vals, [25, 50, 75])
                entry[key] = {"median": float(med), "q1": float(q1), "q3": float(q3)}
            else:
                entry[key] = None
        methods[method] = entry
    conf = asdict(cfg)
    conf["methods"] = list(cfg.methods)
    conf.pop("workers")
    return {"version": 1, "config": conf, "methods": methods}


def write_report(records: list[RunRecord], cfg: MonteCarloConfig, out_dir) -> dict:
    """Write runs.csv, timings.csv and summary.json into ``out_dir``; returns the summary.

    Wall times live in timings.csv only, so runs.csv and summary.json are reproducible.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "runs.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([r.run, r.seed, r.method, repr(r.e_sp), repr(r.err), r.outer_iterations,
                        r.inner_iterations, r.status, r.error])
    with (out / "timings.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "method", "wall_time"])
        for r in records:
            w.writerow([r.run, r.method, f"{r.wall_time:.4f}"])
    summary = summarize(records, cfg)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
