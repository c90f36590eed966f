"""Command-line entry point: simulate, estimate, montecarlo, preprocess, edge-spectrum, verify.

Exit codes: 0 success, 2 configuration or validation error, 3 data or parse error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from .data import CovLags, DataError, aggregate, covariance_lags, load_series, normalize_detrend, save_series, stack
from .montecarlo import MonteCarloConfig, monte_carlo, write_report
from .objective import HyperParams, NotPositiveDefinite, SparseWeights, WhittleLikelihood, sparse_group_index
from .pipeline import EstimationConfig, EstimationError, edge_residual_spectrum, estimate, surrogate_value
from .solver import SolverOptions
from .spectral import FreqGrid, PseudoPoly, build_group_index, evaluate, invert_field
from .synth import FactorizationError, random_kgm_model, simulate, spectral_factorize

__all__ = ["main", "ConfigError", "load_config", "poly_to_json", "poly_from_json", "result_to_json"]

logger = logging.getLogger("kronar")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

FULL_PRESET = {"m1": 6, "m2": 6, "n": 2, "N": 1000, "eta1": 0.3, "eta2": 0.3, "runs": 200}
POLLUTION_PRESET = {"window": 2, "unit_variance": True, "remove_mean": True, "linear_detrend": True, "m1": 12}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config handling

SIM_KEYS = {"m1": 3, "m2": 3, "n": 1, "N": 4000, "eta1": 0.3, "eta2": 0.3, "burnin": 1000,
            "amplitude": None, "margin": 0.5, "seed": 0, "grid": 256}
EST_KEYS = {"input": None, "model": None, "method": "K1", "m1": None, "m2": None, "n": None,
            "eps": 1e-3, "outer_tol": 1e-3, "max_outer": 50, "eps_tilde": 1e-4, "threshold": "relative",
            "delta": 1e-4, "tau": None, "grid": 256, "max_iter": 5000, "tol": 1e-7, "spectra": False,
            "E1": None, "E2": None, "seed": 0}
MC_KEYS = {f.name: f.default for f in fields(MonteCarloConfig)}
MC_KEYS["preset"] = None
PRE_KEYS = {"input": None, "preset": None, "window": 1, "unit_variance": False, "remove_mean": False,
            "linear_detrend": False, "m1": 1, "columns": None, "delimiter": ","}
EDGE_KEYS = {"result": None, "grouping": "modules", "pair": None, "grid": 256}
VERIFY_KEYS = {"result": None}

COMMAND_KEYS = {"simulate": SIM_KEYS, "estimate": EST_KEYS, "montecarlo": MC_KEYS,
                "preprocess": PRE_KEYS, "edge-spectrum": EDGE_KEYS, "verify": VERIFY_KEYS}


def load_config(path) -> dict:
    """Read a JSON or YAML mapping."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid JSON/YAML: {exc}") from None
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return cfg


def _merge(command: str, file_cfg: dict, overrides: dict, full: bool = False) -> dict:
    """Defaults, then a named preset, then the config file, then command-line flags."""
    allowed = COMMAND_KEYS[command]
    unknown = sorted(set(file_cfg) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    flags = {k: v for k, v in overrides.items() if v is not None and k in allowed}
    preset = flags.get("preset", file_cfg.get("preset"))
    out = dict(allowed)
    if command == "montecarlo" and (full or preset is not None):
        if preset not in (None, "full"):
            raise ConfigError(f"unknown preset {preset!r}")
        if not full:
            raise ConfigError("the full-size preset needs the --full flag")
        out.update(FULL_PRESET)
    elif command == "preprocess" and preset is not None:
        if preset != "pollution":
            raise ConfigError(f"unknown preset {preset!r}")
        out.update(POLLUTION_PRESET)
    out.update(file_cfg)
    out.update(flags)
    out.pop("preset", None)
    return out


# ---------------------------------------------------------------- JSON helpers

def poly_to_json(poly: PseudoPoly) -> dict:
    return {"n": poly.n, "m": poly.m, "coeffs": poly.coeffs.tolist()}


def poly_from_json(obj) -> PseudoPoly:
    try:
        return PseudoPoly(np.asarray(obj["coeffs"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed pseudo-polynomial record: {exc}") from None


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if obj.get("version") != SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported schema version {obj.get('version')!r}")
    return obj


def result_to_json(res, cfg: EstimationConfig, lags: CovLags) -> dict:
    """Deterministic record of an estimate; wall-clock timings are deliberately left out."""
    out = {
        "version": SCHEMA_VERSION,
        "method": res.method,
        "m1": cfg.m1, "m2": cfg.m2, "n": cfg.n, "grid": cfg.grid, "eps": cfg.eps, "N": lags.N,
        "sigma": poly_to_json(res.poly),
        "lags": lags.R.tolist(),
        "support": np.asarray(res.support).tolist(),
        "E1": None if res.E1 is None else np.asarray(res.E1).tolist(),
        "E2": None if res.E2 is None else np.asarray(res.E2).tolist(),
        "defect": res.defect,
        "trace": [float(v) for v in res.trace],
        "inner_iterations": [int(v) for v in res.inner_iterations],
        "status": res.status,
        "ell": float(res.ell),
        "lambda": None, "gamma": None, "omega": None,
    }
    if res.hyper is not None:
        gi = build_group_index(cfg.m1, cfg.m2, cfg.n)
        L, G = res.hyper.matrices(gi)
        out["lambda"], out["gamma"] = L.tolist(), G.tolist()
    if res.omega is not None:
        out["omega"] = res.omega.matrix(cfg.m).tolist()
    return out


# ---------------------------------------------------------------- commands

def cmd_simulate(c: dict, out: Path) -> int:
    rng = np.random.default_rng(int(c["seed"]))
    sigma, ks = random_kgm_model(int(c["m1"]), int(c["m2"]), int(c["n"]), float(c["eta1"]), float(c["eta2"]),
                                 rng, amplitude=c["amplitude"], margin=float(c["margin"]), grid=FreqGrid(int(c["grid"])))
    ar = spectral_factorize(sigma, grid=FreqGrid(int(c["grid"])))
    series = simulate(ar, int(c["N"]), rng, int(c["burnin"]))
    out.mkdir(parents=True, exist_ok=True)
    model = {
        "version": SCHEMA_VERSION, "seed": int(c["seed"]),
        "m1": int(c["m1"]), "m2": int(c["m2"]), "n": int(c["n"]),
        "eta1": float(c["eta1"]), "eta2": float(c["eta2"]),
        "sigma": poly_to_json(sigma), "E1": ks.E1.tolist(), "E2": ks.E2.tolist(), "A": ar.A.tolist(),
    }
    _dump(model, out / "model.json")
    save_series(series, out / "series.csv")
    logger.info("wrote %s and %s", out / "model.json", out / "series.csv")
    return EXIT_OK


def cmd_estimate(c: dict, out: Path) -> int:
    if not c["input"]:
        raise ConfigError("estimate needs an input series (--input or 'input' in the config)")
    model = _read_json(c["model"]) if c["model"] else None
    for key in ("m1", "m2", "n"):
        if c[key] is None and model is not None:
            c[key] = model[key]
    if c["m1"] is None or c["m2"] is None or c["n"] is None:
        raise ConfigError("m1, m2 and n are required (in the config or via --model)")
    E1, E2 = c["E1"], c["E2"]
    if c["method"] == "HARD" and E1 is None and model is not None:
        E1, E2 = model["E1"], model["E2"]
    cfg = EstimationConfig(
        c["method"], int(c["m1"]), int(c["m2"]), int(c["n"]), eps=float(c["eps"]), outer_tol=float(c["outer_tol"]),
        max_outer=int(c["max_outer"]), eps_tilde=float(c["eps_tilde"]), threshold=c["threshold"],
        delta=float(c["delta"]), tau=c["tau"], grid=int(c["grid"]),
        solver=SolverOptions(max_iter=int(c["max_iter"]), tol=float(c["tol"])),
        E1=None if E1 is None else np.asarray(E1), E2=None if E2 is None else np.asarray(E2),
    )
    series = load_series(c["input"])
    if series.m != cfg.m:
        raise ConfigError(f"series has {series.m} channels but m1*m2 = {cfg.m}")
    lags = covariance_lags(series, cfg.n)
    res = estimate(lags, cfg)
    out.mkdir(parents=True, exist_ok=True)
    _dump(result_to_json(res, cfg, lags), out / "result.json")
    if c["spectra"]:
        grid = FreqGrid(cfg.grid)
        phi = invert_field(evaluate(res.poly, grid)).values
        with (out / "spectra.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta"] + [f"phi_{i}_{i}" for i in range(cfg.m)])
            for th, P in zip(grid.theta, phi):
                w.writerow([repr(float(th))] + [repr(float(v)) for v in np.diag(P).real])
    if res.status != "converged":
        logger.warning("estimate finished with status %s", res.status)
    logger.info("%s: %d outer iterations, defect %.3f", res.method, len(res.inner_iterations), res.defect)
    return EXIT_OK


def cmd_montecarlo(c: dict, out: Path, full: bool) -> int:
    if c["runs"] > 50 and not full:
        raise ConfigError("more than 50 runs needs the --full flag")
    mc = MonteCarloConfig(**c)
    records = monte_carlo(mc)
    summary = write_report(records, mc, out)
    for method, s in summary["methods"].items():
        if s["e_sp"] is not None:
            logger.info("%-4s median e_SP %.4f  median err %.5f  (%d runs, %d failed)",
                        method, s["e_sp"]["median"], s["err"]["median"], s["runs"], s["failed"])
    return EXIT_OK


def cmd_preprocess(c: dict, out: Path) -> int:
    if not c["input"]:
        raise ConfigError("preprocess needs an input series")
    s = load_series(c["input"], delimiter=c["delimiter"], columns=c["columns"])
    if int(c["window"]) > 1:
        s = aggregate(s, int(c["window"]))
    if c["unit_variance"] or c["remove_mean"] or c["linear_detrend"]:
        s = normalize_detrend(s, bool(c["unit_variance"]), bool(c["remove_mean"]), bool(c["linear_detrend"]))
    if int(c["m1"]) > 1:
        s = stack(s, int(c["m1"]))
    out.mkdir(parents=True, exist_ok=True)
    save_series(s, out / "series.csv")
    logger.info("wrote %d x %d series", s.N, s.m)
    return EXIT_OK


def cmd_edge_spectrum(c: dict, out: Path) -> int:
    if not c["result"] or c["pair"] is None:
        raise ConfigError("edge-spectrum needs a result file and a pair")
    r = _read_json(c["result"])
    pair = c["pair"]
    if isinstance(pair, str):
        pair = [int(p) for p in pair.split(",")]
    grid = FreqGrid(int(c["grid"]))
    curve = edge_residual_spectrum(poly_from_json(r["sigma"]), r["m1"], r["m2"], c["grouping"], pair, grid)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "curve.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "norm"])
        for th, v in zip(grid.theta, curve):
            w.writerow([repr(float(th)), repr(float(v))])
    return EXIT_OK


def verify_result(r: dict) -> tuple[float, float]:
    """Recompute the final surrogate value from a stored result; returns (recomputed, stored)."""
    method = r["method"]
    if method not in ("K1", "K2", "P1", "P2", "S"):
        raise ConfigError(f"method {method} has no surrogate to verify")
    m1, m2, n = r["m1"], r["m2"], r["n"]
    lags = CovLags(np.asarray(r["lags"], dtype=float), int(r["N"]))
    poly = poly_from_json(r["sigma"])
    ell = WhittleLikelihood(lags, FreqGrid(r["grid"])).value(poly.coeffs)
    if not np.isfinite(ell):
        raise NotPositiveDefinite("stored estimate is not positive definite on the grid")
    if method == "S":
        gi = sparse_group_index(m1 * m2, n)
        W = np.asarray(r["omega"])
        hyper = SparseWeights(np.array([W[a, b] for a in range(m1 * m2) for b in range(a + 1)]))
    else:
        gi = build_group_index(m1, m2, n)
        hyper = HyperParams.from_matrices(gi, r["lambda"], r["gamma"])
    return surrogate_value(method, ell, poly, gi, hyper, r["eps"]), r["trace"][-1]


def cmd_verify(c: dict, out: Path) -> int:
    if not c["result"]:
        raise ConfigError("verify needs a result file")
    r = _read_json(c["result"])
    val, stored = verify_result(r)
    ok = abs(val - stored) <= 1e-8 * max(1.0, abs(stored))
    print(f"recomputed {float(val)!r} stored {float(stored)!r} {'OK' if ok else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML file of key-value settings")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--grid", type=int, help="frequency grid size (power of two)")
    common.add_argument("--verbose", "-v", action="count", default=0)
    dims = argparse.ArgumentParser(add_help=False)
    dims.add_argument("--m1", type=int)
    dims.add_argument("--m2", type=int)
    dims.add_argument("--n", type=int)

    p = argparse.ArgumentParser(prog="kronar", description="Kronecker graphical models for AR processes")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common, dims], help="draw a random model and simulate a series")
    e = sub.add_parser("estimate", parents=[common, dims], help="estimate Sigma and its Kronecker support")
    e.add_argument("--method")
    e.add_argument("--input")
    e.add_argument("--model", help="model.json providing m1, m2, n (and supports for HARD)")
    mc = sub.add_parser("montecarlo", aliases=["monte-carlo"], parents=[common, dims], help="seeded method comparison")
    mc.add_argument("--method", help="comma-separated list of methods")
    mc.add_argument("--runs", type=int)
    mc.add_argument("--workers", type=int)
    mc.add_argument("--full", action="store_true", help="unlock the full-size preset")
    pp = sub.add_parser("preprocess", parents=[common], help="aggregate, normalize/detrend and stack a series")
    pp.add_argument("--input")
    pp.add_argument("--preset")
    es = sub.add_parser("edge-spectrum", parents=[common], help="residual spectrum norm of a module or node pair")
    es.add_argument("--result")
    es.add_argument("--grouping", choices=["modules", "nodes"])
    es.add_argument("--pair", help="two zero-based indices, e.g. 0,2")
    v = sub.add_parser("verify", parents=[common], help="recompute the surrogate value stored in result.json")
    v.add_argument("--result")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    command = "montecarlo" if args.command == "monte-carlo" else args.command
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logger.setLevel(level)

    try:
        file_cfg = load_config(args.config) if args.config else {}
        overrides = {k: v for k, v in vars(args).items() if k not in ("config", "out", "verbose", "command", "full")}
        if command == "montecarlo" and overrides.get("method"):
            overrides["methods"] = tuple(overrides.pop("method").split(","))
        c = _merge(command, file_cfg, overrides, getattr(args, "full", False))
        out = Path(args.out)
        if command == "simulate":
            return cmd_simulate(c, out)
        if command == "estimate":
            return cmd_estimate(c, out)
        if command == "montecarlo":
            return cmd_montecarlo(c, out, args.full)
        if command == "preprocess":
            return cmd_preprocess(c, out)
        if command == "edge-spectrum":
            return cmd_edge_spectrum(c, out)
        return cmd_verify(c, out)
    except DataError as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except (NotPositiveDefinite, EstimationError, FactorizationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
