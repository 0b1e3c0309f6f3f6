"""Batch command-line front end.

Subcommands: simulate | fit | analyze | forecast | diagnose, each driven by a
single JSON run configuration (defaults are materialised and written next to
the outputs, so runs are self-describing). Every command is deterministic
given (config, seed). Exit codes: 0 success, 2 usage, 3 schema, 4 ingestion,
5 numerical failure.
"""

import argparse
import copy
import json
import os
import sys

import numpy as np

from . import analytics, dataio
from .chain import forecast as chain_forecast
from .chain import run_chain
from .errors import (
    GammashotError,
    IngestionError,
    SchemaError,
    UsageError,
)
from .inference import FitData, InferenceModel, Priors, SmcConfig
from .latent import Grid, MargParams, Rect, ScaleRegime, substream
from .observe import CovariateModel, ModelSpec, kappa_path, simulate_series

EXIT_USAGE = 2
EXIT_SCHEMA = 3
EXIT_INGESTION = 4
EXIT_NUMERICAL = 5

DEFAULT_CONFIG = {
    "window": {"x0": 0.0, "x1": 10.0, "y0": 0.0, "y1": 10.0},
    "grid": {"nx": 10, "ny": 10},
    "time": {"T": 24, "start_year": 2018, "start_month": 1},
    "covariates": {
        "kind": "dummy",
        "dry_months": [8, 9, 10, 11, 12],
        "frequencies": [0.086, 0.168, 0.254, 0.336],
    },
    "scale_kind": "constant",
    "params": {
        "alpha": 0.3,
        "beta": 1.2,
        "scales": [0.4],
        "phi": 0.25,
        "eta": [0.5, 0.02, 0.8],
    },
    "priors": {
        "a_alpha": 2.0,
        "b_alpha": 2.0,
        "a_beta": 2.0,
        "b_beta": 2.0,
        "a_gamma": 2.0,
        "b_gamma": 2.0,
        "a_phi": 2.0,
        "b_phi": 8.0,
        "a_c": 2.0,
        "b_c": 5.0,
        "sigma2_c": 0.25,
        "a_r": 2.0,
        "b_r": 4.0,
        "mu_eta": None,
        "sigma_eta": 4.0,
    },
    "smc": {"particles": 16, "block_size": 8},
    "chain": {
        "iterations": 20000,
        "burn_in": 10000,
        "thin": 10,
        "store_latent": True,
        "adapt": True,
    },
    "confidence_range": [80.0, 100.0],
    "analyze": {"times": [1], "horizons": [0, 1], "field_nx": 15, "field_ny": 15, "centers": None},
    "forecast": {"horizon": 6},
    "seed": 1,
    "io": {
        "data": None,
        "data_kind": "points",
        "archive": None,
        "fitted": None,
        "holdout": None,
        "out_dir": ".",
    },
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path, out_dir=None, seed=None):
    try:
        with open(path) as fh:
            user = json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config is not valid JSON: {exc}") from exc
    cfg = _merge(DEFAULT_CONFIG, user)
    if out_dir is not None:
        cfg["io"]["out_dir"] = out_dir
    if seed is not None:
        cfg["seed"] = int(seed)
    if cfg["seed"] is None:
        raise UsageError("a seed is mandatory (reproducibility contract)")
    return cfg


def _window(cfg):
    w = cfg["window"]
    return Rect(w["x0"], w["x1"], w["y0"], w["y1"])


def _covariates(cfg):
    cov = cfg["covariates"]
    T = cfg["time"]["T"]
    if cov["kind"] == "dummy":
        return CovariateModel.dummy(
            T, dry_months=tuple(cov["dry_months"]), start_month=cfg["time"]["start_month"]
        )
    if cov["kind"] == "harmonic":
        return CovariateModel.harmonic(T, cov["frequencies"])
    raise UsageError(f"unknown covariate kind {cov['kind']!r}")


def _scale_regime(cfg, values=None):
    vals = values if values is not None else cfg["params"]["scales"]
    kind = cfg["scale_kind"]
    if kind == "constant":
        return ScaleRegime.constant(vals[0] if np.ndim(vals) else vals)
    if kind == "monthly":
        return ScaleRegime.monthly(vals, start_month=cfg["time"]["start_month"])
    return ScaleRegime.time_varying(vals)


def _grid(cfg, masses):
    g = cfg["grid"]
    return Grid.regular(_window(cfg), g["nx"], g["ny"], masses=masses)


def _sim_grid(cfg):
    alpha = cfg["params"]["alpha"]
    masses = np.asarray(alpha, dtype=float) if np.ndim(alpha) else float(alpha)
    return _grid(cfg, masses)


def _priors(cfg, m):
    p = cfg["priors"]
    mu = p["mu_eta"]
    mu = np.zeros(m) if mu is None else np.asarray(mu, dtype=float)
    sig = p["sigma_eta"]
    sigma = np.eye(m) * float(sig) if np.ndim(sig) == 0 else np.asarray(sig, dtype=float)
    return Priors(
        a_alpha=p["a_alpha"],
        b_alpha=p["b_alpha"],
        a_beta=p["a_beta"],
        b_beta=p["b_beta"],
        a_gamma=p["a_gamma"],
        b_gamma=p["b_gamma"],
        a_phi=p["a_phi"],
        b_phi=p["b_phi"],
        a_c=p.get("a_c"),
        b_c=p.get("b_c"),
        sigma2_c=p.get("sigma2_c"),
        a_r=p.get("a_r"),
        b_r=p.get("b_r"),
        mu_eta=mu,
        Sigma_eta=sigma,
    )


def _out_dir(cfg):
    out = cfg["io"]["out_dir"]
    os.makedirs(out, exist_ok=True)
    return out


def _write_resolved(cfg, out):
    dataio.write_json(os.path.join(out, "run_config_resolved.json"), cfg)


def _load_series(cfg):
    path = cfg["io"]["data"]
    if not path:
        raise UsageError("this command needs io.data in the config")
    T = cfg["time"]["T"]
    if cfg["io"]["data_kind"] == "events":
        series, report = dataio.ingest_events(
            path,
            _window(cfg),
            T,
            start_year=cfg["time"]["start_year"],
            start_month=cfg["time"]["start_month"],
            confidence_range=tuple(cfg["confidence_range"]),
        )
        return series, report
    return dataio.read_points_csv(path, T=T), None


def cmd_simulate(cfg):
    out = _out_dir(cfg)
    grid = _sim_grid(cfg)
    spec = ModelSpec(
        beta=cfg["params"]["beta"],
        scales=_scale_regime(cfg),
        phi=cfg["params"]["phi"],
        covariates=_covariates(cfg),
        eta=np.asarray(cfg["params"]["eta"], dtype=float),
    )
    rng = substream(cfg["seed"], 1)
    path, series = simulate_series(grid, spec, cfg["time"]["T"], rng)
    dataio.write_latent_csv(os.path.join(out, "latent.csv"), path)
    dataio.write_points_csv(os.path.join(out, "points.csv"), series)
    _write_resolved(cfg, out)
    print(f"simulate: wrote latent.csv and points.csv ({int(series.counts.sum())} events)")
    return 0


def cmd_fit(cfg):
    out = _out_dir(cfg)
    series, report = _load_series(cfg)
    grid = _grid(cfg, masses=1.0)
    cov = _covariates(cfg)
    model = InferenceModel(
        grid=grid,
        T=cfg["time"]["T"],
        scale_kind=cfg["scale_kind"],
        start_month=cfg["time"]["start_month"],
        covariates=cov,
    )
    priors = _priors(cfg, cov.m)
    smc = SmcConfig.default(
        grid.n_cells,
        n_particles=cfg["smc"]["particles"],
        block_size=cfg["smc"]["block_size"],
    )
    ch = cfg["chain"]
    records, summary = run_chain(
        FitData(series, grid),
        model,
        priors,
        smc,
        seed=cfg["seed"],
        iterations=ch["iterations"],
        burn_in=ch["burn_in"],
        thin=ch["thin"],
        store_latent=ch["store_latent"],
        adapt=ch["adapt"],
    )
    if report is not None:
        summary["ingestion"] = report
    dataio.write_archive(os.path.join(out, "archive.ndjson"), records)
    dataio.write_json(os.path.join(out, "summary.json"), summary)
    _write_resolved(cfg, out)
    print(f"fit: {len(records)} draws archived")
    return 0


def _field_points(cfg):
    w = _window(cfg)
    nx, ny = cfg["analyze"]["field_nx"], cfg["analyze"]["field_ny"]
    xs = w.x0 + (np.arange(nx) + 0.5) * (w.x1 - w.x0) / nx
    ys = w.y0 + (np.arange(ny) + 0.5) * (w.y1 - w.y0) / ny
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def cmd_analyze(cfg):
    out = _out_dir(cfg)
    pts = _field_points(cfg)
    times = cfg["analyze"]["times"]
    horizons = cfg["analyze"]["horizons"]
    archive_path = cfg["io"]["archive"]
    T = cfg["time"]["T"]
    cov = _covariates(cfg)
    rows_field = []
    if archive_path:
        records = dataio.read_archive(archive_path)
        if not records or "latent" not in records[0]:
            raise UsageError("analyze needs an archive with stored latent paths")
        grid = _grid(cfg, masses=1.0)
        from . import backend

        logk = backend.gauss_log_kernel  # local alias, hot loop below
        for t in times:
            vals = []
            for rec in records:
                p = rec["parameters"]
                w_t = np.asarray(rec["latent"][t - 1])
                kap = float(np.exp(cov.design[t - 1] @ np.asarray(p["eta"])))
                k = np.exp(logk(pts, grid.atoms, p["phi"]))
                vals.append(kap * k @ w_t)
            vals = np.asarray(vals)
            mean = vals.mean(axis=0)
            sd = vals.std(axis=0, ddof=1) if vals.shape[0] > 1 else np.zeros_like(mean)
            cv = np.where(mean > 0.0, sd / np.where(mean > 0.0, mean, 1.0), 0.0)
            for i in range(pts.shape[0]):
                rows_field.append((t, float(pts[i, 0]), float(pts[i, 1]), float(mean[i]), float(cv[i])))
        alpha = np.mean([rec["parameters"]["alpha"] for rec in records], axis=0)
        beta = float(np.mean([rec["parameters"]["beta"] for rec in records]))
        scales = np.mean([rec["parameters"]["scales"] for rec in records], axis=0)
        phi = float(np.mean([rec["parameters"]["phi"] for rec in records]))
        eta = np.mean([rec["parameters"]["eta"] for rec in records], axis=0)
    else:
        grid = _sim_grid(cfg)
        alpha = grid.masses
        beta = float(cfg["params"]["beta"])
        scales = np.asarray(cfg["params"]["scales"], dtype=float)
        phi = float(cfg["params"]["phi"])
        eta = np.asarray(cfg["params"]["eta"], dtype=float)
        params = MargParams(grid=grid, beta=beta, scales=_scale_regime(cfg, scales), T=T)
        obs = analytics.ObsModel(phi=phi, kappas=kappa_path(cov, eta, T), w1_law="stationary")
        for t in times:
            d1 = analytics.intensity_d1(pts, t, params, obs)
            for i in range(pts.shape[0]):
                rows_field.append((t, float(pts[i, 0]), float(pts[i, 1]), float(d1[i]), 0.0))
    dataio.write_table_csv(
        os.path.join(out, "intensity_field.csv"),
        "intensity field at cell centers (degrees); mean = posterior mean (archive mode) or stationary closed form; cv = posterior coefficient of variation (0 in closed-form mode)",
        ["t", "x", "y", "mean", "cv"],
        rows_field,
    )

    rows_pc = []
    stationary = cfg["scale_kind"] == "constant" and beta * float(scales[0]) < 1.0
    if stationary:
        grid_pc = _grid(cfg, masses=np.asarray(alpha, dtype=float) if np.ndim(alpha) else float(alpha))
        params = MargParams(grid=grid_pc, beta=beta, scales=_scale_regime(cfg, scales), T=T)
        obs = analytics.ObsModel(phi=phi, kappas=kappa_path(cov, eta, T), w1_law="stationary")
        centers = cfg["analyze"]["centers"]
        if centers is None:
            w = _window(cfg)
            centers = [[0.5 * (w.x0 + w.x1), 0.5 * (w.y0 + w.y1)]]
        for t in times:
            for h in horizons:
                if t + h > T:
                    continue
                for cx, cy in centers:
                    r_vals = [
                        analytics.pair_correlation(
                            np.array([[cx, cy]]), pts[i : i + 1], t, h, params, obs
                        )
                        for i in range(pts.shape[0])
                    ]
                    for i in range(pts.shape[0]):
                        rows_pc.append(
                            (t, h, float(cx), float(cy), float(pts[i, 0]), float(pts[i, 1]), float(r_vals[i]))
                        )
    dataio.write_table_csv(
        os.path.join(out, "pair_correlation.csv"),
        "cross-pair correlation R(t, t+h) between a center and field points (cell centers, degrees)",
        ["t", "h", "center_x", "center_y", "x", "y", "R"],
        rows_pc,
    )
    _write_resolved(cfg, out)
    print(f"analyze: wrote intensity_field.csv ({len(rows_field)} rows) and pair_correlation.csv ({len(rows_pc)} rows)")
    return 0


def cmd_forecast(cfg):
    out = _out_dir(cfg)
    archive_path = cfg["io"]["archive"]
    if not archive_path:
        raise UsageError("forecast needs io.archive in the config")
    records = dataio.read_archive(archive_path)
    grid = _grid(cfg, masses=1.0)
    cov = _covariates(cfg)
    model = InferenceModel(
        grid=grid,
        T=cfg["time"]["T"],
        scale_kind=cfg["scale_kind"],
        start_month=cfg["time"]["start_month"],
        covariates=cov,
    )
    holdout = None
    if cfg["io"]["holdout"]:
        held = dataio.read_points_csv(cfg["io"]["holdout"])
        holdout = held.counts
    priors = _priors(cfg, cov.m)
    result = chain_forecast(
        records,
        model,
        cfg["forecast"]["horizon"],
        seed=cfg["seed"],
        holdout_counts=holdout,
        priors=priors,
    )
    rows = [
        (
            h,
            float(result["mean"][i]),
            float(result["q025"][i]),
            float(result["q500"][i]),
            float(result["q975"][i]),
        )
        for i, h in enumerate(result["horizons"])
    ]
    dataio.write_table_csv(
        os.path.join(out, "forecast.csv"),
        "posterior predictive window counts per horizon step",
        ["h", "mean", "q025", "q500", "q975"],
        rows,
    )
    dataio.write_json(os.path.join(out, "forecast.json"), result)
    _write_resolved(cfg, out)
    print(f"forecast: {len(rows)} horizon steps")
    return 0


def cmd_diagnose(cfg):
    out = _out_dir(cfg)
    series, _ = _load_series(cfg)
    counts = series.counts.astype(float)
    iqr = {}
    if cfg["io"]["fitted"]:
        fitted = _read_fitted(cfg["io"]["fitted"], cfg["time"]["T"])
    elif cfg["io"]["archive"]:
        records = dataio.read_archive(cfg["io"]["archive"])
        lam = np.asarray([rec["lambda_total"] for rec in records])
        fitted = lam.mean(axis=0)
        for t in range(lam.shape[1]):
            try:
                iqr[str(t + 1)] = analytics.iqr_norm(lam[:, t])
            except GammashotError:
                iqr[str(t + 1)] = None
    else:
        raise UsageError("diagnose needs io.fitted or io.archive in the config")
    mse, mae = analytics.fit_diagnostics(counts, fitted)
    rows = [
        (t + 1, float(counts[t]), float(fitted[t]), float(abs(fitted[t] - counts[t])))
        for t in range(len(counts))
    ]
    dataio.write_table_csv(
        os.path.join(out, "diagnostics.csv"),
        "observed monthly counts vs fitted total intensity",
        ["t", "observed", "fitted", "abs_error"],
        rows,
    )
    dataio.write_json(
        os.path.join(out, "diagnostics.json"),
        {"mse": mse, "mae": mae, "iqr_norm": iqr},
    )
    _write_resolved(cfg, out)
    print(f"diagnose: MSE={mse:.6g} MAE={mae:.6g}")
    return 0


def _read_fitted(path, T):
    import csv as _csv

    vals = {}
    with open(path, newline="") as fh:
        for rec in _csv.DictReader(line for line in fh if not line.startswith("#")):
            vals[int(rec["t"])] = float(rec["value"])
    if not vals:
        raise SchemaError(f"{path}: no fitted values found (need columns t,value)")
    return np.array([vals.get(t, 0.0) for t in range(1, T + 1)])


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "analyze": cmd_analyze,
    "forecast": cmd_forecast,
    "diagnose": cmd_diagnose,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gammashot",
        description="Spatiotemporal gamma shot-noise Cox process toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides io.out_dir)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, out_dir=args.out, seed=args.seed)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    except (GammashotError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
