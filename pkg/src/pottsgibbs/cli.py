"""Batch front end: simulate, fit, summarize, gridsearch, render.

All subcommands are driven by JSON config files and echo their effective
configuration into the output directory, so every artifact can be reproduced
from its own outputs.  Exit codes: 0 success, 1 numerical failure, 2 usage
error (bad arguments, missing files).
"""

import argparse
import csv
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import engine, simulate, summary
from .regression import Dataset, NumericalError


def _load_json(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing config file: {path}")
    with open(path) as fh:
        return json.load(fh)


def cmd_simulate(args) -> int:
    cfg = _load_json(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    scenario, train, test = simulate.make_scenario(
        cfg.get("scenario", "scenario1"), seed,
        n_train=int(cfg.get("n_train", 300)),
        n_test=int(cfg.get("n_test", 100)),
        rho=float(cfg.get("rho", 0.3)),
        sigma2=float(cfg.get("sigma2", 1.0)),
        intercept=float(cfg.get("intercept", 0.5)),
        height=int(cfg.get("height", 10)),
        width=int(cfg.get("width", 10)))
    simulate.save_dataset(args.out, scenario, train, test)
    if not args.quiet:
        print(f"wrote {scenario.name} (n={train.n}, p={train.p}, "
              f"true M={scenario.true_m}) to {args.out}")
    return 0


def cmd_fit(args) -> int:
    _scenario, train, _test = simulate.load_dataset(args.data)
    cfg_dict = _load_json(args.config)
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    if args.chains is not None:
        cfg_dict["chains"] = args.chains
    config = engine.config_from_dict(cfg_dict)
    fit = engine.run(train, config)
    fit.save(args.out)
    if not args.quiet:
        m_trace = fit.diagnostics["M"]
        print(f"retained {fit.n_draws} draws; posterior mean M = "
              f"{np.mean(m_trace):.3f}; fit written to {args.out}")
    return 0


def cmd_summarize(args) -> int:
    scenario, train, test = simulate.load_dataset(args.data)
    draws, mu, _sigma2, beta, echo = engine.load_fit(args.fit)
    hyper = engine.config_from_dict(echo).hyper
    report = summary.metrics(draws, mu, beta, scenario, test, train, hyper)
    out = Path(args.out if args.out else args.fit)
    report.save(out)
    if not args.quiet:
        for name, (mean, sd) in report.summary.items():
            print(f"{name}: {mean:.4f} ({sd:.4f})  at minVI: "
                  f"{report.point.get(name, float('nan')):.4f}")
    return 0


def _grid_cells(grid: dict):
    models = grid.get("models", [{"variant": "DP", "alpha": 1.0}])
    upsilons = grid.get("upsilon", [1.0])
    kappas = grid.get("kappa", [0.5])
    taus = grid.get("tau", [1.0])
    cells = list(itertools.product(upsilons, kappas, taus, models))
    if not cells:
        raise ValueError("empty grid")
    return cells


def _run_cell(payload):
    (data_dir, upsilon, kappa, tau, model_dict, base) = payload
    _scenario, train, _test = simulate.load_dataset(data_dir)
    n_val = max(1, train.n // 5)
    fit_data = Dataset(train.y[:-n_val], train.W[:-n_val],
                       train.X[:-n_val], train.lattice)
    cfg_dict = dict(base)
    cfg_dict.update({"upsilon": upsilon, "kappa": kappa, "tau": tau,
                     "model": model_dict})
    config = engine.config_from_dict(cfg_dict)
    fit = engine.run(fit_data, config)
    mu_bar = fit.mu_draws.mean(axis=0)
    pred = (train.W[-n_val:] @ mu_bar
            + train.X[-n_val:] @ fit.beta_image_mean)
    mspe = float(np.mean((train.y[-n_val:] - pred) ** 2))
    return (upsilon, kappa, tau, json.dumps(model_dict, sort_keys=True), mspe)


def cmd_gridsearch(args) -> int:
    grid = _load_json(args.grid)
    cells = _grid_cells(grid)
    base = {k: grid[k] for k in
            ("iterations", "burn_in", "thin", "seed", "init", "hyper", "h")
            if k in grid}
    base.setdefault("iterations", 600)
    base.setdefault("burn_in", 300)
    base.setdefault("thin", 1)
    if args.seed is not None:
        base["seed"] = args.seed
    payloads = [(args.data, u, k, t, m, base) for (u, k, t, m) in cells]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_run_cell, payloads))
    else:
        rows = [_run_cell(pl) for pl in payloads]
    rows.sort(key=lambda r: r[-1])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "grid.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "upsilon", "kappa", "tau", "model",
                         "mspe_val"])
        for rank, (u, k, t, m, mspe) in enumerate(rows, start=1):
            writer.writerow([rank, f"{u:.17g}", f"{k:.17g}", f"{t:.17g}",
                             m, f"{mspe:.17g}"])
    if not args.quiet:
        best = rows[0]
        print(f"{len(rows)} cells; best validation MSPE {best[-1]:.4f} at "
              f"upsilon={best[0]}, kappa={best[1]}, tau={best[2]}, {best[3]}")
    return 0


# ----------------------------------------------------------------------
# rendering: dependency-free portable pixmaps + CSV matrices
# ----------------------------------------------------------------------

_LABEL_PALETTE = np.array([
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207)], dtype=np.uint8)


def write_ppm(path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def value_heatmap(values: np.ndarray) -> np.ndarray:
    """Blue-white-red diverging map, symmetric about zero."""
    scale = np.max(np.abs(values))
    t = values / scale if scale > 0 else np.zeros_like(values)
    rgb = np.empty(values.shape + (3,), dtype=np.uint8)
    pos = np.clip(t, 0, 1)
    neg = np.clip(-t, 0, 1)
    rgb[..., 0] = np.round(255 * (1 - neg)).astype(np.uint8)
    rgb[..., 1] = np.round(255 * (1 - np.maximum(pos, neg))).astype(np.uint8)
    rgb[..., 2] = np.round(255 * (1 - pos)).astype(np.uint8)
    return rgb


def label_image(labels: np.ndarray) -> np.ndarray:
    return _LABEL_PALETTE[labels % len(_LABEL_PALETTE)]


def _render_matrix(out: Path, name: str, matrix: np.ndarray, rgb: np.ndarray):
    np.savetxt(out / f"{name}.csv", matrix, delimiter=",", fmt="%.17g")
    write_ppm(out / f"{name}.ppm", rgb)


def cmd_render(args) -> int:
    draws, _mu, _sigma2, beta, _echo = engine.load_fit(args.fit)
    out = Path(args.out if args.out else args.fit)
    out.mkdir(parents=True, exist_ok=True)

    height = width = None
    truth = None
    if args.data:
        scenario, _train, _test = simulate.load_dataset(args.data)
        height, width = scenario.lattice.height, scenario.lattice.width
        truth = scenario
    if height is None:
        p = beta.shape[1]
        side = int(round(p ** 0.5))
        if side * side != p:
            raise ValueError(
                "cannot infer grid shape; pass --data for the lattice")
        height = width = side

    beta_mean = beta.mean(axis=0).reshape(height, width)
    _render_matrix(out, "beta_mean", beta_mean, value_heatmap(beta_mean))

    minvi_path = Path(args.fit) / "minvi_labels.csv"
    if minvi_path.exists():
        with open(minvi_path) as fh:
            labels = np.array([int(v) - 1 for v in fh.read().strip().split(",")])
    else:
        labels = summary.min_vi_partition(draws)
    lab_img = labels.reshape(height, width)
    np.savetxt(out / "minvi_labels_matrix.csv", lab_img + 1, delimiter=",",
               fmt="%d")
    write_ppm(out / "minvi_labels.ppm", label_image(lab_img))

    if truth is not None:
        tb = truth.true_beta.reshape(height, width)
        _render_matrix(out, "beta_true", tb, value_heatmap(tb))
    if not args.quiet:
        print(f"wrote heatmaps to {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pottsgibbs",
        description="Spatially clustered scalar-on-image regression: "
                    "simulate, fit, summarize, gridsearch, render.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config=False):
        if config:
            sp.add_argument("--config", required=True,
                            help="JSON config file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--chains", type=int, default=None,
                        help="override the number of chains")
        sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(sp, config=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="run the sampler on a dataset directory")
    sp.add_argument("--data", required=True, help="dataset directory")
    common(sp, config=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("summarize", help="metrics and minVI point estimate")
    sp.add_argument("--data", required=True, help="dataset directory")
    sp.add_argument("--fit", required=True, help="fit directory")
    common(sp)
    sp.set_defaults(func=cmd_summarize)

    sp = sub.add_parser("gridsearch", help="rank hyperparameter combinations "
                                           "by validation MSPE")
    sp.add_argument("--data", required=True, help="dataset directory")
    sp.add_argument("--grid", required=True, help="JSON grid file")
    sp.add_argument("--jobs", type=int, default=1,
                    help="parallel worker processes")
    common(sp)
    sp.set_defaults(func=cmd_gridsearch)

    sp = sub.add_parser("render", help="heatmaps of true/estimated images")
    sp.add_argument("--fit", required=True, help="fit directory")
    sp.add_argument("--data", default=None,
                    help="dataset directory (for the lattice and truth)")
    common(sp)
    sp.set_defaults(func=cmd_render)

    args = parser.parse_args(argv)
    required_out = args.command in ("simulate", "fit", "gridsearch")
    if required_out and not args.out:
        parser.error(f"{args.command} requires --out")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
