"""End-to-end simulation study: simulate, fit all three variants, summarize.

Reproduces the simulation-study pipeline on the stock scenarios: planted
coefficient images on a 10x10 grid, n=300 training images, fits under the
DP, Pitman-Yor and MFM partition weights, and reports ARI / VI / MSE / MSPE
/ M summaries plus the minVI point estimate.  Uses a shortened chain so the
demo finishes in about a minute; the acceptance suite runs the full length.
"""

import time


import pottsgibbs as pg
from pottsgibbs import engine, summary

scenario, train, test = pg.make_scenario("scenario2", seed=11)
print(f"{scenario.name}: true M = {scenario.true_m}, n = {train.n}, "
      f"p = {train.p}")
print("true coefficient image:")
print(scenario.true_beta.reshape(10, 10))

variants = [("Potts-DP", pg.DP(1.0)),
            ("Potts-PY", pg.PY(1.0, 0.25)),
            ("Potts-MFM", pg.MFM(1.0, lam=1.0))]

print(f"\n{'model':10s} {'ARI':>6s} {'VI':>6s} {'MSE':>8s} {'MSPE':>7s} "
      f"{'M':>5s}  (posterior means; point estimate in brackets)")
for name, model in variants:
    config = pg.RunConfig(iterations=1500, burn_in=500, thin=2, seed=1,
                          model=model, upsilon=1.0,
                          gsw=pg.GswConfig(kappa=0.5, tau=1.0))
    t0 = time.time()
    fit = engine.run(train, config)
    rep = summary.metrics(fit.partition_draws, fit.mu_draws,
                          fit.beta_images(), scenario, test, train,
                          config.hyper)
    s = rep.summary
    print(f"{name:10s} {s['ARI'][0]:6.3f} {s['VI'][0]:6.3f} "
          f"{s['MSE'][0]:8.4f} {s['MSPE'][0]:7.3f} {s['M'][0]:5.2f}  "
          f"[ARI {rep.point['ARI']:.3f}, M {rep.point['M']}] "
          f"({time.time() - t0:.0f}s)")

# minVI point estimate of the last fit, as an image
print("\nminVI labels (last fit):")
print((rep.minvi_labels + 1).reshape(10, 10))

# step-1 cost scales with the per-sweep statistics volume, roughly O(n p)
print("\nsweep-cost scaling with n (same p, same config):")
for n_sub in (75, 150, 300):
    sub = pg.Dataset(train.y[:n_sub], train.W[:n_sub], train.X[:n_sub],
                     train.lattice)
    config = pg.RunConfig(iterations=200, burn_in=100, thin=1, seed=2,
                          model=pg.DP(1.0), upsilon=1.0,
                          gsw=pg.GswConfig(kappa=0.5, tau=1.0))
    t0 = time.time()
    engine.run(sub, config)
    print(f"  n={n_sub:4d}: {(time.time() - t0) / 200 * 1e3:.2f} ms/iteration")
