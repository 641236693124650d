"""Gibbs-type partition priors: masses, predictive terms, recurrence.

Walks through the three weight families (DP, Pitman-Yor, MFM), shows that
the exchangeable partition mass normalizes once the spatial term is off,
checks the backward recurrence of the V-weights numerically, and prints the
predictive terms that drive the sampler's reassignment weights.
"""

import math

import numpy as np

import pottsgibbs as pg


def all_partitions(p):
    parts = [(0,)]
    for _ in range(p - 1):
        parts = [s + (lab,) for s in parts for lab in range(max(s) + 2)]
    return parts


# --- normalization: with upsilon = 0 the Potts-Gibbs prior is a plain
# Gibbs-type law, so the masses over all set partitions sum to one.
p = 6
lat = pg.build_lattice(1, p, 0.0)
for model in (pg.DP(1.0), pg.PY(1.0, 0.5), pg.MFM(1.0, lam=2.0)):
    total = sum(math.exp(pg.log_prior_partition(model, pg.PartitionState(z), lat))
                for z in all_partitions(p))
    print(f"{model!r}: sum of masses over the {len(all_partitions(p))} "
          f"partitions of {p} items = {total:.12f}")

# --- a positive coupling tilts mass toward spatially smooth partitions
# (the law is then only known up to the intractable Potts constant).
lat_smooth = pg.build_lattice(2, 3, 1.0)
smooth = pg.PartitionState([0, 0, 0, 1, 1, 1])   # two contiguous rows
speckle = pg.PartitionState([0, 1, 0, 1, 0, 1])  # checkerboard
model = pg.DP(1.0)
print("\nlog unnormalized mass, coupling = 1.0:")
print(f"  two rows     : {pg.log_prior_partition(model, smooth, lat_smooth):+.4f}")
print(f"  checkerboard : {pg.log_prior_partition(model, speckle, lat_smooth):+.4f}")

# --- V-weights solve the backward recurrence V_p(M) = (p - delta*M) V_{p+1}(M)
# + V_{p+1}(M+1); check it for the Pitman-Yor table at p = 30.
model = pg.PY(1.0, 0.25)
p = 30
tab, tab1 = model.log_v_table(p).logv, model.log_v_table(p + 1).logv
defect = max(abs(tab[M] - np.logaddexp(math.log(p - 0.25 * M) + tab1[M],
                                       tab1[M + 1]))
             for M in range(1, p + 1))
print(f"\nPY(1, 0.25) recurrence defect at p={p}: {defect:.2e}")

# --- predictive terms: an existing cluster attracts a block of a pixels in
# proportion to W(n+a)/W(n); a new cluster weighs in via the V-ratio.
print("\npredictive terms for a block of size a=2, target size n=5, M=3, p=100:")
for model in (pg.DP(1.0), pg.PY(1.0, 0.25), pg.MFM(1.0, lam=1.0)):
    ex = pg.log_pred_existing(model, 5, 2)
    new = pg.log_pred_new(model, 100, 3, 2)
    print(f"  {model!r}: log existing = {ex:+.4f}, log new = {new:+.4f}")

# --- the rich-get-richer contrast: DP vs PY odds of joining a big cluster
# over a small one, for a single pixel.
big, small = 60, 3
for model in (pg.DP(1.0), pg.PY(1.0, 0.5)):
    odds = math.exp(pg.log_pred_existing(model, big, 1)
                    - pg.log_pred_existing(model, small, 1))
    print(f"{model!r}: odds(join size-{big} vs size-{small}) = {odds:.2f}")
