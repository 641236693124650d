"""Partition-posterior summaries and evaluation metrics.

The point-estimate partition minimizes the posterior expected Variation of
Information over the retained draws (search restricted to the sampled
partitions).  Metric reports mirror the usual simulation-study table: ARI,
VI, coefficient MSE, held-out MSPE and the number of clusters, summarized by
their posterior mean and standard deviation over the retained draws, plus the
same metrics evaluated at the point estimate.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import PartitionState
from .regression import (Dataset, Hyperparameters, build_design, draw_eta,
                         draw_coefficients)


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("partitions must have equal length")
    ka = a.max() + 1
    kb = b.max() + 1
    table = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def variation_of_information(a, b) -> float:
    """VI(a, b) = H(a) + H(b) - 2 I(a, b), in nats, from the contingency table."""
    table = _contingency(a, b)
    n = table.sum()
    pij = table / n
    pa = pij.sum(axis=1)
    pb = pij.sum(axis=0)
    nz = pij > 0
    h_a = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    h_b = -np.sum(pb[pb > 0] * np.log(pb[pb > 0]))
    marg = (pa[:, None] * pb[None, :])[nz]
    mi = np.sum(pij[nz] * (np.log(pij[nz]) - np.log(marg)))
    return float(max(0.0, h_a + h_b - 2.0 * mi))


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected Rand index in (-1, 1], 1 iff identical partitions."""
    table = _contingency(a, b)
    n = table.sum()

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table.astype(float)).sum()
    sum_a = comb2(table.sum(axis=1).astype(float)).sum()
    sum_b = comb2(table.sum(axis=0).astype(float)).sum()
    total = comb2(float(n))
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions degenerate (all-singletons vs anything alike)
        return 0.0 if sum_ij != max_index else 1.0
    return float((sum_ij - expected) / (max_index - expected))


def similarity_matrix(draws) -> np.ndarray:
    """Posterior co-clustering frequencies: (i, j) entry is the fraction of
    draws in which pixels i and j share a cluster."""
    draws = np.asarray(draws, dtype=np.int64)
    if draws.ndim != 2 or draws.shape[0] == 0:
        raise ValueError("draws must be a nonempty (n_draws, p) array")
    p = draws.shape[1]
    out = np.zeros((p, p))
    for z in draws:
        out += z[:, None] == z[None, :]
    return out / draws.shape[0]


def min_vi_partition(draws) -> np.ndarray:
    """The retained draw minimizing the posterior expected VI.

    The expectation is the empirical average of VI(candidate, draw) over all
    retained draws; ties break towards the earliest draw index.
    """
    draws = np.asarray(draws, dtype=np.int64)
    if draws.ndim != 2 or draws.shape[0] == 0:
        raise ValueError("draws must be a nonempty (n_draws, p) array")
    uniq, first_idx, counts = np.unique(draws, axis=0, return_index=True,
                                        return_counts=True)
    n_uniq = uniq.shape[0]
    vi = np.zeros((n_uniq, n_uniq))
    for i in range(n_uniq):
        for j in range(i + 1, n_uniq):
            vi[i, j] = vi[j, i] = variation_of_information(uniq[i], uniq[j])
    expected = vi @ counts / draws.shape[0]
    best = np.flatnonzero(expected == expected.min())
    pick = best[np.argmin(first_idx[best])]
    return uniq[pick].copy()


def expected_vi(candidate, draws) -> float:
    """Empirical posterior expected VI of one candidate partition."""
    draws = np.asarray(draws, dtype=np.int64)
    return float(np.mean([variation_of_information(candidate, z)
                          for z in draws]))


def pixel_beta(labels, beta_star, sizes=None) -> np.ndarray:
    """Per-pixel coefficient image implied by cluster coefficients:
    beta_j = beta*_{z_j} / sqrt(|C_{z_j}|) (undoing the design rescaling)."""
    labels = np.asarray(labels, dtype=np.int64)
    beta_star = np.asarray(beta_star, dtype=float)
    if sizes is None:
        sizes = np.bincount(labels, minlength=beta_star.shape[0])
    return beta_star[labels] / np.sqrt(np.asarray(sizes, dtype=float)[labels])


@dataclass
class MetricsReport:
    """Per-draw metric trajectories plus mean/sd summaries and the metrics at
    the minVI point estimate."""

    per_draw: dict
    summary: dict
    point: dict
    minvi_labels: np.ndarray

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        cols = list(self.per_draw)
        rows = zip(*[self.per_draw[c] for c in cols])
        with open(directory / "metrics.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        with open(directory / "summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "mean", "sd", "at_minvi"])
            for name in cols:
                vals = np.asarray(self.per_draw[name], dtype=float)
                writer.writerow([name, _fmt(vals.mean()),
                                 _fmt(vals.std(ddof=1) if len(vals) > 1 else 0.0),
                                 _fmt(self.point.get(name, float("nan")))])
        with open(directory / "minvi_labels.csv", "w") as fh:
            fh.write(",".join(str(v + 1) for v in self.minvi_labels) + "\n")


def _fmt(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def _conditional_posterior_mean(data: Dataset, labels, hyper: Hyperparameters,
                                seed: int = 0, iters: int = 600,
                                burn: int = 100):
    """Posterior-mean coefficients conditional on a fixed partition, by a
    short conjugate Gibbs run over (coefficients, noise, scales)."""
    state = PartitionState(labels)
    design = build_design(data, state)
    rng = np.random.default_rng(seed)
    eta = np.full(state.M, hyper.b_eta / hyper.a_eta)
    acc = np.zeros(data.q + state.M)
    kept = 0
    for it in range(iters):
        beta_tilde, sigma2 = draw_coefficients(data, design, eta, hyper, rng)
        eta = draw_eta(beta_tilde[data.q:], sigma2, hyper, rng)
        if it >= burn:
            acc += beta_tilde
            kept += 1
    mean = acc / kept
    return mean[:data.q], mean[data.q:], design.sizes


def metrics(partition_draws, mu_draws, beta_images, scenario, test: Dataset,
            train: Dataset, hyper: Hyperparameters,
            point_seed: int = 0) -> MetricsReport:
    """Per-draw and point-estimate metrics.

    partition_draws: (R, p) retained labels; mu_draws: (R, q) fixed effects;
    beta_images: (R, p) per-pixel coefficient images.  `scenario` (with
    planted truth) may be None, in which case ARI/VI/MSE are omitted; MSPE
    needs `test`.
    """
    draws = np.asarray(partition_draws, dtype=np.int64)
    mu_draws = np.atleast_2d(np.asarray(mu_draws, dtype=float))
    beta_images = np.asarray(beta_images, dtype=float)
    R = draws.shape[0]
    have_truth = scenario is not None
    have_test = test is not None

    per_draw = {"M": [], "MSPE": []} if have_test else {"M": []}
    if have_truth:
        per_draw.update({"ARI": [], "VI": [], "MSE": []})

    for r in range(R):
        labels = draws[r]
        bpix = beta_images[r]
        per_draw["M"].append(int(labels.max()) + 1)
        if have_truth:
            per_draw["ARI"].append(adjusted_rand_index(labels,
                                                       scenario.true_labels))
            per_draw["VI"].append(variation_of_information(
                labels, scenario.true_labels))
            per_draw["MSE"].append(float(np.mean((bpix - scenario.true_beta) ** 2)))
        if have_test:
            pred = test.W @ mu_draws[r] + test.X @ bpix
            per_draw["MSPE"].append(float(np.mean((test.y - pred) ** 2)))

    minvi = min_vi_partition(draws)
    point = {"M": int(minvi.max()) + 1}
    if have_truth:
        point["ARI"] = adjusted_rand_index(minvi, scenario.true_labels)
        point["VI"] = variation_of_information(minvi, scenario.true_labels)
    mu_hat, beta_star_hat, _sizes = _conditional_posterior_mean(
        train, minvi, hyper, seed=point_seed)
    bpix_hat = pixel_beta(minvi, beta_star_hat)
    if have_truth:
        point["MSE"] = float(np.mean((bpix_hat - scenario.true_beta) ** 2))
    if have_test:
        pred = test.W @ np.atleast_1d(mu_hat) + test.X @ bpix_hat
        point["MSPE"] = float(np.mean((test.y - pred) ** 2))

    summary = {}
    for name, vals in per_draw.items():
        arr = np.asarray(vals, dtype=float)
        summary[name] = (float(arr.mean()),
                         float(arr.std(ddof=1)) if R > 1 else 0.0)
    return MetricsReport(per_draw, summary, point, minvi)
