"""Simulated scalar-on-image datasets with planted partitions.

Two stock scenarios on a 10x10 grid, following the usual simulation design
for spatially clustered coefficient images:

* scenario1: a centred 4x4 block with coefficient 1 on a 0 background
  (true M = 2, strong signal).
* scenario2: five contiguous two-column stripes with coefficients
  -2, -1, 0, 1, 2 (true M = 5).

Pixel values are mean-zero unit-variance Gaussians with separable AR(1)
correlation across rows and columns, so horizontally and vertically adjacent
pixels correlate at exactly rho.  Responses follow the linear model with an
intercept as the only fixed effect.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .lattice import Lattice, build_lattice
from .regression import Dataset

SCENARIO_BETAS = {"scenario1": (0.0, 1.0), "scenario2": (-2.0, -1.0, 0.0, 1.0, 2.0)}


@dataclass(frozen=True)
class Scenario:
    """Planted ground truth for one simulated experiment."""

    name: str
    lattice: Lattice
    true_labels: np.ndarray
    true_beta: np.ndarray
    true_sigma2: float
    intercept: float
    rho: float
    n_train: int
    n_test: int
    seed: int

    @property
    def true_m(self) -> int:
        return int(self.true_labels.max()) + 1


def _planted_labels(name: str, height: int, width: int) -> np.ndarray:
    rows, cols = np.divmod(np.arange(height * width), width)
    if name == "scenario1":
        r0 = (height - 4) // 2
        c0 = (width - 4) // 2
        block = ((rows >= r0) & (rows < r0 + 4) & (cols >= c0) & (cols < c0 + 4))
        return block.astype(np.int64)
    if name == "scenario2":
        return np.minimum(cols // max(1, width // 5), 4).astype(np.int64)
    raise ValueError(f"unknown scenario {name!r}")


def _assert_contiguous(labels: np.ndarray, lattice: Lattice) -> None:
    # every planted cluster must be 4-connected
    same = labels[lattice.pair_j] == labels[lattice.pair_k]
    bonds = same.astype(np.int8)
    comp, n_comp = _kernels.connected_components(
        lattice.p, lattice.pair_j, lattice.pair_k, bonds)
    if n_comp != labels.max() + 1:
        raise AssertionError("planted clusters are not spatially contiguous")


def _ar1_cholesky(k: int, rho: float) -> np.ndarray:
    idx = np.arange(k)
    corr = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(corr)


def sample_images(n: int, height: int, width: int, rho: float,
                  rng: np.random.Generator) -> np.ndarray:
    """n vectorized images with unit variance and neighbour correlation rho."""
    if not 0 <= rho < 1:
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    lr = _ar1_cholesky(height, rho)
    lc = _ar1_cholesky(width, rho)
    z = rng.standard_normal((n, height, width))
    imgs = np.einsum("ab,nbc,dc->nad", lr, z, lc)
    return imgs.reshape(n, height * width)


def make_scenario(name: str, seed: int, n_train: int = 300, n_test: int = 100,
                  rho: float = 0.3, sigma2: float = 1.0,
                  intercept: float = 0.5, height: int = 10, width: int = 10):
    """Build a Scenario plus train and test Datasets.

    Returns (scenario, train, test).  Regenerating with the same arguments
    reproduces the data bit-exactly.
    """
    lattice = build_lattice(height, width)
    labels = _planted_labels(name, height, width)
    _assert_contiguous(labels, lattice)
    beta = np.asarray(SCENARIO_BETAS[name], dtype=float)[labels]
    scenario = Scenario(name, lattice, labels, beta, float(sigma2),
                        float(intercept), float(rho), n_train, n_test, seed)

    rng = np.random.default_rng(seed)
    datasets = []
    for n in (n_train, n_test):
        X = sample_images(n, height, width, rho, rng)
        eps = rng.standard_normal(n) * np.sqrt(sigma2)
        y = intercept + X @ beta + eps
        W = np.ones((n, 1))
        datasets.append(Dataset(y, W, X, lattice))
    return scenario, datasets[0], datasets[1]


def univariate_beta_hats(data: Dataset) -> np.ndarray:
    """Least-squares slope of y on (intercept, x_j) for each pixel j.

    Constant pixel columns get slope 0 with a warning (degenerate regressor).
    """
    if data.n < 2:
        raise ValueError("need at least two samples")
    xc = data.X - data.X.mean(axis=0)
    yc = data.y - data.y.mean()
    var = np.einsum("ij,ij->j", xc, xc)
    cov = xc.T @ yc
    degenerate = var <= 0
    if np.any(degenerate):
        warnings.warn(
            f"{int(degenerate.sum())} constant pixel column(s); slope set to 0")
    out = np.zeros(data.p)
    good = ~degenerate
    out[good] = cov[good] / var[good]
    return out


# ----------------------------------------------------------------------
# dataset directory layout: y/W/X (+ _test) CSVs and truth.json
# ----------------------------------------------------------------------

def save_dataset(directory, scenario: Scenario, train: Dataset,
                 test: Dataset) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "y.csv", train.y, delimiter=",", fmt="%.17g")
    np.savetxt(directory / "W.csv", train.W, delimiter=",", fmt="%.17g")
    np.savetxt(directory / "X.csv", train.X, delimiter=",", fmt="%.17g")
    np.savetxt(directory / "y_test.csv", test.y, delimiter=",", fmt="%.17g")
    np.savetxt(directory / "W_test.csv", test.W, delimiter=",", fmt="%.17g")
    np.savetxt(directory / "X_test.csv", test.X, delimiter=",", fmt="%.17g")
    truth = {
        "name": scenario.name,
        "seed": scenario.seed,
        "height": scenario.lattice.height,
        "width": scenario.lattice.width,
        "labels": [int(v) + 1 for v in scenario.true_labels],
        "beta": [float(v) for v in scenario.true_beta],
        "sigma2": scenario.true_sigma2,
        "intercept": scenario.intercept,
        "rho": scenario.rho,
        "n_train": scenario.n_train,
        "n_test": scenario.n_test,
    }
    with open(directory / "truth.json", "w") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(directory):
    """Load (scenario, train, test) written by :func:`save_dataset`."""
    directory = Path(directory)
    for req in ("y.csv", "W.csv", "X.csv", "truth.json"):
        if not (directory / req).exists():
            raise FileNotFoundError(f"missing dataset file: {directory / req}")
    with open(directory / "truth.json") as fh:
        truth = json.load(fh)
    lattice = build_lattice(truth["height"], truth["width"])

    def _load(suffix=""):
        y = np.loadtxt(directory / f"y{suffix}.csv", delimiter=",", ndmin=1)
        W = np.loadtxt(directory / f"W{suffix}.csv", delimiter=",", ndmin=2)
        X = np.loadtxt(directory / f"X{suffix}.csv", delimiter=",", ndmin=2)
        if W.shape[0] != y.shape[0]:
            W = W.reshape(y.shape[0], -1)
        return Dataset(y, W, X, lattice)

    train = _load()
    test = _load("_test") if (directory / "y_test.csv").exists() else None
    scenario = Scenario(
        truth["name"], lattice,
        np.asarray(truth["labels"], dtype=np.int64) - 1,
        np.asarray(truth["beta"], dtype=float),
        float(truth["sigma2"]), float(truth["intercept"]), float(truth["rho"]),
        int(truth["n_train"]), int(truth["n_test"]), int(truth["seed"]))
    return scenario, train, test
