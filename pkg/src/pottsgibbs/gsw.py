"""Generalized Swendsen-Wang partition updates.

One partition sweep has two stages.  Bond variables are drawn independently
for every same-label neighbour pair,

    r_jk ~ Bernoulli( 1 - exp(-ups_jk * zeta_jk) ),
    zeta_jk = kappa * exp(-tau * |bhat_j - bhat_k|),

where bhat are per-pixel univariate regression slopes computed once before
sampling.  kappa = 0 shuts all bonds off (single-site updates); kappa = 1,
tau = 0 recovers the classical Swendsen-Wang bond probability.  The
bond-connected nested clusters are then reassigned one at a time with an
auxiliary-variable (algorithm-8 style) categorical draw whose weights combine
the Gibbs-type predictive term, the collapsed marginal likelihood, and the
Potts correction exp{ups*(1-zeta)} over unbonded boundary pairs.

The heavy lifting happens in numba kernels (:mod:`pottsgibbs._kernels`); this
module owns validation, seeding and the array <-> object mapping.  Kernel
randomness lives in numba's own np.random state: seed it with
:func:`seed_sampler` (or pass a Generator to the wrappers below, which derive
a kernel seed from it).
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lattice import (BondSet, Lattice, NestedClustering, PartitionState,
                      nested_clusters)
from .partition_priors import GibbsModel
from .regression import Dataset, Hyperparameters, NumericalError


@dataclass(frozen=True)
class GswConfig:
    """Tuning of the bond mechanism: kappa in [0,1], tau >= 0, h >= 1
    auxiliary new-cluster candidates, and the frozen per-pixel univariate
    slope estimates feeding the similarity weight."""

    kappa: float = 0.5
    tau: float = 1.0
    h: int = 1
    beta_hat: np.ndarray = None

    def __post_init__(self):
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must be in [0, 1], got {self.kappa}")
        if self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if self.h < 1:
            raise ValueError(f"h must be >= 1, got {self.h}")
        if self.beta_hat is not None:
            object.__setattr__(self, "beta_hat",
                               np.asarray(self.beta_hat, dtype=float))


def zeta(config: GswConfig, j: int, k: int) -> float:
    """Bond modulation kappa * exp(-tau |bhat_j - bhat_k|) for one pair."""
    if config.tau == 0.0 or config.kappa == 0.0:
        return config.kappa
    if config.beta_hat is None:
        raise ValueError("tau > 0 requires per-pixel slope estimates")
    d = abs(float(config.beta_hat[j]) - float(config.beta_hat[k]))
    return config.kappa * float(np.exp(-config.tau * d))


def zeta_table(config: GswConfig, lattice: Lattice) -> np.ndarray:
    """zeta for every neighbour pair of the lattice."""
    if config.tau == 0.0 or config.kappa == 0.0:
        return np.full(lattice.n_pairs, config.kappa)
    if config.beta_hat is None:
        raise ValueError("tau > 0 requires per-pixel slope estimates")
    d = np.abs(config.beta_hat[lattice.pair_j] - config.beta_hat[lattice.pair_k])
    return config.kappa * np.exp(-config.tau * d)


def sample_bonds(lattice: Lattice, state: PartitionState, config: GswConfig,
                 rng: np.random.Generator) -> BondSet:
    """Independent Bernoulli bonds; cross-cluster pairs get probability 0."""
    if state.p != lattice.p:
        raise ValueError("partition size does not match lattice")
    zt = zeta_table(config, lattice)
    same = state.labels[lattice.pair_j] == state.labels[lattice.pair_k]
    prob = np.where(same, 1.0 - np.exp(-lattice.coupling * zt), 0.0)
    bonds = (rng.random(lattice.n_pairs) < prob).astype(np.int8)
    return BondSet(bonds, lattice)


def seed_sampler(seed: int) -> None:
    """Seed the kernel RNG stream (one call per chain)."""
    _kernels.seed_kernel(int(seed))


class _KernelArgs:
    """Precomputed contiguous arrays handed to the sweep kernel."""

    def __init__(self, data: Dataset, lattice: Lattice, model: GibbsModel,
                 hyper: Hyperparameters, config: GswConfig):
        self.X = data.X
        self.W = data.W
        self.y = data.y
        self.pair_j = lattice.pair_j
        self.pair_k = lattice.pair_k
        self.coupling = lattice.coupling
        self.zeta = zeta_table(config, lattice)
        self.pix_pair_start = lattice.pix_pair_start
        self.pix_pair_idx = lattice.pix_pair_idx
        self.WtW = data.W.T @ data.W
        self.Wty = data.W.T @ data.y
        self.yty = float(data.y @ data.y)
        self.m_mu, self.c_mu = hyper.mu_prior(data.q)
        self.hyper = hyper
        self.kind = model.kind
        self.w_param = model.w_param
        self.logv = model.log_v_table(lattice.p).logv
        self.h = config.h

    def sweep(self, z, eta, M, bonds_out, aux_mode=0, eta_fixed=0.0):
        return _kernels.gsw_sweep(
            z, eta, M, bonds_out,
            self.X, self.W, self.y, self.pair_j, self.pair_k,
            self.coupling, self.zeta,
            self.pix_pair_start, self.pix_pair_idx,
            self.WtW, self.Wty, self.yty, self.m_mu, self.c_mu,
            self.hyper.a_sigma, self.hyper.b_sigma,
            self.hyper.a_eta, self.hyper.b_eta,
            self.kind, self.w_param, self.logv, self.h,
            aux_mode, eta_fixed)


def reassign_nested(data: Dataset, lattice: Lattice, state: PartitionState,
                    nested: NestedClustering, bonds: BondSet, eta_star,
                    model: GibbsModel, hyper: Hyperparameters,
                    config: GswConfig, rng: np.random.Generator):
    """Reassign every nested cluster once; returns (PartitionState, eta_star).

    The sweep order is a fresh random permutation; when a move empties a
    cluster its scale entry is dropped, and labels come back canonicalized.
    Auxiliary scales for the h new-cluster candidates are drawn
    IG(a_eta, b_eta), except that a block forming its entire cluster keeps its
    current scale as the first auxiliary value (the usual algorithm-8 rule,
    needed for the update to leave the posterior invariant).
    """
    eta_star = np.asarray(eta_star, dtype=float)
    if eta_star.shape[0] != state.M:
        raise ValueError("eta_star length must equal the number of clusters")
    derived = nested_clusters(lattice, bonds)
    if not np.array_equal(derived.nested_labels, nested.nested_labels):
        raise ValueError("nested clustering does not match the bond variables")
    if np.any(state.labels[lattice.pair_j[bonds.bonds == 1]]
              != state.labels[lattice.pair_k[bonds.bonds == 1]]):
        raise ValueError("bonds cross cluster boundaries")

    args = _KernelArgs(data, lattice, model, hyper, config)
    z = state.labels.copy()
    eta = np.zeros(lattice.p + 1)
    eta[:state.M] = eta_star
    seed_sampler(int(rng.integers(np.iinfo(np.int64).max)))
    m_new, O, status = _kernels.reassign_kernel(
        z, eta, state.M, bonds.bonds,
        args.X, args.W, args.y, args.pair_j, args.pair_k,
        args.coupling, args.zeta,
        args.pix_pair_start, args.pix_pair_idx,
        args.WtW, args.Wty, args.yty, args.m_mu, args.c_mu,
        hyper.a_sigma, hyper.b_sigma, hyper.a_eta, hyper.b_eta,
        args.kind, args.w_param, args.logv, args.h, 0, 0.0)
    if status != 0:
        raise NumericalError(
            f"marginal-likelihood factorization failed at nested cluster "
            f"{status - 1} of {O}")
    return PartitionState(z, canonical=True), eta[:m_new].copy()


def run_partition_sweeps(data: Dataset, lattice: Lattice,
                         state: PartitionState, model: GibbsModel,
                         hyper: Hyperparameters, config: GswConfig,
                         n_sweeps: int, burn_in: int, seed: int,
                         eta_fixed: float = None, eta_star=None):
    """Run many full partition sweeps and record one encoded canonical
    partition per post-burn-in sweep (code = sum_j z_j * p**j).

    With `eta_fixed` set, every cluster scale is pinned at that value and the
    chain is Markov in the partition alone; this is the fast path used to
    compare against exactly enumerated posteriors.  Otherwise `eta_star`
    supplies initial scales and auxiliary scales are drawn from the prior.
    Returns (codes, final PartitionState, final eta_star).
    """
    p = lattice.p
    if p ** p > np.iinfo(np.int64).max:
        raise ValueError(f"partition codes overflow int64 for p={p}")
    z = state.labels.copy()
    eta = np.zeros(p + 1)
    if eta_fixed is not None:
        if eta_fixed <= 0:
            raise ValueError("eta_fixed must be positive")
        eta[: state.M] = eta_fixed
        aux_mode, eta_val = 1, float(eta_fixed)
    else:
        eta_star = np.asarray(eta_star, dtype=float)
        if eta_star.shape[0] != state.M:
            raise ValueError("eta_star length must equal the number of clusters")
        eta[: state.M] = eta_star
        aux_mode, eta_val = 0, 0.0

    args = _KernelArgs(data, lattice, model, hyper, config)
    codes, m_final, status = _kernels.sweep_many(
        z, eta, state.M, int(seed), int(n_sweeps), int(burn_in),
        args.X, args.W, args.y, args.pair_j, args.pair_k,
        args.coupling, args.zeta,
        args.pix_pair_start, args.pix_pair_idx,
        args.WtW, args.Wty, args.yty, args.m_mu, args.c_mu,
        hyper.a_sigma, hyper.b_sigma, hyper.a_eta, hyper.b_eta,
        args.kind, args.w_param, args.logv, args.h, aux_mode, eta_val)
    if status != 0:
        raise NumericalError(
            f"marginal-likelihood factorization failed at sweep {status - 1}")
    return codes, PartitionState(z, canonical=True), eta[:m_final].copy()


def decode_partition(code: int, p: int) -> tuple:
    """Invert the sweep recorder's base-p partition encoding."""
    out = []
    for _ in range(p):
        out.append(code % p)
        code //= p
    return tuple(out)
