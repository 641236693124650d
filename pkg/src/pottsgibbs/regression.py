"""Clustered design matrices and the collapsed normal-inverse-gamma core.

The regression model, conditional on a partition into M clusters:

    y_i = w_i' mu + xstar_i' beta_star + eps_i,    eps_i ~ N(0, sigma2)
    xstar_im = sum_{j in C_m} x_ij / sqrt(|C_m|)

with conjugate priors mu | sigma2 ~ N(m_mu, sigma2 diag(c_mu)),
beta_star | sigma2, eta ~ N(0, sigma2 diag(eta_star)), sigma2 ~ IG(a, b).
The sqrt-of-cluster-size rescaling of the summed pixel values is equivalent
to shrinking beta_star harder for larger regions.

Writing btilde = (mu, beta_star) and Xtilde = [W | X_star], the posterior is

    sigma2 | y ~ IG(a + n/2, b_hat),   btilde | sigma2, y ~ N(m_hat, sigma2 S_hat)

with S_hat = (S^-1 + Xtilde'Xtilde)^-1, m_hat = S_hat (S^-1 m + Xtilde'y) and
b_hat = b + [m'S^-1 m + y'y - m_hat'S_hat^-1 m_hat]/2, and the collapsed
marginal likelihood (btilde, sigma2 integrated out) has the closed form

    pr(y | eta) = (2 pi)^{-n/2} (|S_hat|/|S|)^{1/2}
                  * b^a / b_hat^a_hat * Gamma(a_hat)/Gamma(a).

This closed form is the sampler's hot path; it is gated in the test suite by
a Monte-Carlo integration oracle and a Bayes-identity check.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lattice import Lattice, PartitionState


class NumericalError(RuntimeError):
    """A matrix factorization failed even after the jitter retry."""


@dataclass(frozen=True)
class Dataset:
    """Responses y (n,), covariates W (n, q) with an all-ones first column by
    convention, and vectorized images X (n, p) on `lattice`."""

    y: np.ndarray
    W: np.ndarray
    X: np.ndarray
    lattice: Lattice

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float)
        W = np.ascontiguousarray(self.W, dtype=float)
        X = np.ascontiguousarray(self.X, dtype=float)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "X", X)
        if y.ndim != 1 or W.ndim != 2 or X.ndim != 2:
            raise ValueError("y must be 1-D, W and X 2-D")
        n = y.shape[0]
        if W.shape[0] != n or X.shape[0] != n:
            raise ValueError("y, W, X must share the sample dimension")
        if X.shape[1] != self.lattice.p:
            raise ValueError(
                f"X has {X.shape[1]} pixels but the lattice has {self.lattice.p}")
        for name, arr in (("y", y), ("W", W), ("X", X)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def q(self) -> int:
        return self.W.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class Hyperparameters:
    """Conjugate prior settings.

    m_mu, c_mu: mean and variance diagonal for the fixed effects (scalars are
    broadcast when the design is built).  (a_sigma, b_sigma): inverse-gamma
    shape/scale for the noise variance.  (a_eta, b_eta): inverse-gamma
    shape/scale of the cluster-coefficient scale mixture; equivalently a
    t-shrinkage prior with nu = 2 a_eta and scale s = sqrt(b_eta / a_eta).
    """

    m_mu: np.ndarray = 0.0
    c_mu: np.ndarray = 100.0
    a_sigma: float = 1.0
    b_sigma: float = 1.0
    a_eta: float = 1.0
    b_eta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "m_mu", np.atleast_1d(np.asarray(self.m_mu, dtype=float)))
        object.__setattr__(self, "c_mu", np.atleast_1d(np.asarray(self.c_mu, dtype=float)))
        if np.any(self.c_mu <= 0):
            raise ValueError("c_mu entries must be positive")
        for name in ("a_sigma", "b_sigma", "a_eta", "b_eta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def t_nu(self) -> float:
        return 2.0 * self.a_eta

    @property
    def t_scale(self) -> float:
        return float(np.sqrt(self.b_eta / self.a_eta))

    def mu_prior(self, q: int):
        """(m_mu, c_mu) broadcast to length q."""
        m = np.broadcast_to(self.m_mu, (q,)).astype(float).copy()
        c = np.broadcast_to(self.c_mu, (q,)).astype(float).copy()
        return m, c


@dataclass
class CoefficientState:
    """Current fixed effects, cluster coefficients and scales of one chain."""

    mu: np.ndarray
    beta_star: np.ndarray
    sigma2: float
    eta_star: np.ndarray

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if np.any(self.eta_star <= 0):
            raise ValueError("eta_star entries must be positive")
        if self.eta_star.shape != self.beta_star.shape:
            raise ValueError("eta_star and beta_star must have equal length")


@dataclass(frozen=True)
class ClusteredDesign:
    """Design pieces for a fixed partition: X_star (n, M) with columns
    sum_{j in C_m} x_j / sqrt(|C_m|), Xtilde = [W | X_star], and the
    sufficient statistics Xtilde'Xtilde, Xtilde'y, y'y."""

    X_star: np.ndarray
    X_tilde: np.ndarray
    XtX: np.ndarray
    Xty: np.ndarray
    yty: float
    sizes: np.ndarray
    q: int

    @property
    def M(self) -> int:
        return self.X_star.shape[1]


def build_design(data: Dataset, state: PartitionState) -> ClusteredDesign:
    """Clustered design and sufficient statistics for one partition."""
    if state.p != data.p:
        raise ValueError("partition size does not match image dimension")
    sizes = state.cluster_sizes
    M = state.M
    X_star = np.zeros((data.n, M))
    np.add.at(X_star.T, state.labels, data.X.T)
    X_star /= np.sqrt(sizes)
    X_tilde = np.concatenate([data.W, X_star], axis=1)
    XtX = X_tilde.T @ X_tilde
    Xty = X_tilde.T @ data.y
    yty = float(data.y @ data.y)
    return ClusteredDesign(X_star, X_tilde, XtX, Xty, yty, sizes, data.q)


def _posterior_factor(design: ClusteredDesign, eta_star, hyper: Hyperparameters):
    """Cholesky of the posterior precision plus (m_hat, rhs, prior pieces).

    Applies the jitter policy: on factorization failure, add
    1e-10 * mean(diag) to the diagonal once, then raise NumericalError.
    """
    eta_star = np.asarray(eta_star, dtype=float)
    if eta_star.shape[0] != design.M:
        raise ValueError(
            f"eta_star has {eta_star.shape[0]} entries for M={design.M}")
    if np.any(eta_star <= 0):
        raise ValueError("eta_star entries must be positive")
    m_mu, c_mu = hyper.mu_prior(design.q)
    prior_prec = np.concatenate([1.0 / c_mu, 1.0 / eta_star])
    prior_mean = np.concatenate([m_mu, np.zeros(design.M)])
    P = design.XtX + np.diag(prior_prec)
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        P = P + np.eye(P.shape[0]) * (1e-10 * np.mean(np.diag(P)))
        try:
            L = np.linalg.cholesky(P)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "posterior precision not positive definite after jitter") from exc
    rhs = design.Xty + prior_prec * prior_mean
    w = np.linalg.solve(L, rhs)
    m_hat = np.linalg.solve(L.T, w)
    prior_qf = float(prior_mean @ (prior_prec * prior_mean))
    logdet_prior = float(np.sum(np.log(c_mu)) + np.sum(np.log(eta_star)))
    return L, m_hat, w, prior_qf, logdet_prior


def posterior_coeff_params(design: ClusteredDesign, eta_star,
                           hyper: Hyperparameters, n: int):
    """Posterior quantities (m_hat, L, a_hat, b_hat) for (btilde, sigma2),
    where L is the lower Cholesky factor of the posterior precision."""
    L, m_hat, w, prior_qf, _ = _posterior_factor(design, eta_star, hyper)
    a_hat = hyper.a_sigma + 0.5 * n
    b_hat = hyper.b_sigma + 0.5 * (prior_qf + design.yty - float(w @ w))
    if b_hat <= 0:
        raise NumericalError(f"posterior scale b_hat = {b_hat} <= 0")
    return m_hat, L, a_hat, b_hat


def log_marginal_likelihood(data: Dataset, design: ClusteredDesign,
                            eta_star, hyper: Hyperparameters) -> float:
    """Closed-form log pr(y | partition, eta_star), coefficients and noise
    variance integrated out (see module docstring)."""
    L, _, w, prior_qf, logdet_prior = _posterior_factor(design, eta_star, hyper)
    n = data.n
    a_hat = hyper.a_sigma + 0.5 * n
    b_hat = hyper.b_sigma + 0.5 * (prior_qf + design.yty - float(w @ w))
    if b_hat <= 0:
        raise NumericalError(f"posterior scale b_hat = {b_hat} <= 0")
    return float(-0.5 * n * _kernels.LOG2PI
                 - np.sum(np.log(np.diag(L))) - 0.5 * logdet_prior
                 + hyper.a_sigma * np.log(hyper.b_sigma)
                 - a_hat * np.log(b_hat)
                 + math.lgamma(a_hat) - math.lgamma(hyper.a_sigma))


def draw_coefficients(data: Dataset, design: ClusteredDesign, eta_star,
                      hyper: Hyperparameters, rng: np.random.Generator):
    """One joint conjugate draw: sigma2 ~ IG(a_hat, b_hat), then
    btilde | sigma2 ~ N(m_hat, sigma2 S_hat).  Returns (btilde, sigma2)."""
    m_hat, L, a_hat, b_hat = posterior_coeff_params(design, eta_star, hyper,
                                                    data.n)
    sigma2 = b_hat / rng.gamma(a_hat)
    z = rng.standard_normal(m_hat.shape[0])
    beta_tilde = m_hat + np.sqrt(sigma2) * np.linalg.solve(L.T, z)
    return beta_tilde, float(sigma2)


def draw_eta(beta_star, sigma2: float, hyper: Hyperparameters,
             rng: np.random.Generator) -> np.ndarray:
    """Scale-mixture update: eta_m ~ IG(a_eta + 1/2, b_eta + beta_m^2/(2 sigma2))
    independently for each cluster."""
    beta_star = np.asarray(beta_star, dtype=float)
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    b_hat = hyper.b_eta + beta_star ** 2 / (2.0 * sigma2)
    return b_hat / rng.gamma(hyper.a_eta + 0.5, size=beta_star.shape[0])


class DesignCache:
    """Unscaled per-cluster sufficient statistics for one partition, able to
    evaluate the collapsed marginal of block moves by closed-form increments
    instead of a from-scratch rebuild.

    The per-candidate update adjusts one cluster column of the Gram pieces
    (or appends one) and rescales by the new cluster sizes; this is the same
    arithmetic the sampler kernel uses (literally the same compiled routine).
    """

    def __init__(self, data: Dataset, state: PartitionState,
                 hyper: Hyperparameters):
        self.data = data
        self.hyper = hyper
        self.labels = state.labels.copy()
        self.M = state.M
        sizes = state.cluster_sizes
        T = np.zeros((data.n, self.M))
        np.add.at(T.T, self.labels, data.X.T)
        self.T = T
        self.size = sizes.astype(np.int64)
        self.TtT = T.T @ T
        self.WtT = data.W.T @ T
        self.Tty = T.T @ data.y
        self.WtW = data.W.T @ data.W
        self.Wty = data.W.T @ data.y
        self.yty = float(data.y @ data.y)
        self.m_mu, self.c_mu = hyper.mu_prior(data.q)

    def log_marginal_move(self, block, target, eta_star, aux_eta=None) -> float:
        """log pr(y | partition-with-block-moved, eta), without mutating the
        cache.  `block` lists pixel indices lying in a single cluster;
        `target` is a cluster index, or None to open a new cluster with scale
        `aux_eta`.  An identity move returns the current log marginal.
        """
        block = np.asarray(block, dtype=np.int64)
        eta_star = np.asarray(eta_star, dtype=float)
        if eta_star.shape[0] != self.M:
            raise ValueError("eta_star length must equal current M")
        src = int(self.labels[block[0]])
        if not np.all(self.labels[block] == src):
            raise ValueError("block must lie within a single cluster")
        a = block.shape[0]
        v = self.data.X[:, block].sum(axis=1)
        vT = self.T.T @ v
        vv = float(v @ v)
        vy = float(v @ self.data.y)
        Wv = self.data.W.T @ v

        # detached copies (the kernel routine expects block-removed stats)
        size = self.size.copy()
        TtT = self.TtT.copy()
        WtT = self.WtT.copy()
        Tty = self.Tty.copy()
        size[src] -= a
        TtT[src, :] -= vT
        TtT[:, src] = TtT[src, :]
        # diagonal: (T_s - v)'(T_s - v) needs the cross term twice plus v'v
        TtT[src, src] += vv - vT[src]
        WtT[:, src] -= Wv
        Tty[src] -= vy
        vT[src] -= vv
        src_empty = size[src] == 0

        if target is None:
            tgt = -1
            if aux_eta is None or aux_eta <= 0:
                raise ValueError("a new cluster needs a positive aux_eta")
            aux = float(aux_eta)
        else:
            tgt = int(target)
            if not 0 <= tgt < self.M or (src_empty and tgt == src):
                raise ValueError(f"invalid move target {target}")
            aux = 0.0
        out = _kernels._candidate_marginal(
            tgt, aux, self.M, src, src_empty,
            size, TtT, WtT, Tty, eta_star,
            vT, vv, Wv, vy, a,
            self.WtW, self.Wty, self.yty, self.m_mu, self.c_mu,
            self.hyper.a_sigma, self.hyper.b_sigma, self.data.n)
        if np.isnan(out):
            raise NumericalError("candidate marginal factorization failed")
        return float(out)

    def log_marginal_current(self, eta_star) -> float:
        """Current partition's log marginal via an identity move."""
        m0 = int(np.argmax(self.size))
        block = np.flatnonzero(self.labels == m0)[:1]
        if self.size[m0] > 1:
            return self.log_marginal_move(block, m0, eta_star)
        # all clusters are singletons: re-opening with the same scale is the
        # identity move
        eta_star = np.asarray(eta_star, dtype=float)
        return self.log_marginal_move(block, None, eta_star,
                                      aux_eta=float(eta_star[m0]))


def marginal_delta_for_move(cache: DesignCache, block, target, eta_star,
                            aux_eta=None) -> float:
    """log pr(y | partition-with-`block`-moved-to-`target`, eta_star) from the
    cached sufficient statistics (see :class:`DesignCache`)."""
    return cache.log_marginal_move(block, target, eta_star, aux_eta)
