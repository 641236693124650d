"""Gibbs-type random-partition priors (DP, Pitman-Yor, MFM) in log space.

A Gibbs-type prior puts unnormalized mass V_p(M) * prod_m W(|C_m|) on a
partition of p items into M blocks.  Combined with the Potts smoothness term
this gives the spatial partition prior used by the sampler:

    log pr(pi) = potts_energy(pi) + log V_p(M) + sum_m log W(|C_m|)   (+ const)

All quantities are evaluated in log space; V tables are precomputed per
(model, p) and cached, since the MFM series is the only expensive entry and
is reused every sweep.  The three weight families:

    DP(alpha):        V_p(M) = Gamma(alpha) alpha^M / Gamma(alpha+p)
                      W(s)   = Gamma(s)
    PY(alpha, delta): V_p(M) = Gamma(alpha+1) prod_{m<M}(alpha+m delta)
                               / Gamma(alpha+p)
                      W(s)   = Gamma(s-delta) / Gamma(1-delta)
    MFM(gamma, P_L):  V_p(M) = sum_{l>=M} Gamma(gamma l) l! /
                               [Gamma(gamma l + p) (l-M)!] P_L(l)
                      W(s)   = Gamma(s+gamma) / Gamma(gamma)

DP evaluation is routed through the PY arithmetic with delta = 0, so
PY(delta=0) and DP are bit-identical, not merely equal to rounding.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from . import _kernels
from .lattice import Lattice, PartitionState, potts_energy


class TruncationError(RuntimeError):
    """MFM V-series truncation tail exceeds the requested tolerance."""


def shifted_poisson_log_pmf(lam: float):
    """log P(L = l) for L - 1 ~ Poisson(lam), supported on {1, 2, ...}."""
    if lam <= 0:
        raise ValueError("Poisson rate must be positive")

    def log_pmf(l: int) -> float:
        if l < 1:
            return -np.inf
        return -lam + (l - 1) * math.log(lam) - math.lgamma(l)

    return log_pmf


@dataclass(frozen=True)
class GibbsModel:
    """Base for the three partition-weight families; immutable (apart from an
    internal V-table cache), so instances are safe to share across chains."""

    # kernel encoding: kind 0 = DP/PY (w = discount), kind 1 = MFM (w = gamma)

    @property
    def kind(self) -> int:
        raise NotImplementedError

    @property
    def w_param(self) -> float:
        raise NotImplementedError

    def _build_log_v(self, p: int) -> "LogVTable":
        raise NotImplementedError

    def log_v_table(self, p: int) -> "LogVTable":
        """Cached table of log V_p(M), M = 1..p (index 0 is a placeholder)."""
        if p < 1:
            raise ValueError("p must be >= 1")
        tables = getattr(self, "_tables", None)
        if tables is None:
            tables = {}
            object.__setattr__(self, "_tables", tables)
        table = tables.get(p)
        if table is None:
            table = self._build_log_v(p)
            tables[p] = table
        return table


@dataclass(frozen=True)
class LogVTable:
    """log V_p(M) indexed by M (entry 0 unused, set to 0.0), plus a per-M
    absolute bound on the truncation error of exp(logv) (zero for the
    closed-form DP/PY entries)."""

    p: int
    logv: np.ndarray
    log_tail: np.ndarray


@dataclass(frozen=True)
class PY(GibbsModel):
    """Pitman-Yor weights: discount delta in [0,1), concentration alpha > -delta."""

    alpha: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"discount must be in [0, 1), got {self.delta}")
        if self.alpha <= -self.delta:
            raise ValueError(
                f"need alpha > -delta, got alpha={self.alpha}, delta={self.delta}")

    @property
    def kind(self) -> int:
        return 0

    @property
    def w_param(self) -> float:
        return self.delta

    def _build_log_v(self, p: int) -> LogVTable:
        logv = np.zeros(p + 1)
        base = math.lgamma(self.alpha + 1.0) - math.lgamma(self.alpha + p)
        acc = 0.0
        logv[1] = base
        for m in range(2, p + 1):
            acc += math.log(self.alpha + (m - 1) * self.delta)
            logv[m] = base + acc
        return LogVTable(p, logv, np.full(p + 1, -np.inf))


@dataclass(frozen=True)
class DP(PY):
    """Dirichlet-process weights with concentration alpha > 0 (PY at delta=0)."""

    alpha: float = 1.0
    delta: float = field(default=0.0, init=False)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"concentration must be positive, got {self.alpha}")


@dataclass(frozen=True)
class MFM(GibbsModel):
    """Mixture-of-finite-mixtures weights.

    gamma > 0 tilts towards equally sized clusters; the prior on the number
    of components is P_L (default: 1 + Poisson(lam)).  The V-series is
    truncated at l_max, which is extended automatically (doubling) until the
    last term's relative contribution drops below `series_rtol`; the residual
    tail is bounded and reported in the table.
    """

    gamma: float = 1.0
    lam: float = 1.0
    l_max: int = 200
    log_pl: callable = field(default=None, compare=False, repr=False)
    series_rtol: float = field(default=1e-12, repr=False)
    tail_tol: float = field(default=1e-8, repr=False)
    _hard_cap: int = field(default=200_000, repr=False, compare=False)

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.log_pl is None:
            object.__setattr__(self, "log_pl", shifted_poisson_log_pmf(self.lam))
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")

    @property
    def kind(self) -> int:
        return 1

    @property
    def w_param(self) -> float:
        return self.gamma

    def _log_term(self, l: np.ndarray, p: int, M: int) -> np.ndarray:
        g = self.gamma
        lp = np.array([self.log_pl(int(v)) for v in l])
        return (gammaln(g * l) + gammaln(l + 1.0)
                - gammaln(g * l + p) - gammaln(l - M + 1.0) + lp)

    def _build_log_v(self, p: int) -> LogVTable:
        logv = np.zeros(p + 1)
        log_tail = np.full(p + 1, -np.inf)
        l_max = self.l_max
        for M in range(1, p + 1):
            while True:
                l = np.arange(M, l_max + 1, dtype=float)
                terms = self._log_term(l, p, M)
                total = logsumexp(terms)
                if total == -np.inf:
                    # P_L puts no mass on l >= M: V vanishes exactly
                    logv[M] = -np.inf
                    break
                if terms[-1] - total < math.log(self.series_rtol):
                    break
                if l_max >= self._hard_cap:
                    raise TruncationError(
                        f"MFM V series did not converge by l={l_max} "
                        f"(p={p}, M={M}); last relative term "
                        f"{math.exp(terms[-1] - total):.3e}")
                l_max = min(2 * l_max, self._hard_cap)
            if total == -np.inf:
                continue
            # geometric bound on the dropped tail
            t1, t2 = self._log_term(np.array([l_max + 1.0, l_max + 2.0]), p, M)
            if t1 == -np.inf:
                tail = -np.inf
            elif t2 - t1 < math.log(0.9):
                tail = t1 - math.log1p(-math.exp(t2 - t1))
            else:
                tail = np.inf
            if tail - total > math.log(self.tail_tol):
                raise TruncationError(
                    f"MFM truncation tail {math.exp(tail - total):.3e} "
                    f"(relative) exceeds tolerance {self.tail_tol:.1e} at "
                    f"p={p}, M={M}, l_max={l_max}")
            logv[M] = total
            log_tail[M] = tail
        return LogVTable(p, logv, log_tail)


def log_V(model: GibbsModel, p: int, M: int) -> float:
    """log V_p(M) for the model's weight family."""
    if not 1 <= M <= p:
        raise ValueError(f"need 1 <= M <= p, got M={M}, p={p}")
    return float(model.log_v_table(p).logv[M])


def log_W(model: GibbsModel, cluster_size: int) -> float:
    """log W(|C_m|) for a block of the given size."""
    if cluster_size < 1:
        raise ValueError(f"cluster size must be >= 1, got {cluster_size}")
    return float(_kernels.log_w_size(model.kind, model.w_param,
                                     float(cluster_size)))


def log_pred_existing(model: GibbsModel, target_size_without: int,
                      moving_size: int) -> float:
    """Log predictive term for merging a block of `moving_size` items into an
    existing cluster currently holding `target_size_without` items."""
    if target_size_without < 1:
        raise ValueError("target cluster size must be >= 1")
    if moving_size < 0:
        raise ValueError("moving size must be >= 0")
    return float(_kernels.log_pred_existing_kernel(
        model.kind, model.w_param, float(target_size_without),
        float(moving_size)))


def log_pred_new(model: GibbsModel, p: int, M_without: int,
                 moving_size: int) -> float:
    """Log predictive term for opening a new cluster with a block of
    `moving_size` items, when M_without clusters remain without the block.

    For M_without = 0 the V-ratio convention log V_p(1) - 0 is used; every
    candidate is then a new cluster and the shared constant cancels.
    """
    if moving_size < 1:
        raise ValueError("moving size must be >= 1")
    if M_without < 0:
        raise ValueError("M_without must be >= 0")
    if M_without + 1 > p:
        raise ValueError(f"cannot open cluster {M_without + 1} with p={p}")
    table = model.log_v_table(p)
    return float(_kernels.log_pred_new_kernel(
        model.kind, model.w_param, table.logv, M_without, float(moving_size)))


def log_prior_partition(model: GibbsModel, state: PartitionState,
                        lattice: Lattice) -> float:
    """Log unnormalized Potts-Gibbs prior mass of a partition:
    potts_energy + log V_p(M) + sum_m log W(|C_m|)."""
    if state.p != lattice.p:
        raise ValueError("partition size does not match lattice")
    sizes = state.cluster_sizes
    out = potts_energy(lattice, state) + log_V(model, state.p, state.M)
    for s in sizes:
        out += log_W(model, int(s))
    return float(out)
