"""Gibbs-sweep orchestration: partition update, coefficient update, scale
update, trace recording, and fit persistence.

Each iteration runs the three conditional updates in order: (1) one
generalized Swendsen-Wang partition sweep with the coefficients collapsed,
(2) a joint conjugate draw of the fixed effects, cluster coefficients and
noise variance, (3) the cluster-scale updates.  Chains are independent;
per-chain RNG streams are spawned from the master seed with
numpy.random.SeedSequence (kernel streams get one child seed, the numpy
Generator for steps 2-3 another), so a (config, seed) pair reproduces traces
bit-exactly on one platform.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gsw as _gsw
from .lattice import PartitionState, serialize_labels
from .partition_priors import (DP, GibbsModel, MFM, PY, log_prior_partition)
from .regression import (Dataset, Hyperparameters, NumericalError,
                         build_design, draw_coefficients, draw_eta)
from .simulate import univariate_beta_hats
from .summary import pixel_beta


@dataclass(frozen=True)
class RunConfig:
    iterations: int = 5000
    burn_in: int = 2000
    thin: int = 2
    chains: int = 1
    seed: int = 0
    model: GibbsModel = field(default_factory=DP)
    gsw: _gsw.GswConfig = field(default_factory=_gsw.GswConfig)
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    upsilon: float = 1.0
    init: str = "tiles:5"

    def __post_init__(self):
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.upsilon < 0:
            raise ValueError("upsilon must be nonnegative")


@dataclass
class FitResult:
    """Retained draws plus light diagnostics for one or more chains."""

    partition_draws: np.ndarray          # (R, p) canonical 0-based labels
    mu_draws: np.ndarray                 # (R, q)
    sigma2_draws: np.ndarray             # (R,)
    beta_star_draws: list                # R arrays of varying length M_r
    eta_star_draws: list                 # R arrays of varying length M_r
    beta_image_mean: np.ndarray          # (p,) posterior-mean per-pixel beta
    diagnostics: dict                    # chain, iteration, logpost, M, O, bonds
    config_echo: dict

    @property
    def n_draws(self) -> int:
        return self.partition_draws.shape[0]

    def beta_images(self) -> np.ndarray:
        """(R, p) per-pixel coefficient images reconstructed per draw."""
        return np.stack([
            pixel_beta(self.partition_draws[r], self.beta_star_draws[r])
            for r in range(self.n_draws)])

    def coeff_draws(self) -> list:
        """[(mu, beta_star, sigma2)] per retained draw (metrics input)."""
        return [(self.mu_draws[r], self.beta_star_draws[r],
                 float(self.sigma2_draws[r])) for r in range(self.n_draws)]

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "partitions.csv", "w") as fh:
            for r in range(self.n_draws):
                fh.write(serialize_labels(self.partition_draws[r]) + "\n")
        q = self.mu_draws.shape[1]
        p = self.partition_draws.shape[1]
        beta = self.beta_images()
        with open(directory / "coefficients.csv", "w") as fh:
            header = ([f"mu_{i + 1}" for i in range(q)] + ["sigma2"]
                      + [f"beta_{j + 1}" for j in range(p)])
            fh.write(",".join(header) + "\n")
            for r in range(self.n_draws):
                row = np.concatenate([self.mu_draws[r],
                                      [self.sigma2_draws[r]], beta[r]])
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        with open(directory / "diagnostics.csv", "w") as fh:
            cols = list(self.diagnostics)
            fh.write(",".join(cols) + "\n")
            for row in zip(*[self.diagnostics[c] for c in cols]):
                fh.write(",".join(f"{v:.17g}" if isinstance(v, float)
                                  else str(v) for v in row) + "\n")
        with open(directory / "config.json", "w") as fh:
            json.dump(self.config_echo, fh, indent=2, sort_keys=True)
            fh.write("\n")


def initialize_partition(lattice, policy: str,
                         rng: np.random.Generator) -> PartitionState:
    """Initial labeling: 'single', 'singletons', 'random:K', or 'tiles:k'."""
    p = lattice.p
    if policy == "single":
        return PartitionState(np.zeros(p, dtype=np.int64), canonical=True)
    if policy == "singletons":
        return PartitionState(np.arange(p, dtype=np.int64), canonical=True)
    if policy.startswith("random:"):
        k = int(policy.split(":", 1)[1])
        if not 1 <= k <= p:
            raise ValueError(f"random-K needs 1 <= K <= {p}, got {k}")
        return PartitionState(rng.integers(k, size=p))
    if policy.startswith("tiles:"):
        k = int(policy.split(":", 1)[1])
        if k < 1:
            raise ValueError("tile size must be >= 1")
        rows, cols = np.divmod(np.arange(p), lattice.width)
        tiles_per_row = -(-lattice.width // k)
        labels = (rows // k) * tiles_per_row + cols // k
        return PartitionState(labels)
    raise ValueError(f"unknown initialization policy {policy!r}")


def log_unnormalized_posterior(data: Dataset, state: PartitionState,
                               mu, beta_star, sigma2, eta_star,
                               model: GibbsModel, hyper: Hyperparameters,
                               lattice) -> float:
    """Sum of the log likelihood, all coefficient/scale log priors and the
    log Potts-Gibbs partition mass (trace diagnostic; the Potts normalizing
    constant is an additive constant within a run and is omitted)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    beta_star = np.asarray(beta_star, dtype=float)
    eta_star = np.asarray(eta_star, dtype=float)
    bpix = pixel_beta(state.labels, beta_star)
    resid = data.y - data.W @ mu - data.X @ bpix
    n = data.n
    out = -0.5 * n * math.log(2 * math.pi * sigma2) \
        - 0.5 * float(resid @ resid) / sigma2
    m_mu, c_mu = hyper.mu_prior(data.q)
    out += float(-0.5 * np.sum(np.log(2 * np.pi * sigma2 * c_mu))
                 - 0.5 * np.sum((mu - m_mu) ** 2 / (sigma2 * c_mu)))
    out += float(-0.5 * np.sum(np.log(2 * np.pi * sigma2 * eta_star))
                 - 0.5 * np.sum(beta_star ** 2 / (sigma2 * eta_star)))
    out += _log_invgamma(sigma2, hyper.a_sigma, hyper.b_sigma)
    out += float(np.sum([_log_invgamma(e, hyper.a_eta, hyper.b_eta)
                         for e in eta_star]))
    out += log_prior_partition(model, state, lattice)
    return float(out)


def _log_invgamma(x: float, a: float, b: float) -> float:
    return a * math.log(b) - math.lgamma(a) - (a + 1) * math.log(x) - b / x


def run_chain(data: Dataset, config: RunConfig, chain_id: int = 0,
              seed_seq: np.random.SeedSequence = None) -> FitResult:
    """One chain of the three-step sweep; deterministic given the seed."""
    if seed_seq is None:
        seed_seq = np.random.SeedSequence(config.seed)
    kernel_seed_seq, numpy_seed_seq = seed_seq.spawn(2)
    rng = np.random.default_rng(numpy_seed_seq)
    kernel_seed = int(kernel_seed_seq.generate_state(1, np.uint64)[0] >> 1)

    lattice = data.lattice.with_coupling(config.upsilon)
    gsw_cfg = config.gsw
    if gsw_cfg.tau > 0 and gsw_cfg.kappa > 0 and gsw_cfg.beta_hat is None:
        gsw_cfg = _gsw.GswConfig(gsw_cfg.kappa, gsw_cfg.tau, gsw_cfg.h,
                                 univariate_beta_hats(data))
    args = _gsw._KernelArgs(data, lattice, config.model, config.hyper, gsw_cfg)

    state = initialize_partition(lattice, config.init, rng)
    z = state.labels.copy()
    M = state.M
    eta = np.zeros(lattice.p + 1)
    eta[:M] = config.hyper.b_eta / config.hyper.a_eta
    bonds = np.zeros(lattice.n_pairs, dtype=np.int8)
    _gsw.seed_sampler(kernel_seed)

    keep = []
    mu_d, sig_d, beta_d, eta_d = [], [], [], []
    diag = {"chain": [], "iteration": [], "logpost": [], "M": [],
            "O": [], "bonds": []}
    for it in range(config.iterations):
        try:
            M, O, nbonds, status = args.sweep(z, eta, M, bonds)
            if status != 0:
                raise NumericalError(
                    f"partition sweep failed at nested cluster {status - 1}")
            pstate = PartitionState(z, canonical=True)
            design = build_design(data, pstate)
            beta_tilde, sigma2 = draw_coefficients(
                data, design, eta[:M], config.hyper, rng)
            mu = beta_tilde[:data.q]
            beta_star = beta_tilde[data.q:]
            eta[:M] = draw_eta(beta_star, sigma2, config.hyper, rng)
        except NumericalError as exc:
            raise NumericalError(
                f"chain {chain_id}, iteration {it}: {exc}") from exc
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            lp = log_unnormalized_posterior(
                data, pstate, mu, beta_star, sigma2, eta[:M],
                config.model, config.hyper, lattice)
            if not math.isfinite(lp):
                raise NumericalError(
                    f"chain {chain_id}, iteration {it}: non-finite log posterior")
            keep.append(z.copy())
            mu_d.append(mu.copy())
            sig_d.append(sigma2)
            beta_d.append(beta_star.copy())
            eta_d.append(eta[:M].copy())
            diag["chain"].append(chain_id)
            diag["iteration"].append(it)
            diag["logpost"].append(lp)
            diag["M"].append(M)
            diag["O"].append(O)
            diag["bonds"].append(nbonds)

    draws = np.asarray(keep, dtype=np.int64)
    beta_mean = np.zeros(lattice.p)
    for r in range(draws.shape[0]):
        beta_mean += pixel_beta(draws[r], beta_d[r])
    beta_mean /= max(1, draws.shape[0])
    return FitResult(draws, np.asarray(mu_d), np.asarray(sig_d),
                     beta_d, eta_d, beta_mean, diag, config_to_dict(config))


def run(data: Dataset, config: RunConfig) -> FitResult:
    """Run config.chains chains sequentially and concatenate retained draws."""
    root = np.random.SeedSequence(config.seed)
    children = root.spawn(config.chains)
    fits = [run_chain(data, config, chain_id=c, seed_seq=children[c])
            for c in range(config.chains)]
    if len(fits) == 1:
        return fits[0]
    diag = {k: sum((f.diagnostics[k] for f in fits), []) for k in fits[0].diagnostics}
    draws = np.concatenate([f.partition_draws for f in fits])
    beta_mean = np.mean([f.beta_image_mean for f in fits], axis=0)
    return FitResult(
        draws,
        np.concatenate([f.mu_draws for f in fits]),
        np.concatenate([f.sigma2_draws for f in fits]),
        sum((f.beta_star_draws for f in fits), []),
        sum((f.eta_star_draws for f in fits), []),
        beta_mean, diag, fits[0].config_echo)


# ----------------------------------------------------------------------
# config (de)serialization for reproducible runs
# ----------------------------------------------------------------------

def model_to_dict(model: GibbsModel) -> dict:
    if isinstance(model, DP):
        return {"variant": "DP", "alpha": model.alpha}
    if isinstance(model, PY):
        return {"variant": "PY", "alpha": model.alpha, "delta": model.delta}
    if isinstance(model, MFM):
        return {"variant": "MFM", "gamma": model.gamma, "lam": model.lam,
                "l_max": model.l_max}
    raise TypeError(f"unknown model type {type(model)!r}")


def model_from_dict(d: dict) -> GibbsModel:
    variant = d.get("variant", "DP").upper()
    if variant == "DP":
        return DP(alpha=float(d.get("alpha", 1.0)))
    if variant == "PY":
        return PY(alpha=float(d.get("alpha", 1.0)),
                  delta=float(d.get("delta", 0.0)))
    if variant == "MFM":
        return MFM(gamma=float(d.get("gamma", 1.0)),
                   lam=float(d.get("lam", 1.0)),
                   l_max=int(d.get("l_max", 200)))
    raise ValueError(f"unknown model variant {d.get('variant')!r}")


def config_to_dict(config: RunConfig) -> dict:
    hyper = config.hyper
    return {
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "chains": config.chains,
        "seed": config.seed,
        "model": model_to_dict(config.model),
        "upsilon": config.upsilon,
        "kappa": config.gsw.kappa,
        "tau": config.gsw.tau,
        "h": config.gsw.h,
        "init": config.init,
        "hyper": {
            "m_mu": np.asarray(hyper.m_mu).tolist(),
            "c_mu": np.asarray(hyper.c_mu).tolist(),
            "a_sigma": hyper.a_sigma, "b_sigma": hyper.b_sigma,
            "a_eta": hyper.a_eta, "b_eta": hyper.b_eta,
        },
    }


def config_from_dict(d: dict) -> RunConfig:
    hyper_d = d.get("hyper", {})
    hyper = Hyperparameters(
        m_mu=np.asarray(hyper_d.get("m_mu", 0.0)),
        c_mu=np.asarray(hyper_d.get("c_mu", 100.0)),
        a_sigma=float(hyper_d.get("a_sigma", 1.0)),
        b_sigma=float(hyper_d.get("b_sigma", 1.0)),
        a_eta=float(hyper_d.get("a_eta", 1.0)),
        b_eta=float(hyper_d.get("b_eta", 1.0)))
    gsw_cfg = _gsw.GswConfig(kappa=float(d.get("kappa", 0.5)),
                             tau=float(d.get("tau", 1.0)),
                             h=int(d.get("h", 1)))
    return RunConfig(
        iterations=int(d.get("iterations", 5000)),
        burn_in=int(d.get("burn_in", 2000)),
        thin=int(d.get("thin", 2)),
        chains=int(d.get("chains", 1)),
        seed=int(d.get("seed", 0)),
        model=model_from_dict(d.get("model", {"variant": "DP"})),
        gsw=gsw_cfg,
        hyper=hyper,
        upsilon=float(d.get("upsilon", 1.0)),
        init=str(d.get("init", "tiles:5")))


def load_fit(directory):
    """(partition_draws, mu_draws, sigma2_draws, beta_images, config_echo)
    from a saved fit directory."""
    directory = Path(directory)
    for req in ("partitions.csv", "coefficients.csv", "config.json"):
        if not (directory / req).exists():
            raise FileNotFoundError(f"missing fit file: {directory / req}")
    with open(directory / "partitions.csv") as fh:
        draws = np.array([[int(v) - 1 for v in line.strip().split(",")]
                          for line in fh if line.strip()], dtype=np.int64)
    coeff = np.loadtxt(directory / "coefficients.csv", delimiter=",",
                       skiprows=1, ndmin=2)
    with open(directory / "coefficients.csv") as fh:
        header = fh.readline().strip().split(",")
    q = sum(1 for c in header if c.startswith("mu_"))
    mu = coeff[:, :q]
    sigma2 = coeff[:, q]
    beta = coeff[:, q + 1:]
    with open(directory / "config.json") as fh:
        echo = json.load(fh)
    return draws, mu, sigma2, beta, echo
