"""Model fitting: multi-chain HMC over the unconstrained posterior.

Chains draw independent RNG streams from one master seed via SeedSequence
spawn keys, so a fit is reproducible bit for bit from
(spec, data, config, seed) on a fixed platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import hmc
from .likelihood import Posterior
from .model import CONTINUOUS, Dataset, ModelSpec, ParameterSet, ValidatedSpec
from .packing import sign_align_matrix


def child_seed(master: int, *path: int) -> int:
    """Derive an independent 64-bit seed from a master seed and an index path."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(x) for x in path))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for hmc_run. ``warmup=None`` resolves to 1000 iterations for
    continuous models and 2000 for categorical ones."""

    chains: int = 4
    warmup: int | None = None
    samples: int = 2000
    seed: int = 0
    leapfrog_steps: int = 32
    target_accept: float = 0.8
    max_energy_error: float = 1000.0
    step_size: float | None = None
    adapt_step: bool = True
    adapt_mass: bool = True
    init_buffer: int = 75
    base_window: int = 25
    term_buffer: int = 50
    init_radius: float = 1.0
    max_init_tries: int = 100

    def resolve_warmup(self, kind: str) -> int:
        if self.warmup is not None:
            return self.warmup
        return 1000 if kind == CONTINUOUS else 2000

    def with_seed(self, seed: int) -> "SamplerConfig":
        return replace(self, seed=seed)


@dataclass
class Draws:
    """Posterior draws from all chains, in unconstrained coordinates.

    Arrays are read-only; treat instances as immutable. ``posterior`` gives
    access to the bound model (spec, packer, data) that produced the draws.
    """

    values: np.ndarray            # (chains, samples, dim)
    logp: np.ndarray              # (chains, samples)
    accept_stat: np.ndarray       # (chains, samples)
    divergences: np.ndarray       # (chains,) post warm-up counts
    warmup_divergences: np.ndarray
    step_sizes: np.ndarray        # (chains,)
    inv_mass: np.ndarray          # (chains, dim)
    posterior: Posterior
    config: SamplerConfig

    def __post_init__(self):
        for name in ("values", "logp", "accept_stat", "divergences",
                     "warmup_divergences", "step_sizes", "inv_mass"):
            a = np.ascontiguousarray(getattr(self, name))
            a.flags.writeable = False
            setattr(self, name, a)

    @property
    def n_chains(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def flat(self) -> np.ndarray:
        """(chains*samples, dim) view of the draws."""
        return self.values.reshape(-1, self.dim)

    def divergence_rate(self) -> float:
        return float(self.divergences.sum()) / (self.n_chains * self.n_samples)

    def parameter_sets(self, thin: int = 1) -> list[ParameterSet]:
        """Constrained parameter sets of every ``thin``-th draw, chains concatenated."""
        packer = self.posterior.packer
        return [packer.unpack(v)[0] for v in self.flat()[::thin]]

    def structural_names(self) -> list[str]:
        return self.posterior.packer.structural_names()

    def structural_tensor(self) -> np.ndarray:
        """(chains, samples, q) constrained structural parameters per draw."""
        packer = self.posterior.packer
        q = len(packer.structural_names())
        out = np.empty((self.n_chains, self.n_samples, q))
        for c in range(self.n_chains):
            for s in range(self.n_samples):
                ps = packer.unpack(self.values[c, s])[0]
                out[c, s] = packer.structural_values(ps)
        return out


def sign_align(draws: Draws, spec: ModelSpec | None = None) -> Draws:
    """Resolve factor sign indeterminacy: flip factors so leading loadings
    are nonnegative in every draw.

    Returns new Draws; the implied covariance Lambda Phi Lambda' and the log
    posterior of every draw are unchanged exactly (sign flips are exact in
    floating point). Raises for EFA variants, whose loadings are identified
    only up to rotation.
    """
    packer = draws.posterior.packer
    if spec is not None and spec is not draws.posterior.spec and spec != draws.posterior.spec:
        raise ValueError("spec does not match the one the draws were sampled from")
    aligned = np.empty_like(draws.values)
    for c in range(draws.n_chains):
        aligned[c] = sign_align_matrix(draws.values[c], packer)
    return Draws(
        values=aligned, logp=draws.logp.copy(), accept_stat=draws.accept_stat.copy(),
        divergences=draws.divergences.copy(),
        warmup_divergences=draws.warmup_divergences.copy(),
        step_sizes=draws.step_sizes.copy(), inv_mass=draws.inv_mass.copy(),
        posterior=draws.posterior, config=draws.config,
    )


def run_posterior(post: Posterior, config: SamplerConfig) -> Draws:
    """Run the configured number of HMC chains on a bound posterior."""
    if config.chains < 1:
        raise ValueError("need at least one chain")
    if config.samples < 1:
        raise ValueError("need at least one sampling iteration")
    warmup = config.resolve_warmup(post.kind)
    if warmup < 0:
        raise ValueError("warmup cannot be negative")

    results = []
    for c in range(config.chains):
        ss = np.random.SeedSequence(config.seed, spawn_key=(c,))
        rng = np.random.default_rng(ss)
        q0 = None
        for _ in range(config.max_init_tries):
            cand = post.initial_vector(rng, config.init_radius)
            lp, _ = post.logpdf_and_grad(cand)
            if np.isfinite(lp):
                q0 = cand
                break
        if q0 is None:
            raise RuntimeError(
                f"chain {c}: no finite-density initial point in {config.max_init_tries} tries"
            )
        results.append(
            hmc.run_chain(
                post.logpdf_and_grad, q0, warmup, config.samples, rng,
                leapfrog_steps=config.leapfrog_steps,
                target_accept=config.target_accept,
                max_energy_error=config.max_energy_error,
                step_size=config.step_size,
                adapt_step=config.adapt_step,
                adapt_mass=config.adapt_mass,
                init_buffer=config.init_buffer,
                base_window=config.base_window,
                term_buffer=config.term_buffer,
            )
        )
    return Draws(
        values=np.stack([r.samples for r in results]),
        logp=np.stack([r.logp for r in results]),
        accept_stat=np.stack([r.accept_stat for r in results]),
        divergences=np.array([r.divergences for r in results]),
        warmup_divergences=np.array([r.warmup_divergences for r in results]),
        step_sizes=np.array([r.step_size for r in results]),
        inv_mass=np.stack([r.inv_mass for r in results]),
        posterior=post,
        config=config,
    )


def hmc_run(spec: ModelSpec | ValidatedSpec, data: Dataset, config: SamplerConfig) -> Draws:
    """Fit a model: validate the spec, bind it to the data, and sample."""
    return run_posterior(Posterior(spec, data), config)
