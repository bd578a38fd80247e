"""Convergence diagnostics: split R-hat, effective sample size, divergences.

R-hat and ESS follow the standard split-chain definitions with the Geyer
initial monotone sequence estimator for the autocorrelation time. Both are
computed on identified functions of the draws: for EZ/AZ models the
structural parameters after sign alignment, for EFA variants the entries of
Lambda Lambda' (plus the rotation-invariant parameters), since raw EFA
loadings are identified only up to rotation and sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fit import Draws, sign_align


def _split(chains: np.ndarray) -> np.ndarray:
    """Split each chain in half: (c, s) -> (2c, s//2). Drops an odd tail draw."""
    c, s = chains.shape
    half = s // 2
    if half < 1:
        raise ValueError("need at least two draws per chain to split")
    return np.concatenate([chains[:, :half], chains[:, half : 2 * half]], axis=0)


def split_rhat(chains: np.ndarray) -> float:
    """Potential scale reduction factor on split chains.

    ``chains`` is (n_chains, n_draws) for one scalar quantity. Returns NaN as
    an explicit undefined marker when the draws are (numerically) constant.
    """
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2:
        raise ValueError("split_rhat needs at least two chains")
    x = _split(chains)
    if np.ptp(x) == 0.0:
        # bit-identical draws; np.var's mean subtraction can still leave
        # rounding noise ~eps^2 that would sneak past the w guard below
        return float("nan")
    m, n = x.shape
    means = x.mean(axis=1)
    vars_ = x.var(axis=1, ddof=1)
    w = vars_.mean()
    b = n * means.var(ddof=1)
    if not np.isfinite(w) or w <= 1.0e-300 * max(1.0, abs(b)):
        return float("nan")
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of one sequence via FFT."""
    n = x.size
    xc = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n]
    return acov / n


def ess_mean(chains: np.ndarray) -> float:
    """Effective sample size for the mean, split chains, Geyer truncation.

    Uses the FFT autocovariance combined across split chains, the initial
    positive sequence over lag pairs (rho_2m + rho_2m+1), and the monotone
    correction. Capped at the total number of draws; NaN for constant chains.
    """
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2:
        raise ValueError("chains must be (n_chains, n_draws)")
    x = _split(chains) if chains.shape[1] >= 4 else chains
    m, n = x.shape
    if n < 3 or np.ptp(x) == 0.0:
        return float("nan")
    acov = np.stack([_autocov(x[i]) for i in range(m)])
    mean_acov = acov.mean(axis=0)
    w = float(mean_acov[0] * n / (n - 1.0))  # mean within-chain sample variance
    var_plus = float(mean_acov[0])
    if m > 1:
        var_plus += float(x.mean(axis=1).var(ddof=1))
    if not np.isfinite(w) or w <= 0 or var_plus <= 0:
        return float("nan")

    rho = 1.0 - (w - mean_acov) / var_plus
    rho[0] = 1.0
    pair_sum = 0.0
    prev = np.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev)
        pair_sum += pair
        prev = pair
        t += 2
    tau = -1.0 + 2.0 * pair_sum
    total = m * n
    if tau <= 1.0 / total:
        return float(total)
    return float(min(total / tau, total))


@dataclass(frozen=True)
class Diagnostics:
    names: tuple[str, ...]
    rhat: np.ndarray
    ess: np.ndarray
    divergences: int
    divergence_rate: float
    rhat_ok: bool
    divergence_ok: bool
    undefined: tuple[str, ...]  # parameters with constant draws (R-hat undefined)

    @property
    def ok(self) -> bool:
        return self.rhat_ok and self.divergence_ok

    def max_rhat(self) -> float:
        finite = self.rhat[np.isfinite(self.rhat)]
        return float(finite.max()) if finite.size else float("nan")

    def min_ess(self) -> float:
        finite = self.ess[np.isfinite(self.ess)]
        return float(finite.min()) if finite.size else float("nan")


def identified_functions(draws: Draws) -> tuple[list[str], np.ndarray]:
    """Per-draw identified quantities for convergence monitoring.

    EZ/AZ: structural parameters of the sign-aligned draws. EFA variants:
    alpha, cut-points, the lower triangle of Lambda Lambda', Omega, psi2.
    """
    post = draws.posterior
    spec = post.spec
    packer = post.packer
    if spec.variant in ("EZ", "AZ"):
        aligned = sign_align(draws)
        return packer.structural_names(), aligned.structural_tensor()

    p, k = spec.p, spec.k
    rr, cc = np.tril_indices(p)
    names = [f"alpha[{j + 1}]" for j in packer.alpha_items]
    for j in packer.ordinal_items:
        names += [f"tau[{j + 1},{s + 1}]" for s in range(spec.items[j].n_categories() - 1)]
    names += [f"LL[{i + 1},{j + 1}]" for i, j in zip(rr, cc)]
    if packer.omega_block is not None:
        names += [f"Omega[{i + 1},{j + 1}]" for i, j in zip(rr, cc)]
    if packer.psi_block is not None:
        names += [f"psi2[{j + 1}]" for j in range(p)]
    out = np.empty((draws.n_chains, draws.n_samples, len(names)))
    for c in range(draws.n_chains):
        for s in range(draws.n_samples):
            ps = packer.unpack(draws.values[c, s])[0]
            LL = ps.Lambda @ ps.Lambda.T
            parts = [ps.alpha[packer.alpha_items]]
            for j in packer.ordinal_items:
                parts.append(ps.cutpoints[j])
            parts.append(LL[rr, cc])
            if ps.Omega is not None:
                parts.append(ps.Omega[rr, cc])
            if ps.psi2 is not None:
                parts.append(ps.psi2)
            out[c, s] = np.concatenate(parts)
    return names, out


def diagnostics(draws: Draws, rhat_threshold: float = 1.05,
                divergence_threshold: float = 0.10) -> Diagnostics:
    """Split R-hat and ESS per identified parameter, plus divergence checks.

    Requires at least two chains. Parameters whose draws are constant get a
    NaN marker and are listed in ``undefined`` instead of poisoning the
    pass/fail flags.
    """
    if draws.n_chains < 2:
        raise ValueError("R-hat needs at least two chains")
    names, tensor = identified_functions(draws)
    q = len(names)
    rhat = np.empty(q)
    ess = np.empty(q)
    for i in range(q):
        rhat[i] = split_rhat(tensor[:, :, i])
        ess[i] = ess_mean(tensor[:, :, i])
    undefined = tuple(n for n, r in zip(names, rhat) if not np.isfinite(r))
    div = int(draws.divergences.sum())
    rate = draws.divergence_rate()
    finite = rhat[np.isfinite(rhat)]
    return Diagnostics(
        names=tuple(names),
        rhat=rhat,
        ess=ess,
        divergences=div,
        divergence_rate=rate,
        rhat_ok=bool(finite.size == 0 or finite.max() <= rhat_threshold),
        divergence_ok=bool(rate <= divergence_threshold),
        undefined=undefined,
    )
