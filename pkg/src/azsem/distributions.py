"""Random-variate kit and log densities used by the model priors.

Samplers take a ``numpy.random.Generator`` explicitly so that every draw is
attributable to a seed path. The log densities are hand-written (they sit on
the sampler's hot path via the priors) and are pinned against independent
implementations in the test suite.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, gammaln, multigammaln, ndtr

LOG2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------- samplers

def mv_normal(rng: np.random.Generator, mean, cov, size: int | None = None) -> np.ndarray:
    """Multivariate normal draws via the Cholesky factor of ``cov``."""
    mean = np.asarray(mean, dtype=float)
    L = np.linalg.cholesky(np.asarray(cov, dtype=float))
    shape = (mean.size,) if size is None else (size, mean.size)
    e = rng.standard_normal(shape)
    return mean + e @ L.T


def inv_wishart(rng: np.random.Generator, scale, df: float, size: int | None = None) -> np.ndarray:
    """Inverse-Wishart draws with scale matrix ``scale`` and ``df`` degrees.

    Parameterized so that E[X] = scale / (df - p - 1) for df > p + 1.
    Uses the Bartlett factorization: X = (L T^-T)(L T^-T)' with
    L = chol(scale) and T T' ~ Wishart(I, df).
    """
    scale = np.asarray(scale, dtype=float)
    p = scale.shape[0]
    if df <= p - 1:
        raise ValueError("df must exceed p - 1")
    L = np.linalg.cholesky(scale)
    m = 1 if size is None else size
    out = np.empty((m, p, p))
    for s in range(m):
        T = np.zeros((p, p))
        ii = np.arange(p)
        T[ii, ii] = np.sqrt(rng.chisquare(df - ii))
        T[np.tril_indices(p, -1)] = rng.standard_normal(p * (p - 1) // 2)
        # solve T W = L'  =>  W = T^-1 L', so W' W = L (T T')^-1 L'
        W = np.linalg.solve(T, L.T)
        out[s] = W.T @ W
    return out[0] if size is None else out


def lkj_correlation(rng: np.random.Generator, dim: int, eta: float = 1.0, size: int | None = None) -> np.ndarray:
    """LKJ-distributed correlation matrices via the onion method."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if eta <= 0:
        raise ValueError("eta must be positive")
    m = 1 if size is None else size
    out = np.empty((m, dim, dim))
    for s in range(m):
        C = np.eye(dim)
        if dim > 1:
            beta = eta + (dim - 2.0) / 2.0
            r12 = 2.0 * rng.beta(beta, beta) - 1.0
            C[0, 1] = C[1, 0] = r12
            for j in range(2, dim):
                beta -= 0.5
                y = rng.beta(j / 2.0, beta)
                w = rng.standard_normal(j)
                w /= np.linalg.norm(w)
                Lj = np.linalg.cholesky(C[:j, :j])
                new = np.sqrt(y) * (Lj @ w)
                C[:j, j] = new
                C[j, :j] = new
        out[s] = C
    return out[0] if size is None else out


def inv_gamma(rng: np.random.Generator, shape: float, scale: float, size=None) -> np.ndarray | float:
    """Inverse-gamma draws with density b^a / Gamma(a) x^{-a-1} e^{-b/x}."""
    if shape <= 0 or scale <= 0:
        raise ValueError("shape and scale must be positive")
    g = rng.gamma(shape, 1.0 / scale, size=size)
    return 1.0 / g


def bernoulli(rng: np.random.Generator, prob, size=None) -> np.ndarray:
    prob = np.asarray(prob, dtype=float)
    if np.any((prob < 0) | (prob > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    shape = prob.shape if size is None else size
    return (rng.random(shape) < prob).astype(np.int64)


def multinomial(rng: np.random.Generator, n: int, pvals, size=None) -> np.ndarray:
    pvals = np.asarray(pvals, dtype=float)
    if np.any(pvals < 0):
        raise ValueError("probabilities must be nonnegative")
    return rng.multinomial(n, pvals / pvals.sum(), size=size)


def link_cdf(link: str, x: np.ndarray) -> np.ndarray:
    if link == "logit":
        return expit(x)
    if link == "probit":
        return ndtr(x)
    raise ValueError(f"unknown link {link!r}")


def categorical_ordinal(rng: np.random.Generator, cutpoints, eta, link: str = "logit") -> np.ndarray:
    """Ordinal codes 0..m-1 from linear predictors and increasing cut-points.

    P(y <= s-1) = F(tau_s - eta), so a uniform draw U yields the code
    #{s : U > F(tau_s - eta)}.
    """
    tau = np.asarray(cutpoints, dtype=float)
    eta = np.asarray(eta, dtype=float)
    G = link_cdf(link, tau[None, :] - eta[:, None])
    u = rng.random(eta.shape[0])
    return (u[:, None] > G).sum(axis=1).astype(np.int64)


_SAMPLERS = {
    "mv_normal": mv_normal,
    "inv_wishart": inv_wishart,
    "lkj_correlation": lkj_correlation,
    "inv_gamma": inv_gamma,
    "bernoulli": bernoulli,
    "multinomial": multinomial,
    "categorical_ordinal": categorical_ordinal,
}


def sample_distribution(kind: str, params: dict, rng: np.random.Generator):
    """Dispatch to a named sampler: kind in {mv_normal, inv_wishart,
    lkj_correlation, inv_gamma, bernoulli, multinomial, categorical_ordinal}."""
    try:
        fn = _SAMPLERS[kind]
    except KeyError:
        raise ValueError(f"unknown distribution kind {kind!r}") from None
    return fn(rng, **params)


# ------------------------------------------------------------ log densities

def normal_logpdf(x, var: float):
    x = np.asarray(x, dtype=float)
    return -0.5 * (LOG2PI + np.log(var)) - 0.5 * x * x / var


def inv_gamma_logpdf(x, shape: float, scale: float):
    x = np.asarray(x, dtype=float)
    return shape * np.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x


def half_cauchy_logpdf(x, scale: float):
    """Half-Cauchy on [0, inf) with the given scale."""
    x = np.asarray(x, dtype=float)
    return np.log(2.0) - np.log(np.pi) - np.log(scale) - np.log1p((x / scale) ** 2)


def inv_wishart_logpdf(X: np.ndarray, scale: np.ndarray, df: float) -> float:
    X = np.asarray(X, dtype=float)
    scale = np.asarray(scale, dtype=float)
    p = X.shape[0]
    LX = np.linalg.cholesky(X)
    logdet_X = 2.0 * float(np.sum(np.log(np.diag(LX))))
    sign, logdet_S = np.linalg.slogdet(scale)
    if sign <= 0:
        raise ValueError("scale matrix must be positive definite")
    Xi = np.linalg.inv(X)
    tr = float(np.sum(scale * Xi))  # tr(scale @ X^-1), both symmetric
    return (
        0.5 * df * logdet_S
        - 0.5 * df * p * np.log(2.0)
        - multigammaln(0.5 * df, p)
        - 0.5 * (df + p + 1.0) * logdet_X
        - 0.5 * tr
    )


def lkj_log_normalizer(dim: int, eta: float) -> float:
    """Log of the LKJ(eta) density normalizing constant in dimension ``dim``."""
    if dim < 2:
        return 0.0
    out = (dim - 1.0) * gammaln(eta + 0.5 * (dim - 1.0))
    for k in range(1, dim):
        out -= 0.5 * k * np.log(np.pi) + gammaln(eta + 0.5 * (dim - 1.0 - k))
    return float(out)


def lkj_logpdf(C: np.ndarray, eta: float) -> float:
    C = np.asarray(C, dtype=float)
    L = np.linalg.cholesky(C)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return lkj_log_normalizer(C.shape[0], eta) + (eta - 1.0) * logdet
