"""Bijections between constrained parameter blocks and unconstrained space.

The sampler works on an unconstrained vector. Each block below maps a slice
of that vector to a constrained value (free reals, positive variances,
ordered cut-points, a correlation or covariance matrix) and reports the log
absolute Jacobian determinant of the constrained-from-unconstrained map, so
that densities stated on the constrained scale can be sampled without
boundary trouble.

Every block implements

    forward(v)  -> (value, log_jac, cache)
    inverse(x)  -> v
    vjp(x_bar, cache) -> v_bar

where ``vjp`` back-propagates a gradient with respect to the constrained
value *and* adds the gradient of ``log_jac`` itself, so the caller can sum
block outputs into the unconstrained posterior gradient directly.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class IdentityBlock:
    """Unconstrained reals, reshaped."""

    def __init__(self, shape: tuple[int, ...]):
        self.shape = shape
        self.dim = int(np.prod(shape))

    def forward(self, v):
        return v.reshape(self.shape).copy(), 0.0, None

    def inverse(self, x):
        return np.asarray(x, dtype=float).ravel().copy()

    def vjp(self, x_bar, cache):
        return np.asarray(x_bar).ravel().copy()


class PositiveBlock:
    """Elementwise exp for positive parameters (variances)."""

    def __init__(self, n: int):
        self.dim = n

    def forward(self, v):
        x = np.exp(v)
        return x, float(v.sum()), x

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValueError("positive block requires strictly positive values")
        return np.log(x)

    def vjp(self, x_bar, cache):
        return x_bar * cache + 1.0


class BoundedBlock:
    """Scaled sigmoid mapping reals onto (0, upper)."""

    def __init__(self, n: int, upper: float):
        if upper <= 0:
            raise ValueError("upper bound must be positive")
        self.dim = n
        self.upper = float(upper)

    def forward(self, v):
        s = expit(v)
        x = self.upper * s
        log_jac = float(np.sum(np.log(self.upper) + np.log(s) + np.log1p(-s)))
        return x, log_jac, s

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0) or np.any(x >= self.upper):
            raise ValueError("value outside (0, upper)")
        s = x / self.upper
        return np.log(s) - np.log1p(-s)

    def vjp(self, x_bar, cache):
        s = cache
        return x_bar * self.upper * s * (1.0 - s) + (1.0 - 2.0 * s)


class OrderedBlock:
    """Strictly increasing vector: first entry free, log increments after.

    Used for ordinal cut-points. tau_0 = v_0, tau_s = tau_{s-1} + exp(v_s).
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("ordered block needs at least one entry")
        self.dim = n

    def forward(self, v):
        inc = np.exp(v[1:])
        x = np.empty_like(v)
        x[0] = v[0]
        x[1:] = v[0] + np.cumsum(inc)
        return x, float(v[1:].sum()), inc

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        d = np.diff(x)
        if np.any(d <= 0):
            raise ValueError("ordered block requires strictly increasing values")
        v = np.empty_like(x)
        v[0] = x[0]
        v[1:] = np.log(d)
        return v

    def vjp(self, x_bar, cache):
        # tau_j depends on v_0 (all j) and on v_s for j >= s >= 1.
        w = np.cumsum(x_bar[::-1])[::-1]
        v_bar = np.empty_like(x_bar)
        v_bar[0] = w[0]
        v_bar[1:] = w[1:] * cache + 1.0
        return v_bar


class CorrelationBlock:
    """Correlation matrix via tanh-transformed canonical partial correlations.

    Unconstrained entries y_{ij} (i > j, row major) map to z = tanh(y), and a
    lower-triangular L with unit-norm rows is built row by row:

        L[i, j] = z_{ij} * sqrt(c_{ij}),  c_{i0} = 1,
        c_{i,j+1} = c_{ij} * (1 - z_{ij}^2),  L[i, i] = sqrt(c_{ii}),

    giving C = L L'. The log-Jacobian of C-from-y is accumulated exactly and
    the reverse pass mirrors the recursion.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("dimension must be >= 1")
        self.k = k
        self.dim = k * (k - 1) // 2
        self.rows, self.cols = np.tril_indices(k, -1)

    def forward(self, v):
        k = self.k
        z = np.zeros((k, k))
        z[self.rows, self.cols] = np.tanh(v)
        c = np.ones((k, k))  # c[i, j]: remaining squared norm before entry j
        L = np.zeros((k, k))
        L[0, 0] = 1.0
        log_jac = 0.0
        for i in range(1, k):
            for j in range(i):
                L[i, j] = z[i, j] * np.sqrt(c[i, j])
                c[i, j + 1] = c[i, j] * (1.0 - z[i, j] ** 2)
                # d tanh / d y plus the two sqrt factors of dC/dz
                log_jac += np.log1p(-z[i, j] ** 2)
                log_jac += 0.5 * np.log(c[j, j]) + 0.5 * np.log(c[i, j])
            L[i, i] = np.sqrt(c[i, i])
        C = L @ L.T
        return C, float(log_jac), (z, c, L)

    def inverse(self, C):
        C = np.asarray(C, dtype=float)
        L = np.linalg.cholesky(C)
        v = np.empty(self.dim)
        pos = 0
        for i in range(1, self.k):
            c = 1.0
            for j in range(i):
                zij = L[i, j] / np.sqrt(c)
                v[pos] = np.arctanh(np.clip(zij, -1 + 1e-15, 1 - 1e-15))
                c *= 1.0 - zij**2
                pos += 1
        return v

    def vjp(self, C_bar, cache):
        z, c, L = cache
        k = self.k
        L_bar = (C_bar + C_bar.T) @ L
        z_bar = np.zeros((k, k))
        # direct log-jac dependence on the c factors: 0.5*log c[j,j] appears
        # once per pair (i, j) with i > j, 0.5*log c[i,j] once for pair (i, j)
        for i in range(1, k):
            cb = L_bar[i, i] * 0.5 / np.sqrt(c[i, i])  # d/d c[i, i]
            cb += 0.5 * (k - 1 - i) / c[i, i]
            for j in range(i - 1, -1, -1):
                zb = L_bar[i, j] * np.sqrt(c[i, j]) + cb * c[i, j] * (-2.0 * z[i, j])
                cb_prev = cb * (1.0 - z[i, j] ** 2) + L_bar[i, j] * z[i, j] * 0.5 / np.sqrt(c[i, j])
                if j >= 1:
                    cb_prev += 0.5 / c[i, j]
                z_bar[i, j] = zb
                cb = cb_prev
        zl = z[self.rows, self.cols]
        v_bar = z_bar[self.rows, self.cols] * (1.0 - zl**2) - 2.0 * zl
        return v_bar


class SPDBlock:
    """Symmetric positive definite matrix via Cholesky with log diagonal.

    Unconstrained entries fill the lower triangle row major; diagonal entries
    are exponentiated. S = L L'.
    """

    def __init__(self, p: int):
        self.p = p
        self.dim = p * (p + 1) // 2
        self.rows, self.cols = np.tril_indices(p)
        self.diag_mask = self.rows == self.cols

    def forward(self, v):
        p = self.p
        L = np.zeros((p, p))
        L[self.rows, self.cols] = v
        d = np.exp(v[self.diag_mask])
        L[np.arange(p), np.arange(p)] = d
        S = L @ L.T
        # |dS/dL| = 2^p prod L_jj^(p - j + 1) (1-based j), then dL_jj/dv = L_jj
        log_jac = p * np.log(2.0) + float(np.sum((p - np.arange(p) + 1) * v[self.diag_mask]))
        return S, log_jac, L
    def inverse(self, S):
        L = np.linalg.cholesky(np.asarray(S, dtype=float))
        v = L[self.rows, self.cols].copy()
        v[self.diag_mask] = np.log(v[self.diag_mask])
        return v

    def vjp(self, S_bar, cache, l_bar=None):
        """l_bar carries any gradient taken directly w.r.t. the factor L."""
        L = cache
        p = self.p
        L_bar = (S_bar + S_bar.T) @ L
        if l_bar is not None:
            L_bar = L_bar + l_bar
        v_bar = L_bar[self.rows, self.cols].copy()
        diag = np.arange(p)
        v_bar[self.diag_mask] = L_bar[diag, diag] * L[diag, diag] + (p - diag + 1)
        return v_bar
