"""Log prior, log likelihoods, and the unconstrained log posterior.

Continuous items use the marginal likelihood
y_i ~ N(alpha, Lambda Phi Lambda' + Omega + diag(psi2)); categorical items
use the augmented form with latent factor scores z_i (and item effects u_i
when the variant has them): eta_ij = alpha_j + lambda_j' z_i + u_ij for
binary items, and category masses F(tau_s - lambda_j' z_i - u_ij) differences
for ordinal items (ordinal intercepts are absorbed by the cut-points).

All gradients are closed form. ``Posterior`` binds a validated spec to a
dataset, resolves data-dependent prior hyperparameters, and evaluates the
unconstrained posterior density with its gradient in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import expit, log_ndtr, multigammaln

from . import distributions as dist
from .model import (
    APPROX_ZERO,
    BINARY,
    CONTINUOUS,
    ORDINAL,
    Dataset,
    ModelSpec,
    ParameterSet,
    ValidatedSpec,
    free_loading_variance,
    validate_spec,
)
from .packing import ParamGrads, ParameterPacker

LOG2PI = dist.LOG2PI


def _chol(a: np.ndarray):
    # exp-transformed scales can overflow under extreme leapfrog proposals;
    # map that to LinAlgError so callers treat it as log density -inf
    if not np.all(np.isfinite(a)):
        raise LinAlgError("non-finite covariance")
    return cho_factor(a, lower=True, check_finite=False)


@dataclass(frozen=True)
class LogDensityResult:
    value: float
    grad: np.ndarray


def _check_items_match(spec: ModelSpec, data: Dataset) -> None:
    if len(spec.items) != len(data.items):
        raise ValueError(f"spec has {len(spec.items)} items, data has {len(data.items)}")
    bad = []
    for js, jd in zip(spec.items, data.items):
        if js.name != jd.name or js.kind != jd.kind:
            bad.append(f"{js.name!r} ({js.kind}) vs {jd.name!r} ({jd.kind})")
        elif js.kind == ORDINAL and js.n_categories() != jd.n_categories():
            bad.append(f"{js.name!r}: {js.n_categories()} vs {jd.n_categories()} categories")
    if bad:
        raise ValueError("spec items do not match data items: " + "; ".join(bad))


def _binary_mass(y: np.ndarray, eta: np.ndarray, link: str):
    """Log mass and d/d eta for 0/1 responses."""
    if link == "logit":
        ll = -np.logaddexp(0.0, np.where(y > 0, -eta, eta))
        d = y - expit(eta)
    else:
        lc = log_ndtr(eta)
        lcn = log_ndtr(-eta)
        ll = y * lc + (1.0 - y) * lcn
        logphi = -0.5 * eta * eta - 0.5 * LOG2PI
        d = y * np.exp(logphi - lc) - (1.0 - y) * np.exp(logphi - lcn)
    return float(ll.sum()), d


def _ordinal_mass(codes: np.ndarray, tau: np.ndarray, x: np.ndarray, link: str):
    """Log mass, d/dx, and d/d tau for ordinal codes with predictors x.

    Category c has probability F(tau_{c+1} - x) - F(tau_c - x) with
    tau_0 = -inf and tau_m = +inf.
    """
    m = tau.size + 1
    taupad = np.concatenate(([-np.inf], tau, [np.inf]))
    t_lo = taupad[codes] - x
    t_hi = taupad[codes + 1] - x
    if link == "logit":
        lp_hi = -np.logaddexp(0.0, -t_hi)  # log F(t_hi)
        lsm_lo = -np.logaddexp(0.0, t_lo)  # log (1 - F(t_lo))
        logpi = lp_hi + lsm_lo + np.log1p(-np.exp(t_lo - t_hi))
        logf_hi = lp_hi - np.logaddexp(0.0, t_hi)
        logf_lo = -np.logaddexp(0.0, -t_lo) - np.logaddexp(0.0, t_lo)
    else:
        la = log_ndtr(t_hi)
        lb = log_ndtr(t_lo)
        side_a = la + np.log1p(-np.exp(np.minimum(lb - la, 0.0)))
        la2 = log_ndtr(-t_lo)
        lb2 = log_ndtr(-t_hi)
        side_b = la2 + np.log1p(-np.exp(np.minimum(lb2 - la2, 0.0)))
        logpi = np.where(t_lo + t_hi > 0, side_b, side_a)
        logf_hi = -0.5 * t_hi * t_hi - 0.5 * LOG2PI
        logf_lo = -0.5 * t_lo * t_lo - 0.5 * LOG2PI
    r_hi = np.exp(logf_hi - logpi)
    r_lo = np.exp(logf_lo - logpi)
    ll = float(logpi.sum())
    dx = r_lo - r_hi
    mask_hi = codes < m - 1
    mask_lo = codes > 0
    dtau = np.bincount(codes[mask_hi], weights=r_hi[mask_hi], minlength=m - 1)[: m - 1]
    dtau = dtau - np.bincount(codes[mask_lo] - 1, weights=r_lo[mask_lo], minlength=m - 1)[: m - 1]
    return ll, dx, dtau


class Posterior:
    """A validated model bound to a dataset: the unconstrained posterior.

    Resolves data-dependent prior hyperparameters (the heywood_guard rate
    vector) at construction and precomputes sufficient statistics for the
    continuous marginal likelihood.
    """

    def __init__(self, spec: ModelSpec | ValidatedSpec, data: Dataset):
        vspec = spec if isinstance(spec, ValidatedSpec) else validate_spec(spec)
        _check_items_match(vspec.spec, data)
        self.vspec = vspec
        self.spec = vspec.spec
        self.data = data
        self.n = data.n
        self.kind = vspec.kind
        n_rows = data.n if vspec.kind == "categorical" else 0
        self.packer = ParameterPacker(vspec, n_rows=n_rows)
        self.dim = self.packer.dim

        spec_ = self.spec
        p, k = spec_.p, spec_.k
        pr = spec_.priors
        self.alpha_var = pr.alpha_var
        self.tau_var = pr.tau_var

        # per-entry loading prior variances
        rows, cols = self.packer.lam_rows, self.packer.lam_cols
        if spec_.pattern is not None:
            codes = spec_.pattern.kinds[rows, cols]
            self.lam_free_mask = codes != APPROX_ZERO
        else:
            self.lam_free_mask = np.ones(rows.size, dtype=bool)
        fv = free_loading_variance(spec_, self.kind)
        self.lam_var = np.where(self.lam_free_mask, fv, pr.cross_loading_var)
        self.unit_information = pr.loading_prior == "unit_information"

        # Phi prior
        self.phi_prior = None
        if self.packer.phi_block is not None:
            if spec_.phi_form == "correlation":
                if k >= 2:
                    self.phi_prior = ("lkj", pr.lkj_eta, dist.lkj_log_normalizer(k, pr.lkj_eta))
            else:
                df = pr.phi_df if pr.phi_df is not None else p + 4
                const = -0.5 * df * k * np.log(2.0) - float(multigammaln(0.5 * df, k))
                self.phi_prior = ("iw", df, const)

        # Omega prior
        self.omega_prior = None
        if spec_.has_u:
            scale = pr.omega_scale if pr.omega_scale is not None else np.eye(p)
            self.omega_scale = np.asarray(scale, dtype=float)
            df = pr.omega_df if pr.omega_df is not None else p + 6
            sign, logdet_s = np.linalg.slogdet(self.omega_scale)
            if sign <= 0:
                raise ValueError("omega_scale must be positive definite")
            const = 0.5 * df * logdet_s - 0.5 * df * p * np.log(2.0) - multigammaln(0.5 * df, p)
            self.omega_prior = (df, float(const))

        # psi prior (continuous only)
        self.psi_kind = pr.psi.kind
        if self.kind == CONTINUOUS:
            Y = data.values
            self.ybar = Y.mean(axis=0)
            self.YY = Y.T @ Y
            if self.psi_kind == "heywood_guard":
                if self.n < 2:
                    raise ValueError("heywood_guard prior needs at least two rows")
                S_y = np.cov(Y, rowvar=False, ddof=1)
                try:
                    ci = cho_factor(S_y, lower=True)
                except LinAlgError as e:
                    raise ValueError(
                        "heywood_guard prior needs a positive definite sample covariance"
                    ) from e
                prec_diag = np.diag(cho_solve(ci, np.eye(p)))
                self.psi_ig = (
                    np.full(p, pr.psi.c0),
                    (pr.psi.c0 - 1.0) / prec_diag,
                )
            elif self.psi_kind == "inv_gamma":
                self.psi_ig = (np.full(p, pr.psi.a), np.full(p, pr.psi.b))
        else:
            self.codes = data.codes()
            self.ybin = data.values  # float view; binary columns are 0/1

    # ------------------------------------------------------------ pieces

    def params_from_vector(self, v: np.ndarray) -> ParameterSet:
        return self.packer.unpack(np.asarray(v, dtype=float))[0]

    def initial_vector(self, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
        return rng.uniform(-radius, radius, self.dim)

    def _new_grads(self) -> ParamGrads:
        spec = self.spec
        p, k = spec.p, spec.k
        g = ParamGrads(
            alpha=np.zeros(p),
            Lambda=np.zeros((p, k)),
            cutpoints=[None] * p,
        )
        for j in self.packer.ordinal_items:
            g.cutpoints[j] = np.zeros(spec.items[j].n_categories() - 1)
        if self.packer.phi_block is not None:
            g.Phi = np.zeros((k, k))
        if spec.has_u:
            g.Omega = np.zeros((p, p))
        if self.kind == CONTINUOUS:
            g.psi2 = np.zeros(p)
        if self.packer.z_block is not None:
            g.z = np.zeros((self.n, k))
        if self.packer.u_block is not None:
            g.u = np.zeros((self.n, p))
        if self.packer.h_block is not None:
            g.h = np.zeros((self.n, p))
        return g

    def log_likelihood(self, params: ParameterSet) -> float:
        with np.errstate(all="ignore"):
            try:
                return self._loglik(params, None)
            except LinAlgError:
                return -np.inf

    def log_prior(self, params: ParameterSet) -> float:
        with np.errstate(all="ignore"):
            try:
                return self._logprior(params, None)
            except LinAlgError:
                return -np.inf

    def logpdf_and_grad(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        v = np.asarray(v, dtype=float)
        zeros = np.zeros(self.dim)
        if not np.all(np.isfinite(v)):
            return -np.inf, zeros
        with np.errstate(all="ignore"):
            try:
                ps, log_jac, cache = self.packer.unpack(v)
                g = self._new_grads()
                ll = self._loglik(ps, g)
                if not np.isfinite(ll):
                    return -np.inf, zeros
                lp = self._logprior(ps, g)
                if not np.isfinite(lp):
                    return -np.inf, zeros
                total = ll + lp + log_jac
                gvec = self.packer.vjp(g, cache)
                # the cut-point prior (already in lp) lives on the transform
                # coordinates, so its gradient is added here directly; the -1
                # cancels the block log-Jacobian gradient from vjp
                for sl in self.packer.sl_tau:
                    vs = v[sl]
                    gvec[sl] += -vs / self.tau_var
                    gvec[sl.start + 1 : sl.stop] -= 1.0
                if not np.all(np.isfinite(gvec)):
                    return -np.inf, zeros
                return float(total), gvec
            except LinAlgError:
                return -np.inf, zeros

    def logpdf(self, v: np.ndarray) -> float:
        return self.logpdf_and_grad(v)[0]

    # ----------------------------------------------------------- internals

    def _loglik(self, ps: ParameterSet, g: ParamGrads | None) -> float:
        if self.kind == CONTINUOUS:
            return self._loglik_continuous(ps, g)
        if self.spec.augmentation == "collapsed":
            return self._loglik_collapsed(ps, g)
        return self._loglik_augmented(ps, g)

    def _loglik_continuous(self, ps: ParameterSet, g: ParamGrads | None) -> float:
        n, p = self.n, self.spec.p
        Sig = ps.Lambda @ ps.Phi @ ps.Lambda.T + np.diag(ps.psi2)
        if ps.Omega is not None:
            Sig = Sig + ps.Omega
        c = _chol(Sig)
        logdet = 2.0 * float(np.sum(np.log(np.diag(c[0]))))
        a = ps.alpha
        T = self.YY - n * (np.outer(self.ybar, a) + np.outer(a, self.ybar)) + n * np.outer(a, a)
        A = cho_solve(c, T)
        ll = -0.5 * n * p * LOG2PI - 0.5 * n * logdet - 0.5 * float(np.trace(A))
        if g is not None:
            Si = cho_solve(c, np.eye(p))
            G = -0.5 * n * Si + 0.5 * (A @ Si)
            G = 0.5 * (G + G.T)
            g.alpha += n * (Si @ (self.ybar - a))
            GL = G @ ps.Lambda
            g.Lambda += 2.0 * (GL @ ps.Phi)
            if g.Phi is not None:
                g.Phi += ps.Lambda.T @ GL
            if g.Omega is not None:
                g.Omega += G
            g.psi2 += np.diag(G).copy()
        return ll

    def _item_masses(self, ps: ParameterSet, glin: np.ndarray, g: ParamGrads | None):
        """Per-item response masses given linear predictors Lambda z + u (or h).

        Returns the summed log mass and d/d glin.
        """
        n, p = self.n, self.spec.p
        link = self.spec.link
        ll = 0.0
        dG = np.zeros((n, p)) if g is not None else None
        for j, item in enumerate(self.spec.items):
            x = glin[:, j]
            if item.kind == BINARY:
                llj, d = _binary_mass(self.ybin[:, j], ps.alpha[j] + x, link)
                ll += llj
                if g is not None:
                    dG[:, j] = d
                    g.alpha[j] += float(d.sum())
            else:
                llj, dx, dtau = _ordinal_mass(self.codes[:, j], ps.cutpoints[j], x, link)
                ll += llj
                if g is not None:
                    dG[:, j] = dx
                    g.cutpoints[j] += dtau
            if not np.isfinite(ll):
                return -np.inf, dG
        return ll, dG

    def _loglik_augmented(self, ps: ParameterSet, g: ParamGrads | None) -> float:
        n, p, k = self.n, self.spec.p, self.spec.k
        Z, U = ps.z, ps.u
        if Z is None or (self.spec.has_u and U is None):
            raise ValueError("augmented categorical likelihood needs latent z (and u) blocks")
        glin = Z @ ps.Lambda.T
        if U is not None:
            glin = glin + U
        ll, dG = self._item_masses(ps, glin, g)
        if not np.isfinite(ll):
            return -np.inf
        if g is not None:
            g.Lambda += dG.T @ Z
            g.z += dG @ ps.Lambda
            if U is not None:
                g.u += dG

        # latent factor scores z_i ~ N(0, Phi)
        if self.packer.phi_block is not None:
            cp = _chol(ps.Phi)
            ldp = 2.0 * float(np.sum(np.log(np.diag(cp[0]))))
            Zt = cho_solve(cp, Z.T)  # Phi^-1 Z'
            ll += -0.5 * n * k * LOG2PI - 0.5 * n * ldp - 0.5 * float(np.sum(Z.T * Zt))
            if g is not None:
                g.z += -Zt.T
                if g.Phi is not None:
                    Pi = cho_solve(cp, np.eye(k))
                    g.Phi += -0.5 * n * Pi + 0.5 * (Zt @ Zt.T)
        else:
            ll += -0.5 * n * k * LOG2PI - 0.5 * float(np.sum(Z * Z))
            if g is not None:
                g.z += -Z

        # item effects u_i ~ N(0, Omega)
        if U is not None:
            co = _chol(ps.Omega)
            ldo = 2.0 * float(np.sum(np.log(np.diag(co[0]))))
            Ut = cho_solve(co, U.T)
            ll += -0.5 * n * p * LOG2PI - 0.5 * n * ldo - 0.5 * float(np.sum(U.T * Ut))
            if g is not None:
                g.u += -Ut.T
                Oi = cho_solve(co, np.eye(p))
                g.Omega += -0.5 * n * Oi + 0.5 * (Ut @ Ut.T)
        return ll

    def _loglik_collapsed(self, ps: ParameterSet, g: ParamGrads | None) -> float:
        n, p = self.n, self.spec.p
        H = ps.h
        if H is None:
            raise ValueError("collapsed likelihood needs the latent h block")
        ll, dG = self._item_masses(ps, H, g)
        if not np.isfinite(ll):
            return -np.inf
        if g is not None:
            g.h += dG
        Sig = ps.Lambda @ ps.Phi @ ps.Lambda.T + ps.Omega
        ch = _chol(Sig)
        ld = 2.0 * float(np.sum(np.log(np.diag(ch[0]))))
        Ht = cho_solve(ch, H.T)  # Sig^-1 H'
        ll += -0.5 * n * p * LOG2PI - 0.5 * n * ld - 0.5 * float(np.sum(H.T * Ht))
        if g is not None:
            g.h += -Ht.T
            Si = cho_solve(ch, np.eye(p))
            Gh = -0.5 * n * Si + 0.5 * (Ht @ Ht.T)
            Gh = 0.5 * (Gh + Gh.T)
            GL = Gh @ ps.Lambda
            g.Lambda += 2.0 * (GL @ ps.Phi)
            if g.Phi is not None:
                g.Phi += ps.Lambda.T @ GL
            g.Omega += Gh
        return ll

    def _logprior(self, ps: ParameterSet, g: ParamGrads | None) -> float:
        spec = self.spec
        p, k = spec.p, spec.k
        packer = self.packer
        lp = 0.0

        a = ps.alpha[packer.alpha_items]
        lp += float(np.sum(dist.normal_logpdf(a, self.alpha_var)))
        if g is not None:
            ga = np.zeros(p)
            ga[packer.alpha_items] = -a / self.alpha_var
            g.alpha += ga

        # cut-point prior: N(0, tau_var) on the order-preserving transform;
        # the gradient is handled on the unconstrained side by the caller
        for j, blk in zip(packer.ordinal_items, packer.tau_blocks):
            vs = blk.inverse(ps.cutpoints[j])
            lp += float(np.sum(dist.normal_logpdf(vs, self.tau_var))) - float(vs[1:].sum())

        lam = ps.Lambda[packer.lam_rows, packer.lam_cols]
        if self.unit_information:
            var = np.where(self.lam_free_mask, ps.psi2[packer.lam_rows], self.lam_var)
        else:
            var = self.lam_var
        lp += float(np.sum(dist.normal_logpdf(lam, var)))
        if g is not None:
            gl = np.zeros((p, k))
            gl[packer.lam_rows, packer.lam_cols] = -lam / var
            g.Lambda += gl
            if self.unit_information:
                free = self.lam_free_mask
                contrib = (-0.5 / var + 0.5 * lam * lam / (var * var))[free]
                np.add.at(g.psi2, packer.lam_rows[free], contrib)

        if self.phi_prior is not None:
            cp = _chol(ps.Phi)
            ld = 2.0 * float(np.sum(np.log(np.diag(cp[0]))))
            Pi = cho_solve(cp, np.eye(k))
            if self.phi_prior[0] == "lkj":
                _, eta, const = self.phi_prior
                lp += const + (eta - 1.0) * ld
                if g is not None:
                    g.Phi += (eta - 1.0) * Pi
            else:
                _, df, const = self.phi_prior
                lp += const - 0.5 * (df + k + 1.0) * ld - 0.5 * float(np.trace(Pi))
                if g is not None:
                    g.Phi += -0.5 * (df + k + 1.0) * Pi + 0.5 * (Pi @ Pi)

        if self.omega_prior is not None:
            df, const = self.omega_prior
            co = _chol(ps.Omega)
            ld = 2.0 * float(np.sum(np.log(np.diag(co[0]))))
            Oi = cho_solve(co, np.eye(p))
            OSO = Oi @ self.omega_scale @ Oi
            lp += const - 0.5 * (df + p + 1.0) * ld - 0.5 * float(np.sum(self.omega_scale * Oi))
            if g is not None:
                g.Omega += -0.5 * (df + p + 1.0) * Oi + 0.5 * OSO

        if self.kind == CONTINUOUS:
            t = ps.psi2
            if self.psi_kind in ("heywood_guard", "inv_gamma"):
                aa, bb = self.psi_ig
                lp += float(np.sum(dist.inv_gamma_logpdf(t, aa, bb)))
                if g is not None:
                    g.psi2 += -(aa + 1.0) / t + bb / (t * t)
            elif self.psi_kind == "half_cauchy":
                s = spec.priors.psi.scale
                lp += float(np.sum(-np.log(np.pi) - np.log(s) - np.log1p(t / s**2) - 0.5 * np.log(t)))
                if g is not None:
                    g.psi2 += -(1.0 / s**2) / (1.0 + t / s**2) - 0.5 / t
            else:  # uniform on the residual SD
                u = spec.priors.psi.upper
                lp += float(np.sum(-np.log(u) - np.log(2.0) - 0.5 * np.log(t)))
                if g is not None:
                    g.psi2 += -0.5 / t
        return lp


# --------------------------------------------------------- module surface

def log_prior(params: ParameterSet, spec: ModelSpec, data: Dataset) -> float:
    """Joint log prior of the structural parameters on the constrained scale."""
    return Posterior(spec, data).log_prior(params)


def loglik_continuous(data: Dataset, params: ParameterSet, spec: ModelSpec) -> float:
    """Marginal normal log likelihood for continuous items."""
    post = Posterior(spec, data)
    if post.kind != CONTINUOUS:
        raise ValueError("loglik_continuous requires continuous items")
    return post.log_likelihood(params)


def loglik_categorical(data: Dataset, params: ParameterSet, spec: ModelSpec) -> float:
    """Augmented log likelihood for binary/ordinal items.

    Includes the latent densities of z (and u or h), which travel with the
    likelihood rather than the prior.
    """
    post = Posterior(spec, data)
    if post.kind != "categorical":
        raise ValueError("loglik_categorical requires binary or ordinal items")
    return post.log_likelihood(params)


def log_posterior(uvec: np.ndarray, data: Dataset, spec: ModelSpec) -> LogDensityResult:
    """Unconstrained log posterior density and gradient at ``uvec``."""
    value, grad = Posterior(spec, data).logpdf_and_grad(uvec)
    return LogDensityResult(value=value, grad=grad)
