"""Packing of model parameters into one unconstrained sampling vector.

Layout (fixed, row major within blocks):

    [alpha (non-ordinal items)] [cut-points per ordinal item]
    [sampled loadings] [Phi] [Omega] [psi2] [z rows] [u or h rows]

Constrained blocks go through the bijections in :mod:`azsem.transforms`;
``unpack`` reports the summed log-Jacobian and ``vjp`` pulls constrained
gradients (plus the log-Jacobian gradient) back to the unconstrained vector.

The u block is stored non-centered: the vector holds innovations eps with
u = eps L', L the Cholesky factor of Omega. Centering u on its own scale
puts a funnel between u and Omega that stalls fixed-metric HMC; in the
innovation coordinates the prior is standard normal and the coupling moves
into the (much better conditioned) likelihood. The log-Jacobian picks up
n log|L| and the Omega coordinates receive the corresponding extra gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .model import (
    FIXED,
    ORDINAL,
    CONTINUOUS,
    ModelSpec,
    ParameterSet,
    ValidatedSpec,
)
from .transforms import (
    BoundedBlock,
    CorrelationBlock,
    IdentityBlock,
    OrderedBlock,
    PositiveBlock,
    SPDBlock,
)


@dataclass
class ParamGrads:
    """Gradients of a scalar with respect to constrained parameter blocks.

    ``Lambda`` and ``alpha`` are full (p, k) and (p,) arrays; the packer
    selects the sampled entries. ``Phi``/``Omega`` are full matrices of
    partials treating every entry as independent (the usual symmetric
    matrix-derivative convention).
    """

    alpha: np.ndarray | None = None
    Lambda: np.ndarray | None = None
    Phi: np.ndarray | None = None
    Omega: np.ndarray | None = None
    psi2: np.ndarray | None = None
    cutpoints: list[np.ndarray | None] = field(default_factory=list)
    z: np.ndarray | None = None
    u: np.ndarray | None = None
    h: np.ndarray | None = None


class ParameterPacker:
    """Bijection between an unconstrained vector and a ParameterSet."""

    def __init__(self, vspec: ValidatedSpec, n_rows: int = 0):
        spec = vspec.spec
        self.vspec = vspec
        self.spec = spec
        self.n_rows = int(n_rows)
        p, k = spec.p, spec.k

        self.alpha_items = [j for j, it in enumerate(spec.items) if it.kind != ORDINAL]
        self.ordinal_items = [j for j, it in enumerate(spec.items) if it.kind == ORDINAL]
        entries = vspec.sampled_loadings
        self.lam_rows = np.array([r for r, _ in entries], dtype=np.intp)
        self.lam_cols = np.array([c for _, c in entries], dtype=np.intp)

        est_efa = spec.variant in ("EFA", "EFA_C")
        self.phi_block = None
        if not est_efa:
            self.phi_block = (
                CorrelationBlock(k) if spec.phi_form == "correlation" else SPDBlock(k)
            )
        self.omega_block = SPDBlock(p) if spec.has_u else None
        self.psi_block = None
        if vspec.kind == CONTINUOUS:
            if spec.priors.psi.kind == "uniform":
                self.psi_block = BoundedBlock(p, spec.priors.psi.upper**2)
            else:
                self.psi_block = PositiveBlock(p)
        self.z_block = self.u_block = self.h_block = None
        if vspec.kind == "categorical" and n_rows > 0:
            if spec.augmentation == "collapsed":
                self.h_block = IdentityBlock((n_rows, p))
            else:
                self.z_block = IdentityBlock((n_rows, k))
                if spec.has_u:
                    self.u_block = IdentityBlock((n_rows, p))

        # assemble slices
        pos = 0

        def take(d: int) -> slice:
            nonlocal pos
            s = slice(pos, pos + d)
            pos += d
            return s

        self.sl_alpha = take(len(self.alpha_items))
        self.tau_blocks = [OrderedBlock(spec.items[j].n_categories() - 1) for j in self.ordinal_items]
        self.sl_tau = [take(b.dim) for b in self.tau_blocks]
        self.sl_lambda = take(len(entries))
        self.sl_phi = take(self.phi_block.dim) if self.phi_block else slice(pos, pos)
        self.sl_omega = take(self.omega_block.dim) if self.omega_block else slice(pos, pos)
        self.sl_psi = take(self.psi_block.dim) if self.psi_block else slice(pos, pos)
        self.structural_dim = pos
        self.sl_z = take(self.z_block.dim) if self.z_block else slice(pos, pos)
        self.sl_u = take(self.u_block.dim) if self.u_block else slice(pos, pos)
        self.sl_h = take(self.h_block.dim) if self.h_block else slice(pos, pos)
        self.dim = pos

        if self.structural_dim != vspec.structural_dim:
            raise AssertionError("packer layout disagrees with validated dimensions")

        # fixed part of Lambda
        lam_fixed = np.zeros((p, k))
        if spec.pattern is not None:
            mask = spec.pattern.kinds == FIXED
            lam_fixed[mask] = spec.pattern.values[mask]
        self._lam_fixed = lam_fixed

    def unpack(self, v: np.ndarray) -> tuple[ParameterSet, float, dict]:
        spec = self.spec
        p, k = spec.p, spec.k
        log_jac = 0.0
        cache: dict[str, object] = {}

        alpha = np.zeros(p)
        alpha[self.alpha_items] = v[self.sl_alpha]

        cut: list[np.ndarray | None] = [None] * p
        for j, blk, sl in zip(self.ordinal_items, self.tau_blocks, self.sl_tau):
            tau, lj, cch = blk.forward(v[sl])
            cut[j] = tau
            log_jac += lj
            cache[f"tau{j}"] = cch

        Lam = self._lam_fixed.copy()
        Lam[self.lam_rows, self.lam_cols] = v[self.sl_lambda]

        if self.phi_block is not None:
            Phi, lj, cch = self.phi_block.forward(v[self.sl_phi])
            log_jac += lj
            cache["phi"] = cch
        else:
            Phi = np.eye(k)

        Omega = None
        if self.omega_block is not None:
            Omega, lj, cch = self.omega_block.forward(v[self.sl_omega])
            log_jac += lj
            cache["omega"] = cch

        psi2 = None
        if self.psi_block is not None:
            psi2, lj, cch = self.psi_block.forward(v[self.sl_psi])
            log_jac += lj
            cache["psi"] = cch

        z = u = h = None
        if self.z_block is not None:
            z = v[self.sl_z].reshape(self.n_rows, k).copy()
        if self.u_block is not None:
            eps = v[self.sl_u].reshape(self.n_rows, p)
            L_om = cache["omega"]
            u = eps @ L_om.T
            log_jac += self.n_rows * float(np.sum(np.log(np.diag(L_om))))
            cache["u_eps"] = eps
        if self.h_block is not None:
            h = v[self.sl_h].reshape(self.n_rows, p).copy()

        ps = ParameterSet(
            alpha=alpha, Lambda=Lam, Phi=Phi, Omega=Omega, psi2=psi2,
            cutpoints=tuple(cut), z=z, u=u, h=h,
        )
        return ps, log_jac, cache

    def pack(self, ps: ParameterSet) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.sl_alpha] = ps.alpha[self.alpha_items]
        for j, blk, sl in zip(self.ordinal_items, self.tau_blocks, self.sl_tau):
            v[sl] = blk.inverse(ps.cutpoints[j])
        v[self.sl_lambda] = ps.Lambda[self.lam_rows, self.lam_cols]
        if self.phi_block is not None:
            v[self.sl_phi] = self.phi_block.inverse(ps.Phi)
        if self.omega_block is not None:
            v[self.sl_omega] = self.omega_block.inverse(ps.Omega)
        if self.psi_block is not None:
            v[self.sl_psi] = self.psi_block.inverse(ps.psi2)
        if self.z_block is not None:
            v[self.sl_z] = np.asarray(ps.z).ravel()
        if self.u_block is not None:
            L_om = np.linalg.cholesky(np.asarray(ps.Omega, dtype=float))
            eps = solve_triangular(L_om, np.asarray(ps.u).T, lower=True).T
            v[self.sl_u] = eps.ravel()
        if self.h_block is not None:
            v[self.sl_h] = np.asarray(ps.h).ravel()
        return v

    def vjp(self, g: ParamGrads, cache: dict) -> np.ndarray:
        """Pull constrained-space gradients back to the unconstrained vector.

        Adds the gradient of the summed log-Jacobian, matching ``unpack``.
        """
        out = np.zeros(self.dim)
        out[self.sl_alpha] = g.alpha[self.alpha_items]
        for j, blk, sl in zip(self.ordinal_items, self.tau_blocks, self.sl_tau):
            out[sl] = blk.vjp(g.cutpoints[j], cache[f"tau{j}"])
        out[self.sl_lambda] = g.Lambda[self.lam_rows, self.lam_cols]
        if self.phi_block is not None and self.phi_block.dim > 0:
            out[self.sl_phi] = self.phi_block.vjp(g.Phi, cache["phi"])
        l_bar = None
        if self.u_block is not None:
            eps = cache["u_eps"]
            L_om = cache["omega"]
            out[self.sl_u] = (g.u @ L_om).ravel()
            l_bar = g.u.T @ eps
        if self.omega_block is not None:
            out[self.sl_omega] = self.omega_block.vjp(g.Omega, cache["omega"], l_bar=l_bar)
            if self.u_block is not None:
                out[self.sl_omega][self.omega_block.diag_mask] += self.n_rows
        if self.psi_block is not None:
            out[self.sl_psi] = self.psi_block.vjp(g.psi2, cache["psi"])
        if self.z_block is not None:
            out[self.sl_z] = g.z.ravel()
        if self.h_block is not None:
            out[self.sl_h] = g.h.ravel()
        return out

    def structural_names(self) -> list[str]:
        """Names of the packed structural parameters on the constrained scale."""
        spec = self.spec
        names = [f"alpha[{j + 1}]" for j in self.alpha_items]
        for j in self.ordinal_items:
            names += [f"tau[{j + 1},{s + 1}]" for s in range(spec.items[j].n_categories() - 1)]
        names += [
            f"Lambda[{r + 1},{c + 1}]" for r, c in zip(self.lam_rows, self.lam_cols)
        ]
        if isinstance(self.phi_block, CorrelationBlock):
            rr, cc = np.tril_indices(spec.k, -1)
            names += [f"Phi[{i + 1},{j + 1}]" for i, j in zip(rr, cc)]
        elif isinstance(self.phi_block, SPDBlock):
            rr, cc = np.tril_indices(spec.k)
            names += [f"Phi[{i + 1},{j + 1}]" for i, j in zip(rr, cc)]
        if self.omega_block is not None:
            rr, cc = np.tril_indices(spec.p)
            names += [f"Omega[{i + 1},{j + 1}]" for i, j in zip(rr, cc)]
        if self.psi_block is not None:
            names += [f"psi2[{j + 1}]" for j in range(spec.p)]
        return names

    def structural_values(self, ps: ParameterSet) -> np.ndarray:
        """Constrained values in the order of :meth:`structural_names`."""
        spec = self.spec
        parts = [ps.alpha[self.alpha_items]]
        for j in self.ordinal_items:
            parts.append(ps.cutpoints[j])
        parts.append(ps.Lambda[self.lam_rows, self.lam_cols])
        if isinstance(self.phi_block, CorrelationBlock):
            rr, cc = np.tril_indices(spec.k, -1)
            parts.append(ps.Phi[rr, cc])
        elif isinstance(self.phi_block, SPDBlock):
            rr, cc = np.tril_indices(spec.k)
            parts.append(ps.Phi[rr, cc])
        if self.omega_block is not None:
            rr, cc = np.tril_indices(spec.p)
            parts.append(ps.Omega[rr, cc])
        if self.psi_block is not None:
            parts.append(ps.psi2)
        return np.concatenate(parts) if parts else np.empty(0)

    def leading_positions(self) -> np.ndarray:
        """Unconstrained positions of the leading loading of each factor.

        Only meaningful under phi_form='correlation', where leading loadings
        are sampled entries.
        """
        pat = self.spec.pattern
        pos = np.empty(self.spec.k, dtype=np.intp)
        for c, r in enumerate(pat.leading):
            hit = np.nonzero((self.lam_rows == r) & (self.lam_cols == c))[0]
            if hit.size != 1:
                raise ValueError(f"factor {c}: leading loading is not a sampled entry")
            pos[c] = self.sl_lambda.start + hit[0]
        return pos


def sign_align_matrix(V: np.ndarray, packer: ParameterPacker) -> np.ndarray:
    """Flip factor signs so every leading loading is nonnegative.

    Operates directly on a (draws, dim) matrix of unconstrained vectors.
    Flipping factor c negates its loading column, the partial-correlation
    coordinates of Phi that touch factor c exactly once, and the latent
    scores of factor c. Every negation is an exact IEEE sign flip, so the
    implied covariance Lambda Phi Lambda' and the posterior density of each
    draw are unchanged bit for bit.
    """
    spec = packer.spec
    if spec.variant in ("EFA", "EFA_C"):
        raise ValueError("EFA loadings are identified only up to rotation; sign alignment does not apply")
    V = np.array(V, dtype=float)
    if spec.phi_form != "correlation":
        return V  # leading loadings are fixed positive constants
    k = spec.k
    lead = packer.leading_positions()
    F = V[:, lead] < 0.0  # (draws, k) factors to flip
    if not F.any():
        return V

    lam_sign = np.where(F[:, packer.lam_cols], -1.0, 1.0)
    V[:, packer.sl_lambda] *= lam_sign
    if k >= 2:
        rows, cols = np.tril_indices(k, -1)
        phi_sign = np.where(F[:, rows] ^ F[:, cols], -1.0, 1.0)
        V[:, packer.sl_phi] *= phi_sign
    if packer.z_block is not None:
        zs = V[:, packer.sl_z].reshape(V.shape[0], packer.n_rows, k)
        zs *= np.where(F[:, None, :], -1.0, 1.0)
        V[:, packer.sl_z] = zs.reshape(V.shape[0], -1)
    return V
