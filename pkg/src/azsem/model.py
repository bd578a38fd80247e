"""Model specification types for factor models with approximate-zero priors.

A model is a set of observed items (continuous, binary, or ordinal), a
number of latent factors, a structural variant, and a prior configuration.

Variants
--------
EZ      exact zeros: hypothesized loadings free, all others fixed to zero,
        no item-level random effects.
AZ      approximate zeros: non-hypothesized loadings get a tight normal
        prior around zero, plus correlated item intercept effects with
        covariance Omega.
EFA     fully free loading matrix, factor covariance fixed to identity.
EFA_C   EFA plus the correlated item effects Omega.

For EZ/AZ the factor covariance Phi is either a correlation matrix with the
leading loading of each factor kept positive (``phi_form="correlation"``) or
an unrestricted covariance with the leading loadings fixed to 1
(``phi_form="covariance"``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"
ORDINAL = "ordinal"
ITEM_KINDS = (CONTINUOUS, BINARY, ORDINAL)

VARIANTS = ("EZ", "AZ", "EFA", "EFA_C")
LINKS = ("identity", "logit", "probit")

# loading pattern entry codes
FREE = 0
APPROX_ZERO = 1
FIXED = 2


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class SpecError(ValueError):
    """Raised by validate_spec with the full list of diagnostics."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid model spec:\n" + "\n".join(f"- {d}" for d in diagnostics))


@dataclass(frozen=True)
class ItemSpec:
    """One observed item. ``categories`` is required for ordinal items."""

    name: str
    kind: str = CONTINUOUS
    categories: int | None = None

    def n_categories(self) -> int:
        if self.kind == BINARY:
            return 2
        if self.kind == ORDINAL:
            return int(self.categories or 0)
        raise ValueError(f"item {self.name!r} is continuous")


@dataclass(frozen=True)
class LoadingPattern:
    """Status of every loading entry: free, approximate zero, or fixed.

    ``kinds`` is a (p, k) int array of FREE / APPROX_ZERO / FIXED codes,
    ``values`` holds the constants for FIXED entries, and ``leading`` gives
    the identifying item (row index) for each factor.
    """

    kinds: np.ndarray
    values: np.ndarray
    leading: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "kinds", _readonly(np.asarray(self.kinds, dtype=np.int8)))
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, dtype=float)))
        object.__setattr__(self, "leading", tuple(int(i) for i in self.leading))

    @property
    def shape(self) -> tuple[int, int]:
        return self.kinds.shape

    def sampled_entries(self) -> list[tuple[int, int]]:
        """Row-major (row, col) positions that carry a sampled loading."""
        r, c = np.nonzero(self.kinds != FIXED)
        return list(zip(r.tolist(), c.tolist()))


def simple_pattern(
    p: int,
    k: int,
    blocks: Sequence[Sequence[int]],
    *,
    off_kind: int,
    leading: Sequence[int] | None = None,
    extra_free: Sequence[tuple[int, int]] = (),
    fixed_leading: bool = False,
) -> LoadingPattern:
    """Independent-clusters pattern: ``blocks[c]`` lists the items of factor c.

    Non-hypothesized entries are either FIXED at zero (EZ) or APPROX_ZERO
    (AZ). ``extra_free`` adds further free (row, col) entries, e.g. an item
    hypothesized on two factors. With ``fixed_leading`` the leading entry of
    each factor is fixed to 1 instead of left free.
    """
    if len(blocks) != k:
        raise ValueError("need one item block per factor")
    kinds = np.full((p, k), off_kind, dtype=np.int8)
    values = np.zeros((p, k))
    for c, rows in enumerate(blocks):
        for r in rows:
            kinds[r, c] = FREE
    for r, c in extra_free:
        kinds[r, c] = FREE
    lead = tuple(int(rows[0]) for rows in blocks) if leading is None else tuple(leading)
    if fixed_leading:
        for c, r in enumerate(lead):
            kinds[r, c] = FIXED
            values[r, c] = 1.0
    return LoadingPattern(kinds=kinds, values=values, leading=lead)


@dataclass(frozen=True)
class PsiPrior:
    """Prior on the residual variances of continuous items.

    kinds: ``heywood_guard`` InvGamma(c0, (c0-1)/(S_y^{-1})_jj) with the rate
    matched to the observed precision diagonal; ``inv_gamma`` InvGamma(a, b);
    ``half_cauchy`` half-Cauchy(scale) on the residual SD; ``uniform``
    Uniform(0, upper) on the residual SD.
    """

    kind: str = "heywood_guard"
    c0: float = 2.5
    a: float = 0.1
    b: float = 0.1
    scale: float = 5.0
    upper: float = 10.0


@dataclass(frozen=True)
class PriorConfig:
    cross_loading_var: float = 0.01
    free_loading_var: float | None = None  # default 1 (continuous), 4 (categorical)
    loading_prior: str = "fixed"  # or "unit_information" (continuous only)
    lkj_eta: float = 2.0
    phi_df: float | None = None  # covariance form, default p + 4
    omega_df: float | None = None  # default p + 6
    omega_scale: np.ndarray | None = None  # default identity
    psi: PsiPrior = field(default_factory=PsiPrior)
    alpha_var: float = 100.0
    tau_var: float = 100.0


@dataclass(frozen=True)
class ModelSpec:
    items: tuple[ItemSpec, ...]
    n_factors: int
    variant: str
    link: str = "identity"
    pattern: LoadingPattern | None = None
    phi_form: str = "correlation"
    priors: PriorConfig = field(default_factory=PriorConfig)
    augmentation: str = "zu"  # or "collapsed" for categorical models with u
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def p(self) -> int:
        return len(self.items)

    @property
    def k(self) -> int:
        return self.n_factors

    @property
    def has_u(self) -> bool:
        return self.variant in ("AZ", "EFA_C")

    def with_name(self, name: str) -> "ModelSpec":
        return replace(self, name=name)


@dataclass(frozen=True)
class Dataset:
    """Observed data: an (n, p) array plus the item descriptions.

    Binary items are coded 0/1; ordinal items 0..m-1. Codes are validated on
    construction.
    """

    values: np.ndarray
    items: tuple[ItemSpec, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must be a 2-d array")
        object.__setattr__(self, "items", tuple(self.items))
        if v.shape[1] != len(self.items):
            raise ValueError(f"{v.shape[1]} columns but {len(self.items)} items")
        if not np.all(np.isfinite(v)):
            raise ValueError("values contain NaN or infinity")
        for j, it in enumerate(self.items):
            col = v[:, j]
            if it.kind == CONTINUOUS:
                continue
            m = it.n_categories()
            if np.any(col != np.round(col)):
                raise ValueError(f"item {it.name!r}: non-integer codes")
            if col.size and (col.min() < 0 or col.max() > m - 1):
                raise ValueError(f"item {it.name!r}: codes outside 0..{m - 1}")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def codes(self) -> np.ndarray:
        return self.values.astype(np.int64)


@dataclass(frozen=True)
class ParameterSet:
    """One point in constrained parameter space.

    ``alpha`` always has length p; entries for ordinal items are fixed at
    zero (their location is absorbed by the cut-points). ``cutpoints`` has
    one increasing array per item (None for non-ordinal items). Latent
    blocks ``z`` (n, k) and ``u`` (n, p) are present for augmented
    categorical fits; ``h`` (n, p) replaces them under the collapsed
    augmentation (h_i = Lambda z_i + u_i marginally).
    """

    alpha: np.ndarray
    Lambda: np.ndarray
    Phi: np.ndarray
    Omega: np.ndarray | None = None
    psi2: np.ndarray | None = None
    cutpoints: tuple[np.ndarray | None, ...] = ()
    z: np.ndarray | None = None
    u: np.ndarray | None = None
    h: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _readonly(np.asarray(self.alpha, dtype=float)))
        object.__setattr__(self, "Lambda", _readonly(np.asarray(self.Lambda, dtype=float)))
        object.__setattr__(self, "Phi", _readonly(np.asarray(self.Phi, dtype=float)))
        for name in ("Omega", "psi2", "z", "u", "h"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _readonly(np.asarray(val, dtype=float)))
        object.__setattr__(
            self,
            "cutpoints",
            tuple(None if c is None else _readonly(np.asarray(c, dtype=float)) for c in self.cutpoints),
        )


@dataclass(frozen=True)
class ValidatedSpec:
    """A ModelSpec that passed validation, with derived dimensions."""

    spec: ModelSpec
    kind: str  # "continuous" or "categorical"
    structural_dim: int
    latent_per_row: int
    sampled_loadings: tuple[tuple[int, int], ...]

    @property
    def p(self) -> int:
        return self.spec.p

    @property
    def k(self) -> int:
        return self.spec.k

    def latent_dim(self, n: int) -> int:
        return n * self.latent_per_row

    def total_dim(self, n: int) -> int:
        return self.structural_dim + self.latent_dim(n)


def validate_spec(spec: ModelSpec) -> ValidatedSpec:
    """Check a ModelSpec for structural errors.

    Returns a ValidatedSpec with derived dimensions, or raises SpecError
    carrying every diagnostic found.
    """
    bad: list[str] = []
    p, k = spec.p, spec.n_factors
    if p < 1:
        bad.append("model needs at least one item")
    if k < 1:
        bad.append("model needs at least one factor")
    if spec.variant not in VARIANTS:
        bad.append(f"unknown variant {spec.variant!r}")
    if spec.link not in LINKS:
        bad.append(f"unknown link {spec.link!r}")
    if spec.phi_form not in ("correlation", "covariance"):
        bad.append(f"unknown phi_form {spec.phi_form!r}")
    if spec.augmentation not in ("zu", "collapsed"):
        bad.append(f"unknown augmentation {spec.augmentation!r}")

    names = [it.name for it in spec.items]
    if len(set(names)) != len(names):
        bad.append("item names must be unique")
    kinds = {it.kind for it in spec.items}
    if not kinds <= set(ITEM_KINDS):
        bad.append(f"unknown item kinds: {sorted(kinds - set(ITEM_KINDS))}")
    if CONTINUOUS in kinds and kinds != {CONTINUOUS}:
        bad.append("continuous and categorical items cannot be mixed")
    data_kind = CONTINUOUS if kinds == {CONTINUOUS} else "categorical"
    if data_kind == CONTINUOUS and spec.link != "identity":
        bad.append("continuous items require the identity link")
    if data_kind == "categorical" and spec.link == "identity":
        bad.append("binary/ordinal items require a logit or probit link")
    for it in spec.items:
        if it.kind == ORDINAL:
            if it.categories is None or it.categories < 2:
                bad.append(f"item {it.name!r}: ordinal items need categories >= 2")
        elif it.categories not in (None, 2) or (it.kind == CONTINUOUS and it.categories is not None):
            if it.kind == BINARY and it.categories == 2:
                pass
            else:
                bad.append(f"item {it.name!r}: categories not meaningful for kind {it.kind!r}")

    est_efa = spec.variant in ("EFA", "EFA_C")
    if est_efa:
        if spec.pattern is not None:
            bad.append("EFA variants take no loading pattern (all loadings free)")
    else:
        if spec.pattern is None:
            bad.append(f"variant {spec.variant} requires a loading pattern")
        else:
            pat = spec.pattern
            if pat.shape != (p, k):
                bad.append(f"pattern shape {pat.shape} does not match (p, k)=({p}, {k})")
            else:
                if len(pat.leading) != k:
                    bad.append("pattern needs one leading item per factor")
                else:
                    for c, r in enumerate(pat.leading):
                        if not 0 <= r < p:
                            bad.append(f"factor {c}: leading item index {r} out of range")
                            continue
                        code = pat.kinds[r, c]
                        if spec.phi_form == "correlation" and code != FREE:
                            bad.append(f"factor {c}: leading loading must be free under phi_form='correlation'")
                        if spec.phi_form == "covariance" and not (
                            code == FIXED and pat.values[r, c] > 0
                        ):
                            bad.append(
                                f"factor {c}: leading loading must be fixed positive under phi_form='covariance'"
                            )
                for c in range(k):
                    if not np.any(pat.kinds[:, c] != FIXED) and spec.phi_form == "correlation":
                        bad.append(f"factor {c} has no sampled loadings")
                if spec.variant == "EZ" and np.any(pat.kinds == APPROX_ZERO):
                    bad.append("EZ pattern cannot contain approximate-zero entries")

    if spec.augmentation == "collapsed":
        if not spec.has_u:
            bad.append("collapsed augmentation requires a variant with item effects (AZ, EFA_C)")
        if data_kind == CONTINUOUS:
            bad.append("collapsed augmentation applies only to categorical models")

    pr = spec.priors
    if pr.cross_loading_var <= 0 or pr.alpha_var <= 0 or pr.tau_var <= 0:
        bad.append("prior variances must be positive")
    if pr.free_loading_var is not None and pr.free_loading_var <= 0:
        bad.append("free_loading_var must be positive")
    if pr.loading_prior not in ("fixed", "unit_information"):
        bad.append(f"unknown loading_prior {pr.loading_prior!r}")
    if pr.loading_prior == "unit_information" and data_kind != CONTINUOUS:
        bad.append("unit_information loading prior requires continuous items")
    if pr.lkj_eta <= 0:
        bad.append("lkj_eta must be positive")
    if pr.omega_df is not None and pr.omega_df <= p + 1:
        bad.append("omega_df must exceed p + 1")
    if pr.phi_df is not None and pr.phi_df <= k + 1:
        bad.append("phi_df must exceed k + 1")
    if pr.omega_scale is not None:
        s = np.asarray(pr.omega_scale, dtype=float)
        if s.shape != (p, p):
            bad.append("omega_scale must be (p, p)")
    ps = pr.psi
    if ps.kind not in ("heywood_guard", "inv_gamma", "half_cauchy", "uniform"):
        bad.append(f"unknown psi prior kind {ps.kind!r}")
    elif ps.kind == "heywood_guard" and ps.c0 <= 1:
        bad.append("heywood_guard needs c0 > 1")
    elif ps.kind == "inv_gamma" and (ps.a <= 0 or ps.b <= 0):
        bad.append("inv_gamma psi prior needs a, b > 0")
    elif ps.kind == "half_cauchy" and ps.scale <= 0:
        bad.append("half_cauchy psi prior needs scale > 0")
    elif ps.kind == "uniform" and ps.upper <= 0:
        bad.append("uniform psi prior needs upper > 0")

    if bad:
        raise SpecError(bad)

    # derived dimensions
    n_alpha = sum(1 for it in spec.items if it.kind != ORDINAL)
    n_tau = sum(it.n_categories() - 1 for it in spec.items if it.kind == ORDINAL)
    if est_efa:
        sampled = [(r, c) for r in range(p) for c in range(k)]
    else:
        sampled = spec.pattern.sampled_entries()
    if est_efa:
        phi_dim = 0
    elif spec.phi_form == "correlation":
        phi_dim = k * (k - 1) // 2
    else:
        phi_dim = k * (k + 1) // 2
    omega_dim = p * (p + 1) // 2 if spec.has_u else 0
    psi_dim = p if data_kind == CONTINUOUS else 0
    structural = n_alpha + n_tau + len(sampled) + phi_dim + omega_dim + psi_dim

    if data_kind == CONTINUOUS:
        per_row = 0
    elif spec.augmentation == "collapsed":
        per_row = p
    else:
        per_row = k + (p if spec.has_u else 0)

    return ValidatedSpec(
        spec=spec,
        kind=data_kind,
        structural_dim=structural,
        latent_per_row=per_row,
        sampled_loadings=tuple(sampled),
    )


def implied_covariance(params: ParameterSet, spec: ModelSpec) -> np.ndarray:
    """Model-implied covariance of the (latent) item responses.

    Lambda Phi Lambda' plus Omega for variants with item effects, plus
    diag(psi2) for continuous items.
    """
    S = params.Lambda @ params.Phi @ params.Lambda.T
    if spec.has_u:
        if params.Omega is None:
            raise ValueError(f"variant {spec.variant} requires Omega")
        S = S + params.Omega
    if params.psi2 is not None:
        S = S + np.diag(params.psi2)
    return S


def free_loading_variance(spec: ModelSpec, kind: str) -> float:
    """Prior variance of hypothesized loadings under the fixed-variance prior."""
    if spec.priors.free_loading_var is not None:
        return spec.priors.free_loading_var
    return 1.0 if kind == CONTINUOUS else 4.0
