"""Model assessment: posterior predictive p-values, proper scoring rules,
K-fold cross-validation, and the three-recommendation decision rule.

Continuous fits are checked with the likelihood-ratio discrepancy between the
sample and implied covariance; categorical fits with the G^2 statistic over
response-pattern frequencies, with pattern probabilities integrated over the
latent variables by Monte Carlo. Out-of-sample comparison uses the variogram
score (continuous) or the log score on pattern tables (categorical), summed
over folds. ``decide`` turns PPP values and a differences-from-best score
table into one of five verdicts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .convergence import diagnostics as run_diagnostics
from .fit import Draws, SamplerConfig, child_seed, hmc_run
from .model import (
    BINARY,
    CONTINUOUS,
    Dataset,
    ModelSpec,
    ParameterSet,
    implied_covariance,
    validate_spec,
)

# full pattern enumeration is quadratic-memory naive beyond this
MAX_PATTERNS = 1 << 16

VERDICTS = ("SUPPORT_EZ", "SUPPORT_AZ", "NO_SUPPORT", "OVERFIT_REJECT", "INCONCLUSIVE")


# --------------------------------------------------------------- discrepancies


def lrt_discrepancy(S: np.ndarray, Sigma: np.ndarray, n: int, p: int | None = None) -> float:
    """(n-1)(log|Sigma| + tr(S Sigma^-1) - log|S| - p).

    Zero when Sigma equals the sample covariance S exactly.
    """
    S = np.asarray(S, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if p is None:
        p = S.shape[0]
    sgn_s, logdet_s = np.linalg.slogdet(S)
    sgn_m, logdet_m = np.linalg.slogdet(Sigma)
    if sgn_s <= 0 or sgn_m <= 0:
        raise ValueError("sample and implied covariance must be positive definite")
    A = np.linalg.solve(Sigma, S)
    return float((n - 1.0) * (logdet_m + np.trace(A) - logdet_s - p))


def g2_statistic(O: np.ndarray, pi: np.ndarray, n: float | None = None) -> float:
    """G^2 = sum_r O_r log(O_r / (n pi_r)), with 0 log 0 := 0.

    A zero predicted probability on an observed pattern yields +inf.
    """
    O = np.asarray(O, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if n is None:
        n = float(O.sum())
    mask = O > 0
    if np.any(pi[mask] <= 0.0):
        return math.inf
    return float(np.sum(O[mask] * np.log(O[mask] / (n * pi[mask]))))


# --------------------------------------------------------------- pattern table


@dataclass(frozen=True)
class PatternTable:
    """Observed frequencies over the full lexicographic response-pattern grid."""

    patterns: np.ndarray  # (R, p) category codes
    O: np.ndarray  # (R,) observed counts
    n: int

    def __post_init__(self):
        if int(self.O.sum()) != self.n:
            raise ValueError("pattern counts do not sum to n")

    @staticmethod
    def dims_of(spec: ModelSpec) -> tuple[int, ...]:
        return tuple(item.n_categories() for item in spec.items)

    @classmethod
    def from_data(cls, data: Dataset, spec: ModelSpec) -> "PatternTable":
        dims = cls.dims_of(spec)
        patterns = enumerate_patterns(dims)
        codes = np.asarray(data.values, dtype=np.intp)
        idx = np.ravel_multi_index(tuple(codes.T), dims)
        O = np.bincount(idx, minlength=patterns.shape[0]).astype(np.int64)
        return cls(patterns=patterns, O=O, n=codes.shape[0])


def enumerate_patterns(dims: tuple[int, ...]) -> np.ndarray:
    """All response patterns in lexicographic order (last item fastest)."""
    R = int(np.prod(dims))
    if R > MAX_PATTERNS:
        raise ValueError(f"{R} response patterns exceed the supported limit {MAX_PATTERNS}")
    return np.array(list(itertools.product(*(range(m) for m in dims))), dtype=np.int64)


def pattern_probability(
    params: ParameterSet,
    spec: ModelSpec,
    s_mc: int = 500,
    rng: np.random.Generator | int | None = None,
) -> np.ndarray:
    """Monte Carlo pattern probabilities integrating out z (and u).

    Each MC draw contributes an exactly normalized conditional distribution,
    so the averaged vector sums to one up to float round-off.
    """
    vs = validate_spec(spec)
    if vs.kind == CONTINUOUS:
        raise ValueError("pattern probabilities are defined for categorical models")
    if s_mc < 1:
        raise ValueError("s_mc must be at least 1")
    rng = np.random.default_rng(rng)
    dims = PatternTable.dims_of(spec)
    R = int(np.prod(dims))
    if R > MAX_PATTERNS:
        raise ValueError(f"{R} response patterns exceed the supported limit {MAX_PATTERNS}")

    k, p = spec.k, spec.p
    Z = dist.mv_normal(rng, np.zeros(k), params.Phi, s_mc)
    lin = Z @ params.Lambda.T
    if spec.has_u:
        lin = lin + dist.mv_normal(rng, np.zeros(p), params.Omega, s_mc)

    probs = np.ones((s_mc, 1))
    for j, item in enumerate(spec.items):
        if item.kind == BINARY:
            q = dist.link_cdf(spec.link, params.alpha[j] + lin[:, j])
            cat = np.column_stack([1.0 - q, q])
        else:
            tau = np.asarray(params.cutpoints[j], dtype=float)
            G = dist.link_cdf(spec.link, tau[None, :] - lin[:, j][:, None])
            edges = np.concatenate(
                [np.zeros((s_mc, 1)), G, np.ones((s_mc, 1))], axis=1
            )
            cat = np.diff(edges, axis=1)
        probs = (probs[:, :, None] * cat[:, None, :]).reshape(s_mc, -1)
    return probs.mean(axis=0)


# ------------------------------------------------------------------ replicates


def replicate_dataset(
    params: ParameterSet, spec: ModelSpec, n: int, rng: np.random.Generator
) -> np.ndarray:
    """One replicated data matrix of n rows drawn from the model at ``params``."""
    k, p = spec.k, spec.p
    kind = validate_spec(spec).kind
    if kind == CONTINUOUS:
        return dist.mv_normal(rng, params.alpha, implied_covariance(params, spec), n)
    Z = dist.mv_normal(rng, np.zeros(k), params.Phi, n)
    lin = Z @ params.Lambda.T
    if spec.has_u:
        lin = lin + dist.mv_normal(rng, np.zeros(p), params.Omega, n)
    out = np.empty((n, p))
    for j, item in enumerate(spec.items):
        if item.kind == BINARY:
            q = dist.link_cdf(spec.link, params.alpha[j] + lin[:, j])
            out[:, j] = dist.bernoulli(rng, q)
        else:
            out[:, j] = dist.categorical_ordinal(rng, params.cutpoints[j], lin[:, j], spec.link)
    return out


# ------------------------------------------------------------------------- PPP


def ppp(
    spec: ModelSpec,
    data: Dataset,
    draws: Draws,
    thin: int = 8,
    rng: np.random.Generator | int | None = None,
    s_mc: int = 500,
) -> float:
    """Posterior predictive p-value with a strict-inequality indicator.

    For every ``thin``-th retained draw the observed-data discrepancy is
    compared against the discrepancy of a fresh replicated dataset of the
    same size drawn at that parameter point.
    """
    vs = validate_spec(spec)
    rng = np.random.default_rng(rng)
    params = draws.parameter_sets(thin)
    if not params:
        raise ValueError("no retained draws")
    n = data.n
    hits = 0
    if vs.kind == CONTINUOUS:
        S_obs = np.cov(data.values, rowvar=False)
        for ps in params:
            Sig = implied_covariance(ps, spec)
            d_obs = lrt_discrepancy(S_obs, Sig, n)
            rep = replicate_dataset(ps, spec, n, rng)
            d_rep = lrt_discrepancy(np.cov(rep, rowvar=False), Sig, n)
            hits += d_obs < d_rep
    else:
        table = PatternTable.from_data(data, spec)
        dims = PatternTable.dims_of(spec)
        R = table.O.size
        for ps in params:
            pi = pattern_probability(ps, spec, s_mc=s_mc, rng=rng)
            d_obs = g2_statistic(table.O, pi, n)
            rep = replicate_dataset(ps, spec, n, rng).astype(np.intp)
            idx = np.ravel_multi_index(tuple(rep.T), dims)
            O_rep = np.bincount(idx, minlength=R)
            d_rep = g2_statistic(O_rep, pi, n)
            hits += d_obs < d_rep
    return hits / len(params)


# --------------------------------------------------------------- scoring rules


def variogram_score(y: np.ndarray, samples: np.ndarray, P: float = 0.5, weights=1.0) -> float:
    """Variogram score of order P over all ordered item pairs.

    VS = sum_{j,k} w_jk (|y_j - y_k|^P - mean_m |s_mj - s_mk|^P)^2.
    """
    y = np.asarray(y, dtype=float)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    dy = np.abs(y[:, None] - y[None, :]) ** P
    vbar = np.mean(np.abs(samples[:, :, None] - samples[:, None, :]) ** P, axis=0)
    w = np.broadcast_to(np.asarray(weights, dtype=float), dy.shape)
    return float(np.sum(w * (dy - vbar) ** 2))


def variogram_score_rows(Y: np.ndarray, samples: np.ndarray, P: float = 0.5, weights=1.0) -> np.ndarray:
    """Row-wise variogram scores against one shared predictive sample set."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    vbar = np.mean(np.abs(samples[:, :, None] - samples[:, None, :]) ** P, axis=0)
    dy = np.abs(Y[:, :, None] - Y[:, None, :]) ** P
    w = np.broadcast_to(np.asarray(weights, dtype=float), vbar.shape)
    return np.sum(w * (dy - vbar[None]) ** 2, axis=(1, 2))


def log_score_patterns(O_test: np.ndarray, pi_train: np.ndarray) -> float:
    """-sum_r O_r^test log pi_r^train, multinomial constant dropped."""
    O = np.asarray(O_test, dtype=float)
    pi = np.asarray(pi_train, dtype=float)
    mask = O > 0
    if np.any(pi[mask] <= 0.0):
        return math.inf
    return float(-np.sum(O[mask] * np.log(pi[mask])))


# ------------------------------------------------------------ cross-validation


@dataclass(frozen=True)
class FoldPlan:
    n: int
    K: int
    folds: tuple[np.ndarray, ...]

    def test_indices(self, i: int) -> np.ndarray:
        return self.folds[i]

    def train_indices(self, i: int) -> np.ndarray:
        return np.concatenate([f for j, f in enumerate(self.folds) if j != i])


def kfold_split(n: int, K: int, seed: int) -> FoldPlan:
    """K disjoint test folds covering range(n), sizes differing by at most 1."""
    if not 2 <= K <= n:
        raise ValueError(f"K must satisfy 2 <= K <= n, got K={K}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = tuple(np.sort(f) for f in np.array_split(perm, K))
    return FoldPlan(n=n, K=K, folds=folds)


@dataclass(frozen=True)
class ScoreRecord:
    """Cross-validation score of one model: total = sum of per-fold scores."""

    model: str
    total: float
    per_fold: tuple[float, ...]
    fold_ok: tuple[bool | None, ...] = ()

    def __post_init__(self):
        s = float(np.sum(self.per_fold))
        if math.isfinite(self.total) and abs(self.total - s) > 1e-8 * max(1.0, abs(s)):
            raise ValueError("total must equal the sum of per-fold scores")


def cross_validate(
    spec: ModelSpec,
    data: Dataset,
    config: SamplerConfig,
    K: int = 3,
    fold_seed: int | None = None,
    thin: int = 8,
    s_mc: int = 500,
    model_id: str | None = None,
) -> ScoreRecord:
    """K-fold predictive assessment: variogram score per continuous test row,
    log score on the test pattern table for categorical data; fold scores
    are summed.

    ``fold_seed`` fixes the partition; models compared against each other
    must share it so they see identical folds.
    """
    vs = validate_spec(spec)
    if fold_seed is None:
        fold_seed = config.seed
    plan = kfold_split(data.n, K, fold_seed)
    per_fold: list[float] = []
    fold_ok: list[bool | None] = []
    for i in range(K):
        tr = plan.train_indices(i)
        te = plan.test_indices(i)
        train = Dataset(data.values[tr], data.items)
        cfg_i = config.with_seed(child_seed(config.seed, 11, i))
        draws = hmc_run(spec, train, cfg_i)
        if config.chains >= 2:
            fold_ok.append(bool(run_diagnostics(draws).ok))
        else:
            fold_ok.append(None)
        params = draws.parameter_sets(thin)
        rng = np.random.default_rng(child_seed(fold_seed, 13, i))
        if vs.kind == CONTINUOUS:
            reps = np.stack([replicate_dataset(ps, spec, 1, rng)[0] for ps in params])
            scores = variogram_score_rows(data.values[te], reps)
            per_fold.append(float(scores.sum()))
        else:
            pi = np.mean(
                [pattern_probability(ps, spec, s_mc=s_mc, rng=rng) for ps in params], axis=0
            )
            test_table = PatternTable.from_data(Dataset(data.values[te], data.items), spec)
            per_fold.append(log_score_patterns(test_table.O, pi))
    name = model_id or spec.name or spec.variant
    return ScoreRecord(
        model=name,
        total=float(np.sum(per_fold)),
        per_fold=tuple(per_fold),
        fold_ok=tuple(fold_ok),
    )


def score_table(records) -> dict[str, float]:
    """Differences from the best (smallest) total; the best model shows 0."""
    if isinstance(records, dict):
        totals = dict(records)
    else:
        totals = {r.model: r.total for r in records}
    if not totals:
        raise ValueError("need at least one score record")
    best = min(totals.values())
    return {m: t - best for m, t in totals.items()}


# -------------------------------------------------------------------- decision


@dataclass(frozen=True)
class Verdict:
    outcome: str
    rationale: tuple[str, ...]

    def __post_init__(self):
        if self.outcome not in VERDICTS:
            raise ValueError(f"unknown outcome {self.outcome!r}")


def decide(
    ppp_by_model: dict[str, float],
    table: dict[str, float],
    ppp_threshold: float = 0.1,
    slack: float = 0.05,
    ez: str = "EZ",
    az: str = "AZ",
    benchmarks: tuple[str, ...] | None = None,
) -> Verdict:
    """Three-recommendation decision rule.

    1. The hypothesized model fits (EZ PPP >= threshold): SUPPORT_EZ.
    2. Neither EZ nor AZ fits: NO_SUPPORT.
    3. Only AZ fits: scores arbitrate. AZ predicting worse than EZ is
       overfitting (OVERFIT_REJECT); AZ within ``slack`` (relative) of the
       best exploratory benchmark's table entry is SUPPORT_AZ; otherwise a
       competing structure is plausible (INCONCLUSIVE).

    ``table`` holds differences-from-best as produced by :func:`score_table`.
    """
    for key in (ez, az):
        if key not in ppp_by_model:
            raise ValueError(f"PPP entry for {key!r} is required")
        if key not in table:
            raise ValueError(f"score entry for {key!r} is required")
    trail = [
        f"PPP[{ez}]={ppp_by_model[ez]:.3f}, PPP[{az}]={ppp_by_model[az]:.3f}, threshold={ppp_threshold}"
    ]
    if ppp_by_model[ez] >= ppp_threshold:
        trail.append(f"recommendation 1: {ez} shows adequate predictive fit")
        return Verdict("SUPPORT_EZ", tuple(trail))
    if ppp_by_model[az] < ppp_threshold:
        trail.append(f"recommendation 2: neither {ez} nor {az} shows adequate fit")
        return Verdict("NO_SUPPORT", tuple(trail))
    if benchmarks is None:
        benchmarks = tuple(m for m in table if m not in (ez, az))
    if not benchmarks:
        raise ValueError("recommendation 3 needs at least one exploratory benchmark entry")
    trail.append(
        f"recommendation 3: only {az} fits; score differences "
        + ", ".join(f"{m}={table[m]:.3f}" for m in table)
    )
    if table[az] > table[ez]:
        trail.append(f"{az} scores worse than {ez} despite fitting: overfit")
        return Verdict("OVERFIT_REJECT", tuple(trail))
    bench = min(benchmarks, key=lambda m: table[m])
    limit = table[bench] * (1.0 + slack)
    if table[az] <= limit:
        trail.append(
            f"{az} ({table[az]:.3f}) within slack of benchmark {bench} ({table[bench]:.3f})"
        )
        return Verdict("SUPPORT_AZ", tuple(trail))
    trail.append(
        f"{az} ({table[az]:.3f}) beats {ez} but trails benchmark {bench} ({table[bench]:.3f})"
    )
    return Verdict("INCONCLUSIVE", tuple(trail))


# ---------------------------------------------------------------- orchestrator


@dataclass(frozen=True)
class AssessmentReport:
    kind: str
    n: int
    K: int
    ppp_threshold: float
    slack: float
    seed: int
    ppp: dict[str, float]
    records: tuple[ScoreRecord, ...]
    table: dict[str, float]
    verdict: Verdict | None
    diagnostics_ok: dict[str, bool | None] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "folds": self.K,
            "ppp_threshold": self.ppp_threshold,
            "slack": self.slack,
            "seed": self.seed,
            "ppp": dict(self.ppp),
            "scores": {
                r.model: {
                    "total": r.total,
                    "per_fold": list(r.per_fold),
                    "fold_diagnostics_ok": list(r.fold_ok),
                }
                for r in self.records
            },
            "differences_from_best": dict(self.table),
            "diagnostics_ok": dict(self.diagnostics_ok),
            "verdict": None
            if self.verdict is None
            else {"outcome": self.verdict.outcome, "rationale": list(self.verdict.rationale)},
        }


def assess_models(
    specs: dict[str, ModelSpec],
    data: Dataset,
    config: SamplerConfig,
    K: int = 3,
    thin: int = 8,
    s_mc: int = 500,
    ppp_threshold: float = 0.1,
    slack: float = 0.05,
    ez: str = "EZ",
    az: str = "AZ",
    benchmarks: tuple[str, ...] | None = None,
) -> AssessmentReport:
    """Fit, check, and cross-validate a family of models on one dataset.

    Every model gets its own seed stream derived from ``config.seed``; the
    fold partition is shared. A verdict is attached when both the ``ez`` and
    ``az`` ids are present.
    """
    if not specs:
        raise ValueError("no model specifications given")
    kinds = {validate_spec(s).kind for s in specs.values()}
    if len(kinds) != 1:
        raise ValueError("all models must share the data kind")
    kind = kinds.pop()

    ppp_by_model: dict[str, float] = {}
    records: list[ScoreRecord] = []
    diag_ok: dict[str, bool | None] = {}
    for m, (name, spec) in enumerate(specs.items()):
        cfg_m = config.with_seed(child_seed(config.seed, 101, m))
        draws = hmc_run(spec, data, cfg_m)
        diag_ok[name] = bool(run_diagnostics(draws).ok) if config.chains >= 2 else None
        ppp_by_model[name] = ppp(
            spec,
            data,
            draws,
            thin=thin,
            rng=np.random.default_rng(child_seed(config.seed, 103, m)),
            s_mc=s_mc,
        )
        records.append(
            cross_validate(
                spec,
                data,
                cfg_m,
                K=K,
                fold_seed=child_seed(config.seed, 107),
                thin=thin,
                s_mc=s_mc,
                model_id=name,
            )
        )
    table = score_table(records)
    verdict = None
    if ez in specs and az in specs:
        verdict = decide(
            ppp_by_model,
            table,
            ppp_threshold=ppp_threshold,
            slack=slack,
            ez=ez,
            az=az,
            benchmarks=benchmarks,
        )
    return AssessmentReport(
        kind=kind,
        n=data.n,
        K=K,
        ppp_threshold=ppp_threshold,
        slack=slack,
        seed=config.seed,
        ppp=ppp_by_model,
        records=tuple(records),
        table=table,
        verdict=verdict,
        diagnostics_ok=diag_ok,
    )
