"""Spec validation, loading patterns, implied covariance, dataset checks."""

import numpy as np
import pytest

from azsem.model import (
    APPROX_ZERO,
    FIXED,
    FREE,
    Dataset,
    ItemSpec,
    LoadingPattern,
    ModelSpec,
    ParameterSet,
    PriorConfig,
    PsiPrior,
    SpecError,
    implied_covariance,
    simple_pattern,
    validate_spec,
)

CONT6 = [ItemSpec(f"y{j}", "continuous") for j in range(1, 7)]
BIN6 = [ItemSpec(f"y{j}", "binary") for j in range(1, 7)]
BLOCKS = ((0, 1, 2), (3, 4, 5))


def ez_spec(items=None, **kw):
    return ModelSpec(
        items=items or CONT6,
        n_factors=2,
        variant="EZ",
        pattern=simple_pattern(6, 2, BLOCKS, off_kind=FIXED),
        **kw,
    )


def test_simple_pattern_layout():
    pat = simple_pattern(6, 2, BLOCKS, off_kind=APPROX_ZERO)
    assert pat.kinds.shape == (6, 2)
    assert pat.leading == (0, 3)
    for c, block in enumerate(BLOCKS):
        for r in range(6):
            want = FREE if r in block else APPROX_ZERO
            assert pat.kinds[r, c] == want
    assert np.all(pat.values == 0.0)


def test_simple_pattern_extra_free_and_fixed_leading():
    pat = simple_pattern(6, 2, BLOCKS, off_kind=FIXED, extra_free=((0, 1),))
    assert pat.kinds[0, 1] == FREE
    pat2 = simple_pattern(6, 2, BLOCKS, off_kind=FIXED, fixed_leading=True)
    assert pat2.kinds[0, 0] == FIXED and pat2.values[0, 0] == 1.0
    assert pat2.kinds[3, 1] == FIXED and pat2.values[3, 1] == 1.0


def test_validate_accepts_all_variants():
    validate_spec(ez_spec())
    validate_spec(
        ModelSpec(items=CONT6, n_factors=2, variant="AZ",
                  pattern=simple_pattern(6, 2, BLOCKS, off_kind=APPROX_ZERO))
    )
    validate_spec(ModelSpec(items=CONT6, n_factors=2, variant="EFA"))
    validate_spec(ModelSpec(items=CONT6, n_factors=2, variant="EFA_C"))


def test_validate_collects_every_diagnostic():
    spec = ModelSpec(
        items=[ItemSpec("a", "continuous"), ItemSpec("a", "binary")],
        n_factors=1,
        variant="XX",
        link="cauchit",
    )
    with pytest.raises(SpecError) as err:
        validate_spec(spec)
    msg = str(err.value)
    assert "unknown variant" in msg
    assert "unknown link" in msg
    assert "unique" in msg
    assert "mixed" in msg


def test_validate_rejects_bad_patterns():
    with pytest.raises(SpecError, match="requires a loading pattern"):
        validate_spec(ModelSpec(items=CONT6, n_factors=2, variant="EZ"))
    with pytest.raises(SpecError, match="no loading pattern"):
        validate_spec(
            ModelSpec(items=CONT6, n_factors=2, variant="EFA",
                      pattern=simple_pattern(6, 2, BLOCKS, off_kind=FIXED))
        )
    with pytest.raises(SpecError, match="shape"):
        validate_spec(
            ModelSpec(items=CONT6, n_factors=2, variant="EZ",
                      pattern=simple_pattern(5, 2, ((0, 1), (2, 3)), off_kind=FIXED))
        )
    with pytest.raises(SpecError, match="approximate-zero"):
        validate_spec(
            ModelSpec(items=CONT6, n_factors=2, variant="EZ",
                      pattern=simple_pattern(6, 2, BLOCKS, off_kind=APPROX_ZERO))
        )
    # leading loading must be free under the correlation form
    pat = simple_pattern(6, 2, BLOCKS, off_kind=FIXED, fixed_leading=True)
    with pytest.raises(SpecError, match="must be free"):
        validate_spec(ModelSpec(items=CONT6, n_factors=2, variant="EZ", pattern=pat))
    # and fixed positive under the covariance form
    free_pat = simple_pattern(6, 2, BLOCKS, off_kind=FIXED)
    with pytest.raises(SpecError, match="fixed positive"):
        validate_spec(ModelSpec(items=CONT6, n_factors=2, variant="EZ",
                                pattern=free_pat, phi_form="covariance"))
    validate_spec(ModelSpec(items=CONT6, n_factors=2, variant="EZ",
                            pattern=pat, phi_form="covariance"))


def test_validate_link_and_kind_interplay():
    with pytest.raises(SpecError, match="identity link"):
        validate_spec(ez_spec(link="logit"))
    with pytest.raises(SpecError, match="logit or probit"):
        validate_spec(ez_spec(items=BIN6))
    validate_spec(ez_spec(items=BIN6, link="probit"))
    ordinal = [ItemSpec(f"o{j}", "ordinal", categories=4) for j in range(6)]
    validate_spec(ez_spec(items=ordinal, link="logit"))
    with pytest.raises(SpecError, match="categories"):
        validate_spec(ez_spec(items=[ItemSpec("o1", "ordinal")] + BIN6[1:], link="logit"))


def test_validate_augmentation_rules():
    with pytest.raises(SpecError, match="item effects"):
        validate_spec(ez_spec(items=BIN6, link="logit", augmentation="collapsed"))
    az = ModelSpec(items=BIN6, n_factors=2, variant="AZ", link="logit",
                   pattern=simple_pattern(6, 2, BLOCKS, off_kind=APPROX_ZERO),
                   augmentation="collapsed")
    validate_spec(az)
    with pytest.raises(SpecError, match="categorical"):
        validate_spec(
            ModelSpec(items=CONT6, n_factors=2, variant="AZ",
                      pattern=simple_pattern(6, 2, BLOCKS, off_kind=APPROX_ZERO),
                      augmentation="collapsed")
        )


def test_validate_prior_ranges():
    with pytest.raises(SpecError, match="positive"):
        validate_spec(ez_spec(priors=PriorConfig(cross_loading_var=0.0)))
    with pytest.raises(SpecError, match="omega_df"):
        validate_spec(ez_spec(priors=PriorConfig(omega_df=6.0)))
    with pytest.raises(SpecError, match="c0"):
        validate_spec(ez_spec(priors=PriorConfig(psi=PsiPrior(kind="heywood_guard", c0=1.0))))
    with pytest.raises(SpecError, match="unit_information"):
        validate_spec(ez_spec(items=BIN6, link="logit",
                              priors=PriorConfig(loading_prior="unit_information")))


def test_implied_covariance_oracle():
    ps = ParameterSet(alpha=np.zeros(2), Lambda=np.array([[1.0], [0.8]]),
                      Phi=np.eye(1), psi2=np.array([1.0, 1.0]))
    spec = ModelSpec(items=[ItemSpec("a"), ItemSpec("b")], n_factors=1, variant="EZ",
                     pattern=simple_pattern(2, 1, ((0, 1),), off_kind=FIXED))
    got = implied_covariance(ps, spec)
    assert np.allclose(got, [[2.0, 0.8], [0.8, 1.64]])


def test_implied_covariance_includes_omega_only_with_u():
    lam = np.array([[1.0], [0.8]])
    omega = np.array([[0.3, 0.1], [0.1, 0.4]])
    ps = ParameterSet(alpha=np.zeros(2), Lambda=lam, Phi=np.eye(1),
                      Omega=omega, psi2=np.array([0.5, 0.5]))
    az = ModelSpec(items=[ItemSpec("a"), ItemSpec("b")], n_factors=1, variant="AZ",
                   pattern=simple_pattern(2, 1, ((0, 1),), off_kind=FIXED))
    got = implied_covariance(ps, az)
    assert np.allclose(got, lam @ lam.T + omega + 0.5 * np.eye(2))
    ez = ModelSpec(items=[ItemSpec("a"), ItemSpec("b")], n_factors=1, variant="EZ",
                   pattern=simple_pattern(2, 1, ((0, 1),), off_kind=FIXED))
    ps_no = ParameterSet(alpha=np.zeros(2), Lambda=lam, Phi=np.eye(1),
                         psi2=np.array([0.5, 0.5]))
    assert np.allclose(implied_covariance(ps_no, ez), lam @ lam.T + 0.5 * np.eye(2))


def test_dataset_basics():
    vals = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    data = Dataset(vals, [ItemSpec("a", "binary"), ItemSpec("b", "binary")])
    assert data.n == 3 and data.p == 2
    assert np.array_equal(data.codes(), vals.astype(int))
    with pytest.raises(ValueError):
        Dataset(vals, [ItemSpec("a", "binary")])  # item count mismatch
    with pytest.raises(ValueError):
        Dataset(np.array([[0.0, 2.0]]), [ItemSpec("a", "binary"), ItemSpec("b", "binary")])
