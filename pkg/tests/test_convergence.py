"""Tests for split R-hat, ESS, and the per-fit diagnostics report."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from azsem import (
    Diagnostics,
    Draws,
    Posterior,
    SamplerConfig,
    diagnostics,
    ess_mean,
    generate,
    identified_functions,
    scenario_models,
    sign_align,
    split_rhat,
)


def _fake_draws(spec, data, n_chains=2, n_samples=400, seed=0, scale=0.3,
                values=None, divergences=None):
    """Draws object with synthetic unconstrained values (no sampling)."""
    post = Posterior(spec, data)
    dim = post.packer.dim
    if values is None:
        rng = np.random.default_rng(seed)
        values = rng.normal(scale=scale, size=(n_chains, n_samples, dim))
    n_chains, n_samples = values.shape[:2]
    if divergences is None:
        divergences = np.zeros(n_chains, dtype=int)
    return Draws(
        values=values,
        logp=np.zeros((n_chains, n_samples)),
        accept_stat=np.ones((n_chains, n_samples)),
        divergences=np.asarray(divergences),
        warmup_divergences=np.zeros(n_chains, dtype=int),
        step_sizes=np.full(n_chains, 0.1),
        inv_mass=np.ones((n_chains, dim)),
        posterior=post,
        config=SamplerConfig(chains=n_chains, samples=n_samples),
    )


@pytest.fixture(scope="module")
def cont_data():
    data, _ = generate(1, "continuous", n=40, seed=17)
    return data


@pytest.fixture(scope="module")
def cont_models():
    return scenario_models("continuous")


# ---------------------------------------------------------------- split R-hat

def test_split_rhat_iid_near_one():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 2000))
    r = split_rhat(x)
    assert 0.99 <= r <= 1.01


def test_split_rhat_separated_chains():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 500))
    x[1] += 10.0
    assert split_rhat(x) > 3.0


def test_split_rhat_constant_is_nan():
    assert np.isnan(split_rhat(np.ones((2, 100))))
    # constant plus one chain offset: within-chain variance still zero
    x = np.ones((2, 100))
    x[1] = 5.0
    assert np.isnan(split_rhat(x))


def test_split_rhat_input_validation():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        split_rhat(rng.normal(size=(1, 100)))
    with pytest.raises(ValueError):
        split_rhat(rng.normal(size=100))
    with pytest.raises(ValueError):
        split_rhat(rng.normal(size=(3, 1)))  # cannot split length-1 chains


@given(st.integers(0, 10_000))
def test_split_rhat_lower_bound(seed):
    # var_plus >= (n-1)/n * W, so R-hat >= sqrt((n-1)/n) for split length n
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 5))
    n = int(rng.integers(10, 200))
    r = split_rhat(rng.normal(size=(m, n)))
    assert r >= np.sqrt((n // 2 - 1) / (n // 2)) - 1e-12


# ------------------------------------------------------------------------ ESS

def test_ess_iid_near_total():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 2000))
    ess = ess_mean(x)
    assert 4000 < ess <= 8000 + 1e-9


def test_ess_autocorrelated_is_small():
    # AR(1) with phi = 0.9 has integrated autocorrelation time ~19
    rng = np.random.default_rng(4)
    phi = 0.9
    x = np.empty((4, 2000))
    for c in range(4):
        e = rng.normal(size=2000) * np.sqrt(1 - phi**2)
        x[c, 0] = rng.normal()
        for t in range(1, 2000):
            x[c, t] = phi * x[c, t - 1] + e[t]
    ess = ess_mean(x)
    total = 8000
    assert total / 100 < ess < total / 5


def test_ess_antithetic_capped_at_total():
    # alternating +z,-z has negative lag-1 autocorrelation; tau estimate
    # collapses below 1/total and the cap at the raw draw count kicks in
    rng = np.random.default_rng(5)
    z = rng.normal(size=200)
    x = np.empty(400)
    x[0::2] = z
    x[1::2] = -z
    assert ess_mean(x[None, :]) == 400.0


def test_ess_constant_is_nan():
    assert np.isnan(ess_mean(np.full((2, 100), 3.0)))


@given(st.integers(0, 10_000))
def test_ess_never_exceeds_total(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    n = int(rng.integers(8, 300))
    ess = ess_mean(rng.normal(size=(m, n)))
    assert ess <= m * n + 1e-9


# ---------------------------------------------------------------- diagnostics

def test_diagnostics_healthy(cont_models, cont_data):
    d = _fake_draws(cont_models["EZ"], cont_data, n_samples=400, seed=10)
    diag = diagnostics(d)
    assert isinstance(diag, Diagnostics)
    assert list(diag.names) == d.structural_names()
    assert diag.undefined == ()
    assert diag.rhat.shape == diag.ess.shape == (len(diag.names),)
    assert diag.max_rhat() < 1.05
    assert diag.min_ess() > 100
    assert diag.divergences == 0 and diag.divergence_rate == 0.0
    assert diag.rhat_ok and diag.divergence_ok and diag.ok


def test_diagnostics_flags_separated_chains(cont_models, cont_data):
    rng = np.random.default_rng(11)
    post_dim = Posterior(cont_models["EZ"], cont_data).packer.dim
    values = rng.normal(scale=0.3, size=(2, 200, post_dim))
    values[1] += 3.0
    d = _fake_draws(cont_models["EZ"], cont_data, values=values)
    diag = diagnostics(d)
    assert diag.max_rhat() > 1.05
    assert not diag.rhat_ok and not diag.ok
    assert diag.divergence_ok  # only R-hat failed


def test_diagnostics_constant_draws_marked_undefined(cont_models, cont_data):
    post_dim = Posterior(cont_models["EZ"], cont_data).packer.dim
    vec = np.linspace(-0.5, 0.5, post_dim)
    values = np.broadcast_to(vec, (2, 50, post_dim)).copy()
    d = _fake_draws(cont_models["EZ"], cont_data, values=values)
    diag = diagnostics(d)
    assert set(diag.undefined) == set(diag.names)
    assert np.isnan(diag.rhat).all()
    # undefined parameters do not poison the pass flag
    assert diag.rhat_ok and diag.ok
    assert np.isnan(diag.max_rhat()) and np.isnan(diag.min_ess())


def test_diagnostics_divergence_threshold(cont_models, cont_data):
    d = _fake_draws(cont_models["EZ"], cont_data, n_samples=400, seed=12,
                    divergences=[30, 30])
    diag = diagnostics(d)  # rate 60/800 = 0.075 < default 0.10
    assert diag.divergences == 60
    assert diag.divergence_rate == pytest.approx(0.075)
    assert diag.divergence_ok and diag.ok
    strict = diagnostics(d, divergence_threshold=0.05)
    assert not strict.divergence_ok and not strict.ok
    assert strict.rhat_ok


def test_diagnostics_rhat_threshold(cont_models, cont_data):
    d = _fake_draws(cont_models["EZ"], cont_data, n_samples=400, seed=13)
    base = diagnostics(d)
    assert base.rhat_ok
    tight = diagnostics(d, rhat_threshold=base.max_rhat() - 1e-6)
    assert not tight.rhat_ok


def test_diagnostics_needs_two_chains(cont_models, cont_data):
    d = _fake_draws(cont_models["EZ"], cont_data, n_chains=1, n_samples=50)
    with pytest.raises(ValueError):
        diagnostics(d)


# ------------------------------------------------------- identified functions

def test_identified_functions_ez_matches_aligned_structural(cont_models, cont_data):
    d = _fake_draws(cont_models["EZ"], cont_data, n_samples=30, seed=14)
    names, tensor = identified_functions(d)
    assert names == d.structural_names()
    expected = sign_align(d).structural_tensor()
    assert np.array_equal(tensor, expected)


def test_identified_functions_az_uses_structural_names(cont_models, cont_data):
    d = _fake_draws(cont_models["AZ"], cont_data, n_samples=20, seed=15)
    names, tensor = identified_functions(d)
    assert names == d.structural_names()
    assert any(n.startswith("Omega[") for n in names)
    assert tensor.shape == (2, 20, len(names))


def test_identified_functions_efa_rotation_invariant(cont_models, cont_data):
    d = _fake_draws(cont_models["EFA"], cont_data, n_samples=20, seed=16)
    names, tensor = identified_functions(d)
    assert all(not n.startswith("Lambda[") for n in names)
    assert all(not n.startswith("Phi[") for n in names)
    assert "LL[2,1]" in names
    # p = 6: alpha (6) + lower triangle of Lambda Lambda' (21) + psi2 (6)
    assert len(names) == 6 + 21 + 6
    assert tensor.shape == (2, 20, len(names))
    # diagonal entries of Lambda Lambda' are sums of squares
    assert (tensor[:, :, names.index("LL[1,1]")] >= 0).all()

    dc = _fake_draws(cont_models["EFA_C"], cont_data, n_samples=20, seed=16)
    names_c, _ = identified_functions(dc)
    assert any(n.startswith("Omega[") for n in names_c)


def test_identified_functions_efa_invariant_to_sign_flips(cont_models, cont_data):
    # flipping a factor column changes raw loadings but not Lambda Lambda'
    d = _fake_draws(cont_models["EFA"], cont_data, n_samples=10, seed=18)
    packer = d.posterior.packer
    names, base = identified_functions(d)
    flipped_vals = d.values.copy()
    sl = packer.sl_lambda
    col0 = np.arange(sl.start, sl.stop)[np.asarray(packer.lam_cols) == 0]
    flipped_vals[:, :, col0] *= -1.0
    d2 = _fake_draws(cont_models["EFA"], cont_data, values=flipped_vals)
    _, flipped = identified_functions(d2)
    np.testing.assert_array_equal(flipped, base)
