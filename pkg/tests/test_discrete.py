import numpy as np
import pytest

from autobayes.discrete import (conditional, conditional_mutual_information, discrete_elbo, entropy, joint_table,
                                marginal, mutual_information, random_cpts)
from autobayes.graph import Dag

from oracles import adversary_mi_error, elbo_gap_errors, posterior_error


def test_joint_normalizes_and_respects_cpts():
    rng = np.random.default_rng(0)
    g = Dag(("a", "b", "c"), frozenset({("a", "c"), ("b", "c")}))
    cards = {"a": 2, "b": 3, "c": 2}
    cpts = random_cpts(g, cards, rng)
    joint = joint_table(g, cpts, cards)
    assert joint.shape == (2, 3, 2)
    assert np.isclose(joint.sum(), 1.0)
    np.testing.assert_allclose(conditional(joint, [2], [0, 1]), cpts["c"], atol=1e-12)
    np.testing.assert_allclose(marginal(joint, [0]).ravel(), cpts["a"], atol=1e-12)


def test_cmi_of_independent_and_copy_variables():
    p = np.outer([0.3, 0.7], [0.2, 0.5, 0.3])
    assert abs(mutual_information(p)) < 1e-14
    copy = np.diag([0.25, 0.75])
    assert np.isclose(mutual_information(copy), entropy(np.array([0.25, 0.75])))
    # X <- C -> Y: dependent marginally, independent given C
    c = np.array([0.4, 0.6])
    px = np.array([[0.9, 0.1], [0.2, 0.8]])
    joint = np.einsum("c,cx,cy->cxy", c, px, px)
    assert conditional_mutual_information(joint, [1], [2], []) > 1e-3
    assert abs(conditional_mutual_information(joint, [1], [2], [0])) < 1e-14


@pytest.mark.parametrize("seed", range(3))
def test_posterior_equivalence_all_specs(specs, seed):
    rng = np.random.default_rng(seed)
    for name, spec in specs.items():
        assert posterior_error(spec, rng) < 1e-9, name


def test_posterior_equivalence_negative_control(catalog, specs):
    # a factorization pruned for Model E is wrong for data from the full-chain Model I
    err = posterior_error(specs["Ez"], np.random.default_rng(0), joint_graph=catalog["I"])
    assert err > 1e-3


def test_elbo_closed_form_example():
    lik = np.array([[0.9, 0.1], [0.2, 0.8]])
    prior = np.array([0.5, 0.5])
    q = np.array([0.5, 0.5])
    elbo, expected, kl = discrete_elbo(lik, prior, q, 0)
    assert kl == pytest.approx(0.0)
    assert expected == pytest.approx(0.5 * (np.log(0.9) + np.log(0.2)))
    assert elbo <= np.log(0.55)


def test_elbo_bound_and_gap():
    violation, gap_err = elbo_gap_errors(100, seed=3)
    assert violation <= 1e-12
    assert gap_err < 1e-8


def test_adversary_loglik_identity():
    assert adversary_mi_error(50, seed=5) < 1e-8
