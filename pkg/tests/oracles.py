"""Brute-force reference computations shared by unit and acceptance tests."""

import itertools

import numpy as np

from autobayes.bayesball import is_d_separated
from autobayes.discrete import (adversary_expected_loglik, conditional_mutual_information, discrete_elbo, entropy,
                                exact_task_posterior, factorized_task_posterior, joint_table, mutual_information,
                                random_cpts)

from conftest import random_dag


def cmi_oracle_disagreements(n_graphs: int, seed: int = 0, max_nodes: int = 5):
    """(unsound, incomplete, checked) counts of d-separation vs CMI < 1e-10."""
    rng = np.random.default_rng(seed)
    unsound = incomplete = checked = 0
    for _ in range(n_graphs):
        g = random_dag(rng, int(rng.integers(2, max_nodes + 1)), float(rng.uniform(0.3, 0.7)))
        cards = {v: int(rng.integers(2, 4)) for v in g.nodes}
        joint = joint_table(g, random_cpts(g, cards, rng, concentration=0.7), cards)
        nodes = list(g.nodes)
        idx = {v: i for i, v in enumerate(nodes)}
        for a, b in itertools.combinations(nodes, 2):
            rest = [v for v in nodes if v not in (a, b)]
            for r in range(len(rest) + 1):
                for given in itertools.combinations(rest, r):
                    sep = is_d_separated(g, a, b, set(given))
                    cmi = conditional_mutual_information(joint, [idx[a]], [idx[b]], [idx[v] for v in given])
                    indep = cmi < 1e-10
                    checked += 1
                    unsound += sep and not indep
                    incomplete += indep and not sep
    return unsound, incomplete, checked


def discrete_instance(graph, rng, card=3, x_card=4):
    cards = {n: (x_card if n.kind == "X" else card) for n in graph.nodes}
    joint = joint_table(graph, random_cpts(graph, cards, rng), cards)
    return joint, list(graph.nodes)


def posterior_error(spec, rng, joint_graph=None) -> float:
    """Max |p(y|x) via pruned factors - p(y|x) from the joint| on a random discrete instance."""
    joint, nodes = discrete_instance(joint_graph or spec.generative, rng)
    return float(np.max(np.abs(factorized_task_posterior(spec, joint, nodes) - exact_task_posterior(joint, nodes))))


def elbo_gap_errors(n_settings: int, seed: int = 0):
    """For random discrete latent models: (max bound violation, max |gap - KL(q||posterior)|)."""
    rng = np.random.default_rng(seed)
    violation, gap_err = -np.inf, 0.0
    for _ in range(n_settings):
        k, m = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        prior = rng.dirichlet(np.ones(k))
        lik = rng.dirichlet(np.ones(m), size=k)
        obs = int(rng.integers(m))
        q = rng.dirichlet(np.ones(k))
        elbo, _, _ = discrete_elbo(lik, prior, q, obs)
        evidence = np.log(np.sum(prior * lik[:, obs]))
        post = prior * lik[:, obs] / np.exp(evidence)
        kl = float(np.sum(q * (np.log(q) - np.log(post))))
        violation = max(violation, elbo - evidence)
        gap_err = max(gap_err, abs((evidence - elbo) - kl))
    return violation, gap_err


def adversary_mi_error(n_tables: int, seed: int = 0) -> float:
    """max |E[log p(s|z)] - (I(S;Z) - H(S))| over random joints p(s, z)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_tables):
        ns, nz = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(ns * nz)).reshape(ns, nz)
        q = p / p.sum(axis=0, keepdims=True)
        lhs = adversary_expected_loglik(p, q)
        rhs = mutual_information(p) - entropy(p.sum(axis=1))
        worst = max(worst, abs(lhs - rhs))
    return worst
