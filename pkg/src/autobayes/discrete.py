"""Exact computations on small fully discrete instantiations of a graph.

Every node (latents included) is categorical. The joint is an ndarray with one axis per
node in ``graph.nodes`` order. These routines back the posterior-equivalence, ELBO and
mutual-information checks; nothing here is used during network training.
"""

from __future__ import annotations

import numpy as np

from .inference import BlockRole, ModelSpec

TINY = 1e-300


def _sorted_parents(graph, node):
    return sorted(graph.parents(node), key=lambda p: list(graph.nodes).index(p))


def random_cpts(graph, cards: dict, rng: np.random.Generator, concentration: float = 1.0) -> dict:
    """One CPT per node, shaped (parent cards in graph order..., node card), Dirichlet rows."""
    cpts = {}
    for node in graph.nodes:
        shape = tuple(cards[p] for p in _sorted_parents(graph, node)) + (cards[node],)
        cpts[node] = rng.dirichlet(np.full(cards[node], concentration), size=shape[:-1]).reshape(shape)
    return cpts


def joint_table(graph, cpts: dict, cards: dict) -> np.ndarray:
    nodes = list(graph.nodes)
    joint = np.ones(tuple(cards[n] for n in nodes))
    for node in nodes:
        parents = _sorted_parents(graph, node)
        axes = [nodes.index(p) for p in parents] + [nodes.index(node)]
        shape = [1] * len(nodes)
        for ax, size in zip(axes, cpts[node].shape):
            shape[ax] = size
        order = np.argsort(axes)
        joint = joint * np.transpose(cpts[node], order).reshape(shape)
    return joint


def marginal(joint: np.ndarray, keep: list[int]) -> np.ndarray:
    """Marginal over the axes in ``keep``, broadcastable against ``joint``."""
    drop = tuple(i for i in range(joint.ndim) if i not in keep)
    return joint.sum(axis=drop, keepdims=True)


def conditional(joint: np.ndarray, out: list[int], given: list[int]) -> np.ndarray:
    """p(out | given) broadcastable against ``joint``; zero where p(given) = 0."""
    num = marginal(joint, list(out) + list(given))
    den = marginal(joint, list(given)) if given else np.sum(joint, keepdims=True)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def conditional_mutual_information(joint: np.ndarray, a: list[int], b: list[int], c: list[int]) -> float:
    """I(A; B | C) in nats from a joint table."""
    p_abc = marginal(joint, a + b + c)
    p_ac = marginal(joint, a + c)
    p_bc = marginal(joint, b + c)
    p_c = marginal(joint, c) if c else np.sum(joint, keepdims=True)
    p_abc_b, p_ac_b, p_bc_b, p_c_b = np.broadcast_arrays(p_abc, p_ac, p_bc, p_c)
    mask = p_abc_b > 0
    val = p_abc_b[mask] * (np.log(p_abc_b[mask]) + np.log(p_c_b[mask]) - np.log(p_ac_b[mask]) - np.log(p_bc_b[mask]))
    return float(np.sum(val))


def mutual_information(p_ab: np.ndarray) -> float:
    """I(A; B) for a 2-D joint table."""
    return conditional_mutual_information(p_ab, [0], [1], [])


def factorized_task_posterior(spec: ModelSpec, joint: np.ndarray, nodes: list) -> np.ndarray:
    """p(y | x) obtained by chaining the pruned inference factors, each read off the joint.

    Nodes the model spec prunes away are summed out of the joint first; the result has shape
    (card_x, card_y).
    """
    idx = {n: i for i, n in enumerate(nodes)}
    x_ax, y_ax = idx[spec.generative.nodes[-1]], idx[next(n for n in nodes if n.kind == "Y")]
    product = np.ones_like(joint)
    for f in spec.inference_factors:
        cond = conditional(joint, [idx[f.output]], [idx[n] for n in f.inputs])
        product = product * cond
    present = {idx[f.output] for f in spec.inference_factors} | {x_ax}
    # product is constant along dropped axes; keep a single slice of each
    slicer = tuple(slice(None) if i in present else slice(0, 1) for i in range(joint.ndim))
    product = product[slicer]
    keep = [x_ax, y_ax]
    drop = tuple(i for i in range(joint.ndim) if i not in keep)
    post = product.sum(axis=drop)
    return post if x_ax < y_ax else post.T


def exact_task_posterior(joint: np.ndarray, nodes: list) -> np.ndarray:
    """p(y | x) straight from the joint, shape (card_x, card_y)."""
    x_ax = next(i for i, n in enumerate(nodes) if n.kind == "X")
    y_ax = next(i for i, n in enumerate(nodes) if n.kind == "Y")
    drop = tuple(i for i in range(joint.ndim) if i not in (x_ax, y_ax))
    p_xy = joint.sum(axis=drop)
    if y_ax < x_ax:
        p_xy = p_xy.T
    return p_xy / p_xy.sum(axis=1, keepdims=True)


def discrete_elbo(p_obs_given_latent: np.ndarray, prior: np.ndarray, q: np.ndarray, obs: int):
    """Terms of the variational bound for one observation of a discrete latent model.

    ``p_obs_given_latent[k, o] = p(o | z=k)``, ``prior[k] = p(z=k)``, ``q[k] = q(z=k | o)``.
    Returns ``(elbo, expected_loglik, kl_to_prior)``.
    """
    lik = p_obs_given_latent[:, obs]
    mask = q > 0
    expected = float(np.sum(q[mask] * np.log(np.maximum(lik[mask], TINY))))
    kl = float(np.sum(q[mask] * (np.log(q[mask]) - np.log(prior[mask]))))
    return expected - kl, expected, kl


def adversary_expected_loglik(p_sz: np.ndarray, q_s_given_z: np.ndarray) -> float:
    """E_{p(s,z)}[log q(s|z)] with ``p_sz[s, z]`` and ``q_s_given_z[s, z]``."""
    mask = p_sz > 0
    return float(np.sum(p_sz[mask] * np.log(np.maximum(q_s_given_z[mask], TINY))))
