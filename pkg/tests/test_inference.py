import pytest

from autobayes.bayesball import independency_list, is_d_separated
from autobayes.graph import S, X, Y, Z, NodeRole
from autobayes.inference import (BlockRole, SemiSupervision, Strategy, assemble_model_spec, expand_catalog,
                                 inference_order, semi_supervision_class)

# name -> (inference factors, decoder, adversaries); non-variational variants
GOLDEN = {
    "A": (["p(y|x)"], None, []),
    "B": (["p(z|x)", "p(y|z)"], "p(x|z)", ["p(s|z)"]),
    "Cs": (["p(s|x)", "p(y|s,x)"], "p(x|y,s)", []),
    "Cy": (["p(y|x)", "p(s|y,x)"], "p(x|y,s)", []),
    "Dz": (["p(z|x)", "p(s|z)", "p(y|s,z)"], "p(x|z)", []),
    "Ds": (["p(s|x)", "p(z|s,x)", "p(y|s,z)"], "p(x|z)", []),
    "Ez": (["p(z|x)", "p(s|z,x)", "p(y|z)"], "p(x|s,z)", ["p(s|z)"]),
    "Es": (["p(s|x)", "p(z|s,x)", "p(y|z)"], "p(x|s,z)", ["p(s|z)"]),
    "Fz": (["p(z|x)", "p(s|z)", "p(y|z,x)"], "p(x|y,z)", []),
    "Fs": (["p(s|x)", "p(z|s,x)", "p(y|z,x)"], "p(x|y,z)", []),
    "Gz": (["p(z|x)", "p(s|z,x)", "p(y|s,z)"], "p(x|s,z)", []),
    "Gs": (["p(s|x)", "p(z|s,x)", "p(y|s,z)"], "p(x|s,z)", []),
    "Hz": (["p(z|x)", "p(s|z,x)", "p(y|s,z,x)"], "p(x|y,z)", []),
    "Hs": (["p(s|x)", "p(z|s,x)", "p(y|s,z,x)"], "p(x|y,z)", []),
    "Iz": (["p(z|x)", "p(s|z,x)", "p(y|s,z,x)"], "p(x|y,s,z)", []),
    "Is": (["p(s|x)", "p(z|s,x)", "p(y|s,z,x)"], "p(x|y,s,z)", []),
    "Jz": (["p(z1|x)", "p(z2|z1,x)", "p(s|z1)", "p(y|z2)"], "p(x|z1,z2)", ["p(s|z2)"]),
    "Js": (["p(s|x)", "p(z1|s,x)", "p(z2|z1,x)", "p(y|z2)"], "p(x|z1,z2)", ["p(s|z2)"]),
    "Kz": (["p(z1|x)", "p(z2|z1,x)", "p(s|z1)", "p(y|z1,z2)"], "p(x|z1,z2)", ["p(s|z2)"]),
    "Ks": (["p(s|x)", "p(z1|s,x)", "p(z2|z1,x)", "p(y|z1,z2)"], "p(x|z1,z2)", ["p(s|z2)"]),
}


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_factorizations(specs, name):
    spec = specs[name]
    g = spec.generative
    factors, decoder, adversaries = GOLDEN[name]
    assert [f.render(g) for f in spec.inference_factors] == factors
    assert (spec.decoder.render(g) if spec.decoder else None) == decoder
    assert [a.render(g) for a in spec.adversaries] == adversaries


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_variational_twin_shares_structure(specs, name):
    twin = specs.get(name + "-var")
    if specs[name].encoders:
        assert twin is not None and twin.variational
        assert [f.key for f in twin.factors] == [f.key for f in specs[name].factors]
        assert all(f.stochastic for f in twin.encoders)
    else:
        assert twin is None


def test_catalog_expands_to_37(catalog):
    specs = expand_catalog(catalog)
    assert len(specs) == 37
    assert len({s.run_id for s in specs}) == 37
    assert sum(s.variational for s in specs) == 17


def test_adversary_set_matches_independence_rule(specs):
    with_adv = sorted(n for n, s in specs.items() if s.adversaries and not s.variational)
    assert with_adv == sorted(["B", "Ez", "Es", "Jz", "Js", "Kz", "Ks"])
    assert all(a.inputs == (NodeRole("Z", 2),) for n in ("Jz", "Js", "Kz", "Ks") for a in specs[n].adversaries)
    # F and the others have no latent independent of S
    assert not specs["Fz"].adversaries and not specs["Fs"].adversaries


def test_block_roles(specs):
    roles = {f.block_role for f in specs["Ez"].factors}
    assert roles == set(BlockRole)
    assert specs["A"].factors[0].block_role is BlockRole.Classifier


def test_inference_orders():
    nodes = [Y, S, Z, X]
    assert inference_order(nodes, Strategy.ZFirst) == [X, Z, S, Y]
    assert inference_order(nodes, Strategy.SFirst) == [X, S, Z, Y]
    assert inference_order(nodes, Strategy.YFirst) == [X, Y, S, Z]


def test_semi_supervision_classes(specs):
    classes = {n: semi_supervision_class(s) for n, s in specs.items() if not s.variational}
    assert {n for n, c in classes.items() if c is SemiSupervision.SEnd} == {"Cy", "Ez", "Fz", "Jz", "Kz"}
    assert {n for n, c in classes.items() if c is SemiSupervision.SAbsent} == {"A", "B"}


def test_pruned_inputs_are_justified(catalog, specs):
    """Every dropped input of the full chain is covered by a d-separation statement."""
    for spec in specs.values():
        g = spec.generative
        ind = {(frozenset(s.left), frozenset(s.right), frozenset(s.given)) for s in independency_list(g)}
        order = spec.inference_order
        for f in spec.inference_factors:
            kept = set(f.inputs)
            earlier = order[:order.index(f.output)]
            for dropped in set(earlier) - kept:
                assert is_d_separated(g, f.output, dropped, kept)


def test_assemble_accepts_precomputed_independencies(catalog):
    g = catalog["E"]
    a = assemble_model_spec(g, Strategy.ZFirst, independencies=independency_list(g))
    b = assemble_model_spec(g, Strategy.ZFirst)
    assert a.factors == b.factors
