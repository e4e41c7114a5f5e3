"""Inference factor graphs: full-chain construction, Bayes-Ball pruning and block assignment."""

from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass, field, replace

from .bayesball import IndependencySet, independency_list
from .graph import BayesianGraph, GraphCatalog, NodeRole, X, Y, sort_nodes


class Strategy(str, enum.Enum):
    ZFirst = "z"
    SFirst = "s"
    YFirst = "y"


class BlockRole(str, enum.Enum):
    Encoder = "encoder"
    Classifier = "classifier"
    NuisanceEstimator = "nuisance"
    Decoder = "decoder"
    Adversary = "adversary"


class SemiSupervision(str, enum.Enum):
    SEnd = "s_end"
    SMid = "s_mid"
    SAbsent = "s_absent"


_ROLE_FOR_KIND = {"Z": BlockRole.Encoder, "S": BlockRole.NuisanceEstimator, "Y": BlockRole.Classifier, "X": BlockRole.Decoder}


@dataclass(frozen=True)
class Factor:
    """One network block ``p(output | inputs)``; inputs are kept in canonical node order."""

    output: NodeRole
    inputs: tuple[NodeRole, ...]
    block_role: BlockRole
    stochastic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inputs", sort_nodes(self.inputs))
        if self.output in self.inputs:
            raise ValueError(f"factor output {self.output} among its inputs")
        expected = {
            BlockRole.Decoder: "X", BlockRole.Classifier: "Y",
            BlockRole.NuisanceEstimator: "S", BlockRole.Adversary: "S", BlockRole.Encoder: "Z",
        }[self.block_role]
        if self.output.kind != expected:
            raise ValueError(f"{self.block_role.value} factor cannot output {self.output}")

    @functools.cached_property
    def key(self) -> str:
        """Stable identifier, e.g. ``encoder:Z1|X`` or ``adversary:S1|Z2``."""
        return f"{self.block_role.value}:{self.output.name}|{','.join(n.name for n in self.inputs)}"

    def render(self, graph: BayesianGraph | None = None) -> str:
        lab = graph.label if graph is not None else str
        return f"p({lab(self.output).lower()}|{','.join(lab(n).lower() for n in self.inputs)})"


@dataclass(frozen=True)
class ModelSpec:
    generative: BayesianGraph
    strategy: Strategy
    inference_order: tuple[NodeRole, ...]
    factors: tuple[Factor, ...]
    adversary_targets: tuple[tuple[NodeRole, NodeRole], ...]
    variational: bool
    name: str

    @property
    def run_id(self) -> str:
        return self.name + ("-var" if self.variational else "")

    @property
    def inference_factors(self) -> tuple[Factor, ...]:
        return tuple(f for f in self.factors if f.block_role not in (BlockRole.Decoder, BlockRole.Adversary))

    @property
    def decoder(self) -> Factor | None:
        return next((f for f in self.factors if f.block_role is BlockRole.Decoder), None)

    @property
    def adversaries(self) -> tuple[Factor, ...]:
        return tuple(f for f in self.factors if f.block_role is BlockRole.Adversary)

    @property
    def encoders(self) -> tuple[Factor, ...]:
        return tuple(f for f in self.factors if f.block_role is BlockRole.Encoder)

    def factor_for(self, node: NodeRole) -> Factor | None:
        return next((f for f in self.inference_factors if f.output == node), None)

    @property
    def reconstruction_free(self) -> bool:
        return self.decoder is None

    def factor_table(self) -> dict[str, list[str]]:
        """Output name -> input names for the inference factors (golden-test format)."""
        return {f.output.name: [n.name for n in f.inputs] for f in self.inference_factors}

    def describe(self) -> str:
        parts = [f.render(self.generative) for f in self.inference_factors]
        dec = self.decoder
        text = " ".join(parts)
        if dec is not None:
            text += "  decoder " + dec.render(self.generative)
        for adv in self.adversaries:
            text += "  adversary " + adv.render(self.generative)
        return text


def inference_order(nodes, strategy: Strategy) -> list[NodeRole]:
    nodes = sort_nodes(nodes)
    latents = [n for n in nodes if n.kind == "Z"]
    nuisances = [n for n in nodes if n.kind == "S"]
    if strategy is Strategy.ZFirst:
        middle = latents + nuisances + [Y]
    elif strategy is Strategy.SFirst:
        middle = nuisances + latents + [Y]
    else:
        middle = [Y] + nuisances + latents
    return [X] + middle


def full_chain_inference(nodes, strategy: Strategy) -> list[Factor]:
    """Each node in the inference order conditioned on every node before it."""
    order = inference_order(nodes, Strategy(strategy))
    return [
        Factor(node, tuple(order[:i]), _ROLE_FOR_KIND[node.kind])
        for i, node in enumerate(order) if i > 0
    ]


def prune_factor_graph(factors: list[Factor], independencies) -> list[Factor]:
    """Drop conditioning links justified by the independency list, then drop detached priors.

    For ``p(u | ..., v, ...)`` the input ``v`` goes when ``u ⊥ v | remaining inputs`` is listed.
    Inputs are tried in node order and the sweep repeats until nothing changes.
    """
    ind = independencies if isinstance(independencies, IndependencySet) else IndependencySet(independencies)
    pruned = []
    for f in factors:
        inputs = list(f.inputs)
        changed = True
        while changed:
            changed = False
            for v in list(inputs):
                rest = [n for n in inputs if n != v]
                if ind.holds({f.output}, {v}, set(rest)):
                    inputs = rest
                    changed = True
        pruned.append(replace(f, inputs=tuple(inputs)))
    changed = True
    while changed:
        changed = False
        used = {n for f in pruned for n in f.inputs}
        for f in pruned:
            if not f.inputs and f.output.kind != "Y" and f.output not in used:
                pruned.remove(f)
                changed = True
                break
    return pruned


def adversary_targets(generative: BayesianGraph, latents, independencies) -> list[tuple[NodeRole, NodeRole]]:
    """(Z_k, S_i) pairs where Z_k is independent of the whole nuisance set, marginally or
    given some subset of the other latents."""
    ind = independencies if isinstance(independencies, IndependencySet) else IndependencySet(independencies)
    nuisances = set(generative.nuisances)
    if not nuisances:
        return []
    out = []
    for z in sort_nodes(latents):
        others = [l for l in generative.latents if l != z]
        ok = any(
            ind.holds({z}, nuisances, set(cond))
            for size in range(len(others) + 1)
            for cond in itertools.combinations(others, size)
        )
        if ok:
            out.extend((z, s) for s in sort_nodes(nuisances))
    return out


def assemble_model_spec(generative: BayesianGraph, strategy: Strategy, variational: bool = False,
                        name: str | None = None, independencies=None) -> ModelSpec:
    """Pruned inference factors + decoder over X's generative parents + adversary heads."""
    strategy = Strategy(strategy)
    if independencies is None:
        independencies = independency_list(generative)
    ind = IndependencySet(independencies)
    factors = prune_factor_graph(full_chain_inference(generative.nodes, strategy), ind)
    factors = [replace(f, stochastic=bool(variational)) if f.block_role is BlockRole.Encoder else f for f in factors]
    present = {f.output for f in factors}
    x_parents = generative.parents(X)
    # a decoder fed only by the task label reconstructs nothing beyond a class template
    if any(p.kind != "Y" for p in x_parents):
        factors.append(Factor(X, tuple(x_parents), BlockRole.Decoder))
    targets = adversary_targets(generative, [n for n in present if n.kind == "Z"], ind)
    factors.extend(Factor(s, (z,), BlockRole.Adversary) for z, s in targets)
    has_latent = any(f.block_role is BlockRole.Encoder for f in factors)
    return ModelSpec(
        generative=generative,
        strategy=strategy,
        inference_order=tuple(inference_order(generative.nodes, strategy)),
        factors=tuple(factors),
        adversary_targets=tuple(targets),
        variational=bool(variational) and has_latent,
        name=name or f"{generative.name or 'G'}{strategy.value}",
    )


def semi_supervision_class(spec: ModelSpec) -> SemiSupervision:
    """Where the nuisance sits in the inference chain.

    The decoder is not counted as a consumer: it is always fed inferred values.
    """
    if not any(f.block_role is BlockRole.NuisanceEstimator for f in spec.factors):
        return SemiSupervision.SAbsent
    if any(n.kind == "S" for f in spec.inference_factors for n in f.inputs):
        return SemiSupervision.SMid
    return SemiSupervision.SEnd


def _structure(spec: ModelSpec) -> tuple:
    return tuple(sorted(f.key for f in spec.factors))


def expand_graph(graph: BayesianGraph) -> list[ModelSpec]:
    """All distinct (strategy, variational) specs for one generative graph.

    Z-first and S-first specs that prune to the same structure collapse into one.
    The Y-first strategy is only tried when no latent encoder survives pruning.
    """
    ind = independency_list(graph)
    by_strategy = [assemble_model_spec(graph, s, False, independencies=ind) for s in (Strategy.ZFirst, Strategy.SFirst)]
    if not any(spec.encoders for spec in by_strategy):
        by_strategy.append(assemble_model_spec(graph, Strategy.YFirst, False, independencies=ind))
    distinct: list[ModelSpec] = []
    for spec in by_strategy:
        if all(_structure(spec) != _structure(d) for d in distinct):
            distinct.append(spec)
    letter = graph.name or "G"
    named = []
    for spec in distinct:
        if len(distinct) == 1:
            name = letter
        elif spec.strategy is Strategy.ZFirst and not spec.encoders:
            # no latent left: the Z-first chain is the S-first one
            name = letter + Strategy.SFirst.value
        else:
            name = letter + spec.strategy.value
        named.append(replace(spec, name=name))
    out = []
    for spec in named:
        out.append(spec)
        if spec.encoders:
            out.append(assemble_model_spec(graph, spec.strategy, True, name=spec.name, independencies=ind))
    return out


def expand_catalog(catalog: GraphCatalog) -> list[ModelSpec]:
    """Base learners for every catalog graph, in catalog order."""
    return [spec for g in catalog for spec in expand_graph(g)]


def find_spec(specs, run_id: str) -> ModelSpec:
    for spec in specs:
        if spec.run_id == run_id:
            return spec
    raise KeyError(run_id)
