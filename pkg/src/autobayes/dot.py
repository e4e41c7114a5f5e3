"""Graphviz DOT text for generative graphs and inference block diagrams."""

from __future__ import annotations

from .graph import BayesianGraph
from .inference import BlockRole, ModelSpec

_ROLE_LETTER = {
    BlockRole.Encoder: "E",
    BlockRole.Classifier: "C",
    BlockRole.NuisanceEstimator: "N",
    BlockRole.Decoder: "D",
    BlockRole.Adversary: "A",
}


def _q(text: str) -> str:
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def graph_to_dot(graph: BayesianGraph, name: str | None = None) -> str:
    lines = [f"digraph {_q(name or graph.name or 'G')} {{", "  node [shape=circle];"]
    for n in graph.nodes:
        style = ", style=filled, fillcolor=lightgrey" if n.kind == "X" else ""
        lines.append(f"  {_q(n.name)} [label={_q(graph.label(n))}{style}];")
    for a, b in graph.edge_list():
        lines.append(f"  {_q(a.name)} -> {_q(b.name)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def spec_to_dot(spec: ModelSpec) -> str:
    """Variables as circles, one box per block; adversary links dashed red."""
    g = spec.generative
    lines = [f"digraph {_q(spec.run_id)} {{", "  rankdir=LR;", "  node [shape=circle];"]
    for n in g.nodes:
        lines.append(f"  {_q(n.name)} [label={_q(g.label(n))}];")
    for i, f in enumerate(spec.factors):
        fid = f"f{i}"
        adv = f.block_role is BlockRole.Adversary
        color = ", color=red, fontcolor=red" if adv else ""
        lines.append(f"  {fid} [shape=box, label={_q(_ROLE_LETTER[f.block_role] + ': ' + f.render(g))}{color}];")
        edge_style = " [style=dashed, color=red]" if adv else ""
        for n in f.inputs:
            lines.append(f"  {_q(n.name)} -> {fid}{edge_style};")
        lines.append(f"  {fid} -> {_q(f.output.name)}{edge_style};")
    lines.append("}")
    return "\n".join(lines) + "\n"
