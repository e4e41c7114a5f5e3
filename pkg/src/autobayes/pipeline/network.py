"""A ModelSpec realized as dense blocks with a hand-written forward/backward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import NodeRole, X, Y
from ..inference import BlockRole, Factor, ModelSpec
from ..nn import functional as F
from ..nn.layers import DenseBlock
from .config import HyperParams


@dataclass
class LossBreakdown:
    task: float = 0.0
    nuisance: float = 0.0
    reconstruction: float = 0.0
    kl: float = 0.0
    adversary: float = 0.0
    total: float = 0.0

    @staticmethod
    def compose(task, nuisance, reconstruction, kl, adversary, hyper: HyperParams) -> "LossBreakdown":
        total = (task + hyper.lambda_s * nuisance + hyper.lambda_x * reconstruction
                 + hyper.lambda_z * kl - hyper.lambda_a * adversary)
        return LossBreakdown(task, nuisance, reconstruction, kl, adversary, total)

    def as_dict(self) -> dict:
        return dict(task=self.task, nuisance=self.nuisance, reconstruction=self.reconstruction,
                    kl=self.kl, adversary=self.adversary, total=self.total)


@dataclass
class Batch:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    s_present: np.ndarray

    @classmethod
    def from_dataset(cls, data, idx=None) -> "Batch":
        if idx is None:
            return cls(data.features, data.task_labels, data.nuisance_labels, data.nuisance_present)
        return cls(data.features[idx], data.task_labels[idx], data.nuisance_labels[idx], data.nuisance_present[idx])


class FactorNetwork:
    """One DenseBlock per factor of a ModelSpec.

    Encoders, classifier and nuisance estimator run in inference order from X. When
    training, an inference factor that consumes S (or Y) gets the ground-truth one-hot
    label, or a Gumbel-Softmax sample of the nuisance head for rows whose S is masked.
    The decoder, and every consumer in eval mode, gets the inferred posteriors instead.
    """

    def __init__(self, spec: ModelSpec, n_features: int, n_classes: int, n_nuisance: int,
                 hyper: HyperParams, rng: np.random.Generator):
        if len(spec.generative.nuisances) > 1:
            raise NotImplementedError("networks support a single nuisance node")
        self.spec = spec
        self.hyper = hyper
        self.n_classes = n_classes
        self.n_nuisance = n_nuisance
        self.dims = {}
        for node in spec.generative.nodes:
            self.dims[node] = {"X": n_features, "Y": n_classes, "S": n_nuisance, "Z": hyper.latent_dim}[node.kind]
        self.blocks: dict[str, DenseBlock] = {}
        for f in spec.factors:
            self.blocks[f.key] = self._make_block(f, rng)
        self.order = list(spec.inference_factors)
        self.decoder = spec.decoder
        self.adversaries = list(spec.adversaries)
        # filled by forward()
        self._state = None

    def _make_block(self, f: Factor, rng) -> DenseBlock:
        h = self.hyper
        in_w = sum(self.dims[n] for n in f.inputs)
        if f.block_role is BlockRole.Encoder:
            out = h.latent_dim * (2 if f.stochastic else 1)
            widths = [in_w, h.encoder_hidden, out]
        elif f.block_role is BlockRole.Decoder:
            widths = [in_w, h.decoder_hidden, self.dims[X]]
        else:
            out = self.dims[f.output]
            widths = [in_w, 2 * in_w, out] if in_w > 0 else [0, out]
        return DenseBlock(widths, rng=rng, name=f.key)

    @property
    def main_blocks(self) -> list[DenseBlock]:
        return [b for k, b in self.blocks.items() if not k.startswith(BlockRole.Adversary.value)]

    @property
    def adversary_blocks(self) -> list[DenseBlock]:
        return [self.blocks[f.key] for f in self.adversaries]

    def parameter_count(self) -> int:
        return sum(b.parameter_count() for b in self.blocks.values())

    # ------------------------------------------------------------ forward

    def _feed(self, node: NodeRole, consumer: Factor, st: dict, batch: Batch, train: bool, rng, tau):
        """Value of ``node`` as seen by ``consumer``; records how to route its gradient."""
        if node.kind in ("X", "Z"):
            return st["values"][node]
        inferred = st["probs"].get(node)
        if consumer.block_role is BlockRole.Decoder or not train:
            if inferred is None:
                raise RuntimeError(f"{consumer.key} needs inferred {node} but nothing infers it")
            st["routes"][(consumer.key, node)] = "probs"
            return inferred
        if node.kind == "Y":
            st["routes"][(consumer.key, node)] = None
            return F.one_hot(batch.y, self.n_classes)
        value = np.zeros((len(batch.y), self.n_nuisance))
        present = batch.s_present
        value[present] = F.one_hot(batch.s[present], self.n_nuisance)
        masked = ~present
        if masked.any():
            logits = st["logits"].get(node)
            if logits is None:
                raise RuntimeError(f"{consumer.key} needs a nuisance estimate for masked rows")
            g_sample, _ = F.gumbel_softmax(logits[masked], tau, rng)
            value[masked] = g_sample
            st["gumbel"][(consumer.key, node)] = (masked, g_sample)
            st["routes"][(consumer.key, node)] = "gumbel"
        else:
            st["routes"][(consumer.key, node)] = None
        return value

    def forward(self, batch: Batch, train: bool, rng=None, tau: float = 1.0) -> LossBreakdown:
        """Run the inference blocks and the decoder; the adversary term is left at zero.

        Call ``adversary_forward`` afterwards to fill it in from the current latents.
        """
        h = self.hyper
        n = len(batch.y)
        st = {"values": {X: batch.x}, "probs": {}, "logits": {}, "routes": {}, "gumbel": {},
              "latent": {}, "inputs": {}, "batch": batch, "train": train, "tau": tau}
        kl_total = 0.0
        for f in self.order:
            parts = [self._feed(node, f, st, batch, train, rng, tau) for node in f.inputs]
            inp = np.concatenate(parts, axis=1) if parts else np.zeros((n, 0))
            st["inputs"][f.key] = [(node, p.shape[1]) for node, p in zip(f.inputs, parts)]
            out = self.blocks[f.key].forward(inp, train)
            if f.block_role is BlockRole.Encoder:
                if f.stochastic:
                    L = h.latent_dim
                    lat = F.GaussianLatent(out[:, :L], out[:, L:])
                    z, eps = F.reparameterize(lat, rng, train)
                    st["latent"][f.output] = (lat, eps)
                    kl_total += F.kl_standard_normal(lat)
                else:
                    z = out
                st["values"][f.output] = z
            else:
                st["logits"][f.output] = out
                st["probs"][f.output] = F.softmax(out)

        y_probs = st["probs"][Y]
        task = F.cross_entropy(y_probs, batch.y)
        present = batch.s_present
        s_node = next(iter(self.spec.generative.nuisances), None)
        nuisance = 0.0
        if s_node is not None and s_node in st["probs"] and present.any():
            nuisance = F.cross_entropy(st["probs"][s_node][present], batch.s[present])

        recon = 0.0
        if self.decoder is not None:
            f = self.decoder
            parts = [self._feed(node, f, st, batch, train, rng, tau) for node in f.inputs]
            st["inputs"][f.key] = [(node, p.shape[1]) for node, p in zip(f.inputs, parts)]
            xhat = self.blocks[f.key].forward(np.concatenate(parts, axis=1), train)
            st["xhat"] = xhat
            recon = F.mse(xhat, batch.x)

        st["kl"] = kl_total
        st["terms"] = (task, nuisance, recon, kl_total)
        self._state = st
        return LossBreakdown.compose(task, nuisance, recon, kl_total, 0.0, h)

    # ------------------------------------------------------------ backward

    def backward(self):
        """Backpropagate the composed loss of the last forward() into the main blocks.

        Adversary blocks are run backwards only to obtain the latent gradient; their
        parameter gradients are cleared afterwards.
        """
        st = self._state
        if st is None:
            raise RuntimeError("backward called before forward")
        h = self.hyper
        batch = st["batch"]
        n = len(batch.y)
        present = batch.s_present
        n_present = int(present.sum())
        g_values: dict = {}
        g_probs: dict = {}
        g_logits: dict = {}

        def add(store, key, g):
            store[key] = store[key] + g if key in store else g

        for f in self.adversaries:
            if ("adv", f.key) not in st["probs"]:
                continue
            p = st["probs"][("adv", f.key)]
            g = np.zeros_like(p)
            g[present] = F.cross_entropy_logits_grad(p[present], batch.s[present], n_present)
            block = self.blocks[f.key]
            gz = block.backward(-h.lambda_a * g)
            block.zero_grad()
            add(g_values, f.inputs[0], gz)

        if self.decoder is not None:
            f = self.decoder
            g = h.lambda_x * 2.0 * (st["xhat"] - batch.x) / st["xhat"].size
            self._route(f, self.blocks[f.key].backward(g), st, g_values, g_probs, g_logits, add)

        for f in reversed(self.order):
            block = self.blocks[f.key]
            if f.block_role is BlockRole.Encoder:
                gz = g_values.get(f.output, np.zeros((n, h.latent_dim)))
                if f.stochastic:
                    lat, eps = st["latent"][f.output]
                    gmu, glv = F.reparameterize_backward(lat, eps, gz)
                    kmu, klv = F.kl_standard_normal_grad(lat)
                    gout = np.concatenate([gmu + h.lambda_z * kmu, glv + h.lambda_z * klv], axis=1)
                else:
                    gout = gz
            else:
                probs = st["probs"][f.output]
                gout = np.zeros_like(probs)
                if f.block_role is BlockRole.Classifier:
                    gout += F.cross_entropy_logits_grad(probs, batch.y, n)
                elif n_present:
                    gout[present] += h.lambda_s * F.cross_entropy_logits_grad(
                        probs[present], batch.s[present], n_present)
                if f.output in g_probs:
                    gout += F.softmax_backward(probs, g_probs[f.output])
                if f.output in g_logits:
                    gout += g_logits[f.output]
            gin = block.backward(gout)
            self._route(f, gin, st, g_values, g_probs, g_logits, add)

    def _route(self, f: Factor, gin, st, g_values, g_probs, g_logits, add):
        col = 0
        for node, width in st["inputs"][f.key]:
            g = gin[:, col:col + width]
            col += width
            if node.kind == "X":
                continue
            if node.kind == "Z":
                add(g_values, node, g)
                continue
            route = st["routes"].get((f.key, node))
            if route == "probs":
                add(g_probs, node, g)
            elif route == "gumbel":
                masked, sample = st["gumbel"][(f.key, node)]
                gl = np.zeros((len(masked), self.n_nuisance))
                gl[masked] = F.gumbel_softmax_backward(sample, g[masked], st["tau"])
                add(g_logits, node, gl)

    # ------------------------------------------------------------ adversary

    def _latent_and_labels(self):
        st = self._state
        if st is None:
            raise RuntimeError("adversary used before forward")
        batch = st["batch"]
        return st, batch.s_present, batch.s

    def adversary_step_gradients(self) -> float:
        """Adversary CE on the (detached) latents of the last forward; grads land in adversary blocks only."""
        st, present, s = self._latent_and_labels()
        n_present = int(present.sum())
        if not n_present:
            return 0.0
        total = 0.0
        for f in self.adversaries:
            block = self.blocks[f.key]
            p = F.softmax(block.forward(st["values"][f.inputs[0]], st["train"]))
            total += F.cross_entropy(p[present], s[present])
            g = np.zeros_like(p)
            g[present] = F.cross_entropy_logits_grad(p[present], s[present], n_present)
            block.backward(g)
        return total

    def adversary_forward(self) -> LossBreakdown:
        """Adversary CE at the current adversary parameters; completes the loss of the last forward."""
        st, present, s = self._latent_and_labels()
        adv = 0.0
        if present.any():
            for f in self.adversaries:
                p = F.softmax(self.blocks[f.key].forward(st["values"][f.inputs[0]], st["train"]))
                st["probs"][("adv", f.key)] = p
                adv += F.cross_entropy(p[present], s[present])
        return LossBreakdown.compose(*st["terms"], adv, self.hyper)

    # ------------------------------------------------------------ evaluation

    def predict(self, batch: Batch) -> dict:
        """Eval-mode outputs: task/nuisance posteriors, reconstruction and latent means."""
        self.forward(batch, train=False)
        st = self._state
        s_node = next(iter(self.spec.generative.nuisances), None)
        return {
            "task": st["probs"][Y],
            "nuisance": st["probs"].get(s_node) if s_node is not None else None,
            "xhat": st.get("xhat"),
            "latents": {k: v for k, v in st["values"].items() if k.kind == "Z"},
        }

    # ------------------------------------------------------------ state

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for key, block in self.blocks.items():
            for name, arr in block.state().items():
                out[f"{key}/{name}"] = arr
        return out

    def load_state(self, state: dict[str, np.ndarray]):
        for key, block in self.blocks.items():
            prefix = key + "/"
            block.load_state({k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)})
