"""Small numpy neural substrate: dense blocks, manual backprop, Adam and loss primitives."""

from ._kernels import BACKEND
from .checkpoint import load_checkpoint, save_checkpoint
from .functional import (
    GaussianLatent,
    cross_entropy,
    gumbel_softmax,
    kl_standard_normal,
    mse,
    one_hot,
    reconstruction_db,
    reparameterize,
    softmax,
    tau_at,
)
from .layers import DenseBlock, ShapeError
from .optim import Adam, AdamState, NonFiniteGradient, adam_step

__all__ = [
    "BACKEND", "Adam", "AdamState", "DenseBlock", "GaussianLatent", "NonFiniteGradient", "ShapeError",
    "adam_step", "cross_entropy", "gumbel_softmax", "kl_standard_normal", "load_checkpoint", "mse",
    "one_hot", "reconstruction_db", "reparameterize", "save_checkpoint", "softmax", "tau_at",
]
