"""Loss primitives, Gaussian reparameterization, KL and Gumbel-Softmax (values and gradients)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOGVAR_CLAMP = 10.0
PROB_FLOOR = 1e-12


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. softmax outputs back to the logits."""
    return probs * (grad_probs - (grad_probs * probs).sum(axis=-1, keepdims=True))


def one_hot(labels: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((len(labels), n))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def cross_entropy(probs: np.ndarray, labels) -> float:
    """Mean negative log-likelihood in nats; probabilities floored at 1e-12."""
    probs = np.atleast_2d(probs)
    labels = np.atleast_1d(np.asarray(labels))
    if len(labels) == 0:
        return 0.0
    p = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(p, PROB_FLOOR))))


def cross_entropy_logits_grad(probs: np.ndarray, labels: np.ndarray, denom: int) -> np.ndarray:
    """Gradient of sum-of-CE / denom w.r.t. the logits that produced ``probs``."""
    g = probs.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    return g / max(denom, 1)


def mse(recon: np.ndarray, x: np.ndarray) -> float:
    return float(np.mean((recon - x) ** 2))


def reconstruction_db(mse_value: float) -> float:
    return float(10.0 * np.log10(mse_value))


@dataclass
class GaussianLatent:
    mean: np.ndarray
    log_variance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_variance = np.asarray(self.log_variance, dtype=np.float64)
        if self.mean.shape != self.log_variance.shape:
            raise ValueError("mean and log_variance shapes differ")

    @property
    def clamped_log_variance(self) -> np.ndarray:
        return np.clip(self.log_variance, -LOGVAR_CLAMP, LOGVAR_CLAMP)


def reparameterize(latent: GaussianLatent, rng: np.random.Generator | None = None, train: bool = True):
    """Returns ``(sample, eps)``; in eval mode the sample is the mean and ``eps`` is zero."""
    if not train:
        return latent.mean.copy(), np.zeros_like(latent.mean)
    eps = rng.standard_normal(latent.mean.shape)
    return latent.mean + np.exp(0.5 * latent.clamped_log_variance) * eps, eps


def reparameterize_backward(latent: GaussianLatent, eps: np.ndarray, grad_sample: np.ndarray):
    """Gradients of the sample w.r.t. (mean, raw log-variance); zero outside the clamp."""
    lv = latent.clamped_log_variance
    inside = np.abs(latent.log_variance) <= LOGVAR_CLAMP
    return grad_sample.copy(), grad_sample * eps * 0.5 * np.exp(0.5 * lv) * inside


def kl_standard_normal(latent: GaussianLatent) -> float:
    """KL(N(mean, exp(logvar)) || N(0, I)), summed over dimensions, averaged over rows."""
    mu = np.atleast_2d(latent.mean)
    lv = np.atleast_2d(latent.clamped_log_variance)
    return float(0.5 * np.sum(mu ** 2 + np.exp(lv) - lv - 1.0) / mu.shape[0])


def kl_standard_normal_grad(latent: GaussianLatent):
    mu = np.atleast_2d(latent.mean)
    lv = np.atleast_2d(latent.clamped_log_variance)
    inside = np.abs(np.atleast_2d(latent.log_variance)) <= LOGVAR_CLAMP
    n = mu.shape[0]
    return mu / n, 0.5 * (np.exp(lv) - 1.0) / n * inside


def sample_gumbel(shape, rng: np.random.Generator) -> np.ndarray:
    """Gumbel(0, 1) noise as ``-log(e)`` with ``e ~ Exp(1)``."""
    return -np.log(rng.standard_exponential(shape))


def gumbel_softmax(logits: np.ndarray, tau: float, rng: np.random.Generator | None = None, gumbel=None):
    """Relaxed one-hot sample ``softmax((logits + g) / tau)``; returns ``(sample, g)``."""
    if tau <= 0:
        raise ValueError("temperature must be positive")
    logits = np.asarray(logits, dtype=np.float64)
    g = sample_gumbel(logits.shape, rng) if gumbel is None else np.asarray(gumbel, dtype=np.float64)
    return softmax((logits + g) / tau), g


def gumbel_softmax_backward(sample: np.ndarray, grad_sample: np.ndarray, tau: float) -> np.ndarray:
    return softmax_backward(sample, grad_sample) / tau


def tau_at(step: int, schedule) -> float:
    """Exponentially decayed temperature ``max(floor, initial * exp(-rate * step))``."""
    initial, rate, floor = schedule
    return float(max(floor, initial * np.exp(-rate * step)))
