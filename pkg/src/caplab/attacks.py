"""White-box evaluation attacks (FGSM, PGD) and robust accuracy.

Both attacks maximize the cross-entropy of the true class inside the
l-infinity budget box, optionally intersected with an input domain box.
They accept a single sample (d,) with an integer label or a batch (n, d)
with a label array; rows are attacked independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .errors import NumericsError, ShapeError
from .nn import MlpModel, forward, grad_input, softmax
from .polytope import PerturbationBudget, project

ATTACK_KINDS = ("fgsm", "pgd")


@dataclass(frozen=True)
class AttackConfig:
    kind: str
    epsilon: float
    step_size: float = 0.0  # pgd only
    steps: int = 1  # pgd only
    random_start: bool = False
    input_clip: Optional[tuple[float, float]] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.kind == "pgd":
            if self.steps < 1:
                raise ValueError("pgd needs steps >= 1")
            if self.step_size <= 0:
                raise ValueError("pgd needs step_size > 0")

    def budget(self) -> PerturbationBudget:
        return PerturbationBudget(epsilon=self.epsilon, input_clip=self.input_clip)


def _as_batch(x: np.ndarray, y) -> tuple[np.ndarray, np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x.reshape(1, -1)
    labels = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if labels.shape != (x.shape[0],):
        raise ShapeError(f"labels shape {labels.shape} does not match batch of {x.shape[0]}")
    return x, labels, squeeze


def _ce_input_grad(model: MlpModel, x: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Rowwise gradient of CE(softmax(f(x)), y) w.r.t. x."""
    logits, trace = forward(model, x)
    probs = softmax(logits)
    cot = probs.copy()
    cot[np.arange(x.shape[0]), labels] -= 1.0
    g = grad_input(model, trace, cot)
    if not np.isfinite(g).all():
        raise NumericsError("non-finite attack gradient")
    return g


def fgsm(model: MlpModel, x: np.ndarray, y, cfg: AttackConfig) -> np.ndarray:
    """Single signed-gradient step: x' = clamp(x + eps * sign(grad)).

    sign(0) is 0, so a sample with an exactly-zero gradient is returned
    unchanged. clamp applies the input_clip domain when configured.
    """
    if cfg.kind != "fgsm":
        raise ValueError(f"fgsm called with kind {cfg.kind!r}")
    xb, labels, squeeze = _as_batch(x, y)
    budget = cfg.budget()
    g = _ce_input_grad(model, xb, labels)
    delta = project(cfg.epsilon * np.sign(g), budget, xb)
    adv = xb + delta
    return adv[0] if squeeze else adv


def pgd(model: MlpModel, x: np.ndarray, y, cfg: AttackConfig) -> np.ndarray:
    """Iterated signed-gradient ascent with projection back to the budget box.

    Optional uniform random start in [-eps, eps]^d (seeded by cfg.seed);
    every iteration ends with the exact box projection around the clean x,
    so the returned sample is always feasible.
    """
    if cfg.kind != "pgd":
        raise ValueError(f"pgd called with kind {cfg.kind!r}")
    xb, labels, squeeze = _as_batch(x, y)
    budget = cfg.budget()
    if cfg.random_start:
        rng = np.random.Generator(np.random.Philox(int(cfg.seed)))
        delta = rng.uniform(-cfg.epsilon, cfg.epsilon, size=xb.shape)
        np.clip(delta, -cfg.epsilon, cfg.epsilon, out=delta)
    else:
        delta = np.zeros_like(xb)
    for _ in range(cfg.steps):
        g = _ce_input_grad(model, xb + delta, labels)
        delta = project(delta + cfg.step_size * np.sign(g), budget, xb)
    adv = xb + delta
    return adv[0] if squeeze else adv


def attack(model: MlpModel, x: np.ndarray, y, cfg: AttackConfig) -> np.ndarray:
    return fgsm(model, x, y, cfg) if cfg.kind == "fgsm" else pgd(model, x, y, cfg)


def robust_accuracy(model: MlpModel, dataset: Dataset, cfg: AttackConfig) -> float:
    """Fraction of samples still classified correctly after the attack.

    Predictions take the argmax of the logits with ties broken toward the
    lowest class index. With epsilon = 0 both attacks return the clean
    samples, so the result is exactly the clean accuracy.
    """
    adv = attack(model, dataset.features, dataset.labels, cfg)
    logits, _ = forward(model, adv)
    pred = np.argmax(logits, axis=1)
    return float(np.mean(pred == dataset.labels))


def clean_accuracy(model: MlpModel, dataset: Dataset) -> float:
    logits, _ = forward(model, dataset.features)
    return float(np.mean(np.argmax(logits, axis=1) == dataset.labels))
