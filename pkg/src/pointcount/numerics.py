"""Dense numerical primitives shared by the rest of the package.

Matrices are plain ``float64`` numpy arrays. Random streams are numpy
``Generator`` objects backed by PCG64, which is reproducible across
platforms for a given 64-bit seed. Independent named sub-streams are derived
with :class:`numpy.random.SeedSequence` so that, for example, the training
data of one repetition never shares draws with its test data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AdamState",
    "PCAResult",
    "adam_step",
    "glorot_uniform",
    "make_rng",
    "pca_fit",
    "sum_squared_error",
]


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and an optional sub-stream path.

    ``make_rng(7, 2)`` and ``make_rng(7, 3)`` are statistically independent,
    and both are independent of ``make_rng(8, 2)``.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


def glorot_uniform(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Glorot/Xavier uniform matrix of shape ``(rows, cols)``.

    Entries are drawn from ``U(-b, b)`` with ``b = sqrt(6 / (rows + cols))``;
    ``cols`` is the fan-in and ``rows`` the fan-out.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"glorot_uniform needs positive dimensions, got ({rows}, {cols})")
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass
class AdamState:
    """Moment estimates for one parameter array."""

    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0

    def __post_init__(self):
        if self.m.shape != self.v.shape:
            raise ValueError("moment shapes differ")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def zeros_like(cls, param: np.ndarray, learning_rate: float = 0.001, **kwargs) -> "AdamState":
        return cls(np.zeros_like(param, dtype=float), np.zeros_like(param, dtype=float),
                   learning_rate=learning_rate, **kwargs)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update.

    Updates ``state`` (moments and step counter) in place and returns the new
    parameter array; ``param`` itself is left untouched.
    """
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ValueError(f"shape mismatch: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grad
    state.v *= b2
    state.v += (1.0 - b2) * (grad * grad)
    m_hat = state.m / (1.0 - b1 ** state.step)
    v_hat = state.v / (1.0 - b2 ** state.step)
    return param - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


@dataclass
class PCAResult:
    """Principal axes of a sample matrix.

    ``basis`` has one orthonormal column per component; ``fractions`` holds
    the fraction of total variance carried by each kept component.
    """

    basis: np.ndarray
    fractions: np.ndarray
    mean: np.ndarray
    all_fractions: np.ndarray = field(repr=False)

    @property
    def cumulative(self) -> float:
        return float(self.fractions.sum())

    def transform(self, samples: np.ndarray) -> np.ndarray:
        return (np.asarray(samples, dtype=float) - self.mean) @ self.basis

    def inverse_transform(self, scores: np.ndarray) -> np.ndarray:
        return np.asarray(scores, dtype=float) @ self.basis.T + self.mean


def pca_fit(samples: np.ndarray, k: int) -> PCAResult:
    """Fit a ``k``-component PCA by SVD of the mean-centred samples.

    Each basis vector is sign-fixed so its largest-magnitude entry is
    positive, making the result deterministic.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError("samples must be a 2-D array (n_samples, n_features)")
    n, d = x.shape
    if n < 2:
        raise ValueError("pca_fit needs at least two samples")
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k must lie in [1, {min(n - 1, d)}], got {k}")
    mean = x.mean(axis=0)
    centred = x - mean
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    total = float(np.sum(s ** 2))
    if total <= np.finfo(float).tiny or total <= 1e-24 * max(1.0, float(np.sum(x ** 2))):
        raise ValueError("zero-variance samples: principal axes are undefined")
    basis = vt[:k].T.copy()
    pivot = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivot, np.arange(k)])
    basis *= signs
    all_fractions = s ** 2 / total
    return PCAResult(basis=basis, fractions=all_fractions[:k].copy(), mean=mean, all_fractions=all_fractions)


def sum_squared_error(output: np.ndarray, target: np.ndarray) -> float:
    output = np.asarray(output, dtype=float)
    target = np.asarray(target, dtype=float)
    if output.shape != target.shape:
        raise ValueError(f"shape mismatch: {output.shape} vs {target.shape}")
    diff = output - target
    return float(np.sum(diff * diff))
