"""Synthetic problem generation: low-rank truth, impulses, noise, missing entries.

Every generator draws from a :class:`~rankrpca.prng.Prng`, so a problem is a
deterministic function of its :class:`SyntheticSpec` (including the seed).
:func:`make_problem` consumes one stream in a fixed order: left factor, right
factor, impulse positions, impulse values, Gaussian noise, missing entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .matrix import MeasurementOperator, write_mask, write_matrix
from .prng import Prng


def _count(fraction: float, total: int) -> int:
    # Round half up, independent of Python's banker's rounding.
    return int(math.floor(fraction * total + 0.5))


@dataclass(frozen=True)
class SyntheticSpec:
    m: int = 500
    n: int = 500
    r: int = 25
    s_pct: float = 20.0
    sigma: float = 0.05
    missing_ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("matrix dimensions must be positive")
        if not 1 <= self.r < min(self.m, self.n):
            raise ValueError("need 1 <= r < min(m, n)")
        if not 0 <= self.s_pct <= 100:
            raise ValueError("s_pct must lie in [0, 100]")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0 <= self.missing_ratio < 1:
            raise ValueError("missing_ratio must lie in [0, 1)")


@dataclass(frozen=True)
class Problem:
    spec: SyntheticSpec
    L_star: np.ndarray
    D: np.ndarray
    impulse_mask: np.ndarray
    op: MeasurementOperator

    def save(self, directory) -> None:
        """Write truth, data and masks in the matrix text format."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        write_matrix(out / "L_star.txt", self.L_star)
        write_matrix(out / "D.txt", self.D)
        write_mask(out / "impulse_mask.txt", self.impulse_mask)
        if not self.op.is_identity:
            write_mask(out / "observed_mask.txt", self.op.mask)


def make_low_rank(spec: SyntheticSpec, prng: Optional[Prng] = None) -> np.ndarray:
    """Product of independent standard normal (m, r) and (r, n) matrices."""
    prng = prng if prng is not None else Prng(spec.seed)
    G1 = prng.normal((spec.m, spec.r))
    G2 = prng.normal((spec.r, spec.n))
    return G1 @ G2


def corrupt_sparse(L_star: np.ndarray, s_pct: float, prng: Prng):
    """Replace ``s_pct`` percent of entries with Uniform[-3c, 3c], c = mean |L*|.

    Returns the corrupted copy and the boolean mask of replaced entries.
    """
    if not 0 <= s_pct <= 100:
        raise ValueError("s_pct must lie in [0, 100]")
    total = L_star.size
    k = _count(s_pct / 100.0, total)
    c = float(np.mean(np.abs(L_star)))
    idx = prng.sample_without_replacement(total, k)
    values = prng.uniform(k, -3.0 * c, 3.0 * c)
    out = np.array(L_star, dtype=np.float64)
    out.flat[idx] = values
    mask = np.zeros(L_star.shape, dtype=bool)
    mask.flat[idx] = True
    return out, mask


def add_gaussian(M: np.ndarray, sigma: float, prng: Prng) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return np.array(M, dtype=np.float64)
    return M + sigma * prng.normal(M.shape)


def make_mask(m: int, n: int, missing_ratio: float, prng: Prng) -> MeasurementOperator:
    """Entry-mask operator with ``round(missing_ratio * m * n)`` unobserved entries."""
    if not 0 <= missing_ratio < 1:
        raise ValueError("missing_ratio must lie in [0, 1)")
    k = _count(missing_ratio, m * n)
    observed = np.ones((m, n), dtype=bool)
    observed.flat[prng.sample_without_replacement(m * n, k)] = False
    return MeasurementOperator.entry_mask(observed)


def make_problem(spec: SyntheticSpec) -> Problem:
    """Generate ``D = A(corrupt(L*) + noise)`` for the given spec.

    Unobserved entries of `D` are zero.  Without missing entries the
    operator is the identity.
    """
    prng = Prng(spec.seed)
    L_star = make_low_rank(spec, prng)
    D, impulses = corrupt_sparse(L_star, spec.s_pct, prng)
    D = add_gaussian(D, spec.sigma, prng)
    if spec.missing_ratio > 0:
        op = make_mask(spec.m, spec.n, spec.missing_ratio, prng)
        D = op.apply(D)
    else:
        op = MeasurementOperator.identity()
    return Problem(spec, L_star, D, impulses, op)


def best_rank_approx(img: np.ndarray, k: int) -> np.ndarray:
    U, s, Vt = np.linalg.svd(img, full_matrices=False)
    return (U[:, :k] * s[:k]) @ Vt[:k]


def corrupt_image(
    img: np.ndarray,
    rank_truncate: Optional[int],
    s_pct: float,
    sigma: float,
    prng: Prng,
    peak: float = 255.0,
):
    """Build ``(truth, corrupted)`` for the image experiments.

    `truth` is the best rank-`rank_truncate` approximation of `img` (or `img`
    itself when None).  `corrupted` sets ``s_pct`` percent of the pixels to 0
    or `peak` with equal probability, then adds N(0, sigma^2) everywhere.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.min() < 0 or img.max() > peak:
        raise ValueError(f"image entries must lie in [0, {peak}]")
    if rank_truncate is None or rank_truncate >= min(img.shape):
        truth = img.copy()
    else:
        truth = best_rank_approx(img, rank_truncate)
    k = _count(s_pct / 100.0, truth.size)
    idx = prng.sample_without_replacement(truth.size, k)
    salt = prng.uniform(k) < 0.5
    corrupted = truth.copy()
    corrupted.flat[idx] = np.where(salt, peak, 0.0)
    corrupted = add_gaussian(corrupted, sigma, prng)
    return truth, corrupted
