"""Dense matrix helpers, entrywise shrinkage and measurement operators.

Matrices are plain C-ordered ``float64`` numpy arrays.  Every function here
is pure: inputs are never modified in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import NonFiniteError, ShapeMismatch

PathLike = Union[str, Path]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return `a` as a finite, 2-D, row-major float64 array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape mismatch: {a.shape} vs {b.shape}")


def soft_threshold(M: np.ndarray, lam: float) -> np.ndarray:
    """Entrywise ``sign(M) * max(0, |M| - lam)``, the prox of ``lam * |.|``."""
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    return np.sign(M) * np.maximum(np.abs(M) - lam, 0.0)


def moreau_grad(M: np.ndarray, lam: float) -> np.ndarray:
    """Gradient of the Moreau envelope of ``lam * |.|``: ``sign(M) * min(lam, |M|)``."""
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    return np.sign(M) * np.minimum(np.abs(M), lam)


def moreau_envelope(M: np.ndarray, lam: float) -> float:
    """Sum over entries of ``f(x) = min_y lam|y| + (y - x)^2 / 2``.

    Closed form: ``x^2 / 2`` when ``|x| <= lam`` and ``lam|x| - lam^2 / 2``
    otherwise.
    """
    a = np.abs(M)
    return float(np.where(a <= lam, 0.5 * a * a, lam * a - 0.5 * lam * lam).sum())


def frobenius_norm(M: np.ndarray) -> float:
    return float(np.sqrt(np.sum(M * M)))


def inner_product(M: np.ndarray, N: np.ndarray) -> float:
    check_same_shape(M, N)
    return float(np.sum(M * N))


@dataclass(frozen=True)
class MeasurementOperator:
    """Linear map ``A`` relating the low-rank matrix to the observations.

    ``kind`` is ``"identity"`` or ``"mask"``.  For a mask, ``mask[i, j]`` is
    True where the entry is observed; unobserved entries map to zero.  Both
    kinds are orthogonal projections, hence self-adjoint with norm 1.
    """

    kind: str = "identity"
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "identity":
            if self.mask is not None:
                raise ValueError("identity operator takes no mask")
        elif self.kind == "mask":
            if self.mask is None:
                raise ValueError("mask operator requires a boolean mask")
            m = np.asarray(self.mask)
            if m.ndim != 2:
                raise ShapeMismatch("mask must be 2-D")
            m = m.astype(bool)
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)
        else:
            raise ValueError(f"unknown operator kind {self.kind!r}")

    @classmethod
    def identity(cls) -> "MeasurementOperator":
        return cls("identity")

    @classmethod
    def entry_mask(cls, mask) -> "MeasurementOperator":
        return cls("mask", np.asarray(mask, dtype=bool))

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    @property
    def operator_norm(self) -> float:
        return 1.0

    def _check(self, M: np.ndarray) -> None:
        if self.mask is not None and M.shape != self.mask.shape:
            raise ShapeMismatch(f"operator mask has shape {self.mask.shape}, matrix {M.shape}")

    def apply(self, M: np.ndarray) -> np.ndarray:
        self._check(M)
        if self.mask is None:
            return M
        return np.where(self.mask, M, 0.0)

    def adjoint_apply(self, M: np.ndarray) -> np.ndarray:
        return self.apply(M)

    def observed_fraction(self) -> float:
        if self.mask is None:
            return 1.0
        return float(self.mask.mean())


def apply(op: MeasurementOperator, M: np.ndarray) -> np.ndarray:
    return op.apply(M)


def adjoint_apply(op: MeasurementOperator, M: np.ndarray) -> np.ndarray:
    return op.adjoint_apply(M)


# Text format: a "rows cols" header line, then one space-separated line per row.

def write_matrix(path: PathLike, M: np.ndarray, fmt: str = "%.17g") -> None:
    M = np.asarray(M)
    if M.ndim != 2:
        raise ShapeMismatch("only 2-D arrays can be written")
    with open(path, "w") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        np.savetxt(fh, M, fmt=fmt, delimiter=" ")


def read_matrix(path: PathLike) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected 'rows cols' header")
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if data.shape != (rows, cols):
        raise ShapeMismatch(f"{path}: header says {rows}x{cols}, body has {data.shape}")
    return as_matrix(data, str(path))


def write_mask(path: PathLike, mask: np.ndarray) -> None:
    write_matrix(path, np.asarray(mask, dtype=np.int64), fmt="%d")


def read_mask(path: PathLike) -> np.ndarray:
    data = read_matrix(path)
    if not np.all((data == 0) | (data == 1)):
        raise ValueError(f"{path}: mask entries must be 0 or 1")
    return data.astype(bool)
