"""Rank-constrained nuclear-norm proximal operator.

Solves ``min_L 0.5 ||L - M||_F^2 + mu ||L||_*`` subject to ``rank(L) <= p``
two ways:

* :func:`prox_oracle_full_svd` truncates and shrinks a dense SVD of ``M``;
* :func:`prox_rank_nuclear` works on an ``m x p`` factor found by a
  Gauss-Newton iteration on ``0.5 ||X X^T - M M^T||_F^2``, so the only SVD
  taken is of that small factor.  A previous :class:`Factorization` can be
  passed to warm-start the inner iteration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .errors import RankDeficientInput, SingularGram
from .prng import Prng

# Singular values of the factor below this fraction of the largest are
# treated as exact zeros (rank(M) <= p case).
DEFICIENT_RTOL = 1e-10
# Gauss-Newton only decays null directions of M M^T slowly, so a direction
# u_i of X_hat is also treated as empty when ||M^T u_i|| < this * sigma_i
# (at a fixed point the ratio is exactly 1).
DEFICIENT_ENERGY = 0.5


@dataclass(frozen=True)
class GnSettings:
    """Stopping rule for the Gauss-Newton inner iteration.

    The iteration stops once ``||X_new - X||_F / ||X||_F < inner_tol`` or
    after `max_inner_iters` steps.  `ridge` is added to the diagonal of
    ``X^T X`` before every solve; when it is zero a ridge of
    ``1e-12 * trace(X^T X) / p`` is used only to retry a failed factorization.
    """

    inner_tol: float = 1e-9
    max_inner_iters: int = 5000
    ridge: float = 0.0

    def __post_init__(self):
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")
        if self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be at least 1")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")


@dataclass(frozen=True)
class GnResult:
    X: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True)
class Factorization:
    """``L = X Y^T`` with ``X`` of shape (m, p) and ``Y`` of shape (n, p), ``Y^T Y = I``.

    ``x_hat`` keeps the unshrunk Gauss-Newton factor, which is the natural
    warm start for the next prox call; ``gn_iterations`` records how many
    inner steps produced this factorization.
    """

    X: np.ndarray
    Y: np.ndarray
    x_hat: Optional[np.ndarray] = None
    gn_iterations: int = 0

    @property
    def rank_bound(self) -> int:
        return self.X.shape[1]

    def to_matrix(self) -> np.ndarray:
        return self.X @ self.Y.T

    def orthonormality_error(self) -> float:
        p = self.Y.shape[1]
        return float(np.linalg.norm(self.Y.T @ self.Y - np.eye(p)))


def thin_svd(A: np.ndarray):
    """Thin SVD ``A = U diag(s) V^T`` with ``U`` (m, p), descending ``s`` and ``V`` (p, p)."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt.T


def nuclear_norm(M: np.ndarray) -> float:
    return float(np.linalg.svd(M, compute_uv=False).sum())


def nuclear_norm_of_factor(F: Factorization) -> float:
    """``||X Y^T||_* = ||X||_*`` when ``Y`` has orthonormal columns."""
    return float(np.linalg.svd(F.X, compute_uv=False).sum())


def _gram_solver(X: np.ndarray, ridge: float):
    G = X.T @ X
    p = G.shape[0]
    if ridge > 0:
        G = G + ridge * np.eye(p)
    try:
        return sla.cho_factor(G, check_finite=False)
    except np.linalg.LinAlgError:
        if ridge > 0:
            raise SingularGram("X^T X + ridge*I is not positive definite") from None
    retry = 1e-12 * np.trace(G) / p
    if not retry > 0:
        raise SingularGram("X^T X is zero")
    try:
        return sla.cho_factor(G + retry * np.eye(p), check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularGram("X^T X is numerically singular") from None


def gauss_newton_topspace(
    gram_apply: Callable[[np.ndarray], np.ndarray],
    X0: np.ndarray,
    settings: GnSettings = GnSettings(),
) -> GnResult:
    """Minimize ``0.5 ||X X^T - K||_F^2`` over ``m x p`` matrices X.

    `gram_apply` evaluates ``K @ X`` (for ``K = M M^T`` pass
    ``lambda X: M @ (M.T @ X)``).  Each step is

        X <- K X G^-1 - X (G^-1 X^T K X G^-1 - I) / 2,   G = X^T X

    with the p x p systems solved by Cholesky.  X0 must have full column rank.
    """
    X = np.array(X0, dtype=np.float64)
    p = X.shape[1]
    eye = np.eye(p)
    for k in range(1, settings.max_inner_iters + 1):
        W = gram_apply(X)
        cf = _gram_solver(X, settings.ridge)
        P = sla.cho_solve(cf, W.T, check_finite=False).T
        X_new = P - 0.5 * (X @ (sla.cho_solve(cf, X.T @ P, check_finite=False) - eye))
        if not np.all(np.isfinite(X_new)):
            raise SingularGram("Gauss-Newton iterate became non-finite")
        denom = np.linalg.norm(X)
        change = np.linalg.norm(X_new - X) / denom if denom > 0 else np.inf
        X = X_new
        if change < settings.inner_tol:
            return GnResult(X, k, True)
    return GnResult(X, settings.max_inner_iters, False)


def cold_start(m: int, p: int, scale: float, seed: int = 0) -> np.ndarray:
    """Orthonormalized Gaussian m x p block scaled to Frobenius norm `scale`."""
    Q, _ = np.linalg.qr(Prng(seed).normal((m, p)))
    return Q * (scale / np.sqrt(p))


def _orthonormal_extension(V: np.ndarray, count: int, seed: int) -> np.ndarray:
    """`count` orthonormal columns orthogonal to the orthonormal columns of V."""
    n = V.shape[0]
    R = Prng(seed ^ 0x5DEECE66D).normal((n, count))
    for _ in range(2):
        R = R - V @ (V.T @ R)
        R, _ = np.linalg.qr(R)
    return R


def _check_prox_args(M: np.ndarray, mu: float, p: int, allow_full: bool = False) -> None:
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    q = min(M.shape)
    if not (1 <= p < q or (allow_full and p == q)):
        raise ValueError(f"need 1 <= p < min(m, n) = {q}, got p={p}")


def prox_rank_nuclear(
    M: np.ndarray,
    mu: float,
    p: int,
    warm: Optional[Factorization] = None,
    settings: GnSettings = GnSettings(),
    seed: int = 0,
):
    """Rank-``p`` nuclear-norm prox of `M` via Gauss-Newton on a small factor.

    Steps: Gauss-Newton gives ``X_hat`` with ``X_hat X_hat^T`` the best rank-p
    approximation of ``M M^T``; then ``Y = M^T X_hat (X_hat^T X_hat)^-1``;
    finally the thin SVD ``X_hat = U S A`` is shrunk to ``X = U max(S - mu, 0) A``.

    Returns
    -------
    factor : Factorization
    L : ndarray
        ``factor.X @ factor.Y.T``.
    """
    _check_prox_args(M, mu, p)
    m, n = M.shape
    scale = np.linalg.norm(M)
    if scale == 0:
        X = np.zeros((m, p))
        Y = np.eye(n, p)
        return Factorization(X, Y, None, 0), np.zeros((m, n))

    def gram_apply(Z):
        return M @ (M.T @ Z)

    if warm is not None:
        X0 = warm.x_hat if warm.x_hat is not None else M @ warm.Y
        if X0.shape != (m, p):
            raise ValueError("warm start factor has the wrong shape")
        try:
            gn = gauss_newton_topspace(gram_apply, X0, settings)
        except SingularGram:
            gn = gauss_newton_topspace(gram_apply, cold_start(m, p, scale, seed), settings)
    else:
        gn = gauss_newton_topspace(gram_apply, cold_start(m, p, scale, seed), settings)
    X_hat = gn.X

    cf = _gram_solver(X_hat, settings.ridge)
    Y = sla.cho_solve(cf, X_hat.T @ M, check_finite=False).T

    U, s, A = np.linalg.svd(X_hat, full_matrices=False)
    shrunk = np.maximum(s - mu, 0.0)
    bad = s < DEFICIENT_RTOL * s[0]
    # Y A^T has columns M^T u_i / sigma_i.
    bad |= np.linalg.norm(Y @ A.T, axis=0) < DEFICIENT_ENERGY
    if np.any(bad):
        warnings.warn(
            f"input has numerical rank {int((~bad).sum())} < p={p}",
            RankDeficientInput,
            stacklevel=2,
        )
        V = Y @ A.T
        good = ~bad
        Vg, _ = np.linalg.qr(V[:, good]) if good.any() else (np.zeros((n, 0)), None)
        # Column signs from QR may flip; realign with the computed columns.
        if good.any():
            signs = np.sign(np.sum(Vg * V[:, good], axis=0))
            signs[signs == 0] = 1.0
            Vg = Vg * signs
        V = np.empty((n, p))
        V[:, good] = Vg
        V[:, bad] = _orthonormal_extension(Vg, int(bad.sum()), seed)
        Y = V @ A
        shrunk[bad] = 0.0
    X = (U * shrunk) @ A
    factor = Factorization(X, Y, X_hat, gn.iterations)
    return factor, X @ Y.T


def full_svd_factor(M: np.ndarray, mu: float, p: int) -> Factorization:
    """The dense-SVD prox solution in factored form ``(U_p S_mu, V_p)``."""
    _check_prox_args(M, mu, p, allow_full=True)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    shrunk = np.maximum(s[:p] - mu, 0.0)
    return Factorization(U[:, :p] * shrunk, Vt[:p].T.copy(), None, 0)


def prox_oracle_full_svd(M: np.ndarray, mu: float, p: int) -> np.ndarray:
    """Prox by dense SVD: keep the top `p` singular triplets, shrink values by `mu`."""
    return full_svd_factor(M, mu, p).to_matrix()
