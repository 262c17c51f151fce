"""Outer algorithms for rank-bounded robust PCA.

All solvers target

    min_{L, S} 0.5 ||A(L) + S - D||_F^2 + mu ||L||_* + lam ||S||_1,  rank(L) <= p

(ADMM targets the noiseless constrained variant, see :func:`solve_admm`).
Eliminating ``S`` leaves ``F(L) = f_lam(D - A(L)) + mu ||L||_*`` with
``f_lam`` the Moreau envelope of ``lam |.|``, whose gradient is the clipping
``sign(x) min(lam, |x|)``.  Forward-backward is a proximal gradient method on
``F``; the accelerated solver is the nonmonotone APG scheme with a safeguard
step.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import InvalidMode, NonFiniteError, ShapeMismatch, StepsizeWarning
from .matrix import MeasurementOperator, as_matrix, moreau_envelope, soft_threshold
from .metrics import relative_change
from .prox import (
    Factorization,
    GnSettings,
    full_svd_factor,
    nuclear_norm,
    nuclear_norm_of_factor,
    prox_rank_nuclear,
)

PROX_MODES = ("gauss-newton", "full-svd")


@dataclass(frozen=True)
class SolverConfig:
    """Scalars and switches shared by every solver.

    ``t=None`` selects the default step: 1 for the identity operator and
    ``0.99 / ||A||^2`` otherwise.  `prox` picks the Gauss-Newton factored prox
    or the dense-SVD reference.  `seed` drives the cold-start factor.
    """

    lam: float = 0.04
    mu: float = 0.6
    p: int = 30
    t: Optional[float] = None
    eps: float = 1e-4
    max_iters: int = 5000
    eta: float = 0.6
    delta: float = 1.0
    alpha: float = 1.0
    gn: GnSettings = field(default_factory=GnSettings)
    prox: str = "gauss-newton"
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.p < 1:
            raise ValueError("p must be a positive integer")
        if self.t is not None and not self.t > 0:
            raise ValueError("t must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 <= self.eta < 1:
            raise ValueError("eta must lie in [0, 1)")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.prox not in PROX_MODES:
            raise ValueError(f"prox must be one of {PROX_MODES}")

    def stepsize(self, op: MeasurementOperator) -> float:
        norm2 = op.operator_norm**2
        if self.t is None:
            return 1.0 if op.is_identity else 0.99 / norm2
        limit_ok = self.t <= 1.0 if op.is_identity else self.t < 1.0 / norm2
        if not limit_ok:
            warnings.warn(
                f"stepsize t={self.t} exceeds the range with guaranteed descent",
                StepsizeWarning,
                stacklevel=3,
            )
        return self.t


@dataclass
class ApgState:
    tk_prev: float
    tk: float
    qk: float
    ck: float
    Z: np.ndarray
    L_prev: np.ndarray
    L: np.ndarray

    def advance(self, F_new: float, eta: float) -> None:
        t_next = (math.sqrt(4.0 * self.tk * self.tk + 1.0) + 1.0) / 2.0
        q_next = eta * self.qk + 1.0
        self.ck = (eta * self.qk * self.ck + F_new) / q_next
        self.tk_prev, self.tk, self.qk = self.tk, t_next, q_next


@dataclass
class SolveReport:
    L: np.ndarray
    S: np.ndarray
    factor: Factorization
    objective_trace: List[Tuple[int, float]]
    iterations: int
    converged: bool
    wall_time: float
    gn_inner_iters_trace: List[int]
    time_trace: List[float] = field(default_factory=list)
    reference_trace: List[float] = field(default_factory=list)
    residual_trace: List[float] = field(default_factory=list)
    multiplier_trace: List[float] = field(default_factory=list)
    safeguard_steps: int = 0
    re_change_final: float = math.inf

    @property
    def objective_values(self) -> np.ndarray:
        return np.array([v for _, v in self.objective_trace])


def _check_inputs(D, op: Optional[MeasurementOperator]):
    D = as_matrix(D, "D")
    op = op if op is not None else MeasurementOperator.identity()
    if op.mask is not None and op.mask.shape != D.shape:
        raise ShapeMismatch(f"mask shape {op.mask.shape} does not match D {D.shape}")
    return D, op


def _nuclear(L: np.ndarray, factor: Optional[Factorization]) -> float:
    return nuclear_norm_of_factor(factor) if factor is not None else nuclear_norm(L)


def objective_E(L, S, D, op: MeasurementOperator, cfg: SolverConfig,
                factor: Optional[Factorization] = None) -> float:
    """``0.5 ||A(L) + S - D||^2 + lam ||S||_1 + mu ||L||_*``.

    The nuclear norm comes from `factor` when given, else from a dense SVD.
    """
    if L.shape != D.shape or S.shape != D.shape:
        raise ShapeMismatch("L, S and D must share a shape")
    R = op.apply(L) + S - D
    value = 0.5 * float(np.sum(R * R)) + cfg.lam * float(np.abs(S).sum())
    if cfg.mu > 0:
        value += cfg.mu * _nuclear(L, factor)
    return value


def objective_F(L, D, op: MeasurementOperator, cfg: SolverConfig,
                factor: Optional[Factorization] = None) -> float:
    """``f_lam(D - A(L)) + mu ||L||_*``, i.e. ``objective_E`` minimized over S."""
    if L.shape != D.shape:
        raise ShapeMismatch("L and D must share a shape")
    value = moreau_envelope(D - op.apply(L), cfg.lam)
    if cfg.mu > 0:
        value += cfg.mu * _nuclear(L, factor)
    return value


class _Prox:
    """Dispatch to the configured prox and keep score of inner iterations."""

    def __init__(self, cfg: SolverConfig, p: int):
        self.cfg = cfg
        self.p = p
        self.inner: List[int] = []

    def __call__(self, M, mu, warm):
        if self.cfg.prox == "full-svd":
            factor = full_svd_factor(M, mu, self.p)
            self.inner.append(0)
            return factor, factor.to_matrix()
        factor, L = prox_rank_nuclear(M, mu, self.p, warm, self.cfg.gn, self.cfg.seed)
        self.inner.append(factor.gn_iterations)
        return factor, L


def _gradient_point(L, S, D, op: MeasurementOperator, t: float) -> np.ndarray:
    """``L - t A*(A(L) - D + S)``.

    For the identity this is evaluated as ``(1 - t) L + t (D - S)``, which is
    bitwise ``D - S`` at ``t = 1``.
    """
    if op.is_identity:
        return (1.0 - t) * L + t * (D - S)
    return L - t * op.adjoint_apply(op.apply(L) - D + S)


def fb_step(D, op: MeasurementOperator, cfg: SolverConfig, L: np.ndarray,
            warm: Optional[Factorization] = None, t: Optional[float] = None):
    """One forward-backward iteration from `L`; returns ``(factor, L_next, S)``."""
    t = cfg.stepsize(op) if t is None else t
    S = soft_threshold(D - op.apply(L), cfg.lam)
    prox = _Prox(cfg, cfg.p)
    factor, L_next = prox(_gradient_point(L, S, D, op, t), t * cfg.mu, warm)
    return factor, L_next, S


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise NonFiniteError(f"{what} became non-finite")
    return value


def solve_fb(D, op: Optional[MeasurementOperator] = None, cfg: SolverConfig = SolverConfig(),
             init: Optional[np.ndarray] = None,
             callback: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None) -> SolveReport:
    """Forward-backward splitting with the Gauss-Newton prox.

    Each iteration sets ``S = soft(D - A(L), lam)`` and
    ``L <- prox_{t mu}(L - t A*(A(L) - D + S))``, warm-starting the prox from
    the previous factor, until the relative change of L drops below `eps`.
    `callback(k, L, S)` is called after every iteration.
    """
    D, op = _check_inputs(D, op)
    t = cfg.stepsize(op)
    start = time.perf_counter()
    L = np.zeros_like(D) if init is None else as_matrix(init, "init").copy()
    if L.shape != D.shape:
        raise ShapeMismatch("init must match D")
    prox = _Prox(cfg, cfg.p)

    S = np.zeros_like(D)
    trace = [(0, _finite(objective_E(L, S, D, op, cfg), "objective"))]
    times = [0.0]
    factor: Optional[Factorization] = None
    converged = False
    rel = math.inf
    k = 0
    for k in range(1, cfg.max_iters + 1):
        S = soft_threshold(D - op.apply(L), cfg.lam)
        factor, L_new = prox(_gradient_point(L, S, D, op, t), t * cfg.mu, factor)
        trace.append((k, _finite(objective_E(L_new, S, D, op, cfg, factor), "objective")))
        times.append(time.perf_counter() - start)
        rel = relative_change(L_new, L) if np.any(L) else math.inf
        L = L_new
        if callback is not None:
            callback(k, L, S)
        if rel < cfg.eps:
            converged = True
            break

    if factor is None:
        raise RuntimeError("no iterations were run")
    S_final = soft_threshold(D - op.apply(L), cfg.lam)
    return SolveReport(
        L=L, S=S_final, factor=factor, objective_trace=trace, iterations=k,
        converged=converged, wall_time=time.perf_counter() - start,
        gn_inner_iters_trace=prox.inner, time_trace=times, re_change_final=rel,
    )


def solve_shen_baseline(D, cfg: SolverConfig = SolverConfig(),
                        op: Optional[MeasurementOperator] = None,
                        callback=None) -> SolveReport:
    """Alternating minimization for ``0.5 ||L + S - D||^2 + lam ||S||_1``, ``rank(L) <= p``.

    Alternates ``S = soft(D - L, lam)`` with the best rank-p fit of ``D - S``.
    This coincides with :func:`solve_fb` at ``mu = 0``, ``t = 1`` and A = I;
    other operators are rejected.
    """
    D, op = _check_inputs(D, op)
    if not op.is_identity:
        raise InvalidMode("the alternating baseline needs the identity operator")
    cfg = replace(cfg, mu=0.0, t=1.0)
    start = time.perf_counter()
    prox = _Prox(cfg, cfg.p)
    L = np.zeros_like(D)
    S = np.zeros_like(D)
    trace = [(0, objective_E(L, S, D, op, cfg))]
    times = [0.0]
    factor = None
    converged = False
    rel = math.inf
    k = 0
    for k in range(1, cfg.max_iters + 1):
        S = soft_threshold(D - L, cfg.lam)
        factor, L_new = prox(D - S, 0.0, factor)
        trace.append((k, _finite(objective_E(L_new, S, D, op, cfg, factor), "objective")))
        times.append(time.perf_counter() - start)
        rel = relative_change(L_new, L) if np.any(L) else math.inf
        L = L_new
        if callback is not None:
            callback(k, L, S)
        if rel < cfg.eps:
            converged = True
            break
    return SolveReport(
        L=L, S=soft_threshold(D - L, cfg.lam), factor=factor, objective_trace=trace,
        iterations=k, converged=converged, wall_time=time.perf_counter() - start,
        gn_inner_iters_trace=prox.inner, time_trace=times, re_change_final=rel,
    )


def solve_apg(D, op: Optional[MeasurementOperator] = None, cfg: SolverConfig = SolverConfig(),
              callback: Optional[Callable[[int, dict], None]] = None) -> SolveReport:
    """Nonmonotone accelerated proximal gradient with a safeguard step.

    Per iteration, from the extrapolated point
    ``Lb = L_k + (t_{k-1}/t_k)(Z_k - L_k) + ((t_{k-1} - 1)/t_k)(L_k - L_{k-1})``
    a prox-gradient step gives ``Z_{k+1}``.  It is accepted when
    ``F(Z_{k+1}) <= c_k - delta ||Z_{k+1} - Lb||^2``; otherwise a plain step
    ``V_{k+1}`` from ``L_k`` is computed and the candidate with the smaller F
    wins.  ``c_k`` is a weighted average of past F values controlled by `eta`.

    `callback(k, info)` receives a dict with ``L_prev``, ``L``, ``branch``
    (``"z"``, ``"safeguard-z"`` or ``"safeguard-v"``), ``F`` and ``c``.
    """
    D, op = _check_inputs(D, op)
    t = cfg.stepsize(op)
    start = time.perf_counter()
    prox = _Prox(cfg, cfg.p)
    zero = np.zeros_like(D)
    F0 = objective_F(zero, D, op, cfg)
    st = ApgState(tk_prev=0.0, tk=1.0, qk=1.0, ck=F0, Z=zero, L_prev=zero, L=zero)

    trace = [(0, F0)]
    refs = [st.ck]
    times = [0.0]
    accepted: Optional[Factorization] = None
    factor_L: Optional[Factorization] = None
    converged = False
    rel = math.inf
    safeguards = 0
    k = 0
    for k in range(1, cfg.max_iters + 1):
        Lk = st.L
        Lb = Lk + (st.tk_prev / st.tk) * (st.Z - Lk) + ((st.tk_prev - 1.0) / st.tk) * (Lk - st.L_prev)
        S = soft_threshold(D - op.apply(Lb), cfg.lam)
        fz, Z_new = prox(_gradient_point(Lb, S, D, op, t), t * cfg.mu, accepted)
        FZ = _finite(objective_F(Z_new, D, op, cfg, fz), "objective")
        gap = Z_new - Lb
        if FZ <= st.ck - cfg.delta * float(np.sum(gap * gap)):
            L_new, F_new, factor_L, branch = Z_new, FZ, fz, "z"
        else:
            safeguards += 1
            Sk = soft_threshold(D - op.apply(Lk), cfg.lam)
            fv, V_new = prox(_gradient_point(Lk, Sk, D, op, t), t * cfg.mu, accepted)
            FV = _finite(objective_F(V_new, D, op, cfg, fv), "objective")
            if FZ <= FV:
                L_new, F_new, factor_L, branch = Z_new, FZ, fz, "safeguard-z"
            else:
                L_new, F_new, factor_L, branch = V_new, FV, fv, "safeguard-v"
        accepted = factor_L

        rel = relative_change(L_new, Lk) if np.any(Lk) else math.inf
        st.L_prev, st.L, st.Z = Lk, L_new, Z_new
        trace.append((k, F_new))
        times.append(time.perf_counter() - start)
        if callback is not None:
            callback(k, {"L_prev": Lk, "L": L_new, "branch": branch, "F": F_new, "c": st.ck})
        if rel < cfg.eps:
            converged = True
            break
        st.advance(F_new, cfg.eta)
        refs.append(st.ck)

    S_last = soft_threshold(D - op.apply(st.L), cfg.lam)
    return SolveReport(
        L=st.L, S=S_last, factor=factor_L, objective_trace=trace, iterations=k,
        converged=converged, wall_time=time.perf_counter() - start,
        gn_inner_iters_trace=prox.inner, time_trace=times, reference_trace=refs,
        safeguard_steps=safeguards, re_change_final=rel,
    )


def solve_admm(D, cfg: SolverConfig = SolverConfig(),
               op: Optional[MeasurementOperator] = None) -> SolveReport:
    """ADMM for ``min mu ||L||_* + ||S||_1`` s.t. ``rank(L) <= p`` and ``L + S = D``.

    Iterates, with penalty ``alpha`` and multiplier ``Z``::

        L <- prox_{mu/alpha}(D - S + Z/alpha)
        S <- soft(D - L + Z/alpha, 1/alpha)
        Z <- Z - alpha (L + S - D)

    and stops when both ``||L + S - D|| / ||D||`` and the relative change of L
    fall below `eps`.  `cfg.lam` is unused.  The objective trace holds
    ``mu ||L||_* + ||S||_1``, `residual_trace` the relative primal residual
    and `multiplier_trace` the largest ``|Z_ij|``.
    """
    D, op = _check_inputs(D, op)
    if not op.is_identity:
        raise InvalidMode("ADMM solves the exact decomposition D = L + S only")
    a = cfg.alpha
    start = time.perf_counter()
    prox = _Prox(cfg, cfg.p)
    L = np.zeros_like(D)
    S = np.zeros_like(D)
    Z = np.zeros_like(D)
    d_norm = np.linalg.norm(D)
    if d_norm == 0:
        raise ValueError("D is the zero matrix")
    trace = [(0, 0.0)]
    times = [0.0]
    residuals = [1.0]
    zmax = [0.0]
    factor = None
    converged = False
    rel = math.inf
    k = 0
    for k in range(1, cfg.max_iters + 1):
        factor, L_new = prox(D - S + Z / a, cfg.mu / a, factor)
        S = soft_threshold(D - L_new + Z / a, 1.0 / a)
        R = L_new + S - D
        Z = Z - a * R
        res = float(np.linalg.norm(R) / d_norm)
        rel = relative_change(L_new, L) if np.any(L) else math.inf
        L = L_new
        value = cfg.mu * nuclear_norm_of_factor(factor) + float(np.abs(S).sum())
        trace.append((k, _finite(value, "objective")))
        residuals.append(res)
        zmax.append(float(np.abs(Z).max()))
        times.append(time.perf_counter() - start)
        if res < cfg.eps and rel < cfg.eps:
            converged = True
            break
    return SolveReport(
        L=L, S=S, factor=factor, objective_trace=trace, iterations=k, converged=converged,
        wall_time=time.perf_counter() - start, gn_inner_iters_trace=prox.inner,
        time_trace=times, residual_trace=residuals, multiplier_trace=zmax,
        re_change_final=rel,
    )
