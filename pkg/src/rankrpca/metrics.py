"""Error measures: relative change, relative error to ground truth, PSNR."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfinitePsnr, ZeroTruth
from .matrix import check_same_shape


@dataclass(frozen=True)
class MetricReport:
    re_to_truth: float
    re_change_final: float
    psnr_db: Optional[float] = None
    psnr_unclamped_db: Optional[float] = None


def relative_change(L_new: np.ndarray, L_old: np.ndarray) -> float:
    """``||L_new - L_old||_F / ||L_old||_F``; ``inf`` if only the old one is zero."""
    check_same_shape(L_new, L_old)
    diff = np.linalg.norm(L_new - L_old)
    base = np.linalg.norm(L_old)
    if base == 0:
        return 0.0 if diff == 0 else math.inf
    return float(diff / base)


def relative_error_to_truth(L: np.ndarray, L_star: np.ndarray) -> float:
    check_same_shape(L, L_star)
    base = np.linalg.norm(L_star)
    if base == 0:
        raise ZeroTruth("ground truth has zero norm")
    return float(np.linalg.norm(L - L_star) / base)


def psnr(recovered: np.ndarray, truth: np.ndarray, peak: float = 255.0) -> float:
    """``10 log10(peak^2 / MSE)`` in decibels."""
    check_same_shape(recovered, truth)
    if not peak > 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((np.asarray(recovered, float) - truth) ** 2))
    if mse == 0:
        raise InfinitePsnr("recovered image equals the reference")
    return 10.0 * math.log10(peak * peak / mse)


def image_metrics(
    recovered: np.ndarray, truth: np.ndarray, peak: float = 255.0, re_change: float = math.nan
) -> MetricReport:
    """RE plus PSNR; the reported PSNR uses `recovered` clipped to ``[0, peak]``."""

    def _safe(img):
        try:
            return psnr(img, truth, peak)
        except InfinitePsnr:
            return math.inf

    return MetricReport(
        re_to_truth=relative_error_to_truth(recovered, truth),
        re_change_final=re_change,
        psnr_db=_safe(np.clip(recovered, 0.0, peak)),
        psnr_unclamped_db=_safe(recovered),
    )
