"""Chebyshev and Fourier collocation helpers shared by the elliptic solvers."""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import interpolate, linalg

from .errors import DiscretizationUnstable

logger = logging.getLogger(__name__)

KERNEL_THRESHOLD = 1e-8
GAP_RATIO = 1e3


def lobatto_points(n: int) -> np.ndarray:
    """n Chebyshev extreme points on [-1, 1], ascending"""
    return -np.cos(np.pi * np.arange(n) / (n - 1))


def first_kind_points(m: int) -> np.ndarray:
    return -np.cos((2 * np.arange(m) + 1) * np.pi / (2 * m))


def cheb(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Differentiation matrix on ``lobatto_points(n)``"""
    if n < 2:
        raise ValueError("at least two collocation points are needed")
    k = n - 1
    x = np.cos(np.pi * np.arange(n) / k)
    c = np.hstack([2.0, np.ones(k - 1), 2.0]) * (-1.0) ** np.arange(n)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n))
    d = d - np.diag(d.sum(axis=1))
    return x[::-1].copy(), d[::-1, ::-1].copy()


def resample_matrix(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Matrix taking values on ``src`` to polynomial interpolant values on ``dst``"""
    return interpolate.BarycentricInterpolator(src, np.eye(len(src)))(dst)


def fourier_diff(m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Periodic first-derivative matrix on m equispaced points of [0, 2pi); m must be odd"""
    if m < 3 or m % 2 == 0:
        raise ValueError("Fourier grid size must be odd and at least 3")
    h = 2 * np.pi / m
    theta = h * np.arange(m)
    k = np.arange(1, m)
    column = np.hstack([0.0, 0.5 * (-1.0) ** k / np.sin(k * h / 2)])
    row = column[np.r_[0, m - 1 : 0 : -1]]
    return theta, linalg.toeplitz(column, row)


@dataclass(frozen=True)
class RankDecision:
    rank: int
    threshold: float
    gap: float
    near_threshold: bool
    smallest: float


def svd_rank(s: np.ndarray, label: str = "") -> RankDecision:
    """Numerical rank from descending singular values with a gap requirement"""
    s = np.asarray(s, dtype=float)
    if s.size == 0 or s[0] == 0:
        return RankDecision(0, 0.0, np.inf, False, 0.0)
    threshold = KERNEL_THRESHOLD * s[0]
    rank = int(np.sum(s > threshold))
    smallest = float(s[-1])
    if rank < s.size:
        gap = float(s[rank - 1] / max(s[rank], np.finfo(float).tiny))
        if gap < GAP_RATIO:
            raise DiscretizationUnstable(
                "no clear gap between kernel and range singular values",
                operator=label or None,
                gap=f"{gap:.3g}",
            )
        return RankDecision(rank, threshold, gap, False, smallest)
    near = smallest < 10 * threshold
    if near:
        logger.warning("smallest singular value %.3e is close to the kernel threshold %s", smallest, label)
    return RankDecision(rank, threshold, np.inf, near, smallest)
