"""Peak finding, width fits, sign checks, and ensemble statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cint import ImageProfile

__all__ = ["Peak", "PeakReport", "find_peaks", "find_peaks_2d", "sign_at",
           "cov_statistic"]


@dataclass(frozen=True)
class Peak:
    location: float
    value: float
    std: float        # fitted Gaussian width; nan when not fittable


@dataclass
class PeakReport:
    peaks: list
    threshold: float
    method: str

    def locations(self) -> np.ndarray:
        return np.array([p.location for p in self.peaks])

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "method": self.method,
            "peaks": [{"location": p.location, "value": p.value, "std": p.std}
                      for p in self.peaks],
        }


def _parabolic_refine(y: np.ndarray, v: np.ndarray, k: int) -> tuple[float, float]:
    """3-point parabola through |v| around index k: (location, value)."""
    if k == 0 or k == len(v) - 1:
        return float(y[k]), float(v[k])
    f0, f1, f2 = v[k - 1], v[k], v[k + 1]
    denom = f0 - 2.0 * f1 + f2
    if denom == 0:
        return float(y[k]), float(v[k])
    delta = 0.5 * (f0 - f2) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    dy = y[1] - y[0]
    val = f1 - 0.25 * (f0 - f2) * delta
    return float(y[k] + delta * dy), float(val)


def _gaussian_std_fit(y: np.ndarray, v: np.ndarray, k: int) -> float:
    """Weighted LS Gaussian width from the half-max neighborhood of peak k."""
    half = v[k] / 2.0
    lo = k
    while lo > 0 and v[lo - 1] >= half and v[lo - 1] <= v[lo]:
        lo -= 1
    hi = k
    while hi < len(v) - 1 and v[hi + 1] >= half and v[hi + 1] <= v[hi]:
        hi += 1
    sl = slice(lo, hi + 1)
    yy, vv = y[sl], v[sl]
    if len(yy) < 3 or np.any(vv <= 0):
        return math.nan
    # log v = c0 + c1 y + c2 y^2 with weights v^2; sigma^2 = -1/(2 c2).
    w = vv ** 2
    A = np.stack([np.ones_like(yy), yy, yy ** 2], axis=1)
    lhs = A * w[:, None]
    coef, *_ = np.linalg.lstsq(lhs, np.log(vv) * w, rcond=None)
    if coef[2] >= 0:
        return math.nan
    return math.sqrt(-1.0 / (2.0 * coef[2]))


def find_peaks(img: ImageProfile, rel_threshold: float = 0.1) -> PeakReport:
    """Local maxima of |values| above rel_threshold * max.

    Locations are refined by 3-point parabolic interpolation and each
    peak gets a Gaussian width fitted on its half-max neighborhood.
    Peaks are sorted by |value| descending.
    """
    v = np.abs(np.asarray(img.values))
    y = np.asarray(img.grid)
    peaks: list[Peak] = []
    vmax = v.max() if v.size else 0.0
    if vmax == 0.0:
        return PeakReport(peaks=[], threshold=rel_threshold, method=img.method)
    thr = rel_threshold * vmax
    for k in range(len(v)):
        if v[k] < thr:
            continue
        left = v[k - 1] if k > 0 else -math.inf
        right = v[k + 1] if k < len(v) - 1 else -math.inf
        if v[k] > left and v[k] >= right:
            loc, val = _parabolic_refine(y, v, k)
            std = _gaussian_std_fit(y, v, k)
            peaks.append(Peak(location=loc, value=val, std=std))
    peaks.sort(key=lambda p: -abs(p.value))
    return PeakReport(peaks=peaks, threshold=rel_threshold, method=img.method)


def find_peaks_2d(values: np.ndarray, rel_threshold: float = 0.1) -> list[tuple[int, int]]:
    """Strict local maxima of |values| above rel_threshold * max (2-D grid)."""
    v = np.abs(values)
    vmax = v.max()
    if vmax == 0:
        return []
    thr = rel_threshold * vmax
    out = []
    interior = v[1:-1, 1:-1]
    neighbors = [v[1 + di:v.shape[0] - 1 + di, 1 + dj:v.shape[1] - 1 + dj]
                 for di in (-1, 0, 1) for dj in (-1, 0, 1)
                 if not (di == 0 and dj == 0)]
    mask = (interior >= thr)
    for nb in neighbors:
        mask &= interior > nb
    idx = np.argwhere(mask)
    for i, j in idx:
        out.append((int(i + 1), int(j + 1)))
    return out


def sign_at(img: ImageProfile, locations) -> list[int]:
    """Sign of the (real) image at the nearest grid point to each location."""
    v = np.asarray(img.values)
    if np.iscomplexobj(v):
        raise ValueError("sign_at needs a real image")
    y = np.asarray(img.grid)
    out = []
    for loc in locations:
        k = int(np.argmin(np.abs(y - loc)))
        out.append(int(np.sign(v[k])))
    return out


def cov_statistic(samples) -> float:
    """Coefficient of variation std/|mean| of complex samples.

    The std combines real and imaginary parts: sqrt(Var(Re) + Var(Im)).
    Returns +inf for zero mean.
    """
    s = np.asarray(samples, dtype=complex)
    if s.size < 2:
        raise ValueError("need at least 2 samples")
    mean = s.mean()
    var = s.real.var(ddof=1) + s.imag.var(ddof=1)
    if mean == 0:
        return math.inf
    return float(math.sqrt(var) / abs(mean))
