"""Implied probability-weighting functions and fear/greed distortion indices.

A subjective law ``F_s`` and an objective (benchmark) law ``F_R`` induce the
weighting ``w(u) = F_s(F_R^{-1}(u))`` on objective probabilities ``u``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .distfit import DistributionFit, NormalParams, Params, normal_cdf, normal_quantile
from .errors import CoverageError, DomainError
from .market_data import format_number

DEFAULT_GRID_SIZE = 999

FitLike = Union[DistributionFit, NormalParams, Params]


def default_grid(size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """``size`` equally spaced interior points ``k/(size+1)``; 999 gives 0.001..0.999."""
    return np.arange(1, size + 1) / (size + 1)


@dataclass(frozen=True)
class Bands:
    fear_hi: float = 0.10
    greed_lo: float = 0.90
    mid_lo: float = 0.30
    mid_hi: float = 0.70


@dataclass(frozen=True)
class PwfCurve:
    grid: np.ndarray
    w: np.ndarray
    subjective: Optional[DistributionFit] = None
    objective: Optional[DistributionFit] = None

    def with_anchors(self) -> tuple[np.ndarray, np.ndarray]:
        """Grid and curve with exact (0, 0) and (1, 1) appended for plotting."""
        return np.concatenate([[0.0], self.grid, [1.0]]), np.concatenate([[0.0], self.w, [1.0]])

    def to_csv(self) -> str:
        u, w = self.with_anchors()
        buf = io.StringIO()
        buf.write("u,w,identity\n")
        for a, b in zip(u, w):
            buf.write(f"{format_number(a)},{format_number(b)},{format_number(a)}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class DistortionMetrics:
    """Band indices of the distortion ``d(u) = w(u) - u``.

    ``fear`` is the largest excess weight on lower-tail (loss) probabilities.
    ``greed`` is the largest excess weight on upper-tail (gain) probabilities,
    measured on the decumulative side, ``(1 - w) - (1 - u) = -d(u)``.
    ``mid_underweight`` is the smallest ``d(u)`` over the middle band and
    ``sup_distortion`` the largest ``|d(u)|`` anywhere.
    """

    fear: float
    greed: float
    mid_underweight: float
    sup_distortion: float

    def to_dict(self) -> dict:
        return {
            "fear": self.fear,
            "greed": self.greed,
            "mid_underweight": self.mid_underweight,
            "sup_distortion": self.sup_distortion,
        }


def _params(f: FitLike):
    return f.params if isinstance(f, DistributionFit) else f


def gaussian_pwf(u, mu_r: float, sigma_r: float, mu_s: float, sigma_s: float) -> np.ndarray:
    """Closed form for two Gaussian laws: ``Phi((mu_r + sigma_r Phi^-1(u) - mu_s) / sigma_s)``."""
    return normal_cdf(mu_r + sigma_r * normal_quantile(u), mu_s, sigma_s)


def implied_pwf(subjective: FitLike, objective: FitLike, grid=None) -> PwfCurve:
    """Compose the subjective CDF with the objective quantile function on ``grid``.

    Either law may be Normal or NIG; the default grid is ``default_grid()``.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-d array")
    if np.any((grid <= 0) | (grid >= 1)):
        raise DomainError("grid values must lie strictly inside (0, 1)")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    ps, pr = _params(subjective), _params(objective)
    w = np.asarray(ps.cdf(pr.quantile(grid)), dtype=np.float64)
    w = np.clip(np.maximum.accumulate(w), 0.0, 1.0)
    sub = subjective if isinstance(subjective, DistributionFit) else None
    obj = objective if isinstance(objective, DistributionFit) else None
    return PwfCurve(grid, w, sub, obj)


def distortion_metrics(curve: PwfCurve, bands: Bands = Bands()) -> DistortionMetrics:
    u, w = curve.grid, curve.w
    if u.size < 99:
        raise CoverageError(f"grid has {u.size} points; at least 99 needed")
    if u[0] > 0.005:
        raise CoverageError(f"grid misses the lower band (0, 0.005]: starts at {u[0]}")
    if u[-1] < 0.995:
        raise CoverageError(f"grid misses the upper band [0.995, 1): ends at {u[-1]}")
    d = w - u
    fear_band = u <= bands.fear_hi
    greed_band = u >= bands.greed_lo
    mid_band = (u > bands.mid_lo) & (u < bands.mid_hi)
    for name, mask in (("fear", fear_band), ("greed", greed_band), ("mid", mid_band)):
        if not mask.any():
            raise CoverageError(f"grid has no points in the {name} band")
    return DistortionMetrics(
        fear=float(d[fear_band].max()),
        greed=float((-d[greed_band]).max()),
        mid_underweight=float(d[mid_band].min()),
        sup_distortion=float(np.abs(d).max()),
    )
