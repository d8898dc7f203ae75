"""Studentized test of vanishing cross-loadings.

Null hypothesis: both off-diagonal coefficients of the 2x2 loading matrix
are zero, so the two observed components are driven by disjoint fBm
channels.  Under the null the rate-normalized cross-variation at t = 1 is
asymptotically centered mixed normal with conditional variance
(scale)^2 * integral (s11 s22)^2 ds; dividing by a block plug-in of that
integral and by the calibrated scale gives an asymptotically standard
normal statistic.  Supported regimes: H in (1/2, 3/4] (above the critical
index the limit is a non-Gaussian Rosenblatt difference).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .fbm import SUPERCRITICAL, SamplePath, as_hurst, _require_common_grid
from .stats import c_constant, cross_variation, rate_a_n

__all__ = [
    "TestResult",
    "UnsupportedRegimeError",
    "estimate_conditional_variance",
    "test_zero_cross",
]


class UnsupportedRegimeError(ValueError):
    """Raised for Hurst indices whose null limit is not Gaussian."""


@dataclass(frozen=True)
class TestResult:
    statistic: float | None
    reject: bool | None          # None = abstained (degenerate variance)
    level: float
    scale: float
    scale_form: str
    regime: str
    H: float
    h_estimated: bool
    variance_estimate: float
    degenerate: bool
    critical_value: float


def estimate_conditional_variance(x1: SamplePath, x2: SamplePath, n: int,
                                  L: int, H) -> tuple[float, bool]:
    """Block plug-in for integral (s11 s22)^2 ds.

    Splits the n increments of each component into L equal blocks; the
    block-local quadratic variation, normalized by n^{2H-1} and rescaled by
    L, estimates the squared loading on that block.  Returns
    (V_hat, degenerate) where degenerate marks a zero-variance block.
    """
    hp = as_hurst(H).require_long_memory()
    if L < 1 or n % L != 0:
        raise ValueError(f"block count {L} does not divide resolution {n}")
    d1 = x1.subsample(n).increments()
    d2 = x2.subsample(n).increments()
    q1 = (d1 ** 2).reshape(L, -1).sum(axis=1)
    q2 = (d2 ** 2).reshape(L, -1).sum(axis=1)
    scale = L * float(n) ** (2.0 * hp.H - 1.0)
    v1 = scale * q1
    v2 = scale * q2
    degenerate = bool(np.any(q1 == 0.0) or np.any(q2 == 0.0))
    vhat = float(np.mean(v1 * v2))
    return vhat, degenerate


def test_zero_cross(x1: SamplePath, x2: SamplePath, n: int, H,
                    level: float = 0.05, L: int | None = None,
                    scale_form: str = "sqrt",
                    h_estimated: bool = False) -> TestResult:
    """Two-sided test of zero cross-loadings at the given level.

    statistic = a_n J_n(1) / (scale * sqrt(V_hat)), with scale the
    calibrated second-order constant divided by 2 (``scale_form`` picks the
    normalization; "sqrt" is the form the Monte Carlo calibration selects).
    H is an input; pass ``h_estimated=True`` when it came from a plug-in
    estimate (the result records that the plug-in error is not corrected).
    """
    hp = as_hurst(H).require_long_memory()
    if hp.regime == SUPERCRITICAL:
        raise UnsupportedRegimeError(
            f"H={hp.H} > 3/4: null limit is a Rosenblatt difference, "
            "no Gaussian calibration available"
        )
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0,1), got {level}")
    _require_common_grid(x1, x2)
    if L is None:
        L = int(math.isqrt(n))
        while n % L != 0:
            L -= 1
    vhat, degenerate = estimate_conditional_variance(x1, x2, n, L, hp)
    scale = c_constant(hp, form=scale_form).value / 2.0
    crit = float(sps.norm.ppf(1.0 - level / 2.0))
    if degenerate or vhat <= 0.0:
        return TestResult(statistic=None, reject=None, level=level,
                          scale=scale, scale_form=scale_form,
                          regime=hp.regime, H=hp.H, h_estimated=h_estimated,
                          variance_estimate=vhat, degenerate=True,
                          critical_value=crit)
    jn = cross_variation(x1, x2, n, (x1.T,)).values[0]
    stat = rate_a_n(hp, n) * jn / (scale * math.sqrt(vhat))
    return TestResult(statistic=float(stat), reject=bool(abs(stat) > crit),
                      level=level, scale=scale, scale_form=scale_form,
                      regime=hp.regime, H=hp.H, h_estimated=h_estimated,
                      variance_estimate=vhat, degenerate=False,
                      critical_value=crit)
