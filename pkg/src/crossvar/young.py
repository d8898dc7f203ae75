"""Discrete Young integration and simulation of the two-component model

    X_t(i) = x_i + int_0^t s(i,1) dB1 + int_0^t s(i,2) dB2,   i = 1, 2,

driven by a bivariate fractional Brownian motion with H > 1/2.  Integrals
are left-endpoint Riemann-Stieltjes sums on a fine grid (oversampling
factor m relative to the statistic resolution); the choice of endpoint
only moves remainders of the size controlled by ``lemma1_error``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .fbm import (
    HurstParams,
    SamplePath,
    as_hurst,
    generate_fbm_path,
    _require_common_grid,
)

__all__ = [
    "young_constant",
    "young_integrate",
    "young_remainder_check",
    "RemainderReport",
    "Coefficient",
    "ConstantCoef",
    "PolynomialCoef",
    "TrigCoef",
    "PathCoef",
    "SigmaSpec",
    "AssumptionError",
    "ModelPath",
    "simulate_X",
    "lemma1_error",
    "Lemma1Errors",
]


def young_constant(alpha: float, gamma: float) -> float:
    """The constant 1/2 sum_{n>=1} 2^{-n(alpha+gamma-1)} of the sewing bound.

    Closed form 1 / (2 (2^{alpha+gamma-1} - 1)); finite iff alpha+gamma > 1.
    """
    s = alpha + gamma - 1.0
    if s <= 0.0:
        raise ValueError(
            f"alpha + gamma = {alpha + gamma} <= 1: the series diverges"
        )
    return 1.0 / (2.0 * (2.0 ** s - 1.0))


def young_integrate(f: SamplePath, g: SamplePath) -> SamplePath:
    """Cumulative left-point sum  out[k] = sum_{j<k} f(t_j) (g(t_{j+1}) - g(t_j)).

    Both paths must live on the same grid; out[0] = 0.
    """
    _require_common_grid(f, g)
    out = np.empty(f.grid.size)
    out[0] = 0.0
    np.cumsum(f.values[:-1] * np.diff(g.values), out=out[1:])
    return g.with_values(out, "derived:young-integral")


@dataclass(frozen=True)
class RemainderReport:
    lhs: float
    rhs: float
    ratio: float
    a: float
    b: float
    alpha: float
    gamma: float


def young_remainder_check(f: SamplePath, g: SamplePath, a: float, b: float,
                          alpha: float, gamma: float,
                          f_norm: float | None = None,
                          g_norm: float | None = None) -> RemainderReport:
    """Compare |int_a^b (f - f(a)) dg| against the sewing bound
    C_{alpha,gamma} |f|_alpha |g|_gamma (b-a)^{alpha+gamma}.

    ``a`` and ``b`` must be grid points.  Hoelder norms default to the
    empirical (grid) norms; pass analytic values to tighten the check.
    Returns the two sides and their ratio.
    """
    from .fbm import holder_norm

    _require_common_grid(f, g)
    C = young_constant(alpha, gamma)
    dt = f.dt
    ia = int(round(a / dt))
    ib = int(round(b / dt))
    if not (0 <= ia < ib <= f.n_intervals):
        raise ValueError(f"need grid points a < b inside [0,T], got ({a}, {b})")
    if abs(ia * dt - a) > 1e-9 * max(dt, 1.0) or abs(ib * dt - b) > 1e-9 * max(dt, 1.0):
        raise ValueError(f"({a}, {b}) are not grid points at spacing {dt}")
    fv = f.values[ia:ib]
    dg = np.diff(g.values[ia:ib + 1])
    lhs = abs(float(np.sum((fv - f.values[ia]) * dg)))
    fn = holder_norm(f, alpha) if f_norm is None else f_norm
    gn = holder_norm(g, gamma) if g_norm is None else g_norm
    rhs = C * fn * gn * (b - a) ** (alpha + gamma)
    ratio = 0.0 if lhs == 0.0 else (math.inf if rhs == 0.0 else lhs / rhs)
    return RemainderReport(lhs=lhs, rhs=rhs, ratio=ratio, a=a, b=b,
                           alpha=alpha, gamma=gamma)


# ---------------------------------------------------------------------------
# coefficient processes
# ---------------------------------------------------------------------------

class Coefficient:
    """A coefficient process evaluated on a grid.

    Subclasses implement ``sample(tgrid, drivers)`` where ``drivers`` is the
    pair of driving path value arrays (used only by path functionals, which
    read the driver at the current grid point, never ahead of it).
    """

    def sample(self, tgrid: np.ndarray, drivers=None) -> np.ndarray:
        raise NotImplementedError

    def is_deterministic(self) -> bool:
        return True


@dataclass(frozen=True)
class ConstantCoef(Coefficient):
    value: float

    def sample(self, tgrid, drivers=None):
        return np.full(tgrid.shape, float(self.value))


@dataclass(frozen=True)
class PolynomialCoef(Coefficient):
    """coeffs[0] + coeffs[1] t + coeffs[2] t^2 + ..."""

    coeffs: tuple[float, ...]

    def sample(self, tgrid, drivers=None):
        return np.polynomial.polynomial.polyval(tgrid, np.asarray(self.coeffs))


@dataclass(frozen=True)
class TrigCoef(Coefficient):
    """amplitude * {cos|sin}(frequency * t + phase)."""

    kind: str = "cos"
    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ValueError(f"unknown trig kind {self.kind!r}")

    def sample(self, tgrid, drivers=None):
        fn = np.cos if self.kind == "cos" else np.sin
        return self.amplitude * fn(self.frequency * tgrid + self.phase)


_PATH_TRANSFORMS = {
    "identity": lambda x: x,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
}


@dataclass(frozen=True)
class PathCoef(Coefficient):
    """scale * transform(driver value at the current grid point).

    Non-anticipating by construction: the value at t_k depends on the
    driving path only through its value at t_k.
    """

    component: int = 1
    transform: str = "sin"
    scale: float = 1.0

    def __post_init__(self):
        if self.component not in (1, 2):
            raise ValueError(f"driver component must be 1 or 2, got {self.component}")
        if self.transform not in _PATH_TRANSFORMS:
            raise ValueError(f"unknown path transform {self.transform!r}")

    def sample(self, tgrid, drivers=None):
        if drivers is None:
            raise ValueError("path-functional coefficient needs the driving pair")
        return self.scale * _PATH_TRANSFORMS[self.transform](drivers[self.component - 1])

    def is_deterministic(self):
        return False


class AssumptionError(ValueError):
    """Raised when (alpha, H) violate the regularity window for the model."""


@dataclass(frozen=True)
class SigmaSpec:
    """The 2x2 coefficient process: entries[i][j] multiplies dB(j+1) in
    component i+1, together with the declared Hoelder exponent and the
    start point.
    """

    entries: tuple[tuple[Coefficient, Coefficient], tuple[Coefficient, Coefficient]]
    alpha: float
    x0: tuple[float, float] = (0.0, 0.0)

    def check_assumption(self, H) -> None:
        """The exponent window alpha in (1/4 + H/2, H) for Hurst index H."""
        h = as_hurst(H).require_long_memory().H
        lo = 0.25 + h / 2.0
        if not (lo < self.alpha < h):
            raise AssumptionError(
                f"declared exponent alpha={self.alpha} outside ({lo}, {h}) for H={h}"
            )

    def is_deterministic(self) -> bool:
        return all(c.is_deterministic() for row in self.entries for c in row)

    def is_diagonal(self) -> bool:
        def _zero(c: Coefficient) -> bool:
            return isinstance(c, ConstantCoef) and c.value == 0.0
        return _zero(self.entries[0][1]) and _zero(self.entries[1][0])

    def sample_entry(self, i: int, j: int, tgrid: np.ndarray, drivers=None) -> np.ndarray:
        return self.entries[i - 1][j - 1].sample(tgrid, drivers)


def identity_sigma(alpha: float = 0.62, x0=(0.0, 0.0)) -> SigmaSpec:
    one, zero = ConstantCoef(1.0), ConstantCoef(0.0)
    return SigmaSpec(entries=((one, zero), (zero, one)), alpha=alpha, x0=tuple(x0))


@dataclass(frozen=True)
class ModelPath:
    """Simulated model pair together with its drivers and coefficients."""

    x1: SamplePath
    x2: SamplePath
    b1: SamplePath
    b2: SamplePath
    sigma: SigmaSpec
    oversampling: int


def simulate_X(sigma: SigmaSpec, b1: SamplePath, b2: SamplePath, H,
               oversampling: int = 8) -> ModelPath:
    """Build both components by left-point Young sums on the drivers' grid.

    The drivers must already be sampled at the fine resolution m * n for
    every statistic resolution n used downstream; statistics then read the
    components at multiples of 1/n by subsampling.
    """
    sigma.check_assumption(H)
    _require_common_grid(b1, b2)
    drivers = (b1.values, b2.values)
    tgrid = b1.grid
    comps = []
    for i in (1, 2):
        s1 = sigma.sample_entry(i, 1, tgrid, drivers)
        s2 = sigma.sample_entry(i, 2, tgrid, drivers)
        for name, arr in ((f"s{i}1", s1), (f"s{i}2", s2)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"coefficient {name} produced non-finite values")
        xi = (sigma.x0[i - 1]
              + young_integrate(b1.with_values(s1, "coefficient"), b1).values
              + young_integrate(b2.with_values(s2, "coefficient"), b2).values)
        path = SamplePath(tgrid, xi, replace(b1.meta, component=i,
                                             generator="derived:model"))
        comps.append(path)
    return ModelPath(x1=comps[0], x2=comps[1], b1=b1, b2=b2,
                     sigma=sigma, oversampling=oversampling)


@dataclass(frozen=True)
class Lemma1Errors:
    """Monte Carlo L2 sizes of one-cell integrals at resolution n:
    ``e_centered`` for the integrand minus its right-endpoint value,
    ``e_full`` for the integrand itself."""

    e_centered: float
    e_full: float
    H: float
    n: int
    k: int
    oversampling: int
    replications: int


def lemma1_error(coef, H, n: int, k: int, oversampling: int = 8,
                 replications: int = 200, master_seed: int = 0,
                 component: int = 1) -> Lemma1Errors:
    """L2-norm estimates of int_{(k-1)/n}^{k/n} (s - s(k/n)) dB and of
    int_{(k-1)/n}^{k/n} s dB, proxied on the m-times-oversampled grid.

    ``coef`` is a deterministic time function (callable or Coefficient).
    Expected decay: the centered integral like n^{-2 alpha}, the full one
    like n^{-H}.
    """
    hp = as_hurst(H).require_long_memory()
    if oversampling < 4:
        raise ValueError(
            f"oversampling {oversampling} < 4: fine-grid proxy too coarse"
        )
    if not (1 <= k <= n):
        raise ValueError(f"cell index k={k} outside 1..{n}")
    m = int(oversampling)
    Nf = m * int(n)
    lo = (k - 1) * m
    tj = np.arange(lo, lo + m, dtype=float) / Nf
    if isinstance(coef, Coefficient):
        if not coef.is_deterministic():
            raise ValueError("lemma1_error needs a deterministic coefficient")
        sig = coef.sample(tj)
        sig_right = float(coef.sample(np.array([k / n]))[0])
    else:
        sig = np.asarray([coef(t) for t in tj], dtype=float)
        sig_right = float(coef(k / n))
    acc_c = []
    acc_f = []
    for r in range(replications):
        b = generate_fbm_path(hp, Nf, 1.0, master_seed, component=component,
                              replicate=r)
        dB = b.increments()[lo:lo + m]
        acc_c.append(float(np.sum((sig - sig_right) * dB)) ** 2)
        acc_f.append(float(np.sum(sig * dB)) ** 2)
    e1 = math.sqrt(math.fsum(acc_c) / replications)
    e2 = math.sqrt(math.fsum(acc_f) / replications)
    return Lemma1Errors(e_centered=e1, e_full=e2, H=hp.H, n=int(n), k=int(k),
                        oversampling=m, replications=replications)
