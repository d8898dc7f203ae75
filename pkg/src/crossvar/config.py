"""Experiment configuration: JSON schema, validation, coefficient builders.

Validation is fail-closed: unknown keys anywhere in the document are
errors, so a typo cannot silently change a Monte Carlo gate.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

from .young import (
    Coefficient,
    ConstantCoef,
    PathCoef,
    PolynomialCoef,
    SigmaSpec,
    TrigCoef,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "build_coefficient",
    "build_sigma",
    "config_digest",
    "DEFAULT_TOLERANCES",
]

EXPERIMENTS = (
    "theorem1",
    "theorem2",
    "dyadic_cauchy",
    "prop1",
    "lemma1_rates",
    "lemma2",
)

DEFAULT_TOLERANCES: dict[str, float] = {
    "mean_abs_error": 0.05,       # |mean - oracle| gate (theorem1)
    "mean_se_multiple": 4.0,      # centered-mean gate in SE units
    "skewness": 0.15,
    "excess_kurtosis": 0.30,
    "variance_ratio": 0.10,       # cross-n variance consistency (0.15 critical)
    "constant_match": 0.10,       # candidate-constant match window
    "exceedance_epsilon": 0.10,
    "cauchy_se_multiple": 2.0,
    "stability_se_multiple": 4.0,
    "terminal_kurtosis_min": 0.20,
    "slope_window": 0.15,
    "lemma2_abs_error": 1e-3,
}


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


_COEF_KEYS = {
    "constant": {"kind", "value"},
    "polynomial": {"kind", "coeffs"},
    "trig": {"kind", "form", "amplitude", "frequency", "phase"},
    "path": {"kind", "component", "transform", "scale"},
}


def build_coefficient(spec: Any, where: str = "coefficient") -> Coefficient:
    """Build a named coefficient from its JSON form.

    Accepted forms: a bare number (constant), or an object
    {"kind": "constant"|"polynomial"|"trig"|"path", ...}.
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return ConstantCoef(float(spec))
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected a number or an object, got {spec!r}")
    kind = spec.get("kind")
    if kind not in _COEF_KEYS:
        raise ConfigError(
            f"{where}: unknown coefficient kind {kind!r}; "
            f"expected one of {sorted(_COEF_KEYS)}"
        )
    _check_keys(spec, _COEF_KEYS[kind], where)
    if kind == "constant":
        return ConstantCoef(float(spec.get("value", 0.0)))
    if kind == "polynomial":
        coeffs = spec.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError(f"{where}: polynomial needs a nonempty 'coeffs' list")
        return PolynomialCoef(tuple(float(c) for c in coeffs))
    if kind == "trig":
        return TrigCoef(kind=spec.get("form", "cos"),
                        amplitude=float(spec.get("amplitude", 1.0)),
                        frequency=float(spec.get("frequency", 1.0)),
                        phase=float(spec.get("phase", 0.0)))
    return PathCoef(component=int(spec.get("component", 1)),
                    transform=spec.get("transform", "sin"),
                    scale=float(spec.get("scale", 1.0)))


_SIGMA_KEYS = {"s11", "s12", "s21", "s22", "alpha", "x0"}


def build_sigma(spec: dict) -> SigmaSpec:
    """Build the 2x2 coefficient spec from its JSON form.

    {"s11": ..., "s12": ..., "s21": ..., "s22": ..., "alpha": float,
     "x0": [x1, x2]}; omitted entries default to 0 and x0 to the origin.
    """
    if not isinstance(spec, dict):
        raise ConfigError(f"sigma: expected an object, got {spec!r}")
    _check_keys(spec, _SIGMA_KEYS, "sigma")
    if "alpha" not in spec:
        raise ConfigError("sigma: missing required key 'alpha'")
    entries = tuple(
        tuple(build_coefficient(spec.get(f"s{i}{j}", 0.0), f"sigma.s{i}{j}")
              for j in (1, 2))
        for i in (1, 2)
    )
    x0 = spec.get("x0", [0.0, 0.0])
    if not (isinstance(x0, list) and len(x0) == 2):
        raise ConfigError("sigma.x0 must be a 2-element list")
    return SigmaSpec(entries=entries, alpha=float(spec["alpha"]),
                     x0=(float(x0[0]), float(x0[1])))


_WEIGHT_KEYS = {"kind", "value", "coeffs", "form", "amplitude", "frequency",
                "phase", "component", "transform", "scale", "holder_exponent"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (picklable, JSON-convertible)."""

    experiment: str
    H: float
    replications: int
    master_seed: int
    n_grid: tuple[int, ...]
    t_grid: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    sigma: dict | None = None            # JSON form; built lazily per worker
    weight: dict | None = None           # prop1 weight u, JSON form
    oversampling: int = 8
    log_base: float = math.e
    cell_index: int | None = None        # lemma1_rates: cell k (default n)
    lemma2: dict | None = None           # lemma2: g/h descriptors
    tolerances: dict[str, float] = field(default_factory=dict)

    def tol(self, name: str) -> float:
        if name in self.tolerances:
            return float(self.tolerances[name])
        return DEFAULT_TOLERANCES[name]

    def sigma_spec(self) -> SigmaSpec:
        if self.sigma is None:
            raise ConfigError(f"experiment {self.experiment} requires 'sigma'")
        return build_sigma(self.sigma)

    def weight_coefficient(self) -> tuple[Coefficient, float]:
        if self.weight is None:
            raise ConfigError("experiment prop1 requires 'weight'")
        w = dict(self.weight)
        _check_keys(w, _WEIGHT_KEYS, "weight")
        exponent = float(w.pop("holder_exponent", 0.0))
        if exponent <= 0.5:
            raise ConfigError(
                f"weight.holder_exponent must exceed 1/2, got {exponent}"
            )
        return build_coefficient(w, "weight"), exponent

    def to_json_dict(self) -> dict:
        out: dict[str, Any] = {
            "experiment": self.experiment,
            "H": self.H,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "n_grid": list(self.n_grid),
            "t_grid": list(self.t_grid),
            "oversampling": self.oversampling,
            "log_base": self.log_base,
        }
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if self.weight is not None:
            out["weight"] = self.weight
        if self.cell_index is not None:
            out["cell_index"] = self.cell_index
        if self.lemma2 is not None:
            out["lemma2"] = self.lemma2
        if self.tolerances:
            out["tolerances"] = self.tolerances
        return out


_TOP_KEYS = {
    "experiment", "H", "replications", "master_seed", "n_grid", "t_grid",
    "sigma", "weight", "oversampling", "log_base", "cell_index", "lemma2",
    "tolerances",
}

_LEMMA2_KEYS = {"g", "h", "gamma", "t", "monte_carlo"}


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a parsed JSON document and freeze it into a config."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "config")
    for key in ("experiment", "H", "replications", "master_seed", "n_grid"):
        if key not in doc:
            raise ConfigError(f"config: missing required key '{key}'")
    exp = doc["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {exp!r}; expected one of {EXPERIMENTS}"
        )
    H = float(doc["H"])
    if not (0.0 < H < 1.0):
        raise ConfigError(f"H must lie in (0,1), got {H}")
    reps = int(doc["replications"])
    if reps < 2:
        raise ConfigError(f"replications must be >= 2, got {reps}")
    n_grid = doc["n_grid"]
    if not (isinstance(n_grid, list) and n_grid
            and all(isinstance(n, int) and n >= 2 for n in n_grid)):
        raise ConfigError("n_grid must be a nonempty list of integers >= 2")
    n_grid = tuple(sorted(n_grid))
    m = int(doc.get("oversampling", 8))
    if m < 1:
        raise ConfigError(f"oversampling must be >= 1, got {m}")
    fine = m * n_grid[-1]
    for n in n_grid:
        if fine % n != 0:
            raise ConfigError(
                f"n_grid entry {n} does not divide the fine resolution {fine}"
            )
    t_grid = doc.get("t_grid", [0.25, 0.5, 0.75, 1.0])
    if not (isinstance(t_grid, list) and t_grid
            and all(0.0 <= float(t) <= 1.0 for t in t_grid)):
        raise ConfigError("t_grid must be a nonempty list of times in [0,1]")
    if doc.get("lemma2") is not None:
        _check_keys(doc["lemma2"], _LEMMA2_KEYS, "lemma2")
    tol = doc.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ConfigError("tolerances must be an object")
    unknown_tol = set(tol) - set(DEFAULT_TOLERANCES)
    if unknown_tol:
        raise ConfigError(f"unknown tolerance name(s) {sorted(unknown_tol)}")
    cfg = ExperimentConfig(
        experiment=exp,
        H=H,
        replications=reps,
        master_seed=int(doc["master_seed"]),
        n_grid=n_grid,
        t_grid=tuple(float(t) for t in t_grid),
        sigma=doc.get("sigma"),
        weight=doc.get("weight"),
        oversampling=m,
        log_base=float(doc.get("log_base", math.e)),
        cell_index=doc.get("cell_index"),
        lemma2=doc.get("lemma2"),
        tolerances={k: float(v) for k, v in tol.items()},
    )
    # materialize sigma/weight once so schema errors surface at parse time
    if cfg.sigma is not None:
        cfg.sigma_spec()
    if cfg.weight is not None:
        cfg.weight_coefficient()
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)


def config_digest(cfg: ExperimentConfig) -> str:
    """Content digest: changes iff the effective config content changes."""
    payload = json.dumps(cfg.to_json_dict(), sort_keys=True,
                         separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()
