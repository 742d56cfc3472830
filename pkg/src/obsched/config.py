"""JSON experiment configuration shared by all CLI commands.

Every field is optional in the document; command-specific defaults (seeds,
sample counts, grids) are filled in by the command that reads them. Example::

    {
      "source": {"sigma1_sq": 5, "sigma2_sq": 7, "rho": 0.6},
      "policy": {"scheduler": "linear", "estimator": "linear", "a": "ccp"},
      "eval": {"method": "mc", "samples": 1000000, "seed": 2019},
      "out": "run.csv"
    }
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import policies as pol
from .ccp import CcpConfig, ccp_solve, symmetric_linear_astar
from .cost import EvalConfig
from .source import SourceModel, bivariate, eigendecompose, make_source

SCHEDULERS = ("max", "open-loop", "nearest-neighbor", "linear", "decorrelating")
ESTIMATORS = ("mean", "soft", "linear", "decorrelating", "cond-mean")


class ConfigError(ValueError):
    """Configuration document or flag combination that cannot be run."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SourceSpec(_Strict):
    """Either the bivariate triple or a full covariance matrix."""

    sigma1_sq: float = 1.0
    sigma2_sq: float = 1.0
    rho: float = 0.0
    cov: Optional[list[list[float]]] = None

    def build(self) -> SourceModel:
        if self.cov is not None:
            return make_source(np.array(self.cov, dtype=float))
        return bivariate(self.sigma1_sq, self.sigma2_sq, self.rho)


class PolicySpec(_Strict):
    scheduler: Literal[SCHEDULERS] = "max"
    estimator: Literal[ESTIMATORS] = "mean"
    # slopes for the linear pair: explicit, closed form (equal variances) or CCP
    a: Union[tuple[float, float], Literal["astar", "ccp"]] = "ccp"
    # representation functions used by the nearest-neighbor scheduler
    nn_eta: Literal["zero", "soft"] = "zero"


class EvalSpec(_Strict):
    method: Literal["mc", "quad"] = "mc"
    samples: Optional[int] = Field(default=None, ge=10_000)
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    order: int = Field(default=1024, ge=64)
    angles: int = Field(default=1 << 16, ge=1024)

    def resolve(self, samples: int, seed: int) -> EvalConfig:
        return EvalConfig(
            method=self.method,
            samples=self.samples if self.samples is not None else samples,
            seed=self.seed if self.seed is not None else seed,
            order=self.order,
            angles=self.angles,
        )


class ExperimentConfig(_Strict):
    source: SourceSpec = SourceSpec()
    policy: PolicySpec = PolicySpec()
    eval: EvalSpec = EvalSpec()
    out: Optional[str] = None

    # grids and solver settings, each used by the commands that need them
    rhos: Optional[list[float]] = None
    sigma1_grid: Optional[list[float]] = Field(default=None, min_length=1)
    sigma_sq: float = Field(default=1.0, gt=0)
    xi_max: float = Field(default=4.0, gt=0)
    points: int = Field(default=161, ge=2)
    a_range: tuple[float, float] = (0.0, 1.0)
    resolution: int = Field(default=200, ge=50)
    a0: tuple[float, float] = (0.0, 0.0)
    tol: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=500, ge=1)
    report_samples: int = Field(default=10_000_000, ge=10_000)
    report_seed: int = Field(default=2020, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _ranges(self):
        if self.a_range[0] >= self.a_range[1]:
            raise ValueError("a_range must be increasing")
        return self


def _set_path(doc: dict, path: str, value) -> None:
    *head, last = path.split(".")
    node = doc
    for key in head:
        node = node.setdefault(key, {})
    node[last] = value


def load_config(path: Optional[str], overrides: dict) -> ExperimentConfig:
    """Read the JSON document at ``path`` and apply dotted-path ``overrides``.

    ``None`` override values are skipped, so unset flags leave the file alone.
    """
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
    for key, value in overrides.items():
        if value is not None:
            _set_path(doc, key, value)
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _need_two(src: SourceModel, what: str) -> None:
    if src.dim != 2:
        raise ConfigError(f"{what} needs a two-sensor source")


def _equal_variances(src: SourceModel, what: str) -> float:
    _need_two(src, what)
    if not np.isclose(src.sigma1_sq, src.sigma2_sq, rtol=1e-12, atol=0.0):
        raise ConfigError(f"{what} needs equal variances")
    return src.sigma1_sq


def linear_slopes(spec: PolicySpec, src: SourceModel, evaluation: EvalConfig) -> tuple[float, float]:
    _need_two(src, "the linear pair")
    if spec.a == "astar":
        s2 = _equal_variances(src, "a = astar")
        a = symmetric_linear_astar(s2, src.rho)
        return a, a
    if spec.a == "ccp":
        tr = ccp_solve(src, CcpConfig(eval=evaluation), raise_on_failure=True)
        return float(tr.a[0]), float(tr.a[1])
    return spec.a


def build_pair(spec: PolicySpec, src: SourceModel, evaluation: EvalConfig):
    """Instantiate the (scheduler, estimator) pair named by ``spec``."""
    slopes = None
    if "linear" in (spec.scheduler, spec.estimator):
        slopes = linear_slopes(spec, src, evaluation)
    dec = eigendecompose(src) if "decorrelating" in (spec.scheduler, spec.estimator) else None

    if spec.scheduler == "max":
        sch = pol.MaxScheduler()
    elif spec.scheduler == "open-loop":
        sch = pol.OpenLoopScheduler.for_source(src)
    elif spec.scheduler == "linear":
        sch = pol.LinearInducedScheduler(slopes)
    elif spec.scheduler == "decorrelating":
        sch = pol.DecorrelatingScheduler(dec)
    else:
        _need_two(src, "nearest-neighbor scheduling")
        if spec.nn_eta == "zero":
            eta = lambda v: np.zeros_like(v)  # noqa: E731
        else:
            s2, rho = _equal_variances(src, "nn_eta = soft"), src.rho
            eta = lambda v: pol.soft_threshold_eta_vec(v, s2, rho)  # noqa: E731
        sch = pol.NearestNeighborScheduler(eta, eta)

    if spec.estimator == "mean":
        est = pol.MeanEstimator()
    elif spec.estimator == "soft":
        est = pol.SoftThresholdEstimator(_equal_variances(src, "soft-thresholding"), src.rho)
    elif spec.estimator == "linear":
        est = pol.PiecewiseLinearEstimator(slopes)
    elif spec.estimator == "decorrelating":
        est = pol.DecorrelatingEstimator(dec)
    else:
        _need_two(src, "conditional-mean estimation")
        est = pol.ConditionalMeanUnderMaxEstimator(src)
    return sch, est
