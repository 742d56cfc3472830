"""Observation-driven sensor scheduling and remote estimation for correlated
Gaussian sources: policies, cost evaluation and piecewise-linear design.
"""

from .ccp import CcpConfig, CcpTrace, NotConverged, ccp_solve, grid_search_oracle, symmetric_linear_astar
from .cost import EvalConfig, EvalReport, SampleSet, evaluate_cost, jq
from .policies import (
    ChannelMessage,
    ConditionalMeanUnderMaxEstimator,
    DecorrelatingEstimator,
    DecorrelatingScheduler,
    LinearInducedScheduler,
    MaxScheduler,
    MeanEstimator,
    NearestNeighborScheduler,
    OpenLoopScheduler,
    PiecewiseLinearEstimator,
    SoftThresholdEstimator,
    soft_threshold_eta,
)
from .source import SourceModel, bivariate, eigendecompose, make_source, sample

__version__ = "0.1.0"
