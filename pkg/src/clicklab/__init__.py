"""Simulation lab for position-biased click features in search ranking."""
from .clicklog import ClickLog, DocumentStats, Record, aggregate, append_search
from .estimators import (
    FeatureKind, click_sensitivity, clipped_ipw_ctr, coec, ctr, empirical_ctr, ipw_coec, ipw_ctr, snips,
)
from .position import (
    PositionBiasCurve, PropensityVector, empirical_propensities, propensity_at, true_propensity_vector,
)
from .synthworld import GenConfig, World, generate_search_stream, generate_world, proxy_relevance_correlation

__version__ = "0.1.0"
