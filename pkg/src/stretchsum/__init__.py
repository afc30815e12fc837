"""Large deviations of infinite weighted sums of stretched-exponential variables."""

from .dist import StretchedExpParams, TailEnvelope
from .errors import ConfigError, DomainError, NumericError, RegimeError, ResourceError
from .mc import RareEventEstimate, largest_jump_mc, naive_mc, stream_plan
from .theory import (
    BoundConfig,
    BoundReport,
    certified_lower_bound,
    certified_upper_bound,
    closed_form_upper_bound,
    predicted_log_prob,
    rate_function,
)
from .weights import WeightFamily, WeightVector, limit_sum, realize

__version__ = "0.1.0"
