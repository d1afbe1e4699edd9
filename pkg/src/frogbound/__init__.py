"""frogbound: certified bounds on the critical drift of the frog model on
d-ary trees.

Pipeline: exact activation-count distributions (u_dist) feed an exactly
assembled generating polynomial (genfun), whose supremum below one is
certified with interval branch-and-bound (certify); searches over rational
drifts produce the bound tables (search); a Monte Carlo simulator (sim)
cross-validates the exact distributions and the dominance statements.
"""

__version__ = "0.1.0"

from .certify import Certificate, CertifyConfig, certify_sup_below_one, verify_unique_max
from .errors import (
    ArityMismatch,
    FrogboundError,
    NegativeExponent,
    OutOfRange,
    ResourceExhausted,
    SearchExhausted,
)
from .genfun import ExpPoly, build_g, f_value, g_derivative, g_value
from .params import (
    DriftParams,
    Interval,
    IntervalContext,
    Rational,
    derive_params,
    exp_enclosure,
)
from .search import (
    BoundResult,
    QCritResult,
    approx_bound,
    figure_rows,
    g_value_numeric,
    m_value,
    m_value_numeric,
    q_crit,
    rational_candidates,
    rigorous_bound,
)
from .sim import (
    InitMeasure,
    SimConfig,
    SimSummary,
    sample_u,
    simulate_fm,
    simulate_sfm,
)
from .u_dist import UPmf, u_cdf_dominates, u_pmf

__all__ = [
    "ArityMismatch",
    "BoundResult",
    "Certificate",
    "CertifyConfig",
    "DriftParams",
    "ExpPoly",
    "FrogboundError",
    "InitMeasure",
    "Interval",
    "IntervalContext",
    "NegativeExponent",
    "OutOfRange",
    "QCritResult",
    "Rational",
    "ResourceExhausted",
    "SearchExhausted",
    "SimConfig",
    "SimSummary",
    "UPmf",
    "approx_bound",
    "build_g",
    "certify_sup_below_one",
    "derive_params",
    "exp_enclosure",
    "f_value",
    "figure_rows",
    "g_derivative",
    "g_value",
    "g_value_numeric",
    "m_value",
    "m_value_numeric",
    "q_crit",
    "rational_candidates",
    "rigorous_bound",
    "sample_u",
    "simulate_fm",
    "simulate_sfm",
    "u_cdf_dominates",
    "u_pmf",
    "verify_unique_max",
    "__version__",
]
