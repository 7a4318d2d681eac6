"""Arbitrage, superhedging and martingale-measure witnesses on finite scenario
trees carrying several, possibly non-dominated, priors."""

from .arbitrage import (
    approximate_class,
    check_na,
    check_sna,
    find_witness_measure,
    validate_approximate,
)
from .market import (
    Claim,
    Market,
    Measure,
    ModelError,
    Order,
    PriorSet,
    ScenarioTree,
    StaticOption,
    Strategy,
    polar_set,
    portfolio_value,
    qs_compare,
    weight_W,
)
from .superhedge import (
    duality_check,
    sensitivity_report,
    superhedge_per_prior,
    superhedge_qs,
)

__version__ = "0.1.0"
