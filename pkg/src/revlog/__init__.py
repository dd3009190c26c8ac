"""Risk-averse reverse-logistics network design.

Choose collection centers, a quality cut-off and per-node incentive prices
that maximize expected profit minus a CVaR penalty on scenario costs.
"""

from .choice import DemandTable, attraction_fraction, demand_split, demand_table
from .design import Design, DesignError, PriceVector, RiskParams
from .flows import FlowPlan, Infeasible, check_capacity, route_flows
from .instance import (
    Instance,
    InstanceError,
    InstanceSyntaxError,
    QualityLevel,
    ScenarioSpec,
    load_instance,
    parse_instance,
    realize_scenarios,
    reference_instance,
    serialize_instance,
)
from .risk import Evaluation, LossDistribution, cvar, evaluate, mean_risk_objective, scenario_loss
from .solver import Solution, SolverConfig, count_designs, enumerate_designs, optimize_prices, solve
from .stochastic import StochasticReport, compute_mrvss, expected_value_instance, mrvss_grid

__version__ = "0.1.0"
