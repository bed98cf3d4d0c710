"""Option values, equilibrium pricing and simulation for finite-horizon
price competition among capacity-one sellers of a perishable good."""

from .demand import DemandKind, DemandModel, make_bernoulli, make_explicit, make_poisson
from .equilibrium import (
    AtomStrategy,
    DuopolyMixedCdf,
    MixedStrategyCdf,
    StrategyProfile,
    SymmetricMixedCdf,
    all_at_reserve_profile,
    duopoly_binary_equilibrium,
    duopoly_general_cdf,
    equilibrium_profile,
    oligopoly_binary_candidate,
    oligopoly_G,
    oligopoly_general_cdf,
    sample_price,
    stationary_general_cdf,
    z_function,
)
from .errors import (
    ConditionsViolatedError,
    DegenerateDemandError,
    InternalConsistencyError,
    InvalidParameterError,
    ModelError,
    ModelPreconditionError,
    NoFixedPointError,
    WrongVariantError,
)
from .simulation import SimulationReport, effective_price_dispersion, equilibrium_profiles, simulate_market
from .valuation import (
    InfiniteHorizon,
    MarketParams,
    ValueTable,
    infinite_horizon,
    infinite_horizon_value,
    monopolist_value,
    option_value,
    reservation_price,
    value_table,
)
from .verification import DeviationReport, EpsilonCheck, check_epsilon_equilibrium, deviation_payoff

__version__ = "0.1.0"
