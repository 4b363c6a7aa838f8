"""Busy-period and loss-probability analysis of a finite-buffer M/GI/1 queue
with random message packetization."""

from .busy_period import (
    BusyPeriodCharacteristics,
    characteristics_table,
    fixed_characteristics,
    loss_probability,
    mixture_characteristics,
)
from .errors import (
    BracketError,
    ConfigurationError,
    DegenerateComparisonError,
    IllConditionedError,
    LossqError,
    RegimeError,
    RunawaySimulationError,
    TruncationError,
    UnsupportedOrderError,
    ValidationError,
)
from .packetization import PacketLaw, ZetaPmf, zeta_pmf
from .regime import Regime
from .service_models import ServiceDistribution, lst, lst_deriv, pi_probs, traffic_moments

__version__ = "0.1.0"
