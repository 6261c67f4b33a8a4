from .capacity import (
    ah_optimal,
    ah_rate,
    audit_curve,
    blahut_arimoto,
    capacity_curve,
    cf_optimal,
    cf_rate,
    chf_rate,
    cutset_rate,
    theorem1_capacity,
)
from .channel import (
    DiscreteRelayChannel,
    GaussianRelaySpec,
    StateChannel,
    load_channel,
    load_gaussian,
    load_state_channel,
    validate,
)
from .codec import build_codebook, haf_decode, simulate_haf
from .schemas import Pmf, RateCurve, RatePoint, SimReport, TestChannel

__all__ = [
    "DiscreteRelayChannel",
    "GaussianRelaySpec",
    "Pmf",
    "RateCurve",
    "RatePoint",
    "SimReport",
    "StateChannel",
    "TestChannel",
    "ah_optimal",
    "ah_rate",
    "audit_curve",
    "blahut_arimoto",
    "build_codebook",
    "capacity_curve",
    "cf_optimal",
    "cf_rate",
    "chf_rate",
    "cutset_rate",
    "haf_decode",
    "load_channel",
    "load_gaussian",
    "load_state_channel",
    "simulate_haf",
    "theorem1_capacity",
    "validate",
]
