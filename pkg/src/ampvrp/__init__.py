"""Multi-variant vehicle routing solver.

Construction by randomized constrained savings, improvement by phased local
search, and an adaptive memory loop that freezes vertex sequences shared by
elite solutions.  Supports capacities in two dimensions, hard and soft time
windows, heterogeneous fleets, multi-trip vehicles, per-location skill
requirements, split deliveries and time-dependent travel times.
"""

from .model import (
    Drive,
    FuelCostModel,
    Instance,
    Location,
    ObjectiveKind,
    PenaltyParams,
    Solution,
    TimeWindow,
    Vehicle,
    validate_instance,
)
from .timedep import TimeProfile, TravelTimeTensor, build_from_profiles, enforce_non_passing, lookup
from .evaluator import CostBreakdown, EvaluationError, arc_cost, evaluate, propagate_schedule, soft_window_penalty

__version__ = "0.1.0"
