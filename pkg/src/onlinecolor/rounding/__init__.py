"""Online rounding of bipartite fractional matchings under vertex arrivals."""
from .constants import ConstantC, default_constants, side_conditions, slack, solve_c
from .core import (HIGH, LOW, ArrivalTranscript, PickSchedule, RoundingError, RoundingState,
                   g_value, plan_arrival, process_arrival, second_pick_probability)
from .ensemble import DEFAULT_REPLICAS, EnsembleState, j_floor, schedule_p_ensemble
from .exact import DEFAULT_EXACT_CAP, ExactCapError, ExactDistribution, ExactRounder, schedule_p_exact
from .online import Backend, OnlineRounder, RoundingResult, round_online
