from .kernels import BACKEND
from .scheduler import (
    CellResult,
    CellSchedule,
    NoFeasiblePlan,
    PlanResult,
    ScheduleEntry,
    cell_scheduling_at_v,
    initial_speed_bound,
    plan_velocity_and_schedule,
    probe_speed,
)
from .timing import YieldRecord, horizontal_time, ride_time, update_yield_info, vertical_time

__all__ = [
    "BACKEND", "CellResult", "CellSchedule", "NoFeasiblePlan", "PlanResult", "ScheduleEntry",
    "YieldRecord", "cell_scheduling_at_v", "horizontal_time", "initial_speed_bound",
    "plan_velocity_and_schedule", "probe_speed", "ride_time", "update_yield_info", "vertical_time",
]
