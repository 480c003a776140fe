"""Day-ahead dispatch simulator for a multi-microgrid cooperative alliance
with electric-vehicle fleets and a two-stage pricing mechanism."""

from .alliance import (
    AllianceParams,
    CoalitionAllocation,
    DispatchSolution,
    all_coalition_values,
    alliance_dispatch,
    allocate_alliance_cost,
    coalition_value,
    shapley_allocate,
)
from .casefile import CaseFile, build_system, case_scenarios, load_case, parse_case
from .errors import (
    InfeasibleError,
    MmgError,
    ParameterError,
    SocBoundsError,
    ValidationError,
)
from .ev import (
    BatteryParams,
    EvBehaviorModel,
    EvProfile,
    EvSchedule,
    SatisfactionBounds,
    battery_degradation_cost,
    comprehensive_satisfaction,
    immediate_charge_schedule,
    latest_charge_schedule,
    price_satisfaction,
    reference_schedules,
    sample_fleet,
    schedule_energy_cost,
    schedule_total_cost,
    soc_transition,
    travel_contribution,
    travel_satisfaction,
)
from .pricing import (
    FleetOptimizer,
    LoadProfile,
    TariffSchedule,
    ev_dynamic_tariff,
    ev_satisfaction_bounds,
    follower_load_response,
    leader_fitness,
    load_cost,
    optimize_ev_schedule,
    optimize_fleet_schedules,
    tariff_impact_factor,
)
from .renewables import (
    ForecastErrorModel,
    PvParams,
    ScenarioSet,
    WindParams,
    build_joint_scenarios,
    generate_forecast_scenarios,
    lhs_sample,
    normal_error_model,
    pv_max_power,
    reduce_scenarios,
    scenario_distance,
    weibull_pdf,
    wind_error_model,
    wind_power_from_speed,
)
from .report import RunReport, build_report, export_results, parse_table
from .schemes import compare_methods, compare_schemes, run_scheme
from .solver import (
    GaConfig,
    LoopResult,
    LoopState,
    MicrogridDay,
    SystemDay,
    expected_scenario_case,
    ga_optimize,
    replay_final_tariffs,
    static_evaluation,
    tpm_alliance_loop,
)

__version__ = "0.1.0"
