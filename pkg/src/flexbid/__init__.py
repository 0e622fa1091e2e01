"""Aggregation of time-flexible EV charging loads into day-ahead flexible orders."""

from .aggregation import (
    AggregatedFlexOffer,
    Alignment,
    aggregate_at,
    binary_aggregation,
    enumerate_binary_alignments,
    sa_baseline,
    sag_baseline,
    start_align,
)
from .core import (
    EvSession,
    FlexOffer,
    charging_duration,
    coefficient_of_variation,
    energy,
    rmse_to_target,
    session_to_flexoffer,
)
from .datagen import FleetConfig, generate_fleet, generate_sessions, sample_truncated_gaussian
from .heuristics import (
    MaggConfig,
    MaggResult,
    is_order_conforming,
    objective_energy,
    run_magg,
)
from .market import (
    DropoutReport,
    FlexibleOrder,
    PriceCurve,
    RegulationModel,
    SettlementReport,
    TradeReport,
    activate,
    afo_to_order,
    afo_to_order_flattened,
    dropout_analysis,
    evaluate,
    optimal_cost,
    plugin_cost,
    yearly_sweep,
)
from .oracle import (
    OracleBudgetExceeded,
    OracleResult,
    count_alignment_combinations,
    count_partitions,
    count_solution_space,
    solve_exact,
    stirling2,
)

__version__ = "0.1.0"
