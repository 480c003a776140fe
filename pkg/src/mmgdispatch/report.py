"""Run reporting and artifact export.

Every artifact is a delimiter-separated numeric table with a header row,
floats fixed to six decimals, so identical runs serialize to identical
bytes.  Wall-clock timing is deliberately kept off disk (console only) to
preserve byte-identical re-runs.
"""

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .renewables import ScenarioSet
from .solver import LoopResult

FLOAT_FMT = "%.6f"


@dataclass
class RunReport:
    """Headline numbers of one scheme run."""

    case_name: str
    scheme: str
    seed: int
    config_hash: str
    microgrids: list                  # names
    revenue: np.ndarray               # per microgrid, yuan
    user_cost: np.ndarray
    ev_cost: np.ndarray
    theta: np.ndarray
    delta: np.ndarray
    f1: float
    f2: float
    f3: float
    f4: float
    alliance_cost: float
    grid_buy_kwh: float
    grid_sell_kwh: float
    internal_trade_kwh: float
    renewable_kwh: float
    renewable_consumed_kwh: float
    curtailment_rate_pct: float
    converged: bool
    iterations: int
    wall_seconds: float = 0.0

    @property
    def revenue_total(self):
        return float(np.sum(self.revenue))

    @property
    def user_cost_total(self):
        return float(np.sum(self.user_cost))

    @property
    def ev_cost_total(self):
        return float(np.sum(self.ev_cost))

    @property
    def satisfaction(self):
        return float(np.mean(self.theta + self.delta))

    def summary_lines(self):
        lines = [
            f"case: {self.case_name}",
            f"scheme: {self.scheme}",
            f"seed: {self.seed}",
            f"config_hash: {self.config_hash}",
            f"converged: {int(self.converged)}",
            f"iterations: {self.iterations}",
        ]
        for k, name in enumerate(self.microgrids):
            lines.append(
                f"{name}: revenue={self.revenue[k]:.6f} "
                f"user_cost={self.user_cost[k]:.6f} ev_cost={self.ev_cost[k]:.6f} "
                f"theta={self.theta[k]:.6f} delta={self.delta[k]:.6f}"
            )
        lines += [
            f"revenue_total: {self.revenue_total:.6f}",
            f"user_cost_total: {self.user_cost_total:.6f}",
            f"ev_cost_total: {self.ev_cost_total:.6f}",
            f"satisfaction: {self.satisfaction:.6f}",
            f"f1_grid: {self.f1:.6f}",
            f"f2_internal: {self.f2:.6f}",
            f"f3_generation: {self.f3:.6f}",
            f"f4_line: {self.f4:.6f}",
            f"alliance_cost: {self.alliance_cost:.6f}",
            f"grid_buy_kwh: {self.grid_buy_kwh:.6f}",
            f"grid_sell_kwh: {self.grid_sell_kwh:.6f}",
            f"internal_trade_kwh: {self.internal_trade_kwh:.6f}",
            f"renewable_kwh: {self.renewable_kwh:.6f}",
            f"renewable_consumed_kwh: {self.renewable_consumed_kwh:.6f}",
            f"curtailment_rate_pct: {self.curtailment_rate_pct:.6f}",
        ]
        return lines


def build_report(case, scheme: str, seed: int, result: LoopResult) -> RunReport:
    d = result.dispatch
    renewable_consumed = (d.renewable_kwh - d.curtailed_kwh
                          - float(d.grid_sell_kw.sum()))
    return RunReport(
        case_name=case.name,
        scheme=scheme,
        seed=seed,
        config_hash=case.config_hash(),
        microgrids=[mg["name"] for mg in case.microgrids],
        revenue=result.revenue,
        user_cost=result.user_cost,
        ev_cost=result.ev_cost,
        theta=result.theta,
        delta=result.delta,
        f1=d.grid_cost,
        f2=d.internal_cost,
        f3=d.generation_cost,
        f4=d.line_cost,
        alliance_cost=d.total_cost,
        grid_buy_kwh=float(d.grid_buy_kw.sum()),
        grid_sell_kwh=float(d.grid_sell_kw.sum()),
        internal_trade_kwh=d.internal_trade_kwh(),
        renewable_kwh=d.renewable_kwh,
        renewable_consumed_kwh=renewable_consumed,
        curtailment_rate_pct=d.curtailment_rate_pct,
        converged=result.state.converged,
        iterations=result.state.iterations,
        wall_seconds=result.wall_seconds,
    )


def _write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                FLOAT_FMT % v if isinstance(v, float) else v for v in row
            ])


def parse_table(path):
    """Read an exported table back: (header, float matrix)."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows) if rows else np.empty((0, len(header)))


def export_scenarios(sset: ScenarioSet, path):
    rows = []
    for s in range(len(sset)):
        for k in range(sset.n_microgrids):
            for t in range(24):
                rows.append((s, float(sset.probabilities[s]), k, t,
                             float(sset.values[s, k, 0, t]),
                             float(sset.values[s, k, 1, t]),
                             float(sset.values[s, k, 2, t])))
    _write_table(path, ["scenario", "probability", "microgrid", "hour",
                        "wt_kw", "pv_kw", "load_kw"], rows)


def export_results(report: RunReport, result: LoopResult, out_dir,
                   scenario_set: ScenarioSet = None):
    """Write every artifact table plus the structured summary document."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    if scenario_set is not None:
        paths["scenarios"] = os.path.join(out_dir, "scenarios.csv")
        export_scenarios(scenario_set, paths["scenarios"])

    rows = []
    for k, plan in enumerate(result.plans):
        for t in range(24):
            rows.append((k, t, float(plan.user_price[t]), float(plan.ev_price[t])))
    paths["tariffs"] = os.path.join(out_dir, "tariffs.csv")
    _write_table(paths["tariffs"], ["microgrid", "hour", "user_price", "ev_price"],
                 rows)

    rows = []
    for k, plan in enumerate(result.plans):
        for t in range(24):
            rows.append((k, t, float(plan.load.non_responsive[t]),
                         float(plan.load.responsive_base[t]),
                         float(plan.load.responsive[t])))
    paths["loads"] = os.path.join(out_dir, "loads.csv")
    _write_table(paths["loads"],
                 ["microgrid", "hour", "non_responsive_kw", "responsive_base_kw",
                  "responsive_kw"], rows)

    rows = []
    for k, schedules in enumerate(result.schedules or []):
        for s in schedules:
            for t, hour in enumerate(s.hours()):
                mode = int(s.charging[t]) - int(s.discharging[t])
                rows.append((k, s.ev_id, hour, float(s.power_kw[t]), mode,
                             float(s.soc[t + 1])))
    paths["ev_schedules"] = os.path.join(out_dir, "ev_schedules.csv")
    _write_table(paths["ev_schedules"],
                 ["microgrid", "ev_id", "hour", "power_kw", "mode", "soc"], rows)

    d = result.dispatch
    rows = []
    for t in range(24):
        for k in range(d.internal_buy_kw.shape[0]):
            rows.append((t, k, float(d.internal_buy_kw[k, t]),
                         float(d.internal_sell_kw[k, t]),
                         float(d.grid_buy_kw[t]), float(d.grid_sell_kw[t]),
                         float(d.curtailed_kw[k, t])))
    paths["dispatch"] = os.path.join(out_dir, "dispatch.csv")
    _write_table(paths["dispatch"],
                 ["hour", "microgrid", "internal_buy_kw", "internal_sell_kw",
                  "grid_buy_kw", "grid_sell_kw", "curtailed_kw"], rows)

    rows = []
    n = len(result.plans)
    for k in range(n):
        if result.allocation is not None:
            v_single = float(result.allocation.values[frozenset([k])])
            share = float(result.allocation.shapley[k])
        else:
            v_single = -float(result.cost_shares[k])
            share = v_single
        rows.append((k, v_single, share, float(result.cost_shares[k])))
    paths["allocation"] = os.path.join(out_dir, "allocation.csv")
    _write_table(paths["allocation"],
                 ["microgrid", "v_singleton", "shapley_share", "cost_share"], rows)

    rows = [(e, k, rev, cost, fit)
            for (e, k, rev, cost, fit) in result.state.trace]
    paths["convergence"] = os.path.join(out_dir, "convergence.csv")
    _write_table(paths["convergence"],
                 ["iteration", "microgrid", "best_revenue", "best_user_cost",
                  "ga_best_fitness"], rows)

    paths["summary"] = os.path.join(out_dir, "summary.txt")
    with open(paths["summary"], "w", encoding="utf-8") as fh:
        fh.write("\n".join(report.summary_lines()) + "\n")
    return paths
