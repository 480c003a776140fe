"""Scheme and method orchestration for the comparison studies.

Schemes vary two switches: whether microgrids trade with each other, and
whether the two-stage pricing mechanism drives the demand side.  Scheme 4
additionally freezes prices at scheme 1's outcome with no demand response
at all.  Methods 2 to 4 are the alternative scheduling baselines: an
aggregated demand side smoothing the load shape, and two single-microgrid
vehicle-scheduling variants.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .casefile import CaseFile, build_system, case_scenarios
from .errors import InfeasibleError, ParameterError
from .ev import HOURS
from .pricing import (
    LoadProfile,
    ev_dynamic_tariff,
    follower_load_response,
    load_cost,
)
from .report import build_report
from .solver import (
    LoopResult,
    MgPlan,
    SystemDay,
    _MgContext,
    _materialize_schedules,
    _settle,
    _fleet_satisfaction,
    static_evaluation,
    tpm_alliance_loop,
)

SCHEME_LABELS = {
    1: "scheme1_tpm_alliance",
    2: "scheme2_alliance_only",
    3: "scheme3_tpm_only",
    4: "scheme4_fixed_no_dr",
}


def run_scheme(case: CaseFile, scheme: int, seed: int, scenario_set=None,
               scheme1_result: LoopResult = None):
    """Run one scheme and return (report, result, system, scenarios)."""
    if scheme not in SCHEME_LABELS:
        raise ParameterError(f"unknown scheme {scheme}; expected 1..4")
    system, sset = build_system(case, seed, scenario_set)
    cfg = case.ga_config(seed)
    if scheme == 1:
        result = tpm_alliance_loop(system, cfg, cooperative=True, enable_tpm=True)
    elif scheme == 2:
        result = tpm_alliance_loop(system, cfg, cooperative=True, enable_tpm=False)
    elif scheme == 3:
        result = tpm_alliance_loop(system, cfg, cooperative=False, enable_tpm=True)
    else:
        if scheme1_result is None:
            scheme1_result = tpm_alliance_loop(system, cfg, cooperative=True,
                                               enable_tpm=True)
        result = static_evaluation(system, scheme1_result.tariffs,
                                   cooperative=False)
    report = build_report(case, SCHEME_LABELS[scheme], seed, result)
    return report, result, system, sset


def compare_schemes(case: CaseFile, seed: int):
    """All four schemes on one scenario draw; scheme 4 reuses scheme 1's
    converged tariffs."""
    sset = case_scenarios(case, seed)
    reports = {}
    results = {}
    r1, res1, _, _ = run_scheme(case, 1, seed, sset)
    reports[1], results[1] = r1, res1
    for scheme in (2, 3):
        reports[scheme], results[scheme], _, _ = run_scheme(case, scheme, seed, sset)
    reports[4], results[4], _, _ = run_scheme(case, 4, seed, sset,
                                              scheme1_result=res1)
    return reports, results, sset


# ---------------------------------------------------------------------------
# Method 2: aggregated demand side smoothing cost and load shape
# ---------------------------------------------------------------------------

def smoothing_load_response(prices, profile: LoadProfile, fixed_kw=None):
    """Responsive plan minimizing equally weighted, range-normalized bill
    and peak-to-valley mean-square deviation of the total load.

    Normalization uses the payoff table of the two single-objective optima;
    a degenerate range drops its term.
    """
    prices = np.asarray(prices, dtype=float)
    fixed = np.zeros(HOURS) if fixed_kw is None else np.asarray(fixed_kw, float)
    base_fixed = profile.non_responsive + fixed
    free = np.nonzero(profile.participation == 1)[0]
    out = profile.copy()
    out.responsive = profile.responsive_base.copy()
    if free.size == 0:
        return out

    target = float(profile.responsive_base[free].sum())
    lo = profile.lower[free]
    hi = profile.upper[free]

    def total(al_free):
        total_load = base_fixed + out.responsive_base
        total_load = total_load.copy()
        total_load[free] = base_fixed[free] + al_free
        return total_load

    def cost_of(al_free):
        return float(np.sum(prices * total(al_free)))

    def msd_of(al_free):
        load = total(al_free)
        return float(np.mean((load - load.mean()) ** 2))

    cost_plan = follower_load_response(prices, profile)
    cost_min = float(np.sum(prices * (base_fixed + cost_plan.responsive)))

    cons = {"type": "eq", "fun": lambda x: np.sum(x) - target}
    bounds = list(zip(lo, hi))
    x0 = profile.responsive_base[free]
    msd_sol = optimize.minimize(msd_of, x0, bounds=bounds, constraints=[cons],
                                method="SLSQP",
                                options={"maxiter": 200, "ftol": 1e-10})
    msd_min = float(msd_sol.fun)
    cost_max = cost_of(msd_sol.x)
    msd_max = msd_of(cost_plan.responsive[free])
    cost_range = max(cost_max - cost_min, 1e-9)
    msd_range = max(msd_max - msd_min, 1e-9)

    def combined(al_free):
        return (0.5 * (cost_of(al_free) - cost_min) / cost_range
                + 0.5 * (msd_of(al_free) - msd_min) / msd_range)

    sol = optimize.minimize(combined, x0, bounds=bounds, constraints=[cons],
                            method="SLSQP",
                            options={"maxiter": 200, "ftol": 1e-10})
    out.responsive[free] = np.clip(sol.x, lo, hi)
    # Repair any equality drift from the numeric solver.
    drift = target - float(out.responsive[free].sum())
    if abs(drift) > 1e-9:
        room = hi - out.responsive[free] if drift > 0 else out.responsive[free] - lo
        weights = room / max(room.sum(), 1e-12)
        out.responsive[free] += drift * weights
    return out


# ---------------------------------------------------------------------------
# Method 3: vehicles minimize cost plus grid-exchange smoothing
# ---------------------------------------------------------------------------

def _cost_smoothing_actions(profile, ev_price, dis_price, wear, g_kw, mu):
    """Scalar DP: minimize electricity cost + mu * added squared grid
    exchange, subject to the usual SOC and departure constraints."""
    L = profile.window_length
    hours = profile.window_hours
    dc, dd = profile.charge_step, profile.discharge_step
    p = profile.p_max_kw
    states = {(0, 0): 0.0}
    parents = []
    for t in range(L):
        h = hours[t]
        g = g_kw[h]
        new = {}
        back = {}
        for (a, b), cost in states.items():
            soc = profile.soc_arrival + a * dc - b * dd
            moves = [((a, b), cost, 0)]
            if soc + dc <= profile.soc_max + 1e-9:
                inc = p * (ev_price[h] + wear) + mu * ((g + p) ** 2 - g * g)
                moves.append(((a + 1, b), cost + inc, 1))
            if soc - dd >= profile.soc_min - 1e-9:
                inc = p * (wear - dis_price[h]) + mu * ((g - p) ** 2 - g * g)
                moves.append(((a, b + 1), cost + inc, 2))
            for key, c, act in moves:
                if key not in new or c < new[key]:
                    new[key] = c
                    back[key] = ((a, b), act)
        states = new
        parents.append(back)

    feasible = {
        key: c for key, c in states.items()
        if profile.soc_arrival + key[0] * dc - key[1] * dd
        >= profile.soc_target - 1e-9
    }
    if not feasible:
        raise InfeasibleError(
            f"ev {profile.ev_id} cannot reach its departure SOC",
            ev_id=profile.ev_id)
    key = min(feasible, key=lambda s: (feasible[s], s))
    actions = np.zeros(L, dtype=np.int8)
    for t in range(L - 1, -1, -1):
        key, act = parents[t][key]
        actions[t] = act
    return actions


def _single_mg_system(system: SystemDay, index: int) -> SystemDay:
    return SystemDay(
        microgrids=[system.microgrids[index]],
        alliance=system.alliance,
        replacement_cost=system.replacement_cost,
        lifetime_throughput_kwh=system.lifetime_throughput_kwh,
    )


def _evaluate_fixed_demand(system: SystemDay, plans, cooperative):
    net = np.vstack([p.net_kw for p in plans])
    wind = np.vstack([mg.wind_kw for mg in system.microgrids])
    pv = np.vstack([mg.pv_kw for mg in system.microgrids])
    dispatch, cost_shares, allocation = _settle(net, system.alliance, wind, pv,
                                                cooperative)
    revenue = np.array([p.demand_revenue for p in plans]) - cost_shares
    user_cost = np.array([p.user_cost for p in plans])
    return dispatch, cost_shares, allocation, revenue, user_cost


def _method3(system: SystemDay):
    """Single microgrid; known user load; dynamic vehicle tariff; vehicles
    minimize cost plus squared-grid-exchange growth, scheduled in id order."""
    solo = _single_mg_system(system, 0)
    mg = solo.microgrids[0]
    ctx = _MgContext(mg, solo, enable_tpm=True)
    price = 0.5 * (mg.band_low + mg.band_high)
    load = mg.load.copy()
    ev_price = ev_dynamic_tariff(price, mg.wind_kw, mg.pv_kw, load.total)
    wear = solo.replacement_cost / solo.lifetime_throughput_kwh

    charge = ctx.unc_charge.copy()
    discharge = ctx.unc_discharge.copy()
    g = load.total + charge - discharge - mg.wind_kw - mg.pv_kw
    mu = float(np.mean(ev_price)) / max(2.0 * float(np.mean(np.abs(g))), 1e-9)

    actions = None
    if ctx.opt is not None:
        rows = []
        for i, prof in enumerate(ctx.opt.profiles):
            acts = _cost_smoothing_actions(prof, ev_price, ev_price, wear, g, mu)
            padded = np.zeros(ctx.opt.l_max, dtype=np.int8)
            padded[:acts.size] = acts
            rows.append(padded)
            for t, h in enumerate(prof.window_hours):
                if acts[t] == 1:
                    g[h] += prof.p_max_kw
                elif acts[t] == 2:
                    g[h] -= prof.p_max_kw
        actions = np.vstack(rows)
        c, d = ctx.opt.aggregate_by_hour(actions)
        charge += c
        discharge += d

    user_cost = load_cost(price, load)
    plan = MgPlan(
        user_price=price.copy(), ev_price=ev_price, load=load,
        charge_kw=charge, discharge_kw=discharge,
        net_kw=mg.wind_kw + mg.pv_kw - load.total - charge + discharge,
        user_cost=user_cost, user_revenue=user_cost,
        ev_charge_revenue=float(np.sum(ev_price * charge)),
        ev_discharge_cost=float(np.sum(ev_price * discharge)),
        controllable_actions=actions,
    )
    dispatch, cost_shares, allocation, revenue, user_cost_arr = \
        _evaluate_fixed_demand(solo, [plan], cooperative=False)
    theta, delta, ev_cost = _fleet_satisfaction(ctx, plan)
    return _method_result(solo, plan, ctx, dispatch, cost_shares, allocation,
                          revenue, user_cost_arr, theta, delta, ev_cost)


def _method4(system: SystemDay):
    """Single microgrid; vehicles maximize travel-plus-price satisfaction at
    the flat user tariff (no dynamic signal, no user coupling)."""
    solo = _single_mg_system(system, 0)
    mg = solo.microgrids[0]
    ctx = _MgContext(mg, solo, enable_tpm=True)
    price = 0.5 * (mg.band_low + mg.band_high)
    load = mg.load.copy()
    ev_price = price.copy()
    ceiling = 1.3 * price

    charge = ctx.unc_charge.copy()
    discharge = ctx.unc_discharge.copy()
    actions = None
    if ctx.opt is not None:
        actions, _, _ = ctx.opt.solve(ev_price, ev_price, ceiling)
        c, d = ctx.opt.aggregate_by_hour(actions)
        charge += c
        discharge += d
    user_cost = load_cost(price, load)
    plan = MgPlan(
        user_price=price.copy(), ev_price=ev_price, load=load,
        charge_kw=charge, discharge_kw=discharge,
        net_kw=mg.wind_kw + mg.pv_kw - load.total - charge + discharge,
        user_cost=user_cost, user_revenue=user_cost,
        ev_charge_revenue=float(np.sum(ev_price * charge)),
        ev_discharge_cost=float(np.sum(ev_price * discharge)),
        controllable_actions=actions,
    )
    dispatch, cost_shares, allocation, revenue, user_cost_arr = \
        _evaluate_fixed_demand(solo, [plan], cooperative=False)
    theta, delta, ev_cost = _fleet_satisfaction(ctx, plan)
    return _method_result(solo, plan, ctx, dispatch, cost_shares, allocation,
                          revenue, user_cost_arr, theta, delta, ev_cost)


def _method_result(system, plan, ctx, dispatch, cost_shares, allocation,
                   revenue, user_cost, theta, delta, ev_cost):
    from .solver import LoopState
    return LoopResult(
        state=LoopState(iterations=0, converged=True,
                        best_revenue=revenue.copy(),
                        best_user_cost=user_cost.copy()),
        tariffs=[plan.user_price.copy()],
        plans=[plan],
        dispatch=dispatch,
        allocation=allocation,
        cost_shares=cost_shares,
        revenue=revenue,
        user_cost=user_cost,
        ev_cost=np.array([ev_cost]),
        theta=np.array([theta]),
        delta=np.array([delta]),
        schedules=[_materialize_schedules(ctx, plan)],
    )


@dataclass
class MethodRow:
    """One row of the method-comparison table."""

    method: int
    label: str
    load_side_cost: float
    system_cost: float
    grid_buy_kwh: float
    grid_sell_kwh: float
    curtailment_rate_pct: float
    internal_trade_kwh: float


def compare_methods(case: CaseFile, seed: int):
    """Methods 1-4 on one scenario draw; methods 3-4 run the first
    microgrid standing alone."""
    sset = case_scenarios(case, seed)
    system, _ = build_system(case, seed, sset)
    cfg = case.ga_config(seed)
    rows = []
    results = {}

    res1 = tpm_alliance_loop(system, cfg, cooperative=True, enable_tpm=True)
    results[1] = res1
    rows.append(_method_row(1, "proposed_tpm_alliance", res1))

    res2 = tpm_alliance_loop(system, cfg, cooperative=True, enable_tpm=False,
                             follower=smoothing_load_response)
    results[2] = res2
    rows.append(_method_row(2, "aggregated_demand_side", res2))

    res3 = _method3(system)
    results[3] = res3
    rows.append(_method_row(3, "single_mg_dynamic_tariff", res3))

    res4 = _method4(system)
    results[4] = res4
    rows.append(_method_row(4, "single_mg_satisfaction_only", res4))
    return rows, results, sset


def _method_row(method, label, result: LoopResult) -> MethodRow:
    d = result.dispatch
    return MethodRow(
        method=method,
        label=label,
        load_side_cost=float(np.sum(result.user_cost) + np.sum(result.ev_cost)),
        system_cost=d.total_cost,
        grid_buy_kwh=float(d.grid_buy_kw.sum()),
        grid_sell_kwh=float(d.grid_sell_kw.sum()),
        curtailment_rate_pct=d.curtailment_rate_pct,
        internal_trade_kwh=d.internal_trade_kwh(),
    )
