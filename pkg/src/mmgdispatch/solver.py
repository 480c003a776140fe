"""Leader-side genetic search and the iterative bi-level procedure coupling
the pricing stage, alliance dispatch, and Shapley allocation.

One outer iteration runs a Gauss-Seidel sweep over microgrids: each
microgrid's GA population of candidate tariffs is evaluated with the other
microgrids frozen at their current best, then the whole system is
re-evaluated at the updated bests.  Best-so-far operator revenues are
retained, and the loop stops once neither the retained revenues nor the
user costs move by more than the convergence tolerance.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .alliance import (
    AllianceParams,
    CoalitionAllocation,
    DispatchSolution,
    all_coalition_values,
    alliance_dispatch,
    shapley_allocate,
)
from .errors import ParameterError
from .ev import HOURS, EvProfile, comprehensive_satisfaction
from .pricing import (
    FleetOptimizer,
    LoadProfile,
    ev_dynamic_tariff,
    follower_load_response,
    load_cost,
)
from .renewables import ScenarioSet


@dataclass
class GaConfig:
    """Genetic-algorithm and outer-loop parameters."""

    population: int = 40
    generations: int = 90
    mutation_rate: float = 0.04
    crossover_prob: float = 0.8
    convergence_eps: float = 0.01    # yuan
    seed: int = 0
    mutation_sigma_frac: float = 0.05    # of the per-hour band width

    def __post_init__(self):
        if self.population < 2:
            raise ParameterError("population must be at least 2")
        if not (0.0 <= self.mutation_rate <= 1.0 and 0.0 <= self.crossover_prob <= 1.0):
            raise ParameterError("rates must lie in [0, 1]")
        if self.convergence_eps <= 0.0:
            raise ParameterError("convergence_eps must be positive")
        if self.generations < 1:
            raise ParameterError("generations must be at least 1")


class GaPopulation:
    """Real-coded GA over 24-hour price vectors clamped to a band."""

    def __init__(self, band_low, band_high, cfg: GaConfig, rng):
        self.low = np.asarray(band_low, dtype=float)
        self.high = np.asarray(band_high, dtype=float)
        if np.any(self.low > self.high):
            raise ParameterError("band_low exceeds band_high")
        self.cfg = cfg
        self.rng = rng
        self.pop = rng.uniform(self.low, self.high,
                               (cfg.population, self.low.size))
        self.sigma = cfg.mutation_sigma_frac * (self.high - self.low)

    def best(self, fitness):
        return int(np.argmax(fitness))

    def step(self, fitness):
        """Produce the next generation: tournament selection (size 2),
        arithmetic crossover, per-gene Gaussian mutation, elitism of 1."""
        z, genes = self.pop.shape
        rng = self.rng
        elite = self.pop[int(np.argmax(fitness))].copy()
        new = np.empty_like(self.pop)
        new[0] = elite
        filled = 1
        while filled < z:
            picks = rng.integers(0, z, size=4)
            p1 = self.pop[picks[0] if fitness[picks[0]] >= fitness[picks[1]] else picks[1]]
            p2 = self.pop[picks[2] if fitness[picks[2]] >= fitness[picks[3]] else picks[3]]
            if rng.random() < self.cfg.crossover_prob:
                alpha = rng.random()
                c1 = alpha * p1 + (1.0 - alpha) * p2
                c2 = (1.0 - alpha) * p1 + alpha * p2
            else:
                c1, c2 = p1.copy(), p2.copy()
            for child in (c1, c2):
                if filled >= z:
                    break
                mutate = rng.random(genes) < self.cfg.mutation_rate
                noise = rng.normal(0.0, 1.0, genes) * self.sigma
                child = np.where(mutate, child + noise, child)
                new[filled] = np.clip(child, self.low, self.high)
                filled += 1
        self.pop = new


def ga_optimize(fitness, band_low, band_high, cfg: GaConfig, rng=None):
    """Maximize a deterministic fitness over banded 24-hour price vectors.

    Returns the best individual ever evaluated and the per-generation best
    fitness trace.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    ga = GaPopulation(band_low, band_high, cfg, rng)
    best_x = None
    best_f = -np.inf
    trace = []
    for _ in range(cfg.generations):
        fit = np.array([fitness(ind) for ind in ga.pop])
        k = ga.best(fit)
        trace.append(float(fit[k]))
        if fit[k] > best_f:
            best_f = float(fit[k])
            best_x = ga.pop[k].copy()
        ga.step(fit)
    return best_x, np.array(trace)


def expected_scenario_case(sset: ScenarioSet):
    """Probability-weighted sum of the scenario trajectories: one (K, 3, 24)
    array of expected wind, PV and load curves."""
    return np.tensordot(sset.probabilities, sset.values, axes=1)


# ---------------------------------------------------------------------------
# System context for the bi-level loop
# ---------------------------------------------------------------------------

@dataclass
class MicrogridDay:
    """One microgrid's inputs for the dispatch day."""

    wind_kw: np.ndarray
    pv_kw: np.ndarray
    load: LoadProfile
    band_low: np.ndarray
    band_high: np.ndarray
    fleet: list

    def __post_init__(self):
        self.wind_kw = np.asarray(self.wind_kw, dtype=float)
        self.pv_kw = np.asarray(self.pv_kw, dtype=float)
        self.band_low = np.asarray(self.band_low, dtype=float)
        self.band_high = np.asarray(self.band_high, dtype=float)
        for name in ("wind_kw", "pv_kw", "band_low", "band_high"):
            if getattr(self, name).shape != (HOURS,):
                raise ParameterError(f"{name} must have {HOURS} hourly entries")


@dataclass
class SystemDay:
    """Everything the bi-level loop needs for one day."""

    microgrids: list
    alliance: AllianceParams
    replacement_cost: float = 18000.0
    lifetime_throughput_kwh: float = 100000.0

    @property
    def n_microgrids(self):
        return len(self.microgrids)


@dataclass
class MgPlan:
    """Demand-side outcome of one microgrid under one tariff."""

    user_price: np.ndarray
    ev_price: np.ndarray
    load: LoadProfile
    charge_kw: np.ndarray
    discharge_kw: np.ndarray
    net_kw: np.ndarray
    user_cost: float            # follower objective value
    user_revenue: float
    ev_charge_revenue: float
    ev_discharge_cost: float
    controllable_actions: np.ndarray = None

    @property
    def demand_revenue(self):
        return (self.user_revenue + self.ev_charge_revenue
                - self.ev_discharge_cost)


class _MgContext:
    """Per-microgrid static machinery reused across candidate evaluations."""

    def __init__(self, mg: MicrogridDay, system: SystemDay, enable_tpm: bool,
                 follower=None):
        self.mg = mg
        self.enable_tpm = enable_tpm
        self.follower = follower
        controllable = [p for p in mg.fleet if p.controllable and enable_tpm]
        uncontrolled = [p for p in mg.fleet if not (p.controllable and enable_tpm)]
        self.opt = None
        self.opt_unc = None
        if controllable:
            self.opt = FleetOptimizer(controllable, system.replacement_cost,
                                      system.lifetime_throughput_kwh)
        if uncontrolled:
            self.opt_unc = FleetOptimizer(uncontrolled, system.replacement_cost,
                                          system.lifetime_throughput_kwh)
            self.unc_actions = self.opt_unc.reference_actions()
            self.unc_charge, self.unc_discharge = \
                self.opt_unc.aggregate_by_hour(self.unc_actions)
        else:
            self.unc_charge = np.zeros(HOURS)
            self.unc_discharge = np.zeros(HOURS)

    def evaluate(self, price):
        """Stage 1 + stage 2 demand response to a candidate user tariff."""
        mg = self.mg
        if self.follower is None:
            load = follower_load_response(price, mg.load)
        else:
            load = self.follower(price, mg.load, self.unc_charge)
        if self.enable_tpm:
            ev_price = ev_dynamic_tariff(price, mg.wind_kw, mg.pv_kw, load.total)
        else:
            ev_price = np.asarray(price, dtype=float).copy()
        dis_price = ev_price
        ceiling = 1.3 * np.asarray(price, dtype=float)

        charge = self.unc_charge.copy()
        discharge = self.unc_discharge.copy()
        actions = None
        if self.opt is not None:
            actions, _, _ = self.opt.solve(ev_price, dis_price, ceiling)
            c, d = self.opt.aggregate_by_hour(actions)
            charge += c
            discharge += d

        net = mg.wind_kw + mg.pv_kw - load.total - charge + discharge
        user_cost = load_cost(price, load)
        return MgPlan(
            user_price=np.asarray(price, dtype=float).copy(),
            ev_price=ev_price,
            load=load,
            charge_kw=charge,
            discharge_kw=discharge,
            net_kw=net,
            user_cost=user_cost,
            user_revenue=user_cost,
            ev_charge_revenue=float(np.sum(ev_price * charge)),
            ev_discharge_cost=float(np.sum(dis_price * discharge)),
            controllable_actions=actions,
        )


def _settle(net_kw, params: AllianceParams, wind_kw, pv_kw, cooperative):
    """Dispatch the system and split its cost over microgrids.

    Cooperative mode runs the full coalition machinery; otherwise every
    microgrid settles alone with the grid and bears its own cost.
    """
    k = net_kw.shape[0]
    if cooperative and k > 1:
        values = all_coalition_values(net_kw, params, wind_kw, pv_kw)
        shares = shapley_allocate(values, k)
        dispatch = alliance_dispatch(net_kw, params, wind_kw, pv_kw)
        allocation = CoalitionAllocation(values, shares)
        return dispatch, -shares, allocation
    solos = [
        alliance_dispatch(net_kw[i:i + 1], params, wind_kw[i:i + 1],
                          pv_kw[i:i + 1])
        for i in range(k)
    ]
    costs = np.array([s.total_cost for s in solos])
    dispatch = DispatchSolution(
        internal_buy_kw=np.zeros((k, HOURS)),
        internal_sell_kw=np.zeros((k, HOURS)),
        grid_buy_kw=np.sum([s.grid_buy_kw for s in solos], axis=0),
        grid_sell_kw=np.sum([s.grid_sell_kw for s in solos], axis=0),
        curtailed_kw=np.vstack([s.curtailed_kw for s in solos]),
        grid_cost=float(sum(s.grid_cost for s in solos)),
        internal_cost=0.0,
        generation_cost=float(sum(s.generation_cost for s in solos)),
        line_cost=float(sum(s.line_cost for s in solos)),
        net_kw=net_kw,
        renewable_kwh=float(sum(s.renewable_kwh for s in solos)),
    )
    return dispatch, costs, None


@dataclass
class LoopState:
    """Best-so-far bookkeeping of the outer loop."""

    iterations: int = 0
    converged: bool = False
    best_revenue: np.ndarray = None      # retained F_k per microgrid
    best_user_cost: np.ndarray = None    # companion F_L,k
    trace: list = field(default_factory=list)


@dataclass
class LoopResult:
    """Converged tariffs, dispatch and allocation plus reporting detail."""

    state: LoopState
    tariffs: list
    plans: list
    dispatch: DispatchSolution
    allocation: CoalitionAllocation
    cost_shares: np.ndarray
    revenue: np.ndarray
    user_cost: np.ndarray
    ev_cost: np.ndarray
    theta: np.ndarray
    delta: np.ndarray
    schedules: list = None        # per microgrid, EvSchedule in ev-id order
    wall_seconds: float = 0.0

    @property
    def satisfaction(self):
        return comprehensive_satisfaction(self.theta, self.delta)


def _materialize_schedules(ctx: _MgContext, plan: MgPlan):
    """All vehicle schedules of one microgrid in ev-id order."""
    out = {}
    if ctx.opt is not None and plan.controllable_actions is not None:
        for s in ctx.opt.schedules_from_actions(plan.controllable_actions):
            out[s.ev_id] = s
    if ctx.opt_unc is not None:
        for s in ctx.opt_unc.schedules_from_actions(ctx.unc_actions):
            out[s.ev_id] = s
    return [out[i] for i in sorted(out)]


def _consolidate(contexts, tariffs, system, cooperative):
    """Evaluate every microgrid at the given tariffs and settle the system."""
    plans = [ctx.evaluate(t) for ctx, t in zip(contexts, tariffs)]
    net = np.vstack([p.net_kw for p in plans])
    wind = np.vstack([mg.wind_kw for mg in system.microgrids])
    pv = np.vstack([mg.pv_kw for mg in system.microgrids])
    dispatch, cost_shares, allocation = _settle(net, system.alliance, wind, pv,
                                                cooperative)
    revenue = np.array([p.demand_revenue for p in plans]) - cost_shares
    user_cost = np.array([p.user_cost for p in plans])
    return plans, dispatch, cost_shares, allocation, revenue, user_cost


def _fleet_satisfaction(ctx: _MgContext, plan: MgPlan):
    """Fleet price and travel satisfaction for one microgrid."""
    costs = []
    f_mins = []
    f_maxs = []
    deltas = []
    ceiling = 1.3 * plan.user_price
    if ctx.opt is not None and plan.controllable_actions is not None:
        c, th, de, f_min, f_max = ctx.opt.evaluate_actions(
            plan.controllable_actions, plan.ev_price, plan.ev_price, ceiling)
        costs.append(c)
        f_mins.append(f_min)
        f_maxs.append(f_max)
        deltas.append(de)
    if ctx.opt_unc is not None:
        c, th, de, f_min, f_max = ctx.opt_unc.evaluate_actions(
            ctx.unc_actions, plan.ev_price, plan.ev_price, ceiling)
        costs.append(c)
        f_mins.append(f_min)
        f_maxs.append(f_max)
        deltas.append(de)
    if not costs:
        return 1.0, 1.0, 0.0
    cost = float(np.concatenate(costs).sum())
    f_min = float(np.concatenate(f_mins).sum())
    f_max = float(np.concatenate(f_maxs).sum())
    theta = float(np.clip(1.0 - abs(cost - f_min) / max(f_max - f_min, 1e-9),
                          0.0, 1.0))
    delta = float(np.mean(np.concatenate(deltas)))
    return theta, delta, cost


def tpm_alliance_loop(system: SystemDay, cfg: GaConfig, cooperative=True,
                      enable_tpm=True, follower=None) -> LoopResult:
    """Run the full iterative bi-level procedure to convergence.

    Non-convergence within the generation budget is reported on the
    returned state, not raised.
    """
    t_start = time.perf_counter()
    n = system.n_microgrids
    contexts = [_MgContext(mg, system, enable_tpm, follower)
                for mg in system.microgrids]
    seeds = np.random.SeedSequence(cfg.seed).spawn(n)
    gas = [
        GaPopulation(mg.band_low, mg.band_high, cfg, np.random.default_rng(s))
        for mg, s in zip(system.microgrids, seeds)
    ]
    # Neutral frozen tariffs until each GA produces its first best.
    tariffs = [0.5 * (mg.band_low + mg.band_high) for mg in system.microgrids]
    wind = np.vstack([mg.wind_kw for mg in system.microgrids])
    pv = np.vstack([mg.pv_kw for mg in system.microgrids])

    frozen_plans = [ctx.evaluate(t) for ctx, t in zip(contexts, tariffs)]
    state = LoopState()
    stored_rev = None
    stored_cost = None

    for e in range(1, cfg.generations + 1):
        ga_best = np.empty(n)
        for k in range(n):
            nets = [p.net_kw for p in frozen_plans]
            fitness = np.empty(cfg.population)
            plans_k = []
            for c, cand in enumerate(gas[k].pop):
                plan = contexts[k].evaluate(cand)
                nets[k] = plan.net_kw
                _, shares, _ = _settle(np.vstack(nets), system.alliance, wind,
                                       pv, cooperative)
                fitness[c] = plan.demand_revenue - shares[k]
                plans_k.append(plan)
            best = gas[k].best(fitness)
            ga_best[k] = fitness[best]
            tariffs[k] = gas[k].pop[best].copy()
            frozen_plans[k] = plans_k[best]
            gas[k].step(fitness)

        plans, dispatch, cost_shares, allocation, revenue, user_cost = \
            _consolidate(contexts, tariffs, system, cooperative)
        frozen_plans = plans

        if stored_rev is None:
            delta_rev = np.full(n, np.inf)
            delta_cost = np.full(n, np.inf)
            stored_rev = revenue.copy()
            stored_cost = user_cost.copy()
        else:
            keep_old = stored_rev > revenue
            new_rev = np.where(keep_old, stored_rev, revenue)
            new_cost = np.where(keep_old, stored_cost, user_cost)
            delta_rev = np.abs(new_rev - stored_rev)
            delta_cost = np.abs(new_cost - stored_cost)
            stored_rev, stored_cost = new_rev, new_cost

        for k in range(n):
            state.trace.append((e, k, float(stored_rev[k]), float(stored_cost[k]),
                                float(ga_best[k])))
        state.iterations = e
        if np.all(delta_rev < cfg.convergence_eps) and \
                np.all(delta_cost < cfg.convergence_eps):
            state.converged = True
            break

    state.best_revenue = stored_rev
    state.best_user_cost = stored_cost

    plans, dispatch, cost_shares, allocation, revenue, user_cost = \
        _consolidate(contexts, tariffs, system, cooperative)
    theta = np.empty(n)
    delta = np.empty(n)
    ev_cost = np.empty(n)
    for k in range(n):
        theta[k], delta[k], ev_cost[k] = _fleet_satisfaction(contexts[k], plans[k])
    return LoopResult(
        state=state,
        tariffs=[t.copy() for t in tariffs],
        plans=plans,
        dispatch=dispatch,
        allocation=allocation,
        cost_shares=cost_shares,
        revenue=revenue,
        user_cost=user_cost,
        ev_cost=ev_cost,
        theta=theta,
        delta=delta,
        schedules=[_materialize_schedules(c, p) for c, p in zip(contexts, plans)],
        wall_seconds=time.perf_counter() - t_start,
    )


def replay_final_tariffs(system: SystemDay, result: LoopResult,
                         cooperative=True, enable_tpm=True):
    """Re-run the demand side and settlement at the converged tariffs.

    Used by the fixed-point check: the replay must reproduce the reported
    revenues and user costs exactly.
    """
    contexts = [_MgContext(mg, system, enable_tpm) for mg in system.microgrids]
    _, _, _, _, revenue, user_cost = _consolidate(
        contexts, result.tariffs, system, cooperative)
    return revenue, user_cost


def static_evaluation(system: SystemDay, tariffs, cooperative=False):
    """No-DR evaluation at fixed prices: baseline loads, vehicles charge on
    arrival at the user tariff."""
    contexts = [_MgContext(mg, system, enable_tpm=False)
                for mg in system.microgrids]
    plans = []
    for ctx, price in zip(contexts, tariffs):
        mg = ctx.mg
        load = mg.load.copy()
        ev_price = np.asarray(price, dtype=float).copy()
        charge = ctx.unc_charge
        discharge = ctx.unc_discharge
        net = mg.wind_kw + mg.pv_kw - load.total - charge + discharge
        user_cost = load_cost(price, load)
        plans.append(MgPlan(
            user_price=ev_price.copy(), ev_price=ev_price, load=load,
            charge_kw=charge.copy(), discharge_kw=discharge.copy(), net_kw=net,
            user_cost=user_cost, user_revenue=user_cost,
            ev_charge_revenue=float(np.sum(ev_price * charge)),
            ev_discharge_cost=float(np.sum(ev_price * discharge)),
        ))
    net = np.vstack([p.net_kw for p in plans])
    wind = np.vstack([mg.wind_kw for mg in system.microgrids])
    pv = np.vstack([mg.pv_kw for mg in system.microgrids])
    dispatch, cost_shares, allocation = _settle(net, system.alliance, wind, pv,
                                                cooperative)
    revenue = np.array([p.demand_revenue for p in plans]) - cost_shares
    user_cost = np.array([p.user_cost for p in plans])
    theta = np.empty(len(plans))
    delta = np.empty(len(plans))
    ev_cost = np.empty(len(plans))
    for k, (ctx, plan) in enumerate(zip(contexts, plans)):
        theta[k], delta[k], ev_cost[k] = _fleet_satisfaction(contexts[k], plan)
    return LoopResult(
        state=LoopState(iterations=0, converged=True,
                        best_revenue=revenue.copy(),
                        best_user_cost=user_cost.copy()),
        tariffs=[np.asarray(t, dtype=float).copy() for t in tariffs],
        plans=plans,
        dispatch=dispatch,
        allocation=allocation,
        cost_shares=cost_shares,
        revenue=revenue,
        user_cost=user_cost,
        ev_cost=ev_cost,
        theta=theta,
        delta=delta,
        schedules=[_materialize_schedules(c, p) for c, p in zip(contexts, plans)],
    )