"""Cooperative-alliance dispatch and Shapley cost allocation.

Each hour, member deficits are matched against member surpluses first
(inter-microgrid transfers are settled at one internal price, so they cancel
at alliance level and beat any grid round trip), and the alliance's net
residual is settled with the distribution grid over the tie line.  Surplus
beyond the tie-line limit, or not worth selling, is curtailed; deficits
beyond the limit are infeasible.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InfeasibleError, ParameterError

HOURS = 24


@dataclass
class AllianceParams:
    """Prices and limits for alliance dispatch.

    Per-hour price vectors; the grid sale price is conventionally 0.7 times
    the purchase price, and internal trades must price strictly between the
    grid sale and purchase prices to keep internal matching worthwhile.
    """

    grid_buy_price: np.ndarray       # alliance buys from grid, yuan/kWh
    grid_sell_price: np.ndarray      # alliance sells to grid
    internal_price: np.ndarray       # microgrid-to-microgrid transfers
    wind_cost: float = 0.376         # generation cost, yuan/kWh
    pv_cost: float = 0.428
    line_om_cost: float = 0.17       # tie-line O&M per kWh transferred
    line_min_kw: float = 0.0
    line_max_kw: float = 1e9
    transfer_max_kw: float = 450.0   # per-microgrid internal trade cap
    n_microgrids: int = 3

    def __post_init__(self):
        self.grid_buy_price = np.asarray(self.grid_buy_price, dtype=float)
        self.grid_sell_price = np.asarray(self.grid_sell_price, dtype=float)
        self.internal_price = np.asarray(self.internal_price, dtype=float)
        for name, arr in (("grid_buy_price", self.grid_buy_price),
                          ("grid_sell_price", self.grid_sell_price),
                          ("internal_price", self.internal_price)):
            if arr.shape != (HOURS,):
                raise ParameterError(f"{name} must have {HOURS} hourly entries")
        if np.any(self.grid_sell_price >= self.internal_price) or \
                np.any(self.internal_price >= self.grid_buy_price):
            raise ParameterError(
                "prices must satisfy grid_sell < internal < grid_buy each hour"
            )
        if self.line_min_kw < 0.0 or self.line_max_kw < self.line_min_kw:
            raise ParameterError("need 0 <= line_min_kw <= line_max_kw")
        if self.transfer_max_kw < 0.0:
            raise ParameterError("transfer_max_kw must be non-negative")
        if self.n_microgrids < 1:
            raise ParameterError("need at least one microgrid")


@dataclass
class DispatchSolution:
    """Hourly flows and the cost decomposition of one dispatch."""

    internal_buy_kw: np.ndarray      # (K, 24) power bought from other members
    internal_sell_kw: np.ndarray     # (K, 24)
    grid_buy_kw: np.ndarray          # (24,) alliance-level
    grid_sell_kw: np.ndarray         # (24,)
    curtailed_kw: np.ndarray         # (K, 24) unsalvageable surplus
    grid_cost: float                 # F1
    internal_cost: float             # F2 (zero by construction)
    generation_cost: float           # F3
    line_cost: float                 # F4
    net_kw: np.ndarray = None        # (K, 24) input positions, for checks
    renewable_kwh: float = 0.0

    @property
    def total_cost(self):
        return (self.grid_cost + self.internal_cost + self.generation_cost
                + self.line_cost)

    @property
    def curtailed_kwh(self):
        return float(self.curtailed_kw.sum())

    @property
    def curtailment_rate_pct(self):
        if self.renewable_kwh <= 0.0:
            return 0.0
        return 100.0 * self.curtailed_kwh / self.renewable_kwh

    def balance_residual(self):
        """Hourly alliance power-balance residual, kW (should be ~0)."""
        net_total = self.net_kw.sum(axis=0)
        return net_total - (self.grid_sell_kw - self.grid_buy_kw
                            + self.curtailed_kw.sum(axis=0))

    def internal_trade_kwh(self):
        return float(self.internal_sell_kw.sum())


def alliance_dispatch(net_kw, params: AllianceParams, wind_kw=None,
                      pv_kw=None) -> DispatchSolution:
    """Merit-order settlement of hourly member positions.

    ``net_kw`` has shape (K, 24): positive entries are member surpluses
    after all demand-side plans, negative entries deficits.  Generation
    series, when given, feed the generation-cost term and the curtailment
    rate.
    """
    net = np.atleast_2d(np.asarray(net_kw, dtype=float))
    if not np.all(np.isfinite(net)):
        raise ParameterError("net positions must be finite")
    k, n_hours = net.shape
    if n_hours != HOURS:
        raise ParameterError(f"net positions must cover {HOURS} hours")

    surplus = np.clip(net, 0.0, None)
    deficit = np.clip(-net, 0.0, None)
    sell_cap = np.minimum(surplus, params.transfer_max_kw)
    buy_cap = np.minimum(deficit, params.transfer_max_kw)
    volume = np.minimum(sell_cap.sum(axis=0), buy_cap.sum(axis=0))

    # Transfers split proportionally to capped positions (deterministic
    # tie-break that removes any member-order dependence).
    tot_sell = sell_cap.sum(axis=0)
    tot_buy = buy_cap.sum(axis=0)
    internal_sell = sell_cap * (volume / np.where(tot_sell > 0.0, tot_sell, 1.0))
    internal_buy = buy_cap * (volume / np.where(tot_buy > 0.0, tot_buy, 1.0))

    net_total = net.sum(axis=0)
    grid_buy = np.clip(-net_total, 0.0, None)
    bad = grid_buy > params.line_max_kw + 1e-9
    if bad.any():
        t = int(np.argmax(bad))
        raise InfeasibleError(
            f"hour {t}: deficit {grid_buy[t]:.1f} kW exceeds tie-line limit "
            f"{params.line_max_kw:.1f} kW", hour=t)
    low = (grid_buy > 0.0) & (grid_buy < params.line_min_kw - 1e-9)
    if low.any():
        t = int(np.argmax(low))
        raise InfeasibleError(
            f"hour {t}: deficit {grid_buy[t]:.1f} kW below tie-line minimum "
            f"{params.line_min_kw:.1f} kW", hour=t)
    # Selling only pays if the price beats the tie-line O&M cost.
    sell_raw = np.clip(net_total, 0.0, None)
    grid_sell = np.minimum(sell_raw, params.line_max_kw)
    grid_sell[(params.grid_sell_price <= params.line_om_cost)
              | (grid_sell < params.line_min_kw)] = 0.0
    curtail_total = sell_raw - grid_sell

    # Attribute curtailment to members in proportion to residual surplus.
    residual_surplus = surplus - internal_sell
    res_sum = residual_surplus.sum(axis=0)
    curtailed = residual_surplus * (curtail_total / np.where(res_sum > 0.0,
                                                             res_sum, 1.0))

    f1 = float(np.sum(grid_buy * params.grid_buy_price
                      - grid_sell * params.grid_sell_price))
    f2 = float(np.sum(internal_buy * params.internal_price)
               - np.sum(internal_sell * params.internal_price))
    f4 = params.line_om_cost * float(np.sum(grid_buy + grid_sell))
    renewable = 0.0
    f3 = 0.0
    if wind_kw is not None:
        wind_kw = np.atleast_2d(np.asarray(wind_kw, dtype=float))
        f3 += params.wind_cost * float(wind_kw.sum())
        renewable += float(wind_kw.sum())
    if pv_kw is not None:
        pv_kw = np.atleast_2d(np.asarray(pv_kw, dtype=float))
        f3 += params.pv_cost * float(pv_kw.sum())
        renewable += float(pv_kw.sum())

    return DispatchSolution(
        internal_buy_kw=internal_buy,
        internal_sell_kw=internal_sell,
        grid_buy_kw=grid_buy,
        grid_sell_kw=grid_sell,
        curtailed_kw=curtailed,
        grid_cost=f1,
        internal_cost=f2,
        generation_cost=f3,
        line_cost=f4,
        net_kw=net,
        renewable_kwh=renewable,
    )


def coalition_value(members, net_kw, params: AllianceParams, wind_kw=None,
                    pv_kw=None) -> float:
    """Characteristic value of a coalition: the negated operating cost of
    dispatching its members alone (benefit convention, v(empty) = 0)."""
    members = sorted(members)
    if not members:
        return 0.0
    net = np.asarray(net_kw, dtype=float)[members]
    wind = None if wind_kw is None else np.asarray(wind_kw, dtype=float)[members]
    pv = None if pv_kw is None else np.asarray(pv_kw, dtype=float)[members]
    sol = alliance_dispatch(net, params, wind, pv)
    return -sol.total_cost


def all_coalition_values(net_kw, params: AllianceParams, wind_kw=None,
                         pv_kw=None):
    """v(S) for every nonempty subset of microgrids."""
    n = np.asarray(net_kw).shape[0]
    values = {}
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            values[frozenset(subset)] = coalition_value(
                subset, net_kw, params, wind_kw, pv_kw
            )
    return values


def shapley_allocate(values, n: int):
    """Exact Shapley shares from a complete characteristic function.

    ``values`` maps frozensets to v(S) for every nonempty S of {0..n-1};
    the empty coalition is worth 0.  Subset enumeration, so n is capped.
    """
    if n < 1:
        raise ParameterError("need at least one player")
    if n > 20:
        raise ParameterError("subset enumeration is capped at 20 players")
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            if frozenset(subset) not in values:
                raise ParameterError(f"missing coalition value for {set(subset)}")

    shares = np.zeros(n)
    fact = [math.factorial(i) for i in range(n + 1)]
    for i in range(n):
        for size in range(0, n):
            weight = fact[size] * fact[n - size - 1] / fact[n]
            for subset in combinations([p for p in range(n) if p != i], size):
                with_i = frozenset(subset + (i,))
                without = frozenset(subset) if subset else frozenset()
                v_without = values.get(without, 0.0) if subset else 0.0
                shares[i] += weight * (values[with_i] - v_without)
    return shares


@dataclass
class CoalitionAllocation:
    """Characteristic values plus the Shapley split of the grand coalition."""

    values: dict
    shapley: np.ndarray

    def __post_init__(self):
        self.shapley = np.asarray(self.shapley, dtype=float)

    @property
    def grand_value(self):
        return self.values[frozenset(range(self.shapley.size))]

    @property
    def cost_shares(self):
        """Per-microgrid share of the alliance operating cost."""
        return -self.shapley

    def efficiency_gap(self):
        return float(self.shapley.sum() - self.grand_value)


def allocate_alliance_cost(net_kw, params: AllianceParams, wind_kw=None,
                           pv_kw=None) -> CoalitionAllocation:
    """Dispatch every coalition and split the grand-coalition benefit."""
    values = all_coalition_values(net_kw, params, wind_kw, pv_kw)
    n = np.asarray(net_kw).shape[0]
    return CoalitionAllocation(values, shapley_allocate(values, n))
