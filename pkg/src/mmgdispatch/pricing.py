"""Two-stage pricing: Stackelberg follower response to a time-of-use user
tariff, the surplus-driven dynamic vehicle tariff, and the per-vehicle
satisfaction-maximizing schedule optimizer.

The vehicle optimizer is an exact dynamic program over the bang-bang action
set {charge, idle, discharge}.  Because the price-satisfaction term is a
kinked function of the total cost, each (time, charge-count,
discharge-count) state carries a set of (cost, deviation) pairs pruned by a
Lipschitz dominance rule, so the returned plan attains the true optimum of
price plus travel satisfaction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, ParameterError
from .ev import (
    HOURS,
    EvProfile,
    EvSchedule,
    SatisfactionBounds,
    immediate_charge_schedule,
    latest_charge_schedule,
    max_charge_count,
    reference_schedules,
    required_charge_count,
    schedule_total_cost,
)

DT = 1.0  # hourly steps


@dataclass
class TariffSchedule:
    """Per-microgrid 24-hour user and vehicle price vectors with the
    regulated user-price band."""

    user_price: np.ndarray
    ev_price: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray

    def __post_init__(self):
        self.user_price = np.asarray(self.user_price, dtype=float)
        self.ev_price = np.asarray(self.ev_price, dtype=float)
        self.band_low = np.asarray(self.band_low, dtype=float)
        self.band_high = np.asarray(self.band_high, dtype=float)
        for name, arr in (("user_price", self.user_price), ("ev_price", self.ev_price),
                          ("band_low", self.band_low), ("band_high", self.band_high)):
            if arr.shape != (HOURS,):
                raise ParameterError(f"{name} must have {HOURS} hourly entries")
        tol = 1e-9
        if np.any(self.user_price < self.band_low - tol) or \
                np.any(self.user_price > self.band_high + tol):
            raise ParameterError("user price leaves its regulated band")
        if np.any(self.ev_price < 0.7 * self.user_price - tol) or \
                np.any(self.ev_price > 1.3 * self.user_price + tol):
            raise ParameterError("ev price outside the 0.7..1.3 user-price band")


@dataclass
class LoadProfile:
    """Hourly non-responsive load plus a responsive block that may shift
    within per-hour bounds while conserving daily energy."""

    non_responsive: np.ndarray
    responsive_base: np.ndarray
    responsive: np.ndarray = None
    participation: np.ndarray = None     # 1 where the block may shift
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        self.non_responsive = np.asarray(self.non_responsive, dtype=float)
        self.responsive_base = np.asarray(self.responsive_base, dtype=float)
        if self.non_responsive.shape != (HOURS,) or self.responsive_base.shape != (HOURS,):
            raise ParameterError(f"load profiles must have {HOURS} hourly entries")
        if np.any(self.non_responsive < 0.0) or np.any(self.responsive_base < 0.0):
            raise ParameterError("loads must be non-negative")
        if self.responsive is None:
            self.responsive = self.responsive_base.copy()
        self.responsive = np.asarray(self.responsive, dtype=float)
        if self.participation is None:
            self.participation = np.ones(HOURS, dtype=int)
        self.participation = np.asarray(self.participation, dtype=int)
        # Shifting band defaults to +/-20% of the hourly baseline.
        if self.lower is None:
            self.lower = 0.8 * self.responsive_base
        if self.upper is None:
            self.upper = 1.2 * self.responsive_base
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if np.any(self.lower > self.upper + 1e-12):
            raise ParameterError("lower bound exceeds upper bound")

    @property
    def total(self):
        return self.non_responsive + self.responsive

    @property
    def baseline_total(self):
        return self.non_responsive + self.responsive_base

    def copy(self):
        return LoadProfile(
            self.non_responsive.copy(), self.responsive_base.copy(),
            self.responsive.copy(), self.participation.copy(),
            self.lower.copy(), self.upper.copy(),
        )


def load_cost(prices, profile: LoadProfile):
    """Daily user electricity bill at the given tariff."""
    prices = np.asarray(prices, dtype=float)
    return float(np.sum(prices * profile.total) * DT)


def follower_load_response(prices, profile: LoadProfile) -> LoadProfile:
    """Cost-minimizing responsive-load plan under the posted tariff.

    Energy is moved from expensive to cheap hours with a two-pointer greedy
    over the price ordering (ties broken by earlier hour), which solves the
    separable LP exactly: per-hour box bounds, daily energy conserved.
    A flat tariff therefore returns the baseline unchanged.
    """
    prices = np.asarray(prices, dtype=float)
    out = profile.copy()
    free = np.nonzero(out.participation == 1)[0]
    out.responsive = out.responsive_base.copy()
    if free.size == 0:
        return out

    lo, hi = out.lower, out.upper
    al = out.responsive
    target = float(out.responsive_base[free].sum())
    if target < lo[free].sum() - 1e-9 or target > hi[free].sum() + 1e-9:
        raise InfeasibleError(
            "responsive-load bounds cannot conserve daily energy"
        )
    # Clamp into the box, then rebalance cheapest-up / dearest-down.
    al[free] = np.clip(al[free], lo[free], hi[free])
    order = free[np.lexsort((free, prices[free]))]
    gap = target - float(al[free].sum())
    if gap > 1e-12:
        for h in order:
            add = min(hi[h] - al[h], gap)
            al[h] += add
            gap -= add
            if gap <= 1e-12:
                break
    elif gap < -1e-12:
        for h in order[::-1]:
            cut = min(al[h] - lo[h], -gap)
            al[h] -= cut
            gap += cut
            if gap >= -1e-12:
                break
    # Exchange improvement: raise the cheap end, lower the expensive end.
    i, j = 0, order.size - 1
    while i < j:
        hi_h, lo_h = order[i], order[j]
        if prices[hi_h] >= prices[lo_h]:
            break
        room_up = hi[hi_h] - al[hi_h]
        room_down = al[lo_h] - lo[lo_h]
        move = min(room_up, room_down)
        if move > 0.0:
            al[hi_h] += move
            al[lo_h] -= move
        if hi[hi_h] - al[hi_h] <= 1e-12:
            i += 1
        if al[lo_h] - lo[lo_h] <= 1e-12:
            j -= 1
    return out


def tariff_impact_factor(wind, pv, load):
    """Surplus ratio r = (wind + pv - load) / load, with r = 0 flagged where
    the hour carries no load."""
    wind = np.asarray(wind, dtype=float)
    pv = np.asarray(pv, dtype=float)
    load = np.asarray(load, dtype=float)
    flagged = load <= 0.0
    safe = np.where(flagged, 1.0, load)
    r = np.where(flagged, 0.0, (wind + pv - load) / safe)
    return r, flagged


def ev_dynamic_tariff(user_price, wind, pv, load):
    """Vehicle tariff: user price minus the surplus ratio, clamped into the
    0.7..1.3 band around the user price."""
    user_price = np.asarray(user_price, dtype=float)
    r, _ = tariff_impact_factor(wind, pv, load)
    raw = user_price - r
    return np.clip(raw, 0.7 * user_price, 1.3 * user_price)


def ev_satisfaction_bounds(profile: EvProfile, ev_price, dis_price,
                           price_ceiling, replacement_cost: float = 18000.0,
                           lifetime_throughput_kwh: float = 100000.0):
    """Affordability bounds for one vehicle under the current tariff.

    The minimum is the cheaper of the two reference plans at the vehicle
    tariff; the maximum is the immediate-charge plan priced at the tariff
    ceiling.  A degenerate window is widened by 1e-9 so the satisfaction
    slope stays defined (the limit is lexicographic: match the minimum
    cost first).
    """
    wear = replacement_cost / lifetime_throughput_kwh
    ref_max, ref_min = reference_schedules(profile)
    f_ref_max = schedule_total_cost(ref_max, ev_price, dis_price, wear)
    f_ref_min = schedule_total_cost(ref_min, ev_price, dis_price, wear)
    f_min = min(f_ref_max, f_ref_min)
    f_max = schedule_total_cost(ref_max, price_ceiling, price_ceiling, wear)
    f_max = max(f_max, f_min + 1e-3)
    return SatisfactionBounds(f_max=f_max, f_min=f_min,
                              replacement_cost=replacement_cost,
                              lifetime_throughput_kwh=lifetime_throughput_kwh)


# ---------------------------------------------------------------------------
# Exact satisfaction dynamic program
# ---------------------------------------------------------------------------

def _seg_prefix_max(x, pos, exclusive):
    """Running max within contiguous segments of a sorted array.

    ``pos`` is each element's offset from its segment start.  Uses a
    doubling scan, so no Python loop over segments.
    """
    n = x.size
    res = x.copy()
    d = 1
    maxpos = int(pos.max()) if n else 0
    while d <= maxpos:
        can = pos[d:] >= d
        cand = np.where(can, res[:-d], -np.inf)
        res[d:] = np.maximum(res[d:], cand)
        d *= 2
    if not exclusive:
        return res
    out = np.full(n, -np.inf)
    inside = pos >= 1
    out[inside] = res[np.nonzero(inside)[0] - 1]
    return out


def _segment_positions(keys):
    new = np.empty(keys.size, dtype=bool)
    new[0] = True
    new[1:] = keys[1:] != keys[:-1]
    starts = np.nonzero(new)[0]
    seg_of = np.cumsum(new) - 1
    pos = np.arange(keys.size) - starts[seg_of]
    return new, pos


def _prune_same_count(cell, kdev, F, x_lo, x_hi):
    """Collapse same-state, same-deviation-count entries outside the
    reachable-cost window.

    For two entries whose final travel deviation is already identical, the
    winner is whichever cost can end closer to the affordable minimum.  The
    remaining cost change lies in a known interval, so among entries at or
    above the window only the cheapest can still win, and among entries at
    or below it only the dearest.  Returns indices of survivors.
    """
    if cell.size == 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((F, kdev, cell))
    F_s, x_lo_s, x_hi_s = F[order], x_lo[order], x_hi[order]
    grp = np.empty(order.size, dtype=bool)
    grp[0] = True
    grp[1:] = (cell[order][1:] != cell[order][:-1]) | (kdev[order][1:] != kdev[order][:-1])

    ge = F_s >= x_hi_s
    prev_ge = np.empty_like(ge)
    prev_ge[0] = False
    prev_ge[1:] = ge[:-1] & ~grp[1:]

    le = F_s <= x_lo_s
    next_le = np.empty_like(le)
    next_le[-1] = False
    next_le[:-1] = le[1:] & ~grp[1:]

    return order[~(prev_ge | next_le)]


def _prune_dominated(cell, F, D, inv_w):
    """Drop (cost, deviation) pairs that can never win.

    Within one state, a pair q is dominated by p when p's deviation lead is
    at least |F_p - F_q| / W: whatever happens later, p's final satisfaction
    is at least q's (the price term is 1/W-Lipschitz in cost, and clipping
    preserves that).  Survivors are found with two scans over the (state,
    cost)-sorted entries.
    """
    if cell.size == 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((-D, F, cell))
    cell_s, F_s, D_s, w_s = cell[order], F[order], D[order], inv_w[order]

    new_cell, pos = _segment_positions(cell_s)
    u = D_s + F_s * w_s
    survive1 = u > _seg_prefix_max(u, pos, exclusive=True)

    # Suffix max of v over same-state entries with strictly larger cost.
    v = D_s - F_s * w_s
    rev_cell = cell_s[::-1]
    _, rpos = _segment_positions(rev_cell)
    suffix_incl = _seg_prefix_max(v[::-1], rpos, exclusive=False)[::-1]
    gnew = new_cell.copy()
    gnew[1:] |= F_s[1:] != F_s[:-1]
    g_starts = np.nonzero(gnew)[0]
    g_of = np.cumsum(gnew) - 1
    next_start = np.append(g_starts[1:], cell_s.size)[g_of]
    target = np.full(cell_s.size, -np.inf)
    ok = next_start < cell_s.size
    ok[ok] &= cell_s[next_start[ok]] == cell_s[ok]
    target[ok] = suffix_incl[next_start[ok]]
    survive2 = v > target

    return order[survive1 & survive2]


class FleetOptimizer:
    """Batched exact DP over every vehicle's connection window.

    States are (vehicle, charge count, discharge count); each state carries
    the surviving (cost, deviation-count) pairs.  Deviation increments are
    exact multiples of p_max / den, so the deviation is tracked as an
    integer count.  Besides the dominance prunes, entries die when the
    departure SOC is no longer reachable or when an optimistic completion
    bound cannot beat the best feasible plan seen so far.

    Everything that depends only on the profiles is precomputed once, so
    one instance can be solved repeatedly under different tariffs (the
    leader search re-prices the same fleet thousands of times).
    """

    def __init__(self, profiles, replacement_cost: float = 18000.0,
                 lifetime_throughput_kwh: float = 100000.0):
        if not profiles:
            raise ParameterError("fleet optimizer needs at least one profile")
        self.profiles = profiles
        n_ev = len(profiles)
        lengths = np.array([p.window_length for p in profiles])
        l_max = int(lengths.max())
        self.lengths = lengths
        self.l_max = l_max

        self.dc = np.array([p.charge_step for p in profiles])
        self.dd = np.array([p.discharge_step for p in profiles])
        self.soc0 = np.array([p.soc_arrival for p in profiles])
        self.target = np.array([p.soc_target for p in profiles])
        self.p_kw = np.array([p.p_max_kw for p in profiles])
        self.wear = np.full(n_ev, replacement_cost / lifetime_throughput_kwh)

        for j, p in enumerate(profiles):
            # Discharge steps always exceed charge steps (eta <= 1), so pure
            # charging is the most SOC any action mix can reach.
            need = required_charge_count(p)
            if need > lengths[j] or need > max_charge_count(p):
                raise InfeasibleError(
                    f"ev {p.ev_id} cannot reach its departure SOC "
                    f"within its {lengths[j]} h window",
                    ev_id=p.ev_id,
                )
        # Charge/discharge counts are both bounded by the window length.
        self.a_dim = l_max + 2
        self.b_dim = l_max + 2

        soc_min = np.array([p.soc_min for p in profiles])
        soc_max = np.array([p.soc_max for p in profiles])
        a_grid = np.arange(self.a_dim)
        b_grid = np.arange(self.b_dim)
        # dis_max_b[j, a]: largest legal discharge count at charge count a;
        # chg_max_a[j, b]: largest legal charge count at discharge count b.
        self.dis_max_b = np.floor(
            (self.soc0[:, None] + a_grid[None, :] * self.dc[:, None]
             - soc_min[:, None]) / self.dd[:, None] + 1e-9
        ).astype(np.int32)
        self.chg_max_a = np.floor(
            (soc_max[:, None] - self.soc0[:, None]
             + b_grid[None, :] * self.dd[:, None]) / self.dc[:, None] + 1e-9
        ).astype(np.int32)
        self.soc_max = soc_max

        # Window geometry, reference charging patterns, and deviation-count
        # increments (all tariff-independent).
        self.active = np.zeros((n_ev, l_max), dtype=bool)
        self.hour_mat = np.zeros((n_ev, l_max), dtype=np.int64)
        self.imm_mask = np.zeros((n_ev, l_max), dtype=bool)
        self.late_mask = np.zeros((n_ev, l_max), dtype=bool)
        self.k_idle = np.zeros((n_ev, l_max), dtype=np.int16)
        self.k_chg = np.zeros((n_ev, l_max), dtype=np.int16)
        self.k_dis = np.zeros((n_ev, l_max), dtype=np.int16)
        self.dev_unit = np.zeros(n_ev)
        self.late_kdev = np.zeros(n_ev, dtype=np.int32)
        for j, p in enumerate(profiles):
            lj = lengths[j]
            self.active[j, :lj] = True
            self.hour_mat[j, :lj] = p.window_hours
            a_imm = min(max_charge_count(p), lj)
            self.imm_mask[j, :a_imm] = True
            a_req = required_charge_count(p)
            self.late_mask[j, lj - a_req:lj] = True
            den_units = int(np.sum(self.imm_mask[j] != self.late_mask[j]))
            if den_units > 0:
                self.dev_unit[j] = 1.0 / den_units
                charging = self.imm_mask[j, :lj].astype(np.int16)
                self.k_idle[j, :lj] = charging
                self.k_chg[j, :lj] = 1 - charging
                self.k_dis[j, :lj] = 1 + charging
                self.late_kdev[j] = int(
                    np.sum(self.k_chg[j] * self.late_mask[j])
                    + np.sum(self.k_idle[j] * (self.active[j] & ~self.late_mask[j]))
                )

        # Step-independent future sums: least future deviation count, future
        # idle deviation count, and active steps remaining after step t.
        k_best = np.minimum(self.k_idle, np.minimum(self.k_chg, self.k_dis))
        self.fut_kmin = _future_sum(k_best).astype(np.int32)
        self.fut_kidle = _future_sum(self.k_idle).astype(np.int32)
        steps = np.arange(l_max)[None, :]
        self.fut_active = np.maximum(lengths[:, None] - (steps + 1), 0)

    def _cell(self, j, a, b):
        return (j * self.a_dim + a) * self.b_dim + b

    def _price_fields(self, ev_price, dis_price, price_ceiling, bounds_list):
        """Per-candidate cost increments, affordability bounds, seed bound."""
        ev_price = np.asarray(ev_price, dtype=float)
        dis_price = np.asarray(dis_price, dtype=float)
        fc = self.p_kw[:, None] * (ev_price[self.hour_mat] + self.wear[:, None]) * DT
        fd = self.p_kw[:, None] * (self.wear[:, None] - dis_price[self.hour_mat]) * DT
        fc[~self.active] = 0.0
        fd[~self.active] = 0.0

        # Left-to-right accumulation matches the DP's running cost sums
        # bit for bit, so the reference paths score an exact theta of 1.
        cost_imm = np.cumsum(fc * self.imm_mask, axis=1)[:, -1]
        cost_late = np.cumsum(fc * self.late_mask, axis=1)[:, -1]
        if bounds_list is None:
            ceiling = np.asarray(price_ceiling, dtype=float)
            fcc = self.p_kw[:, None] * (ceiling[self.hour_mat] + self.wear[:, None]) * DT
            fcc[~self.active] = 0.0
            f_min = np.minimum(cost_imm, cost_late)
            f_max = np.maximum(np.cumsum(fcc * self.imm_mask, axis=1)[:, -1],
                               f_min + 1e-3)
        else:
            f_min = np.array([b.f_min for b in bounds_list])
            f_max = np.array([b.f_max for b in bounds_list])
        inv_w = 1.0 / np.maximum(f_max - f_min, 1e-3)

        # Both references are feasible plans; the better seeds the bound.
        theta_imm = np.clip(1.0 - np.abs(cost_imm - f_min) * inv_w, 0.0, 1.0)
        theta_late = np.clip(1.0 - np.abs(cost_late - f_min) * inv_w, 0.0, 1.0)
        delta_late = 1.0 - self.late_kdev * self.dev_unit
        lb = np.maximum(theta_imm + 1.0, theta_late + delta_late)

        inc_lo = np.minimum(0.0, np.minimum(fc, fd))
        inc_hi = np.maximum(0.0, np.maximum(fc, fd))
        fut_lo = _future_sum(inc_lo)
        fut_hi = _future_sum(inc_hi)
        return fc, fd, f_min, f_max, inv_w, lb, fut_lo, fut_hi

    def solve(self, ev_price, dis_price, price_ceiling=None, bounds_list=None):
        """Optimal actions and satisfaction values under the given tariff."""
        fc, fd, f_min, f_max, inv_w, lb, fut_lo, fut_hi = self._price_fields(
            ev_price, dis_price, price_ceiling, bounds_list
        )
        n_ev = len(self.profiles)
        j = np.arange(n_ev)
        a = np.zeros(n_ev, dtype=np.int32)
        b = np.zeros(n_ev, dtype=np.int32)
        F = np.zeros(n_ev)
        kdev = np.zeros(n_ev, dtype=np.int32)
        history = []

        for t in range(self.l_max):
            act_now = self.active[j, t]
            src = np.arange(j.size)

            parts = [(j, a, b, F, kdev + self.k_idle[j, t], src,
                      np.zeros(j.size, dtype=np.int8))]
            mc = act_now & (a + 1 <= self.chg_max_a[j, b])
            if mc.any():
                jj = j[mc]
                parts.append((jj, a[mc] + 1, b[mc], F[mc] + fc[jj, t],
                              kdev[mc] + self.k_chg[jj, t], src[mc],
                              np.ones(jj.size, dtype=np.int8)))
            md = act_now & (b + 1 <= self.dis_max_b[j, a])
            if md.any():
                jj = j[md]
                parts.append((jj, a[md], b[md] + 1, F[md] + fd[jj, t],
                              kdev[md] + self.k_dis[jj, t], src[md],
                              np.full(jj.size, 2, dtype=np.int8)))

            j2, a2, b2, F2, k2, src2, act2 = (
                np.concatenate(cols) for cols in zip(*parts)
            )

            # Feasibility ahead: the departure SOC must still be reachable.
            soc = self.soc0[j2] + a2 * self.dc[j2] - b2 * self.dd[j2]
            headroom = np.floor((self.soc_max[j2] - soc) / self.dc[j2] + 1e-9)
            max_final = soc + np.minimum(self.fut_active[j2, t], headroom) * self.dc[j2]
            ok = max_final >= self.target[j2] - 1e-9

            # Idling to the end is always feasible from an on-target SOC, so
            # such entries raise their vehicle's achievable-value bound.
            can_idle = ok & (soc >= self.target[j2] - 1e-9)
            if can_idle.any():
                theta_now = np.clip(
                    1.0 - np.abs(F2[can_idle] - f_min[j2[can_idle]])
                    * inv_w[j2[can_idle]], 0.0, 1.0)
                idle_val = theta_now + 1.0 - (
                    k2[can_idle] + self.fut_kidle[j2[can_idle], t]
                ) * self.dev_unit[j2[can_idle]]
                np.maximum.at(lb, j2[can_idle], idle_val)

            # Optimistic completion bound against the best known plan.
            lo = F2 + fut_lo[j2, t]
            hi = F2 + fut_hi[j2, t]
            dist = np.maximum(0.0, np.maximum(f_min[j2] - hi, lo - f_min[j2]))
            theta_best = np.clip(1.0 - dist * inv_w[j2], 0.0, 1.0)
            delta_best = 1.0 - (k2 + self.fut_kmin[j2, t]) * self.dev_unit[j2]
            ok &= theta_best + delta_best >= lb[j2] - 1e-9

            j2, a2, b2, F2, k2 = j2[ok], a2[ok], b2[ok], F2[ok], k2[ok]
            src2, act2 = src2[ok], act2[ok]

            cell = self._cell(j2, a2, b2)
            x_hi = f_min[j2] - fut_lo[j2, t]
            x_lo = f_min[j2] - fut_hi[j2, t]
            keep = _prune_same_count(cell, k2, F2, x_lo, x_hi)
            j2, a2, b2, F2, k2 = j2[keep], a2[keep], b2[keep], F2[keep], k2[keep]
            src2, act2, cell = src2[keep], act2[keep], cell[keep]

            D2 = -k2.astype(float) * self.dev_unit[j2]
            keep = _prune_dominated(cell, F2, D2, inv_w[j2])
            j, a, b = j2[keep], a2[keep], b2[keep]
            F, kdev = F2[keep], k2[keep]
            history.append((src2[keep], act2[keep]))

        soc_final = self.soc0[j] + a * self.dc[j] - b * self.dd[j]
        eligible = soc_final >= self.target[j] - 1e-9
        theta = np.clip(1.0 - np.abs(F - f_min[j]) * inv_w[j], 0.0, 1.0)
        delta = 1.0 - kdev * self.dev_unit[j]
        value = np.where(eligible, delta + theta, -np.inf)

        actions = np.zeros((n_ev, self.l_max), dtype=np.int8)
        values = np.empty(n_ev)
        order = np.argsort(j, kind="stable")
        bnds = np.searchsorted(j[order], np.arange(n_ev + 1))
        for ev in range(n_ev):
            cand = order[bnds[ev]:bnds[ev + 1]]
            if cand.size == 0 or not np.isfinite(value[cand]).any():
                raise InfeasibleError(
                    f"ev {self.profiles[ev].ev_id} has no feasible schedule",
                    ev_id=self.profiles[ev].ev_id,
                )
            best = cand[int(np.argmax(value[cand]))]
            values[ev] = value[best]
            idx = best
            for t in range(self.l_max - 1, -1, -1):
                parents, acts = history[t]
                actions[ev, t] = acts[idx]
                idx = parents[idx]
        return actions, values, (f_min, f_max)

    def schedules(self, ev_price, dis_price, price_ceiling=None,
                  bounds_list=None):
        actions, _, _ = self.solve(ev_price, dis_price, price_ceiling,
                                   bounds_list)
        return [
            _schedule_from_actions(p, actions[i, :p.window_length])
            for i, p in enumerate(self.profiles)
        ]

    def reference_actions(self):
        """Immediate-charge action matrix (the uncontrolled plan)."""
        return np.where(self.imm_mask, 1, 0).astype(np.int8)

    def schedules_from_actions(self, actions):
        return [
            _schedule_from_actions(p, actions[i, :p.window_length])
            for i, p in enumerate(self.profiles)
        ]

    def evaluate_actions(self, actions, ev_price, dis_price, price_ceiling=None,
                         bounds_list=None):
        """Per-vehicle cost, price satisfaction and travel satisfaction of an
        action matrix under the given tariff."""
        fc, fd, f_min, f_max, inv_w, _, _, _ = self._price_fields(
            ev_price, dis_price, price_ceiling, bounds_list
        )
        chg = (actions == 1) & self.active
        dis = (actions == 2) & self.active
        idl = (actions == 0) & self.active
        cost = np.sum(fc * chg + fd * dis, axis=1)
        kdev = np.sum(self.k_chg * chg + self.k_dis * dis + self.k_idle * idl,
                      axis=1)
        theta = np.clip(1.0 - np.abs(cost - f_min) * inv_w, 0.0, 1.0)
        delta = 1.0 - kdev * self.dev_unit
        return cost, theta, delta, f_min, f_max

    def aggregate_by_hour(self, actions):
        """(charge_kw, discharge_kw) fleet totals on the 24 h axis."""
        charge = np.zeros(HOURS)
        discharge = np.zeros(HOURS)
        pw = np.broadcast_to(self.p_kw[:, None], actions.shape)
        mc = (actions == 1) & self.active
        md = (actions == 2) & self.active
        np.add.at(charge, self.hour_mat[mc], pw[mc])
        np.add.at(discharge, self.hour_mat[md], pw[md])
        return charge, discharge


def _future_sum(per_step):
    """Sum of the entries strictly after each column."""
    rev = np.cumsum(per_step[:, ::-1], axis=1)[:, ::-1]
    out = np.zeros_like(rev)
    out[:, :-1] = rev[:, 1:]
    return out


def _schedule_from_actions(profile: EvProfile, acts):
    n = profile.window_length
    power = np.zeros(n)
    charging = np.zeros(n, dtype=int)
    discharging = np.zeros(n, dtype=int)
    soc = np.empty(n + 1)
    soc[0] = profile.soc_arrival
    for t in range(n):
        if acts[t] == 1:
            power[t] = profile.p_max_kw
            charging[t] = 1
            soc[t + 1] = soc[t] + profile.charge_step
        elif acts[t] == 2:
            power[t] = profile.p_max_kw
            discharging[t] = 1
            soc[t + 1] = soc[t] - profile.discharge_step
        else:
            soc[t + 1] = soc[t]
    return EvSchedule(profile.ev_id, profile.arrive_hour, power, charging,
                      discharging, soc)


def optimize_fleet_schedules(profiles, ev_price, dis_price, bounds_list):
    """Satisfaction-optimal schedules for a list of controllable vehicles."""
    if not profiles:
        return []
    opt = FleetOptimizer(profiles,
                         replacement_cost=bounds_list[0].replacement_cost,
                         lifetime_throughput_kwh=bounds_list[0].lifetime_throughput_kwh)
    opt.wear = np.array([b.wear_rate for b in bounds_list])
    return opt.schedules(ev_price, dis_price, bounds_list=bounds_list)


def optimize_ev_schedule(profile: EvProfile, ev_price, dis_price,
                         bounds: SatisfactionBounds) -> EvSchedule:
    """Exact satisfaction-maximizing plan for one vehicle.

    The plan obeys the mutual-exclusion, SOC-band and window constraints and
    reaches the departure SOC, or an InfeasibleError names the vehicle.
    """
    return optimize_fleet_schedules([profile], ev_price, dis_price, [bounds])[0]


def leader_fitness(user_price, load: LoadProfile, ev_charge_kw, ev_discharge_kw,
                   ev_price, dis_price, allocated_cost: float):
    """Microgrid operator revenue: user bills plus vehicle charging revenue,
    minus payments for vehicle discharge and the allocated alliance cost."""
    user_price = np.asarray(user_price, dtype=float)
    ev_price = np.asarray(ev_price, dtype=float)
    dis_price = np.asarray(dis_price, dtype=float)
    ev_charge_kw = np.asarray(ev_charge_kw, dtype=float)
    ev_discharge_kw = np.asarray(ev_discharge_kw, dtype=float)
    revenue = float(np.sum(user_price * load.total) * DT)
    revenue += float(np.sum(ev_price * ev_charge_kw) * DT)
    revenue -= float(np.sum(dis_price * ev_discharge_kw) * DT)
    return revenue - allocated_cost
