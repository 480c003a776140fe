"""Ad-hoc brute-force check of the satisfaction DP (not part of the suite)."""
import itertools
import sys
sys.path.insert(0, "src")

import numpy as np

from mmgdispatch.ev import (EvProfile, SatisfactionBounds, reference_schedules,
                            schedule_total_cost)
from mmgdispatch.pricing import ev_satisfaction_bounds, optimize_ev_schedule
from mmgdispatch.errors import InfeasibleError


def brute_force_value(profile, ev_price, dis_price, bounds):
    """Enumerate all action sequences, return best theta+delta."""
    n = profile.window_length
    hours = profile.window_hours
    ref_max, ref_min = reference_schedules(profile)
    om = ref_max.signed_power
    on = ref_min.signed_power
    den = float(np.abs(om - on).sum())
    wear = bounds.wear_rate
    w = max(bounds.f_max - bounds.f_min, 1e-9)
    best = -np.inf
    for seq in itertools.product((0, 1, 2), repeat=n):
        soc = profile.soc_arrival
        cost = 0.0
        dev = 0.0
        feasible = True
        for t, act in enumerate(seq):
            p = profile.p_max_kw
            h = hours[t]
            if act == 1:
                soc = soc + p * profile.eta_charge / profile.capacity_kwh
                cost += p * ev_price[h] + p * wear
                dev += abs(om[t] - p)
            elif act == 2:
                soc = soc - p / (profile.eta_discharge * profile.capacity_kwh)
                cost += -p * dis_price[h] + p * wear
                dev += abs(om[t] + p)
            else:
                dev += abs(om[t])
            if soc < profile.soc_min - 1e-9 or soc > profile.soc_max + 1e-9:
                feasible = False
                break
        if not feasible or soc < profile.soc_target - 1e-9:
            continue
        delta = 1.0 if den == 0.0 else 1.0 - dev / den
        theta = min(max(1.0 - abs(cost - bounds.f_min) / w, 0.0), 1.0)
        best = max(best, theta + delta)
    return best


def dp_value(profile, ev_price, dis_price, bounds):
    s = optimize_ev_schedule(profile, ev_price, dis_price, bounds)
    ref_max, ref_min = reference_schedules(profile)
    om = ref_max.signed_power
    den = float(np.abs(om - ref_min.signed_power).sum())
    dev = float(np.abs(om - s.signed_power).sum())
    delta = 1.0 if den == 0.0 else 1.0 - dev / den
    cost = schedule_total_cost(s, ev_price, dis_price, bounds.wear_rate)
    w = max(bounds.f_max - bounds.f_min, 1e-9)
    theta = min(max(1.0 - abs(cost - bounds.f_min) / w, 0.0), 1.0)
    return theta + delta


def _main():
    rng = np.random.default_rng(7)
    bad = 0
    for trial in range(300):
    E = rng.uniform(8, 40)
    p_max = rng.uniform(1.5, 6.0)
    eta_c = rng.uniform(0.85, 1.0)
    eta_d = rng.uniform(0.85, 1.0)
    soc_min, soc_max = 0.1, 1.0
    dc = p_max * eta_c / E
    # keep the landing window open so bang-bang can always top up
    target = min(soc_max - dc - 0.01, rng.uniform(0.3, 0.9))
    target = max(target, soc_min)
    L = 4
    soc0 = rng.uniform(max(soc_min, target - L * dc + 1e-6), soc_max)
    arrive = int(rng.integers(0, 24))
    prof = EvProfile(
        ev_id=trial, microgrid=0, controllable=True,
        arrive_hour=arrive, depart_hour=(arrive + L) % 24,
        soc_arrival=soc0, soc_target=target, capacity_kwh=E, p_max_kw=p_max,
        eta_charge=eta_c, eta_discharge=eta_d, soc_min=soc_min, soc_max=soc_max,
    )
    ev_price = rng.uniform(0.2, 2.0, 24)
    dis_price = ev_price.copy()
    ceiling = 1.3 * rng.uniform(0.8, 1.6, 24)
    bounds = ev_satisfaction_bounds(prof, ev_price, dis_price, ceiling)
    try:
        v_dp = dp_value(prof, ev_price, dis_price, bounds)
    except InfeasibleError:
        v_bf = brute_force_value(prof, ev_price, dis_price, bounds)
        assert v_bf == -np.inf, f"trial {trial}: DP infeasible, BF found {v_bf}"
        continue
    v_bf = brute_force_value(prof, ev_price, dis_price, bounds)
    if abs(v_dp - v_bf) > 1e-9:
        bad += 1
        print(f"trial {trial}: DP {v_dp:.12f} BF {v_bf:.12f} diff {v_dp - v_bf:.3e}")
print("mismatches:", bad, "/ 300")
