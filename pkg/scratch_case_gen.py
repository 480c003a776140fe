"""Generate the bundled desk-case YAML (scratch tool, re-run while tuning)."""
import numpy as np

h = np.arange(24)


def bell(peak, center=12.5, width=11.0):
    x = np.clip(np.sin(np.pi * (h - center + width / 2) / width), 0.0, None)
    out = peak * x**1.5
    out[(h < center - width / 2) | (h > center + width / 2)] = 0.0
    return out


def fmt(arr):
    return "[" + ", ".join(f"{v:.1f}" for v in arr) + "]"


# Microgrid 1: wind-heavy, strong night surplus.
wind1 = 470 + 110 * np.cos(2 * np.pi * (h - 2) / 24)
pv1 = bell(90)
load1 = 340 + 60 * np.sin(2 * np.pi * (h - 15) / 24) + 70 * np.exp(-0.5 * ((h - 19) / 2.2)**2) \
    + 35 * np.exp(-0.5 * ((h - 8.5) / 2.0)**2)

# Microgrid 2: load-heavy, deficit most of the day.
wind2 = 150 + 30 * np.cos(2 * np.pi * (h - 3) / 24)
pv2 = bell(130)
load2 = 480 + 90 * np.sin(2 * np.pi * (h - 15) / 24) + 110 * np.exp(-0.5 * ((h - 19) / 2.4)**2) \
    + 60 * np.exp(-0.5 * ((h - 9) / 2.2)**2)

# Microgrid 3: PV-heavy, midday surplus.
wind3 = 175 + 35 * np.cos(2 * np.pi * (h - 3) / 24)
pv3 = bell(520)
load3 = 370 + 65 * np.sin(2 * np.pi * (h - 15) / 24) + 85 * np.exp(-0.5 * ((h - 19) / 2.3)**2) \
    + 45 * np.exp(-0.5 * ((h - 8.5) / 2.1)**2)

mgs = [
    ("mg1", wind1, pv1, load1),
    ("mg2", wind2, pv2, load2),
    ("mg3", wind3, pv3, load3),
]

for name, w, p, l in mgs:
    net = w + p - l
    print(f"# {name}: net min {net.min():7.1f}  max {net.max():7.1f}")
tot = sum(w + p - l for _, w, p, l in mgs)
print(f"# alliance net: min {tot.min():7.1f}  max {tot.max():7.1f}")

yaml_mgs = ""
for name, w, p, l in mgs:
    yaml_mgs += f"""  - name: {name}
    wind_kw: {fmt(w)}
    pv_kw: {fmt(p)}
    load_kw: {fmt(l)}
    responsive_fraction: 0.5
"""

doc = f"""# Bundled desk-scale case: three microgrids, 130 vehicles each.
# Forecast curves are synthetic with qualitative shapes only (wind high at
# night, PV a midday bell, double-peaked loads); every price and battery
# constant follows the documented system tables.
name: desk3
microgrids:
{yaml_mgs}periods:
  - {{hours: [1, 8], user_min: 0.8, user_max: 1.0, internal: 1.1, grid_buy: 1.2}}
  - {{hours: [9, 11], user_min: 0.9, user_max: 1.2, internal: 1.3, grid_buy: 1.4}}
  - {{hours: [12, 20], user_min: 1.2, user_max: 1.4, internal: 1.5, grid_buy: 1.65}}
  - {{hours: [21, 0], user_min: 1.0, user_max: 1.3, internal: 1.4, grid_buy: 1.5}}
grid_sell_factor: 0.7
alliance:
  wind_cost: 0.376
  pv_cost: 0.428
  line_om_cost: 0.17
  line_min_kw: 0.0
  line_max_kw: 3200.0
  transfer_max_kw: 450.0
fleet:
  n_per_microgrid: 130
  n_controllable: 70
  behavior:
    return_mean: 17.47
    return_std: 3.41
    depart_mean: 8.92
    depart_std: 3.24
    log_mileage_mean: 2.98
    log_mileage_std: 1.14
    kwh_per_km: 0.15
  battery:
    capacity_kwh: 30.0
    p_max_kw: 3.0
    eta_charge: 0.95
    eta_discharge: 0.95
    soc_min: 0.1
    soc_max: 1.0
    soc_target: 0.9
  replacement_cost: 18000.0
  lifetime_throughput_kwh: 100000.0
scenarios:
  n_samples: 1000
  reduce_to: 5
  tau: 0.1
solver:
  population: 40
  generations: 90
  mutation_rate: 0.04
  crossover_prob: 0.8
  convergence_eps: 0.01
"""
open("src/mmgdispatch/cases/desk3.yaml", "w").write(doc)
print("wrote src/mmgdispatch/cases/desk3.yaml")
