"""Case-file ingestion and validation.

A case is one YAML document holding the forecast curves, the per-period
price tables, fleet and battery constants, scenario settings, and solver
settings.  ``load_case`` validates everything up front and reports every
problem with its field path; ``build_system`` turns a case plus seed into
the deterministic inputs of the bi-level loop.
"""

import hashlib
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from .alliance import AllianceParams
from .errors import ValidationError
from .ev import HOURS, BatteryParams, EvBehaviorModel, sample_fleet
from .pricing import LoadProfile
from .renewables import ScenarioSet, build_joint_scenarios, reduce_scenarios
from .solver import GaConfig, MicrogridDay, SystemDay, expected_scenario_case


@dataclass
class CaseFile:
    """Validated case-file contents plus derived hourly price vectors."""

    name: str
    raw: dict
    microgrids: list          # dicts with wind/pv/load arrays + responsive_fraction
    band_low: np.ndarray
    band_high: np.ndarray
    internal_price: np.ndarray
    grid_buy_price: np.ndarray
    grid_sell_price: np.ndarray
    alliance: dict
    fleet: dict
    scenarios: dict
    solver: dict

    @property
    def n_microgrids(self):
        return len(self.microgrids)

    def config_hash(self):
        digest = hashlib.sha256(
            yaml.safe_dump(self.raw, sort_keys=True).encode()
        ).hexdigest()
        return digest[:16]

    def ga_config(self, seed: int) -> GaConfig:
        s = self.solver
        return GaConfig(
            population=int(s.get("population", 40)),
            generations=int(s.get("generations", 90)),
            mutation_rate=float(s.get("mutation_rate", 0.04)),
            crossover_prob=float(s.get("crossover_prob", 0.8)),
            convergence_eps=float(s.get("convergence_eps", 0.01)),
            seed=seed,
        )

    def alliance_params(self) -> AllianceParams:
        a = self.alliance
        return AllianceParams(
            grid_buy_price=self.grid_buy_price,
            grid_sell_price=self.grid_sell_price,
            internal_price=self.internal_price,
            wind_cost=float(a.get("wind_cost", 0.376)),
            pv_cost=float(a.get("pv_cost", 0.428)),
            line_om_cost=float(a.get("line_om_cost", 0.17)),
            line_min_kw=float(a.get("line_min_kw", 0.0)),
            line_max_kw=float(a.get("line_max_kw", 1e9)),
            transfer_max_kw=float(a.get("transfer_max_kw", 450.0)),
            n_microgrids=self.n_microgrids,
        )

    def behavior_model(self) -> EvBehaviorModel:
        b = self.fleet.get("behavior", {})
        return EvBehaviorModel(
            return_mean=float(b.get("return_mean", 17.47)),
            return_std=float(b.get("return_std", 3.41)),
            depart_mean=float(b.get("depart_mean", 8.92)),
            depart_std=float(b.get("depart_std", 3.24)),
            log_mileage_mean=float(b.get("log_mileage_mean", 2.98)),
            log_mileage_std=float(b.get("log_mileage_std", 1.14)),
            kwh_per_km=float(b.get("kwh_per_km", 0.15)),
        )

    def battery_params(self) -> BatteryParams:
        b = self.fleet.get("battery", {})
        return BatteryParams(
            capacity_kwh=float(b.get("capacity_kwh", 30.0)),
            p_max_kw=float(b.get("p_max_kw", 3.0)),
            eta_charge=float(b.get("eta_charge", 0.95)),
            eta_discharge=float(b.get("eta_discharge", 0.95)),
            soc_min=float(b.get("soc_min", 0.1)),
            soc_max=float(b.get("soc_max", 1.0)),
            soc_target=float(b.get("soc_target", 0.9)),
        )


def _hour_range(spec):
    """Inclusive wrap-aware hour range, e.g. [21, 0] -> 21, 22, 23, 0."""
    start, end = int(spec[0]), int(spec[1])
    hours = []
    t = start % HOURS
    while True:
        hours.append(t)
        if t == end % HOURS:
            break
        t = (t + 1) % HOURS
        if len(hours) > HOURS:
            break
    return hours


def _as_curve(value, path, problems):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        problems.append((path, "must be a list of 24 numbers"))
        return np.zeros(HOURS)
    if arr.shape != (HOURS,):
        problems.append((path, f"must list exactly {HOURS} hourly values, got {arr.shape}"))
        return np.zeros(HOURS)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        problems.append((path, "values must be finite and non-negative"))
    return arr


def parse_case(raw: dict) -> CaseFile:
    """Validate a parsed YAML mapping, collecting every problem found."""
    problems = []
    if not isinstance(raw, dict):
        raise ValidationError([("<root>", "case file must be a mapping")])

    mgs = raw.get("microgrids")
    parsed_mgs = []
    if not isinstance(mgs, list) or not mgs:
        problems.append(("microgrids", "at least one microgrid required"))
        mgs = []
    for i, mg in enumerate(mgs):
        base = f"microgrids[{i}]"
        wind = _as_curve(mg.get("wind_kw"), f"{base}.wind_kw", problems)
        pv = _as_curve(mg.get("pv_kw"), f"{base}.pv_kw", problems)
        load = _as_curve(mg.get("load_kw"), f"{base}.load_kw", problems)
        frac = float(mg.get("responsive_fraction", 0.5))
        if not (0.0 <= frac <= 1.0):
            problems.append((f"{base}.responsive_fraction", "must lie in [0, 1]"))
        parsed_mgs.append({
            "name": str(mg.get("name", f"mg{i + 1}")),
            "wind_kw": wind, "pv_kw": pv, "load_kw": load,
            "responsive_fraction": frac,
        })

    band_low = np.full(HOURS, np.nan)
    band_high = np.full(HOURS, np.nan)
    internal = np.full(HOURS, np.nan)
    grid_buy = np.full(HOURS, np.nan)
    periods = raw.get("periods", [])
    if not isinstance(periods, list) or not periods:
        problems.append(("periods", "price periods are required"))
        periods = []
    for i, period in enumerate(periods):
        base = f"periods[{i}]"
        hours_spec = period.get("hours")
        if not (isinstance(hours_spec, (list, tuple)) and len(hours_spec) == 2):
            problems.append((f"{base}.hours", "must be [start_hour, end_hour]"))
            continue
        hours = _hour_range(hours_spec)
        for key in ("user_min", "user_max", "internal", "grid_buy"):
            if key not in period:
                problems.append((f"{base}.{key}", "missing price"))
        lo = float(period.get("user_min", 0.0))
        hi = float(period.get("user_max", 0.0))
        if lo > hi:
            problems.append((f"{base}", f"user_min {lo} exceeds user_max {hi}"))
        for t in hours:
            if not np.isnan(band_low[t]):
                problems.append((f"{base}.hours", f"hour {t} covered twice"))
            band_low[t] = lo
            band_high[t] = hi
            internal[t] = float(period.get("internal", 0.0))
            grid_buy[t] = float(period.get("grid_buy", 0.0))
    for t in range(HOURS):
        if np.isnan(band_low[t]):
            problems.append(("periods", f"hour {t} has no tariff band"))
            band_low[t] = band_high[t] = internal[t] = grid_buy[t] = 1.0

    sell_factor = float(raw.get("grid_sell_factor", 0.7))
    grid_sell = sell_factor * grid_buy
    bad = (grid_sell >= internal) | (internal >= grid_buy)
    if bad.any():
        problems.append((
            "periods",
            f"hour {int(np.argmax(bad))}: prices must satisfy "
            "grid_sell < internal < grid_buy",
        ))

    fleet = raw.get("fleet", {}) or {}
    n_per = int(fleet.get("n_per_microgrid", 130))
    n_ctrl = int(fleet.get("n_controllable", 70))
    if n_per < 0 or n_ctrl < 0 or n_ctrl > n_per:
        problems.append(("fleet", "need 0 <= n_controllable <= n_per_microgrid"))
    battery = fleet.get("battery", {}) or {}
    cap = float(battery.get("capacity_kwh", 30.0))
    p_max = float(battery.get("p_max_kw", 3.0))
    eta_c = float(battery.get("eta_charge", 0.95))
    soc_max = float(battery.get("soc_max", 1.0))
    soc_target = float(battery.get("soc_target", 0.9))
    if cap > 0.0 and soc_max - soc_target < p_max * eta_c / cap - 1e-12:
        problems.append((
            "fleet.battery",
            "soc_max - soc_target must cover one full charge step "
            "(otherwise fixed-power plans cannot land on the target)",
        ))

    scenarios = raw.get("scenarios", {}) or {}
    if int(scenarios.get("n_samples", 1000)) < int(scenarios.get("reduce_to", 5)):
        problems.append(("scenarios", "n_samples must be >= reduce_to"))

    if problems:
        raise ValidationError(problems)

    return CaseFile(
        name=str(raw.get("name", "case")),
        raw=raw,
        microgrids=parsed_mgs,
        band_low=band_low,
        band_high=band_high,
        internal_price=internal,
        grid_buy_price=grid_buy,
        grid_sell_price=grid_sell,
        alliance=raw.get("alliance", {}) or {},
        fleet=fleet,
        scenarios=scenarios,
        solver=raw.get("solver", {}) or {},
    )


def load_case(path=None) -> CaseFile:
    """Load and validate a case file; without a path, the bundled desk case."""
    if path is None:
        text = resources.files("mmgdispatch").joinpath("cases/desk3.yaml").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    raw = yaml.safe_load(text)
    return parse_case(raw)


def case_forecasts(case: CaseFile):
    """Day-ahead (wind, pv, load) forecasts as one (K, 3, 24) array."""
    return np.stack([
        np.stack([mg["wind_kw"], mg["pv_kw"], mg["load_kw"]])
        for mg in case.microgrids
    ])


def case_scenarios(case: CaseFile, seed: int) -> ScenarioSet:
    """Generate and reduce the joint forecast scenarios for a run seed."""
    scfg = case.scenarios
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    full = build_joint_scenarios(
        case_forecasts(case),
        tau=float(scfg.get("tau", 0.1)),
        n_sc=int(scfg.get("n_samples", 1000)),
        rng=rng,
    )
    return reduce_scenarios(full, int(scfg.get("reduce_to", 5)))


def build_system(case: CaseFile, seed: int, scenario_set: ScenarioSet = None):
    """Deterministic system inputs for one run.

    Scenario uncertainty is folded in by probability-weighting the reduced
    scenario set into a single expected day; fleets are sampled per
    microgrid from substreams of the run seed.
    """
    if scenario_set is None:
        scenario_set = case_scenarios(case, seed)
    expected = expected_scenario_case(scenario_set)
    behavior = case.behavior_model()
    battery = case.battery_params()
    fleet_cfg = case.fleet
    n_per = int(fleet_cfg.get("n_per_microgrid", 130))
    n_ctrl = int(fleet_cfg.get("n_controllable", 70))

    mgs = []
    for k, mg in enumerate(case.microgrids):
        wind, pv, load = expected[k]
        frac = mg["responsive_fraction"]
        profile = LoadProfile(non_responsive=(1.0 - frac) * load,
                              responsive_base=frac * load)
        fleet = []
        if n_per > 0:
            fleet = sample_fleet(n_per, behavior, battery,
                                 controllable_fraction=n_ctrl / n_per,
                                 seed=[seed, 101 + k], microgrid=k)
        mgs.append(MicrogridDay(
            wind_kw=wind, pv_kw=pv, load=profile,
            band_low=case.band_low, band_high=case.band_high, fleet=fleet,
        ))
    system = SystemDay(
        microgrids=mgs,
        alliance=case.alliance_params(),
        replacement_cost=float(fleet_cfg.get("replacement_cost", 18000.0)),
        lifetime_throughput_kwh=float(
            fleet_cfg.get("lifetime_throughput_kwh", 100000.0)),
    )
    return system, scenario_set
