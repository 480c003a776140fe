"""EV fleet synthesis, battery SOC dynamics, degradation cost, and the
satisfaction functions used by the pricing stage.

Times are hours on a 24 h day; the scheduling horizon of one vehicle is its
grid-connection window, rolled so step 0 is the arrival hour.  Charging and
discharging run at either 0 or the vehicle's maximum power (bang-bang), so
every schedule moves the SOC on an exact lattice.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, ParameterError, SocBoundsError

HOURS = 24


@dataclass(frozen=True)
class EvBehaviorModel:
    """Travel-pattern distributions: wrapped normals for the daily return
    and first-travel times, lognormal daily mileage."""

    return_mean: float = 17.47
    return_std: float = 3.41
    depart_mean: float = 8.92
    depart_std: float = 3.24
    log_mileage_mean: float = 2.98
    log_mileage_std: float = 1.14
    kwh_per_km: float = 0.15

    def __post_init__(self):
        if min(self.return_std, self.depart_std, self.log_mileage_std) <= 0.0:
            raise ParameterError("behavior model standard deviations must be positive")
        if self.kwh_per_km <= 0.0:
            raise ParameterError("kwh_per_km must be positive")


@dataclass(frozen=True)
class BatteryParams:
    """Battery limits shared by a fleet."""

    capacity_kwh: float = 30.0
    p_max_kw: float = 3.0
    eta_charge: float = 0.95
    eta_discharge: float = 0.95
    soc_min: float = 0.1
    soc_max: float = 1.0
    soc_target: float = 0.9   # required SOC at departure

    def __post_init__(self):
        if self.capacity_kwh <= 0.0 or self.p_max_kw <= 0.0:
            raise ParameterError("capacity and p_max must be positive")
        if not (0.0 < self.eta_charge <= 1.0 and 0.0 < self.eta_discharge <= 1.0):
            raise ParameterError("efficiencies must lie in (0, 1]")
        if not (0.0 <= self.soc_min < self.soc_max <= 1.0):
            raise ParameterError("need 0 <= soc_min < soc_max <= 1")
        if not (self.soc_min <= self.soc_target <= self.soc_max):
            raise ParameterError("soc_target must lie within [soc_min, soc_max]")


@dataclass
class EvProfile:
    """One vehicle's connection window, energy need and battery limits."""

    ev_id: int
    microgrid: int
    controllable: bool
    arrive_hour: int          # first fully connected hour
    depart_hour: int          # first disconnected hour (wrap-aware)
    soc_arrival: float
    soc_target: float
    capacity_kwh: float
    p_max_kw: float
    eta_charge: float = 0.95
    eta_discharge: float = 0.95
    soc_min: float = 0.1
    soc_max: float = 1.0
    return_time: float = 0.0  # raw clock times behind the integer window
    depart_time: float = 0.0
    mileage_km: float = 0.0

    def __post_init__(self):
        if self.p_max_kw <= 0.0 or self.capacity_kwh <= 0.0:
            raise ParameterError("p_max and capacity must be positive")
        if not (0.0 < self.eta_charge <= 1.0 and 0.0 < self.eta_discharge <= 1.0):
            raise ParameterError("efficiencies must lie in (0, 1]")
        if not (self.soc_min - 1e-12 <= self.soc_arrival <= self.soc_max + 1e-12):
            raise ParameterError(f"ev {self.ev_id}: soc_arrival outside [soc_min, soc_max]")
        if not (self.soc_min - 1e-12 <= self.soc_target <= self.soc_max + 1e-12):
            raise ParameterError(f"ev {self.ev_id}: soc_target outside [soc_min, soc_max]")

    @property
    def window_length(self):
        """Number of connected hours; equal arrive/depart means parked all day."""
        span = (self.depart_hour - self.arrive_hour) % HOURS
        return HOURS if span == 0 else span

    @property
    def window_hours(self):
        """Absolute hour index of each connected step."""
        return [(self.arrive_hour + t) % HOURS for t in range(self.window_length)]

    @property
    def charge_step(self):
        """SOC gained by one full-power charging hour."""
        return self.p_max_kw * self.eta_charge / self.capacity_kwh

    @property
    def discharge_step(self):
        """SOC spent by one full-power discharging hour."""
        return self.p_max_kw / (self.eta_discharge * self.capacity_kwh)


@dataclass
class EvSchedule:
    """Hourly plan over one vehicle's window: power magnitudes with
    charge/discharge indicators and the SOC trajectory they induce."""

    ev_id: int
    arrive_hour: int
    power_kw: np.ndarray       # magnitudes, one per window step
    charging: np.ndarray       # 0/1 indicators
    discharging: np.ndarray
    soc: np.ndarray            # length window+1, soc[0] = arrival SOC

    def __post_init__(self):
        self.power_kw = np.asarray(self.power_kw, dtype=float)
        self.charging = np.asarray(self.charging, dtype=int)
        self.discharging = np.asarray(self.discharging, dtype=int)
        self.soc = np.asarray(self.soc, dtype=float)
        if np.any(self.charging + self.discharging > 1):
            raise ParameterError("charge and discharge indicators are mutually exclusive")

    @property
    def window_length(self):
        return self.power_kw.size

    @property
    def signed_power(self):
        """Positive while charging, negative while discharging."""
        return self.power_kw * (self.charging - self.discharging)

    def hours(self):
        return [(self.arrive_hour + t) % HOURS for t in range(self.window_length)]

    def by_hour(self):
        """(charge_kw, discharge_kw) aggregated onto the absolute 24 h axis."""
        charge = np.zeros(HOURS)
        discharge = np.zeros(HOURS)
        for t, h in enumerate(self.hours()):
            charge[h] += self.power_kw[t] * self.charging[t]
            discharge[h] += self.power_kw[t] * self.discharging[t]
        return charge, discharge

    def throughput_kwh(self, dt: float = 1.0):
        return float(np.sum(self.power_kw) * dt)


def soc_transition(soc, p_kw, i_charge, i_discharge, profile: EvProfile,
                   dt: float = 1.0):
    """One-step SOC update: charging stores ``p*eta_c*dt/E``, discharging
    spends ``p*dt/(eta_d*E)``; idle leaves the SOC unchanged.

    Raises SocBoundsError when the result leaves [soc_min, soc_max].
    """
    if i_charge and i_discharge:
        raise ParameterError("cannot charge and discharge in the same step")
    if p_kw < 0.0 or p_kw > profile.p_max_kw + 1e-9:
        raise ParameterError(f"power must lie in [0, {profile.p_max_kw}]")
    out = soc
    if i_charge:
        out = soc + p_kw * profile.eta_charge * dt / profile.capacity_kwh
    elif i_discharge:
        out = soc - p_kw * dt / (profile.eta_discharge * profile.capacity_kwh)
    if out < profile.soc_min - 1e-9 or out > profile.soc_max + 1e-9:
        raise SocBoundsError(
            f"ev {profile.ev_id}: SOC {out:.4f} outside "
            f"[{profile.soc_min}, {profile.soc_max}]"
        )
    return out


def _bang_bang_schedule(profile: EvProfile, charge_steps):
    """Build a schedule charging at full power exactly at the given window
    steps, idle elsewhere."""
    n = profile.window_length
    power = np.zeros(n)
    charging = np.zeros(n, dtype=int)
    soc = np.empty(n + 1)
    soc[0] = profile.soc_arrival
    for t in range(n):
        if t in charge_steps:
            power[t] = profile.p_max_kw
            charging[t] = 1
            soc[t + 1] = soc[t] + profile.charge_step
        else:
            soc[t + 1] = soc[t]
    return EvSchedule(profile.ev_id, profile.arrive_hour, power, charging,
                      np.zeros(n, dtype=int), soc)


def max_charge_count(profile: EvProfile):
    """Full-power charging hours that fit under soc_max."""
    return int(math.floor((profile.soc_max - profile.soc_arrival)
                          / profile.charge_step + 1e-9))


def required_charge_count(profile: EvProfile):
    """Full-power charging hours needed to reach the departure SOC."""
    deficit = profile.soc_target - profile.soc_arrival
    if deficit <= 1e-12:
        return 0
    return int(math.ceil(deficit / profile.charge_step - 1e-9))


def immediate_charge_schedule(profile: EvProfile) -> EvSchedule:
    """Charge at full power from arrival until soc_max no longer admits a
    full step; the maximal trip-readiness reference and the plan used by
    uncontrollable vehicles."""
    a = min(max_charge_count(profile), profile.window_length)
    return _bang_bang_schedule(profile, set(range(a)))


def latest_charge_schedule(profile: EvProfile) -> EvSchedule:
    """Charge at full power in the last window hours, just meeting the
    departure SOC; the minimal trip-readiness reference."""
    a = required_charge_count(profile)
    n = profile.window_length
    if a > n or profile.soc_arrival + a * profile.charge_step > profile.soc_max + 1e-9:
        raise InfeasibleError(
            f"ev {profile.ev_id} cannot reach departure SOC within its window",
            ev_id=profile.ev_id,
        )
    return _bang_bang_schedule(profile, set(range(n - a, n)))


def reference_schedules(profile: EvProfile):
    """(maximal, minimal) trip-readiness reference schedules."""
    return immediate_charge_schedule(profile), latest_charge_schedule(profile)


@dataclass(frozen=True)
class SatisfactionBounds:
    """Affordability window for the price-satisfaction function plus the
    battery-wear accounting constants."""

    f_max: float
    f_min: float
    replacement_cost: float = 18000.0      # yuan per battery
    lifetime_throughput_kwh: float = 100000.0

    def __post_init__(self):
        if self.f_max <= self.f_min:
            raise ParameterError("need f_max > f_min")
        if self.replacement_cost <= 0.0 or self.lifetime_throughput_kwh <= 0.0:
            raise ParameterError("wear constants must be positive")

    @property
    def wear_rate(self):
        """Degradation cost per kWh of throughput."""
        return self.replacement_cost / self.lifetime_throughput_kwh


def battery_degradation_cost(schedule: EvSchedule, bounds: SatisfactionBounds,
                             dt: float = 1.0):
    """Linear throughput wear: |p| summed over the schedule times the
    per-kWh replacement share."""
    return schedule.throughput_kwh(dt) * bounds.wear_rate


def schedule_energy_cost(schedule: EvSchedule, charge_price, discharge_price,
                         dt: float = 1.0):
    """Owner's net electricity bill: pay for charging at the vehicle tariff,
    earn the discharge tariff for energy fed back."""
    charge_price = np.asarray(charge_price, dtype=float)
    discharge_price = np.asarray(discharge_price, dtype=float)
    hours = np.asarray(schedule.hours())
    pay = schedule.power_kw * schedule.charging * charge_price[hours]
    earn = schedule.power_kw * schedule.discharging * discharge_price[hours]
    return float((pay - earn).sum() * dt)


def schedule_total_cost(schedule: EvSchedule, charge_price, discharge_price,
                        wear_rate: float, dt: float = 1.0):
    """Electricity bill plus battery wear."""
    return (schedule_energy_cost(schedule, charge_price, discharge_price, dt)
            + schedule.throughput_kwh(dt) * wear_rate)


def price_satisfaction(f_ev: float, bounds: SatisfactionBounds):
    """1 at the affordable minimum, falling linearly and clamped to [0, 1]."""
    width = bounds.f_max - bounds.f_min
    theta = 1.0 - abs(f_ev - bounds.f_min) / width
    return float(np.clip(theta, 0.0, 1.0))


def travel_contribution(signed_power, ref_max_signed, ref_min_signed):
    """One vehicle's travel-satisfaction term: 1 when the plan matches the
    maximal-readiness profile, 0 at the minimal one.  Degenerate references
    (no flexibility) contribute 1."""
    signed_power = np.asarray(signed_power, dtype=float)
    ref_max_signed = np.asarray(ref_max_signed, dtype=float)
    ref_min_signed = np.asarray(ref_min_signed, dtype=float)
    den = float(np.abs(ref_max_signed - ref_min_signed).sum())
    if den == 0.0:
        return 1.0
    return 1.0 - float(np.abs(ref_max_signed - signed_power).sum()) / den


def travel_satisfaction(schedules, references):
    """Fleet travel satisfaction: mean of per-vehicle contributions, so the
    result stays in [0, 1] however many vehicles are aggregated."""
    contribs = [
        travel_contribution(s.signed_power, rmax.signed_power, rmin.signed_power)
        for s, (rmax, rmin) in zip(schedules, references)
    ]
    if not contribs:
        raise ParameterError("travel_satisfaction needs at least one schedule")
    return float(np.mean(contribs))


def comprehensive_satisfaction(thetas, deltas):
    """Mean over entities of (price + travel) satisfaction, range [0, 2]."""
    thetas = np.asarray(thetas, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    if thetas.size == 0 or thetas.shape != deltas.shape:
        raise ParameterError("need equal-length, non-empty satisfaction inputs")
    return float(np.mean(thetas + deltas))


def _fold_clock(x, mean):
    """Wrap a normal draw into the 24 h window centred on its mean, then to
    clock time in [0, 24)."""
    folded = (x - (mean - 12.0)) % HOURS + (mean - 12.0)
    return folded % HOURS, folded


def sample_fleet(n: int, model: EvBehaviorModel, battery: BatteryParams,
                 controllable_fraction: float, seed, microgrid: int = 0):
    """Monte-Carlo fleet synthesis.

    Every vehicle gets its own substream derived from ``seed``, so the fleet
    is identical regardless of evaluation order.  Arrival SOC follows from
    the sampled mileage and is raised if needed so the departure target is
    reachable by full-power charging within the window.
    """
    if n < 1:
        raise ParameterError("fleet size must be >= 1")
    n_controllable = int(round(n * controllable_fraction))
    children = np.random.SeedSequence(seed).spawn(n)
    fleet = []
    charge_step = battery.p_max_kw * battery.eta_charge / battery.capacity_kwh
    for i in range(n):
        rng = np.random.default_rng(children[i])
        ret_clock, _ = _fold_clock(rng.normal(model.return_mean, model.return_std),
                                   model.return_mean)
        dep_clock, _ = _fold_clock(rng.normal(model.depart_mean, model.depart_std),
                                   model.depart_mean)
        mileage = float(np.exp(rng.normal(model.log_mileage_mean,
                                          model.log_mileage_std)))
        arrive = int(math.ceil(ret_clock)) % HOURS
        depart = int(math.floor(dep_clock)) % HOURS
        window = (depart - arrive) % HOURS
        if window == 0:
            window = HOURS
        soc_arrival = battery.soc_target - mileage * model.kwh_per_km / battery.capacity_kwh
        soc_arrival = max(soc_arrival, battery.soc_target - window * charge_step)
        soc_arrival = min(max(soc_arrival, battery.soc_min), battery.soc_max)
        fleet.append(EvProfile(
            ev_id=i,
            microgrid=microgrid,
            controllable=i < n_controllable,
            arrive_hour=arrive,
            depart_hour=depart,
            soc_arrival=soc_arrival,
            soc_target=battery.soc_target,
            capacity_kwh=battery.capacity_kwh,
            p_max_kw=battery.p_max_kw,
            eta_charge=battery.eta_charge,
            eta_discharge=battery.eta_discharge,
            soc_min=battery.soc_min,
            soc_max=battery.soc_max,
            return_time=float(ret_clock),
            depart_time=float(dep_clock),
            mileage_km=mileage,
        ))
    return fleet
