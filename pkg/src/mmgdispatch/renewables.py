"""Wind and PV output models, forecast-error scenario generation, and
probability-distance scenario reduction.

Power quantities are kW, wind speeds m/s, irradiance W/m², temperatures °C.
All sampling is driven by an explicit ``numpy.random.Generator`` so results
are reproducible from a seed.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ParameterError

# Quantity axis order used by ScenarioSet values: (wind, pv, load).
QUANTITIES = ("wt", "pv", "load")
HOURS = 24


@dataclass(frozen=True)
class WindParams:
    """Turbine power-curve and wind-speed distribution parameters."""

    cut_in: float          # m/s
    rated_speed: float     # m/s
    cut_out: float         # m/s
    rated_power_kw: float
    weibull_shape: float = 2.0
    weibull_scale: float = 8.0

    def __post_init__(self):
        if not (0.0 < self.cut_in < self.rated_speed < self.cut_out):
            raise ParameterError(
                "wind speeds must satisfy 0 < cut_in < rated < cut_out, got "
                f"{self.cut_in}, {self.rated_speed}, {self.cut_out}"
            )
        if self.rated_power_kw <= 0.0:
            raise ParameterError("rated_power_kw must be positive")
        if self.weibull_shape <= 0.0 or self.weibull_scale <= 0.0:
            raise ParameterError("Weibull shape and scale must be positive")


@dataclass(frozen=True)
class PvParams:
    """Engineering PV array model parameters (single-diode style fit)."""

    short_circuit_a: float       # I_sc
    open_circuit_v: float        # U_oc
    mpp_voltage_v: float         # voltage at the nameplate maximum-power point
    mpp_current_a: float         # current at the nameplate maximum-power point
    irradiance_ref: float = 1000.0   # W/m²
    series_resistance: float = 0.3   # ohm
    temp_ref: float = 25.0           # °C cell reference temperature
    temp_coeff: float = -0.03        # °C·m²/W, cell = ambient - temp_coeff*A
    current_comp: float = 0.0025     # A/°C current temperature compensation
    voltage_comp: float = 0.08       # V/°C voltage temperature compensation

    def __post_init__(self):
        if not (0.0 < self.mpp_voltage_v < self.open_circuit_v):
            raise ParameterError("need 0 < mpp_voltage_v < open_circuit_v")
        if not (0.0 < self.mpp_current_a < self.short_circuit_a):
            raise ParameterError("need 0 < mpp_current_a < short_circuit_a")
        if self.irradiance_ref <= 0.0:
            raise ParameterError("irradiance_ref must be positive")


def weibull_pdf(v, params: WindParams):
    """Wind-speed probability density."""
    v = np.asarray(v, dtype=float)
    m, g = params.weibull_shape, params.weibull_scale
    out = (m / g) * (v / g) ** (m - 1.0) * np.exp(-((v / g) ** m))
    return np.where(v >= 0.0, out, 0.0)


def wind_power_from_speed(v, params: WindParams):
    """Piecewise turbine output for wind speed ``v`` (scalar or array), kW.

    Below cut-in and above cut-out the turbine produces nothing; between
    cut-in and rated speed output follows the cubic ramp whose coefficients
    make the curve continuous; between rated and cut-out it holds rated
    power.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0):
        raise ParameterError("wind speed must be non-negative")
    ci3 = params.cut_in**3
    r3 = params.rated_speed**3
    k1 = params.rated_power_kw / (r3 - ci3)
    k2 = ci3 / (r3 - ci3)
    ramp = k1 * v**3 - k2 * params.rated_power_kw
    out = np.where(
        (v > params.cut_in) & (v <= params.rated_speed),
        ramp,
        np.where(
            (v > params.rated_speed) & (v <= params.cut_out),
            params.rated_power_kw,
            0.0,
        ),
    )
    out = np.clip(out, 0.0, params.rated_power_kw)
    return float(out) if out.ndim == 0 else out


def pv_cell_current(u, irradiance, t_ambient, params: PvParams):
    """Array current (A) at terminal voltage ``u`` for the given conditions."""
    p = params
    u = np.asarray(u, dtype=float)
    c2 = (p.mpp_voltage_v / p.open_circuit_v - 1.0) / np.log(
        1.0 - p.mpp_current_a / p.short_circuit_a
    )
    c1 = (1.0 - p.mpp_current_a / p.short_circuit_a) * np.exp(
        -p.mpp_voltage_v / (c2 * p.open_circuit_v)
    )
    t_cell = t_ambient - p.temp_coeff * irradiance
    dt = t_cell - p.temp_ref
    di = (
        p.current_comp * dt * irradiance / p.irradiance_ref
        + (irradiance / p.irradiance_ref - 1.0) * p.short_circuit_a
    )
    du = -p.voltage_comp * dt - p.series_resistance * di
    i = p.short_circuit_a * (
        1.0 - c1 * (np.exp((u - du) / (c2 * p.open_circuit_v)) - 1.0)
    ) + di
    return i


def pv_max_power(irradiance, t_ambient, params: PvParams,
                 grid_points: int = 1000, refine_rounds: int = 3):
    """Maximum-power-point output in kW found by a voltage-grid scan.

    A uniform grid over the shifted voltage range is scanned, then the
    bracket around the best point is re-gridded ``refine_rounds`` times.
    Negative currents are treated as zero output.
    """
    if irradiance < 0.0:
        raise ParameterError("irradiance must be non-negative")
    p = params
    t_cell = t_ambient - p.temp_coeff * irradiance
    dt = t_cell - p.temp_ref
    di = (
        p.current_comp * dt * irradiance / p.irradiance_ref
        + (irradiance / p.irradiance_ref - 1.0) * p.short_circuit_a
    )
    du = -p.voltage_comp * dt - p.series_resistance * di
    lo, hi = 0.0, max(p.open_circuit_v + du, 1e-9)
    best = 0.0
    for _ in range(refine_rounds + 1):
        u = np.linspace(lo, hi, grid_points)
        pw = u * np.clip(pv_cell_current(u, irradiance, t_ambient, p), 0.0, None)
        k = int(np.argmax(pw))
        best = max(best, float(pw[k]))
        step = (hi - lo) / (grid_points - 1)
        lo, hi = max(u[k] - step, 0.0), u[k] + step
    return best / 1000.0


def lhs_sample(n: int, dims: int, rng: np.random.Generator):
    """Latin hypercube sample: ``n`` points in (0,1)^dims.

    Per dimension exactly one point lands in each of the ``n`` equal strata,
    and the stratum order is permuted independently per dimension.
    """
    if n < 1 or dims < 1:
        raise ParameterError("lhs_sample needs n >= 1 and dims >= 1")
    out = np.empty((n, dims))
    for d in range(dims):
        perm = rng.permutation(n)
        u = rng.random(n)
        out[:, d] = (perm + u) / n
    return np.clip(out, 1e-12, 1.0 - 1e-12)


@dataclass(frozen=True)
class ForecastErrorModel:
    """Multiplicative forecast-error model.

    Hourly draws T from the configured distribution perturb a day-ahead
    trajectory as ``P * (1 + tau * (T - lam))``.
    """

    kind: str               # "normal" or "beta"
    mu: float = 0.5
    sigma: float = 0.33
    alpha: float = 2.5
    beta: float = 2.5
    tau: float = 0.1
    lam: float = 0.5

    def __post_init__(self):
        if self.kind not in ("normal", "beta"):
            raise ParameterError(f"unknown error-model kind {self.kind!r}")
        if self.kind == "normal" and self.sigma <= 0.0:
            raise ParameterError("sigma must be positive")
        if self.kind == "beta" and (self.alpha <= 0.0 or self.beta <= 0.0):
            raise ParameterError("alpha and beta must be positive")

    @property
    def normalization(self):
        """Density normalization constant (beta kind only)."""
        if self.kind != "beta":
            raise ParameterError("normalization applies to the beta kind")
        return 1.0 / special.beta(self.alpha, self.beta)

    def mean(self):
        if self.kind == "normal":
            return self.mu
        return self.alpha / (self.alpha + self.beta)

    def inverse_cdf(self, u):
        """Map uniforms in (0,1) to draws of T (vectorized, deterministic)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "normal":
            return self.mu + self.sigma * special.ndtri(u)
        # Bisection on the regularized incomplete beta function; 60 halvings
        # push the bracket well below 1e-10.
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = special.betainc(self.alpha, self.beta, mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def wind_error_model(tau: float = 0.1) -> ForecastErrorModel:
    return ForecastErrorModel(kind="beta", alpha=2.5, beta=2.5, tau=tau, lam=0.5)


def normal_error_model(tau: float = 0.1) -> ForecastErrorModel:
    return ForecastErrorModel(kind="normal", mu=0.5, sigma=0.33, tau=tau, lam=0.5)


def generate_forecast_scenarios(p_da, err: ForecastErrorModel, n_sc: int,
                                rng: np.random.Generator):
    """Sample ``n_sc`` perturbed trajectories around a day-ahead forecast.

    Uniform LHS draws (one dimension per hour) are pushed through the error
    distribution's inverse CDF; negative powers are clamped to zero.
    """
    p_da = np.asarray(p_da, dtype=float)
    if n_sc < 1:
        raise ParameterError("n_sc must be >= 1")
    if np.any(p_da < 0.0):
        raise ParameterError("day-ahead forecast must be non-negative")
    u = lhs_sample(n_sc, p_da.size, rng)
    t = err.inverse_cdf(u)
    scen = p_da[None, :] * (1.0 + err.tau * (t - err.lam))
    return np.clip(scen, 0.0, None)


@dataclass
class ScenarioSet:
    """Weighted joint (wind, pv, load) trajectories for every microgrid.

    ``values`` has shape (n_scenarios, n_microgrids, 3, 24) with the
    quantity axis ordered per ``QUANTITIES``; ``probabilities`` has one
    weight per scenario.
    """

    values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.values.ndim != 4 or self.values.shape[2] != len(QUANTITIES) \
                or self.values.shape[3] != HOURS:
            raise ParameterError(
                f"values must have shape (S, K, 3, {HOURS}), got {self.values.shape}"
            )
        if self.probabilities.shape != (self.values.shape[0],):
            raise ParameterError("one probability per scenario required")
        if self.values.shape[0] == 0:
            raise ParameterError("scenario set is empty")
        if np.any(self.probabilities < 0.0):
            raise ParameterError("probabilities must be non-negative")
        if abs(float(self.probabilities.sum()) - 1.0) > 1e-12:
            raise ParameterError("probabilities must sum to 1 within 1e-12")
        if np.any(self.values < 0.0):
            raise ParameterError("power trajectories must be non-negative")

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_microgrids(self):
        return self.values.shape[1]


def scenario_distance(a, b):
    """Distance between two scenarios: per-microgrid Euclidean norms of the
    concatenated 72-dimensional (wind, pv, load) vectors, summed over
    microgrids."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = (a - b).reshape(a.shape[0], -1)
    return float(np.linalg.norm(diff, axis=1).sum())


def _pairwise_distances(values):
    n, k = values.shape[0], values.shape[1]
    flat = values.reshape(n, k, -1)
    d = np.zeros((n, n))
    for m in range(k):
        x = flat[:, m, :]
        sq = np.sum(x**2, axis=1)
        g = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
        d += np.sqrt(np.clip(g, 0.0, None))
    np.fill_diagonal(d, np.inf)
    return d


def reduce_scenarios(sset: ScenarioSet, target: int) -> ScenarioSet:
    """Fast-backward probability-distance reduction to ``target`` scenarios.

    Each round scores every scenario by its probability times its
    probability-weighted distance to the closest surviving scenario,
    deletes the lowest-scoring one, and hands its probability to that
    nearest neighbor, so total probability is conserved at every step.
    """
    n = len(sset)
    if target < 1:
        raise ParameterError("target must be >= 1")
    if target > n:
        raise ParameterError(f"target {target} exceeds scenario count {n}")
    if target == n:
        return ScenarioSet(sset.values.copy(), sset.probabilities.copy())

    d = _pairwise_distances(sset.values)
    prob = sset.probabilities.copy()
    alive = np.ones(n, dtype=bool)
    nn_idx = np.argmin(d, axis=1)
    nn_dist = d[np.arange(n), nn_idx]

    for _ in range(n - target):
        score = np.where(alive, prob * (prob * nn_dist), np.inf)
        i = int(np.argmin(score))
        j = int(nn_idx[i])
        prob[j] += prob[i]
        prob[i] = 0.0
        alive[i] = False
        d[:, i] = np.inf
        d[i, :] = np.inf
        # Only rows whose nearest neighbor was the deleted scenario change.
        stale = alive & (nn_idx == i)
        for r in np.nonzero(stale)[0]:
            nn_idx[r] = int(np.argmin(d[r]))
            nn_dist[r] = d[r, nn_idx[r]]

    keep = np.nonzero(alive)[0]
    return ScenarioSet(sset.values[keep].copy(), prob[keep].copy())


def build_joint_scenarios(forecasts, tau: float, n_sc: int,
                          rng: np.random.Generator) -> ScenarioSet:
    """Generate equally weighted joint scenarios for all microgrids.

    ``forecasts`` is an array of shape (K, 3, 24) of day-ahead (wind, pv,
    load) trajectories.  Wind errors are beta-distributed, PV and load
    errors normal.
    """
    forecasts = np.asarray(forecasts, dtype=float)
    k = forecasts.shape[0]
    values = np.empty((n_sc, k, len(QUANTITIES), HOURS))
    for m in range(k):
        for q, quantity in enumerate(QUANTITIES):
            err = wind_error_model(tau) if quantity == "wt" else normal_error_model(tau)
            values[:, m, q, :] = generate_forecast_scenarios(
                forecasts[m, q], err, n_sc, rng
            )
    probs = np.full(n_sc, 1.0 / n_sc)
    probs[-1] = 1.0 - probs[:-1].sum()
    return ScenarioSet(values, probs)
