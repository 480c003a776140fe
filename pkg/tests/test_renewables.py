"""Wind/PV models, LHS, forecast scenarios, and scenario reduction."""

import numpy as np
import pytest

from mmgdispatch.errors import ParameterError
from mmgdispatch.renewables import (
    ForecastErrorModel,
    PvParams,
    ScenarioSet,
    WindParams,
    generate_forecast_scenarios,
    lhs_sample,
    normal_error_model,
    pv_cell_current,
    pv_max_power,
    reduce_scenarios,
    scenario_distance,
    weibull_pdf,
    wind_error_model,
    wind_power_from_speed,
)

WP = WindParams(cut_in=3.0, rated_speed=12.0, cut_out=25.0, rated_power_kw=500.0)


class TestWindCurve:
    def test_below_cut_in_is_zero(self):
        assert wind_power_from_speed(2.9, WP) == 0.0

    def test_rated_speed_gives_rated_power(self):
        assert wind_power_from_speed(12.0, WP) == pytest.approx(500.0, abs=1e-9)

    def test_cubic_ramp_hand_value(self):
        # k1 = 500/1701, k2 = 27/1701 -> P(8) = (500*512 - 27*500)/1701
        expected = (500.0 * 512.0 - 27.0 * 500.0) / 1701.0
        assert wind_power_from_speed(8.0, WP) == pytest.approx(expected, abs=1e-6)

    def test_continuity_at_transitions(self):
        eps = 1e-9
        lo = wind_power_from_speed(3.0, WP)
        hi = wind_power_from_speed(3.0 + eps, WP)
        assert abs(hi - lo) <= 1e-6
        lo = wind_power_from_speed(12.0 - 1e-12, WP)
        hi = wind_power_from_speed(12.0 + 1e-12, WP)
        assert abs(hi - lo) <= 1e-9 * WP.rated_power_kw

    def test_monotone_on_ramp(self):
        v = np.linspace(3.0, 12.0, 500)
        p = wind_power_from_speed(v, WP)
        assert np.all(np.diff(p) >= -1e-12)

    def test_zero_beyond_cut_out(self):
        assert wind_power_from_speed(25.01, WP) == 0.0
        assert wind_power_from_speed(40.0, WP) == 0.0

    def test_bad_ordering_rejected(self):
        with pytest.raises(ParameterError):
            WindParams(cut_in=12.0, rated_speed=3.0, cut_out=25.0,
                       rated_power_kw=500.0)

    def test_negative_speed_rejected(self):
        with pytest.raises(ParameterError):
            wind_power_from_speed(-1.0, WP)

    def test_weibull_pdf_integrates_to_one(self):
        v = np.linspace(0.0, 80.0, 200001)
        pdf = weibull_pdf(v, WP)
        assert np.trapezoid(pdf, v) == pytest.approx(1.0, abs=1e-6)


PV = PvParams(short_circuit_a=8.5, open_circuit_v=45.0, mpp_voltage_v=36.0,
              mpp_current_a=7.8)


class TestPvModel:
    def test_zero_irradiance_dark(self):
        out = pv_max_power(0.0, 25.0, PV)
        assert abs(out) <= 1e-6 * PV.mpp_voltage_v * PV.mpp_current_a / 1000.0

    def test_reference_conditions_hit_nameplate(self):
        # ambient chosen so the cell sits at its reference temperature
        t_a = PV.temp_ref + PV.temp_coeff * PV.irradiance_ref
        out = pv_max_power(PV.irradiance_ref, t_a, PV)
        nameplate = PV.mpp_voltage_v * PV.mpp_current_a / 1000.0
        assert out == pytest.approx(nameplate, rel=5e-3)

    def test_partial_irradiance_matches_dense_scan(self):
        irradiance = 0.8 * PV.irradiance_ref
        t_a = PV.temp_ref + PV.temp_coeff * irradiance
        # independent oracle: one dense 1e5-point scan of the current curve
        u = np.linspace(0.0, PV.open_circuit_v * 1.2, 100000)
        i = np.clip(pv_cell_current(u, irradiance, t_a, PV), 0.0, None)
        oracle = float(np.max(u * i)) / 1000.0
        out = pv_max_power(irradiance, t_a, PV)
        assert out == pytest.approx(oracle, rel=1e-4)

    def test_output_non_negative(self):
        for a in (0.0, 150.0, 600.0, 1200.0):
            for t_a in (-10.0, 20.0, 40.0):
                assert pv_max_power(a, t_a, PV) >= 0.0

    def test_bad_params_rejected(self):
        with pytest.raises(ParameterError):
            PvParams(short_circuit_a=5.0, open_circuit_v=45.0,
                     mpp_voltage_v=50.0, mpp_current_a=4.0)


class TestLhs:
    def test_one_sample_per_stratum(self):
        rng = np.random.default_rng(1)
        x = lhs_sample(4, 1, rng)[:, 0]
        strata = np.sort(np.floor(x * 4).astype(int))
        assert list(strata) == [0, 1, 2, 3]

    def test_single_draw_in_unit_interval(self):
        rng = np.random.default_rng(2)
        x = lhs_sample(1, 1, rng)
        assert 0.0 < x[0, 0] < 1.0

    def test_large_sample_mean(self):
        rng = np.random.default_rng(3)
        x = lhs_sample(1000, 3, rng)
        assert np.all(np.abs(x.mean(axis=0) - 0.5) < 0.01)

    def test_stratification_all_dims(self):
        rng = np.random.default_rng(4)
        n = 50
        x = lhs_sample(n, 5, rng)
        for d in range(5):
            strata = np.sort(np.floor(x[:, d] * n).astype(int))
            assert list(strata) == list(range(n))

    def test_zero_count_rejected(self):
        with pytest.raises(ParameterError):
            lhs_sample(0, 1, np.random.default_rng(0))


class TestErrorModels:
    def test_normal_inverse_cdf_accuracy(self):
        from scipy import stats
        err = normal_error_model()
        u = np.linspace(0.001, 0.999, 97)
        expected = stats.norm.ppf(u, loc=0.5, scale=0.33)
        assert np.allclose(err.inverse_cdf(u), expected, atol=1e-9)

    def test_beta_inverse_cdf_accuracy(self):
        from scipy import stats
        err = wind_error_model()
        u = np.linspace(0.001, 0.999, 97)
        expected = stats.beta.ppf(u, 2.5, 2.5)
        assert np.allclose(err.inverse_cdf(u), expected, atol=1e-9)

    def test_beta_normalization_constant(self):
        from scipy import special
        err = wind_error_model()
        assert err.normalization == pytest.approx(
            1.0 / special.beta(2.5, 2.5), rel=1e-12)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ParameterError):
            ForecastErrorModel(kind="cauchy")


class TestForecastScenarios:
    def test_zero_tau_reproduces_forecast(self):
        p_da = np.linspace(10.0, 100.0, 24)
        err = normal_error_model(tau=0.0)
        scen = generate_forecast_scenarios(p_da, err, 7, np.random.default_rng(5))
        assert np.allclose(scen, p_da[None, :])

    def test_forced_arithmetic(self):
        # P = 100, tau = 0.1, T = 0.8, lam = 0.5 -> 103
        err = normal_error_model(tau=0.1)
        assert 100.0 * (1.0 + err.tau * (0.8 - err.lam)) == pytest.approx(103.0)

    def test_draw_mean_converges(self):
        # sample mean of (P/P_da - 1)/tau approaches E[T] - lam = 0
        p_da = np.full(24, 50.0)
        for err in (normal_error_model(tau=0.1), wind_error_model(tau=0.1)):
            scen = generate_forecast_scenarios(p_da, err, 4000,
                                               np.random.default_rng(6))
            stat = (scen / p_da[None, :] - 1.0) / err.tau
            assert abs(stat.mean() - (err.mean() - err.lam)) < 0.01

    def test_negative_clamped(self):
        p_da = np.full(24, 1.0)
        err = ForecastErrorModel(kind="normal", mu=0.5, sigma=0.33, tau=50.0)
        scen = generate_forecast_scenarios(p_da, err, 50, np.random.default_rng(7))
        assert np.all(scen >= 0.0)


def _toy_set(values, probs):
    return ScenarioSet(np.asarray(values, dtype=float),
                       np.asarray(probs, dtype=float))


def _random_set(rng, n, k=1):
    vals = rng.uniform(0.0, 100.0, size=(n, k, 3, 24))
    probs = rng.dirichlet(np.ones(n))
    probs[-1] = 1.0 - probs[:-1].sum()
    return _toy_set(vals, probs)


def _brute_force_reduce(sset, target):
    """Literal transcription of the probability-distance deletion rule."""
    vals = sset.values.copy()
    probs = sset.probabilities.copy()
    alive = list(range(len(sset)))
    order = []
    while len(alive) > target:
        best = None
        for i in alive:
            dists = [(scenario_distance(vals[i], vals[j]), j)
                     for j in alive if j != i]
            d_i, j_near = min(dists)
            score = probs[i] * (probs[i] * d_i)
            if best is None or score < best[0]:
                best = (score, i, j_near)
        _, i, j = best
        probs[j] += probs[i]
        order.append(i)
        alive.remove(i)
    return order, {i: probs[i] for i in alive}


class TestReduction:
    def test_identical_scenarios_merge(self):
        vals = np.ones((2, 1, 3, 24))
        sset = _toy_set(vals, [0.4, 0.6])
        out = reduce_scenarios(sset, 1)
        assert len(out) == 1
        assert out.probabilities[0] == pytest.approx(1.0, abs=1e-12)

    def test_probability_conserved(self):
        rng = np.random.default_rng(8)
        sset = _random_set(rng, 40)
        out = reduce_scenarios(sset, 5)
        assert len(out) == 5
        assert abs(out.probabilities.sum() - 1.0) <= 1e-12

    def test_matches_brute_force_on_toys(self):
        rng = np.random.default_rng(9)
        for trial in range(100):
            n = int(rng.integers(3, 6))
            sset = _random_set(rng, n)
            target = int(rng.integers(1, n))
            expected_order, expected_probs = _brute_force_reduce(sset, target)
            out = reduce_scenarios(sset, target)
            kept = sorted(expected_probs)
            assert len(out) == target
            for pos, idx in enumerate(kept):
                assert np.allclose(out.values[pos], sset.values[idx])
                assert out.probabilities[pos] == pytest.approx(
                    expected_probs[idx], abs=1e-12)

    def test_mean_shift_bounded(self):
        # the weighted mean moves at most the probability-weighted distance
        # of what was deleted
        rng = np.random.default_rng(10)
        for _ in range(20):
            sset = _random_set(rng, 8)
            out = reduce_scenarios(sset, 3)
            mean_in = np.tensordot(sset.probabilities, sset.values, axes=1)
            mean_out = np.tensordot(out.probabilities, out.values, axes=1)
            shift = scenario_distance(mean_in[None][0], mean_out[None][0])
            kept_mask = np.array([
                any(np.allclose(v, w) for w in out.values) for v in sset.values
            ])
            deleted_budget = 0.0
            for i in np.nonzero(~kept_mask)[0]:
                dists = [scenario_distance(sset.values[i], w) for w in out.values]
                deleted_budget += sset.probabilities[i] * min(dists)
            assert shift <= deleted_budget + 1e-9

    def test_target_bounds(self):
        rng = np.random.default_rng(11)
        sset = _random_set(rng, 4)
        with pytest.raises(ParameterError):
            reduce_scenarios(sset, 0)
        with pytest.raises(ParameterError):
            reduce_scenarios(sset, 5)

    def test_invalid_probabilities_rejected(self):
        with pytest.raises(ParameterError):
            _toy_set(np.ones((2, 1, 3, 24)), [0.5, 0.6])
