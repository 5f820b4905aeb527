import math

import numpy as np
import pytest

from dedtwin.errors import EmptyOverlapError
from dedtwin.signals import (
    TimeSeries,
    denormalize_minmax,
    exp_transform,
    fit_metrics,
    log_transform,
    lowpass,
    metrics_from_arrays,
    moving_average,
    normalize_minmax,
    read_timeseries_csv,
    remove_mean,
    resample_sync,
    write_timeseries_csv,
)


def ts(values, dt=0.03, t0=0.0, unit="mm"):
    return TimeSeries(t0, dt, np.asarray(values, dtype=float), unit)


def naive_moving_average(values, window):
    """O(n*w) oracle: truncated centered window."""
    n = len(values)
    lo = (window - 1) // 2
    hi = window // 2
    out = []
    for k in range(n):
        a = max(k - lo, 0)
        b = min(k + hi, n - 1)
        out.append(sum(values[a:b + 1]) / (b - a + 1))
    return np.array(out)


class TestTimeSeries:
    def test_invariants(self):
        with pytest.raises(ValueError):
            TimeSeries(0.0, -0.01, [1.0])
        with pytest.raises(ValueError):
            TimeSeries(0.0, 0.01, [])
        with pytest.raises(ValueError):
            TimeSeries(0.0, 0.01, [1.0, float("nan")])

    def test_values_are_read_only(self):
        s = ts([1, 2, 3])
        with pytest.raises(ValueError):
            s.values[0] = 9.0

    def test_times(self):
        s = ts([1, 2, 3], dt=0.5, t0=1.0)
        assert np.allclose(s.times, [1.0, 1.5, 2.0])
        assert s.t_end == 2.0


class TestMovingAverage:
    def test_constant_series(self):
        s = moving_average(ts([5, 5, 5, 5]), 3)
        assert np.allclose(s.values, [5, 5, 5, 5])

    def test_unit_impulse_window3(self):
        s = moving_average(ts([0, 0, 1, 0, 0]), 3)
        assert np.allclose(s.values, [0, 1 / 3, 1 / 3, 1 / 3, 0])

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(7)
        for n, w in [(20, 8), (50, 1), (9, 9), (33, 4), (100, 7)]:
            x = rng.normal(size=n)
            got = moving_average(ts(x), w).values
            assert np.allclose(got, naive_moving_average(x, w), atol=1e-12)

    def test_idempotent_on_constants(self):
        s = ts(np.full(30, 2.5))
        once = moving_average(s, 8)
        twice = moving_average(once, 8)
        assert np.allclose(once.values, twice.values)

    def test_window_bounds(self):
        with pytest.raises(ValueError):
            moving_average(ts([1, 2, 3]), 0)
        with pytest.raises(ValueError):
            moving_average(ts([1, 2, 3]), 4)

    def test_grid_preserved(self):
        s = ts(np.arange(10.0), dt=0.25, t0=3.0)
        out = moving_average(s, 8)
        assert (out.t0, out.dt, len(out)) == (3.0, 0.25, 10)


class TestLowpass:
    def test_dc_gain(self):
        s = ts(np.full(200, 2.0))
        out = lowpass(s, 13.0)
        assert np.allclose(out.values, 2.0, atol=1e-9)

    def test_passband_and_stopband(self):
        dt = 0.001
        cutoff = 5.0
        t = np.arange(0, 20.0, dt)
        for freq, lo, hi in [(0.1 * cutoff, 0.95, 1.01), (10 * cutoff, 0.0, 0.2)]:
            x = np.sin(2 * np.pi * freq * t)
            y = lowpass(TimeSeries(0.0, dt, x), cutoff).values
            # interior amplitude ratio, away from edge transients
            n = len(t)
            sl = slice(n // 4, 3 * n // 4)
            ratio = np.sqrt(np.mean(y[sl] ** 2) / np.mean(x[sl] ** 2))
            assert lo < ratio < hi

    def test_zero_phase(self):
        dt = 0.01
        t = np.arange(0, 10.0, dt)
        x = np.sin(2 * np.pi * 1.0 * t)
        y = lowpass(TimeSeries(0.0, dt, x), 3.0).values
        sl = slice(100, 900)
        lags = range(-5, 6)
        xs = x[sl]
        corr = [np.dot(xs, y[sl.start + lag:sl.stop + lag]) for lag in lags]
        assert list(lags)[int(np.argmax(corr))] == 0

    def test_cutoff_validation(self):
        s = ts(np.zeros(10), dt=0.03)
        with pytest.raises(ValueError):
            lowpass(s, 0.5 / 0.03)  # at Nyquist
        with pytest.raises(ValueError):
            lowpass(s, 0.0)

    def test_default_cutoff_valid_at_default_dt(self):
        # 13 Hz sits below the 16.67 Hz Nyquist of the 0.03 s grid
        s = ts(np.random.default_rng(0).normal(size=100), dt=0.03)
        out = lowpass(s)
        assert len(out) == len(s)


class TestResampleSync:
    def test_identity(self):
        a = ts([1, 2, 3, 4], dt=0.03)
        b = ts([5, 6, 7, 8], dt=0.03)
        ra, rb = resample_sync([a, b], 0.03)
        assert np.allclose(ra.values, a.values)
        assert np.allclose(rb.values, b.values)

    def test_linear_interpolation_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=61)
        s = TimeSeries(0.0, 0.01, x)
        (out,) = resample_sync([s], 0.03)
        expected = np.interp(out.times, s.times, x)
        assert np.allclose(out.values, expected)
        # interior points are genuine 3-sample strides of the source
        assert np.allclose(out.values, x[::3])

    def test_common_grid(self):
        a = TimeSeries(0.0, 0.01, np.arange(200.0))
        b = TimeSeries(0.55, 0.02, np.arange(50.0))
        ra, rb = resample_sync([a, b], 0.03)
        assert ra.t0 == rb.t0 == 0.55
        assert ra.dt == rb.dt == 0.03
        assert len(ra) == len(rb)

    def test_no_overlap(self):
        a = TimeSeries(0.0, 0.01, np.zeros(10))
        b = TimeSeries(5.0, 0.01, np.zeros(10))
        with pytest.raises(EmptyOverlapError):
            resample_sync([a, b], 0.03)


class TestRemoveMean:
    def test_simple(self):
        out, m = remove_mean(ts([1, 2, 3]))
        assert m == 2.0
        assert np.allclose(out.values, [-1, 0, 1])

    def test_zero_mean_unchanged(self):
        out, m = remove_mean(ts([-1, 0, 1]))
        assert m == 0.0
        assert np.allclose(out.values, [-1, 0, 1])

    def test_large_random(self):
        x = np.random.default_rng(11).normal(5.0, 2.0, size=1000)
        out, m = remove_mean(ts(x))
        assert abs(float(np.mean(out.values))) < 1e-12
        assert np.allclose(out.values + m, x)


class TestNormalize:
    def test_simple(self):
        out, lo, hi = normalize_minmax(ts([2, 4, 6]))
        assert (lo, hi) == (2.0, 6.0)
        assert np.allclose(out.values, [0, 0.5, 1])

    def test_degenerate_constant(self):
        out, lo, hi = normalize_minmax(ts([7, 7]))
        assert lo == hi == 7.0
        assert np.allclose(out.values, [0, 0])

    def test_round_trip(self):
        x = np.random.default_rng(2).uniform(-3, 9, size=200)
        s = ts(x)
        norm, lo, hi = normalize_minmax(s)
        back = denormalize_minmax(norm, lo, hi, unit=s.unit)
        assert np.allclose(back.values, x, atol=1e-12)
        assert np.all(norm.values >= 0) and np.all(norm.values <= 1)

    def test_degenerate_round_trip(self):
        norm, lo, hi = normalize_minmax(ts([7, 7]))
        back = denormalize_minmax(norm, lo, hi)
        assert np.allclose(back.values, [7, 7])


class TestLogExp:
    def test_known_values(self):
        s = ts([1.0, math.e, math.e ** 2])
        assert np.allclose(log_transform(s).values, [0, 1, 2])

    def test_inverse_pair(self):
        x = np.random.default_rng(4).uniform(0.1, 50.0, size=100)
        s = ts(x)
        assert np.allclose(exp_transform(log_transform(s)).values, x, atol=1e-12)

    def test_domain_error_names_index(self):
        with pytest.raises(ValueError, match="sample 2"):
            log_transform(ts([1.0, 2.0, 0.0, 3.0]))


class TestFitMetrics:
    def test_perfect_fit(self):
        a = ts([1, 2, 3, 4])
        m = fit_metrics(a, a)
        assert m.rmse == 0 and m.mae == 0
        assert m.r2 == 1.0 and m.bf_percent == 100.0

    def test_mean_predictor_r2_zero(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        m = metrics_from_arrays(np.full(4, a.mean()), a)
        assert abs(m.r2) < 1e-12

    def test_matches_direct_summation_oracle(self):
        rng = np.random.default_rng(9)
        p = rng.normal(size=100)
        a = rng.normal(size=100)
        m = metrics_from_arrays(p, a)
        sse = sum((pi - ai) ** 2 for pi, ai in zip(p, a))
        sst = sum((ai - sum(a) / 100) ** 2 for ai in a)
        assert abs(m.rmse - math.sqrt(sse / 100)) < 1e-12
        assert abs(m.mae - sum(abs(pi - ai) for pi, ai in zip(p, a)) / 100) < 1e-12
        assert abs(m.r2 - (1 - sse / sst)) < 1e-12
        assert abs(m.bf_percent - 100 * m.r2) < 1e-12

    def test_rmse_at_least_mae(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            p = rng.normal(size=50)
            a = rng.normal(size=50)
            m = metrics_from_arrays(p, a)
            assert m.rmse >= m.mae >= 0

    def test_errors(self):
        with pytest.raises(ValueError):
            metrics_from_arrays([1, 2], [1, 2, 3])
        with pytest.raises(ValueError, match="constant"):
            metrics_from_arrays([1, 2, 3], [5, 5, 5])


class TestCsv:
    def test_round_trip(self, tmp_path):
        s = TimeSeries(0.12, 0.03, np.array([1.5, 2.25, -0.75]), "mm")
        path = tmp_path / "mpw.csv"
        write_timeseries_csv(path, s, "mpw")
        back, name = read_timeseries_csv(path)
        assert name == "mpw"
        assert back.unit == "mm"
        assert back.t0 == s.t0 and back.dt == s.dt
        assert np.allclose(back.values, s.values)

    def test_nonuniform_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x[mm]\n0.0,1.0\n0.03,2.0\n0.07,3.0\n")
        with pytest.raises(ValueError, match="uniform"):
            read_timeseries_csv(path)
