import json

import numpy as np
import pytest

from hmor.metrics import MetricsReport, metrics
from hmor.timeseries import TimeSeries


def series(t, cols, names):
    return TimeSeries(t=np.asarray(t, dtype=float),
                      values=np.column_stack(cols), names=tuple(names))


def make_pair(n=64, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n)
    a = np.sin(2.0 * np.pi * t)
    b = rng.normal(size=n) * 1e-3
    return series(t, [a, b], ("i3", "i1"))


class TestMetrics:
    def test_identical_series_zero_errors(self):
        ref = make_pair()
        rep = metrics(ref, ref)
        assert rep.channels == ("i3", "i1")
        assert all(v == 0.0 for v in rep.rmse.values())
        assert all(v == 0.0 for v in rep.rel_l2.values())
        assert all(v == 0.0 for v in rep.peak.values())
        assert not rep.resampled

    def test_constant_offset_rmse(self):
        ref = make_pair()
        shifted = TimeSeries(t=ref.t, values=ref.values + np.array([0.25, 0.0]),
                             names=ref.names)
        rep = metrics(ref, shifted)
        assert rep.rmse["i3"] == pytest.approx(0.25, rel=1e-14)
        assert rep.peak["i3"] == pytest.approx(0.25, rel=1e-14)
        assert rep.rmse["i1"] == 0.0

    def test_doubled_series_unit_relative_error(self):
        ref = make_pair()
        doubled = TimeSeries(t=ref.t, values=2.0 * ref.values, names=ref.names)
        rep = metrics(ref, doubled)
        assert rep.rel_l2["i3"] == 1.0
        assert rep.rel_l2["i1"] == 1.0

    def test_resampling_linear_exact(self):
        t_ref = np.linspace(0.1, 0.9, 17)
        t_test = np.linspace(0.0, 1.0, 401)
        ref = series(t_ref, [3.0 * t_ref - 1.0], ("i3",))
        test = series(t_test, [3.0 * t_test - 1.0], ("i3",))
        rep = metrics(ref, test)
        assert rep.resampled
        assert rep.rmse["i3"] <= 1e-14

    def test_no_overlap_raises(self):
        ref = series([0.0, 1.0], [[1.0, 2.0]], ("i3",))
        test = series([5.0, 6.0], [[1.0, 2.0]], ("i3",))
        with pytest.raises(ValueError, match="overlap"):
            metrics(ref, test)

    def test_missing_channel_raises(self):
        ref = make_pair()
        with pytest.raises(ValueError, match="i9"):
            metrics(ref, ref, channels=("i9",))

    def test_zero_reference_channel(self):
        t = np.linspace(0.0, 1.0, 8)
        ref = series(t, [np.zeros(8)], ("i3",))
        same = series(t, [np.zeros(8)], ("i3",))
        off = series(t, [np.full(8, 1e-6)], ("i3",))
        assert metrics(ref, same).rel_l2["i3"] == 0.0
        assert metrics(ref, off).rel_l2["i3"] == np.inf

    def test_report_json_and_order_check(self):
        rep = MetricsReport(channels=("i3",), rmse={"i3": 1.0},
                            rel_l2={"i3": 0.5}, peak={"i3": 2.0},
                            per_order_loss={1: 0.3, 2: 0.1}, runtime_s=1.5)
        doc = json.loads(rep.to_json())
        assert doc["per_order_loss"] == {"1": 0.3, "2": 0.1}
        assert doc["runtime_s"] == 1.5
        with pytest.raises(ValueError, match="ascending"):
            MetricsReport(channels=("i3",), rmse={}, rel_l2={}, peak={},
                          per_order_loss={2: 0.1, 1: 0.3})
