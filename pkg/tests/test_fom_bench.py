import numpy as np
import pytest

from hmor.fom_bench import (
    FomSpec,
    LoadSpec,
    ShParams,
    _sat,
    _sat_prime,
    dc_drive_voltage,
    fom_ac,
    fom_dc,
    fom_dc_sweep,
    fom_spec_from_json,
    fom_spec_to_json,
    fom_transient,
    sh_drain_current,
)
from hmor.timeseries import TimeSeries


def const_sources(t, v1, v2):
    vals = np.column_stack([np.full_like(t, v1), np.full_like(t, v2)])
    return TimeSeries(t=t, values=vals, names=("v1", "v2"))


class TestShDevice:
    def test_region_spot_values(self):
        p = ShParams(k=1e-3, vth=0.7)
        # triode: K * ((vgs-vth)*vds - vds^2/2) = 1e-3 * (0.3 - 0.045)
        assert sh_drain_current(p, 1.7, 0.3) == pytest.approx(2.55e-4, rel=1e-12)
        # saturation: K/2 * (vgs-vth)^2
        assert sh_drain_current(p, 1.7, 2.0) == pytest.approx(5.0e-4, rel=1e-12)
        assert sh_drain_current(p, 0.5, 1.0) == 0.0

    def test_continuity_at_region_boundaries(self):
        p = ShParams(k=2e-3, vth=0.6)
        eps = 1e-7
        # cutoff edge, vgs = vth
        lo = sh_drain_current(p, p.vth - eps, 0.8)
        hi = sh_drain_current(p, p.vth + eps, 0.8)
        assert lo == 0.0
        assert abs(hi - lo) < 1e-12  # value continuous, slope starts at 0
        # triode/saturation edge, vds = vgs - vth
        vgs = 1.4
        vov = vgs - p.vth
        lo = sh_drain_current(p, vgs, vov - eps)
        hi = sh_drain_current(p, vgs, vov + eps)
        mid = sh_drain_current(p, vgs, vov)
        assert abs(hi - mid) == 0.0  # flat in saturation
        # one-sided slope from triode approaches 0 at the edge
        assert abs(mid - lo) < p.k * vov * eps * 1.01

    def test_monotone_and_vectorized(self):
        p = ShParams()
        vds = np.linspace(0.0, 3.0, 301)
        i = sh_drain_current(p, 1.5, vds)
        assert i.shape == vds.shape
        assert np.all(np.diff(i) >= 0.0)
        with pytest.raises(ValueError, match="nonnegative"):
            sh_drain_current(p, 1.5, -0.1)


class TestSaturator:
    def test_identity_near_zero_and_limits(self):
        spec = FomSpec()
        assert _sat(spec, 0.0) == 0.0
        assert _sat_prime(spec, 0.0) == 1.0
        assert abs(_sat(spec, 0.01) - 0.01) < 1e-15
        assert _sat(spec, 1e6) == pytest.approx(2.5, rel=1e-12)
        assert _sat(spec, -1e6) == pytest.approx(-2.5, rel=1e-12)
        # no overflow even at absurd drive
        assert np.isfinite(_sat(spec, 1e300))
        assert _sat_prime(spec, 1e300) == 0.0

    def test_odd_symmetry_with_symmetric_rails(self):
        spec = FomSpec()
        x = np.linspace(0.0, 30.0, 400)
        assert np.array_equal(_sat(spec, -x), -_sat(spec, x))

    def test_asymmetric_rails(self):
        spec = FomSpec(v_rail_lo=1.0, v_rail_hi=5.0, v_mid=2.5)
        assert _sat(spec, 1e9) == pytest.approx(2.5, rel=1e-12)
        assert _sat(spec, -1e9) == pytest.approx(-1.5, rel=1e-12)

    def test_monotone(self):
        spec = FomSpec(softness=0.05)
        x = np.concatenate([np.linspace(-40, 40, 2001), [-1e4, 1e4]])
        x.sort()
        s = _sat(spec, x)
        assert np.all(np.diff(s) >= 0.0)
        # strictly increasing through the active region; deep saturation is
        # allowed to be flat at double precision
        active = np.abs(x[:-1]) < 3.0
        assert np.all(np.diff(s)[active] > 0.0)

    def test_derivative_matches_finite_difference(self):
        # FD is only well conditioned where S is not ulp-flat, so the deep
        # points check the factored u > 1 branch against the plain formula
        spec = FomSpec()
        h = 1e-6
        for x in [0.0, 0.3, -0.7, 1.0, 2.49, -2.2]:
            fd = (_sat(spec, x + h) - _sat(spec, x - h)) / (2 * h)
            assert _sat_prime(spec, x) == pytest.approx(fd, rel=2e-6, abs=1e-12)
        p = 2.5 / spec.softness
        for x in [4.0, -5.5, 2.6]:
            u = abs(x) / 2.5
            plain_s = np.sign(x) * 2.5 * u * (1.0 + u ** p) ** (-1.0 / p)
            plain_ds = (1.0 + u ** p) ** (-(p + 1.0) / p)
            assert _sat(spec, x) == pytest.approx(plain_s, rel=1e-13)
            assert _sat_prime(spec, x) == pytest.approx(plain_ds, rel=1e-13)

    def test_drive_voltage_stays_inside_rails(self):
        spec = FomSpec()
        assert dc_drive_voltage(spec, 2.5, 2.5) == 2.5
        rng = np.random.default_rng(7)
        v1 = rng.uniform(-100, 100, size=200)
        v2 = rng.uniform(-100, 100, size=200)
        e = dc_drive_voltage(spec, v1, v2)
        assert np.all(e >= spec.v_rail_lo)
        assert np.all(e <= spec.v_rail_hi)
        # strictly inside while the drive argument is moderate
        d = rng.uniform(-0.08, 0.08, size=200)
        e = dc_drive_voltage(spec, 2.5 + d, 2.5 - d)
        assert np.all(e > spec.v_rail_lo)
        assert np.all(e < spec.v_rail_hi)


class TestFomDc:
    def test_balanced_point_is_equilibrium(self):
        spec = FomSpec()
        i = fom_dc(spec, np.array([2.5, 2.5, 2.5]))
        assert i[0] == 0.0 and i[1] == 0.0 and i[2] == 0.0

    def test_output_slope_in_v3(self):
        spec = FomSpec()
        d = 0.125
        a = fom_dc(spec, np.array([2.6, 2.4, 2.0]))[2]
        b = fom_dc(spec, np.array([2.6, 2.4, 2.0 + d]))[2]
        assert (b - a) / d == pytest.approx(-1.0 / spec.r_out, rel=1e-12)

    def test_saturated_output_current(self):
        spec = FomSpec()
        i3 = fom_dc(spec, np.array([5.0, 0.0, 2.5]))[2]
        assert i3 == pytest.approx((5.0 - 2.5) / spec.r_out, rel=1e-6)
        i3 = fom_dc(spec, np.array([0.0, 5.0, 2.5]))[2]
        assert i3 == pytest.approx((0.0 - 2.5) / spec.r_out, rel=1e-6)

    def test_batch_shape(self):
        spec = FomSpec()
        rng = np.random.default_rng(3)
        v = rng.uniform(0, 5, size=(4, 5, 3))
        i = fom_dc(spec, v)
        assert i.shape == (4, 5, 3)
        assert np.array_equal(i[..., :2], np.zeros((4, 5, 2)))
        one = fom_dc(spec, v[2, 3])
        assert np.array_equal(i[2, 3], one)

    def test_sweep_matches_pointwise(self):
        spec = FomSpec()
        axes = (
            np.array([0.0, 1.0, 2.5, 4.0, 5.0]),
            np.array([0.5, 2.5, 4.5]),
            np.array([0.0, 2.0, 3.0, 5.0]),
        )
        table = fom_dc_sweep(spec, axes)
        assert table.shape == (5, 3, 4)
        for i in [0, 2, 4]:
            for j in [0, 2]:
                for k in [1, 3]:
                    pt = np.array([axes[0][i], axes[1][j], axes[2][k]])
                    assert np.array_equal(table.currents[i, j, k], fom_dc(spec, pt))


class TestFomTransient:
    def test_relaxes_to_dc_solution(self):
        spec = FomSpec()
        load = LoadSpec()
        tc = spec.r_out * load.c_load + spec.tau
        t = np.linspace(0.0, 10.0 * tc, 401)
        src = const_sources(t, 2.52, 2.5)
        out = fom_transient(spec, src, load, v3_init=1.0)
        v3_star = dc_drive_voltage(spec, 2.52, 2.5)
        v3 = out.channel("v3")
        assert abs(v3[0] - 1.0) == 0.0
        assert abs(v3[-1] - v3_star) <= 1e-3 * abs(1.0 - v3_star)
        # monotone approach for this first-order-dominated start
        assert v3[50] < v3[200] < v3[-1] + 1e-12

    def test_equilibrium_is_preserved(self):
        spec = FomSpec()
        load = LoadSpec()
        t = np.linspace(0.0, 2e-6, 201)
        src = const_sources(t, 2.51, 2.49)
        out = fom_transient(spec, src, load)  # v3_init defaults to equilibrium
        v3_star = dc_drive_voltage(spec, 2.51, 2.49)
        assert np.max(np.abs(out.channel("v3") - v3_star)) < 1e-7
        assert np.max(np.abs(out.channel("i3"))) < 1e-7 / spec.r_out

    def test_charge_balance_on_load(self):
        spec = FomSpec()
        load = LoadSpec()
        tc = spec.r_out * load.c_load
        t = np.linspace(0.0, 4.0 * tc, 801)
        src = const_sources(t, 2.52, 2.5)
        out = fom_transient(spec, src, load, v3_init=2.0)
        v3 = out.channel("v3")
        q = np.trapezoid(out.channel("i3"), t)
        dv = load.c_load * (v3[-1] - v3[0])
        assert q == pytest.approx(dv, rel=5e-4)

    def test_quasistatic_tracking(self):
        # 20 kHz is slow against both poles, so v3 should track the DC map
        spec = FomSpec()
        load = LoadSpec()
        f = 2e4
        t = np.linspace(0.0, 2.0 / f, 2001)
        v1 = 2.5 + 0.01 * np.sin(2 * np.pi * f * t)
        src = TimeSeries(
            t=t,
            values=np.column_stack([v1, np.full_like(t, 2.5)]),
            names=("v1", "v2"),
        )
        out = fom_transient(spec, src, load)
        target = dc_drive_voltage(spec, v1, 2.5)
        swing = 0.5 * (target.max() - target.min())
        err = np.max(np.abs(out.channel("v3") - target))
        assert err <= 0.02 * swing

    def test_gate_current_on_ramp(self):
        spec = FomSpec(c_gate=1e-12)
        load = LoadSpec()
        t = np.linspace(0.0, 1e-6, 101)
        slope = 2e6  # 2 V/us
        src = TimeSeries(
            t=t,
            values=np.column_stack([2.0 + slope * t, np.full_like(t, 2.5)]),
            names=("v1", "v2"),
        )
        out = fom_transient(spec, src, load)
        i1 = out.channel("i1")
        assert np.allclose(i1, spec.c_gate * slope, rtol=1e-9)
        # constant channel: gradient leaves only rounding noise
        assert np.max(np.abs(out.channel("i2"))) < 1e-6 * spec.c_gate

    def test_requires_v1_v2_channels(self):
        t = np.linspace(0.0, 1e-6, 11)
        bad = TimeSeries(t=t, values=np.zeros((11, 2)), names=("a", "b"))
        with pytest.raises(ValueError, match="v1"):
            fom_transient(FomSpec(), bad, LoadSpec())


class TestFomAc:
    def test_dc_gain(self):
        spec = FomSpec()
        load = LoadSpec()
        h = fom_ac(spec, load, 2.5, 2.5, np.array([0.0]))
        assert h[0] == spec.a_d + spec.a_cm  # S'(0) = 1 exactly

    def test_gain_drops_when_saturated(self):
        spec = FomSpec()
        load = LoadSpec()
        h0 = abs(fom_ac(spec, load, 2.5, 2.5, np.array([0.0]))[0])
        hs = abs(fom_ac(spec, load, 3.5, 2.5, np.array([0.0]))[0])
        assert hs < 1e-3 * h0

    def test_transfer_matches_transient_smallsignal(self):
        # dual route: analytic two-pole transfer vs a direct closed-loop
        # sine simulation with complex amplitude extraction
        spec = FomSpec()
        load = LoadSpec()
        f = 1e6
        amp = 1e-3
        periods = 8
        spp = 200
        n = periods * spp
        t = np.arange(n + 1) / (f * spp)
        v1 = 2.5 + amp * np.sin(2 * np.pi * f * t)
        src = TimeSeries(
            t=t,
            values=np.column_stack([v1, np.full_like(t, 2.5)]),
            names=("v1", "v2"),
        )
        out = fom_transient(spec, src, load)
        v3 = out.channel("v3")
        # project the last 4 periods on exp(-jwt); sin input -> -j convention
        m = 4 * spp
        tt, xx = t[-m:], v3[-m:] - np.mean(v3[-m:])
        z = np.exp(-2j * np.pi * f * tt)
        a_v3 = 2.0 * np.trapezoid(xx * z, tt) / (tt[-1] - tt[0])
        a_v1 = -1j * amp
        h_meas = a_v3 / a_v1
        h_ref = fom_ac(spec, load, 2.5, 2.5, np.array([f]))[0]
        assert abs(h_meas - h_ref) <= 0.02 * abs(h_ref)


class TestSpecJson:
    def test_round_trip(self):
        spec = FomSpec(a_d=33.0, softness=0.07)
        load = LoadSpec(c_load=2e-12)
        text = fom_spec_to_json(spec, load)
        spec2, load2 = fom_spec_from_json(text)
        assert spec2 == spec
        assert load2 == load
        spec3, load3 = fom_spec_from_json(fom_spec_to_json(spec))
        assert spec3 == spec and load3 is None

    def test_missing_section(self):
        with pytest.raises(ValueError, match="fom"):
            fom_spec_from_json("{}")

    def test_validation(self):
        with pytest.raises(ValueError, match="v_mid"):
            FomSpec(v_mid=6.0)
        with pytest.raises(ValueError, match="positive"):
            FomSpec(tau=0.0)
        with pytest.raises(ValueError, match="positive"):
            LoadSpec(c_load=0.0)
        with pytest.raises(ValueError, match="positive"):
            ShParams(k=-1.0)
