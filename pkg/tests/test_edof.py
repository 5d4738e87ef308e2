import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sparse_mimo.channel import los_channel
from sparse_mimo.edof import (
    LobeFit,
    LobeParams,
    breakpoints,
    correlation_matrix,
    dominant_singular_count,
    edof_closed_form,
    edof_exact,
    f_eta,
    lobe_count_sums,
    lobe_gains,
    lobe_geometry,
    lobe_offsets,
    setup_lobe_fit,
    two_lobe_fit,
    weight_w,
)
from sparse_mimo.geometry import ArrayPair, LinkGeometry, rayleigh_distance


def near_H(eta, n_bs=128, n_ue=16, l=40.0):
    return los_channel(ArrayPair.build(n_bs, n_ue, eta, 1.0, 0.01), LinkGeometry(l), 1.0, "near")


@st.composite
def lobe_params(draw):
    n_min = draw(st.integers(2, 24))
    n_max = draw(st.integers(n_min, 200))
    return LobeParams(
        draw(st.floats(1.0, 100.0)), 0.01, draw(st.floats(1.0, 300.0)), draw(st.floats(0.2, 1.0)), n_max, n_min
    )


def enumerate_lobe_sums(params, alpha):
    """Brute-force multiplicity sums over the two-lobe support."""
    n = params.n_min
    t = params.half_width(alpha)
    lags = np.arange(-(n - 1), n)
    w = n - np.abs(lags)
    P = params.period
    off = np.abs(lags - np.round(lags / P) * P)
    in_main = np.abs(lags) <= t + 1e-9
    in_any = off <= t + 1e-9
    return int(w[in_main].sum()), int(w[in_any].sum())


class TestExact:
    def test_rank_one(self):
        H = np.outer(np.arange(1, 5), [1, 2j, 3])
        assert edof_exact(H) == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [1, 3, 8])
    def test_identity(self, n):
        assert edof_exact(np.eye(n)) == pytest.approx(n)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            edof_exact(np.zeros((3, 2)))

    def test_reference_plateau(self, ref_params):
        # Beyond saturation the EDoF settles near the smaller array size.
        sat = 4 * ref_params.range / (ref_params.wavelength * ref_params.n_max)
        etas = np.arange(math.ceil(sat), 2 * math.ceil(sat) + 1, 5)
        vals = np.array([edof_exact(near_H(e)) for e in etas])
        assert abs(vals.mean() - 16) <= 1
        assert vals.min() >= 14

    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_bounds(self, a, b, seed):
        rng = np.random.default_rng(seed)
        H = rng.standard_normal((a, b)) + 1j * rng.standard_normal((a, b))
        e = edof_exact(H)
        assert 1 - 1e-12 <= e <= min(a, b) + 1e-9

    def test_far_field_is_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pair = ArrayPair.build(int(rng.integers(2, 64)), int(rng.integers(2, 16)), rng.uniform(1, 4), rng.uniform(1, 4))
            l_ray = rayleigh_distance(pair.bs, pair.ue)
            geo = LinkGeometry(10 * l_ray, rng.uniform(-1, 1), rng.uniform(-1, 1))
            assert 1.0 <= edof_exact(los_channel(pair, geo)) <= 1.05


class TestDominantAndCorrelation:
    def test_rank_one_and_identity(self):
        assert dominant_singular_count(np.ones((4, 3))) == 1
        assert dominant_singular_count(np.eye(5), 0.99) == 5

    def test_sparse_los_count_tracks_edof(self):
        H = los_channel(ArrayPair.build(64, 16, 2.0, 4.0), LinkGeometry(5.0), 1.0, "exact")
        assert abs(dominant_singular_count(H) - edof_exact(H)) <= 2

    def test_fraction_validated(self):
        with pytest.raises(ValueError):
            dominant_singular_count(np.eye(2), 1.0)

    def test_correlation_shape_and_psd(self):
        H = np.outer(np.ones(6), [1, 1j, -1])
        R = correlation_matrix(H)
        assert R.shape == (3, 3)
        assert np.linalg.matrix_rank(R) == 1
        assert np.all(np.linalg.eigvalsh(R) > -1e-12)
        assert correlation_matrix(np.ones((2, 5))).shape == (2, 2)


class TestPattern:
    def test_peak_null_and_grating(self, ref_params):
        p = ref_params.with_eta(50.0)
        assert f_eta(0.0, p) == pytest.approx(128**2)
        assert f_eta(p.null, p) == pytest.approx(0.0, abs=1e-18 * 128**2)
        for k in (1, 2, -3):
            assert f_eta(k * p.period, p) == pytest.approx(128**2)
        assert p.null == pytest.approx(4 * 40 / (0.01 * 50 * 128))

    @given(lobe_params(), st.floats(-50, 50))
    def test_even_and_periodic(self, p, d):
        scale = p.n_max**2
        assert f_eta(d, p) == pytest.approx(f_eta(-d, p), abs=1e-6 * scale)
        assert f_eta(d + p.period, p) == pytest.approx(f_eta(d, p), abs=1e-6 * scale)

    def test_no_grating_below_threshold(self, ref_params):
        assert not lobe_geometry(ref_params.with_eta(10.0)).grating_exists

    def test_doubling_eta_halves_beamwidth(self, ref_params):
        a = lobe_geometry(ref_params.with_eta(10.0)).null_to_null_bw
        b = lobe_geometry(ref_params.with_eta(20.0)).null_to_null_bw
        assert b == pytest.approx(a / 2)

    def test_grating_locations_match_peaks(self):
        # A 0.2 m wavelength puts the existence threshold at eta = 13.3.
        p = LobeParams(10.0, 0.2, 22.0, 1.0, 64, 16)
        geo = lobe_geometry(p)
        assert geo.grating_exists
        d = np.linspace(-15, 15, 300_001)
        f = f_eta(d, p)
        peaks = d[1:-1][(f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:]) & (f[1:-1] > 0.99 * 64**2)]
        peaks = peaks[np.abs(peaks) > 1e-3]
        np.testing.assert_allclose(np.sort(peaks), sorted(geo.grating_locations), atol=1e-3)

    def test_weight_w(self):
        assert weight_w(0, 7) == 7
        assert weight_w(6, 7) == 1 and weight_w(-6, 7) == 1
        assert weight_w(np.arange(-6, 7), 7).sum() == 49
        with pytest.raises(ValueError):
            weight_w(7, 7)


class TestFit:
    def test_reference_setup_fit(self, ref_params):
        fit = setup_lobe_fit(ref_params)
        assert fit.alpha == pytest.approx(0.91, rel=0.15)
        assert fit.g_high == pytest.approx(0.5 * 128**2, rel=0.15)
        assert fit.g_low < fit.g_high

    @pytest.mark.parametrize("alpha,gh,gl", [(0.3, 9000.0, 40.0), (0.75, 5000.0, 0.0)])
    def test_recovers_synthetic_two_lobe_model(self, alpha, gh, gl):
        p = LobeParams(40.0, 0.01, 60.0, 1.0, 128, 16)
        d = np.linspace(-15, 15, 20001)
        v = np.where(lobe_offsets(d, p) <= alpha, gh, gl)
        fit = two_lobe_fit(d, v, p)
        assert fit.alpha == pytest.approx(alpha, abs=1e-6)
        assert fit.g_high == pytest.approx(gh, rel=1e-6)
        assert fit.g_low == pytest.approx(gl, abs=1e-6)

    def test_lobe_gains_reproduce_pattern_sum(self, ref_params):
        for eta in (20.0, 60.0, 150.0):
            p = ref_params.with_eta(eta)
            fit = lobe_gains(p, 0.85)
            lags = np.arange(-15, 16)
            exact = np.sum(weight_w(lags, 16) * f_eta(lags, p))
            sums = lobe_count_sums(p, fit)
            model = fit.g_low * 256 + (fit.g_high - fit.g_low) * (sums["s0"] + 2 * sums["s_plus"])
            assert model == pytest.approx(exact, rel=1e-12)

    def test_invalid_fit_rejected(self):
        with pytest.raises(ValueError):
            LobeFit(0.5, 1.0, 2.0)
        with pytest.raises(ValueError):
            LobeFit(1.5, 2.0, 1.0)


class TestLobeSums:
    def test_full_main_lobe(self):
        p = LobeParams(40.0, 0.01, 2.0, 1.0, 128, 16)  # null = 62.5 lags
        assert lobe_count_sums(p, LobeFit(0.9, 1.0, 0.0))["s0"] == 256

    def test_narrow_main_lobe(self):
        p = LobeParams(40.0, 0.01, 100.0, 1.0, 128, 16)  # null = 1.25 lags
        sums = lobe_count_sums(p, LobeFit(0.5, 1.0, 0.0))
        assert sums["s0"] == 16

    @given(lobe_params(), st.floats(0.0, 1.0))
    def test_matches_enumeration(self, p, alpha):
        s0, total = enumerate_lobe_sums(p, alpha)
        sums = lobe_count_sums(p, LobeFit(alpha, 1.0, 0.0))
        assert sums["s0"] == s0
        assert sums["s0"] + 2 * sums["s_plus"] == total


class TestClosedForm:
    def test_unit_edof_branch(self, ref_params):
        r = edof_closed_form(ref_params, LobeFit(0.9, 128.0**2, 0.0))
        assert r.branch == "far_unit"
        assert r.value == pytest.approx(1.0)

    def test_saturated_branch(self, ref_params):
        r = edof_closed_form(ref_params.with_eta(500.0), LobeFit(0.9, 128.0**2, 0.0))
        assert r.branch == "saturated"
        assert r.value == pytest.approx(16.0)

    def test_breakpoint_ties_take_higher_branch(self, ref_params):
        fit = LobeFit(0.9, 128.0**2 / 2, 10.0)
        b1, b2 = breakpoints(ref_params, fit.alpha)
        assert edof_closed_form(ref_params.with_eta(b1), fit).branch == "rising"
        assert edof_closed_form(ref_params.with_eta(b2), fit).branch == "saturated"

    def test_tracks_exact_on_reference_sweep(self, ref_params):
        alpha = setup_lobe_fit(ref_params).alpha
        b1, b2 = breakpoints(ref_params, alpha)
        for eta in range(1, 61):
            if any(0.9 * b <= eta <= 1.1 * b for b in (b1, b2)):
                continue
            p = ref_params.with_eta(float(eta))
            cf = edof_closed_form(p, lobe_gains(p, alpha)).value
            ex = edof_exact(near_H(eta))
            assert abs(cf - ex) / ex <= 0.15, eta

    def test_rising_branch_non_decreasing(self, ref_params):
        fit = setup_lobe_fit(ref_params)
        b1, b2 = breakpoints(ref_params, fit.alpha)
        vals = [edof_closed_form(ref_params.with_eta(e), fit).value for e in np.linspace(b1, b2, 2000, endpoint=False)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    @given(st.floats(20.0, 100.0), st.floats(0.0, 1.2), st.floats(0.0, 1.2))
    def test_angle_monotonicity(self, eta, theta, extra):
        fit = LobeFit(0.85, 0.53 * 128**2, 120.0)
        base = LobeParams(40.0, 0.01, eta, math.cos(theta), 128, 16)
        wider = LobeParams(40.0, 0.01, eta, math.cos(min(theta + extra, 1.5)), 128, 16)
        a, b = edof_closed_form(base, fit), edof_closed_form(wider, fit)
        assume(a.branch == b.branch == "rising")
        assert b.value <= a.value + 1e-12

    @given(lobe_params(), st.floats(0.05, 1.0))
    def test_value_bounds(self, p, alpha):
        gh = float(p.n_max) ** 2
        r = edof_closed_form(p, LobeFit(alpha, gh, 0.0))
        assert 1 - 1e-12 <= r.value <= p.n_min + 0.5
        assert r.thresholds[0] <= r.thresholds[1]
