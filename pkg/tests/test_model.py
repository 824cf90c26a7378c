import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import table6_model
from oracles import central_difference, model_oracle, peak_oracle, table6_peaks
from sgdecomp import (
    DecompositionModel,
    PeakComponent,
    TimeGrid,
    eval_model,
    eval_peak,
    peak_gradient,
    sample_model,
)

peaks_st = st.builds(
    PeakComponent,
    amplitude=st.floats(0, 200),
    location=st.floats(-2, 25),
    width=st.floats(0.1, 10),
    skewness=st.floats(-5, 5),
)


class TestPeakComponent:
    def test_rejects_negative_amplitude(self):
        with pytest.raises(ValueError, match="amplitude"):
            PeakComponent(-1, 5, 1, 0)

    @pytest.mark.parametrize("width", [0.0, -1.0])
    def test_rejects_non_positive_width(self, width):
        with pytest.raises(ValueError, match="width"):
            PeakComponent(1, 5, width, 0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            PeakComponent(1, float("nan"), 1, 0)


class TestDecompositionModel:
    def test_canonical_order(self):
        m = DecompositionModel(1, [PeakComponent(3, 12, 1), PeakComponent(2, 7, 1), PeakComponent(1, 7, 1)])
        assert [(p.location, p.amplitude) for p in m.peaks] == [(7, 1), (7, 2), (12, 3)]

    def test_vector_round_trip(self, sunday_model):
        vec = sunday_model.to_vector()
        assert vec.size == 4 * 3 + 1 == sunday_model.n_params
        assert DecompositionModel.from_vector(vec) == sunday_model

    def test_rejects_bad_vector_length(self):
        with pytest.raises(ValueError):
            DecompositionModel.from_vector(np.zeros(6))

    def test_rejects_negative_baseline(self):
        with pytest.raises(ValueError):
            DecompositionModel(-0.5)


class TestTimeGrid:
    def test_default_is_integer_hours(self):
        assert np.array_equal(TimeGrid().points(), np.arange(24.0))

    def test_fine_day_grid(self):
        grid = TimeGrid.spanning_day(0.1)
        assert grid.count == 231
        assert grid.points()[-1] == pytest.approx(23.0)

    @pytest.mark.parametrize("kwargs", [{"step": 0}, {"step": -1}, {"count": 0}, {"count": 2.5}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            TimeGrid(**kwargs)


class TestEvalPeak:
    def test_apex_symmetric(self):
        assert eval_peak(PeakComponent(5, 7, 2, 0), 7) == 5.0

    def test_skewed_point_matches_oracle(self):
        # exp(-1/2) * (1 + erf(1/sqrt 2)), 1.0206028 from the mpmath oracle
        value = eval_peak(PeakComponent(1, 0, 1, 1), 1)
        assert value == pytest.approx(1.0206027677574228, rel=1e-12)
        assert value == pytest.approx(peak_oracle(1, 0, 1, 1, 1), rel=1e-12)

    def test_zero_amplitude(self):
        t = np.linspace(-5, 30, 50)
        assert np.all(eval_peak(PeakComponent(0, 12, 3, -2), t) == 0)

    @settings(max_examples=200)
    @given(peaks_st, st.floats(-10, 35))
    def test_matches_oracle(self, peak, t):
        want = peak_oracle(*peak.as_tuple(), t)
        assert eval_peak(peak, t) == pytest.approx(want, rel=1e-12, abs=1e-300)

    @given(peaks_st)
    def test_apex_equals_amplitude(self, peak):
        assert eval_peak(peak, peak.location) == pytest.approx(peak.amplitude, rel=1e-15)

    @given(peaks_st, st.floats(-30, 30))
    def test_mirror_law(self, peak, x):
        mirrored = PeakComponent(peak.amplitude, peak.location, peak.width, -peak.skewness)
        left = eval_peak(peak, x)
        right = eval_peak(mirrored, 2 * peak.location - x)
        assert left == pytest.approx(right, rel=1e-12, abs=1e-300)

    @given(peaks_st, st.floats(-30, 30))
    def test_non_negative(self, peak, x):
        assert eval_peak(peak, x) >= 0


class TestEvalModel:
    def test_empty_model_is_baseline(self):
        assert eval_model(DecompositionModel(2.0), 13) == 2.0

    def test_value_at_location_includes_full_amplitude(self):
        m = DecompositionModel(2, [PeakComponent(15, 7, 3, 0.1)])
        assert eval_model(m, 7) == 17.0

    def test_sunday_midday_matches_oracle(self, sunday_model):
        # 18.238004548560958 from three mpmath-evaluated peaks plus baseline 2
        assert eval_model(sunday_model, 12) == pytest.approx(18.238004548560958, rel=1e-12)

    @given(st.lists(peaks_st, max_size=4), st.floats(0, 50), st.floats(-5, 30))
    def test_at_least_baseline(self, peaks, baseline, t):
        assert eval_model(DecompositionModel(baseline, peaks), t) >= baseline


class TestSampleModel:
    def test_constant(self):
        assert np.array_equal(sample_model(DecompositionModel(2.0)), np.full(24, 2.0))

    def test_single_point(self, sunday_model):
        out = sample_model(sunday_model, TimeGrid(start=5.5, count=1))
        assert out.shape == (1,)
        assert out[0] == eval_model(sunday_model, 5.5)

    @pytest.mark.parametrize("day", ["Sunday", "Friday", "Saturday"])
    def test_table6_pointwise(self, day):
        model = table6_model(day)
        got = sample_model(model)
        want = [model_oracle(2, table6_peaks(day), t) for t in range(24)]
        np.testing.assert_allclose(got, want, rtol=1e-12)


class TestPeakGradient:
    def test_amplitude_partial_is_shape(self):
        peak = PeakComponent(3.5, 8, 1.7, -0.8)
        t = np.linspace(0, 23, 24)
        np.testing.assert_allclose(peak_gradient(peak, t)[0], eval_peak(peak, t) / 3.5, rtol=1e-14)

    def test_symmetric_peak_stationary_at_centre(self):
        g = peak_gradient(PeakComponent(5, 7, 2, 0), 7)
        assert g.shape == (4,)
        assert g[1] == 0 and g[2] == 0 and g[3] == 0

    def test_finite_difference_point(self):
        g = peak_gradient(PeakComponent(1, 0, 1, 1), 1.0)
        fd = central_difference(lambda p: peak_oracle(*p, 1.0), [1, 0, 1, 1])
        np.testing.assert_allclose(g, fd, rtol=1e-6)

    def test_randomized_against_finite_differences(self, rng):
        for _ in range(100):
            params = [rng.uniform(0.5, 50), rng.uniform(0, 23), rng.uniform(0.3, 6), rng.uniform(-5, 5)]
            t = rng.uniform(0, 23)
            g = peak_gradient(PeakComponent(*params), t)
            fd = central_difference(lambda p: peak_oracle(*p, t), params)
            scale = max(1.0, max(abs(v) for v in fd))
            assert np.max(np.abs(g - fd)) / scale <= 1e-6
