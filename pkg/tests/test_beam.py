import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import cosine_expansion_power
from txbeam.beam import (Aperture, BeamPattern, focus_delays, narrowband_bp, to_db, wideband_bp,
                         wrap_delays)
from txbeam.errors import CoverageError, DegenerateError, EmptyBandError, InvalidArgumentError
from txbeam.geometry import FieldGrid, Medium, Probe, build_field_grid
from txbeam.impulse import TimeAxis
from txbeam.pulse import Pulse, PulseSpectrum, pulse_spectrum, with_band
from txbeam.spectra import NarrowbandMap, build_narrowband_map, compute_reference_map, element_spectrum_view

DT = 1e-8
G1 = FieldGrid(1e-3, 1, 0, 1, 1e-3, 1e-3, 1)


@pytest.fixture(scope="module")
def setup():
    pr = Probe(8, 0.245e-3, 0.03e-3, 5e-3, 25e-3, 1e6, 8e6, sub_nx=2, sub_ny=4)
    me = Medium()
    g = build_field_grid(pr, 2, 1e-3, 5e-3, 14e-3, half_width_elements=3)
    ext = g.extended_for(range(-4, 4))
    wb = compute_reference_map(ext, pr, me, TimeAxis(DT, 256), n_fft=2048)
    spec = with_band(pulse_spectrum(Pulse(3e6, 2), wb.freqs, DT, 2048), pr.band)
    return pr, me, g, wb, spec


class TestAperture:
    def test_centered(self, full_probe):
        a = Aperture.centered(6, full_probe)
        assert a.indices == (-3, -2, -1, 0, 1, 2) and a.symmetric and a.max_pair == 2
        np.testing.assert_array_equal(a.pair_values([10, 20, 30, 40, 50, 60]), [40, 50, 60])

    @pytest.mark.parametrize("M", [0, 3, 194])
    def test_invalid_centered(self, full_probe, M):
        with pytest.raises(InvalidArgumentError):
            Aperture.centered(M, full_probe)

    def test_invalid_sets(self):
        with pytest.raises(InvalidArgumentError):
            Aperture(())
        with pytest.raises(InvalidArgumentError):
            Aperture((1, 1))
        with pytest.raises(InvalidArgumentError):
            Aperture((0, 1)).max_pair


class TestFocusDelays:
    def test_outermost_zero(self, full_probe, medium):
        a = Aperture.centered(50)
        d = focus_delays(a, full_probe, medium, 25e-3)
        assert d[0] == 0.0 and d[-1] == 0.0 and np.all(d >= 0)
        np.testing.assert_array_equal(d, d[::-1])

    def test_two_elements(self, full_probe, medium):
        np.testing.assert_array_equal(focus_delays(Aperture.centered(2), full_probe, medium, 10e-3), [0, 0])

    def test_center_pair_value(self, full_probe, medium):
        d = focus_delays(Aperture.centered(20), full_probe, medium, 25e-3)
        p, F = 0.245e-3, 25e-3
        expect = (np.sqrt(F ** 2 + (9.5 * p) ** 2) - np.sqrt(F ** 2 + (0.5 * p) ** 2)) / 1540.0
        assert d[10] == pytest.approx(expect, rel=1e-12) and d[9] == d[10]
        assert expect == pytest.approx(7.0007e-8, rel=1e-4)

    def test_nonpositive_focus(self, full_probe, medium):
        with pytest.raises(InvalidArgumentError):
            focus_delays(Aperture.centered(4), full_probe, medium, 0.0)

    def test_wrap(self):
        np.testing.assert_allclose(wrap_delays([0.0, 1.25e-6, -1e-7], 4e6), [0.0, 0.0, 1.5e-7], atol=1e-20)


class TestWideband:
    def test_single_element_parseval(self, setup):
        pr, me, g, wb, _ = setup
        flat = PulseSpectrum(wb.freqs, np.ones(wb.freqs.size, complex))
        bp = wideband_bp(wb, g, flat, Aperture((0,)), [0.0])
        v = element_spectrum_view(wb, g, 0)
        ref = (np.abs(v) ** 2 @ wb.bin_weights()) * wb.df
        np.testing.assert_allclose(bp.values, ref, rtol=1e-12)

    def test_mirror_symmetry(self, setup):
        pr, me, g, wb, spec = setup
        a = Aperture.centered(8)
        bp = wideband_bp(wb, g, spec, a, focus_delays(a, pr, me, 9e-3))
        i, j = g.mirror_columns()
        np.testing.assert_allclose(bp.values[i], bp.values[j], rtol=1e-10)

    def test_constant_shift_invariance(self, setup):
        pr, me, g, wb, spec = setup
        a = Aperture.centered(6)
        d = focus_delays(a, pr, me, 12e-3)
        e1 = wideband_bp(wb, g, spec, a, d).values
        e2 = wideband_bp(wb, g, spec, a, d + 3.7e-7).values
        np.testing.assert_allclose(e2, e1, rtol=1e-10)

    def test_unit_apodization_exact(self, setup):
        pr, me, g, wb, spec = setup
        a = Aperture.centered(4)
        d = focus_delays(a, pr, me, 8e-3)
        np.testing.assert_array_equal(wideband_bp(wb, g, spec, a, d).values,
                                      wideband_bp(wb, g, spec, a, d, np.ones(4)).values)

    def test_threads_identical(self, setup):
        pr, me, g, wb, spec = setup
        a = Aperture.centered(8)
        d = focus_delays(a, pr, me, 8e-3)
        assert (wideband_bp(wb, g, spec, a, d, threads=1).values.tobytes()
                == wideband_bp(wb, g, spec, a, d, threads=3).values.tobytes())

    def test_errors(self, setup):
        pr, me, g, wb, spec = setup
        with pytest.raises(CoverageError):
            wideband_bp(wb, g, spec, Aperture.centered(10), np.zeros(10))
        with pytest.raises(InvalidArgumentError):
            wideband_bp(wb, g, spec, Aperture.centered(4), np.zeros(3))
        empty = PulseSpectrum(spec.freqs, spec.values, np.zeros(spec.freqs.size, bool))
        with pytest.raises(EmptyBandError):
            wideband_bp(wb, g, empty, Aperture.centered(4), np.zeros(4))
        with pytest.raises(InvalidArgumentError):
            wideband_bp(wb, g, PulseSpectrum(spec.freqs[:-1], spec.values[:-1]), Aperture.centered(4), np.zeros(4))


def _nb(values, f0=4e6):
    v = np.asarray(values, complex)
    return NarrowbandMap(v.reshape(1, 1, -1) if v.ndim == 1 else v, f0, G1)


class TestNarrowband:
    def test_unit(self):
        assert narrowband_bp(_nb([1.0]), [0.0]).values[0, 0] == 1.0

    def test_destructive(self):
        f0 = 4e6
        assert narrowband_bp(_nb([1 + 1j, 1 + 1j], f0), [0.0, 1 / (2 * f0)]).values[0, 0] < 1e-30

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), pairs=st.integers(1, 12))
    def test_cosine_expansion(self, seed, pairs):
        rng = np.random.default_rng(seed)
        f0 = rng.uniform(1e6, 8e6)
        G = rng.standard_normal((5, 4, pairs)) + 1j * rng.standard_normal((5, 4, pairs))
        D = rng.uniform(0, 2e-6, pairs)
        nb = NarrowbandMap(G, f0, FieldGrid(1e-3, 1, 0, 5, 1e-3, 1e-3, 4))
        P = narrowband_bp(nb, D).values
        np.testing.assert_allclose(P, cosine_expansion_power(G, D, f0), rtol=1e-12, atol=1e-12 * P.max())

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 31))
    def test_torus(self, seed):
        rng = np.random.default_rng(seed)
        f0 = 4.5e6
        G = rng.standard_normal((3, 3, 5)) + 1j * rng.standard_normal((3, 3, 5))
        nb = NarrowbandMap(G, f0, FieldGrid(1e-3, 1, 0, 3, 1e-3, 1e-3, 3))
        D = rng.uniform(0, 1 / f0, 5)
        k = rng.integers(-5, 6, 5)
        np.testing.assert_allclose(narrowband_bp(nb, D + k / f0).values, narrowband_bp(nb, D).values,
                                   rtol=1e-12, atol=0)

    def test_zero_delay_is_plain_sum(self, setup):
        pr, me, g, wb, _ = setup
        nb = build_narrowband_map(wb, g, wb.freqs[60], 3)
        P = narrowband_bp(nb, np.zeros(4)).values
        np.testing.assert_allclose(P, np.abs(nb.values.sum(axis=2)) ** 2, rtol=1e-13)

    def test_fewer_pairs_and_errors(self):
        nb = _nb([1.0, 2.0, 3.0])
        assert narrowband_bp(nb, [0.0, 0.0]).values[0, 0] == pytest.approx(9.0)
        with pytest.raises(InvalidArgumentError):
            narrowband_bp(nb, np.zeros(4))
        with pytest.raises(InvalidArgumentError):
            narrowband_bp(nb, [0.0], apodization=[1.0, 1.0])

    def test_apodization(self):
        nb = _nb([1.0, 2.0])
        assert narrowband_bp(nb, [0.0, 0.0], [2.0, 0.5]).values[0, 0] == pytest.approx(9.0)
        np.testing.assert_array_equal(narrowband_bp(nb, [0.0, 1e-7], [1.0, 1.0]).values,
                                      narrowband_bp(nb, [0.0, 1e-7]).values)


class TestDb:
    def test_values(self):
        bp = BeamPattern(np.array([[10.0, 1.0, 1e-9]]), None, "power")
        np.testing.assert_allclose(to_db(bp, 60), [[0.0, -10.0, -60.0]], atol=1e-12)
        assert to_db(bp, 60)[0, 2] == -60.0

    def test_degenerate(self):
        with pytest.raises(DegenerateError):
            to_db(BeamPattern(np.zeros((2, 2)), None, "power"))

    def test_peak(self):
        g = FieldGrid(1e-3, 1, -1, 3, 1e-3, 1e-3, 2)
        bp = BeamPattern(np.array([[0, 1], [5, 2], [0, 0.0]]), g, "power")
        assert bp.peak() == (0.0, 1e-3) and bp.raw_max == 5.0
