import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import reference_attenuation_db_per_km, saturation_pressure_wagner_pruss_hpa
from thzgdd.analysis import phase_profile
from thzgdd.atmosphere import (ChannelResponse, CoverageError, GridError, attenuation_db_per_m,
                               complex_refractivity, frequency_grid, los_transfer)
from thzgdd.catalog import AtmosphereState, LineCatalog, LineRecord, load_default_catalog

CAT = load_default_catalog()
HUMID = AtmosphereState.from_celsius(29, 0.45)


@pytest.fixture(scope="module")
def wide():
    return complex_refractivity(CAT, HUMID, frequency_grid(100, 600, 0.01))


def test_dry_air_without_oxygen_is_transparent():
    freq = frequency_grid(300, 400, 0.1)
    spec = complex_refractivity(CAT.select("H2O"), AtmosphereState(300, 0.0), freq)
    assert np.all(spec.refractivity == 0)


def test_attenuation_peaks_at_water_lines(wide):
    atten = attenuation_db_per_m(wide)
    f = wide.freq_grid
    for centre in (183.31, 325.15, 380.20, 448.0, 556.94):
        window = np.abs(f - centre) < 3
        peak = f[window][np.argmax(atten[window])]
        assert abs(peak - centre) < 0.1, centre
        i = np.flatnonzero(f == peak)[0]
        assert atten[i] > atten[i - 1] and atten[i] > atten[i + 1]


@pytest.mark.parametrize("f", [60.0, 380.0])
def test_attenuation_close_to_reference_model(f):
    freq = frequency_grid(f - 0.5, f + 0.5, 0.01)
    ours = attenuation_db_per_m(complex_refractivity(CAT, HUMID, freq))[50] * 1e3
    vapour = 0.45 * saturation_pressure_wagner_pruss_hpa(302.15)
    ref = reference_attenuation_db_per_km(f, 302.15, vapour)[0]
    assert abs(ours / ref - 1) < 0.35


def test_peak_gdd_near_380_ghz():
    freq = frequency_grid(370, 390, 0.01)
    profile = phase_profile(los_transfer(complex_refractivity(CAT, HUMID, freq), 30.0))
    window = np.abs(freq - 380.2) <= 5
    peak = np.nanmax(np.abs(profile.gdd[window]))
    assert 0.5 * 5500 <= peak <= 1.5 * 5500


def test_zero_distance_is_identity(wide):
    assert np.array_equal(los_transfer(wide, 0.0).h, np.ones(wide.freq_grid.size, complex))


def test_phase_doubles_with_distance(wide):
    one = np.angle(los_transfer(wide, 7.0).h * 1)  # wrapped
    k = 2 * np.pi * wide.freq_grid * 1e9 / 299792458.0
    exact_1 = -k * 7.0 * wide.refractivity.real
    exact_2 = -k * 14.0 * wide.refractivity.real
    assert np.allclose(np.angle(np.exp(1j * exact_1)), one, atol=1e-9)
    assert np.allclose(np.angle(los_transfer(wide, 14.0).h), np.angle(np.exp(1j * exact_2)), atol=1e-9)


def test_gdd_cumulative_with_distance():
    freq = frequency_grid(375, 385, 0.01)
    spec = complex_refractivity(CAT, HUMID, freq)
    g30 = phase_profile(los_transfer(spec, 30.0)).gdd
    g60 = phase_profile(los_transfer(spec, 60.0)).gdd
    g1 = phase_profile(los_transfer(spec, 1.0)).gdd
    assert np.max(np.abs(g60 - 2 * g30)) / np.max(np.abs(g30)) < 1e-6
    assert np.max(np.abs(g30 - 30 * g1)) / np.max(np.abs(g30)) < 1e-6


def test_negative_distance(wide):
    with pytest.raises(ValueError):
        los_transfer(wide, -1.0)


def test_grid_outside_catalog():
    with pytest.raises(CoverageError):
        complex_refractivity(CAT, HUMID, frequency_grid(900, 1100, 1.0))


def test_non_uniform_grid_rejected():
    with pytest.raises(GridError):
        complex_refractivity(CAT, HUMID, np.array([100.0, 101.0, 103.0]))


def test_single_line_dispersion_and_absorption_shape():
    line = LineRecord("H2O", 380.197353, 1.2e-20, 2.8, 14.0, 0.54, 212.1)
    cat = LineCatalog.from_lines([line], 300, 460)
    freq = frequency_grid(370, 390.4, 0.001)
    n = complex_refractivity(cat, HUMID, freq).refractivity
    i0 = int(np.argmin(np.abs(freq - line.f0)))
    peak = int(np.argmax(n.imag))
    # the f/f0 factor of the VVW shape pulls the maximum up by about gamma^2/f0
    gamma = 2.8 * 0.98 * (296 / 302.15) ** 0.54
    assert abs(freq[peak] - line.f0) < 2 * gamma ** 2 / line.f0
    # the real part changes sign across the line centre
    assert np.sign(n.real[i0 - 200]) != np.sign(n.real[i0 + 200])
    crossing = freq[np.flatnonzero(np.diff(np.sign(n.real)))]
    assert np.min(np.abs(crossing - line.f0)) < 0.05


def test_absorption_non_negative(wide):
    assert np.all(wide.refractivity.imag >= 0)


@settings(max_examples=25, deadline=None)
@given(t_c=st.floats(-20, 45), rh=st.floats(0, 1), d=st.floats(0, 500))
def test_passive_channel(t_c, rh, d):
    freq = frequency_grid(300, 460, 0.5)
    spec = complex_refractivity(CAT, AtmosphereState.from_celsius(t_c, rh), freq)
    h = los_transfer(spec, d).h
    assert np.all(np.isfinite(h))
    assert np.all(np.abs(h) <= 1 + 1e-15)


def test_channel_response_validation():
    with pytest.raises(GridError):
        ChannelResponse(np.array([1.0, 2.0, 2.5]), np.ones(3, complex), 0.0)
    with pytest.raises(ValueError):
        ChannelResponse(np.array([1.0, 2.0, 3.0]), np.ones(2, complex), 0.0)
