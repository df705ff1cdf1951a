import math

import pytest

import tweezersim as ts

ETA = 0.36
RABI = 2 * math.pi * 2e3


def test_zero_frequency_response():
    assert ts.response_closed_form(0.0, ETA, RABI) == pytest.approx(1 / (ETA * RABI) ** 2, rel=1e-12)


def test_numeric_matches_closed_form():
    f = [10.0, 100.0, 1000.0, 5000.0]
    numeric = ts.response_numeric(f, ETA, RABI)
    for fi, v in zip(f, numeric):
        assert v == pytest.approx(ts.response_closed_form(fi, ETA, RABI), rel=1e-6)


def test_cooling_reference():
    q = 0.5
    d = ts.thermal_distribution(q / (1 - q), 60)
    assert ts.remove_one_quantum(d)[0] == pytest.approx(1 - q * q, abs=1e-9)
    assert ts.nbar_from_ratio(ts.ratio_from_nbar(0.3)) == pytest.approx(0.3)


def test_config_errors_carry_the_key():
    with pytest.raises(ts.ConfigError, match="protocol.shotz"):
        ts.resolve_config({"protocol": {"shotz": 1}})
    with pytest.raises(ValueError):
        ts.simulate({"protocol": {"shots": 0}})


def test_readout_is_deterministic():
    cfg = {"seed": 11, "protocol": {"shots": 200}, "imaging": {"calibrate_to_fidelity": 0.9}}
    a = ts.simulate(cfg, threads=1)
    b = ts.simulate(cfg, threads=4)
    assert a == b
    assert 0.8 < a["detection"][0]["fidelity"] < 1.0


def test_cooling_summary():
    out = ts.simulate({"protocol": {"kind": "cooling", "shots": 400, "initial_ground_fractions": [0.5]},
                       "trap": {"n_max": 40}})
    row = out["cooling"][0]
    assert row["ideal"] == pytest.approx(0.75, abs=1e-9)
    assert abs(row["ground_fraction"] - 0.75) < 0.1


def test_spectrum_fit_round_trip():
    rows = ts.spectrum({"seed": 5, "analysis": {"spectrum": {"nbar": 0.1, "points": 451, "shots_per_point": 500}}})
    fit = ts.fit_spectrum([r[0] for r in rows], [r[1] for r in rows], [r[3] for r in rows])
    t = fit["temperature"]
    assert t["nbar_lower"] <= t["nbar"] <= t["nbar_upper"]
    assert fit["heating_peak"]["center_hz"] == pytest.approx(35e3, abs=500)


def test_truncation_is_numeric_error():
    with pytest.raises(ts.NumericError, match="core-state"):
        ts.spectrum({"trap": {"n_max": 3}, "analysis": {"spectrum": {"nbar": 2.0}}})
