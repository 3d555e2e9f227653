"""Round trips through the file formats."""
import json

import numpy as np
import pytest

from mploc import CandidateSet, usage_estimate
from mploc.channel import Pdp, exp_pdp
from mploc.errors import ValidationError
from mploc.geometry import Position, Scenario
from mploc.io import (
    read_observations,
    read_pdp,
    read_scenario,
    usage_result_dict,
    write_observations,
    write_pdp,
    write_scenario,
    write_usage_result,
)

from _synth import make_case, short_profile


def test_observation_round_trip(tmp_path):
    case = make_case(num_bins=4, num_windows=3, num_stations=2, snr_db=15.0, seed=101)
    path = write_observations(case.obs, tmp_path / "obs.bin")
    back = read_observations(path)
    np.testing.assert_array_equal(back.y, case.obs.y)
    assert back.grid == case.obs.grid
    assert back.num_windows == 3
    assert back.noise_variance == case.obs.noise_variance


def test_observation_payload_layout(tmp_path):
    # The payload contract: little-endian float64, re/im interleaved per
    # sample, stations concatenated. Parse it by hand.
    case = make_case(num_bins=4, num_windows=2, num_stations=2, snr_db=15.0, seed=102)
    path = write_observations(case.obs, tmp_path / "obs.bin")
    raw = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(2, 8, 2)
    np.testing.assert_array_equal(raw[..., 0], case.obs.y.real)
    np.testing.assert_array_equal(raw[..., 1], case.obs.y.imag)
    meta = json.loads((tmp_path / "obs.json").read_text())
    assert meta == {
        "M": 2, "K": 4, "D": 2, "Fs": 100e6,
        "noise_variance": case.obs.noise_variance,
    }


def test_observation_error_paths(tmp_path):
    case = make_case(num_bins=4, num_windows=2, num_stations=2, snr_db=15.0, seed=103)
    path = write_observations(case.obs, tmp_path / "obs.bin")
    with pytest.raises(FileNotFoundError):
        read_observations(tmp_path / "missing.bin")
    (tmp_path / "obs.json").write_text('{"M": 2, "K": 4}')
    with pytest.raises(ValidationError):
        read_observations(path)
    (tmp_path / "obs.json").write_text(
        json.dumps({"M": 2, "K": 4, "D": 3, "Fs": 100e6, "noise_variance": 1.0})
    )
    with pytest.raises(ValidationError):
        read_observations(path)          # payload size disagrees with sidecar
    (tmp_path / "obs.json").write_text("not json")
    with pytest.raises(ValidationError):
        read_observations(path)


def test_pdp_round_trip(tmp_path):
    pdp = exp_pdp(short_profile())
    path = write_pdp(pdp, tmp_path / "pdp.json")
    back = read_pdp(path)
    assert isinstance(back, Pdp)
    np.testing.assert_array_equal(back.variances, pdp.variances)
    assert back.delta_tau_s == pdp.delta_tau_s
    (tmp_path / "bad.json").write_text("[1, 2,")
    with pytest.raises(ValidationError):
        read_pdp(tmp_path / "bad.json")


def test_scenario_round_trip(tmp_path):
    scenario = Scenario(
        emitter=Position(1.0, -2.0, 0.0),
        stations=(Position(10.0, 0.0, 0.0), Position(-10.0, 0.0, 0.0)),
    )
    path = write_scenario(scenario, tmp_path / "scene.json")
    assert read_scenario(path) == scenario
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ValidationError):
        read_scenario(tmp_path / "bad.json")


def test_usage_result_serialization(tmp_path):
    case = make_case(num_bins=4, num_windows=2, num_stations=2, snr_db=15.0, seed=104)
    truth = case.scenario.emitter.as_array()
    cands = CandidateSet(truth[None, :] + np.array([[0, 0, 0], [3, 0, 0]], float))
    res = usage_estimate(case.obs, case.covs, case.scenario.stations, cands)
    d = usage_result_dict(res)
    assert d["position"] == [res.position.x, res.position.y, res.position.z]
    assert d["best_cost"] == float(res.costs[res.best_index])
    assert len(d["costs"]) == 2
    path = write_usage_result(res, tmp_path / "result.json")
    assert json.loads(path.read_text()) == d
