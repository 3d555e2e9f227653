"""Headless figure rendering."""
import numpy as np
import pytest

from mploc import CandidateSet, ChannelConfig, RunConfig, SearchConfig, usage_estimate
from mploc.errors import ValidationError
from mploc.harness import run_monte_carlo
from mploc.plotting import plot_cost_surface, plot_sweep

from _synth import make_case, short_profile


def _png_header(path) -> bool:
    return path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_plot_sweep_writes_a_png(tmp_path):
    cfg = RunConfig(
        num_bins=4,
        num_windows=2,
        axis="stations",
        axis_values=(2, 3),
        num_configs=2,
        trials_per_config=2,
        estimators=("usage_cwc", "baseline"),
        compute_crlb=True,
        seed=7,
        channel=ChannelConfig(kind="exp", exp=short_profile()),
        search=SearchConfig(extent_m=24.0, step_m=6.0),
    )
    res = run_monte_carlo(cfg)
    out = plot_sweep(res, tmp_path / "sweep.png")
    assert out.exists() and _png_header(out)


def test_plot_cost_surface_needs_a_regular_grid(tmp_path):
    case = make_case(num_bins=4, num_windows=2, num_stations=3, snr_db=15.0, seed=111)
    grid = CandidateSet.planar_grid(extent_m=8.0, step_m=2.0)
    res = usage_estimate(case.obs, case.covs, case.scenario.stations, grid)
    out = plot_cost_surface(
        res, tmp_path / "surface.png", truth=case.scenario.emitter.as_array()
    )
    assert out.exists() and _png_header(out)

    scattered = CandidateSet(np.array([[0, 0, 0], [1, 2, 0], [3, 1, 0]], float))
    res2 = usage_estimate(case.obs, case.covs, case.scenario.stations, scattered)
    with pytest.raises(ValidationError):
        plot_cost_surface(res2, tmp_path / "bad.png")
