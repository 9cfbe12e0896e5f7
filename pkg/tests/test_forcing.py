import numpy as np
import pytest

from oildrift.config import ConfigError
from oildrift.forcing import load_gridded_series
from oildrift.rasters import write_esri_ascii


def write_stack(tmp_path, name="wind_u.csv", times=("2020-01-01T00:00:00Z",
                                                    "2020-01-01T06:00:00Z"),
                value_fn=lambda k, lon, lat: 2.0 + k):
    lines = []
    for k, t in enumerate(times):
        lines.append(f"time,{t}")
        lines.append("lon,lat,value")
        for lon in (0.0, 0.5, 1.0):
            for lat in (45.0, 45.5):
                lines.append(f"{lon},{lat},{value_fn(k, lon, lat)}")
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


class TestCsvStack:
    def test_single_slice_is_constant_in_time(self, tmp_path):
        path = write_stack(tmp_path, times=("2020-01-01T00:00:00Z",))
        series = load_gridded_series(path, "wind_u")
        for t in (0.0, 1.577e9, 1.578e9):
            assert float(series.sample(t, 0.5, 45.25)) == pytest.approx(2.0)

    def test_time_blend_is_linear(self, tmp_path):
        series = load_gridded_series(write_stack(tmp_path), "wind_u")
        t0, t1 = series.times
        mid = 0.5 * (t0 + t1)
        v = float(series.sample(mid, 0.5, 45.25))
        assert v == pytest.approx(2.5)
        quarter = t0 + 0.25 * (t1 - t0)
        assert float(series.sample(quarter, 0.5, 45.25)) == pytest.approx(2.25)

    def test_bilinear_in_space(self, tmp_path):
        path = write_stack(tmp_path, times=("2020-01-01T00:00:00Z",),
                           value_fn=lambda k, lon, lat: 3.0 * lon + (lat - 45.0))
        series = load_gridded_series(path, "wind_u")
        assert float(series.sample(0.0, 0.25, 45.1)) == pytest.approx(0.85, rel=1e-12)

    def test_outside_time_range_clamps(self, tmp_path):
        series = load_gridded_series(write_stack(tmp_path), "wind_u")
        before = float(series.sample(series.times[0] - 9999.0, 0.5, 45.25))
        after = float(series.sample(series.times[-1] + 9999.0, 0.5, 45.25))
        assert before == pytest.approx(2.0)
        assert after == pytest.approx(3.0)

    def test_non_monotonic_time_rejected(self, tmp_path):
        path = write_stack(tmp_path, times=("2020-01-01T06:00:00Z",
                                            "2020-01-01T00:00:00Z"))
        with pytest.raises(ConfigError, match="strictly increase"):
            load_gridded_series(path, "wind_u")

    def test_grid_mismatch_rejected(self, tmp_path):
        path = write_stack(tmp_path)
        with open(path) as fh:
            lines = fh.read().splitlines()
        lines = lines[:-1]  # drop one point from the last slice
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ConfigError, match="grid"):
            load_gridded_series(path, "wind_u")

    def test_irregular_points_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,2020-01-01T00:00:00Z\n0,45,1\n0.5,45.5,2\n1,46,3\n")
        with pytest.raises(ConfigError, match="regular"):
            load_gridded_series(path, "x")


class TestManifestSeries:
    def test_esri_sequence(self, tmp_path):
        for k in range(2):
            write_esri_ascii(tmp_path / f"w{k}.asc", np.full((3, 2), float(k)),
                             0.0, 45.0, 0.5, 0.5)
        manifest = tmp_path / "wind_u.json"
        manifest.write_text(
            '{"variable": "wind_u", "slices": ['
            '{"time": "2020-01-01T00:00:00Z", "path": "w0.asc"},'
            '{"time": "2020-01-01T06:00:00Z", "path": "w1.asc"}]}')
        series = load_gridded_series(manifest)
        mid = 0.5 * (series.times[0] + series.times[1])
        assert float(series.sample(mid, 0.5, 45.5)) == pytest.approx(0.5)
