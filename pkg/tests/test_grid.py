import math

import numpy as np
import pytest

from oildrift.grid import (Domain, DomainError, DomainSpec, build_domain, cell_of,
                           depth_levels)


def make_domain(nx=8, ny=6, dx=1000.0, dy=1000.0, depth=50.0, **kw) -> Domain:
    spec = DomainSpec(origin_lon=0.0, origin_lat=45.0, nx=nx, ny=ny, dx=dx, dy=dy, **kw)
    bathy = np.full((nx, ny), depth)
    return build_domain(spec, bathy)


class TestBuildDomain:
    def test_grande_america_cell_sizes(self):
        # 664.3 x 443.0 km over 64 x 42 cells
        dx = 664.3e3 / 64
        dy = 443.0e3 / 42
        dom = make_domain(nx=64, ny=42, dx=dx, dy=dy, depth=4600.0)
        assert dom.dx == pytest.approx(10380, rel=1e-3)
        assert dom.dy == pytest.approx(10550, rel=1e-3)

    def test_all_land_is_valid(self):
        spec = DomainSpec(origin_lon=0, origin_lat=45, nx=4, ny=4, dx=100, dy=100)
        dom = build_domain(spec, np.zeros((4, 4)))
        assert dom.n_water == 0
        assert dom.land.all()

    def test_water_plus_land_covers_grid(self):
        rng = np.random.default_rng(11)
        bathy = np.where(rng.random((9, 7)) < 0.3, 0.0, 30.0)
        spec = DomainSpec(origin_lon=0, origin_lat=45, nx=9, ny=7, dx=50, dy=50,
                          n_crit=4, depth_fine_step=0.5)
        dom = build_domain(spec, bathy)
        assert dom.n_water + int(dom.land.sum()) == 9 * 7

    def test_dimension_mismatch_rejected(self):
        spec = DomainSpec(origin_lon=0, origin_lat=45, nx=4, ny=4, dx=100, dy=100)
        with pytest.raises(DomainError, match="does not match"):
            build_domain(spec, np.zeros((5, 4)))

    def test_negative_depth_rejected(self):
        spec = DomainSpec(origin_lon=0, origin_lat=45, nx=3, ny=3, dx=100, dy=100)
        with pytest.raises(DomainError, match=">= 0"):
            build_domain(spec, np.full((3, 3), -1.0))

    def test_fine_mesh_deeper_than_water_rejected(self):
        # 10 fine steps of 0.5 m need at least 5 m of water
        spec = DomainSpec(origin_lon=0, origin_lat=45, nx=3, ny=3, dx=100, dy=100)
        with pytest.raises(DomainError, match="fine mesh"):
            build_domain(spec, np.full((3, 3), 3.0))

    def test_tiny_grid_rejected(self):
        spec = DomainSpec(origin_lon=0, origin_lat=45, nx=2, ny=3, dx=100, dy=100)
        with pytest.raises(DomainError, match="3x3"):
            build_domain(spec, np.zeros((2, 3)))


class TestDepthLevels:
    def test_mesh_structure_example(self):
        # z=50 m, dz1=0.5, n_crit=10, dz2=5 -> {0, 0.5 .. 5, 10, 15 .. 50}
        dom = make_domain(depth=50.0, depth_fine_step=0.5, n_crit=10,
                          depth_coarse_step=5.0)
        levels = depth_levels(dom, 0, 0)
        expected = [0.5 * k for k in range(11)] + [5.0 + 5.0 * k for k in range(1, 10)]
        assert levels.tolist() == pytest.approx(expected)

    def test_strictly_increasing_zero_to_bottom(self):
        dom = make_domain(depth=37.3, depth_fine_step=0.5, n_crit=10,
                          depth_coarse_step=5.0)
        levels = depth_levels(dom, 2, 3)
        assert levels[0] == 0.0
        assert levels[-1] == 37.3
        assert np.all(np.diff(levels) > 0)

    def test_bottom_exactly_at_z_crit(self):
        dom = make_domain(depth=5.0, depth_fine_step=0.5, n_crit=10,
                          depth_coarse_step=5.0)
        levels = depth_levels(dom, 0, 0)
        assert levels[-1] == 5.0
        assert len(levels) == 11  # fine mesh only

    def test_shallow_clamp_below_z_crit(self):
        dom = make_domain(depth=6.0, depth_fine_step=0.5, n_crit=10,
                          depth_coarse_step=5.0, z_crit=8.0)
        levels = depth_levels(dom, 0, 0)
        assert levels[-1] == 6.0
        assert np.all(np.diff(levels) > 0)

    def test_grande_america_level_count(self):
        # 4600 m column: 1 + n_crit fine levels, then ceil((4600-z_crit)/25)
        dz2 = 25.0
        dom = make_domain(depth=4600.0, depth_fine_step=0.5, n_crit=10,
                          depth_coarse_step=dz2)
        z_crit = dom.z_crit
        expected = 1 + 10 + math.ceil((4600.0 - z_crit) / dz2)
        assert len(depth_levels(dom, 0, 0)) == expected

    def test_land_cell_has_no_column(self):
        spec = DomainSpec(origin_lon=0, origin_lat=45, nx=3, ny=3, dx=10, dy=10)
        bathy = np.full((3, 3), 50.0)
        bathy[1, 1] = 0.0
        dom = build_domain(spec, bathy)
        with pytest.raises(DomainError, match="no water column"):
            depth_levels(dom, 1, 1)


class TestCellOf:
    def test_centre_maps_to_cell(self):
        dom = make_domain()
        for i, j in [(0, 0), (3, 2), (7, 5)]:
            assert cell_of(dom, *dom.cell_centre(i, j)) == (i, j)

    def test_round_trip_all_cells(self):
        dom = make_domain(nx=5, ny=4, dx=123.0, dy=77.0)
        for i in range(5):
            for j in range(4):
                assert cell_of(dom, *dom.cell_centre(i, j)) == (i, j)

    def test_shared_edge_goes_to_higher_cell(self):
        dom = make_domain(dx=100.0)
        # boundary between cells 2 and 3 sits at x = 300
        assert cell_of(dom, 300.0, 50.0) == (3, 0)

    def test_out_of_domain_is_signalled(self):
        dom = make_domain()
        assert cell_of(dom, -1.0, -1.0) is None
        assert cell_of(dom, dom.width, 10.0) is None


class TestGeodesy:
    def test_lonlat_round_trip(self):
        dom = make_domain(nx=16, ny=12, dx=4000.0, dy=4000.0)
        x = np.array([100.0, 30000.0])
        y = np.array([500.0, 40000.0])
        lon, lat = dom.xy_to_lonlat(x, y)
        x2, y2 = dom.lonlat_to_xy(lon, lat)
        assert np.allclose(x2, x, atol=1e-6)
        assert np.allclose(y2, y, atol=1e-6)

    def test_metres_per_degree_scale(self):
        dom = make_domain()
        x, _ = dom.lonlat_to_xy(1.0, 45.0)
        # one degree of longitude at ~45N is ~78.6 km
        assert 70e3 < float(x) < 90e3
