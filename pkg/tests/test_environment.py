import numpy as np
import pytest

from marsim import environment as env
from marsim.errors import IrregularGrid, NoData, OutOfBounds, ParseError

ASC_2X2 = """ncols 2
nrows 2
xllcorner 0.0
yllcorner 0.0
cellsize 10.0
NODATA_value -9999.0
5 6
7 8
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestAscParsing:
    def test_small_grid(self, tmp_path):
        g = env.load_bathymetry(write(tmp_path, "g.asc", ASC_2X2))
        assert (g.n_rows, g.n_cols) == (2, 2)
        # first file row is the north-most: nodes stored south-to-north
        assert env.depth_at(g, 0.0, 0.0) == 7.0
        assert env.depth_at(g, 10.0, 0.0) == 5.0
        assert env.depth_at(g, 0.0, 10.0) == 8.0
        assert env.depth_at(g, 10.0, 10.0) == 6.0

    def test_missing_header_row_names_line(self, tmp_path):
        broken = ASC_2X2.replace("NODATA_value -9999.0\n", "")
        with pytest.raises(ParseError, match="line 6"):
            env.load_bathymetry(write(tmp_path, "g.asc", broken))

    def test_wrong_column_count(self, tmp_path):
        broken = ASC_2X2.replace("5 6", "5 6 6")
        with pytest.raises(ParseError):
            env.load_bathymetry(write(tmp_path, "g.asc", broken))

    def test_non_numeric(self, tmp_path):
        broken = ASC_2X2.replace("5 6", "5 six")
        with pytest.raises(ParseError):
            env.load_bathymetry(write(tmp_path, "g.asc", broken))


class TestXyzParsing:
    def test_equivalent_to_asc(self, tmp_path):
        g1 = env.load_bathymetry(write(tmp_path, "g.asc", ASC_2X2))
        xyz = "\n".join(
            f"{x} {y} {z}"
            for x, y, z in [
                (0, 0, 7), (10, 0, 8), (0, 10, 5), (10, 10, 6),
            ]
        )
        g2 = env.load_bathymetry(write(tmp_path, "g.xyz", xyz))
        np.testing.assert_array_equal(g1.depth, g2.depth)
        assert g1.cell_size == g2.cell_size
        assert (g1.east_sw, g1.north_sw) == (g2.east_sw, g2.north_sw)

    def test_irregular_spacing(self, tmp_path):
        xyz = "0 0 1\n10 0 1\n21 0 1\n0 10 1\n10 10 1\n21 10 1"
        with pytest.raises(IrregularGrid):
            env.load_bathymetry(write(tmp_path, "g.xyz", xyz))

    def test_incomplete_grid(self, tmp_path):
        xyz = "0 0 1\n10 0 1\n0 10 1"
        with pytest.raises(IrregularGrid):
            env.load_bathymetry(write(tmp_path, "g.xyz", xyz))


class TestDepthAt:
    def grid(self):
        return env.BathymetryGrid(
            east_sw=0.0, north_sw=0.0, cell_size=10.0,
            depth=np.array([[4.0, 4.0], [8.0, 8.0]]),
        )

    def test_exact_at_nodes(self):
        g = self.grid()
        assert env.depth_at(g, 0, 0) == 4.0
        assert env.depth_at(g, 10, 10) == 8.0

    def test_cell_midpoint_average(self):
        assert env.depth_at(self.grid(), 5.0, 5.0) == 6.0

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBounds):
            env.depth_at(self.grid(), -1.0, 0.0)
        with pytest.raises(OutOfBounds):
            env.depth_at(self.grid(), 0.0, 11.0)

    def test_nodata_corner(self):
        g = env.BathymetryGrid(
            east_sw=0.0, north_sw=0.0, cell_size=10.0,
            depth=np.array([[4.0, -9999.0], [8.0, 8.0]]),
        )
        with pytest.raises(NoData):
            env.depth_at(g, 5.0, 5.0)

    def test_continuity_across_cell_edges(self):
        rng = np.random.default_rng(3)
        g = env.BathymetryGrid(
            east_sw=0.0, north_sw=0.0, cell_size=10.0,
            depth=rng.uniform(2, 30, size=(5, 5)),
        )
        for y in np.linspace(0.0, 40.0, 9):
            a = env.depth_at(g, 10.0 - 1e-9, float(y))
            b = env.depth_at(g, 10.0 + 1e-9, float(y))
            assert abs(a - b) < 1e-6


class TestRoundTrip:
    def test_write_reload_identical(self, tmp_path):
        rng = np.random.default_rng(4)
        g = env.BathymetryGrid(
            east_sw=-120.0, north_sw=35.5, cell_size=12.5,
            depth=rng.uniform(0.0, 55.0, size=(7, 9)),
        )
        path = str(tmp_path / "out.asc")
        env.write_bathymetry_asc(g, path)
        g2 = env.load_bathymetry(path)
        np.testing.assert_array_equal(g.depth, g2.depth)
        assert g.cell_size == g2.cell_size
        assert (g.east_sw, g.north_sw, g.nodata) == (g2.east_sw, g2.north_sw, g2.nodata)


class TestSampling:
    def world(self):
        flow = env.FlowField(
            layers=[(0.0, 10.0, np.array([0.3, 0.0, 0.0])),
                    (10.0, 30.0, np.array([0.1, -0.05, 0.0]))],
            wind=np.array([4.0, 1.0, 0.0]),
        )
        return env.WorldEnvironment(flow=flow)

    def test_layer_lookup(self):
        s = env.sample_environment(self.world(), np.array([0, 0, 5.0]))
        np.testing.assert_array_equal(s.current, [0.3, 0, 0])
        np.testing.assert_array_equal(s.wind, np.zeros(3))
        assert s.rho == 1025.0

    def test_above_surface_is_air(self):
        s = env.sample_environment(self.world(), np.array([0, 0, -2.0]))
        np.testing.assert_array_equal(s.current, np.zeros(3))
        np.testing.assert_array_equal(s.wind, [4, 1, 0])
        assert s.rho == pytest.approx(1.225)

    def test_layer_boundary_half_open(self):
        s = env.sample_environment(self.world(), np.array([0, 0, 10.0]))
        np.testing.assert_array_equal(s.current, [0.1, -0.05, 0.0])

    def test_below_all_layers_still(self):
        s = env.sample_environment(self.world(), np.array([0, 0, 50.0]))
        np.testing.assert_array_equal(s.current, np.zeros(3))

    def test_overlapping_layers_rejected(self):
        with pytest.raises(ValueError):
            env.FlowField(layers=[(0, 10, np.zeros(3)), (5, 20, np.zeros(3))])


class TestGrounding:
    def grid(self):
        return env.BathymetryGrid(
            east_sw=0.0, north_sw=0.0, cell_size=10.0,
            depth=np.full((3, 3), 10.0),
        )

    def test_clear(self):
        r = env.grounding_check(self.grid(), np.array([5, 5, 5.0]), 0.5)
        assert not r.grounded

    def test_grounded_with_penetration(self):
        r = env.grounding_check(self.grid(), np.array([5, 5, 9.8]), 0.5)
        assert r.grounded
        assert r.penetration == pytest.approx(0.3)

    def test_exact_touch_counts(self):
        r = env.grounding_check(self.grid(), np.array([5, 5, 9.5]), 0.5)
        assert r.grounded
        assert r.penetration == 0.0
