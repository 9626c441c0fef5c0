import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marsim import geomath as gm
from marsim.errors import OutOfRange

EARTH = 6_371_000.0


def random_quat(draw_floats):
    q = np.array(draw_floats)
    n = np.linalg.norm(q)
    return q / n if n > 1e-6 else np.array([1.0, 0, 0, 0])


unit_quats = st.lists(
    st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4
).map(random_quat)
vec3s = st.lists(
    st.floats(-100, 100, allow_nan=False), min_size=3, max_size=3
).map(np.array)


class TestRotation:
    def test_identity(self):
        q = np.array([1.0, 0, 0, 0])
        np.testing.assert_allclose(
            gm.rotate_body_to_world(q, [1, 2, 3]), [1, 2, 3], atol=1e-12
        )

    def test_yaw_90_takes_x_to_east(self):
        q = gm.quat_from_euler(0, 0, math.pi / 2)
        out = gm.rotate_body_to_world(q, [1, 0, 0])
        np.testing.assert_allclose(out, [0, 1, 0], atol=1e-12)

    @given(unit_quats, vec3s)
    @settings(max_examples=200, deadline=None)
    def test_round_trip_and_norm(self, q, v):
        world = gm.rotate_body_to_world(q, v)
        assert abs(np.linalg.norm(world) - np.linalg.norm(v)) <= 1e-9 * max(
            1.0, np.linalg.norm(v)
        )
        back = gm.rotate_world_to_body(q, world)
        np.testing.assert_allclose(back, v, atol=1e-9)

    @given(unit_quats)
    @settings(max_examples=100, deadline=None)
    def test_euler_round_trip(self, q):
        roll, pitch, yaw = gm.quat_to_euler(q)
        q2 = gm.quat_from_euler(roll, pitch, yaw)
        # q and -q are the same rotation
        v = np.array([1.0, 0.5, -0.25])
        np.testing.assert_allclose(
            gm.rotate_body_to_world(q, v), gm.rotate_body_to_world(q2, v), atol=1e-8
        )


class TestIntegratePose:
    def test_zero_velocity_is_identity(self):
        p = gm.Pose(np.array([1.0, 2, 3]), gm.quat_from_euler(0.1, 0.2, 0.3))
        p2 = gm.integrate_pose(p, gm.BodyVelocity(), 5.0)
        np.testing.assert_array_equal(p2.position, p.position)
        np.testing.assert_allclose(p2.orientation, p.orientation, atol=1e-12)

    def test_unit_surge_north(self):
        p2 = gm.integrate_pose(
            gm.Pose(), gm.BodyVelocity(np.array([1.0, 0, 0]), np.zeros(3)), 1.0
        )
        np.testing.assert_allclose(p2.position, [1, 0, 0], atol=1e-12)

    def test_quarter_turn_yaw_rate(self):
        # closed form: constant r for 1 s yields yaw = r * t exactly
        nu = gm.BodyVelocity(np.zeros(3), np.array([0, 0, math.pi / 2]))
        p2 = gm.integrate_pose(gm.Pose(), nu, 1.0)
        yaw = gm.quat_to_euler(p2.orientation)[2]
        assert abs(math.degrees(yaw) - 90.0) < 0.1

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            gm.integrate_pose(gm.Pose(), gm.BodyVelocity(), 0.0)


class TestGeodesy:
    def test_origin_maps_to_zero(self):
        o = gm.GeoPoint(58.0, 11.0)
        np.testing.assert_allclose(gm.geodetic_to_local(o, o), np.zeros(3), atol=1e-12)

    def test_millidegree_north_at_equator(self):
        # spherical-earth oracle: R * dlat
        o = gm.GeoPoint(0.0, 0.0)
        v = gm.geodetic_to_local(o, gm.GeoPoint(0.001, 0.0))
        oracle = EARTH * math.radians(0.001)
        assert abs(v[0] - oracle) < 1e-9
        assert abs(v[0] - 111.19) < 0.1

    @given(
        st.floats(-60, 60),
        st.floats(-170, 170),
        st.floats(-10_000, 10_000),
        st.floats(-10_000, 10_000),
        st.floats(-50, 200),
    )
    @settings(max_examples=100, deadline=None)
    def test_round_trip(self, lat0, lon0, x, y, z):
        o = gm.GeoPoint(lat0, lon0)
        p = gm.local_to_geodetic(o, np.array([x, y, z]))
        v = gm.geodetic_to_local(o, p)
        np.testing.assert_allclose(v, [x, y, z], atol=1e-6)

    def test_round_trip_at_10km(self):
        o = gm.GeoPoint(58.0, 11.0)
        v0 = np.array([10_000.0, 10_000.0, 80.0])
        v = gm.geodetic_to_local(o, gm.local_to_geodetic(o, v0))
        assert np.max(np.abs(v - v0)) < 1e-6

    def test_out_of_range(self):
        o = gm.GeoPoint(0.0, 0.0)
        with pytest.raises(OutOfRange):
            gm.geodetic_to_local(o, gm.GeoPoint(2.0, 0.0))
        with pytest.raises(OutOfRange):
            gm.local_to_geodetic(o, np.array([2e5, 0, 0]))

    def test_geopoint_validation(self):
        with pytest.raises(ValueError):
            gm.GeoPoint(91.0, 0.0)
        with pytest.raises(ValueError):
            gm.GeoPoint(0.0, 181.0)


class TestWrapAngle:
    @pytest.mark.parametrize(
        "angle,expect",
        [
            (0.0, 0.0),
            (math.pi, math.pi),
            (-math.pi, math.pi),
            (3 * math.pi, math.pi),
            (math.pi + 0.1, -math.pi + 0.1),
            (-0.25, -0.25),
        ],
    )
    def test_values(self, angle, expect):
        assert gm.wrap_angle(angle) == pytest.approx(expect, abs=1e-12)

    @given(st.floats(-50, 50, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_range(self, a):
        w = gm.wrap_angle(a)
        assert -math.pi < w <= math.pi
        # same angle modulo 2 pi
        assert abs(math.remainder(w - a, 2 * math.pi)) < 1e-9
