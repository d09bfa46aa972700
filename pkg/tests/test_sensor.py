import math

import numpy as np
import pytest

from groundcut.errors import ConfigError
from groundcut.sensor import SensorModel, flat_ground_radii, resolve_sensor


def test_hdl64e_shape_and_order(hdl64e):
    assert hdl64e.laser_count == 64
    assert hdl64e.azimuth_bins == 1800
    assert np.all(np.diff(hdl64e.vertical_angles) > 0)
    # ring 0 is the steepest laser: -24.33 deg elevation
    assert math.degrees(hdl64e.vertical_angles[0]) == pytest.approx(90 - 24.33)


def test_radii_follow_mount_height_times_tangent(hdl64e):
    finite = hdl64e.ground_rings
    expected = hdl64e.mount_height * np.tan(hdl64e.vertical_angles[finite])
    np.testing.assert_allclose(hdl64e.ring_radii[finite], expected, rtol=1e-12)


def test_lasers_above_horizon_never_reach_ground():
    radii = flat_ground_radii(np.radians([80.0, 90.0, 92.0]), 1.7)
    assert np.isfinite(radii[0])
    assert np.isinf(radii[1:]).all()


@pytest.mark.parametrize(
    "angles, height",
    [([1.0], 1.7), ([1.0, 0.9], 1.7), ([1.0, 1.1], 0.0), ([1.0, 1.0], 1.7)],
)
def test_invalid_models_rejected(angles, height):
    with pytest.raises(ConfigError):
        SensorModel(np.array(angles), height)


def test_non_monotonic_radii_rejected():
    with pytest.raises(ConfigError):
        SensorModel(np.radians([60.0, 70.0]), 1.7, ring_radii=np.array([5.0, 4.0]))


def test_file_round_trip(tmp_path, hdl64e):
    path = tmp_path / "sensor.ini"
    hdl64e.dump(path)
    back = SensorModel.load(path)
    np.testing.assert_allclose(back.vertical_angles, hdl64e.vertical_angles, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(np.isinf(back.ring_radii), np.isinf(hdl64e.ring_radii))
    fin = np.isfinite(hdl64e.ring_radii)
    np.testing.assert_allclose(back.ring_radii[fin], hdl64e.ring_radii[fin], rtol=1e-12)
    assert back.mount_height == hdl64e.mount_height
    assert resolve_sensor(path).laser_count == 64
    assert resolve_sensor("hdl64e").laser_count == 64


def test_bad_sensor_file(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[sensor]\nlaser_count = 3\nmount_height = 1.7\n[lasers]\n0 = 60 3.0\n")
    with pytest.raises(ConfigError):
        SensorModel.load(path)
