import numpy as np

from conftest import make_instance
from mdvrp_lab.features import to_polar


def test_polar_examples():
    inst = make_instance([(0.5, 0.5), (0.2, 0.2)], [(1.5, 0.5), (0.5, 1.5), (0.5, -0.5)], [5, 10, 1], 10)
    f = to_polar(inst)
    assert f.shape == (5, 3)
    assert f[0].tolist() == [0, 0, 0]
    assert np.allclose(f[2], [1, 0, 0.5])
    assert np.allclose(f[3], [1, np.pi / 2, 1.0])
    assert np.allclose(f[4], [1, 3 * np.pi / 2, 0.1])
    assert f[1, 2] == 0


def test_angles_in_range_and_coincident_nodes():
    inst = make_instance([(0.3, 0.3)], [(0.3, 0.3), (0.0, 0.3), (0.3, 0.0)], [1, 1, 1], 10)
    f = to_polar(inst)
    assert f[1, 0] == 0 and f[1, 1] == 0
    assert np.all((f[:, 1] >= 0) & (f[:, 1] < 2 * np.pi))
    assert np.isclose(f[2, 1], np.pi)


def test_translation_invariance():
    rng = np.random.default_rng(0)
    dep, cus = rng.random((2, 2)), rng.random((10, 2))
    dem = rng.integers(1, 11, 10)
    a = to_polar(make_instance(dep, cus, dem, 50))
    b = to_polar(make_instance(dep + [3.0, -2.0], cus + [3.0, -2.0], dem, 50))
    assert np.allclose(a, b, atol=1e-12)


def test_rotation_about_first_depot_shifts_angles():
    rng = np.random.default_rng(1)
    dep, cus = rng.random((2, 2)), rng.random((10, 2))
    dem = rng.integers(1, 11, 10)
    alpha = 0.7
    R = np.array([[np.cos(alpha), -np.sin(alpha)], [np.sin(alpha), np.cos(alpha)]])
    rot = lambda p: (p - dep[0]) @ R.T + dep[0]
    a = to_polar(make_instance(dep, cus, dem, 50))
    b = to_polar(make_instance(rot(dep), rot(cus), dem, 50))
    assert np.allclose(a[:, 0], b[:, 0])
    shift = np.mod(b[1:, 1] - a[1:, 1], 2 * np.pi)
    assert np.allclose(shift, alpha)
    assert np.array_equal(a[:, 2], b[:, 2])
