import numpy as np
import pytest

from cloakbench import geomap


def _random_points(rng, count, r_min=0.2, r_max=3.0):
    d = rng.normal(size=(count, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rng.uniform(r_min, r_max, size=(count, 1))


def test_kelvin_examples():
    F = geomap.kelvin_map(1.0)
    assert np.allclose(F.forward([2.0, 0.0, 0.0]), [0.5, 0.0, 0.0])
    assert np.allclose(F.forward([0.0, 1.0, 0.0]), [0.0, 1.0, 0.0])
    G = geomap.kelvin_map(20.0)
    assert np.allclose(G.forward([1.0, 0.0, 0.0]), [400.0, 0.0, 0.0])


def test_kelvin_is_involution(rng):
    F = geomap.kelvin_map(1.7)
    x = _random_points(rng, 200)
    assert np.allclose(F.forward(F.forward(x)), x, rtol=1e-14, atol=0)


def test_kelvin_jacobian_reflection_sign(rng):
    F = geomap.kelvin_map(2.0)
    x = _random_points(rng, 50)
    r = np.linalg.norm(x, axis=1)
    det = F.signed_det(x)
    # the inversion reverses orientation: det = -(r0/r)^6
    assert np.allclose(det, -(2.0 / r) ** 6, rtol=1e-12)


def test_jacobian_against_finite_differences(rng):
    F = geomap.kelvin_map(1.3)
    x = _random_points(rng, 30, 0.5, 2.0)
    assert np.max(np.abs(F.jacobian(x) - geomap.fd_jacobian(F.forward_fn, x))) < 1e-7


def test_kelvin_composition_is_scaling(rng):
    r2, r3 = 1.0, 20.0
    GF = geomap.compose(geomap.kelvin_map(r3), geomap.kelvin_map(r2))
    x = _random_points(rng, 1000, 0.05, 5.0)
    assert np.max(np.abs(GF.forward(x) - (r3 / r2) ** 2 * x)) <= 1e-12 * (r3 / r2) ** 2
    assert GF.scale == pytest.approx(400.0)


def test_push_forward_composition(rng):
    F, G = geomap.kelvin_map(1.0), geomap.kelvin_map(20.0)
    GF = geomap.compose(G, F)
    x = _random_points(rng, 1000, 0.05, 1.0)
    a = rng.normal(size=(1000, 3, 3)) + 1j * rng.normal(size=(1000, 3, 3))
    a = a + np.swapaxes(a, 1, 2)
    lhs = geomap.push_matrix(GF, a, x)
    rhs = geomap.push_matrix(G, geomap.push_matrix(F, a, x), F.forward(x))
    assert np.max(np.abs(lhs - rhs) / np.abs(lhs).max(axis=(1, 2), keepdims=True)) < 1e-10


def test_push_identity_under_kelvin():
    # F_* I at y = F(x) is -(r0^2/|y|^2) I for the inversion
    F = geomap.kelvin_map(1.0)
    y = np.array([[0.5, 0.0, 0.0], [0.0, 0.3, 0.4]])
    tp = geomap.push_tensor(F, geomap.TensorPair.isotropic(1.0, 1.0), y)
    for yi, eps in zip(y, tp.epsilon):
        s = np.dot(yi, yi)
        assert np.allclose(eps, -np.eye(3) / s, atol=1e-12)


def test_push_preserves_symmetry(rng):
    F = geomap.kelvin_map(1.0)
    y = _random_points(rng, 20, 0.3, 0.9)
    a = rng.normal(size=(3, 3))
    tp = geomap.push_tensor(F, geomap.TensorPair(a + a.T, np.eye(3)), y)
    assert tp.is_symmetric(1e-12)


def test_push_field_and_source_rules(rng):
    F = geomap.scaling_map(3.0)
    x = _random_points(rng, 5)
    E = rng.normal(size=(5, 3))
    assert np.allclose(geomap.push_field(F, E, x), E / 3.0)
    assert np.allclose(geomap.push_source(F, E, x), E / 27.0)


def test_singular_jacobian_rejected():
    F = geomap.radial_map(lambda r: r**3, lambda s: s ** (1 / 3), df=lambda r: 3 * r**2)
    with pytest.raises(geomap.SingularJacobianError):
        geomap.push_matrix(F, np.eye(3), np.array([[1e-6, 0.0, 0.0]]))


def test_kelvin_rejects_origin():
    with pytest.raises(ValueError):
        geomap.kelvin_map(1.0).forward([0.0, 0.0, 0.0])


def test_inverse_map(rng):
    F = geomap.radial_map(lambda r: 2 * r + r**2, lambda s: np.sqrt(1 + s) - 1, df=lambda r: 2 + 2 * r)
    Fi = geomap.inverse(F)
    x = _random_points(rng, 20)
    assert np.allclose(Fi.forward(F.forward(x)), x, atol=1e-13)
    assert np.allclose(Fi.jacobian(F.forward(x)) @ F.jacobian(x), np.eye(3), atol=1e-12)


def test_push_boundary_on_scaling():
    F = geomap.scaling_map(2.0)
    x = np.array([[1.0, 0.0, 0.0]])
    g = np.array([[0.0, 1.0, 0.0]])
    out = geomap.push_boundary(F, 1.0, g, x)
    assert np.allclose(np.abs(out), [[0.0, 0.5, 0.0]])


def test_push_boundary_rejects_normal_data():
    F = geomap.scaling_map(2.0)
    with pytest.raises(ValueError):
        geomap.push_boundary(F, 1.0, np.array([[1.0, 0.0, 0.0]]), np.array([[1.0, 0.0, 0.0]]))


def _plane_wave(k):
    def fields(x):
        ph = np.exp(1j * k * x[..., 2])[..., None]
        return np.array([1.0, 0, 0]) * ph, np.array([0, 1.0, 0]) * ph

    return fields


def test_change_of_variables_scaling_second_order():
    t = geomap.scaling_map(2.0)
    res = []
    for n in (9, 17, 33):
        patch = geomap.CartesianPatch(np.array([1.0, 0.4, 0.7]), 0.2, n)
        rep = geomap.change_of_variables_residual(
            t, _plane_wave(1.0), lambda x: geomap.TensorPair.isotropic(1.0, 1.0), 1.0, patch
        )
        res.append((rep.spacing, rep.residual))
    h, r = np.array(res).T
    order = np.polyfit(np.log(h), np.log(r), 1)[0]
    assert order >= 1.8


def test_change_of_variables_kelvin_order():
    t = geomap.kelvin_map(1.0)
    res = []
    for n in (9, 17, 33):
        patch = geomap.CartesianPatch(np.array([0.45, 0.3, 0.35]), 0.1, n)
        rep = geomap.change_of_variables_residual(
            t, _plane_wave(1.0), lambda x: geomap.TensorPair.isotropic(1.0, 1.0), 1.0, patch
        )
        res.append((rep.spacing, rep.residual))
    h, r = np.array(res).T
    assert np.polyfit(np.log(h), np.log(r), 1)[0] >= 0.9


def test_patch_needs_enough_points():
    with pytest.raises(ValueError):
        geomap.CartesianPatch(np.zeros(3), 1.0, 3).grid()


def test_admissible_kelvin_pair():
    r1 = geomap.check_admissible(geomap.kelvin_map(1.0), geomap.kelvin_map(20.0), 1.0, 20.0)
    assert r1 == pytest.approx(0.05)


def test_inadmissible_pair_reports_condition():
    F = geomap.compose(geomap.scaling_map(1.1), geomap.kelvin_map(1.0))
    with pytest.raises(geomap.AdmissibilityError) as err:
        geomap.check_admissible(F, geomap.kelvin_map(20.0), 1.0, 20.0)
    assert err.value.condition == "i"
