import numpy as np
import pytest

from cloakbench import geomap, media


def _obj():
    return media.RadialProfile.constant(1.0, 2.0, 2.0, 3.0)


def test_vacuum_object_layout_values():
    lay = media.build_scheme(media.RadialProfile.constant(1.0, 2.0, 1.0, 1.0), 1.0, 20.0, 0.0)
    assert lay.r1 == pytest.approx(0.05)
    eps, mu = lay.scalar(0.5)
    assert eps == pytest.approx(-4.0) and mu == pytest.approx(-4.0)
    assert lay.scalar(0.01) == pytest.approx((400.0, 400.0))
    assert lay.scalar(10.0) == pytest.approx((1.0, 1.0))


def test_middle_layer_mirrors_object():
    # |y| = 0.75 maps to 1/0.75 in [1, 2], inside the object
    lay = media.build_scheme(_obj(), 1.0, 20.0, 0.0)
    eps, mu = lay.scalar(0.75)
    assert eps == pytest.approx(-2.0 / 0.75**2)
    assert mu == pytest.approx(-3.0 / 0.75**2)


def test_middle_layer_vacuum_extension():
    # |y| = sqrt(r1 r2) maps to sqrt(r2 r3), inside the vacuum extension
    lay = media.build_scheme(_obj(), 1.0, 20.0, 0.0)
    y = np.sqrt(0.05)
    eps, mu = lay.scalar(y)
    assert eps == pytest.approx(-1.0 / y**2)
    assert mu == pytest.approx(-1.0 / y**2)


def test_loss_enters_middle_layer_only():
    delta = 0.1
    lay = media.build_scheme(_obj(), 1.0, 20.0, delta)
    assert lay.scalar(0.75)[0].imag == pytest.approx(delta)
    assert lay.scalar(1.5)[0].imag == 0.0
    assert lay.scalar(0.01)[0].imag == 0.0


def test_negative_definite_real_part_in_middle():
    lay = media.build_scheme(_obj(), 1.0, 20.0, 1e-3)
    for r in np.linspace(0.06, 0.99, 20):
        tp = lay.tensors(np.array([r, 0.0, 0.0]))
        assert np.all(np.linalg.eigvalsh(tp.epsilon.real) < 0)
        assert np.all(np.linalg.eigvalsh(tp.mu.real) < 0)


def test_key_identity_at_zero_loss():
    rep = media.verify_key_identity(media.build_scheme(_obj(), 1.0, 20.0, 0.0))
    assert rep.max_deviation <= 1e-10


def test_key_identity_deviation_linear_in_loss():
    d1 = media.verify_key_identity(media.build_scheme(_obj(), 1.0, 20.0, 1e-2)).max_deviation
    d2 = media.verify_key_identity(media.build_scheme(_obj(), 1.0, 20.0, 1e-3)).max_deviation
    assert d1 / d2 == pytest.approx(10.0, rel=1e-6)


def test_general_scheme_reproduces_kelvin_builder():
    F, G = geomap.kelvin_map(1.0), geomap.kelvin_map(20.0)
    gen = media.build_general_scheme(_obj(), 1.0, 20.0, 1e-2, F, G)
    ref = media.build_scheme(_obj(), 1.0, 20.0, 1e-2)
    for r in (0.02, 0.3, 0.75, 1.5, 5.0):
        x = np.array([0.0, r, 0.0])
        a, b = gen.tensors(x), ref.tensors(x)
        assert np.allclose(a.epsilon, b.epsilon, atol=1e-10)
        assert np.allclose(a.mu, b.mu, atol=1e-10)


def _power_inversion(p, r2=1.0):
    # r -> r2 (r2/r)^p fixes the sphere r2; p = 1 is the Kelvin map
    return geomap.radial_map(
        lambda r: r2 * (r2 / r) ** p,
        lambda s: r2 * (r2 / s) ** (1.0 / p),
        df=lambda r: -p * r2 * (r2 / r) ** p / r,
    )


def test_general_scheme_identity_with_non_kelvin_map():
    F = _power_inversion(1.3)
    G = geomap.kelvin_map(20.0)
    lay = media.build_general_scheme(_obj(), 1.0, 20.0, 0.0, F, G)
    assert lay.r1 == pytest.approx(20.0 ** (-1 / 1.3))
    rep = media.verify_key_identity(lay)
    assert rep.max_deviation <= 1e-10


def test_ellipticity_violation():
    bad = media.RadialProfile.constant(1.0, 2.0, 1e-4, 1.0)
    with pytest.raises(media.EllipticityError):
        media.build_scheme(bad, 1.0, 20.0, 0.0, ellipticity=1e-2)


def test_radii_validation():
    with pytest.raises(ValueError):
        media.build_scheme(_obj(), 1.0, 1.5, 0.0)


def test_control_layout_is_vacuum_outside_object():
    lay = media.control_layout(media.build_scheme(_obj(), 1.0, 20.0, 1e-2))
    assert lay.scalar(0.5) == pytest.approx((1.0, 1.0))
    assert lay.scalar(0.01) == pytest.approx((1.0, 1.0))
    assert lay.scalar(1.5) == pytest.approx((2.0, 3.0))


def test_layout_json_round_trip_fields():
    import json

    rec = json.loads(media.build_scheme(_obj(), 1.0, 20.0, 1e-2).to_json())
    assert rec["radii"] == pytest.approx([0.05, 1.0, 20.0])
    assert rec["delta"] == pytest.approx(1e-2)
