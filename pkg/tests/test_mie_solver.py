import numpy as np
import pytest

from cloakbench import geomap, media
from cloakbench import mie_solver as ms


def _dipole_field(k, x, x0, p):
    """Closed-form field of j = p delta(x - x0) for curl E = ik H, curl H = -ik E + j.

    curl curl E - k^2 E = ik j, so E = ik (I + grad grad / k^2)(g p) with the
    outgoing Green's function g = exp(ikd) / (4 pi d), and H = grad g x p.
    """
    R = x - x0
    d = np.linalg.norm(R, axis=-1)[..., None]
    Rh = R / d
    g = np.exp(1j * k * d) / (4 * np.pi * d)
    pr = np.sum(Rh * p, axis=-1)[..., None]
    a = 1 + 1j / (k * d) - 1 / (k * d) ** 2
    b = 1 + 3j / (k * d) - 3 / (k * d) ** 2
    E = 1j * k * g * (a * p - b * pr * Rh)
    H = 1j * k * g * (1 + 1j / (k * d)) * np.cross(Rh, p)
    return E, H


def test_vacuum_layout_scatters_nothing():
    lay = media.vacuum_layout((0.05, 1.0, 20.0))
    for n in (1, 2, 7, 15, 20):
        for pol in (ms.TE, ms.TM):
            assert abs(ms.solve_radial(lay, n, pol, 1.0).s) <= 1e-9


@pytest.mark.parametrize("eps", [2.5, 2.5 + 0.1j, 6.0 + 1.0j])
def test_single_sphere_matches_closed_form(eps):
    lay = media.sphere_layout(1.5, eps, 1.0)
    for n in range(1, 21):
        for pol in (ms.TE, ms.TM):
            ref = ms.mie_coefficient(n, pol, 1.0, 1.5, eps, 1.0)
            s = ms.solve_radial(lay, n, pol, 1.0).s
            assert abs(s - ref) <= 1e-8 * abs(ref)


def test_magnetic_sphere_matches_closed_form():
    lay = media.sphere_layout(0.8, 3.0, 2.0)
    for n in range(1, 8):
        for pol in (ms.TE, ms.TM):
            ref = ms.mie_coefficient(n, pol, 2.0, 0.8, 3.0, 2.0)
            assert abs(ms.solve_radial(lay, n, pol, 2.0).s - ref) <= 1e-8 * abs(ref)


def test_lossless_scattering_is_unitary():
    lay = media.sphere_layout(1.5, 4.0, 1.0)
    for n in (1, 3, 6):
        for pol in (ms.TE, ms.TM):
            s = ms.solve_radial(lay, n, pol, 1.0).s
            assert abs(abs(1 + 2 * s) - 1) <= 1e-9


def test_plane_wave_expansion_reproduces_exponential(rng):
    k = 1.3
    inc = ms.IncidentSpec.plane_wave(k, (0.3, -0.2, 1.0), np.cross((0.3, -0.2, 1.0), (1, 0, 0)), radius=3.0)
    sols = ms.free_space_solutions(inc)
    pts = rng.uniform(-1.7, 1.7, size=(20, 3))
    E, H = ms.assemble_field(sols, pts)
    khat = np.array([0.3, -0.2, 1.0]) / np.linalg.norm([0.3, -0.2, 1.0])
    e0 = np.cross((0.3, -0.2, 1.0), (1, 0, 0))
    ph = np.exp(1j * k * pts @ khat)[:, None]
    assert np.max(np.abs(E - e0 * ph)) <= 1e-9 * np.linalg.norm(e0)
    assert np.max(np.abs(H - np.cross(khat, e0) * ph)) <= 1e-9 * np.linalg.norm(e0)


def test_plane_wave_rejects_longitudinal_polarization():
    with pytest.raises(ValueError):
        ms.IncidentSpec.plane_wave(1.0, (0, 0, 1), (0, 0, 1), nmax=5)


def test_dipole_expansion_matches_closed_form(rng):
    k = 1.0
    x0 = np.array([0.5, -1.0, 6.0])
    p = np.array([1.0, 0.5j, -0.3])
    inc = ms.IncidentSpec.point_dipole(k, x0, p, nmax=40)
    sols = ms.free_space_solutions(inc)
    d = rng.normal(size=(10, 3))
    pts = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(0.5, 2.5, size=(10, 1))
    E, H = ms.assemble_field(sols, pts)
    Er, Hr = _dipole_field(k, pts, x0, p)
    assert np.max(np.abs(E - Er)) <= 1e-9 * np.max(np.abs(Er))
    assert np.max(np.abs(H - Hr)) <= 1e-9 * np.max(np.abs(Hr))
    assert inc.strength == pytest.approx(np.linalg.norm(p) * k**2)


def test_solution_fields_satisfy_interface_continuity():
    lay = media.sphere_layout(1.0, 3.0 + 0.2j, 1.5)
    rf = ms.solve_radial(lay, 3, ms.TM, 1.0)
    u_in, v_in = rf.evaluate(np.array([1.0 - 1e-9]))
    u_out, v_out = rf.evaluate(np.array([1.0 + 1e-9]))
    assert abs(u_in - u_out) <= 1e-6 * abs(u_out)
    assert abs(v_in - v_out) <= 1e-6 * abs(v_out)


def test_outgoing_scattered_field_decays_like_inverse_r():
    lay = media.sphere_layout(1.0, 4.0, 1.0)
    inc = ms.IncidentSpec.plane_wave(1.0, nmax=6)
    sols = ms.solve_all(lay, inc)
    r1 = ms.outgoing_residual(sols, 200.0)
    r2 = ms.outgoing_residual(sols, 400.0)
    assert r2 < r1


def test_zero_loss_negative_layer_rejected():
    obj = media.RadialProfile.constant(1.0, 2.0, 1.0, 1.0)
    lay = media.build_scheme(obj, 1.0, 20.0, 0.0)
    with pytest.raises(ValueError):
        ms.solve_radial(lay, 1, ms.TE, 1.0)


def test_cloak_scatters_less_as_loss_decreases():
    obj = media.RadialProfile.constant(1.0, 2.0, 1.0, 1.0)
    s = [abs(ms.solve_radial(media.build_scheme(obj, 1.0, 20.0, d), 2, ms.TE, 1.0).s) for d in (1e-1, 1e-2, 1e-3)]
    assert s[0] > s[1] > s[2]


def test_free_space_span_residual():
    assert ms.free_space_span_residual(3, ms.TE, 1.0, 0.5, 2.0) <= 1e-8
    assert ms.free_space_span_residual(3, ms.TM, 1.0, 0.5, 2.0) <= 1e-8


def test_region_norm_of_plane_wave_matches_volume():
    # |E|^2 = |H|^2 = 1 pointwise, so the L^2 pair norm over a shell is 2 sqrt(volume)
    inc = ms.IncidentSpec.plane_wave(1.0, radius=4.0)
    sols = ms.free_space_solutions(inc)
    vol = 4 / 3 * np.pi * (3.0**3 - 1.0**3)
    assert ms.l2_pair_norm(ms.region_norms(sols, 1.0, 3.0)) == pytest.approx(2 * np.sqrt(vol), rel=1e-8)


def test_reflection_matches_grid_push_forward():
    lay = media.sphere_layout(1.0, 2.0 + 0.1j, 1.0)
    inc = ms.IncidentSpec.plane_wave(1.0, nmax=8)
    sols = ms.solve_all(lay, inc)
    F = geomap.kelvin_map(1.0)
    refl = ms.reflect_solution(sols, F)
    x = np.array([[0.4, 0.3, 0.5], [-0.2, 0.6, 0.1]])
    E_ref, _ = ms.assemble_field(refl, F.forward(x))
    E, _ = ms.assemble_field(sols, x)
    pushed = geomap.push_field(F, E, x)
    assert np.max(np.abs(E_ref - pushed)) <= 1e-9 * np.max(np.abs(pushed))


def test_data_functional_validation():
    inc = ms.IncidentSpec.plane_wave(1.0, nmax=3)
    sols = ms.free_space_solutions(inc)
    with pytest.raises(ValueError):
        ms.data_functional(sols, inc, 0.0, 40.0, r3=20.0)
    with pytest.raises(ValueError):
        ms.data_functional(sols, inc, 0.1, 10.0, r3=20.0)


def test_mode_record_is_json_ready():
    import json

    inc = ms.IncidentSpec.plane_wave(1.0, nmax=2)
    sol = ms.solve_all(media.sphere_layout(1.0, 2.0), inc)[0]
    rec = json.loads(sol.to_json(np.linspace(0.1, 3, 5)))
    assert rec["mode"]["n"] == 1 and len(rec["u"]) == 5


def test_assemble_rejects_origin():
    inc = ms.IncidentSpec.plane_wave(1.0, nmax=2)
    with pytest.raises(ValueError):
        ms.assemble_field(ms.free_space_solutions(inc), np.zeros((1, 3)))
