"""Self-check suites behind ``cloakbench verify``.

Each suite returns a list of Check rows; a suite passes when every row does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geomap, media, shellnorm, specfun
from . import mie_solver as ms

WRONSKIAN_RADII = (0.01, 0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    threshold: float
    passed: bool

    def row(self):
        return (self.suite, self.name, "%.6g" % self.value, "%.6g" % self.threshold, "pass" if self.passed else "FAIL")


def _le(suite, name, value, threshold):
    value = float(value)
    return Check(suite, name, value, threshold, bool(value <= threshold))


def wronskian_table(nmax=60, radii=WRONSKIAN_RADII):
    """Rows (n, r, spherical_residual, cylindrical_residual)."""
    return [(n, r) + specfun.wronskian_residuals(n, r) for n in range(nmax + 1) for r in radii]


def suite_specfun(seed=0):
    table = wronskian_table()
    worst = max(max(row[2], row[3]) for row in table)
    jh, yh, _, _ = specfun.normalized_hat(20, 0.5)
    j1, _ = specfun.spherical_bessel(1, 1.0)
    return [
        _le("specfun", "wronskian_max_residual", worst, 1e-10),
        _le("specfun", "jhat20_ratio_dev", abs(jh / 0.5**20 - 1), 0.05),
        _le("specfun", "yhat20_ratio_dev", abs(yh * 0.5**21 - 1), 0.05),
        _le("specfun", "j1_closed_form", abs(j1 - (np.sin(1) - np.cos(1))), 1e-14),
    ]


def _random_tensors(rng, count):
    a = rng.normal(size=(count, 3, 3)) + 1j * rng.normal(size=(count, 3, 3))
    return a + np.swapaxes(a, -1, -2)


def pushforward_composition_error(r2=1.0, r3=20.0, samples=1000, seed=0):
    """max |(G o F)_* a - G_* F_* a| / |a| over random tensors at random points of the annulus."""
    rng = np.random.default_rng(seed)
    F, G = geomap.kelvin_map(r2), geomap.kelvin_map(r3)
    GF = geomap.compose(G, F)
    r1 = r2 * r2 / r3
    d = rng.normal(size=(samples, 3))
    x = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(r1, r2, size=(samples, 1))
    a = _random_tensors(rng, samples)
    lhs = geomap.push_matrix(GF, a, x)
    rhs = geomap.push_matrix(G, geomap.push_matrix(F, a, x), F.forward(x))
    scale = np.abs(lhs).max(axis=(1, 2))
    return float(np.max(np.abs(lhs - rhs).max(axis=(1, 2)) / scale))


def kelvin_composition_error(r2=1.0, r3=20.0, samples=1000, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-5, 5, size=(samples, 3))
    GF = geomap.compose(geomap.kelvin_map(r3), geomap.kelvin_map(r2))
    c = r3**2 / r2**2
    return float(np.max(np.abs(GF.forward(x) - c * x)) / c)


def suite_geomap(seed=0):
    layout = media.build_scheme(media.RadialProfile.constant(1.0, 2.0, 2.0, 3.0), 1.0, 20.0, 0.0)
    rep = media.verify_key_identity(layout, seed=seed)
    return [
        _le("geomap", "pushforward_composition", pushforward_composition_error(seed=seed), 1e-10),
        _le("geomap", "kelvin_composition", kelvin_composition_error(seed=seed), 1e-12),
        _le("geomap", "key_identity_delta0", rep.max_deviation, 1e-10),
    ]


def suite_media(seed=0):
    obj = media.RadialProfile.constant(1.0, 2.0, 2.0, 3.0)
    lay = media.build_scheme(obj, 1.0, 20.0, 0.0)
    r = 0.75
    eps, mu = lay.scalar(r)
    image = 1.0 / r
    expect = -np.array([2.0, 3.0]) / r**2 if 1.0 <= image <= 2.0 else -np.ones(2) / r**2
    core_eps, core_mu = lay.scalar(0.01)
    lossy = media.build_scheme(obj, 1.0, 20.0, 1e-2)
    return [
        _le("media", "middle_layer_value", max(abs(eps - expect[0]), abs(mu - expect[1])), 1e-12),
        _le("media", "core_value", max(abs(core_eps - 400), abs(core_mu - 400)), 1e-9),
        _le("media", "key_identity_delta0", media.verify_key_identity(lay, seed=seed).max_deviation, 1e-10),
        _le("media", "key_identity_lossy_dev", media.verify_key_identity(lossy, seed=seed).max_deviation, 0.1),
    ]


def vacuum_scattering_max(nmax=20, k=1.0):
    lay = media.vacuum_layout((0.05, 1.0, 20.0))
    worst = 0.0
    for n in range(1, nmax + 1):
        for pol in (ms.TE, ms.TM):
            worst = max(worst, abs(ms.solve_radial(lay, n, pol, k).s))
    return worst


def mie_max_error(nmax=20, k=1.0, radius=1.5, eps=2.5 + 0.1j, mu=1.0):
    lay = media.sphere_layout(radius, eps, mu)
    worst = 0.0
    for n in range(1, nmax + 1):
        for pol in (ms.TE, ms.TM):
            ref = ms.mie_coefficient(n, pol, k, radius, eps, mu)
            s = ms.solve_radial(lay, n, pol, k).s
            worst = max(worst, abs(s - ref) / max(abs(ref), 1e-300))
    return worst


def change_of_variables_order(k=1.0, points=(9, 17, 33)):
    """Observed order of the pushed Maxwell residual under a Kelvin map.

    A vacuum plane wave is pushed through the inversion in the unit sphere;
    the FD residual of the transformed system on a patch of the image space is
    fitted against the grid spacing.
    """
    t = geomap.kelvin_map(1.0)
    e0 = np.array([1.0, 0.0, 0.0])
    b0 = np.array([0.0, 1.0, 0.0])

    def fields(x):
        ph = np.exp(1j * k * x[..., 2])[..., None]
        return e0 * ph, b0 * ph

    def materials(x):
        return geomap.TensorPair.isotropic(1.0, 1.0)

    hs, res = [], []
    for n in points:
        patch = geomap.CartesianPatch(np.array([0.45, 0.3, 0.35]), 0.1, n)
        rep = geomap.change_of_variables_residual(t, fields, materials, k, patch)
        hs.append(rep.spacing)
        res.append(rep.residual)
    slope = np.polyfit(np.log(hs), np.log(res), 1)[0]
    return float(slope), hs, res


def suite_solver(seed=0):
    order, _, _ = change_of_variables_order()
    return [
        _le("solver-oracles", "vacuum_max_abs_s", vacuum_scattering_max(), 1e-9),
        _le("solver-oracles", "mie_max_rel_error", mie_max_error(), 1e-8),
        Check("solver-oracles", "change_of_variables_order", order, 0.9, order >= 0.9),
    ]


THREE_SPHERE_RADII = (2.0, 3.0, 4.5)
MONTE_CARLO_RADII = (0.5, 2.0, 10.0)


def single_mode_ratio(n=40, dim=3, k=1.0, radii=THREE_SPHERE_RADII):
    coef = shellnorm.HelmholtzCoefficients.single(n, "a", dim)
    check = shellnorm.three_sphere_check_3d if dim == 3 else shellnorm.three_sphere_check_2d
    return check(coef, k, *radii).ratio


def monte_carlo_trend(dim, draws=200, seed=0, k=1.0, radii=MONTE_CARLO_RADII):
    """(max ratio, max over first half, max over second half) for one Monte-Carlo batch."""
    results = shellnorm.monte_carlo_ratios(dim, k, radii, draws=draws, seed=seed)
    ratios = np.asarray(results, dtype=float)
    half = len(ratios) // 2
    return float(ratios.max()), float(ratios[:half].max()), float(ratios[half:].max())


def alpha_identity_error(seed=0, samples=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        R1 = rng.uniform(0.1, 1.0)
        R2 = R1 * rng.uniform(1.1, 5.0)
        R3 = R2 * rng.uniform(1.1, 5.0)
        a = shellnorm.helmholtz_alpha(R1, R2, R3)
        worst = max(worst, abs(R1**a * R3 ** (1 - a) - R2) / R2)
    return worst


def suite_threesphere(seed=0):
    out = []
    for dim in (3, 2):
        dev = abs(single_mode_ratio(40, dim) - 1)
        out.append(_le("threesphere", f"single_mode_n40_d{dim}_dev", dev, 0.1))
        top, first, second = monte_carlo_trend(dim, seed=seed)
        # bounded and no growth between the first and second half of the draws
        ok = np.isfinite(top) and second <= 2 * first
        out.append(Check("threesphere", f"monte_carlo_d{dim}_max", top, 2 * first, bool(ok)))
    out.append(_le("threesphere", "alpha_identity", alpha_identity_error(seed), 1e-12))
    return out


SUITES = {
    "specfun": suite_specfun,
    "geomap": suite_geomap,
    "media": suite_media,
    "solver-oracles": suite_solver,
    "threesphere": suite_threesphere,
}


def run_suite(name, seed=0):
    if name == "all":
        return [c for key in SUITES for c in SUITES[key](seed)]
    return SUITES[name](seed)
