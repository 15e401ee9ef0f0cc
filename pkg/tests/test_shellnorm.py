import numpy as np
import pytest

from cloakbench import shellnorm

RADII = (2.0, 3.0, 4.5)


def test_alpha_interpolates_radii():
    rng = np.random.default_rng(5)
    for _ in range(50):
        R1 = rng.uniform(0.1, 1)
        R2 = R1 * rng.uniform(1.2, 4)
        R3 = R2 * rng.uniform(1.2, 4)
        a = shellnorm.helmholtz_alpha(R1, R2, R3)
        assert 0 < a < 1
        assert R1**a * R3 ** (1 - a) == pytest.approx(R2, rel=1e-12)


def test_bold_norm_of_known_trace():
    tr = shellnorm.ShellTrace(1.0, [2, 3], [0, 1], [1.0, 2j], [4.0, 0.0])
    assert shellnorm.bold_h_norm(tr) == pytest.approx(np.sqrt(2 * 1 + 3 * 4 + 16 / 2))


def test_trace_rejects_degree_zero():
    with pytest.raises(ValueError):
        shellnorm.ShellTrace(1.0, [0], [0], [1.0], [1.0])


@pytest.mark.parametrize("dim", [2, 3])
def test_single_mode_near_equality(dim):
    check = shellnorm.three_sphere_check_3d if dim == 3 else shellnorm.three_sphere_check_2d
    prev = None
    for n in (5, 10, 20, 40):
        res = check(shellnorm.HelmholtzCoefficients.single(n, "a", dim), 1.0, *RADII)
        dev = abs(res.ratio - 1)
        if prev is not None:
            assert dev <= prev + 1e-12
        prev = dev
    assert prev <= 0.1


def test_singular_single_mode_also_near_equality():
    res = shellnorm.three_sphere_check_3d(shellnorm.HelmholtzCoefficients.single(40, "b"), 1.0, *RADII)
    assert abs(res.ratio - 1) <= 0.1


def test_zero_field_ratio_is_one():
    coef = shellnorm.HelmholtzCoefficients.single(3)
    zero = shellnorm.HelmholtzCoefficients(coef.degrees, coef.orders, [0j], [0j])
    assert shellnorm.three_sphere_check_3d(zero, 1.0, *RADII).ratio == 1.0


def test_bad_radii_rejected():
    with pytest.raises(ValueError):
        shellnorm.three_sphere_check_3d(shellnorm.HelmholtzCoefficients.single(2), 1.0, 3.0, 2.0, 4.0)


@pytest.mark.parametrize("dim", [2, 3])
def test_monte_carlo_bounded_without_trend(dim):
    r = shellnorm.monte_carlo_ratios(dim, 1.0, (0.5, 2.0, 10.0), draws=200, seed=3)
    assert np.all(np.isfinite(r)) and np.all(r > 0)
    assert r[100:].max() <= 2 * r[:100].max()


def test_monte_carlo_is_reproducible():
    a = shellnorm.monte_carlo_ratios(3, 1.0, (0.5, 2.0, 10.0), draws=20, seed=9)
    b = shellnorm.monte_carlo_ratios(3, 1.0, (0.5, 2.0, 10.0), draws=20, seed=9)
    assert np.array_equal(a, b)


def test_equivalence_norm_3d_is_bounded():
    for n in (1, 5, 20, 40):
        for which in ("a", "b"):
            coef = shellnorm.HelmholtzCoefficients.single(n, which)
            for r in (0.5, 1.0, 4.0):
                full = shellnorm.bold_h_norm(shellnorm.trace_from_coefficients(coef, 1.0, r))
                ratio = full / shellnorm.equivalence_norm(coef, r)
                assert 0.1 < ratio < 10


def test_equivalence_norm_2d_printed_weights_grow():
    # with the n^{-1} weight on the singular part the ratio grows with n
    r = 1.0
    ratios = []
    for n in (5, 20, 40):
        coef = shellnorm.HelmholtzCoefficients.single(n, "b", 2)
        full = shellnorm.bold_h_norm(shellnorm.trace_from_coefficients(coef, 1.0, r))
        ratios.append(full / shellnorm.equivalence_norm_2d(coef, r))
    assert ratios[0] < ratios[1] < ratios[2]


def test_system_alpha_limits():
    R = (1.0, 2.0, 4.0)
    assert shellnorm.system_alpha(1.0, *R) == pytest.approx((0.5 - 0.25) / (1 - 0.25))
    assert 0 < shellnorm.system_alpha(6.0, *R) < shellnorm.system_alpha(1.0, *R)


def test_probe_table_covers_grid():
    R = (1.0, 2.0, 4.0)
    q = 3.0
    samples = [(R[0] ** -q * s, R[1] ** -q * s, R[2] ** -q * s) for s in (1.0, 2.0, 5.0)]
    probe = shellnorm.system_three_sphere_probe(samples, R, q_grid=(1.0, 2.0, 3.0, 4.0))
    assert len(probe.table) == 4
    assert all(np.isfinite(row[2]) for row in probe.table)
    assert probe.c_best == min(row[2] for row in probe.table)


def test_probe_needs_three_samples():
    with pytest.raises(ValueError):
        shellnorm.system_three_sphere_probe([(1, 1, 1)], (1.0, 2.0, 3.0))


def test_vector_trace_norm_of_constant_field():
    # a constant scalar 1 has c_00 = radius * sqrt(4 pi) and no derivative
    val = shellnorm.vector_trace_norm(lambda p: np.ones(p.shape[:-1] + (1,)), 2.0, 4)
    assert val == pytest.approx(2.0 * np.sqrt(4 * np.pi), rel=1e-10)


def test_rate_bookkeeping_printed_values():
    a, b, rho = shellnorm.rate_bookkeeping(1.0, 1.0, 20.0)
    assert a == pytest.approx(1 / 7)
    assert b == pytest.approx(np.log(5) / np.log(10))
    assert rho == pytest.approx(a / (1 - (1 - a) * b))
    with pytest.raises(ValueError):
        shellnorm.rate_bookkeeping(0.5, 1.0, 20.0)


def test_trace_csv(tmp_path):
    tr = shellnorm.trace_from_coefficients(shellnorm.HelmholtzCoefficients.single(3), 1.0, 2.0)
    path = tmp_path / "t.csv"
    shellnorm.write_trace_csv(path, tr)
    assert path.read_text().count("\n") >= 2
