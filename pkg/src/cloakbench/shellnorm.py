"""Mode-space norms on spheres and three-sphere inequality checks.

The trace norm ``||v||_H(dB_r)`` is defined by its mode weights:
``sum n |c|^2 + n^{-1} |d|^2`` where c, d are the value and radial-derivative
coefficients of degree n.  In 2D the (a0, b0) pair of the zero mode is added
with weight one.
"""

from __future__ import annotations

import csv
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import specfun, vsh

DEFAULT_Q_GRID = tuple(np.arange(1.0, 8.01, 0.5))


@dataclass(frozen=True)
class ShellTrace:
    """Value (c) and radial-derivative (d) coefficients on the sphere |x| = radius."""

    radius: float
    degrees: np.ndarray
    orders: np.ndarray
    c: np.ndarray
    d: np.ndarray
    dim: int = 3
    a0: complex = 0j
    b0: complex = 0j

    def __post_init__(self):
        for name in ("degrees", "orders"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=int))
        for name in ("c", "d"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        if self.dim not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if not (len(self.degrees) == len(self.orders) == len(self.c) == len(self.d)):
            raise ValueError("coefficient arrays must have equal length")
        if np.any(self.degrees < 1):
            raise ValueError("degrees start at 1")

    def rows(self):
        return [(int(n), int(m), abs(c), abs(d)) for n, m, c, d in zip(self.degrees, self.orders, self.c, self.d)]


def bold_h_norm(trace: ShellTrace) -> float:
    n = trace.degrees.astype(float)
    total = float(np.sum(n * np.abs(trace.c) ** 2 + np.abs(trace.d) ** 2 / n))
    if trace.dim == 2:
        total += abs(trace.a0) ** 2 + abs(trace.b0) ** 2
    return float(np.sqrt(total))


def write_trace_csv(path, trace: ShellTrace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "m", "abs_c", "abs_d"])
        for row in trace.rows():
            w.writerow([row[0], row[1], f"{row[2]:.17g}", f"{row[3]:.17g}"])


# -- coefficient sets -------------------------------------------------------


@dataclass(frozen=True)
class HelmholtzCoefficients:
    """v = sum (a f_n(k|x|) + b g_n(k|x|)) Y_nm (3D: jhat, yhat; 2D: Jhat, Yhat and e^{+-in theta}).

    For d = 2 ``orders`` holds +1/-1 and (a0, b0) is the zero-mode pair.
    """

    degrees: np.ndarray
    orders: np.ndarray
    a: np.ndarray
    b: np.ndarray
    dim: int = 3
    a0: complex = 0j
    b0: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "degrees", np.asarray(self.degrees, dtype=int))
        object.__setattr__(self, "orders", np.asarray(self.orders, dtype=int))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=complex))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=complex))

    @classmethod
    def random(cls, rng, nmax: int, dim: int = 3, balance_radius: Optional[float] = None,
               active: Optional[int] = None):
        """Complex Gaussian coefficients.

        With ``balance_radius`` R the degree-n coefficients are scaled by R^{-n}
        (a) and R^{n} (b) so every mode has an O(1) trace on |x| = R.  With
        ``active`` only that many randomly chosen degrees are nonzero; broad
        spectra are dominated by the extreme degrees and give tiny ratios, so
        sparse draws probe the inequality harder.
        """
        if dim == 3:
            deg = np.concatenate([[n] * (2 * n + 1) for n in range(1, nmax + 1)])
            ords = np.concatenate([np.arange(-n, n + 1) for n in range(1, nmax + 1)])
        else:
            deg = np.repeat(np.arange(1, nmax + 1), 2)
            ords = np.tile([1, -1], nmax)
        size = len(deg)

        def cplx(s):
            return rng.normal(size=s) + 1j * rng.normal(size=s)

        a0, b0 = (complex(cplx(1)[0]), complex(cplx(1)[0])) if dim == 2 else (0j, 0j)
        a, b = cplx(size), cplx(size)
        if active is not None:
            keep = np.isin(deg, rng.choice(np.arange(1, nmax + 1), size=active, replace=False))
            a, b = a * keep, b * keep
            if dim == 2:
                a0 = b0 = 0j
        if balance_radius is not None:
            a = a * float(balance_radius) ** (-deg.astype(float))
            b = b * float(balance_radius) ** deg.astype(float)
        return cls(deg, ords, a, b, dim, a0, b0)

    @classmethod
    def single(cls, n: int, which: str = "a", dim: int = 3):
        one = np.array([1.0 + 0j])
        zero = np.array([0j])
        return cls(np.array([n]), np.array([0 if dim == 3 else 1]), one if which == "a" else zero,
                   zero if which == "a" else one, dim)

    def is_zero(self) -> bool:
        return not (np.any(self.a) or np.any(self.b) or self.a0 or self.b0)


@lru_cache(maxsize=4096)
def _radial_pairs(n, x, dim):
    """(f, f', g, g') of the normalised regular/singular radial functions at x."""
    if dim == 3:
        jh, djh, yh, dyh = specfun.spherical_hat_with_derivative(n, x)
    else:
        jh, djh, yh, dyh = specfun.cylindrical_hat_with_derivative(n, x)
    return jh, djh, yh, dyh


def trace_from_coefficients(coef: HelmholtzCoefficients, k: float, r: float) -> ShellTrace:
    c = np.empty(len(coef.degrees), dtype=complex)
    d = np.empty(len(coef.degrees), dtype=complex)
    for n in np.unique(coef.degrees):
        sel = coef.degrees == n
        f, df, g, dg = _radial_pairs(int(n), float(k * r), coef.dim)
        c[sel] = coef.a[sel] * f + coef.b[sel] * g
        d[sel] = k * (coef.a[sel] * df + coef.b[sel] * dg)
    return ShellTrace(r, coef.degrees, coef.orders, c, d, coef.dim, coef.a0, coef.b0)


@dataclass(frozen=True)
class ThreeSphereResult:
    radii: tuple
    alpha: float
    lhs: float
    rhs: float
    ratio: float

    def row(self):
        return (*self.radii, self.alpha, self.lhs, self.rhs, self.ratio)


def helmholtz_alpha(R1, R2, R3) -> float:
    return float(np.log(R3 / R2) / np.log(R3 / R1))


def _check_radii(R1, R2, R3):
    if not 0 < R1 < R2 < R3:
        raise ValueError("radii must satisfy 0 < R1 < R2 < R3")


def _three_sphere(coef, k, R1, R2, R3, alpha):
    _check_radii(R1, R2, R3)
    if coef.is_zero():
        return ThreeSphereResult((R1, R2, R3), alpha, 0.0, 0.0, 1.0)
    n1, n2, n3 = (bold_h_norm(trace_from_coefficients(coef, k, R)) for R in (R1, R2, R3))
    rhs = n1**alpha * n3 ** (1 - alpha)
    return ThreeSphereResult((R1, R2, R3), alpha, n2, rhs, n2 / rhs)


def three_sphere_check_3d(coef: HelmholtzCoefficients, k: float, R1: float, R2: float, R3: float):
    if coef.dim != 3:
        raise ValueError("expected 3D coefficients")
    _check_radii(R1, R2, R3)
    return _three_sphere(coef, k, R1, R2, R3, helmholtz_alpha(R1, R2, R3))


def three_sphere_check_2d(coef: HelmholtzCoefficients, k: float, R1: float, R2: float, R3: float):
    if coef.dim != 2:
        raise ValueError("expected 2D coefficients")
    _check_radii(R1, R2, R3)
    return _three_sphere(coef, k, R1, R2, R3, helmholtz_alpha(R1, R2, R3))


def monte_carlo_ratios(dim: int, k: float, radii, draws: int = 200, nmax: int = 20, seed: int = 0):
    """Three-sphere ratios for sparse random draws (1 to 3 active degrees) balanced on the middle sphere."""
    rng = np.random.default_rng(seed)
    check = three_sphere_check_3d if dim == 3 else three_sphere_check_2d
    out = []
    for _ in range(draws):
        coef = HelmholtzCoefficients.random(rng, nmax, dim, radii[1], active=int(rng.integers(1, 4)))
        out.append(check(coef, k, *radii).ratio)
    return np.array(out)


def write_report_csv(path, results: Sequence[ThreeSphereResult]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["R1", "R2", "R3", "alpha", "lhs", "rhs", "ratio"])
        for res in results:
            w.writerow([f"{x:.17g}" for x in res.row()])


# -- norm equivalences -------------------------------------------------------


def equivalence_norm(coef: HelmholtzCoefficients, r: float) -> float:
    """(sum n r^{2n} |a|^2 + n r^{-2n} |b|^2)^{1/2} (3D weights)."""
    n = coef.degrees.astype(float)
    return float(np.sqrt(np.sum(n * r ** (2 * n) * np.abs(coef.a) ** 2 + n * r ** (-2 * n) * np.abs(coef.b) ** 2)))


def equivalence_norm_2d(coef: HelmholtzCoefficients, r: float) -> float:
    """2D weights as printed: |a0|^2 + |b0|^2 + sum n r^{2n} |a|^2 + n^{-1} r^{-2n} |b|^2."""
    n = coef.degrees.astype(float)
    s = np.sum(n * r ** (2 * n) * np.abs(coef.a) ** 2 + r ** (-2 * n) * np.abs(coef.b) ** 2 / n)
    return float(np.sqrt(abs(coef.a0) ** 2 + abs(coef.b0) ** 2 + s))


# -- elliptic-system probe -----------------------------------------------------


def system_alpha(q: float, R1: float, R2: float, R3: float) -> float:
    return float((R2**-q - R3**-q) / (R1**-q - R3**-q))


def vector_trace_norm(field_fn, radius: float, nmax: int, coef_fn=None, rel_step: float = 1e-5) -> float:
    """||V||_H(dB_r) summed over the scalar components of a vector field.

    ``field_fn(points) -> array (..., K)`` gives K scalar components.  Each
    component is projected on Y_nm (n <= nmax) by quadrature; the co-normal
    derivative uses ``coef_fn(points) -> (..., K)`` scalar coefficients
    (default 1) times a central difference in r.  Degree 0 uses weight 1.
    """
    th, ph, w = vsh.sphere_quadrature(nmax + 2)
    tab = vsh.HarmonicTable(nmax, th, ph)
    rhat = tab.rhat
    h = rel_step * radius
    vals = field_fn(radius * rhat)
    dr = (field_fn((radius + h) * rhat) - field_fn((radius - h) * rhat)) / (2 * h)
    if coef_fn is not None:
        dr = dr * coef_fn(radius * rhat)
    total = 0.0
    for comp in range(vals.shape[-1]):
        acc = 0.0
        for n in range(0, nmax + 1):
            wt = float(max(n, 1))
            for m in range(-n, n + 1):
                y = np.conj(tab.Y(n, m)) * w
                c = np.sum(vals[:, comp] * y) * radius
                d = np.sum(dr[:, comp] * y) * radius
                acc += wt * abs(c) ** 2 + abs(d) ** 2 / wt
        total += np.sqrt(acc)
    return float(total)


@dataclass(frozen=True)
class ProbeResult:
    q_best: float
    c_best: float
    table: tuple = field(default=())


def system_three_sphere_probe(samples, radii, q_grid=DEFAULT_Q_GRID) -> ProbeResult:
    """Empirical constant C(q) = max over samples of N2 / (N1^alpha N3^(1-alpha)).

    ``samples`` is a sequence of (N1, N2, N3) trace norms at radii R1 < R2 < R3.
    Returns the q with the smallest C (first one on ties) and the full table.
    """
    R1, R2, R3 = radii
    _check_radii(R1, R2, R3)
    samples = [tuple(s) for s in samples]
    if len(samples) < 3:
        raise ValueError("need at least 3 field samples")
    table = []
    for q in q_grid:
        a = system_alpha(q, R1, R2, R3)
        worst = 0.0
        for n1, n2, n3 in samples:
            if n2 == 0 and (n1 == 0 or n3 == 0):
                ratio = 1.0
            else:
                ratio = n2 / (n1**a * n3 ** (1 - a))
            worst = max(worst, ratio)
        table.append((float(q), a, worst))
    best = min(table, key=lambda t: t[2])
    return ProbeResult(best[0], best[2], tuple(table))


# -- rate bookkeeping ----------------------------------------------------------


def rate_bookkeeping(q: float, r2: float, r3: float):
    """(alpha, beta, rho) with the printed formulas."""
    if q < 1:
        raise ValueError("q must be at least 1")
    if not r3 > 4 * r2:
        raise ValueError("need r3 > 4 r2")
    alpha = (2.0**-q - 4.0**-q) / (2.0**q - 4.0**-q)
    beta = np.log(r3 / (4 * r2)) / np.log(r3 / (2 * r2))
    rho = alpha / (1 - (1 - alpha) * beta)
    return float(alpha), float(beta), float(rho)
