"""Spherical and cylindrical Bessel-family functions.

Spherical functions are computed here from their recurrences:

* ``j_n`` by Miller's downward recurrence normalised on ``j_0`` / ``j_1``,
  or by the ascending series when ``|z| < 0.5``;
* ``y_n`` and ``h_n = j_n + i y_n`` by upward recurrence.

The hat-normalised families are

    jhat_n = 1*3*...*(2n+1) j_n,      yhat_n = -y_n / (1*3*...*(2n-1)),
    Jhat_n = 2^n n! J_n,              Yhat_n = pi i Y_n / (2^n (n-1)!),

so that ``jhat_n(r) ~ r^n`` and ``yhat_n(r) ~ r^(-n-1)`` for large ``n``.
All routines accept complex arguments and broadcast over arrays.
"""

from __future__ import annotations

import numpy as np
from scipy import special as sp

SERIES_RADIUS = 0.5
_RESCALE = 1e200


class BesselDomainError(ValueError):
    """Argument outside the domain of a Bessel-family function."""


def _as_complex(z):
    return np.asarray(z, dtype=complex)


def _flat(z):
    z = _as_complex(z)
    return z.reshape(-1), z.shape


def _unflat(table, shape):
    return table.reshape((table.shape[0],) + shape)


def log_double_factorial(m: int) -> float:
    """log(m!!) for odd m >= -1 (with (-1)!! = 1)."""
    if m <= 0:
        return 0.0
    k = (m + 1) // 2
    # (2k-1)!! = (2k)! / (2^k k!)
    return float(sp.gammaln(2 * k + 1) - k * np.log(2.0) - sp.gammaln(k + 1))


def _check_nonzero(z, what):
    if np.any(z == 0):
        raise BesselDomainError(f"{what} is singular at z = 0")


def _series_sums(nmax: int, z: np.ndarray) -> np.ndarray:
    """Ascending-series sums S_n(z) with jhat_n(z) = z^n S_n(z), n = 0..nmax."""
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    w = -0.5 * z * z
    for n in range(nmax + 1):
        term = np.ones_like(z)
        total = np.ones_like(z)
        for k in range(1, 40):
            term = term * w / (k * (2 * n + 2 * k + 1))
            total = total + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[n] = total
    return out


def _jhat_series(nmax: int, z: np.ndarray) -> np.ndarray:
    """jhat_n(z) for n = 0..nmax from the ascending series (small |z|)."""
    out = _series_sums(nmax, z)
    zn = np.ones_like(z)
    for n in range(nmax + 1):
        out[n] *= zn
        zn = zn * z
    return out


def _jn_series(nmax: int, z: np.ndarray) -> np.ndarray:
    """j_n(z) from the ascending series; z^n / (2n+1)!! is accumulated factor by factor."""
    out = _series_sums(nmax, z)
    pref = np.ones_like(z)
    for n in range(nmax + 1):
        pref = pref / (2 * n + 1) if n == 0 else pref * z / (2 * n + 1)
        out[n] *= pref
    return out


def _miller_start(nmax: int, zabs: float) -> int:
    top = max(nmax, int(np.ceil(zabs)))
    return top + 30 + int(np.sqrt(40.0 * (top + 1)))


def _jn_miller(nmax: int, z: np.ndarray) -> np.ndarray:
    """j_n(z) for n = 0..nmax by normalised downward recurrence."""
    start = _miller_start(nmax, float(np.max(np.abs(z))) if z.size else 0.0)
    out = np.zeros((nmax + 1,) + z.shape, dtype=complex)
    f_next = np.zeros_like(z)
    f_cur = np.full_like(z, 1e-300)
    for n in range(start, 0, -1):
        f_prev = (2 * n + 1) / z * f_cur - f_next
        f_next, f_cur = f_cur, f_prev
        if n - 1 <= nmax:
            out[n - 1] = f_cur
        if n <= nmax:
            out[n] = f_next
        big = np.abs(f_cur) > _RESCALE
        if np.any(big):
            f_cur = np.where(big, f_cur / _RESCALE, f_cur)
            f_next = np.where(big, f_next / _RESCALE, f_next)
            out[:, big] /= _RESCALE
    j0 = np.sin(z) / z
    j1 = np.sin(z) / z**2 - np.cos(z) / z
    use0 = np.abs(j0) >= np.abs(j1)
    ref_exact = np.where(use0, j0, j1)
    ref_comp = np.where(use0, out[0], out[1] if nmax >= 1 else f_next)
    return out * (ref_exact / ref_comp)


def _jn_all(nmax: int, z: np.ndarray) -> np.ndarray:
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    small = np.abs(z) < SERIES_RADIUS
    if np.any(small):
        out[:, small] = _jn_series(nmax, z[small])
    if np.any(~small):
        out[:, ~small] = _jn_miller(nmax, z[~small])
    return out


def _upward(nmax: int, z: np.ndarray, f0, f1) -> np.ndarray:
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    out[0] = f0
    if nmax >= 1:
        out[1] = f1
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nmax):
            nxt = (2 * n + 1) / z * out[n] - out[n - 1]
            # once a value has overflowed, keep the infinity instead of inf - inf
            out[n + 1] = np.where(np.isinf(out[n]), out[n], nxt)
    return out


def _yn_all(nmax: int, z: np.ndarray) -> np.ndarray:
    y0 = -np.cos(z) / z
    y1 = -np.cos(z) / z**2 - np.sin(z) / z
    return _upward(nmax, z, y0, y1)


def _hn_all(nmax: int, z: np.ndarray) -> np.ndarray:
    e = np.exp(1j * z)
    h0 = -1j * e / z
    h1 = -e * (z + 1j) / z**2
    return _upward(nmax, z, h0, h1)


def _with_derivative(vals: np.ndarray, z: np.ndarray, nmax: int):
    """Split order-(nmax+1) tables into (value, derivative) for orders 0..nmax."""
    d = np.empty((nmax + 1,) + z.shape, dtype=complex)
    d[0] = -vals[1]
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nmax + 1):
            d[n] = vals[n - 1] - (n + 1) / z * vals[n]
            # past overflow the -(n+1)/z term dominates
            d[n] = np.where(np.isinf(vals[n]), -vals[n], d[n])
    return vals[: nmax + 1], d


def spherical_jn_table(nmax: int, z):
    """Values and derivatives of j_0..j_nmax at z; arrays of shape (nmax+1, *z.shape)."""
    z, shape = _flat(z)
    zero = z == 0
    zs = np.where(zero, 1.0, z)
    v, d = _with_derivative(_jn_all(nmax + 1, zs), zs, nmax)
    if np.any(zero):
        v[:, zero] = 0.0
        v[0, zero] = 1.0
        d[:, zero] = 0.0
        if nmax >= 1:
            d[1, zero] = 1.0 / 3.0
    return _unflat(v, shape), _unflat(d, shape)


def spherical_yn_table(nmax: int, z):
    z, shape = _flat(z)
    _check_nonzero(z, "y_n")
    v, d = _with_derivative(_yn_all(nmax + 1, z), z, nmax)
    return _unflat(v, shape), _unflat(d, shape)


def spherical_hn_table(nmax: int, z):
    """Outgoing spherical Hankel functions h_n = j_n + i y_n and derivatives."""
    z, shape = _flat(z)
    _check_nonzero(z, "h_n")
    v, d = _with_derivative(_hn_all(nmax + 1, z), z, nmax)
    return _unflat(v, shape), _unflat(d, shape)


def _check_order(n):
    if n < 0 or int(n) != n:
        raise BesselDomainError(f"order must be a non-negative integer, got {n}")


def spherical_bessel(n: int, z):
    """Return ``(j_n(z), j_n'(z))``."""
    _check_order(n)
    v, d = spherical_jn_table(n, z)
    return v[n], d[n]


def spherical_neumann(n: int, z):
    """Return ``(y_n(z), y_n'(z))``; rejects z = 0."""
    _check_order(n)
    v, d = spherical_yn_table(n, z)
    return v[n], d[n]


def spherical_hankel(n: int, z):
    """Return ``(h_n(z), h_n'(z))`` for the outgoing Hankel function."""
    _check_order(n)
    v, d = spherical_hn_table(n, z)
    return v[n], d[n]


def riccati_regular(n: int, z):
    """``z j_n(z)`` and its derivative."""
    j, dj = spherical_bessel(n, z)
    z = _as_complex(z)
    return z * j, j + z * dj


def riccati_outgoing(n: int, z):
    """``z h_n(z)`` and its derivative."""
    h, dh = spherical_hankel(n, z)
    z = _as_complex(z)
    return z * h, h + z * dh


# --- hat normalisations -------------------------------------------------------


def _jhat_table(nmax: int, z: np.ndarray):
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    small = np.abs(z) < SERIES_RADIUS
    if np.any(small):
        out[:, small] = _jhat_series(nmax, z[small])
    if np.any(~small):
        j = _jn_miller(nmax, z[~small])
        for n in range(nmax + 1):
            out[n, ~small] = j[n] * np.exp(log_double_factorial(2 * n + 1))
    return out


def _yhat_table(nmax: int, z: np.ndarray):
    # scaled upward recurrence: yhat_{n+1} = yhat_n / z - yhat_{n-1} / ((2n-1)(2n+1))
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    out[0] = np.cos(z) / z
    if nmax >= 1:
        out[1] = np.cos(z) / z**2 + np.sin(z) / z
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nmax):
            out[n + 1] = out[n] / z - out[n - 1] / ((2 * n - 1) * (2 * n + 1))
    return out


def normalized_hat(n: int, z):
    """Return ``(jhat_n, yhat_n, Jhat_n, Yhat_n)`` at z (n >= 1).

    Prefactors are applied in scaled recurrences / log space, so moderate
    arguments stay finite at orders where the raw j_n or y_n would under- or
    overflow.
    """
    if n < 1:
        raise BesselDomainError("hat-normalised functions are defined for n >= 1")
    jh, _, yh, _ = spherical_hat_with_derivative(n, z)
    Jh, _, Yh, _ = cylindrical_hat_with_derivative(n, z)
    return jh, yh, Jh, Yh


def spherical_hat_with_derivative(n: int, z):
    """``(jhat_n, jhat_n', yhat_n, yhat_n')`` for n >= 1."""
    if n < 1:
        raise BesselDomainError("hat-normalised functions are defined for n >= 1")
    z, shape = _flat(z)
    _check_nonzero(z, "yhat_n")
    jt = _jhat_table(n, z)
    yt = _yhat_table(n, z)
    djh = (2 * n + 1) * jt[n - 1] - (n + 1) / z * jt[n]
    dyh = yt[n - 1] / (2 * n - 1) - (n + 1) / z * yt[n]
    return tuple(a.reshape(shape) for a in (jt[n], djh, yt[n], dyh))


def _log_jhat_pref(n):
    return n * np.log(2.0) + sp.gammaln(n + 1)


def _log_yhat_pref(n):
    return -n * np.log(2.0) - sp.gammaln(n)


def cylindrical_hat_with_derivative(n: int, z):
    """``(Jhat_n, Jhat_n', Yhat_n, Yhat_n')`` for n >= 1.

    J_n and Y_n come from ``scipy.special``; the prefactors are combined in
    log space.
    """
    if n < 1:
        raise BesselDomainError("Yhat_n is defined for n >= 1")
    z = _as_complex(z)
    _check_nonzero(z, "Yhat_n")
    J, dJ, Y, dY = cylindrical_bessel(n, z)
    pj = _log_jhat_pref(n)
    py = _log_yhat_pref(n)
    with np.errstate(over="ignore", invalid="ignore"):
        Jh = _scaled(J, pj)
        dJh = _scaled(dJ, pj)
        Yh = 1j * np.pi * _scaled(Y, py)
        dYh = 1j * np.pi * _scaled(dY, py)
    return Jh, dJh, Yh, dYh


def _scaled(x, logp):
    x = np.asarray(x, dtype=complex)
    mag = np.abs(x)
    out = np.zeros_like(x)
    nz = mag > 0
    out[nz] = x[nz] / mag[nz] * np.exp(np.log(mag[nz]) + logp)
    return out


def cylindrical_bessel(n: int, z):
    """``(J_n, J_n', Y_n, Y_n')`` at z."""
    _check_order(n)
    z = _as_complex(z)
    _check_nonzero(z, "Y_n")
    real = np.all(z.imag == 0)
    arg = z.real if real else z
    J = sp.jv(n, arg)
    Y = sp.yv(n, arg)
    dJ = sp.jvp(n, arg)
    dY = sp.yvp(n, arg)
    return (np.asarray(J, dtype=complex), np.asarray(dJ, dtype=complex),
            np.asarray(Y, dtype=complex), np.asarray(dY, dtype=complex))


def wronskian_residuals(n: int, r: float):
    """|computed - exact| for both Wronskian identities at (n, r).

    spherical:   j_n y_n' - j_n' y_n = 1 / r^2
    cylindrical: J_n Y_n' - J_n' Y_n = 2 / (pi r)
    """
    if r <= 0:
        raise BesselDomainError("Wronskian residuals need r > 0")
    _check_order(n)
    j, dj = spherical_bessel(n, r)
    y, dy = spherical_neumann(n, r)
    ws = j * dy - dj * y
    J, dJ, Y, dY = cylindrical_bessel(n, r)
    wc = J * dY - dJ * Y
    return float(abs(ws - 1.0 / r**2)), float(abs(wc - 2.0 / (np.pi * r)))


def spherical_wronskian(n: int, r: float) -> complex:
    j, dj = spherical_bessel(n, r)
    y, dy = spherical_neumann(n, r)
    return complex(j * dy - dj * y)


def cylindrical_wronskian(n: int, r: float) -> complex:
    J, dJ, Y, dY = cylindrical_bessel(n, r)
    return complex(J * dY - dJ * Y)
