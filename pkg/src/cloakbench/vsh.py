"""Orthonormal scalar and vector spherical harmonics.

Conventions (fixed once, used everywhere in the package):

* ``Y_nm`` is orthonormal on the unit sphere with the Condon-Shortley phase,
  ``Y_{n,-m} = (-1)^m conj(Y_nm)``.
* ``Psi_nm = grad_S Y_nm / sqrt(n(n+1))`` and ``Phi_nm = rhat x Psi_nm`` are
  the orthonormal tangential harmonics.
* TE modes carry ``E = (u/r) Phi``; TM modes carry ``H = (v/r) Phi``.
"""

from __future__ import annotations

import numpy as np


def legendre_tables(nmax: int, theta):
    """Normalised associated Legendre data for 0 <= m <= n <= nmax.

    Returns ``(P, U, T)`` with shape ``(nmax+1, nmax+1, *theta.shape)`` where,
    at index ``[n, m]``, ``P`` is the normalised ``P_n^m(cos theta)`` (so that
    ``P e^{im phi}`` is ``Y_nm``), ``U = P / sin(theta)`` (regular for
    ``m >= 1``, zero for ``m = 0``), and ``T = dP/dtheta``.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    s = np.sin(theta)
    shape = (nmax + 1, nmax + 1) + theta.shape
    P = np.zeros(shape)
    U = np.zeros(shape)
    T = np.zeros(shape)
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, nmax + 1):
        f = -np.sqrt((2 * m + 1) / (2.0 * m))
        U[m, m] = f * P[m - 1, m - 1]
        P[m, m] = U[m, m] * s
    for m in range(0, nmax):
        P[m + 1, m] = np.sqrt(2 * m + 3) * x * P[m, m]
        U[m + 1, m] = np.sqrt(2 * m + 3) * x * U[m, m]
    for m in range(0, nmax + 1):
        for n in range(m + 2, nmax + 1):
            a = np.sqrt((4.0 * n * n - 1) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1) ** 2 - 1))
            P[n, m] = a * (x * P[n - 1, m] - b * P[n - 2, m])
            U[n, m] = a * (x * U[n - 1, m] - b * U[n - 2, m])
    U[:, 0] = 0.0
    for n in range(1, nmax + 1):
        T[n, 0] = np.sqrt(n * (n + 1.0)) * P[n, 1]
        for m in range(1, n + 1):
            c = np.sqrt((2 * n + 1.0) * (n * n - m * m) / (2 * n - 1.0))
            T[n, m] = n * x * U[n, m] - c * U[n - 1, m]
    return P, U, T


def spherical_angles(points):
    """(r, theta, phi) for an array of Cartesian points of shape (..., 3)."""
    p = np.asarray(points, dtype=float)
    r = np.linalg.norm(p, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    theta = np.arccos(np.clip(p[..., 2] / safe, -1.0, 1.0))
    phi = np.arctan2(p[..., 1], p[..., 0])
    return r, theta, phi


def local_frame(theta, phi):
    """Unit vectors (rhat, thetahat, phihat), each of shape (..., 3)."""
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    rhat = np.stack([st * cp, st * sp, ct], axis=-1)
    that = np.stack([ct * cp, ct * sp, -st], axis=-1)
    phat = np.stack([-sp, cp, np.zeros_like(phi)], axis=-1)
    return rhat, that, phat


class HarmonicTable:
    """Scalar and vector harmonics for all (n, m), n <= nmax, at fixed directions."""

    def __init__(self, nmax: int, theta, phi):
        self.nmax = nmax
        self.theta = np.asarray(theta, dtype=float)
        self.phi = np.asarray(phi, dtype=float)
        self.P, self.U, self.T = legendre_tables(nmax, self.theta)
        self.rhat, self.that, self.phat = local_frame(self.theta, self.phi)

    def _parts(self, n, m):
        am = abs(m)
        sign = (-1.0) ** am if m < 0 else 1.0
        e = np.exp(1j * m * self.phi)
        return sign * self.P[n, am] * e, sign * self.U[n, am] * e, sign * self.T[n, am] * e

    def Y(self, n, m):
        return self._parts(n, m)[0]

    def Psi(self, n, m):
        _, u, t = self._parts(n, m)
        norm = np.sqrt(n * (n + 1.0))
        return (t[..., None] * self.that + (1j * m * u)[..., None] * self.phat) / norm

    def Phi(self, n, m):
        _, u, t = self._parts(n, m)
        norm = np.sqrt(n * (n + 1.0))
        return (t[..., None] * self.phat - (1j * m * u)[..., None] * self.that) / norm


def direction_harmonics(nmax: int, direction):
    """HarmonicTable for a single unit direction."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    _, th, ph = spherical_angles(d)
    return HarmonicTable(nmax, th, ph)


def sphere_quadrature(nmax: int):
    """Gauss-Legendre x trapezoid rule on the unit sphere exact for degree <= 2*nmax+1.

    Returns (theta, phi, weights) as flat arrays.
    """
    nt = nmax + 2
    nphi = 2 * nmax + 3
    x, w = np.polynomial.legendre.leggauss(nt)
    theta = np.arccos(x)
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(w, np.full(nphi, 2.0 * np.pi / nphi))
    return TH.ravel(), PH.ravel(), W.ravel()
