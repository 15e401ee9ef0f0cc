"""Mode-by-mode Maxwell solver for radially stratified isotropic media.

Fields are expanded in the orthonormal vector harmonics of :mod:`vsh`.  With
``L = n(n+1)``:

TE (E tangential)::

    E = (u/r) Phi,   H = -sqrt(L) u / (ik mu r^2) Y rhat + (v/r) Psi
    u' = -ik mu v,   v' = i (L/(k mu r^2) - k eps) u

TM (H tangential)::

    H = (v/r) Phi,   E = sqrt(L) v / (ik eps r^2) Y rhat + (u/r) Psi
    u' = i (k mu - L/(k eps r^2)) v,   v' = ik eps u

u and v are the tangential E and H traces, so they are continuous across
interfaces.  In vacuum the regular solutions are built on r j_n(kr) and the
outgoing ones on r h_n(kr).
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import specfun, vsh
from .media import MaterialLayout

log = logging.getLogger(__name__)

TE = "TE"
TM = "TM"
POLARIZATIONS = (TE, TM)
NMAX_CAP = 80
TRUNCATION_TOL = 1e-12
RTOL = 1e-10
ATOL = 1e-12
COND_LIMIT = 1e14


class ResonanceError(RuntimeError):
    def __init__(self, message, cond):
        super().__init__(f"{message} (condition number {cond:.3g})")
        self.cond = cond


class IntegrationError(RuntimeError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True, order=True)
class ModeIndex:
    n: int
    m: int
    pol: str

    def __post_init__(self):
        if self.n < 1 or abs(self.m) > self.n or self.pol not in POLARIZATIONS:
            raise ValueError(f"invalid mode {self}")


# -- vacuum radial functions -----------------------------------------------


def vacuum_radial_table(nmax: int, pol: str, k: float, r, kind: str = "regular"):
    """(u, v) of unit-amplitude vacuum waves for n = 0..nmax at radii r.

    kind: 'regular' (j_n), 'outgoing' (h_n) or 'neumann' (y_n).
    Arrays have shape (nmax+1, *r.shape).
    """
    r = np.asarray(r, dtype=float)
    x = k * r
    table = {
        "regular": specfun.spherical_jn_table,
        "outgoing": specfun.spherical_hn_table,
        "neumann": specfun.spherical_yn_table,
    }[kind]
    z, dz = table(nmax, x)
    rz = r * z
    drz = z + x * dz
    if pol == TE:
        return rz, drz / (-1j * k)
    return drz / (1j * k), rz


def vacuum_radial(n: int, pol: str, k: float, r, kind: str = "regular"):
    u, v = vacuum_radial_table(n, pol, k, r, kind)
    return u[n], v[n]


def _regular_start(n, pol, k, eps, mu, r0):
    """State (u, v) at r0 of the regular branch, scaled so the leading factor is 1."""
    kap2 = k * k * eps * mu
    a = kap2 / (2 * (2 * n + 3))
    b = kap2 * kap2 / (8 * (2 * n + 3) * (2 * n + 5))
    s = 1 - a * r0**2 + b * r0**4
    ds = -2 * a * r0 + 4 * b * r0**3
    f = complex(s)
    df = complex((n + 1) / r0 * s + ds)
    if pol == TE:
        return np.array([f, df / (-1j * k * mu)])
    return np.array([df / (1j * k * eps), f])


def _rhs(n, pol, k, eps_fn, mu_fn, const):
    L = n * (n + 1.0)
    if const is not None:
        e, m = const
        if pol == TE:

            def f(r, y):
                return np.array([-1j * k * m * y[1], 1j * (L / (k * m * r * r) - k * e) * y[0]])

        else:

            def f(r, y):
                return np.array([1j * (k * m - L / (k * e * r * r)) * y[1], 1j * k * e * y[0]])

        return f
    if pol == TE:

        def f(r, y):
            m = complex(mu_fn(r))
            e = complex(eps_fn(r))
            return np.array([-1j * k * m * y[1], 1j * (L / (k * m * r * r) - k * e) * y[0]])

    else:

        def f(r, y):
            m = complex(mu_fn(r))
            e = complex(eps_fn(r))
            return np.array([1j * (k * m - L / (k * e * r * r)) * y[1], 1j * k * e * y[0]])

    return f


def integrate_layer(n, pol, k, eps_fn, mu_fn, a, b, y0, const=None, dense=False):
    """Integrate the (u, v) system across [a, b] from state y0."""
    sol = solve_ivp(
        _rhs(n, pol, k, eps_fn, mu_fn, const),
        (a, b),
        np.asarray(y0, dtype=complex),
        method="DOP853",
        rtol=RTOL,
        atol=ATOL,
        dense_output=dense,
    )
    if not sol.success:
        raise IntegrationError(f"n={n} {pol} on [{a:g}, {b:g}]: {sol.message}")
    return sol


def _segments(layout: MaterialLayout, r0: float):
    """(a, b, layer) pieces, each spanning at most a factor 10 in radius."""
    out = []
    for lay in layout.layers:
        a = max(lay.r_min, r0)
        if lay.r_max <= a:
            continue
        cuts = [a]
        while cuts[-1] * 10 < lay.r_max:
            cuts.append(cuts[-1] * 10)
        cuts.append(lay.r_max)
        out += [(p, q, lay) for p, q in zip(cuts[:-1], cuts[1:])]
    return out


def start_radius(layout: MaterialLayout) -> float:
    return min(1e-3 * layout.layers[0].r_max, 1e-4)


# -- radial solutions ------------------------------------------------------


@dataclass
class RadialField:
    """Radial profile (u, v) of one (n, pol) family, per unit incident amplitude.

    Inside ``outer`` the profile comes from ``inner(r)``; beyond it the field is
    the vacuum combination regular + s * outgoing.  ``medium(r)`` returns
    (eps, mu) and ``breaks`` lists interfaces (for quadrature).
    """

    n: int
    pol: str
    k: float
    s: complex
    outer: float
    inner: Optional[Callable]
    medium: Callable
    breaks: tuple
    r_min: float = 0.0
    cond: float = 1.0
    incident_weight: complex = 1.0
    label: str = "solution"

    def evaluate(self, r):
        """(u, v) at radii r (array)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        u = np.zeros(r.shape, dtype=complex)
        v = np.zeros(r.shape, dtype=complex)
        ext = r > self.outer
        if np.any(ext):
            u[ext], v[ext] = self.exterior(r[ext])
        if np.any(~ext):
            if self.inner is None:
                raise ValueError("no interior representation")
            u[~ext], v[~ext] = self.inner(r[~ext])
        return u, v

    def exterior(self, r):
        ur, vr = vacuum_radial(self.n, self.pol, self.k, r, "regular")
        uo, vo = vacuum_radial(self.n, self.pol, self.k, r, "outgoing")
        w = self.incident_weight
        return w * ur + self.s * uo, w * vr + self.s * vo

    def scattered(self, r):
        uo, vo = vacuum_radial(self.n, self.pol, self.k, r, "outgoing")
        return self.s * uo, self.s * vo


def solve_radial(layout: MaterialLayout, n: int, pol: str, k: float) -> RadialField:
    """Regular-at-origin solution matched to incident + outgoing at the outer radius."""
    if not layout.isotropic:
        raise ValueError("the mode solver needs a radially isotropic layout")
    if pol not in POLARIZATIONS:
        raise ValueError(pol)
    if layout.delta == 0:
        for lay in layout.layers:
            rr = np.linspace(max(lay.r_min, 1e-12), lay.r_max, 5)
            if np.any(np.real(lay.eps(rr)) < 0) or np.any(np.real(lay.mu(rr)) < 0):
                raise ValueError("delta = 0 with a negative-index layer is not supported")
    r0 = start_radius(layout)
    e0, m0 = layout.scalar(r0)
    y = _regular_start(n, pol, k, e0, m0, r0)
    logscale = 0.0
    pieces = []
    for a, b, lay in _segments(layout, r0):
        const = (lay.eps.constant_value, lay.mu.constant_value) if lay.constant else None
        sol = integrate_layer(n, pol, k, lay.eps, lay.mu, a, b, y, const=const, dense=True)
        pieces.append((a, b, sol.sol, logscale))
        y = sol.y[:, -1]
        s = np.abs(y).max()
        logscale += math.log(s)
        y = y / s
    R = layout.outer_radius
    ur, vr = vacuum_radial(n, pol, k, np.array([R]), "regular")
    uo, vo = vacuum_radial(n, pol, k, np.array([R]), "outgoing")
    M = np.array([[y[0], -uo[0]], [y[1], -vo[0]]])
    colnorm = np.linalg.norm(M, axis=0)
    cond = float(np.linalg.cond(M / colnorm))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ResonanceError(f"matching for n={n} {pol} is resonance-dominated", cond)
    alpha, S = np.linalg.solve(M, np.array([ur[0], vr[0]]))
    log_alpha = math.log(abs(alpha)) if alpha != 0 else -np.inf
    phase = alpha / abs(alpha) if alpha != 0 else 0.0
    starts = np.array([p[0] for p in pieces])

    def inner(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros((2,) + r.shape, dtype=complex)
        idx = np.clip(np.searchsorted(starts, r, side="right") - 1, 0, len(pieces) - 1)
        for i in np.unique(idx):
            a, b, dense, lg = pieces[i]
            sel = idx == i
            rr = np.clip(r[sel], a, b)
            scale = math.exp(lg + log_alpha - logscale) if np.isfinite(log_alpha) else 0.0
            out[:, sel] = dense(rr) * (scale * phase)
        below = r < r0
        if np.any(below):
            out[:, below] = _below_start(r[below], r0, inner_at_r0, n, pol)
        return out[0], out[1]

    a0, b0, dense0, lg0 = pieces[0]
    scale0 = math.exp(lg0 + log_alpha - logscale) if np.isfinite(log_alpha) else 0.0
    inner_at_r0 = dense0(r0) * (scale0 * phase)
    breaks = tuple(sorted({0.0} | {lay.r_min for lay in layout.layers} | {lay.r_max for lay in layout.layers}))
    return RadialField(n, pol, k, complex(S), R, inner, _layout_medium(layout), breaks, 0.0, cond)


def _below_start(r, r0, state0, n, pol):
    """Leading-order regular branch below the start radius (used only by norms)."""
    t = r / r0
    hi, lo = t ** (n + 1), t**n
    if pol == TE:
        return np.stack([state0[0] * hi, state0[1] * lo])
    return np.stack([state0[0] * lo, state0[1] * hi])


def _layout_medium(layout: MaterialLayout):
    def medium(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        eps = np.ones(r.shape, dtype=complex)
        mu = np.ones(r.shape, dtype=complex)
        for lay in layout.layers:
            sel = (r >= lay.r_min) & (r <= lay.r_max)
            if np.any(sel):
                eps[sel] = lay.eps(r[sel])
                mu[sel] = lay.mu(r[sel])
        return eps, mu

    return medium


def outgoing_mode(n: int, pol: str, k: float) -> RadialField:
    """Pure outgoing vacuum wave with unit amplitude (valid for r > 0)."""
    return RadialField(n, pol, k, 1.0 + 0j, 0.0, None, _vacuum_medium, (0.0,), incident_weight=0.0, label="outgoing")


def regular_mode(n: int, pol: str, k: float) -> RadialField:
    return RadialField(n, pol, k, 0j, 0.0, None, _vacuum_medium, (0.0,), incident_weight=1.0, label="regular")


def _vacuum_medium(r):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    one = np.ones(r.shape, dtype=complex)
    return one, one.copy()


# -- incident fields -------------------------------------------------------


@dataclass(frozen=True)
class IncidentSpec:
    """Regular-wave coefficients of the incident field, sorted by ModeIndex.

    ``strength`` is the source norm used wherever the source norm enters
    (1 for plane waves, |p| k^2 for dipoles).  The expansion is valid for
    r < ``source_radius``.
    """

    k: float
    coefficients: tuple
    strength: float = 1.0
    kind: str = "custom"
    source_radius: float = np.inf
    params: dict = field(default_factory=dict, compare=False)

    @property
    def nmax(self) -> int:
        return max((mi.n for mi, _ in self.coefficients), default=0)

    def modes(self):
        return [mi for mi, _ in self.coefficients]

    def amplitude(self, mode: ModeIndex) -> complex:
        return dict(self.coefficients).get(mode, 0j)

    def scaled(self, factor: float) -> "IncidentSpec":
        return IncidentSpec(
            self.k,
            tuple((mi, a * factor) for mi, a in self.coefficients),
            self.strength * abs(factor),
            self.kind,
            self.source_radius,
            dict(self.params, scale=factor),
        )

    @classmethod
    def plane_wave(cls, k, direction=(0.0, 0.0, 1.0), polarization=(1.0, 0.0, 0.0), nmax=None, radius=None):
        """e0 exp(ik khat.x) with H = khat x e0 exp(ik khat.x)."""
        khat = np.asarray(direction, dtype=float)
        khat = khat / np.linalg.norm(khat)
        e0 = np.asarray(polarization, dtype=complex)
        if abs(np.dot(khat, e0)) > 1e-12 * np.linalg.norm(e0):
            raise ValueError("polarization must be orthogonal to the direction")
        h0 = np.cross(khat, e0)
        cap = NMAX_CAP if nmax is None else nmax
        tab = vsh.direction_harmonics(cap, khat)

        def coeffs(n):
            out = {}
            pref = 4 * np.pi * 1j**n
            for m in range(-n, n + 1):
                phi = np.conj(tab.Phi(n, m))
                out[ModeIndex(n, m, TE)] = complex(pref * np.dot(e0, phi))
                out[ModeIndex(n, m, TM)] = complex(pref * np.dot(h0, phi))
            return out

        params = {"direction": khat.tolist(), "polarization": [[z.real, z.imag] for z in e0]}
        return cls._truncated(k, coeffs, nmax, radius, 1.0, "plane_wave", np.inf, params)

    @classmethod
    def point_dipole(cls, k, position, moment, nmax=None, radius=None):
        """Field of the current source j = p delta(x - x0), expanded for |x| < |x0|."""
        x0 = np.asarray(position, dtype=float)
        p = np.asarray(moment, dtype=complex)
        r0 = float(np.linalg.norm(x0))
        cap = NMAX_CAP if nmax is None else nmax
        _, th, ph = vsh.spherical_angles(x0)
        tab = vsh.HarmonicTable(cap, th, ph)
        rhat, _, _ = vsh.local_frame(th, ph)
        h, dh = specfun.spherical_hn_table(cap, k * r0)

        def coeffs(n):
            out = {}
            L = n * (n + 1.0)
            d_rh = h[n] + k * r0 * dh[n]
            for m in range(-n, n + 1):
                phi = np.conj(tab.Phi(n, m))
                psi = np.conj(tab.Psi(n, m))
                y = np.conj(tab.Y(n, m))
                nvec = -(np.sqrt(L) * h[n] * y * rhat + d_rh * psi) / (k * r0)
                out[ModeIndex(n, m, TE)] = complex(-k * k * h[n] * np.dot(p, phi))
                out[ModeIndex(n, m, TM)] = complex(1j * k * k * np.dot(p, nvec))
            return out

        params = {"position": x0.tolist(), "moment": [[z.real, z.imag] for z in p]}
        strength = float(np.linalg.norm(p)) * k * k
        return cls._truncated(k, coeffs, nmax, radius, strength, "point_dipole", r0, params)

    @classmethod
    def _truncated(cls, k, coeffs, nmax, radius, strength, kind, source_radius, params):
        if nmax is not None:
            table = {}
            for n in range(1, nmax + 1):
                table.update(coeffs(n))
            return cls._finish(k, table, strength, kind, source_radius, params, nmax)
        if radius is None:
            raise ValueError("give nmax or the radius over which the expansion must converge")
        nmax = choose_nmax(k, radius, coeffs)
        table = {}
        for n in range(1, nmax + 1):
            table.update(coeffs(n))
        return cls._finish(k, table, strength, kind, source_radius, params, nmax)

    @classmethod
    def _finish(cls, k, table, strength, kind, source_radius, params, nmax):
        # drop only entries that vanish by symmetry (relative to their own degree)
        peak = {}
        for mi, a in table.items():
            peak[mi.n] = max(peak.get(mi.n, 0.0), abs(a))
        keep = tuple(sorted((mi, a) for mi, a in table.items() if abs(a) > 1e-15 * peak[mi.n]))
        return cls(k, keep, strength, kind, source_radius, dict(params, nmax=nmax))


def choose_nmax(k, radius, coeffs, tol=TRUNCATION_TOL, cap=NMAX_CAP) -> int:
    """Smallest n past the peak where the mode's field level on |x| = radius drops below tol * max.

    The level of degree n is sqrt(sum_m |A_nm|^2) times the larger of the
    regular radial functions |u|, |v| at ``radius``.
    """
    levels = []
    uj = {pol: vacuum_radial_table(cap, pol, k, np.array([radius]), "regular") for pol in POLARIZATIONS}
    peak = 0.0
    for n in range(1, cap + 1):
        c = coeffs(n)
        lev = 0.0
        for pol in POLARIZATIONS:
            a2 = sum(abs(a) ** 2 for mi, a in c.items() if mi.pol == pol)
            u, v = uj[pol]
            lev = max(lev, np.sqrt(a2) * max(abs(u[n, 0]), abs(v[n, 0])))
        levels.append(lev)
        peak = max(peak, lev)
        if n > k * radius and lev < tol * peak:
            return n
    warnings.warn(f"incident expansion not converged at the cap n = {cap}", TruncationWarning, stacklevel=3)
    return cap


# -- mode solutions ---------------------------------------------------------


@dataclass
class ModeSolution:
    mode: ModeIndex
    amplitude: complex
    radial: RadialField

    @property
    def outgoing(self) -> complex:
        return self.amplitude * self.radial.s

    def profile(self, r):
        u, v = self.radial.evaluate(r)
        return self.amplitude * u, self.amplitude * v

    def record(self, grid=None) -> dict:
        if grid is None:
            top = self.radial.outer if np.isfinite(self.radial.outer) and self.radial.outer > 0 else 1.0
            grid = np.linspace(top / 200, 2 * top, 200)
        grid = np.asarray(grid, dtype=float)
        u, v = self.profile(grid)
        return {
            "mode": {"n": self.mode.n, "m": self.mode.m, "pol": self.mode.pol},
            "outgoing": [self.outgoing.real, self.outgoing.imag],
            "coefficient": [self.radial.s.real, self.radial.s.imag],
            "incident": [complex(self.amplitude).real, complex(self.amplitude).imag],
            "grid": grid.tolist(),
            "u": [[z.real, z.imag] for z in u],
            "v": [[z.real, z.imag] for z in v],
        }

    def to_json(self, grid=None) -> str:
        return json.dumps(self.record(grid))


def solve_mode(layout: MaterialLayout, incident: IncidentSpec, mode: ModeIndex, cache=None) -> ModeSolution:
    key = (mode.n, mode.pol)
    if cache is not None and key in cache:
        radial = cache[key]
    else:
        radial = solve_radial(layout, mode.n, mode.pol, incident.k)
        if cache is not None:
            cache[key] = radial
    return ModeSolution(mode, incident.amplitude(mode), radial)


def solve_all(layout: MaterialLayout, incident: IncidentSpec):
    """All modes of the incident field; radial solves shared across m, results sorted."""
    cache = {}
    return [solve_mode(layout, incident, mi, cache) for mi in sorted(incident.modes())]


def free_space_solutions(incident: IncidentSpec):
    """The incident field itself (the solution with no device)."""
    return [ModeSolution(mi, a, regular_mode(mi.n, mi.pol, incident.k)) for mi, a in incident.coefficients]


# -- field synthesis --------------------------------------------------------


def _grouped(solutions):
    groups = {}
    for sol in solutions:
        groups.setdefault(id(sol.radial), (sol.radial, []))[1].append(sol)
    return groups.values()


def assemble_field(solutions, points):
    """(E, H) at Cartesian points, each of shape (..., 3)."""
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1]
    flat = pts.reshape(-1, 3)
    E = np.zeros(flat.shape, dtype=complex)
    H = np.zeros(flat.shape, dtype=complex)
    if not solutions:
        return E.reshape(pts.shape), H.reshape(pts.shape)
    r, th, ph = vsh.spherical_angles(flat)
    if np.any(r == 0):
        raise ValueError("field synthesis at the origin is not supported")
    nmax = max(s.mode.n for s in solutions)
    tab = vsh.HarmonicTable(nmax, th, ph)
    for radial, sols in _grouped(solutions):
        u, v = radial.evaluate(r)
        eps, mu = radial.medium(r)
        n = radial.n
        sq = np.sqrt(n * (n + 1.0))
        k = radial.k
        for sol in sols:
            a = sol.amplitude
            Y = tab.Y(n, sol.mode.m)[:, None]
            Ps = tab.Psi(n, sol.mode.m)
            Ph = tab.Phi(n, sol.mode.m)
            if radial.pol == TE:
                E += a * (u / r)[:, None] * Ph
                H += a * ((-sq * u / (1j * k * mu * r * r))[:, None] * Y * tab.rhat + (v / r)[:, None] * Ps)
            else:
                H += a * (v / r)[:, None] * Ph
                E += a * ((sq * v / (1j * k * eps * r * r))[:, None] * Y * tab.rhat + (u / r)[:, None] * Ps)
    return E.reshape(pts.shape), H.reshape(pts.shape)


def write_field_csv(path, points, E, H):
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    E = np.asarray(E).reshape(-1, 3)
    H = np.asarray(H).reshape(-1, 3)
    cols = ["x", "y", "z"]
    for name in ("E", "H"):
        for c in "xyz":
            cols += [f"Re{name}{c}", f"Im{name}{c}"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for p, e, h in zip(pts, E, H):
            vals = list(p)
            for comp in list(e) + list(h):
                vals += [comp.real, comp.imag]
            fh.write(",".join(f"{x:.17g}" for x in vals) + "\n")


# -- mode-space norms -------------------------------------------------------

GL_POINTS = 20
PANEL_RATIO = 1.1


def _panels(a, b, breaks, kappa_fn):
    """Quadrature panels on [a, b]: split at interfaces, geometric in r, and
    no wider than a quarter of the local wavelength."""
    cuts = [a] + [x for x in breaks if a < x < b] + [b]
    out = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        start = lo
        if lo == 0:
            out.append((0.0, hi * 1e-4))
            start = hi * 1e-4
        x = start
        while x < hi:
            kap = kappa_fn(np.array([x, min(hi, x * PANEL_RATIO)])).max()
            w = min(x * (PANEL_RATIO - 1), np.pi / (2 * max(kap, 1e-12)))
            nxt = min(hi, x + w)
            if hi - nxt < 1e-12 * hi:
                nxt = hi
            out.append((x, nxt))
            x = nxt
    return out


def quadrature_nodes(a, b, breaks, kappa_fn, points=GL_POINTS):
    xg, wg = np.polynomial.legendre.leggauss(points)
    panels = np.array(_panels(a, b, breaks, kappa_fn))
    lo, hi = panels[:, :1], panels[:, 1:]
    r = (0.5 * (hi - lo) * xg + 0.5 * (hi + lo)).ravel()
    w = (0.5 * (hi - lo) * wg).ravel()
    return r, w


def _components(radial: RadialField, r, scattered=False):
    """Coefficients of E, H, curl E, curl H on (rhat Y, Psi, Phi) at radii r, per unit amplitude."""
    u, v = radial.scattered(r) if scattered else radial.evaluate(r)
    eps, mu = radial.medium(r)
    k = radial.k
    n = radial.n
    sq = np.sqrt(n * (n + 1.0))
    z = np.zeros_like(u)
    if radial.pol == TE:
        E = np.stack([z, z, u / r])
        H = np.stack([-sq * u / (1j * k * mu * r * r), v / r, z])
    else:
        H = np.stack([z, z, v / r])
        E = np.stack([sq * v / (1j * k * eps * r * r), u / r, z])
    return {"E": E, "H": H, "curlE": 1j * k * mu * H, "curlH": -1j * k * eps * E}


def _weights(solutions):
    """(radial, sum_m |A|^2) per radial family."""
    return [(radial, sum(abs(s.amplitude) ** 2 for s in sols)) for radial, sols in _grouped(solutions)]


def _kappa_fn(radials, k):
    def kap(r):
        out = np.full(np.shape(r), k)
        for rad in radials:
            eps, mu = rad.medium(r)
            out = np.maximum(out, k * np.abs(np.sqrt(eps * mu)))
        return out

    return kap


def region_norms(solutions, a, b, other=None):
    """L^2 norms of E, H, curl E and curl H over the shell a < |x| < b.

    With ``other`` given, norms of the difference (solutions - other); both
    lists must share the same modes and amplitudes.
    """
    if not a < b:
        raise ValueError("empty shell")
    keys = ("E", "H", "curlE", "curlH")
    total = dict.fromkeys(keys, 0.0)
    if not solutions:
        return {key: 0.0 for key in keys}
    pairs = _paired(solutions, other)
    radials = [p[0] for p in pairs] + [p[1] for p in pairs if p[1] is not None]
    breaks = sorted({x for rad in radials for x in rad.breaks if np.isfinite(x)})
    r, w = quadrature_nodes(a, b, breaks, _kappa_fn(radials, solutions[0].radial.k))
    for rad_a, rad_b, weight in pairs:
        scattered = rad_b is not None and a >= max(rad_a.outer, rad_b.outer) and rad_a.incident_weight == rad_b.incident_weight
        ca = _components(rad_a, r, scattered)
        cb = _components(rad_b, r, scattered) if rad_b is not None else None
        for key in keys:
            d = ca[key] if cb is None else ca[key] - cb[key]
            total[key] += weight * float(np.sum(w * r * r * np.sum(np.abs(d) ** 2, axis=0)))
    return {key: float(np.sqrt(val)) for key, val in total.items()}


def _paired(solutions, other):
    if other is None:
        return [(rad, None, wgt) for rad, wgt in _weights(solutions)]
    index = {}
    for s in other:
        index[s.mode] = s
    groups = {}
    for s in solutions:
        o = index.get(s.mode)
        if o is None or abs(o.amplitude - s.amplitude) > 1e-14 * max(1.0, abs(s.amplitude)):
            raise ValueError(f"mode {s.mode} missing or with a different amplitude in the comparison set")
        key = (id(s.radial), id(o.radial))
        groups.setdefault(key, [s.radial, o.radial, 0.0])[2] += abs(s.amplitude) ** 2
    return [tuple(g) for g in groups.values()]


def hcurl_norm(norms) -> float:
    """||(E, H)||_{H(curl)} = (||E|| + ||curl E||) + (||H|| + ||curl H||)."""
    return norms["E"] + norms["curlE"] + norms["H"] + norms["curlH"]


def l2_pair_norm(norms) -> float:
    return norms["E"] + norms["H"]


def hcurl_shell_misfit(solutions_a, solutions_b, a, b) -> float:
    return hcurl_norm(region_norms(solutions_a, a, b, other=solutions_b))


# -- reflections ------------------------------------------------------------


def _radial_action(t):
    """Scalar radial action rho -> |T^{-1}(rho e)| and the medium transform for T_*."""
    if t.kelvin_radius is not None and t.scale is None:
        r0sq = t.kelvin_radius**2

        def pre(rho):
            return r0sq / rho

        def medium_factor(rho):
            return -r0sq / rho**2

        return pre, medium_factor
    if t.scale is not None and t.scale > 0:
        c = t.scale

        def pre(rho):
            return rho / c

        def medium_factor(rho):
            return np.full(np.shape(rho), 1.0 / c)

        return pre, medium_factor
    raise ValueError("only Kelvin transforms and positive scalings preserve the mode structure")


def reflect_radial(radial: RadialField, t) -> RadialField:
    """Mode-space representation of (T*E, T*H) for a Kelvin map or scaling T.

    Tangential traces transform as u_new(rho) = u(|T^{-1}(rho)|) (same for v),
    the medium as T_* (eps, mu).
    """
    pre, factor = _radial_action(t)

    def inner(rho):
        return radial.evaluate(pre(np.asarray(rho, dtype=float)))

    def medium(rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        eps, mu = radial.medium(pre(rho))
        f = factor(rho)
        return eps * f, mu * f

    breaks = tuple(sorted({float(pre(x)) for x in radial.breaks if x > 0}))
    return RadialField(radial.n, radial.pol, radial.k, 0j, np.inf, inner, medium, breaks, 0.0, radial.cond,
                       incident_weight=0.0, label=f"reflect({radial.label})")


def reflect_solution(solution, t):
    """Reflect a ModeSolution (or a list of them) through a Kelvin map / scaling."""
    if isinstance(solution, list):
        cache = {}
        out = []
        for s in solution:
            key = id(s.radial)
            if key not in cache:
                cache[key] = reflect_radial(s.radial, t)
            out.append(ModeSolution(s.mode, s.amplitude, cache[key]))
        return out
    return ModeSolution(solution.mode, solution.amplitude, reflect_radial(solution.radial, t))


def jump_weights(n: int, pol: str):
    """Mode weights of the tangential-trace norm (H^{-1/2}(div)-type) for (du, dv).

    lambda = sqrt(1 + n(n+1)).  In E x nu the TE trace is the surface-gradient
    (divergence-carrying) part and gets lambda; the TM trace is the
    surface-curl part and gets 1/lambda.  H x nu swaps the roles.
    """
    lam = np.sqrt(1.0 + n * (n + 1.0))
    return (lam, 1.0 / lam) if pol == TE else (1.0 / lam, lam)


def trace_jump_norm(solutions, outer_fn, inner_fn, radius) -> float:
    """Norm of [trace(outer) - trace(inner)] on |x| = radius."""
    total = 0.0
    for radial, weight in _weights(solutions):
        uo, vo = outer_fn(radial, radius)
        ui, vi = inner_fn(radial, radius)
        wu, wv = jump_weights(radial.n, radial.pol)
        total += weight * (wu * abs(uo - ui) ** 2 + wv * abs(vo - vi) ** 2)
    return float(np.sqrt(total))


def trace_norm(solutions, radius) -> float:
    """Same norm applied to the traces of the field itself."""
    zero = lambda rad, R: (0.0, 0.0)
    return trace_jump_norm(solutions, _at, zero, radius)


def _at(radial, R):
    u, v = radial.evaluate(np.array([R]))
    return u[0], v[0]


@dataclass
class RemovedSingularity:
    """Piecewise field: E_delta outside r3; E_delta - (E1 - E2) in r3 > |x| > 2 r2; E2 inside 2 r2."""

    solutions: list
    r2: float
    r3: float
    jump_r3: float
    jump_2r2: float
    trace_r3: float
    trace_2r2: float

    def profile(self, radial, r):
        """(u, v) of the removed-singularity field for one radial family."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        r2, r3 = self.r2, self.r3
        u, v = radial.evaluate(r)
        u1, v1 = radial.evaluate(r2 * r2 / r)
        u2, v2 = radial.evaluate(r2 * r2 * r / (r3 * r3))
        mid = (r > 2 * r2) & (r < r3)
        ins = r <= 2 * r2
        u = np.where(mid, u - u1 + u2, np.where(ins, u2, u))
        v = np.where(mid, v - v1 + v2, np.where(ins, v2, v))
        return u, v


def removed_singularity_field(solutions, F, G) -> RemovedSingularity:
    """Assemble the removed-singularity field and the tangential jumps across |x| = r3 and |x| = 2 r2."""
    if F.kelvin_radius is None or G.kelvin_radius is None:
        raise ValueError("both maps must be Kelvin transforms")
    r2, r3 = F.kelvin_radius, G.kelvin_radius

    def e1(rad, R):
        return _at(rad, r2 * r2 / R)

    def e2(rad, R):
        return _at(rad, r2 * r2 * R / (r3 * r3))

    def mid(rad, R):
        u, v = _at(rad, R)
        u1, v1 = e1(rad, R)
        u2, v2 = e2(rad, R)
        return u - u1 + u2, v - v1 + v2

    j3 = trace_jump_norm(solutions, _at, mid, r3)
    j2 = trace_jump_norm(solutions, mid, e2, 2 * r2)
    return RemovedSingularity(solutions, r2, r3, j3, j2, trace_norm(solutions, r3), trace_norm(solutions, 2 * r2))


def data_functional(solutions, incident: IncidentSpec, delta: float, R0: float, r3: Optional[float] = None) -> float:
    """(||(E, H)||_{L^2(B_R0 \\ B_r3)} ||j|| / delta + ||j||^2)^{1/2}."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if r3 is None:
        r3 = max((s.radial.outer for s in solutions if np.isfinite(s.radial.outer)), default=0.0)
    if not R0 > r3:
        raise ValueError("R0 must exceed r3")
    if R0 > incident.source_radius:
        raise ValueError("the incident expansion is only valid inside the source radius")
    j = incident.strength
    field = l2_pair_norm(region_norms(solutions, r3, R0)) if solutions else 0.0
    return float(np.sqrt(field * j / delta + j * j))


# -- diagnostics and oracles -------------------------------------------------


def outgoing_residual(solutions, R) -> float:
    """L^2(|x| = R) norm of E_s x xhat + H_s for the scattered part."""
    total = 0.0
    for radial, weight in _weights(solutions):
        u, v = radial.scattered(np.array([R]))
        u, v = u[0], v[0]
        if radial.pol == TE:
            L = radial.n * (radial.n + 1.0)
            val = abs(u + v) ** 2 + L * abs(u) ** 2 / (radial.k * R) ** 2
        else:
            val = abs(v - u) ** 2
        total += weight * val
    return float(np.sqrt(total))


def mie_coefficient(n: int, pol: str, k: float, radius: float, eps: complex, mu: complex = 1.0) -> complex:
    """Closed-form scattering coefficient of a homogeneous sphere (unit incident amplitude).

    Inside, the field is built on f = r j_n(kappa r), kappa = k sqrt(eps mu); the
    tangential traces are f and f'/mu (TE) or f'/eps (TM).
    """
    kap = k * np.sqrt(complex(eps) * complex(mu))
    a = radius
    jin, djin = specfun.spherical_bessel(n, kap * a)
    f = a * jin
    df = jin + kap * a * djin
    jo, djo = specfun.spherical_bessel(n, k * a)
    ho, dho = specfun.spherical_hankel(n, k * a)
    psi, dpsi = a * jo, jo + k * a * djo
    xi, dxi = a * ho, ho + k * a * dho
    D = df / (f * (mu if pol == TE else eps))
    return complex((dpsi - psi * D) / (xi * D - dxi))


def free_space_span_residual(n: int, pol: str, k: float, a: float, b: float, seed: int = 0, samples: int = 25) -> float:
    """Integrate the radial system in vacuum from a random state and compare with the
    regular/Neumann combination through the same state; returns the max relative error."""
    rng = np.random.default_rng(seed)
    y0 = rng.normal(size=2) + 1j * rng.normal(size=2)
    sol = integrate_layer(n, pol, k, None, None, a, b, y0, const=(1.0, 1.0), dense=True)
    uj, vj = vacuum_radial(n, pol, k, np.array([a]), "regular")
    uy, vy = vacuum_radial(n, pol, k, np.array([a]), "neumann")
    c = np.linalg.solve(np.array([[uj[0], uy[0]], [vj[0], vy[0]]]), y0)
    rs = np.linspace(a, b, samples)
    uj, vj = vacuum_radial(n, pol, k, rs, "regular")
    uy, vy = vacuum_radial(n, pol, k, rs, "neumann")
    ref = np.stack([c[0] * uj + c[1] * uy, c[0] * vj + c[1] * vy])
    got = sol.sol(rs)
    return float(np.abs(got - ref).max() / np.abs(ref).max())
