"""Coordinate maps and the transformation-optics push-forward calculus.

All maps act on arrays of points of shape (..., 3).  Jacobians have shape
(..., 3, 3) with ``jac[..., i, j] = d T_i / d x_j``.  Determinants are signed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SINGULAR_TOL = 1e-14
TANGENTIAL_TOL = 1e-10
FD_REL_STEP = 1e-6


class SingularJacobianError(ValueError):
    pass


class AdmissibilityError(ValueError):
    """A map fails one of the admissibility conditions; ``condition`` names it."""

    def __init__(self, condition: str, detail: str):
        super().__init__(f"condition {condition} violated: {detail}")
        self.condition = condition
        self.detail = detail


@dataclass(frozen=True)
class RegionSpec:
    """Domain/codomain descriptor: kind is 'ball', 'annulus', 'exterior' or 'punctured'."""

    kind: str
    r_min: float = 0.0
    r_max: float = np.inf

    def contains(self, points) -> np.ndarray:
        r = np.linalg.norm(np.asarray(points, dtype=float), axis=-1)
        if self.kind == "punctured":
            return r > 0
        return (r >= self.r_min) & (r <= self.r_max)


PUNCTURED = RegionSpec("punctured", 0.0, np.inf)
SPACE = RegionSpec("ball", 0.0, np.inf)


@dataclass(frozen=True)
class TensorPair:
    epsilon: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "epsilon", np.asarray(self.epsilon, dtype=complex))
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=complex))

    @classmethod
    def isotropic(cls, eps, mu):
        eye = np.eye(3)
        return cls(eps * eye, mu * eye)

    def is_symmetric(self, tol=1e-14) -> bool:
        def sym(a):
            return np.max(np.abs(a - np.swapaxes(a, -1, -2)), initial=0.0) <= tol * max(1.0, np.max(np.abs(a), initial=0.0))

        return sym(self.epsilon) and sym(self.mu)


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError("points must have trailing dimension 3")
    return x


def fd_jacobian(forward, x, rel_step=FD_REL_STEP):
    """Central-difference Jacobian with step rel_step*(1+|x|)."""
    x = _as_points(x)
    h = rel_step * (1.0 + np.linalg.norm(x, axis=-1))
    jac = np.empty(x.shape + (3,))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1.0
        step = h[..., None] * e
        jac[..., :, j] = (forward(x + step) - forward(x - step)) / (2.0 * h[..., None])
    return jac


@dataclass(frozen=True)
class DiffeoMap:
    """A smooth invertible map with Jacobian and signed determinant.

    ``jacobian_fn`` may be None, in which case central differences are used.
    ``kelvin_radius`` / ``scale`` tag the built-in families that preserve
    spherical-harmonic mode indices.
    """

    forward_fn: Callable
    inverse_fn: Callable
    jacobian_fn: Optional[Callable] = None
    domain: RegionSpec = SPACE
    codomain: RegionSpec = SPACE
    name: str = "map"
    kelvin_radius: Optional[float] = None
    scale: Optional[float] = None
    radial_profile: Optional[Callable] = field(default=None, compare=False)

    def forward(self, x):
        return self.forward_fn(_as_points(x))

    def inverse(self, y):
        return self.inverse_fn(_as_points(y))

    def jacobian(self, x):
        x = _as_points(x)
        if self.jacobian_fn is None:
            return fd_jacobian(self.forward_fn, x)
        return self.jacobian_fn(x)

    def signed_det(self, x):
        return np.linalg.det(self.jacobian(x))

    @property
    def analytic(self) -> bool:
        return self.jacobian_fn is not None


def _reject_origin(x):
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValueError("Kelvin map is undefined at the origin")
    return r


def kelvin_map(radius: float) -> DiffeoMap:
    """Inversion x -> r0^2 x / |x|^2 through the sphere of radius r0."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    r0sq = float(radius) ** 2

    def fwd(x):
        r = _reject_origin(x)
        return x * (r0sq / r**2)[..., None]

    def jac(x):
        r = _reject_origin(x)
        xh = x / r[..., None]
        c = (r0sq / r**2)[..., None, None]
        return c * (np.eye(3) - 2.0 * xh[..., :, None] * xh[..., None, :])

    return DiffeoMap(
        fwd, fwd, jac, PUNCTURED, PUNCTURED, name=f"kelvin({radius:g})", kelvin_radius=float(radius)
    )


def scaling_map(c: float) -> DiffeoMap:
    if c == 0:
        raise ValueError("scale factor must be nonzero")
    c = float(c)
    return DiffeoMap(
        lambda x: c * x,
        lambda y: y / c,
        lambda x: np.broadcast_to(c * np.eye(3), x.shape[:-1] + (3, 3)).copy(),
        SPACE,
        SPACE,
        name=f"scale({c:g})",
        scale=c,
    )


def identity_map() -> DiffeoMap:
    m = scaling_map(1.0)
    return DiffeoMap(m.forward_fn, m.inverse_fn, m.jacobian_fn, name="identity", scale=1.0)


def radial_map(f, f_inv, df=None, name="radial", domain=PUNCTURED, codomain=PUNCTURED) -> DiffeoMap:
    """x -> f(|x|) x/|x| for a scalar profile f (which may be decreasing)."""

    def fwd(x):
        r = _reject_origin(x)
        return x * (f(r) / r)[..., None]

    def inv(y):
        s = _reject_origin(y)
        return y * (f_inv(s) / s)[..., None]

    jac = None
    if df is not None:

        def jac(x):
            r = _reject_origin(x)
            xh = x / r[..., None]
            P = xh[..., :, None] * xh[..., None, :]
            return df(r)[..., None, None] * P + (f(r) / r)[..., None, None] * (np.eye(3) - P)

    return DiffeoMap(fwd, inv, jac, domain, codomain, name=name, radial_profile=f)


def compose(g: DiffeoMap, f: DiffeoMap) -> DiffeoMap:
    """g o f, with the chain-rule Jacobian when both factors are analytic."""
    jac = None
    if f.analytic and g.analytic:

        def jac(x):
            return g.jacobian(f.forward(x)) @ f.jacobian(x)

    scale = None
    if f.kelvin_radius and g.kelvin_radius:
        scale = g.kelvin_radius**2 / f.kelvin_radius**2
    elif f.scale is not None and g.scale is not None:
        scale = f.scale * g.scale
    return DiffeoMap(
        lambda x: g.forward(f.forward(x)),
        lambda y: f.inverse(g.inverse(y)),
        jac,
        f.domain,
        g.codomain,
        name=f"{g.name}o{f.name}",
        scale=scale,
    )


def inverse(t: DiffeoMap) -> DiffeoMap:
    jac = None
    if t.analytic:

        def jac(y):
            return np.linalg.inv(t.jacobian(t.inverse(y)))

    return DiffeoMap(
        t.inverse_fn,
        t.forward_fn,
        jac,
        t.codomain,
        t.domain,
        name=f"inv({t.name})",
        kelvin_radius=t.kelvin_radius,
        scale=None if t.scale is None else 1.0 / t.scale,
    )


# -- push-forwards ---------------------------------------------------------


def _checked_det(jac):
    det = np.linalg.det(jac)
    if np.any(np.abs(det) < SINGULAR_TOL):
        raise SingularJacobianError(f"|det| below {SINGULAR_TOL:g}")
    return det


def push_matrix(t: DiffeoMap, a, x):
    """grad T(x) a grad T(x)^T / J(x) for a matrix a given at the preimage x."""
    jac = t.jacobian(x)
    det = _checked_det(jac)
    a = np.asarray(a)
    return jac @ a @ np.swapaxes(jac, -1, -2) / det[..., None, None]


def push_tensor(t: DiffeoMap, tensor_field, y) -> TensorPair:
    """T_* of a tensor-pair field, evaluated at image points y.

    ``tensor_field`` maps preimage points x to a TensorPair (or is a constant
    TensorPair).
    """
    x = t.inverse(y)
    tp = tensor_field(x) if callable(tensor_field) else tensor_field
    return TensorPair(push_matrix(t, tp.epsilon, x), push_matrix(t, tp.mu, x))


def push_field(t: DiffeoMap, value, x):
    """Covariant transform grad T(x)^{-T} E(x); the result lives at T(x)."""
    jac = t.jacobian(x)
    _checked_det(jac)
    v = np.asarray(value)
    return np.linalg.solve(np.swapaxes(jac, -1, -2), v[..., None])[..., 0]


def push_source(t: DiffeoMap, value, x):
    """j(x) / J(x); the result lives at T(x)."""
    det = _checked_det(t.jacobian(x))
    return np.asarray(value) / det[..., None]


def push_boundary(t: DiffeoMap, radius: float, g, x):
    """Boundary push-forward of tangential data g given at points x on |x| = radius.

    Returns ``sign * grad T g / |surface det|`` at T(x); the surface
    determinant of the restriction to the sphere is |det grad T| |grad T^{-T} nu|.
    """
    x = _as_points(x)
    g = np.asarray(g)
    r = np.linalg.norm(x, axis=-1)
    if np.any(np.abs(r - radius) > 1e-9 * radius):
        raise ValueError("points are not on the given sphere")
    nu = x / r[..., None]
    gn = np.abs(np.sum(g * nu, axis=-1))
    gmag = np.linalg.norm(g, axis=-1)
    if np.any(gn > TANGENTIAL_TOL * np.maximum(gmag, 1e-300)):
        raise ValueError("boundary data is not tangential")
    image_r = np.linalg.norm(t.forward(x), axis=-1)
    if np.ptp(image_r) > 1e-9 * np.max(image_r):
        raise ValueError("map does not send the sphere to a sphere")
    jac = t.jacobian(x)
    det = _checked_det(jac)
    cof_nu = np.linalg.solve(np.swapaxes(jac, -1, -2), nu[..., None])[..., 0]
    surf = np.abs(det) * np.linalg.norm(cof_nu, axis=-1)
    out = (jac @ g[..., None])[..., 0]
    return np.sign(det)[..., None] * out / surf[..., None]


# -- finite-difference residuals ------------------------------------------


@dataclass(frozen=True)
class CartesianPatch:
    center: np.ndarray
    half_width: float
    points_per_dim: int

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points_per_dim - 1)

    def grid(self):
        if self.points_per_dim < 5:
            raise ValueError("grid too coarse: need at least 5 points per direction")
        s = np.linspace(-self.half_width, self.half_width, self.points_per_dim)
        X, Y, Z = np.meshgrid(s, s, s, indexing="ij")
        return np.stack([X, Y, Z], axis=-1) + np.asarray(self.center, dtype=float)


def fd_partial(f, axis, h):
    """Second-order central difference along grid axis (interior points only)."""
    sl_p = [slice(1, -1)] * 3
    sl_m = [slice(1, -1)] * 3
    sl_p[axis] = slice(2, None)
    sl_m[axis] = slice(None, -2)
    return (f[tuple(sl_p)] - f[tuple(sl_m)]) / (2.0 * h)


def fd_curl(F, h):
    d = [[fd_partial(F[..., c], a, h) for c in range(3)] for a in range(3)]
    return np.stack([d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]], axis=-1)


def _interior(a):
    return a[1:-1, 1:-1, 1:-1]


def maxwell_residual(E, H, eps, mu, k, h):
    """sup |curl E - ik mu H| and sup |curl H + ik eps E| over interior grid points."""
    cE = fd_curl(E, h)
    cH = fd_curl(H, h)
    rE = cE - 1j * k * np.einsum("...ij,...j->...i", _interior(mu), _interior(H))
    rH = cH + 1j * k * np.einsum("...ij,...j->...i", _interior(eps), _interior(E))
    return float(np.abs(rE).max()), float(np.abs(rH).max())


def levi_civita(a, b, c) -> int:
    """Sign of (a, b, c) as a permutation of (0, 1, 2); zero if not a permutation."""
    if len({a, b, c}) < 3:
        return 0
    perm = [a, b, c]
    inversions = sum(1 for i in range(3) for j in range(i + 1, 3) if perm[i] > perm[j])
    return -1 if inversions % 2 else 1


LEVI_CIVITA = np.array([[[levi_civita(a, b, c) for c in range(3)] for b in range(3)] for a in range(3)], float)


def _div(V, h):
    return sum(fd_partial(V[..., c], c, h) for c in range(3))


def elliptic_residual(E, H, eps, mu, k, h):
    """Residuals of the weakly coupled second-order system satisfied by Maxwell fields.

    For each component a, evaluates
        div(mu grad H_a) + div(d_a mu H - ik mu e^a eps E)
        div(eps grad E_a) + div(d_a eps E + ik eps e^a mu H)
    with (e^a)_{bc} the Levi-Civita symbol. Nested central differences, so
    the returned arrays live on the grid with two layers stripped.
    Returns (sup over a of the H residual, sup of the E residual).
    """
    out_h = 0.0
    out_e = 0.0
    for a in range(3):
        ea = LEVI_CIVITA[a]
        gradHa = np.stack([fd_partial(H[..., a], c, h) for c in range(3)], axis=-1)
        gradEa = np.stack([fd_partial(E[..., a], c, h) for c in range(3)], axis=-1)
        dmu = fd_partial(mu, a, h)
        deps = fd_partial(eps, a, h)
        muI, epsI, HI, EI = _interior(mu), _interior(eps), _interior(H), _interior(E)
        vh = (
            np.einsum("...ij,...j->...i", muI, gradHa)
            + np.einsum("...ij,...j->...i", dmu, HI)
            - 1j * k * np.einsum("...ij,jk,...kl,...l->...i", muI, ea, epsI, EI)
        )
        ve = (
            np.einsum("...ij,...j->...i", epsI, gradEa)
            + np.einsum("...ij,...j->...i", deps, EI)
            + 1j * k * np.einsum("...ij,jk,...kl,...l->...i", epsI, ea, muI, HI)
        )
        out_h = max(out_h, float(np.abs(_div(vh, h)).max()))
        out_e = max(out_e, float(np.abs(_div(ve, h)).max()))
    return out_h, out_e


@dataclass(frozen=True)
class ChangeOfVariablesReport:
    spacing: float
    input_residual: tuple
    curl_e: float
    curl_h: float

    @property
    def residual(self) -> float:
        return max(self.curl_e, self.curl_h)


def change_of_variables_residual(t: DiffeoMap, fields, materials, k: float, patch: CartesianPatch):
    """Push (E, H) and (eps, mu) through t and measure the transformed Maxwell residual.

    ``fields(x) -> (E, H)`` and ``materials(x) -> TensorPair`` are evaluated at
    preimage points; the patch is a Cartesian grid in the image space.  The
    input residual is measured on a Cartesian patch covering the bounding box
    of the preimage, with the same number of points.
    """
    y = patch.grid()
    h = patch.spacing
    x = t.inverse(y)
    E, H = fields(x)
    mat = materials(x)
    eps_x = np.broadcast_to(mat.epsilon, x.shape[:-1] + (3, 3))
    mu_x = np.broadcast_to(mat.mu, x.shape[:-1] + (3, 3))
    Ep = push_field(t, E, x)
    Hp = push_field(t, H, x)
    epsp = push_matrix(t, eps_x, x)
    mup = push_matrix(t, mu_x, x)
    ce, ch = maxwell_residual(Ep, Hp, epsp, mup, k, h)

    flat = x.reshape(-1, 3)
    lo, hi = flat.min(axis=0), flat.max(axis=0)
    x_patch = CartesianPatch(0.5 * (lo + hi), 0.5 * float(np.max(hi - lo)), patch.points_per_dim)
    xg = x_patch.grid()
    E0, H0 = fields(xg)
    m0 = materials(xg)
    e0 = np.broadcast_to(m0.epsilon, xg.shape[:-1] + (3, 3))
    u0 = np.broadcast_to(m0.mu, xg.shape[:-1] + (3, 3))
    inp = maxwell_residual(E0, H0, e0, u0, k, x_patch.spacing)
    return ChangeOfVariablesReport(h, inp, ce, ch)


# -- admissibility of general schemes -------------------------------------


def _sphere_samples(radius, count, rng):
    v = rng.normal(size=(count, 3))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


def _ball_samples(r_min, r_max, count, rng):
    d = _sphere_samples(1.0, count, rng)
    r = rng.uniform(r_min, r_max, size=count)
    return d * r[:, None]


def check_admissible(f: DiffeoMap, g: DiffeoMap, r2: float, r3: float, samples=200, seed=0, tol=1e-9):
    """Sampled check of the admissibility conditions on (F, G); returns r1 = |F^{-1}(r3 e)|.

    Conditions: (i) F = id on |x| = r2 and F maps the annulus r1 < |x| < r2 to
    r2 < |y| < r3 with nonvanishing Jacobian; (ii) G = id on |x| = r3 and is a
    diffeomorphism of the exterior of B_r3 onto B_r3 minus the origin; (iii) G o F
    extends to a diffeomorphism of B_r1 onto B_r3 fixing the origin.
    Raises AdmissibilityError naming the first violated condition.
    """
    rng = np.random.default_rng(seed)
    s2 = _sphere_samples(r2, samples, rng)
    dev = np.abs(f.forward(s2) - s2).max()
    if dev > tol * r2:
        raise AdmissibilityError("i", f"F differs from the identity on |x| = r2 by {dev:.3g}")
    s3 = _sphere_samples(r3, samples, rng)
    dev = np.abs(g.forward(s3) - s3).max()
    if dev > tol * r3:
        raise AdmissibilityError("ii", f"G differs from the identity on |x| = r3 by {dev:.3g}")
    pre = f.inverse(s3)
    r1s = np.linalg.norm(pre, axis=-1)
    r1 = float(np.mean(r1s))
    if np.ptp(r1s) > 1e-8 * r1 or not (0 < r1 < r2):
        raise AdmissibilityError("i", "F^{-1} does not map |y| = r3 onto a sphere inside B_r2")
    ann = _ball_samples(r1 * (1 + 1e-6), r2 * (1 - 1e-6), samples, rng)
    img = np.linalg.norm(f.forward(ann), axis=-1)
    if np.any(img <= r2) or np.any(img >= r3):
        raise AdmissibilityError("i", "F does not map the annulus r1<|x|<r2 into r2<|y|<r3")
    if np.any(np.abs(f.signed_det(ann)) < SINGULAR_TOL):
        raise AdmissibilityError("i", "F has a singular Jacobian in the annulus")
    ext = _ball_samples(r3 * (1 + 1e-6), 4 * r3, samples, rng)
    gim = np.linalg.norm(g.forward(ext), axis=-1)
    if np.any(gim >= r3):
        raise AdmissibilityError("ii", "G does not map the exterior of B_r3 into B_r3")
    gf = compose(g, f)
    core = _ball_samples(1e-3 * r1, r1 * (1 - 1e-6), samples, rng)
    cim = np.linalg.norm(gf.forward(core), axis=-1)
    if np.any(cim >= r3):
        raise AdmissibilityError("iii", "G o F does not map B_r1 into B_r3")
    if np.any(np.abs(gf.signed_det(core)) < SINGULAR_TOL):
        raise AdmissibilityError("iii", "G o F has a singular Jacobian in B_r1")
    near0 = gf.forward(np.array([[1e-9 * r1, 0.0, 0.0]]))
    if np.linalg.norm(near0) > 1e-6 * r3:
        raise AdmissibilityError("iii", "G o F does not extend continuously with value 0 at the origin")
    return r1
