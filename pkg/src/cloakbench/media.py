"""Layered complementary-media devices.

A layout is a list of concentric layers.  Isotropic layers carry scalar
radial functions ``eps(r)``, ``mu(r)`` (what the mode solver needs); every
layer also exposes full tensors at Cartesian points for the push-forward
algebra.  Region labels: 'core' (B_r1), 'middle' (B_r2 \\ B_r1), 'object'
(B_r3 \\ B_r2, the object extended by vacuum) and 'exterior'.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import geomap
from .geomap import TensorPair

EYE = np.eye(3)


class EllipticityError(ValueError):
    pass


def _const(value):
    value = complex(value)

    def fn(r):
        return np.full(np.shape(r), value, dtype=complex)

    fn.constant_value = value
    return fn


@dataclass(frozen=True)
class Layer:
    r_min: float
    r_max: float
    region: str
    eps: Optional[Callable] = None
    mu: Optional[Callable] = None
    eps_tensor: Optional[Callable] = None
    mu_tensor: Optional[Callable] = None

    @property
    def isotropic(self) -> bool:
        return self.eps is not None and self.mu is not None

    @property
    def constant(self) -> bool:
        return self.isotropic and hasattr(self.eps, "constant_value") and hasattr(self.mu, "constant_value")

    def tensors(self, x) -> TensorPair:
        x = np.asarray(x, dtype=float)
        if self.eps_tensor is not None:
            return TensorPair(self.eps_tensor(x), self.mu_tensor(x))
        r = np.linalg.norm(x, axis=-1)
        return TensorPair(np.asarray(self.eps(r))[..., None, None] * EYE, np.asarray(self.mu(r))[..., None, None] * EYE)


@dataclass(frozen=True)
class RadialProfile:
    """Piecewise isotropic radial medium: layer i is [breakpoints[i], breakpoints[i+1]]."""

    breakpoints: tuple
    eps: tuple
    mu: tuple

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        if b[0] < 0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be nonnegative and strictly increasing")
        if len(self.eps) != len(b) - 1 or len(self.mu) != len(b) - 1:
            raise ValueError("one eps and one mu function per interval")

    @classmethod
    def constant(cls, r_min, r_max, eps, mu):
        return cls((float(r_min), float(r_max)), (_const(eps),), (_const(mu),))

    @classmethod
    def piecewise(cls, breakpoints, eps_values, mu_values):
        return cls(
            tuple(float(b) for b in breakpoints),
            tuple(_const(e) for e in eps_values),
            tuple(_const(m) for m in mu_values),
        )

    @property
    def r_min(self):
        return self.breakpoints[0]

    @property
    def r_max(self):
        return self.breakpoints[-1]

    def layers(self, region="object"):
        return [
            Layer(self.breakpoints[i], self.breakpoints[i + 1], region, self.eps[i], self.mu[i])
            for i in range(len(self.eps))
        ]

    def check_elliptic(self, bound: float, samples: int = 33):
        """Real parts must lie in [1/bound, bound]; raises EllipticityError otherwise."""
        for i, (fe, fm) in enumerate(zip(self.eps, self.mu)):
            r = np.linspace(self.breakpoints[i], self.breakpoints[i + 1], samples)
            for name, f in (("eps", fe), ("mu", fm)):
                re = np.real(f(r))
                if np.any(re < 1.0 / bound) or np.any(re > bound):
                    raise EllipticityError(
                        f"{name} on [{self.breakpoints[i]:g}, {self.breakpoints[i+1]:g}] leaves [1/{bound:g}, {bound:g}]"
                    )


def _layer_at(layers, r):
    for lay in layers:
        if lay.r_min <= r <= lay.r_max:
            return lay
    raise ValueError(f"radius {r} outside the layout")


@dataclass(frozen=True)
class MaterialLayout:
    radii: tuple
    delta: float
    layers: tuple
    provenance: str
    F: Optional[geomap.DiffeoMap] = field(default=None, compare=False)
    G: Optional[geomap.DiffeoMap] = field(default=None, compare=False)
    extended_object: Optional[Callable] = field(default=None, compare=False)

    @property
    def r1(self):
        return self.radii[0]

    @property
    def r2(self):
        return self.radii[1]

    @property
    def r3(self):
        return self.radii[2]

    @property
    def isotropic(self) -> bool:
        return all(lay.isotropic for lay in self.layers)

    @property
    def outer_radius(self):
        return self.layers[-1].r_max

    def region_of(self, r):
        if r > self.outer_radius:
            return "exterior"
        return _layer_at(self.layers, r).region

    def tensors(self, x) -> TensorPair:
        """Material tensors at Cartesian points (exterior is vacuum)."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 3)
        r = np.linalg.norm(flat, axis=-1)
        eps = np.broadcast_to(EYE, flat.shape[:-1] + (3, 3)).astype(complex)
        mu = eps.copy()
        for lay in self.layers:
            sel = (r >= lay.r_min) & (r < lay.r_max)
            if lay is self.layers[-1]:
                sel |= r == lay.r_max
            if np.any(sel):
                tp = lay.tensors(flat[sel])
                eps[sel] = tp.epsilon
                mu[sel] = tp.mu
        return TensorPair(eps.reshape(x.shape + (3,)), mu.reshape(x.shape + (3,)))

    def scalar(self, r):
        """(eps, mu) at radius r for isotropic layouts."""
        if r > self.outer_radius:
            return 1.0 + 0j, 1.0 + 0j
        lay = _layer_at(self.layers, r)
        return complex(lay.eps(np.asarray(r))), complex(lay.mu(np.asarray(r)))

    def to_json(self) -> str:
        return json.dumps(layout_record(self), indent=2)


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


def layout_record(layout: MaterialLayout, profile_samples: int = 9) -> dict:
    """JSON-ready description.

    Constant isotropic layers store eps/mu as [re, im]; radially varying
    layers store the value at the geometric midpoint plus a sampled profile.
    Tensor-only layers store the matrices at a point on the x-axis.
    """
    regions = []
    for lay in layout.layers:
        rec = {"r_min": lay.r_min, "r_max": lay.r_max, "region": lay.region}
        lo = max(lay.r_min, 1e-12 * lay.r_max)
        mid = np.sqrt(lo * lay.r_max)
        if lay.isotropic:
            rec["eps"] = _pair(lay.eps(np.asarray(mid)))
            rec["mu"] = _pair(lay.mu(np.asarray(mid)))
            if not lay.constant:
                rs = np.geomspace(lo, lay.r_max, profile_samples)
                rec["profile"] = {
                    "r": rs.tolist(),
                    "eps": [_pair(v) for v in lay.eps(rs)],
                    "mu": [_pair(v) for v in lay.mu(rs)],
                }
        else:
            tp = lay.tensors(np.array([mid, 0.0, 0.0]))
            rec["eps"] = [[_pair(v) for v in row] for row in tp.epsilon]
            rec["mu"] = [[_pair(v) for v in row] for row in tp.mu]
        regions.append(rec)
    return {
        "radii": list(layout.radii),
        "delta": layout.delta,
        "provenance": layout.provenance,
        "regions": regions,
    }


def _extended_object_layers(obj: RadialProfile, r2, r3):
    layers = obj.layers("object")
    if obj.r_max < 2 * r2:
        layers.append(Layer(obj.r_max, 2 * r2, "object", _const(1), _const(1)))
    layers.append(Layer(2 * r2, r3, "object", _const(1), _const(1)))
    return layers


def _extended_scalar(obj_layers, r2, r3):
    """Vectorised (eps~, mu~) on [r2, r3] from the extended object layers."""
    breaks = np.array([lay.r_min for lay in obj_layers] + [obj_layers[-1].r_max])

    def pick(which):
        def fn(r):
            r = np.asarray(r, dtype=float)
            idx = np.clip(np.searchsorted(breaks, r, side="right") - 1, 0, len(obj_layers) - 1)
            out = np.empty(r.shape, dtype=complex)
            for i, lay in enumerate(obj_layers):
                sel = idx == i
                if np.any(sel):
                    out[sel] = getattr(lay, which)(r[sel])
            return out

        return fn

    return pick("eps"), pick("mu")


def _validate_object(obj: RadialProfile, r2, r3, ellipticity):
    if not r2 > 0 or not r3 > 2 * r2:
        raise ValueError("need r3 > 2 r2 > 0")
    if obj.r_min != r2 or obj.r_max > 2 * r2 * (1 + 1e-14):
        raise ValueError("object profile must start at r2 and end at or before 2 r2")
    if ellipticity is not None:
        obj.check_elliptic(ellipticity)


def build_scheme(obj: RadialProfile, r2: float, r3: float, delta: float, ellipticity: Optional[float] = None):
    """Kelvin-based device: core (r3^2/r2^2) I, middle F^{-1}_* (eps~, mu~) + i delta I.

    ``obj`` lives on [r2, 2 r2] (or a subinterval starting at r2) and is
    extended by vacuum up to r3.  The middle layer is isotropic:
    eps(rho) = -eps~(r2^2/rho) r2^2/rho^2 + i delta.
    """
    _validate_object(obj, r2, r3, ellipticity)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    r1 = r2 * r2 / r3
    ext = _extended_object_layers(obj, r2, r3)
    c = (r3 / r2) ** 2
    layers = [Layer(0.0, r1, "core", _const(c), _const(c))]
    middle = []
    for lay in reversed(ext):
        lo, hi = r2 * r2 / lay.r_max, r2 * r2 / lay.r_min
        middle.append(Layer(lo, hi, "middle", _mirror(lay.eps, r2, delta), _mirror(lay.mu, r2, delta)))
    layers += middle + ext
    F = geomap.kelvin_map(r2)
    G = geomap.kelvin_map(r3)
    eps_t, mu_t = _extended_scalar(ext, r2, r3)
    return MaterialLayout((r1, r2, r3), float(delta), tuple(layers), "kelvin", F, G, (eps_t, mu_t))


def _mirror(fn, r2, delta):
    def g(rho):
        rho = np.asarray(rho, dtype=float)
        x = r2 * r2 / rho
        return -fn(x) * (r2 * r2) / rho**2 + 1j * delta

    return g


def build_general_scheme(obj: RadialProfile, r2, r3, delta, F: geomap.DiffeoMap, G: geomap.DiffeoMap,
                         ellipticity: Optional[float] = None, seed: int = 0):
    """Device for arbitrary admissible (F, G); tensor-valued in the core and middle layer."""
    _validate_object(obj, r2, r3, ellipticity)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    r1 = geomap.check_admissible(F, G, r2, r3, seed=seed)
    ext = _extended_object_layers(obj, r2, r3)
    eps_s, mu_s = _extended_scalar(ext, r2, r3)
    Finv = geomap.inverse(F)
    GFinv = geomap.inverse(geomap.compose(G, F))

    def ext_tensor(x):
        r = np.linalg.norm(x, axis=-1)
        return TensorPair(eps_s(r)[..., None, None] * EYE, mu_s(r)[..., None, None] * EYE)

    def middle_eps(y):
        return geomap.push_tensor(Finv, ext_tensor, y).epsilon + 1j * delta * EYE

    def middle_mu(y):
        return geomap.push_tensor(Finv, ext_tensor, y).mu + 1j * delta * EYE

    unit = TensorPair(EYE, EYE)

    def core_eps(y):
        return geomap.push_tensor(GFinv, unit, y).epsilon

    def core_mu(y):
        return geomap.push_tensor(GFinv, unit, y).mu

    layers = [
        Layer(0.0, r1, "core", eps_tensor=core_eps, mu_tensor=core_mu),
        Layer(r1, r2, "middle", eps_tensor=middle_eps, mu_tensor=middle_mu),
    ] + ext
    return MaterialLayout((r1, r2, r3), float(delta), tuple(layers), "general", F, G, (eps_s, mu_s))


def vacuum_layout(radii=(0.05, 1.0, 20.0), interfaces=None):
    """All-vacuum layout; ``interfaces`` adds artificial breakpoints."""
    cuts = sorted(set([0.0] + list(interfaces if interfaces is not None else radii)))
    layers = [Layer(a, b, "vacuum", _const(1), _const(1)) for a, b in zip(cuts[:-1], cuts[1:])]
    return MaterialLayout(tuple(radii), 0.0, tuple(layers), "vacuum")


def sphere_layout(radius, eps, mu=1.0):
    """Homogeneous sphere in vacuum (core-only)."""
    lay = Layer(0.0, radius, "core", _const(eps), _const(mu))
    return MaterialLayout((radius, radius, radius), 0.0, (lay,), "sphere")


def control_layout(layout: MaterialLayout, keep_core: bool = False):
    """Uncloaked control: middle layer (and optionally the core) replaced by vacuum."""
    layers = []
    for lay in layout.layers:
        if lay.region == "middle" or (lay.region == "core" and not keep_core):
            layers.append(Layer(lay.r_min, lay.r_max, lay.region, _const(1), _const(1)))
        else:
            layers.append(lay)
    return replace(layout, layers=tuple(layers), provenance=layout.provenance + "+control")


def with_delta(layout: MaterialLayout, delta: float) -> MaterialLayout:
    """Same device with a different loss (Kelvin scheme only)."""
    if layout.provenance != "kelvin":
        raise ValueError("with_delta supports Kelvin-scheme layouts")
    layers = []
    for lay in layout.layers:
        if lay.region == "middle":
            layers.append(replace(lay, eps=_shift(lay.eps, layout.delta, delta), mu=_shift(lay.mu, layout.delta, delta)))
        else:
            layers.append(lay)
    return replace(layout, delta=float(delta), layers=tuple(layers))


def _shift(fn, old, new):
    def g(r):
        return fn(r) + 1j * (new - old)

    return g


@dataclass(frozen=True)
class IdentityReport:
    max_deviation: float
    samples: int
    degenerate: bool
    core_deviation: float = 0.0
    middle_deviation: float = 0.0


def verify_key_identity(layout: MaterialLayout, sample_count: int = 200, seed: int = 0) -> IdentityReport:
    """Check (G o F)_* core = I on B_r3 and F_* middle = extended object on B_r3 \\ B_r2.

    Deviations are Frobenius norms of the tensor differences, maximised over
    random samples.  With delta > 0 the middle check picks up the pushed-forward
    loss term, so the deviation grows with delta.
    """
    if sample_count <= 0:
        return IdentityReport(0.0, 0, True)
    if layout.F is None or layout.G is None:
        raise ValueError("layout carries no maps")
    rng = np.random.default_rng(seed)
    r1, r2, r3 = layout.radii
    dirs = rng.normal(size=(sample_count, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    core_pts = dirs * rng.uniform(0.02 * r1, r1 * (1 - 1e-9), sample_count)[:, None]
    GF = geomap.compose(layout.G, layout.F)
    core = layout.tensors(core_pts)
    dev_core = 0.0
    for a in (core.epsilon, core.mu):
        pushed = geomap.push_matrix(GF, a, core_pts)
        dev_core = max(dev_core, float(np.linalg.norm(pushed - EYE, axis=(-2, -1)).max()))

    mid_pts = dirs * rng.uniform(r1 * (1 + 1e-9), r2 * (1 - 1e-9), sample_count)[:, None]
    mid = layout.tensors(mid_pts)
    y = layout.F.forward(mid_pts)
    ry = np.linalg.norm(y, axis=-1)
    eps_s, mu_s = layout.extended_object
    dev_mid = 0.0
    for a, ref in ((mid.epsilon, eps_s(ry)), (mid.mu, mu_s(ry))):
        pushed = geomap.push_matrix(layout.F, a, mid_pts)
        dev_mid = max(dev_mid, float(np.linalg.norm(pushed - ref[:, None, None] * EYE, axis=(-2, -1)).max()))
    return IdentityReport(max(dev_core, dev_mid), sample_count, False, dev_core, dev_mid)
