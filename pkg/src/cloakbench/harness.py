"""Experiment harness: configs, delta sweeps, exponent fits, resonance profiles."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import media
from . import mie_solver as ms

log = logging.getLogger(__name__)

DEFAULT_DELTAS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5)
SWEEP_COLUMNS = ("delta", "misfit", "interior_norm", "jump_2r2", "data_functional", "stability_ratio")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    k: float = 1.0
    r2: float = 1.0
    ratio: float = 20.0
    object: dict = field(default_factory=lambda: {"kind": "vacuum"})
    source: dict = field(default_factory=lambda: {"kind": "plane_wave", "direction": [0, 0, 1], "polarization": [1, 0, 0]})
    deltas: tuple = DEFAULT_DELTAS
    shell: Optional[tuple] = None
    nmax: Optional[int] = None
    seed: int = 0
    source_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        if self.shell is not None:
            object.__setattr__(self, "shell", tuple(float(x) for x in self.shell))
        self.validate()

    @property
    def r3(self) -> float:
        return self.r2 * self.ratio

    @property
    def shell_bounds(self):
        return self.shell if self.shell is not None else (self.r3, 2 * self.r3)

    def validate(self):
        if self.k <= 0 or self.r2 <= 0:
            raise ConfigError("k and r2 must be positive")
        if self.ratio <= 2:
            raise ConfigError("ratio r3/r2 must exceed 2")
        d = np.asarray(self.deltas)
        if d.size == 0 or np.any(d <= 0) or np.any(np.diff(d) >= 0):
            raise ConfigError("deltas must be positive and strictly decreasing")
        a, b = self.shell_bounds
        if a < self.r3 * (1 - 1e-12) or b <= a:
            raise ConfigError("shell must satisfy r3 <= a < b")
        if self.nmax is not None and not 1 <= self.nmax <= ms.NMAX_CAP:
            raise ConfigError(f"nmax must lie in [1, {ms.NMAX_CAP}]")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"k", "r2", "ratio", "object", "source", "deltas", "shell", "nmax", "seed", "source_scale"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["deltas"] = list(self.deltas)
        out["shell"] = list(self.shell_bounds)
        return out


def make_object(cfg: ExperimentConfig) -> media.RadialProfile:
    spec = cfg.object
    kind = spec.get("kind", "vacuum")
    r2 = cfg.r2
    if kind == "vacuum":
        return media.RadialProfile.constant(r2, 2 * r2, 1.0, 1.0)
    if kind == "constant":
        return media.RadialProfile.constant(r2, 2 * r2, _cplx(spec["eps"]), _cplx(spec["mu"]))
    if kind == "piecewise":
        return media.RadialProfile.piecewise(
            [r2 * b for b in spec["breakpoints"]], [_cplx(e) for e in spec["eps"]], [_cplx(m) for m in spec["mu"]]
        )
    raise ConfigError(f"unknown object kind {kind!r}")


def _cplx(x):
    if isinstance(x, (list, tuple)):
        return complex(x[0], x[1])
    return complex(x)


def make_incident(cfg: ExperimentConfig) -> ms.IncidentSpec:
    spec = cfg.source
    kind = spec.get("kind", "plane_wave")
    R = cfg.shell_bounds[1]
    if kind == "plane_wave":
        pol = [_cplx(p) for p in spec.get("polarization", [1, 0, 0])]
        inc = ms.IncidentSpec.plane_wave(cfg.k, spec.get("direction", [0, 0, 1]), pol, nmax=cfg.nmax, radius=R)
    elif kind == "point_dipole":
        moment = [_cplx(p) for p in spec["moment"]]
        inc = ms.IncidentSpec.point_dipole(cfg.k, spec["position"], moment, nmax=cfg.nmax, radius=R)
    else:
        raise ConfigError(f"unknown source kind {kind!r}")
    return inc.scaled(cfg.source_scale) if cfg.source_scale != 1.0 else inc


def make_layout(cfg: ExperimentConfig, delta: float) -> media.MaterialLayout:
    return media.build_scheme(make_object(cfg), cfg.r2, cfg.r3, delta)


@dataclass(frozen=True)
class SweepRecord:
    delta: float
    misfit: float
    interior_norm: float
    jump_2r2: float
    data_functional: float
    stability_ratio: float
    jump_r3: float = 0.0
    trace_r3: float = 0.0
    max_cond: float = 1.0

    def row(self):
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


@dataclass(frozen=True)
class FitResult:
    status: str
    n_points: int
    gamma_hat: Optional[float] = None
    intercept: Optional[float] = None
    r_squared: Optional[float] = None
    jump_slope: Optional[float] = None
    jump_over_data_slope: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def fit_power_law(x, y):
    """Least-squares line through (log x, log y): (slope, intercept, r^2)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2


def fit_records(records) -> FitResult:
    if len(records) < 3:
        return FitResult("refused: fewer than 3 points", len(records))
    d = [r.delta for r in records]
    slope, icpt, r2 = fit_power_law(d, [r.misfit for r in records])
    jslope, _, _ = fit_power_law(d, [r.jump_2r2 for r in records])
    nslope, _, _ = fit_power_law(d, [r.jump_2r2 / r.data_functional for r in records])
    return FitResult("ok", len(records), slope, icpt, r2, jslope, nslope)


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: list
    fit: FitResult

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        write_sweep_csv(os.path.join(out_dir, "sweep.csv"), self.records)
        with open(os.path.join(out_dir, "fit.json"), "w") as fh:
            json.dump(self.fit.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def write_sweep_csv(path, records):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for rec in sorted(records, key=lambda r: -r.delta):
            fh.write(",".join("%.17g" % v for v in rec.row()) + "\n")


class SweepError(RuntimeError):
    def __init__(self, delta, cause):
        super().__init__(f"delta={delta:g}: {cause}")
        self.delta = delta
        self.cause = cause


def sweep_point(cfg: ExperimentConfig, delta: float, incident=None) -> SweepRecord:
    inc = incident if incident is not None else make_incident(cfg)
    layout = make_layout(cfg, delta)
    try:
        sols = ms.solve_all(layout, inc)
    except (ms.ResonanceError, ms.IntegrationError) as exc:
        raise SweepError(delta, exc) from exc
    free = ms.free_space_solutions(inc)
    a, b = cfg.shell_bounds
    r2, r3 = cfg.r2, cfg.r3
    misfit = ms.hcurl_shell_misfit(sols, free, a, b)
    interior = ms.l2_pair_norm(ms.region_norms(sols, 2 * r2, r3))
    rs = ms.removed_singularity_field(sols, layout.F, layout.G)
    data = ms.data_functional(sols, inc, delta, b, r3=r3)
    full = ms.hcurl_norm(ms.region_norms(sols, 0.0, b))
    stability = full**2 / data**2
    cond = max(s.radial.cond for s in sols) if sols else 1.0
    return SweepRecord(delta, misfit, interior, rs.jump_2r2, data, stability, rs.jump_r3, rs.trace_r3, cond)


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    inc = make_incident(cfg)
    records = [sweep_point(cfg, d, inc) for d in sorted(cfg.deltas, reverse=True)]
    return SweepResult(cfg, records, fit_records(records))


def control_misfit(cfg: ExperimentConfig, keep_core: bool = False, delta: Optional[float] = None) -> float:
    """Misfit of the uncloaked control (middle layer, and unless keep_core the core, set to vacuum)."""
    inc = make_incident(cfg)
    layout = media.control_layout(make_layout(cfg, delta if delta is not None else cfg.deltas[-1]), keep_core)
    sols = ms.solve_all(layout, inc)
    return ms.hcurl_shell_misfit(sols, ms.free_space_solutions(inc), *cfg.shell_bounds)


REGIONS = ("core", "middle", "object_shell", "outer_annulus", "exterior_shell")


def region_bounds(cfg: ExperimentConfig):
    r2, r3 = cfg.r2, cfg.r3
    r1 = r2 * r2 / r3
    a, b = cfg.shell_bounds
    return {
        "core": (0.0, r1),
        "middle": (r1, r2),
        "object_shell": (r2, 2 * r2),
        "outer_annulus": (2 * r2, r3),
        "exterior_shell": (a, b),
    }


def resonance_profile(cfg: ExperimentConfig, delta: float, layout=None) -> dict:
    """L^2 pair norms of (E, H) over the five regions at one delta."""
    inc = make_incident(cfg)
    layout = layout if layout is not None else make_layout(cfg, delta)
    sols = ms.solve_all(layout, inc)
    return {name: ms.l2_pair_norm(ms.region_norms(sols, lo, hi)) for name, (lo, hi) in region_bounds(cfg).items()}


def resonance_table(cfg: ExperimentConfig):
    """Profiles for every delta plus per-region growth flags (largest delta vs smallest)."""
    rows = [(d, resonance_profile(cfg, d)) for d in sorted(cfg.deltas, reverse=True)]
    first, last = rows[0][1], rows[-1][1]
    growth = {name: bool(last[name] > 2 * first[name]) for name in REGIONS}
    return rows, growth


def ratio_scan(cfg: ExperimentConfig, ratios):
    out = []
    for ell in ratios:
        res = run_sweep(replace(cfg, ratio=float(ell), shell=None))
        out.append((float(ell), res.fit))
    return out


def mode_jump_table(cfg: ExperimentConfig, deltas=None, nmax: int = 6):
    """Rows (delta, n, pol, |s|, jump on |x| = 2 r2) per radial family.

    Separates the per-mode regimes that the aggregate jump fit mixes: each
    mode stays on a resonant plateau until delta drops below a mode-dependent
    crossover, after which both |s| and the jump fall linearly in delta.
    """
    obj = make_object(cfg)
    r2 = cfg.r2
    rows = []
    for d in deltas if deltas is not None else cfg.deltas:
        layout = media.build_scheme(obj, r2, cfg.r3, d)
        for n in range(1, nmax + 1):
            for pol in ms.POLARIZATIONS:
                rf = ms.solve_radial(layout, n, pol, cfg.k)
                uo, vo = rf.evaluate(np.array([2 * r2]))
                ui, vi = rf.evaluate(np.array([r2 / 2]))
                wu, wv = ms.jump_weights(n, pol)
                jump = float(np.sqrt(wu * abs(uo[0] - ui[0]) ** 2 + wv * abs(vo[0] - vi[0]) ** 2))
                rows.append((float(d), n, pol, abs(rf.s), jump))
    return rows
