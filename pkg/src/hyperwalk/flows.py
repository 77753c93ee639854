"""Prevector fields on the plane and their Euler walks.

A prevector field is a self-map ``F(z) = z + delta(z)`` of the complex plane.
With ``delta = mesh * V`` it is one explicit Euler step for the vector field
``V``; iterating it ``N`` times gives the walk at time ``N * mesh``.  The
mesh plays the part of an infinitesimal: shadows are obtained by driving it
through a decreasing sequence and extrapolating, and adequality of two walks
is certified by showing their relative deviation shrinks with the scale.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "RESIDUAL_THRESHOLD",
    "AdequalityReport",
    "DeviationResult",
    "PowerLawFit",
    "PrevectorField",
    "RichardsonResult",
    "ShadowResult",
    "SweepRow",
    "Trajectory",
    "VectorField",
    "WalkTerminated",
    "adequality_sweep",
    "flow_shadow",
    "fit_power_law",
    "gronwall_envelope",
    "measure_discrepancy",
    "richardson",
    "steps_for",
    "walk",
    "walk_deviation",
]

# Fits with RMS log-residual above this are not trusted.
RESIDUAL_THRESHOLD = 0.2
# Walk samples kept by default.
MAX_DEFAULT_SAMPLES = 10_000


class WalkTerminated(RuntimeError):
    """A walk left its domain or blew up before reaching the requested step."""


@dataclass(frozen=True)
class VectorField:
    """A classical planar field with a declared Lipschitz constant."""

    evaluator: Callable[[complex], complex]
    lipschitz_K: float
    domain_radius: float | None = None
    name: str = "V"

    def __post_init__(self) -> None:
        if not self.lipschitz_K >= 0:
            raise ValueError("lipschitz_K must be non-negative")
        if self.domain_radius is not None and not self.domain_radius > 0:
            raise ValueError("domain_radius must be positive")

    def __call__(self, z: complex) -> complex:
        return self.evaluator(z)

    def lipschitz_ratio(self, rng: np.random.Generator, radius: float, samples: int = 1000) -> float:
        """Largest ``|V(z)-V(w)| / |z-w|`` over random pairs in the disk of ``radius``."""
        r = radius * np.sqrt(rng.uniform(0, 1, (2, samples)))
        th = rng.uniform(0, 2 * np.pi, (2, samples))
        pts = r * np.exp(1j * th)
        worst = 0.0
        for z, w in zip(pts[0], pts[1]):
            if z == w:
                continue
            worst = max(worst, abs(self(complex(z)) - self(complex(w))) / abs(z - w))
        return worst


@dataclass(frozen=True)
class PrevectorField:
    """``F(z) = z + delta(z)``; either ``mesh * V`` or an explicit map.

    For the explicit-map kind ``lipschitz_K`` bounds ``|delta(z) - delta(w)|``
    by ``lipschitz_K * mesh * |z - w|``.
    """

    mesh: float
    field: VectorField | None = None
    exact_map: Callable[[complex], complex] | None = None
    map_lipschitz_K: float | None = None
    domain_radius: float | None = None
    name: str = "F"

    def __post_init__(self) -> None:
        if not self.mesh > 0:
            raise ValueError(f"mesh must be positive, got {self.mesh}")
        if (self.field is None) == (self.exact_map is None):
            raise ValueError("give exactly one of field or exact_map")

    @classmethod
    def from_field(cls, field: VectorField, mesh: float, name: str | None = None) -> PrevectorField:
        return cls(mesh=mesh, field=field, domain_radius=field.domain_radius, name=name or field.name)

    @classmethod
    def from_map(cls, fn: Callable[[complex], complex], mesh: float, lipschitz_K: float,
                 domain_radius: float | None = None, name: str = "F") -> PrevectorField:
        return cls(mesh=mesh, exact_map=fn, map_lipschitz_K=lipschitz_K,
                   domain_radius=domain_radius, name=name)

    @property
    def kind(self) -> str:
        return "displacement" if self.field is not None else "exact_map"

    @property
    def lipschitz_K(self) -> float:
        if self.field is not None:
            return self.field.lipschitz_K
        return self.map_lipschitz_K if self.map_lipschitz_K is not None else math.inf

    def displacement(self, z: complex) -> complex:
        if self.field is not None:
            return self.mesh * self.field.evaluator(z)
        return self.exact_map(z) - z

    def stepper(self) -> Callable[[complex], complex]:
        """A bare closure for ``F``; used in the hot loops."""
        if self.field is not None:
            lam = self.mesh
            V = self.field.evaluator
            return lambda z: z + lam * V(z)
        return self.exact_map

    def __call__(self, z: complex) -> complex:
        return self.stepper()(z)


def steps_for(t: float, mesh: float) -> int:
    """``floor(t / mesh)``, forgiving a few ulps of division error."""
    q = t / mesh
    n = math.floor(q)
    if q - n > 1 - 1e-9:
        n += 1
    return int(n)


def _radius(F: PrevectorField, z0: complex, override: float | None = None) -> float:
    if override is not None:
        return override
    if F.domain_radius is not None:
        return F.domain_radius
    return 10 * abs(z0) + 1


@dataclass(frozen=True)
class Trajectory:
    mesh: float
    z0: complex
    n: np.ndarray
    z: np.ndarray
    record_stride: int
    steps_requested: int
    terminated_early: bool = False
    reason: str | None = None

    def __post_init__(self) -> None:
        self.n.setflags(write=False)
        self.z.setflags(write=False)

    @property
    def t(self) -> np.ndarray:
        return self.n * self.mesh

    @property
    def final_state(self) -> complex:
        return complex(self.z[-1])

    @property
    def final_step(self) -> int:
        return int(self.n[-1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            write_trajectory_csv(self, fh)


def write_trajectory_csv(traj: Trajectory, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "t", "re", "im"])
    for n, t, z in zip(traj.n, traj.t, traj.z):
        w.writerow([int(n), f"{t:.17g}", f"{z.real:.17g}", f"{z.imag:.17g}"])


def walk(F: PrevectorField, z0: complex, steps: int, record_stride: int | None = None,
         domain_radius: float | None = None) -> Trajectory:
    """Iterate ``F`` ``steps`` times from ``z0``.

    Samples are kept every ``record_stride`` steps and at the last step.  The
    walk stops early, without raising, if the state leaves the domain disk or
    stops being finite.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    z0 = complex(z0)
    R = _radius(F, z0, domain_radius)
    if not abs(z0) <= R:
        raise ValueError(f"initial state {z0} outside domain radius {R}")
    stride = record_stride or max(1, steps // MAX_DEFAULT_SAMPLES)
    if stride < 1:
        raise ValueError("record_stride must be positive")

    step = F.stepper()
    ns = [0]
    zs = [z0]
    z = z0
    reason = None
    for n in range(1, steps + 1):
        z = step(z)
        if not abs(z) <= R:
            if math.isfinite(z.real) and math.isfinite(z.imag):
                reason = f"left domain |z| > {R:g} at step {n}"
                ns.append(n)
                zs.append(z)
            else:
                reason = f"numerical blowup at step {n}"
            break
        if n % stride == 0 or n == steps:
            ns.append(n)
            zs.append(z)
    return Trajectory(
        mesh=F.mesh, z0=z0, n=np.array(ns, dtype=np.int64), z=np.array(zs, dtype=complex),
        record_stride=stride, steps_requested=steps,
        terminated_early=reason is not None, reason=reason,
    )


@dataclass(frozen=True)
class RichardsonResult:
    """First-order Richardson extrapolation over the last three meshes.

    ``verdict`` is ``"resolved"`` (differences shrink; ``order`` is the
    observed convergence order), ``"exact"`` (values agree to rounding, so the
    order is infinite) or ``"shadow not resolved"`` (``value`` is ``None``).
    """

    value: complex | None
    order: float | None
    verdict: str
    meshes: tuple[float, ...]
    values: tuple[complex, ...]


def richardson(meshes: Sequence[float], values: Sequence[complex], noise_floor: float = 1e-12) -> RichardsonResult:
    if len(meshes) != len(values) or len(meshes) < 3:
        raise ValueError("need at least three (mesh, value) pairs")
    m = [float(x) for x in meshes]
    if any(b >= a for a, b in zip(m, m[1:])):
        raise ValueError("meshes must be strictly decreasing")
    l1, l2, l3 = m[-3:]
    v1, v2, v3 = values[-3:]
    d1, d2 = abs(v1 - v2), abs(v2 - v3)
    floor = noise_floor * max(1.0, abs(v3))
    args = (tuple(m), tuple(values))
    if d1 <= floor and d2 <= floor:
        return RichardsonResult(v3, math.inf, "exact", *args)
    if not d2 < d1 or d2 == 0:
        return RichardsonResult(None, None, "shadow not resolved", *args)
    ratio = d1 / d2

    def mismatch(p: float) -> float:
        return (l1 ** p - l2 ** p) / (l2 ** p - l3 ** p) - ratio

    try:
        order = brentq(mismatch, 1e-3, 20.0)
    except ValueError:
        return RichardsonResult(None, None, "shadow not resolved", *args)
    value = (l2 * v3 - l3 * v2) / (l2 - l3)
    return RichardsonResult(value, order, "resolved", *args)


@dataclass(frozen=True)
class ShadowResult:
    value: complex | None
    order: float | None
    verdict: str
    meshes: tuple[float, ...]
    values: tuple[complex, ...]
    steps: tuple[int, ...]


def flow_shadow(builder: Callable[[float], PrevectorField], z0: complex, t: float,
                meshes: Sequence[float]) -> ShadowResult:
    """Standard part of ``F_t(z0)`` estimated from walks at decreasing meshes."""
    z0 = complex(z0)
    if len(meshes) < 3:
        raise ValueError("need at least three meshes")
    if t == 0:
        return ShadowResult(z0, math.inf, "exact", tuple(meshes), (z0,) * len(meshes), (0,) * len(meshes))
    if t < 0:
        raise ValueError("t must be non-negative")
    vals, steps = [], []
    for lam in meshes:
        if lam >= t:
            raise ValueError(f"mesh not smaller than horizon ({lam} >= {t})")
        N = steps_for(t, lam)
        traj = walk(builder(lam), z0, N, record_stride=max(N, 1))
        if traj.terminated_early:
            raise WalkTerminated(f"mesh {lam}: {traj.reason}")
        vals.append(traj.final_state)
        steps.append(N)
    rr = richardson(meshes, vals)
    return ShadowResult(rr.value, rr.order, rr.verdict, rr.meshes, rr.values, tuple(steps))


@dataclass(frozen=True)
class DeviationResult:
    """Lockstep comparison of two walks sharing one mesh."""

    mesh: float
    steps: int
    sup_abs: float
    sup_rel: float
    n: np.ndarray
    deviation: np.ndarray
    max_modulus: float
    truncated: bool = False
    reason: str | None = None

    @property
    def t_final(self) -> float:
        return self.steps * self.mesh


def walk_deviation(F: PrevectorField, G: PrevectorField, z0: complex, t_final: float,
                   record_stride: int | None = None, domain_radius: float | None = None) -> DeviationResult:
    """Sup over ``n <= floor(t_final/mesh)`` of ``|F^n(z0) - G^n(z0)|``.

    The sup is taken over every step; ``record_stride`` only thins the
    returned deviation profile.  The relative figure divides by ``|z0|``.
    """
    if F.mesh != G.mesh:
        raise ValueError(f"lockstep comparison needs one mesh, got {F.mesh} and {G.mesh}")
    z0 = complex(z0)
    if z0 == 0:
        raise ValueError("z0 must be nonzero for a relative deviation")
    N = steps_for(t_final, F.mesh)
    R = max(_radius(F, z0, domain_radius), _radius(G, z0, domain_radius))
    stride = record_stride or max(1, N // MAX_DEFAULT_SAMPLES)
    f, g = F.stepper(), G.stepper()
    zf = zg = z0
    sup = 0.0
    top = abs(z0)
    ns, devs = [0], [0.0]
    reason = None
    done = 0
    for n in range(1, N + 1):
        zf = f(zf)
        zg = g(zg)
        mf, mg = abs(zf), abs(zg)
        if not (mf <= R and mg <= R):
            reason = f"walk left domain or blew up at step {n}"
            break
        d = abs(zf - zg)
        if d > sup:
            sup = d
        if mf > top:
            top = mf
        if mg > top:
            top = mg
        done = n
        if n % stride == 0 or n == N:
            ns.append(n)
            devs.append(d)
    return DeviationResult(
        mesh=F.mesh, steps=done, sup_abs=sup, sup_rel=sup / abs(z0),
        n=np.array(ns, dtype=np.int64), deviation=np.array(devs), max_modulus=top,
        truncated=reason is not None, reason=reason,
    )


def gronwall_envelope(eta, K: float, t):
    """Discrete Gronwall bound ``(eta/K) * (exp(K t) - 1)``.

    Bounds ``|F_t(z) - G_t(z)|`` when ``|delta_F - delta_G| <= eta * mesh``
    along the walk and ``delta_G`` is ``K * mesh``-Lipschitz.  ``K = 0``
    gives the limit ``eta * t``.
    """
    eta_a = np.asarray(eta, dtype=float)
    t_a = np.asarray(t, dtype=float)
    if np.any(eta_a < 0) or np.any(t_a < 0) or K < 0:
        raise ValueError("eta, K and t must be non-negative")
    if K == 0:
        out = eta_a * t_a
    else:
        out = eta_a * np.expm1(K * t_a) / K
    return float(out) if out.ndim == 0 else out


def measure_discrepancy(F: PrevectorField, G: PrevectorField, radius: float,
                        n_radii: int = 64, n_angles: int = 256) -> float:
    """``sup |delta_F(z) - delta_G(z)| / mesh`` over a polar grid of the closed disk."""
    if F.mesh != G.mesh:
        raise ValueError("fields must share a mesh")
    worst = abs(F.displacement(0j) - G.displacement(0j))
    for r in np.linspace(0, radius, n_radii + 1)[1:]:
        for th in np.linspace(0, 2 * np.pi, n_angles, endpoint=False):
            z = complex(r * math.cos(th), r * math.sin(th))
            worst = max(worst, abs(F.displacement(z) - G.displacement(z)))
    return worst / F.mesh


@dataclass(frozen=True)
class PowerLawFit:
    """``deviation ~ prefactor * scale**exponent`` fitted in log space."""

    exponent: float | None
    prefactor: float | None
    residual: float | None
    n_used: int
    note: str = ""

    @property
    def conclusive(self) -> bool:
        return self.exponent is not None and self.residual is not None and self.residual <= RESIDUAL_THRESHOLD


def fit_power_law(scales: Sequence[float], deviations: Sequence[float]) -> PowerLawFit:
    s = np.asarray(scales, dtype=float)
    d = np.asarray(deviations, dtype=float)
    if s.shape != d.shape:
        raise ValueError("scales and deviations differ in length")
    if np.any(s <= 0):
        raise ValueError("scales must be positive")
    if np.any(np.diff(s) >= 0):
        raise ValueError("scales must be strictly decreasing")
    if np.any(d < 0):
        raise ValueError("deviations must be non-negative")
    keep = d > 0
    note = "" if keep.all() else f"excluded {int((~keep).sum())} zero deviation(s)"
    if keep.sum() < 3:
        return PowerLawFit(None, None, None, int(keep.sum()), (note + "; " if note else "") + "fewer than 3 usable points")
    x, y = np.log(s[keep]), np.log(d[keep])
    p, logc = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (logc + p * x)) ** 2)))
    return PowerLawFit(float(p), float(np.exp(logc)), resid, int(keep.sum()), note)


@dataclass(frozen=True)
class SweepRow:
    scale: float
    sup_abs: float
    sup_rel: float
    eta: float
    lipschitz_K: float
    envelope: float
    violations: int
    truncated: bool = False

    def record(self) -> dict:
        return {"scale": self.scale, "sup_abs": self.sup_abs, "sup_rel": self.sup_rel,
                "eta": self.eta, "lipschitz_K": self.lipschitz_K, "envelope": self.envelope,
                "violations": self.violations, "truncated": self.truncated}


@dataclass(frozen=True)
class AdequalityReport:
    """Deviation of two walks across a sweep of mesh or amplitude.

    ``exponent`` is only set when the fit had at least three points and an
    RMS log residual at most :data:`RESIDUAL_THRESHOLD`.
    """

    parameter: str
    rows: tuple[SweepRow, ...]
    fit: PowerLawFit
    verdict: str
    label: str = ""

    @property
    def values(self) -> list[float]:
        return [r.scale for r in self.rows]

    @property
    def exponent(self) -> float | None:
        return self.fit.exponent if self.fit.conclusive else None

    @property
    def violations(self) -> int:
        return sum(r.violations for r in self.rows)

    def summary(self) -> dict:
        return {"exponent": self.exponent, "prefactor": self.fit.prefactor if self.fit.conclusive else None,
                "residual": self.fit.residual, "verdict": self.verdict}

    def to_json(self) -> dict:
        return {"label": self.label, "parameter": self.parameter,
                "rows": [r.record() for r in self.rows], **self.summary(),
                "gronwall_violations": self.violations}


def _verdict(fit: PowerLawFit, rows: Sequence[SweepRow]) -> str:
    if rows and all(r.sup_abs == 0 for r in rows):
        return "adequal_trend"
    if not fit.conclusive:
        return "inconclusive"
    return "adequal_trend" if fit.exponent > 0.25 else "not_adequal"


def adequality_sweep(parameter: str, values: Sequence[float],
                     make_case: Callable[[float], tuple[PrevectorField, PrevectorField, complex]],
                     t_final: float, lipschitz_K: float | None = None, label: str = "") -> AdequalityReport:
    """Compare walks over a sweep and certify each row with the Gronwall envelope.

    ``make_case(value)`` returns ``(F, G, z0)``.  ``G`` supplies the Lipschitz
    constant unless ``lipschitz_K`` is given.  The per-step discrepancy is
    measured on the disk holding both walks.  Rows come back ordered by
    decreasing scale regardless of input order.
    """
    rows = []
    for v in sorted(values, reverse=True):
        F, G, z0 = make_case(v)
        dev = walk_deviation(F, G, z0, t_final)
        eta = measure_discrepancy(F, G, dev.max_modulus)
        K = lipschitz_K if lipschitz_K is not None else G.lipschitz_K
        env_profile = gronwall_envelope(eta * np.ones_like(dev.deviation), K, dev.n * F.mesh)
        env = gronwall_envelope(eta, K, dev.t_final)
        violations = int(np.sum(dev.deviation > env_profile)) + int(dev.sup_abs > env)
        rows.append(SweepRow(float(v), dev.sup_abs, dev.sup_rel, eta, K, env, violations, dev.truncated))
    fit = fit_power_law([r.scale for r in rows], [r.sup_rel for r in rows])
    return AdequalityReport(parameter, tuple(rows), fit, _verdict(fit, rows), label)
