"""The pendulum and its three prevector fields.

State ``z = x + iy`` holds the angle ``x`` and the scaled velocity
``y = xdot / omega`` with ``omega = sqrt(g / ell)``.  On that plane:

* ``F``: Euler step of the nonlinear field ``omega*y - i*omega*sin(x)``;
* ``E``: Euler step of the linearization ``-i*omega*z``;
* ``H``: exact clockwise rotation by ``mesh*omega``, whose walk is the
  closed-form harmonic motion and is exactly periodic once
  ``2*pi/(mesh*omega)`` is an integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import asymptotic as asy
from .flows import (
    AdequalityReport,
    PowerLawFit,
    PrevectorField,
    RichardsonResult,
    Trajectory,
    VectorField,
    adequality_sweep,
    fit_power_law,
    richardson,
    steps_for,
    walk,
)

DEFAULT_AMPLITUDES = (0.4, 0.2, 0.1, 0.05, 0.025)
DEFAULT_N_PER_PERIOD = (10_000, 20_000, 40_000)


class NoOscillationError(ValueError):
    """Trajectory does not complete two returns to the release side."""


@dataclass(frozen=True)
class PendulumParams:
    g: float = 1.0
    ell: float = 1.0
    amplitude: float | None = None

    def __post_init__(self) -> None:
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if not self.ell > 0:
            raise ValueError(f"ell must be positive, got {self.ell}")
        if self.amplitude is not None:
            check_amplitude(self.amplitude)

    @property
    def omega(self) -> float:
        return math.sqrt(self.g / self.ell)

    @property
    def linear_period(self) -> float:
        return 2 * math.pi * math.sqrt(self.ell / self.g)


def check_amplitude(a: float) -> float:
    if not 0 < a < math.pi:
        raise ValueError(f"amplitude must lie in (0, pi) (oscillatory regime), got {a}")
    return a


def nonlinear_field(omega: float) -> VectorField:
    def V(z: complex) -> complex:
        return complex(omega * z.imag, -omega * math.sin(z.real))

    return VectorField(V, lipschitz_K=omega, name="F")


def linear_field(omega: float) -> VectorField:
    def V(z: complex) -> complex:
        return complex(omega * z.imag, -omega * z.real)

    return VectorField(V, lipschitz_K=omega, name="E")


def rotation_map(omega: float, mesh: float):
    c = math.cos(mesh * omega)
    s = math.sin(mesh * omega)

    def H(z: complex) -> complex:
        x, y = z.real, z.imag
        return complex(x * c + y * s, -x * s + y * c)

    return H


def make_fields(params: PendulumParams, mesh: float) -> tuple[PrevectorField, PrevectorField, PrevectorField]:
    """Return ``(F, E, H)`` at the given mesh."""
    if not mesh > 0:
        raise ValueError("mesh must be positive")
    w = params.omega
    F = PrevectorField.from_field(nonlinear_field(w), mesh, name="F")
    E = PrevectorField.from_field(linear_field(w), mesh, name="E")
    # |exp(-i*mesh*w) - 1| = 2 sin(mesh*w/2) <= mesh*w, so K = w.
    H = PrevectorField.from_map(rotation_map(w, mesh), mesh, lipschitz_K=w, name="H")
    return F, E, H


def choose_lambda(omega: float, n_per_period: int) -> float:
    """Mesh for which one linear period is exactly ``n_per_period`` steps."""
    if n_per_period < 8:
        raise ValueError("n_per_period must be at least 8")
    if not omega > 0:
        raise ValueError("omega must be positive")
    return 2 * math.pi / (omega * n_per_period)


def h_walk_closed_form(a, t, omega: float):
    """``a cos(omega t) - i a sin(omega t)``; broadcasts over arrays."""
    wt = np.multiply(omega, t)
    out = a * np.cos(wt) - 1j * a * np.sin(wt)
    return complex(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PeriodEstimate:
    period: float
    mesh: float
    residual: float
    n_oscillations: int
    crossings: tuple[float, ...] = field(default=(), repr=False)


def measure_period(traj: Trajectory) -> PeriodEstimate:
    """Mean spacing of downward crossings of the positive real axis.

    A crossing is a pair of consecutive samples with ``Im z > 0`` then
    ``Im z <= 0`` and ``Re z > 0``; its time is found by linear interpolation.
    ``residual`` is the standard deviation of the spacings.
    """
    t = traj.t
    x, y = traj.z.real, traj.z.imag
    idx = np.flatnonzero((y[:-1] > 0) & (y[1:] <= 0) & (x[:-1] > 0) & (x[1:] > 0))
    if idx.size < 2:
        raise NoOscillationError("no full oscillation observed")
    frac = y[idx] / (y[idx] - y[idx + 1])
    times = t[idx] + (t[idx + 1] - t[idx]) * frac
    spacings = np.diff(times)
    return PeriodEstimate(
        period=float(spacings.mean()), mesh=traj.mesh,
        residual=float(spacings.std()) if spacings.size > 1 else 0.0,
        n_oscillations=int(spacings.size), crossings=tuple(float(v) for v in times),
    )


def _agm(a: float, b: float) -> float:
    while abs(a - b) > 1e-15 * a:
        a, b = (a + b) / 2, math.sqrt(a * b)
    return (a + b) / 2


def ellipk(k: float) -> float:
    """Complete elliptic integral of the first kind, modulus ``k`` (AGM)."""
    if not 0 <= k < 1:
        raise ValueError("modulus must lie in [0, 1)")
    return math.pi / (2 * _agm(1.0, math.sqrt(1 - k * k)))


def exact_period_oracle(a: float, g: float = 1.0, ell: float = 1.0) -> float:
    """Finite-amplitude period ``4 sqrt(ell/g) K(sin(a/2))``."""
    if not 0 < a < math.pi:
        raise ValueError(f"amplitude must lie in (0, pi), got {a}")
    return 4 * math.sqrt(ell / g) * ellipk(math.sin(a / 2))


def energy(z, omega: float):
    """``omega^2 (1 - cos x) + (omega y)^2 / 2`` (per unit m*ell^2)."""
    z = np.asarray(z)
    return omega ** 2 * (1 - np.cos(z.real)) + (omega * z.imag) ** 2 / 2


def symmetry_defect(traj: Trajectory, period: float) -> float:
    """``max |z(t) - conj(z(period - t))|`` over ``t`` in the first half period.

    The reflected state is linearly interpolated between samples.  Returned
    relative to ``|z0|``.
    """
    t = traj.t
    if t[-1] < period:
        raise ValueError("trajectory shorter than one period")
    first = t <= period / 2
    tr = period - t[first]
    zr = np.interp(tr, t, traj.z.real) + 1j * np.interp(tr, t, traj.z.imag)
    return float(np.max(np.abs(traj.z[first] - np.conj(zr))) / abs(traj.z0))


# -- series check ---------------------------------------------------------


@dataclass(frozen=True)
class SeriesRow:
    Z: complex
    ratio: asy.AsymptoticNumber
    order1: complex
    order2: complex
    adequal: bool
    diagnostic: asy.RelationDiagnostic


def displacement_ratio(Z: complex, a: asy.AsymptoticNumber, omega: float = 1.0) -> asy.AsymptoticNumber:
    """``delta_F(aZ) / delta_E(aZ)`` as a series (the mesh cancels)."""
    X, Y = Z.real, Z.imag
    num = omega * Y * a - 1j * omega * asy.sin(a * X)
    den = -1j * omega * a * Z
    return num / den


def rescaled_adequality_check(Z_samples: Sequence[complex], truncation: int = asy.DEFAULT_TRUNCATION,
                              omega: float = 1.0, amplitude: float | None = None) -> list[SeriesRow]:
    """Check ``delta_F(aZ)`` adequal to ``delta_E(aZ)`` with ``a = eps``.

    Passing a real ``amplitude`` replaces ``eps`` by that appreciable
    constant, which is where the relation breaks down.
    """
    a = asy.epsilon(truncation) if amplitude is None else asy.constant(amplitude, truncation)
    rows = []
    for Z in Z_samples:
        Z = complex(Z)
        if Z == 0:
            raise ValueError("Z samples must be nonzero")
        if abs(Z) > 1 + 1e-12:
            raise ValueError(f"|Z| must be at most 1, got {abs(Z)}")
        r = displacement_ratio(Z, a, omega)
        diag = asy.relation_diagnostic(r, 1.0, "adequal")
        rows.append(SeriesRow(Z, r, r.coefficient(1), r.coefficient(2), diag.holds, diag))
    return rows


# -- the amplitude sweep --------------------------------------------------


@dataclass(frozen=True)
class PeriodRow:
    field: str
    a: float
    mesh: float
    T_measured: float
    T_oracle: float
    T_linear: float

    @property
    def abs_dev(self) -> float:
        return abs(self.T_measured - self.T_linear)

    @property
    def rel_dev(self) -> float:
        return self.abs_dev / self.T_linear


@dataclass(frozen=True)
class SmallOscillationReport:
    params: PendulumParams
    rows: tuple[PeriodRow, ...]
    extrapolations: dict
    fit: PowerLawFit
    fit_ok: bool
    verdict: str
    h_spread: float
    f_vs_e: AdequalityReport
    e_vs_h: AdequalityReport

    def f_periods(self) -> dict[float, float]:
        """Mesh-extrapolated F period per amplitude."""
        return {r.a: r.T_measured for r in self.rows if r.field == "F" and r.mesh == 0.0}

    def summary(self) -> dict:
        return {
            "fit_exponent": self.fit.exponent,
            "fit_prefactor": self.fit.prefactor,
            "fit_residual": self.fit.residual,
            "verdict": self.verdict,
            "exponent_within_tolerance": self.fit_ok,
            "h_period_spread": self.h_spread,
            "f_vs_e": self.f_vs_e.to_json(),
            "e_vs_h": self.e_vs_h.to_json(),
        }


def walk_period(F: PrevectorField, a: float, n_periods: int, T_expected: float) -> PeriodEstimate:
    steps = steps_for((n_periods + 0.25) * T_expected, F.mesh)
    traj = walk(F, complex(a, 0), steps, record_stride=1)
    if traj.terminated_early:
        raise NoOscillationError(f"amplitude {a}: {traj.reason}")
    return measure_period(traj)


def period_extrapolation(params: PendulumParams, a: float,
                         n_per_period: Sequence[int] = DEFAULT_N_PER_PERIOD,
                         n_periods: int = 4) -> tuple[list[PeriodRow], RichardsonResult]:
    """F-walk period at each mesh plus its first-order Richardson limit."""
    check_amplitude(a)
    T_or = exact_period_oracle(a, params.g, params.ell)
    rows, meshes, periods = [], [], []
    for N in sorted(n_per_period):
        lam = choose_lambda(params.omega, N)
        F, _, _ = make_fields(params, lam)
        try:
            est = walk_period(F, a, n_periods, T_or)
        except NoOscillationError as exc:
            raise NoOscillationError(f"amplitude {a}, mesh {lam}: {exc}") from exc
        rows.append(PeriodRow("F", a, lam, est.period, T_or, params.linear_period))
        meshes.append(lam)
        periods.append(est.period)
    rr = richardson(meshes, periods)
    # Below the noise floor the finest mesh is already converged.
    T = rr.value.real if rr.value is not None else periods[-1]
    rows.append(PeriodRow("F", a, 0.0, float(T), T_or, params.linear_period))
    return rows, rr


def small_oscillation_report(
    amplitudes: Sequence[float] = DEFAULT_AMPLITUDES,
    params: PendulumParams = PendulumParams(),
    n_per_period: Sequence[int] = DEFAULT_N_PER_PERIOD,
    n_periods: int = 4,
    compare_mesh: float | None = None,
    compare_periods: float = 3.0,
    deviation_meshes: Sequence[float] = (1e-2, 1e-3, 1e-4),
    deviation_amplitude: float = 0.1,
    deviation_t_final: float = 10.0,
) -> SmallOscillationReport:
    """Periods of F and H across amplitudes, plus the two walk-level sweeps.

    F periods are measured at each mesh of ``n_per_period`` and extrapolated;
    their distance from the linear period is fitted to ``C a**p``.  H is
    walked at the coarsest mesh.  ``compare_mesh`` (default: the coarsest
    mesh) is used for the F-vs-E amplitude sweep over ``compare_periods``
    linear periods.
    """
    amps = sorted({check_amplitude(float(a)) for a in amplitudes}, reverse=True)
    if len(amps) < 3:
        raise ValueError("need at least three distinct amplitudes")
    if min(n_per_period) < 10_000:
        raise ValueError("n_per_period must be at least 10^4")
    w = params.omega
    T_lin = params.linear_period

    rows: list[PeriodRow] = []
    extrap = {}
    for a in amps:
        f_rows, rr = period_extrapolation(params, a, n_per_period, n_periods)
        rows.extend(f_rows)
        extrap[a] = {"order": rr.order, "verdict": rr.verdict}

    lam_h = choose_lambda(w, min(n_per_period))
    _, _, H = make_fields(params, lam_h)
    h_periods = []
    for a in amps:
        est = walk_period(H, a, n_periods, T_lin)
        h_periods.append(est.period)
        rows.append(PeriodRow("H", a, lam_h, est.period, exact_period_oracle(a, params.g, params.ell), T_lin))
    h_spread = float(max(h_periods) - min(h_periods))

    f_limits = [r for r in rows if r.field == "F" and r.mesh == 0.0]
    fit = fit_power_law([r.a for r in f_limits], [r.abs_dev for r in f_limits])
    fit_ok = fit.conclusive and abs(fit.exponent - 2.0) <= 0.3
    verdict = "adequal_trend" if fit_ok else ("not_adequal" if fit.conclusive else "inconclusive")

    lam_c = compare_mesh or lam_h

    def fe_case(a):
        F, E, _ = make_fields(params, lam_c)
        return F, E, complex(a, 0)

    f_vs_e = adequality_sweep("amplitude", amps, fe_case, compare_periods * T_lin, label="F vs E")

    def eh_case(lam):
        _, E, H = make_fields(params, lam)
        return E, H, complex(deviation_amplitude, 0)

    e_vs_h = adequality_sweep("lambda", deviation_meshes, eh_case, deviation_t_final, label="E vs H")

    rows.sort(key=lambda r: (r.field, -r.a, -r.mesh))
    return SmallOscillationReport(params, tuple(rows), extrap, fit, fit_ok, verdict, h_spread, f_vs_e, e_vs_h)
