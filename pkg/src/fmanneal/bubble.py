"""Lipid-coated microbubble radial dynamics.

Rayleigh-Plesset-type model with a radius-dependent effective surface
tension (buckled shell below the buckling radius, elastic above it),
driven by a Gaussian-tapered acoustic burst. Integrated in
nondimensional form (R/R0, time in microseconds) with an embedded
Cash-Karp 4(5) pair; a fixed-step RK4 mode serves as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "MarmottantParams",
    "AcousticDrive",
    "BubbleTrajectory",
    "IntegrationError",
    "TRUE_PARAMS",
    "DEFAULT_DRIVE",
    "acoustic_pressure",
    "buckling_radius",
    "effective_surface_tension",
    "integrate_marmottant",
    "reference_trajectory",
]

TIME_SCALE = 1e-6  # integration clock runs in microseconds
COLLAPSE_RADIUS_FRACTION = 1e-3

_STATUS_OK = 0
_STATUS_COLLAPSE = 1
_STATUS_UNDERFLOW = 2


@dataclass(frozen=True)
class MarmottantParams:
    """Shell and liquid parameters (SI units)."""

    rho_l: float = 1e3  # liquid density, kg/m^3
    kappa: float = 1.07  # polytropic gas exponent
    c_l: float = 1500.0  # sound speed in liquid, m/s
    mu: float = 1e-3  # liquid viscosity, Pa*s
    kappa_s: float = 6.0e-9  # surface dilatational viscosity, kg/s
    p0: float = 1e5  # ambient pressure, Pa
    r0: float = 3.2e-6  # equilibrium radius, m
    sigma0: float = 0.02  # natural surface tension, N/m
    chi: float = 2.5  # shell elastic modulus, N/m

    def __post_init__(self):
        for name in ("rho_l", "kappa", "c_l", "p0", "r0", "chi"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        # mu = 0 is admitted so undamped dynamics can be exercised
        if self.mu < 0 or self.sigma0 < 0 or self.kappa_s < 0:
            raise ValueError("mu, sigma0, and kappa_s must be >= 0")


@dataclass(frozen=True)
class AcousticDrive:
    """Gaussian-tapered sine burst P_A(t)."""

    amplitude: float = 25e3  # Pa
    frequency: float = 1.5e6  # Hz
    envelope_center: float = 5e-6  # s
    envelope_width: float = 1.5e-6  # s

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.frequency <= 0 or self.envelope_width <= 0:
            raise ValueError("frequency and envelope_width must be > 0")


TRUE_PARAMS = MarmottantParams()
DEFAULT_DRIVE = AcousticDrive()


@dataclass(frozen=True)
class BubbleTrajectory:
    """Radius time series on a uniform time grid."""

    times: np.ndarray  # s
    radii: np.ndarray  # m

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        r = np.asarray(self.radii, dtype=np.float64)
        if t.ndim != 1 or t.shape != r.shape or t.size < 2:
            raise ValueError("times and radii must be equal-length 1-D arrays (>= 2 points)")
        dt = np.diff(t)
        if not (dt > 0).all() or not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
            raise ValueError("times must be strictly increasing and uniform")
        if not (r > 0).all():
            raise ValueError("radii must be strictly positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "radii", r)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def times_us(self) -> np.ndarray:
        return self.times * 1e6

    def radii_um(self) -> np.ndarray:
        return self.radii * 1e6


class IntegrationError(RuntimeError):
    """Raised when the radius collapses or the step size underflows."""


def acoustic_pressure(t, drive: AcousticDrive):
    """amplitude * exp(-(t-center)^2 / (2 width^2)) * sin(2 pi f t)."""
    t = np.asarray(t, dtype=np.float64)
    env = np.exp(-((t - drive.envelope_center) ** 2) / (2.0 * drive.envelope_width**2))
    out = drive.amplitude * env * np.sin(2.0 * np.pi * drive.frequency * t)
    return float(out) if out.ndim == 0 else out


def buckling_radius(p: MarmottantParams) -> float:
    """R_b = R0 * (1 + sigma0/chi)^(-1/2)."""
    return p.r0 / math.sqrt(1.0 + p.sigma0 / p.chi)


def effective_surface_tension(r: float, p: MarmottantParams) -> float:
    """Zero in the buckled regime (R < R_b), chi*(R^2/R_b^2 - 1) above;
    continuous at R_b, and equal to sigma0 at R0."""
    if r <= 0:
        raise ValueError("radius must be > 0")
    rb_sq = p.r0 * p.r0 / (1.0 + p.sigma0 / p.chi)
    if r * r < rb_sq:
        return 0.0
    return p.chi * (r * r / rb_sq - 1.0)


@njit(cache=True, inline="always")
def _accel(tau, u, w, c):  # pragma: no cover
    # c = (rho, kappa, c_l, mu, kappa_s, p0, r0, rb_sq, sigma0, chi,
    #      amp, freq, center_us, width_us); tau in microseconds
    r0 = c[6]
    R = u * r0
    Rdot = w * r0 / TIME_SCALE
    sig = 0.0
    if R * R >= c[7]:
        sig = c[9] * (R * R / c[7] - 1.0)
    env = math.exp(-((tau - c[12]) ** 2) / (2.0 * c[13] * c[13]))
    pa = c[10] * env * math.sin(2.0 * math.pi * c[11] * tau * TIME_SCALE)
    gas = (c[5] + 2.0 * c[8] / r0) * u ** (-3.0 * c[1]) * (1.0 - 3.0 * c[1] / c[2] * Rdot)
    rhs = gas - c[5] - pa - 4.0 * c[3] * Rdot / R - 2.0 * sig / R - 4.0 * c[4] * Rdot / (R * R)
    acc = rhs / (c[0] * R) - 1.5 * Rdot * Rdot / R
    return acc * TIME_SCALE * TIME_SCALE / r0


@njit(cache=True)
def _integrate_adaptive(consts, t_grid, rtol, atol, out_u):  # pragma: no cover
    u = 1.0
    w = 0.0
    out_u[0] = u
    t = t_grid[0]
    h_prop = (t_grid[1] - t_grid[0]) / 10.0
    h_min = (t_grid[-1] - t_grid[0]) * 1e-15
    for i in range(1, t_grid.shape[0]):
        t_target = t_grid[i]
        while t < t_target:
            h = h_prop
            clipped = False
            if t + h >= t_target:
                h = t_target - t
                clipped = True
            # Cash-Karp stages
            k1u = w
            k1w = _accel(t, u, w, consts)
            u2 = u + h * 0.2 * k1u
            w2 = w + h * 0.2 * k1w
            k2u = w2
            k2w = _accel(t + 0.2 * h, u2, w2, consts)
            u3 = u + h * (0.075 * k1u + 0.225 * k2u)
            w3 = w + h * (0.075 * k1w + 0.225 * k2w)
            k3u = w3
            k3w = _accel(t + 0.3 * h, u3, w3, consts)
            u4 = u + h * (0.3 * k1u - 0.9 * k2u + 1.2 * k3u)
            w4 = w + h * (0.3 * k1w - 0.9 * k2w + 1.2 * k3w)
            k4u = w4
            k4w = _accel(t + 0.6 * h, u4, w4, consts)
            u5 = u + h * (-11.0 / 54.0 * k1u + 2.5 * k2u - 70.0 / 27.0 * k3u + 35.0 / 27.0 * k4u)
            w5 = w + h * (-11.0 / 54.0 * k1w + 2.5 * k2w - 70.0 / 27.0 * k3w + 35.0 / 27.0 * k4w)
            k5u = w5
            k5w = _accel(t + h, u5, w5, consts)
            u6 = u + h * (
                1631.0 / 55296.0 * k1u
                + 175.0 / 512.0 * k2u
                + 575.0 / 13824.0 * k3u
                + 44275.0 / 110592.0 * k4u
                + 253.0 / 4096.0 * k5u
            )
            w6 = w + h * (
                1631.0 / 55296.0 * k1w
                + 175.0 / 512.0 * k2w
                + 575.0 / 13824.0 * k3w
                + 44275.0 / 110592.0 * k4w
                + 253.0 / 4096.0 * k5w
            )
            k6u = w6
            k6w = _accel(t + 0.875 * h, u6, w6, consts)

            u_new = u + h * (
                37.0 / 378.0 * k1u + 250.0 / 621.0 * k3u + 125.0 / 594.0 * k4u + 512.0 / 1771.0 * k6u
            )
            w_new = w + h * (
                37.0 / 378.0 * k1w + 250.0 / 621.0 * k3w + 125.0 / 594.0 * k4w + 512.0 / 1771.0 * k6w
            )
            u_low = u + h * (
                2825.0 / 27648.0 * k1u
                + 18575.0 / 48384.0 * k3u
                + 13525.0 / 55296.0 * k4u
                + 277.0 / 14336.0 * k5u
                + 0.25 * k6u
            )
            w_low = w + h * (
                2825.0 / 27648.0 * k1w
                + 18575.0 / 48384.0 * k3w
                + 13525.0 / 55296.0 * k4w
                + 277.0 / 14336.0 * k5w
                + 0.25 * k6w
            )

            bad = not (math.isfinite(u_new) and math.isfinite(w_new)) or u_new <= 0.0
            if bad:
                ratio = 8.0
            else:
                scale_u = atol + rtol * max(abs(u), abs(u_new))
                scale_w = atol + rtol * max(abs(w), abs(w_new))
                ratio = max(abs(u_new - u_low) / scale_u, abs(w_new - w_low) / scale_w)
            if ratio <= 1.0:
                t += h
                u = u_new
                w = w_new
                if u < COLLAPSE_RADIUS_FRACTION:
                    return _STATUS_COLLAPSE
                if not clipped:
                    factor = 5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio**-0.2))
                    h_prop = h * factor
            else:
                h_prop = h * max(0.2, 0.9 * ratio**-0.2)
                if h_prop < h_min:
                    return _STATUS_UNDERFLOW
        out_u[i] = u
    return _STATUS_OK


@njit(cache=True)
def _integrate_rk4(consts, t_grid, substeps, out_u):  # pragma: no cover
    u = 1.0
    w = 0.0
    out_u[0] = u
    for i in range(1, t_grid.shape[0]):
        t = t_grid[i - 1]
        h = (t_grid[i] - t_grid[i - 1]) / substeps
        for _ in range(substeps):
            k1u = w
            k1w = _accel(t, u, w, consts)
            k2u = w + 0.5 * h * k1w
            k2w = _accel(t + 0.5 * h, u + 0.5 * h * k1u, w + 0.5 * h * k1w, consts)
            k3u = w + 0.5 * h * k2w
            k3w = _accel(t + 0.5 * h, u + 0.5 * h * k2u, w + 0.5 * h * k2w, consts)
            k4u = w + h * k3w
            k4w = _accel(t + h, u + h * k3u, w + h * k3w, consts)
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            t += h
            if not math.isfinite(u) or u < COLLAPSE_RADIUS_FRACTION:
                return _STATUS_COLLAPSE
        out_u[i] = u
    return _STATUS_OK


def _const_vector(p: MarmottantParams, drive: AcousticDrive) -> np.ndarray:
    return np.array(
        [
            p.rho_l,
            p.kappa,
            p.c_l,
            p.mu,
            p.kappa_s,
            p.p0,
            p.r0,
            p.r0 * p.r0 / (1.0 + p.sigma0 / p.chi),  # buckling radius squared
            p.sigma0,
            p.chi,
            drive.amplitude,
            drive.frequency,
            drive.envelope_center / TIME_SCALE,
            drive.envelope_width / TIME_SCALE,
        ]
    )


def integrate_marmottant(
    p: MarmottantParams,
    drive: AcousticDrive,
    t_end: float = 10e-6,
    n_out: int = 201,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    method: str = "adaptive",
    rk4_substeps: int = 50,
) -> BubbleTrajectory:
    """Integrate from rest (R = R0) and sample n_out uniform output points
    on [0, t_end].

    method="adaptive" uses the embedded 4(5) pair with the given
    tolerances (applied to R/R0 and its derivative); method="rk4" runs
    fixed-step RK4 with `rk4_substeps` stages per output interval.
    Raises IntegrationError on collapse (R < 1e-3 R0) or step underflow.
    """
    if t_end <= 0:
        raise ValueError("t_end must be > 0")
    if n_out < 2:
        raise ValueError("n_out must be >= 2")
    t_grid_tau = np.linspace(0.0, t_end / TIME_SCALE, n_out)
    out_u = np.empty(n_out)
    consts = _const_vector(p, drive)
    if method == "adaptive":
        status = _integrate_adaptive(consts, t_grid_tau, rtol, atol, out_u)
    elif method == "rk4":
        if rk4_substeps < 1:
            raise ValueError("rk4_substeps must be >= 1")
        status = _integrate_rk4(consts, t_grid_tau, rk4_substeps, out_u)
    else:
        raise ValueError(f"unknown method {method!r}")
    if status == _STATUS_COLLAPSE:
        raise IntegrationError("bubble radius collapsed below 1e-3 * R0")
    if status == _STATUS_UNDERFLOW:
        raise IntegrationError("adaptive step size underflow")
    return BubbleTrajectory(t_grid_tau * TIME_SCALE, out_u * p.r0)


_reference_cache: dict = {}


def reference_trajectory(
    p: MarmottantParams = TRUE_PARAMS,
    drive: AcousticDrive = DEFAULT_DRIVE,
    t_end: float = 10e-6,
    n_out: int = 201,
) -> BubbleTrajectory:
    """Trajectory at the true shell parameters, cached for reuse."""
    key = (p, drive, t_end, n_out)
    if key not in _reference_cache:
        _reference_cache[key] = integrate_marmottant(p, drive, t_end, n_out)
    return _reference_cache[key]
