"""Analytic charge and current densities for the test problems.

Each model exposes ``sample(axes, t) -> (rho, J)`` on the tensor grid spanned
by three coordinate vectors, computing only inside the support of the
source; pointwise functions are provided for arbitrary coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# coefficients of the enclosed-charge polynomial r**7 .. r**13
_ES_COEF = (1 / 9, -3 / 5, 15 / 11, -5 / 3, 15 / 13, -3 / 7, 1 / 15)
_ES_OUTER = 1.0 / 45045.0


def _default_vhat():
    a, b = np.sqrt(3) / 3, np.sqrt(2) / 3
    return (np.cos(a) * np.cos(b), np.sin(a) * np.cos(b), np.sin(b))


@dataclass(frozen=True)
class TranslatingChargeParams:
    a: float = 1.0e4
    R0: float = 1.0 / 72.0
    x0: tuple = (127 / 256, 127 / 256, 127 / 256)
    nu: float = 1024 / 80
    d: float = 1 / 256
    vhat: tuple = _default_vhat()
    profile: str = "sin7"
    t_stop: float | None = None

    def __post_init__(self):
        v = np.asarray(self.vhat, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError("vhat must be a unit vector")
        if self.R0 <= 0:
            raise ValueError("R0 must be positive")
        if self.profile not in ("sin7", "sin"):
            raise ValueError(f"unknown motion profile {self.profile!r}")

    def scaled(self, length: float) -> "TranslatingChargeParams":
        """Same problem with every length and time multiplied by ``length``
        about the domain center (0.5, 0.5, 0.5), so speeds are unchanged; the
        charge amplitude is kept."""
        x0 = tuple(0.5 + length * (x - 0.5) for x in self.x0)
        t_stop = None if self.t_stop is None else self.t_stop * length
        return replace(self, R0=self.R0 * length, d=self.d * length, x0=x0,
                       nu=self.nu / length, t_stop=t_stop)


def _speed(p: TranslatingChargeParams, t):
    t = np.asarray(t, dtype=float)
    if p.profile == "sin7":
        v = p.nu * p.d * np.pi * (35.0 / 16.0) * np.sin(2 * np.pi * p.nu * t) ** 7
    else:
        v = p.nu * p.d * np.pi * np.sin(2 * p.nu * t)
    if p.t_stop is not None:
        v = np.where(t > p.t_stop, 0.0, v)
    return v


def _displacement(p: TranslatingChargeParams, t):
    if p.t_stop is not None:
        t = np.minimum(t, p.t_stop)
    if p.profile == "sin7":
        c = np.cos(2 * np.pi * p.nu * t)
        F = -c + c**3 - 0.6 * c**5 + c**7 / 7.0
        return (35.0 * p.d / 32.0) * (F + 16.0 / 35.0)
    return 0.5 * p.d * np.pi * (1.0 - np.cos(2 * p.nu * t))


def charge_center(p: TranslatingChargeParams, t) -> np.ndarray:
    return np.asarray(p.x0) + _displacement(p, t) * np.asarray(p.vhat)


def charge_velocity(p: TranslatingChargeParams, t) -> np.ndarray:
    return _speed(p, t) * np.asarray(p.vhat)


def _rho_profile(p, dist):
    r = dist / p.R0
    return np.where(r < 1.0, p.a * (r - r * r) ** 6, 0.0)


def translating_charge(x, t: float, p: TranslatingChargeParams):
    """Charge density and current of the rigidly moving spherical charge.

    ``x`` is a sequence of three coordinate arrays (broadcastable). Returns
    ``(rho, J)`` with ``J`` stacked along a leading axis of length 3.
    """
    c = charge_center(p, t)
    dx = [np.asarray(x[k], dtype=float) - c[k] for k in range(3)]
    dist = np.sqrt(dx[0] ** 2 + dx[1] ** 2 + dx[2] ** 2)
    rho = _rho_profile(p, dist)
    v = charge_velocity(p, t)
    J = np.stack([v[k] * rho for k in range(3)])
    return rho, J


def electrostatic_profile(r):
    """Dimensionless radial profile of the static field (``E_r / (4 pi R0 a)``)."""
    r = np.asarray(r, dtype=float)
    inner = np.zeros_like(r)
    for k, cf in enumerate(_ES_COEF):
        inner += cf * r ** (7 + k)
    with np.errstate(divide="ignore"):
        outer = _ES_OUTER / np.where(r > 0, r * r, 1.0)
    return np.where(r < 1.0, inner, outer)


def electrostatic_field(x, p: TranslatingChargeParams, center=None):
    """Static field of the charge at ``center`` (default: initial position)."""
    c = np.asarray(p.x0 if center is None else center)
    dx = [np.asarray(x[k], dtype=float) - c[k] for k in range(3)]
    dist = np.sqrt(dx[0] ** 2 + dx[1] ** 2 + dx[2] ** 2)
    r = dist / p.R0
    mag = 4 * np.pi * p.R0 * p.a * electrostatic_profile(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(dist > 0, mag / np.where(dist > 0, dist, 1.0), 0.0)
    return np.stack([scale * d for d in dx])


def electrostatic_max(p: TranslatingChargeParams) -> float:
    """Maximum field magnitude, located by a fine 1D search plus refinement."""
    from scipy.optimize import minimize_scalar

    r = np.linspace(0, 1, 2001)
    i = int(np.argmax(electrostatic_profile(r)))
    res = minimize_scalar(lambda s: -electrostatic_profile(s), bounds=(r[max(i - 1, 0)], r[i + 1]),
                          method="bounded", options={"xatol": 1e-14})
    return float(4 * np.pi * p.R0 * p.a * -res.fun)


@dataclass(frozen=True)
class DivFreeCurrentParams:
    amplitude: float = 100.0
    a: float = 3 / 160
    d: float = 13 / 320
    x0: float = 0.5
    y0: float = 0.5
    z0: float = 0.5
    nu: float = 20.0

    def __post_init__(self):
        if self.a <= 0 or self.d <= 0:
            raise ValueError("a and d must be positive")

    def scaled(self, length: float) -> "DivFreeCurrentParams":
        """Lengths and times multiplied by ``length`` about the domain center."""
        return replace(
            self, a=self.a * length, d=self.d * length, nu=self.nu / length,
            x0=0.5 + length * (self.x0 - 0.5), y0=0.5 + length * (self.y0 - 0.5),
            z0=0.5 + length * (self.z0 - 0.5),
        )


def _sin_over_r(r, a):
    k = np.pi / (2 * a)
    small = r < 1e-12 * a
    safe = np.where(small, 1.0, r)
    return np.where(small, k - (k**3) * r * r / 6.0, np.sin(k * safe) / safe)


def divfree_current(x, t: float, p: DivFreeCurrentParams):
    """Azimuthal current loop; zero outside ``r <= a``, ``|z - z0| <= d/2``."""
    X, Y, Z = (np.asarray(v, dtype=float) for v in x)
    dx, dy, dz = X - p.x0, Y - p.y0, Z - p.z0
    r = np.sqrt(dx * dx + dy * dy)
    inside = (r <= p.a) & (np.abs(dz) <= 0.5 * p.d)
    u = np.pi * r / (2 * p.a)
    shape = (
        _sin_over_r(r, p.a) * np.cos(u) ** 10 * np.cos(np.pi * dz / p.d) ** 11
        * np.sin(2 * np.pi * p.nu * t) * p.amplitude
    )
    shape = np.where(inside, shape, 0.0)
    Jx = -dy * shape
    Jy = dx * shape
    return np.stack(np.broadcast_arrays(Jx, Jy, np.zeros_like(Jx)))


def divfree_normalization(p: DivFreeCurrentParams) -> tuple[float, float]:
    """``(4 pi / nu) max|J_x|`` and ``(4 pi / (nu a)) max|J_x|`` (time factor
    excluded). The radial maximum of ``sin(u) cos(u)**10`` is at
    ``tan(u)**2 = 1/10``."""
    s = 1.0 / np.sqrt(11.0)
    cmax = s * (10.0 / 11.0) ** 5
    jmax = p.amplitude * cmax
    return 4 * np.pi / p.nu * jmax, 4 * np.pi / (p.nu * p.a) * jmax


# ----------------------------------------------------------------------------
# grid samplers


def _support_slices(axes, center, radius):
    sl = []
    for k in range(3):
        ax = axes[k]
        lo = np.searchsorted(ax, center[k] - radius, side="left")
        hi = np.searchsorted(ax, center[k] + radius, side="right")
        sl.append(slice(int(lo), int(hi)))
    return tuple(sl)


class SourceModel:
    """Base: zero sources."""

    use_analytic_derivatives = False

    def sample(self, axes, t: float):
        shape = tuple(len(a) for a in axes)
        return np.zeros(shape), np.zeros((3,) + shape)

    def rho_max(self) -> float:
        return 0.0


class ZeroSource(SourceModel):
    pass


class TranslatingCharge(SourceModel):
    def __init__(self, params: TranslatingChargeParams | None = None, static: bool = False,
                 analytic_derivatives: bool = False):
        self.params = params or TranslatingChargeParams()
        self.static = static
        self.use_analytic_derivatives = analytic_derivatives

    def center(self, t):
        return np.asarray(self.params.x0) if self.static else charge_center(self.params, t)

    def velocity(self, t):
        return np.zeros(3) if self.static else charge_velocity(self.params, t)

    def sample(self, axes, t: float):
        p = self.params
        shape = tuple(len(a) for a in axes)
        rho = np.zeros(shape)
        J = np.zeros((3,) + shape)
        c = self.center(t)
        sl = _support_slices(axes, c, p.R0)
        if any(s.stop <= s.start for s in sl):
            return rho, J
        X, Y, Z = np.meshgrid(*[axes[k][sl[k]] for k in range(3)], indexing="ij", sparse=True)
        dist = np.sqrt((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2)
        rho[sl] = _rho_profile(p, dist)
        v = self.velocity(t)
        for k in range(3):
            if v[k] != 0.0:
                J[(k,) + sl] = v[k] * rho[sl]
        return rho, J

    def derivatives(self, axes, t: float):
        """Analytic ``grad rho`` and ``curl J = grad rho x v``."""
        p = self.params
        shape = tuple(len(a) for a in axes)
        g = np.zeros((3,) + shape)
        c = self.center(t)
        sl = _support_slices(axes, c, p.R0)
        X, Y, Z = np.meshgrid(*[axes[k][sl[k]] for k in range(3)], indexing="ij")
        d = [X - c[0], Y - c[1], Z - c[2]]
        dist = np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
        r = dist / p.R0
        # d rho / d dist = a * 6 (r - r^2)^5 (1 - 2r) / R0
        drho = np.where(r < 1.0, p.a * 6 * (r - r * r) ** 5 * (1 - 2 * r) / p.R0, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.where(dist > 0, drho / np.where(dist > 0, dist, 1.0), 0.0)
        for k in range(3):
            g[(k,) + sl] = q * d[k]
        v = self.velocity(t)
        curl = np.stack([
            g[1] * v[2] - g[2] * v[1],
            g[2] * v[0] - g[0] * v[2],
            g[0] * v[1] - g[1] * v[0],
        ])
        return g, curl

    def rho_max(self) -> float:
        return self.params.a / 4096.0

    def initial_E(self, X, Y, Z):
        return electrostatic_field((X, Y, Z), self.params, self.center(0.0))


class DivFreeCurrent(SourceModel):
    def __init__(self, params: DivFreeCurrentParams | None = None):
        self.params = params or DivFreeCurrentParams()

    def sample(self, axes, t: float):
        p = self.params
        shape = tuple(len(a) for a in axes)
        J = np.zeros((3,) + shape)
        c = (p.x0, p.y0, p.z0)
        sl = _support_slices(axes, c, max(p.a, 0.5 * p.d))
        if all(s.stop > s.start for s in sl):
            X, Y, Z = np.meshgrid(*[axes[k][sl[k]] for k in range(3)], indexing="ij", sparse=True)
            J[(slice(None),) + sl] = divfree_current((X, Y, Z), t, p)
        return np.zeros(shape), J
