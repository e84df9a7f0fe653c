"""Compact discrete convolution kernels for the free-space wave propagator.

A spherical shell of radius ``R = c*ds`` is sampled with a surface
quadrature; each quadrature point deposits its weight onto the grid through
the tensor-product W60 spline. Derivative stencils are then folded into the
kernel weights so that a full propagator update is a fixed set of
convolutions.

Convolution convention everywhere: ``(K * f)(x) = sum_n K[n] h**3 f(x - n h)``
with ``K[rho + n]`` holding the weight of offset ``n``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import bspline
from .grid import ConfigurationError
from .stencil import D1, D2, HALF

MAX_HALF_WIDTH = 64


class KernelSizeError(ConfigurationError):
    """Kernel support exceeds the configured ghost budget."""


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    weights: np.ndarray
    h: float
    ds: float
    c: float = 1.0
    _spectra: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        n = self.weights.shape
        if len(n) != 3 or len(set(n)) != 1 or n[0] % 2 == 0:
            raise ValueError(f"kernel weights must be an odd cube, got {n}")

    @property
    def half_width(self) -> int:
        return self.weights.shape[0] // 2

    @property
    def mass(self) -> float:
        return float(self.weights.sum() * self.h**3)

    def padded(self, half_width: int) -> np.ndarray:
        """Weights embedded in a larger centered cube."""
        d = half_width - self.half_width
        if d < 0:
            raise KernelSizeError("cannot pad a kernel to a smaller support")
        return np.pad(self.weights, d)

    def spectrum(self, shape: tuple[int, int, int]) -> np.ndarray:
        """Real-input FFT of ``h**3 * weights`` wrapped onto a periodic array of
        ``shape``, cached per shape."""
        key = tuple(shape)
        s = self._spectra.get(key)
        if s is None:
            import scipy.fft as sfft

            rho = self.half_width
            if any(2 * rho + 1 > L for L in key):
                raise KernelSizeError(f"kernel of half width {rho} does not fit {key}")
            a = np.zeros(key)
            idx = [np.arange(-rho, rho + 1) % L for L in key]
            a[np.ix_(*idx)] = self.weights * self.h**3
            s = sfft.rfftn(a, workers=1)
            self._spectra[key] = s
        return s


@dataclass(frozen=True)
class SphereQuadrature:
    n_polar: int
    n_azimuth: int
    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def product(cls, n_polar: int, n_azimuth: int | None = None, symmetrize=True):
        """Gauss-Legendre in cos(theta) times trapezoid in phi.

        With ``symmetrize`` the rule is averaged over the 48 symmetries of the
        cube, which makes deposited kernels exactly cube-symmetric.
        """
        n_azimuth = 2 * n_polar if n_azimuth is None else n_azimuth
        if n_azimuth % 2:
            raise ValueError("n_azimuth must be even for inversion symmetry")
        mu, wmu = np.polynomial.legendre.leggauss(n_polar)
        phi = 2 * np.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
        wphi = np.full(n_azimuth, 2 * np.pi / n_azimuth)
        MU, PHI = np.meshgrid(mu, phi, indexing="ij")
        s = np.sqrt(1.0 - MU**2)
        pts = np.stack([s * np.cos(PHI), s * np.sin(PHI), MU], axis=-1).reshape(-1, 3)
        w = np.outer(wmu, wphi).ravel()
        if symmetrize:
            mats = cube_symmetries()
            pts = np.concatenate([pts @ m.T for m in mats])
            w = np.tile(w, len(mats)) / len(mats)
        return cls(n_polar, n_azimuth, pts, w)

    @classmethod
    def for_radius(cls, radius_cells: float) -> "SphereQuadrature":
        """Default density: great-circle spacing of points no larger than h."""
        n = max(8, int(np.ceil(np.pi * radius_cells)) + 2)
        return cls.product(n)


def cube_symmetries() -> list[np.ndarray]:
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            for i, p in enumerate(perm):
                m[i, p] = signs[i]
            mats.append(m)
    return mats


def required_half_width(c: float, ds: float, h: float, folded: bool = False) -> int:
    rho = int(np.ceil(abs(c * ds) / h - 1e-12)) + bspline.W60.half_width
    return rho + HALF if folded else rho


def build_spherical_delta(
    c: float,
    ds: float,
    h: float,
    quad: SphereQuadrature | None = None,
    weight_index: int = 0,
    max_half_width: int = MAX_HALF_WIDTH,
) -> DiscreteKernel:
    """Discrete spherical delta of radius ``c*ds``.

    ``weight_index`` 0 gives the plain shell (total mass ``c*ds``); 1..3 weight
    each quadrature point by that component of its unit direction.
    """
    R = c * ds
    if R <= 0:
        raise ValueError("c*ds must be positive")
    if weight_index not in (0, 1, 2, 3):
        raise ValueError("weight_index must be 0, 1, 2 or 3")
    quad = SphereQuadrature.for_radius(R / h) if quad is None else quad
    rho = required_half_width(c, ds, h)
    if rho > max_half_width:
        raise KernelSizeError(
            f"kernel half width {rho} exceeds maximum {max_half_width}; "
            "reduce the time step or enlarge the ghost budget"
        )
    w = bspline.W60.half_width
    y = quad.points * (R / h)
    omega = quad.weights * (R / (4 * np.pi))
    if weight_index:
        omega = omega * quad.points[:, weight_index - 1]

    base = np.floor(y).astype(np.int64)
    offs = np.arange(-w + 1, w + 1)
    nodes = base[:, :, None] + offs  # (nq, 3, 2w)
    wts = bspline.eval_spline(bspline.W60, y[:, :, None] - nodes)
    side = 2 * rho + 1
    ix = nodes + rho
    flat = (
        ix[:, 0, :, None, None] * side * side
        + ix[:, 1, None, :, None] * side
        + ix[:, 2, None, None, :]
    )
    val = (
        omega[:, None, None, None]
        * wts[:, 0, :, None, None]
        * wts[:, 1, None, :, None]
        * wts[:, 2, None, None, :]
    )
    weights = np.bincount(flat.ravel(), val.ravel(), minlength=side**3)
    return DiscreteKernel(weights.reshape(side, side, side) / h**3, h, ds, c)


def fold_stencil(kernel: DiscreteKernel, coef: np.ndarray, axis: int, scale: float) -> np.ndarray:
    """Weights of ``K * (D f)`` for the 1D stencil ``(D f)(x) = scale * sum_m
    coef[m] f(x + m h)`` along ``axis``; the support grows by 3 cells."""
    big = kernel.padded(kernel.half_width + HALF)
    out = np.zeros_like(big)
    for m, cm in zip(range(-HALF, HALF + 1), coef):
        if cm != 0.0:
            # out[p] += cm * big[p + m]
            out += (cm * scale) * np.roll(big, -m, axis=axis)
    return out


@dataclass(frozen=True)
class PropagatorSet:
    K_G: DiscreteKernel
    K_H: DiscreteKernel
    K_GL: DiscreteKernel
    c: float
    ds: float
    h: float

    @property
    def half_width(self) -> int:
        return max(self.K_G.half_width, self.K_H.half_width, self.K_GL.half_width)


def assemble_propagator_set(
    c: float,
    ds: float,
    h: float,
    quad: SphereQuadrature | None = None,
    fd_order: int = 6,
    max_half_width: int = MAX_HALF_WIDTH,
) -> PropagatorSet:
    """Kernels for one propagator step of length ``ds``.

    ``K_H = K_G / (c ds) - sum_i K_{G_i} * D_i`` and ``K_GL = K_G * lap``,
    with the sixth-order centered stencils folded into the weights.
    """
    if fd_order != 6:
        raise ValueError("only sixth-order stencils are implemented")
    quad = SphereQuadrature.for_radius(c * ds / h) if quad is None else quad
    if required_half_width(c, ds, h, folded=True) > max_half_width:
        raise KernelSizeError("folded kernel exceeds the maximum half width")
    KG = build_spherical_delta(c, ds, h, quad, 0, max_half_width)
    H = KG.padded(KG.half_width + HALF) / (c * ds)
    L = np.zeros_like(H)
    for i in range(3):
        Gi = build_spherical_delta(c, ds, h, quad, i + 1, max_half_width)
        H -= fold_stencil(Gi, D1, i, 1.0 / h)
        L += fold_stencil(KG, D2, i, 1.0 / h**2)
    return PropagatorSet(
        KG, DiscreteKernel(H, h, ds, c), DiscreteKernel(L, h, ds, c), c, ds, h
    )


def kernel_symbol(kernel: DiscreteKernel, k) -> float:
    """Real part of the discrete Fourier symbol ``sum_n w[n] h**3 cos(k . x_n)``."""
    rho = kernel.half_width
    x = np.arange(-rho, rho + 1) * kernel.h
    k = np.asarray(k, dtype=float)
    cx, sx = np.cos(k[0] * x), np.sin(k[0] * x)
    cy, sy = np.cos(k[1] * x), np.sin(k[1] * x)
    cz, sz = np.cos(k[2] * x), np.sin(k[2] * x)
    # exp(-i k.x) separably; keep only the real part
    ex = cx - 1j * sx
    ey = cy - 1j * sy
    ez = cz - 1j * sz
    s = np.einsum("ijk,i,j,k->", kernel.weights, ex, ey, ez)
    return float(s.real * kernel.h**3)


def dump_kernel(kernel: DiscreteKernel, path) -> None:
    """Write kernel weights as a text table: header lines then ``i j k weight``."""
    rho = kernel.half_width
    with open(path, "w") as fh:
        fh.write(f"# half_width {rho}\n# h {kernel.h!r}\n# ds {kernel.ds!r}\n# c {kernel.c!r}\n")
        fh.write(f"# mass {kernel.mass!r}\n")
        for idx in zip(*np.nonzero(kernel.weights)):
            i, j, k = (int(v) - rho for v in idx)
            fh.write(f"{i} {j} {k} {float(kernel.weights[idx])!r}\n")
