"""Sixth-order centered differences and the constraint filter.

Array-level helpers take arrays whose last three axes are spatial and return
arrays of the same shape; the outermost ``3`` layers along the differentiated
axis are left at zero because they cannot be computed. Callers track how many
layers remain valid. :class:`~ldcm.conv.NodeField` wrappers enforce that
bookkeeping as a ghost contract.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .grid import ContractViolation

HALF = 3

D1 = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
D2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])

# damping coefficient of the divergence filter, in units of h**2
FILTER_ETA = 45 / 544


@dataclass(frozen=True)
class FDStencil:
    axis: int
    order: int
    coefficients: np.ndarray
    accuracy: int = 6

    @classmethod
    def make(cls, axis: int, order: int) -> "FDStencil":
        if order not in (1, 2):
            raise ValueError("only first and second derivatives are provided")
        return cls(axis, order, D1 if order == 1 else D2)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-HALF, HALF + 1)

    def as_kernel(self, h: float) -> np.ndarray:
        """Stencil as a 7x7x7 array of grid weights including the 1/h**order scale,
        laid out so that ``(D f)(x) = sum_m k[m] f(x + m h)``."""
        k = np.zeros((7, 7, 7))
        idx = [HALF, HALF, HALF]
        for j, c in enumerate(self.coefficients):
            idx[self.axis] = j
            k[tuple(idx)] = c / h**self.order
        return k


def _apply(a: np.ndarray, axis: int, coef: np.ndarray, scale: float) -> np.ndarray:
    ax = a.ndim - 3 + axis
    out = correlate1d(a, coef * scale, axis=ax, mode="constant")
    sl = [slice(None)] * a.ndim
    sl[ax] = slice(0, HALF)
    out[tuple(sl)] = 0.0
    sl[ax] = slice(a.shape[ax] - HALF, None)
    out[tuple(sl)] = 0.0
    return out


def d1(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    return _apply(a, axis, D1, 1.0 / h)


def d2(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    return _apply(a, axis, D2, 1.0 / h**2)


def grad_array(s: np.ndarray, h: float) -> np.ndarray:
    return np.stack([d1(s, a, h) for a in range(3)])


def div_array(v: np.ndarray, h: float) -> np.ndarray:
    return d1(v[0], 0, h) + d1(v[1], 1, h) + d1(v[2], 2, h)


def curl_array(v: np.ndarray, h: float) -> np.ndarray:
    return np.stack(
        [
            d1(v[2], 1, h) - d1(v[1], 2, h),
            d1(v[0], 2, h) - d1(v[2], 0, h),
            d1(v[1], 0, h) - d1(v[0], 1, h),
        ]
    )


def laplacian_array(f: np.ndarray, h: float) -> np.ndarray:
    return d2(f, 0, h) + d2(f, 1, h) + d2(f, 2, h)


def grad_div_array(v: np.ndarray, h: float) -> np.ndarray:
    """``(L v)_i = sum_j d_i d_j v_j``: second-derivative stencils on the
    diagonal, products of first-derivative stencils off it. Valid on the
    array shrunk by 6 layers."""
    first = [d1(v[j], j, h) for j in range(3)]
    out = np.empty_like(v)
    for i in range(3):
        acc = d2(v[i], i, h)
        for j in range(3):
            if j != i:
                acc += d1(first[j], i, h)
        out[i] = acc
    return out


def marder_array(v: np.ndarray, eta: float, h: float, rho: np.ndarray | None = None):
    """Filtered copy of ``v``; ``rho`` enables the Gauss-law form."""
    upd = grad_div_array(v, h)
    if rho is not None:
        upd -= 4.0 * np.pi * grad_array(rho, h)
    return v + eta * upd


# ----------------------------------------------------------------------------
# NodeField wrappers


def _need(f, width: int, what: str):
    if f.valid_ghost < width:
        raise ContractViolation(
            f"{what} needs {width} valid ghost layers, field has {f.valid_ghost}"
        )


def _wrap(f, arr):
    from .conv import NodeField

    s = f.box.slices(f.full_box)
    return NodeField(np.ascontiguousarray(arr[(slice(None),) + s]), f.box, f.h, origin=f.origin)


def diff(f, axis: int, order: int):
    """Derivative of every component of ``f`` on its interior box."""
    _need(f, HALF, "diff")
    op = d1 if order == 1 else d2
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return _wrap(f, np.stack([op(c, axis, f.h) for c in f.values]))


def grad(f):
    _need(f, HALF, "grad")
    if f.components != 1:
        raise ValueError("grad expects a scalar field")
    return _wrap(f, grad_array(f.values[0], f.h))


def div(f):
    _need(f, HALF, "div")
    if f.components != 3:
        raise ValueError("div expects a vector field")
    return _wrap(f, div_array(f.values, f.h)[None])


def curl(f):
    _need(f, HALF, "curl")
    if f.components != 3:
        raise ValueError("curl expects a vector field")
    return _wrap(f, curl_array(f.values, f.h))


def laplacian(f):
    _need(f, HALF, "laplacian")
    return _wrap(f, np.stack([laplacian_array(c, f.h) for c in f.values]))


def marder_filter(F, eta: float, rho=None):
    """One explicit diffusion step on the divergence error of a vector field.

    ``F_i += eta * (sum_j d_i d_j F_j - 4 pi d_i rho)``; without ``rho`` this
    is the magnetic-field form. ``F`` needs 6 valid ghost layers because the
    off-diagonal terms are two first-derivative passes; ``rho`` needs 3 valid
    ghost layers and a box containing ``F.box``.
    """
    _need(F, 2 * HALF, "marder_filter")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    out = _wrap(F, grad_div_array(F.values, F.h))
    if rho is not None:
        _need(rho, HALF, "marder_filter rho")
        g = grad_array(rho.values[0], rho.h)
        out.values -= 4.0 * np.pi * g[(slice(None),) + F.box.slices(rho.full_box)]
    out.values *= eta
    out.values += F.data(F.box)
    return out
