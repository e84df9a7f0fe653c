"""Applying compact kernels to node fields.

``convolve`` is Hockney's method: the ghost-extended window of the output
box already contains every input node the kernel can reach, so a circular
convolution over that window (padded to a fast transform length) equals the
linear convolution on the output box. ``direct_convolve`` is the shifted-sum
oracle. ``convolve_bounded`` handles the physical boundary by filling the
exterior with the value at the output node.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import ContractViolation, IndexBox, Patch
from .kernel import DiscreteKernel


@dataclass
class NodeField:
    """Multi-component node values over ``box`` plus a ghost ring.

    ``values`` has shape ``(components, *box.grow(ghost).shape)``.
    ``valid_ghost`` counts the ghost layers that currently hold valid data.
    """

    values: np.ndarray
    box: IndexBox
    h: float
    ghost: int = 0
    valid_ghost: int | None = None
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.values.ndim == 3:
            self.values = self.values[None]
        if self.values.shape[1:] != self.full_box.shape:
            raise ValueError(
                f"values shape {self.values.shape[1:]} does not match {self.full_box.shape}"
            )
        if self.valid_ghost is None:
            self.valid_ghost = self.ghost
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values in NodeField")

    @classmethod
    def zeros(cls, box: IndexBox, h: float, components=1, ghost=0, origin=(0.0, 0.0, 0.0)):
        return cls(np.zeros((components,) + box.grow(ghost).shape), box, h, ghost, origin=origin)

    @classmethod
    def from_function(cls, fn, box: IndexBox, h: float, ghost=0, origin=(0.0, 0.0, 0.0)):
        """Sample ``fn(x, y, z)`` (returning a scalar array or a sequence of
        component arrays) on the grown box."""
        full = box.grow(ghost)
        axes = [origin[a] + full.axis_indices(a) * h for a in range(3)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        v = np.asarray(fn(X, Y, Z), dtype=float)
        v = np.broadcast_to(v, v.shape[:-3] + X.shape).copy()
        return cls(v, box, h, ghost, origin=origin)

    @property
    def full_box(self) -> IndexBox:
        return self.box.grow(self.ghost)

    @property
    def valid_box(self) -> IndexBox:
        return self.box.grow(self.valid_ghost)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    def data(self, box: IndexBox) -> np.ndarray:
        """View of all components restricted to ``box``."""
        return self.values[(slice(None),) + box.slices(self.full_box)]

    def require(self, box: IndexBox, what: str = "operation"):
        if not self.valid_box.contains(box):
            raise ContractViolation(
                f"{what} needs valid data on {box}, field is valid on {self.valid_box}"
            )


def fft_shape(n) -> tuple[int, ...]:
    return tuple(sfft.next_fast_len(int(v), real=True) for v in n)


def hockney(kernel: DiscreteKernel, window: np.ndarray, rho: int | None = None) -> np.ndarray:
    """Linear convolution of ``kernel`` with a window that extends the output
    region by ``rho >= kernel.half_width`` nodes per side. Returns the output
    region only."""
    rho = kernel.half_width if rho is None else rho
    L = fft_shape(window.shape[-3:])
    spec = kernel.spectrum(L)
    out = sfft.irfftn(sfft.rfftn(window, s=L, axes=(-3, -2, -1), workers=1) * spec,
                      s=L, axes=(-3, -2, -1), workers=1)
    n = [s - 2 * rho for s in window.shape[-3:]]
    return out[..., rho:rho + n[0], rho:rho + n[1], rho:rho + n[2]]


def convolve(kernel: DiscreteKernel, f: NodeField, out_box: IndexBox) -> NodeField:
    """``out(x) = sum_n K[n] h**3 f(x - n h)`` on ``out_box``."""
    rho = kernel.half_width
    ext = out_box.grow(rho)
    f.require(ext, "convolve")
    out = hockney(kernel, f.data(ext), rho)
    return NodeField(np.ascontiguousarray(out), out_box, f.h, origin=f.origin)


def direct_convolve(kernel: DiscreteKernel, f: NodeField, out_box: IndexBox) -> NodeField:
    """Shifted-sum reference implementation of :func:`convolve`."""
    rho = kernel.half_width
    ext = out_box.grow(rho)
    f.require(ext, "direct_convolve")
    win = f.data(ext)
    n = out_box.shape
    out = np.zeros((f.components,) + n)
    w = kernel.weights * kernel.h**3
    for i in range(2 * rho + 1):
        for j in range(2 * rho + 1):
            for k in range(2 * rho + 1):
                c = w[i, j, k]
                if c == 0.0:
                    continue
                # offset m = (i, j, k) - rho reads f(x - m h)
                a, b, d = 2 * rho - i, 2 * rho - j, 2 * rho - k
                out += c * win[:, a:a + n[0], b:b + n[1], d:d + n[2]]
    return NodeField(out, out_box, f.h, origin=f.origin)


def boundary_deficit(kernel: DiscreteKernel, domain: IndexBox, box: IndexBox | None = None) -> np.ndarray:
    """``mass(K) - (K * chi)(x)`` on ``box`` (default: ``domain``), where
    ``chi`` is the domain indicator. Exactly zero at nodes farther than the
    kernel half width from the boundary."""
    box = domain if box is None else box
    rho = kernel.half_width
    ext = box.grow(rho)
    chi = np.zeros(ext.shape)
    inter = domain.intersect(ext)
    chi[inter.slices(ext)] = 1.0
    deficit = kernel.mass - hockney(kernel, chi, rho)
    if all(s > 2 * rho for s in domain.shape):
        inside = domain.shrink(rho).intersect(box)
        if inside is not None:
            deficit[inside.slices(box)] = 0.0
    return deficit


def convolve_bounded(kernel: DiscreteKernel, f: NodeField, domain: IndexBox) -> NodeField:
    """Convolution on ``domain`` with every exterior value replaced by the
    value at the output node, so constants map to ``mass * constant``."""
    f.require(domain, "convolve_bounded")
    rho = kernel.half_width
    ext = domain.grow(rho)
    win = np.zeros((f.components,) + ext.shape)
    win[(slice(None),) + domain.slices(ext)] = f.data(domain)
    out = hockney(kernel, win, rho)
    out += f.data(domain) * boundary_deficit(kernel, domain)
    return NodeField(out, domain, f.h, origin=f.origin)


class PatchRunner:
    """Runs a per-patch function over a fixed decomposition.

    Each node of the storage box is owned by exactly one patch (the first in
    decomposition order that contains it), so results do not depend on the
    number of workers or on scheduling.
    """

    def __init__(self, patches: list[Patch], storage: IndexBox, region_mask: np.ndarray | None = None,
                 workers: int = 1):
        self.patches = list(patches)
        self.storage = storage
        self.workers = max(1, int(workers))
        owner = np.full(storage.shape, -1, dtype=np.int32)
        for n, p in enumerate(self.patches):
            sl = p.box.slices(storage)
            view = owner[sl]
            view[view < 0] = n
        if region_mask is not None:
            owner[~region_mask] = -1
        self.owner_masks = []
        for n, p in enumerate(self.patches):
            m = owner[p.box.slices(storage)] == n
            self.owner_masks.append(None if m.all() else m)

    def map(self, fn):
        """Call ``fn(index, patch)`` for every patch; returns results in order."""
        if self.workers == 1 or len(self.patches) == 1:
            return [fn(n, p) for n, p in enumerate(self.patches)]
        with ThreadPoolExecutor(self.workers) as ex:
            return list(ex.map(lambda a: fn(*a), enumerate(self.patches)))

    def store(self, dest: np.ndarray, n: int, values: np.ndarray):
        """Write ``values`` (laid out over patch ``n``'s box) into ``dest`` on
        the nodes owned by that patch."""
        sl = (slice(None),) * (dest.ndim - 3) + self.patches[n].box.slices(self.storage)
        m = self.owner_masks[n]
        if m is None:
            dest[sl] = values
        else:
            np.copyto(dest[sl], values, where=m)
