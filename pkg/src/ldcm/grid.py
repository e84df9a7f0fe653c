"""Node-centered index geometry.

Boxes are closed, inclusive ranges of node indices. A node with index ``i``
sits at ``origin + i * h``; refining by an integer ratio ``r`` maps coarse
node ``i`` onto fine node ``r * i`` so that the two coincide exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Invalid run or geometry configuration."""


class AlignmentError(ValueError):
    """Box corners are not aligned with a refinement ratio."""


class ContractViolation(RuntimeError):
    """An operation was called on data that does not satisfy its precondition
    (typically: not enough valid ghost layers)."""


def _triple(v) -> tuple[int, int, int]:
    if np.isscalar(v):
        return (int(v),) * 3
    t = tuple(int(x) for x in v)
    if len(t) != 3:
        raise ValueError(f"expected 3 components, got {v!r}")
    return t


@dataclass(frozen=True)
class IndexBox:
    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "lo", _triple(self.lo))
        object.__setattr__(self, "hi", _triple(self.hi))
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"empty box lo={self.lo} hi={self.hi}")

    @classmethod
    def cube(cls, lo: int, hi: int) -> "IndexBox":
        return cls((lo,) * 3, (hi,) * 3)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def grow(self, w) -> "IndexBox":
        w = _triple(w)
        return IndexBox(
            tuple(l - d for l, d in zip(self.lo, w)),
            tuple(h + d for h, d in zip(self.hi, w)),
        )

    def shrink(self, w) -> "IndexBox":
        return self.grow(tuple(-d for d in _triple(w)))

    def refine(self, r: int) -> "IndexBox":
        if r < 2:
            raise ConfigurationError(f"refinement ratio must be >= 2, got {r}")
        return IndexBox(tuple(r * l for l in self.lo), tuple(r * h for h in self.hi))

    def coarsen(self, r: int) -> "IndexBox":
        if r < 2:
            raise ConfigurationError(f"refinement ratio must be >= 2, got {r}")
        if any(v % r for v in self.lo + self.hi):
            raise AlignmentError(f"box {self} is not aligned to ratio {r}")
        return IndexBox(tuple(l // r for l in self.lo), tuple(h // r for h in self.hi))

    def coarsen_outer(self, r: int) -> "IndexBox":
        """Smallest coarse box whose refinement contains this box."""
        return IndexBox(
            tuple(l // r for l in self.lo), tuple(-((-h) // r) for h in self.hi)
        )

    def contains(self, other: "IndexBox") -> bool:
        return all(a <= b for a, b in zip(self.lo, other.lo)) and all(
            a >= b for a, b in zip(self.hi, other.hi)
        )

    def contains_point(self, p) -> bool:
        return all(l <= v <= h for l, v, h in zip(self.lo, p, self.hi))

    def intersect(self, other: "IndexBox") -> "IndexBox | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(l > h for l, h in zip(lo, hi)):
            return None
        return IndexBox(lo, hi)

    def shift(self, d) -> "IndexBox":
        d = _triple(d)
        return IndexBox(
            tuple(l + s for l, s in zip(self.lo, d)),
            tuple(h + s for h, s in zip(self.hi, d)),
        )

    def slices(self, within: "IndexBox") -> tuple[slice, slice, slice]:
        """Array slices selecting this box from an array laid out over ``within``."""
        if not within.contains(self):
            raise ContractViolation(f"{self} is not inside {within}")
        return tuple(
            slice(l - wl, h - wl + 1) for l, h, wl in zip(self.lo, self.hi, within.lo)
        )

    def axis_indices(self, axis: int) -> np.ndarray:
        return np.arange(self.lo[axis], self.hi[axis] + 1)

    def __repr__(self):
        return f"IndexBox({list(self.lo)}..{list(self.hi)})"


def bounding_box(boxes: Iterable[IndexBox]) -> IndexBox:
    boxes = list(boxes)
    lo = tuple(min(b.lo[a] for b in boxes) for a in range(3))
    hi = tuple(max(b.hi[a] for b in boxes) for a in range(3))
    return IndexBox(lo, hi)


def subtract(box: IndexBox, cut: IndexBox) -> list[IndexBox]:
    """Node set ``box \\ cut`` as a list of disjoint boxes."""
    inter = box.intersect(cut)
    if inter is None:
        return [box]
    out = []
    lo, hi = list(box.lo), list(box.hi)
    for a in range(3):
        if lo[a] < inter.lo[a]:
            h = list(hi)
            h[a] = inter.lo[a] - 1
            out.append(IndexBox(tuple(lo), tuple(h)))
        if hi[a] > inter.hi[a]:
            l = list(lo)
            l[a] = inter.hi[a] + 1
            out.append(IndexBox(tuple(l), tuple(hi)))
        lo[a], hi[a] = inter.lo[a], inter.hi[a]
    return out


def box_mask(boxes: Sequence[IndexBox], within: IndexBox) -> np.ndarray:
    """Boolean node mask over ``within`` for the union of ``boxes``."""
    m = np.zeros(within.shape, dtype=bool)
    for b in boxes:
        inter = b.intersect(within)
        if inter is not None:
            m[inter.slices(within)] = True
    return m


@dataclass(frozen=True)
class Patch:
    box: IndexBox
    ghost_width: int = 0

    def __post_init__(self):
        if self.ghost_width < 0:
            raise ValueError("ghost_width must be nonnegative")

    @property
    def ghost_box(self) -> IndexBox:
        return self.box.grow(self.ghost_width)

    def ghost_mask(self) -> np.ndarray:
        """Nodes of the grown box that are not in the patch itself."""
        m = np.ones(self.ghost_box.shape, dtype=bool)
        m[self.box.slices(self.ghost_box)] = False
        return m


@dataclass(frozen=True)
class GridGeometry:
    origin: tuple[float, float, float]
    h: float
    domain: IndexBox

    def coords(self, box: IndexBox | None = None, axis: int | None = None):
        """Node coordinates along each axis of ``box`` (default: the domain)."""
        box = self.domain if box is None else box
        axes = [self.origin[a] + box.axis_indices(a) * self.h for a in range(3)]
        return axes if axis is None else axes[axis]

    def mesh(self, box: IndexBox | None = None):
        return np.meshgrid(*self.coords(box), indexing="ij")


def _split_axis(lo: int, hi: int, cells: int) -> list[tuple[int, int]]:
    out = []
    a = lo
    while a < hi:
        b = min(a + cells, hi)
        out.append((a, b))
        a = b
    if not out:
        out.append((lo, hi))
    return out


def partition_domain(domain: IndexBox, patch_nodes: int) -> list[Patch]:
    """Tile ``domain`` with cubic patches of ``patch_nodes`` nodes per side.

    Adjacent patches share one layer of boundary nodes, so a 65-node axis
    splits as 33 + 33.
    """
    if patch_nodes < 2:
        raise ConfigurationError(f"patch_nodes must be >= 2, got {patch_nodes}")
    cells = patch_nodes - 1
    for a, n in enumerate(domain.shape):
        if (n - 1) % cells:
            raise ConfigurationError(
                f"axis {a}: {n} nodes cannot be split into {patch_nodes}-node patches"
            )
    return tile_box(domain, patch_nodes)


def tile_box(box: IndexBox, patch_nodes: int) -> list[Patch]:
    """Like :func:`partition_domain` but lets the last patch on an axis be short."""
    cells = max(patch_nodes - 1, 1)
    splits = [_split_axis(box.lo[a], box.hi[a], cells) for a in range(3)]
    patches = []
    for x0, x1 in splits[0]:
        for y0, y1 in splits[1]:
            for z0, z1 in splits[2]:
                patches.append(Patch(IndexBox((x0, y0, z0), (x1, y1, z1))))
    return patches
