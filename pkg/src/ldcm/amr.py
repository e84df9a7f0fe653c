"""Nested refined grids with a shared time step.

Level ``j`` has spacing ``h / r**j``; all levels share the origin so fine
node ``r*i`` coincides with coarse node ``i``. Fine-to-coarse transfer is
injection at coincident nodes; coarse-to-fine transfer is tensor-product W66
quasi-interpolation, used to fill the ghost region of each refined level once
per quadrature sub-step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import bspline
from .grid import (
    AlignmentError,
    ConfigurationError,
    IndexBox,
    bounding_box,
    box_mask,
    subtract,
)
from .propagator import FIELDS, Level, QuadratureScheme, make_quadrature
from .stencil import FILTER_ETA

log = logging.getLogger(__name__)

INTERP = bspline.W66
FOOTPRINT = INTERP.half_width - 1  # coarse nodes reached beyond the enclosing cell


class NestingError(ConfigurationError):
    """A refined level is not properly contained in the next coarser one."""


# ----------------------------------------------------------------------------
# transfer operators on arrays


def footprint(fine_box: IndexBox, r: int) -> IndexBox:
    """Coarse nodes that the interpolant touches for targets in ``fine_box``."""
    return fine_box.coarsen_outer(r).grow(FOOTPRINT)


def interpolation_matrices(fine_box: IndexBox, r: int, fp: IndexBox | None = None):
    fp = footprint(fine_box, r) if fp is None else fp
    return [
        bspline.interpolation_matrix(INTERP, fine_box.axis_indices(a) / r, fp.axis_indices(a))
        for a in range(3)
    ], fp


def apply_separable(values: np.ndarray, mats) -> np.ndarray:
    """Contract the last three axes of ``values`` with ``mats[a]`` (rows: targets)."""
    out = values
    lead = values.ndim - 3
    for a, M in enumerate(mats):
        out = np.moveaxis(np.tensordot(out, M, axes=([lead + a], [1])), -1, lead + a)
    return out


def quasi_interpolate(coarse: np.ndarray, coarse_box: IndexBox, fine_box: IndexBox, r: int,
                      mats=None) -> np.ndarray:
    """``f(x) = sum_i coarse[i] W66(x/h_c - i)`` at every node of ``fine_box``.

    ``coarse`` is laid out over ``coarse_box`` with any leading component axes.
    """
    if mats is None:
        mats, fp = interpolation_matrices(fine_box, r)
    else:
        mats, fp = mats
    lead = (slice(None),) * (coarse.ndim - 3)
    block = coarse[lead + fp.slices(coarse_box)]
    return apply_separable(block, mats)


def inject(fine: np.ndarray, fine_layout: IndexBox, coarse: np.ndarray, coarse_layout: IndexBox,
           fine_box: IndexBox, r: int):
    """Copy fine values onto the coincident coarse nodes of ``fine_box``."""
    cb = fine_box.coarsen(r)
    lead = (slice(None),) * (fine.ndim - 3)
    fs = fine_box.slices(fine_layout)
    fs = tuple(slice(s.start, s.stop, r) for s in fs)
    coarse[lead + cb.slices(coarse_layout)] = fine[lead + fs]


# ----------------------------------------------------------------------------
# the hierarchy


class Hierarchy:
    """Level 0 covers the unit-spaced domain ``[0, N-1]**3`` (times ``h``);
    ``regions[j-1]`` lists the boxes of level ``j`` in its own index space."""

    def __init__(self, N: int, regions, r: int, dt: float, M: int = 4, c: float = 1.0,
                 length: float = 1.0, origin=(0.0, 0.0, 0.0), patch_nodes: int = 33,
                 workers: int = 1):
        if r < 2:
            raise ConfigurationError("refinement ratio must be >= 2")
        self.N = N
        self.r = r
        self.c = c
        self.quad: QuadratureScheme = make_quadrature(dt, M)
        self.h = length / (N - 1)
        self.origin = tuple(origin)
        self.domain = IndexBox.cube(0, N - 1)
        kw = dict(origin=origin, patch_nodes=patch_nodes, workers=workers)
        self.levels = [Level(0, self.h, [self.domain], self.quad.ds, c, domain=self.domain, **kw)]
        for j, reg in enumerate(regions, start=1):
            reg = [reg] if isinstance(reg, IndexBox) else list(reg)
            self.levels.append(Level(j, self.h / r**j, reg, self.quad.ds, c, **kw))
        self._mats = {}
        self.check_nesting()

    @property
    def dt(self) -> float:
        return self.quad.dt

    @property
    def J(self) -> int:
        return len(self.levels)

    def check_nesting(self):
        for j in range(1, self.J):
            fine, coarse = self.levels[j], self.levels[j - 1]
            for b in fine.region:
                try:
                    b.coarsen(self.r)
                except AlignmentError as e:
                    raise NestingError(f"level {j}: {e}") from None
            fp = footprint(fine.storage, self.r)
            if not coarse.storage.contains(fp) or not coarse.region_mask[fp.slices(coarse.storage)].all():
                raise NestingError(
                    f"level {j}: ghost/interpolation footprint {fp} is not inside level {j - 1}'s region"
                )
        self._mats.clear()

    def matrices(self, j: int):
        key = (j, self.levels[j].storage)
        m = self._mats.get(key)
        if m is None:
            m = interpolation_matrices(self.levels[j].storage, self.r)
            self._mats[key] = m
        return m

    def interpolate_ghosts(self, j: int, names=FIELDS, mask=None):
        """Fill the non-region nodes of level ``j`` (or ``mask``) from level ``j-1``."""
        fine, coarse = self.levels[j], self.levels[j - 1]
        mask = ~fine.region_mask if mask is None else mask
        src = np.stack([coarse.state[n].values for n in names])
        vals = quasi_interpolate(src, coarse.storage, fine.storage, self.r, self.matrices(j))
        for k, n in enumerate(names):
            np.copyto(fine.state[n].values, vals[k], where=mask)

    def sample(self, j: int, names=FIELDS, boxes=None):
        """Inject level ``j`` onto level ``j-1`` over ``boxes`` (default: region)."""
        fine, coarse = self.levels[j], self.levels[j - 1]
        for b in fine.region if boxes is None else boxes:
            for n in names:
                inject(fine.state[n].values, fine.storage, coarse.state[n].values,
                       coarse.storage, b, self.r)

    def sync(self, names=FIELDS):
        """Sample fine-to-coarse, then interpolate coarse-to-fine ghosts."""
        for j in range(self.J - 1, 0, -1):
            self.sample(j, names)
        for j in range(1, self.J):
            self.interpolate_ghosts(j, names)

    def set_fields(self, E=None, B=None):
        for lev in self.levels:
            lev.set_fields(E, B)

    @property
    def finest(self) -> Level:
        return self.levels[-1]


def sample_down(hier: Hierarchy, j: int, names=FIELDS, region=None):
    """Injection of level ``j`` onto level ``j-1`` on ``region`` (default: all of
    level ``j``), clipped to the nodes that level ``j`` owns. Clipped boxes are
    widened to the ratio grid, which only adds nodes level ``j`` still owns."""
    if region is None:
        hier.sample(j, names)
        return
    boxes = []
    for b in hier.levels[j].region:
        for c in region:
            x = b.intersect(c)
            if x is not None:
                boxes.append(x.coarsen_outer(hier.r).refine(hier.r).intersect(b))
    hier.sample(j, names, boxes)


def interpolate_up(hier: Hierarchy, j: int, names=FIELDS):
    """Refresh the ghost region of level ``j`` from level ``j-1``."""
    hier.interpolate_ghosts(j, names)


def advance_hierarchy(hier: Hierarchy, source, t: float, eta_coef: float = FILTER_ETA) -> Hierarchy:
    """One time step of all levels with the shared step ``hier.dt`` (in place)."""
    L = hier.levels
    q = hier.quad
    if hier.J > 1:
        hier.sync(("E", "B"))
    L[0].fill_physical_ghosts(("E", "B"))
    for lev in L:
        lev.reinit_curls()
    for m in range(q.M):
        tm = t + m * q.ds
        for lev in L:
            lev.add_sources(source, tm, q.weights[m])
        if m < q.M - 1:
            if hier.J > 1:
                hier.sync(FIELDS)
            for lev in L:
                lev.propagate()
    if hier.J > 1:
        hier.sync(("E", "B"))
    L[0].fill_physical_ghosts(("E", "B"))
    for lev in L:
        lev.enforce_constraints(source, t + q.dt, eta_coef)
    return hier


# ----------------------------------------------------------------------------
# regridding


def _subtract_all(boxes, cuts):
    out = list(boxes)
    for c in cuts:
        nxt = []
        for b in out:
            nxt += subtract(b, c)
        out = nxt
    return out


def _refine_boxes(boxes, r, times):
    out = list(boxes)
    for _ in range(times):
        out = [b.refine(r) for b in out]
    return out


def _align_inner(boxes, r):
    out = []
    for b in boxes:
        lo = [-(-v // r) * r for v in b.lo]
        hi = [v // r * r for v in b.hi]
        if all(l <= h for l, h in zip(lo, hi)):
            out.append(IndexBox(lo, hi))
    return out


def _rebuild(level: Level, region, added_mask_fn=None):
    """Move ``level`` onto a new region, keeping values on surviving nodes.
    Returns the mask (over the new storage) of nodes that had no value."""
    old_storage, old_mask = level.storage, level.region_mask
    old_vals = {n: level.state[n].values for n in FIELDS}
    level.set_region(region)
    new_mask = level.region_mask
    inter = old_storage.intersect(level.storage)
    kept = np.zeros(level.storage.shape, dtype=bool)
    if inter is not None:
        ns, os_ = inter.slices(level.storage), inter.slices(old_storage)
        kept[ns] = old_mask[os_] & new_mask[ns]
        for n in FIELDS:
            dst = level.state[n].values[(slice(None),) + ns]
            np.copyto(dst, old_vals[n][(slice(None),) + os_], where=kept[ns])
    return new_mask & ~kept


def regrid(hier: Hierarchy, j: int, new_region, source=None, t: float = 0.0,
           eta_coef: float = FILTER_ETA) -> bool:
    """Replace the region of level ``j`` by ``new_region``.

    Finer levels lose whatever falls in the discarded part. Returns ``False``
    (and leaves the hierarchy untouched) if nothing changes.
    """
    if j < 1 or j >= hier.J:
        raise ValueError("only refined levels can be regridded")
    new_region = [new_region] if isinstance(new_region, IndexBox) else list(new_region)
    level = hier.levels[j]
    old = level.region
    discard = _subtract_all(old, new_region)
    added = _subtract_all(new_region, old)
    if not discard and not added:
        return False
    touched = {j - 1, j}
    # sample down on the discarded part from the finest level downwards
    for k in range(hier.J - 1, j - 1, -1):
        dk = _refine_boxes(discard, hier.r, k - j)
        if not dk:
            continue
        sample_down(hier, k, FIELDS, dk)
        if k > j:
            # trimmed non-aligned nodes have no coarse counterpart to lose
            remaining = _align_inner(_subtract_all(hier.levels[k].region, dk), hier.r)
            if remaining != hier.levels[k].region:
                if not remaining:
                    raise NestingError(f"regrid would empty level {k}")
                _rebuild(hier.levels[k], remaining)
                touched.add(k)
                touched.add(k - 1)
    new_nodes = _rebuild(level, new_region)
    hier._mats.clear()
    hier.check_nesting()
    if new_nodes.any():
        hier.interpolate_ghosts(j, FIELDS, mask=new_nodes)
    # constraints on every level whose data changed
    hier.sync(("E", "B"))
    hier.levels[0].fill_physical_ghosts(("E", "B"))
    for k in sorted(touched):
        hier.levels[k].enforce_constraints(source, t, eta_coef)
    return True


# ----------------------------------------------------------------------------
# composite solution


@dataclass
class CompositeField:
    """Per-level values on each level's bounding box, the region mask of each
    level, and the mask of nodes where that level is the finest present."""

    values: list
    regions: list
    masks: list
    boxes: list
    ratio: int

    def on_level(self, j: int) -> np.ndarray:
        """Composite values at the nodes of level ``j``'s bounding box: each
        node takes the value of the finest level containing it."""
        out = self.values[j].copy()
        box = self.boxes[j]
        for k in range(j + 1, len(self.values)):
            q = self.ratio ** (k - j)
            fb = self.boxes[k]
            lo = [-(-l // q) for l in fb.lo]
            hi = [v // q for v in fb.hi]
            if any(l > h for l, h in zip(lo, hi)):
                continue
            cb = IndexBox(lo, hi).intersect(box)
            if cb is None:
                continue
            idx = tuple(slice(cb.lo[a] * q - fb.lo[a], cb.hi[a] * q - fb.lo[a] + 1, q) for a in range(3))
            np.copyto(out[cb.slices(box)], self.values[k][idx], where=self.regions[k][idx])
        return out


def composite_field(hier: Hierarchy, name: str, component: int) -> CompositeField:
    """Composite solution of one field component."""
    vals, regions, masks, boxes = [], [], [], []
    for j, lev in enumerate(hier.levels):
        box = lev.bbox
        vals.append(lev.state[name].values[(component,) + box.slices(lev.storage)].copy())
        reg = box_mask(lev.region, box)
        own = reg.copy()
        if j + 1 < hier.J:
            for b in hier.levels[j + 1].region:
                cb = b.coarsen(hier.r).intersect(box)
                if cb is not None:
                    own[cb.slices(box)] = False
        regions.append(reg)
        masks.append(own)
        boxes.append(box)
    return CompositeField(vals, regions, masks, boxes, hier.r)


# ----------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(hier: Hierarchy, path, t: float = 0.0):
    """Text header terminated by ``END\\n``, then raw little-endian float64
    arrays: for each level, E, B, Phi, Psi over the storage box, C order,
    shape ``(3, nx, ny, nz)``."""
    lines = [
        f"LDCM-CHECKPOINT {CHECKPOINT_VERSION}",
        f"J {hier.J}",
        f"r {hier.r}",
        f"N {hier.N}",
        f"h {hier.h!r}",
        f"dt {hier.dt!r}",
        f"M {hier.quad.M}",
        f"c {hier.c!r}",
        f"t {t!r}",
        "origin " + " ".join(repr(float(o)) for o in hier.origin),
    ]
    for j, lev in enumerate(hier.levels):
        s = lev.storage
        lines.append(
            f"level {j} boxes {len(lev.region)} ghost {lev.ghost} storage "
            + " ".join(map(str, s.lo + s.hi))
        )
        for b in lev.region:
            lines.append("box " + " ".join(map(str, b.lo + b.hi)))
    lines.append("END")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode())
        for lev in hier.levels:
            for n in FIELDS:
                fh.write(np.ascontiguousarray(lev.state[n].values, dtype="<f8").tobytes())


def load_checkpoint(path, patch_nodes: int = 33, workers: int = 1):
    """Inverse of :func:`save_checkpoint`; returns ``(hierarchy, t)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    end = raw.index(b"\nEND\n") + len(b"\nEND\n")
    header = raw[:end].decode().splitlines()
    if not header[0].startswith("LDCM-CHECKPOINT"):
        raise ValueError("not a checkpoint file")
    meta, levels = {}, []
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "END":
            continue
        if parts[0] == "level":
            levels.append([])
        elif parts[0] == "box":
            v = list(map(int, parts[1:]))
            levels[-1].append(IndexBox(v[:3], v[3:]))
        else:
            meta[parts[0]] = parts[1:]
    hier = Hierarchy(
        int(meta["N"][0]), levels[1:], int(meta["r"][0]), float(meta["dt"][0]),
        int(meta["M"][0]), float(meta["c"][0]), length=float(meta["h"][0]) * (int(meta["N"][0]) - 1),
        origin=tuple(float(v) for v in meta["origin"]), patch_nodes=patch_nodes, workers=workers,
    )
    off = end
    for lev in hier.levels:
        for n in FIELDS:
            a = lev.state[n].values
            cnt = a.size
            a[...] = np.frombuffer(raw, dtype="<f8", count=cnt, offset=off).reshape(a.shape)
            off += cnt * 8
    return hier, float(meta["t"][0])
