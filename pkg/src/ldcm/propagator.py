"""Single-level time stepping.

The state on a level is ``U = (E, B, Phi, Psi)`` with ``Phi = curl B`` and
``Psi = curl E`` re-initialized at the start of every step. Sources enter
through a closed Newton-Cotes rule on the Duhamel integral; between
quadrature nodes both pairs ``(E, Phi)`` and ``(B, Psi)`` are advanced by the
compact propagator of length ``ds``::

    f' = K_H * f + s K_G * g
    g' = s K_GL * f + K_H * g

with ``s = +1`` for ``(E, Phi)`` and ``s = -1`` for ``(B, Psi)`` (the latter
runs the same propagator backwards in time, which flips ``K_G`` and leaves
``K_H`` unchanged).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from . import stencil
from .conv import NodeField, PatchRunner, boundary_deficit, convolve, fft_shape
from .grid import (
    ConfigurationError,
    ContractViolation,
    IndexBox,
    bounding_box,
    box_mask,
    partition_domain,
    tile_box,
)
from .kernel import PropagatorSet, assemble_propagator_set, required_half_width

log = logging.getLogger(__name__)

FIELDS = ("E", "B", "Phi", "Psi")


@dataclass(frozen=True)
class QuadratureScheme:
    dt: float
    M: int
    weights: np.ndarray

    @property
    def ds(self) -> float:
        return self.dt / (self.M - 1)


def make_quadrature(dt: float, M: int = 4) -> QuadratureScheme:
    """Composite Simpson 3/8 rule with ``M = 3k + 1`` nodes on ``[0, dt]``."""
    if M < 4 or (M - 1) % 3:
        raise ConfigurationError(f"the 3/8 rule needs M = 3k+1 >= 4 nodes, got M={M}")
    panels = (M - 1) // 3
    w = np.zeros(M)
    for p in range(panels):
        w[3 * p:3 * p + 4] += np.array([1.0, 3.0, 3.0, 1.0])
    ds = dt / (M - 1)
    return QuadratureScheme(dt, M, w * (3.0 * ds / 8.0))


def apply_pair(f: NodeField, g: NodeField, sign: int, kernels: PropagatorSet):
    """Propagate the pair ``(f, g)`` by one kernel step on ``f.box``.

    Both fields need ``kernels.half_width`` valid ghost layers.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    box = f.box
    rho = kernels.half_width
    f.require(box.grow(rho), "apply_pair")
    g.require(box.grow(rho), "apply_pair")
    Hf = convolve(kernels.K_H, f, box).values
    Gg = convolve(kernels.K_G, g, box).values
    Lf = convolve(kernels.K_GL, f, box).values
    Hg = convolve(kernels.K_H, g, box).values
    return (
        NodeField(Hf + sign * Gg, box, f.h, origin=f.origin),
        NodeField(sign * Lf + Hg, box, f.h, origin=f.origin),
    )


@dataclass
class StateU:
    E: NodeField
    B: NodeField
    Phi: NodeField
    Psi: NodeField

    def __getitem__(self, name: str) -> NodeField:
        return getattr(self, name)

    def arrays(self, names=FIELDS):
        return [self[n].values for n in names]

    def copy(self) -> "StateU":
        return StateU(*[
            NodeField(self[n].values.copy(), self[n].box, self[n].h, self[n].ghost,
                      self[n].valid_ghost, self[n].origin)
            for n in FIELDS
        ])


class Level:
    """Fields, kernels and decomposition for one grid level.

    Storage covers the bounding box of ``region`` grown by the ghost width.
    ``domain`` is given for the coarsest level only; it switches on the
    physical boundary treatment (exterior values replaced by the value at the
    output node).
    """

    def __init__(self, index: int, h: float, region, ds: float, c: float = 1.0,
                 domain: IndexBox | None = None, origin=(0.0, 0.0, 0.0),
                 patch_nodes: int = 33, workers: int = 1, ghost: int | None = None):
        self.index = index
        self.h = float(h)
        self.c = float(c)
        self.ds = float(ds)
        self.origin = tuple(float(o) for o in origin)
        self.domain = domain
        self.patch_nodes = patch_nodes
        self.workers = workers
        self.kernels = assemble_propagator_set(c, ds, h)
        self.rho = self.kernels.half_width
        self.ghost = max(self.rho, 2 * stencil.HALF) if ghost is None else ghost
        if self.ghost < self.rho:
            raise ConfigurationError("ghost width smaller than the kernel support")
        self.set_region(list(region) if not isinstance(region, IndexBox) else [region])

    # -- geometry -----------------------------------------------------------------

    def set_region(self, region: list[IndexBox], state: StateU | None = None):
        self.region = list(region)
        if self.domain is not None and any(not self.domain.contains(b) for b in self.region):
            raise ConfigurationError("level-0 region must lie inside the domain")
        self.bbox = bounding_box(self.region)
        self.storage = self.bbox.grow(self.ghost)
        self.region_mask = box_mask(self.region, self.storage)
        patches = []
        for b in self.region:
            try:
                patches += partition_domain(b, self.patch_nodes)
            except ConfigurationError:
                patches += tile_box(b, self.patch_nodes)
        self.runner = PatchRunner(patches, self.storage, self.region_mask, self.workers)
        self.axes = [self.origin[a] + self.storage.axis_indices(a) * self.h for a in range(3)]
        if self.domain is not None:
            self.chi = box_mask([self.domain], self.storage).astype(float)
            self.deficit = {
                name: boundary_deficit(getattr(self.kernels, name), self.domain, self.storage)
                for name in ("K_H", "K_G", "K_GL")
            }
            small = any(n <= 2 * self.rho for n in self.domain.shape)
            self._boundary_patch = [
                small or not self.domain.shrink(self.rho).contains(p.box) for p in self.runner.patches
            ]
        if state is None:
            state = StateU(*[NodeField.zeros(self.bbox, self.h, 3, self.ghost, self.origin)
                             for _ in FIELDS])
        self.state = state
        self._src_cache = None

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def coords_of(self, box: IndexBox):
        return [self.origin[a] + box.axis_indices(a) * self.h for a in range(3)]

    # -- boundary and ghosts -------------------------------------------------------

    def fill_physical_ghosts(self, names=("E", "B")):
        """Constant extension of the outermost domain layer into the exterior
        (used by difference stencils at the physical boundary)."""
        if self.domain is None:
            return
        sl = self.domain.slices(self.storage)
        for n in names:
            a = self.state[n].values
            inner = a[(slice(None),) + sl]
            pad = [(0, 0)] + [
                (self.domain.lo[k] - self.storage.lo[k], self.storage.hi[k] - self.domain.hi[k])
                for k in range(3)
            ]
            a[...] = np.pad(inner, pad, mode="edge")

    # -- algorithm pieces ----------------------------------------------------------

    def reinit_curls(self):
        """``Phi <- curl B``, ``Psi <- curl E`` on the region."""
        E, B = self.state.E.values, self.state.B.values
        self.state.Phi.values[...] = stencil.curl_array(B, self.h)
        self.state.Psi.values[...] = stencil.curl_array(E, self.h)

    def source_terms(self, source, t: float):
        """``(rho, J, grad rho, curl J)`` sampled on the storage box at time ``t``;
        the last evaluation is cached."""
        cache = self._src_cache
        if cache is not None and abs(cache[0] - t) <= 1e-13 * max(1.0, abs(t)):
            return cache[1]
        rho, J = source.sample(self.axes, t)
        derivs = getattr(source, "derivatives", None)
        if derivs is not None and getattr(source, "use_analytic_derivatives", False):
            grad_rho, curl_J = derivs(self.axes, t)
        else:
            grad_rho = stencil.grad_array(rho, self.h)
            curl_J = stencil.curl_array(J, self.h)
        terms = (rho, J, grad_rho, curl_J)
        self._src_cache = (t, terms)
        return terms

    def add_sources(self, source, t: float, weight: float):
        if source is None:
            return
        rho, J, grad_rho, curl_J = self.source_terms(source, t)
        s = 4.0 * np.pi * weight
        self.state.E.values -= s * J
        self.state.Phi.values -= (s * self.c) * grad_rho
        self.state.Psi.values -= s * curl_J

    def propagate(self):
        """One kernel step of both pairs on every region node; ghost values are
        left stale and must be refilled before the next use."""
        K = self.kernels
        st = self.state
        new = {n: np.zeros_like(st[n].values) for n in FIELDS}
        rho = self.rho
        bound = self.domain is not None

        def work(n, patch):
            ext = patch.box.grow(rho)
            sl = ext.slices(self.storage)
            L = fft_shape(ext.shape)
            sH, sG, sL = (K.K_H.spectrum(L), K.K_G.spectrum(L), K.K_GL.spectrum(L))
            edge = bound and self._boundary_patch[n]
            chi = self.chi[sl] if edge else None
            inner = patch.box.slices(self.storage)
            nb = patch.box.shape
            for fname, gname, sign in (("E", "Phi", 1.0), ("B", "Psi", -1.0)):
                fw = st[fname].values[(slice(None),) + sl]
                gw = st[gname].values[(slice(None),) + sl]
                if edge:
                    fw = fw * chi
                    gw = gw * chi
                F = sfft.rfftn(fw, s=L, axes=(1, 2, 3), workers=1)
                G = sfft.rfftn(gw, s=L, axes=(1, 2, 3), workers=1)
                fh = F * sH
                gh = G * sH
                F *= sL
                G *= sG
                if sign > 0:
                    fh += G
                    gh += F
                else:
                    fh -= G
                    gh -= F
                fo = sfft.irfftn(fh, s=L, axes=(1, 2, 3), workers=1, overwrite_x=True)
                go = sfft.irfftn(gh, s=L, axes=(1, 2, 3), workers=1, overwrite_x=True)
                crop = (slice(None), slice(rho, rho + nb[0]), slice(rho, rho + nb[1]),
                        slice(rho, rho + nb[2]))
                fo = fo[crop]
                go = go[crop]
                if edge:
                    fx = st[fname].values[(slice(None),) + inner]
                    gx = st[gname].values[(slice(None),) + inner]
                    dH = self.deficit["K_H"][inner]
                    dG = self.deficit["K_G"][inner]
                    dL = self.deficit["K_GL"][inner]
                    fo = fo + fx * dH + sign * gx * dG
                    go = go + sign * fx * dL + gx * dH
                self.runner.store(new[fname], n, fo)
                self.runner.store(new[gname], n, go)

        self.runner.map(work)
        for n in FIELDS:
            st[n].values = new[n]

    def enforce_constraints(self, source, t: float, eta_coef: float = stencil.FILTER_ETA):
        """Divergence filter on E (with rho at time t) and B."""
        eta = eta_coef * self.h**2
        rho = self.source_terms(source, t)[0] if source is not None else None
        st = self.state
        st.E.values = stencil.marder_array(st.E.values, eta, self.h, rho)
        st.B.values = stencil.marder_array(st.B.values, eta, self.h)

    # -- initial data --------------------------------------------------------------

    def set_fields(self, E=None, B=None):
        """Initialize E and B from callables ``fn(X, Y, Z) -> (3, ...)`` (or arrays)."""
        X, Y, Z = self.mesh()
        for name, v in (("E", E), ("B", B)):
            if v is None:
                self.state[name].values[...] = 0.0
            elif callable(v):
                self.state[name].values[...] = np.asarray(v(X, Y, Z))
            else:
                self.state[name].values[...] = v

    def interior_view(self, name: str, box: IndexBox | None = None) -> np.ndarray:
        box = self.bbox if box is None else box
        return self.state[name].values[(slice(None),) + box.slices(self.storage)]


def advance_single_level(level: Level, source, t: float, quad: QuadratureScheme,
                         eta_coef: float = stencil.FILTER_ETA) -> Level:
    """One time step of length ``quad.dt`` on a single level (in place)."""
    if abs(quad.ds - level.ds) > 1e-12 * quad.ds:
        raise ContractViolation("kernels were built for a different quadrature step")
    level.fill_physical_ghosts(("E", "B"))
    level.reinit_curls()
    for m in range(quad.M):
        tm = t + m * quad.ds
        level.add_sources(source, tm, quad.weights[m])
        if m < quad.M - 1:
            level.propagate()
    level.fill_physical_ghosts(("E", "B"))
    level.enforce_constraints(source, t + quad.dt, eta_coef)
    return level


def ghost_width(c: float, ds: float, h: float) -> int:
    """Ghost layers needed per quadrature sub-step."""
    return max(required_half_width(c, ds, h, folded=True), 2 * stencil.HALF)
