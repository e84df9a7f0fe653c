"""Constraint diagnostics, error norms and convergence rates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import stencil
from ..conv import NodeField
from ..grid import AlignmentError, ContractViolation, IndexBox

RATE_UNDEFINED = float("nan")


@dataclass
class DiagnosticFields:
    """Constraint residuals on one level, restricted to its region bounding box."""

    K_B: np.ndarray
    K_E: np.ndarray
    D_B: np.ndarray
    D_E: np.ndarray
    mask: np.ndarray

    def norms(self, de_scale: float = 1.0) -> dict:
        out = {}
        for name, arr, scale in (
            ("K_B", self.K_B, 1.0),
            ("K_E", self.K_E, 1.0),
            ("D_B", self.D_B, 1.0),
            ("D_E", self.D_E, de_scale),
        ):
            v = arr[..., self.mask] if arr.ndim == 4 else arr[self.mask]
            v = np.abs(v) / scale
            n = v.size if v.size else 1
            out[name + "_linf"] = float(v.max()) if v.size else 0.0
            out[name + "_l2"] = float(np.sqrt(np.sum(v * v) / n))
        return out


def residual_arrays(E, B, Phi, Psi, rho, h):
    """``(Phi - curl B, Psi - curl E, div B, div E - 4 pi rho)`` on whole arrays;
    entries within 3 layers of the array edge are not meaningful."""
    K_B = Phi - stencil.curl_array(B, h)
    K_E = Psi - stencil.curl_array(E, h)
    D_B = stencil.div_array(B, h)
    D_E = stencil.div_array(E, h)
    if rho is not None:
        D_E = D_E - 4.0 * np.pi * rho
    return K_B, K_E, D_B, D_E


def constraint_diagnostics(level, source, t: float) -> DiagnosticFields:
    """Residuals of the four constraints on ``level``'s region.

    E and B must hold valid values three layers beyond the region.
    """
    st = level.state
    rho = level.source_terms(source, t)[0] if source is not None else None
    K_B, K_E, D_B, D_E = residual_arrays(
        st.E.values, st.B.values, st.Phi.values, st.Psi.values, rho, level.h
    )
    box = level.bbox
    sl = box.slices(level.storage)
    mask = level.region_mask[sl]
    full = (slice(None),) + sl
    return DiagnosticFields(K_B[full], K_E[full], D_B[sl], D_E[sl], mask)


def field_diagnostics(fields: dict, h: float, rho=None, box: IndexBox | None = None) -> DiagnosticFields:
    """Residuals for a dictionary of :class:`NodeField` (``E, B, Phi, Psi``);
    ghost layers must be valid to width 3."""
    for name in ("E", "B"):
        if fields[name].valid_ghost < stencil.HALF:
            raise ContractViolation(f"{name} needs {stencil.HALF} valid ghost layers for diagnostics")
    E = fields["E"]
    r = rho.values[0] if isinstance(rho, NodeField) else rho
    K_B, K_E, D_B, D_E = residual_arrays(
        E.values, fields["B"].values, fields["Phi"].values, fields["Psi"].values, r, h
    )
    box = E.box if box is None else box
    sl = box.slices(E.full_box)
    full = (slice(None),) + sl
    return DiagnosticFields(K_B[full], K_E[full], D_B[sl], D_E[sl], np.ones(box.shape, dtype=bool))


def linf(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def l2(a) -> float:
    a = np.asarray(a)
    return float(np.sqrt(np.mean(a * a))) if a.size else 0.0


def richardson_rate(err_coarse: float, err_fine: float, ratio: float = 2.0) -> float:
    """``log(err_coarse / err_fine) / log(ratio)``; NaN if either error is not
    positive."""
    if not (err_coarse > 0.0 and err_fine > 0.0) or not (math.isfinite(err_coarse) and math.isfinite(err_fine)):
        return RATE_UNDEFINED
    return math.log(err_coarse / err_fine) / math.log(ratio)


def sampled_difference(fine, coarse, region: IndexBox | None = None, ratio: int = 2) -> np.ndarray:
    """Fine values at nodes coinciding with ``coarse`` nodes minus the coarse
    values, on the coarse index set ``region`` (default: the coarse box).

    Accepts :class:`NodeField` pairs (index boxes in their own level spacing)
    or plain arrays, where the fine array must have ``ratio*(n-1)+1`` nodes per
    axis over the same physical extent.
    """
    if isinstance(fine, NodeField) and isinstance(coarse, NodeField):
        region = coarse.box if region is None else region
        fbox = region.refine(ratio)
        if not fine.valid_box.contains(fbox):
            raise AlignmentError(f"fine field does not cover {fbox}")
        coarse.require(region, "sampled_difference")
        fv = fine.data(fbox)[(slice(None),) + (slice(None, None, ratio),) * 3]
        return fv - coarse.data(region)
    fine = np.asarray(fine)
    coarse = np.asarray(coarse)
    n = coarse.shape[-3:]
    m = fine.shape[-3:]
    if any(mi != ratio * (ni - 1) + 1 for mi, ni in zip(m, n)):
        raise AlignmentError(f"fine shape {m} is not a refinement of {n} by {ratio}")
    fv = fine[(Ellipsis,) + (slice(None, None, ratio),) * 3]
    diff = fv - coarse
    if region is not None:
        diff = diff[(Ellipsis,) + region.slices(IndexBox((0, 0, 0), tuple(k - 1 for k in n)))]
    return diff
