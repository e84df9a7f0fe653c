"""The two high-order B-splines used by the solver.

``W60`` is the sixth-order, C0 cardinal spline used to regularize point
deposits (it is the 6-point Lagrange interpolation kernel). ``W66`` is the
sixth-order quasi-interpolant used to transfer fields between levels.

Coefficients are stored as exact rationals, highest power first, one row per
unit interval of ``|x|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as F

import numpy as np


@dataclass(frozen=True)
class SplineKind:
    name: str
    order: int
    smoothness: int
    pieces: tuple[tuple[F, ...], ...]
    _coef: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # re-expand each piece about its interval midpoint k + 1/2 (exactly),
        # which keeps float evaluation free of cancellation
        rows = [_recenter(p, F(2 * k + 1, 2)) for k, p in enumerate(self.pieces)]
        object.__setattr__(self, "_coef", np.array([[float(c) for c in r] for r in rows]))

    @property
    def half_width(self) -> int:
        return len(self.pieces)

    def __call__(self, x):
        return eval_spline(self, x)


def _recenter(coef, c: F) -> list[F]:
    """Coefficients (highest power first) of ``p(u + c)`` for ``p`` given by ``coef``."""
    out = [F(0)] * len(coef)
    for a in coef:
        # out <- out * (u + c) + a, polynomials stored highest power first
        nxt = out[1:] + [F(0)]
        nxt = [n + c * o for n, o in zip(nxt, out)]
        nxt[-1] += a
        out = nxt
    return out


W60 = SplineKind(
    "W60",
    order=6,
    smoothness=0,
    pieces=(
        (F(-1, 12), F(1, 4), F(5, 12), F(-5, 4), F(-1, 3), F(1)),
        (F(1, 24), F(-3, 8), F(25, 24), F(-5, 8), F(-13, 12), F(1)),
        (F(-1, 120), F(1, 8), F(-17, 24), F(15, 8), F(-137, 60), F(1)),
    ),
)

W66 = SplineKind(
    "W66",
    order=6,
    smoothness=6,
    pieces=(
        (F(-665, 12048), F(665, 3012), F(-2419, 12048), F(-2437, 12048), F(0),
         F(2723, 3012), F(0), F(-4543, 3012), F(0), F(19177, 21084)),
        (F(133, 4016), F(-399, 1004), F(39659, 20080), F(-104409, 20080),
         F(23443, 3012), F(-14175, 2008), F(7553, 1506), F(-32207, 10040),
         F(2933, 15060), F(13081, 14056)),
        (F(-133, 12048), F(665, 3012), F(-114139, 60240), F(109283, 12048),
         F(-79303, 3012), F(283423, 6024), F(-75215, 1506), F(170023, 6024),
         F(-90923, 15060), F(-17653, 42168)),
        (F(19, 12048), F(-133, 3012), F(225859, 421680), F(-221003, 60240),
         F(23299, 1506), F(-30793, 753), F(49184, 753), F(-208208, 3765),
         F(53632, 3765), F(32512, 5271)),
    ),
)


def eval_spline(kind: SplineKind, x):
    """Evaluate ``kind`` at ``x`` (scalar or array); zero outside the support."""
    ax = np.abs(np.asarray(x, dtype=float))
    piece = np.minimum(ax.astype(np.int64), kind.half_width - 1)
    coef = kind._coef[piece]
    u = ax - (piece + 0.5)
    # Horner in the offset from the piece midpoint
    val = np.zeros_like(ax)
    for k in range(coef.shape[-1]):
        val = val * u + coef[..., k]
    val = np.where(ax < kind.half_width, val, 0.0)
    return val if val.ndim else float(val)


def weights_1d(kind: SplineKind, offset: float):
    """Nodes ``i`` and weights ``W(offset - i)`` over the support of the spline."""
    base = int(np.floor(offset))
    nodes = np.arange(base - kind.half_width + 1, base + kind.half_width + 1)
    return nodes, eval_spline(kind, offset - nodes)


def tensor_weights(kind: SplineKind, offset) -> np.ndarray:
    """Tensor-product stencil ``W(ox - i) W(oy - j) W(oz - k)``.

    The stencil spans ``i, j, k`` in ``[-w, w]`` with ``w = half_width`` and
    is indexed so that ``weights[w, w, w]`` is node 0.
    """
    w = kind.half_width
    idx = np.arange(-w, w + 1)
    f = [eval_spline(kind, float(o) - idx) for o in offset]
    return np.einsum("i,j,k->ijk", *f)


def interpolation_matrix(kind: SplineKind, targets, sources) -> np.ndarray:
    """Dense 1D matrix ``M[t, s] = W(targets[t] - sources[s])`` (positions in
    units of the source spacing)."""
    t = np.asarray(targets, dtype=float)[:, None]
    s = np.asarray(sources, dtype=float)[None, :]
    return eval_spline(kind, t - s)
