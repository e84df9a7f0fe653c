"""Oracle reports behind the ``kernel-check`` and ``selftest`` commands."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .. import bspline, stencil
from ..conv import NodeField, convolve, direct_convolve
from ..grid import IndexBox
from ..kernel import DiscreteKernel, assemble_propagator_set, kernel_symbol
from .diagnostics import richardson_rate

K_DIRECTION = np.array([1.0, 2.0, 3.0]) / np.sqrt(14.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def symbol_errors(R: float, h0: float, levels: int = 3, khs=(0.25, 0.5, 1.0), c: float = 1.0):
    """Errors of the discrete symbols of ``K_G`` and ``K_H`` for a shell of
    physical radius ``R`` at wavenumbers ``kh/h0`` on grids ``h0 / 2**l``.

    Returns ``{kh: {"G": [...], "H": [...]}}`` and the mass table per grid.
    """
    out = {kh: {"G": [], "H": []} for kh in khs}
    masses = []
    for lvl in range(levels):
        h = h0 / 2**lvl
        ks = assemble_propagator_set(c, R / c, h)
        masses.append((ks.K_G.mass, ks.K_H.mass, ks.K_GL.mass))
        for kh in khs:
            k = kh / h0
            kv = k * K_DIRECTION
            out[kh]["G"].append(abs(kernel_symbol(ks.K_G, kv) - np.sin(k * R) / k))
            out[kh]["H"].append(abs(kernel_symbol(ks.K_H, kv) - np.cos(k * R)))
    return out, masses


def kernel_report(R_cells: float = 1.0, h0: float = 1 / 16, levels: int = 3):
    errs, masses = symbol_errors(R_cells * h0, h0, levels)
    lines = [f"shell radius {R_cells} coarse cells, h0 = {h0}"]
    lines.append(f"{'kh':>6} {'kernel':>6} " + " ".join(f"{'err h/' + str(2**l):>12}" for l in range(levels))
                 + "  rates")
    for kh, d in errs.items():
        for name, e in d.items():
            rates = [richardson_rate(a, b) for a, b in zip(e, e[1:])]
            lines.append(f"{kh:6.2f} {name:>6} " + " ".join(f"{v:12.4e}" for v in e) + "  "
                         + " ".join(f"{r:6.2f}" for r in rates))
    for l, (g, hm, lm) in enumerate(masses):
        lines.append(f"masses h/{2**l}: K_G={g!r} (expect {R_cells * h0!r}) K_H={hm!r} K_GL={lm!r}")
    return "\n".join(lines), errs, masses


def spline_checks() -> list[CheckResult]:
    res = []
    x = np.linspace(-0.5, 0.5, 101)
    for kind in (bspline.W60, bspline.W66):
        w = kind.half_width
        nodes = np.arange(-w - 1, w + 2)
        pts = x[:, None] - nodes[None, :]
        vals = bspline.eval_spline(kind, pts)
        pu = np.abs(vals.sum(axis=1) - 1).max()
        res.append(CheckResult(f"{kind.name} partition of unity", pu < 1e-12, f"max dev {pu:.2e}"))
        mom = max(np.abs((vals * pts**m).sum(axis=1)).max() for m in range(1, 6))
        res.append(CheckResult(f"{kind.name} moments 1..5", mom < 1e-10, f"max {mom:.2e}"))
    card = np.abs(bspline.eval_spline(bspline.W60, np.arange(-4, 5).astype(float)) - (np.arange(-4, 5) == 0)).max()
    res.append(CheckResult("W60 cardinal", card < 1e-15, f"max dev {card:.2e}"))
    v0 = bspline.W66.pieces[0][-1]
    res.append(CheckResult("W66(0) = 19177/21084", Fraction(v0) == Fraction(19177, 21084), str(v0)))
    return res


def convolution_checks(seed: int = 0, pairs: int = 20) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        rho = int(rng.integers(1, 6))
        n = int(rng.integers(2 * rho + 1, 18))
        K = DiscreteKernel(rng.standard_normal((2 * rho + 1,) * 3), 1.0, 1.0)
        box = IndexBox.cube(0, n - 1)
        f = NodeField(rng.standard_normal((2,) + box.grow(rho).shape), box, 1.0, rho)
        a = convolve(K, f, box).values
        b = direct_convolve(K, f, box).values
        worst = max(worst, np.abs(a - b).max() / np.abs(b).max())
    return [CheckResult("Hockney vs direct", worst <= 1e-12, f"rel linf {worst:.2e}")]


def identity_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    n = 24
    x = np.arange(n) / n
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    a = rng.uniform(0.5, 2.0, (3, 3))
    ph = rng.uniform(0, 2 * np.pi, (3, 3))
    v = np.stack([np.sin(2 * np.pi * (a[i, 0] * X + ph[i, 0])) * np.cos(2 * np.pi * (a[i, 1] * Y + ph[i, 1]))
                  * np.sin(2 * np.pi * (a[i, 2] * Z + ph[i, 2])) for i in range(3)])
    s = v[0] * v[1] + v[2]
    h = 1.0 / n
    dc = stencil.div_array(stencil.curl_array(v, h), h)[6:-6, 6:-6, 6:-6]
    cg = stencil.curl_array(stencil.grad_array(s, h), h)[:, 6:-6, 6:-6, 6:-6]
    scale_dc = np.abs(v).max() / h**2
    scale_cg = np.abs(s).max() / h**2
    e1 = np.abs(dc).max() / scale_dc
    e2 = np.abs(cg).max() / scale_cg
    return [
        CheckResult("div curl = 0", e1 < 1e-13, f"rel {e1:.2e}"),
        CheckResult("curl grad = 0", e2 < 1e-13, f"rel {e2:.2e}"),
    ]


def selftest(seed: int = 0) -> list[CheckResult]:
    res = spline_checks() + convolution_checks(seed) + identity_checks(seed)
    _, errs, masses = kernel_report(1.0, 1 / 8, 3)
    g, hm, lm = masses[-1]
    res.append(CheckResult("kernel masses", abs(hm - 1) < 1e-12 and abs(lm) < 1e-12, f"K_H {hm!r} K_GL {lm!r}"))
    return res
