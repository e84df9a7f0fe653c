import numpy as np
import pytest

from ldcm.amr import (
    Hierarchy,
    NestingError,
    advance_hierarchy,
    composite_field,
    inject,
    load_checkpoint,
    quasi_interpolate,
    regrid,
    save_checkpoint,
)
from ldcm.grid import AlignmentError, IndexBox
from ldcm.propagator import Level, advance_single_level, make_quadrature
from ldcm.sources import TranslatingCharge, TranslatingChargeParams


def _interp(fn, n_coarse, fine_box, r=2):
    cbox = IndexBox.cube(-4, n_coarse + 4)
    h = 1.0 / n_coarse
    x = np.arange(-4, n_coarse + 5) * h
    coarse = fn(*np.meshgrid(x, x, x, indexing="ij"))
    out = quasi_interpolate(coarse, cbox, fine_box, r)
    xf = [fine_box.axis_indices(a) * h / r for a in range(3)]
    exact = fn(*np.meshgrid(*xf, indexing="ij"))
    return out, exact


def test_interpolation_reproduces_constants():
    out, _ = _interp(lambda X, Y, Z: np.full_like(X, 2.5), 8, IndexBox.cube(0, 16))
    assert np.abs(out - 2.5).max() < 1e-13


def test_interpolation_reproduces_quintics():
    fn = lambda X, Y, Z: X**5 - 2 * X**2 * Y**3 + Z**4 * Y + 0.3 * X * Y * Z - 1
    out, exact = _interp(fn, 8, IndexBox([0, 3, 5], [16, 11, 16]))
    assert np.abs(out - exact).max() < 1e-12


def test_interpolation_order_six():
    fn = lambda X, Y, Z: np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y + 0.3) * np.sin(2 * np.pi * Z + 1)
    errs = []
    for n in (8, 16, 32):
        out, exact = _interp(fn, n, IndexBox([n // 2, 0, 0], [n, 2 * n, 2]))
        errs.append(np.abs(out - exact).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates.min() > 5.5


def test_inject_copies_coincident_nodes():
    fl = IndexBox.cube(0, 8)
    cl = IndexBox.cube(-2, 6)
    fine = np.arange(9.0**3).reshape(9, 9, 9)
    coarse = np.zeros(cl.shape)
    inject(fine, fl, coarse, cl, IndexBox.cube(2, 6), 2)
    assert np.array_equal(coarse[3:6, 3:6, 3:6], fine[2:7:2, 2:7:2, 2:7:2])
    assert coarse.sum() == fine[2:7:2, 2:7:2, 2:7:2].sum()


def test_inject_rejects_misaligned():
    fl = IndexBox.cube(0, 8)
    with pytest.raises(AlignmentError):
        inject(np.zeros(fl.shape), fl, np.zeros((5, 5, 5)), IndexBox.cube(0, 4), IndexBox.cube(1, 5), 2)


N = 33
FINE = IndexBox.cube(24, 40)


def _hier(N=N, boxes=(FINE,), cfl=0.25):
    h = 1 / (N - 1)
    return Hierarchy(N, [list(boxes)] if boxes else [], 2, cfl * h)


def test_nesting_misaligned_region():
    with pytest.raises(NestingError):
        _hier(boxes=(IndexBox.cube(25, 40),))


def test_nesting_footprint_outside_coarse_region():
    with pytest.raises(NestingError):
        _hier(boxes=(IndexBox.cube(2, 40),))


def test_single_level_hierarchy_matches_level():
    p = TranslatingChargeParams(R0=0.25, x0=(0.5, 0.5, 0.5), nu=2.0, d=0.02)
    src = TranslatingCharge(p)
    n = 17
    h = 1 / (n - 1)
    dt = 0.5 * h
    q = make_quadrature(dt)
    dom = IndexBox.cube(0, n - 1)
    lev = Level(0, h, [dom], q.ds, domain=dom)
    lev.set_fields(E=src.initial_E)
    H = Hierarchy(n, [], 2, dt)
    H.set_fields(E=src.initial_E)
    for k in range(2):
        advance_single_level(lev, src, k * dt, q)
        advance_hierarchy(H, src, k * dt)
    for f in ("E", "B", "Phi", "Psi"):
        assert np.array_equal(lev.state[f].values, H.levels[0].state[f].values)


def test_two_level_zero_stays_zero():
    H = _hier()
    advance_hierarchy(H, None, 0.0)
    for lev in H.levels:
        for f in ("E", "B", "Phi", "Psi"):
            assert not lev.state[f].values.any()


def _smooth_fields():
    k = 2 * np.pi
    E = lambda X, Y, Z: np.stack([np.sin(k * Y), np.sin(k * Z), np.sin(k * X)])
    B = lambda X, Y, Z: np.stack([np.cos(k * Z), np.cos(k * X), np.cos(k * Y)])
    return E, B


def test_sync_is_idempotent():
    H = _hier()
    H.set_fields(*_smooth_fields())
    H.sync()
    before = [H.levels[j].state[f].values.copy() for j in range(2) for f in ("E", "B")]
    H.sync()
    after = [H.levels[j].state[f].values for j in range(2) for f in ("E", "B")]
    assert all(np.array_equal(a, b) for a, b in zip(before, after))


def test_regrid_noop_is_exact():
    H = _hier()
    H.set_fields(*_smooth_fields())
    before = [H.levels[j].state[f].values.copy() for j in range(2) for f in ("E", "B", "Phi", "Psi")]
    assert regrid(H, 1, [FINE]) is False
    after = [H.levels[j].state[f].values for j in range(2) for f in ("E", "B", "Phi", "Psi")]
    assert all(np.array_equal(a, b) for a, b in zip(before, after))


def regrid_round_trip_error(n):
    """Move the fine region by a quarter of its width and back; return the
    relative change of E and B on the fine level."""
    q = (n - 1) // 4
    box = IndexBox.cube(n - 1 - q, n - 1 + q)
    moved = box.shift((q, 0, 0))
    H = _hier(n, (box,))
    H.set_fields(*_smooth_fields())
    H.sync(("E", "B"))
    H.levels[0].fill_physical_ghosts(("E", "B"))
    ref = {f: H.levels[1].state[f].values[(slice(None),) + box.slices(H.levels[1].storage)].copy()
           for f in ("E", "B")}
    assert regrid(H, 1, [moved]) is True
    assert regrid(H, 1, [box]) is True
    lev = H.levels[1]
    return max(np.abs(lev.state[f].values[(slice(None),) + box.slices(lev.storage)] - ref[f]).max()
               for f in ("E", "B"))


def test_regrid_round_trip_small():
    assert regrid_round_trip_error(33) < 1e-5


def test_composite_prefers_finest():
    H = _hier()
    H.levels[1].state.E.values[...] = 1.0
    comp = composite_field(H, "E", 0)
    c0 = comp.on_level(0)
    cov = FINE.coarsen(2)
    inside = np.zeros(c0.shape, bool)
    inside[cov.slices(comp.boxes[0])] = True
    assert np.all(c0[inside] == 1.0) and np.all(c0[~inside] == 0.0)
    assert not comp.masks[0][inside].any() and comp.masks[0][~inside].all()
    assert comp.masks[1].all()


def test_checkpoint_round_trip(tmp_path, rng):
    H = _hier()
    for lev in H.levels:
        for f in ("E", "B", "Phi", "Psi"):
            lev.state[f].values[...] = rng.standard_normal(lev.state[f].values.shape)
    save_checkpoint(H, tmp_path / "c.bin", 0.125)
    G, t = load_checkpoint(tmp_path / "c.bin")
    assert t == 0.125 and G.J == H.J and G.dt == H.dt and G.h == H.h
    for a, b in zip(H.levels, G.levels):
        assert a.region == b.region and a.storage == b.storage
        for f in ("E", "B", "Phi", "Psi"):
            assert np.array_equal(a.state[f].values, b.state[f].values)
