import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldcm.conv import (
    NodeField,
    PatchRunner,
    boundary_deficit,
    convolve,
    convolve_bounded,
    direct_convolve,
)
from ldcm.grid import ContractViolation, IndexBox, tile_box
from ldcm.kernel import DiscreteKernel, build_spherical_delta


@given(rho=st.integers(1, 4), n=st.integers(1, 12), seed=st.integers(0, 2**16))
def test_hockney_matches_direct(rho, n, seed):
    rng = np.random.default_rng(seed)
    K = DiscreteKernel(rng.standard_normal((2 * rho + 1,) * 3), 0.5, 1.0)
    box = IndexBox((0, 0, 0), (n - 1, n + 1, n))
    f = NodeField(rng.standard_normal((3,) + box.grow(rho).shape), box, 0.5, rho)
    a = convolve(K, f, box).values
    b = direct_convolve(K, f, box).values
    assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()


def test_delta_kernel_is_identity(rng):
    w = np.zeros((5, 5, 5))
    w[2, 2, 2] = 1.0 / 0.1**3
    K = DiscreteKernel(w, 0.1, 1.0)
    box = IndexBox.cube(0, 6)
    f = NodeField(rng.standard_normal((1,) + box.grow(2).shape), box, 0.1, 2)
    assert np.allclose(convolve(K, f, box).values, f.data(box), atol=1e-13)


def test_shift_convention(rng):
    # K[rho + m] reads f(x - m h)
    w = np.zeros((3, 3, 3))
    w[2, 1, 1] = 1.0
    K = DiscreteKernel(w, 1.0, 1.0)
    box = IndexBox.cube(0, 4)
    f = NodeField(rng.standard_normal((1,) + box.grow(1).shape), box, 1.0, 1)
    out = convolve(K, f, box).values
    assert np.allclose(out[0], f.values[0, 0:5, 1:6, 1:6])


def test_ghost_contract():
    K = DiscreteKernel(np.ones((5, 5, 5)), 1.0, 1.0)
    box = IndexBox.cube(0, 4)
    f = NodeField.zeros(box, 1.0, 1, ghost=1)
    with pytest.raises(ContractViolation):
        convolve(K, f, box)


def test_nodefield_validation():
    box = IndexBox.cube(0, 3)
    with pytest.raises(ValueError):
        NodeField(np.zeros((1, 3, 4, 4)), box, 1.0)
    bad = np.zeros((1, 4, 4, 4))
    bad[0, 1, 1, 1] = np.nan
    with pytest.raises(ValueError):
        NodeField(bad, box, 1.0)


def test_boundary_deficit_vanishes_inside():
    K = build_spherical_delta(1.0, 0.1, 0.05)
    dom = IndexBox.cube(0, 20)
    d = boundary_deficit(K, dom)
    inner = dom.shrink(K.half_width)
    assert np.all(d[inner.slices(dom)] == 0.0)
    assert np.abs(d).max() > 0


def test_bounded_convolution_preserves_constants():
    K = build_spherical_delta(1.0, 0.1, 0.05)
    dom = IndexBox.cube(0, 12)
    f = NodeField(np.full((1,) + dom.shape, 2.5), dom, 0.05)
    out = convolve_bounded(K, f, dom)
    assert np.allclose(out.values, 2.5 * K.mass, rtol=1e-12)


def test_patch_runner_ownership(rng):
    storage = IndexBox.cube(-2, 20)
    region = IndexBox.cube(0, 18)
    mask = np.zeros(storage.shape, dtype=bool)
    mask[region.slices(storage)] = True
    runner = PatchRunner(tile_box(region, 7), storage, mask, workers=3)
    dest = np.zeros((1,) + storage.shape)
    counts = np.zeros(storage.shape)

    def work(n, p):
        return n, np.ones((1,) + p.box.shape)

    for n, vals in runner.map(work):
        before = dest.copy()
        runner.store(dest, n, vals)
        counts += (dest != before)[0]
        dest[:] = 0.0
    assert np.array_equal(counts, mask.astype(float))
