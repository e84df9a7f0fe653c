import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldcm.grid import (
    AlignmentError,
    ConfigurationError,
    ContractViolation,
    GridGeometry,
    IndexBox,
    Patch,
    box_mask,
    bounding_box,
    partition_domain,
    subtract,
    tile_box,
)

coord = st.integers(-20, 20)
ext = st.integers(0, 12)


@st.composite
def boxes(draw):
    lo = [draw(coord) for _ in range(3)]
    return IndexBox(lo, [l + draw(ext) for l in lo])


def test_shape_and_size():
    b = IndexBox((0, 0, 0), (4, 2, 0))
    assert b.shape == (5, 3, 1)
    assert b.size == 15


def test_empty_box_rejected():
    with pytest.raises(ValueError):
        IndexBox((0, 0, 0), (-1, 0, 0))


def test_refine_coarsen_round_trip():
    b = IndexBox((2, 4, 6), (10, 12, 14))
    assert b.refine(2).coarsen(2) == b
    assert b.refine(4) == IndexBox((8, 16, 24), (40, 48, 56))


def test_coarsen_misaligned_raises():
    with pytest.raises(AlignmentError):
        IndexBox((1, 0, 0), (4, 4, 4)).coarsen(2)


def test_ratio_below_two_rejected():
    with pytest.raises(ConfigurationError):
        IndexBox.cube(0, 4).refine(1)


def test_coarsen_outer_covers():
    b = IndexBox((3, -3, 0), (9, 5, 1))
    c = b.coarsen_outer(2)
    assert c.refine(2).contains(b)
    assert c == IndexBox((1, -2, 0), (5, 3, 1))


def test_slices_outside_raise_contract():
    with pytest.raises(ContractViolation):
        IndexBox.cube(0, 5).slices(IndexBox.cube(1, 5))


@given(boxes(), boxes())
def test_subtract_partitions_difference(a, b):
    within = bounding_box([a, b])
    pieces = subtract(a, b)
    count = np.zeros(within.shape, dtype=int)
    for p in pieces:
        count[p.slices(within)] += 1
    expect = box_mask([a], within) & ~box_mask([b], within)
    assert np.array_equal(count, expect.astype(int))


@given(boxes(), boxes())
def test_intersect_commutes(a, b):
    assert a.intersect(b) == b.intersect(a)


def test_partition_shares_faces():
    patches = partition_domain(IndexBox.cube(0, 64), 33)
    assert len(patches) == 8
    lo = sorted({p.box.lo[0] for p in patches})
    hi = sorted({p.box.hi[0] for p in patches})
    assert lo == [0, 32] and hi == [32, 64]


def test_partition_rejects_bad_axis():
    with pytest.raises(ConfigurationError, match="axis 1"):
        partition_domain(IndexBox((0, 0, 0), (64, 63, 64)), 33)


def test_tile_box_covers():
    b = IndexBox((0, 0, 0), (40, 10, 5))
    m = np.zeros(b.shape, dtype=int)
    for p in tile_box(b, 16):
        m[p.box.slices(b)] = 1
    assert m.all()


def test_patch_ghost_mask():
    p = Patch(IndexBox.cube(0, 2), 1)
    m = p.ghost_mask()
    assert m.shape == (5, 5, 5)
    assert m.sum() == 125 - 27


def test_geometry_coords():
    g = GridGeometry((0.0, 1.0, 2.0), 0.5, IndexBox.cube(0, 2))
    x, y, z = g.coords()
    assert np.allclose(x, [0, 0.5, 1.0])
    assert np.allclose(z, [2.0, 2.5, 3.0])
