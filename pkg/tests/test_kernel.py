import numpy as np
import pytest

from ldcm.kernel import (
    KernelSizeError,
    SphereQuadrature,
    assemble_propagator_set,
    build_spherical_delta,
    cube_symmetries,
    dump_kernel,
    kernel_symbol,
    required_half_width,
)


@pytest.fixture(scope="module")
def kset():
    return assemble_propagator_set(1.0, 0.1, 0.05)


def _second_moment(K):
    rho = K.half_width
    x = np.arange(-rho, rho + 1) * K.h
    r2 = x[:, None, None] ** 2 + x[None, :, None] ** 2 + x[None, None, :] ** 2
    return float(np.sum(K.weights * r2) * K.h**3)


def test_masses(kset):
    assert abs(kset.K_G.mass - 0.1) < 1e-12 * 0.1
    assert abs(kset.K_H.mass - 1.0) < 1e-12
    scale = np.abs(kset.K_GL.weights).sum() * kset.h**3
    assert abs(kset.K_GL.mass) < 1e-12 * scale


def test_second_moments(kset):
    # Taylor coefficients of sin(kR)/k, cos(kR) and -k sin(kR): R^3, 3R^2, 6R
    R = 0.1
    assert _second_moment(kset.K_G) == pytest.approx(R**3, rel=1e-10)
    assert _second_moment(kset.K_H) == pytest.approx(3 * R**2, rel=1e-10)
    assert _second_moment(kset.K_GL) == pytest.approx(6 * R, rel=1e-10)


def test_directional_kernels_are_odd():
    q = SphereQuadrature.for_radius(2.0)
    Gx = build_spherical_delta(1.0, 0.1, 0.05, q, 1)
    assert np.allclose(Gx.weights, -Gx.weights[::-1], atol=1e-13 * np.abs(Gx.weights).max())
    assert abs(Gx.mass) < 1e-14


def test_cube_symmetry(kset):
    w = kset.K_H.weights
    assert np.allclose(w, np.transpose(w, (1, 2, 0)), atol=1e-12 * np.abs(w).max())
    assert np.allclose(w, w[::-1], atol=1e-12 * np.abs(w).max())


def test_cube_group_has_48_elements():
    mats = cube_symmetries()
    assert len(mats) == 48
    assert len({m.tobytes() for m in mats}) == 48


def test_half_width_rule():
    assert required_half_width(1.0, 0.1, 0.05) == 2 + 3
    assert required_half_width(1.0, 0.1, 0.05, folded=True) == 2 + 6
    assert assemble_propagator_set(1.0, 0.1, 0.05).half_width == 8


def test_kernel_size_guard():
    with pytest.raises(KernelSizeError):
        build_spherical_delta(1.0, 1.0, 0.01, max_half_width=20)


def test_symbol_of_shell():
    K = build_spherical_delta(1.0, 0.1, 0.025)
    k = np.array([3.0, 4.0, 12.0])
    kk = np.linalg.norm(k)
    assert kernel_symbol(K, k) == pytest.approx(np.sin(kk * 0.1) / kk, rel=1e-5)


def test_symbol_order_six():
    R, h0 = 1 / 16, 1 / 16
    errs = []
    for l in range(3):
        K = build_spherical_delta(1.0, R, h0 / 2**l)
        k = 0.5 / h0
        kv = k * np.array([1.0, 2.0, 3.0]) / np.sqrt(14)
        errs.append(abs(kernel_symbol(K, kv) - np.sin(k * R) / k))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates.min() > 5.5


def test_quadrature_integrates_low_harmonics():
    q = SphereQuadrature.product(6)
    p = q.points
    assert q.weights.sum() == pytest.approx(4 * np.pi)
    assert np.sum(q.weights * p[:, 0] ** 2) == pytest.approx(4 * np.pi / 3)
    assert np.sum(q.weights * p[:, 0] ** 2 * p[:, 1] ** 2) == pytest.approx(4 * np.pi / 15)


def test_dump_kernel(tmp_path, kset):
    path = tmp_path / "k.txt"
    dump_kernel(kset.K_G, path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"# half_width {kset.K_G.half_width}"
    body = [l for l in lines if not l.startswith("#")]
    assert len(body) == np.count_nonzero(kset.K_G.weights)
    total = sum(float(l.split()[3]) for l in body) * kset.h**3
    assert total == pytest.approx(0.1, rel=1e-12)
