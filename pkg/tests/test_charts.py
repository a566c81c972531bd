"""Immersion, regularity, special coordinates and the ambient pairing."""

import numpy as np
import pytest

from specgeo.charts import (
    ChartCache,
    ManifoldSpec,
    NewtonDiverged,
    NotRegular,
    ambient_symplectic_pullback,
    chart_point,
    gamma_pullback,
    immersion_phi,
    invert_special_coordinates,
    is_lagrangian,
    regularity_matrix,
)
from specgeo.expr import parse_expression


def make_spec(kind, sources, n=2, z=None, **kwargs):
    if z is None:
        z = [0.4 + 0.3j, -0.2 + 0.6j][:n]
    return ManifoldSpec(
        n=n, kind=kind,
        components=tuple(parse_expression(s, n) for s in sources),
        sample_points=(np.asarray(z, dtype=complex),),
        **kwargs,
    )


QUAD = make_spec("prepotential", ["(i/2) * (z1^2 + z2^2)"])
TAU = make_spec("prepotential", ["i*z1^2 + z1*z2 + (i/2)*z2^2"])
CUBIC = make_spec("prepotential", ["z1^3 / z2"], z=[1.0, 1.0 + 1.0j], fd_step=3e-5)
SYMPL = make_spec("one_form", ["i*z1 + z2", "i*z2"], z=[0.0, 0.0])
DEGEN = make_spec("prepotential", ["z1^2 / 2"], n=1, z=[0.5 + 0.5j])


def test_immersion_phi_quadratic():
    z = np.array([1 + 2j, -3 + 0.5j])
    phi = immersion_phi(QUAD, z)
    # dF = i z, so the graph is (z, i z)
    assert np.allclose(phi, np.concatenate([z, 1j * z]), atol=1e-15)


def test_regularity_matrix():
    imh, ok = regularity_matrix(QUAD, np.array([5.0 + 1j, -2.0]))
    assert ok and np.allclose(imh, np.eye(2))
    # the cubic model degenerates on the diagonal-ish locus z = (1, 1)
    _, ok = regularity_matrix(CUBIC, np.array([1.0, 1.0]))
    assert not ok
    imh, ok = regularity_matrix(CUBIC, np.array([1.0, 1.0 + 1.0j]))
    assert ok
    # closed form at z = (1, 1 + i t): det Im H = -12 t^4 / (1 + t^2)^4
    assert np.linalg.det(imh) == pytest.approx(-0.75, rel=1e-12)


def test_chart_point_requires_regularity():
    with pytest.raises(NotRegular):
        chart_point(CUBIC, np.array([1.0, 1.0]))
    with pytest.raises(NotRegular):
        chart_point(DEGEN, np.array([0.5 + 0.5j]))
    with pytest.raises(NotRegular):
        chart_point(DEGEN, np.array([-2.0 + 0.1j]))  # nowhere regular


def test_chart_point_fields():
    cp = chart_point(CUBIC, CUBIC.sample_points[0])
    assert np.allclose(cp.q, np.concatenate([cp.z.real, [j.value.real for j in cp.jets]]))
    n = CUBIC.n
    jac = np.zeros((2 * n, 2 * n))
    jac[:n, :n] = np.eye(n)
    jac[n:, :n] = cp.H.real
    jac[n:, n:] = -cp.H.imag
    assert np.array_equal(cp.Jac, jac)
    assert np.allclose(cp.Jac @ cp.Jac_inv, np.eye(2 * n), atol=1e-13)
    assert np.allclose(cp.dH, cp.dH.transpose(0, 2, 1))  # holomorphic symmetry


def test_is_lagrangian():
    assert is_lagrangian(CUBIC, CUBIC.sample_points[0]) == (True, 0.0)
    flag, residual = is_lagrangian(SYMPL, SYMPL.sample_points[0])
    assert not flag
    assert residual == 1.0  # H - H^T = [[0, 1], [-1, 0]] exactly
    one_d = make_spec("one_form", ["i*z1"], n=1, z=[0.3])
    assert is_lagrangian(one_d, one_d.sample_points[0]) == (True, 0.0)


# ---------------------------------------------------------------------------
# Newton inversion
# ---------------------------------------------------------------------------

def test_newton_round_trip():
    cp = chart_point(CUBIC, CUBIC.sample_points[0])
    start = cp.z + np.array([0.05 - 0.02j, -0.03 + 0.04j])
    z = invert_special_coordinates(CUBIC, cp.q, start)
    assert np.max(np.abs(z - cp.z)) < 1e-12


def test_newton_divergence_and_singularity():
    cp = chart_point(CUBIC, CUBIC.sample_points[0])
    runaway = cp.q + np.array([0.0, 0.0, 1e9, 0.0])
    with pytest.raises(NewtonDiverged):
        invert_special_coordinates(CUBIC, runaway, cp.z)
    with pytest.raises(NotRegular):
        invert_special_coordinates(DEGEN, np.array([0.6, 0.3]), np.array([0.5 + 0.5j]))


def test_chart_cache_memoizes():
    cache = ChartCache(CUBIC)
    cp = cache.at_z(CUBIC.sample_points[0])
    again = cache.at_q(cp.q, cp.z + 0.01)
    assert again is cp  # seeded by at_z, no second Newton solve
    q2 = cp.q + np.array([1e-3, 0, 0, 0])
    first = cache.at_q(q2, cp.z)
    assert cache.at_q(q2, cp.z) is first


# ---------------------------------------------------------------------------
# ambient pairing
# ---------------------------------------------------------------------------

def test_gamma_pullback_constant_models():
    pull, ok, sig = gamma_pullback(TAU, np.array([9.0 + 2j, -4.0]))
    assert ok and sig == (2, 0, 0)
    # 2 Im H with Im H = diag(2, 1)
    assert np.allclose(sorted(np.linalg.eigvalsh(pull)), [2.0, 4.0], atol=1e-12)

    pull, ok, sig = gamma_pullback(DEGEN, np.array([0.5 + 0.5j]))
    assert not ok
    assert sig == (0, 0, 1)
    assert np.allclose(pull, 0.0)


def test_ambient_symplectic_pullback_detects_closedness():
    cp = chart_point(SYMPL, SYMPL.sample_points[0])
    real_part = ambient_symplectic_pullback(SYMPL, cp).real
    assert np.linalg.norm(real_part) == pytest.approx(np.sqrt(6.0), rel=1e-12)
    cp = chart_point(CUBIC, CUBIC.sample_points[0])
    assert np.max(np.abs(ambient_symplectic_pullback(CUBIC, cp).real)) < 1e-13
