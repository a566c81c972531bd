"""Bundle structures: lifts, quaternion relations, Nijenhuis routes."""

import numpy as np
import pytest

from specgeo.charts import ChartCache, ManifoldSpec, chart_point
from specgeo.expr import parse_expression
from specgeo.geometry import DegenerateForm, complex_structure_affine, conjugate_connection
from specgeo.cotangent import (
    BundlePoint,
    form_matrix,
    g_N_at,
    horizontal_frame,
    j1_at,
    j2_at,
    j1_field,
    j2_field,
    nijenhuis_fd,
    nijenhuis_j2_closed_form,
    omega_alpha_forms,
    quaternion_relations,
)


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
CUBIC = make_spec("prepotential", ["z1^3 / z2"], z=[1.0, 1.0 + 1.0j], fd_step=3e-5)
SYMPL = make_spec("one_form", ["i*z1 + z2", "i*z2"], z=[0.0, 0.0])
CURVED = make_spec("one_form", ["i*z1 + z2^2", "i*z2"], z=[0.0, 0.3])


def bundle(spec, p=None):
    cp = chart_point(spec, spec.sample_points[0])
    if p is None:
        p = np.zeros(2 * spec.n)
    return BundlePoint(cp, np.asarray(p, dtype=float))


def test_bundle_point_validates_momenta():
    cp = chart_point(QUAD, QUAD.sample_points[0])
    with pytest.raises(ValueError):
        BundlePoint(cp, np.zeros(3))


def test_squares_to_minus_identity():
    eye = np.eye(8)
    for spec in (QUAD, CUBIC, SYMPL):
        xi = bundle(spec, p=[0.3, -0.2, 0.7, 0.1])
        for m in (j1_at(xi).matrix, j2_at(spec, xi, "omega").matrix):
            assert np.max(np.abs(m @ m + eye)) < 1e-12


def test_structures_do_not_depend_on_the_fiber():
    xi0 = bundle(CUBIC)
    xi1 = bundle(CUBIC, p=[5.0, -3.0, 2.0, 8.0])
    assert np.array_equal(j1_at(xi0).matrix, j1_at(xi1).matrix)
    assert np.array_equal(
        j2_at(CUBIC, xi0, "omega").matrix, j2_at(CUBIC, xi1, "omega").matrix
    )


def test_gn_flat_model():
    gn = g_N_at(QUAD, bundle(QUAD))
    assert np.array_equal(gn, np.diag([2.0] * 4 + [0.5] * 4))


def test_degenerate_anti_invariant_part_raises():
    # closed one-form data: the anti-invariant part vanishes identically
    with pytest.raises(DegenerateForm):
        j2_at(QUAD, bundle(QUAD), "omegaprime")


def test_horizontal_frame():
    xi = bundle(CUBIC, p=[0.4, -0.1, 0.2, 0.3])
    horizontal, vertical = horizontal_frame(CUBIC, xi)
    assert np.array_equal(horizontal, np.vstack([np.eye(4), np.zeros((4, 4))]))
    assert np.array_equal(vertical, np.vstack([np.zeros((4, 4)), np.eye(4)]))

    lifted, _ = horizontal_frame(CUBIC, xi, connection="conjugate")
    gamma = conjugate_connection(CUBIC, xi.base)
    # lift of d/dq^mu picks up p_rho Gamma'^rho_{mu nu} d/dp_nu
    for mu in range(4):
        expected = np.einsum("r,rn->n", xi.p, gamma[mu])
        assert np.allclose(lifted[4:, mu], expected, atol=1e-9)
    with pytest.raises(ValueError):
        horizontal_frame(CUBIC, xi, connection="levi-civita")


def test_quaternion_relations_flat():
    out = quaternion_relations(QUAD, bundle(QUAD))
    assert out["anticommute_invariant"] < 1e-12
    assert out["j3_squares_to_minus_identity"] < 1e-12
    assert out["commute_anti_invariant"] is None  # degenerate branch
    assert out["j3_squares_to_plus_identity"] is None
    assert out["commutator_block_identity"] < 1e-12
    assert out["anticommutator_block_identity"] < 1e-12


def test_para_branch_on_open_one_form():
    out = quaternion_relations(SYMPL, bundle(SYMPL, p=[1.0, 2.0, -1.0, 0.5]))
    assert out["commute_anti_invariant"] < 1e-12
    assert out["j3_squares_to_plus_identity"] < 1e-12
    assert out["anticommute_invariant"] < 1e-12
    assert out["commutator_block_identity"] < 1e-12
    assert out["anticommutator_block_identity"] < 1e-12


def test_block_identities_point_dependent():
    out = quaternion_relations(CUBIC, bundle(CUBIC, p=[0.9, -0.4, 0.3, 1.2]))
    assert out["commutator_block_identity"] < 1e-12
    assert out["anticommutator_block_identity"] < 1e-12


# ---------------------------------------------------------------------------
# Nijenhuis tensors
# ---------------------------------------------------------------------------

def basis(i, dim=8):
    e = np.zeros(dim)
    e[i] = 1.0
    return e


def test_nijenhuis_vanishes_for_constant_structures():
    cache = ChartCache(QUAD)
    xi = bundle(QUAD)
    for field in (j1_field(), j2_field(QUAD, "omega")):
        worst = 0.0
        for i in range(8):
            for j in range(i + 1, 8):
                value = nijenhuis_fd(QUAD, xi, field, basis(i), basis(j), cache=cache)
                worst = max(worst, float(np.max(np.abs(value))))
        assert worst < 1e-10


def test_nijenhuis_detects_nonintegrable_structure():
    """The designated counterexample: J2 built from a non-parallel
    anti-invariant part has nonvanishing torsion."""
    cache = ChartCache(CURVED)
    xi = bundle(CURVED)
    field = j2_field(CURVED, "omegaprime")
    worst = 0.0
    for i in range(4):
        for j in range(i + 1, 4):  # base directions carry the obstruction
            value = nijenhuis_fd(CURVED, xi, field, basis(i), basis(j), cache=cache)
            worst = max(worst, float(np.max(np.abs(value))))
    assert worst > 1e-2


@pytest.mark.parametrize("spec, rho", [
    (CUBIC, "omega11"),
    (CURVED, "omegaprime"),
    (SYMPL, "omegaprime"),
])
def test_two_path_nijenhuis_agreement(spec, rho):
    """J2 N(dq_i, dq_j) from finite differences equals the closed-form
    vertical vector of coefficient differences."""
    cache = ChartCache(spec)
    xi = bundle(spec)
    field = j2_field(spec, rho)
    j2m = j2_at(spec, xi, rho).matrix
    closed = nijenhuis_j2_closed_form(spec, xi, rho, cache=cache)
    assert np.allclose(closed, -closed.transpose(1, 0, 2))  # skew in (i, j)
    for i in range(4):
        for j in range(i + 1, 4):
            fd = j2m @ nijenhuis_fd(spec, xi, field, basis(i), basis(j), cache=cache)
            expected = np.concatenate([np.zeros(4), closed[i, j]])
            assert np.max(np.abs(fd - expected)) < 1e-5


# ---------------------------------------------------------------------------
# canonical two-forms
# ---------------------------------------------------------------------------

def test_omega_alpha_forms_flat():
    out = omega_alpha_forms(QUAD, bundle(QUAD))
    assert out["skew_residual"] < 1e-12
    assert max(out["closedness"]) < 1e-10
    assert out["invariant_part_parallel_residual"] < 1e-12


def test_omega_two_is_the_canonical_pairing():
    """g_N applied after J2 collapses to the block form [[0, -J^T],
    [J, 0]] whenever the metric comes from the same invariant part."""
    xi = bundle(CUBIC)
    out = omega_alpha_forms(CUBIC, xi, cache=ChartCache(CUBIC))
    jm = complex_structure_affine(xi.base).components
    expected = np.zeros((8, 8))
    expected[:4, 4:] = -jm.T
    expected[4:, :4] = jm
    assert np.max(np.abs(out["forms"][1] - expected)) < 1e-12
    assert out["closedness"][1] < 5e-6
    assert out["closedness"][2] < 5e-6


def test_form_matrix_names():
    cp = chart_point(CUBIC, CUBIC.sample_points[0])
    w = form_matrix(cp, "omega")
    w11 = form_matrix(cp, "omega11")
    wp = form_matrix(cp, "omegaprime")
    assert np.allclose(w11 + wp, w)
    with pytest.raises(ValueError):
        form_matrix(cp, "kaehler")
