"""Structures on the cotangent bundle N = T*M in induced coordinates.

Over the affine chart q = (x, y) the bundle carries coordinates (q, p)
and the flat connection splits TN into the coordinate horizontal space
span{d/dq} and the vertical space span{d/dp}.  Identifying the two
factors with T_m M and T*_m M, every structure below is a 2x2 block
matrix of size 4n.

Conventions (the covector action is J* eta = eta(J .), a transpose at
matrix level; a 2-form rho maps X to rho(X, .), which makes its block
the transpose of the component matrix rho_ij = rho(d_i, d_j)):

    J1 = [[J, 0], [0, J^T]]
    J2 = [[0, -V^-1], [V, 0]],  V = rho^T for rho in {omega, its
         invariant part, its anti-invariant part}
    g_N = diag(g, g^-1)

The commutator and anticommutator of J1 and J2 for the full symplectic
form reduce to block formulas in the invariant and anti-invariant parts
of rho and rho^-1; those are verified verbatim.  Integrability is
probed with finite-difference Nijenhuis tensors plus, for J2 on
coordinate pairs, the closed-form coefficient sum
(rho_jk,i - rho_ik,j) as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .charts import ChartCache, ChartPoint, ManifoldSpec, NotRegular
from .expr import EvaluationError
from .geometry import (
    DegenerateForm,
    StepTooLarge,
    conjugate_connection,
    hodge_split,
    nabla_J_analytic,
    symplectic_matrix,
    _j_matrix,
    _metric_of,
)

__all__ = [
    "BundlePoint",
    "BundleEndomorphism",
    "horizontal_frame",
    "form_matrix",
    "j1_at",
    "j2_at",
    "g_N_at",
    "quaternion_relations",
    "nijenhuis_fd",
    "nijenhuis_j2_closed_form",
    "j1_field",
    "j2_field",
    "omega_alpha_forms",
]


@dataclass(frozen=True)
class BundlePoint:
    """A cotangent-bundle point: regular base plus free momenta p."""

    base: ChartPoint
    p: np.ndarray

    def __post_init__(self):
        if self.p.shape != (2 * self.base.n,):
            raise ValueError(f"momenta must have length {2 * self.base.n}")

    @property
    def n(self) -> int:
        return self.base.n


@dataclass(frozen=True)
class BundleEndomorphism:
    """Endomorphism of T(T*M) over the horizontal/vertical splitting."""

    point: BundlePoint
    matrix: np.ndarray  # 4n x 4n

    @property
    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        m = 2 * self.point.n
        a = self.matrix
        return a[:m, :m], a[:m, m:], a[m:, :m], a[m:, m:]


def horizontal_frame(
    spec: ManifoldSpec, xi: BundlePoint, connection: str = "flat"
) -> tuple[np.ndarray, np.ndarray]:
    """Bases of the horizontal and vertical subspaces at xi, as columns.

    For the flat connection the affine coordinates are parallel, so the
    horizontal space is the coordinate one.  For the conjugate
    connection the lift of d/dq^mu acquires the vertical correction
    Gamma'^rho_{mu nu} p_rho d/dp_nu; the exact jet route supplies the
    coefficients.
    """
    m = 2 * xi.n
    vertical = np.vstack([np.zeros((m, m)), np.eye(m)])
    if connection == "flat":
        horizontal = np.vstack([np.eye(m), np.zeros((m, m))])
        return horizontal, vertical
    if connection != "conjugate":
        raise ValueError(f"unknown connection {connection!r}")
    gamma_conj = conjugate_connection(spec, xi.base, dJ=nabla_J_analytic(xi.base))
    correction = np.einsum("mrn,r->nm", gamma_conj, xi.p)
    return np.vstack([np.eye(m), correction]), vertical


def form_matrix(cp: ChartPoint, rho: str) -> np.ndarray:
    """Component matrix of the chosen 2-form on the base at cp."""
    w = symplectic_matrix(cp.n)
    if rho == "omega":
        return w
    w11, wprime = hodge_split(_j_matrix(cp), w)
    if rho == "omega11":
        return w11
    if rho == "omegaprime":
        return wprime
    raise ValueError(f"unknown form {rho!r}")


def j1_at(xi: BundlePoint) -> BundleEndomorphism:
    """Lift of the base complex structure: J on horizontal vectors and
    its dual map on covectors."""
    m = 2 * xi.n
    jm = _j_matrix(xi.base)
    matrix = np.zeros((2 * m, 2 * m))
    matrix[:m, :m] = jm
    matrix[m:, m:] = jm.T
    return BundleEndomorphism(xi, matrix)


def _form_as_map(cp: ChartPoint, rho: str, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """The map X -> rho(X, .) and its inverse; raises on singular rho."""
    v = form_matrix(cp, rho).T
    singular_values = np.linalg.svd(v, compute_uv=False)
    if singular_values[-1] <= tol * max(1.0, float(singular_values[0])):
        raise DegenerateForm(f"{rho} is singular at this point")
    return v, np.linalg.inv(v)


def j2_at(
    spec: ManifoldSpec, xi: BundlePoint, rho: str = "omega"
) -> BundleEndomorphism:
    """Almost complex structure from a nondegenerate 2-form rho on the
    base: vertical = rho-image of horizontal, and back with a sign."""
    m = 2 * xi.n
    v, b = _form_as_map(xi.base, rho, spec.tol)
    matrix = np.zeros((2 * m, 2 * m))
    matrix[:m, m:] = -b
    matrix[m:, :m] = v
    return BundleEndomorphism(xi, matrix)


def g_N_at(spec: ManifoldSpec, xi: BundlePoint) -> np.ndarray:
    """Bundle metric diag(g, g^-1); raises DegenerateForm when the base
    metric is numerically singular."""
    g = _metric_of(xi.base)
    g = 0.5 * (g + g.T)
    eigs = np.linalg.eigvalsh(g)
    if float(np.min(np.abs(eigs))) <= spec.tol * max(1.0, float(np.max(np.abs(eigs)))):
        raise DegenerateForm("base metric is singular at this point")
    m = 2 * xi.n
    out = np.zeros((2 * m, 2 * m))
    out[:m, :m] = g
    out[m:, m:] = np.linalg.inv(g)
    return out


def _invariant_parts_vector_side(jm: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    plus = 0.5 * (v + jm.T @ v @ jm)
    return plus, v - plus


def _invariant_parts_covector_side(jm: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    plus = 0.5 * (b + jm @ b @ jm.T)
    return plus, b - plus


def quaternion_relations(spec: ManifoldSpec, xi: BundlePoint) -> dict:
    """Residuals of the algebraic relations among J1 and the J2 family.

    Keys with None mean the branch was unavailable because the needed
    form is degenerate there (the anti-invariant part vanishes on every
    closed one-form, for instance).
    """
    m = 2 * xi.n
    eye = np.eye(2 * m)
    j1 = j1_at(xi).matrix
    jm = _j_matrix(xi.base)
    out: dict[str, Optional[float]] = {}

    try:
        j2i = j2_at(spec, xi, "omega11").matrix
        j3 = j1 @ j2i
        out["anticommute_invariant"] = float(np.max(np.abs(j1 @ j2i + j2i @ j1)))
        out["j3_squares_to_minus_identity"] = float(np.max(np.abs(j3 @ j3 + eye)))
    except DegenerateForm:
        out["anticommute_invariant"] = None
        out["j3_squares_to_minus_identity"] = None

    try:
        j2a = j2_at(spec, xi, "omegaprime").matrix
        j3p = j1 @ j2a
        out["commute_anti_invariant"] = float(np.max(np.abs(j1 @ j2a - j2a @ j1)))
        out["j3_squares_to_plus_identity"] = float(np.max(np.abs(j3p @ j3p - eye)))
    except DegenerateForm:
        out["commute_anti_invariant"] = None
        out["j3_squares_to_plus_identity"] = None

    j2f = j2_at(spec, xi, "omega").matrix
    v, b = _form_as_map(xi.base, "omega", spec.tol)
    v_plus, v_minus = _invariant_parts_vector_side(jm, v)
    b_plus, b_minus = _invariant_parts_covector_side(jm, b)

    def _blockform(upper: np.ndarray, lower: np.ndarray) -> np.ndarray:
        block = np.zeros((2 * m, 2 * m))
        block[:m, m:] = -upper
        block[m:, :m] = lower
        return block

    commutator = j1 @ j2f - j2f @ j1
    anticommutator = j1 @ j2f + j2f @ j1
    out["commutator_block_identity"] = float(
        np.max(np.abs(commutator - 2.0 * j1 @ _blockform(b_plus, v_plus)))
    )
    out["anticommutator_block_identity"] = float(
        np.max(np.abs(anticommutator - 2.0 * j1 @ _blockform(b_minus, v_minus)))
    )
    return out


# ---------------------------------------------------------------------------
# Nijenhuis tensors
# ---------------------------------------------------------------------------

def j1_field() -> Callable[[BundlePoint], np.ndarray]:
    def field(eta: BundlePoint) -> np.ndarray:
        return j1_at(eta).matrix
    return field


def j2_field(spec: ManifoldSpec, rho: str) -> Callable[[BundlePoint], np.ndarray]:
    def field(eta: BundlePoint) -> np.ndarray:
        return j2_at(spec, eta, rho).matrix
    return field


def _shifted(
    spec: ManifoldSpec, xi: BundlePoint, delta: np.ndarray, cache: ChartCache
) -> BundlePoint:
    m = 2 * xi.n
    dq, dp = delta[:m], delta[m:]
    if np.any(dq):
        try:
            base = cache.at_q(xi.base.q + dq, xi.base.z)
        except (NotRegular, EvaluationError) as err:
            raise StepTooLarge(f"bundle move left the regular domain: {err}") from err
    else:
        base = xi.base
    return BundlePoint(base, xi.p + dp)


def nijenhuis_fd(
    spec: ManifoldSpec,
    xi: BundlePoint,
    jfield: Callable[[BundlePoint], np.ndarray],
    X: np.ndarray,
    Y: np.ndarray,
    step: Optional[float] = None,
    cache: Optional[ChartCache] = None,
) -> np.ndarray:
    """N_J(X, Y) = [JX, JY] - J[JX, Y] - J[X, JY] + J^2 [X, Y] for
    constant-coefficient frame fields X, Y, with finite-difference Lie
    brackets of the pointwise-rotated fields."""
    h = spec.fd_step if step is None else step
    cache = cache if cache is not None else ChartCache(spec)
    j0 = jfield(xi)
    jx0, jy0 = j0 @ X, j0 @ Y

    def derivative(direction: np.ndarray, vec: np.ndarray) -> np.ndarray:
        # d/dt J(xi + t direction) vec at t = 0
        plus = jfield(_shifted(spec, xi, h * direction, cache))
        minus = jfield(_shifted(spec, xi, -h * direction, cache))
        return ((plus - minus) @ vec) / (2.0 * h)

    bracket_jx_jy = derivative(jx0, Y) - derivative(jy0, X)
    return bracket_jx_jy + j0 @ derivative(Y, X) - j0 @ derivative(X, Y)


def nijenhuis_j2_closed_form(
    spec: ManifoldSpec,
    xi: BundlePoint,
    rho: str,
    step: Optional[float] = None,
    cache: Optional[ChartCache] = None,
) -> np.ndarray:
    """Closed-form J2 N(d/dq^i, d/dq^j): the vertical vector with
    components rho_{jk,i} - rho_{ik,j}, from direct differences of the
    form coefficients.  Returned as [i, j, k]."""
    h = spec.fd_step if step is None else step
    cache = cache if cache is not None else ChartCache(spec)
    m = 2 * xi.n
    q = xi.base.q
    dw = np.empty((m, m, m))
    for mu in range(m):
        qp, qm = q.copy(), q.copy()
        qp[mu] += h
        qm[mu] -= h
        try:
            wp = form_matrix(cache.at_q(qp, xi.base.z), rho)
            wm = form_matrix(cache.at_q(qm, xi.base.z), rho)
        except (NotRegular, EvaluationError) as err:
            raise StepTooLarge(f"axis {mu}, step {h}: {err}") from err
        dw[mu] = (wp - wm) / (2.0 * h)
    out = np.empty((m, m, m))
    for i in range(m):
        for j in range(m):
            out[i, j] = dw[i][j, :] - dw[j][i, :]
    return out


# ---------------------------------------------------------------------------
# Canonical 2-forms
# ---------------------------------------------------------------------------

def _bundle_fd(
    spec: ManifoldSpec,
    xi: BundlePoint,
    build: Callable[[BundlePoint], np.ndarray],
    step: float,
    cache: ChartCache,
) -> np.ndarray:
    """Central difference of a bundle field along all 4n coordinate axes."""
    dim = 4 * xi.n
    rows = []
    for mu in range(dim):
        delta = np.zeros(dim)
        delta[mu] = step
        plus = build(_shifted(spec, xi, delta, cache))
        minus = build(_shifted(spec, xi, -delta, cache))
        rows.append((plus - minus) / (2.0 * step))
    return np.stack(rows)


def omega_alpha_forms(
    spec: ManifoldSpec,
    xi: BundlePoint,
    step: Optional[float] = None,
    cache: Optional[ChartCache] = None,
) -> dict:
    """The three 2-forms g_N o J_alpha with skewness and closedness data.

    J2 and J3 here use the invariant part of the symplectic form (the
    almost hyper-Hermitian branch).  Closedness of the first form is
    equivalent to the invariant part being parallel; the residual of
    that parallelism is reported alongside.
    """
    h = spec.fd_step if step is None else step
    cache = cache if cache is not None else ChartCache(spec)

    def forms_at(eta: BundlePoint) -> np.ndarray:
        gn = g_N_at(spec, eta)
        j1 = j1_at(eta).matrix
        j2 = j2_at(spec, eta, "omega11").matrix
        j3 = j1 @ j2
        return np.stack([j1.T @ gn, j2.T @ gn, j3.T @ gn])

    stacked = forms_at(xi)
    skew = float(np.max(np.abs(stacked + stacked.transpose(0, 2, 1))))
    d_all = _bundle_fd(spec, xi, forms_at, h, cache)  # [mu, alpha, nu, rho]
    d_forms = d_all.transpose(1, 0, 2, 3)
    closedness = []
    for alpha in range(3):
        dw = d_forms[alpha]
        # dw[m, n, r] = d_m w[n, r]; cyclic term is d_r w[m, n] = dw[r, m, n]
        d_three = dw - dw.transpose(1, 0, 2) + dw.transpose(1, 2, 0)
        closedness.append(float(np.max(np.abs(d_three))))
    parallel = float(
        np.max(np.abs(_base_form_derivative(spec, xi, "omega11", h, cache)))
    )
    return {
        "forms": (stacked[0], stacked[1], stacked[2]),
        "skew_residual": skew,
        "closedness": tuple(closedness),
        "invariant_part_parallel_residual": parallel,
    }


def _base_form_derivative(
    spec: ManifoldSpec, xi: BundlePoint, rho: str, step: float, cache: ChartCache
) -> np.ndarray:
    m = 2 * xi.n
    q = xi.base.q
    rows = []
    for mu in range(m):
        qp, qm = q.copy(), q.copy()
        qp[mu] += step
        qm[mu] -= step
        wp = form_matrix(cache.at_q(qp, xi.base.z), rho)
        wm = form_matrix(cache.at_q(qm, xi.base.z), rho)
        rows.append((wp - wm) / (2.0 * step))
    return np.stack(rows)
