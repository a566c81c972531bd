"""Intrinsic tensors in the affine frame (d/dx, d/dy).

The flat torsionfree connection has vanishing coefficients in the
affine coordinates q = (x, y), so every covariant derivative below is a
plain partial derivative, taken by central finite differences: perturb
q, Newton-invert back to z, rebuild the tensor.  A second pass at half
the step gives a Richardson-style consistency ratio (about 4 for an
O(h^2) scheme) wherever the residual is above rounding noise.

Fixed conventions, validated on the flat quadratic model:
  wedge      dx^dy = dx (x) dy - dy (x) dx, so omega = 2 sum dx^i wedge dy_i
             has block matrix [[0, 2I], [-2I, 0]];
  metric     g = omega11(J., .), as a matrix g = J^T W11; the same sign
             satisfies omega = g(., J.) on Kahler samples;
  endomorphism derivative  (nabla_mu J)^a_nu is stored as [mu, a, nu].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .charts import (
    ChartCache,
    ChartPoint,
    ManifoldSpec,
    NotRegular,
    ambient_space,
    component_jets,
    prepotential_value,
)
from .expr import EvaluationError

__all__ = [
    "StepTooLarge",
    "DegenerateForm",
    "TensorSample",
    "ThetaFamily",
    "complex_structure_affine",
    "symplectic_matrix",
    "symplectic_form_affine",
    "hodge_split",
    "kaehler_metric",
    "metric_from_ambient",
    "nabla_J",
    "nabla_J_analytic",
    "d_nabla_J",
    "theta_connection",
    "conjugate_connection",
    "complex_connection_D",
    "nabla_g",
    "levi_civita",
    "g_duality_check",
    "ambient_metric_identity",
    "connection_difference_j_compatible",
    "conic_checks",
    "fd_field",
    "exterior_derivative_max",
]


class StepTooLarge(RuntimeError):
    """A finite-difference neighbor left the regular domain."""


class DegenerateForm(RuntimeError):
    """A form required to be invertible is numerically singular."""


@dataclass(frozen=True)
class TensorSample:
    """Components of a tensor in a named frame at a point."""

    point: ChartPoint
    frame: str  # "affine" or "holomorphic"
    kind: str  # "endomorphism", "bilinear", "connection", "cubic"
    components: np.ndarray


@dataclass(frozen=True)
class ThetaFamily:
    """Connection-difference tensor and torsion of the theta family."""

    theta: float
    A_theta: np.ndarray  # [mu, a, nu]
    torsion_theta: np.ndarray  # skew in (mu, nu)


def _j_std(n: int) -> np.ndarray:
    eye = np.eye(n)
    return np.block([[np.zeros((n, n)), -eye], [eye, np.zeros((n, n))]])


def _j_matrix(p: ChartPoint) -> np.ndarray:
    return p.Jac @ _j_std(p.n) @ p.Jac_inv


def complex_structure_affine(p: ChartPoint) -> TensorSample:
    """J in the affine frame: conjugate the constant structure on
    (Re z, Im z) by the chart Jacobian."""
    return TensorSample(p, "affine", "endomorphism", _j_matrix(p))


def symplectic_matrix(n: int) -> np.ndarray:
    eye = np.eye(n)
    return np.block([[np.zeros((n, n)), 2.0 * eye], [-2.0 * eye, np.zeros((n, n))]])


def symplectic_form_affine(p: ChartPoint) -> TensorSample:
    """omega = 2 sum dx^i wedge dy_i; constant, hence parallel."""
    return TensorSample(p, "affine", "bilinear", symplectic_matrix(p.n))


def _as_matrix(t) -> np.ndarray:
    return t.components if isinstance(t, TensorSample) else np.asarray(t)


def hodge_split(J, omega) -> tuple[np.ndarray, np.ndarray]:
    """Invariant part w11 = (W + J^T W J)/2 and anti-invariant remainder."""
    jm = _as_matrix(J)
    w = _as_matrix(omega)
    w11 = 0.5 * (w + jm.T @ w @ jm)
    return w11, w - w11


def _signature(sym: np.ndarray, tol: float) -> tuple[tuple[int, int, int], bool]:
    eigs = np.linalg.eigvalsh(sym)
    cutoff = tol * max(1.0, float(np.max(np.abs(eigs))))
    pos = int(np.sum(eigs > cutoff))
    neg = int(np.sum(eigs < -cutoff))
    null = sym.shape[0] - pos - neg
    return (pos, neg, null), null > 0


def kaehler_metric(
    J, w11, tol: float = 1e-6
) -> tuple[np.ndarray, tuple[int, int, int], bool]:
    """g = w11(J., .) with its eigenvalue signature and a degeneracy flag.

    Indefinite or degenerate metrics are reported, not raised.
    """
    g = _as_matrix(J).T @ _as_matrix(w11)
    signature, degenerate = _signature(0.5 * (g + g.T), tol)
    return g, signature, degenerate


def _metric_of(cp: ChartPoint) -> np.ndarray:
    jm = _j_matrix(cp)
    w11, _ = hodge_split(jm, symplectic_matrix(cp.n))
    return jm.T @ w11


def metric_from_ambient(spec: ManifoldSpec, p: ChartPoint) -> np.ndarray:
    """Real part of phi^* gamma as a bilinear form in the affine frame.

    Independent route to the metric: pull the ambient Hermitian form
    back through the point map instead of pairing omega with J.
    """
    ambient = ambient_space(spec.n)
    dphi = np.vstack([np.eye(spec.n, dtype=complex), p.H])
    u = np.hstack([dphi, 1j * dphi])
    g_ab = np.real((u.conj().T @ ambient.gamma @ u).T)
    g_ab = 0.5 * (g_ab + g_ab.T)
    return p.Jac_inv.T @ g_ab @ p.Jac_inv


# ---------------------------------------------------------------------------
# Finite differences in the affine chart
# ---------------------------------------------------------------------------

def fd_field(
    spec: ManifoldSpec,
    p: ChartPoint,
    build: Callable[[ChartPoint], np.ndarray],
    step: Optional[float] = None,
    cache: Optional[ChartCache] = None,
) -> np.ndarray:
    """Central difference of a chart-point field along each affine axis.

    Returns an array of shape (2n,) + field shape; entry [mu] is the
    partial derivative along q^mu.
    """
    h = spec.fd_step if step is None else step
    cache = cache if cache is not None else ChartCache(spec)
    q = p.q
    rows = []
    for mu in range(2 * spec.n):
        qp, qm = q.copy(), q.copy()
        qp[mu] += h
        qm[mu] -= h
        try:
            plus = cache.at_q(qp, p.z)
            minus = cache.at_q(qm, p.z)
        except (NotRegular, EvaluationError) as err:
            raise StepTooLarge(f"axis {mu}, step {h}: {err}") from err
        rows.append((build(plus) - build(minus)) / (2.0 * h))
    return np.stack(rows)


def nabla_J(
    spec: ManifoldSpec,
    p: ChartPoint,
    step: Optional[float] = None,
    cache: Optional[ChartCache] = None,
) -> TensorSample:
    """(nabla_mu J)^a_nu by central differences, stored as [mu, a, nu]."""
    return TensorSample(p, "affine", "connection", fd_field(spec, p, _j_matrix, step, cache))


def nabla_J_analytic(p: ChartPoint) -> np.ndarray:
    """Exact dJ/dq from the order-2 jets; internal oracle for the
    finite-difference route and for the tight compatibility checks."""
    n = p.n
    jm = _j_matrix(p)
    djac = np.zeros((2 * n, 2 * n, 2 * n))
    for k in range(n):
        dh_k = p.dH[:, :, k]
        djac[k, n:, :n] = dh_k.real
        djac[k, n:, n:] = -dh_k.imag
        djac[n + k, n:, :n] = -dh_k.imag
        djac[n + k, n:, n:] = -dh_k.real
    out = np.zeros((2 * n, 2 * n, 2 * n))
    dj_dr = np.empty_like(djac)
    for nu in range(2 * n):
        d = djac[nu] @ p.Jac_inv
        dj_dr[nu] = d @ jm - jm @ d
    for mu in range(2 * n):
        out[mu] = np.einsum("nab,n->ab", dj_dr, p.Jac_inv[:, mu])
    return out


def d_nabla_J(dJ) -> tuple[np.ndarray, float]:
    """Covariant exterior derivative: antisymmetrize [mu, a, nu] in
    (mu, nu); its max norm is the special-complex residual."""
    t = _as_matrix(dJ)
    alt = t - t.transpose(2, 1, 0)
    return alt, float(np.max(np.abs(alt)))


def theta_connection(
    spec: ManifoldSpec,
    p: ChartPoint,
    theta: float,
    dJ: Optional[np.ndarray] = None,
    cache: Optional[ChartCache] = None,
) -> ThetaFamily:
    """Family member nabla + A^theta with
    A^theta = -sin(theta) e^{theta J} nabla J."""
    if dJ is None:
        dJ = nabla_J(spec, p, cache=cache).components
    jm = _j_matrix(p)
    rotation = np.cos(theta) * np.eye(2 * p.n) + np.sin(theta) * jm
    a_theta = -np.sin(theta) * np.einsum("ab,mbn->man", rotation, dJ)
    torsion = a_theta - a_theta.transpose(2, 1, 0)
    return ThetaFamily(theta, a_theta, torsion)


def conjugate_connection(
    spec: ManifoldSpec,
    p: ChartPoint,
    dJ: Optional[np.ndarray] = None,
    cache: Optional[ChartCache] = None,
) -> np.ndarray:
    """Coefficients of nabla - J nabla J in the affine frame, [mu, a, nu]."""
    if dJ is None:
        dJ = nabla_J(spec, p, cache=cache).components
    jm = _j_matrix(p)
    return -np.einsum("ab,mbn->man", jm, dJ)


def complex_connection_D(
    spec: ManifoldSpec,
    p: ChartPoint,
    dJ: Optional[np.ndarray] = None,
    cache: Optional[ChartCache] = None,
) -> tuple[np.ndarray, float]:
    """Mean of the flat connection and its conjugate: Gamma^D = -J nabla J / 2.

    Returns the coefficients and the residual of D J = 0, computed as
    dJ[mu] + [Gamma^D_mu, J] in matrix form.
    """
    if dJ is None:
        dJ = nabla_J(spec, p, cache=cache).components
    gamma_d = 0.5 * conjugate_connection(spec, p, dJ=dJ)
    jm = _j_matrix(p)
    residual = 0.0
    for mu in range(2 * p.n):
        dj_cov = dJ[mu] + gamma_d[mu] @ jm - jm @ gamma_d[mu]
        residual = max(residual, float(np.max(np.abs(dj_cov))))
    return gamma_d, residual


def nabla_g(
    spec: ManifoldSpec,
    p: ChartPoint,
    step: Optional[float] = None,
    cache: Optional[ChartCache] = None,
) -> tuple[np.ndarray, float]:
    """dg[mu, nu, rho] = d_mu g_{nu rho} and its total-symmetry residual."""
    dg = fd_field(spec, p, _metric_of, step, cache)
    residual = max(
        float(np.max(np.abs(dg - dg.transpose(1, 0, 2)))),
        float(np.max(np.abs(dg - dg.transpose(2, 1, 0)))),
        float(np.max(np.abs(dg - dg.transpose(0, 2, 1)))),
    )
    return dg, residual


def levi_civita(
    spec: ManifoldSpec,
    p: ChartPoint,
    step: Optional[float] = None,
    cache: Optional[ChartCache] = None,
    dg: Optional[np.ndarray] = None,
    gamma_d: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, float]:
    """Christoffel symbols of g from the standard formula, stored as
    [mu, rho, nu], with the max deviation from Gamma^D."""
    if dg is None:
        dg = fd_field(spec, p, _metric_of, step, cache)
    if gamma_d is None:
        gamma_d, _ = complex_connection_D(spec, p, cache=cache)
    g = _metric_of(p)
    ginv = np.linalg.inv(0.5 * (g + g.T))
    lc = 0.5 * np.einsum(
        "rs,msn->mrn", ginv, dg.transpose(0, 1, 2) + dg.transpose(2, 1, 0) - dg.transpose(1, 0, 2)
    )
    return lc, float(np.max(np.abs(lc - gamma_d)))


def g_duality_check(
    spec: ManifoldSpec,
    p: ChartPoint,
    step: Optional[float] = None,
    cache: Optional[ChartCache] = None,
    dg: Optional[np.ndarray] = None,
    gamma_conj: Optional[np.ndarray] = None,
) -> float:
    """Residual of d_mu g(Y, Z) = g(nabla_mu Y, Z) + g(Y, nabla'_mu Z)
    on coordinate fields; the flat term drops in the affine frame."""
    if dg is None:
        dg = fd_field(spec, p, _metric_of, step, cache)
    if gamma_conj is None:
        gamma_conj = conjugate_connection(spec, p, cache=cache)
    g = _metric_of(p)
    predicted = np.einsum("msr,ns->mnr", gamma_conj, g)
    return float(np.max(np.abs(dg - predicted)))


def ambient_metric_identity(spec: ManifoldSpec, p: ChartPoint) -> tuple[float, float]:
    """Compare the pulled-back ambient metric against the symplectic data.

    First residual: 2 g(., J.) - (omega + omega(J., J.)).
    Second residual: omega - g(., J.), the Kahler-form match.
    Both use g from the ambient route, so the two assembly paths are
    genuinely independent.
    """
    g_amb = metric_from_ambient(spec, p)
    jm = _j_matrix(p)
    w = symplectic_matrix(p.n)
    gj = g_amb @ jm
    first = float(np.max(np.abs(2.0 * gj - (w + jm.T @ w @ jm))))
    second = float(np.max(np.abs(w - gj)))
    return first, second


def connection_difference_j_compatible(
    p: ChartPoint, xis: np.ndarray
) -> float:
    """Residual of A^xi_X J = A^xi_{JX} for A = J nabla J / 2.

    Uses the exact jet route for nabla J so the identity is tested at
    full precision.  xis is a matrix of covectors, one per row; the
    check runs over every covector and every frame direction.
    """
    jm = _j_matrix(p)
    dJ = nabla_J_analytic(p)
    a = 0.5 * np.einsum("ab,mbn->man", jm, dJ)
    # a[mu, :, :] is the endomorphism A_X for X = d/dq^mu
    a_xj = np.einsum("mab,bn->man", a, jm)  # A_X after J
    a_jx = np.einsum("bm,ban->man", jm, a)  # direction rotated by J
    residual = 0.0
    for xi in np.atleast_2d(xis):
        residual = max(residual, float(np.max(np.abs(np.einsum("a,man->mn", xi, a_xj - a_jx)))))
    return residual


def conic_checks(spec: ManifoldSpec, z: np.ndarray) -> dict:
    """Scaling behaviour under the configured lambda samples.

    Prepotentials must satisfy F(lambda z) = lambda^2 F(z) along with
    the Euler identity sum z^i F_i = 2 F; one-form components must be
    homogeneous of degree one.  Residuals are normalized by the value
    scale at z.
    """
    z = np.asarray(z, dtype=complex)
    if spec.kind == "prepotential":
        f0 = prepotential_value(spec, z)
        grad = np.array([jet.value for jet in component_jets(spec, z, order=0)])
        scale = 1.0 + abs(f0)
        hom = max(
            abs(prepotential_value(spec, lam * z) - lam * lam * f0)
            for lam in spec.lambda_samples
        )
        euler = abs(complex(z @ grad) - 2.0 * f0)
        return {
            "homogeneity_raw": float(hom),
            "homogeneity": float(hom) / scale,
            "euler_raw": float(euler),
            "euler": float(euler) / scale,
        }
    values = np.array([jet.value for jet in component_jets(spec, z, order=0)])
    scale = 1.0 + float(np.max(np.abs(values)))
    hom = max(
        float(np.max(np.abs(
            np.array([jet.value for jet in component_jets(spec, lam * z, order=0)])
            - lam * values
        )))
        for lam in spec.lambda_samples
    )
    return {"homogeneity_raw": hom, "homogeneity": hom / scale, "euler_raw": None, "euler": None}


def exterior_derivative_max(
    spec: ManifoldSpec,
    p: ChartPoint,
    build_form: Callable[[ChartPoint], np.ndarray],
    step: Optional[float] = None,
    cache: Optional[ChartCache] = None,
) -> float:
    """Max component of the finite-difference exterior derivative of a
    2-form field on the base."""
    dw = fd_field(spec, p, build_form, step, cache)
    # dw[m, n, r] = d_m w[n, r]; the cyclic term needs d_r w[m, n] = dw[r, m, n]
    d_three = dw - dw.transpose(1, 0, 2) + dw.transpose(1, 2, 0)
    return float(np.max(np.abs(d_three)))
