"""Charts built from holomorphic data on a domain in C^n.

A manifold is specified either by a single holomorphic function F
(kind "prepotential") or by n holomorphic component functions F_1..F_n
(kind "one_form").  The prepotential case lowers to components by one
holomorphic differentiation, F_i = dF/dz^i, so every downstream
computation sees one code path.

The point map phi(z) = (z, F_1(z), .., F_n(z)) lands in C^2n carrying
the constant complex symplectic form Omega = sum dz^i wedge dw_i, the
real structure tau (componentwise conjugation) and the Hermitian form
gamma = sqrt(-1) Omega(. , tau .) of signature (n, n).

Real special coordinates are x = Re z, y = Re F.  The chart Jacobian
d(x, y)/d(Re z, Im z) is assembled analytically from the holomorphic
Jacobian H[i][j] = dF_i/dz^j via the Cauchy-Riemann equations; it is
invertible exactly when Im H is, which is the regularity condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .expr import ExpressionAST, HoloJet, eval_jet

__all__ = [
    "NotRegular",
    "NewtonDiverged",
    "ManifoldSpec",
    "AmbientSpace",
    "ChartPoint",
    "ChartCache",
    "ambient_space",
    "component_jets",
    "immersion_phi",
    "regularity_matrix",
    "is_lagrangian",
    "chart_point",
    "invert_special_coordinates",
    "gamma_pullback",
    "ambient_symplectic_pullback",
]


class NotRegular(RuntimeError):
    """Im dF_i/dz^j is singular at the point."""


class NewtonDiverged(RuntimeError):
    """Chart inversion failed to converge."""


DEFAULT_THETAS = tuple(np.deg2rad([30.0, 45.0, 90.0]))
DEFAULT_LAMBDAS = (2.0 + 0.0j, 1.0 + 1.0j)


@dataclass(frozen=True)
class ManifoldSpec:
    """Input datum: dimension, kind, components and the sample plan."""

    n: int
    kind: str  # "prepotential" or "one_form"
    components: tuple[ExpressionAST, ...]
    sample_points: tuple[np.ndarray, ...]
    fd_step: float = 1e-5
    tol: float = 1e-6
    conic: bool = False
    theta_samples: tuple[float, ...] = DEFAULT_THETAS  # radians
    lambda_samples: tuple[complex, ...] = DEFAULT_LAMBDAS
    fibers: tuple[np.ndarray, ...] = ()
    expected_fail: frozenset[str] = frozenset()
    expected_skip: bool = False

    def __post_init__(self):
        if self.kind not in ("prepotential", "one_form"):
            raise ValueError(f"unknown kind {self.kind!r}")
        expected = 1 if self.kind == "prepotential" else self.n
        if len(self.components) != expected:
            raise ValueError(
                f"kind {self.kind!r} with n={self.n} needs {expected} "
                f"component(s), got {len(self.components)}"
            )
        if self.fd_step <= 0 or self.tol <= 0:
            raise ValueError("fd_step and tol must be positive")


def component_jets(spec: ManifoldSpec, z: np.ndarray, order: int = 2) -> list[HoloJet]:
    """Jets of the one-form components F_1..F_n through `order` (max 2).

    For a prepotential the components are obtained by slicing the jet of
    F one level up, which keeps them exact holomorphic derivatives.
    """
    if order > 2:
        raise ValueError("component jets are available through order 2")
    z = np.asarray(z, dtype=complex)
    if spec.kind == "one_form":
        return [eval_jet(ast, z, order) for ast in spec.components]
    fjet = eval_jet(spec.components[0], z, order + 1)
    n = spec.n
    jets = []
    for i in range(n):
        jets.append(
            HoloJet(
                order, n, complex(fjet.grad[i]),
                fjet.hess[i].copy() if order >= 1 else None,
                fjet.third[i].copy() if order >= 2 else None,
                None,
            )
        )
    return jets


def prepotential_value(spec: ManifoldSpec, z: np.ndarray) -> complex:
    if spec.kind != "prepotential":
        raise ValueError("spec has no prepotential")
    return eval_jet(spec.components[0], z, 0).value


def immersion_phi(spec: ManifoldSpec, z: np.ndarray) -> np.ndarray:
    """phi(z) = (z, F_1(z), .., F_n(z)) in C^2n."""
    z = np.asarray(z, dtype=complex)
    values = [jet.value for jet in component_jets(spec, z, order=0)]
    return np.concatenate([z, np.asarray(values, dtype=complex)])


def holomorphic_jacobian(spec: ManifoldSpec, z: np.ndarray) -> np.ndarray:
    """H[i][j] = dF_i/dz^j."""
    jets = component_jets(spec, z, order=1)
    return np.stack([jet.grad for jet in jets])


def regularity_matrix(spec: ManifoldSpec, z: np.ndarray) -> tuple[np.ndarray, bool]:
    """Im H together with a scale-free invertibility verdict.

    The cutoff compares |det| against tol times the product of row
    norms, so rescaling the components cannot flip the verdict.
    """
    imh = holomorphic_jacobian(spec, z).imag
    scale = float(np.prod(np.linalg.norm(imh, axis=1)))
    det = float(np.linalg.det(imh))
    return imh, abs(det) > spec.tol * scale and scale > 0.0


def is_lagrangian(spec: ManifoldSpec, z: np.ndarray) -> tuple[bool, float]:
    """Closedness of the one-form: residual max |H_ij - H_ji|."""
    if spec.kind == "prepotential":
        return True, 0.0  # the holomorphic Hessian is symmetric by construction
    h = holomorphic_jacobian(spec, z)
    residual = float(np.max(np.abs(h - h.T))) if spec.n > 1 else 0.0
    return residual <= spec.tol, residual


@dataclass(frozen=True)
class ChartPoint:
    """A sample with cached jets and the real chart Jacobian.

    Jac rows are (x, y), columns are (Re z, Im z):
    [[I, 0], [Re H, -Im H]].
    """

    z: np.ndarray
    jets: tuple[HoloJet, ...]
    x: np.ndarray
    y: np.ndarray
    H: np.ndarray
    dH: np.ndarray  # dH[i][j][k] = d2 F_i / dz^j dz^k
    Jac: np.ndarray
    Jac_inv: np.ndarray

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def q(self) -> np.ndarray:
        """Affine coordinates (x, y) as one real 2n-vector."""
        return np.concatenate([self.x, self.y])


def chart_point(spec: ManifoldSpec, z: np.ndarray) -> ChartPoint:
    z = np.asarray(z, dtype=complex)
    _, invertible = regularity_matrix(spec, z)
    if not invertible:
        raise NotRegular(f"Im dF/dz is singular at z={z}")
    jets = tuple(component_jets(spec, z, order=2))
    n = spec.n
    h = np.stack([jet.grad for jet in jets])
    dh = np.stack([jet.hess for jet in jets])
    x = z.real.copy()
    y = np.array([jet.value.real for jet in jets])
    jac = np.zeros((2 * n, 2 * n))
    jac[:n, :n] = np.eye(n)
    jac[n:, :n] = h.real
    jac[n:, n:] = -h.imag
    return ChartPoint(z, jets, x, y, h, dh, jac, np.linalg.inv(jac))


def invert_special_coordinates(
    spec: ManifoldSpec, target: np.ndarray, z0: np.ndarray
) -> np.ndarray:
    """Newton inversion of z -> (x, y); target is the 2n-vector (x, y).

    Halves the step whenever the residual fails to decrease; declares
    divergence after 50 iterations or a residual above 1e6.
    """
    target = np.asarray(target, dtype=float)
    n = spec.n
    z = np.asarray(z0, dtype=complex).copy()

    def residual_at(zz):
        jets = component_jets(spec, zz, order=1)
        h = np.stack([jet.grad for jet in jets])
        r = np.concatenate([
            zz.real - target[:n],
            np.array([jet.value.real for jet in jets]) - target[n:],
        ])
        return r, h

    r, h = residual_at(z)
    rnorm = float(np.max(np.abs(r)))
    for _ in range(50):
        # drive far below the acceptance threshold: finite-difference
        # quotients divide neighbor errors by the step, so slack here
        # would pollute every convergence ratio downstream
        if rnorm <= 1e-14:
            return z
        if rnorm > 1e6:
            raise NewtonDiverged(f"residual blew up to {rnorm:.3e}")
        scale = float(np.prod(np.linalg.norm(h.imag, axis=1)))
        if scale == 0.0 or abs(float(np.linalg.det(h.imag))) <= spec.tol * scale:
            raise NotRegular(f"singular chart Jacobian met at z={z}")
        jac = np.zeros((2 * n, 2 * n))
        jac[:n, :n] = np.eye(n)
        jac[n:, :n] = h.real
        jac[n:, n:] = -h.imag
        delta = np.linalg.solve(jac, r)
        step = delta[:n] + 1j * delta[n:]
        # line control: halve until the residual actually decreases
        for _ in range(30):
            z_try = z - step
            r_try, h_try = residual_at(z_try)
            rnorm_try = float(np.max(np.abs(r_try)))
            if rnorm_try < rnorm:
                break
            step = step / 2.0
        else:
            break  # no decrease at any step length
        z, r, h, rnorm = z_try, r_try, h_try, rnorm_try
    if rnorm <= 1e-10:
        return z
    raise NewtonDiverged(f"no convergence, residual {rnorm:.3e}")


class ChartCache:
    """Memoizes chart points by their affine coordinates.

    Finite-difference passes revisit the same perturbed coordinates for
    many tensors; each (x, y) is Newton-inverted exactly once.
    """

    def __init__(self, spec: ManifoldSpec):
        self.spec = spec
        self._by_q: dict[bytes, ChartPoint] = {}

    def at_z(self, z: np.ndarray) -> ChartPoint:
        cp = chart_point(self.spec, z)
        self._by_q.setdefault(cp.q.tobytes(), cp)
        return cp

    def at_q(self, q: np.ndarray, z0: np.ndarray) -> ChartPoint:
        key = np.asarray(q, dtype=float).tobytes()
        found = self._by_q.get(key)
        if found is None:
            z = invert_special_coordinates(self.spec, q, z0)
            found = chart_point(self.spec, z)
            self._by_q[key] = found
        return found


# ---------------------------------------------------------------------------
# Ambient space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmbientSpace:
    """C^2n with Omega = sum dz^i wedge dw_i and gamma = i Omega(., tau .).

    `gamma` is stored in the convention gamma(u, v) = v^H gamma u, which
    makes it a Hermitian matrix whose eigenvalue signs give the (n, n)
    signature.
    """

    n: int
    Omega: np.ndarray
    gamma: np.ndarray

    @staticmethod
    def tau(u: np.ndarray) -> np.ndarray:
        return np.conj(u)

    def pairing(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(np.conj(v) @ self.gamma @ u)


def ambient_space(n: int) -> AmbientSpace:
    eye = np.eye(n)
    omega = np.block([[np.zeros((n, n)), eye], [-eye, np.zeros((n, n))]]).astype(complex)
    gamma = -1j * omega
    assert np.allclose(gamma, gamma.conj().T)
    eigs = np.linalg.eigvalsh(gamma)
    assert int(np.sum(eigs > 0)) == n and int(np.sum(eigs < 0)) == n
    return AmbientSpace(n, omega, gamma)


def _dphi(spec: ManifoldSpec, z: np.ndarray) -> np.ndarray:
    """Holomorphic differential of phi: column j is (e_j, H[:, j])."""
    h = holomorphic_jacobian(spec, z)
    return np.vstack([np.eye(spec.n, dtype=complex), h])


def gamma_pullback(
    spec: ManifoldSpec, z: np.ndarray
) -> tuple[np.ndarray, bool, tuple[int, int, int]]:
    """phi^* gamma on the holomorphic frame d/dz^j.

    Returns the Hermitian matrix, a nondegeneracy verdict and the
    signature (positive, negative, null eigenvalue counts).  Degeneracy
    is a reported outcome here, never an exception.
    """
    z = np.asarray(z, dtype=complex)
    ambient = ambient_space(spec.n)
    dphi = _dphi(spec, z)
    pull = dphi.conj().T @ ambient.gamma @ dphi
    pull = 0.5 * (pull + pull.conj().T)  # clear rounding skew
    eigs = np.linalg.eigvalsh(pull)
    cutoff = spec.tol * max(1.0, float(np.max(np.abs(eigs))) if eigs.size else 1.0)
    pos = int(np.sum(eigs > cutoff))
    neg = int(np.sum(eigs < -cutoff))
    null = spec.n - pos - neg
    return pull, null == 0, (pos, neg, null)


def ambient_symplectic_pullback(spec: ManifoldSpec, p: ChartPoint) -> np.ndarray:
    """phi^* Omega in the affine frame (d/dx, d/dy), complex valued.

    The real part equals the anti-invariant Hodge component of the
    intrinsic symplectic form; it vanishes exactly on closed one-forms.
    """
    ambient = ambient_space(spec.n)
    dphi = _dphi(spec, p.z)
    # real frame (d/da, d/db): d/db^j pushes to i * column j
    u = np.hstack([dphi, 1j * dphi])
    pull_ab = u.T @ ambient.Omega @ u
    return p.Jac_inv.T @ pull_ab @ p.Jac_inv
