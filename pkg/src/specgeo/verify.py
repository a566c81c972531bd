"""Check registry and structured verification reports.

Every identity the library implements appears here exactly once, as a
check with a stable dotted id, a default tolerance and an applicability
filter (manifold kind, conic flag).  run_report evaluates the
applicable checks at every sample point of a ManifoldSpec and returns a
deterministic report: no timestamps, results sorted by (check_id,
point index), floats printed with 17 significant digits, and all
randomness drawn from generators seeded by (seed, point index, salt).

Gating: a sample that fails the regularity test short-circuits every
check at that point to skipped(NotRegular), so a fully singular spec
yields a well-formed report of nothing but those entries.  Checks whose
precondition form is singular at a regular point report
skipped(DegenerateForm) instead.  Checks that do not apply to the
spec's kind (or to non-conic specs) are omitted rather than skipped.

Finite-difference checks run at the configured step and at half of it;
the ratio of the two residuals is reported when both sit above rounding
noise (about 4 for a second-order scheme), and omitted as null
otherwise, which is the normal outcome on flat models where the
residual is exactly zero up to roundoff.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .charts import (
    ChartCache,
    ChartPoint,
    ManifoldSpec,
    NewtonDiverged,
    NotRegular,
    ambient_symplectic_pullback,
    gamma_pullback,
    invert_special_coordinates,
    is_lagrangian,
)
from .cotangent import (
    BundlePoint,
    g_N_at,
    j1_at,
    j2_at,
    nijenhuis_fd,
    nijenhuis_j2_closed_form,
    omega_alpha_forms,
    quaternion_relations,
)
from .expr import EvaluationError, to_source
from .geometry import (
    DegenerateForm,
    StepTooLarge,
    ambient_metric_identity,
    complex_connection_D,
    complex_structure_affine,
    conic_checks,
    conjugate_connection,
    connection_difference_j_compatible,
    d_nabla_J,
    exterior_derivative_max,
    g_duality_check,
    hodge_split,
    kaehler_metric,
    levi_civita,
    nabla_J,
    nabla_g,
    symplectic_matrix,
    theta_connection,
)

__all__ = [
    "SpecInvalid",
    "SkipCheck",
    "CheckResult",
    "CheckDef",
    "VerificationReport",
    "registry",
    "run_report",
    "TOOL_VERSION",
]

TOOL_VERSION = "0.1.0"

# residuals below this are treated as rounding noise: no convergence
# ratio is reported for them.  Central differences at step h divide
# Newton and rounding errors (~1e-14) by h, so quotients of residuals
# under ~1e-9 measure noise, not the O(h^2) truncation term.
NOISE_FLOOR = 1e-9

# threshold shared by the closedness and parallelism sides of the
# "closed iff parallel" consistency check
CLOSEDNESS_TOL = 5e-6

REASON_NOT_REGULAR = "NotRegular"
REASON_DEGENERATE = "DegenerateForm"
REASON_NEWTON = "NewtonDiverged"
REASON_KIND = "NotApplicableToKind"

CONVENTIONS = {
    "symplectic_form": "omega = 2 sum dx^i wedge dy_i, coefficient matrix [[0, 2I], [-2I, 0]]",
    "metric_sign": "g = omega11(J., .), matrix J^T W11; sign fixed by the flat quadratic model being positive",
    "covector_action": "(J* eta)(X) = eta(J X); as a matrix, the transpose acting on the right",
    "nijenhuis": "N(X, Y) = [JX, JY] - J[JX, Y] - J[X, JY] + J^2 [X, Y], no quarter factor",
    "ambient_pairing": "Omega = sum dz^i wedge dw_i, gamma(u, v) = i Omega(u, conj v), signature (n, n)",
    "immersion": "z -> (z, F_1(z), ..., F_n(z)) in the identity chart; x = Re z, y = Re F",
    "tensor_layout": "connection-like tensors stored [direction, upper, lower]",
}


class SpecInvalid(ValueError):
    """The manifold description cannot be executed."""


class SkipCheck(Exception):
    """Raised by a check to report a precondition failure, not a defect."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(detail or reason)
        self.reason = reason


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    point_index: int
    point: np.ndarray  # complex n-vector
    status: str  # "pass" | "fail" | "skipped"
    residual: Optional[float]
    tolerance: float
    reason: Optional[str]
    convergence_ratio: Optional[float]
    expected_fail: bool

    def to_object(self) -> dict:
        return {
            "check_id": self.check_id,
            "point_index": self.point_index,
            "point": [[float(c.real), float(c.imag)] for c in self.point],
            "status": self.status,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "reason": self.reason,
            "convergence_ratio": self.convergence_ratio,
            "expected_fail": self.expected_fail,
        }


@dataclass(frozen=True)
class CheckDef:
    check_id: str
    tolerance: float
    run: Callable[["SampleContext"], tuple[float, Optional[float]]]
    kinds: Optional[frozenset] = None  # None = every kind
    conic_only: bool = False

    def applies_to(self, spec: ManifoldSpec) -> bool:
        if self.kinds is not None and spec.kind not in self.kinds:
            return False
        if self.conic_only and not spec.conic:
            return False
        return True


# ---------------------------------------------------------------------------
# Per-sample context with shared lazy caches
# ---------------------------------------------------------------------------

class SampleContext:
    """Caches the expensive artifacts one sample's checks share.

    The chart cache makes every finite-difference pass reuse Newton
    solves; the field memo makes the bundle endomorphism fields cheap to
    re-evaluate across fibers (they depend on the base point only).
    """

    def __init__(self, spec: ManifoldSpec, point_index: int, seed: int):
        self.spec = spec
        self.point_index = point_index
        self.seed = seed
        self.z = np.asarray(spec.sample_points[point_index], dtype=complex)
        self.cache = ChartCache(spec)
        self._dJ: dict[float, np.ndarray] = {}
        self._dg: dict[float, tuple[np.ndarray, float]] = {}
        self._quaternion: dict[int, dict] = {}
        self._omega_alpha: dict[int, dict] = {}
        self._gn: dict[int, np.ndarray] = {}
        self._field_memo: dict[tuple, np.ndarray] = {}
        self._nij: dict[tuple, dict] = {}

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, self.point_index, salt])

    @cached_property
    def cp(self) -> ChartPoint:
        return self.cache.at_z(self.z)

    @cached_property
    def jm(self) -> np.ndarray:
        return complex_structure_affine(self.cp).components

    @cached_property
    def hodge(self) -> tuple[np.ndarray, np.ndarray]:
        return hodge_split(self.jm, symplectic_matrix(self.spec.n))

    @cached_property
    def g(self) -> np.ndarray:
        return kaehler_metric(self.jm, self.hodge[0], self.spec.tol)[0]

    def dJ(self, step: float) -> np.ndarray:
        if step not in self._dJ:
            self._dJ[step] = nabla_J(self.spec, self.cp, step, self.cache).components
        return self._dJ[step]

    def dg(self, step: float) -> tuple[np.ndarray, float]:
        if step not in self._dg:
            self._dg[step] = nabla_g(self.spec, self.cp, step, self.cache)
        return self._dg[step]

    @cached_property
    def fibers(self) -> tuple[np.ndarray, ...]:
        if self.spec.fibers:
            return tuple(np.asarray(p, dtype=float) for p in self.spec.fibers)
        zero = np.zeros(2 * self.spec.n)
        seeded = self.rng(1000).standard_normal(2 * self.spec.n)
        return (zero, seeded)

    @cached_property
    def bundle_points(self) -> tuple[BundlePoint, ...]:
        return tuple(BundlePoint(self.cp, p) for p in self.fibers)

    def quaternion(self, fiber: int) -> dict:
        if fiber not in self._quaternion:
            self._quaternion[fiber] = quaternion_relations(self.spec, self.bundle_points[fiber])
        return self._quaternion[fiber]

    def omega_alpha(self, fiber: int) -> dict:
        if fiber not in self._omega_alpha:
            self._omega_alpha[fiber] = omega_alpha_forms(
                self.spec, self.bundle_points[fiber], cache=self.cache
            )
        return self._omega_alpha[fiber]

    def gn(self, fiber: int) -> np.ndarray:
        if fiber not in self._gn:
            self._gn[fiber] = g_N_at(self.spec, self.bundle_points[fiber])
        return self._gn[fiber]

    def field(self, rho: str) -> Callable[[BundlePoint], np.ndarray]:
        # all bundle structure fields depend on the base point only, so
        # memoizing by the base coordinates is exact, and it makes the
        # per-fiber reruns of the Nijenhuis sweep nearly free
        def build(eta: BundlePoint) -> np.ndarray:
            if rho == "j1":
                return j1_at(eta).matrix
            if rho == "j3":
                return j1_at(eta).matrix @ j2_at(self.spec, eta, "omega11").matrix
            return j2_at(self.spec, eta, rho).matrix

        def field(eta: BundlePoint) -> np.ndarray:
            key = (rho, eta.base.q.tobytes())
            got = self._field_memo.get(key)
            if got is None:
                got = build(eta)
                self._field_memo[key] = got
            return got

        return field

    def nijenhuis_pairs(self, rho: str, fiber: int) -> dict:
        key = (rho, fiber)
        if key not in self._nij:
            dim = 4 * self.spec.n
            xi = self.bundle_points[fiber]
            field = self.field(rho)
            pairs = {}
            for i in range(dim):
                for j in range(i + 1, dim):
                    x = np.zeros(dim)
                    y = np.zeros(dim)
                    x[i] = 1.0
                    y[j] = 1.0
                    pairs[(i, j)] = nijenhuis_fd(self.spec, xi, field, x, y, cache=self.cache)
            self._nij[key] = pairs
        return self._nij[key]

    def nijenhuis_max(self, rho: str) -> float:
        worst = 0.0
        for fiber in range(len(self.bundle_points)):
            for value in self.nijenhuis_pairs(rho, fiber).values():
                worst = max(worst, float(np.max(np.abs(value))))
        return worst


def _invariant_part_field(cp: ChartPoint) -> np.ndarray:
    jm = complex_structure_affine(cp).components
    return hodge_split(jm, symplectic_matrix(cp.n))[0]


def _ratio(r_coarse: float, r_fine: float) -> Optional[float]:
    if r_coarse < NOISE_FLOOR or r_fine < NOISE_FLOOR:
        return None
    return r_coarse / r_fine


def _fd_pair(ctx: SampleContext, residual_at: Callable[[float], float]) -> tuple[float, Optional[float]]:
    h = ctx.spec.fd_step
    r_h = residual_at(h)
    r_half = residual_at(h / 2.0)
    return r_h, _ratio(r_h, r_half)


def _require(value: Optional[float]) -> float:
    if value is None:
        raise SkipCheck(REASON_DEGENERATE, "required form is singular at this point")
    return value


# ---------------------------------------------------------------------------
# Check implementations
# ---------------------------------------------------------------------------

def _chk_regularity(ctx):
    ctx.cp  # raises NotRegular when the verdict is negative
    return 0.0, None


def _chk_lagrangian(ctx):
    ctx.cp
    _, residual = is_lagrangian(ctx.spec, ctx.z)
    return residual, None


def _chk_newton_roundtrip(ctx):
    cp = ctx.cp
    rng = ctx.rng(3)
    scale = 0.05 * (1.0 + float(np.max(np.abs(cp.z))))
    start = cp.z + scale * (rng.standard_normal(ctx.spec.n) + 1j * rng.standard_normal(ctx.spec.n))
    recovered = invert_special_coordinates(ctx.spec, cp.q, start)
    return float(np.max(np.abs(recovered - cp.z))), None


def _chk_gamma_pullback(ctx):
    ctx.cp
    _, nondegenerate, _ = gamma_pullback(ctx.spec, ctx.z)
    return (0.0 if nondegenerate else 1.0), None


def _chk_j_squares(ctx):
    jm = ctx.jm
    return float(np.max(np.abs(jm @ jm + np.eye(2 * ctx.spec.n)))), None


def _chk_metric_symmetric(ctx):
    return float(np.max(np.abs(ctx.g - ctx.g.T))), None


def _chk_metric_j_invariant(ctx):
    return float(np.max(np.abs(ctx.jm.T @ ctx.g @ ctx.jm - ctx.g))), None


def _chk_hodge_types(ctx):
    w11, wprime = ctx.hodge
    jm = ctx.jm
    invariant = float(np.max(np.abs(jm.T @ w11 @ jm - w11)))
    anti = float(np.max(np.abs(jm.T @ wprime @ jm + wprime)))
    return max(invariant, anti), None


def _chk_symplectic_j_invariant(ctx):
    return float(np.max(np.abs(ctx.hodge[1]))), None


def _chk_anti_part_matches_ambient(ctx):
    pull = ambient_symplectic_pullback(ctx.spec, ctx.cp)
    return float(np.max(np.abs(ctx.hodge[1] - pull.real))), None


def _chk_ambient_metric_identity(ctx):
    first, second = ambient_metric_identity(ctx.spec, ctx.cp)
    return max(first, second), None


def _chk_connection_difference(ctx):
    residual = connection_difference_j_compatible(ctx.cp, np.eye(2 * ctx.spec.n))
    return residual, None


def _chk_d_nabla_j(ctx):
    return _fd_pair(ctx, lambda s: d_nabla_J(ctx.dJ(s))[1])


def _chk_theta_family(ctx):
    def residual_at(step):
        dj = ctx.dJ(step)
        worst = 0.0
        for theta in ctx.spec.theta_samples:
            family = theta_connection(ctx.spec, ctx.cp, theta, dJ=dj)
            worst = max(worst, float(np.max(np.abs(family.torsion_theta))))
        return worst

    return _fd_pair(ctx, residual_at)


def _chk_conjugate_symmetric(ctx):
    def residual_at(step):
        gamma = conjugate_connection(ctx.spec, ctx.cp, dJ=ctx.dJ(step))
        return float(np.max(np.abs(gamma - gamma.transpose(2, 1, 0))))

    return _fd_pair(ctx, residual_at)


def _chk_d_parallel_j(ctx):
    return _fd_pair(ctx, lambda s: complex_connection_D(ctx.spec, ctx.cp, dJ=ctx.dJ(s))[1])


def _chk_invariant_part_closed(ctx):
    return _fd_pair(
        ctx,
        lambda s: exterior_derivative_max(
            ctx.spec, ctx.cp, _invariant_part_field, step=s, cache=ctx.cache
        ),
    )


def _chk_nabla_g_symmetric(ctx):
    return _fd_pair(ctx, lambda s: ctx.dg(s)[1])


def _chk_levi_civita(ctx):
    def residual_at(step):
        gamma_d = 0.5 * conjugate_connection(ctx.spec, ctx.cp, dJ=ctx.dJ(step))
        return levi_civita(ctx.spec, ctx.cp, dg=ctx.dg(step)[0], gamma_d=gamma_d)[1]

    return _fd_pair(ctx, residual_at)


def _chk_metric_duality(ctx):
    def residual_at(step):
        gamma = conjugate_connection(ctx.spec, ctx.cp, dJ=ctx.dJ(step))
        return g_duality_check(ctx.spec, ctx.cp, dg=ctx.dg(step)[0], gamma_conj=gamma)

    return _fd_pair(ctx, residual_at)


def _chk_conic_homogeneity(ctx):
    ctx.cp
    return float(conic_checks(ctx.spec, ctx.z)["homogeneity"]), None


def _chk_conic_euler(ctx):
    ctx.cp
    return float(conic_checks(ctx.spec, ctx.z)["euler"]), None


def _chk_j1_squares(ctx):
    eye = np.eye(4 * ctx.spec.n)
    worst = 0.0
    for xi in ctx.bundle_points:
        m = j1_at(xi).matrix
        worst = max(worst, float(np.max(np.abs(m @ m + eye))))
    return worst, None


def _chk_j2_squares(ctx):
    eye = np.eye(4 * ctx.spec.n)
    worst = 0.0
    for xi in ctx.bundle_points:
        m = j2_at(ctx.spec, xi, "omega").matrix
        worst = max(worst, float(np.max(np.abs(m @ m + eye))))
    return worst, None


def _chk_fiber_independence(ctx):
    points = ctx.bundle_points
    if len(points) < 2:
        return 0.0, None
    worst = 0.0
    for builder in (
        lambda xi: j1_at(xi).matrix,
        lambda xi: j2_at(ctx.spec, xi, "omega").matrix,
    ):
        first = builder(points[0])
        for other in points[1:]:
            worst = max(worst, float(np.max(np.abs(builder(other) - first))))
    return worst, None


def _quaternion_check(key):
    def run(ctx):
        worst = 0.0
        for fiber in range(len(ctx.bundle_points)):
            worst = max(worst, _require(ctx.quaternion(fiber)[key]))
        return worst, None

    return run


def _chk_gn_orthogonal_j1(ctx):
    worst = 0.0
    for fiber, xi in enumerate(ctx.bundle_points):
        gn = ctx.gn(fiber)
        m = j1_at(xi).matrix
        worst = max(worst, float(np.max(np.abs(m.T @ gn @ m - gn))))
    return worst, None


def _chk_gn_orthogonal_j2(ctx):
    worst = 0.0
    for fiber, xi in enumerate(ctx.bundle_points):
        gn = ctx.gn(fiber)
        m = j2_at(ctx.spec, xi, "omega11").matrix
        worst = max(worst, float(np.max(np.abs(m.T @ gn @ m - gn))))
    return worst, None


def _chk_omega_alpha_skew(ctx):
    worst = 0.0
    for fiber in range(len(ctx.bundle_points)):
        worst = max(worst, float(ctx.omega_alpha(fiber)["skew_residual"]))
    return worst, None


def _chk_omega1_iff_parallel(ctx):
    worst = 0.0
    for fiber in range(len(ctx.bundle_points)):
        data = ctx.omega_alpha(fiber)
        closed = data["closedness"][0] <= CLOSEDNESS_TOL
        parallel = data["invariant_part_parallel_residual"] <= CLOSEDNESS_TOL
        worst = max(worst, 0.0 if closed == parallel else 1.0)
    return worst, None


def _omega_closed_check(alpha):
    def run(ctx):
        worst = 0.0
        for fiber in range(len(ctx.bundle_points)):
            worst = max(worst, float(ctx.omega_alpha(fiber)["closedness"][alpha]))
        return worst, None

    return run


def _integrability_check(rho):
    def run(ctx):
        return ctx.nijenhuis_max(rho), None

    return run


def _two_path_check(rho):
    def run(ctx):
        m = 2 * ctx.spec.n
        dim = 4 * ctx.spec.n
        worst = 0.0
        for fiber, xi in enumerate(ctx.bundle_points):
            closed = nijenhuis_j2_closed_form(ctx.spec, xi, rho, cache=ctx.cache)
            j2m = j2_at(ctx.spec, xi, rho).matrix
            pairs = ctx.nijenhuis_pairs(rho, fiber)
            for i in range(m):
                for j in range(i + 1, m):
                    expected = np.zeros(dim)
                    expected[m:] = closed[i, j]
                    got = j2m @ pairs[(i, j)]
                    worst = max(worst, float(np.max(np.abs(got - expected))))
        return worst, None

    return run


PREPOTENTIAL = frozenset({"prepotential"})


def registry() -> tuple[CheckDef, ...]:
    """Stable catalog of every verifiable identity."""
    return (
        CheckDef("charts.regularity", 0.5, _chk_regularity),
        CheckDef("charts.lagrangian-closedness", 1e-9, _chk_lagrangian),
        CheckDef("charts.newton-roundtrip", 1e-9, _chk_newton_roundtrip),
        CheckDef("charts.gamma-pullback-nondegenerate", 0.5, _chk_gamma_pullback),
        CheckDef("geometry.j-squares-to-minus-identity", 1e-10, _chk_j_squares),
        CheckDef("geometry.metric-symmetric", 1e-10, _chk_metric_symmetric),
        CheckDef("geometry.metric-j-invariant", 1e-10, _chk_metric_j_invariant),
        CheckDef("geometry.hodge-split-types", 1e-10, _chk_hodge_types),
        CheckDef(
            "geometry.symplectic-form-j-invariant", 1e-9, _chk_symplectic_j_invariant,
            kinds=PREPOTENTIAL,
        ),
        CheckDef(
            "geometry.anti-invariant-part-matches-ambient-form", 1e-9,
            _chk_anti_part_matches_ambient,
        ),
        CheckDef(
            "geometry.ambient-metric-identity", 1e-9, _chk_ambient_metric_identity,
            kinds=PREPOTENTIAL,
        ),
        CheckDef("geometry.d-nabla-j-vanishes", 5e-6, _chk_d_nabla_j),
        CheckDef("geometry.theta-family-torsionfree", 5e-6, _chk_theta_family),
        CheckDef("geometry.conjugate-connection-symmetric", 5e-6, _chk_conjugate_symmetric),
        CheckDef("geometry.complex-connection-parallel-j", 5e-6, _chk_d_parallel_j),
        CheckDef(
            "geometry.connection-difference-j-compatible", 1e-8, _chk_connection_difference,
        ),
        CheckDef("geometry.invariant-part-closed", 5e-6, _chk_invariant_part_closed),
        CheckDef(
            "geometry.nabla-g-totally-symmetric", 5e-6, _chk_nabla_g_symmetric,
            kinds=PREPOTENTIAL,
        ),
        CheckDef(
            "geometry.levi-civita-matches-d-connection", 1e-5, _chk_levi_civita,
            kinds=PREPOTENTIAL,
        ),
        CheckDef("geometry.metric-duality", 5e-6, _chk_metric_duality, kinds=PREPOTENTIAL),
        CheckDef("geometry.conic-homogeneity", 1e-12, _chk_conic_homogeneity, conic_only=True),
        CheckDef(
            "geometry.conic-euler-identity", 1e-12, _chk_conic_euler,
            kinds=PREPOTENTIAL, conic_only=True,
        ),
        CheckDef("cotangent.j1-squares-to-minus-identity", 1e-10, _chk_j1_squares),
        CheckDef("cotangent.j2-squares-to-minus-identity", 1e-10, _chk_j2_squares),
        CheckDef("cotangent.fiber-independence", 1e-12, _chk_fiber_independence),
        CheckDef(
            "cotangent.invariant-anticommutes", 1e-8,
            _quaternion_check("anticommute_invariant"),
        ),
        CheckDef(
            "cotangent.j3-squares-to-minus-identity", 1e-10,
            _quaternion_check("j3_squares_to_minus_identity"),
        ),
        CheckDef("cotangent.para-commutes", 1e-9, _quaternion_check("commute_anti_invariant")),
        CheckDef(
            "cotangent.para-involution-squares-to-identity", 1e-10,
            _quaternion_check("j3_squares_to_plus_identity"),
        ),
        CheckDef(
            "cotangent.commutator-block-identity", 1e-8,
            _quaternion_check("commutator_block_identity"),
        ),
        CheckDef(
            "cotangent.anticommutator-block-identity", 1e-8,
            _quaternion_check("anticommutator_block_identity"),
        ),
        CheckDef("cotangent.gn-orthogonal-j1", 1e-9, _chk_gn_orthogonal_j1),
        CheckDef("cotangent.gn-orthogonal-j2", 1e-9, _chk_gn_orthogonal_j2),
        CheckDef("cotangent.omega-alpha-skew", 1e-9, _chk_omega_alpha_skew),
        CheckDef(
            "cotangent.omega1-closed-iff-invariant-parallel", 0.5, _chk_omega1_iff_parallel,
        ),
        CheckDef("cotangent.omega2-closed", 5e-6, _omega_closed_check(1)),
        CheckDef("cotangent.omega3-closed", 5e-6, _omega_closed_check(2)),
        CheckDef("cotangent.j1-integrable", 5e-6, _integrability_check("j1")),
        CheckDef("cotangent.j2-full-form-integrable", 1e-8, _integrability_check("omega")),
        CheckDef(
            "cotangent.j2-invariant-part-integrable", 5e-6, _integrability_check("omega11"),
            kinds=PREPOTENTIAL,
        ),
        CheckDef("cotangent.j3-integrable", 5e-6, _integrability_check("j3"), kinds=PREPOTENTIAL),
        CheckDef("cotangent.j2-anti-part-integrable", 1e-6, _integrability_check("omegaprime")),
        CheckDef("cotangent.nijenhuis-two-path-invariant", 1e-5, _two_path_check("omega11")),
        CheckDef("cotangent.nijenhuis-two-path-anti-part", 1e-5, _two_path_check("omegaprime")),
    )


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

def _run_one(check: CheckDef, ctx: SampleContext) -> CheckResult:
    expected = check.check_id in ctx.spec.expected_fail
    try:
        residual, ratio = check.run(ctx)
        residual = float(residual)
        if not math.isfinite(residual):
            residual = 1e300  # fails every tolerance; keeps the report numeric
        status = "pass" if residual <= check.tolerance else "fail"
        return CheckResult(
            check.check_id, ctx.point_index, ctx.z, status,
            residual, check.tolerance, None, ratio, expected,
        )
    except SkipCheck as skip:
        reason = skip.reason
    except NotRegular:
        reason = REASON_NOT_REGULAR
    except StepTooLarge:
        reason = REASON_NOT_REGULAR  # a neighbor left the regular domain
    except NewtonDiverged:
        reason = REASON_NEWTON
    except DegenerateForm:
        reason = REASON_DEGENERATE
    except EvaluationError:
        reason = REASON_NOT_REGULAR  # pole or branch point at or near the sample
    return CheckResult(
        check.check_id, ctx.point_index, ctx.z, "skipped",
        None, check.tolerance, reason, None, expected,
    )


def _run_sample(spec: ManifoldSpec, point_index: int, seed: int,
                checks: tuple[CheckDef, ...]) -> list[CheckResult]:
    ctx = SampleContext(spec, point_index, seed)
    return [_run_one(check, ctx) for check in checks]


def _resolve_threads(threads: int, n_samples: int) -> int:
    if threads == 0:
        threads = os.cpu_count() or 1
    return max(1, min(threads, n_samples))


@dataclass(frozen=True)
class VerificationReport:
    spec_echo: dict
    seed: int
    results: tuple[CheckResult, ...]
    aggregates: dict
    summary: dict

    def to_object(self) -> dict:
        return {
            "tool": {"name": "specgeo", "version": TOOL_VERSION},
            "seed": self.seed,
            "conventions": dict(CONVENTIONS),
            "spec": self.spec_echo,
            "summary": self.summary,
            "aggregates": self.aggregates,
            "results": [r.to_object() for r in self.results],
        }

    def to_json(self) -> str:
        return _to_json(self.to_object()) + "\n"


def _spec_echo(spec: ManifoldSpec) -> dict:
    return {
        "n": spec.n,
        "kind": spec.kind,
        "components": [to_source(ast) for ast in spec.components],
        "sample_points": [
            [[float(c.real), float(c.imag)] for c in np.asarray(z, dtype=complex)]
            for z in spec.sample_points
        ],
        "fd_step": spec.fd_step,
        "tol": spec.tol,
        "conic": spec.conic,
        "theta_samples_radians": [float(t) for t in spec.theta_samples],
        "lambda_samples": [[float(l.real), float(l.imag)] for l in spec.lambda_samples],
        "fibers": [[float(v) for v in p] for p in spec.fibers],
        "expected_fail": sorted(spec.expected_fail),
        "expected_skip": spec.expected_skip,
    }


def run_report(spec: ManifoldSpec, seed: int = 0, threads: int = 0) -> VerificationReport:
    """Evaluate every applicable registry check on the sample plan."""
    if not spec.sample_points:
        raise SpecInvalid("spec has no sample points")
    for p in spec.fibers:
        if np.asarray(p).shape != (2 * spec.n,):
            raise SpecInvalid(f"fiber vectors must have length {2 * spec.n}")
    checks = tuple(c for c in registry() if c.applies_to(spec))
    indices = range(len(spec.sample_points))
    workers = _resolve_threads(threads, len(spec.sample_points))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda i: _run_sample(spec, i, seed, checks), indices))
    else:
        chunks = [_run_sample(spec, i, seed, checks) for i in indices]
    results = sorted(
        (r for chunk in chunks for r in chunk),
        key=lambda r: (r.check_id, r.point_index),
    )

    aggregates: dict[str, dict] = {}
    for r in results:
        agg = aggregates.setdefault(r.check_id, {
            "pass": 0, "fail": 0, "skipped": 0,
            "max_residual": None, "worst_point_index": None,
        })
        agg[r.status] += 1
        if r.residual is not None and (
            agg["max_residual"] is None or r.residual > agg["max_residual"]
        ):
            agg["max_residual"] = r.residual
            agg["worst_point_index"] = r.point_index

    n_pass = sum(1 for r in results if r.status == "pass")
    n_skipped = sum(1 for r in results if r.status == "skipped")
    n_expected = sum(1 for r in results if r.status == "fail" and r.expected_fail)
    n_fail = sum(1 for r in results if r.status == "fail" and not r.expected_fail)
    all_skipped = len(results) > 0 and n_skipped == len(results)
    ok = n_fail == 0 and (not all_skipped or spec.expected_skip)
    summary = {
        "checks_total": len(results),
        "pass": n_pass,
        "fail": n_fail,
        "expected_fail": n_expected,
        "skipped": n_skipped,
        "all_skipped": all_skipped,
        "ok": ok,
    }
    return VerificationReport(_spec_echo(spec), seed, tuple(results), aggregates, summary)


# ---------------------------------------------------------------------------
# Deterministic JSON with 17-significant-digit floats
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("non-finite value in report")
    text = format(float(x), ".17g")
    return text


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def _to_json(value, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        return _escape(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt_float(float(value))
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{inner}{_escape(str(k))}: {_to_json(v, indent + 1)}" for k, v in value.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{inner}{_to_json(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(value)!r}")
