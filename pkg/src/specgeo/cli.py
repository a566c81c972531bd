"""Command-line front end: load manifold spec files, verify, dump, scan.

Spec files are JSON documents with the keys

    n               dimension (int, >= 1)
    kind            "prepotential" | "one_form"
    components      list of expression strings (1 or n entries)
    sample_points   list of points, each a list of n [re, im] pairs
    fd_step         finite-difference step (optional)
    tol             regularity / degeneracy cutoff (optional)
    conic           run the scaling checks (optional, default false)
    theta_samples   connection-family angles in DEGREES (optional)
    lambda_samples  scaling factors as [re, im] pairs (optional)
    fibers          list of 2n-vectors of momenta (optional)
    expected_fail   check ids allowed to fail (optional)
    expected_skip   spec is expected to produce only skips (optional)
    expected_tensors  documentation matrices keyed J | g | omega | omega11
                      (optional; compared by the test suite, not at runtime)

Unknown keys are rejected.  Angles are converted to radians on load.

Exit codes: 0 all non-expected-fail checks pass, 1 check failures (or a
fully skipped run without expected_skip), 2 spec or IO errors.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from .charts import ManifoldSpec, NotRegular, chart_point, regularity_matrix
from .cotangent import BundlePoint, g_N_at, j1_at, j2_at
from .expr import EvaluationError, ParseError, parse_expression
from .geometry import (
    complex_structure_affine,
    hodge_split,
    kaehler_metric,
    symplectic_matrix,
)
from .verify import SpecInvalid, registry, run_report

__all__ = ["LoadedSpec", "load_spec_file", "main"]

_SPEC_KEYS = {
    "n", "kind", "components", "sample_points", "fd_step", "tol", "conic",
    "theta_samples", "lambda_samples", "fibers", "expected_fail",
    "expected_skip", "expected_tensors",
}

_TENSOR_NAMES = ("J", "g", "omega", "omega11", "J1", "J2", "gN")


@dataclass(frozen=True)
class LoadedSpec:
    path: str
    manifold: ManifoldSpec
    expected_tensors: dict = field(default_factory=dict)


def _as_complex_pair(value, what: str) -> complex:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise SpecInvalid(f"{what} must be a [re, im] pair, got {value!r}")
    return complex(float(value[0]), float(value[1]))


def load_spec_file(path: str) -> LoadedSpec:
    """Parse and validate a spec file; raises SpecInvalid on any defect."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as err:
        raise SpecInvalid(f"{path}: not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise SpecInvalid(f"{path}: top level must be an object")
    unknown = set(raw) - _SPEC_KEYS
    if unknown:
        raise SpecInvalid(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("n", "kind", "components", "sample_points"):
        if key not in raw:
            raise SpecInvalid(f"{path}: missing required key {key!r}")

    n = raw["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SpecInvalid(f"{path}: n must be a positive integer")
    kind = raw["kind"]
    if kind not in ("prepotential", "one_form"):
        raise SpecInvalid(f"{path}: kind must be 'prepotential' or 'one_form'")

    sources = raw["components"]
    if not isinstance(sources, list) or not all(isinstance(s, str) for s in sources):
        raise SpecInvalid(f"{path}: components must be a list of strings")
    try:
        components = tuple(parse_expression(src, n) for src in sources)
    except ParseError as err:
        raise SpecInvalid(f"{path}: bad component expression: {err}") from err

    points_raw = raw["sample_points"]
    if not isinstance(points_raw, list):
        raise SpecInvalid(f"{path}: sample_points must be a list")
    sample_points = []
    for k, entry in enumerate(points_raw):
        if not isinstance(entry, list) or len(entry) != n:
            raise SpecInvalid(f"{path}: sample point {k} must list {n} coordinates")
        sample_points.append(np.array(
            [_as_complex_pair(c, f"sample point {k} coordinate") for c in entry]
        ))

    kwargs = {}
    if "fd_step" in raw:
        kwargs["fd_step"] = float(raw["fd_step"])
    if "tol" in raw:
        kwargs["tol"] = float(raw["tol"])
    if "conic" in raw:
        if not isinstance(raw["conic"], bool):
            raise SpecInvalid(f"{path}: conic must be a boolean")
        kwargs["conic"] = raw["conic"]
    if "theta_samples" in raw:
        degrees = raw["theta_samples"]
        if not isinstance(degrees, list) or not degrees:
            raise SpecInvalid(f"{path}: theta_samples must be a nonempty list of degrees")
        kwargs["theta_samples"] = tuple(np.deg2rad(float(d)) for d in degrees)
    if "lambda_samples" in raw:
        kwargs["lambda_samples"] = tuple(
            _as_complex_pair(lam, "lambda sample") for lam in raw["lambda_samples"]
        )
    if "fibers" in raw:
        fibers = []
        for k, p in enumerate(raw["fibers"]):
            if not isinstance(p, list) or len(p) != 2 * n:
                raise SpecInvalid(f"{path}: fiber {k} must list {2 * n} momenta")
            fibers.append(np.array([float(v) for v in p]))
        kwargs["fibers"] = tuple(fibers)
    if "expected_fail" in raw:
        ids = raw["expected_fail"]
        if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
            raise SpecInvalid(f"{path}: expected_fail must be a list of check ids")
        known = {c.check_id for c in registry()}
        bad = sorted(set(ids) - known)
        if bad:
            raise SpecInvalid(f"{path}: expected_fail names unknown checks {bad}")
        kwargs["expected_fail"] = frozenset(ids)
    if "expected_skip" in raw:
        if not isinstance(raw["expected_skip"], bool):
            raise SpecInvalid(f"{path}: expected_skip must be a boolean")
        kwargs["expected_skip"] = raw["expected_skip"]

    expected_tensors = {}
    if "expected_tensors" in raw:
        tensors = raw["expected_tensors"]
        if not isinstance(tensors, dict):
            raise SpecInvalid(f"{path}: expected_tensors must be an object")
        for name, rows in tensors.items():
            if name not in _TENSOR_NAMES:
                raise SpecInvalid(f"{path}: expected_tensors key {name!r} not in {_TENSOR_NAMES}")
            try:
                expected_tensors[name] = np.array(rows, dtype=float)
            except (TypeError, ValueError) as err:
                raise SpecInvalid(f"{path}: expected_tensors[{name!r}] is not a matrix") from err

    try:
        manifold = ManifoldSpec(
            n=n, kind=kind, components=components,
            sample_points=tuple(sample_points), **kwargs,
        )
    except ValueError as err:
        raise SpecInvalid(f"{path}: {err}") from err
    return LoadedSpec(path, manifold, expected_tensors)


def _warn_irregular_samples(spec: ManifoldSpec) -> None:
    for k, z in enumerate(spec.sample_points):
        try:
            _, regular = regularity_matrix(spec, np.asarray(z, dtype=complex))
        except EvaluationError:
            regular = False
        if not regular:
            print(f"warning: sample point {k} is not regular", file=sys.stderr)


def _resolve_threads(value) -> int:
    if value is not None:
        return value
    env = os.environ.get("SPECGEO_THREADS")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as err:
        raise SpecInvalid(f"SPECGEO_THREADS must be an integer, got {env!r}") from err


def _write_output(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_verify(args) -> int:
    loaded = load_spec_file(args.spec)
    _warn_irregular_samples(loaded.manifold)
    report = run_report(loaded.manifold, seed=args.seed, threads=_resolve_threads(args.threads))
    _write_output(report.to_json(), args.out)
    summary = report.summary
    print(
        "verify: {pass} pass, {fail} fail, {expected_fail} expected-fail, "
        "{skipped} skipped".format(**summary),
        file=sys.stderr,
    )
    return 0 if summary["ok"] else 1


def _tensor_matrix(spec: ManifoldSpec, z: np.ndarray, what: str) -> np.ndarray:
    cp = chart_point(spec, z)
    if what == "J":
        return complex_structure_affine(cp).components
    if what == "omega":
        return symplectic_matrix(spec.n)
    jm = complex_structure_affine(cp).components
    w11, _ = hodge_split(jm, symplectic_matrix(spec.n))
    if what == "omega11":
        return w11
    if what == "g":
        return kaehler_metric(jm, w11, spec.tol)[0]
    xi = BundlePoint(cp, np.zeros(2 * spec.n))
    if what == "J1":
        return j1_at(xi).matrix
    if what == "J2":
        return j2_at(spec, xi, "omega").matrix
    if what == "gN":
        return g_N_at(spec, xi)
    raise SpecInvalid(f"unknown tensor {what!r}")


def _cmd_tensor(args) -> int:
    loaded = load_spec_file(args.spec)
    spec = loaded.manifold
    if not 0 <= args.point < len(spec.sample_points):
        raise SpecInvalid(
            f"point index {args.point} out of range "
            f"(spec has {len(spec.sample_points)} sample points)"
        )
    z = np.asarray(spec.sample_points[args.point], dtype=complex)
    try:
        matrix = _tensor_matrix(spec, z, args.what)
    except (NotRegular, EvaluationError) as err:
        raise SpecInvalid(f"cannot evaluate at sample point {args.point}: {err}") from err
    coords = " ".join(f"{c.real:.17g}{c.imag:+.17g}j" for c in z)
    lines = [f"# {args.what} at sample point {args.point}, z = {coords}"]
    for row in np.atleast_2d(matrix):
        lines.append(" ".join(format(float(v), " .17g") for v in row))
    _write_output("\n".join(lines) + "\n", args.out)
    return 0


_GRID_RE = re.compile(
    r"^z(?P<index>[1-9][0-9]*)\.(?P<part>re|im)="
    r"(?P<start>[^:]+):(?P<stop>[^:]+):(?P<count>[0-9]+)$"
)


@dataclass(frozen=True)
class _GridAxis:
    label: str
    index: int  # 0-based coordinate index
    part: str  # "re" | "im"
    values: np.ndarray


def _parse_grid(text: str, n: int) -> _GridAxis:
    m = _GRID_RE.match(text)
    if m is None:
        raise SpecInvalid(
            f"bad grid {text!r}; expected zK.re|im=start:stop:count"
        )
    index = int(m.group("index")) - 1
    if index >= n:
        raise SpecInvalid(f"grid coordinate z{index + 1} exceeds dimension n={n}")
    try:
        start, stop = float(m.group("start")), float(m.group("stop"))
    except ValueError as err:
        raise SpecInvalid(f"bad grid bounds in {text!r}") from err
    count = int(m.group("count"))
    if count < 1:
        raise SpecInvalid(f"grid count must be positive in {text!r}")
    return _GridAxis(text, index, m.group("part"), np.linspace(start, stop, count))


def _scan_row(spec: ManifoldSpec, z: np.ndarray) -> tuple[int, float, float, float, float]:
    """(regular, det Im H, det g, positive count, negative count); NaN
    columns with a zero flag mark points outside the regular domain."""
    nan = float("nan")
    try:
        imh, regular = regularity_matrix(spec, z)
    except EvaluationError:
        return 0, nan, nan, nan, nan
    det_imh = float(np.linalg.det(imh))
    if not regular:
        return 0, det_imh, nan, nan, nan
    cp = chart_point(spec, z)
    jm = complex_structure_affine(cp).components
    w11, _ = hodge_split(jm, symplectic_matrix(spec.n))
    g, signature, _ = kaehler_metric(jm, w11, spec.tol)
    det_g = float(np.linalg.det(0.5 * (g + g.T)))
    return 1, det_imh, det_g, float(signature[0]), float(signature[1])


def _cmd_scan(args) -> int:
    loaded = load_spec_file(args.spec)
    spec = loaded.manifold
    if not 0 <= args.point < len(spec.sample_points):
        raise SpecInvalid(
            f"point index {args.point} out of range "
            f"(spec has {len(spec.sample_points)} sample points)"
        )
    axes = [_parse_grid(text, spec.n) for text in args.grid]
    if len(axes) > 2:
        raise SpecInvalid("at most two grid axes are supported")
    base = np.asarray(spec.sample_points[args.point], dtype=complex).copy()

    lines = [
        "# scan of " + " x ".join(a.label for a in axes),
        "# columns: " + "\t".join(
            [a.label for a in axes]
            + ["regular", "det_im_hessian", "det_g", "sig_pos", "sig_neg"]
        ),
    ]
    grids = [a.values for a in axes]
    mesh = np.meshgrid(*grids, indexing="ij") if len(grids) > 1 else [grids[0]]
    for flat_index in range(mesh[0].size):
        z = base.copy()
        params = []
        for axis, values in zip(axes, mesh):
            t = float(values.reshape(-1)[flat_index])
            params.append(t)
            old = z[axis.index]
            z[axis.index] = complex(t, old.imag) if axis.part == "re" else complex(old.real, t)
        row = _scan_row(spec, z)
        lines.append("\t".join(
            format(v, ".17g") for v in (*params, *row)
        ))
    _write_output("\n".join(lines) + "\n", args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specgeo",
        description="Verify special-geometry identities built from holomorphic data.",
        epilog="Spec-file angles (theta_samples) are given in degrees and "
               "converted to radians internally.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the full check registry on a spec file")
    p_verify.add_argument("spec", help="path to a JSON spec file")
    p_verify.add_argument("--out", help="write the report here instead of stdout")
    p_verify.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
    p_verify.add_argument(
        "--threads", type=int, default=None,
        help="worker threads; 0 = one per sample up to the CPU count "
             "(default; SPECGEO_THREADS overrides)",
    )
    p_verify.set_defaults(func=_cmd_verify)

    p_tensor = sub.add_parser("tensor", help="print one tensor at a sample point")
    p_tensor.add_argument("spec")
    p_tensor.add_argument("--point", type=int, default=0, help="sample point index")
    p_tensor.add_argument("--what", choices=_TENSOR_NAMES, required=True)
    p_tensor.add_argument("--out")
    p_tensor.set_defaults(func=_cmd_tensor)

    p_scan = sub.add_parser("scan", help="tabulate scalars over a coordinate grid")
    p_scan.add_argument("spec")
    p_scan.add_argument(
        "--grid", action="append", required=True,
        help="zK.re|im=start:stop:count; repeat once for a 2d grid",
    )
    p_scan.add_argument("--point", type=int, default=0, help="base sample point index")
    p_scan.add_argument("--out")
    p_scan.set_defaults(func=_cmd_scan)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecInvalid, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
