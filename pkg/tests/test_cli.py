"""Spec-file loading, exit codes, tensor dumps and coordinate scans."""

import json

import numpy as np
import pytest

from conftest import CATALOG, spec_path
from specgeo.cli import _tensor_matrix, load_spec_file, main
from specgeo.verify import SpecInvalid


def write_spec(tmp_path, doc, name="case.spec"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def fixture_doc(name):
    with open(spec_path(name), encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------

def test_catalog_fixtures_load():
    for name in CATALOG:
        loaded = load_spec_file(spec_path(name))
        spec = loaded.manifold
        assert spec.kind in ("prepotential", "one_form")
        assert len(spec.components) in (1, spec.n)
        assert all(z.shape == (spec.n,) for z in spec.sample_points)


def test_theta_samples_degrees_to_radians():
    spec = load_spec_file(spec_path("m_tau")).manifold
    assert np.allclose(spec.theta_samples, [np.pi / 6, np.pi / 4, np.pi / 2])


@pytest.mark.parametrize("mutate,match", [
    (lambda d: d.update(flux_capacitor=1), "unknown keys"),
    (lambda d: d.pop("components"), "missing required key"),
    (lambda d: d.update(n=0), "positive integer"),
    (lambda d: d.update(n=True), "positive integer"),
    (lambda d: d.update(kind="potential"), "kind must be"),
    (lambda d: d.update(components=["z1 +"]), "bad component expression"),
    (lambda d: d.update(sample_points=[[[0.5, 0.25]]]), "must list 2 coordinates"),
    (lambda d: d.update(sample_points=[[[0.5], [0.3, 0.7]]]), r"\[re, im\] pair"),
    (lambda d: d.update(theta_samples=[]), "nonempty list"),
    (lambda d: d.update(fibers=[[1.0, 2.0, 3.0]]), "must list 4 momenta"),
    (lambda d: d.update(expected_fail=["charts.no-such-check"]), "unknown checks"),
    (lambda d: d.update(expected_skip="yes"), "must be a boolean"),
    (lambda d: d.update(expected_tensors={"K": [[1.0]]}), "expected_tensors key"),
], ids=lambda v: v if isinstance(v, str) else "")
def test_invalid_spec_files(tmp_path, mutate, match):
    doc = fixture_doc("m_quad")
    mutate(doc)
    with pytest.raises(SpecInvalid, match=match):
        load_spec_file(write_spec(tmp_path, doc))


def test_not_json_rejected(tmp_path):
    path = tmp_path / "broken.spec"
    path.write_text("{ not json", encoding="utf-8")
    with pytest.raises(SpecInvalid, match="not valid JSON"):
        load_spec_file(str(path))
    path.write_text("[1, 2, 3]", encoding="utf-8")
    with pytest.raises(SpecInvalid, match="top level"):
        load_spec_file(str(path))


# ---------------------------------------------------------------------------
# verify: exit codes and output
# ---------------------------------------------------------------------------

def test_verify_exit_codes_catalog(tmp_path):
    for name in CATALOG:
        out = tmp_path / f"{name}.json"
        assert main(["verify", spec_path(name), "--out", str(out)]) == 0


def test_verify_exit_code_on_failures(tmp_path):
    doc = fixture_doc("a_curved")
    del doc["expected_fail"]
    assert main(["verify", write_spec(tmp_path, doc)]) == 1

    doc = fixture_doc("m_degen")
    del doc["expected_skip"]
    assert main(["verify", write_spec(tmp_path, doc)]) == 1


def test_verify_exit_code_on_bad_input(tmp_path):
    assert main(["verify", str(tmp_path / "missing.spec")]) == 2
    bad = tmp_path / "bad.spec"
    bad.write_text("{", encoding="utf-8")
    assert main(["verify", str(bad)]) == 2


def test_verify_summary_and_warning_lines(tmp_path, capsys):
    main(["verify", spec_path("m_quad"), "--out", str(tmp_path / "r.json")])
    err = capsys.readouterr().err
    assert err.startswith("verify: 80 pass, 0 fail, 0 expected-fail, 8 skipped")

    main(["verify", spec_path("m_degen"), "--out", str(tmp_path / "d.json")])
    err = capsys.readouterr().err
    assert "warning: sample point 0 is not regular" in err


def test_verify_output_deterministic(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["verify", spec_path("a_curved"), "--out", str(first)]) == 0
    assert main(["verify", spec_path("a_curved"), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    json.loads(first.read_text(encoding="utf-8"))  # well formed


# ---------------------------------------------------------------------------
# tensor
# ---------------------------------------------------------------------------

def test_tensor_output_loadable(tmp_path):
    out = tmp_path / "g.txt"
    assert main(["tensor", spec_path("m_quad"), "--what", "g", "--out", str(out)]) == 0
    text = out.read_text(encoding="utf-8")
    assert text.startswith("# g at sample point 0, z = ")
    matrix = np.loadtxt(str(out))
    assert matrix.shape == (4, 4)
    np.testing.assert_allclose(matrix, 2.0 * np.eye(4), atol=1e-14)


def test_fixture_expected_tensors_match():
    """Documentation matrices embedded in the catalog reproduce the
    computed tensors."""
    checked = 0
    for name in CATALOG:
        loaded = load_spec_file(spec_path(name))
        if not loaded.expected_tensors:
            continue
        z = np.asarray(loaded.manifold.sample_points[0], dtype=complex)
        for what, expected in loaded.expected_tensors.items():
            got = _tensor_matrix(loaded.manifold, z, what)
            np.testing.assert_allclose(got, expected, atol=1e-9, err_msg=f"{name}:{what}")
            checked += 1
    assert checked >= 7


def test_tensor_print_round_trips_internal_values(tmp_path):
    """The printed matrix equals the in-process tensor bit for bit; 17
    significant digits round-trip a double exactly."""
    loaded = load_spec_file(spec_path("m_cubic"))
    z = np.asarray(loaded.manifold.sample_points[0], dtype=complex)
    for what in ("J", "g", "omega11", "J2"):
        out = tmp_path / f"{what}.txt"
        assert main(["tensor", spec_path("m_cubic"), "--what", what,
                     "--out", str(out)]) == 0
        printed = np.loadtxt(str(out))
        internal = _tensor_matrix(loaded.manifold, z, what)
        assert np.array_equal(printed, internal), what


def test_tensor_errors(tmp_path):
    assert main(["tensor", spec_path("m_degen"), "--what", "g"]) == 2  # never regular
    assert main(["tensor", spec_path("m_quad"), "--what", "g", "--point", "5"]) == 2


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------

def test_scan_hessian_determinant_profile(tmp_path):
    """Along z = (1, 1 + i t) the cubic model has
    det Im H = -12 t^4 / (1 + t^2)^4; the scan column must match it."""
    out = tmp_path / "scan.tsv"
    code = main([
        "scan", spec_path("m_cubic"), "--grid", "z2.im=0.1:2:5", "--out", str(out),
    ])
    assert code == 0
    table = np.loadtxt(str(out))
    assert table.shape == (5, 6)
    t = table[:, 0]
    np.testing.assert_allclose(t, np.linspace(0.1, 2.0, 5))
    assert np.all(table[:, 1] == 1)  # regular everywhere on this ray
    expected = -12.0 * t**4 / (1.0 + t**2) ** 4
    np.testing.assert_allclose(table[:, 2], expected, rtol=1e-9)
    assert np.all(table[:, 3] != 0)  # metric stays nondegenerate
    # t = 0.1 sits close to the irregular locus, where one eigenvalue of g
    # falls under the cutoff and is counted as null; away from it the
    # signature fills all four slots
    assert np.all(table[1:, 4] + table[1:, 5] == 4)


def test_scan_marks_poles_and_irregular_points(tmp_path):
    doc = fixture_doc("m_cubic")
    doc["sample_points"] = [[[1.0, 0.0], [1.0, 0.0]]]
    path = write_spec(tmp_path, doc)
    out = tmp_path / "scan.tsv"
    assert main(["scan", path, "--grid", "z2.re=-1:1:3", "--out", str(out)]) == 0
    table = np.loadtxt(str(out))
    assert table.shape == (3, 6)
    assert np.all(table[:, 1] == 0)  # nothing on the real slice is regular
    # z2 = 0 is a pole: every scalar column is flagged unavailable
    assert np.isnan(table[1, 2])
    # the other points evaluate but have a real Hessian
    np.testing.assert_allclose(table[[0, 2], 2], 0.0, atol=1e-15)
    assert np.all(np.isnan(table[:, 3]))


def test_scan_two_axes(tmp_path):
    out = tmp_path / "grid.tsv"
    code = main([
        "scan", spec_path("m_cubic"),
        "--grid", "z1.re=0.5:1.5:3", "--grid", "z2.im=0.5:1.5:3",
        "--out", str(out),
    ])
    assert code == 0
    table = np.loadtxt(str(out))
    assert table.shape == (9, 7)
    assert np.all(table[:, 2] == 1)


def test_scan_grid_validation(tmp_path):
    base = spec_path("m_cubic")
    assert main(["scan", base, "--grid", "z2.im=0:1:3", "--grid", "z1.re=0:1:3",
                 "--grid", "z1.im=0:1:3"]) == 2
    assert main(["scan", base, "--grid", "z5.re=0:1:3"]) == 2
    assert main(["scan", base, "--grid", "z2.abs=0:1:3"]) == 2
    assert main(["scan", base, "--grid", "z2.im=0:1:0"]) == 2
