"""Shared fixtures: catalog spec loading and memoized reports.

Reports are deterministic for a given (name, seed), so caching them at
module scope keeps the acceptance suite from re-running the same
verification several times.
"""

import functools
import pathlib

from specgeo.cli import load_spec_file
from specgeo.verify import run_report

SPECS_DIR = pathlib.Path(__file__).resolve().parent.parent / "specs"

CATALOG = ("m_quad", "m_tau", "m_cubic", "a_sympl", "a_curved", "m_degen")


def spec_path(name: str) -> str:
    return str(SPECS_DIR / f"{name}.spec")


@functools.lru_cache(maxsize=None)
def catalog_spec(name: str):
    return load_spec_file(spec_path(name))


@functools.lru_cache(maxsize=None)
def catalog_report(name: str, seed: int = 0):
    return run_report(catalog_spec(name).manifold, seed=seed)


def results_for(report, check_id: str):
    got = [r for r in report.results if r.check_id == check_id]
    assert got, f"no results for {check_id}"
    return got
