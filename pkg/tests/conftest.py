import json
from pathlib import Path

import pytest
from hypothesis import strategies as st

from extremebound.polynomial import Polynomial

FIXTURES = Path(__file__).parent / "fixtures"

VARS = ("t", "x1", "x2")


def polynomials(variables=VARS, max_degree=3, max_terms=5, coeff=10.0):
    """Random small polynomials with integer-ish and real coefficients."""
    n = len(variables)
    mono = st.tuples(*[st.integers(0, max_degree)] * n).filter(lambda m: sum(m) <= max_degree)
    coeffs = st.one_of(st.integers(-5, 5).map(float),
                       st.floats(-coeff, coeff, allow_nan=False, allow_infinity=False)
                       .filter(lambda c: c == 0 or abs(c) >= 1e-6))
    return st.dictionaries(mono, coeffs, max_size=max_terms).map(lambda d: Polynomial(variables, d))


@pytest.fixture(scope="session")
def focus_v14():
    return json.loads((FIXTURES / "focus_v14.json").read_text())


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs longer than a few seconds")


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
