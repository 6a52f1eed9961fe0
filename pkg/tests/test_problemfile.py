import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremebound import problemfile
from extremebound.problemfile import ProblemFileError
from extremebound.system import BUILTINS, builtin_problem, burgers_truncation

BUILTIN_CASES = [(name, {"N": 4} if name == "burgers" else {}) for name in BUILTINS] + [
    ("nonautonomous2d", {"x0": "circle", "horizon": 3}),
    ("burgers", {"N": 3, "phi0": 10.0, "local": "true"}),
]


@pytest.mark.parametrize("name, params", BUILTIN_CASES)
def test_round_trip_is_structural_identity(name, params):
    spec = builtin_problem(name, params)
    text = problemfile.dumps(spec)
    back = problemfile.loads(text)
    assert back == spec
    assert problemfile.dumps(back) == text


def test_example_file_parses_to_builtin():
    doc = {"variables": ["x1", "x2"],
           "dynamics": ["x2*t - 0.1*x1 - x1*x2", "-x1*t - x2 + x1^2"],
           "observable": "x1", "t0": 0, "horizon": {"type": "infinite"},
           "initial_set": {"inequalities": [], "equalities": ["x1", "x2 - 1"]},
           "omega_extra": {"inequalities": [], "equalities": []}}
    spec = problemfile.spec_from_dict(doc)
    ref = builtin_problem("nonautonomous2d", {"x0": "point"})
    assert spec.replace(name=ref.name) == ref
    assert spec.x0_parameterization() == [0.0, 1.0]


def test_burgers_dynamics_survive_round_trip():
    spec = burgers_truncation(4)
    back = problemfile.loads(problemfile.dumps(spec))
    assert back.dynamics == spec.dynamics


@pytest.mark.parametrize("text, where", [
    ('{"variables": ["x1"], "dynamics": ["x1^-1"], "observable": "x1"}', "dynamics[0]"),
    ('{"variables": ["x1"], "dynamics": ["x1"], "observable": "x1 +"}', "observable"),
    ('{"variables": ["x1"], "dynamics": ["x1"], "observable": "x1",'
     ' "initial_set": {"equalities": ["t"]}}', "initial_set.equalities[0]"),
])
def test_parse_errors_name_field_and_offset(text, where):
    with pytest.raises(ProblemFileError) as info:
        problemfile.loads(text)
    msg = str(info.value)
    assert msg.startswith(where) and "offset" in msg


def test_malformed_exponent_offset():
    with pytest.raises(ProblemFileError, match="at offset 3"):
        problemfile.loads('{"variables": ["x1"], "dynamics": ["x1^-1"], "observable": "x1"}')


@pytest.mark.parametrize("text, match", [
    ("not json", "invalid JSON"),
    ("[1, 2]", "object"),
    ('{"variables": ["x"], "observable": "x"}', "dynamics"),
    ('{"variables": ["x"], "dynamics": ["x"], "observable": "x", "extra": 1}', "unknown"),
    ('{"variables": ["x"], "dynamics": ["x"], "observable": "x", "horizon": {"type": "finite"}}',
     "horizon"),
    ('{"variables": ["x"], "dynamics": ["x"], "observable": "x",'
     ' "horizon": {"type": "finite", "T": -1}}', "horizon"),
    ('{"variables": ["x", "y"], "dynamics": ["x"], "observable": "x"}', "dynamics"),
    ('{"variables": ["x"], "dynamics": ["x"], "observable": "x", "symmetry": [-1]}', "symmetry"),
])
def test_invalid_documents(text, match):
    with pytest.raises(ProblemFileError, match=match):
        problemfile.loads(text)


def test_file_io(tmp_path):
    spec = builtin_problem("vanDerPol", {"horizon": 5})
    path = tmp_path / "vdp.json"
    problemfile.dump(spec, path)
    assert problemfile.load(path) == spec
    doc = json.loads(path.read_text())
    assert doc["horizon"] == {"type": "finite", "T": 5.0}
    assert doc["symmetry"] == [-1, -1]


def test_parameterizations_are_inferred():
    circle = problemfile.loads(problemfile.dumps(builtin_problem("nonautonomous2d", {"x0": "circle"})))
    p = circle.x0_parameterization
    assert p.dimension == 1 and p.periodic
    assert circle.initial_set.contains(p([0.7]), tol=1e-12)
    interval = problemfile.loads(problemfile.dumps(builtin_problem("cubicSemistable1d")))
    assert interval.x0_parameterization.bounds == [(-1.0, 0.0)]
    free = problemfile.loads('{"variables": ["x"], "dynamics": ["x"], "observable": "x",'
                             ' "initial_set": {"inequalities": ["x"]}}')
    assert free.x0_parameterization is None


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False),
       st.floats(0.01, 5.0), st.floats(0.5, 50.0))
def test_coefficients_round_trip_exactly(a, b, c, T):
    doc = {"variables": ["x"], "dynamics": [f"{a!r}*x + {c!r}*x^2"], "observable": f"x - ({b!r})",
           "t0": 0.0, "horizon": {"type": "finite", "T": T}}
    spec = problemfile.spec_from_dict(doc)
    assert problemfile.loads(problemfile.dumps(spec)) == spec
