import json

import pytest
from hypothesis import given, strategies as st

from gupphase.closure import closure_check
from gupphase.modelfile import BUNDLED, SCHEMA, ModelFileError, from_document, load_model


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_models_load(name):
    lm = load_model(name)
    assert lm.model.name == name and lm.hamiltonian is not None
    assert lm.source == f"bundled:{name}" and len(lm.sha256) == 64


def test_scheme_block_builds_the_induced_model():
    lm = load_model("maggiore-sqrt")
    assert lm.scheme is not None and lm.model.d == 3 and set(lm.model.L) == {(1, 2), (1, 3), (2, 3)}


def test_rational_parameters_are_exact():
    from fractions import Fraction
    assert load_model("kmm3d").model.params["beta"] == Fraction(1, 10)


def test_domain_and_ordering():
    doc = {"dimension": 2, "f": "1", "L": ["0"], "domain": {"q": [-2, 2], "p": [-0.1, 0.1]},
           "quantum": {"ordering": "right"}}
    lm = from_document(doc)
    assert lm.ordering == "right" and lm.model.domain.to_dict()["p"] == [[-0.1, 0.1]] * 2


@pytest.mark.parametrize("doc", [
    {"dimension": 2, "f": "1", "L": ["0"], "scheme": {"a": "0", "f": "1"}},
    {"dimension": 3, "scheme": {"a": "0", "f": "1"}, "L": ["0", "0", "0"]},
    {"dimension": 0, "f": "1", "L": []},
    {"dimension": 2, "L": ["0"]},
    {"dimension": 2, "f": "1", "L": ["0"], "parameters": {"Beta": 1}},
    {"dimension": 2, "f": "1", "L": ["0"], "parameters": {"beta": "one"}},
    {"dimension": 2, "f": "1", "L": ["q3"]},
    {"dimension": 2, "f": "1 +", "L": ["0"]},
    {"dimension": 2, "scheme": {"a": "0", "f": "1"}},
    {"dimension": 3, "scheme": {"a": "p1", "f": "1"}},
    {"dimension": 2, "f": "1", "L": ["0"], "hamiltonian": "q4"},
    {"dimension": 2, "f": "1", "L": ["0"], "quantum": {"ordering": "weyl"}},
])
def test_invalid_documents(doc):
    with pytest.raises(ModelFileError):
        from_document(doc)


@given(st.integers(1, 4), st.fractions(min_value=0, max_value=1, max_denominator=20))
def test_generated_kmm_documents_pass_closure(d, beta):
    f = f"1 + beta*({' + '.join(f'p{i}^2' for i in range(1, d + 1))})"
    L = [f"-2*beta*(q{i}*p{j} - q{j}*p{i})" for i in range(1, d + 1) for j in range(i + 1, d + 1)]
    lm = from_document({"dimension": d, "parameters": {"beta": str(beta)}, "f": f, "L": L})
    assert closure_check(lm.model, n=20).passed


def test_schema_is_json_serialisable():
    assert json.loads(json.dumps(SCHEMA))["title"] == "gupphase model"
