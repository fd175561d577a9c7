"""JSON model files: schema, loading and the bundled models."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema

from .angular import AngularScheme, SchemeError, build_scheme
from .expr import Expr, ParseError, parse
from .structure import Box, GupModel, ModelError

_EXPR = {"type": "string", "minLength": 1}
_NUMBER = {"oneOf": [{"type": "number"},
                     {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"}]}
_INTERVAL = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gupphase model",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1, "maximum": 8},
        "parameters": {"type": "object", "additionalProperties": _NUMBER,
                       "propertyNames": {"pattern": "^[a-z][a-z0-9]*$"}},
        "f": _EXPR,
        "L": {"type": "array", "items": _EXPR},
        "scheme": {
            "type": "object",
            "properties": {
                "a": _EXPR,
                "f": _EXPR,
                "s": {"type": "array", "items": _EXPR, "minItems": 3, "maxItems": 3},
            },
            "required": ["a", "f"],
            "additionalProperties": False,
        },
        "hamiltonian": _EXPR,
        "domain": {
            "type": "object",
            "properties": {"q": _INTERVAL, "p": _INTERVAL},
            "additionalProperties": False,
        },
        "quantum": {
            "type": "object",
            "properties": {"ordering": {"enum": ["left", "right"]}},
            "additionalProperties": False,
        },
    },
    "required": ["dimension"],
    "oneOf": [
        {"required": ["f"], "not": {"required": ["scheme"]}},
        {"required": ["scheme"], "not": {"anyOf": [{"required": ["f"]}, {"required": ["L"]}]}},
    ],
    "additionalProperties": False,
}

BUNDLED = ("undeformed-1d", "undeformed-2d", "undeformed-3d", "constant-l", "kmm2d", "kmm3d",
           "kmm3d-sf2", "maggiore-sqrt", "polynomial-random")


class ModelFileError(ValueError):
    """Unreadable, schema-invalid or unparsable model file."""


@dataclass
class LoadedModel:
    model: GupModel
    scheme: AngularScheme | None
    hamiltonian: Expr | None
    ordering: str
    sha256: str
    source: str
    document: dict


def _number(v):
    if isinstance(v, str):
        return Fraction(re.sub(r"\s+", "", v))
    return v


def _read(ref: str) -> tuple[bytes, str]:
    path = Path(ref)
    if path.exists():
        return path.read_bytes(), str(path)
    if ref in BUNDLED:
        res = resources.files("gupphase") / "models" / f"{ref}.json"
        return res.read_bytes(), f"bundled:{ref}"
    raise ModelFileError(f"no such model file or bundled model: {ref}")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("gupphase") / "models" / f"{name}.json"))


def load_model(ref: str) -> LoadedModel:
    """Load a model from a path or a bundled model name."""
    try:
        raw, source = _read(ref)
    except OSError as exc:
        raise ModelFileError(str(exc)) from exc
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"malformed JSON: {exc}") from exc
    return from_document(doc, hashlib.sha256(raw).hexdigest(), source)


def from_document(doc: dict, sha256: str = "", source: str = "<memory>") -> LoadedModel:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ModelFileError(f"schema error at {where}: {exc.message}") from exc
    d = doc["dimension"]
    params = {k: _number(v) for k, v in doc.get("parameters", {}).items()}
    names = tuple(params)
    name = doc.get("name", Path(source).stem)
    dom = doc.get("domain", {})
    domain = Box.uniform(d, dom.get("q", (-1.0, 1.0)), dom.get("p", (-0.5, 0.5)))

    def ex(text, field, extra=()):
        try:
            return parse(text, names + tuple(extra))
        except ParseError as exc:
            raise ModelFileError(f"{field}: {exc}") from exc

    scheme = None
    try:
        if "scheme" in doc:
            if d != 3:
                raise ModelFileError("a scheme block needs dimension 3")
            sc = doc["scheme"]
            s = [ex(t, f"scheme.s[{k}]") for k, t in enumerate(sc["s"])] if "s" in sc else None
            scheme, model = build_scheme(ex(sc["a"], "scheme.a", ("rho",)), ex(sc["f"], "scheme.f", ("rho",)),
                                         s, params, name, domain)
        else:
            L_list = doc.get("L", [])
            pairs = [(i, j) for i in range(1, d + 1) for j in range(i + 1, d + 1)]
            if len(L_list) != len(pairs):
                raise ModelFileError(f"L needs {len(pairs)} upper-triangular entries for dimension {d}, "
                                     f"got {len(L_list)}")
            L = {}
            for (i, j), text in zip(pairs, L_list):
                e = ex(text, f"L[{i},{j}]")
                L[(i, j)] = e
            model = GupModel(d, ex(doc["f"], "f"), L, params, name, domain)
    except (ModelError, SchemeError) as exc:
        raise ModelFileError(str(exc)) from exc
    H = ex(doc["hamiltonian"], "hamiltonian") if "hamiltonian" in doc else None
    if H is not None:
        try:
            GupModel(d, H, {}, params)
        except ModelError as exc:
            raise ModelFileError(f"hamiltonian: {exc}") from exc
    ordering = doc.get("quantum", {}).get("ordering", "left")
    return LoadedModel(model, scheme, H, ordering, sha256, source, doc)
