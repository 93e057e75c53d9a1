"""JSON system documents (schema version "1").

A document looks like::

    {
      "schema_version": "1",
      "n": 2, "M": 1, "m0": [0, 0],
      "box": [[-1, 1], ["-1/2", 1]],
      "forms": [{"degree": 1, "monomials": [{"coeff": 1, "exps": [1, 0]},
                                             {"coeff": -1, "exps": [0, 1]}]}],
      "overrides": {"B": {"1": 0}},
      "budgets": {"count": 10000000},
      "seed": 7
    }

Only ``schema_version``, ``n`` and ``forms`` are required.  Box endpoints
are integers or ``"p/q"`` strings.  Forms stay in document order here; the
FormSystem built from a document sorts them by degree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .errors import InputError
from .forms import FormSystem, IntegerForm

SCHEMA_VERSION = "1"
TOP_FIELDS = ("schema_version", "n", "M", "m0", "box", "forms", "overrides", "budgets", "seed")
BUDGET_KEYS = ("count", "residue", "locus", "expsum")


@dataclass(frozen=True)
class FormSpec:
    degree: int
    monomials: tuple[tuple[int, tuple[int, ...]], ...]


@dataclass(frozen=True)
class SystemDocument:
    n: int
    forms: tuple[FormSpec, ...]
    M: int = 1
    m0: tuple[int, ...] | None = None
    box: tuple[tuple[Fraction, Fraction], ...] | None = None
    overrides: dict[int, int] = field(default_factory=dict)
    budgets: dict[str, int] = field(default_factory=dict)
    seed: int | None = None

    def to_system(self) -> FormSystem:
        forms = []
        for k, spec in enumerate(self.forms):
            coeffs: dict[tuple[int, ...], int] = {}
            for c, e in spec.monomials:
                coeffs[e] = coeffs.get(e, 0) + c
            try:
                forms.append(IntegerForm(self.n, spec.degree, coeffs))
            except InputError as exc:
                raise InputError(f"forms[{k}]: {exc}") from None
        return FormSystem(self.n, tuple(forms), self.M, self.m0, self.box)

    def to_json_obj(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "M": self.M,
            "forms": [
                {"degree": f.degree, "monomials": [{"coeff": c, "exps": list(e)} for c, e in f.monomials]}
                for f in self.forms
            ],
        }
        if self.m0 is not None:
            out["m0"] = list(self.m0)
        if self.box is not None:
            out["box"] = [[_fraction_out(a), _fraction_out(b)] for a, b in self.box]
        if self.overrides:
            out["overrides"] = {"B": {str(d): v for d, v in sorted(self.overrides.items())}}
        if self.budgets:
            out["budgets"] = dict(sorted(self.budgets.items()))
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _fraction_out(x: Fraction):
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _fraction_in(v, where: str) -> Fraction:
    if isinstance(v, bool):
        raise InputError(f"{where}: expected an integer or 'p/q' string")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            pass
    raise InputError(f"{where}: expected an integer or 'p/q' string, got {v!r}")


def _int(v, where: str, minimum: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise InputError(f"{where}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise InputError(f"{where}: must be >= {minimum}, got {v}")
    return v


def _list(v, where: str) -> list:
    if not isinstance(v, list):
        raise InputError(f"{where}: expected a list")
    return v


def _object(v, where: str, allowed) -> dict:
    if not isinstance(v, dict):
        raise InputError(f"{where}: expected an object")
    for key in v:
        if key not in allowed:
            raise InputError(f"{where}: unknown field {key!r}")
    return v


def parse_system(text: str) -> SystemDocument:
    """Parse and validate a document; every FormSystem invariant is checked here."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    doc = from_json_obj(raw)
    doc.to_system()
    return doc


def from_json_obj(raw) -> SystemDocument:
    raw = _object(raw, "document", TOP_FIELDS)
    for key in ("schema_version", "n", "forms"):
        if key not in raw:
            raise InputError(f"document: missing required field {key!r}")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise InputError(f"schema_version: unsupported {raw['schema_version']!r}, expected {SCHEMA_VERSION!r}")
    n = _int(raw["n"], "n", 1)
    M = _int(raw.get("M", 1), "M", 1)

    m0 = None
    if "m0" in raw:
        m0 = tuple(_int(v, f"m0[{j}]") for j, v in enumerate(_list(raw["m0"], "m0")))
        if len(m0) != n:
            raise InputError(f"m0: expected {n} entries, got {len(m0)}")
        for j, v in enumerate(m0):
            if not 0 <= v < M:
                raise InputError(f"m0: m0 coordinate {j} out of [0, M-1] (got {v}, M={M})")

    box = None
    if "box" in raw:
        rows = _list(raw["box"], "box")
        if len(rows) != n:
            raise InputError(f"box: expected {n} intervals, got {len(rows)}")
        box_rows = []
        for j, row in enumerate(rows):
            row = _list(row, f"box[{j}]")
            if len(row) != 2:
                raise InputError(f"box[{j}]: expected [lower, upper]")
            box_rows.append((_fraction_in(row[0], f"box[{j}][0]"), _fraction_in(row[1], f"box[{j}][1]")))
        box = tuple(box_rows)

    forms = []
    for k, f in enumerate(_list(raw["forms"], "forms")):
        where = f"forms[{k}]"
        f = _object(f, where, ("degree", "monomials"))
        if "degree" not in f or "monomials" not in f:
            raise InputError(f"{where}: needs 'degree' and 'monomials'")
        degree = _int(f["degree"], f"{where}.degree", 1)
        monos = []
        for i, m in enumerate(_list(f["monomials"], f"{where}.monomials")):
            mw = f"{where}.monomials[{i}]"
            m = _object(m, mw, ("coeff", "exps"))
            if "coeff" not in m or "exps" not in m:
                raise InputError(f"{mw}: needs 'coeff' and 'exps'")
            c = _int(m["coeff"], f"{mw}.coeff")
            exps = tuple(_int(e, f"{mw}.exps[{j}]", 0) for j, e in enumerate(_list(m["exps"], f"{mw}.exps")))
            if len(exps) != n:
                raise InputError(f"{mw}: expected {n} exponents, got {len(exps)}")
            if sum(exps) != degree:
                raise InputError(f"{mw}: exponent sum {sum(exps)} != degree {degree} (monomial index {i})")
            monos.append((c, exps))
        forms.append(FormSpec(degree, tuple(monos)))
    if not forms:
        raise InputError("forms: need at least one form")

    overrides: dict[int, int] = {}
    if "overrides" in raw:
        ov = _object(raw["overrides"], "overrides", ("B",))
        for key, v in _object(ov.get("B", {}), "overrides.B", _AnyKey()).items():
            try:
                d = int(key)
            except ValueError:
                raise InputError(f"overrides.B: degree key {key!r} is not an integer") from None
            overrides[d] = _int(v, f"overrides.B[{key}]", 0)

    budgets = {}
    if "budgets" in raw:
        for key, v in _object(raw["budgets"], "budgets", BUDGET_KEYS).items():
            budgets[key] = _int(v, f"budgets.{key}", 1)

    seed = _int(raw["seed"], "seed", 0) if "seed" in raw else None
    return SystemDocument(n, tuple(forms), M, m0, box, overrides, budgets, seed)


class _AnyKey:
    def __contains__(self, key):
        return True


def serialize_system(doc: SystemDocument) -> str:
    return json.dumps(doc.to_json_obj(), indent=2, sort_keys=True) + "\n"


def document_from_system(system: FormSystem, **extra) -> SystemDocument:
    forms = tuple(FormSpec(F.degree, tuple((c, e) for e, c in F.terms())) for F in system.forms)
    return SystemDocument(system.n, forms, system.M, tuple(system.m0), tuple(system.box), **extra)
