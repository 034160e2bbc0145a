import random
import re

import pytest

from conftest import CORPUS, unit_of
from hmxforge.encoding import random_test
from hmxforge.harness import corpus_path
from hmxforge.lang import (
    CoverageTarget,
    Diagnostic,
    DuplicateName,
    MissingReturn,
    SubjectSyntaxError,
    TypeMismatch,
    UnresolvedName,
    UnresolvedType,
    build_cdg,
    load_source,
    parse_subject,
    pretty,
    signature_key,
)
from hmxforge.runtime import execute_test

_STRING_LIT = re.compile(r'"(?:[^"\\]|\\.)*"|\'(?:[^\'\\]|\\.)*\'')


def _hand_count(source: str):
    """Statement lines and predicates found by scanning the text."""
    depth, lines, preds = 0, set(), 0
    for i, raw in enumerate(source.splitlines(), 1):
        s = _STRING_LIT.sub('""', raw).strip()
        if depth >= 2 and s and not s.startswith("//") and not re.fullmatch(r"[}\s]*(else\s*\{)?", s):
            lines.add(i)
            if re.match(r"(\}\s*else\s+)?(if|while)\b", s):
                preds += 1
        depth += s.count("{") - s.count("}")
    return lines, preds


def test_minimal_subject():
    u = parse_subject("subject A { ctor() {} }")
    assert u.name == "A"
    assert len(u.constructors) == 1 and u.methods == []


def test_fraction_shape(fraction):
    names = {c.name for c in fraction.unit.methods}
    assert {"add", "divideBy", "pow"} <= names
    assert [tuple(str(p.type) for p in c.params) for c in fraction.unit.constructors] == [("int", "int")]


def test_unclosed_params_reports_brace():
    with pytest.raises(SubjectSyntaxError) as e:
        parse_subject("subject A { ctor( }")
    assert (e.value.line, e.value.col) == (1, 19)


@pytest.mark.parametrize("src, err", [
    ("subject A { ctor() {} int f() { return \"a\" + 1; } }", TypeMismatch),
    ("subject A { int x; ctor() { x = 1.5; } }", TypeMismatch),
    ("subject A { ctor() {} int f() { if (true) { return 1; } } }", MissingReturn),
    ("subject A { ctor() {} int f() { return y; } }", UnresolvedName),
    ("subject A { B b; ctor() {} }", UnresolvedType),
    ("subject A { int x; int x; ctor() {} }", DuplicateName),
    ("subject A { ctor() {} void f(int a, int a) {} }", DuplicateName),
    ("subject A { int f() { return 1; } }", Diagnostic),
])
def test_rejected(src, err):
    with pytest.raises(err):
        load_source(src)


def test_widening_only_upwards():
    load_source("subject A { double d; long l; ctor(int i) { l = i; d = l; } }")
    with pytest.raises(TypeMismatch):
        load_source("subject A { int i; ctor(long l) { i = l; } }")


@pytest.mark.parametrize("name", CORPUS)
def test_pretty_parse_roundtrip(name):
    ast = parse_subject(corpus_path(name).read_text(encoding="utf-8"))
    assert parse_subject(pretty(ast)) == ast


def test_signature_keys(fraction):
    keys = set(fraction.callables)
    assert "Fraction|<init>(int, int)Fraction" in keys
    assert "Fraction|add(Fraction)V" in keys
    u = load_source("subject C { ctor() {} int m() { return 1; } }")
    assert signature_key(u.unit.methods[0], u.unit) == "C|m()int"


def test_signature_key_injective():
    seen = {}
    for name in CORPUS:
        u = unit_of(name)
        for key, info in u.callables.items():
            ident = (info.owner.name, info.callable.name,
                     tuple(str(t) for t in info.param_types), str(info.callable.return_type))
            assert seen.setdefault(key, ident) == ident
    assert len(set(seen.values())) == len(seen)


def _cdg(body: str):
    u = load_source("subject A { int x; ctor() {} void f(int c) { " + body + " } }")
    return u.cdgs["A|f(int)V"]


def test_cdg_straight_line():
    g = _cdg("x = c; x = x + 1;")
    assert g.parent == {} and g.nodes == [None]


def test_cdg_nesting():
    g = _cdg("if (c > 0) { if (c > 5) { x = 1; } }")
    assert g.parent == {0: None, 1: (0, True)}


def test_cdg_siblings():
    g = _cdg("if (c > 0) { x = 1; } while (x < c) { x = x + 1; }")
    assert g.parent == {0: None, 1: None}


def test_cdg_acyclic_for_corpus():
    for name in CORPUS:
        for g in unit_of(name).cdgs.values():
            for b in g.parent:
                seen = set()
                while g.parent[b] is not None:
                    assert b not in seen
                    seen.add(b)
                    b = g.parent[b][0]


def test_targets_of_one_if():
    u = load_source("subject A { int x; ctor() {} void f(int c) {\n x = c;\n if (c > 0) {\n x = 1;\n }\n } }")
    ts = [t for t in u.targets if t.method == "A|f(int)V"]
    assert sum(t.kind == "branch" for t in ts) == 2
    assert sum(t.kind == "line" for t in ts) == 3


def test_branch_free_method_has_only_lines(counter):
    assert counter.branch_targets == []
    assert len(counter.line_targets) == 3


@pytest.mark.parametrize("name", CORPUS)
def test_target_counts_match_hand_count(name):
    u = unit_of(name)
    lines, preds = _hand_count(corpus_path(name).read_text(encoding="utf-8"))
    assert {t.line for t in u.line_targets} == lines
    assert len(u.branch_targets) == 2 * preds


@pytest.mark.parametrize("name", CORPUS)
def test_branch_targets_paired_and_stable(name):
    u = unit_of(name)
    ids = [(t.method, t.branch_id) for t in u.branch_targets]
    assert all(ids.count(i) == 2 for i in ids)
    again = load_source(corpus_path(name).read_text(encoding="utf-8"))
    assert again.targets == u.targets


@pytest.mark.parametrize("name", CORPUS)
def test_covering_implies_parent_covered(name):
    u = unit_of(name)
    rng = random.Random(7)
    for _ in range(40):
        tr = execute_test(random_test(u, rng, 12), u)
        for t in u.branch_targets:
            if not tr.covers(t):
                continue
            ctrl = u.cdgs[t.method].parent[t.branch_id]
            if ctrl is not None:
                assert tr.covers(CoverageTarget("branch", t.method, ctrl[0], ctrl[1]))


def test_build_cdg_direct():
    u = load_source("subject A { ctor() {} int f(int a) { while (a > 0) { a = a - 1; } return a; } }")
    c = u.unit.methods[0]
    assert build_cdg(c, "k").parent == u.cdgs["A|f(int)int"].parent
