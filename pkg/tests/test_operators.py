import random

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import CORPUS, unit_of
from hmxforge.encoding import (
    ConstructorCall,
    Literal,
    MethodCall,
    Ref,
    TestCase,
    is_valid,
    random_test,
)
from hmxforge.lang import types as T
from hmxforge.operators import (
    MutationStats,
    OperatorConfig,
    SbxDraw,
    SpliceDraw,
    crossover,
    data_crossover,
    hmx,
    mutate,
    perturb_value,
    round_half_away,
    sbx_pair,
    sbx_typed,
    splice,
    spread_factor,
    spx,
    string_splice,
    truncate,
)
from hmxforge.runtime import levenshtein

FRAC = "Fraction|<init>(int, int)Fraction"
ADD = "Fraction|add(Fraction)V"
DIV = "Fraction|divideBy(Fraction)Fraction"
POW = "Fraction|pow(double)double"

finite = st.floats(-1e6, 1e6, allow_nan=False)
unit_u = st.floats(0.0, 1.0, exclude_max=True)


def frac(a, b):
    return ConstructorCall(FRAC, (Literal(T.INT, a), Literal(T.INT, b)))


# Parents shaped like the two worked-example tests; the constant receiver
# argument of the first is replaced by the second local variable.
P1 = TestCase((frac(2, 3), frac(2, -1), MethodCall(0, DIV, (Ref(1),)), MethodCall(0, ADD, (Ref(1),))))
P2 = TestCase((frac(3, 1), frac(1, 3), MethodCall(0, ADD, (Ref(1),)), MethodCall(0, POW, (Literal(T.DOUBLE, 2.0),))))


class ScriptedRandom(random.Random):
    """Random whose ``choice`` answers come from a script."""

    script: list = []

    def choice(self, seq):
        want = self.script.pop(0)
        assert want in seq
        return want


# ----------------------------------------------------------------- SBX


@pytest.mark.parametrize("u, expected", [(0.0, 0.0), (0.5, 1.0), (0.25, 0.5 ** (1 / 3.5)), (0.75, 2.0 ** (1 / 3.5))])
def test_spread_factor_values(u, expected):
    assert spread_factor(u, 2.5) == pytest.approx(expected, rel=1e-15)


@given(unit_u, st.floats(2.0, 5.0))
def test_spread_factor_regimes(u, eta):
    beta = spread_factor(u, eta)
    if u < 0.5:
        assert beta < 1
    elif u > 0.5:
        assert beta > 1
    else:
        assert beta == 1


@given(finite, finite, unit_u, st.booleans())
def test_sbx_sum_and_regime(v1, v2, u, b):
    assume(u != 0.5)
    c1, c2 = sbx_pair(v1, v2, SbxDraw.from_u(u, b))
    assert c1 + c2 == pytest.approx(v1 + v2, rel=1e-9, abs=1e-9)
    lo, hi = min(v1, v2), max(v1, v2)
    if v1 != v2 and u < 0.5:
        assert lo <= min(c1, c2) and max(c1, c2) <= hi
    if v1 != v2 and u > 0.5:
        assert min(c1, c2) < lo and max(c1, c2) > hi


@given(finite, finite, st.booleans())
def test_sbx_knife_edge_returns_parents(v1, v2, b):
    c = sbx_pair(v1, v2, SbxDraw.from_u(0.5, b))
    assert sorted(c) == pytest.approx(sorted((v1, v2)), rel=1e-9, abs=1e-9)


def test_sbx_worked_number():
    c1, c2 = sbx_pair(0.0, 10.0, SbxDraw.from_u(0.9))
    beta = 5.0 ** (1 / 3.5)
    assert (c1, c2) == pytest.approx((5 - 5 * beta, 5 + 5 * beta))
    assert sbx_typed(0, 10, SbxDraw.from_u(0.9), T.INT) == (-3, 13)


def test_sbx_literal_mode():
    d = SbxDraw.from_u(0.75, False)
    c1, c2 = sbx_pair(4.0, 1.0, d, literal=True)
    assert c1 == pytest.approx(1.5 + d.beta * 1.5)
    assert c2 == pytest.approx(-1.5 + d.beta * 1.5)
    # equal parents collapse to zero under the printed form
    assert sbx_pair(7.0, 7.0, d, literal=True) == (0.0, 0.0)


def test_typed_projection():
    d = SbxDraw.from_u(0.99, False)
    assert sbx_typed(T.INT_MAX, T.INT_MIN, d, T.INT) == (T.INT_MIN, T.INT_MAX)
    for a, b in [(True, False), (False, True)]:
        kids = sbx_typed(a, b, SbxDraw.from_u(0.5), T.BOOLEAN)
        assert sorted(kids) == [False, True]
    c1, c2 = sbx_typed(0xD7F0, 0xD810, SbxDraw.from_u(0.3), T.CHAR)
    assert all(not 0xD800 <= c <= 0xDFFF for c in (c1, c2))
    assert round_half_away(2.5) == 3 and round_half_away(-2.5) == -3


@given(st.integers(-2**31, 2**31 - 1), st.integers(-2**31, 2**31 - 1), unit_u, st.booleans(),
       st.sampled_from([T.INT, T.LONG, T.CHAR, T.BOOLEAN]))
def test_typed_results_stay_in_type(a, b, u, flip, ty):
    if ty == T.CHAR:
        a, b = abs(a) % 0xD800, abs(b) % 0xD800
    if ty == T.BOOLEAN:
        a, b = a > 0, b > 0
    for c in sbx_typed(a, b, SbxDraw.from_u(u, flip), ty):
        if ty == T.BOOLEAN:
            assert isinstance(c, bool)
        else:
            assert isinstance(c, int)
            lo, hi = {"int": (T.INT_MIN, T.INT_MAX), "long": (T.LONG_MIN, T.LONG_MAX), "char": (0, T.CHAR_MAX)}[ty.name]
            assert lo <= c <= hi


def test_draw_protocol():
    a, b = random.Random(4), random.Random(4)
    d = SbxDraw.sample(a)
    assert d.u == b.random() and d.b == (b.random() < 0.5)


# -------------------------------------------------------------- strings


def test_splice_worked_example():
    assert string_splice("lorem", "ipsum", SpliceDraw(1, 3)) == ("lom", "ipsurem")


@given(st.text(min_size=1, max_size=20), st.text(min_size=1, max_size=20), st.data())
def test_splice_conservation(x, y, data):
    i = data.draw(st.integers(0, len(x) - 1))
    j = data.draw(st.integers(0, len(y) - 1))
    a, b = string_splice(x, y, SpliceDraw(i, j))
    assert len(a) + len(b) == len(x) + len(y)
    assert a.startswith(x[: i + 1]) and b.startswith(y[: j + 1])


def test_splice_out_of_range():
    with pytest.raises(ValueError):
        string_splice("ab", "cd", SpliceDraw(2, 0))


# ------------------------------------------------------------------ SPX


def test_splice_listings_at_first_cut(fraction):
    o1, o2 = splice(P1, P2, 1, 1)
    assert o1.statements[:2] == (frac(2, 3), frac(1, 3))
    assert o1.statements[2:] == P2.statements[2:]
    assert is_valid(o1) and is_valid(o2)


def test_spx_short_parents_unchanged(fraction):
    one = TestCase((frac(1, 2),))
    assert spx(one, P2, random.Random(0), fraction) == (one, P2)


def test_spx_cut_protocol(fraction):
    rng, ref = random.Random(11), random.Random(11)
    o1, _ = spx(P1, P2, rng, fraction)
    alpha = ref.randint(1, 3)
    ref.randint(1, 3)
    assert o1.statements[:alpha] == P1.statements[:alpha]


# ------------------------------------------------------------------ HMX


def test_hmx_worked_example():
    rng = ScriptedRandom(0)
    rng.script = [0, 1, 3, 2]
    o1, o2, sites = data_crossover(P1, P2, rng)
    assert [(s.kind, s.key) for s in sites] == [("ctor", FRAC), ("method", ADD)]
    ctor, add = sites
    assert (ctor.pos1, ctor.pos2) == (0, 1)
    assert [(slot, op, parents) for slot, op, parents, _ in ctor.pairs] == [(0, "sbx", (2, 1)), (1, "sbx", (3, 3))]
    assert add.pairs == ()
    # (3, 3) stays put under mean-centred SBX; (2, 1) moves symmetrically
    (_, _, _, kids0), (_, _, _, kids1) = ctor.pairs
    assert kids1 == (3, 3) and sum(kids0) == 3
    assert o1.statements[1:] == P1.statements[1:]
    assert o2.statements[0] == P2.statements[0]


def test_data_crossover_only_touches_selected(fraction):
    rng = random.Random(2)
    for _ in range(200):
        a, b = random_test(fraction, rng, 10), random_test(fraction, rng, 10)
        o1, o2, sites = data_crossover(a, b, rng)
        touched1 = {s.pos1 for s in sites}
        for i, (x, y) in enumerate(zip(a.statements, o1.statements)):
            if i not in touched1:
                assert x == y
            else:
                assert type(x) is type(y) and x.key == y.key


@pytest.mark.parametrize("name", CORPUS)
def test_hmx_zero_rate_equals_spx(name):
    u = unit_of(name)
    cfg = OperatorConfig(data_crossover_rate=0.0)
    gen = random.Random(1)
    for seed in range(300):
        p1, p2 = random_test(u, gen, 12), random_test(u, gen, 12)
        assert hmx(p1, p2, random.Random(seed), cfg, u) == spx(p1, p2, random.Random(seed), u)


@given(st.sampled_from(CORPUS), st.integers(0, 2**32 - 1), st.sampled_from(["spx", "hmx"]))
@settings(max_examples=120, deadline=None)
def test_operators_preserve_validity(name, seed, op):
    u = unit_of(name)
    rng = random.Random(seed)
    p1, p2 = random_test(u, rng, 15), random_test(u, rng, 15)
    for o in crossover(op, p1, p2, rng, OperatorConfig(), u):
        assert is_valid(o)
        assert is_valid(mutate(o, u, rng))


def test_unknown_operator(fraction):
    with pytest.raises(ValueError):
        crossover("uniform", P1, P2, random.Random(0), OperatorConfig(), fraction)


@pytest.mark.parametrize("kw", [{"crossover_rate": 1.5}, {"data_crossover_rate": -0.1}, {"eta_c": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OperatorConfig(**kw)


# -------------------------------------------------------------- mutation


class NoEvents(random.Random):
    def random(self):
        return 0.999


def test_no_events_leaves_test_alone(fraction):
    assert mutate(P1, fraction, NoEvents(0)) == P1


def test_deleting_referenced_ctor_is_repaired(fraction):
    t = TestCase((frac(1, 2), MethodCall(0, POW, (Literal(T.DOUBLE, 3.0),))))
    rng = random.Random(0)
    seen_delete = False
    for _ in range(300):
        stats = MutationStats()
        out = mutate(t, fraction, rng, stats)
        assert is_valid(out)
        if stats.kinds and stats.kinds[-1] == "delete" and stats.mutated == 1 and not stats.inserted:
            seen_delete = True
    assert seen_delete


def test_mutation_rate_is_one_per_call(fraction):
    seed_test = random_test(fraction, random.Random(3), 20)
    rng = random.Random(8)
    stats = MutationStats()
    for _ in range(10_000):
        mutate(seed_test, fraction, rng, stats)
    assert stats.mutated / 10_000 == pytest.approx(1.0, abs=0.05)


@given(st.integers(-10**9, 10**9), st.integers(0, 2**32 - 1))
def test_int_perturbation_changes_value(v, seed):
    assert perturb_value(v, T.INT, random.Random(seed)) != v


def test_string_perturbation_edits_one_char():
    rng = random.Random(0)
    for _ in range(500):
        s = "stemming"
        out = perturb_value(s, T.STRING, rng)
        assert levenshtein(out, s) <= 1


def test_truncate_keeps_prefix(fraction):
    t = random_test(fraction, random.Random(1), 30)
    cut = truncate(t, 5)
    assert cut.statements == t.statements[:5] and is_valid(cut)
    assert truncate(t, 100) is t
