"""
Subjects, tests and traces
==========================

Parse a subject, run a hand-written test against it and read what the
interpreter recorded.
"""

from hmxforge.encoding import parse_test, render
from hmxforge.harness import corpus_path
from hmxforge.lang import load_source, load_subject
from hmxforge.runtime import execute_test, target_fitness

# a tiny subject straight from source text
SRC = """
subject Clamp {
    int lo;
    int hi;
    ctor(int a, int b) {
        if (a > b) { throw "BadRange"; }
        lo = a;
        hi = b;
    }
    int apply(int x) {
        if (x < lo) { return lo; }
        if (x > hi) { return hi; }
        return x;
    }
}
"""
clamp = load_source(SRC)
print(clamp.name, "has", len(clamp.targets), "coverage targets")
for key in clamp.callables:
    print("  callable", key)

# %% run a test and look at the observations
test = parse_test("Clamp v0 = new Clamp(0, 10);\nv0.apply(-4);\nv0.apply(7);", clamp)
trace = execute_test(test, clamp)
print(render(test))
print(trace.to_jsonl(test))

# %% fitness per target: 0.0 means covered
cdgs = clamp.cdgs
for t in clamp.targets:
    print(f"  {t!s:32} covered={trace.covers(t)!s:5} fitness={target_fitness(t, trace, cdgs[t.method]):.3f}")

# %% a failing constructor tags the observation and skips its dependants
bad = parse_test("Clamp v0 = new Clamp(5, 1);\nv0.apply(3);", clamp)
print(execute_test(bad, clamp).observations)

# %% bundled subjects load by path
frac = load_subject(corpus_path("fraction"))
print(frac.name, len(frac.targets), "targets")
