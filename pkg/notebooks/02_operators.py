"""
Crossover operators on concrete parents
=======================================

SBX on numbers, the string splice, and the two test-level operators.
"""

import random

import numpy as np

from hmxforge.encoding import build_compat_index, random_test, render
from hmxforge.harness import corpus_path
from hmxforge.lang import load_subject
from hmxforge.operators import (
    OperatorConfig,
    SbxDraw,
    SpliceDraw,
    data_crossover,
    hmx,
    sbx_pair,
    spx,
    string_splice,
)

# %% SBX: u below 0.5 pulls children inside the parents, above 0.5 pushes them out
for u in (0.1, 0.5, 0.9):
    d = SbxDraw.from_u(u)
    print(f"u={u}  beta={d.beta:.3f}  children of (2, 6): {sbx_pair(2.0, 6.0, d)}")

# spread of many draws for the same pair; the sum stays 8
rng = random.Random(0)
kids = np.array([sbx_pair(2.0, 6.0, SbxDraw.sample(rng)) for _ in range(10_000)])
print("child quantiles:", np.round(np.quantile(kids[:, 0], [0.05, 0.25, 0.5, 0.75, 0.95]), 2))
print("max |sum - 8|:", np.abs(kids.sum(axis=1) - 8.0).max())

# %% string splice keeps the prefix up to and including each cut
print(string_splice("lorem", "ipsum", SpliceDraw(1, 3)))

# %% test-level crossover on two random Fraction tests
frac = load_subject(corpus_path("fraction"))
gen = random.Random(7)
p1, p2 = random_test(frac, gen, 6), random_test(frac, gen, 6)
print("parent 1\n" + render(p1))
print("parent 2\n" + render(p2))

o1, o2 = spx(p1, p2, random.Random(1), frac)
print("spx child 1\n" + render(o1))

# which signatures both children share, and what hmx did with them
i1, i2 = build_compat_index(o1, o2)
print("shared ctors:", sorted(i1.ctor_map), "shared methods:", sorted(i1.method_map))
_, _, sites = data_crossover(o1, o2, random.Random(2))
for s in sites:
    print(f"  {s.kind} {s.key} at {s.pos1}/{s.pos2}: {s.pairs}")

# %% hmx with its data step switched off is spx with the same rng stream
a = hmx(p1, p2, random.Random(1), OperatorConfig(data_crossover_rate=0.0), frac)
print("hmx at rate 0 equals spx:", a == spx(p1, p2, random.Random(1), frac))
