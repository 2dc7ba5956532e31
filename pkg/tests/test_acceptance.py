"""Acceptance criteria 1-13; each test prints one PASS/FAIL line."""

import itertools
import os
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

from oracles import congruence_class_counts
from operadforge.colimits import (
    Span,
    check_colimit_universal,
    check_pushout_universal,
    count_structures,
    filtered_colimit,
    free_pushout_filtration,
    pullback,
    pushout_fully_faithful,
    pushout_operad,
)
from operadforge.core import (
    FinAlgebra,
    MultiGraph,
    Signature,
    builtin,
    enumerate_morphisms,
    identity_morphism,
    monoid_operad,
    sig,
    validate_algebra,
    validate_morphism,
    validate_operad,
)
from operadforge.errors import OperadForgeError
from operadforge.freeops import SymbolicOperad, free_operad, hom_count_check
from operadforge.generate import (
    cocone_candidates,
    cocone_targets,
    composable_pairs,
    filtered_indices,
    filtration_instances,
    fully_faithful_candidates,
    hom_instances,
    proper_instances,
    random_functor,
    small_operads,
    span_candidates,
    zigzag_instances,
)
from operadforge.model import (
    classify,
    dwyer_kan_classify,
    generating_sets,
    rlp_all,
    two_out_of_three,
    zigzag_component_check,
)
from operadforge.trees import (
    canonical_key,
    compose_along_tree,
    enumerate_shapes,
    generator_closure,
    omega_morphisms,
    tree_operad,
)

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


def report(capsys, n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


# 1. axiom suites

def terminal_algebra(P):
    carrier = {c: ("*",) for c in P.colours}
    return FinAlgebra(P, carrier, {(o, ("*",) * s.valence): "*" for o, s in P.ops.items()})


def z2_algebra(P):
    carrier = {c: (0, 1) for c in P.colours}
    act = {(o, xs): sum(xs) % 2 for o, s in P.ops.items() for xs in itertools.product((0, 1), repeat=s.valence)}
    return FinAlgebra(P, carrier, act)


def criterion_1():
    t = time.time()
    ops = [builtin("one", max_valence=4), builtin("interval", max_valence=4), builtin("com", max_valence=4),
           builtin("com", colours=("a", "b"), max_valence=3), builtin("as", max_valence=4),
           builtin("as_sigma", max_valence=3)]
    bad = sum(not validate_operad(P).passed for P in ops)
    for P in ops:
        bad += not validate_morphism(identity_morphism(P)).passed
        bad += not validate_algebra(terminal_algebra(P)).passed
    for P, Q in [(ops[5], ops[2]), (ops[1], ops[0]), (builtin("as", max_valence=3), ops[5])]:
        for m in itertools.islice(enumerate_morphisms(P, Q), 4):
            bad += not validate_morphism(m).passed
    for P in (ops[2], ops[4], ops[5]):
        bad += not validate_algebra(z2_algebra(P)).passed
    reps = {}
    for T in enumerate_shapes(["c"], 5, 2, max_leaves=10):
        reps.setdefault(canonical_key(T, positions=False), T)
    for T in reps.values():
        O = tree_operad(T, max_valence=4)
        bad += not validate_operad(O).passed
        bad += not validate_algebra(terminal_algebra(O)).passed
    dt = time.time() - t
    return bad == 0 and dt < 10, f"{len(ops)} builtins, {len(reps)} tree operads, {bad} failures, {dt:.1f}s"


# 2. tree operads are thin

def criterion_2():
    trees = list(itertools.islice(enumerate_shapes(["a", "b"], 3, 3, max_leaves=5), 200))
    bad = 0
    for T in trees:
        O = tree_operad(T, max_valence=min(4, len(T.leaf_order) + 1))
        bad += any(len(xs) > 1 for xs in O.components.values())
    return bad == 0 and len(trees) == 200, f"{len(trees)} trees, {bad} exceptions"


# 3. tree morphisms by two routes

def cross_check(trees, labelled, pairs=None):
    bad, n = 0, 0
    for T, U in pairs if pairs is not None else itertools.product(trees, trees):
        n += 1
        bad += omega_morphisms(T, U, labelled) != set(generator_closure(T, U, labelled))
    return bad, n


def criterion_3():
    t = time.time()
    reps = {}
    for T in enumerate_shapes(["c"], 4, 2, max_leaves=10):
        reps.setdefault(canonical_key(T, positions=False), T)
    b1, n1 = cross_check(list(reps.values()), False)
    two = {}
    for T in enumerate_shapes(["a", "b"], 2, 2, max_leaves=10):
        two.setdefault(canonical_key(T, positions=False), T)
    b2, n2 = cross_check(list(two.values()), True)
    big = {}
    for T in enumerate_shapes(["a", "b"], 4, 2, max_leaves=10):
        big.setdefault(canonical_key(T, positions=False), T)
    rng = random.Random(3)
    pool = list(big.values())
    sample = [(rng.choice(pool), rng.choice(pool)) for _ in range(300)]
    b3, n3 = cross_check(None, True, sample)
    dt = time.time() - t
    bad = b1 + b2 + b3
    return bad == 0 and dt < 60, f"{n1 + n2 + n3} pairs ({len(reps)} one-colour classes), {bad} mismatches, {dt:.1f}s"


# 4. composition along trees is natural

def z(n):
    el = [str(i) for i in range(n)]
    return monoid_operad(el, {(a, b): str((int(a) + int(b)) % n) for a in el for b in el}, "0", 3)


def criterion_4():
    pairs = [(builtin("as_sigma", max_valence=3), builtin("com", max_valence=3)),
             (builtin("as_sigma", max_valence=3), builtin("as_sigma", max_valence=3)),
             (z(4), z(2)), (z(2), z(2))]
    maps = [(P, phi) for P, Q in pairs for phi in enumerate_morphisms(P, Q)]
    trees = list(enumerate_shapes(["c"], 3, 3, max_leaves=3))
    rng = random.Random(4)
    bad = 0
    for _ in range(200):
        P, phi = rng.choice(maps)
        T = rng.choice(trees)
        order = list(T.leaf_order)
        rng.shuffle(order)
        T = T.replace(leaf_order=tuple(order))
        d = {v: rng.choice(P.component(T.vertex_arity(v))) for v in range(len(T.vertices))}
        bad += phi(compose_along_tree(P, T, d)) != compose_along_tree(phi.target, T, {v: phi(x) for v, x in d.items()})
    return bad == 0, f"200 cases, {bad} violations"


# 5. free operad counts

def bracketings(n):
    if n == 1:
        return ["x"]
    return [(a, b) for k in range(1, n) for a in bracketings(k) for b in bracketings(n - k)]


def criterion_5():
    F = SymbolicOperad(MultiGraph(("c",), {sig("cc", "c"): ("m",)}), "nonsymmetric")
    got = [len(F.component(Signature(("c",) * n, "c"), n)) for n in range(1, 7)]
    want = [len(bracketings(n)) for n in range(1, 7)]
    U = free_operad(MultiGraph(("c",), {sig("c", "c"): ("u",)}))
    chain = [len(U.component(sig("c", "c"), b)) for b in range(7)]
    ok = got == want and chain == [b + 1 for b in range(7)]
    return ok, f"binary {got} vs {want}, unary chain {chain}"


# 6. the adjunction

def criterion_6():
    bad = 0
    for K, P in hom_instances(6, 50):
        h = hom_count_check(K, P, bound=2)
        bad += not (h.equal and h.bijective)
    return bad == 0, f"50 instances, {bad} mismatches"


# 7. push-out universal property

def criterion_7():
    rng = random.Random(7)
    spans, bad, cocones, oracle_bad, short = [], 0, 0, 0, 0
    for A, f, g in span_candidates(11):
        sp = Span(A, f, g)
        try:
            G = pushout_operad(sp, 3)
        except OperadForgeError:
            continue
        if not G.exact:
            continue
        targets = cocone_targets(2, A.variant, A.colours) + [G.operad]
        cs = cocone_candidates(rng, f, g, targets, 20)
        cocones += len(cs)
        short += len(cs) < 20
        rep = check_pushout_universal(G, sp, cs)
        bad += not rep.passed
        counts = congruence_class_counts(sp, 3)
        oracle_bad += any(len(st.classes) != counts[S] for S, st in G.states.items())
        spans.append(sp)
        if len(spans) == 30:
            break
    ok = bad == 0 and oracle_bad == 0 and len(spans) == 30
    return ok, (f"30 spans, {cocones} cocones ({short} spans with fewer than 20 available), "
                f"{bad} universal violations, {oracle_bad} oracle mismatches")


# 8. fully faithful push-outs

def criterion_8():
    bad, escalated, n = 0, 0, 0
    for A, i, f in fully_faithful_candidates(5):
        v = None
        for bound in (None, 6):
            try:
                v = pushout_fully_faithful(Span(A, i, f), bound=bound)
                break
            except OperadForgeError:
                escalated += 1
        bad += v is None or not (v.exact and v.holds)
        n += 1
        if n == 100:
            break
    return bad == 0, f"100 push-outs, {bad} violations, {escalated} needed bound 6"


# 9. filtration against push-out

def criterion_9():
    t = time.time()
    bad, grading = 0, 0
    for X, K0, K1, alpha, S, n in filtration_instances(7, 30):
        r = free_pushout_filtration(X, K0, K1, alpha, S, n)
        bad += not r.agrees
        for st in r.stages:
            grading += sum(f.orbits for f in st.fibers) != st.count
            grading += any(fb.shape.count("K[") != st.n for fb in st.fibers)
    dt = time.time() - t
    return bad == 0 and grading == 0 and dt < 300, \
        f"30 instances, {bad} disagreements, {grading} grading failures, {dt:.1f}s"


# 10. filtered colimits

def criterion_10():
    rng = random.Random(10)
    n, bad = 0, 0
    for variant in ("symmetric", "nonsymmetric", "reduced"):
        pool = [P for _, P in small_operads(2, variant)]
        for name, I in filtered_indices():
            for _ in range(3):
                D = random_functor(rng, I, pool)
                if D is None:
                    continue
                r = filtered_colimit(D)
                ok = validate_operad(r.operad).passed and r.structures == 1 == count_structures(r.operad, r.cocone)
                ok = ok and check_colimit_universal(r.operad, r.cocone, D, pool).passed
                bad += not ok
                n += 1
    return bad == 0 and n > 0, f"{len(filtered_indices())} indices, {n} diagrams, {bad} failures"


# 11. model structure

def criterion_11():
    rlp_bad, dk_bad, space = 0, 0, 0
    for variant in ("symmetric", "nonsymmetric", "reduced"):
        pool = [P for _, P in small_operads(2, variant)]
        gens = generating_sets(2, variant=variant)["I"]
        for P in pool:
            for Q in pool:
                for p in enumerate_morphisms(P, Q):
                    space += 1
                    rep = classify(p)
                    rlp_bad += rep.trivial_fibration != all(rlp_all(g.morphism, p) is None for g in gens)
                    dk_bad += dwyer_kan_classify(p) != rep.weak_equivalence
    tt_bad = 0
    for f, g in composable_pairs(1, 300):
        tt_bad += not two_out_of_three(f, g).holds
        for m in (f, g):
            dk_bad += dwyer_kan_classify(m) != classify(m).weak_equivalence
    zz_bad = 0
    for P, pairs, root in zigzag_instances(2, 100):
        v = zigzag_component_check(P, pairs, root)
        zz_bad += not (v.equal and len(P.component(v.source)) == len(P.component(v.target)))
    bad = rlp_bad + tt_bad + zz_bad + dk_bad
    return bad == 0, (f"{space} morphisms: {rlp_bad} RLP mismatches; 300 pairs: {tt_bad} 2-of-3 violations; "
                      f"100 zig-zags: {zz_bad}; Dwyer-Kan disagreements: {dk_bad}")


# 12. right properness

def criterion_12():
    bad = 0
    for p, w in proper_instances(3, 100):
        bad += not classify(pullback(p, w).left).weak_equivalence
    return bad == 0, f"100 pull-backs, {bad} violations"


# 13. determinism

COMMANDS = [
    ["check", "com.json"],
    ["check", "diagram-swap.json"],
    ["classify", "incl-1-to-I.json"],
    ["classify", "collapse-I-to-1.json", "--format", "text"],
    ["lift", "cell-2-to-1.json", "z2-to-com.json"],
    ["pushout", "span.json", "--bound", "4"],
    ["colimit", "diagram-swap.json"],
    ["colimit", "diagram-idempotent.json"],
    ["free", "binary.json", "--bound", "4", "--valence-cap", "4"],
    ["filtrate", "filtration.json"],
    ["campaign", "--seed", "42", "--count", "5"],
]


def run_cli(argv, hashseed):
    args = [a if not a.endswith(".json") else str(CORPUS / a) for a in argv]
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    r = subprocess.run([sys.executable, "-m", "operadforge.cli", *args], capture_output=True, env=env)
    return r.returncode, r.stdout


def criterion_13():
    diffs = []
    for argv in COMMANDS:
        if run_cli(argv, 1) != run_cli(argv, 2):
            diffs.append(argv[0])
    return not diffs, f"{len(COMMANDS)} commands, differing: {diffs or 'none'}"


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 14)}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    ok, detail = CRITERIA[n]()
    assert report(capsys, n, ok, detail), detail


if __name__ == "__main__":
    results = [report(None, n, *CRITERIA[n]()) for n in sorted(CRITERIA)]
    sys.exit(0 if all(results) else 1)
