import random

import pytest

from oracles import brute_marked_shapes, congruence_class_counts
from operadforge.colimits import (
    Diagram,
    IndexCategory,
    Span,
    UnionFind,
    bifibration_colimit,
    chain_category,
    check_colimit_universal,
    check_pushout_universal,
    coequalizer_finite,
    count_structures,
    filtered_colimit,
    free_pushout_filtration,
    is_filtered,
    mediating_morphism,
    parallel_category,
    pullback,
    pushout,
    pushout_fully_faithful,
    pushout_operad,
    replay_witnesses,
    span_category,
)
from operadforge.core import (
    MultiGraph,
    OperadMorphism,
    builtin,
    component_profile,
    compose_morphisms,
    direct_image_injective,
    empty_operad,
    enumerate_morphisms,
    find_isomorphism,
    identity_morphism,
    initial_operad,
    inverse_image,
    monoid_operad,
    sig,
    validate_morphism,
    validate_operad,
)
from operadforge.errors import (
    BoundExceeded,
    HypothesisViolated,
    NotCommuting,
    NotFiltered,
    UnsupportedShape,
)
from operadforge.freeops import free_operad, truncate
from operadforge.generate import (
    Z2,
    catalog,
    cocone_candidates,
    cocone_targets,
    filtered_indices,
    filtration_instances,
    fully_faithful_candidates,
    morphisms_capped,
    random_functor,
    small_operads,
    span_candidates,
)
from operadforge.model import disjoint_union
from operadforge.trees import canonical_key, leaf_orders_for, shape_to_tree


def ident(c):
    return all(a == b for a, b in c.items())


def catalog_span(variant, a, x, y):
    cat = dict(catalog(2, variant))
    A, X, Y = cat[a], cat[x], cat[y]
    f = morphisms_capped(A, X, colour_filter=ident)[0]
    g = morphisms_capped(A, Y, colour_filter=ident)[0]
    return Span(A, f, g)


def stabilized_spans(seed, n):
    out = []
    for A, f, g in span_candidates(seed):
        sp = Span(A, f, g)
        try:
            G = pushout_operad(sp, 3)
        except Exception:
            continue
        if G.exact:
            out.append((sp, G))
        if len(out) == n:
            return out


def test_union_find():
    uf = UnionFind()
    for x in range(5):
        uf.add(x)
    assert uf.union(0, 1) and uf.union(3, 4) and not uf.union(1, 0)
    assert sorted(sorted(g) for g in uf.groups().values()) == [[0, 1], [2], [3, 4]]


# push-outs

@pytest.mark.parametrize("P", [builtin("com", max_valence=2), builtin("as_sigma", max_valence=2),
                               builtin("interval", max_valence=2), builtin("as", max_valence=2)])
def test_identity_span_gives_P(P):
    i = identity_morphism(P)
    G = pushout_operad(Span(P, i, i), 2)
    assert G.exact
    assert find_isomorphism(G.operad, P) is not None
    assert validate_operad(G.operad).passed


def test_initial_apex_com_binary_matches_congruence_oracle():
    C = builtin("com", max_valence=2)
    A = initial_operad(("c",), 2)
    f = next(enumerate_morphisms(A, C))
    sp = Span(A, f, f)
    res = pushout(sp, sig("cc", "c"), 3)
    oracle = congruence_class_counts(sp, 3)
    assert res.exact is False or len(res) == oracle[sig("cc", "c")]
    # both legs hit distinct classes: nothing identifies the two copies of m
    assert res.p and res.q and set(res.p.values()).isdisjoint(res.q.values())
    assert len(res) == oracle[sig("cc", "c")]


def test_infinite_pushout_is_reported_not_truncated():
    Z = monoid_operad(*Z2, 2)
    A = initial_operad(("c",), 2)
    sp = Span(A, next(enumerate_morphisms(A, Z)), next(enumerate_morphisms(A, Z)))
    res = pushout(sp, sig("", "c"), 2)
    assert res.exact is False


@pytest.mark.parametrize("case", [("symmetric", "abs", "com", "z2"), ("nonsymmetric", "as", "abs_ns", "com_ns"),
                                  ("reduced", "z2_red", "com_red", "z2_red"), ("symmetric", "com_a", "com2", "com_a")])
def test_catalog_pushouts_validate_and_are_universal(case):
    sp = catalog_span(*case)
    G = pushout_operad(sp, 3)
    assert G.exact
    assert validate_operad(G.operad).passed
    for leg in ("x", "y"):
        assert validate_morphism(G.maps[leg]).passed
    cocones = cocone_candidates(random.Random(0), sp.left, sp.right,
                                cocone_targets(2, sp.apex.variant, sp.apex.colours) + [G.operad], 20)
    cocones.append((G.maps["x"], G.maps["y"]))
    rep = check_pushout_universal(G, sp, cocones)
    assert rep.passed
    m = rep.checks[-1].mediating
    assert all(m(o) == o for o in G.operad.ops)


def test_pushout_matches_congruence_oracle_on_seeded_spans():
    for sp, G in stabilized_spans(11, 8):
        counts = congruence_class_counts(sp, 3)
        for S, st in G.states.items():
            assert len(st.classes) == counts[S], S


def test_witnesses_replay():
    sp = catalog_span("symmetric", "abs", "com", "z2")
    res = pushout(sp, sig("cc", "c"), 3)
    assert res.state.witnesses
    assert replay_witnesses(res.state) == len(res.state.witnesses)


def test_stabilization_with_two_more_vertices():
    for case in [("symmetric", "abs", "com", "z2"), ("reduced", "z2_red", "com_red", "z2_red"),
                 ("nonsymmetric", "as", "abs_ns", "com_ns")]:
        sp = catalog_span(*case)
        for S in [sig("c", "c"), sig("cc", "c")]:
            a = pushout(sp, S, 2)
            b = pushout(sp, S, 4)
            if a.exact:
                small = [set(c) for c in a.classes]
                big = [set(x for x in c if x in set().union(*small)) for c in b.classes]
                assert len(a) == len(b)
                assert sorted(map(sorted, small)) == sorted(map(sorted, [c for c in big if c]))


def test_non_commuting_cocone_raises():
    sp = catalog_span("symmetric", "abs", "com", "z2")
    G = pushout_operad(sp, 3)
    Z = monoid_operad(*Z2, 2)
    h = next(enumerate_morphisms(sp.left.target, Z))
    ks = [k for k in enumerate_morphisms(sp.right.target, Z)
          if compose_morphisms(k, sp.right) != compose_morphisms(h, sp.left)]
    assert ks
    with pytest.raises(NotCommuting):
        check_pushout_universal(G, sp, [(h, ks[0])])


def test_mediating_through_p_is_identity():
    sp = catalog_span("reduced", "z2_red", "com_red", "z2_red")
    G = pushout_operad(sp, 3)
    m = mediating_morphism(G, {"x": G.maps["x"], "y": G.maps["y"]})
    assert all(m(o) == o for o in G.operad.ops)


# fully faithful push-outs

def unit_into_interval():
    one = initial_operad(("0",), 2)
    I = builtin("interval", max_valence=2)
    return one, I, next(enumerate_morphisms(one, I, colour_map={"0": "0"}))


@pytest.mark.parametrize("X", [monoid_operad(*Z2, 2), builtin("com", max_valence=2), builtin("as_sigma", max_valence=2)])
def test_new_equivalent_colour(X):
    one, I, i = unit_into_interval()
    f = next(enumerate_morphisms(one, X))
    v = pushout_fully_faithful(Span(one, i, f))
    assert v.holds and v.exact
    Q = v.result.operad
    assert len(Q.colours) == 2
    assert validate_operad(Q).passed
    # oracle: X pulled back along the collapse of two colours onto one
    assert find_isomorphism(Q, inverse_image({"0": "c", "1": "c"}, X)) is not None


def test_identity_span_fully_faithful():
    P = builtin("com", colours=("a", "b"), max_valence=2)
    i = identity_morphism(P)
    assert pushout_fully_faithful(Span(P, i, i)).holds


def test_hypothesis_checked():
    C = builtin("com", max_valence=2)
    A = initial_operad(("c",), 2)
    f = next(enumerate_morphisms(A, C))
    with pytest.raises(HypothesisViolated):
        pushout_fully_faithful(Span(A, f, f))


def test_fully_faithful_seeded_instances():
    n = 0
    for A, i, f in fully_faithful_candidates(21):
        try:
            v = pushout_fully_faithful(Span(A, i, f))
        except Exception:
            v = pushout_fully_faithful(Span(A, i, f), bound=6)
        assert v.exact and v.holds, v.failures
        n += 1
        if n == 20:
            break


def test_non_injective_f_empirically():
    # i: (a) -> (a, b) full, f collapses two colours of the apex onto one
    B = builtin("com", colours=("a", "b"), max_valence=2)
    A = B
    i = identity_morphism(B)
    X = builtin("com", max_valence=2)
    f = next(enumerate_morphisms(A, X))
    v = pushout_fully_faithful(Span(A, i, f), require_f_injective=False)
    assert v.holds
    with pytest.raises(HypothesisViolated):
        pushout_fully_faithful(Span(A, i, f))


# filtered colimits

def test_constant_diagram():
    P = builtin("com", max_valence=2)
    D = Diagram(chain_category(2), {"0": P, "1": P}, {"01": identity_morphism(P)})
    r = filtered_colimit(D)
    assert find_isomorphism(r.operad, P) is not None
    assert r.structures == 1


def test_chain_of_inclusions_is_union():
    C = builtin("com", colours=("a", "b"), max_valence=2)
    Ca = direct_image_injective({"a": "a"}, builtin("com", colours=("a",), max_valence=2), ["a", "b"])
    inc = next(enumerate_morphisms(Ca, C, colour_map={"a": "a", "b": "b"}))
    D = Diagram(chain_category(2), {"0": Ca, "1": C}, {"01": inc})
    r = filtered_colimit(D)
    assert component_profile(r.operad) == component_profile(C)
    assert validate_morphism(r.cocone["0"]).passed


def test_parallel_arrows_against_set_coequalizer():
    Z4 = monoid_operad([str(i) for i in range(4)], {(a, b): str((int(a) + int(b)) % 4)
                                                   for a in "0123" for b in "0123"}, "0", 2)
    Zo = monoid_operad(*Z2, 2)
    I3 = IndexCategory(("a", "b", "c"), {"f": ("a", "b"), "g": ("a", "b"), "h": ("b", "c"), "k": ("a", "c")},
                       {("h", "f"): "k", ("h", "g"): "k"})
    assert is_filtered(I3)
    neg = [m for m in enumerate_morphisms(Z4, Z4) if m("1.1") == "3.1"][0]
    red = [m for m in enumerate_morphisms(Z4, Zo) if m("1.1") == "1.1"][0]
    D = Diagram(I3, {"a": Z4, "b": Z4, "c": Zo}, {"f": identity_morphism(Z4), "g": neg, "h": red, "k": red})
    r = filtered_colimit(D)
    # brute-force colimit of sets per component: disjoint union modulo x ~ D(u)(x)
    for S, names in component_profile(r.operad).items():
        uf = UnionFind()
        for j in I3.objects:
            for x in D.operads[j].component(S):
                uf.add((j, x))
        for u, (s, t) in I3.arrows.items():
            for x in D.operads[s].component(S):
                uf.union((s, x), (t, D.maps[u](x)))
        assert names == len(uf.groups())
    assert validate_operad(r.operad).passed


def test_idempotent_index():
    E = IndexCategory(("x",), {"e": ("x", "x")}, {("e", "e"): "e"})
    I = builtin("interval", max_valence=2)
    col = [m for m in enumerate_morphisms(I, I) if m.colour_map == {"0": "0", "1": "0"}][0]
    D = Diagram(E, {"x": I}, {"e": col})
    r = filtered_colimit(D)
    assert r.operad.colours == ("0",) and len(r.operad.ops) == 1
    assert check_colimit_universal(r.operad, r.cocone, D, [P for _, P in small_operads(2)]).passed


def test_not_filtered():
    P = builtin("com", max_valence=2)
    i = identity_morphism(P)
    with pytest.raises(NotFiltered):
        filtered_colimit(Diagram(span_category(), {"o": P, "x": P, "y": P}, {"i1": i, "i2": i}))


def test_filtered_catalog_universal_and_unique_structure():
    rng = random.Random(3)
    pool = [P for _, P in small_operads(2, "reduced")]
    for name, I in filtered_indices():
        I.check()
        assert is_filtered(I), name
        D = random_functor(rng, I, pool)
        r = filtered_colimit(D)
        assert validate_operad(r.operad).passed
        assert r.structures == 1 == count_structures(r.operad, r.cocone)
        assert check_colimit_universal(r.operad, r.cocone, D, pool).passed


# the bifibration recipe

def test_bifibration_identity_colours_is_fiber_pushout():
    sp = catalog_span("reduced", "z2_red", "com_red", "z2_red")
    D = Diagram(span_category(), {"o": sp.apex, "x": sp.left.target, "y": sp.right.target},
                {"i1": sp.left, "i2": sp.right})
    r = bifibration_colimit(D, "pushout", bound=3)
    G = pushout_operad(sp, 3)
    assert r.exact and find_isomorphism(r.operad, G.operad) is not None


def test_bifibration_glues_one_colour_operads_along_empty():
    E0 = empty_operad(2)
    X = builtin("com", max_valence=2)
    Y = monoid_operad(*Z2, 2)
    D = Diagram(span_category(), {"o": E0, "x": X, "y": Y},
                {"i1": OperadMorphism(E0, X, {}, {}), "i2": OperadMorphism(E0, Y, {}, {})})
    r = bifibration_colimit(D, "pushout", bound=3)
    assert len(r.colours) == 2 and r.exact
    # unfolded formula: the direct images along the two colour inclusions, side by side
    cx, cy = r.colour_maps["x"], r.colour_maps["y"]
    both = sorted(set(cx.values()) | set(cy.values()))
    parts = [direct_image_injective(cx, X, both), direct_image_injective(cy, Y, both)]
    for S, n in component_profile(r.operad).items():
        # each direct image carries a unit on every colour; the glued operad has one
        unit = S.valence == 1 and S.inputs[0] == S.output
        assert n == sum(len(P.component(S)) for P in parts) - unit
    assert find_isomorphism(r.operad, disjoint_union(X, Y)) is not None


def test_bifibration_coequalizer_of_colour_swap_is_orbit_set():
    C = builtin("com", colours=("a", "b", "c"), max_valence=1)
    sw = next(enumerate_morphisms(C, C, colour_map={"a": "b", "b": "a", "c": "c"}))
    D = Diagram(parallel_category(), {"a": C, "b": C}, {"f": sw, "g": identity_morphism(C)})
    r = bifibration_colimit(D, "coequalizer", bound=3)
    assert len(r.colours) == 2 and r.exact
    assert validate_operad(r.operad).passed


def test_bifibration_unsupported_shape():
    P = builtin("com", max_valence=2)
    D = Diagram(chain_category(1), {"0": P}, {})
    with pytest.raises(UnsupportedShape):
        bifibration_colimit(D, "equalizer")


# coequalizers and pullbacks

def binary_free_pair():
    K = MultiGraph(("c",), {sig("cc", "c"): ("m",)})
    F = free_operad(K)
    T = truncate(F, 3, 1)
    A = builtin("as_sigma", max_valence=3)
    m = T.names[F.generator("m")]
    ms = list(enumerate_morphisms(T.operad, A))
    return [x for x in ms if x(m) == "p01"][0], [x for x in ms if x(m) == "p10"][0]


def test_coequalizer_equal_maps():
    f, _ = binary_free_pair()
    q = coequalizer_finite(f, f)
    assert find_isomorphism(q.operad, f.target) is not None


def test_coequalizer_collapses_sigma2():
    f, g = binary_free_pair()
    q = coequalizer_finite(f, g)
    assert len(q.operad.component(sig("cc", "c"))) == 1
    assert validate_operad(q.operad).passed and validate_morphism(q.map).passed


def test_coequalizer_idempotent():
    f, g = binary_free_pair()
    q = coequalizer_finite(f, g)
    q2 = coequalizer_finite(compose_morphisms(q.map, f), compose_morphisms(q.map, g))
    assert find_isomorphism(q2.operad, q.operad) is not None


def test_pullback_along_identity():
    A = builtin("as_sigma", max_valence=2)
    P = builtin("com", max_valence=2)
    f = next(enumerate_morphisms(A, P))
    pb = pullback(f, identity_morphism(P))
    assert find_isomorphism(pb.operad, A) is not None


def test_pullback_interval_over_one():
    I = builtin("interval", max_valence=2)
    one = builtin("one", max_valence=2)
    t = next(enumerate_morphisms(I, one))
    pb = pullback(t, identity_morphism(one))
    assert validate_operad(pb.operad).passed
    assert find_isomorphism(pb.operad, I) is not None


def test_random_pullbacks_universal():
    rng = random.Random(5)
    pool = [P for _, P in small_operads(2)]
    done = 0
    while done < 15:
        R = rng.choice(pool)
        P, Q = rng.choice(pool), rng.choice(pool)
        fs, gs = morphisms_capped(P, R, 16), morphisms_capped(Q, R, 16)
        if not fs or not gs:
            continue
        f, g = rng.choice(fs), rng.choice(gs)
        pb = pullback(f, g)
        W = pb.operad
        pairs = {(pb.left(o), pb.right(o), W.ops[o]) for o in W.ops}
        assert len(pairs) == len(W.ops)
        T = rng.choice(pool)
        for a in morphisms_capped(T, P, 8):
            for b in morphisms_capped(T, Q, 8):
                if compose_morphisms(f, a) != compose_morphisms(g, b):
                    continue
                us = [u for u in enumerate_morphisms(T, W)
                      if compose_morphisms(pb.left, u) == a and compose_morphisms(pb.right, u) == b]
                assert len(us) == 1
        done += 1


# the free-map filtration

def adjoin_binary():
    X = builtin("com", max_valence=4)
    K0 = MultiGraph(("c",), {})
    K1 = MultiGraph(("c",), {sig("cc", "c"): ("g",)})
    return X, K0, K1


def test_identity_inclusion_has_empty_stages():
    X = builtin("com", max_valence=3)
    K = MultiGraph(("c",), {sig("cc", "c"): ("g",)})
    r = free_pushout_filtration(X, K, K, {"g": "m[c,c->c]"}, sig("cc", "c"), 2)
    assert [s.count for s in r.stages] == [1, 0, 0]
    assert r.agrees


def test_binary_generator_stage_counts_match_brute_force():
    X, K0, K1 = adjoin_binary()
    S = sig("cc", "c")
    r = free_pushout_filtration(X, K0, K1, {}, S, 2)
    counts = []
    for n in range(3):
        seen = set()
        for sh in brute_marked_shapes("c", 2, n, (0, 2, 3, 4)):
            for order in leaf_orders_for(["c", "c"], ["c", "c"]):
                seen.add(canonical_key(shape_to_tree(sh, order), rigid=["K"]))
        counts.append(len(seen))
    assert [s.count for s in r.stages] == counts == [1, 9, 63]
    assert r.agrees


def test_filtration_grading_and_cube_data():
    X, K0, K1 = adjoin_binary()
    r = free_pushout_filtration(X, K0, K1, {}, sig("c", "c"), 2)
    for st in r.stages:
        assert sum(f.orbits for f in st.fibers) == st.count
        for fb in st.fibers:
            assert fb.shape.count("K[") == st.n
            full = fb.corners[(1,) * st.n]
            assert fb.punctured + fb.free_part == full
            assert all(v <= full for v in fb.corners.values())


def test_filtration_needs_enough_valence():
    X = builtin("com", max_valence=2)
    _, K0, K1 = adjoin_binary()
    with pytest.raises(BoundExceeded):
        free_pushout_filtration(X, K0, K1, {}, sig("cc", "c"), 2)


def test_filtration_agrees_with_pushout_on_seeded_instances():
    for X, K0, K1, alpha, S, n in filtration_instances(7, 10):
        r = free_pushout_filtration(X, K0, K1, alpha, S, n)
        assert r.agrees, r.comparison
