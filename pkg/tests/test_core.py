import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from operadforge.core import (
    FinAlgebra,
    FinOperad,
    MultiGraph,
    OperadMorphism,
    Signature,
    adjacent_transpositions,
    all_perms,
    all_signatures,
    as_sigma_compose,
    block_perm,
    builtin,
    compose_morphisms,
    compose_signatures,
    direct_image_injective,
    direct_sum,
    enumerate_morphisms,
    find_isomorphism,
    full_suboperad,
    identity_morphism,
    image_morphism,
    inclusion_of_category,
    initial_operad,
    inverse_image,
    monoid_operad,
    morphism_from_json,
    morphism_to_json,
    multigraph_from_json,
    multigraph_to_json,
    operad_from_json,
    operad_to_json,
    perm_id,
    perm_inv,
    perm_mul,
    sig,
    underlying_category,
    validate_algebra,
    validate_morphism,
    validate_operad,
)
from operadforge.errors import (
    CarrierMismatch,
    NonComposable,
    NotInjective,
    OutOfBound,
    SignatureMismatch,
    UnknownBuiltin,
)

perms = st.integers(0, 4).flatmap(lambda n: st.permutations(list(range(n))).map(tuple))


def perm_pair(n):
    p = st.permutations(list(range(n))).map(tuple)
    return st.tuples(p, p)


# permutations

@given(st.integers(0, 5).flatmap(lambda n: st.tuples(*[st.permutations(list(range(n))).map(tuple)] * 3)))
def test_perm_mul_is_associative(triple):
    a, b, c = triple
    assert perm_mul(perm_mul(a, b), c) == perm_mul(a, perm_mul(b, c))


@given(perms)
def test_perm_inverse(p):
    assert perm_mul(p, perm_inv(p)) == perm_id(len(p))
    assert perm_mul(perm_inv(p), p) == perm_id(len(p))


@given(st.integers(1, 4).flatmap(perm_pair))
def test_signature_action_is_right_action(pair):
    s, t = pair
    S = Signature(tuple("abcd"[: len(s)]), "z")
    assert S.act(perm_mul(s, t)) == S.act(s).act(t)


def test_block_perm_moves_blocks():
    # blocks of sizes (1, 2) swapped: positions of block 1 come first
    assert block_perm((1, 0), (1, 2)) == (1, 2, 0)
    assert direct_sum([(1, 0), (0,)]) == (1, 0, 2)


def test_adjacent_transpositions_generate():
    gens = adjacent_transpositions(4)
    seen = {perm_id(4)}
    frontier = [perm_id(4)]
    while frontier:
        nxt = []
        for p in frontier:
            for g in gens:
                q = perm_mul(p, g)
                if q not in seen:
                    seen.add(q)
                    nxt.append(q)
        frontier = nxt
    assert len(seen) == 24


# signatures

def test_compose_signatures_valence_adds_up():
    r = compose_signatures(sig("ab", "c"), [sig("d", "a"), sig("", "b")])
    assert r == sig("d", "c")
    assert r.valence == 1


def test_compose_signatures_empty_and_identity():
    assert compose_signatures(sig("", "c"), []) == sig("", "c")
    assert compose_signatures(sig("a", "c"), [sig("a", "a")]) == sig("a", "c")


@pytest.mark.parametrize("s,ts", [
    (sig("ab", "c"), [sig("d", "a")]),
    (sig("ab", "c"), [sig("d", "a"), sig("d", "a")]),
])
def test_compose_signatures_rejects(s, ts):
    with pytest.raises(NonComposable):
        compose_signatures(s, ts)


def test_signature_text_round_trip():
    for s in all_signatures(["a", "b"], 3):
        assert Signature.parse(str(s)) == s
    assert str(sig(["a", "b"], "c")) == "a,b->c"


def test_all_signatures_counts():
    assert len(list(all_signatures(["a", "b"], 2))) == 2 * (1 + 2 + 4)
    assert len(list(all_signatures(["a", "b"], 2, reduced=True))) == 2 * (2 + 4)


# builtins and validators

@pytest.mark.parametrize("name,params,V", [
    ("one", {}, 4),
    ("interval", {}, 4),
    ("com", {}, 4),
    ("com", {"colours": ("a", "b")}, 3),
    ("com", {"colours": ("a", "b"), "variant": "nonsymmetric"}, 3),
    ("com", {"colours": ("a", "b"), "variant": "reduced"}, 3),
    ("as", {}, 4),
    ("as_sigma", {}, 3),
])
def test_builtins_validate(name, params, V):
    O = builtin(name, max_valence=V, **params)
    rep = validate_operad(O)
    assert rep.passed, str(rep)
    assert rep.checked > 0


def test_interval_shape():
    I = builtin("interval")
    assert I.colours == ("0", "1")
    for a, b in itertools.product("01", repeat=2):
        assert len(I.component(sig(a, b))) == 1
    assert I.comp("i01", ["i10"]) == "i11"
    assert I.comp("i10", ["i01"]) == "i00"


def test_one_has_only_the_unit():
    O = builtin("one")
    assert O.ops == {"u0": sig("0", "0")}
    assert O.component(sig("00", "0")) == ()


def test_com_singletons_everywhere():
    O = builtin("com", max_valence=3)
    for s in O.signatures():
        assert len(O.component(s)) == 1


def test_component_beyond_bound_raises():
    with pytest.raises(OutOfBound):
        builtin("com", max_valence=2).component(sig("ccc", "c"))


def test_unknown_builtin():
    with pytest.raises(UnknownBuiltin):
        builtin("lie")


def test_corrupted_unit_is_reported():
    O = builtin("com", max_valence=2)
    ops = dict(O.ops)
    ops["junk"] = sig("c", "c")
    compose = dict(O.compose)
    # unary composites touching the fresh element give it back; others are forced
    for o in ops:
        for ps in itertools.product(sorted(ops), repeat=ops[o].valence):
            n = sum(ops[p].valence for p in ps) if ps else ops[o].valence
            if "junk" in (o,) + ps and n <= 2:
                compose[(o, ps)] = "junk" if n == 1 else O.component(Signature(("c",) * n, "c"))[0]
    bad = FinOperad(O.colours, O.variant, 2, ops, compose, dict(O.symmetry), {"c": "junk"})
    rep = validate_operad(bad)
    assert "unit" in rep.kinds()


def test_broken_associativity_is_reported():
    O = builtin("as_sigma", max_valence=3)
    compose = dict(O.compose)
    unit = O.units["c"]
    key = next(k for k in sorted(compose) if len(O.component(O.ops[compose[k]])) > 1
               and unit not in (k[0],) + k[1])
    # swap the result for a different element of the same component
    r = compose[key]
    other = next(x for x in O.component(O.ops[r]) if x != r)
    compose[key] = other
    bad = FinOperad(O.colours, O.variant, 3, dict(O.ops), compose, dict(O.symmetry), dict(O.units))
    assert not validate_operad(bad).passed


def test_symmetry_action_law_exhaustive():
    O = builtin("as_sigma", max_valence=3)
    for o, s in O.ops.items():
        n = s.valence
        for a, b in itertools.product(all_perms(n), repeat=2):
            assert O.act(O.act(o, a), b) == O.act(o, perm_mul(a, b))


def _monomial(p):
    # p[i] is the position of variable i
    w = [0] * len(p)
    for i, k in enumerate(p):
        w[k] = i
    return w


def _from_monomial(w):
    p = [0] * len(w)
    for k, i in enumerate(w):
        p[i] = k
    return tuple(p)


def test_as_sigma_composition_is_substitution_of_monomials():
    for n in range(4):
        for o in all_perms(n):
            for sizes in itertools.product(range(3), repeat=n):
                if sum(sizes) > 4:
                    continue
                for qs in itertools.product(*[all_perms(k) for k in sizes]):
                    offs = [sum(sizes[:i]) for i in range(n)]
                    word = [offs[i] + x for i in _monomial(o) for x in _monomial(qs[i])]
                    assert as_sigma_compose(o, list(qs)) == _from_monomial(word)


def test_as_sigma_action_relabels_monomials():
    for p in all_perms(3):
        for sg in all_perms(3):
            # new variable j is old variable sg[j]
            new = [perm_inv(sg)[i] for i in _monomial(p)]
            assert perm_mul(p, sg) == _from_monomial(new)


def test_nonsymmetric_skips_equivariance():
    O = builtin("as", max_valence=3)
    rep = validate_operad(O)
    assert rep.passed
    assert "equivariance" not in rep.kinds()


def test_reduced_rejects_nullary():
    O = builtin("com", max_valence=2)
    bad = FinOperad(O.colours, "reduced", 2, dict(O.ops), dict(O.compose), dict(O.symmetry), dict(O.units))
    assert "reduced" in validate_operad(bad).kinds()


# morphisms

def test_identity_and_collapse_morphisms_validate():
    com = builtin("com", max_valence=3)
    asg = builtin("as_sigma", max_valence=3)
    assert validate_morphism(identity_morphism(com)).passed
    maps = list(enumerate_morphisms(asg, com))
    assert len(maps) == 1
    assert validate_morphism(maps[0]).passed


def test_morphism_counts_between_small_operads():
    one, I = builtin("one"), builtin("interval")
    assert len(list(enumerate_morphisms(one, I))) == 2
    assert len(list(enumerate_morphisms(I, one))) == 1
    assert len(list(enumerate_morphisms(I, I))) == 4
    asg = builtin("as_sigma", max_valence=3)
    assert len(list(enumerate_morphisms(asg, asg))) == 2


def test_unit_to_non_unit_is_reported():
    I = builtin("interval")
    phi = OperadMorphism(I, I, {"0": "0", "1": "0"}, {o: "i00" for o in I.ops})
    assert validate_morphism(phi).passed
    bad = OperadMorphism(I, I, {"0": "0", "1": "1"}, {"i00": "i00", "i11": "i11", "i01": "i01", "i10": "i01"})
    rep = validate_morphism(bad)
    assert not rep.passed


def test_validate_morphism_rejects_foreign_ops():
    I = builtin("interval")
    phi = OperadMorphism(I, I, {"0": "0", "1": "1"}, {"zzz": "i00"})
    with pytest.raises(SignatureMismatch):
        validate_morphism(phi)


def test_enumerated_morphisms_all_validate():
    I = builtin("interval", max_valence=2)
    com = builtin("com", colours=("a", "b"), max_valence=2)
    for phi in enumerate_morphisms(I, com):
        assert validate_morphism(phi).passed


def test_find_isomorphism():
    com = builtin("com", max_valence=3)
    from operadforge.core import rename_ops
    phi = find_isomorphism(com, rename_ops(com, "z"))
    assert phi is not None and validate_morphism(phi).passed
    assert find_isomorphism(com, builtin("as_sigma", max_valence=3)) is None


# inverse and direct images

def test_inverse_image_along_identity():
    O = builtin("com", colours=("a", "b"), max_valence=2)
    f = inverse_image({"a": "a", "b": "b"}, O)
    assert find_isomorphism(f, O) is not None


def test_inverse_image_of_single_colour():
    O = builtin("com", colours=("a", "b"), max_valence=3)
    f = inverse_image({"0": "a"}, O)
    for n in range(4):
        assert len(f.component(Signature(("0",) * n, "0"))) == len(O.component(Signature(("a",) * n, "a")))


def test_constant_inverse_image_of_com():
    f = inverse_image({"0": "c", "1": "c"}, builtin("com", max_valence=2))
    assert all(len(f.component(s)) == 1 for s in all_signatures(["0", "1"], 2))
    assert validate_operad(f).passed


def test_inverse_image_is_functorial():
    O = builtin("com", colours=("a", "b"), max_valence=2)
    g = {"p": "a", "q": "b"}
    f = {"0": "p", "1": "q", "2": "p"}
    once = inverse_image({k: g[v] for k, v in f.items()}, O)
    twice = inverse_image(f, inverse_image(g, O))
    for s in all_signatures(["0", "1", "2"], 2):
        assert len(once.component(s)) == len(twice.component(s))


def test_direct_image_injective_formula():
    O = builtin("com", colours=("a",), max_valence=2)
    D = direct_image_injective({"a": "a"}, O, ["a", "b"])
    assert len(D.component(sig("b", "b"))) == 1
    assert D.component(sig("ab", "a")) == ()
    assert validate_operad(D).passed
    assert validate_morphism(image_morphism({"a": "a"}, O, D)).passed


def test_direct_image_identity_and_round_trip():
    O = builtin("interval", max_valence=2)
    same = direct_image_injective({"0": "0", "1": "1"}, O, ["0", "1"])
    assert find_isomorphism(same, O) is not None
    f = {"0": "x", "1": "y"}
    back = inverse_image(f, direct_image_injective(f, O, ["x", "y", "z"]))
    for s in all_signatures(["0", "1"], 2):
        assert len(back.component(s)) == len(O.component(s))


def test_direct_image_requires_injective():
    with pytest.raises(NotInjective):
        direct_image_injective({"0": "a", "1": "a"}, builtin("interval"), ["a"])


# categories and suboperads

def test_underlying_category():
    com = builtin("com", max_valence=3)
    C = underlying_category(com)
    assert list(C.ops.values()) == [sig("c", "c")]
    assert len(underlying_category(builtin("as_sigma", max_valence=3)).ops) == 1
    I = builtin("interval")
    assert find_isomorphism(underlying_category(I), I) is not None
    assert validate_operad(C).passed
    assert validate_morphism(inclusion_of_category(builtin("as_sigma", max_valence=3))).passed


def test_full_suboperad_validates():
    O = builtin("com", colours=("a", "b"), max_valence=2)
    S = full_suboperad(O, ["a"])
    assert validate_operad(S).passed
    assert S.colours == ("a",)


def test_initial_operad_maps_uniquely():
    I = initial_operad(["a"], max_valence=2)
    maps = list(enumerate_morphisms(I, builtin("com", max_valence=2)))
    assert len(maps) == 1


def test_multigraph_reduced_rejects_nullary():
    with pytest.raises(SignatureMismatch):
        MultiGraph(("c",), {sig("", "c"): ("z",)}, "reduced")


# algebras

def _z2_algebra(operad, constant=False):
    carrier = {"c": (0, 1)}
    action = {}
    for o, s in operad.ops.items():
        for xs in itertools.product((0, 1), repeat=s.valence):
            action[(o, xs)] = 0 if constant and s.valence > 1 else sum(xs) % 2
    return FinAlgebra(operad, carrier, action)


def test_z2_over_as_and_com():
    assert validate_algebra(_z2_algebra(builtin("as", max_valence=3))).passed
    assert validate_algebra(_z2_algebra(builtin("com", max_valence=3))).passed


def test_constant_action_breaks_associativity():
    rep = validate_algebra(_z2_algebra(builtin("as", max_valence=3), constant=True))
    assert not rep.passed
    assert "associativity" in rep.kinds()


def test_one_element_algebra_over_com():
    com = builtin("com", max_valence=3)
    A = FinAlgebra(com, {"c": ("*",)}, {(o, ("*",) * s.valence): "*" for o, s in com.ops.items()})
    assert validate_algebra(A).passed


def test_algebra_off_signature_raises():
    com = builtin("com", max_valence=2)
    with pytest.raises(CarrierMismatch):
        validate_algebra(FinAlgebra(com, {"c": (0,)}, {("nope", ()): 0}))


def test_monoid_operad_validates():
    z3 = ["0", "1", "2"]
    mul = {(a, b): str((int(a) + int(b)) % 3) for a in z3 for b in z3}
    assert validate_operad(monoid_operad(z3, mul, "0", 3)).passed


# serialization

@pytest.mark.parametrize("name", ["one", "interval", "com", "as", "as_sigma"])
def test_operad_json_round_trip(name):
    O = builtin(name, max_valence=3)
    text = json.dumps(operad_to_json(O), sort_keys=True)
    back = operad_from_json(json.loads(text))
    assert json.dumps(operad_to_json(back), sort_keys=True) == text


def test_morphism_and_multigraph_json_round_trip():
    I = builtin("interval", max_valence=2)
    phi = next(enumerate_morphisms(builtin("one", max_valence=2), I))
    d = morphism_to_json(phi)
    assert morphism_from_json(json.loads(json.dumps(d))) == phi
    K = MultiGraph(("a", "b"), {sig("ab", "a"): ("m",), sig("", "b"): ("e",)})
    d = multigraph_to_json(K)
    assert multigraph_to_json(multigraph_from_json(json.loads(json.dumps(d)))) == d


def test_compose_morphisms_associative_on_interval():
    I = builtin("interval", max_valence=2)
    maps = list(enumerate_morphisms(I, I))
    for f, g, h in itertools.product(maps, repeat=3):
        assert compose_morphisms(h, compose_morphisms(g, f)) == compose_morphisms(compose_morphisms(h, g), f)
