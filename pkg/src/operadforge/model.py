"""Folk model structure predicates on finite Set-operads."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .colimits import Span, UnionFind, pushout_operad
from .core import (
    FinOperad,
    MultiGraph,
    OperadMorphism,
    Signature,
    all_signatures,
    builtin,
    compose_morphisms,
    empty_operad,
    enumerate_morphisms,
    full_suboperad,
    initial_operad,
    materialize,
    restrict_valence,
    underlying_category,
)
from .errors import NotComposable, NotEquivalent
from .freeops import free_operad, truncate


# base model data on Set

@dataclass(frozen=True)
class SetMap:
    """A map of finite sets ``0..n-1 -> 0..m-1``."""

    source: int
    target: int
    values: Tuple[int, ...]

    @property
    def injective(self) -> bool:
        return len(set(self.values)) == len(self.values)

    @property
    def surjective(self) -> bool:
        return set(self.values) == set(range(self.target))

    @property
    def bijective(self) -> bool:
        return self.injective and self.surjective


@dataclass
class BaseModelData:
    name: str
    weak: Callable[[SetMap], bool]
    fib: Callable[[SetMap], bool]
    I: List[SetMap]
    J: List[SetMap]

    def trivial_fib(self, m: SetMap) -> bool:
        return self.weak(m) and self.fib(m)


def discrete_preset() -> BaseModelData:
    """Weak equivalences are bijections and every map is a fibration."""
    return BaseModelData("discrete", lambda m: m.bijective, lambda m: True,
                         [SetMap(0, 1, ()), SetMap(2, 1, (0, 0))], [])


PRESETS = {"discrete": discrete_preset}


def preset(name: str = "discrete") -> BaseModelData:
    return PRESETS[name]()


def _set_map(f: OperadMorphism, s: Signature) -> SetMap:
    src = sorted(f.source.component(s))
    tgt = sorted(f.target.component(f.on_sig(s)))
    pos = {y: i for i, y in enumerate(tgt)}
    return SetMap(len(src), len(tgt), tuple(pos[f(x)] for x in src))


def _cap(f: OperadMorphism) -> int:
    return min(f.source.max_valence, f.target.max_valence)


# colour equivalences

@dataclass
class ColourEquivalences:
    classes: List[Tuple[str, ...]]
    witnesses: Dict[Tuple[str, str], Tuple[str, str]]

    def related(self, a: str, b: str) -> bool:
        return a == b or (a, b) in self.witnesses

    def class_of(self, a: str) -> Tuple[str, ...]:
        return next(c for c in self.classes if a in c)


def _unary(P: FinOperad, a: str, b: str) -> Tuple[str, ...]:
    return P.component(Signature((a,), b)) if P.max_valence >= 1 else ()


def iso_witness(P: FinOperad, a: str, b: str) -> Optional[Tuple[str, str]]:
    """Some ``u: a -> b`` and ``v: b -> a`` inverse to each other."""
    for u in _unary(P, a, b):
        for v in _unary(P, b, a):
            if P.comp(v, (u,)) == P.units[a] and P.comp(u, (v,)) == P.units[b]:
                return u, v
    return None


def colour_equivalences(P: FinOperad) -> ColourEquivalences:
    witnesses = {}
    for a in P.colours:
        for b in P.colours:
            if a == b:
                continue
            w = iso_witness(P, a, b)
            if w is not None:
                witnesses[(a, b)] = w
    uf = UnionFind()
    for c in P.colours:
        uf.add(c)
    for a, b in witnesses:
        uf.union(a, b)
    classes = sorted(tuple(sorted(g)) for g in uf.groups().values())
    # witnesses exist between every pair of a class: isomorphisms compose
    for g in classes:
        for a in g:
            for b in g:
                if a != b and (a, b) not in witnesses:
                    raise AssertionError(f"colour equivalence is not transitive at {a}, {b}")
    return ColourEquivalences(classes, witnesses)


# the report

FLAGS = ("fully_faithful", "local_we", "local_fib", "local_trivfib", "surjective_on_colours",
         "essentially_surjective", "path_lifting", "fibration", "weak_equivalence", "trivial_fibration")


@dataclass
class ModelReport:
    flags: Dict[str, bool]
    witnesses: Dict[str, str] = field(default_factory=dict)

    def __getattr__(self, name):
        flags = self.__dict__.get("flags", {})
        if name in flags:
            return flags[name]
        raise AttributeError(name)

    @property
    def consistent(self) -> bool:
        f = self.flags
        return f["fibration"] == (f["path_lifting"] and f["local_fib"]) and \
            f["weak_equivalence"] == (f["essentially_surjective"] and f["local_we"]) and \
            f["trivial_fibration"] == (f["local_trivfib"] and f["surjective_on_colours"])

    def to_json(self) -> dict:
        return {"flags": {k: self.flags[k] for k in FLAGS},
                "witnesses": {k: self.witnesses[k] for k in sorted(self.witnesses)}}


def _local(f: OperadMorphism, pred: Callable[[SetMap], bool]) -> Optional[str]:
    P = f.source
    for s in all_signatures(P.colours, _cap(f), P.variant == "reduced"):
        if not pred(_set_map(f, s)):
            return str(s)
    return None


def path_lifting_failure(f: OperadMorphism, interval: Optional[FinOperad] = None) -> Optional[str]:
    """A colour and an isomorphism out of its image with no lift, if any.

    With ``interval`` given, lifts are searched as maps out of that two-object
    category instead of as pairs of inverse unary operations.
    """
    if interval is not None:
        return _interval_lifting_failure(f, interval)
    P, Q = f.source, f.target
    for a in P.colours:
        fa = f.colour_map[a]
        for b in Q.colours:
            for u in _unary(Q, fa, b):
                if not _invertible(Q, u, fa, b):
                    continue
                if not any(iso_witness_for(P, a, a2, f, u) for a2 in P.colours if f.colour_map[a2] == b):
                    return f"{a}: {u}"
    return None


def _invertible(Q: FinOperad, u: str, a: str, b: str) -> bool:
    return any(Q.comp(v, (u,)) == Q.units[a] and Q.comp(u, (v,)) == Q.units[b] for v in _unary(Q, b, a))


def iso_witness_for(P: FinOperad, a: str, a2: str, f: OperadMorphism, u: str) -> Optional[str]:
    """An invertible ``a -> a2`` sent to ``u``."""
    for x in _unary(P, a, a2):
        if f(x) == u and _invertible(P, x, a, a2):
            return x
    return None


def _interval_lifting_failure(f: OperadMorphism, H: FinOperad) -> Optional[str]:
    """Lifting against ``{k} -> H`` for k = 0, 1 by searching operad maps out of ``H``."""
    P, Q = f.source, f.target
    V = min(H.max_valence, 1)
    Hc = restrict_valence(underlying_category(H), V)
    Pc = restrict_valence(underlying_category(P), V)
    Qc = restrict_valence(underlying_category(Q), V)
    for k in ("0", "1"):
        for a in P.colours:
            for g in enumerate_morphisms(Hc, Qc, colour_filter=lambda c, k=k, a=a: c.get(k, f.colour_map[a]) == f.colour_map[a]):
                ok = False
                for l in enumerate_morphisms(Hc, Pc, colour_filter=lambda c, k=k, a=a: c.get(k, a) == a):
                    if all(f(l(o)) == g(o) for o in Hc.ops) and \
                            all(f.colour_map[l.colour_map[c]] == g.colour_map[c] for c in Hc.colours):
                        ok = True
                        break
                if not ok:
                    return f"{a} along {k}"
    return None


def essential_surjectivity_failure(f: OperadMorphism) -> Optional[str]:
    Q = f.target
    eq = colour_equivalences(Q)
    image = set(f.colour_map.values())
    for b in Q.colours:
        if not image & set(eq.class_of(b)):
            return b
    return None


def classify(f: OperadMorphism, base: Optional[BaseModelData] = None) -> ModelReport:
    base = base or discrete_preset()
    w: Dict[str, str] = {}
    flags: Dict[str, bool] = {}

    def put(name, failure):
        flags[name] = failure is None
        if failure is not None:
            w[name] = failure

    put("fully_faithful", _local(f, lambda m: m.bijective))
    put("local_we", _local(f, base.weak))
    put("local_fib", _local(f, base.fib))
    put("local_trivfib", _local(f, base.trivial_fib))
    missing = sorted(set(f.target.colours) - set(f.colour_map.values()))
    put("surjective_on_colours", missing[0] if missing else None)
    put("essentially_surjective", essential_surjectivity_failure(f))
    put("path_lifting", path_lifting_failure(f))
    flags["fibration"] = flags["path_lifting"] and flags["local_fib"]
    flags["weak_equivalence"] = flags["essentially_surjective"] and flags["local_we"]
    # computed from the definition; the lemma's characterization is checked against it
    flags["trivial_fibration"] = flags["fibration"] and flags["weak_equivalence"]
    rep = ModelReport(flags, w)
    if not rep.consistent:
        raise AssertionError(f"inconsistent model report: {flags}")
    return rep


# lifting

@dataclass
class LiftResult:
    lift: Optional[OperadMorphism]
    explored: int

    @property
    def exists(self) -> bool:
        return self.lift is not None


def has_rlp(i: OperadMorphism, p: OperadMorphism, top: OperadMorphism, bottom: OperadMorphism,
            budget: Optional[int] = None) -> LiftResult:
    """A diagonal ``l`` with ``l i = top`` and ``p l = bottom``, or a certificate of absence."""
    A, B = i.source, i.target
    X = p.source
    if compose_morphisms(p, top) != compose_morphisms(bottom, i):
        raise NotComposable("the square does not commute")
    want_colour = {}
    for c in A.colours:
        if want_colour.setdefault(i.colour_map[c], top.colour_map[c]) != top.colour_map[c]:
            return LiftResult(None, 0)

    def colour_ok(cmap):
        for c, d in cmap.items():
            if c in want_colour and want_colour[c] != d:
                return False
            if p.colour_map[d] != bottom.colour_map[c]:
                return False
        return True

    fixed = {}
    for o in A.ops:
        if fixed.setdefault(i(o), top(o)) != top(o):
            # i identifies two operations that top keeps apart
            return LiftResult(None, 0)
    explored = 0
    for l in enumerate_morphisms(B, X, fixed=fixed, budget=budget, colour_filter=colour_ok):
        explored += 1
        if all(p(l(o)) == bottom(o) for o in B.ops) and compose_morphisms(l, i) == top:
            return LiftResult(l, explored)
    return LiftResult(None, explored)


def squares(i: OperadMorphism, p: OperadMorphism, budget: Optional[int] = None):
    """All commuting squares from ``i`` to ``p``."""
    tops = list(enumerate_morphisms(i.source, p.source, budget=budget))
    bottoms = list(enumerate_morphisms(i.target, p.target, budget=budget))
    for a in tops:
        pa = compose_morphisms(p, a)
        for b in bottoms:
            if compose_morphisms(b, i) == pa:
                yield a, b


def rlp_all(i: OperadMorphism, p: OperadMorphism, budget: Optional[int] = None) -> Optional[Tuple]:
    """``None`` if ``p`` lifts against ``i`` in every square, else a failing square."""
    for a, b in squares(i, p, budget):
        if not has_rlp(i, p, a, b, budget).exists:
            return a, b
    return None


# generating sets

@dataclass
class Generator:
    name: str
    morphism: OperadMorphism


def _free_on(colours: Sequence[str], s: Signature, k: int, V: int, variant: str) -> Tuple[FinOperad, Dict[str, str]]:
    """The free operad on ``k`` generators at ``s``; a generator with distinct colours admits no composite."""
    names = tuple(f"x{j}" for j in range(k))
    K = MultiGraph(tuple(colours), {s: names} if k else {}, variant)
    T = truncate(free_operad(K), V, 1)
    if not T.exact:
        raise AssertionError("C_n is not finite at one vertex")
    F = free_operad(K)
    gens = {x: T.names[F.generator(x)] for x in names}
    return T.operad, gens


def cell(n: int, k_src: int, k_tgt: int, values: Sequence[int], V: int, variant: str = "symmetric") -> OperadMorphism:
    """``C_n(m)`` for a set map ``m``: free operads on ``k`` generators at ``s_n = (1..n; 0)``."""
    colours = tuple(str(j) for j in range(n + 1))
    s = Signature(tuple(str(j) for j in range(1, n + 1)), "0")
    A, ga = _free_on(colours, s, k_src, V, variant)
    B, gb = _free_on(colours, s, k_tgt, V, variant)
    fixed = {ga[f"x{j}"]: gb[f"x{values[j]}"] for j in range(k_src)}
    ident = {c: c for c in colours}
    for m in enumerate_morphisms(A, B, colour_map=ident, fixed=fixed):
        return m
    raise AssertionError("C_n(m) has no underlying morphism")


def generating_sets(V: int = 2, base: Optional[BaseModelData] = None, variant: str = "symmetric",
                    n_max: Optional[int] = None) -> Dict[str, List[Generator]]:
    """The members of the generating cofibrations and trivial cofibrations up to ``n_max``."""
    base = base or discrete_preset()
    n_max = V if n_max is None else n_max
    lo = 1 if variant == "reduced" else 0
    I, J = [], []
    for n in range(lo, n_max + 1):
        for m in base.I:
            I.append(Generator(f"C_{n}({m.source}->{m.target})", cell(n, m.source, m.target, m.values, V, variant)))
        for m in base.J:
            J.append(Generator(f"C_{n}({m.source}->{m.target})", cell(n, m.source, m.target, m.values, V, variant)))
    E = empty_operad(V, variant)
    one = initial_operad(("0",), V, variant)
    I.append(Generator("0->j(1)", OperadMorphism(E, one, {}, {})))
    if variant == "symmetric":
        src, tgt = builtin("one", max_valence=V), builtin("interval", max_valence=V)
    else:
        src, tgt = _as_variant(builtin("one", max_valence=V), variant), _as_variant(builtin("interval", max_valence=V), variant)
    J.append(Generator("j(i1)", OperadMorphism(src, tgt, {"0": "0"}, {o: "i00" for o in src.ops})))
    return {"I": I, "J": J}


def _as_variant(P: FinOperad, variant: str) -> FinOperad:
    sym = P.symmetry if variant != "nonsymmetric" else {}
    return FinOperad(P.colours, variant, P.max_valence, dict(P.ops), dict(P.compose), dict(sym), dict(P.units))


# amalgamation of intervals

def _relabel_colours(P: FinOperad, r: Dict[str, str]) -> FinOperad:
    comps = {}
    for o, s in P.ops.items():
        comps.setdefault(s.rename(r), []).append(o)

    def compose_fn(o, ps):
        return P.compose.get((o, tuple(ps)))

    def act_fn(o, sg):
        return P.act(o, sg)

    return materialize(tuple(sorted(r[c] for c in P.colours)), P.variant, P.max_valence, comps, compose_fn,
                       {r[c]: u for c, u in P.units.items()}, act_fn if P.symmetric else None)


def amalgamate(H: FinOperad, K: FinOperad, bound: int = 3) -> FinOperad:
    """``H * K``: glue ``K`` at its object 1 to ``H`` at its object 0 and keep the two outer objects."""
    for X in (H, K):
        if set(X.colours) != {"0", "1"}:
            raise ValueError("amalgamation takes categories on the objects 0, 1")
    Hc = restrict_valence(underlying_category(H), 1)
    Kc = restrict_valence(underlying_category(K), 1)
    # d_2 places K on {0, 1}, d_0 places H on {1, 2}
    Kd = _relabel_colours(Kc, {"0": "0", "1": "1"})
    Hd = _relabel_colours(Hc, {"0": "1", "1": "2"})
    pt = initial_operad(("1",), 1, Hc.variant)
    span = Span(pt, OperadMorphism(pt, Kd, {"1": "1"}, {"1_1": Kd.units["1"]}),
                OperadMorphism(pt, Hd, {"1": "1"}, {"1_1": Hd.units["1"]}))
    glued = pushout_operad(span, bound)
    if not glued.exact:
        from .errors import Unstabilized
        raise Unstabilized("amalgamation did not stabilize")
    Z = glued.operad
    cx, cy = glued.maps["x"].colour_map, glued.maps["y"].colour_map
    outer = full_suboperad(Z, [cx["0"], cy["2"]])
    return _relabel_colours(outer, {cx["0"]: "0", cy["2"]: "1"})


# two out of three

@dataclass
class TwoOfThree:
    f: bool
    g: bool
    gf: bool
    violations: List[str]

    @property
    def holds(self) -> bool:
        return not self.violations


def two_out_of_three(f: OperadMorphism, g: OperadMorphism, base: Optional[BaseModelData] = None) -> TwoOfThree:
    if f.target is not g.source and (f.target.colours != g.source.colours or f.target.ops != g.source.ops):
        raise NotComposable("target of f is not the source of g")
    gf = compose_morphisms(g, f)
    a = classify(f, base).weak_equivalence
    b = classify(g, base).weak_equivalence
    c = classify(gf, base).weak_equivalence
    bad = []
    if a and b and not c:
        bad.append("f, g weak but gf not")
    if a and c and not b:
        bad.append("f, gf weak but g not")
    if b and c and not a:
        bad.append("g, gf weak but f not")
    return TwoOfThree(a, b, c, bad)


# transport along equivalences

@dataclass
class ZigzagVerdict:
    source: Signature
    target: Signature
    bijection: Dict[str, str]

    @property
    def equal(self) -> bool:
        return len(set(self.bijection.values())) == len(self.bijection)


def zigzag_component_check(P: FinOperad, pairs: Sequence[Tuple[str, str]], root: Tuple[str, str]) -> ZigzagVerdict:
    """Transport ``P(c_1..c_n; c)`` to ``P(d_1..d_n; d)`` by composing with isomorphisms."""
    wit = []
    for c, d in list(pairs) + [root]:
        if c == d:
            wit.append((P.units[c], P.units[c]))
            continue
        w = iso_witness(P, c, d)
        if w is None:
            raise NotEquivalent(f"{c} and {d} are not equivalent")
        wit.append(w)
    *ins, out = wit
    S = Signature(tuple(c for c, _ in pairs), root[0])
    T = Signature(tuple(d for _, d in pairs), root[1])
    fwd = {}
    for x in P.component(S):
        y = P.comp(x, tuple(v for _, v in ins)) if ins else x
        fwd[x] = P.comp(out[0], (y,))
    back = {}
    for y in P.component(T):
        x = P.comp(y, tuple(u for u, _ in ins)) if ins else y
        back[y] = P.comp(out[1], (x,))
    if set(fwd.values()) != set(P.component(T)) or any(back[fwd[x]] != x for x in fwd):
        raise AssertionError("transport is not a bijection")
    return ZigzagVerdict(S, T, fwd)


# Dwyer-Kan comparison

def _iso_classes(C: FinOperad) -> Dict[str, str]:
    """Isomorphism classes of objects of a category, found from its composition table."""
    uf = UnionFind()
    for c in C.colours:
        uf.add(c)
    unary = {o: s for o, s in C.ops.items() if s.valence == 1}
    for u, su in unary.items():
        a, b = su.inputs[0], su.output
        for v, sv in unary.items():
            if sv.inputs[0] == b and sv.output == a and \
                    C.compose.get((v, (u,))) == C.units[a] and C.compose.get((u, (v,))) == C.units[b]:
                uf.union(a, b)
    return {c: uf.find(c) for c in C.colours}


def dwyer_kan_classify(f: OperadMorphism) -> bool:
    """Local bijections and an essentially surjective functor on homotopy categories."""
    P, Q = f.source, f.target
    for s in all_signatures(P.colours, _cap(f), P.variant == "reduced"):
        src = P.component(s)
        if len({f(x) for x in src}) != len(src) or len(src) != len(Q.component(f.on_sig(s))):
            return False
    # in Set the homotopy category of j^*Q is j^*Q itself
    cls = _iso_classes(underlying_category(Q))
    hit = {cls[f.colour_map[a]] for a in P.colours}
    return all(cls[b] in hit for b in Q.colours)


# small operads used by the tests and the CLI

def disjoint_union(P: FinOperad, Q: FinOperad, tags: Tuple[str, str] = ("l", "r")) -> FinOperad:
    """The coproduct of operads on disjoint colour sets (colours and operations tagged)."""
    parts = []
    for tag, X in zip(tags, (P, Q)):
        r = {c: f"{tag}{c}" for c in X.colours}
        parts.append((tag, X, r))
    ops, compose, symmetry, units = {}, {}, {}, {}
    for tag, X, r in parts:
        n = lambda o, tag=tag: f"{tag}:{o}"
        for o, s in X.ops.items():
            ops[n(o)] = s.rename(r)
        for (o, ps), x in X.compose.items():
            compose[(n(o), tuple(n(p) for p in ps))] = n(x)
        for (o, sg), x in X.symmetry.items():
            symmetry[(n(o), sg)] = n(x)
        for c, u in X.units.items():
            units[r[c]] = n(u)
    cols = tuple(sorted(c for _, X, r in parts for c in r.values()))
    return FinOperad(cols, P.variant, min(P.max_valence, Q.max_valence), ops, compose, symmetry, units)


def inclusion_into_interval(V: int = 2) -> OperadMorphism:
    """``j_!(1) -> j_!(I)`` at the object 0."""
    src, tgt = builtin("one", max_valence=V), builtin("interval", max_valence=V)
    return OperadMorphism(src, tgt, {"0": "0"}, {"u0": "i00"})


def collapse_interval(V: int = 2) -> OperadMorphism:
    """``j_!(I) -> j_!(1)``."""
    src, tgt = builtin("interval", max_valence=V), builtin("one", max_valence=V)
    return OperadMorphism(src, tgt, {"0": "0", "1": "0"}, {o: "u0" for o in src.ops})
