"""Seeded generators of small operads, multigraphs, morphisms and trees."""

from __future__ import annotations

import itertools
import random
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from .core import (
    FinOperad,
    MultiGraph,
    OperadMorphism,
    Signature,
    all_signatures,
    builtin,
    direct_image_injective,
    enumerate_morphisms,
    full_suboperad,
    initial_operad,
    inverse_image,
    monoid_operad,
    rename_ops,
)
from .errors import GenerationExhausted, SearchBudgetExceeded

Z2 = (("0", "1"), {(a, b): str((int(a) + int(b)) % 2) for a in "01" for b in "01"}, "0")
# the two-element monoid {1, z} with z absorbing
ABS = (("1", "z"), {("1", "1"): "1", ("1", "z"): "z", ("z", "1"): "z", ("z", "z"): "z"}, "1")


@lru_cache(maxsize=None)
def catalog(V: int = 2, variant: str = "symmetric") -> Tuple[Tuple[str, FinOperad], ...]:
    """Named small operads of the given variant, truncated at valence ``V``."""
    out: List[Tuple[str, FinOperad]] = []
    if variant == "symmetric":
        out += [
            ("one", builtin("one", max_valence=V)),
            ("interval", builtin("interval", max_valence=V)),
            ("com", builtin("com", max_valence=V)),
            ("com2", builtin("com", colours=("a", "b"), max_valence=V)),
            ("as_sigma", builtin("as_sigma", max_valence=V)),
            ("z2", monoid_operad(*Z2, V)),
            ("abs", monoid_operad(*ABS, V)),
            ("init2", initial_operad(("a", "b"), max_valence=V)),
        ]
        com2 = builtin("com", colours=("a", "b"), max_valence=V)
        out.append(("com_a", direct_image_injective({"a": "a"}, full_suboperad(com2, ["a"]), ["a", "b"])))
        out.append(("z2_pair", inverse_image({"a": "c", "b": "c"}, monoid_operad(*Z2, V))))
    elif variant == "nonsymmetric":
        out += [
            ("as", builtin("as", max_valence=V)),
            ("com_ns", builtin("com", max_valence=V, variant="nonsymmetric")),
            ("abs_ns", monoid_operad(*ABS, V, commutative=False)),
        ]
    else:
        out += [
            ("com_red", builtin("com", max_valence=V, variant="reduced")),
            ("com2_red", builtin("com", colours=("a", "b"), max_valence=V, variant="reduced")),
            ("z2_red", _reduced(monoid_operad(*Z2, V, nullary=False))),
        ]
    return tuple(out)


def _reduced(P: FinOperad) -> FinOperad:
    return FinOperad(P.colours, "reduced", P.max_valence, dict(P.ops), dict(P.compose), dict(P.symmetry),
                     dict(P.units))


def random_operad(rng: random.Random, V: int = 2, variant: str = "symmetric",
                  max_colours: int = 2) -> FinOperad:
    """A catalog operad, possibly pulled back along a random colour map."""
    name, P = rng.choice([x for x in catalog(V, variant) if len(x[1].colours) <= max_colours])
    if rng.random() < 0.3 and P.colours:
        k = rng.randint(1, max_colours)
        cols = [f"k{i}" for i in range(k)]
        f = {c: rng.choice(P.colours) for c in cols}
        P = inverse_image(f, P)
    return P


def random_multigraph(rng: random.Random, colours: Sequence[str], max_generators: int = 2,
                      V: int = 2, variant: str = "symmetric", allow_nullary: bool = True,
                      min_generators: int = 0) -> MultiGraph:
    sigs = [s for s in all_signatures(colours, V, variant == "reduced" or not allow_nullary)]
    k = rng.randint(min_generators, max_generators)
    comps: Dict[Signature, List[str]] = {}
    for i in range(k):
        s = rng.choice(sigs)
        comps.setdefault(s, []).append(f"g{i}")
    return MultiGraph(tuple(colours), {s: tuple(xs) for s, xs in comps.items()}, variant)


def random_morphism(rng: random.Random, P: FinOperad, Q: FinOperad, cap: int = 64,
                    budget: int = 200_000, colour_filter=None) -> Optional[OperadMorphism]:
    """A uniformly chosen morphism among the first ``cap`` found, or ``None``."""
    found = []
    try:
        for phi in enumerate_morphisms(P, Q, budget=budget, colour_filter=colour_filter):
            found.append(phi)
            if len(found) >= cap:
                break
    except SearchBudgetExceeded:
        pass
    return rng.choice(found) if found else None


def morphisms_capped(P: FinOperad, Q: FinOperad, cap: int = 64, budget: int = 200_000,
                     colour_filter=None) -> List[OperadMorphism]:
    out = []
    try:
        for phi in enumerate_morphisms(P, Q, budget=budget, colour_filter=colour_filter):
            out.append(phi)
            if len(out) >= cap:
                break
    except SearchBudgetExceeded:
        pass
    return out


def hom_instances(seed: int, n: int, V: int = 2) -> List[Tuple[MultiGraph, FinOperad]]:
    """``n`` seeded pairs ``(K, P)`` small enough for exhaustive morphism counting."""
    rng = random.Random(seed)
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 50 * n:
            raise GenerationExhausted(f"only {len(out)} of {n} instances")
        variant = rng.choice(["symmetric", "symmetric", "nonsymmetric", "reduced"])
        P = random_operad(rng, V, variant)
        k = rng.randint(1, 2)
        K = random_multigraph(rng, [f"x{i}" for i in range(k)], 3, V, variant, min_generators=1)
        # mostly keep instances with at least one morphism
        if rng.random() < 0.8 and not _has_graph_map(K, P):
            continue
        out.append((K, P))
    return out


def _has_graph_map(K: MultiGraph, P: FinOperad) -> bool:
    for f in colour_maps(K.colours, P.colours):
        if all(P.component(s.rename(f)) for _, s in K.generators()):
            return True
    return False


def with_fresh_names(P: FinOperad, prefix: str) -> FinOperad:
    return rename_ops(P, prefix)


def colour_maps(src: Sequence[str], dst: Sequence[str]):
    for images in itertools.product(sorted(dst), repeat=len(src)):
        yield dict(zip(sorted(src), images))


def filtration_instances(seed: int, n: int):
    """Seeded free-map push-out data ``(X, K0, K1, alpha, S, n_max)``."""
    rng = random.Random(seed)
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 50 * n:
            raise GenerationExhausted(f"only {len(out)} of {n} instances")
        variant = rng.choice(["symmetric", "symmetric", "nonsymmetric", "reduced"])
        n_max = rng.randint(1, 2)
        s_val = rng.randint(1 if variant == "reduced" else 0, 3 - n_max)
        V = s_val + n_max
        name, X = rng.choice([x for x in catalog(V, variant) if x[0] not in ("as_sigma", "z2_pair")])
        if not X.colours:
            continue
        sigs = [s for s in all_signatures(X.colours, min(2, V), variant == "reduced")]
        S = rng.choice([s for s in all_signatures(X.colours, V, variant == "reduced") if s.valence == s_val])
        old = {}
        alpha = {}
        if rng.random() < 0.5:
            s = rng.choice(sigs)
            if X.component(s):
                old[s] = ("a0",)
                alpha["a0"] = rng.choice(sorted(X.component(s)))
        new = dict(old)
        for i in range(rng.randint(1, 2)):
            s = rng.choice(sigs)
            new[s] = new.get(s, ()) + (f"g{i}",)
        K0 = MultiGraph(X.colours, old, variant)
        K1 = MultiGraph(X.colours, new, variant)
        out.append((X, K0, K1, alpha, S, n_max))
    return out


def _identity_colours(c: Dict[str, str]) -> bool:
    return all(a == b for a, b in c.items())


def span_candidates(seed: int, V: int = 2, variants: Sequence[str] = ("symmetric", "nonsymmetric", "reduced")):
    """Seeded one-fiber spans ``(A, f, g)`` over catalog operads; an endless iterator."""
    rng = random.Random(seed)
    pools = {v: [P for name, P in catalog(V, v) if name != "z2_pair"] for v in variants}
    while True:
        variant = rng.choice(list(variants))
        X = rng.choice(pools[variant])
        same = [P for P in pools[variant] if P.colours == X.colours]
        Y = rng.choice(same)
        apexes = same + [initial_operad(X.colours, V, variant)]
        A = rng.choice(apexes)
        f = random_morphism(rng, A, X, colour_filter=_identity_colours)
        g = random_morphism(rng, A, Y, colour_filter=_identity_colours)
        if f is None or g is None:
            continue
        yield A, f, g


def cocone_candidates(rng: random.Random, f: OperadMorphism, g: OperadMorphism, targets: Sequence[FinOperad],
                      n: int, cap: int = 64) -> List[Tuple[OperadMorphism, OperadMorphism]]:
    """Up to ``n`` pairs ``(h, k)`` with ``h f = k g``, drawn from morphisms into ``targets``."""
    out = []
    for L in targets:
        hs = morphisms_capped(f.target, L, cap)
        ks = morphisms_capped(g.target, L, cap)
        for h in hs:
            for k in ks:
                if all(h.colour_map[f.colour_map[c]] == k.colour_map[g.colour_map[c]] for c in f.source.colours) and \
                        all(h(f(o)) == k(g(o)) for o in f.source.ops):
                    out.append((h, k))
    rng.shuffle(out)
    return out[:n]


def cocone_targets(V: int, variant: str, colours: Sequence[str]) -> List[FinOperad]:
    """Catalog operads of ``variant`` plus pull-backs of one-colour entries onto ``colours``."""
    out = []
    for name, P in catalog(V, variant):
        if name == "z2_pair":
            continue
        out.append(P)
        if len(P.colours) == 1 and len(colours) > 1:
            out.append(inverse_image({c: P.colours[0] for c in colours}, P))
    return out


def _injective(c: Dict[str, str]) -> bool:
    return len(set(c.values())) == len(c)


def fully_faithful_candidates(seed: int, V: int = 2, variants: Sequence[str] = ("symmetric", "nonsymmetric", "reduced")):
    """Seeded spans ``(A, i, f)`` with ``i`` a full-suboperad inclusion and ``f`` injective on colours."""
    rng = random.Random(seed)
    pools = {v: [P for name, P in catalog(V, v) if name != "z2_pair" and P.colours] for v in variants}
    while True:
        variant = rng.choice(list(variants))
        B = rng.choice(pools[variant])
        k = rng.randint(1, len(B.colours))
        A = full_suboperad(B, sorted(rng.sample(list(B.colours), k)))
        i = OperadMorphism(A, B, {c: c for c in A.colours}, {o: o for o in A.ops})
        X = rng.choice(pools[variant])
        f = random_morphism(rng, A, X, colour_filter=_injective)
        if f is None:
            continue
        yield A, i, f


def small_operads(V: int = 2, variant: str = "symmetric") -> List[Tuple[str, FinOperad]]:
    """Catalog operads with at most two colours and components of size at most two, plus
    pull-backs of the one-colour entries along ``{a, b} -> {c}``."""
    out = []
    for name, P in catalog(V, variant):
        if len(P.colours) > 2 or any(len(v) > 2 for v in P.components.values()):
            continue
        out.append((name, P))
        if len(P.colours) == 1 and name != "one" and name + "_pair" not in dict(catalog(V, variant)):
            Q = inverse_image({"a": P.colours[0], "b": P.colours[0]}, P)
            if all(len(v) <= 2 for v in Q.components.values()):
                out.append((name + "_pair", Q))
    return out


def _collapse(Y: FinOperad, rng: random.Random) -> Optional[OperadMorphism]:
    """A pull-back of ``Y`` along a surjective colour map, with its canonical map to ``Y``."""
    if not Y.colours:
        return None
    extra = [f"w{i}" for i in range(rng.randint(1, 2))]
    f = {c: c for c in Y.colours}
    for e in extra:
        f[e] = rng.choice(Y.colours)
    if len(f) > 3:
        return None
    W = inverse_image(f, Y)
    return OperadMorphism(W, Y, dict(f), {o: o for o in W.ops}) if _is_canonical(W, Y) else None


def _is_canonical(W: FinOperad, Y: FinOperad) -> bool:
    return all(o in Y.ops for o in W.ops)


def proper_instances(seed: int, n: int, V: int = 2):
    """Seeded cospans ``(p, w)`` with ``p`` a fibration and ``w`` a weak equivalence into one target."""
    from .model import classify
    rng = random.Random(seed)
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 200 * n:
            raise GenerationExhausted(f"only {len(out)} of {n} instances")
        variant = rng.choice(["symmetric", "symmetric", "nonsymmetric", "reduced"])
        pool = [P for _, P in small_operads(V, variant)]
        Y = rng.choice(pool)
        X = rng.choice(pool)
        p = random_morphism(rng, X, Y)
        if p is None or not classify(p).fibration:
            continue
        if rng.random() < 0.5:
            w = _collapse(Y, rng)
        else:
            w = random_morphism(rng, rng.choice(pool), Y)
        if w is None or not classify(w).weak_equivalence:
            continue
        out.append((p, w))
    return out


def filtered_indices():
    """A fixed catalog of finite filtered index categories with at most four objects."""
    from .colimits import IndexCategory, chain_category
    return [
        ("point", IndexCategory(("x",), {})),
        ("chain2", chain_category(2)),
        ("chain3", chain_category(3)),
        ("chain4", chain_category(4)),
        ("idempotent", IndexCategory(("x",), {"e": ("x", "x")}, {("e", "e"): "e"})),
        ("cospan", IndexCategory(("a", "b", "c"), {"f": ("a", "c"), "g": ("b", "c")})),
        ("coequalized", IndexCategory(("a", "b", "c"), {"f": ("a", "b"), "g": ("a", "b"), "h": ("b", "c"),
                                                        "k": ("a", "c")}, {("h", "f"): "k", ("h", "g"): "k"})),
        ("diamond", IndexCategory(("a", "b", "c", "d"),
                                  {"f": ("a", "b"), "g": ("a", "c"), "h": ("b", "d"), "k": ("c", "d"), "m": ("a", "d")},
                                  {("h", "f"): "m", ("k", "g"): "m"})),
        ("idempotent_after", IndexCategory(("x", "y"), {"f": ("x", "y"), "e": ("y", "y")},
                                           {("e", "e"): "e", ("e", "f"): "f"})),
    ]


def random_functor(rng: random.Random, I, pool: Sequence[FinOperad], cap: int = 32, tries: int = 40):
    """A functor ``I -> Oper`` with values in ``pool``, or ``None``."""
    from .colimits import Diagram
    from .core import compose_morphisms
    arrows = sorted(I.arrows)
    for _ in range(tries):
        ops = {o: rng.choice(pool) for o in I.objects}
        cands = {a: morphisms_capped(ops[s], ops[t], cap) for a, (s, t) in I.arrows.items()}
        if any(not v for v in cands.values()):
            continue
        for a in arrows:
            rng.shuffle(cands[a])
        chosen: Dict = {}

        def ok():
            for (g, f), h in I.compose.items():
                if g in chosen and f in chosen and h in chosen:
                    if compose_morphisms(chosen[g], chosen[f]) != chosen[h]:
                        return False
            return True

        def rec(i):
            if i == len(arrows):
                return True
            for m in cands[arrows[i]]:
                chosen[arrows[i]] = m
                if ok() and rec(i + 1):
                    return True
                del chosen[arrows[i]]
            return False

        if rec(0):
            return Diagram(I, ops, dict(chosen))
    return None


def composable_pairs(seed: int, n: int, V: int = 2):
    """Seeded composable pairs ``(f, g)`` among small operads, with interval maps mixed in."""
    from .model import collapse_interval, inclusion_into_interval
    rng = random.Random(seed)
    out = []
    tries = 0
    extra = {"one": inclusion_into_interval(V), "interval": collapse_interval(V)}
    while len(out) < n:
        tries += 1
        if tries > 100 * n:
            raise GenerationExhausted(f"only {len(out)} of {n} pairs")
        variant = rng.choice(["symmetric", "symmetric", "nonsymmetric", "reduced"])
        pool = [P for _, P in small_operads(V, variant)]
        if variant == "symmetric" and rng.random() < 0.2:
            f = rng.choice(list(extra.values()))
        else:
            f = random_morphism(rng, rng.choice(pool), rng.choice(pool))
        if f is None:
            continue
        g = random_morphism(rng, f.target, rng.choice(pool))
        if g is None:
            continue
        out.append((f, g))
    return out


def zigzag_instances(seed: int, n: int, V: int = 2):
    """Seeded ``(P, pairs, root)`` where ``P`` is pulled back along a colour surjection, so paired
    colours are isomorphic."""
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        variant = rng.choice(["symmetric", "symmetric", "nonsymmetric", "reduced"])
        _, P0 = rng.choice([x for x in catalog(V, variant) if len(x[1].colours) <= 2])
        if not P0.colours:
            continue
        cols = [f"k{i}" for i in range(rng.randint(len(P0.colours), 3))]
        f = dict(zip(cols, P0.colours))
        for c in cols[len(P0.colours):]:
            f[c] = rng.choice(P0.colours)
        P = inverse_image(f, P0)
        lo = 1 if variant == "reduced" else 0
        sigs = [s for s in all_signatures(P.colours, V, variant == "reduced") if s.valence >= lo]
        s = rng.choice(sigs)

        def twin(c):
            others = [d for d in cols if f[d] == f[c] and d != c]
            return rng.choice(others) if others and rng.random() < 0.8 else c

        out.append((P, [(c, twin(c)) for c in s.inputs], (s.output, twin(s.output))))
    return out


def two_object_categories(V: int = 1):
    """Two-object categories on ``{0, 1}`` taken from the symmetric pool, in both orientations."""
    from .core import restrict_valence, underlying_category
    out = []
    for name, P in small_operads(2, "symmetric"):
        if len(P.colours) != 2:
            continue
        C = restrict_valence(underlying_category(P), V)
        a, b = C.colours
        for tag, r in ((name, {a: "0", b: "1"}), (name + "_op", {a: "1", b: "0"})):
            Q = inverse_image({"0": [k for k, v in r.items() if v == "0"][0],
                               "1": [k for k, v in r.items() if v == "1"][0]}, C)
            out.append((tag, Q))
    return out
