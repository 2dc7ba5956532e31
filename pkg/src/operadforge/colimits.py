"""Push-outs, filtered colimits, coequalizers, pullbacks and the free-map filtration."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .core import (
    FinOperad,
    MultiGraph,
    OperadMorphism,
    Signature,
    all_perms,
    all_signatures,
    compose_morphisms,
    materialize,
    perm_id,
    perm_inv,
)
from .errors import (
    BoundExceeded,
    HypothesisViolated,
    NotCommuting,
    NotFiltered,
    Unstabilized,
    UnsupportedShape,
)

# A term is either a leaf (an int, the input position it stands for) or a
# vertex ``(piece, op, children)``.  Terms are kept in normal form: children of
# vertices decorated by a symmetric operad are sorted by smallest leaf, the
# decoration absorbing the permutation through the symmetric action.


class UnionFind:
    def __init__(self):
        self.parent: Dict = {}

    def add(self, x) -> None:
        self.parent.setdefault(x, x)

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True

    def groups(self) -> Dict:
        out: Dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return out


@dataclass(frozen=True, eq=False)
class Piece:
    """A vertex marking: an operad (or a bare multigraph) with a colour map into the glued colours."""

    name: str
    colour_map: Dict[str, str]
    operad: Optional[FinOperad] = None
    graph: Optional[MultiGraph] = None

    @property
    def free(self) -> bool:
        return self.operad is None

    def ops(self) -> Dict[str, Signature]:
        if self.operad is not None:
            return self.operad.ops
        return {x: s for x, s in self.graph.generators()}


def term_size(t) -> int:
    if isinstance(t, int):
        return 0
    return 1 + sum(term_size(c) for c in t[2])


def term_leaves(t) -> Tuple[int, ...]:
    if isinstance(t, int):
        return (t,)
    return tuple(x for c in t[2] for x in term_leaves(c))


def n_marked(t, pieces) -> int:
    if isinstance(t, int):
        return 0
    return (t[0] in pieces) + sum(n_marked(c, pieces) for c in t[2])


class Engine:
    """Decorated marked trees over one colour set with the local identification moves."""

    def __init__(self, pieces: Sequence[Piece], glue: Sequence[Tuple[Tuple[int, str], Tuple[int, str]]],
                 colours: Sequence[str], variant: str, max_valence: int):
        self.pieces = list(pieces)
        self.colours = tuple(sorted(colours))
        self.variant = variant
        self.max_valence = max_valence
        self.sigs: Dict[Tuple[int, str], Signature] = {}
        self.by_output: Dict[str, List[Tuple[int, str, Signature]]] = {}
        self.unit_ops = set()
        for k, pc in enumerate(self.pieces):
            for x, s in sorted(pc.ops().items()):
                t = s.rename(pc.colour_map)
                self.sigs[(k, x)] = t
                self.by_output.setdefault(t.output, []).append((k, x, t))
            if pc.operad is not None:
                for u in pc.operad.units.values():
                    self.unit_ops.add((k, u))
        self.glue: Dict[Tuple[int, str], List[Tuple[int, str]]] = {}
        for a, b in glue:
            if self.sigs[a] != self.sigs[b]:
                raise ValueError(f"glued operations {a} and {b} have different signatures")
            if a != b:
                self.glue.setdefault(a, []).append(b)
                self.glue.setdefault(b, []).append(a)
        for v in self.glue.values():
            v.sort()
        self._key_cache: Dict = {}
        self._str_cache: Dict = {}

    # normal form

    def sortable(self, k: int) -> bool:
        return self.variant != "nonsymmetric" and not self.pieces[k].free

    def key(self, t):
        hit = self._key_cache.get(t)
        if hit is None:
            ls = term_leaves(t)
            hit = (min(ls) if ls else -1, self.show(t))
            self._key_cache[t] = hit
        return hit

    def mk(self, k: int, op: str, kids: Tuple) -> Tuple:
        if not self.sortable(k) or len(kids) < 2:
            return (k, op, tuple(kids))
        P = self.pieces[k].operad
        keys = [self.key(c) for c in kids]
        order = tuple(sorted(range(len(kids)), key=keys.__getitem__))
        if order != perm_id(len(kids)):
            op = P.act(op, order)
            kids = tuple(kids[i] for i in order)
        # identical (nullary) siblings: take the least decoration over their swaps
        groups, i = [], 0
        while i < len(kids):
            j = i
            while j + 1 < len(kids) and kids[j + 1] == kids[i]:
                j += 1
            if j > i:
                groups.append(list(range(i, j + 1)))
            i = j + 1
        if groups:
            n = len(kids)
            best = op
            for choice in itertools.product(*(itertools.permutations(g) for g in groups)):
                tau = list(range(n))
                for g, c in zip(groups, choice):
                    for a, b in zip(g, c):
                        tau[a] = b
                best = min(best, P.act(op, tuple(tau)))
            op = best
        return (k, op, tuple(kids))

    def renorm(self, t):
        if isinstance(t, int):
            return t
        return self.mk(t[0], t[1], tuple(self.renorm(c) for c in t[2]))

    def subst(self, t, f):
        """Replace every leaf ``i`` by the term ``f(i)`` and renormalize."""
        if isinstance(t, int):
            return f(t)
        return self.mk(t[0], t[1], tuple(self.subst(c, f) for c in t[2]))

    def strip(self, t):
        """Delete identity vertices; every term is equivalent to its stripped form."""
        if isinstance(t, int):
            return t
        if (t[0], t[1]) in self.unit_ops:
            return self.strip(t[2][0])
        return self.mk(t[0], t[1], tuple(self.strip(c) for c in t[2]))

    def show(self, t) -> str:
        if isinstance(t, int):
            return str(t + 1)
        hit = self._str_cache.get(t)
        if hit is None:
            hit = f"{self.pieces[t[0]].name}.{t[1]}({','.join(self.show(c) for c in t[2])})"
            self._str_cache[t] = hit
        return hit

    def output(self, t, leaf_colours: Sequence[str]) -> str:
        if isinstance(t, int):
            return leaf_colours[t]
        return self.sigs[(t[0], t[1])].output

    # enumeration

    def universe(self, S: Signature, bound: int) -> Dict:
        """Every identity-free normal-form term of arity ``S`` with at most ``bound`` vertices, with its size."""
        memo: Dict = {}
        cols = S.inputs
        ns = self.variant == "nonsymmetric"

        def gen(c: str, leaves: Tuple[int, ...], b: int) -> Dict:
            key = (c, leaves, b)
            if key in memo:
                return memo[key]
            out: Dict = {}
            if len(leaves) == 1 and cols[leaves[0]] == c:
                out[leaves[0]] = 0
            if b >= 1:
                for k, x, s in self.by_output.get(c, ()):
                    n = s.valence
                    if (n == 0 and leaves) or (k, x) in self.unit_ops:
                        continue
                    for blocks in splits(leaves, n):
                        for kids, size in forest(s.inputs, blocks, 0, b - 1):
                            t = self.mk(k, x, kids)
                            if size + 1 < out.get(t, bound + 1):
                                out[t] = size + 1
            memo[key] = out
            return out

        def splits(leaves, n):
            if n == 0:
                yield ()
                return
            if ns:
                for cuts in itertools.combinations_with_replacement(range(len(leaves) + 1), n - 1):
                    pts = (0,) + cuts + (len(leaves),)
                    yield tuple(leaves[pts[i]:pts[i + 1]] for i in range(n))
            else:
                for assign in itertools.product(range(n), repeat=len(leaves)):
                    yield tuple(tuple(l for l, a in zip(leaves, assign) if a == i) for i in range(n))

        def forest(ins, blocks, i, b):
            if i == len(ins):
                yield (), 0
                return
            for t, size in gen(ins[i], blocks[i], b).items():
                for rest, rsize in forest(ins, blocks, i + 1, b - size):
                    yield (t,) + rest, size + rsize

        return gen(S.output, tuple(range(S.valence)), bound)

    # moves

    def rewrites(self, t) -> Iterator[Tuple[str, str, object]]:
        """Single identification moves out of ``t``: units, same-marked inner faces, marking changes.

        Results are returned with identity vertices deleted.
        """
        for kind, detail, r in self._moves(t):
            yield kind, detail, self.strip(r)

    def _moves(self, t) -> Iterator[Tuple[str, str, object]]:
        if isinstance(t, int):
            return
        k, op, kids = t
        pc = self.pieces[k]
        if (k, op) in self.unit_ops:
            yield "unit", f"{pc.name}.{op}", kids[0]
        if not pc.free:
            P = pc.operad
            s = P.ops[op]
            for i, ch in enumerate(kids):
                if isinstance(ch, int) or ch[0] != k or P.ops[ch[1]].output != s.inputs[i]:
                    continue
                args = [P.units[c] for c in s.inputs]
                args[i] = ch[1]
                r = P.compose.get((op, tuple(args)))
                if r is None:
                    continue
                yield "inner", f"{pc.name}.{op}o{i + 1}{ch[1]}={r}", self.mk(k, r, kids[:i] + ch[2] + kids[i + 1:])
        for m, y in self.glue.get((k, op), ()):
            yield "mark", f"{pc.name}.{op}~{self.pieces[m].name}.{y}", self.mk(m, y, kids)
        for i, ch in enumerate(kids):
            for kind, d, ch2 in self._moves(ch):
                yield kind, d, self.mk(k, op, kids[:i] + (ch2,) + kids[i + 1:])

    # saturation

    def saturate(self, S: Signature, bound: int, scope=None) -> "SaturationState":
        """Classes of trees with at most ``bound`` vertices; ``scope`` restricts the exactness test
        to classes on which it holds (it must be constant on classes)."""
        if bound < 1:
            raise BoundExceeded("saturation bound must be at least 1")
        big = self.universe(S, bound + 1)
        uf_big, uf = UnionFind(), UnionFind()
        witnesses = []
        for t in big:
            uf_big.add(t)
            if big[t] <= bound:
                uf.add(t)
        for t in sorted(big, key=lambda x: (big[x], self.show(x))):
            for kind, detail, r in self.rewrites(t):
                if r not in big:
                    raise AssertionError(f"move left the enumerated universe: {self.show(r)}")
                uf_big.union(t, r)
                if big[t] <= bound and uf.union(t, r):
                    witnesses.append((kind, detail, t, r))
        groups = uf.groups()
        order = lambda x: (big[x], self.show(x))
        classes = sorted((sorted(g, key=order) for g in groups.values()), key=lambda g: order(g[0]))
        inside = (lambda x: True) if scope is None else scope
        kept = [g for g in classes if inside(g[0])]
        roots = {uf_big.find(g[0]) for g in kept}
        exact = len(roots) == len(kept) and all(uf_big.find(x) in roots for x in big if inside(x))
        index = {t: i for i, g in enumerate(classes) for t in g}
        return SaturationState(self, S, bound, classes, index, {t: big[t] for t in uf.parent}, witnesses, exact)

    def reduce(self, t, bound: int, index: Dict, limit: int = 4000):
        """A term equivalent to ``t`` inside ``index``, found by a size-first search over the moves."""
        t = self.strip(t)
        if t in index:
            return t
        seen = {t}
        heap = [(term_size(t), self.show(t), t)]
        while heap and len(seen) < limit:
            _, _, u = heapq.heappop(heap)
            for _, _, r in self.rewrites(u):
                if r in index:
                    return r
                if r not in seen:
                    seen.add(r)
                    heapq.heappush(heap, (term_size(r), self.show(r), r))
        raise Unstabilized(f"no representative of {self.show(t)} within {bound} vertices")

    def evaluate(self, t, leaf_colours: Sequence[str], L: FinOperad, colour_map: Dict[str, str],
                 op_maps: Sequence[Dict[str, str]]) -> str:
        """The operation of ``L`` obtained by composing ``t`` along the given maps."""
        op, leaves = self._eval(t, leaf_colours, L, colour_map, op_maps)
        if leaves == list(range(len(leaves))):
            return op
        return L.act(op, perm_inv(tuple(leaves)))

    def _eval(self, t, leaf_colours, L, colour_map, op_maps):
        if isinstance(t, int):
            return L.units[colour_map[leaf_colours[t]]], [t]
        res = [self._eval(c, leaf_colours, L, colour_map, op_maps) for c in t[2]]
        o = op_maps[t[0]][t[1]]
        return L.comp(o, [r[0] for r in res]), [x for r in res for x in r[1]]


@dataclass
class SaturationState:
    engine: Engine
    signature: Signature
    bound: int
    classes: List[List]
    index: Dict
    sizes: Dict
    witnesses: List[Tuple[str, str, object, object]]
    exact: bool

    def __len__(self) -> int:
        return len(self.classes)

    def reps(self) -> List[str]:
        return [self.engine.show(g[0]) for g in self.classes]

    def class_of(self, t) -> int:
        return self.index[self.engine.reduce(t, self.bound, self.index)]


def replay_witnesses(state: SaturationState) -> int:
    """Re-derive every recorded identification from its source term; returns how many were checked."""
    E = state.engine
    for kind, detail, a, b in state.witnesses:
        if not any(k == kind and d == detail and r == b for k, d, r in E.rewrites(a)):
            raise AssertionError(f"witness {kind} {detail} not replayable from {E.show(a)}")
    return len(state.witnesses)


# glued operads

@dataclass
class Glued:
    """The colimit operad together with the maps out of each piece."""

    operad: FinOperad
    maps: Dict[str, OperadMorphism]
    graph_maps: Dict[str, Dict[str, str]]
    states: Dict[Signature, SaturationState]
    names: Dict[Tuple[Signature, int], str]
    engine: Engine
    exact: bool

    def state(self, S: Signature) -> SaturationState:
        return self.states[S]

    def class_name(self, t, S: Signature) -> str:
        st = self.states[S]
        return self.names[(S, st.class_of(t))]


def _class_name(E: Engine, S: Signature, rep) -> str:
    if isinstance(rep, int):
        return f"|{S.output}"
    return E.show(rep)


def glue_operad(E: Engine, bound: int, max_valence: Optional[int] = None) -> Glued:
    """Materialize the colimit of the pieces up to ``max_valence``, saturating each component."""
    V = E.max_valence if max_valence is None else max_valence
    reduced = E.variant == "reduced"
    states = {S: E.saturate(S, bound) for S in all_signatures(E.colours, V, reduced)}
    names: Dict[Tuple[Signature, int], str] = {}
    back: Dict[str, Tuple[Signature, object]] = {}
    comps: Dict[Signature, List[str]] = {}
    for S, st in states.items():
        for i, g in enumerate(st.classes):
            nm = _class_name(E, S, g[0])
            names[(S, i)] = nm
            back[nm] = (S, g[0])
            comps.setdefault(S, []).append(nm)

    def lookup(S, t):
        st = states[S]
        return names[(S, st.index[E.reduce(t, bound, st.index)])]

    def compose_fn(o, ps):
        S, t = back[o]
        subs, off = [], 0
        for p in ps:
            Sp, tp = back[p]
            subs.append((tp, off))
            off += Sp.valence
        res = E.subst(t, lambda i: E.subst(subs[i][0], lambda j, d=subs[i][1]: j + d))
        R = Signature(tuple(c for p in ps for c in back[p][0].inputs), S.output)
        return lookup(R, res)

    def act_fn(o, sg):
        S, t = back[o]
        inv = perm_inv(sg)
        return lookup(S.act(sg), E.subst(t, lambda i: inv[i]))

    units = {c: f"|{c}" for c in E.colours}
    Z = materialize(E.colours, E.variant, V, comps, compose_fn, units,
                    act_fn if E.variant != "nonsymmetric" else None)
    maps: Dict[str, OperadMorphism] = {}
    graph_maps: Dict[str, Dict[str, str]] = {}
    for k, pc in enumerate(E.pieces):
        op_map = {}
        for x, s in pc.ops().items():
            if s.valence > V:
                continue
            S = s.rename(pc.colour_map)
            op_map[x] = lookup(S, E.mk(k, x, tuple(range(s.valence))))
        if pc.free:
            graph_maps[pc.name] = op_map
        else:
            maps[pc.name] = OperadMorphism(pc.operad, Z, dict(pc.colour_map), op_map)
    exact = all(st.exact for st in states.values())
    return Glued(Z, maps, graph_maps, states, names, E, exact)


def colour_colimit(colour_sets: Dict[str, Sequence[str]], arrows: Sequence[Tuple[str, str, Dict[str, str]]],
                   prefer: Sequence[str] = ()) -> Tuple[Tuple[str, ...], Dict[str, Dict[str, str]]]:
    """Colimit of finite sets: the quotient of the disjoint union by ``c ~ f(c)`` for each arrow."""
    uf = UnionFind()
    order = list(prefer) + [j for j in colour_sets if j not in prefer]
    rank = {j: i for i, j in enumerate(order)}
    for j in order:
        for c in colour_sets[j]:
            uf.add((rank[j], c))
    for src, tgt, f in arrows:
        for c in colour_sets[src]:
            uf.union((rank[src], c), (rank[tgt], f[c]))
    groups = sorted(uf.groups().values(), key=min)
    names, taken = {}, set()
    for g in groups:
        nm = min(g)[1]
        while nm in taken:
            nm += "'"
        taken.add(nm)
        for x in g:
            names[x] = nm
    maps = {j: {c: names[(rank[j], c)] for c in colour_sets[j]} for j in order}
    return tuple(sorted(taken)), maps


# push-outs

@dataclass(frozen=True, eq=False)
class Span:
    apex: FinOperad
    left: OperadMorphism
    right: OperadMorphism

    def __post_init__(self):
        if self.left.source is not self.apex or self.right.source is not self.apex:
            raise ValueError("legs must share the apex")

    @property
    def in_one_fiber(self) -> bool:
        same = set(self.left.target.colours) == set(self.right.target.colours) == set(self.apex.colours)
        return same and all(a == b for a, b in self.left.colour_map.items()) and \
            all(a == b for a, b in self.right.colour_map.items())


def span_engine(span: Span) -> Engine:
    X, Y = span.left.target, span.right.target
    cols, cmaps = colour_colimit(
        {"o": span.apex.colours, "x": X.colours, "y": Y.colours},
        [("o", "x", span.left.colour_map), ("o", "y", span.right.colour_map)], prefer=("x", "y", "o"))
    pieces = [Piece("x", cmaps["x"], X), Piece("y", cmaps["y"], Y)]
    glue = [((0, span.left(p)), (1, span.right(p))) for p in sorted(span.apex.ops)]
    return Engine(pieces, glue, cols, X.variant, min(X.max_valence, Y.max_valence))


@dataclass
class PushoutClasses:
    signature: Signature
    classes: List[List[str]]
    exact: bool
    p: Dict[str, int]
    q: Dict[str, int]
    state: SaturationState

    def __len__(self) -> int:
        return len(self.classes)


def pushout(span: Span, S: Signature, bound: int = 3) -> PushoutClasses:
    """Classes of ``Z(S)`` for the push-out of ``span``; ``exact`` reports stabilization."""
    E = span_engine(span)
    st = E.saturate(S, bound)
    maps = {}
    for k, leg in ((0, span.left.target), (1, span.right.target)):
        out = {}
        for x, s in leg.ops.items():
            if s.rename(E.pieces[k].colour_map) == S:
                out[x] = st.class_of(E.mk(k, x, tuple(range(s.valence))))
        maps[k] = out
    classes = [[E.show(t) for t in g] for g in st.classes]
    return PushoutClasses(S, classes, st.exact, maps[0], maps[1], st)


def pushout_operad(span: Span, bound: int = 3, max_valence: Optional[int] = None) -> Glued:
    """The push-out as a finite operad with its canonical maps ``p`` (piece x) and ``q`` (piece y)."""
    return glue_operad(span_engine(span), bound, max_valence)


@dataclass
class CoconeCheck:
    exists: bool
    unique: bool
    mediating: Optional[OperadMorphism]
    detail: str = ""


@dataclass
class UniversalReport:
    checks: List[CoconeCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.exists and c.unique for c in self.checks)


def _commutes(f: OperadMorphism, g: OperadMorphism) -> bool:
    return f.colour_map == g.colour_map and f.op_map == g.op_map


def mediating_morphism(result: Glued, cocone: Dict[str, OperadMorphism]) -> OperadMorphism:
    """The map out of a glued operad determined by one morphism per piece, composing along trees."""
    E = result.engine
    Z = result.operad
    first = next(iter(cocone.values()))
    L = first.target
    cmap = {}
    for k, pc in enumerate(E.pieces):
        for c, d in pc.colour_map.items():
            cmap[d] = cocone[pc.name].colour_map[c]
    op_maps = [cocone[pc.name].op_map for pc in E.pieces]
    op_map = {}
    for S, st in result.states.items():
        for i, g in enumerate(st.classes):
            vals = {E.evaluate(t, S.inputs, L, cmap, op_maps) for t in g}
            if len(vals) != 1:
                raise NotCommuting(f"class {result.names[(S, i)]} has images {sorted(vals)}")
            op_map[result.names[(S, i)]] = vals.pop()
    return OperadMorphism(Z, L, cmap, op_map)


def check_pushout_universal(result: Glued, span: Span, cocones: Sequence[Tuple[OperadMorphism, OperadMorphism]],
                            budget: Optional[int] = None) -> UniversalReport:
    """Existence and uniqueness of the mediating morphism for each cocone ``(h, k)``."""
    from .core import enumerate_morphisms, validate_morphism

    rep = UniversalReport()
    for h, k in cocones:
        if not _commutes(compose_morphisms(h, span.left), compose_morphisms(k, span.right)):
            raise NotCommuting("h . i1 differs from k . i2")
        try:
            l = mediating_morphism(result, {"x": h, "y": k})
        except NotCommuting as e:
            rep.checks.append(CoconeCheck(False, False, None, str(e)))
            continue
        ok = validate_morphism(l).passed and \
            _commutes(compose_morphisms(l, result.maps["x"]), h) and \
            _commutes(compose_morphisms(l, result.maps["y"]), k)
        fixed = {}
        for leg, m in (("x", h), ("y", k)):
            for a, z in result.maps[leg].op_map.items():
                fixed[z] = m(a)
        found = [m for m in enumerate_morphisms(result.operad, l.target, colour_map=l.colour_map,
                                                 fixed=fixed, budget=budget)
                 if _commutes(compose_morphisms(m, result.maps["x"]), h)
                 and _commutes(compose_morphisms(m, result.maps["y"]), k)]
        rep.checks.append(CoconeCheck(ok, found == [l], l, f"{len(found)} factorizations"))
    return rep


def _colour_injective(f: OperadMorphism) -> bool:
    return len(set(f.colour_map.values())) == len(f.colour_map)


def is_fully_faithful(f: OperadMorphism) -> bool:
    """``f`` induces a bijection ``P(s) -> Q(f s)`` on every component within the bound."""
    P, Q = f.source, f.target
    for s in all_signatures(P.colours, min(P.max_valence, Q.max_valence), P.variant == "reduced"):
        src = P.component(s)
        img = [f(x) for x in src]
        if len(set(img)) != len(src) or set(img) != set(Q.component(f.on_sig(s))):
            return False
    return True


@dataclass
class FullyFaithfulVerdict:
    colour_injective: bool
    fully_faithful: bool
    exact: bool
    failures: List[str]
    result: Glued

    @property
    def holds(self) -> bool:
        return self.colour_injective and self.fully_faithful


def pushout_fully_faithful(span: Span, bound: Optional[int] = None,
                           require_f_injective: bool = True) -> FullyFaithfulVerdict:
    """For ``i = span.left`` fully faithful, decide whether the opposite map ``h`` out of ``span.right.target`` is.

    The default bound is 3, or 4 when ``i`` adds colours (transport along a new colour conjugates).
    """
    i, f = span.left, span.right
    if bound is None:
        bound = 3 if set(i.colour_map.values()) == set(i.target.colours) else 4
    if not _colour_injective(i):
        raise HypothesisViolated("i is not injective on colours")
    if require_f_injective and not _colour_injective(f):
        raise HypothesisViolated("f is not injective on colours")
    if not is_fully_faithful(i):
        raise HypothesisViolated("i is not fully faithful")
    res = pushout_operad(span, bound)
    h = res.maps["y"]
    P = f.target
    col_inj = _colour_injective(h)
    failures = []
    # each P-corolla is its own normal form; h is fully faithful when these are
    # pairwise inequivalent and meet every class of the target component
    for s in all_signatures(P.colours, res.operad.max_valence, P.variant == "reduced"):
        src = P.component(s)
        img = [h(x) for x in src]
        tgt = res.operad.component(h.on_sig(s))
        if len(set(img)) != len(src) or set(img) != set(tgt):
            failures.append(f"{s}: {len(src)} -> {len(set(img))} of {len(tgt)}")
    return FullyFaithfulVerdict(col_inj, not failures, res.exact, failures, res)


# index categories and diagrams

@dataclass(frozen=True, eq=False)
class IndexCategory:
    """A finite category; identities are implicit and named ``id_<object>``."""

    objects: Tuple[str, ...]
    arrows: Dict[str, Tuple[str, str]]
    compose: Dict[Tuple[str, str], str] = field(default_factory=dict)

    def all_arrows(self) -> Dict[str, Tuple[str, str]]:
        out = {f"id_{o}": (o, o) for o in self.objects}
        out.update(self.arrows)
        return out

    def comp(self, g: str, f: str) -> str:
        """``g . f``."""
        if f.startswith("id_"):
            return g
        if g.startswith("id_"):
            return f
        return self.compose[(g, f)]

    def hom(self, a: str, b: str) -> List[str]:
        return sorted(n for n, (s, t) in self.all_arrows().items() if s == a and t == b)

    def check(self) -> None:
        arr = self.all_arrows()
        for g, (gs, gt) in arr.items():
            for f, (fs, ft) in arr.items():
                if ft != gs:
                    continue
                try:
                    h = self.comp(g, f)
                except KeyError:
                    raise ValueError(f"missing composite {g} . {f}") from None
                if arr[h] != (fs, gt):
                    raise ValueError(f"composite {g} . {f} has the wrong ends")


def chain_category(n: int) -> IndexCategory:
    objs = tuple(str(i) for i in range(n))
    arrows = {f"{i}{j}": (str(i), str(j)) for i in range(n) for j in range(i + 1, n)}
    comp = {(f"{j}{k}", f"{i}{j}"): f"{i}{k}" for i in range(n) for j in range(i + 1, n) for k in range(j + 1, n)}
    return IndexCategory(objs, arrows, comp)


def span_category() -> IndexCategory:
    return IndexCategory(("o", "x", "y"), {"i1": ("o", "x"), "i2": ("o", "y")})


def parallel_category() -> IndexCategory:
    return IndexCategory(("a", "b"), {"f": ("a", "b"), "g": ("a", "b")})


def is_filtered(I: IndexCategory) -> bool:
    if not I.objects:
        return False
    arr = I.all_arrows()
    for a in I.objects:
        for b in I.objects:
            if not any(I.hom(a, c) and I.hom(b, c) for c in I.objects):
                return False
    for f, (s, t) in arr.items():
        for g, (s2, t2) in arr.items():
            if (s, t) == (s2, t2) and f < g:
                if not any(I.comp(h, f) == I.comp(h, g) for h, (hs, _) in arr.items() if hs == t):
                    return False
    return True


@dataclass(frozen=True, eq=False)
class Diagram:
    index: IndexCategory
    operads: Dict[str, FinOperad]
    maps: Dict[str, OperadMorphism]
    shape: Optional[str] = None

    def map(self, a: str) -> OperadMorphism:
        if a.startswith("id_"):
            P = self.operads[a[3:]]
            return OperadMorphism(P, P, {c: c for c in P.colours}, {o: o for o in P.ops})
        return self.maps[a]


@dataclass
class FilteredColimit:
    operad: FinOperad
    cocone: Dict[str, OperadMorphism]
    structures: int


def _names_for(uf: UnionFind, label) -> Dict:
    groups = sorted(uf.groups().values(), key=min)
    names, taken = {}, set()
    for g in groups:
        rank, obj, x = min(g)
        nm = label(x)
        if nm in taken:
            nm = f"{nm}@{obj}"
        while nm in taken:
            nm += "'"
        taken.add(nm)
        for m in g:
            names[m] = nm
    return names


def filtered_colimit(D: Diagram) -> FilteredColimit:
    """Colimit over a finite filtered index, computed componentwise from representatives."""
    I = D.index
    if not is_filtered(I):
        raise NotFiltered("index category is not filtered")
    rank = {o: i for i, o in enumerate(I.objects)}
    ucol, uop = UnionFind(), UnionFind()
    for j in I.objects:
        for c in D.operads[j].colours:
            ucol.add((rank[j], j, c))
        for x in D.operads[j].ops:
            uop.add((rank[j], j, x))
    for a, (s, t) in I.arrows.items():
        f = D.maps[a]
        for c in D.operads[s].colours:
            ucol.union((rank[s], s, c), (rank[t], t, f.colour_map[c]))
        for x in D.operads[s].ops:
            uop.union((rank[s], s, x), (rank[t], t, f(x)))
    cname = _names_for(ucol, lambda c: c)
    oname = _names_for(uop, lambda x: x)
    colours = tuple(sorted(set(cname.values())))
    members: Dict[str, Dict[str, List[str]]] = {}
    sig_of: Dict[str, Signature] = {}
    for (r, j, x), nm in oname.items():
        members.setdefault(nm, {}).setdefault(j, []).append(x)
        s = D.operads[j].ops[x].rename({c: cname[(rank[j], j, c)] for c in D.operads[j].colours})
        if sig_of.setdefault(nm, s) != s:
            raise NotFiltered(f"operation class {nm} has inconsistent signatures")
    V = min(P.max_valence for P in D.operads.values())
    variant = next(iter(D.operads.values())).variant
    comps: Dict[Signature, List[str]] = {}
    for nm in sorted(sig_of):
        comps.setdefault(sig_of[nm], []).append(nm)
    structures = [1]

    def name_at(j, x):
        return oname[(rank[j], j, x)]

    def compose_fn(o, ps):
        vals = set()
        for j in I.objects:
            L = D.operads[j]
            xs = members[o].get(j, [])
            pss = [members[p].get(j, []) for p in ps]
            for x in xs:
                for ys in itertools.product(*pss):
                    r = L.compose.get((x, tuple(ys)))
                    if r is not None:
                        vals.add(name_at(j, r))
        if not vals:
            raise NotFiltered(f"no object where {o} composes with {ps}")
        if len(vals) > 1:
            structures[0] = 0
            raise NotFiltered(f"lifts of {o}{ps} disagree: {sorted(vals)}")
        return vals.pop()

    def act_fn(o, sg):
        vals = {name_at(j, D.operads[j].act(x, sg)) for j, xs in members[o].items() for x in xs}
        if len(vals) != 1:
            raise NotFiltered(f"action on {o} is not well defined")
        return vals.pop()

    units = {}
    for j in I.objects:
        for c, u in D.operads[j].units.items():
            units.setdefault(cname[(rank[j], j, c)], name_at(j, u))
    C = materialize(colours, variant, V, comps, compose_fn, units, act_fn if variant != "nonsymmetric" else None)
    cocone = {}
    for j in I.objects:
        L = D.operads[j]
        cocone[j] = OperadMorphism(L, C, {c: cname[(rank[j], j, c)] for c in L.colours},
                                   {x: name_at(j, x) for x in L.ops if L.ops[x].valence <= V})
    return FilteredColimit(C, cocone, count_structures(C, cocone))


def count_structures(C: FinOperad, cocone: Dict[str, OperadMorphism]) -> int:
    """Number of composition tables on the graph of ``C`` making every cocone map a morphism.

    Each table entry ranges over its target component, cut down by the
    constraints ``Gamma(eta x, eta ys) = eta Gamma(x, ys)``.
    """
    from .core import composable_tuples

    allowed: Dict = {}
    for eta in cocone.values():
        L = eta.source
        for (x, ys), r in L.compose.items():
            if x not in eta.op_map or r not in eta.op_map:
                continue
            key = (eta(x), tuple(eta(y) for y in ys))
            allowed.setdefault(key, set()).add(eta(r))
    total = 1
    for o in sorted(C.ops):
        for ps in composable_tuples(C, o):
            key = (o, ps)
            s = C.ops[o]
            target = Signature(tuple(c for p in ps for c in C.ops[p].inputs), s.output) if ps else s
            cands = set(C.component(target))
            if key in allowed:
                cands &= allowed[key]
            total *= len(cands)
    return total


def diagram_cocones(D: Diagram, L: FinOperad, budget: Optional[int] = None) -> Iterator[Dict[str, OperadMorphism]]:
    """Every cocone from ``D`` to ``L``, found object by object with the arrow constraints checked early."""
    from .core import enumerate_morphisms

    I = D.index
    objs = list(I.objects)
    homs = {j: list(enumerate_morphisms(D.operads[j], L, budget=budget)) for j in objs}

    def ok(chosen, j):
        for a, (s, t) in I.arrows.items():
            if s in chosen and t in chosen and (s == j or t == j):
                if compose_morphisms(chosen[t], D.maps[a]) != chosen[s]:
                    return False
        return True

    def rec(i, chosen):
        if i == len(objs):
            yield dict(chosen)
            return
        j = objs[i]
        for m in homs[j]:
            chosen[j] = m
            if ok(chosen, j):
                yield from rec(i + 1, chosen)
            del chosen[j]

    yield from rec(0, {})


@dataclass
class ColimitCheck:
    cocones: int
    failures: List[str]

    @property
    def passed(self) -> bool:
        return not self.failures


def check_colimit_universal(C: FinOperad, cocone: Dict[str, OperadMorphism], D: Diagram,
                            targets: Sequence[FinOperad], budget: Optional[int] = None) -> ColimitCheck:
    """Each cocone into each target factors through ``cocone`` in exactly one way."""
    from .core import enumerate_morphisms

    n, bad = 0, []
    for L in targets:
        for m in diagram_cocones(D, L, budget):
            n += 1
            found = [u for u in enumerate_morphisms(C, L, budget=budget)
                     if all(compose_morphisms(u, cocone[j]) == m[j] for j in D.index.objects)]
            if len(found) != 1:
                bad.append(f"{len(found)} factorizations into {L.colours}")
    return ColimitCheck(n, bad)


# the bifibration recipe

@dataclass
class BifibrationResult:
    colours: Tuple[str, ...]
    colour_maps: Dict[str, Dict[str, str]]
    glued: Glued
    cocone: Dict[str, OperadMorphism]

    @property
    def operad(self) -> FinOperad:
        return self.glued.operad

    @property
    def exact(self) -> bool:
        return self.glued.exact


SHAPES = ("pushout", "filtered", "coequalizer")


def bifibration_colimit(D: Diagram, shape: str, bound: int = 3, max_valence: Optional[int] = None) -> BifibrationResult:
    """Colour colimit first, then the colimit of the direct images in the fiber over it."""
    if shape not in SHAPES:
        raise UnsupportedShape(shape)
    I = D.index
    if shape == "filtered" and not is_filtered(I):
        raise NotFiltered("index category is not filtered")
    if shape == "pushout":
        srcs = {s for s, _ in I.arrows.values()}
        if len(I.objects) != 3 or len(I.arrows) != 2 or len(srcs) != 1:
            raise UnsupportedShape("a push-out needs a span of two arrows")
    if shape == "coequalizer":
        if len(I.objects) != 2 or len(I.arrows) != 2 or len(set(I.arrows.values())) != 1:
            raise UnsupportedShape("a coequalizer needs two parallel arrows")
    cols, cmaps = colour_colimit({j: D.operads[j].colours for j in I.objects},
                                 [(s, t, D.maps[a].colour_map) for a, (s, t) in I.arrows.items()])
    # objects with an outgoing arrow are glued onto its target and need no vertices of their own
    sources = {s for s, t in I.arrows.values() if s != t}
    kept = [j for j in I.objects if j not in sources]
    pos = {j: i for i, j in enumerate(kept)}
    pieces = [Piece(j, cmaps[j], D.operads[j]) for j in kept]
    glue = []
    for j in I.objects:
        outs = [a for a, (s, t) in I.arrows.items() if s == j]
        for x in sorted(D.operads[j].ops):
            imgs = []
            for a in sorted(outs):
                t = I.arrows[a][1]
                if t in pos:
                    imgs.append((pos[t], D.maps[a](x)))
                else:
                    # follow arrows until a kept object is reached
                    y, cur = D.maps[a](x), t
                    while cur not in pos:
                        b = sorted(n for n, (s2, _) in I.arrows.items() if s2 == cur)[0]
                        y, cur = D.maps[b](y), I.arrows[b][1]
                    imgs.append((pos[cur], y))
            if j in pos:
                imgs.append((pos[j], x))
            for a, b in zip(imgs, imgs[1:]):
                glue.append((a, b))
    variant = next(iter(D.operads.values())).variant
    V = min(P.max_valence for P in D.operads.values())
    E = Engine(pieces, glue, cols, variant, V)
    g = glue_operad(E, bound, max_valence)
    cocone = {}
    for j in I.objects:
        if j in pos:
            cocone[j] = g.maps[j]
        else:
            a = sorted(n for n, (s, _) in I.arrows.items() if s == j)[0]
            t = I.arrows[a][1]
            m = compose_morphisms(g.maps[t], D.maps[a]) if t in pos else None
            if m is None:
                cur, chain_ = t, D.maps[a]
                while cur not in pos:
                    b = sorted(n for n, (s2, _) in I.arrows.items() if s2 == cur)[0]
                    chain_ = compose_morphisms(D.maps[b], chain_)
                    cur = I.arrows[b][1]
                m = compose_morphisms(g.maps[cur], chain_)
            cocone[j] = m
    return BifibrationResult(cols, cmaps, g, cocone)


# coequalizers and pullbacks

def congruence_classes(Q: FinOperad, pairs: Sequence[Tuple[str, str]]) -> UnionFind:
    """The least operadic congruence on ``Q`` containing ``pairs``."""
    uf = UnionFind()
    for o in Q.ops:
        uf.add(o)
    for a, b in pairs:
        uf.union(a, b)
    changed = True
    while changed:
        changed = False
        seen: Dict = {}
        for (o, ps), r in Q.compose.items():
            key = (uf.find(o), tuple(uf.find(p) for p in ps))
            if key in seen:
                changed |= uf.union(seen[key], r)
            else:
                seen[key] = r
        seen = {}
        for (o, sg), r in Q.symmetry.items():
            key = (uf.find(o), sg)
            if key in seen:
                changed |= uf.union(seen[key], r)
            else:
                seen[key] = r
        for o in Q.ops:
            n = Q.ops[o].valence
            for sg in all_perms(n):
                if sg == perm_id(n) or (o, sg) not in Q.symmetry:
                    continue
                key = (uf.find(o), sg)
                if key in seen:
                    changed |= uf.union(seen[key], Q.symmetry[(o, sg)])
    return uf


@dataclass
class Quotient:
    operad: FinOperad
    map: OperadMorphism


def quotient_operad(Q: FinOperad, uf: UnionFind) -> Quotient:
    rep = {o: min(g) for g in uf.groups().values() for o in g}
    ops = {rep[o]: Q.ops[o] for o in Q.ops}
    for o in Q.ops:
        if Q.ops[o] != ops[rep[o]]:
            raise ValueError(f"congruence identifies {o} across signatures")
    compose = {(rep[o], tuple(rep[p] for p in ps)): rep[r] for (o, ps), r in Q.compose.items()}
    symmetry = {(rep[o], sg): rep[r] for (o, sg), r in Q.symmetry.items()}
    units = {c: rep[u] for c, u in Q.units.items()}
    R = FinOperad(Q.colours, Q.variant, Q.max_valence, ops, compose, symmetry, units)
    return Quotient(R, OperadMorphism(Q, R, {c: c for c in Q.colours}, dict(rep)))


def coequalizer_finite(f: OperadMorphism, g: OperadMorphism) -> Quotient:
    """``Q`` modulo the congruence generated by ``f(x) ~ g(x)``, for parallel maps in one fiber."""
    if f.colour_map != g.colour_map or any(a != b for a, b in f.colour_map.items()):
        raise UnsupportedShape("coequalizer_finite needs identity colour maps; use bifibration_colimit")
    Q = f.target
    uf = congruence_classes(Q, [(f(x), g(x)) for x in sorted(f.source.ops)])
    return quotient_operad(Q, uf)


@dataclass
class Pullback:
    operad: FinOperad
    left: OperadMorphism
    right: OperadMorphism


def pullback(f: OperadMorphism, g: OperadMorphism) -> Pullback:
    """The pullback of the cospan ``P -f-> R <-g- Q``."""
    P, Q = f.source, g.source
    if f.target is not g.target and f.target.colours != g.target.colours:
        raise ValueError("cospan legs must share the target")
    pair_col = {(a, b): f"({a},{b})" for a in P.colours for b in Q.colours if f.colour_map[a] == g.colour_map[b]}
    cols = sorted(pair_col.values())
    split = {v: k for k, v in pair_col.items()}
    V = min(P.max_valence, Q.max_valence)
    comps: Dict[Signature, List[str]] = {}
    back: Dict[str, Tuple[str, str]] = {}
    for s in all_signatures(cols, V, P.variant == "reduced"):
        sp = Signature(tuple(split[c][0] for c in s.inputs), split[s.output][0])
        sq = Signature(tuple(split[c][1] for c in s.inputs), split[s.output][1])
        names = []
        for x in P.component(sp):
            for y in Q.component(sq):
                if f(x) == g(y):
                    nm = f"<{x}|{y}>@{s}"
                    back[nm] = (x, y)
                    names.append(nm)
        if names:
            comps[s] = names
    by_pair = {}
    for nm, (x, y) in back.items():
        by_pair.setdefault((x, y), []).append(nm)
    sig_names = {}
    for s, names in comps.items():
        for nm in names:
            sig_names[(back[nm], s)] = nm

    def name(x, y, s):
        return sig_names[((x, y), s)]

    def sig_of(nm):
        return next(s for s, ns in comps.items() if nm in ns)

    sig_cache = {nm: s for s, ns in comps.items() for nm in ns}

    def compose_fn(o, ps):
        x, y = back[o]
        xs = [back[p][0] for p in ps]
        ys = [back[p][1] for p in ps]
        rx, ry = P.compose.get((x, tuple(xs))), Q.compose.get((y, tuple(ys)))
        if rx is None or ry is None:
            return None
        s = sig_cache[o]
        t = Signature(tuple(c for p in ps for c in sig_cache[p].inputs), s.output) if ps else s
        return name(rx, ry, t)

    def act_fn(o, sg):
        x, y = back[o]
        return name(P.act(x, sg), Q.act(y, sg), sig_cache[o].act(sg))

    units = {pair_col[(a, b)]: name(P.units[a], Q.units[b], Signature((pair_col[(a, b)],), pair_col[(a, b)]))
             for (a, b) in pair_col}
    W = materialize(cols, P.variant, V, comps, compose_fn, units, act_fn if P.symmetric else None)
    left = OperadMorphism(W, P, {c: split[c][0] for c in cols}, {o: back[o][0] for o in W.ops})
    right = OperadMorphism(W, Q, {c: split[c][1] for c in cols}, {o: back[o][1] for o in W.ops})
    return Pullback(W, left, right)


# push-outs along free maps

@dataclass
class FiberTree:
    shape: str
    automorphisms: int
    corners: Dict[Tuple[int, ...], int]
    punctured: int
    free_part: int
    orbits: int
    representatives: List[str]


@dataclass
class FiltrationStage:
    n: int
    new_classes: List[str]
    fibers: List[FiberTree]

    @property
    def count(self) -> int:
        return len(self.new_classes)


@dataclass
class FiltrationResult:
    stages: List[FiltrationStage]
    comparison: Optional[Dict[str, object]]

    @property
    def agrees(self) -> bool:
        return bool(self.comparison) and bool(self.comparison.get("agree")) and bool(self.comparison.get("exact"))


class _FreeTrees:
    """Alternating normal forms: X-vertices (non-identity) never adjacent, K-vertices new generators."""

    def __init__(self, X: FinOperad, N: MultiGraph, S: Signature):
        self.X, self.N, self.S = X, N, S
        self.E = Engine([Piece("X", {c: c for c in X.colours}, X),
                         Piece("K", {c: c for c in X.colours}, graph=N)], [], X.colours, X.variant, X.max_valence)
        self.units = set(X.units.values())
        self.memo: Dict = {}

    def gen(self, c: str, leaves: Tuple[int, ...], n: int, parent_x: bool) -> List:
        """Terms of output ``c`` on ``leaves`` with exactly ``n`` K-vertices."""
        key = (c, leaves, n, parent_x)
        if key in self.memo:
            return self.memo[key]
        out = set()
        cols = self.S.inputs
        if n == 0 and len(leaves) == 1 and cols[leaves[0]] == c:
            out.add(leaves[0])
        E = self.E
        for k, x, s in E.by_output.get(c, ()):
            if k == 0 and (parent_x or x in self.units):
                continue
            if s.valence == 0 and leaves:
                continue
            rest = n - (k == 1)
            if rest < 0:
                continue
            for blocks in self._splits(leaves, s.valence):
                for kids in self._forest(s.inputs, blocks, rest, k == 0):
                    out.add(E.mk(k, x, kids))
        res = sorted(out, key=E.key)
        self.memo[key] = res
        return res

    def _splits(self, leaves, n):
        if n == 0:
            yield ()
            return
        if self.X.variant == "nonsymmetric":
            for cuts in itertools.combinations_with_replacement(range(len(leaves) + 1), n - 1):
                pts = (0,) + cuts + (len(leaves),)
                yield tuple(leaves[pts[i]:pts[i + 1]] for i in range(n))
        else:
            for assign in itertools.product(range(n), repeat=len(leaves)):
                yield tuple(tuple(l for l, a in zip(leaves, assign) if a == i) for i in range(n))

    def _forest(self, ins, blocks, n, parent_x, i=0):
        if i == len(ins):
            if n == 0:
                yield ()
            return
        for m in range(n + 1):
            for t in self.gen(ins[i], blocks[i], m, parent_x):
                for rest in self._forest(ins, blocks, n - m, parent_x, i + 1):
                    yield (t,) + rest

    def stage(self, n: int) -> List:
        S = self.S
        if n == 0:
            out = [self.E.mk(0, x, tuple(range(S.valence))) for x in self.X.component(S)]
            return sorted(set(out), key=self.E.key)
        return self.gen(S.output, tuple(range(S.valence)), n, False)


def _shape(E: Engine, t) -> str:
    """The undecorated marked tree: marks and vertex signatures, decorations forgotten."""
    if isinstance(t, int):
        return "_"
    s = E.sigs[(t[0], t[1])]
    return f"{E.pieces[t[0]].name}[{s}]({','.join(_shape(E, c) for c in t[2])})"


def _aut(E: Engine, t) -> int:
    """Leaf-preserving automorphisms of the marked shape: swaps of identical nullary X-subtrees."""
    if isinstance(t, int):
        return 1
    total = 1
    for c in t[2]:
        total *= _aut(E, c)
    if E.sortable(t[0]):
        shapes = [_shape(E, c) for c in t[2] if not term_leaves(c)]
        for sh in set(shapes):
            total *= _factorial(shapes.count(sh))
    return total


def _factorial(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


def _vertex_sigs(E: Engine, t) -> List[Tuple[int, Signature]]:
    if isinstance(t, int):
        return []
    out = [(t[0], E.sigs[(t[0], t[1])])]
    for c in t[2]:
        out += _vertex_sigs(E, c)
    return out


def free_pushout_filtration(X: FinOperad, K0: MultiGraph, K1: MultiGraph, alpha: Dict[str, str],
                            S: Signature, n_max: int, inclusion: Optional[Dict[str, str]] = None,
                            compare: bool = True, max_size: int = 9) -> FiltrationResult:
    """Stages of ``X(S) -> Y(S)`` for the push-out of ``F(K0) -> F(K1)`` along ``alpha: F(K0) -> X``."""
    inc = dict(inclusion) if inclusion is not None else {x: x for x, _ in K0.generators()}
    k1 = dict(K1.generators())
    for x, s in K0.generators():
        y = inc.get(x)
        if y not in k1 or k1[y] != s:
            raise HypothesisViolated(f"generator {x} is not sent to a generator of the same signature")
        if alpha.get(x) not in X.ops or X.ops[alpha[x]] != s:
            raise HypothesisViolated(f"alpha is not a graph map at {x}")
    if len(set(inc.values())) != len(inc):
        raise HypothesisViolated("inclusion is not injective")
    new = {}
    for y, s in K1.generators():
        if y not in set(inc.values()):
            new.setdefault(s, []).append(y)
    N = MultiGraph(X.colours, {s: tuple(v) for s, v in new.items()}, X.variant)
    # an X-vertex of a minimal tree takes leaves and K-rooted subtrees as inputs
    if new and X.max_valence < S.valence + n_max:
        raise BoundExceeded(f"X is truncated at valence {X.max_valence}; stage {n_max} needs {S.valence + n_max}")
    FT = _FreeTrees(X, N, S)
    E = FT.E
    stages = []
    for n in range(n_max + 1):
        terms = FT.stage(n)
        if any(term_size(t) > max_size for t in terms):
            raise BoundExceeded(f"stage {n} has trees beyond {max_size} vertices")
        by_shape: Dict[str, List] = {}
        for t in terms:
            by_shape.setdefault(_shape(E, t), []).append(t)
        fibers = []
        for sh in sorted(by_shape):
            ts = by_shape[sh]
            vs = _vertex_sigs(E, ts[0])
            k_sizes = [(len(K0.components.get(s, ())), len(K1.components.get(s, ()))) for k, s in vs if k == 1]
            x_sizes = [len(X.component(s)) for k, s in vs if k == 0]
            x_prod = 1
            for v in x_sizes:
                x_prod *= v
            corners = {}
            for b in itertools.product((0, 1), repeat=len(k_sizes)):
                val = x_prod
                for (a0, a1), bit in zip(k_sizes, b):
                    val *= a1 if bit else a0
                corners[b] = val
            full = corners[(1,) * len(k_sizes)]
            free = x_prod
            for a0, a1 in k_sizes:
                free *= a1 - a0
            fibers.append(FiberTree(sh, _aut(E, ts[0]), corners, full - free, free, len(ts),
                                    [E.show(t) for t in ts]))
        stages.append(FiltrationStage(n, [E.show(t) for t in terms], fibers))
    comparison = None
    if compare:
        comparison = _compare_with_pushout(X, K0, K1, inc, alpha, N, S, FT, n_max, max_size)
    return FiltrationResult(stages, comparison)


def _compare_with_pushout(X, K0, K1, inc, alpha, N, S, FT, n_max, max_size):
    terms = [t for n in range(n_max + 1) for t in FT.stage(n)]
    bound = max([term_size(t) for t in terms] + [1])
    if bound > max_size:
        raise BoundExceeded(f"comparison needs {bound} vertices")
    gens = dict(K1.generators())
    comps: Dict[Signature, List[str]] = {}
    for y, s in sorted(gens.items()):
        comps.setdefault(s, []).append(y)
    G = MultiGraph(X.colours, {s: tuple(v) for s, v in comps.items()}, X.variant)
    ident = {c: c for c in X.colours}
    E = Engine([Piece("X", ident, X), Piece("K", ident, graph=G)],
               [((1, inc[x]), (0, alpha[x])) for x in sorted(inc)], X.colours, X.variant, X.max_valence)
    new_names = {y for v in N.components.values() for y in v}
    st = E.saturate(S, bound, scope=lambda t: _count_new(t, new_names) <= n_max)
    # the free generators are never touched by a move, so their count is a class invariant
    hit = [st.index.get(E.strip(E.renorm(t))) for t in terms]
    counts: Dict[int, int] = {}
    for g in st.classes:
        ns = {_count_new(t, new_names) for t in g}
        if len(ns) != 1:
            return {"agree": False, "reason": "class mixes generator counts", "exact": st.exact}
        n = ns.pop()
        counts[n] = counts.get(n, 0) + 1
    stage_counts = [len(FT.stage(n)) for n in range(n_max + 1)]
    agree = None not in hit and len(set(hit)) == len(hit) and \
        all(counts.get(n, 0) == stage_counts[n] for n in range(n_max + 1))
    return {"agree": agree, "exact": st.exact, "bound": bound,
            "pushout_counts": [counts.get(n, 0) for n in range(n_max + 1)], "stage_counts": stage_counts}


def _count_new(t, names) -> int:
    if isinstance(t, int):
        return 0
    return (t[0] == 1 and t[1] in names) + sum(_count_new(c, names) for c in t[2])
