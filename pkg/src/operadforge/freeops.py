"""Free operads on multigraphs as symbolic operads of decorated trees.

An operation of the free operad is a planar tree whose vertices carry
generators (the generator fixes the order of the inputs of its vertex) together
with a leaf order.  Two decorated trees are equal when they have the same term
string, e.g. ``m(1,m(3,2))`` where numbers are leaf positions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .core import (
    FinOperad,
    MultiGraph,
    OperadMorphism,
    Perm,
    Signature,
    compose_signatures,
    enumerate_morphisms,
    materialize,
    perm_id,
)
from .errors import (
    ArityMismatch,
    BoundExceeded,
    NonComposable,
    OutOfBound,
    SearchBudgetExceeded,
    SignatureMismatch,
)
from .trees import Tree, canonicalize, compose_along_tree, graft, leaf_orders_for

GEN_MARK = "gen"


# decorated trees

@dataclass(frozen=True, eq=False)
class DecoratedTree:
    """A planar tree with a generator on each vertex, stored in canonical form."""

    shape: Tree
    decoration: Tuple[str, ...]
    term: str = field(default="")

    def __post_init__(self):
        if not self.term:
            object.__setattr__(self, "term", _term(self.shape, self.decoration))

    def __eq__(self, other) -> bool:
        return isinstance(other, DecoratedTree) and self.term == other.term

    def __hash__(self) -> int:
        return hash(self.term)

    def __lt__(self, other: "DecoratedTree") -> bool:
        return (self.size, self.term) < (other.size, other.term)

    def __str__(self) -> str:
        return self.term

    @property
    def arity(self) -> Signature:
        return self.shape.arity()

    @property
    def size(self) -> int:
        return len(self.shape.vertices)


def _term(t: Tree, dec: Sequence[str]) -> str:
    if not t.vertices:
        return "|" + t.label(t.root)
    pos = {e: i + 1 for i, e in enumerate(t.leaf_order)}

    def walk(e: int) -> str:
        v = t.above(e)
        if v is None:
            return str(pos[e])
        return dec[v] + "(" + ",".join(walk(x) for x in t.vertices[v][1]) + ")"

    return walk(t.root)


def decorated(shape: Tree, decoration: Dict[int, str]) -> DecoratedTree:
    """Canonical decorated tree; ``decoration`` maps vertex index to generator."""
    _, canon, iso = canonicalize(shape, planar=True)
    where = {out: i for i, (out, _) in enumerate(canon.vertices)}
    dec = [""] * len(canon.vertices)
    for v, (out, _) in enumerate(shape.vertices):
        dec[where[iso[out]]] = decoration[v]
    canon = canon.replace(marks=(GEN_MARK,) * len(canon.vertices))
    return DecoratedTree(canon, tuple(dec))


def decorated_to_json(t: DecoratedTree) -> dict:
    from .trees import tree_to_json
    d = tree_to_json(t.shape)
    d["decoration"] = {str(v): x for v, x in enumerate(t.decoration)}
    d["term"] = t.term
    return d


def decorated_from_json(d: dict) -> DecoratedTree:
    from .trees import tree_from_json
    shape = tree_from_json(d)
    return decorated(shape, {int(v): x for v, x in d["decoration"].items()})


# structures built during enumeration: ("|",) for a leaf or (gen, children)

def _build(K: MultiGraph, struct, root_colour: str, order_positions: Optional[Sequence[int]]) -> DecoratedTree:
    verts: List[Tuple[int, Tuple[int, ...]]] = []
    labels: Dict[int, str] = {}
    dec: Dict[int, str] = {}
    planar_leaves: List[int] = []
    counter = [0]

    def walk(node, colour: str) -> int:
        e = counter[0]
        counter[0] += 1
        labels[e] = colour
        if node[0] == "|":
            planar_leaves.append(e)
            return e
        x, kids = node
        s = K.sig_of(x)
        slot = len(verts)
        verts.append((e, ()))
        dec[slot] = x
        verts[slot] = (e, tuple(walk(k, c) for k, c in zip(kids, s.inputs)))
        return e

    walk(struct, root_colour)
    if order_positions is None:
        order = tuple(planar_leaves)
    else:
        order = tuple(planar_leaves[i] for i in order_positions)
    shape = Tree(0, tuple(verts), tuple(sorted(labels.items())), (GEN_MARK,) * len(verts), order)
    return decorated(shape, dec)


@dataclass
class Component:
    trees: List[DecoratedTree]
    exact: bool

    def __len__(self) -> int:
        return len(self.trees)


class SymbolicOperad:
    """The free operad ``F(K)``, queried one signature and vertex bound at a time."""

    def __init__(self, generators: MultiGraph, variant: str = "symmetric"):
        if variant == "reduced":
            for s, xs in generators.components.items():
                if s.valence == 0 and xs:
                    raise SignatureMismatch("reduced free operad on a valence-0 generator")
        self.generators = generators
        self.variant = variant
        self._by_output: Dict[str, List[Tuple[str, Signature]]] = {}
        for x, s in generators.generators():
            self._by_output.setdefault(s.output, []).append((x, s))
        self._memo: Dict = {}

    @property
    def colours(self) -> Tuple[str, ...]:
        return tuple(sorted(self.generators.colours))

    @property
    def symmetric(self) -> bool:
        return self.variant != "nonsymmetric"

    # operad structure
    def unit(self, c: str) -> DecoratedTree:
        return DecoratedTree(Tree(0, (), ((0, c),), ()), ())

    def generator(self, x: str) -> DecoratedTree:
        s = self.generators.sig_of(x)
        return _build(self.generators, (x, tuple(("|",) for _ in s.inputs)), s.output, None)

    def compose(self, t: DecoratedTree, ts: Sequence[DecoratedTree]) -> DecoratedTree:
        s = t.arity
        if len(ts) != s.valence:
            raise ArityMismatch(f"{s.valence} inputs but {len(ts)} operations")
        compose_signatures(s, [u.arity for u in ts])
        g = graft(t.shape, [u.shape for u in ts])
        dec = list(t.decoration)
        for u in ts:
            dec.extend(u.decoration)
        return decorated(g, dict(enumerate(dec)))

    def act(self, t: DecoratedTree, sigma: Perm) -> DecoratedTree:
        if tuple(sigma) == perm_id(len(sigma)):
            return t
        if not self.symmetric:
            raise NonComposable("nonsymmetric operads carry no symmetric action")
        order = tuple(t.shape.leaf_order[i] for i in sigma)
        return decorated(t.shape.replace(leaf_order=order), dict(enumerate(t.decoration)))

    # enumeration
    def _planar(self, c: str, word: Tuple[str, ...], i: int, j: int, budget: int) -> List[Tuple[object, int]]:
        """Planar structures with root ``c``, planar leaves ``word[i:j]``, at most ``budget`` vertices."""
        key = (c, word, i, j, budget)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out: List[Tuple[object, int]] = []
        if j == i + 1 and word[i] == c:
            out.append((("|",), 0))
        if budget >= 1:
            for x, s in self._by_output.get(c, ()):
                for kids, used in self._forest(s.inputs, word, i, j, budget - 1):
                    out.append(((x, kids), used + 1))
        self._memo[key] = out
        return out

    def _forest(self, cols: Tuple[str, ...], word, i: int, j: int, budget: int) -> Iterator[Tuple[tuple, int]]:
        if not cols:
            if i == j:
                yield (), 0
            return
        if len(cols) == 1:
            for node, used in self._planar(cols[0], word, i, j, budget):
                yield (node,), used
            return
        for mid in range(i, j + 1):
            for node, used in self._planar(cols[0], word, i, mid, budget):
                for rest, more in self._forest(cols[1:], word, mid, j, budget - used):
                    yield (node,) + rest, used + more

    def _words(self, s: Signature) -> List[Tuple[str, ...]]:
        if not self.symmetric:
            return [s.inputs]
        return sorted(set(itertools.permutations(s.inputs)))

    def component(self, s: Signature, bound: int) -> Component:
        """Decorated trees of arity ``s`` with at most ``bound`` vertices."""
        if self.variant == "reduced" and s.valence == 0:
            return Component([], True)
        found = set()
        for word in self._words(s):
            orders = leaf_orders_for(word, s.inputs) if self.symmetric else [None]
            for struct, _ in self._planar(s.output, word, 0, len(word), bound):
                for order in orders:
                    found.add(_build(self.generators, struct, s.output, order))
        top = self.max_size(s)
        return Component(sorted(found), top is not None and top <= bound)

    def count(self, s: Signature, bound: int) -> int:
        return len(self.component(s, bound))

    def max_size(self, s: Signature) -> Optional[int]:
        """Largest vertex count in the component ``s``; ``None`` when unbounded."""
        best: Optional[int] = -1
        for word in self._words(s):
            m = _max_vertices(self._by_output, word, s.output)
            if m is None:
                return None
            best = max(best, m)
        return best

    def truncation(self, max_valence: int, bound: int, colours: Optional[Sequence[str]] = None) -> "Truncation":
        return truncate(self, max_valence, bound, colours)


def free_operad(K: MultiGraph, variant: Optional[str] = None) -> SymbolicOperad:
    return SymbolicOperad(K, variant or K.variant)


def _max_vertices(by_output, word: Tuple[str, ...], root: str) -> Optional[int]:
    """Longest tree with the given planar leaf word, ``None`` if unbounded, ``-1`` if none.

    States are (colour, i, j).  A state is inhabited by a least fixpoint; the
    component is infinite exactly when an inhabited state reachable from the
    target lies on a cycle of the decomposition graph.
    """
    n = len(word)
    colours = set(by_output) | set(word) | {root}
    for xs in by_output.values():
        for _, s in xs:
            colours.update(s.inputs)
    states = [(c, i, j) for c in sorted(colours) for i in range(n + 1) for j in range(i, n + 1)]

    def splits(cols, i, j):
        if not cols:
            if i == j:
                yield ()
            return
        if len(cols) == 1:
            yield ((cols[0], i, j),)
            return
        for mid in range(i, j + 1):
            for rest in splits(cols[1:], mid, j):
                yield ((cols[0], i, mid),) + rest

    alive = set()
    changed = True
    while changed:
        changed = False
        for st in states:
            if st in alive:
                continue
            c, i, j = st
            ok = j == i + 1 and word[i] == c
            if not ok:
                for _, s in by_output.get(c, ()):
                    if any(all(k in alive for k in sp) for sp in splits(s.inputs, i, j)):
                        ok = True
                        break
            if ok:
                alive.add(st)
                changed = True
    target = (root, 0, n)
    if target not in alive:
        return -1
    edges: Dict[Tuple, List[Tuple]] = {}
    for st in alive:
        c, i, j = st
        edges[st] = [sp for _, s in by_output.get(c, ()) for sp in splits(s.inputs, i, j)
                     if all(k in alive for k in sp)]
    # depth-first search for a reachable cycle, computing longest sizes on the way
    WHITE, GREY, BLACK = 0, 1, 2
    colour_of = {st: WHITE for st in alive}
    size: Dict[Tuple, int] = {}

    def visit(st) -> bool:
        colour_of[st] = GREY
        c, i, j = st
        best = 0 if (j == i + 1 and word[i] == c) else -1
        for sp in edges[st]:
            tot = 1
            for k in sp:
                if colour_of[k] == GREY:
                    return False
                if colour_of[k] == WHITE and not visit(k):
                    return False
                tot += size[k]
            best = max(best, tot)
        colour_of[st] = BLACK
        size[st] = best
        return True

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10000))
    try:
        return size[target] if visit(target) else None
    finally:
        sys.setrecursionlimit(old)


# materialized truncations

@dataclass
class Truncation:
    """A finite piece of ``F(K)``: all trees of valence at most ``max_valence`` and at most ``bound`` vertices.

    Composites leaving the piece are absent from the tables.
    """

    free: SymbolicOperad
    operad: FinOperad
    trees: Dict[str, DecoratedTree]
    names: Dict[DecoratedTree, str]
    exact: bool


def truncate(F: SymbolicOperad, max_valence: int, bound: int,
             colours: Optional[Sequence[str]] = None) -> Truncation:
    cols = tuple(sorted(colours or F.colours))
    comps: Dict[Signature, List[str]] = {}
    trees: Dict[str, DecoratedTree] = {}
    exact = True
    reduced = F.variant == "reduced"
    for n in range(0 if not reduced else 1, max_valence + 1):
        for ins in itertools.product(cols, repeat=n):
            for out in cols:
                s = Signature(ins, out)
                comp = F.component(s, bound)
                exact = exact and comp.exact
                for t in comp.trees:
                    trees[t.term] = t
                    comps.setdefault(s, []).append(t.term)
    names = {t: name for name, t in trees.items()}
    units = {c: F.unit(c).term for c in cols}

    def compose_fn(o, ps):
        r = F.compose(trees[o], [trees[p] for p in ps])
        return r.term if r in names else None

    def act_fn(o, sg):
        return F.act(trees[o], sg).term

    O = materialize(cols, F.variant, max_valence, comps, compose_fn, units, act_fn)
    return Truncation(F, O, trees, names, exact)


# the adjunction

@dataclass(frozen=True, eq=False)
class GraphMorphism:
    """A multigraph morphism ``K -> U(P)``: a colour map and a generator assignment."""

    source: MultiGraph
    target: FinOperad
    colour_map: Dict[str, str]
    gen_map: Dict[str, str]

    def key(self) -> Tuple:
        return (tuple(sorted(self.colour_map.items())), tuple(sorted(self.gen_map.items())))


def check_graph_morphism(g: GraphMorphism) -> None:
    for c in g.source.colours:
        if g.colour_map.get(c) not in g.target.colours:
            raise SignatureMismatch(f"colour {c} has no image")
    for x, s in g.source.generators():
        y = g.gen_map.get(x)
        if y is None or g.target.ops.get(y) != s.rename(g.colour_map):
            raise SignatureMismatch(f"generator {x} must map into {s.rename(g.colour_map)}")


class FreeEvaluation:
    """The operad morphism ``F(K) -> P`` extending a multigraph morphism."""

    def __init__(self, g: GraphMorphism):
        check_graph_morphism(g)
        self.g = g
        self.colour_map = dict(g.colour_map)

    def __call__(self, t: DecoratedTree) -> str:
        sh = t.shape
        f = self.colour_map
        mapped = sh.replace(labels=tuple((e, f[c]) for e, c in sh.labels))
        return compose_along_tree(self.g.target, mapped, {v: self.g.gen_map[x] for v, x in enumerate(t.decoration)})

    def restrict(self, T: Truncation) -> OperadMorphism:
        return OperadMorphism(T.operad, self.g.target, dict(self.colour_map),
                              {name: self(t) for name, t in sorted(T.trees.items())})


def free_eval(g: GraphMorphism) -> FreeEvaluation:
    return FreeEvaluation(g)


def graph_morphisms(K: MultiGraph, P: FinOperad) -> Iterator[GraphMorphism]:
    """All multigraph morphisms ``K -> U(P)``, in a fixed order."""
    cols = sorted(K.colours)
    gens = K.generators()
    for images in itertools.product(sorted(P.colours), repeat=len(cols)):
        f = dict(zip(cols, images))
        choices = []
        for x, s in gens:
            t = s.rename(f)
            if t.valence > P.max_valence:
                raise OutOfBound(f"{t} exceeds valence bound {P.max_valence}")
            choices.append(P.component(t))
        for pick in itertools.product(*choices):
            yield GraphMorphism(K, P, f, {x: y for (x, _), y in zip(gens, pick)})


def graph_hom_count(K: MultiGraph, P: FinOperad) -> int:
    """Sum over colour maps of the product of component sizes."""
    total = 0
    cols = sorted(K.colours)
    for images in itertools.product(sorted(P.colours), repeat=len(cols)):
        f = dict(zip(cols, images))
        prod = 1
        for _, s in K.generators():
            prod *= len(P.component(s.rename(f)))
        total += prod
    return total


@dataclass
class HomCount:
    free_count: int
    graph_count: int
    bijective: bool
    pairs: List[Tuple[GraphMorphism, OperadMorphism]]

    @property
    def equal(self) -> bool:
        return self.free_count == self.graph_count


def hom_count_check(K: MultiGraph, P: FinOperad, bound: int = 2, budget: Optional[int] = None) -> HomCount:
    """Count morphisms ``F(K) -> P`` by search and ``K -> U(P)`` by formula, and match them via ``free_eval``."""
    gen_val = max((s.valence for _, s in K.generators()), default=0)
    if gen_val > P.max_valence:
        raise BoundExceeded(f"generator valence {gen_val} exceeds the target bound {P.max_valence}")
    V = max(gen_val, 1)
    F = SymbolicOperad(K, P.variant)
    T = truncate(F, V, max(bound, 1))
    try:
        found = list(enumerate_morphisms(T.operad, P, budget=budget))
    except SearchBudgetExceeded as exc:
        raise BoundExceeded(f"morphism search gave up after {exc.explored} nodes") from exc
    keys = {phi.key() for phi in found}
    pairs = []
    hit = set()
    for g in graph_morphisms(K, P):
        phi = free_eval(g).restrict(T)
        pairs.append((g, phi))
        hit.add(phi.key())
    bij = hit == keys and len(hit) == len(pairs)
    return HomCount(len(found), graph_hom_count(K, P), bij, pairs)


# term syntax

def parse_term(F: SymbolicOperad, text: str, inputs: Optional[Sequence[str]] = None) -> DecoratedTree:
    """Read a term such as ``m(1,m(3,2))`` or ``|c`` back into a decorated tree."""
    text = text.strip()
    if text.startswith("|"):
        return F.unit(text[1:])
    pos = [0]

    def node():
        start = pos[0]
        while pos[0] < len(text) and text[pos[0]] not in "(),":
            pos[0] += 1
        name = text[start:pos[0]]
        if pos[0] < len(text) and text[pos[0]] == "(":
            pos[0] += 1
            kids = []
            if text[pos[0]] == ")":
                pos[0] += 1
                return (name, ()), []
            while True:
                kid, ls = node()
                kids.append((kid, ls))
                if text[pos[0]] == ",":
                    pos[0] += 1
                    continue
                pos[0] += 1
                break
            return (name, tuple(k for k, _ in kids)), [x for _, ls in kids for x in ls]
        return ("|",), [int(name)]

    struct, leaves = node()
    if pos[0] != len(text):
        raise ValueError(f"trailing input in term {text!r}")
    if sorted(leaves) != list(range(1, len(leaves) + 1)):
        raise ValueError(f"leaf numbers in {text!r} must be 1..n")
    root = F.generators.sig_of(struct[0]).output
    # planar leaf j carries position leaves[j]; the order lists planar indices by position
    order = [0] * len(leaves)
    for j, p in enumerate(leaves):
        order[p - 1] = j
    if not F.symmetric and order != sorted(order):
        raise ValueError("nonsymmetric terms number their leaves in planar order")
    return _build(F.generators, struct, root, order)
