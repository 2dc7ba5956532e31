"""Rooted trees with planar structures, markings and leaf orders.

A tree is stored in rooted normal form: each vertex records its output edge
and its input edges in planar order.  Labels colour the edges, marks tag the
vertices and ``leaf_order`` lists the leaves by position.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple

from .core import (
    FinOperad,
    Perm,
    Signature,
    all_perms,
    enumerate_morphisms,
    materialize,
    perm_id,
    perm_inv,
)
from .errors import (
    ArityMismatch,
    BoundExceeded,
    DecorationMismatch,
    LabelMismatch,
    NotInner,
    NotPrunable,
    NotUnary,
)

DEFAULT_COLOUR = "c"
DEFAULT_MARK = "x"

Vertex = Tuple[int, Tuple[int, ...]]


@dataclass(frozen=True)
class Tree:
    root: int
    vertices: Tuple[Vertex, ...] = ()
    labels: Tuple[Tuple[int, str], ...] = ()
    marks: Tuple[str, ...] = ()
    leaf_order: Tuple[int, ...] = ()
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        above: Dict[int, int] = {}
        below: Dict[int, int] = {}
        for i, (out, ins) in enumerate(self.vertices):
            if out in above:
                raise ValueError(f"edge {out} is the output of two vertices")
            above[out] = i
            for e in ins:
                if e in below:
                    raise ValueError(f"edge {e} is an input of two vertices")
                below[e] = i
        if self.root in below:
            raise ValueError("root must be an outer edge")
        if self.vertices and self.root not in above:
            raise ValueError("root is not attached to a vertex")
        # walk from the root: visits every vertex exactly once iff connected without loops
        seen_v: Set[int] = set()
        seen_e: List[int] = []
        planar_leaves: List[int] = []
        stack = [self.root]
        while stack:
            e = stack.pop()
            seen_e.append(e)
            v = above.get(e)
            if v is None:
                planar_leaves.append(e)
                continue
            if v in seen_v:
                raise ValueError("tree contains a loop")
            seen_v.add(v)
            stack.extend(reversed(self.vertices[v][1]))
        if len(seen_v) != len(self.vertices):
            raise ValueError("graph is not connected")
        edges = tuple(sorted(set(seen_e)))
        if len(edges) != len(seen_e):
            raise ValueError("edge reached twice")
        lab = dict(self.labels)
        if not self.labels:
            lab = {e: DEFAULT_COLOUR for e in edges}
            object.__setattr__(self, "labels", tuple(sorted(lab.items())))
        elif set(lab) != set(edges):
            raise ValueError("labelling must be total on edges")
        if not self.marks:
            object.__setattr__(self, "marks", (DEFAULT_MARK,) * len(self.vertices))
        elif len(self.marks) != len(self.vertices):
            raise ValueError("marking must be total on vertices")
        if not self.leaf_order:
            object.__setattr__(self, "leaf_order", tuple(planar_leaves))
        elif sorted(self.leaf_order) != sorted(planar_leaves):
            raise ValueError("leaf order must list every leaf once")
        self._cache.update(above=above, below=below, edges=edges, label=lab,
                           planar_leaves=tuple(planar_leaves))

    # accessors
    @property
    def edges(self) -> Tuple[int, ...]:
        return self._cache["edges"]

    def label(self, e: int) -> str:
        return self._cache["label"][e]

    def above(self, e: int) -> Optional[int]:
        return self._cache["above"].get(e)

    def below(self, e: int) -> Optional[int]:
        return self._cache["below"].get(e)

    @property
    def planar_leaves(self) -> Tuple[int, ...]:
        return self._cache["planar_leaves"]

    @property
    def leaves(self) -> Tuple[int, ...]:
        return self.leaf_order

    def inner_edges(self) -> Tuple[int, ...]:
        return tuple(e for e in self.edges if e in self._cache["above"] and e in self._cache["below"])

    def n_vertices(self) -> int:
        return len(self.vertices)

    def vertex_arity(self, v: int) -> Signature:
        out, ins = self.vertices[v]
        return Signature(tuple(self.label(e) for e in ins), self.label(out))

    def arity(self) -> Signature:
        return Signature(tuple(self.label(e) for e in self.leaf_order), self.label(self.root))

    def tau(self) -> Dict[int, int]:
        """The leaf order as a bijection onto ``1..n``."""
        return {e: i + 1 for i, e in enumerate(self.leaf_order)}

    def vertex_edge_sets(self) -> FrozenSet[FrozenSet[int]]:
        return frozenset(frozenset((out,) + ins) for out, ins in self.vertices)

    def is_corolla(self) -> bool:
        return len(self.vertices) == 1

    def replace(self, **kw) -> "Tree":
        d = dict(root=self.root, vertices=self.vertices, labels=self.labels, marks=self.marks,
                 leaf_order=self.leaf_order)
        d.update(kw)
        return Tree(**d)

    def relabel(self, f: Dict[int, int]) -> "Tree":
        """Rename edge ids along the injective map ``f``."""
        return Tree(
            f[self.root],
            tuple((f[o], tuple(f[e] for e in ins)) for o, ins in self.vertices),
            tuple(sorted((f[e], c) for e, c in self.labels)),
            self.marks,
            tuple(f[e] for e in self.leaf_order),
        )

    def normalized(self) -> "Tree":
        """Renumber edges ``0..`` in depth-first planar order."""
        f: Dict[int, int] = {}
        stack = [self.root]
        while stack:
            e = stack.pop()
            f[e] = len(f)
            v = self.above(e)
            if v is not None:
                stack.extend(reversed(self.vertices[v][1]))
        return self.relabel(f)

    def __str__(self) -> str:
        return render(self)


CTree = Tree
OrderedMarkedTree = Tree


def eta(colour: str = DEFAULT_COLOUR, edge: int = 0) -> Tree:
    """The empty tree ``|`` on one edge."""
    return Tree(edge, (), ((edge, colour),))


def corolla(inputs: Sequence[str], output: str = DEFAULT_COLOUR, mark: str = DEFAULT_MARK,
            leaf_order: Optional[Sequence[int]] = None) -> Tree:
    n = len(inputs)
    labels = [(0, output)] + [(i + 1, c) for i, c in enumerate(inputs)]
    order = tuple(i + 1 for i in leaf_order) if leaf_order is not None else ()
    return Tree(0, ((0, tuple(range(1, n + 1))),), tuple(labels), (mark,), order)


def chain(colours: Sequence[str], mark: str = DEFAULT_MARK) -> Tree:
    """A linear tree; ``colours`` lists edges from the root upwards."""
    verts = tuple((i, (i + 1,)) for i in range(len(colours) - 1))
    return Tree(0, verts, tuple(enumerate(colours)), (mark,) * len(verts))


def from_ev(edges: Sequence[int], vertices: Sequence[Sequence[int]], root: int,
            labels: Optional[Dict[int, str]] = None) -> Tree:
    """Orient an ``(E, V)`` presentation away from ``root``; inputs are ordered by edge id."""
    E = set(edges)
    Vs = [frozenset(v) for v in vertices]
    count: Dict[int, int] = {e: 0 for e in E}
    for v in Vs:
        if not v <= E:
            raise ValueError("vertex uses an unknown edge")
        for e in v:
            count[e] += 1
    if any(k > 2 for k in count.values()):
        raise ValueError("an edge belongs to more than two vertices")
    if count.get(root, 0) > 1:
        raise ValueError("root must be an outer edge")
    oriented: List[Vertex] = []
    used: Set[int] = set()
    stack = [root]
    seen_e = {root}
    while stack:
        e = stack.pop()
        for k, v in enumerate(Vs):
            if e in v and k not in used:
                used.add(k)
                ins = tuple(sorted(v - {e}))
                oriented.append((e, ins))
                for i in ins:
                    if i in seen_e:
                        raise ValueError("graph has a loop")
                    seen_e.add(i)
                    stack.append(i)
                break
    if len(used) != len(Vs) or seen_e != E:
        raise ValueError("graph is not connected")
    lab = tuple(sorted((labels or {e: DEFAULT_COLOUR for e in E}).items()))
    return Tree(root, tuple(oriented), lab)


def to_ev(t: Tree) -> Tuple[FrozenSet[int], FrozenSet[FrozenSet[int]], int]:
    return frozenset(t.edges), t.vertex_edge_sets(), t.root


def render(t: Tree) -> str:
    """Indented picture, root at the top."""
    lines: List[str] = []

    def walk(e: int, depth: int) -> None:
        pad = "  " * depth
        v = t.above(e)
        if v is None:
            pos = t.leaf_order.index(e) + 1 if e in t.leaf_order else "-"
            lines.append(f"{pad}|{e}:{t.label(e)} leaf {pos}")
            return
        lines.append(f"{pad}|{e}:{t.label(e)}")
        lines.append(f"{pad}({t.marks[v]} v{v})")
        for i in t.vertices[v][1]:
            walk(i, depth + 1)

    walk(t.root, 0)
    return "\n".join(lines)


def tree_to_json(t: Tree) -> dict:
    return {
        "kind": "tree",
        "root": t.root,
        "vertices": [[o, list(ins)] for o, ins in t.vertices],
        "labels": {str(e): c for e, c in t.labels},
        "marks": list(t.marks),
        "leaf_order": list(t.leaf_order),
    }


def tree_from_json(d: dict) -> Tree:
    return Tree(
        d["root"],
        tuple((o, tuple(ins)) for o, ins in d["vertices"]),
        tuple(sorted((int(e), c) for e, c in d["labels"].items())),
        tuple(d.get("marks", ())),
        tuple(d.get("leaf_order", ())),
    )


# grafting

def graft(T: Tree, subtrees: Sequence[Tree]) -> Tree:
    """Identify the root of ``subtrees[i]`` with the leaf at position ``i`` of ``T``."""
    if len(subtrees) != len(T.leaf_order):
        raise ArityMismatch(f"{len(T.leaf_order)} leaves but {len(subtrees)} subtrees")
    for i, (leaf, S) in enumerate(zip(T.leaf_order, subtrees)):
        if S.label(S.root) != T.label(leaf):
            raise LabelMismatch(f"position {i + 1}: {S.label(S.root)} != {T.label(leaf)}")
    nxt = max(T.edges) + 1
    verts = list(T.vertices)
    labels = dict(T.labels)
    marks = list(T.marks)
    leaves: List[int] = []
    for leaf, S in zip(T.leaf_order, subtrees):
        f: Dict[int, int] = {}
        for e in S.edges:
            if e == S.root:
                f[e] = leaf
            else:
                f[e] = nxt
                nxt += 1
        R = S.relabel(f)
        verts.extend(R.vertices)
        marks.extend(R.marks)
        for e, c in R.labels:
            labels[e] = c
        leaves.extend(R.leaf_order)
    return Tree(T.root, tuple(verts), tuple(sorted(labels.items())), tuple(marks), tuple(leaves))


# morphisms

@dataclass(frozen=True)
class TreeMorphism:
    source: Tree
    target: Tree
    edge_map: Tuple[Tuple[int, int], ...]
    word: Tuple[Tuple, ...] = ()

    @property
    def mapping(self) -> Dict[int, int]:
        return dict(self.edge_map)

    def key(self) -> Tuple[Tuple[int, int], ...]:
        return self.edge_map

    def then(self, g: "TreeMorphism") -> "TreeMorphism":
        """The composite ``g . self``."""
        m, n = self.mapping, g.mapping
        return TreeMorphism(self.source, g.target, tuple(sorted((e, n[m[e]]) for e in m)),
                            self.word + g.word)


def _morphism(src: Tree, tgt: Tree, m: Dict[int, int], step: Tuple) -> TreeMorphism:
    return TreeMorphism(src, tgt, tuple(sorted(m.items())), (step,))


def inner_face(T: Tree, e: int) -> Tuple[Tree, TreeMorphism]:
    """``T/e`` with the inclusion ``T/e -> T``."""
    if e not in T.inner_edges():
        raise NotInner(f"edge {e} is not inner")
    up, low = T.above(e), T.below(e)
    out, ins = T.vertices[low]
    k = ins.index(e)
    merged = (out, ins[:k] + T.vertices[up][1] + ins[k + 1:])
    verts, marks = [], []
    for i, v in enumerate(T.vertices):
        if i == up:
            continue
        verts.append(merged if i == low else v)
        marks.append(T.marks[i])
    labels = tuple((x, c) for x, c in T.labels if x != e)
    F = Tree(T.root, tuple(verts), labels, tuple(marks), T.leaf_order)
    return F, _morphism(F, T, {x: x for x in F.edges}, ("inner_face", e))


def prunable(T: Tree, v: int) -> bool:
    out, ins = T.vertices[v]
    inner = set(T.inner_edges())
    return sum(1 for x in (out,) + ins if x in inner) == 1


def outer_face(T: Tree, v: int) -> Tuple[Tree, TreeMorphism]:
    """``T/v`` for a vertex with exactly one inner edge, with the inclusion into ``T``."""
    if not prunable(T, v):
        raise NotPrunable(f"vertex {v} does not have exactly one inner edge")
    out, ins = T.vertices[v]
    inner = set(T.inner_edges())
    e = out if out in inner else next(x for x in ins if x in inner)
    drop = set((out,) + ins) - {e}
    verts = tuple(x for i, x in enumerate(T.vertices) if i != v)
    marks = tuple(m for i, m in enumerate(T.marks) if i != v)
    labels = tuple((x, c) for x, c in T.labels if x not in drop)
    if e == out:
        pos = min(T.leaf_order.index(x) for x in ins) if ins else len(
            [x for x in T.leaf_order if _leaf_before(T, x, e)])
        order = [x for x in T.leaf_order if x not in drop]
        order.insert(pos, e)
        F = Tree(T.root, verts, labels, marks, tuple(order))
    else:
        F = Tree(e, verts, labels, marks, tuple(x for x in T.leaf_order if x not in drop))
    return F, _morphism(F, T, {x: x for x in F.edges}, ("outer_face", v))


def _leaf_before(T: Tree, leaf: int, e: int) -> bool:
    """Whether ``leaf`` precedes edge ``e`` in the planar depth-first order."""
    order: List[int] = []
    stack = [T.root]
    while stack:
        x = stack.pop()
        order.append(x)
        v = T.above(x)
        if v is not None:
            stack.extend(reversed(T.vertices[v][1]))
    return order.index(leaf) < order.index(e)


def edge_face(T: Tree, e: int) -> Tuple[Tree, TreeMorphism]:
    """The outer face ``| -> T`` of a corolla hitting edge ``e``."""
    if not T.is_corolla():
        raise NotPrunable("edge faces exist only for corollas")
    F = eta(T.label(e), e)
    return F, _morphism(F, T, {e: e}, ("edge_face", e))


def degeneracy(T: Tree, v: int) -> Tuple[Tree, TreeMorphism]:
    """``T.v`` for a unary vertex, with the projection ``T -> T.v``."""
    out, ins = T.vertices[v]
    if len(ins) != 1:
        raise NotUnary(f"vertex {v} has {len(ins)} inputs")
    e = ins[0]
    if T.label(e) != T.label(out):
        raise LabelMismatch("degeneracy would identify edges of different colours")
    m = {x: (out if x == e else x) for x in T.edges}
    verts, marks = [], []
    for i, (o, xs) in enumerate(T.vertices):
        if i == v:
            continue
        verts.append((m[o], tuple(m[x] for x in xs)))
        marks.append(T.marks[i])
    labels = tuple((x, c) for x, c in T.labels if x != e)
    D = Tree(T.root, tuple(verts), labels, tuple(marks), tuple(m[x] for x in T.leaf_order))
    return D, _morphism(T, D, m, ("degeneracy", v))


def elementary_morphism(T: Tree, kind: str, arg: int) -> Tuple[Tree, TreeMorphism]:
    fn = {"inner_face": inner_face, "outer_face": outer_face, "edge_face": edge_face,
          "degeneracy": degeneracy}[kind]
    return fn(T, arg)


def isomorphisms(A: Tree, B: Tree, planar: bool = False, marks: bool = False,
                 leaves: bool = False, rigid: FrozenSet[str] = frozenset()) -> Iterator[Dict[int, int]]:
    """Label-preserving isomorphisms ``A -> B`` as edge bijections.

    ``planar`` keeps every planar order, ``rigid`` keeps it at vertices with
    those marks, ``marks`` preserves marks and ``leaves`` preserves leaf positions.
    """
    if len(A.edges) != len(B.edges) or len(A.vertices) != len(B.vertices):
        return
    posA = {e: i for i, e in enumerate(A.leaf_order)}
    posB = {e: i for i, e in enumerate(B.leaf_order)}

    def match(ea: int, eb: int) -> Iterator[Dict[int, int]]:
        if A.label(ea) != B.label(eb):
            return
        va, vb = A.above(ea), B.above(eb)
        if (va is None) != (vb is None):
            return
        if va is None:
            if leaves and posA.get(ea) != posB.get(eb):
                return
            yield {ea: eb}
            return
        if marks and A.marks[va] != B.marks[vb]:
            return
        ia, ib = A.vertices[va][1], B.vertices[vb][1]
        if len(ia) != len(ib):
            return
        fixed = planar or A.marks[va] in rigid
        perms = [perm_id(len(ia))] if fixed else all_perms(len(ia))
        for p in perms:
            yield from _extend({ea: eb}, [(ia[j], ib[p[j]]) for j in range(len(ia))])

    def _extend(acc: Dict[int, int], pairs) -> Iterator[Dict[int, int]]:
        if not pairs:
            yield dict(acc)
            return
        (x, y), rest = pairs[0], pairs[1:]
        for sub in match(x, y):
            merged = dict(acc)
            merged.update(sub)
            yield from _extend(merged, rest)

    yield from match(A.root, B.root)


def is_isomorphic(A: Tree, B: Tree, **kw) -> bool:
    return next(isomorphisms(A, B, **kw), None) is not None


# canonical forms

def _code(t: Tree, e: int, rigid, planar: bool, positions: bool = True):
    v = t.above(e)
    if v is None:
        pos = t.leaf_order.index(e) if positions and e in t.leaf_order else -1
        return ("L", t.label(e), pos)
    kids = [_code(t, x, rigid, planar, positions) for x in t.vertices[v][1]]
    if not (planar or t.marks[v] in rigid):
        kids = sorted(kids)
    return ("V", t.label(e), t.marks[v], tuple(kids))


@dataclass(frozen=True)
class CanonicalForm:
    code: Tuple

    def __lt__(self, other: "CanonicalForm") -> bool:
        return self.code < other.code


def canonicalize(t: Tree, rigid: Sequence[str] = (), planar: bool = False) -> Tuple[CanonicalForm, Tree, Dict[int, int]]:
    """Minimal serialization over admissible child orders.

    Returns the form, the canonical representative and an isomorphism from
    ``t`` onto it (edges renumbered depth-first).
    """
    rig = frozenset(rigid)
    form = _code(t, t.root, rig, planar)
    iso: Dict[int, int] = {}
    verts: List[Vertex] = []
    marks: List[str] = []
    labels: Dict[int, str] = {}
    leaf_at: Dict[int, int] = {}

    def build(e: int) -> int:
        me = len(iso)
        iso[e] = me
        labels[me] = t.label(e)
        v = t.above(e)
        if v is None:
            if e in t.leaf_order:
                leaf_at[t.leaf_order.index(e)] = me
            return me
        ins = list(t.vertices[v][1])
        if not (planar or t.marks[v] in rig):
            ins.sort(key=lambda x: _code(t, x, rig, planar))
        slot = len(verts)
        verts.append((me, ()))
        marks.append(t.marks[v])
        kids = tuple(build(x) for x in ins)
        verts[slot] = (me, kids)
        return me

    build(t.root)
    canon = Tree(0, tuple(verts), tuple(sorted(labels.items())), tuple(marks),
                 tuple(leaf_at[i] for i in range(len(leaf_at))))
    return CanonicalForm(form), canon, iso


def canonical_key(t: Tree, rigid: Sequence[str] = (), planar: bool = False,
                  positions: bool = True) -> Tuple:
    return _code(t, t.root, frozenset(rigid), planar, positions)


# planar invariants and composition along a tree

def _subtree_planar_leaves(T: Tree, root: int, stop: Set[int]) -> List[int]:
    out: List[int] = []
    stack = [root]
    while stack:
        e = stack.pop()
        v = T.above(e)
        if e in stop or v is None:
            out.append(e)
            continue
        stack.extend(reversed(T.vertices[v][1]))
    return out


def twisting(t: Tree) -> Perm:
    """The permutation sending leaf positions to planar positions."""
    planar = {e: i for i, e in enumerate(t.planar_leaves)}
    return tuple(planar[e] for e in t.leaf_order)


def planar_invariants(f: TreeMorphism) -> Tuple[Dict[int, Perm], Perm, Perm]:
    """Planar change per source vertex, leaf permutation, and twisting of the source."""
    A, B, m = f.source, f.target, f.mapping
    sigma: Dict[int, Perm] = {}
    for v, (out, ins) in enumerate(A.vertices):
        images = [m[x] for x in ins]
        if m[out] in images or len(set(images)) != len(images):
            sigma[v] = perm_id(len(ins))
            continue
        order = _subtree_planar_leaves(B, m[out], set(images))
        rank = {e: i for i, e in enumerate(x for x in order if x in set(images))}
        sigma[v] = tuple(rank[y] for y in images)
    imgs = [m[e] for e in A.leaf_order]
    if all(y in B.leaf_order for y in imgs):
        ref = [e for e in B.leaf_order if e in set(imgs)]
    else:
        ref = [e for e in _subtree_planar_leaves(B, m[A.root], set(imgs)) if e in set(imgs)]
    rank = {e: i for i, e in enumerate(ref)}
    pi = tuple(rank[y] for y in imgs) if len(rank) == len(imgs) else perm_id(len(imgs))
    return sigma, pi, twisting(A)


def compose_along_tree(O: FinOperad, t: Tree, decoration: Dict[int, str]) -> str:
    """Composition along ``t``: units on edges, symmetries on corollas, then induction at the root."""
    for v in range(len(t.vertices)):
        x = decoration.get(v)
        if x is None or O.ops.get(x) != t.vertex_arity(v):
            raise DecorationMismatch(f"vertex {v} needs an operation of {t.vertex_arity(v)}")
    return _gamma(O, t, t.root, t.leaf_order, decoration)


def _gamma(O: FinOperad, t: Tree, root: int, order: Sequence[int], deco: Dict[int, str]) -> str:
    v = t.above(root)
    if v is None:
        return O.units[t.label(root)]
    ins = t.vertices[v][1]
    planar = _subtree_planar_leaves(t, root, set())
    where = {e: i for i, e in enumerate(planar)}
    parts = []
    for x in ins:
        below_x = set(_subtree_planar_leaves(t, x, set()))
        sub_order = [e for e in order if e in below_x]
        parts.append((x, sub_order))
    if all(t.above(x) is None for x in ins):
        # corolla: the symmetry sending the planar order to the given one
        sg = tuple(where[e] for e in order)
        return O.act(deco[v], sg)
    inner = [_gamma(O, t, x, sub, deco) for x, sub in parts]
    glued = O.comp(deco[v], inner)
    concat = [e for _, sub in parts for e in sub]
    pos = {e: i for i, e in enumerate(concat)}
    return O.act(glued, tuple(pos[e] for e in order))


# the tree operad

def _subtrees_at(T: Tree, r: int) -> List[FrozenSet[int]]:
    """Leaf sets of all subtrees with root ``r`` (the first is the empty subtree)."""
    memo: Dict[int, List[FrozenSet[int]]] = {}

    def grow(e: int) -> List[FrozenSet[int]]:
        if e in memo:
            return memo[e]
        v = T.above(e)
        if v is None:
            res: List[FrozenSet[int]] = []
        else:
            choices = [[frozenset([x])] + grow(x) for x in T.vertices[v][1]]
            res = [frozenset().union(*c) for c in itertools.product(*choices)]
        memo[e] = res
        return res

    return [frozenset([r])] + grow(r)


def op_name(root: int, leaves: Sequence[int]) -> str:
    return f"{root}<{','.join(str(x) for x in leaves)}"


def parse_op_name(name: str) -> Tuple[int, Tuple[int, ...]]:
    r, rest = name.split("<")
    return int(r), tuple(int(x) for x in rest.split(",")) if rest else ()


def subtree_leafsets(T: Tree) -> Dict[int, List[FrozenSet[int]]]:
    return {e: _subtrees_at(T, e) for e in T.edges}


def tree_operad(T: Tree, max_valence: Optional[int] = None) -> FinOperad:
    """``Omega(T)``: colours are the edges, operations are subtrees with ordered leaves."""
    ck = ("omega", max_valence)
    if ck not in T._cache:
        T._cache[ck] = _tree_operad(T, max_valence)
    return T._cache[ck]


def _tree_operad(T: Tree, max_valence: Optional[int]) -> FinOperad:
    sets = subtree_leafsets(T)
    top = max(len(L) for ls in sets.values() for L in ls)
    V = top if max_valence is None else max_valence
    comps: Dict[Signature, List[str]] = {}
    for r, ls in sets.items():
        for L in ls:
            if len(L) > V:
                continue
            for order in itertools.permutations(sorted(L)):
                s = Signature(tuple(str(x) for x in order), str(r))
                comps.setdefault(s, []).append(op_name(r, order))

    def compose_fn(o, ps):
        r, _ = parse_op_name(o)
        if not ps:
            return o
        leaves: List[int] = []
        for p in ps:
            leaves.extend(parse_op_name(p)[1])
        return op_name(r, leaves)

    def act_fn(o, sg):
        r, L = parse_op_name(o)
        return op_name(r, tuple(L[i] for i in sg))

    units = {str(e): op_name(e, (e,)) for e in T.edges}
    return materialize([str(e) for e in T.edges], "symmetric", V, comps, compose_fn, units, act_fn)


# morphism enumeration: operad search and generator closure

def _check_size(T: Tree, bound: int) -> None:
    if len(T.vertices) > bound:
        raise BoundExceeded(f"tree with {len(T.vertices)} vertices exceeds bound {bound}")


def omega_morphisms(T: Tree, U: Tree, labelled: bool = True) -> Set[Tuple[Tuple[int, int], ...]]:
    """Edge maps of all operad morphisms ``Omega(T) -> Omega(U)``, by exhaustive search."""
    P, Q = tree_operad(T), tree_operad(U)
    if P.max_valence > Q.max_valence:
        Q = tree_operad(U, max_valence=P.max_valence)

    def ok(f):
        return not labelled or all(T.label(int(e)) == U.label(int(f[e])) for e in f)

    out = set()
    for phi in enumerate_morphisms(P, Q, colour_filter=ok):
        out.add(tuple(sorted((int(e), int(d)) for e, d in phi.colour_map.items())))
    return out


def _tree_key(t: Tree) -> Tuple:
    return (t.root, tuple(sorted((o, tuple(sorted(ins))) for o, ins in t.vertices)))


def degeneracy_closure(T: Tree) -> List[TreeMorphism]:
    if "degen" not in T._cache:
        T._cache["degen"] = _degeneracy_closure(T)
    return T._cache["degen"]


def _degeneracy_closure(T: Tree) -> List[TreeMorphism]:
    start = TreeMorphism(T, T, tuple((e, e) for e in T.edges))
    seen = {(_tree_key(T), start.key()): start}
    frontier = [start]
    while frontier:
        nxt = []
        for f in frontier:
            D = f.target
            for v, (_, ins) in enumerate(D.vertices):
                if len(ins) != 1 or D.label(ins[0]) != D.label(D.vertices[v][0]):
                    continue
                _, g = degeneracy(D, v)
                h = f.then(g)
                k = (_tree_key(h.target), h.key())
                if k not in seen:
                    seen[k] = h
                    nxt.append(h)
        frontier = nxt
    return [seen[k] for k in sorted(seen)]


def face_closure(U: Tree, outer: bool = True) -> List[TreeMorphism]:
    """All composites of face maps into ``U`` (edge maps are inclusions)."""
    ck = ("faces", outer)
    if ck not in U._cache:
        U._cache[ck] = _face_closure(U, outer)
    return U._cache[ck]


def _face_closure(U: Tree, outer: bool) -> List[TreeMorphism]:
    start = TreeMorphism(U, U, tuple((e, e) for e in U.edges))
    seen = {_tree_key(U): start}
    frontier = [start]
    while frontier:
        nxt = []
        for f in frontier:
            F = f.source
            steps = [inner_face(F, e) for e in F.inner_edges()]
            if outer:
                steps += [outer_face(F, v) for v in range(len(F.vertices)) if prunable(F, v)]
                if F.is_corolla():
                    steps += [edge_face(F, e) for e in F.edges]
            for G, g in steps:
                h = g.then(f)
                k = _tree_key(G)
                if k not in seen:
                    seen[k] = h
                    nxt.append(h)
        frontier = nxt
    return [seen[k] for k in sorted(seen)]


def generator_closure(T: Tree, U: Tree, labelled: bool = True, outer: bool = True) -> Dict[Tuple, TreeMorphism]:
    """Composites degeneracies, then an isomorphism, then faces, from ``T`` to ``U``."""
    out: Dict[Tuple, TreeMorphism] = {}
    faces = face_closure(U, outer)
    for d in degeneracy_closure(T):
        D = d.target
        for f in faces:
            F = f.source
            for iso in isomorphisms(D, F):
                step = TreeMorphism(D, F, tuple(sorted(iso.items())), (("iso", tuple(sorted(iso.items()))),))
                h = d.then(step).then(f)
                if labelled and any(T.label(e) != U.label(x) for e, x in h.edge_map):
                    continue
                out.setdefault(h.key(), h)
    return out


def enumerate_tree_morphisms(T: Tree, U: Tree, bound: int = 5, labelled: bool = True) -> List[TreeMorphism]:
    """Operad morphisms ``Omega(T) -> Omega(U)``, each carrying a generator word."""
    _check_size(T, bound)
    _check_size(U, bound)
    words = generator_closure(T, U, labelled)
    out = []
    for key in sorted(omega_morphisms(T, U, labelled)):
        w = words.get(key)
        out.append(w if w is not None else TreeMorphism(T, U, key))
    return out


# enumeration of trees

def _planar_shapes(colour: str, colours: Sequence[str], marks: Sequence[str], vbudget: int,
                   lbudget: int, memo) -> List[Tuple]:
    """Planar trees ``(shape, vertices, leaf colours)`` with root colour ``colour``."""
    key = (colour, vbudget, lbudget)
    if key in memo:
        return memo[key]
    res: List[Tuple] = []
    if lbudget >= 1:
        res.append((("|", colour), 0, (colour,)))
    if vbudget >= 1:
        max_arity = lbudget + vbudget - 1
        for n in range(0, max_arity + 1):
            for ins in itertools.product(colours, repeat=n):
                for mk in marks:
                    for kids in _forests(ins, colours, marks, vbudget - 1, lbudget, memo):
                        shapes, vs, ls = kids
                        res.append(((mk, colour, shapes), vs + 1, ls))
    memo[key] = res
    return res


def _forests(ins, colours, marks, vbudget, lbudget, memo):
    if not ins:
        yield ((), 0, ())
        return
    for head, hv, hl in _planar_shapes(ins[0], colours, marks, vbudget, lbudget, memo):
        for tail, tv, tl in _forests(ins[1:], colours, marks, vbudget - hv, lbudget - len(hl), memo):
            yield ((head,) + tail, hv + tv, hl + tl)


def shape_to_tree(shape: Tuple, leaf_order_positions: Optional[Sequence[int]] = None) -> Tree:
    """Build a tree from a nested planar shape; positions index planar leaves."""
    verts: List[Vertex] = []
    marks: List[str] = []
    labels: List[Tuple[int, str]] = []
    leaves: List[int] = []
    counter = [0]

    def build(sh) -> int:
        e = counter[0]
        counter[0] += 1
        if sh[0] == "|":
            labels.append((e, sh[1]))
            leaves.append(e)
            return e
        mk, col, kids = sh
        labels.append((e, col))
        slot = len(verts)
        verts.append((e, ()))
        marks.append(mk)
        ins = tuple(build(k) for k in kids)
        verts[slot] = (e, ins)
        return e

    root = build(shape)
    order = tuple(leaves[i] for i in leaf_order_positions) if leaf_order_positions is not None else ()
    return Tree(root, tuple(verts), tuple(sorted(labels)), tuple(marks), order)


def leaf_orders_for(planar_colours: Sequence[str], target: Sequence[str]) -> List[Tuple[int, ...]]:
    """Bijections (as position lists) reading ``planar_colours`` in the order ``target``."""
    n = len(target)
    if sorted(planar_colours) != sorted(target):
        return []
    out = []

    def rec(j: int, used: Tuple[int, ...]):
        if j == n:
            out.append(used)
            return
        for i in range(n):
            if i not in used and planar_colours[i] == target[j]:
                rec(j + 1, used + (i,))

    rec(0, ())
    return out


def enumerate_trees(colours: Sequence[str], arity: Signature, marks: Sequence[str],
                    max_vertices: int) -> Iterator[Tree]:
    """One planar representative per canonical form with the given arity."""
    memo: Dict = {}
    cols = sorted(colours)
    for shape, _, ls in _planar_shapes(arity.output, cols, sorted(marks), max_vertices,
                                       arity.valence, memo):
        if len(ls) != arity.valence:
            continue
        for order in leaf_orders_for(ls, arity.inputs):
            yield shape_to_tree(shape, order)


def enumerate_shapes(colours: Sequence[str], max_vertices: int, max_arity: int,
                     marks: Sequence[str] = (DEFAULT_MARK,), root_colours: Optional[Sequence[str]] = None,
                     max_leaves: int = 6) -> Iterator[Tree]:
    """Planar trees with bounded vertex count and vertex arity, planar leaf order."""
    cols = sorted(colours)

    def gen(colour: str, vb: int) -> Iterator[Tuple[Tuple, int]]:
        yield ("|", colour), 0
        if vb < 1:
            return
        for n in range(0, max_arity + 1):
            for ins in itertools.product(cols, repeat=n):
                for mk in marks:
                    yield from ((((mk, colour, kids)), used + 1) for kids, used in forest(ins, vb - 1))

    def forest(ins, vb):
        if not ins:
            yield (), 0
            return
        for head, hv in gen(ins[0], vb):
            for tail, tv in forest(ins[1:], vb - hv):
                yield (head,) + tail, hv + tv

    for rc in (root_colours or cols):
        for shape, _ in gen(rc, max_vertices):
            t = shape_to_tree(shape)
            if len(t.leaf_order) <= max_leaves:
                yield t


# the operad of operads

def _vertex_order_matches(t: Tree, v: int, s: Signature) -> bool:
    return t.vertex_arity(v) == s


def operad_of_operads_component(colours: Sequence[str], inputs: Sequence[Signature],
                                output: Signature) -> List[Tree]:
    """Trees with vertices marked ``1..k`` realizing ``inputs`` and arity ``output``."""
    k = len(inputs)
    marks = [str(i + 1) for i in range(k)]
    out: Dict[Tuple, Tree] = {}
    for t in enumerate_trees(colours, output, marks, k):
        if len(t.vertices) != k or sorted(t.marks) != sorted(marks):
            continue
        if all(t.vertex_arity(v) == inputs[int(t.marks[v]) - 1] for v in range(k)):
            key = canonical_key(t, planar=True)
            out.setdefault(key, canonicalize(t, planar=True)[1])
    return [out[key] for key in sorted(out)]


def substitute(t: Tree, subs: Sequence[Tree]) -> Tree:
    """Insert ``subs[i]`` into the vertex of ``t`` marked ``i+1``; marks are renumbered."""
    offset = [0]
    for S in subs:
        offset.append(offset[-1] + len(S.vertices))
    parent: Dict[int, int] = {}

    def find(x: int) -> int:
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    labels = dict(t.labels)
    nxt = max(t.edges) + 1
    verts: List[Tuple[Vertex, str]] = []
    for v, (out, ins) in enumerate(t.vertices):
        i = int(t.marks[v]) - 1
        S = subs[i]
        if S.arity() != t.vertex_arity(v):
            raise ArityMismatch(f"tree of arity {S.arity()} cannot fill vertex of arity {t.vertex_arity(v)}")
        f: Dict[int, int] = {S.root: out}
        for j, leaf in enumerate(S.leaf_order):
            if leaf == S.root:
                parent[find(ins[j])] = find(out)
            else:
                f[leaf] = ins[j]
        for e in S.edges:
            if e not in f:
                f[e] = nxt
                labels[nxt] = S.label(e)
                nxt += 1
        for w, (o, xs) in enumerate(S.vertices):
            verts.append(((f[o], tuple(f[x] for x in xs)), str(offset[i] + int(S.marks[w]))))
    vs = tuple((find(o), tuple(find(x) for x in xs)) for (o, xs), _ in verts)
    used = {find(t.root)} | {x for o, xs in vs for x in (o,) + xs}
    return Tree(find(t.root), vs, tuple(sorted((e, labels[e]) for e in used)),
                tuple(mk for _, mk in verts), tuple(find(e) for e in t.leaf_order))


def operad_of_operads(colours: Sequence[str], signatures: Sequence[Signature], max_vertices: int) -> FinOperad:
    """A truncation of the operad whose algebras are operads, over chosen signatures."""
    sigs = sorted(set(signatures))
    names = {s: f"s{i}" for i, s in enumerate(sigs)}
    by_name = {v: k for k, v in names.items()}
    comps: Dict[Signature, List[str]] = {}
    trees: Dict[str, Tree] = {}
    for k in range(0, max_vertices + 1):
        for ins in itertools.product(sigs, repeat=k):
            for s in sigs:
                ts = operad_of_operads_component(colours, list(ins), s)
                if not ts:
                    continue
                key = Signature(tuple(names[x] for x in ins), names[s])
                lst = comps.setdefault(key, [])
                for t in ts:
                    nm = f"t{len(trees)}"
                    trees[nm] = t
                    lst.append(nm)
    index = {canonical_key(t, planar=True): nm for nm, t in trees.items()}

    def lookup(t: Tree) -> Optional[str]:
        return index.get(canonical_key(t, planar=True))

    def compose_fn(o, ps):
        return lookup(substitute(trees[o], [trees[p] for p in ps]))

    def act_fn(o, sg):
        t = trees[o]
        # vertex now numbered j was numbered sg[j]
        inv = perm_inv(sg)
        return lookup(t.replace(marks=tuple(str(inv[int(m) - 1] + 1) for m in t.marks)))

    units = {}
    for s in sigs:
        c = corolla(s.inputs, s.output, mark="1")
        units[names[s]] = lookup(c)
    O = materialize([names[s] for s in sigs], "symmetric", max_vertices, comps, compose_fn, units, act_fn)
    object.__setattr__(O, "_trees", trees)
    object.__setattr__(O, "_sig_names", by_name)
    return O
