"""Independent oracles shared by the colimit, model and acceptance tests."""

import itertools

from operadforge.core import MultiGraph, all_perms, all_signatures, perm_id
from operadforge.freeops import free_operad


def congruence_pushout(span, bound):
    """Push-out of a one-fiber span as a congruence on trees of the free operad on both legs.

    The generators are the non-unit operations of both legs; relations are
    composition, symmetry and gluing along the apex.  The congruence is closed
    under partial composition and the symmetric action within ``bound`` vertices.
    Returns ``(trees by signature, find)``.
    """
    X, Y = span.left.target, span.right.target
    V = min(X.max_valence, Y.max_valence)
    pieces = (("x", X), ("y", Y))
    comps = {}
    for tag, P in pieces:
        units = set(P.units.values())
        for o, s in sorted(P.ops.items()):
            if o not in units and s.valence <= V:
                comps.setdefault(s, []).append(f"{tag}.{o}")
    K = MultiGraph(X.colours, {s: tuple(v) for s, v in comps.items()}, X.variant)
    F = free_operad(K)
    trees = {}
    for s in all_signatures(X.colours, V, X.variant == "reduced"):
        trees[s] = list(F.component(s, bound).trees)
    alive = {t for ts in trees.values() for t in ts}
    parent = {t: t for t in alive}

    def find(t):
        while parent[t] != t:
            parent[t] = parent[parent[t]]
            t = parent[t]
        return t

    def union(a, b):
        a, b = find(a), find(b)
        if a == b:
            return False
        parent[a] = b
        return True

    def elem(tag, P, o):
        if o in set(P.units.values()):
            return F.unit(P.ops[o].output)
        return F.generator(f"{tag}.{o}")

    for tag, P in pieces:
        for (o, ps), r in P.compose.items():
            if max([P.ops[r].valence, P.ops[o].valence] + [P.ops[q].valence for q in ps]) > V:
                continue
            t = F.compose(elem(tag, P, o), [elem(tag, P, q) for q in ps])
            if t in alive:
                union(t, elem(tag, P, r))
        for (o, sg), r in P.symmetry.items():
            if P.ops[o].valence <= V:
                union(F.act(elem(tag, P, o), sg), elem(tag, P, r))
    for q in span.apex.ops:
        union(elem("x", X, span.left(q)), elem("y", Y, span.right(q)))
    # partial compositions inside the bound
    partial = []
    for t in alive:
        s = t.arity
        for i, c in enumerate(s.inputs):
            for S2, us in trees.items():
                if S2.output != c or s.valence - 1 + S2.valence > V:
                    continue
                for u in us:
                    args = [F.unit(d) for d in s.inputs]
                    args[i] = u
                    r = F.compose(t, args)
                    if r in alive:
                        partial.append((t, i, u, r))
    changed = True
    while changed:
        changed = False
        seen = {}
        for t, i, u, r in partial:
            key = (find(t), i, find(u))
            if key in seen:
                changed |= union(seen[key], r)
            else:
                seen[key] = r
        if X.variant != "nonsymmetric":
            seen = {}
            for t in alive:
                for sg in all_perms(t.arity.valence):
                    key = (find(t), sg)
                    r = F.act(t, sg)
                    if key in seen:
                        changed |= union(seen[key], r)
                    else:
                        seen[key] = r
    return trees, find


def congruence_class_counts(span, bound):
    """Class counts per signature of the congruence oracle."""
    trees, find = congruence_pushout(span, bound)
    return {s: len({find(t) for t in ts}) for s, ts in trees.items()}


def brute_marked_shapes(colour, leaves, k, x_arities, k_arity=2, parent_x=False):
    """Planar marked shapes with ``leaves`` leaves and exactly ``k`` K-vertices, no two X-vertices adjacent."""
    out = []
    if leaves == 1 and k == 0:
        out.append(("|", colour))
    opts = [("K", k_arity)] + ([] if parent_x else [("X", a) for a in x_arities])
    for mk, a in opts:
        kk = k - (mk == "K")
        if kk < 0:
            continue
        if a == 0:
            if leaves == 0 and kk == 0:
                out.append((mk, colour, ()))
            continue
        for ls in itertools.product(range(leaves + 1), repeat=a):
            if sum(ls) != leaves:
                continue
            for ks in itertools.product(range(kk + 1), repeat=a):
                if sum(ks) != kk:
                    continue
                subs = [brute_marked_shapes(colour, l, q, x_arities, k_arity, mk == "X") for l, q in zip(ls, ks)]
                for kids in itertools.product(*subs):
                    out.append((mk, colour, kids))
    return out


def orbit_count(P, S):
    """Number of orbits of the symmetric action on ``P(S)`` by stabilizer-free counting."""
    seen = set()
    n = 0
    for o in sorted(P.component(S)):
        if o in seen:
            continue
        n += 1
        for sg in all_perms(S.valence):
            if sg != perm_id(S.valence):
                seen.add(P.act(o, sg))
        seen.add(o)
    return n
