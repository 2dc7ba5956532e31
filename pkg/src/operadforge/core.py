"""Finite coloured operads, morphisms and algebras over finite sets.

Permutations are tuples ``sigma`` with ``sigma[j]`` the image of ``j``; they
compose as functions, ``(s * t)[i] = s[t[i]]``.  For a signature
``s = (c_0, ..., c_{n-1}; c)`` we write ``s.act(sigma)`` for
``(c_sigma(0), ..., c_sigma(n-1); c)``.  The symmetry ``sigma^*`` sends
``O(s)`` to ``O(s.act(sigma))`` and obeys ``(s*t)^* = t^* sigma^*``, i.e. it is a
right action ``x . sigma``.
"""

from __future__ import annotations

import itertools
import os
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .errors import (
    CarrierMismatch,
    NonComposable,
    NotInjective,
    OutOfBound,
    SearchBudgetExceeded,
    SignatureMismatch,
    UnknownBuiltin,
)

Perm = Tuple[int, ...]
VARIANTS = ("symmetric", "nonsymmetric", "reduced")
COLOUR_RE = re.compile(r"^[A-Za-z0-9_]+$")
DEFAULT_BUDGET = 2_000_000


# permutations

def perm_id(n: int) -> Perm:
    return tuple(range(n))


def perm_mul(s: Perm, t: Perm) -> Perm:
    return tuple(s[i] for i in t)


def perm_inv(s: Perm) -> Perm:
    out = [0] * len(s)
    for i, j in enumerate(s):
        out[j] = i
    return tuple(out)


def all_perms(n: int) -> List[Perm]:
    return [tuple(p) for p in itertools.permutations(range(n))]


def adjacent_transpositions(n: int) -> List[Perm]:
    out = []
    for i in range(n - 1):
        p = list(range(n))
        p[i], p[i + 1] = p[i + 1], p[i]
        out.append(tuple(p))
    return out


def block_perm(sigma: Perm, sizes: Sequence[int]) -> Perm:
    """Permutation moving block ``sigma[m]`` of ``sizes`` to position ``m``."""
    starts = [0]
    for k in sizes:
        starts.append(starts[-1] + k)
    out: List[int] = []
    for m in range(len(sigma)):
        b = sigma[m]
        out.extend(range(starts[b], starts[b] + sizes[b]))
    return tuple(out)


def direct_sum(perms: Sequence[Perm]) -> Perm:
    out: List[int] = []
    off = 0
    for p in perms:
        out.extend(off + i for i in p)
        off += len(p)
    return tuple(out)


# signatures

@dataclass(frozen=True, order=True)
class Signature:
    inputs: Tuple[str, ...]
    output: str

    @property
    def valence(self) -> int:
        return len(self.inputs)

    def act(self, sigma: Perm) -> "Signature":
        return Signature(tuple(self.inputs[i] for i in sigma), self.output)

    def rename(self, f: Dict[str, str]) -> "Signature":
        return Signature(tuple(f[c] for c in self.inputs), f[self.output])

    def colours(self) -> Tuple[str, ...]:
        return self.inputs + (self.output,)

    def __str__(self) -> str:
        return ",".join(self.inputs) + "->" + self.output

    @classmethod
    def parse(cls, text: str) -> "Signature":
        if "->" not in text:
            raise ValueError(f"bad signature {text!r}")
        left, out = text.split("->")
        ins = tuple(left.split(",")) if left else ()
        return cls(ins, out)


def sig(inputs: Iterable[str], output: str) -> Signature:
    return Signature(tuple(inputs), output)


def sig_key(s: Signature):
    return (s.valence, s.inputs, s.output)


def compose_signatures(s: Signature, ts: Sequence[Signature]) -> Signature:
    if len(ts) != s.valence:
        raise NonComposable(f"{s} expects {s.valence} inputs, got {len(ts)}")
    ins: List[str] = []
    for c, t in zip(s.inputs, ts):
        if t.output != c:
            raise NonComposable(f"root {t.output} does not match input {c}")
        ins.extend(t.inputs)
    return Signature(tuple(ins), s.output)


def all_signatures(colours: Sequence[str], max_valence: int, reduced: bool = False) -> Iterator[Signature]:
    cs = sorted(colours)
    for n in range(1 if reduced else 0, max_valence + 1):
        for ins in itertools.product(cs, repeat=n):
            for out in cs:
                yield Signature(ins, out)


# operads

@dataclass(frozen=True, eq=False)
class FinOperad:
    """A finite coloured operad with explicit structure tables.

    ``components`` is stored sparsely; ``component`` is total on every
    signature of valence at most ``max_valence`` and raises ``OutOfBound``
    beyond it.
    """

    colours: Tuple[str, ...]
    variant: str
    max_valence: int
    ops: Dict[str, Signature]
    compose: Dict[Tuple[str, Tuple[str, ...]], str]
    symmetry: Dict[Tuple[str, Perm], str]
    units: Dict[str, str]
    components: Dict[Signature, Tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant}")
        if not self.components:
            comps: Dict[Signature, List[str]] = {}
            for o in sorted(self.ops):
                comps.setdefault(self.ops[o], []).append(o)
            object.__setattr__(self, "components", {s: tuple(v) for s, v in comps.items()})

    @property
    def symmetric(self) -> bool:
        return self.variant != "nonsymmetric"

    def component(self, s: Signature) -> Tuple[str, ...]:
        if s.valence > self.max_valence:
            raise OutOfBound(f"{s} exceeds valence bound {self.max_valence}")
        return self.components.get(s, ())

    def signatures(self) -> Iterator[Signature]:
        return all_signatures(self.colours, self.max_valence, self.variant == "reduced")

    def sig_of(self, op: str) -> Signature:
        return self.ops[op]

    def comp(self, o: str, ps: Sequence[str]) -> str:
        key = (o, tuple(ps))
        if key not in self.compose:
            s = self.ops[o]
            compose_signatures(s, [self.ops[p] for p in ps])
            raise OutOfBound(f"composite of {o} beyond the materialized tables")
        return self.compose[key]

    def partial(self, o: str, i: int, p: str) -> str:
        s = self.ops[o]
        args = [self.units[c] for c in s.inputs]
        args[i] = p
        return self.comp(o, args)

    def act(self, o: str, sigma: Perm) -> str:
        if sigma == perm_id(len(sigma)):
            return o
        return self.symmetry[(o, tuple(sigma))]

    def size(self) -> int:
        return len(self.ops)


def composable_tuples(O: FinOperad, o: str, budget: Optional[int] = None) -> Iterator[Tuple[str, ...]]:
    """Tuples ``ps`` composable with ``o`` whose composite valence is within ``budget``."""
    if budget is None:
        budget = O.max_valence
    by_out = _ops_by_output(O)
    ins = O.ops[o].inputs

    def rec(i: int, left: int) -> Iterator[Tuple[str, ...]]:
        if i == len(ins):
            yield ()
            return
        for p, v in by_out.get(ins[i], ()):
            if v <= left:
                for rest in rec(i + 1, left - v):
                    yield (p,) + rest

    yield from rec(0, budget)


def _ops_by_output(O: FinOperad) -> Dict[str, List[Tuple[str, int]]]:
    hit = O.__dict__.get("_by_out")
    if hit is None:
        hit = {}
        for p in sorted(O.ops, key=lambda q: (O.ops[q].valence, q)):
            hit.setdefault(O.ops[p].output, []).append((p, O.ops[p].valence))
        object.__setattr__(O, "_by_out", hit)
    return hit


def materialize(colours: Sequence[str], variant: str, max_valence: int,
                components: Dict[Signature, Sequence[str]], compose_fn, units: Dict[str, str],
                act_fn=None) -> FinOperad:
    """Build full tables from structure functions, truncated at ``max_valence``."""
    ops: Dict[str, Signature] = {}
    for s, xs in components.items():
        if s.valence > max_valence or (variant == "reduced" and s.valence == 0):
            continue
        for x in xs:
            if x in ops:
                raise ValueError(f"operation id {x} used twice")
            ops[x] = s
    skeleton = FinOperad(tuple(sorted(colours)), variant, max_valence, ops, {}, {}, dict(units))
    compose: Dict[Tuple[str, Tuple[str, ...]], str] = {}
    for o in sorted(ops):
        for ps in composable_tuples(skeleton, o):
            r = compose_fn(o, ps)
            if r is not None:
                compose[(o, ps)] = r
    symmetry: Dict[Tuple[str, Perm], str] = {}
    if variant != "nonsymmetric" and act_fn is not None:
        for o in sorted(ops):
            n = ops[o].valence
            for sg in all_perms(n):
                if sg != perm_id(n):
                    symmetry[(o, sg)] = act_fn(o, sg)
    return FinOperad(skeleton.colours, variant, max_valence, ops, compose, symmetry, dict(units))


# reports

@dataclass
class AxiomReport:
    violations: List[Tuple[str, str]] = field(default_factory=list)
    checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def add(self, kind: str, detail: str) -> None:
        self.violations.append((kind, detail))

    def kinds(self) -> set:
        return {k for k, _ in self.violations}

    def __str__(self) -> str:
        if self.passed:
            return f"pass ({self.checked} instances)"
        return "\n".join(f"{k}: {d}" for k, d in self.violations)


def validate_operad(O: FinOperad, max_valence: Optional[int] = None, limit: int = 50) -> AxiomReport:
    """Exhaustively check typing, unitality, associativity and equivariance up to ``max_valence``."""
    V = O.max_valence if max_valence is None else min(max_valence, O.max_valence)
    rep = AxiomReport()

    def bad(kind: str, detail: str) -> bool:
        rep.add(kind, detail)
        return len(rep.violations) >= limit

    for s, xs in O.components.items():
        for x in xs:
            if O.ops.get(x) != s:
                if bad("typing", f"{x} listed at {s}"):
                    return rep
    if O.variant == "reduced":
        for o, s in O.ops.items():
            if s.valence == 0:
                if bad("reduced", f"valence-0 operation {o}"):
                    return rep
    for c in O.colours:
        u = O.units.get(c)
        if u is None or O.ops.get(u) != Signature((c,), c):
            if bad("unit", f"missing unit at {c}"):
                return rep
    if rep.violations:
        return rep

    ops = [o for o in sorted(O.ops) if O.ops[o].valence <= V]
    # totality and typing of composition
    for o in ops:
        s = O.ops[o]
        for ps in composable_tuples(O, o, V):
            rep.checked += 1
            r = O.compose.get((o, ps))
            target = compose_signatures(s, [O.ops[p] for p in ps])
            if r is None:
                if bad("compose", f"missing {o}({','.join(ps)})"):
                    return rep
            elif O.ops.get(r) != target:
                if bad("compose", f"{o}({','.join(ps)}) = {r} not in {target}"):
                    return rep
    if rep.violations:
        return rep

    # unitality
    for o in ops:
        s = O.ops[o]
        rep.checked += 2
        if O.compose[(O.units[s.output], (o,))] != o:
            if bad("unit", f"left unit fails on {o}"):
                return rep
        if O.compose[(o, tuple(O.units[c] for c in s.inputs))] != o:
            if bad("unit", f"right unit fails on {o}"):
                return rep

    # associativity
    for o in ops:
        for ps in composable_tuples(O, o, V):
            mid = O.compose[(o, ps)]
            for qs in composable_tuples(O, mid, V):
                rep.checked += 1
                lhs = O.compose[(mid, qs)]
                inner = []
                pos = 0
                for p in ps:
                    k = O.ops[p].valence
                    inner.append(O.compose[(p, qs[pos:pos + k])])
                    pos += k
                rhs = O.compose[(o, tuple(inner))]
                if lhs != rhs:
                    if bad("associativity", f"{o}|{ps}|{qs}: {lhs} != {rhs}"):
                        return rep

    if O.variant == "nonsymmetric":
        if O.symmetry and bad("symmetry", "nonsymmetric operad carries a symmetry table"):
            return rep
        return rep

    # symmetric group action
    for o in ops:
        s = O.ops[o]
        n = s.valence
        for sg in all_perms(n):
            if sg == perm_id(n):
                continue
            rep.checked += 1
            r = O.symmetry.get((o, sg))
            if r is None or O.ops.get(r) != s.act(sg):
                if bad("symmetry", f"{sg}^* of {o} missing or mistyped"):
                    return rep
    if rep.violations:
        return rep
    for o in ops:
        n = O.ops[o].valence
        for sg in all_perms(n):
            x = O.act(o, sg)
            for t in adjacent_transpositions(n):
                rep.checked += 1
                if O.act(o, perm_mul(sg, t)) != O.act(x, t):
                    if bad("symmetry", f"action law fails on {o} at {sg},{t}"):
                        return rep

    # equivariance (generators suffice once the action law holds)
    for o in ops:
        n = O.ops[o].valence
        for ps in composable_tuples(O, o, V):
            base = O.compose[(o, ps)]
            sizes = [O.ops[p].valence for p in ps]
            for t in adjacent_transpositions(n):
                rep.checked += 1
                lhs = O.compose[(O.act(o, t), tuple(ps[t[m]] for m in range(n)))]
                rhs = O.act(base, block_perm(t, sizes))
                if lhs != rhs:
                    if bad("equivariance", f"block: {o}{ps} under {t}"):
                        return rep
            for i, p in enumerate(ps):
                for t in adjacent_transpositions(sizes[i]):
                    rep.checked += 1
                    qs = list(ps)
                    qs[i] = O.act(p, t)
                    lhs = O.compose[(o, tuple(qs))]
                    taus = [perm_id(k) for k in sizes]
                    taus[i] = t
                    rhs = O.act(base, direct_sum(taus))
                    if lhs != rhs:
                        if bad("equivariance", f"sum: {o}{ps} at {i} under {t}"):
                            return rep
    return rep


# morphisms

@dataclass(frozen=True, eq=False)
class OperadMorphism:
    source: FinOperad
    target: FinOperad
    colour_map: Dict[str, str]
    op_map: Dict[str, str]

    def __call__(self, op: str) -> str:
        return self.op_map[op]

    def on_sig(self, s: Signature) -> Signature:
        return s.rename(self.colour_map)

    def key(self) -> Tuple:
        return (tuple(sorted(self.colour_map.items())), tuple(sorted(self.op_map.items())))

    def __eq__(self, other) -> bool:
        return isinstance(other, OperadMorphism) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())


def identity_morphism(P: FinOperad) -> OperadMorphism:
    return OperadMorphism(P, P, {c: c for c in P.colours}, {o: o for o in P.ops})


def compose_morphisms(g: OperadMorphism, f: OperadMorphism) -> OperadMorphism:
    """The composite ``g . f``."""
    return OperadMorphism(
        f.source, g.target,
        {c: g.colour_map[f.colour_map[c]] for c in f.source.colours},
        {o: g.op_map[f.op_map[o]] for o in f.source.ops},
    )


def validate_morphism(phi: OperadMorphism, max_valence: Optional[int] = None, limit: int = 50) -> AxiomReport:
    P, Q = phi.source, phi.target
    rep = AxiomReport()
    for c in P.colours:
        if c not in phi.colour_map:
            raise SignatureMismatch(f"colour {c} not mapped")
        if phi.colour_map[c] not in Q.colours:
            raise SignatureMismatch(f"colour {c} mapped outside target")
    for o in phi.op_map:
        if o not in P.ops:
            raise SignatureMismatch(f"component indexed by unknown operation {o}")
    V = P.max_valence if max_valence is None else min(max_valence, P.max_valence)

    def bad(kind: str, detail: str) -> bool:
        rep.add(kind, detail)
        return len(rep.violations) >= limit

    ops = [o for o in sorted(P.ops) if P.ops[o].valence <= V]
    for o in ops:
        rep.checked += 1
        x = phi.op_map.get(o)
        if x is None or Q.ops.get(x) != phi.on_sig(P.ops[o]):
            if bad("typing", f"{o} -> {x} does not land in {phi.on_sig(P.ops[o])}"):
                return rep
    if rep.violations:
        return rep
    for c in P.colours:
        rep.checked += 1
        if phi.op_map[P.units[c]] != Q.units[phi.colour_map[c]]:
            if bad("unit", f"unit of {c} not preserved"):
                return rep
    for (o, ps), r in sorted(P.compose.items()):
        if P.ops[r].valence > V:
            continue
        rep.checked += 1
        img = Q.compose.get((phi.op_map[o], tuple(phi.op_map[p] for p in ps)))
        if img != phi.op_map[r]:
            if bad("compose", f"{o}{ps}: {phi.op_map[r]} != {img}"):
                return rep
    if P.symmetric:
        for (o, sg), r in sorted(P.symmetry.items()):
            if P.ops[r].valence > V:
                continue
            rep.checked += 1
            if Q.act(phi.op_map[o], sg) != phi.op_map[r]:
                if bad("symmetry", f"{sg}^*{o} not preserved"):
                    return rep
    return rep


def _budget() -> int:
    raw = os.environ.get("OPERADFORGE_BUDGET")
    return int(raw) if raw else DEFAULT_BUDGET


def enumerate_morphisms(P: FinOperad, Q: FinOperad, colour_map: Optional[Dict[str, str]] = None,
                        fixed: Optional[Dict[str, str]] = None, budget: Optional[int] = None,
                        colour_filter=None) -> Iterator[OperadMorphism]:
    """All operad morphisms ``P -> Q`` extending the given partial data, in a fixed order.

    The search assigns colours first, then operations by constraint propagation
    through the composition, symmetry and unit tables of ``P``.
    """
    budget = _budget() if budget is None else budget
    counter = [0]
    colour_map = dict(colour_map or {})
    fixed = dict(fixed or {})
    free_cols = _colour_order(P, [c for c in P.colours if c not in colour_map])
    top = max((s.valence for s in P.ops.values()), default=0)
    if top > Q.max_valence:
        raise OutOfBound(f"source valence {top} exceeds target bound {Q.max_valence}")

    # constraints: (inputs, kind, payload, result)
    watch: Dict[str, List[Tuple]] = {o: [] for o in P.ops}
    for (o, ps), r in P.compose.items():
        if not ps:
            continue
        con = ((o,) + ps, "c", None, r)
        for x in set(con[0]):
            watch[x].append(con)
    if P.symmetric and Q.symmetric:
        for (o, sg), r in P.symmetry.items():
            con = ((o,), "s", sg, r)
            watch[o].append(con)
    order = sorted(P.ops, key=lambda o: (P.ops[o].valence, o))

    def evaluate(con, a: Dict[str, str]) -> Optional[str]:
        ins, kind, payload, _ = con
        if kind == "c":
            return Q.compose.get((a[ins[0]], tuple(a[x] for x in ins[1:])), "")
        return Q.symmetry.get((a[ins[0]], payload), "")

    def propagate(a: Dict[str, str], queue: List[str], domain) -> bool:
        while queue:
            x = queue.pop()
            for con in watch[x]:
                if all(i in a for i in con[0]):
                    val = evaluate(con, a)
                    r = con[3]
                    if not val:
                        return False
                    if r in a:
                        if a[r] != val:
                            return False
                    else:
                        if val not in domain(r):
                            return False
                        a[r] = val
                        queue.append(r)
        return True

    # colours are assigned one at a time; a signature is checked once all its colours are known
    sigs = sorted({s for s in P.ops.values()}, key=sig_key)
    rank = {c: i for i, c in enumerate(free_cols)}
    due: Dict[int, List[Signature]] = {}
    for s in sigs:
        last = max((rank[c] for c in s.colours() if c in rank), default=-1)
        due.setdefault(last, []).append(s)
    qcols = sorted(Q.colours)
    inhabited = {(s.inputs, s.output) for s, xs in Q.components.items() if xs}
    due_raw = {i: [(s.inputs, s.output) for s in ss] for i, ss in due.items()}

    def fits(i: int, f: Dict[str, str]) -> bool:
        return all((tuple(f[c] for c in ins), f[out]) in inhabited for ins, out in due_raw.get(i, ()))

    def colour_maps(i: int, f: Dict[str, str]) -> Iterator[Dict[str, str]]:
        if i == len(free_cols):
            if colour_filter is None or colour_filter(f):
                yield dict(f)
            return
        for d in qcols:
            f[free_cols[i]] = d
            counter[0] += 1
            if counter[0] > budget:
                raise SearchBudgetExceeded(counter[0])
            if fits(i, f):
                yield from colour_maps(i + 1, f)
        f.pop(free_cols[i], None)

    if not fits(-1, colour_map):
        return
    for f in colour_maps(0, dict(colour_map)):
        domains: Dict[Signature, frozenset] = {}

        def domain(o: str, f=f, domains=domains) -> frozenset:
            s = P.ops[o]
            d = domains.get(s)
            if d is None:
                d = frozenset(Q.component(s.rename(f)))
                domains[s] = d
            return d

        if any(not domain(o) for o in P.ops):
            continue
        a: Dict[str, str] = {}
        ok = True
        queue: List[str] = []
        for c in P.colours:
            u, v = P.units[c], Q.units[f[c]]
            if u in fixed and fixed[u] != v:
                ok = False
                break
            a[u] = v
            queue.append(u)
        for o, v in fixed.items():
            if v not in domain(o) or (o in a and a[o] != v):
                ok = False
                break
            a[o] = v
            queue.append(o)
        if not ok or not propagate(a, queue, domain):
            continue

        def search(a: Dict[str, str], f=f, domain=domain) -> Iterator[OperadMorphism]:
            counter[0] += 1
            if counter[0] > budget:
                raise SearchBudgetExceeded(counter[0])
            nxt = next((o for o in order if o not in a), None)
            if nxt is None:
                yield OperadMorphism(P, Q, dict(f), dict(a))
                return
            for v in sorted(domain(nxt)):
                b = dict(a)
                b[nxt] = v
                if propagate(b, [nxt], domain):
                    yield from search(b)

        yield from search(a)


def _colour_order(P: FinOperad, cols: List[str]) -> List[str]:
    """Breadth-first order along low-valence operations, so constraints bite early."""
    adj: Dict[str, set] = {c: set() for c in cols}
    for s in sorted(set(P.ops.values()), key=sig_key):
        cs = [c for c in s.colours() if c in adj]
        for a in cs:
            adj[a].update(x for x in cs if x != a)
    out: List[str] = []
    seen: set = set()
    for start in cols:
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        while queue:
            c = queue.pop(0)
            out.append(c)
            for d in sorted(adj[c]):
                if d not in seen:
                    seen.add(d)
                    queue.append(d)
    return out


def find_isomorphism(P: FinOperad, Q: FinOperad) -> Optional[OperadMorphism]:
    """The componentwise-bijection comparator: an invertible morphism, if any."""
    if len(P.colours) != len(Q.colours) or len(P.ops) != len(Q.ops) or P.variant != Q.variant:
        return None
    for phi in enumerate_morphisms(P, Q, colour_filter=lambda f: len(set(f.values())) == len(f)):
        if len(set(phi.op_map.values())) == len(P.ops):
            return phi
    return None


def component_profile(P: FinOperad) -> Dict[Signature, int]:
    return {s: len(xs) for s, xs in P.components.items() if xs}


# images

def _fresh(base: str, taken) -> str:
    name = base
    k = 0
    while name in taken:
        k += 1
        name = f"{base}_{k}"
    return name


def inverse_image(f: Dict[str, str], O: FinOperad, colours: Optional[Sequence[str]] = None,
                  max_valence: Optional[int] = None) -> FinOperad:
    """``f^*O`` with ``(f^*O)(s) = O(f(s))``; operation ``x`` at ``s`` is named ``x@s``."""
    cols = tuple(sorted(colours if colours is not None else f.keys()))
    V = O.max_valence if max_valence is None else min(max_valence, O.max_valence)
    comps: Dict[Signature, List[str]] = {}
    back: Dict[str, Tuple[str, Signature]] = {}
    for s in all_signatures(cols, V, O.variant == "reduced"):
        xs = O.component(s.rename(f))
        if xs:
            names = []
            for x in xs:
                nm = f"{x}@{s}"
                back[nm] = (x, s)
                names.append(nm)
            comps[s] = names

    def compose_fn(o, ps):
        x, s = back[o]
        ys = [back[p] for p in ps]
        r = O.compose.get((x, tuple(y for y, _ in ys)))
        if r is None:
            return None
        return f"{r}@{compose_signatures(s, [t for _, t in ys])}"

    def act_fn(o, sg):
        x, s = back[o]
        return f"{O.act(x, sg)}@{s.act(sg)}"

    units = {c: f"{O.units[f[c]]}@{Signature((c,), c)}" for c in cols}
    return materialize(cols, O.variant, V, comps, compose_fn, units, act_fn if O.symmetric else None)


def direct_image_injective(f: Dict[str, str], O: FinOperad, colours: Sequence[str]) -> FinOperad:
    """``f_!O`` for an injective colour map into ``colours``."""
    if len(set(f.values())) != len(f):
        raise NotInjective("colour map is not injective")
    cols = tuple(sorted(colours))
    for c in O.colours:
        if f.get(c) not in cols:
            raise NotInjective(f"colour {c} has no image in the target colour set")
    ops = {o: s.rename(f) for o, s in O.ops.items()}
    units = {f[c]: O.units[c] for c in O.colours}
    compose = dict(O.compose)
    for d in cols:
        if d not in units:
            u = _fresh(f"1_{d}", ops)
            ops[u] = Signature((d,), d)
            units[d] = u
            compose[(u, (u,))] = u
    return FinOperad(cols, O.variant, O.max_valence, ops, compose, dict(O.symmetry), units)


def image_morphism(f: Dict[str, str], O: FinOperad, fO: FinOperad) -> OperadMorphism:
    """The canonical morphism ``O -> f_!O``."""
    return OperadMorphism(O, fO, dict(f), {o: o for o in O.ops})


def underlying_category(P: FinOperad) -> FinOperad:
    """``j^*P``: the unary part, as an operad concentrated in valence one."""
    ops = {o: s for o, s in P.ops.items() if s.valence == 1}
    compose = {k: r for k, r in P.compose.items() if k[0] in ops and all(p in ops for p in k[1])}
    return FinOperad(P.colours, P.variant, P.max_valence, ops, compose, {}, dict(P.units))


def inclusion_of_category(P: FinOperad) -> OperadMorphism:
    C = underlying_category(P)
    return OperadMorphism(C, P, {c: c for c in P.colours}, {o: o for o in C.ops})


def full_suboperad(P: FinOperad, colours: Sequence[str]) -> FinOperad:
    keep = set(colours)
    ops = {o: s for o, s in P.ops.items() if set(s.colours()) <= keep}
    compose = {k: r for k, r in P.compose.items() if k[0] in ops and all(p in ops for p in k[1])}
    symmetry = {k: r for k, r in P.symmetry.items() if k[0] in ops}
    return FinOperad(tuple(sorted(keep)), P.variant, P.max_valence, ops, compose, symmetry,
                     {c: P.units[c] for c in keep})


def restrict_valence(P: FinOperad, V: int) -> FinOperad:
    ops = {o: s for o, s in P.ops.items() if s.valence <= V}
    compose = {k: r for k, r in P.compose.items() if r in ops and k[0] in ops}
    symmetry = {k: r for k, r in P.symmetry.items() if k[0] in ops}
    return FinOperad(P.colours, P.variant, V, ops, compose, symmetry, dict(P.units))


def rename_ops(P: FinOperad, prefix: str) -> FinOperad:
    r = {o: prefix + o for o in P.ops}
    return FinOperad(
        P.colours, P.variant, P.max_valence,
        {r[o]: s for o, s in P.ops.items()},
        {(r[o], tuple(r[p] for p in ps)): r[x] for (o, ps), x in P.compose.items()},
        {(r[o], sg): r[x] for (o, sg), x in P.symmetry.items()},
        {c: r[u] for c, u in P.units.items()},
    )


# multigraphs and algebras

@dataclass(frozen=True, eq=False)
class MultiGraph:
    colours: Tuple[str, ...]
    components: Dict[Signature, Tuple[str, ...]]
    variant: str = "symmetric"

    def __post_init__(self):
        if self.variant == "reduced":
            for s, xs in self.components.items():
                if s.valence == 0 and xs:
                    raise SignatureMismatch("reduced multigraph with valence-0 generators")

    def generators(self) -> List[Tuple[str, Signature]]:
        return sorted((x, s) for s, xs in self.components.items() for x in xs)

    def sig_of(self, x: str) -> Signature:
        for s, xs in self.components.items():
            if x in xs:
                return s
        raise KeyError(x)


def underlying_multigraph(P: FinOperad) -> MultiGraph:
    return MultiGraph(P.colours, dict(P.components), P.variant)


@dataclass(frozen=True, eq=False)
class FinAlgebra:
    operad: FinOperad
    carrier: Dict[str, Tuple]
    action: Dict[Tuple[str, Tuple], object]


def validate_algebra(A: FinAlgebra, max_valence: Optional[int] = None, limit: int = 50) -> AxiomReport:
    O = A.operad
    V = O.max_valence if max_valence is None else min(max_valence, O.max_valence)
    rep = AxiomReport()
    for (o, _), _v in A.action.items():
        if o not in O.ops:
            raise CarrierMismatch(f"action indexed by unknown operation {o}")
    for c in O.colours:
        if c not in A.carrier:
            raise CarrierMismatch(f"no carrier at colour {c}")

    def bad(kind: str, detail: str) -> bool:
        rep.add(kind, detail)
        return len(rep.violations) >= limit

    def args(s: Signature):
        return itertools.product(*(A.carrier[c] for c in s.inputs))

    ops = [o for o in sorted(O.ops) if O.ops[o].valence <= V]
    for o in ops:
        s = O.ops[o]
        for xs in args(s):
            rep.checked += 1
            y = A.action.get((o, xs), _MISSING)
            if y is _MISSING or y not in A.carrier[s.output]:
                if bad("typing", f"action of {o} on {xs}"):
                    return rep
    if rep.violations:
        return rep
    for c in O.colours:
        for x in A.carrier[c]:
            rep.checked += 1
            if A.action[(O.units[c], (x,))] != x:
                if bad("unit", f"unit of {c} moves {x}"):
                    return rep
    for o in ops:
        for ps in composable_tuples(O, o, V):
            r = O.compose[(o, ps)]
            for xs in args(O.ops[r]):
                rep.checked += 1
                pos = 0
                inner = []
                for p in ps:
                    k = O.ops[p].valence
                    inner.append(A.action[(p, xs[pos:pos + k])])
                    pos += k
                if A.action[(r, xs)] != A.action[(o, tuple(inner))]:
                    if bad("associativity", f"{o}{ps} on {xs}"):
                        return rep
    if O.symmetric:
        for o in ops:
            n = O.ops[o].valence
            for sg in all_perms(n):
                x = O.act(o, sg)
                for xs in args(O.ops[o]):
                    rep.checked += 1
                    if A.action[(x, tuple(xs[sg[j]] for j in range(n)))] != A.action[(o, xs)]:
                        if bad("equivariance", f"{o} under {sg} on {xs}"):
                            return rep
    return rep


_MISSING = object()


# builtins

def _one(max_valence: int) -> FinOperad:
    return materialize(("0",), "symmetric", max_valence, {Signature(("0",), "0"): ["u0"]},
                       lambda o, ps: "u0", {"0": "u0"}, lambda o, sg: "u0")


def _interval(max_valence: int) -> FinOperad:
    comps = {Signature((a,), b): [f"i{a}{b}"] for a in "01" for b in "01"}
    units = {"0": "i00", "1": "i11"}

    def compose_fn(o, ps):
        if not ps:
            return o
        return f"i{ps[0][1]}{o[2]}"

    return materialize(("0", "1"), "symmetric", max_valence, comps, compose_fn, units, lambda o, sg: o)


def _com(colours: Sequence[str], max_valence: int, variant: str = "symmetric") -> FinOperad:
    comps = {s: [f"m[{s}]"] for s in all_signatures(colours, max_valence, variant == "reduced")}

    def compose_fn(o, ps):
        s = comps_rev[o]
        return f"m[{compose_signatures(s, [comps_rev[p] for p in ps])}]"

    def act_fn(o, sg):
        return f"m[{comps_rev[o].act(sg)}]"

    comps_rev = {v[0]: s for s, v in comps.items()}
    units = {c: f"m[{Signature((c,), c)}]" for c in colours}
    return materialize(colours, variant, max_valence, comps, compose_fn, units,
                       act_fn if variant != "nonsymmetric" else None)


def _as(max_valence: int) -> FinOperad:
    comps = {Signature(("c",) * n, "c"): [f"a{n}"] for n in range(max_valence + 1)}

    def compose_fn(o, ps):
        if not ps:
            return o
        return f"a{sum(int(p[1:]) for p in ps)}"

    return materialize(("c",), "nonsymmetric", max_valence, comps, compose_fn, {"c": "a1"})


def perm_name(p: Perm) -> str:
    return "p" + "".join(str(i) for i in p) if len(p) < 10 else "p" + ".".join(str(i) for i in p)


def _parse_perm(name: str) -> Perm:
    body = name[1:]
    if "." in body:
        return tuple(int(x) for x in body.split("."))
    return tuple(int(x) for x in body)


def as_sigma_compose(s: Perm, qs: Sequence[Perm]) -> Perm:
    inv = perm_inv(s)
    ps = [qs[inv[i]] for i in range(len(s))]
    return perm_mul(direct_sum(ps), block_perm(s, [len(p) for p in ps]))


def _as_sigma(max_valence: int) -> FinOperad:
    comps = {Signature(("c",) * n, "c"): [perm_name(p) for p in all_perms(n)]
             for n in range(max_valence + 1)}

    def compose_fn(o, ps):
        return perm_name(as_sigma_compose(_parse_perm(o), [_parse_perm(p) for p in ps]))

    def act_fn(o, sg):
        return perm_name(perm_mul(_parse_perm(o), sg))

    return materialize(("c",), "symmetric", max_valence, comps, compose_fn, {"c": "p0"}, act_fn)


def monoid_operad(elements: Sequence[str], mul: Dict[Tuple[str, str], str], unit: str,
                  max_valence: int, commutative: bool = True, nullary: bool = True) -> FinOperad:
    """One-coloured operad with ``P(n) = M`` and ``m(m_1,...,m_n) = m m_1 ... m_n``."""
    lo = 0 if nullary else 1
    comps = {Signature(("c",) * n, "c"): [f"{x}.{n}" for x in elements] for n in range(lo, max_valence + 1)}

    def compose_fn(o, ps):
        x, _ = o.split(".")
        for p in ps:
            x = mul[(x, p.split(".")[0])]
        total = sum(int(p.split(".")[1]) for p in ps) if ps else int(o.split(".")[1])
        return f"{x}.{total}"

    def act_fn(o, sg):
        return o

    variant = "symmetric" if commutative else "nonsymmetric"
    return materialize(("c",), variant, max_valence, comps, compose_fn, {"c": f"{unit}.1"},
                       act_fn if commutative else None)


def builtin(name: str, max_valence: int = 4, **params) -> FinOperad:
    """Named operads: one, interval, com, as, as_sigma, tree."""
    if name in ("one", "1"):
        return _one(max_valence)
    if name in ("interval", "I"):
        return _interval(max_valence)
    if name == "com":
        return _com(tuple(params.get("colours", ("c",))), max_valence, params.get("variant", "symmetric"))
    if name == "as":
        return _as(max_valence)
    if name == "as_sigma":
        return _as_sigma(max_valence)
    if name == "tree":
        from .trees import tree_operad
        return tree_operad(params["tree"], max_valence=params.get("bound"))
    raise UnknownBuiltin(name)


def empty_operad(max_valence: int = 4, variant: str = "symmetric") -> FinOperad:
    return FinOperad((), variant, max_valence, {}, {}, {}, {})


def initial_operad(colours: Sequence[str], max_valence: int = 4, variant: str = "symmetric") -> FinOperad:
    """The initial operad over ``colours``: units only."""
    comps = {Signature((c,), c): [f"1_{c}"] for c in colours}
    return materialize(colours, variant, max_valence, comps, lambda o, ps: o if not ps else ps[0],
                       {c: f"1_{c}" for c in colours}, lambda o, sg: o)


# serialization

def operad_to_json(O: FinOperad) -> dict:
    return {
        "kind": "operad",
        "variant": O.variant,
        "max_valence": O.max_valence,
        "colours": list(O.colours),
        "components": {str(s): list(O.components[s]) for s in sorted(O.components, key=sig_key)
                       if O.components[s]},
        "units": {c: O.units[c] for c in sorted(O.units)},
        "compose": [[o, list(ps), r] for (o, ps), r in sorted(O.compose.items())],
        "symmetry": [[o, list(sg), r] for (o, sg), r in sorted(O.symmetry.items())],
    }


def operad_from_json(d: dict) -> FinOperad:
    ops: Dict[str, Signature] = {}
    for key, xs in d["components"].items():
        s = Signature.parse(key)
        for x in xs:
            ops[x] = s
    return FinOperad(
        tuple(d["colours"]), d["variant"], d["max_valence"], ops,
        {(o, tuple(ps)): r for o, ps, r in d["compose"]},
        {(o, tuple(sg)): r for o, sg, r in d.get("symmetry", [])},
        dict(d["units"]),
    )


def morphism_to_json(phi: OperadMorphism, source_ref=None, target_ref=None) -> dict:
    return {
        "kind": "morphism",
        "source": source_ref if source_ref is not None else operad_to_json(phi.source),
        "target": target_ref if target_ref is not None else operad_to_json(phi.target),
        "colour_map": {c: phi.colour_map[c] for c in sorted(phi.colour_map)},
        "op_map": {o: phi.op_map[o] for o in sorted(phi.op_map)},
    }


def morphism_from_json(d: dict, source: Optional[FinOperad] = None, target: Optional[FinOperad] = None) -> OperadMorphism:
    P = source if source is not None else operad_from_json(d["source"])
    Q = target if target is not None else operad_from_json(d["target"])
    return OperadMorphism(P, Q, dict(d["colour_map"]), dict(d["op_map"]))


def multigraph_to_json(K: MultiGraph) -> dict:
    return {
        "kind": "multigraph",
        "variant": K.variant,
        "colours": list(K.colours),
        "components": {str(s): list(K.components[s]) for s in sorted(K.components, key=sig_key)
                       if K.components[s]},
    }


def multigraph_from_json(d: dict) -> MultiGraph:
    return MultiGraph(tuple(d["colours"]),
                      {Signature.parse(k): tuple(v) for k, v in d["components"].items()},
                      d.get("variant", "symmetric"))
