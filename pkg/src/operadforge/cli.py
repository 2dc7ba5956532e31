"""Command line front end: bundle parsing, dispatch and reports."""

from __future__ import annotations

import argparse
import json
import random
import re
import sys
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence

from jsonschema import Draft202012Validator

from .colimits import (
    Diagram,
    IndexCategory,
    Span,
    bifibration_colimit,
    filtered_colimit,
    free_pushout_filtration,
    is_filtered,
    pushout,
    pushout_operad,
)
from .core import (
    FinOperad,
    MultiGraph,
    OperadMorphism,
    Signature,
    all_signatures,
    builtin,
    component_profile,
    compose_morphisms,
    morphism_to_json,
    multigraph_from_json,
    multigraph_to_json,
    operad_from_json,
    operad_to_json,
    validate_morphism,
    validate_operad,
)
from .errors import DanglingReference, GenerationExhausted, OperadForgeError, SchemaError, Unstabilized
from .freeops import free_operad
from .model import PRESETS, classify, dwyer_kan_classify, has_rlp, preset, rlp_all, two_out_of_three
from .trees import tree_from_json, tree_operad, tree_to_json

ID = r"[A-Za-z0-9_]+"
SIG = rf"^({ID}(,{ID})*)?->{ID}$"

_OPERAD = {
    "type": "object",
    "required": ["kind", "variant", "max_valence", "colours", "components", "units", "compose"],
    "properties": {
        "kind": {"const": "operad"},
        "variant": {"enum": ["symmetric", "nonsymmetric", "reduced"]},
        "max_valence": {"type": "integer", "minimum": 0},
        "colours": {"type": "array", "items": {"type": "string", "pattern": f"^{ID}$"}, "uniqueItems": True},
        "components": {"type": "object", "propertyNames": {"pattern": SIG},
                       "additionalProperties": {"type": "array", "items": {"type": "string"}}},
        "units": {"type": "object", "propertyNames": {"pattern": f"^{ID}$"},
                  "additionalProperties": {"type": "string"}},
        "compose": {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3,
                                               "prefixItems": [{"type": "string"},
                                                               {"type": "array", "items": {"type": "string"}},
                                                               {"type": "string"}]}},
        "symmetry": {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3,
                                                "prefixItems": [{"type": "string"},
                                                                {"type": "array", "items": {"type": "integer"}},
                                                                {"type": "string"}]}},
    },
    "additionalProperties": False,
}
_BUILTIN = {
    "type": "object",
    "required": ["builtin"],
    "properties": {"builtin": {"type": "string"}, "max_valence": {"type": "integer", "minimum": 0},
                   "colours": {"type": "array", "items": {"type": "string", "pattern": f"^{ID}$"}}},
    "additionalProperties": False,
}
_OPERAD_REF = {"oneOf": [{"$ref": "#/$defs/operad"}, {"$ref": "#/$defs/builtin"}]}
_MAPS = {
    "type": "object",
    "required": ["colour_map", "op_map"],
    "properties": {"colour_map": {"type": "object", "additionalProperties": {"type": "string"}},
                   "op_map": {"type": "object", "additionalProperties": {"type": "string"}}},
}
_MULTIGRAPH = {
    "type": "object",
    "required": ["kind", "colours", "components"],
    "properties": {
        "kind": {"const": "multigraph"},
        "variant": {"enum": ["symmetric", "nonsymmetric", "reduced"]},
        "colours": {"type": "array", "items": {"type": "string", "pattern": f"^{ID}$"}, "uniqueItems": True},
        "components": {"type": "object", "propertyNames": {"pattern": SIG},
                       "additionalProperties": {"type": "array", "items": {"type": "string"}}},
    },
    "additionalProperties": False,
}
_DEFS = {"operad": _OPERAD, "builtin": _BUILTIN, "multigraph": _MULTIGRAPH}

SCHEMAS = {
    "operad": _OPERAD,
    "multigraph": _MULTIGRAPH,
    "morphism": {
        "type": "object",
        "required": ["kind", "source", "target", "colour_map", "op_map"],
        "properties": {"kind": {"const": "morphism"}, "source": _OPERAD_REF, "target": _OPERAD_REF,
                       "colour_map": _MAPS["properties"]["colour_map"], "op_map": _MAPS["properties"]["op_map"]},
        "additionalProperties": False,
    },
    "span": {
        "type": "object",
        "required": ["kind", "apex", "x", "y", "f", "g"],
        "properties": {"kind": {"const": "span"}, "apex": _OPERAD_REF, "x": _OPERAD_REF, "y": _OPERAD_REF,
                       "f": _MAPS, "g": _MAPS},
        "additionalProperties": False,
    },
    "diagram": {
        "type": "object",
        "required": ["kind", "objects", "arrows", "operads", "maps"],
        "properties": {
            "kind": {"const": "diagram"},
            "shape": {"enum": ["filtered", "pushout", "coequalizer"]},
            "objects": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
            "arrows": {"type": "object", "additionalProperties": {
                "type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}},
            "compose": {"type": "array", "items": {"type": "array", "items": {"type": "string"},
                                                   "minItems": 3, "maxItems": 3}},
            "operads": {"type": "object", "additionalProperties": _OPERAD_REF},
            "maps": {"type": "object", "additionalProperties": _MAPS},
        },
        "additionalProperties": False,
    },
    "tree": {
        "type": "object",
        "required": ["kind", "root", "vertices", "labels"],
        "properties": {
            "kind": {"const": "tree"},
            "root": {"type": "integer"},
            "vertices": {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2}},
            "labels": {"type": "object", "additionalProperties": {"type": "string", "pattern": f"^{ID}$"}},
            "marks": {"type": "array", "items": {"type": "string"}},
            "leaf_order": {"type": "array", "items": {"type": "integer"}},
        },
        "additionalProperties": False,
    },
    "filtration": {
        "type": "object",
        "required": ["kind", "X", "K0", "K1", "alpha", "signature", "stages"],
        "properties": {
            "kind": {"const": "filtration"}, "X": _OPERAD_REF,
            "K0": {"$ref": "#/$defs/multigraph"}, "K1": {"$ref": "#/$defs/multigraph"},
            "alpha": {"type": "object", "additionalProperties": {"type": "string"}},
            "inclusion": {"type": "object", "additionalProperties": {"type": "string"}},
            "signature": {"type": "string", "pattern": SIG},
            "stages": {"type": "integer", "minimum": 0},
        },
        "additionalProperties": False,
    },
}


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path) or "/"


def _schema_check(doc) -> str:
    if not isinstance(doc, dict) or doc.get("kind") not in SCHEMAS:
        kinds = ", ".join(sorted(SCHEMAS))
        raise SchemaError("/kind", f"expected one of {kinds}")
    kind = doc["kind"]
    schema = dict(SCHEMAS[kind], **{"$defs": _DEFS})
    errors = sorted(Draft202012Validator(schema).iter_errors(doc), key=lambda e: (len(e.path), list(e.path)))
    if errors:
        e = errors[0]
        path = list(e.absolute_path)
        if e.validator == "required":
            missing = [p for p in e.validator_value if p not in e.instance]
            path.append(missing[0])
        raise SchemaError(_pointer(path), e.message)
    return kind


# semantic checks and construction

def _operad(d, where: str) -> FinOperad:
    if "builtin" in d:
        kw = {"colours": tuple(d["colours"])} if "colours" in d else {}
        try:
            return builtin(d["builtin"], max_valence=d.get("max_valence", 2), **kw)
        except OperadForgeError as e:
            raise DanglingReference(f"{where}/builtin: {e}")
    cols = set(d["colours"])
    ops = set()
    for key, xs in d["components"].items():
        s = Signature.parse(key)
        for c in (*s.inputs, s.output):
            if c not in cols:
                raise DanglingReference(f"{where}/components/{key}: unknown colour {c}")
        ops.update(xs)
    for c in cols:
        if c not in d["units"]:
            raise SchemaError(f"{where}/units", f"no unit for colour {c}")
    for c, u in d["units"].items():
        if c not in cols or u not in ops:
            raise DanglingReference(f"{where}/units/{c}: unknown colour or operation")
    for k, (o, ps, r) in enumerate(d["compose"]):
        for x in (o, *ps, r):
            if x not in ops:
                raise DanglingReference(f"{where}/compose/{k}: unknown operation {x}")
    for k, (o, _, r) in enumerate(d.get("symmetry", [])):
        for x in (o, r):
            if x not in ops:
                raise DanglingReference(f"{where}/symmetry/{k}: unknown operation {x}")
    return operad_from_json(d)


def _morphism(P: FinOperad, Q: FinOperad, d, where: str) -> OperadMorphism:
    cm, om = d["colour_map"], d["op_map"]
    for a, b in cm.items():
        if a not in P.colours or b not in Q.colours:
            raise DanglingReference(f"{where}/colour_map/{a}: unknown colour")
    for a, b in om.items():
        if a not in P.ops or b not in Q.ops:
            raise DanglingReference(f"{where}/op_map/{a}: unknown operation")
    for c in P.colours:
        if c not in cm:
            raise DanglingReference(f"{where}/colour_map: colour {c} has no image")
    for o in P.ops:
        if o not in om:
            raise DanglingReference(f"{where}/op_map: operation {o} has no image")
    return OperadMorphism(P, Q, dict(cm), dict(om))


@dataclass
class FiltrationBundle:
    X: FinOperad
    K0: MultiGraph
    K1: MultiGraph
    alpha: Dict[str, str]
    signature: Signature
    stages: int
    inclusion: Optional[Dict[str, str]] = None


def build(doc):
    """A schema-checked bundle as a typed object."""
    kind = _schema_check(doc)
    if kind == "operad":
        return _operad(doc, "")
    if kind == "multigraph":
        return multigraph_from_json(doc)
    if kind == "morphism":
        return _morphism(_operad(doc["source"], "/source"), _operad(doc["target"], "/target"), doc, "")
    if kind == "span":
        A = _operad(doc["apex"], "/apex")
        return Span(A, _morphism(A, _operad(doc["x"], "/x"), doc["f"], "/f"),
                    _morphism(A, _operad(doc["y"], "/y"), doc["g"], "/g"))
    if kind == "diagram":
        objs = tuple(doc["objects"])
        arrows = {a: tuple(st) for a, st in doc["arrows"].items()}
        for a, (s, t) in arrows.items():
            if s not in objs or t not in objs:
                raise DanglingReference(f"/arrows/{a}: unknown object")
        comp = {}
        for k, (g, f, h) in enumerate(doc.get("compose", [])):
            for x in (g, f, h):
                if x not in arrows and not x.startswith("id_"):
                    raise DanglingReference(f"/compose/{k}: unknown arrow {x}")
            comp[(g, f)] = h
        I = IndexCategory(objs, arrows, comp)
        ops = {}
        for o in objs:
            if o not in doc["operads"]:
                raise DanglingReference(f"/operads: object {o} has no operad")
            ops[o] = _operad(doc["operads"][o], f"/operads/{o}")
        maps = {}
        for a, (s, t) in arrows.items():
            if a not in doc["maps"]:
                raise DanglingReference(f"/maps: arrow {a} has no map")
            maps[a] = _morphism(ops[s], ops[t], doc["maps"][a], f"/maps/{a}")
        return Diagram(I, ops, maps, doc.get("shape"))
    if kind == "tree":
        try:
            return tree_from_json(doc)
        except ValueError as e:
            raise SchemaError("/vertices", str(e))
    if kind == "filtration":
        X = _operad(doc["X"], "/X")
        return FiltrationBundle(X, multigraph_from_json(doc["K0"]), multigraph_from_json(doc["K1"]),
                                dict(doc["alpha"]), Signature.parse(doc["signature"]), doc["stages"],
                                doc.get("inclusion"))
    raise SchemaError("/kind", kind)


def parse_bundle(path: str):
    """Read, schema-check and resolve a JSON bundle."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise SchemaError("/", f"malformed JSON: {e}")
    return build(doc)


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def serialize(obj) -> dict:
    if isinstance(obj, FinOperad):
        return operad_to_json(obj)
    if isinstance(obj, OperadMorphism):
        return morphism_to_json(obj)
    if isinstance(obj, Span):
        return {"kind": "span", "apex": operad_to_json(obj.apex), "x": operad_to_json(obj.left.target),
                "y": operad_to_json(obj.right.target), "f": _maps(obj.left), "g": _maps(obj.right)}
    if isinstance(obj, Diagram):
        I = obj.index
        d = {"kind": "diagram", "objects": list(I.objects),
             "arrows": {a: list(st) for a, st in I.arrows.items()},
             "compose": [[g, f, h] for (g, f), h in I.compose.items()],
             "operads": {o: operad_to_json(P) for o, P in obj.operads.items()},
             "maps": {a: _maps(m) for a, m in obj.maps.items()}}
        if obj.shape is not None:
            d["shape"] = obj.shape
        return d
    if isinstance(obj, FiltrationBundle):
        d = {"kind": "filtration", "X": operad_to_json(obj.X), "K0": multigraph_to_json(obj.K0),
             "K1": multigraph_to_json(obj.K1), "alpha": dict(obj.alpha), "signature": str(obj.signature),
             "stages": obj.stages}
        if obj.inclusion is not None:
            d["inclusion"] = dict(obj.inclusion)
        return d
    if hasattr(obj, "vertices") and hasattr(obj, "leaf_order"):
        return tree_to_json(obj)
    if hasattr(obj, "generators") and hasattr(obj, "components"):
        return multigraph_to_json(obj)
    raise TypeError(type(obj).__name__)


def _maps(m: OperadMorphism) -> dict:
    return {"colour_map": {c: m.colour_map[c] for c in sorted(m.colour_map)},
            "op_map": {o: m.op_map[o] for o in sorted(m.op_map)}}


def sanitize(P: FinOperad) -> dict:
    """``P`` as JSON with colour ids forced into ``[A-Za-z0-9_]``, plus the renaming."""
    rename, taken = {}, set()
    for c in P.colours:
        base = re.sub(r"[^A-Za-z0-9_]", "_", c) or "c"
        new, k = base, 1
        while new in taken:
            new, k = f"{base}_{k}", k + 1
        taken.add(new)
        rename[c] = new
    d = operad_to_json(P)
    d["colours"] = [rename[c] for c in P.colours]
    d["components"] = {_rename_sig(s, rename): xs for s, xs in d["components"].items()}
    d["units"] = {rename[c]: u for c, u in d["units"].items()}
    return {"operad": d, "colour_names": {rename[c]: c for c in P.colours if rename[c] != c}}


def _rename_sig(key: str, rename: Dict[str, str]) -> str:
    s = _parse_sig(key, rename)
    return ",".join(rename[c] for c in s.inputs) + "->" + rename[s.output]


def _parse_sig(key: str, rename: Dict[str, str]) -> Signature:
    """Split a signature key whose colours may themselves contain commas or arrows."""
    cols = sorted(rename, key=len, reverse=True)
    ins, out = _split_key(key, cols)
    return Signature(tuple(ins), out)


def _split_key(key: str, cols: Sequence[str]):
    for out in cols:
        if key.endswith("->" + out):
            head = key[: -len(out) - 2]
            ins = _split_inputs(head, cols)
            if ins is not None:
                return ins, out
    raise ValueError(key)


def _split_inputs(head: str, cols: Sequence[str]):
    if head == "":
        return []
    for c in cols:
        if head == c:
            return [c]
        if head.startswith(c + ","):
            rest = _split_inputs(head[len(c) + 1:], cols)
            if rest is not None:
                return [c] + rest
    return None


# campaigns

@dataclass
class CampaignConfig:
    seed: int
    count: int = 10
    max_colours: int = 2
    max_component: int = 2
    valence: int = 2


def generate_instances(cfg: CampaignConfig) -> Iterator[dict]:
    """A reproducible stream of small operads, composable morphism pairs and spans."""
    from .generate import catalog, random_morphism
    rng = random.Random(cfg.seed)
    pools = {}
    for v in ("symmetric", "nonsymmetric", "reduced"):
        pools[v] = [P for _, P in catalog(cfg.valence, v)
                    if len(P.colours) <= cfg.max_colours and all(len(x) <= cfg.max_component
                                                                 for x in P.components.values())]
    emitted, tries = 0, 0
    while emitted < cfg.count:
        tries += 1
        if tries > 100 * cfg.count:
            raise GenerationExhausted(f"only {emitted} of {cfg.count} instances")
        v = rng.choice(sorted(pools))
        P, Q, R = (rng.choice(pools[v]) for _ in range(3))
        f = random_morphism(rng, P, Q, cap=16)
        g = random_morphism(rng, Q, R, cap=16) if f else None
        if f is None or g is None:
            continue
        h = random_morphism(rng, P, rng.choice(pools[v]), cap=16)
        span = Span(P, f, h) if h is not None else None
        emitted += 1
        yield {"index": emitted - 1, "variant": v, "operads": [P, Q, R], "morphisms": [f, g], "span": span}


def _campaign(cfg: CampaignConfig) -> dict:
    rows, bad = [], 0
    for inst in generate_instances(cfg):
        P, Q, R = inst["operads"]
        f, g = inst["morphisms"]
        checks = {
            "operads_valid": all(validate_operad(X).passed for X in (P, Q, R)),
            "morphisms_valid": validate_morphism(f).passed and validate_morphism(g).passed,
            "composable": f.target is g.source,
            "composite_valid": validate_morphism(compose_morphisms(g, f)).passed,
            "report_consistent": classify(f).consistent and classify(g).consistent,
            "two_out_of_three": two_out_of_three(f, g).holds,
            "dwyer_kan": dwyer_kan_classify(f) == classify(f).weak_equivalence,
        }
        if inst["span"] is not None:
            try:
                G = pushout_operad(inst["span"], 2)
                checks["pushout_valid"] = validate_operad(G.operad).passed
            except Unstabilized:
                pass
        failed = sorted(k for k, ok in checks.items() if not ok)
        bad += bool(failed)
        rows.append({"index": inst["index"], "variant": inst["variant"], "failed": failed,
                     "checks": len(checks)})
    return {"seed": cfg.seed, "count": cfg.count, "violations": bad, "instances": rows}


# commands

def _profile(P: FinOperad) -> Dict[str, int]:
    prof = component_profile(P)
    return {str(s): prof[s] for s in sorted(prof, key=lambda s: (s.valence, str(s)))}


def cmd_check(args) -> tuple:
    obj = parse_bundle(args.inputs[0])
    found = []
    if isinstance(obj, FinOperad):
        found.append(("operad", validate_operad(obj, args.valence_cap)))
    elif isinstance(obj, OperadMorphism):
        found += [("source", validate_operad(obj.source, args.valence_cap)),
                  ("target", validate_operad(obj.target, args.valence_cap)),
                  ("morphism", validate_morphism(obj, args.valence_cap))]
    elif isinstance(obj, Span):
        found += [("apex", validate_operad(obj.apex, args.valence_cap)),
                  ("f", validate_morphism(obj.left, args.valence_cap)),
                  ("g", validate_morphism(obj.right, args.valence_cap))]
    elif isinstance(obj, Diagram):
        obj.index.check()
        found += [(f"operad {o}", validate_operad(P, args.valence_cap)) for o, P in obj.operads.items()]
        found += [(f"map {a}", validate_morphism(m, args.valence_cap)) for a, m in obj.maps.items()]
    elif isinstance(obj, FiltrationBundle):
        found.append(("X", validate_operad(obj.X, args.valence_cap)))
    elif hasattr(obj, "leaf_order"):
        found.append(("omega", validate_operad(tree_operad(obj, args.valence_cap))))
    else:
        found.append(("multigraph", None))
    report = {"command": "check", "results": {k: ("pass" if r is None or r.passed else [list(v) for v in r.violations])
                                              for k, r in found}}
    ok = all(r is None or r.passed for _, r in found)
    report["passed"] = ok
    return report, 0 if ok else 1


def cmd_classify(args) -> tuple:
    f = parse_bundle(args.inputs[0])
    if not isinstance(f, OperadMorphism):
        raise SchemaError("/kind", "classify needs a morphism")
    rep = classify(f, preset(args.preset))
    out = {"command": "classify", "preset": args.preset}
    out.update(rep.to_json())
    out["dwyer_kan"] = dwyer_kan_classify(f)
    return out, 0


def cmd_lift(args) -> tuple:
    if len(args.inputs) not in (2, 4):
        raise SchemaError("/", "lift takes i and p, optionally followed by top and bottom")
    i, p = (parse_bundle(x) for x in args.inputs[:2])
    if len(args.inputs) == 4:
        top, bottom = (parse_bundle(x) for x in args.inputs[2:])
        r = has_rlp(i, p, top, bottom)
        out = {"command": "lift", "square": "given", "exists": r.exists, "explored": r.explored,
               "lift": morphism_to_json(r.lift) if r.lift else None}
        return out, 0 if r.exists else 1
    bad = rlp_all(i, p)
    out = {"command": "lift", "square": "all", "exists": bad is None,
           "failing_square": None if bad is None else {"top": _maps(bad[0]), "bottom": _maps(bad[1])}}
    return out, 0 if bad is None else 1


def cmd_pushout(args) -> tuple:
    span = parse_bundle(args.inputs[0])
    if not isinstance(span, Span):
        raise SchemaError("/kind", "pushout needs a span")
    V = args.valence_cap if args.valence_cap is not None else min(span.apex.max_valence,
                                                                 span.left.target.max_valence,
                                                                 span.right.target.max_valence)
    tables = {}
    exact = True
    for S in all_signatures(sorted(set(span.left.target.colours) | set(span.right.target.colours)), V,
                            span.apex.variant == "reduced"):
        if not span.in_one_fiber:
            break
        res = pushout(span, S, args.bound)
        exact = exact and res.exact
        if res.classes:
            tables[str(S)] = {"exact": res.exact, "classes": [
                {"representative": min(c, key=lambda t: (len(t), t)), "size": len(c)}
                for c in sorted(res.classes, key=lambda c: min(c, key=lambda t: (len(t), t)))]}
    G = pushout_operad(span, args.bound, V)
    out = {"command": "pushout", "bound": args.bound, "exact": G.exact and exact, "classes": tables,
           "profile": _profile(G.operad)}
    out.update(sanitize(G.operad))
    return out, 0


def cmd_colimit(args) -> tuple:
    D = parse_bundle(args.inputs[0])
    if not isinstance(D, Diagram):
        raise SchemaError("/kind", "colimit needs a diagram")
    shape = args.shape or D.shape or ("filtered" if is_filtered(D.index) else None)
    if shape is None:
        raise SchemaError("/shape", "diagram is not filtered and no shape was given")
    if shape == "filtered":
        r = filtered_colimit(D)
        out = {"command": "colimit", "shape": shape, "exact": True, "structures": r.structures,
               "profile": _profile(r.operad)}
        out.update(sanitize(r.operad))
    else:
        r = bifibration_colimit(D, shape, args.bound, args.valence_cap)
        out = {"command": "colimit", "shape": shape, "exact": r.exact, "profile": _profile(r.operad)}
        out.update(sanitize(r.operad))
    return out, 0


def cmd_free(args) -> tuple:
    K = parse_bundle(args.inputs[0])
    if not hasattr(K, "generators"):
        raise SchemaError("/kind", "free needs a multigraph")
    F = free_operad(K)
    V = args.valence_cap if args.valence_cap is not None else 2
    comps = {}
    for S in all_signatures(F.colours, V, K.variant == "reduced"):
        c = F.component(S, args.bound)
        if c.trees or not c.exact:
            comps[str(S)] = {"count": len(c.trees), "exact": c.exact, "trees": sorted(t.term for t in c.trees)}
    return {"command": "free", "bound": args.bound, "valence_cap": V, "components": comps}, 0


def cmd_filtrate(args) -> tuple:
    d = parse_bundle(args.inputs[0])
    if not isinstance(d, FiltrationBundle):
        raise SchemaError("/kind", "filtrate needs a filtration bundle")
    r = free_pushout_filtration(d.X, d.K0, d.K1, d.alpha, d.signature, d.stages, inclusion=d.inclusion)
    cmp = r.comparison or {}
    out = {"command": "filtrate", "signature": str(d.signature),
           "stages": [{"n": st.n, "new_classes": st.count,
                       "shapes": [{"shape": fb.shape, "orbits": fb.orbits, "automorphisms": fb.automorphisms}
                                  for fb in st.fibers]} for st in r.stages],
           "agrees_with_pushout": r.agrees,
           "pushout_counts": cmp.get("pushout_counts"), "stage_counts": cmp.get("stage_counts")}
    return _jsonable(out), 0 if r.agrees else 1


def cmd_campaign(args) -> tuple:
    if args.seed is None:
        raise SchemaError("/seed", "campaign needs --seed")
    rep = _campaign(CampaignConfig(args.seed, args.count, valence=args.valence_cap or 2))
    rep["command"] = "campaign"
    return rep, 0 if rep["violations"] == 0 else 1


COMMANDS = {"check": cmd_check, "classify": cmd_classify, "lift": cmd_lift, "pushout": cmd_pushout,
            "colimit": cmd_colimit, "free": cmd_free, "filtrate": cmd_filtrate, "campaign": cmd_campaign}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _text(report: dict, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    for k, v in report.items():
        if isinstance(v, dict) and v:
            lines.append(f"{pad}{k}:")
            lines.append(_text(v, indent + 1))
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            lines.append(f"{pad}{k}:")
            for item in v:
                lines.append(_text(item, indent + 1))
                lines.append(f"{pad}  --")
        else:
            lines.append(f"{pad}{k}: {json.dumps(v, ensure_ascii=False)}")
    return "\n".join(lines)


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="operadforge", description="Finite Set-operads: checks, colimits, model predicates.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("inputs", nargs="*")
    ap.add_argument("--bound", type=int, default=3)
    ap.add_argument("--valence-cap", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--shape", choices=["filtered", "pushout", "coequalizer"], default=None)
    ap.add_argument("--preset", choices=sorted(PRESETS), default="discrete")
    ap.add_argument("--format", choices=["json", "text"], default="json")
    ap.add_argument("--out", default=None)
    return ap


def run(argv: Optional[Sequence[str]] = None) -> int:
    ap = parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    if args.bound <= 0 or (args.valence_cap is not None and args.valence_cap < 0) or args.count <= 0:
        print("error: bounds must be positive", file=sys.stderr)
        return 2
    if args.command != "campaign" and not args.inputs:
        print(f"error: {args.command} needs an input file", file=sys.stderr)
        return 2
    try:
        report, code = COMMANDS[args.command](args)
    except (SchemaError, DanglingReference) as e:
        report, code = {"command": args.command, "error": type(e).__name__, "detail": str(e)}, 2
    except OSError as e:
        report, code = {"command": args.command, "error": "OSError", "detail": str(e)}, 2
    except OperadForgeError as e:
        report, code = {"command": args.command, "error": type(e).__name__, "detail": str(e)}, 1
    text = dumps(report) if args.format == "json" else _text(report) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
