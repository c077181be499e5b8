"""The natural model carried by finite presheaves.

Contexts are presheaves on a fixed base category, a type over a context
is a finite-fibered functor on its category of elements, and display
maps are the presheaf maps all of whose fibers have at most ``bound``
elements.  Everything is strictified: carriers are canonical ranges,
substitution is literal reindexing, and the universe is the usual
slice-functor one, so all the coherence laws hold as data equality.

Types deliberately carry no size bound of their own.  Dependent sums
and products can outgrow the display bound; they are still perfectly
good data, only :meth:`Universe.encode` refuses them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Iterable, Mapping

from .fincat import FinCat, Slice, slice_category
from .presheaf import (Elements, Presheaf, PresheafMap, category_of_elements,
                       compose_maps, enumerate_families, hom_maps, terminal_presheaf)


class BoundExceeded(Exception):
    """A fiber is too large for the display bound of the model."""


class ModelError(Exception):
    pass


# ---------------------------------------------------------------------------
# Types, terms and maps over a context


@dataclass(frozen=True)
class TypeOverContext:
    """A dependent type: a finite set ``A(I, g)`` per context element,
    with restriction ``A(I, g) -> A(J, g.f)`` per ``f : J -> I``."""

    context: Presheaf
    fiber: Mapping[tuple[str, int], int]
    restriction: Mapping[tuple[str, int], tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "fiber", dict(self.fiber))
        object.__setattr__(self, "restriction",
                           {k: tuple(v) for k, v in dict(self.restriction).items()})

    def __eq__(self, other):
        if not isinstance(other, TypeOverContext):
            return NotImplemented
        return (self.context == other.context and self.fiber == other.fiber
                and self.restriction == other.restriction)

    def __hash__(self):
        return hash((tuple(sorted(self.fiber.items())),
                     tuple(sorted(self.restriction.items()))))

    def size(self, obj: str, g: int) -> int:
        return self.fiber[(obj, g)]

    def restrict(self, f: str, g: int, a: int) -> int:
        """Restrict ``a in A(dst f, g)`` along ``f`` to ``A(src f, g.f)``."""
        return self.restriction[(f, g)][a]

    def max_fiber(self) -> int:
        return max(self.fiber.values(), default=0)

    def validate(self) -> list[str]:
        c = self.context.base
        errs = []
        for i in c.objects:
            for g in self.context.elements(i):
                if (i, g) not in self.fiber:
                    errs.append(f"missing fiber at ({i!r}, {g})")
        for f in c.morphisms:
            i = c.dst[f]
            for g in self.context.elements(i):
                t = self.restriction.get((f, g))
                if t is None or len(t) != self.fiber.get((i, g), -1):
                    errs.append(f"bad restriction along ({f!r}, {g})")
                    continue
                tgt = self.fiber[(c.src[f], self.context.act(f, g))]
                if any(not (0 <= v < tgt) for v in t):
                    errs.append(f"restriction along ({f!r}, {g}) escapes its fiber")
        if errs:
            return errs
        for i in c.objects:
            for g in self.context.elements(i):
                if self.restriction[(c.id(i), g)] != tuple(range(self.fiber[(i, g)])):
                    errs.append(f"identity restriction at ({i!r}, {g}) not identity")
        for m2 in c.morphisms:
            for m1 in c.morphisms:
                if c.dst[m1] != c.src[m2]:
                    continue
                m21 = c.compose(m2, m1)
                for g in self.context.elements(c.dst[m2]):
                    lhs = self.restriction[(m21, g)]
                    step = self.restriction[(m2, g)]
                    g2 = self.context.act(m2, g)
                    rhs = tuple(self.restriction[(m1, g2)][v] for v in step)
                    if lhs != rhs:
                        errs.append(f"functoriality fails at ({m2!r}, {m1!r}, {g})")
        return errs

    def assert_valid(self):
        errs = self.validate()
        if errs:
            raise ModelError("type: " + "; ".join(errs[:8]))
        return self


@dataclass(frozen=True)
class TermOverContext:
    """A section of a type: one fiber element per context element."""

    type: TypeOverContext
    pick: Mapping[tuple[str, int], int]

    def __post_init__(self):
        object.__setattr__(self, "pick", dict(self.pick))

    def __eq__(self, other):
        if not isinstance(other, TermOverContext):
            return NotImplemented
        return self.type == other.type and self.pick == other.pick

    def __hash__(self):
        return hash(tuple(sorted(self.pick.items())))

    def at(self, obj: str, g: int) -> int:
        return self.pick[(obj, g)]

    def validate(self) -> list[str]:
        a = self.type
        c = a.context.base
        errs = []
        for i in c.objects:
            for g in a.context.elements(i):
                v = self.pick.get((i, g), -1)
                if not (0 <= v < a.fiber[(i, g)]):
                    errs.append(f"pick at ({i!r}, {g}) out of fiber")
        if errs:
            return errs
        for f in c.morphisms:
            i = c.dst[f]
            for g in a.context.elements(i):
                if a.restrict(f, g, self.pick[(i, g)]) != \
                        self.pick[(c.src[f], a.context.act(f, g))]:
                    errs.append(f"section not natural along ({f!r}, {g})")
        return errs

    def assert_valid(self):
        errs = self.validate()
        if errs:
            raise ModelError("term: " + "; ".join(errs[:8]))
        return self


@dataclass(frozen=True)
class TypeMap:
    """A fiberwise map between two types over the same context."""

    source: TypeOverContext
    target: TypeOverContext
    component: Mapping[tuple[str, int], tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "component",
                           {k: tuple(v) for k, v in dict(self.component).items()})

    def __eq__(self, other):
        if not isinstance(other, TypeMap):
            return NotImplemented
        return (self.source == other.source and self.target == other.target
                and self.component == other.component)

    def __hash__(self):
        return hash(tuple(sorted(self.component.items())))

    def apply(self, obj: str, g: int, a: int) -> int:
        return self.component[(obj, g)][a]

    def validate(self) -> list[str]:
        if self.source.context != self.target.context:
            return ["source and target sit over different contexts"]
        c = self.source.context.base
        ctx = self.source.context
        errs = []
        for i in c.objects:
            for g in ctx.elements(i):
                t = self.component.get((i, g))
                if t is None or len(t) != self.source.fiber[(i, g)]:
                    errs.append(f"bad component at ({i!r}, {g})")
                elif any(not (0 <= v < self.target.fiber[(i, g)]) for v in t):
                    errs.append(f"component at ({i!r}, {g}) escapes the target fiber")
        if errs:
            return errs
        for f in c.morphisms:
            i = c.dst[f]
            for g in ctx.elements(i):
                g2 = ctx.act(f, g)
                for a in range(self.source.fiber[(i, g)]):
                    lhs = self.component[(c.src[f], g2)][self.source.restrict(f, g, a)]
                    rhs = self.target.restrict(f, g, self.component[(i, g)][a])
                    if lhs != rhs:
                        errs.append(f"fiber map not natural along ({f!r}, {g})")
                        break
        return errs

    def assert_valid(self):
        errs = self.validate()
        if errs:
            raise ModelError("type map: " + "; ".join(errs[:8]))
        return self

    def is_iso(self) -> bool:
        return all(len(set(t)) == len(t) == self.target.fiber[k]
                   for k, t in self.component.items())

    def inverse(self) -> "TypeMap":
        assert self.is_iso(), "not an isomorphism of types"
        comp = {}
        for k, t in self.component.items():
            inv = [0] * len(t)
            for a, b in enumerate(t):
                inv[b] = a
            comp[k] = tuple(inv)
        return TypeMap(self.target, self.source, comp)


def identity_type_map(a: TypeOverContext) -> TypeMap:
    return TypeMap(a, a, {k: tuple(range(n)) for k, n in a.fiber.items()})


def compose_type_maps(g: TypeMap, f: TypeMap) -> TypeMap:
    assert f.target == g.source, "type maps not composable"
    return TypeMap(f.source, g.target,
                   {k: tuple(g.component[k][v] for v in t)
                    for k, t in f.component.items()})


def apply_type_map(m: TypeMap, t: TermOverContext) -> TermOverContext:
    assert t.type == m.source
    return TermOverContext(m.target, {k: m.component[k][v] for k, v in t.pick.items()})


# ---------------------------------------------------------------------------
# Substitution (strict by construction)


def subst_type(a: TypeOverContext, s: PresheafMap) -> TypeOverContext:
    """Reindex a type over ``target(s)`` along ``s : Delta -> Gamma``."""
    assert s.target == a.context, "substitution target mismatch"
    delta = s.source
    c = delta.base
    fiber = {(i, d): a.fiber[(i, s.apply(i, d))]
             for i in c.objects for d in delta.elements(i)}
    restriction = {(f, d): a.restriction[(f, s.apply(c.dst[f], d))]
                   for f in c.morphisms for d in delta.elements(c.dst[f])}
    return TypeOverContext(delta, fiber, restriction)


def subst_term(t: TermOverContext, s: PresheafMap) -> TermOverContext:
    delta = s.source
    c = delta.base
    return TermOverContext(subst_type(t.type, s),
                           {(i, d): t.pick[(i, s.apply(i, d))]
                            for i in c.objects for d in delta.elements(i)})


def subst_type_map(m: TypeMap, s: PresheafMap) -> TypeMap:
    delta = s.source
    c = delta.base
    return TypeMap(subst_type(m.source, s), subst_type(m.target, s),
                   {(i, d): m.component[(i, s.apply(i, d))]
                    for i in c.objects for d in delta.elements(i)})


# ---------------------------------------------------------------------------
# Comprehension


@dataclass(frozen=True)
class Comprehension:
    """Context extension ``Gamma.A`` with its projection and generic term.

    Elements of ``(Gamma.A)(I)`` are pairs ``(g, a)`` numbered g-major
    in canonical order; ``encode``/``decode`` convert between the pair
    view and the flat index.
    """

    context: Presheaf
    type: TypeOverContext
    presheaf: Presheaf
    p: PresheafMap
    v: TermOverContext
    offsets: Mapping[tuple[str, int], int]

    def encode(self, obj: str, g: int, a: int) -> int:
        return self.offsets[(obj, g)] + a

    def decode(self, obj: str, value: int) -> tuple[int, int]:
        g = self.p.apply(obj, value)
        return g, value - self.offsets[(obj, g)]


def comprehension(a: TypeOverContext) -> Comprehension:
    gamma = a.context
    c = gamma.base
    offsets, sizes = {}, {}
    for i in c.objects:
        acc = 0
        for g in gamma.elements(i):
            offsets[(i, g)] = acc
            acc += a.fiber[(i, g)]
        sizes[i] = acc
    action = {}
    for f in c.morphisms:
        i, j = c.src[f], c.dst[f]
        vals = []
        for g in gamma.elements(j):
            g2 = gamma.act(f, g)
            for x in range(a.fiber[(j, g)]):
                vals.append(offsets[(i, g2)] + a.restrict(f, g, x))
        action[f] = tuple(vals)
    ext = Presheaf(c, sizes, action)
    p = PresheafMap(ext, gamma,
                    {i: tuple(g for g in gamma.elements(i)
                              for _ in range(a.fiber[(i, g)]))
                     for i in c.objects})
    va = subst_type(a, p)
    v = TermOverContext(va, {(i, offsets[(i, g)] + x): x
                             for i in c.objects for g in gamma.elements(i)
                             for x in range(a.fiber[(i, g)])})
    return Comprehension(gamma, a, ext, p, v, offsets)


def q_map(a: TypeOverContext, s: PresheafMap) -> PresheafMap:
    """The lift ``Delta.A[s] -> Gamma.A`` of a substitution."""
    ca = comprehension(a)
    cs = comprehension(subst_type(a, s))
    delta, c = s.source, s.source.base
    comp = {}
    for i in c.objects:
        vals = []
        for d in delta.elements(i):
            g = s.apply(i, d)
            for x in range(a.fiber[(i, g)]):
                vals.append(ca.encode(i, g, x))
        comp[i] = tuple(vals)
    return PresheafMap(cs.presheaf, ca.presheaf, comp)


def bar(t: TermOverContext) -> PresheafMap:
    """The section ``Gamma -> Gamma.A`` induced by a term of ``A``."""
    ca = comprehension(t.type)
    gamma = t.type.context
    return PresheafMap(gamma, ca.presheaf,
                       {i: tuple(ca.encode(i, g, t.pick[(i, g)])
                                 for g in gamma.elements(i))
                        for i in gamma.base.objects})


# ---------------------------------------------------------------------------
# Conversions between types and presheaves on the category of elements


def type_to_elements_presheaf(a: TypeOverContext, el: Elements) -> Presheaf:
    gamma = a.context
    c = gamma.base
    sizes = {el.obj_name(i, g): a.fiber[(i, g)]
             for i in c.objects for g in gamma.elements(i)}
    action = {}
    for f in c.morphisms:
        for g in gamma.elements(c.dst[f]):
            action[f"{f}#{g}"] = a.restriction[(f, g)]
    return Presheaf(el.cat, sizes, action)


def elements_presheaf_to_type(p: Presheaf, gamma: Presheaf, el: Elements) -> TypeOverContext:
    c = gamma.base
    fiber = {(i, g): p.sizes[el.obj_name(i, g)]
             for i in c.objects for g in gamma.elements(i)}
    restriction = {(f, g): p.action[f"{f}#{g}"]
                   for f in c.morphisms for g in gamma.elements(c.dst[f])}
    return TypeOverContext(gamma, fiber, restriction)


def type_maps(a: TypeOverContext, b: TypeOverContext, el: Elements | None = None) -> list[TypeMap]:
    """All fiberwise natural maps ``a -> b``, canonically ordered."""
    if el is None:
        el = category_of_elements(a.context)
    pa = type_to_elements_presheaf(a, el)
    pb = type_to_elements_presheaf(b, el)
    out = []
    for m in hom_maps(pa, pb):
        comp = {el.split_obj(o): m.component[o] for o in el.cat.objects}
        out.append(TypeMap(a, b, comp))
    return out


def terms_of(a: TypeOverContext, el: Elements | None = None) -> list[TermOverContext]:
    """All sections of a type, canonically ordered."""
    if el is None:
        el = category_of_elements(a.context)
    pa = type_to_elements_presheaf(a, el)
    one = terminal_presheaf(el.cat)
    out = []
    for m in hom_maps(one, pa):
        out.append(TermOverContext(a, {el.split_obj(o): m.component[o][0]
                                       for o in el.cat.objects}))
    return out


# ---------------------------------------------------------------------------
# Dependent sums and products


@dataclass(frozen=True)
class Sigma:
    """``Sigma A B`` over ``Gamma`` for ``B`` over ``Gamma.A``; fibers are
    pairs ``(a, b)`` numbered a-major."""

    type: TypeOverContext
    base_type: TypeOverContext
    dep_type: TypeOverContext
    comp: Comprehension
    offsets: Mapping[tuple[str, int, int], int]

    def pair(self, obj: str, g: int, a: int, b: int) -> int:
        return self.offsets[(obj, g, a)] + b

    def split(self, obj: str, g: int, v: int) -> tuple[int, int]:
        a = 0
        fibers = self.base_type.fiber[(obj, g)]
        for cand in range(fibers - 1, -1, -1):
            if self.offsets[(obj, g, cand)] <= v:
                a = cand
                break
        return a, v - self.offsets[(obj, g, a)]


def sigma_type(a: TypeOverContext, b: TypeOverContext) -> Sigma:
    ca = comprehension(a)
    assert b.context == ca.presheaf, "Sigma needs B over Gamma.A"
    gamma = a.context
    c = gamma.base
    offsets, fiber = {}, {}
    for i in c.objects:
        for g in gamma.elements(i):
            acc = 0
            for x in range(a.fiber[(i, g)]):
                offsets[(i, g, x)] = acc
                acc += b.fiber[(i, ca.encode(i, g, x))]
            fiber[(i, g)] = acc
    restriction = {}
    for f in c.morphisms:
        i, j = c.src[f], c.dst[f]
        for g in gamma.elements(j):
            g2 = gamma.act(f, g)
            vals = []
            for x in range(a.fiber[(j, g)]):
                x2 = a.restrict(f, g, x)
                rb = b.restriction[(f, ca.encode(j, g, x))]
                for y in range(b.fiber[(j, ca.encode(j, g, x))]):
                    vals.append(offsets[(i, g2, x2)] + rb[y])
            restriction[(f, g)] = tuple(vals)
    t = TypeOverContext(gamma, fiber, restriction)
    return Sigma(t, a, b, ca, offsets)


@dataclass(frozen=True)
class Pi:
    """``Pi A B`` over ``Gamma``: fibers are natural families assigning to
    each ``f : J -> I`` and ``x in A(J, g.f)`` a value of ``B`` there."""

    type: TypeOverContext
    base_type: TypeOverContext
    dep_type: TypeOverContext
    comp: Comprehension
    slots: Mapping[tuple[str, int], tuple[tuple[str, str, int], ...]]
    families: Mapping[tuple[str, int], tuple[tuple[int, ...], ...]]

    def family(self, obj: str, g: int, idx: int) -> tuple[int, ...]:
        return self.families[(obj, g)][idx]

    def family_index(self, obj: str, g: int, fam: tuple[int, ...]) -> int:
        return self.families[(obj, g)].index(fam)

    def app(self, obj: str, g: int, idx: int, a: int) -> int:
        """Apply a function element at ``a in A(obj, g)`` (identity slot)."""
        c = self.type.context.base
        k = self.slots[(obj, g)].index((obj, c.id(obj), a))
        return self.families[(obj, g)][idx][k]

    def intro(self, body: TermOverContext) -> TermOverContext:
        """Abstract a section of ``B`` over ``Gamma.A`` into a section of Pi."""
        assert body.type == self.dep_type
        gamma = self.type.context
        pick = {}
        for i in gamma.base.objects:
            for g in gamma.elements(i):
                fam = tuple(body.pick[(j, self.comp.encode(j, gamma.act(f, g), x))]
                            for (j, f, x) in self.slots[(i, g)])
                pick[(i, g)] = self.family_index(i, g, fam)
        return TermOverContext(self.type, pick)


def pi_type(a: TypeOverContext, b: TypeOverContext) -> Pi:
    ca = comprehension(a)
    assert b.context == ca.presheaf, "Pi needs B over Gamma.A"
    gamma = a.context
    c = gamma.base
    slots, families = {}, {}
    for i in c.objects:
        for g in gamma.elements(i):
            sl = [(j, f, x) for j in c.objects for f in c.hom(j, i)
                  for x in range(a.fiber[(j, gamma.act(f, g))])]
            index = {s: k for k, s in enumerate(sl)}
            sizes = [b.fiber[(j, ca.encode(j, gamma.act(f, g), x))] for (j, f, x) in sl]
            rules = []
            for (j, f, x) in sl:
                gf = gamma.act(f, g)
                for m in c.morphisms:
                    if c.dst[m] != j or c.is_identity(m):
                        continue
                    k = c.src[m]
                    rules.append((index[(j, f, x)],
                                  index[(k, c.compose(f, m), a.restrict(m, gf, x))],
                                  b.restriction[(m, ca.encode(j, gf, x))]))
            slots[(i, g)] = tuple(sl)
            families[(i, g)] = tuple(enumerate_families(len(sl), sizes, rules))
    fiber = {k: len(v) for k, v in families.items()}
    restriction = {}
    for h in c.morphisms:
        i2, i = c.src[h], c.dst[h]
        for g in gamma.elements(i):
            g2 = gamma.act(h, g)
            vals = []
            for fam in families[(i, g)]:
                restricted = tuple(fam[slots[(i, g)].index((j, c.compose(h, f), x))]
                                   for (j, f, x) in slots[(i2, g2)])
                vals.append(families[(i2, g2)].index(restricted))
            restriction[(h, g)] = tuple(vals)
    t = TypeOverContext(gamma, fiber, restriction)
    return Pi(t, a, b, ca, slots, families)


def type_terminal(gamma: Presheaf) -> TypeOverContext:
    """The type with a single point in every fiber over ``gamma``."""
    c = gamma.base
    fiber = {(i, g): 1 for i in c.objects for g in gamma.elements(i)}
    restriction = {(f, g): (0,) for f in c.morphisms
                   for g in gamma.elements(c.dst[f])}
    return TypeOverContext(gamma, fiber, restriction)


@dataclass(frozen=True)
class TypeProduct:
    """Fiberwise binary product of two types over the same context."""

    type: TypeOverContext
    left: TypeOverContext
    right: TypeOverContext

    def pair(self, obj: str, g: int, x: int, y: int) -> int:
        return x * self.right.fiber[(obj, g)] + y

    def split(self, obj: str, g: int, v: int) -> tuple[int, int]:
        n = self.right.fiber[(obj, g)]
        return v // n, v % n

    @property
    def fst(self) -> TypeMap:
        comp = {k: tuple(self.split(k[0], k[1], v)[0] for v in range(n))
                for k, n in self.type.fiber.items()}
        return TypeMap(self.type, self.left, comp)

    @property
    def snd(self) -> TypeMap:
        comp = {k: tuple(self.split(k[0], k[1], v)[1] for v in range(n))
                for k, n in self.type.fiber.items()}
        return TypeMap(self.type, self.right, comp)


def type_product(a: TypeOverContext, b: TypeOverContext) -> TypeProduct:
    assert a.context == b.context
    gamma = a.context
    c = gamma.base
    fiber = {k: a.fiber[k] * b.fiber[k] for k in a.fiber}
    restriction = {}
    for f in c.morphisms:
        j = c.dst[f]
        for g in gamma.elements(j):
            ra, rb = a.restriction[(f, g)], b.restriction[(f, g)]
            n2 = b.fiber[(c.src[f], gamma.act(f, g))]
            vals = []
            for x in range(a.fiber[(j, g)]):
                for y in range(b.fiber[(j, g)]):
                    vals.append(ra[x] * n2 + rb[y])
            restriction[(f, g)] = tuple(vals)
    return TypeProduct(TypeOverContext(gamma, fiber, restriction), a, b)


def sub_type(a: TypeOverContext,
             keep: Mapping[tuple[str, int], frozenset[int]]) -> tuple[TypeOverContext, TypeMap]:
    """Carve out a fiberwise subset closed under restriction, renumbered
    canonically, together with its inclusion into ``a``."""
    gamma = a.context
    c = gamma.base
    kept = {k: tuple(sorted(keep.get(k, frozenset()))) for k in a.fiber}
    index = {k: {x: n for n, x in enumerate(v)} for k, v in kept.items()}
    fiber = {k: len(v) for k, v in kept.items()}
    restriction = {}
    for f in c.morphisms:
        j = c.dst[f]
        for g in gamma.elements(j):
            key = (c.src[f], gamma.act(f, g))
            table = a.restriction[(f, g)]
            vals = []
            for x in kept[(j, g)]:
                if table[x] not in index[key]:
                    raise ModelError(f"subset not closed under {f!r} at {(j, g, x)}")
                vals.append(index[key][table[x]])
            restriction[(f, g)] = tuple(vals)
    s = TypeOverContext(gamma, fiber, restriction)
    inc = TypeMap(s, a, {k: kept[k] for k in kept})
    return s, inc


def type_exponential(a: TypeOverContext, b: TypeOverContext) -> Pi:
    """Exponential ``B^A`` in the fiber over the context: the dependent
    product along ``A`` of ``B`` weakened to ``Gamma.A``."""
    assert a.context == b.context
    return pi_type(a, subst_type(b, comprehension(a).p))


def exp_ev(e: Pi, pr: TypeProduct, b: TypeOverContext) -> TypeMap:
    """Evaluation ``B^A x A -> B`` for an exponential built by
    ``type_exponential(a, b)``, with ``pr = type_product(e.type, a)``."""
    assert pr.left == e.type and pr.right == e.base_type
    comp = {}
    for (i, g), n in pr.type.fiber.items():
        vals = []
        for v in range(n):
            w, x = pr.split(i, g, v)
            vals.append(e.app(i, g, w, x))
        comp[(i, g)] = tuple(vals)
    return TypeMap(pr.type, b, comp)


def exp_transpose(e: Pi, pr: TypeProduct, m: TypeMap) -> TypeMap:
    """Curry ``m : C x A -> B`` through ``type_exponential(a, b)`` into
    ``C -> B^A``, with ``pr = type_product(c, a)``."""
    c_type = pr.left
    assert pr.right == e.base_type and m.source == pr.type
    gamma = c_type.context
    comp = {}
    for (i, g), n in c_type.fiber.items():
        vals = []
        for c in range(n):
            fam = []
            for (j, f, x) in e.slots[(i, g)]:
                gf = gamma.act(f, g)
                cf = c_type.restrict(f, g, c)
                fam.append(m.component[(j, gf)][pr.pair(j, gf, cf, x)])
            vals.append(e.family_index(i, g, tuple(fam)))
        comp[(i, g)] = tuple(vals)
    return TypeMap(c_type, e.type, comp)


# ---------------------------------------------------------------------------
# Display maps and straightening


def fibers_of(m: PresheafMap, obj: str, y: int) -> tuple[int, ...]:
    return tuple(x for x in m.source.elements(obj) if m.component[obj][x] == y)


def is_display(m: PresheafMap, bound: int) -> bool:
    return all(len(fibers_of(m, o, y)) <= bound
               for o in m.source.base.objects for y in m.target.elements(o))


def straighten(m: PresheafMap) -> tuple[TypeOverContext, PresheafMap]:
    """Turn a presheaf map into a type over its target, plus the canonical
    iso ``target.A -> source`` over the target."""
    gamma, e = m.target, m.source
    c = gamma.base
    lists = {(i, g): fibers_of(m, i, g) for i in c.objects for g in gamma.elements(i)}
    pos = {k: {x: n for n, x in enumerate(v)} for k, v in lists.items()}
    fiber = {k: len(v) for k, v in lists.items()}
    restriction = {}
    for f in c.morphisms:
        i, j = c.src[f], c.dst[f]
        for g in gamma.elements(j):
            g2 = gamma.act(f, g)
            restriction[(f, g)] = tuple(pos[(i, g2)][e.act(f, x)] for x in lists[(j, g)])
    a = TypeOverContext(gamma, fiber, restriction)
    ca = comprehension(a)
    comp = {}
    for i in c.objects:
        vals = []
        for v in range(ca.presheaf.sizes[i]):
            g, x = ca.decode(i, v)
            vals.append(lists[(i, g)][x])
        comp[i] = tuple(vals)
    iso = PresheafMap(ca.presheaf, e, comp)
    return a, iso


# ---------------------------------------------------------------------------
# The model and its universe


@dataclass(frozen=True)
class NaturalModel:
    """A presheaf natural model: a base category and a display bound."""

    base: FinCat
    bound: int
    _elements_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def elements(self, gamma: Presheaf) -> Elements:
        el = self._elements_cache.get(gamma)
        if el is None:
            el = category_of_elements(gamma)
            self._elements_cache[gamma] = el
        return el

    def terminal(self) -> Presheaf:
        return terminal_presheaf(self.base)


def all_presheaves(c: FinCat, bound: int) -> list[Presheaf]:
    """Every presheaf on ``c`` with all carriers of size <= bound, in a
    deterministic order (sizes, then actions, lexicographically)."""
    objs = list(c.objects)
    non_id = [m for m in c.morphisms if not c.is_identity(m)]
    out = []
    for sizes_t in iproduct(range(bound + 1), repeat=len(objs)):
        sizes = dict(zip(objs, sizes_t))
        choices = []
        feasible = True
        for m in non_id:
            dom, cod = sizes[c.dst[m]], sizes[c.src[m]]
            tables = list(iproduct(range(cod), repeat=dom))
            if not tables:
                feasible = False
                break
            choices.append(tables)
        if not feasible:
            continue
        for combo in iproduct(*choices):
            action = dict(zip(non_id, combo))
            for o in objs:
                action[c.id(o)] = tuple(range(sizes[o]))
            p = Presheaf(c, sizes, action)
            if not p.validate():
                out.append(p)
    return out


def all_types_over(model: NaturalModel, gamma: Presheaf, bound: int) -> list[TypeOverContext]:
    el = model.elements(gamma)
    return [elements_presheaf_to_type(p, gamma, el)
            for p in all_presheaves(el.cat, bound)]


@dataclass(frozen=True)
class Universe:
    """The slice-functor universe at the model's display bound.

    A code at ``I`` is a presheaf on ``C/I`` with carriers of size at
    most the bound; restriction precomposes with the postcomposition
    functor between slices, which is strictly functorial on the nose.
    """

    model: NaturalModel
    presheaf: Presheaf
    pointed: Presheaf
    proj: PresheafMap
    slices: Mapping[str, Slice]
    codes: Mapping[str, tuple[Presheaf, ...]]
    point_pairs: Mapping[str, tuple[tuple[int, int], ...]]

    def code(self, obj: str, idx: int) -> Presheaf:
        return self.codes[obj][idx]

    def code_index(self, obj: str, code: Presheaf) -> int:
        return self.codes[obj].index(code)

    # decode / encode ------------------------------------------------------
    def decode(self, code_map: PresheafMap) -> TypeOverContext:
        """The type classified by a map ``Gamma -> U``."""
        assert code_map.target == self.presheaf
        gamma = code_map.source
        c = self.model.base
        fiber, restriction = {}, {}
        for i in c.objects:
            for g in gamma.elements(i):
                x = self.codes[i][code_map.apply(i, g)]
                fiber[(i, g)] = x.sizes[c.id(i)]
        for f in c.morphisms:
            i, j = c.src[f], c.dst[f]
            for g in gamma.elements(j):
                x = self.codes[j][code_map.apply(j, g)]
                restriction[(f, g)] = x.action[f"{f}@{c.id(j)}"]
        return TypeOverContext(gamma, fiber, restriction)

    def encode(self, a: TypeOverContext) -> PresheafMap:
        """The classifying map of a bounded type; raises on fat fibers."""
        if a.max_fiber() > self.model.bound:
            raise BoundExceeded(
                f"fiber of size {a.max_fiber()} exceeds display bound {self.model.bound}")
        gamma = a.context
        c = self.model.base
        comp = {}
        for i in c.objects:
            sl = self.slices[i].cat
            vals = []
            for g in gamma.elements(i):
                sizes = {f: a.fiber[(c.src[f], gamma.act(f, g))] for f in sl.objects}
                action = {}
                for n in sl.morphisms:
                    h, f = n.split("@", 1)
                    action[n] = a.restriction[(h, gamma.act(f, g))]
                vals.append(self.code_index(i, Presheaf(sl, sizes, action)))
            comp[i] = tuple(vals)
        return PresheafMap(gamma, self.presheaf, comp)

    def point_index(self, obj: str, code_idx: int, x: int) -> int:
        return self.point_pairs[obj].index((code_idx, x))


def hs_universe(model: NaturalModel) -> Universe:
    c = model.base
    slices = {i: slice_category(c, i) for i in c.objects}
    codes = {i: tuple(all_presheaves(slices[i].cat, model.bound)) for i in c.objects}
    code_index = {i: {p: n for n, p in enumerate(codes[i])} for i in c.objects}
    sizes = {i: len(codes[i]) for i in c.objects}

    def restrict_code(f: str, x: Presheaf) -> Presheaf:
        # precompose with C/src(f) -> C/dst(f)
        j, i = c.src[f], c.dst[f]
        sl_j = slices[j].cat
        new_sizes = {g: x.sizes[c.compose(f, g)] for g in sl_j.objects}
        new_action = {}
        for n in sl_j.morphisms:
            h, g = n.split("@", 1)
            new_action[n] = x.action[f"{h}@{c.compose(f, g)}"]
        return Presheaf(sl_j, new_sizes, new_action)

    action = {}
    for f in c.morphisms:
        i = c.dst[f]
        action[f] = tuple(code_index[c.src[f]][restrict_code(f, x)] for x in codes[i])
    u = Presheaf(c, sizes, action)

    point_pairs = {i: tuple((n, x) for n in range(len(codes[i]))
                            for x in range(codes[i][n].sizes[c.id(i)]))
                   for i in c.objects}
    pt_index = {i: {p: n for n, p in enumerate(point_pairs[i])} for i in c.objects}
    pt_sizes = {i: len(point_pairs[i]) for i in c.objects}
    pt_action = {}
    for f in c.morphisms:
        i, j = c.src[f], c.dst[f]
        vals = []
        for (n, x) in point_pairs[j]:
            code = codes[j][n]
            n2 = action[f][n]
            x2 = code.action[f"{f}@{c.id(j)}"][x]
            vals.append(pt_index[i][(n2, x2)])
        pt_action[f] = tuple(vals)
    upt = Presheaf(c, pt_sizes, pt_action)
    proj = PresheafMap(upt, u, {i: tuple(n for (n, _) in point_pairs[i])
                                for i in c.objects})
    return Universe(model, u, upt, proj, slices, codes, point_pairs)


# ---------------------------------------------------------------------------
# Checks: typing equivalence, classifier, realignment, display topos


def all_display_maps_into(model: NaturalModel, gamma: Presheaf, size_bound: int) -> list[PresheafMap]:
    """Every display map with target ``gamma`` whose source has carriers
    of size at most ``size_bound``."""
    out = []
    for e in all_presheaves(model.base, size_bound):
        for m in hom_maps(e, gamma):
            if is_display(m, model.bound):
                out.append(m)
    return out


def typing_check(model: NaturalModel, gamma: Presheaf, size_bound: int | None = None) -> dict:
    """Comprehension is an equivalence onto display maps over ``gamma``.

    Essential surjectivity: every display map (with source bounded by
    ``size_bound``) is isomorphic over ``gamma`` to the projection of its
    straightening.  Full faithfulness: type maps correspond exactly to
    maps over ``gamma`` between the comprehensions.
    """
    if size_bound is None:
        size_bound = model.bound * max(1, max(gamma.sizes.values(), default=1))
    report = {"essential_surjectivity": True, "fully_faithful": True,
              "display_maps": 0, "type_pairs": 0}
    for m in all_display_maps_into(model, gamma, size_bound):
        report["display_maps"] += 1
        a, iso = straighten(m)
        ca = comprehension(a)
        iso.assert_valid()
        if not iso.is_iso() or compose_maps(m, iso) != ca.p:
            report["essential_surjectivity"] = False
            report["witness"] = (m, a)
            return report
    el = model.elements(gamma)
    types = all_types_over(model, gamma, model.bound)
    for a in types:
        ca = comprehension(a)
        for b in types:
            report["type_pairs"] += 1
            cb = comprehension(b)
            tms = type_maps(a, b, el)
            over = [h for h in hom_maps(ca.presheaf, cb.presheaf)
                    if compose_maps(cb.p, h) == ca.p]
            induced = set()
            for tm in tms:
                comp = {i: tuple(cb.encode(i, g, tm.apply(i, g, x))
                                 for g in gamma.elements(i)
                                 for x in range(a.fiber[(i, g)]))
                        for i in gamma.base.objects}
                induced.add(PresheafMap(ca.presheaf, cb.presheaf, comp))
            if induced != set(over) or len(induced) != len(tms):
                report["fully_faithful"] = False
                report["witness"] = (a, b)
                return report
    return report


def classifier_check(u: Universe, size_bound: int | None = None) -> dict:
    """``U(I)`` agrees with bounded types over ``y(I)``, naturally in ``I``.

    The bijection sends a code (a presheaf on ``C/I``) to the type over
    the representable whose fiber at ``f`` is the code's carrier there.
    Naturality compares code restriction with substitution along the
    Yoneda action.
    """
    from .presheaf import yoneda, yoneda_label, yoneda_map
    model = u.model
    c = model.base
    report = {"bijective": True, "natural": True}

    def code_to_type(i: str, idx: int) -> TypeOverContext:
        x = u.codes[i][idx]
        yi = yoneda(c, i)
        fiber, restriction = {}, {}
        for j in c.objects:
            for n, f in enumerate(c.hom(j, i)):
                fiber[(j, n)] = x.sizes[f]
        for g in c.morphisms:
            j2, j = c.src[g], c.dst[g]
            for n, f in enumerate(c.hom(j, i)):
                restriction[(g, n)] = x.action[f"{g}@{f}"]
        return TypeOverContext(yi, fiber, restriction)

    for i in c.objects:
        yi = yoneda(c, i)
        types = {t for t in (code_to_type(i, n) for n in range(len(u.codes[i])))}
        bounded = set(all_types_over(model, yi, model.bound))
        if types != bounded or len(u.codes[i]) != len(types):
            report["bijective"] = False
            report["witness"] = i
            return report
    for f in c.morphisms:
        j, i = c.src[f], c.dst[f]
        yf = yoneda_map(c, f)
        for n in range(len(u.codes[i])):
            lhs = code_to_type(j, u.presheaf.act(f, n))
            rhs = subst_type(code_to_type(i, n), yf)
            if lhs != rhs:
                report["natural"] = False
                report["witness"] = (f, n)
                return report
    return report


def realign(u: Universe, mono: PresheafMap, a_code: PresheafMap,
            b_code: PresheafMap, phi: TypeMap) -> tuple[PresheafMap, TypeMap]:
    """Strict realignment along a monomorphism.

    Given codes ``A`` on the subobject and ``B`` on the whole context
    and an iso ``phi : decode(A) -> decode(B)[mono]``, produce a code
    ``B'`` on the whole context restricting to ``A`` on the nose and an
    iso ``phi' : decode(B') -> decode(B)`` restricting to ``phi``.

    The realigned type copies ``decode(A)`` fibers over the image of the
    mono and keeps ``decode(B)`` fibers elsewhere; restrictions crossing
    into the image are rerouted through ``phi`` inverse.
    """
    assert mono.is_mono(), "realignment needs a monomorphism"
    delta, gamma = mono.source, mono.target
    c = gamma.base
    ta = u.decode(a_code)
    tb = u.decode(b_code)
    assert phi.source == ta and phi.target == subst_type(tb, mono)
    phi_inv = phi.inverse()
    preimage = {(i, mono.apply(i, d)): d
                for i in c.objects for d in delta.elements(i)}

    fiber, restriction = {}, {}
    for i in c.objects:
        for g in gamma.elements(i):
            d = preimage.get((i, g))
            fiber[(i, g)] = ta.fiber[(i, d)] if d is not None else tb.fiber[(i, g)]
    for f in c.morphisms:
        i, j = c.src[f], c.dst[f]
        for g in gamma.elements(j):
            g2 = gamma.act(f, g)
            d, d2 = preimage.get((j, g)), preimage.get((i, g2))
            if d is not None:
                # image is closed under restriction
                restriction[(f, g)] = ta.restriction[(f, d)]
            elif d2 is None:
                restriction[(f, g)] = tb.restriction[(f, g)]
            else:
                rb = tb.restriction[(f, g)]
                restriction[(f, g)] = tuple(phi_inv.component[(i, d2)][v] for v in rb)
    tb2 = TypeOverContext(gamma, fiber, restriction).assert_valid()
    b2_code = u.encode(tb2)
    comp = {}
    for i in c.objects:
        for g in gamma.elements(i):
            d = preimage.get((i, g))
            if d is not None:
                comp[(i, g)] = phi.component[(i, d)]
            else:
                comp[(i, g)] = tuple(range(tb.fiber[(i, g)]))
    phi2 = TypeMap(tb2, tb, comp).assert_valid()
    return b2_code, phi2


def realignment_check(u: Universe, size_bound: int, max_cases: int | None = None) -> dict:
    """Full enumeration of realignment problems within a size bound.

    Every mono between presheaves with carriers of size at most
    ``size_bound``, every pair of codes, every iso between the decoded
    types; checks that :func:`realign` returns data satisfying the two
    strict equations and the compatibility of the isos.
    """
    from .presheaf import mono_maps
    model = u.model
    c = model.base
    cases = 0
    contexts = all_presheaves(c, size_bound)
    for delta in contexts:
        for gamma in contexts:
            for mono in mono_maps(delta, gamma):
                for a_code in hom_maps(delta, u.presheaf):
                    ta = u.decode(a_code)
                    for b_code in hom_maps(gamma, u.presheaf):
                        tbm = subst_type(u.decode(b_code), mono)
                        for phi in type_maps(ta, tbm):
                            if not phi.is_iso():
                                continue
                            cases += 1
                            if max_cases is not None and cases > max_cases:
                                return {"ok": True, "cases": cases - 1, "truncated": True}
                            b2, phi2 = realign(u, mono, a_code, b_code, phi)
                            if compose_maps(b2, mono) != a_code:
                                return {"ok": False, "cases": cases,
                                        "reason": "code does not restrict on the nose"}
                            if not phi2.is_iso() or subst_type_map(phi2, mono) != phi:
                                return {"ok": False, "cases": cases,
                                        "reason": "iso does not restrict to phi"}
                            if u.decode(b2) != phi2.source:
                                return {"ok": False, "cases": cases,
                                        "reason": "decoded realigned code disagrees"}
    return {"ok": True, "cases": cases, "truncated": False}


def display_topos_check(model: NaturalModel, size_bound: int = 2) -> dict:
    """Monos are display maps, and the sieve classifier is bound-small.

    The first half holds whenever the bound is at least one; the second
    depends on the base category and is reported honestly either way.
    """
    from .presheaf import subobject_classifier, mono_maps
    c = model.base
    monos_display = model.bound >= 1
    if monos_display:
        for p in all_presheaves(c, size_bound):
            for q in all_presheaves(c, size_bound):
                for m in mono_maps(p, q):
                    if not is_display(m, model.bound):
                        monos_display = False
                        break
    om = subobject_classifier(c)
    omega_max = max(om.presheaf.sizes.values(), default=0)
    return {"monos_are_display": monos_display,
            "omega_max": omega_max,
            "omega_bounded": omega_max <= model.bound,
            "ok": monos_display and omega_max <= model.bound}
