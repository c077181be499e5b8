"""Finite-set-valued presheaves over a table category.

Carriers are always the canonical sets ``{0, ..., n-1}``; every
construction renumbers its result canonically, which is what makes all
the strictness claims downstream (substitution, universes, comonads)
hold as data equality rather than up to isomorphism.

The workhorse is :func:`enumerate_families`, a small backtracking
enumerator for tuples subject to ``fam[j] == table[fam[i]]`` rules.
Exponentials, right Kan extensions, matching families and (later)
dependent products are all the same enumeration with different slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .fincat import FinCat, Functor, Site, FinCatError


class PresheafError(Exception):
    pass


def enumerate_families(n_slots: int, sizes: Sequence[int],
                       rules: Iterable[tuple[int, int, Sequence[int]]]):
    """All tuples ``fam`` with ``fam[j] == table[fam[i]]`` for each rule.

    Slots are filled in index order with values tried in increasing
    order, so the output is automatically in lexicographic order (and
    therefore canonical).  Rules are checked as soon as both endpoints
    are assigned, which prunes hard enough for every instance we build.
    """
    by_slot: list[list[tuple[int, int, Sequence[int]]]] = [[] for _ in range(n_slots)]
    for (i, j, table) in rules:
        by_slot[max(i, j)].append((i, j, table))
    out = []
    fam = [0] * n_slots

    def consistent(k: int) -> bool:
        for (i, j, table) in by_slot[k]:
            if fam[j] != table[fam[i]]:
                return False
        return True

    def go(k: int):
        if k == n_slots:
            out.append(tuple(fam))
            return
        for v in range(sizes[k]):
            fam[k] = v
            if consistent(k):
                go(k + 1)
        fam[k] = 0

    go(0)
    return out


@dataclass(frozen=True)
class Presheaf:
    """A presheaf ``P`` on ``base`` with ``P(I) = range(sizes[I])``.

    ``action[f]`` for ``f : I -> J`` is the restriction function
    ``P(J) -> P(I)`` stored as a tuple indexed by elements of ``P(J)``.
    """

    base: FinCat
    sizes: Mapping[str, int]
    action: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "sizes", dict(self.sizes))
        object.__setattr__(self, "action",
                           {m: tuple(t) for m, t in dict(self.action).items()})

    def __eq__(self, other):
        if not isinstance(other, Presheaf):
            return NotImplemented
        return (self.base == other.base and self.sizes == other.sizes
                and self.action == other.action)

    def __hash__(self):
        return hash((tuple(sorted(self.sizes.items())),
                     tuple(sorted(self.action.items()))))

    def size(self, obj: str) -> int:
        return self.sizes[obj]

    def elements(self, obj: str) -> range:
        return range(self.sizes[obj])

    def act(self, f: str, x: int) -> int:
        """Restriction of ``x in P(dst f)`` along ``f``."""
        return self.action[f][x]

    def total(self) -> int:
        return sum(self.sizes.values())

    def validate(self) -> list[str]:
        c = self.base
        errs = []
        for o in c.objects:
            if self.sizes.get(o, -1) < 0:
                errs.append(f"missing carrier size at {o!r}")
        for f in c.morphisms:
            t = self.action.get(f)
            if t is None:
                errs.append(f"missing action along {f!r}")
                continue
            if len(t) != self.sizes[c.dst[f]]:
                errs.append(f"action along {f!r} has wrong domain size")
                continue
            if any(not (0 <= v < self.sizes[c.src[f]]) for v in t):
                errs.append(f"action along {f!r} escapes its codomain")
        if errs:
            return errs
        for o in c.objects:
            if self.action[c.id(o)] != tuple(range(self.sizes[o])):
                errs.append(f"identity action at {o!r} is not the identity")
        for g in c.morphisms:
            for f in c.morphisms:
                if c.dst[f] != c.src[g]:
                    continue
                gf = c.compose(g, f)
                got = tuple(self.action[f][self.action[g][z]]
                            for z in range(self.sizes[c.dst[g]]))
                if got != self.action[gf]:
                    errs.append(f"contravariant functoriality fails at ({g!r}, {f!r})")
        return errs

    def assert_valid(self):
        errs = self.validate()
        if errs:
            raise PresheafError("presheaf: " + "; ".join(errs[:8]))
        return self


@dataclass(frozen=True)
class PresheafMap:
    """A natural transformation, one function per object."""

    source: Presheaf
    target: Presheaf
    component: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "component",
                           {o: tuple(t) for o, t in dict(self.component).items()})

    def __eq__(self, other):
        if not isinstance(other, PresheafMap):
            return NotImplemented
        return (self.source == other.source and self.target == other.target
                and self.component == other.component)

    def __hash__(self):
        return hash(tuple(sorted(self.component.items())))

    def apply(self, obj: str, x: int) -> int:
        return self.component[obj][x]

    def validate(self) -> list[str]:
        if self.source.base != self.target.base:
            return ["source and target live over different categories"]
        c = self.source.base
        errs = []
        for o in c.objects:
            t = self.component.get(o)
            if t is None or len(t) != self.source.sizes[o]:
                errs.append(f"bad component at {o!r}")
            elif any(not (0 <= v < self.target.sizes[o]) for v in t):
                errs.append(f"component at {o!r} escapes the target")
        if errs:
            return errs
        for f in c.morphisms:
            i, j = c.src[f], c.dst[f]
            for x in range(self.source.sizes[j]):
                if self.component[i][self.source.act(f, x)] != \
                        self.target.act(f, self.component[j][x]):
                    errs.append(f"naturality fails along {f!r} at {x}")
                    break
        return errs

    def assert_valid(self):
        errs = self.validate()
        if errs:
            raise PresheafError("presheaf map: " + "; ".join(errs[:8]))
        return self

    def is_mono(self) -> bool:
        return all(len(set(self.component[o])) == self.source.sizes[o]
                   for o in self.source.base.objects)

    def is_iso(self) -> bool:
        return self.is_mono() and all(
            self.source.sizes[o] == self.target.sizes[o]
            for o in self.source.base.objects)

    def inverse(self) -> "PresheafMap":
        assert self.is_iso(), "not an isomorphism"
        comp = {}
        for o in self.source.base.objects:
            inv = [0] * self.target.sizes[o]
            for x, y in enumerate(self.component[o]):
                inv[y] = x
            comp[o] = tuple(inv)
        return PresheafMap(self.target, self.source, comp)


def identity_map(p: Presheaf) -> PresheafMap:
    return PresheafMap(p, p, {o: tuple(range(p.sizes[o])) for o in p.base.objects})


def compose_maps(g: PresheafMap, f: PresheafMap) -> PresheafMap:
    assert f.target == g.source, "presheaf maps not composable"
    return PresheafMap(f.source, g.target,
                       {o: tuple(g.component[o][v] for v in f.component[o])
                        for o in f.source.base.objects})


def constant_presheaf(c: FinCat, n: int) -> Presheaf:
    return Presheaf(c, {o: n for o in c.objects},
                    {m: tuple(range(n)) for m in c.morphisms})


def terminal_presheaf(c: FinCat) -> Presheaf:
    return constant_presheaf(c, 1)


def terminal_map(p: Presheaf) -> PresheafMap:
    one = terminal_presheaf(p.base)
    return PresheafMap(p, one, {o: (0,) * p.sizes[o] for o in p.base.objects})


# ---------------------------------------------------------------------------
# Yoneda


def yoneda(c: FinCat, i: str) -> Presheaf:
    """The representable ``y(i)``; carriers follow hom-list order."""
    sizes = {j: len(c.hom(j, i)) for j in c.objects}
    action = {}
    for g in c.morphisms:
        k, j = c.src[g], c.dst[g]
        hom_j, hom_k = c.hom(j, i), c.hom(k, i)
        action[g] = tuple(hom_k.index(c.compose(f, g)) for f in hom_j)
    return Presheaf(c, sizes, action)


def yoneda_index(c: FinCat, i: str, f: str) -> int:
    """Position of ``f : J -> i`` inside ``y(i)(J)``."""
    return c.hom(c.src[f], i).index(f)


def yoneda_label(c: FinCat, i: str, j: str, idx: int) -> str:
    return c.hom(j, i)[idx]


def yoneda_map(c: FinCat, f: str) -> PresheafMap:
    """``y(f) : y(src f) -> y(dst f)`` by postcomposition."""
    i, i2 = c.src[f], c.dst[f]
    yi, yi2 = yoneda(c, i), yoneda(c, i2)
    comp = {j: tuple(yoneda_index(c, i2, c.compose(f, g)) for g in c.hom(j, i))
            for j in c.objects}
    return PresheafMap(yi, yi2, comp)


# ---------------------------------------------------------------------------
# Category of elements


@dataclass(frozen=True)
class Elements:
    """The category of elements of a presheaf, with decoding tables.

    Objects are named ``"I#x"`` for ``x in P(I)``; the morphism
    ``(I, P(f)(y)) -> (J, y)`` over ``f : I -> J`` is named ``"f#y"``.
    """

    cat: FinCat
    presheaf: Presheaf
    proj: Functor

    def obj_name(self, obj: str, x: int) -> str:
        return f"{obj}#{x}"

    def split_obj(self, name: str) -> tuple[str, int]:
        o, x = name.rsplit("#", 1)
        return o, int(x)

    def split_mor(self, name: str) -> tuple[str, int]:
        f, y = name.rsplit("#", 1)
        return f, int(y)


def category_of_elements(p: Presheaf) -> Elements:
    c = p.base
    objs = [f"{o}#{x}" for o in c.objects for x in p.elements(o)]
    src, dst, arrows = {}, {}, []
    for f in c.morphisms:
        i, j = c.src[f], c.dst[f]
        for y in p.elements(j):
            n = f"{f}#{y}"
            arrows.append(n)
            src[n] = f"{i}#{p.act(f, y)}"
            dst[n] = f"{j}#{y}"
    identity = {f"{o}#{x}": f"{c.id(o)}#{x}" for o in c.objects for x in p.elements(o)}
    table = {}
    for g in c.morphisms:
        for f in c.morphisms:
            if c.dst[f] != c.src[g]:
                continue
            gf = c.compose(g, f)
            for z in p.elements(c.dst[g]):
                # g#z : (dst f, P(g) z) -> (dst g, z), precompose with f#(P(g) z)
                table[(f"{g}#{z}", f"{f}#{p.act(g, z)}")] = f"{gf}#{z}"
    cat = FinCat(f"el[{c.name}]", tuple(objs), tuple(arrows), src, dst, identity, table)
    proj = Functor(f"pr[el]", cat, c,
                   {o: o.rsplit("#", 1)[0] for o in objs},
                   {m: m.rsplit("#", 1)[0] for m in arrows})
    return Elements(cat, p, proj)


# ---------------------------------------------------------------------------
# Hom-set enumeration, subobjects


def hom_maps(p: Presheaf, q: Presheaf) -> list[PresheafMap]:
    """Every natural transformation ``p -> q``, canonically ordered."""
    c = p.base
    slots = [(o, x) for o in c.objects for x in p.elements(o)]
    index = {s: k for k, s in enumerate(slots)}
    sizes = [q.sizes[o] for (o, _) in slots]
    rules = []
    for f in c.morphisms:
        if c.is_identity(f):
            continue
        i, j = c.src[f], c.dst[f]
        for x in p.elements(j):
            rules.append((index[(j, x)], index[(i, p.act(f, x))], q.action[f]))
    out = []
    for fam in enumerate_families(len(slots), sizes, rules):
        comp = {o: tuple(fam[index[(o, x)]] for x in p.elements(o))
                for o in c.objects}
        out.append(PresheafMap(p, q, comp))
    return out


def iso_maps(p: Presheaf, q: Presheaf) -> list[PresheafMap]:
    return [m for m in hom_maps(p, q) if m.is_iso()]


def subpresheaves(p: Presheaf) -> list[dict[str, frozenset[int]]]:
    """All subfunctors, as per-object subsets closed under the action."""
    c = p.base
    objs = list(c.objects)

    def closed(sel: dict[str, frozenset[int]]) -> bool:
        for f in c.morphisms:
            i, j = c.src[f], c.dst[f]
            if j in sel and i in sel:
                if any(p.act(f, x) not in sel[i] for x in sel[j]):
                    return False
        return True

    out = []

    def go(k: int, sel: dict[str, frozenset[int]]):
        if k == len(objs):
            out.append(dict(sel))
            return
        o = objs[k]
        n = p.sizes[o]
        for mask in range(1 << n):
            sel[o] = frozenset(x for x in range(n) if mask >> x & 1)
            # partial closure check restricted to chosen objects
            ok = True
            for f in c.morphisms:
                i, j = c.src[f], c.dst[f]
                if j in sel and i in sel:
                    if any(p.act(f, x) not in sel[i] for x in sel[j]):
                        ok = False
                        break
            if ok:
                go(k + 1, sel)
        del sel[o]

    go(0, {})
    assert all(closed(s) for s in out)
    return out


def mono_maps(p: Presheaf, q: Presheaf) -> list[PresheafMap]:
    return [m for m in hom_maps(p, q) if m.is_mono()]


def sub_presheaf(p: Presheaf, sel: Mapping[str, frozenset[int]]) -> tuple[Presheaf, PresheafMap]:
    """Renumber a subpresheaf canonically and return it with its inclusion."""
    c = p.base
    keep = {o: tuple(sorted(sel.get(o, frozenset()))) for o in c.objects}
    index = {o: {x: k for k, x in enumerate(keep[o])} for o in c.objects}
    sizes = {o: len(keep[o]) for o in c.objects}
    action = {}
    for m in c.morphisms:
        i, j = c.src[m], c.dst[m]
        column = []
        for x in keep[j]:
            y = p.act(m, x)
            if y not in index[i]:
                raise ValueError(f"selection not closed under {m!r} at {x}")
            column.append(index[i][y])
        action[m] = tuple(column)
    s = Presheaf(c, sizes, action)
    inc = PresheafMap(s, p, {o: keep[o] for o in c.objects})
    return s, inc.assert_valid()


# ---------------------------------------------------------------------------
# Finite limits with canonical carriers


@dataclass(frozen=True)
class Product:
    presheaf: Presheaf
    left: Presheaf
    right: Presheaf
    fst: PresheafMap
    snd: PresheafMap

    def pair_index(self, obj: str, x: int, y: int) -> int:
        return x * self.right.sizes[obj] + y

    def split_index(self, obj: str, v: int) -> tuple[int, int]:
        n = self.right.sizes[obj]
        return v // n, v % n

    def tuple_map(self, f: PresheafMap, g: PresheafMap) -> PresheafMap:
        """The induced map ``<f, g>`` out of a common source."""
        assert f.source == g.source
        comp = {o: tuple(self.pair_index(o, f.component[o][v], g.component[o][v])
                         for v in range(f.source.sizes[o]))
                for o in f.source.base.objects}
        return PresheafMap(f.source, self.presheaf, comp)


def product(p: Presheaf, q: Presheaf) -> Product:
    c = p.base
    sizes = {o: p.sizes[o] * q.sizes[o] for o in c.objects}
    action = {}
    for f in c.morphisms:
        j = c.dst[f]
        action[f] = tuple(p.act(f, v // q.sizes[j]) * q.sizes[c.src[f]] + q.act(f, v % q.sizes[j])
                          for v in range(sizes[j]))
    pr = Presheaf(c, sizes, action)
    fst = PresheafMap(pr, p, {o: tuple(v // q.sizes[o] for v in range(sizes[o]))
                              for o in c.objects})
    snd = PresheafMap(pr, q, {o: tuple(v % q.sizes[o] for v in range(sizes[o]))
                              for o in c.objects})
    return Product(pr, p, q, fst, snd)


@dataclass(frozen=True)
class PullbackSquare:
    presheaf: Presheaf
    to_left: PresheafMap    # into the source of f
    to_right: PresheafMap   # into the source of g
    f: PresheafMap
    g: PresheafMap
    pairs: Mapping[str, tuple[tuple[int, int], ...]]

    def pair_index(self, obj: str, x: int, y: int) -> int:
        return self.pairs[obj].index((x, y))


def pullback(f: PresheafMap, g: PresheafMap) -> PullbackSquare:
    """The pullback of ``f`` and ``g`` over their common target."""
    assert f.target == g.target, "pullback needs a cospan"
    c = f.source.base
    pairs = {o: tuple((x, y) for x in f.source.elements(o) for y in g.source.elements(o)
                      if f.component[o][x] == g.component[o][y])
             for o in c.objects}
    sizes = {o: len(pairs[o]) for o in c.objects}
    index = {o: {xy: k for k, xy in enumerate(pairs[o])} for o in c.objects}
    action = {}
    for m in c.morphisms:
        i, j = c.src[m], c.dst[m]
        action[m] = tuple(index[i][(f.source.act(m, x), g.source.act(m, y))]
                          for (x, y) in pairs[j])
    pb = Presheaf(c, sizes, action)
    to_left = PresheafMap(pb, f.source, {o: tuple(x for (x, _) in pairs[o]) for o in c.objects})
    to_right = PresheafMap(pb, g.source, {o: tuple(y for (_, y) in pairs[o]) for o in c.objects})
    return PullbackSquare(pb, to_left, to_right, f, g, pairs)


def equalizer(f: PresheafMap, g: PresheafMap) -> tuple[Presheaf, PresheafMap]:
    """Equalizer of a parallel pair, as a canonically renumbered subobject."""
    assert f.source == g.source and f.target == g.target
    c = f.source.base
    keep = {o: tuple(x for x in f.source.elements(o)
                     if f.component[o][x] == g.component[o][x])
            for o in c.objects}
    index = {o: {x: k for k, x in enumerate(keep[o])} for o in c.objects}
    sizes = {o: len(keep[o]) for o in c.objects}
    action = {m: tuple(index[c.src[m]][f.source.act(m, x)] for x in keep[c.dst[m]])
              for m in c.morphisms}
    e = Presheaf(c, sizes, action)
    inc = PresheafMap(e, f.source, {o: keep[o] for o in c.objects})
    return e, inc.assert_valid()


# ---------------------------------------------------------------------------
# Exponentials


@dataclass(frozen=True)
class Exponential:
    """``Q^P`` with its evaluation data.

    An element of ``Q^P(I)`` is a natural family indexed by slots
    ``(J, f : J -> I, x in P(J))``; ``families[I]`` lists them in
    canonical (lexicographic) order.
    """

    presheaf: Presheaf
    base_p: Presheaf
    base_q: Presheaf
    slots: Mapping[str, tuple[tuple[str, str, int], ...]]
    families: Mapping[str, tuple[tuple[int, ...], ...]]

    def family(self, obj: str, idx: int) -> tuple[int, ...]:
        return self.families[obj][idx]

    def family_index(self, obj: str, fam: tuple[int, ...]) -> int:
        return self.families[obj].index(fam)

    def slot_index(self, obj: str, j: str, f: str, x: int) -> int:
        return self.slots[obj].index((j, f, x))

    def ev_value(self, obj: str, idx: int, x: int) -> int:
        """Evaluate family ``idx`` at ``x in P(obj)`` (along the identity)."""
        c = self.presheaf.base
        return self.families[obj][idx][self.slot_index(obj, obj, c.id(obj), x)]


def exponential(p: Presheaf, q: Presheaf) -> Exponential:
    """The exponential presheaf ``Q^P`` over the same base."""
    c = p.base
    slots, families = {}, {}
    for i in c.objects:
        sl = [(j, f, x) for j in c.objects for f in c.hom(j, i) for x in p.elements(j)]
        index = {s: k for k, s in enumerate(sl)}
        sizes = [q.sizes[j] for (j, _, _) in sl]
        rules = []
        for (j, f, x) in sl:
            for g in c.morphisms:
                if c.dst[g] != j or c.is_identity(g):
                    continue
                k = c.src[g]
                rules.append((index[(j, f, x)],
                              index[(k, c.compose(f, g), p.act(g, x))],
                              q.action[g]))
        slots[i] = tuple(sl)
        families[i] = tuple(enumerate_families(len(sl), sizes, rules))
    sizes = {i: len(families[i]) for i in c.objects}
    action = {}
    for h in c.morphisms:
        i2, i = c.src[h], c.dst[h]  # h : i2 -> i, restriction Q^P(i) -> Q^P(i2)
        mapped = []
        for fam in families[i]:
            restricted = tuple(fam[slots[i].index((j, c.compose(h, f), x))]
                               for (j, f, x) in slots[i2])
            mapped.append(families[i2].index(restricted))
        action[h] = tuple(mapped)
    exp = Presheaf(c, sizes, action)
    return Exponential(exp, p, q, slots, families)


def ev_map(e: Exponential) -> tuple[PresheafMap, Product]:
    """Evaluation ``Q^P x P -> Q`` against the canonical product."""
    prod = product(e.presheaf, e.base_p)
    c = e.presheaf.base
    comp = {}
    for o in c.objects:
        vals = []
        for v in range(prod.presheaf.sizes[o]):
            idx, x = prod.split_index(o, v)
            vals.append(e.ev_value(o, idx, x))
        comp[o] = tuple(vals)
    return PresheafMap(prod.presheaf, e.base_q, comp).assert_valid(), prod


def curry(e: Exponential, m: PresheafMap, prod: Product) -> PresheafMap:
    """Transpose ``m : R x P -> Q`` to ``R -> Q^P``."""
    c = e.presheaf.base
    r = prod.left
    comp = {}
    for i in c.objects:
        vals = []
        for rv in r.elements(i):
            fam = tuple(m.component[j][prod.pair_index(j, r.act(f, rv), x)]
                        for (j, f, x) in e.slots[i])
            vals.append(e.family_index(i, fam))
        comp[i] = tuple(vals)
    return PresheafMap(r, e.presheaf, comp).assert_valid()


# ---------------------------------------------------------------------------
# Subobject classifier


@dataclass(frozen=True)
class Omega:
    """The sieve classifier: ``Omega(I)`` is the set of sieves on ``I``."""

    presheaf: Presheaf
    sieves: Mapping[str, tuple[frozenset[str], ...]]

    def sieve(self, obj: str, idx: int) -> frozenset[str]:
        return self.sieves[obj][idx]

    def index(self, obj: str, sieve: frozenset[str]) -> int:
        return self.sieves[obj].index(sieve)

    def truth(self) -> PresheafMap:
        c = self.presheaf.base
        one = terminal_presheaf(c)
        from .fincat import maximal_sieve
        return PresheafMap(one, self.presheaf,
                           {o: (self.index(o, maximal_sieve(c, o)),) for o in c.objects})


def subobject_classifier(c: FinCat) -> Omega:
    from .fincat import all_sieves, pullback_sieve
    sieves = {o: all_sieves(c, o) for o in c.objects}
    sizes = {o: len(sieves[o]) for o in c.objects}
    action = {}
    for f in c.morphisms:
        i, j = c.src[f], c.dst[f]
        action[f] = tuple(sieves[i].index(pullback_sieve(c, s, f)) for s in sieves[j])
    return Omega(Presheaf(c, sizes, action).assert_valid(), sieves)


def characteristic_map(om: Omega, p: Presheaf, sub: Mapping[str, frozenset[int]]) -> PresheafMap:
    """Classify a subpresheaf of ``p`` as a map into the sieve classifier."""
    c = p.base
    comp = {}
    for i in c.objects:
        vals = []
        for x in p.elements(i):
            s = frozenset(f for f in c.morphisms_into(i) if p.act(f, x) in sub[c.src[f]])
            vals.append(om.index(i, s))
        comp[i] = tuple(vals)
    return PresheafMap(p, om.presheaf, comp).assert_valid()


def subobject_of_char(om: Omega, chi: PresheafMap) -> dict[str, frozenset[int]]:
    """The subpresheaf classified by ``chi : P -> Omega`` (pullback of truth)."""
    c = chi.source.base
    from .fincat import maximal_sieve
    top = {o: om.index(o, maximal_sieve(c, o)) for o in c.objects}
    return {o: frozenset(x for x in chi.source.elements(o)
                         if chi.component[o][x] == top[o])
            for o in c.objects}


# ---------------------------------------------------------------------------
# Kan adjunction along a functor u : A -> C


@dataclass(frozen=True)
class Ran:
    """Right Kan extension data for one presheaf: carriers are natural
    families over slots ``(J in A, f : u(J) -> I)``."""

    presheaf: Presheaf
    slots: Mapping[str, tuple[tuple[str, str], ...]]
    families: Mapping[str, tuple[tuple[int, ...], ...]]

    def family(self, obj: str, idx: int) -> tuple[int, ...]:
        return self.families[obj][idx]

    def family_index(self, obj: str, fam: tuple[int, ...]) -> int:
        return self.families[obj].index(fam)

    def slot_index(self, obj: str, j: str, f: str) -> int:
        return self.slots[obj].index((j, f))


class KanAdjunction:
    """Restriction ``u^*`` (left) and right Kan extension ``u_*`` (right)
    along a functor ``u : A -> C`` between table categories.

    ``u^*`` is strict precomposition; ``u_*`` materializes limit carriers
    as canonical family tuples.  The unit and counit are computed
    pointwise and checked by the law suites.
    """

    def __init__(self, u: Functor):
        u.assert_valid()
        self.u = u
        self.small = u.source   # A
        self.big = u.target     # C
        self._ran_cache: dict[Presheaf, Ran] = {}

    # restriction -----------------------------------------------------------
    def restrict(self, p: Presheaf) -> Presheaf:
        assert p.base == self.big
        a = self.small
        return Presheaf(a, {x: p.sizes[self.u.obj_map[x]] for x in a.objects},
                        {m: p.action[self.u.mor_map[m]] for m in a.morphisms})

    def restrict_map(self, m: PresheafMap) -> PresheafMap:
        a = self.small
        return PresheafMap(self.restrict(m.source), self.restrict(m.target),
                           {x: m.component[self.u.obj_map[x]] for x in a.objects})

    # right Kan extension ----------------------------------------------------
    def ran(self, q: Presheaf) -> Ran:
        assert q.base == self.small
        cached = self._ran_cache.get(q)
        if cached is not None:
            return cached
        a, c, u = self.small, self.big, self.u
        slots, families = {}, {}
        for i in c.objects:
            sl = [(j, f) for j in a.objects for f in c.hom(u.obj_map[j], i)]
            index = {s: k for k, s in enumerate(sl)}
            sizes = [q.sizes[j] for (j, _) in sl]
            rules = []
            for (j, f) in sl:
                for d in a.morphisms:
                    if a.dst[d] != j or a.is_identity(d):
                        continue
                    j2 = a.src[d]
                    rules.append((index[(j, f)],
                                  index[(j2, c.compose(f, u.mor_map[d]))],
                                  q.action[d]))
            slots[i] = tuple(sl)
            families[i] = tuple(enumerate_families(len(sl), sizes, rules))
        sizes = {i: len(families[i]) for i in c.objects}
        action = {}
        for g in c.morphisms:
            i2, i = c.src[g], c.dst[g]
            mapped = []
            for fam in families[i]:
                restricted = tuple(fam[slots[i].index((j, c.compose(g, f)))]
                                   for (j, f) in slots[i2])
                mapped.append(families[i2].index(restricted))
            action[g] = tuple(mapped)
        out = Ran(Presheaf(c, sizes, action), slots, families)
        self._ran_cache[q] = out
        return out

    def ran_map(self, m: PresheafMap) -> PresheafMap:
        rq, rq2 = self.ran(m.source), self.ran(m.target)
        c = self.big
        comp = {}
        for i in c.objects:
            vals = []
            for fam in rq.families[i]:
                out = tuple(m.component[j][fam[k]]
                            for k, (j, _) in enumerate(rq.slots[i]))
                vals.append(rq2.family_index(i, out))
            comp[i] = tuple(vals)
        return PresheafMap(rq.presheaf, rq2.presheaf, comp)

    # unit and counit ---------------------------------------------------------
    def unit(self, p: Presheaf) -> PresheafMap:
        """``P -> u_* u^* P`` on a presheaf over the big category."""
        r = self.ran(self.restrict(p))
        c = self.big
        comp = {}
        for i in c.objects:
            vals = []
            for x in p.elements(i):
                fam = tuple(p.act(f, x) for (_, f) in r.slots[i])
                vals.append(r.family_index(i, fam))
            comp[i] = tuple(vals)
        return PresheafMap(p, r.presheaf, comp)

    def counit(self, q: Presheaf) -> PresheafMap:
        """``u^* u_* Q -> Q`` on a presheaf over the small category."""
        r = self.ran(q)
        a = self.small
        rest = self.restrict(r.presheaf)
        comp = {}
        for x in a.objects:
            i = self.u.obj_map[x]
            k = r.slot_index(i, x, self.big.id(i))
            comp[x] = tuple(r.families[i][v][k] for v in range(rest.sizes[x]))
        return PresheafMap(rest, q, comp)


# ---------------------------------------------------------------------------
# Sheaf condition


@dataclass(frozen=True)
class SheafReport:
    is_sheaf: bool
    failures: tuple[dict, ...]

    def uniqueness_failures(self):
        return [f for f in self.failures if f["kind"] == "uniqueness failure"]

    def existence_failures(self):
        return [f for f in self.failures if f["kind"] == "existence failure"]


def matching_families(site: Site, p: Presheaf, obj: str, sieve: frozenset[str]) -> list[dict[str, int]]:
    """All matching families for a sieve, as maps from member morphisms."""
    c = site.cat
    members = sorted(sieve)
    index = {m: k for k, m in enumerate(members)}
    sizes = [p.sizes[c.src[m]] for m in members]
    rules = []
    for m in members:
        for g in c.morphisms:
            if c.dst[g] != c.src[m] or c.is_identity(g):
                continue
            rules.append((index[m], index[c.compose(m, g)], p.action[g]))
    return [{m: fam[index[m]] for m in members}
            for fam in enumerate_families(len(members), sizes, rules)]


def amalgamations(p: Presheaf, obj: str, family: Mapping[str, int]) -> list[int]:
    return [x for x in p.elements(obj)
            if all(p.act(m, x) == v for m, v in family.items())]


def sheaf_check(site: Site, p: Presheaf) -> SheafReport:
    """Check unique amalgamation for every covering sieve and matching family."""
    failures = []
    for obj in site.cat.objects:
        for sieve in site.covering(obj):
            for fam in matching_families(site, p, obj, sieve):
                ams = amalgamations(p, obj, fam)
                if len(ams) == 0:
                    failures.append({"kind": "existence failure", "object": obj,
                                     "sieve": tuple(sorted(sieve)), "family": fam,
                                     "amalgamations": tuple(ams)})
                elif len(ams) > 1:
                    failures.append({"kind": "uniqueness failure", "object": obj,
                                     "sieve": tuple(sorted(sieve)), "family": fam,
                                     "amalgamations": tuple(ams)})
    return SheafReport(not failures, tuple(failures))


def elements_coverage(site: Site, p: Presheaf) -> tuple[Elements, Site]:
    """The induced coverage on the category of elements of ``p``.

    A sieve on ``(I, e)`` covers exactly when its underlying base sieve
    covers ``I``; the member over ``g`` then necessarily carries the
    restricted element ``P(g)(e)``, so the cover is the same thing as a
    matching family whose amalgamation is ``e``.
    """
    el = category_of_elements(p)
    covers = {}
    for i in site.cat.objects:
        for x in p.elements(i):
            here = []
            for s in site.covering(i):
                here.append(frozenset(f"{g}#{x}" for g in s))
            covers[el.obj_name(i, x)] = tuple(here)
    return el, Site(el.cat, covers, mode="coverage").assert_valid()
