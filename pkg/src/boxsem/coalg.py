"""Comonads on a presheaf model and their categories of coalgebras.

The central object is :class:`NaturalModelComonad`: a finite-limit
preserving comonad on presheaves over the model's base category,
carried together with a strict action on dependent types and terms and
the structure isomorphism relating comprehension before and after the
endofunctor.  Two constructions are provided, the identity comonad and
the comonad obtained from restriction followed by right Kan extension
along a functor between finite categories.

On top of that the module builds the bounded category of coalgebras
with its forgetful and cofree adjunction, the comparison with the
presheaf category upstairs, the natural model whose contexts are
coalgebras, and the two classifiers living in that model: the type
classifier obtained from coalgebras of the internalized comonad on the
cofree universe, and the subobject classifier obtained as the fixed
points of the induced map on the cofree sieve classifier.

Everything is evaluated elementwise and all laws are decidable checks;
no structure is trusted without being run through its validator.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iproduct
from typing import Callable, Iterable, Mapping

from .fincat import FinCat, Functor
from .presheaf import (KanAdjunction, Omega, Presheaf, PresheafMap,
                       characteristic_map, compose_maps, enumerate_families,
                       hom_maps, identity_map, iso_maps, product, pullback,
                       sub_presheaf, subobject_classifier, subobject_of_char,
                       subpresheaves, terminal_presheaf)
from .natmodel import (BoundExceeded, Comprehension, ModelError, NaturalModel,
                       Pi, Sigma, TermOverContext, TypeMap, TypeOverContext,
                       TypeProduct, Universe, all_display_maps_into,
                       all_presheaves, all_types_over, apply_type_map,
                       comprehension, compose_type_maps, exp_ev, exp_transpose,
                       hs_universe, identity_type_map, is_display, pi_type,
                       sigma_type, sub_type, subst_term, subst_type,
                       subst_type_map, terms_of, type_exponential, type_maps,
                       type_product, type_terminal)


class ComonadError(Exception):
    """A comonad law or construction precondition failed."""


class EnumerationCeiling(ComonadError):
    """An enumeration would exceed its configured guard."""


# ---------------------------------------------------------------------------
# The comonad interface


class NaturalModelComonad:
    """A comonad on presheaves over the model base, together with its
    strict action on the model's types, terms, codes, and sieves.

    Subclasses supply the primitive operations.  The derived methods at
    the bottom give the induced comonad on the types over any coalgebra
    and the fiberwise cofree construction, which is where the rest of
    the module does its work.
    """

    name = "comonad"

    def __init__(self, model: NaturalModel):
        self.model = model

    # endofunctor on presheaves over the base -------------------------------
    def box(self, p: Presheaf) -> Presheaf:
        raise NotImplementedError

    def box_map(self, m: PresheafMap) -> PresheafMap:
        raise NotImplementedError

    def counit(self, p: Presheaf) -> PresheafMap:
        """The component ``box(P) -> P``."""
        raise NotImplementedError

    def comult(self, p: Presheaf) -> PresheafMap:
        """The component ``box(P) -> box(box(P))``."""
        raise NotImplementedError

    # strict action on types and terms --------------------------------------
    def tp_box(self, a: TypeOverContext) -> TypeOverContext:
        """Transport a type over ``Gamma`` to one over ``box(Gamma)``."""
        raise NotImplementedError

    def tp_box_map(self, m: TypeMap) -> TypeMap:
        raise NotImplementedError

    def tm_box(self, t: TermOverContext) -> TermOverContext:
        raise NotImplementedError

    def tp_counit(self, a: TypeOverContext) -> TypeMap:
        """``tp_box(A) -> A[counit]`` over ``box(Gamma)``."""
        raise NotImplementedError

    def tp_comult(self, a: TypeOverContext) -> TypeMap:
        """``tp_box(A) -> tp_box(tp_box(A))[comult]`` over ``box(Gamma)``."""
        raise NotImplementedError

    def tau(self, a: TypeOverContext) -> PresheafMap:
        """The iso ``box(Gamma.A) -> box(Gamma).tp_box(A)``."""
        raise NotImplementedError

    # strict action on universe codes and sieves ----------------------------
    def box_code(self, u: Universe) -> PresheafMap:
        """The code-level action ``box(U) -> U`` of the endofunctor."""
        raise NotImplementedError

    def box_code_mor(self, uc: "UniverseCategory") -> PresheafMap:
        """The action ``box(U1) -> U1`` on code morphisms."""
        raise NotImplementedError

    def code_counit(self, uc: "UniverseCategory") -> PresheafMap:
        """``box(U0) -> U1``, the counit as a family of code morphisms."""
        raise NotImplementedError

    def code_comult(self, uc: "UniverseCategory") -> PresheafMap:
        """``box(U0) -> U1``, the comultiplication on codes."""
        raise NotImplementedError

    def box_sieve(self, om: Omega) -> PresheafMap:
        """The induced map ``box(Omega) -> Omega`` on the sieve classifier."""
        raise NotImplementedError

    # derived: the indexed comonad at a coalgebra ----------------------------
    def bbox_type(self, cg: "Coalgebra", a: TypeOverContext) -> TypeOverContext:
        """The induced endofunctor on types over the carrier of ``cg``."""
        return subst_type(self.tp_box(a), cg.structure)

    def bbox_type_map(self, cg: "Coalgebra", m: TypeMap) -> TypeMap:
        return subst_type_map(self.tp_box_map(m), cg.structure)

    def bbox_term(self, cg: "Coalgebra", t: TermOverContext) -> TermOverContext:
        return subst_term(self.tm_box(t), cg.structure)

    def fiber_counit(self, cg: "Coalgebra", a: TypeOverContext) -> TypeMap:
        m = subst_type_map(self.tp_counit(a), cg.structure)
        if m.target != a:
            raise ComonadError("fiber counit does not land back in its type")
        return TypeMap(m.source, a, m.component)

    def fiber_comult(self, cg: "Coalgebra", a: TypeOverContext) -> TypeMap:
        m = subst_type_map(self.tp_comult(a), cg.structure)
        bb = self.bbox_type(cg, self.bbox_type(cg, a))
        if m.target != bb:
            raise ComonadError("fiber comult is not strict over this coalgebra")
        return TypeMap(m.source, bb, m.component)

    def cofree_type(self, cg: "Coalgebra", a: TypeOverContext) -> "CoalgebraType":
        """The cofree coalgebra type on a plain type over the carrier."""
        return CoalgebraType(cg, self.bbox_type(cg, a), self.fiber_comult(cg, a))


# ---------------------------------------------------------------------------
# Identity comonad


class IdentityComonad(NaturalModelComonad):
    """The comonad whose every component is an identity, on the nose."""

    name = "identity"

    def box(self, p):
        return p

    def box_map(self, m):
        return m

    def counit(self, p):
        return identity_map(p)

    def comult(self, p):
        return identity_map(p)

    def tp_box(self, a):
        return a

    def tp_box_map(self, m):
        return m

    def tm_box(self, t):
        return t

    def tp_counit(self, a):
        return identity_type_map(a)

    def tp_comult(self, a):
        return identity_type_map(a)

    def tau(self, a):
        return identity_map(comprehension(a).presheaf)

    def box_code(self, u):
        return identity_map(u.presheaf)

    def box_code_mor(self, uc):
        return identity_map(uc.cat.mor)

    def code_counit(self, uc):
        return uc.cat.ident

    def code_comult(self, uc):
        return uc.cat.ident

    def box_sieve(self, om):
        return identity_map(om.presheaf)


def identity_comonad(model: NaturalModel) -> IdentityComonad:
    return IdentityComonad(model)


# ---------------------------------------------------------------------------
# Comonad from restriction and right Kan extension


@dataclass
class _BoxData:
    """Carrier of ``box(P)`` at each object, with the family tables that
    realize its elements."""

    presheaf: Presheaf
    slots: Mapping[str, tuple[tuple[str, str], ...]]
    families: Mapping[str, tuple[tuple[int, ...], ...]]
    index: Mapping[str, Mapping[tuple[int, ...], int]]


@dataclass
class _TpData:
    """Family tables behind ``tp_box(A)``, one block per context element
    of the boxed context."""

    type: TypeOverContext
    box: _BoxData
    families: Mapping[tuple[str, int], tuple[tuple[int, ...], ...]]
    index: Mapping[tuple[str, int], Mapping[tuple[int, ...], int]]


@dataclass
class _CodeBoxData:
    """The code-level action together with the per-code family tables
    needed to build code morphisms out of it."""

    map: PresheafMap
    families: Mapping[tuple[str, int, str], tuple[tuple[int, ...], ...]]


class AdjunctionComonad(NaturalModelComonad):
    """The comonad ``restrict . ran`` along ``u : D -> C``.

    An element of ``box(P)`` at ``X`` is a natural family assigning to
    every slot ``(J, f : u(J) -> u(X))`` an element of ``P(J)``; all the
    structure maps below are index bookkeeping over these families.
    Families are enumerated canonically, which is what makes the type
    action strict under substitution.
    """

    def __init__(self, adj: KanAdjunction, model: NaturalModel, name: str | None = None):
        if adj.small != model.base:
            raise ComonadError("adjunction and model disagree on the base category")
        super().__init__(model)
        self.adj = adj
        self.name = name or f"ran[{adj.u.name}]"
        self._boxes: dict[Presheaf, _BoxData] = {}
        self._tps: dict[TypeOverContext, _TpData] = {}
        self._codes: dict[Presheaf, _CodeBoxData] = {}

    # family tables ----------------------------------------------------------
    def box_data(self, p: Presheaf) -> _BoxData:
        bd = self._boxes.get(p)
        if bd is None:
            r = self.adj.ran(p)
            om = self.adj.u.obj_map
            d = self.model.base
            slots = {x: r.slots[om[x]] for x in d.objects}
            fams = {x: r.families[om[x]] for x in d.objects}
            index = {x: {f: k for k, f in enumerate(fams[x])} for x in d.objects}
            bd = _BoxData(self.adj.restrict(r.presheaf), slots, fams, index)
            self._boxes[p] = bd
        return bd

    def box(self, p):
        return self.box_data(p).presheaf

    def box_map(self, m):
        return self.adj.restrict_map(self.adj.ran_map(m))

    def counit(self, p):
        return self.adj.counit(p)

    def comult(self, p):
        bd = self.box_data(p)
        bb = self.box_data(bd.presheaf)
        d, c = self.model.base, self.adj.big
        comp = {}
        for x in d.objects:
            sl = bd.slots[x]
            pos = {s: k for k, s in enumerate(sl)}
            vals = []
            for fam in bd.families[x]:
                outer = []
                for (j, f) in sl:
                    inner = tuple(fam[pos[(j2, c.compose(f, f2))]]
                                  for (j2, f2) in bd.slots[j])
                    outer.append(bd.index[j][inner])
                vals.append(bb.index[x][tuple(outer)])
            comp[x] = tuple(vals)
        return PresheafMap(bd.presheaf, bb.presheaf, comp)

    # type and term action ----------------------------------------------------
    def tp_data(self, a: TypeOverContext) -> _TpData:
        td = self._tps.get(a)
        if td is not None:
            return td
        bd = self.box_data(a.context)
        d, c, u = self.model.base, self.adj.big, self.adj.u
        fams: dict[tuple[str, int], tuple[tuple[int, ...], ...]] = {}
        fiber = {}
        for x in d.objects:
            sl = bd.slots[x]
            pos = {s: k for k, s in enumerate(sl)}
            for pi, phi in enumerate(bd.families[x]):
                sizes = [a.fiber[(j, phi[k])] for k, (j, _) in enumerate(sl)]
                rules = []
                for k, (j, f) in enumerate(sl):
                    for m in d.morphisms:
                        if d.dst[m] != j or d.is_identity(m):
                            continue
                        k2 = pos[(d.src[m], c.compose(f, u.mor_map[m]))]
                        rules.append((k, k2, a.restriction[(m, phi[k])]))
                fams[(x, pi)] = tuple(enumerate_families(len(sl), sizes, rules))
                fiber[(x, pi)] = len(fams[(x, pi)])
        index = {k: {f: n for n, f in enumerate(v)} for k, v in fams.items()}
        bg = bd.presheaf
        restriction = {}
        for m in d.morphisms:
            x2, x = d.src[m], d.dst[m]
            um = u.mor_map[m]
            pos = {s: k for k, s in enumerate(bd.slots[x])}
            sel = [pos[(j, c.compose(um, f2))] for (j, f2) in bd.slots[x2]]
            for pi in bg.elements(x):
                pi2 = bg.act(m, pi)
                restriction[(m, pi)] = tuple(
                    index[(x2, pi2)][tuple(fam[k] for k in sel)]
                    for fam in fams[(x, pi)])
        td = _TpData(TypeOverContext(bg, fiber, restriction), bd, fams, index)
        self._tps[a] = td
        return td

    def tp_box(self, a):
        return self.tp_data(a).type

    def tp_box_map(self, m):
        ta, tb = self.tp_data(m.source), self.tp_data(m.target)
        bd = ta.box
        comp = {}
        for x in self.model.base.objects:
            for pi, phi in enumerate(bd.families[x]):
                vals = []
                for fam in ta.families[(x, pi)]:
                    out = tuple(m.component[(j, phi[k])][fam[k]]
                                for k, (j, _) in enumerate(bd.slots[x]))
                    vals.append(tb.index[(x, pi)][out])
                comp[(x, pi)] = tuple(vals)
        return TypeMap(ta.type, tb.type, comp)

    def tm_box(self, t):
        td = self.tp_data(t.type)
        bd = td.box
        pick = {}
        for x in self.model.base.objects:
            for pi, phi in enumerate(bd.families[x]):
                fam = tuple(t.pick[(j, phi[k])] for k, (j, _) in enumerate(bd.slots[x]))
                pick[(x, pi)] = td.index[(x, pi)][fam]
        return TermOverContext(td.type, pick)

    def tp_counit(self, a):
        td = self.tp_data(a)
        bd = td.box
        c, u = self.adj.big, self.adj.u
        comp = {}
        for x in self.model.base.objects:
            k_id = bd.slots[x].index((x, c.id(u.obj_map[x])))
            for pi in range(len(bd.families[x])):
                comp[(x, pi)] = tuple(fam[k_id] for fam in td.families[(x, pi)])
        return TypeMap(td.type, subst_type(a, self.counit(a.context)), comp)

    def tp_comult(self, a):
        td = self.tp_data(a)
        td2 = self.tp_data(td.type)
        bd = td.box
        dlt = self.comult(a.context)
        c = self.adj.big
        comp = {}
        for x in self.model.base.objects:
            sl = bd.slots[x]
            pos = {s: k for k, s in enumerate(sl)}
            for pi, phi in enumerate(bd.families[x]):
                psi = dlt.apply(x, pi)
                sels = []
                for (j, f) in sl:
                    sel = [pos[(j2, c.compose(f, f2))] for (j2, f2) in bd.slots[j]]
                    sels.append((j, sel, bd.index[j][tuple(phi[k] for k in sel)]))
                vals = []
                for fam in td.families[(x, pi)]:
                    outer = tuple(td.index[(j, pj)][tuple(fam[k] for k in sel)]
                                  for (j, sel, pj) in sels)
                    vals.append(td2.index[(x, psi)][outer])
                comp[(x, pi)] = tuple(vals)
        return TypeMap(td.type, subst_type(td2.type, dlt), comp)

    def tau(self, a):
        ca = comprehension(a)
        bde = self.box_data(ca.presheaf)
        bd = self.box_data(a.context)
        td = self.tp_data(a)
        ext2 = comprehension(td.type)
        comp = {}
        for x in self.model.base.objects:
            vals = []
            for fam in bde.families[x]:
                gs, xs = [], []
                for k, (j, _) in enumerate(bde.slots[x]):
                    g, aa = ca.decode(j, fam[k])
                    gs.append(g)
                    xs.append(aa)
                pi = bd.index[x][tuple(gs)]
                vals.append(ext2.encode(x, pi, td.index[(x, pi)][tuple(xs)]))
            comp[x] = tuple(vals)
        return PresheafMap(bde.presheaf, ext2.presheaf, comp)

    # code-level action -------------------------------------------------------
    def code_box_data(self, u: Universe) -> _CodeBoxData:
        cached = self._codes.get(u.presheaf)
        if cached is not None:
            return cached
        d, c, uf = self.model.base, self.adj.big, self.adj.u
        bd = self.box_data(u.presheaf)
        fams: dict[tuple[str, int, str], tuple[tuple[int, ...], ...]] = {}
        comp = {}
        for x in d.objects:
            slx = u.slices[x].cat
            pos = {s: k for k, s in enumerate(bd.slots[x])}
            vals = []
            for pi, phi in enumerate(bd.families[x]):
                sizes_z, action_z = {}, {}
                for gname in slx.objects:
                    y = d.src[gname]
                    ug = uf.mor_map[gname]
                    sl_y = bd.slots[y]
                    pos_y = {s: k for k, s in enumerate(sl_y)}
                    slot_codes = [u.codes[j][phi[pos[(j, c.compose(ug, f2))]]]
                                  for (j, f2) in sl_y]
                    szs = [cp.sizes[d.id(j)] for cp, (j, _) in zip(slot_codes, sl_y)]
                    rules = []
                    for k, (j, f2) in enumerate(sl_y):
                        for m in d.morphisms:
                            if d.dst[m] != j or d.is_identity(m):
                                continue
                            k2 = pos_y[(d.src[m], c.compose(f2, uf.mor_map[m]))]
                            rules.append((k, k2, slot_codes[k].action[f"{m}@{d.id(j)}"]))
                    block = tuple(enumerate_families(len(sl_y), szs, rules))
                    if len(block) > self.model.bound:
                        raise BoundExceeded(
                            f"boxed code at ({x!r}, {gname!r}) has {len(block)} "
                            f"points, over the display bound {self.model.bound}")
                    fams[(x, pi, gname)] = block
                    sizes_z[gname] = len(block)
                for mname in slx.morphisms:
                    hpart, gpart = mname.split("@", 1)
                    y2 = d.src[hpart]
                    uh = uf.mor_map[hpart]
                    src_obj = d.compose(gpart, hpart)
                    pos_y = {s: k for k, s in enumerate(bd.slots[d.src[gpart]])}
                    sel = [pos_y[(j2, c.compose(uh, f3))] for (j2, f3) in bd.slots[y2]]
                    action_z[mname] = tuple(
                        fams[(x, pi, src_obj)].index(tuple(fam[k] for k in sel))
                        for fam in fams[(x, pi, gpart)])
                vals.append(u.code_index(x, Presheaf(slx, sizes_z, action_z)))
            comp[x] = tuple(vals)
        out = _CodeBoxData(PresheafMap(bd.presheaf, u.presheaf, comp), fams)
        self._codes[u.presheaf] = out
        return out

    def box_code(self, u):
        return self.code_box_data(u).map

    def box_code_mor(self, uc):
        u = uc.universe
        d, c, uf = self.model.base, self.adj.big, self.adj.u
        bd0 = self.box_data(u.presheaf)
        bd1 = self.box_data(uc.cat.mor)
        cbd = self.code_box_data(u)
        comp = {}
        for x in d.objects:
            slx = u.slices[x].cat
            sl = bd0.slots[x]
            pos = {s: k for k, s in enumerate(sl)}
            vals = []
            for fam_m in bd1.families[x]:
                data = [uc.mor_data(j, fam_m[k]) for k, (j, _) in enumerate(sl)]
                phi1 = tuple(t[0] for t in data)
                phi2 = tuple(t[1] for t in data)
                p1, p2 = bd0.index[x][phi1], bd0.index[x][phi2]
                z1 = cbd.map.component[x][p1]
                z2 = cbd.map.component[x][p2]
                comps = {}
                for gname in slx.objects:
                    y = d.src[gname]
                    ug = uf.mor_map[gname]
                    slot_maps = [data[pos[(j, c.compose(ug, f2))]][2].component[d.id(j)]
                                 for (j, f2) in bd0.slots[y]]
                    out = []
                    for fam in cbd.families[(x, p1, gname)]:
                        img = tuple(slot_maps[k][v] for k, v in enumerate(fam))
                        out.append(cbd.families[(x, p2, gname)].index(img))
                    comps[gname] = tuple(out)
                pm = PresheafMap(u.codes[x][z1], u.codes[x][z2], comps)
                vals.append(uc.mor_index(x, z1, z2, pm))
            comp[x] = tuple(vals)
        return PresheafMap(bd1.presheaf, uc.cat.mor, comp)

    def code_counit(self, uc):
        u = uc.universe
        d, c, uf = self.model.base, self.adj.big, self.adj.u
        bd = self.box_data(u.presheaf)
        cbd = self.code_box_data(u)
        comp = {}
        for x in d.objects:
            slx = u.slices[x].cat
            k_id = bd.slots[x].index((x, c.id(uf.obj_map[x])))
            vals = []
            for pi, phi in enumerate(bd.families[x]):
                z = cbd.map.component[x][pi]
                tgt = phi[k_id]
                comps = {}
                for gname in slx.objects:
                    y = d.src[gname]
                    k_y = bd.slots[y].index((y, c.id(uf.obj_map[y])))
                    comps[gname] = tuple(fam[k_y]
                                         for fam in cbd.families[(x, pi, gname)])
                pm = PresheafMap(u.codes[x][z], u.codes[x][tgt], comps)
                vals.append(uc.mor_index(x, z, tgt, pm))
            comp[x] = tuple(vals)
        return PresheafMap(bd.presheaf, uc.cat.mor, comp)

    def code_comult(self, uc):
        u = uc.universe
        d, c, uf = self.model.base, self.adj.big, self.adj.u
        bd = self.box_data(u.presheaf)
        cbd = self.code_box_data(u)
        dlt = self.comult(u.presheaf)
        bmc = self.box_map(cbd.map)
        comp = {}
        for x in d.objects:
            slx = u.slices[x].cat
            pos = {s: k for k, s in enumerate(bd.slots[x])}
            vals = []
            for pi, phi in enumerate(bd.families[x]):
                z1 = cbd.map.component[x][pi]
                psi = bmc.apply(x, dlt.apply(x, pi))
                z2 = cbd.map.component[x][psi]
                comps = {}
                for gname in slx.objects:
                    y = d.src[gname]
                    ug = uf.mor_map[gname]
                    out = []
                    for fam in cbd.families[(x, pi, gname)]:
                        entries = []
                        for (j, f2) in bd.slots[y]:
                            sel = [pos[(j2, c.compose(c.compose(ug, f2), f3))]
                                   for (j2, f3) in bd.slots[j]]
                            pj = bd.index[j][tuple(phi[k] for k in sel)]
                            pos_y = {s: k for k, s in enumerate(bd.slots[y])}
                            inner = tuple(fam[pos_y[(j2, c.compose(f2, f3))]]
                                          for (j2, f3) in bd.slots[j])
                            entries.append(
                                cbd.families[(j, pj, d.id(j))].index(inner))
                        out.append(cbd.families[(x, psi, gname)].index(tuple(entries)))
                    comps[gname] = tuple(out)
                pm = PresheafMap(u.codes[x][z1], u.codes[x][z2], comps)
                vals.append(uc.mor_index(x, z1, z2, pm))
            comp[x] = tuple(vals)
        return PresheafMap(bd.presheaf, uc.cat.mor, comp)

    def box_sieve(self, om):
        d, c, uf = self.model.base, self.adj.big, self.adj.u
        bd = self.box_data(om.presheaf)
        comp = {}
        for x in d.objects:
            pos = {s: k for k, s in enumerate(bd.slots[x])}
            vals = []
            for phi in bd.families[x]:
                members = []
                for g in d.morphisms_into(x):
                    y = d.src[g]
                    ug = uf.mor_map[g]
                    if all(d.id(j) in om.sieve(j, phi[pos[(j, c.compose(ug, f2))]])
                           for (j, f2) in bd.slots[y]):
                        members.append(g)
                vals.append(om.index(x, frozenset(members)))
            comp[x] = tuple(vals)
        return PresheafMap(bd.presheaf, om.presheaf, comp)


# ---------------------------------------------------------------------------
# Coalgebras


@dataclass(frozen=True)
class Coalgebra:
    """A presheaf with a structure map into its box."""

    carrier: Presheaf
    structure: PresheafMap

    def elements(self, obj: str) -> range:
        return self.carrier.elements(obj)


def coalgebra_laws(w: NaturalModelComonad, cg: Coalgebra) -> list[str]:
    errs = []
    bp = w.box(cg.carrier)
    if cg.structure.source != cg.carrier or cg.structure.target != bp:
        return ["structure map has the wrong endpoints"]
    errs.extend(cg.structure.validate())
    if errs:
        return errs
    if compose_maps(w.counit(cg.carrier), cg.structure) != identity_map(cg.carrier):
        errs.append("counit law fails")
    if compose_maps(w.comult(cg.carrier), cg.structure) != \
            compose_maps(w.box_map(cg.structure), cg.structure):
        errs.append("comult law fails")
    return errs


def is_coalgebra_map(w: NaturalModelComonad, src: Coalgebra, dst: Coalgebra,
                     h: PresheafMap) -> bool:
    if h.source != src.carrier or h.target != dst.carrier:
        return False
    return compose_maps(dst.structure, h) == \
        compose_maps(w.box_map(h), src.structure)


def coalgebra_maps(w: NaturalModelComonad, src: Coalgebra, dst: Coalgebra) -> list[PresheafMap]:
    return [h for h in hom_maps(src.carrier, dst.carrier)
            if is_coalgebra_map(w, src, dst, h)]


def cofree_coalgebra(w: NaturalModelComonad, q: Presheaf) -> Coalgebra:
    return Coalgebra(w.box(q), w.comult(q))


def terminal_coalgebra(w: NaturalModelComonad) -> Coalgebra:
    one = terminal_presheaf(w.model.base)
    bo = w.box(one)
    if any(n != 1 for n in bo.sizes.values()):
        raise ComonadError("box does not preserve the terminal presheaf")
    return Coalgebra(one, PresheafMap(one, bo, {o: (0,) for o in bo.sizes}))


def sub_coalgebra(w: NaturalModelComonad, cg: Coalgebra,
                  sel: Mapping[str, frozenset[int]]) -> tuple[Coalgebra, PresheafMap]:
    """Restrict a coalgebra to a subpresheaf closed under its structure."""
    sub, inc = sub_presheaf(cg.carrier, sel)
    bm = w.box_map(inc)
    comp = {}
    for o in cg.carrier.base.objects:
        image = {v: k for k, v in enumerate(bm.component[o])}
        vals = []
        for x in inc.component[o]:
            v = cg.structure.apply(o, x)
            if v not in image:
                raise ComonadError(f"subpresheaf not closed under structure at ({o!r}, {x})")
            vals.append(image[v])
        comp[o] = tuple(vals)
    return Coalgebra(sub, PresheafMap(sub, w.box(sub), comp)), inc


def sub_coalgebras(w: NaturalModelComonad, cg: Coalgebra) -> list[Mapping[str, frozenset[int]]]:
    """Subpresheaves of the carrier closed under the structure map."""
    out = []
    for sel in subpresheaves(cg.carrier):
        try:
            sub_coalgebra(w, cg, sel)
        except ComonadError:
            continue
        out.append(sel)
    return out


def enumerate_coalgebras(w: NaturalModelComonad, size_bound: int,
                         max_carriers: int | None = None) -> list[Coalgebra]:
    """All coalgebras on carriers with value sizes up to the bound."""
    out = []
    carriers = all_presheaves(w.model.base, size_bound)
    if max_carriers is not None and len(carriers) > max_carriers:
        raise EnumerationCeiling(
            f"{len(carriers)} carriers exceed the guard {max_carriers}")
    for p in carriers:
        bp = w.box(p)
        ident = identity_map(p)
        eps = w.counit(p)
        dlt = w.comult(p)
        for h in hom_maps(p, bp):
            if compose_maps(eps, h) != ident:
                continue
            if compose_maps(dlt, h) != compose_maps(w.box_map(h), h):
                continue
            out.append(Coalgebra(p, h))
    return out


@dataclass(frozen=True)
class CoalgebraCategory:
    """The enumerated category of bounded coalgebras with its forgetful
    and cofree structure."""

    comonad: NaturalModelComonad
    bound: int
    coalgebras: tuple[Coalgebra, ...]
    homs: Mapping[tuple[int, int], tuple[PresheafMap, ...]]

    def forget(self, cg: Coalgebra) -> Presheaf:
        return cg.carrier

    def cofree(self, q: Presheaf) -> Coalgebra:
        return cofree_coalgebra(self.comonad, q)

    def unit(self, cg: Coalgebra) -> PresheafMap:
        """The structure map, seen as a map into the cofree coalgebra on
        the carrier."""
        return cg.structure

    def counit(self, q: Presheaf) -> PresheafMap:
        return self.comonad.counit(q)

    def triangle_report(self) -> dict:
        w = self.comonad
        errs = []
        for cg in self.coalgebras:
            if compose_maps(self.counit(cg.carrier), self.unit(cg)) != \
                    identity_map(cg.carrier):
                errs.append(f"unit-counit triangle fails on carrier {cg.carrier.sizes}")
        for q in all_presheaves(w.model.base, self.bound):
            fq = self.cofree(q)
            lift = w.box_map(self.counit(q))
            if compose_maps(lift, fq.structure) != identity_map(fq.carrier):
                errs.append(f"cofree triangle fails on {q.sizes}")
        return {"ok": not errs, "witnesses": errs}


def coalgebra_category(w: NaturalModelComonad, size_bound: int,
                       max_carriers: int | None = 4096) -> CoalgebraCategory:
    cgs = enumerate_coalgebras(w, size_bound, max_carriers)
    homs = {}
    for i, a in enumerate(cgs):
        for j, b in enumerate(cgs):
            homs[(i, j)] = tuple(coalgebra_maps(w, a, b))
    return CoalgebraCategory(w, size_bound, tuple(cgs), homs)


# ---------------------------------------------------------------------------
# Comparison with the presheaf category upstairs


def comparison_object(w: AdjunctionComonad, p: Presheaf) -> Coalgebra:
    """The coalgebra corresponding to a presheaf on the big category."""
    return Coalgebra(w.adj.restrict(p), w.adj.restrict_map(w.adj.unit(p)))


def left_adjoint_faithful(adj: KanAdjunction, size_bound: int) -> tuple[bool, str | None]:
    """Check restriction for faithfulness on the bounded fragment."""
    ps = all_presheaves(adj.big, size_bound)
    for p in ps:
        for q in ps:
            seen: dict[PresheafMap, PresheafMap] = {}
            for h in hom_maps(p, q):
                rh = adj.restrict_map(h)
                if rh in seen and seen[rh] != h:
                    return False, (f"maps {seen[rh].component} and {h.component} "
                                   f"between {p.sizes} and {q.sizes} restrict equally")
                seen[rh] = h
    return True, None


def comparison_check(adj: KanAdjunction, w: AdjunctionComonad,
                     size_bound: int) -> dict:
    """Certify the comparison with the coalgebra category on the bounded
    fragment: bijective on isomorphism classes and on hom sets."""
    faithful, witness = left_adjoint_faithful(adj, size_bound)
    ps = all_presheaves(adj.big, size_bound)
    images = [comparison_object(w, p) for p in ps]
    for cg in images:
        errs = coalgebra_laws(w, cg)
        if errs:
            return {"ok": False, "witness": f"comparison image breaks laws: {errs[0]}"}
    cgs = enumerate_coalgebras(w, size_bound)

    def iso_classes(items, is_iso_pair):
        classes: list[list[int]] = []
        for i in range(len(items)):
            for cl in classes:
                if is_iso_pair(items[cl[0]], items[i]):
                    cl.append(i)
                    break
            else:
                classes.append([i])
        return classes

    def coalg_iso(a: Coalgebra, b: Coalgebra) -> bool:
        return any(h.is_iso() for h in coalgebra_maps(w, a, b))

    p_classes = iso_classes(ps, lambda a, b: bool(iso_maps(a, b)))
    c_classes = iso_classes(cgs, coalg_iso)
    surjective = all(any(coalg_iso(images[cl[0]], cg) for cl in p_classes)
                     for cg in (cgs[cl[0]] for cl in c_classes))
    hom_ok, hom_witness = True, None
    for i, p in enumerate(ps):
        for j, q in enumerate(ps):
            upstairs = hom_maps(p, q)
            image = {w.adj.restrict_map(h) for h in upstairs}
            downstairs = set(coalgebra_maps(w, images[i], images[j]))
            if len(image) != len(upstairs) or image != downstairs:
                hom_ok = False
                hom_witness = f"hom sets differ between {p.sizes} and {q.sizes}"
                break
        if not hom_ok:
            break
    ok = faithful and surjective and hom_ok and len(p_classes) == len(c_classes)
    return {"ok": ok,
            "faithful": faithful,
            "presheaf_count": len(ps),
            "coalgebra_count": len(cgs),
            "presheaf_classes": len(p_classes),
            "coalgebra_classes": len(c_classes),
            "essentially_surjective": surjective,
            "hom_sets_match": hom_ok,
            "witness": witness or hom_witness}


# ---------------------------------------------------------------------------
# The indexed comonad and its right adjoint at a coalgebra


@dataclass(frozen=True)
class IndexedComonadInstance:
    """The comonad induced on types over the carrier of one coalgebra."""

    comonad: NaturalModelComonad
    at: Coalgebra

    def box(self, a: TypeOverContext) -> TypeOverContext:
        return self.comonad.bbox_type(self.at, a)

    def box_map(self, m: TypeMap) -> TypeMap:
        return self.comonad.bbox_type_map(self.at, m)

    def box_term(self, t: TermOverContext) -> TermOverContext:
        return self.comonad.bbox_term(self.at, t)

    def counit(self, a: TypeOverContext) -> TypeMap:
        return self.comonad.fiber_counit(self.at, a)

    def comult(self, a: TypeOverContext) -> TypeMap:
        return self.comonad.fiber_comult(self.at, a)

    def laws(self, a: TypeOverContext) -> list[str]:
        errs = []
        ba = self.box(a)
        eps, dlt = self.counit(a), self.comult(a)
        errs.extend("counit: " + e for e in eps.validate())
        errs.extend("comult: " + e for e in dlt.validate())
        if errs:
            return errs
        if compose_type_maps(self.counit(ba), dlt) != identity_type_map(ba):
            errs.append("counit-comult law fails in the fiber")
        if compose_type_maps(self.box_map(eps), dlt) != identity_type_map(ba):
            errs.append("boxed-counit law fails in the fiber")
        if compose_type_maps(self.comult(ba), dlt) != \
                compose_type_maps(self.box_map(dlt), dlt):
            errs.append("coassociativity fails in the fiber")
        return errs


def induced_comonad(w: NaturalModelComonad, at: Coalgebra) -> IndexedComonadInstance:
    errs = coalgebra_laws(w, at)
    if errs:
        raise ComonadError("induced comonad needs a lawful coalgebra: " + errs[0])
    return IndexedComonadInstance(w, at)


def induced_right_adjoint(w: NaturalModelComonad, at: Coalgebra,
                          a: TypeOverContext) -> "CoalgebraType":
    """The cofree coalgebra type on a plain type over the carrier."""
    if a.context != at.carrier:
        raise ComonadError("type does not live over the coalgebra carrier")
    return w.cofree_type(at, a)


def right_adjoint_bijection_check(w: NaturalModelComonad, at: Coalgebra,
                                  x: "CoalgebraType", a: TypeOverContext) -> dict:
    """Verify the fiberwise adjunction between forgetting the structure
    and the cofree construction, by explicit transposes."""
    fa = induced_right_adjoint(w, at, a)
    eps = w.fiber_counit(at, a)
    plain = type_maps(x.type, a)
    structured = [m for m in type_maps(x.type, fa.type)
                  if compose_type_maps(fa.theta, m) ==
                  compose_type_maps(w.bbox_type_map(at, m), x.theta)]
    down = {m: compose_type_maps(eps, m) for m in structured}
    up = {m: compose_type_maps(w.bbox_type_map(at, m), x.theta) for m in plain}
    ok = (len(plain) == len(structured)
          and all(down[m] in plain for m in structured)
          and all(up[m] in structured for m in plain)
          and all(down[up[m]] == m for m in plain)
          and all(up[down[m]] == m for m in structured))
    return {"ok": ok, "plain": len(plain), "structured": len(structured)}


# ---------------------------------------------------------------------------
# Validation


def _probe_presheaves(w: NaturalModelComonad, probes: Iterable[Presheaf] | None) -> list[Presheaf]:
    if probes is not None:
        return list(probes)
    bound = min(max(w.model.bound, 1), 2)
    ps = all_presheaves(w.model.base, bound)
    return ps[:24]


def validate_comonad(w: NaturalModelComonad,
                     probes: Iterable[Presheaf] | None = None) -> dict:
    """Run the full law suite and report violations with witnesses."""
    ps = _probe_presheaves(w, probes)
    witnesses = []

    def note(cond: bool, msg: str):
        if not cond:
            witnesses.append(msg)

    for p in ps:
        bp = w.box(p)
        eps, dlt = w.counit(p), w.comult(p)
        note(eps.source == bp and eps.target == p and not eps.validate(),
             f"counit malformed on {p.sizes}")
        note(dlt.source == bp and dlt.target == w.box(bp) and not dlt.validate(),
             f"comult malformed on {p.sizes}")
        note(w.box_map(identity_map(p)) == identity_map(bp),
             f"box of identity is not identity on {p.sizes}")
        note(compose_maps(w.counit(bp), dlt) == identity_map(bp),
             f"counit law fails on {p.sizes}")
        note(compose_maps(w.box_map(eps), dlt) == identity_map(bp),
             f"boxed-counit law fails on {p.sizes}")
        note(compose_maps(w.comult(bp), dlt) == compose_maps(w.box_map(dlt), dlt),
             f"coassociativity fails on {p.sizes}")
    laws_ok = not witnesses

    for p, q in zip(ps, ps[1:]):
        for h in hom_maps(p, q)[:8]:
            bh = w.box_map(h)
            note(not bh.validate(), f"box map not natural for a map {p.sizes} -> {q.sizes}")
            note(compose_maps(w.counit(q), bh) == compose_maps(h, w.counit(p)),
                 f"counit not natural at a map {p.sizes} -> {q.sizes}")
            note(compose_maps(w.comult(q), bh) ==
                 compose_maps(w.box_map(bh), w.comult(p)),
                 f"comult not natural at a map {p.sizes} -> {q.sizes}")

    one = terminal_presheaf(w.model.base)
    note(all(n == 1 for n in w.box(one).sizes.values()),
         "box does not preserve the terminal presheaf")
    cartesian_ok = True
    for p, q in list(zip(ps, ps[1:]))[:6]:
        pr = product(p, q)
        prb = product(w.box(p), w.box(q))
        cmp = prb.tuple_map(w.box_map(pr.fst), w.box_map(pr.snd))
        if not cmp.is_iso():
            cartesian_ok = False
            witnesses.append(f"box breaks the product of {p.sizes} and {q.sizes}")
    for p, q in list(zip(ps, ps[1:]))[:3]:
        for m in hom_maps(p, q)[:2]:
            for n in hom_maps(p, q)[:2]:
                pb = pullback(m, n)
                pbb = pullback(w.box_map(m), w.box_map(n))
                cmp2 = pbb.presheaf
                lifted = {o: tuple(pbb.pair_index(o, w.box_map(pb.to_left).component[o][v],
                                                  w.box_map(pb.to_right).component[o][v])
                                   for v in range(w.box(pb.presheaf).sizes[o]))
                          for o in cmp2.base.objects}
                cmp_map = PresheafMap(w.box(pb.presheaf), cmp2, lifted)
                if not cmp_map.is_iso():
                    cartesian_ok = False
                    witnesses.append(f"box breaks a pullback over {q.sizes}")

    display_ok = True
    for p in ps[:8]:
        for dmap in all_display_maps_into(w.model, p, w.model.bound)[:12]:
            if not is_display(w.box_map(dmap), w.model.bound):
                display_ok = False
                witnesses.append(
                    f"box of a display map over {p.sizes} exceeds bound {w.model.bound}")
                break
        if not display_ok:
            break

    tau_ok, fiber_ok = True, True
    sample = [p for p in ps if all(n > 0 for n in p.sizes.values())][:2]
    for p in sample:
        for a in all_types_over(w.model, p, w.model.bound)[:3]:
            t = w.tau(a)
            if t.validate() or not t.is_iso():
                tau_ok = False
                witnesses.append(f"tau not an iso for a type over {p.sizes}")
            if w.tp_counit(a).validate() or w.tp_comult(a).validate():
                tau_ok = False
                witnesses.append(f"type-level structure maps not natural over {p.sizes}")
        cg = cofree_coalgebra(w, p)
        inst = IndexedComonadInstance(w, cg)
        for a in all_types_over(w.model, cg.carrier, w.model.bound)[:2]:
            errs = inst.laws(a)
            if errs:
                fiber_ok = False
                witnesses.append(f"fiber laws fail over cofree({p.sizes}): {errs[0]}")

    faithful = True
    if isinstance(w, AdjunctionComonad):
        faithful, fw = left_adjoint_faithful(w.adj, min(w.model.bound, 2))
        if not faithful:
            witnesses.append(f"left adjoint not faithful: {fw}")

    ok = not witnesses
    return {"ok": ok, "laws": laws_ok, "cartesian": cartesian_ok,
            "display": display_ok, "tau": tau_ok, "fiber_laws": fiber_ok,
            "faithful": faithful, "witnesses": witnesses}


def comonad_from_adjunction(adj: KanAdjunction, bound: int = 1,
                            model: NaturalModel | None = None,
                            check: bool = True,
                            probes: Iterable[Presheaf] | None = None) -> AdjunctionComonad:
    """Build the comonad induced by a Kan adjunction and validate it.

    The display bound of the resulting model matters: the endofunctor
    multiplies fibers together, so boundedness of the boxed display
    maps is a real condition and failing it rejects the comonad.
    """
    if model is None:
        model = NaturalModel(adj.small, bound)
    w = AdjunctionComonad(adj, model)
    if check:
        report = validate_comonad(w, probes)
        if not report["ok"]:
            raise ComonadError("; ".join(report["witnesses"][:4]))
    return w


# ---------------------------------------------------------------------------
# Structured types and terms over a coalgebra


@dataclass(frozen=True)
class CoalgebraType:
    """A type over the carrier together with a coalgebra structure for
    the induced comonad on its fiber category."""

    coalg: Coalgebra
    type: TypeOverContext
    theta: TypeMap

    def fiber(self, obj: str, g: int) -> int:
        return self.type.fiber[(obj, g)]


def coalgebra_type_laws(w: NaturalModelComonad, xt: CoalgebraType) -> list[str]:
    cg, a, th = xt.coalg, xt.type, xt.theta
    ba = w.bbox_type(cg, a)
    if th.source != a or th.target != ba:
        return ["structure map has the wrong endpoints"]
    errs = [*th.validate()]
    if errs:
        return errs
    if compose_type_maps(w.fiber_counit(cg, a), th) != identity_type_map(a):
        errs.append("fiber counit law fails")
    if compose_type_maps(w.fiber_comult(cg, a), th) != \
            compose_type_maps(w.bbox_type_map(cg, th), th):
        errs.append("fiber comult law fails")
    return errs


@dataclass(frozen=True)
class CoalgebraTerm:
    """A term whose boxing agrees with the structure of its type."""

    ctype: CoalgebraType
    term: TermOverContext


def coalgebra_term_laws(w: NaturalModelComonad, ct: CoalgebraTerm) -> list[str]:
    xt = ct.ctype
    if ct.term.type != xt.type:
        return ["term does not inhabit the structured type"]
    errs = [*ct.term.validate()]
    if errs:
        return errs
    if apply_type_map(xt.theta, ct.term) != w.bbox_term(xt.coalg, ct.term):
        errs.append("term is not compatible with the structure")
    return errs


def coalgebra_type_maps(w: NaturalModelComonad, x: CoalgebraType,
                        y: CoalgebraType) -> list[TypeMap]:
    """Fiberwise maps commuting with the two structures."""
    return [m for m in type_maps(x.type, y.type)
            if compose_type_maps(y.theta, m) ==
            compose_type_maps(w.bbox_type_map(x.coalg, m), x.theta)]


def coalgebra_terms(w: NaturalModelComonad, xt: CoalgebraType) -> list[CoalgebraTerm]:
    out = []
    for t in terms_of(xt.type):
        ct = CoalgebraTerm(xt, t)
        if not coalgebra_term_laws(w, ct):
            out.append(ct)
    return out


def coalgebra_types_over(w: NaturalModelComonad, cg: Coalgebra,
                         size_bound: int) -> list[CoalgebraType]:
    """All structured types over a coalgebra with fibers up to the bound."""
    out = []
    for a in all_types_over(w.model, cg.carrier, size_bound):
        ba = w.bbox_type(cg, a)
        for th in type_maps(a, ba):
            xt = CoalgebraType(cg, a, th)
            if not coalgebra_type_laws(w, xt):
                out.append(xt)
    return out


def coalg_subst(w: NaturalModelComonad, xt: CoalgebraType, dst: Coalgebra,
                h: PresheafMap) -> CoalgebraType:
    """Substitute a structured type along a coalgebra map into its base.

    Strictness is the point: the box over the new coalgebra of the
    substituted type is the substituted box on the nose, so the
    structure map transports by plain reindexing.
    """
    if not is_coalgebra_map(w, dst, xt.coalg, h):
        raise ComonadError("substitution is not along a coalgebra map")
    a2 = subst_type(xt.type, h)
    ba2 = w.bbox_type(dst, a2)
    moved = subst_type_map(xt.theta, h)
    if moved.target != ba2:
        raise ComonadError("box does not commute with this substitution")
    return CoalgebraType(dst, a2, TypeMap(a2, ba2, moved.component))


# ---------------------------------------------------------------------------
# Context extension by a structured type


def _structure_to_theta(w: NaturalModelComonad, cg: Coalgebra,
                        a: TypeOverContext, g_ext: PresheafMap) -> TypeMap:
    """Read a fiberwise structure map off a coalgebra structure on the
    comprehension, through the comprehension isomorphism of the box."""
    ext = comprehension(a)
    ext2 = comprehension(w.tp_box(a))
    t = w.tau(a)
    ba = w.bbox_type(cg, a)
    comp = {}
    for (o, g), n in a.fiber.items():
        vals = []
        for x in range(n):
            e2 = t.apply(o, g_ext.apply(o, ext.encode(o, g, x)))
            phi, tv = ext2.decode(o, e2)
            if phi != cg.structure.apply(o, g):
                raise ComonadError(
                    f"extension structure does not lie over the base at ({o!r}, {g})")
            vals.append(tv)
        comp[(o, g)] = tuple(vals)
    return TypeMap(a, ba, comp)


def coalg_extension(w: NaturalModelComonad,
                    xt: CoalgebraType) -> tuple[Coalgebra, PresheafMap, CoalgebraTerm]:
    """Extend the coalgebra by a structured type.

    Returns the extended coalgebra, the projection (a coalgebra map),
    and the generic term of the weakened structured type.
    """
    cg, a, th = xt.coalg, xt.type, xt.theta
    ext = comprehension(a)
    ext2 = comprehension(w.tp_box(a))
    ti = w.tau(a).inverse()
    comp = {}
    for o in cg.carrier.base.objects:
        vals = []
        for e in range(ext.presheaf.sizes[o]):
            g, x = ext.decode(o, e)
            e2 = ext2.encode(o, cg.structure.apply(o, g), th.component[(o, g)][x])
            vals.append(ti.apply(o, e2))
        comp[o] = tuple(vals)
    cge = Coalgebra(ext.presheaf, PresheafMap(ext.presheaf, w.box(ext.presheaf), comp))
    errs = coalgebra_laws(w, cge)
    if errs:
        raise ComonadError("extension is not a coalgebra: " + errs[0])
    if not is_coalgebra_map(w, cge, cg, ext.p):
        raise ComonadError("projection of the extension is not a coalgebra map")
    weak = coalg_subst(w, xt, cge, ext.p)
    generic = CoalgebraTerm(weak, ext.v)
    if coalgebra_term_laws(w, generic):
        raise ComonadError("generic term of the extension is not structured")
    return cge, ext.p, generic


# ---------------------------------------------------------------------------
# Dependent sums of structured types


@dataclass(frozen=True)
class CoalgebraSigma:
    """A dependent sum of structured types with its structured first
    projection."""

    type: CoalgebraType
    sigma: Sigma
    proj: TypeMap

    def pair(self, obj: str, g: int, x: int, y: int) -> int:
        return self.sigma.pair(obj, g, x, y)

    def split(self, obj: str, g: int, v: int) -> tuple[int, int]:
        return self.sigma.split(obj, g, v)


def coalg_sigma(w: NaturalModelComonad, xt: CoalgebraType,
                yb: CoalgebraType) -> CoalgebraSigma:
    """Sum a structured family over the extension back down to the base.

    The structure on the sum is transported from the structure on the
    twice-extended coalgebra along the reassociation isomorphism of
    iterated comprehension.
    """
    cg = xt.coalg
    cge, _, _ = coalg_extension(w, xt)
    if yb.coalg != cge:
        raise ComonadError("family is not structured over the extension")
    sg = sigma_type(xt.type, yb.type)
    ca = sg.comp
    cs = comprehension(sg.type)
    cb = comprehension(yb.type)
    comp = {}
    for o in cg.carrier.base.objects:
        vals = []
        for e in range(cs.presheaf.sizes[o]):
            g, s = cs.decode(o, e)
            x, y = sg.split(o, g, s)
            vals.append(cb.encode(o, ca.encode(o, g, x), y))
        comp[o] = tuple(vals)
    assoc = PresheafMap(cs.presheaf, cb.presheaf, comp).assert_valid()
    if not assoc.is_iso():
        raise ComonadError("iterated comprehension failed to reassociate")
    cgb, _, _ = coalg_extension(w, yb)
    gamma_s = compose_maps(w.box_map(assoc.inverse()),
                           compose_maps(cgb.structure, assoc))
    th = _structure_to_theta(w, cg, sg.type, gamma_s)
    st = CoalgebraType(cg, sg.type, th)
    errs = coalgebra_type_laws(w, st)
    if errs:
        raise ComonadError("transported sum structure is broken: " + errs[0])
    proj = TypeMap(sg.type, xt.type,
                   {k: tuple(sg.split(k[0], k[1], v)[0] for v in range(n))
                    for k, n in sg.type.fiber.items()})
    if compose_type_maps(xt.theta, proj) != \
            compose_type_maps(w.bbox_type_map(cg, proj), th):
        raise ComonadError("first projection of the sum is not structured")
    return CoalgebraSigma(st, sg, proj)


# ---------------------------------------------------------------------------
# Exponentials of structured types


def type_tuple_map(pr: TypeProduct, m1: TypeMap, m2: TypeMap) -> TypeMap:
    """Pair two fiberwise maps into a fiberwise product."""
    assert m1.source == m2.source
    comp = {}
    for (o, g), n in m1.source.fiber.items():
        comp[(o, g)] = tuple(pr.pair(o, g, m1.component[(o, g)][v],
                                     m2.component[(o, g)][v])
                             for v in range(n))
    return TypeMap(m1.source, pr.type, comp)


def _pack_map(w: NaturalModelComonad, cg: Coalgebra,
              pr: TypeProduct) -> tuple[TypeMap, TypeProduct]:
    """The inverse of the comparison from a boxed product to the product
    of the boxes, plus the product of boxes it starts from."""
    bl = w.bbox_type(cg, pr.left)
    br = w.bbox_type(cg, pr.right)
    prb = type_product(bl, br)
    bprod = w.bbox_type(cg, pr.type)
    unpack = type_tuple_map(prb, w.bbox_type_map(cg, pr.fst),
                            w.bbox_type_map(cg, pr.snd))
    unpack = TypeMap(bprod, prb.type, unpack.component)
    if not unpack.is_iso():
        raise ComonadError("box does not preserve this fiberwise product")
    return unpack.inverse(), prb


def coalg_product(w: NaturalModelComonad, x: CoalgebraType,
                  y: CoalgebraType) -> tuple[CoalgebraType, TypeProduct]:
    """Binary product of structured types."""
    cg = x.coalg
    pr = type_product(x.type, y.type)
    pack, prb = _pack_map(w, cg, pr)
    th = compose_type_maps(pack, type_tuple_map(
        prb, compose_type_maps(x.theta, pr.fst), compose_type_maps(y.theta, pr.snd)))
    xt = CoalgebraType(cg, pr.type, th)
    errs = coalgebra_type_laws(w, xt)
    if errs:
        raise ComonadError("product structure is broken: " + errs[0])
    return xt, pr


def coalg_terminal(w: NaturalModelComonad, cg: Coalgebra) -> CoalgebraType:
    one = type_terminal(cg.carrier)
    bone = w.bbox_type(cg, one)
    th = TypeMap(one, bone, {k: (0,) * n for k, n in one.fiber.items()})
    if any(n != 1 for n in bone.fiber.values()):
        raise ComonadError("box does not preserve the fiberwise terminal")
    return CoalgebraType(cg, one, th)


def _sub_theta(w: NaturalModelComonad, cg: Coalgebra, big: TypeOverContext,
               dlt_like: TypeMap, keep: Mapping[tuple[str, int], frozenset[int]],
               what: str) -> tuple[CoalgebraType, TypeMap]:
    """Carve the largest structure-closed subtype out of ``keep`` and
    equip it with the induced structure by preimage lookup.

    Closure can fail only by an element whose comultiplication mentions
    a discarded one, so discarding it and retrying reaches the largest
    fixed point; the loop ends because fibers only shrink.
    """
    keep = {k: frozenset(v) for k, v in keep.items()}
    while True:
        sub, inc = sub_type(big, keep)
        binc = w.bbox_type_map(cg, inc)
        new_keep = {}
        shrunk = False
        for (o, g), n in sub.fiber.items():
            good = []
            image = binc.component[(o, g)]
            for v in range(n):
                kept = inc.component[(o, g)][v]
                if dlt_like.apply(o, g, kept) in image:
                    good.append(kept)
                else:
                    shrunk = True
            new_keep[(o, g)] = frozenset(good)
        if not shrunk:
            break
        keep = new_keep
    comp = {}
    for (o, g), n in sub.fiber.items():
        image = binc.component[(o, g)]
        comp[(o, g)] = tuple(image.index(dlt_like.apply(o, g, inc.component[(o, g)][v]))
                             for v in range(n))
    th = TypeMap(sub, w.bbox_type(cg, sub), comp)
    xt = CoalgebraType(cg, sub, th)
    errs = coalgebra_type_laws(w, xt)
    if errs:
        raise ComonadError(f"{what} carries no lawful structure: " + errs[0])
    return xt, inc


@dataclass(frozen=True)
class CoalgebraExponential:
    """An exponential of structured types, realized inside the box of
    the plain exponential."""

    source: CoalgebraType
    target: CoalgebraType
    type: CoalgebraType
    plain: Pi
    inclusion: TypeMap
    ev: TypeMap
    ev_product: TypeProduct

    def transpose(self, w: NaturalModelComonad, z: CoalgebraType,
                  pr: TypeProduct, m: TypeMap) -> TypeMap:
        """Curry a structured map out of a product into the exponential."""
        cg = self.source.coalg
        lam = exp_transpose(self.plain, pr, m)
        t = compose_type_maps(w.bbox_type_map(cg, lam), z.theta)
        comp = {}
        for (o, g), n in z.type.fiber.items():
            image = self.inclusion.component[(o, g)]
            vals = []
            for v in range(n):
                tv = t.component[(o, g)][v]
                if tv not in image:
                    raise ComonadError("transpose of an unstructured map")
                vals.append(image.index(tv))
            comp[(o, g)] = tuple(vals)
        return TypeMap(z.type, self.type.type, comp)


def coalg_exponential(w: NaturalModelComonad, x: CoalgebraType,
                      y: CoalgebraType) -> CoalgebraExponential:
    """The exponential of structured types.

    An element of the box of the plain exponential survives when
    applying it slotwise to a boxed argument agrees with applying its
    counit and boxing the output; the structure is then inherited from
    the cofree one by comultiplication.
    """
    cg = x.coalg
    if y.coalg != cg:
        raise ComonadError("exponential needs both types over one coalgebra")
    a, b = x.type, y.type
    e_plain = type_exponential(a, b)
    box_exp = w.bbox_type(cg, e_plain.type)
    bb = w.bbox_type(cg, b)
    exp_bb = type_exponential(a, bb)

    pr_ea = type_product(e_plain.type, a)
    ev_plain = exp_ev(e_plain, pr_ea, b)
    v1 = compose_type_maps(
        exp_transpose(exp_bb, pr_ea, compose_type_maps(y.theta, ev_plain)),
        w.fiber_counit(cg, e_plain.type))

    pack, prb = _pack_map(w, cg, pr_ea)
    pr_box = type_product(box_exp, a)
    into_pack = type_tuple_map(prb, pr_box.fst,
                               compose_type_maps(x.theta, pr_box.snd))
    applied = compose_type_maps(w.bbox_type_map(cg, ev_plain),
                                compose_type_maps(pack, into_pack))
    v2 = exp_transpose(exp_bb, pr_box, applied)

    keep = {k: frozenset(v for v in range(n)
                         if v1.component[k][v] == v2.component[k][v])
            for k, n in box_exp.fiber.items()}
    xt, inclusion = _sub_theta(w, cg, box_exp, w.fiber_comult(cg, e_plain.type),
                               keep, "exponential of structured types")
    pr_sub = type_product(xt.type, a)
    first = compose_type_maps(w.fiber_counit(cg, e_plain.type),
                              compose_type_maps(inclusion, pr_sub.fst))
    ev = compose_type_maps(ev_plain, type_tuple_map(pr_ea, first, pr_sub.snd))
    return CoalgebraExponential(x, y, xt, e_plain, inclusion, ev, pr_sub)


def exponential_up_check(w: NaturalModelComonad, exp: CoalgebraExponential,
                         z: CoalgebraType) -> dict:
    """Verify the exponential's universal property against one structured
    type, by enumerating both hom sets and checking the two transposes
    are mutually inverse."""
    y = exp.target
    zx, pr_zx = coalg_product(w, z, exp.source)
    uncurried = coalgebra_type_maps(w, zx, y)
    curried = coalgebra_type_maps(w, z, exp.type)
    ok = len(uncurried) == len(curried)
    for m in uncurried:
        tr = exp.transpose(w, z, pr_zx, m)
        if tr not in curried:
            return {"ok": False, "witness": "transpose is not structured"}
        back = compose_type_maps(exp.ev, type_tuple_map(
            exp.ev_product, compose_type_maps(tr, pr_zx.fst), pr_zx.snd))
        if back != m:
            return {"ok": False, "witness": "evaluation does not undo currying"}
    for h in curried:
        u_h = compose_type_maps(exp.ev, type_tuple_map(
            exp.ev_product, compose_type_maps(h, pr_zx.fst), pr_zx.snd))
        if u_h not in uncurried:
            return {"ok": False, "witness": "uncurrying leaves the structured maps"}
        if exp.transpose(w, z, pr_zx, u_h) != h:
            return {"ok": False, "witness": "currying does not undo evaluation"}
    return {"ok": ok, "uncurried": len(uncurried), "curried": len(curried)}


# ---------------------------------------------------------------------------
# Dependent products of structured types


@dataclass(frozen=True)
class CoalgebraPi:
    """A dependent product of structured types, realized as the sections
    of the structured first projection inside an exponential."""

    base: CoalgebraType
    family: CoalgebraType
    type: CoalgebraType
    sum: CoalgebraSigma
    exponential: CoalgebraExponential
    inclusion: TypeMap

    def _family_at(self, w: NaturalModelComonad, obj: str, g: int, v: int) -> int:
        exp = self.exponential
        cg = self.base.coalg
        e = self.inclusion.component[(obj, g)][v]
        be = exp.inclusion.component[(obj, g)][e]
        eps = w.fiber_counit(cg, exp.plain.type)
        return eps.component[(obj, g)][be]

    def app(self, w: NaturalModelComonad, obj: str, g: int, v: int, x: int) -> int:
        """Apply a product element to an argument of the base type."""
        s = self.exponential.plain.app(obj, g, self._family_at(w, obj, g, v), x)
        x2, y = self.sum.split(obj, g, s)
        if x2 != x:
            raise ComonadError("product element is not a section")
        return y

    def app_term(self, w: NaturalModelComonad, ct: CoalgebraTerm) -> CoalgebraTerm:
        """Evaluate a structured product term to a structured family term."""
        cext = comprehension(self.base.type)
        pick = {}
        for o in cext.presheaf.base.objects:
            for e in range(cext.presheaf.sizes[o]):
                g, x = cext.decode(o, e)
                pick[(o, e)] = self.app(w, o, g, ct.term.pick[(o, g)], x)
        return CoalgebraTerm(self.family,
                             TermOverContext(self.family.type, pick))

    def intro_term(self, w: NaturalModelComonad, ct: CoalgebraTerm) -> CoalgebraTerm:
        """Abstract a structured family term into a structured product term."""
        one = coalg_terminal(w, self.base.coalg)
        a = self.base.type
        pr = type_product(one.type, a)
        cext = comprehension(a)
        comp = {}
        for (o, g), n in pr.type.fiber.items():
            vals = []
            for v in range(n):
                _, x = pr.split(o, g, v)
                y = ct.term.pick[(o, cext.encode(o, g, x))]
                vals.append(self.sum.pair(o, g, x, y))
            comp[(o, g)] = tuple(vals)
        m = TypeMap(pr.type, self.sum.type.type, comp)
        tr = self.exponential.transpose(w, one, pr, m)
        pick = {}
        for (o, g), vals in tr.component.items():
            image = self.inclusion.component[(o, g)]
            if vals[0] not in image:
                raise ComonadError("abstraction escapes the dependent product")
            pick[(o, g)] = image.index(vals[0])
        return CoalgebraTerm(self.type, TermOverContext(self.type.type, pick))


def coalg_pi(w: NaturalModelComonad, x: CoalgebraType,
             yb: CoalgebraType) -> CoalgebraPi:
    """The dependent product of a structured family over the extension.

    Built as the subtype of the exponential into the structured sum
    whose elements post-compose with the first projection to the
    identity, with the structure inherited from the exponential.
    """
    cg = x.coalg
    a = x.type
    sm = coalg_sigma(w, x, yb)
    es = coalg_exponential(w, x, sm.type)
    ea = coalg_exponential(w, x, x)

    pr_sa = type_product(es.plain.type, a)
    post_plain = exp_transpose(
        ea.plain, pr_sa,
        compose_type_maps(sm.proj, exp_ev(es.plain, pr_sa, sm.type.type)))
    bpost = w.bbox_type_map(cg, post_plain)

    one = coalg_terminal(w, cg)
    pr_1a = type_product(one.type, a)
    tr_id = ea.transpose(w, one, pr_1a, pr_1a.snd)

    keep = {}
    for (o, g), n in es.type.type.fiber.items():
        image = ea.inclusion.component[(o, g)]
        ident = ea.inclusion.component[(o, g)][tr_id.component[(o, g)][0]]
        good = []
        for v in range(n):
            val = bpost.component[(o, g)][es.inclusion.component[(o, g)][v]]
            if val == ident:
                good.append(v)
        keep[(o, g)] = frozenset(good)
    xt, inc = _sub_theta(w, cg, es.type.type, es.type.theta, keep,
                         "dependent product of structured types")
    return CoalgebraPi(x, yb, xt, sm, es, inc)


def pi_up_check(w: NaturalModelComonad, cp: CoalgebraPi) -> dict:
    """Check that structured terms of the product and structured terms
    of the family correspond, with the two passages mutually inverse."""
    pis = coalgebra_terms(w, cp.type)
    fams = coalgebra_terms(w, cp.family)
    if len(pis) != len(fams):
        return {"ok": False, "products": len(pis), "families": len(fams),
                "witness": "term counts differ"}
    for ct in pis:
        body = cp.app_term(w, ct)
        if coalgebra_term_laws(w, body):
            return {"ok": False, "witness": "application is not structured"}
        if cp.intro_term(w, body).term != ct.term:
            return {"ok": False, "witness": "abstraction does not undo application"}
    for ct in fams:
        lam = cp.intro_term(w, ct)
        if coalgebra_term_laws(w, lam):
            return {"ok": False, "witness": "abstraction is not structured"}
        if cp.app_term(w, lam).term != ct.term:
            return {"ok": False, "witness": "application does not undo abstraction"}
    return {"ok": True, "products": len(pis), "families": len(fams)}


# ---------------------------------------------------------------------------
# The natural model with coalgebras as contexts


@dataclass(frozen=True)
class CoalgebraModel:
    """The dependent-type structure whose contexts are coalgebras.

    Everything is fiberwise over a chosen coalgebra and strictly stable
    under substitution along coalgebra maps, which is what makes these
    usable as a model of a modal type theory rather than just a
    category with structure.
    """

    comonad: NaturalModelComonad

    def terminal(self) -> Coalgebra:
        return terminal_coalgebra(self.comonad)

    def types_over(self, cg: Coalgebra, size_bound: int) -> list[CoalgebraType]:
        return coalgebra_types_over(self.comonad, cg, size_bound)

    def terms(self, xt: CoalgebraType) -> list[CoalgebraTerm]:
        return coalgebra_terms(self.comonad, xt)

    def maps(self, x: CoalgebraType, y: CoalgebraType) -> list[TypeMap]:
        return coalgebra_type_maps(self.comonad, x, y)

    def subst(self, xt: CoalgebraType, dst: Coalgebra, h: PresheafMap) -> CoalgebraType:
        return coalg_subst(self.comonad, xt, dst, h)

    def extend(self, xt: CoalgebraType) -> tuple[Coalgebra, PresheafMap, CoalgebraTerm]:
        return coalg_extension(self.comonad, xt)

    def sigma(self, x: CoalgebraType, yb: CoalgebraType) -> CoalgebraSigma:
        return coalg_sigma(self.comonad, x, yb)

    def pi(self, x: CoalgebraType, yb: CoalgebraType) -> CoalgebraPi:
        return coalg_pi(self.comonad, x, yb)

    def exponential(self, x: CoalgebraType, y: CoalgebraType) -> CoalgebraExponential:
        return coalg_exponential(self.comonad, x, y)

    def product(self, x: CoalgebraType, y: CoalgebraType) -> tuple[CoalgebraType, TypeProduct]:
        return coalg_product(self.comonad, x, y)

    def box(self, xt: CoalgebraType) -> CoalgebraType:
        return self.comonad.cofree_type(xt.coalg, xt.type)


def coalgebra_natural_model(w: NaturalModelComonad) -> CoalgebraModel:
    return CoalgebraModel(w)


# ---------------------------------------------------------------------------
# Internal categories and the category of universe codes


@dataclass(frozen=True)
class InternalCategory:
    """A category internal to presheaves, given by its object and
    morphism presheaves and the usual structure maps; composable pairs
    are held as an explicit pullback."""

    obj: Presheaf
    mor: Presheaf
    src: PresheafMap
    tgt: PresheafMap
    ident: PresheafMap
    pairs: PullbackSquare
    comp: PresheafMap

    def compose_at(self, obj: str, m2: int, m1: int) -> int:
        """Composite of ``m2`` after ``m1`` at one stage."""
        return self.comp.apply(obj, self.pairs.pair_index(obj, m2, m1))

    def validate(self) -> list[str]:
        errs = []
        for m in (self.src, self.tgt, self.ident, self.comp):
            errs.extend(m.validate())
        if errs:
            return errs
        for o in self.obj.base.objects:
            for x in self.obj.elements(o):
                e = self.ident.apply(o, x)
                if self.src.apply(o, e) != x or self.tgt.apply(o, e) != x:
                    errs.append(f"identity at ({o!r}, {x}) has wrong endpoints")
            for (m2, m1) in self.pairs.pairs[o]:
                v = self.compose_at(o, m2, m1)
                if self.src.apply(o, v) != self.src.apply(o, m1) or \
                        self.tgt.apply(o, v) != self.tgt.apply(o, m2):
                    errs.append(f"composition at ({o!r}, {m2}, {m1}) has wrong endpoints")
            for m in self.mor.elements(o):
                le = self.ident.apply(o, self.tgt.apply(o, m))
                re = self.ident.apply(o, self.src.apply(o, m))
                if self.compose_at(o, le, m) != m or self.compose_at(o, m, re) != m:
                    errs.append(f"unit law fails at ({o!r}, {m})")
            for m3 in self.mor.elements(o):
                for m2 in self.mor.elements(o):
                    if self.src.apply(o, m3) != self.tgt.apply(o, m2):
                        continue
                    for m1 in self.mor.elements(o):
                        if self.src.apply(o, m2) != self.tgt.apply(o, m1):
                            continue
                        lhs = self.compose_at(o, self.compose_at(o, m3, m2), m1)
                        rhs = self.compose_at(o, m3, self.compose_at(o, m2, m1))
                        if lhs != rhs:
                            errs.append(f"associativity fails at ({o!r})")
        return errs


@dataclass(frozen=True)
class UniverseCategory:
    """The internal category of universe codes and code morphisms."""

    universe: Universe
    cat: InternalCategory
    mor_table: Mapping[str, tuple[tuple[int, int, PresheafMap], ...]]
    lookup: Mapping[str, Mapping[tuple[int, int, PresheafMap], int]]

    def mor_data(self, obj: str, k: int) -> tuple[int, int, PresheafMap]:
        return self.mor_table[obj][k]

    def mor_index(self, obj: str, c1: int, c2: int, pm: PresheafMap) -> int:
        return self.lookup[obj][(c1, c2, pm)]


def universe_internal_category(u: Universe) -> UniverseCategory:
    """Internalize the universe: codes as objects, presheaf maps between
    codes as morphisms, with the strict slice reindexing as restriction."""
    c = u.model.base
    mor_table = {}
    for i in c.objects:
        triples = []
        for n1, x1 in enumerate(u.codes[i]):
            for n2, x2 in enumerate(u.codes[i]):
                for pm in hom_maps(x1, x2):
                    triples.append((n1, n2, pm))
        mor_table[i] = tuple(triples)
    lookup = {i: {t: k for k, t in enumerate(mor_table[i])} for i in c.objects}
    sizes = {i: len(mor_table[i]) for i in c.objects}

    def restrict_mor(f: str, t: tuple[int, int, PresheafMap]) -> tuple[int, int, PresheafMap]:
        i, j = c.src[f], c.dst[f]
        n1, n2, pm = t
        r1 = u.presheaf.act(f, n1)
        r2 = u.presheaf.act(f, n2)
        sl = u.slices[i].cat
        comp = {g: pm.component[c.compose(f, g)] for g in sl.objects}
        return r1, r2, PresheafMap(u.codes[i][r1], u.codes[i][r2], comp)

    action = {}
    for f in c.morphisms:
        action[f] = tuple(lookup[c.src[f]][restrict_mor(f, t)]
                          for t in mor_table[c.dst[f]])
    mor = Presheaf(c, sizes, action).assert_valid()

    src = PresheafMap(mor, u.presheaf,
                      {i: tuple(t[0] for t in mor_table[i]) for i in c.objects})
    tgt = PresheafMap(mor, u.presheaf,
                      {i: tuple(t[1] for t in mor_table[i]) for i in c.objects})
    ident = PresheafMap(u.presheaf, mor,
                        {i: tuple(lookup[i][(n, n, identity_map(x))]
                                  for n, x in enumerate(u.codes[i]))
                         for i in c.objects})
    pairs = pullback(src, tgt)
    comp_vals = {}
    for i in c.objects:
        vals = []
        for (m2, m1) in pairs.pairs[i]:
            a1, _, pm1 = mor_table[i][m1]
            _, b2, pm2 = mor_table[i][m2]
            vals.append(lookup[i][(a1, b2, compose_maps(pm2, pm1))])
        comp_vals[i] = tuple(vals)
    comp = PresheafMap(pairs.presheaf, mor, comp_vals)
    cat = InternalCategory(u.presheaf, mor, src, tgt, ident, pairs, comp)
    errs = cat.validate()
    if errs:
        raise ComonadError("universe category is broken: " + errs[0])
    return UniverseCategory(u, cat, mor_table, lookup)


# ---------------------------------------------------------------------------
# Largest sub-coalgebras and the classifier of structured types


def largest_sub_coalgebra(w: NaturalModelComonad, cg: Coalgebra,
                          members: Mapping[str, frozenset[int]]
                          ) -> tuple[Coalgebra, PresheafMap, dict[str, frozenset[int]]]:
    """The largest sub-coalgebra whose elements all lie in ``members``.

    Alternates closing the selection under restriction and under the
    structure map until both hold; each pass only removes elements, so
    the loop reaches the greatest fixed point.
    """
    p = cg.carrier
    c = p.base
    sel = {o: frozenset(members.get(o, frozenset())) for o in c.objects}
    while True:
        changed = True
        while changed:
            changed = False
            for f in c.morphisms:
                i, j = c.src[f], c.dst[f]
                good = frozenset(x for x in sel[j] if p.act(f, x) in sel[i])
                if good != sel[j]:
                    sel[j] = good
                    changed = True
        sub, inc = sub_presheaf(p, sel)
        bm = w.box_map(inc)
        kept = {}
        shrunk = False
        for o in c.objects:
            image = set(bm.component[o])
            good = []
            for x in sel[o]:
                if cg.structure.apply(o, x) in image:
                    good.append(x)
                else:
                    shrunk = True
            kept[o] = frozenset(good)
        if not shrunk:
            break
        sel = kept
    scg, inc = sub_coalgebra(w, cg, sel)
    return scg, inc, sel


@dataclass(frozen=True)
class CoalgebraClassifier:
    """The classifying coalgebra for structured types at the display
    bound: points are boxed pairs of a code and a structure morphism,
    cut down to the stage-wise comonad laws."""

    comonad: NaturalModelComonad
    universe: Universe
    ucat: UniverseCategory
    coalgebra: Coalgebra
    inclusion: PresheafMap
    pairing: Product

    def encode_point(self, xt: CoalgebraType) -> PresheafMap:
        """The classifying coalgebra map of a structured type."""
        w, u = self.comonad, self.universe
        cg = xt.coalg
        c = u.model.base
        gamma = cg.carrier
        chi = u.encode(xt.type)
        bba = w.bbox_type(cg, xt.type)
        chi_b = u.encode(bba)
        mu_comp = {}
        for i in c.objects:
            sl = u.slices[i].cat
            vals = []
            for g in gamma.elements(i):
                comp = {f: xt.theta.component[(c.src[f], gamma.act(f, g))]
                        for f in sl.objects}
                pm = PresheafMap(u.code(i, chi.apply(i, g)),
                                 u.code(i, chi_b.apply(i, g)), comp)
                vals.append(self.ucat.mor_index(i, chi.apply(i, g),
                                                chi_b.apply(i, g), pm))
            mu_comp[i] = tuple(vals)
        mu = PresheafMap(gamma, self.ucat.cat.mor, mu_comp)
        paired = self.pairing.tuple_map(chi, mu)
        kappa = compose_maps(w.box_map(paired), cg.structure)
        comp = {}
        for o in c.objects:
            image = self.inclusion.component[o]
            vals = []
            for x in gamma.elements(o):
                v = kappa.apply(o, x)
                if v not in image:
                    raise ComonadError(
                        f"structured type escapes the classifier at ({o!r}, {x})")
                vals.append(image.index(v))
            comp[o] = tuple(vals)
        return PresheafMap(gamma, self.coalgebra.carrier, comp)

    def decode_point(self, cg: Coalgebra, h: PresheafMap) -> CoalgebraType:
        """The structured type classified by a coalgebra map into the
        classifier."""
        w, u = self.comonad, self.universe
        c = u.model.base
        eps = w.counit(self.pairing.presheaf)
        down = compose_maps(eps, compose_maps(self.inclusion, h))
        chi = compose_maps(self.pairing.fst, down)
        mu = compose_maps(self.pairing.snd, down)
        a = u.decode(chi)
        ba = w.bbox_type(cg, a)
        comp = {}
        for i in c.objects:
            for g in cg.carrier.elements(i):
                _, _, pm = self.ucat.mor_data(i, mu.apply(i, g))
                comp[(i, g)] = pm.component[c.id(i)]
        th = TypeMap(a, ba, comp)
        return CoalgebraType(cg, a, th)


def coalgebra_classifier(w: NaturalModelComonad,
                         u: Universe | None = None) -> CoalgebraClassifier:
    """Build the classifier of structured types inside the coalgebras.

    The carrier is carved out of the box of codes paired with code
    morphisms by four stage-wise conditions: the morphism runs from the
    code to the boxed code, composing with the code-level counit gives
    the identity, and composing with the code-level comultiplication
    agrees with boxing the morphism itself.
    """
    if u is None:
        u = hs_universe(w.model)
    uc = universe_internal_category(u)
    c = w.model.base
    q = product(u.presheaf, uc.cat.mor)
    bq = w.box(q.presheaf)
    bfst = w.box_map(q.fst)
    bsnd = w.box_map(q.snd)
    bsrc = w.box_map(uc.cat.src)
    btgt = w.box_map(uc.cat.tgt)
    beta = w.box_code(u)
    bbeta = w.box_map(beta)
    dlt0 = w.comult(u.presheaf)
    eps0 = w.counit(u.presheaf)
    eps1 = w.counit(uc.cat.mor)
    eps_code = w.code_counit(uc)
    dlt_code = w.code_comult(uc)
    bmor = w.box_code_mor(uc)

    members = {}
    for o in c.objects:
        good = []
        for v in bq.elements(o):
            phi = bfst.apply(o, v)
            psi = bsnd.apply(o, v)
            if bsrc.apply(o, psi) != phi:
                continue
            if btgt.apply(o, psi) != bbeta.apply(o, dlt0.apply(o, phi)):
                continue
            m = eps1.apply(o, psi)
            cde = eps0.apply(o, phi)
            if uc.cat.compose_at(o, eps_code.apply(o, phi), m) != \
                    uc.cat.ident.apply(o, cde):
                continue
            if uc.cat.compose_at(o, dlt_code.apply(o, phi), m) != \
                    uc.cat.compose_at(o, bmor.apply(o, psi), m):
                continue
            good.append(v)
        members[o] = frozenset(good)
    wcg, inc, _ = largest_sub_coalgebra(w, cofree_coalgebra(w, q.presheaf), members)
    return CoalgebraClassifier(w, u, uc, wcg, inc, q)


def classifier_report(w: NaturalModelComonad, clf: CoalgebraClassifier,
                      size_bound: int = 1) -> dict:
    """Certify the classifier against enumeration: every structured type
    is classified by a unique coalgebra map and vice versa, on the nose,
    naturally in the coalgebra."""
    witnesses = []
    pairs = []
    for cg in enumerate_coalgebras(w, size_bound):
        xts = coalgebra_types_over(w, cg, w.model.bound)
        maps = coalgebra_maps(w, cg, clf.coalgebra)
        seen = []
        for xt in xts:
            h = clf.encode_point(xt)
            if h not in maps:
                witnesses.append(f"classifying map of a type over {cg.carrier.sizes} "
                                 "is not a coalgebra map")
                continue
            back = clf.decode_point(cg, h)
            if back.type != xt.type or back.theta != xt.theta:
                witnesses.append(f"decode of encode differs over {cg.carrier.sizes}")
            seen.append(h)
        if len(set(seen)) != len(xts):
            witnesses.append(f"classification not injective over {cg.carrier.sizes}")
        for h in maps:
            xt = clf.decode_point(cg, h)
            if coalgebra_type_laws(w, xt):
                witnesses.append(f"a point over {cg.carrier.sizes} decodes "
                                 "to a broken structured type")
            elif clf.encode_point(xt) != h:
                witnesses.append(f"encode of decode differs over {cg.carrier.sizes}")
        pairs.append((cg, len(xts), len(maps)))
        if len(xts) != len(maps):
            witnesses.append(f"{len(xts)} structured types vs {len(maps)} points "
                             f"over {cg.carrier.sizes}")
    for cg, _, _ in pairs[:3]:
        for cg2, _, _ in pairs[:3]:
            for h in coalgebra_maps(w, cg, cg2)[:4]:
                for xt in coalgebra_types_over(w, cg2, w.model.bound)[:4]:
                    lhs = clf.encode_point(coalg_subst(w, xt, cg, h))
                    rhs = compose_maps(clf.encode_point(xt), h)
                    if lhs != rhs:
                        witnesses.append("classification is unnatural")
    return {"ok": not witnesses,
            "instances": [(dict(cg.carrier.sizes), n, m) for cg, n, m in pairs],
            "witnesses": witnesses}


# ---------------------------------------------------------------------------
# The subobject classifier of the coalgebra topos


@dataclass(frozen=True)
class KockWraithClassifier:
    """The subobject classifier of coalgebras: the fixed points of the
    induced endomap on the cofree coalgebra over the sieve classifier."""

    comonad: NaturalModelComonad
    omega: Omega
    coalgebra: Coalgebra
    inclusion: PresheafMap

    def classify(self, cg: Coalgebra, sel: Mapping[str, frozenset[int]]) -> PresheafMap:
        """The classifying coalgebra map of a sub-coalgebra selection."""
        w = self.comonad
        chi = characteristic_map(self.omega, cg.carrier, sel)
        kappa = compose_maps(w.box_map(chi), cg.structure)
        comp = {}
        for o in cg.carrier.base.objects:
            image = self.inclusion.component[o]
            vals = []
            for x in cg.carrier.elements(o):
                v = kappa.apply(o, x)
                if v not in image:
                    raise ComonadError(
                        f"selection is not a sub-coalgebra at ({o!r}, {x})")
                vals.append(image.index(v))
            comp[o] = tuple(vals)
        return PresheafMap(cg.carrier, self.coalgebra.carrier, comp)

    def subobject(self, cg: Coalgebra, h: PresheafMap) -> dict[str, frozenset[int]]:
        """The sub-coalgebra selection classified by a coalgebra map."""
        w = self.comonad
        chi = compose_maps(w.counit(self.omega.presheaf),
                           compose_maps(self.inclusion, h))
        return subobject_of_char(self.omega, chi)

    def truth(self) -> PresheafMap:
        """The top point, classifying the whole terminal coalgebra."""
        one = terminal_coalgebra(self.comonad)
        return self.classify(one, {o: frozenset(one.carrier.elements(o))
                                   for o in one.carrier.base.objects})


def kock_wraith_classifier(w: NaturalModelComonad) -> KockWraithClassifier:
    """The classifier of sub-coalgebras, as the equalizer of the induced
    sieve endomap against the identity on the cofree coalgebra."""
    om = subobject_classifier(w.model.base)
    b = w.box_sieve(om)
    dlt = w.comult(om.presheaf)
    endo = compose_maps(w.box_map(b), dlt)
    members = {o: frozenset(x for x in w.box(om.presheaf).elements(o)
                            if endo.apply(o, x) == x)
               for o in w.model.base.objects}
    wcg, inc, _ = largest_sub_coalgebra(w, cofree_coalgebra(w, om.presheaf), members)
    return KockWraithClassifier(w, om, wcg, inc)


def kock_wraith_report(w: NaturalModelComonad, kw: KockWraithClassifier,
                       size_bound: int = 1) -> dict:
    """Certify the subobject classifier: sub-coalgebras correspond to
    coalgebra maps into it, and everything else is rejected."""
    witnesses = []
    instances = []
    for cg in enumerate_coalgebras(w, size_bound):
        subs = sub_coalgebras(w, cg)
        maps = coalgebra_maps(w, cg, kw.coalgebra)
        if len(subs) != len(maps):
            witnesses.append(f"{len(subs)} sub-coalgebras vs {len(maps)} points "
                             f"over {cg.carrier.sizes}")
        seen = set()
        for sel in subs:
            h = kw.classify(cg, sel)
            if h not in maps:
                witnesses.append("classifying map is not a coalgebra map")
                continue
            seen.add(h)
            back = kw.subobject(cg, h)
            if {o: frozenset(v) for o, v in back.items()} != \
                    {o: frozenset(sel[o]) for o in sel}:
                witnesses.append("classified subobject differs from the selection")
        if len(seen) != len(subs):
            witnesses.append(f"classification not injective over {cg.carrier.sizes}")
        for h in maps:
            if h not in seen:
                witnesses.append("a point classifies no sub-coalgebra")
        rejected = 0
        for sel in subpresheaves(cg.carrier):
            if sel in subs:
                continue
            try:
                kw.classify(cg, sel)
                witnesses.append("a non-closed selection was classified")
            except ComonadError:
                rejected += 1
        instances.append((dict(cg.carrier.sizes), len(subs), rejected))
    return {"ok": not witnesses, "instances": instances, "witnesses": witnesses}
