"""Kernel for a minimal modal type theory with a necessity operator.

Terms are built from variables, declared constants, a box introduction
``box(t)`` whose body may only use modal hypotheses, and the eliminator
``let box u := s in t`` that opens a boxed term under a modal binder.
Contexts come in two zones: modal hypotheses written ``u :: A`` and
ordinary ones written ``x : A``.  Types are base constants and ``Box``.

The checker produces derivation trees that an independent validator can
replay rule by rule, and definitional equality is decided by reducing
the box redexes and then searching a bounded neighborhood of unfolding
and refolding steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class CheckError(Exception):
    """A judgment failed, together with the rule that could not fire."""

    def __init__(self, msg: str, rule_gap: str, judgment: str = ""):
        super().__init__(msg)
        self.rule_gap = rule_gap
        self.judgment = judgment


# ---------------------------------------------------------------------------
# Syntax


@dataclass(frozen=True)
class BaseType:
    name: str


@dataclass(frozen=True)
class BoxType:
    inner: "TypeExpr"


TypeExpr = Union[BaseType, BoxType]


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Shut:
    body: "TermExpr"


@dataclass(frozen=True)
class LetBox:
    binder: str
    scrutinee: "TermExpr"
    body: "TermExpr"


TermExpr = Union[Var, Const, Shut, LetBox]


@dataclass(frozen=True)
class Telescope:
    """A two-zone context: modal entries first, ordinary entries after."""

    modal: tuple[tuple[str, TypeExpr], ...] = ()
    ordinary: tuple[tuple[str, TypeExpr], ...] = ()

    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.modal) + tuple(n for n, _ in self.ordinary)

    def modal_lookup(self, name: str) -> TypeExpr | None:
        for n, ty in self.modal:
            if n == name:
                return ty
        return None

    def ordinary_lookup(self, name: str) -> TypeExpr | None:
        for n, ty in self.ordinary:
            if n == name:
                return ty
        return None

    def extend_modal(self, name: str, ty: TypeExpr) -> "Telescope":
        return Telescope(self.modal + ((name, ty),), self.ordinary)

    def without_ordinary(self) -> "Telescope":
        return Telescope(self.modal, ())


@dataclass(frozen=True)
class Signature:
    base_types: tuple[str, ...] = ()
    constants: tuple[tuple[str, TypeExpr], ...] = ()

    def has_base(self, name: str) -> bool:
        return name in self.base_types

    def constant_type(self, name: str) -> TypeExpr | None:
        for n, ty in self.constants:
            if n == name:
                return ty
        return None


@dataclass(frozen=True)
class CheckDirective:
    telescope: Telescope
    term: TermExpr
    type: TypeExpr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class EqualDirective:
    telescope: Telescope
    left: TermExpr
    right: TermExpr
    type: TypeExpr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Module:
    signature: Signature
    directives: tuple[Union[CheckDirective, EqualDirective], ...] = ()


# ---------------------------------------------------------------------------
# Lexer and parser


_KEYWORDS = {"type", "const", "check", "equal", "box", "let", "in", "Box"}
_PUNCT = ("|-", "::", ":=", "==", ",", ";", ":", "|", "(", ")")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    toks = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        matched = False
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(_Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                matched = True
                break
        if matched:
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            word = text[i:j]
            kind = "kw" if word in _KEYWORDS else "ident"
            toks.append(_Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(_Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def next(self) -> _Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> _Token:
        t = self.peek()
        if t.text != text or t.kind == "eof":
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}",
                             t.line, t.col)
        return self.next()

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"expected a name, found {t.text or 'end of input'!r}",
                             t.line, t.col)
        return self.next().text

    def type_expr(self) -> TypeExpr:
        t = self.peek()
        if t.text == "Box":
            self.next()
            return BoxType(self.type_expr())
        if t.text == "(":
            self.next()
            ty = self.type_expr()
            self.expect(")")
            return ty
        return BaseType(self.ident())

    def term(self) -> TermExpr:
        t = self.peek()
        if t.text == "box":
            self.next()
            self.expect("(")
            body = self.term()
            self.expect(")")
            return Shut(body)
        if t.text == "let":
            self.next()
            self.expect("box")
            binder = self.ident()
            self.expect(":=")
            scrutinee = self.term()
            self.expect("in")
            body = self.term()
            return LetBox(binder, scrutinee, body)
        if t.text == "(":
            self.next()
            tm = self.term()
            self.expect(")")
            return tm
        return Var(self.ident())

    def telescope(self) -> Telescope:
        modal, ordinary = [], []
        if self.peek().text not in ("|-", "|"):
            modal.extend(self._entries("::"))
        if self.peek().text == "|":
            self.next()
            if self.peek().text != "|-":
                ordinary.extend(self._entries(":"))
        return Telescope(tuple(modal), tuple(ordinary))

    def _entries(self, sep: str) -> list[tuple[str, TypeExpr]]:
        out = [self._entry(sep)]
        while self.peek().text == ",":
            self.next()
            out.append(self._entry(sep))
        return out

    def _entry(self, sep: str) -> tuple[str, TypeExpr]:
        name = self.ident()
        self.expect(sep)
        return name, self.type_expr()

    def module(self) -> Module:
        bases, consts, directives = [], [], []
        while self.peek().kind != "eof":
            t = self.peek()
            if t.text == "type":
                self.next()
                bases.append(self.ident())
                self.expect(";")
            elif t.text == "const":
                self.next()
                name = self.ident()
                self.expect(":")
                consts.append((name, self.type_expr()))
                self.expect(";")
            elif t.text == "check":
                self.next()
                tele = self.telescope()
                self.expect("|-")
                tm = self.term()
                self.expect(":")
                ty = self.type_expr()
                self.expect(";")
                directives.append(CheckDirective(tele, tm, ty, t.line))
            elif t.text == "equal":
                self.next()
                tele = self.telescope()
                self.expect("|-")
                left = self.term()
                self.expect("==")
                right = self.term()
                self.expect(":")
                ty = self.type_expr()
                self.expect(";")
                directives.append(EqualDirective(tele, left, right, ty, t.line))
            else:
                raise ParseError(f"expected a declaration, found {t.text!r}",
                                 t.line, t.col)
        return Module(Signature(tuple(bases), tuple(consts)), tuple(directives))


def _resolve(tm: TermExpr, consts: frozenset[str]) -> TermExpr:
    """Turn name references to declared constants into constant nodes."""
    if isinstance(tm, Var):
        return Const(tm.name) if tm.name in consts else tm
    if isinstance(tm, Const):
        return tm
    if isinstance(tm, Shut):
        return Shut(_resolve(tm.body, consts))
    return LetBox(tm.binder, _resolve(tm.scrutinee, consts),
                  _resolve(tm.body, consts - {tm.binder}))


def parse(text: str) -> Module:
    """Parse a module: declarations followed by check/equal directives.

    Names in directive terms resolve against the constants declared
    earlier in the module; everything else stays a variable.
    """
    mod = _Parser(text).module()
    consts = frozenset(n for n, _ in mod.signature.constants)
    directives = []
    for d in mod.directives:
        if isinstance(d, CheckDirective):
            directives.append(CheckDirective(
                d.telescope, _resolve(d.term, consts), d.type, d.line))
        else:
            directives.append(EqualDirective(
                d.telescope, _resolve(d.left, consts),
                _resolve(d.right, consts), d.type, d.line))
    return Module(mod.signature, tuple(directives))


def parse_term(text: str, sig: Signature | None = None) -> TermExpr:
    """Parse a single term, for tests and the command line."""
    p = _Parser(text)
    tm = p.term()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    if sig is not None:
        tm = _resolve(tm, frozenset(n for n, _ in sig.constants))
    return tm


# ---------------------------------------------------------------------------
# Printing


def format_type(ty: TypeExpr) -> str:
    if isinstance(ty, BaseType):
        return ty.name
    return f"Box {format_type(ty.inner)}" if isinstance(ty.inner, BaseType) \
        else f"Box ({format_type(ty.inner)})"


def format_term(tm: TermExpr) -> str:
    if isinstance(tm, Var) or isinstance(tm, Const):
        return tm.name
    if isinstance(tm, Shut):
        return f"box({format_term(tm.body)})"
    return (f"let box {tm.binder} := {format_term(tm.scrutinee)} "
            f"in {format_term(tm.body)}")


def format_telescope(tele: Telescope) -> str:
    modal = ", ".join(f"{n} :: {format_type(ty)}" for n, ty in tele.modal)
    ordinary = ", ".join(f"{n} : {format_type(ty)}" for n, ty in tele.ordinary)
    if ordinary:
        return f"{modal} | {ordinary}" if modal else f"| {ordinary}"
    return modal


def format_module(mod: Module) -> str:
    lines = []
    for b in mod.signature.base_types:
        lines.append(f"type {b};")
    for n, ty in mod.signature.constants:
        lines.append(f"const {n} : {format_type(ty)};")
    for d in mod.directives:
        tele = format_telescope(d.telescope)
        tele = tele + " " if tele else ""
        if isinstance(d, CheckDirective):
            lines.append(f"check {tele}|- {format_term(d.term)} : {format_type(d.type)};")
        else:
            lines.append(f"equal {tele}|- {format_term(d.left)} == "
                         f"{format_term(d.right)} : {format_type(d.type)};")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Free variables, canonical binders, substitution


def free_vars(tm: TermExpr) -> frozenset[str]:
    if isinstance(tm, Var):
        return frozenset({tm.name})
    if isinstance(tm, Const):
        return frozenset()
    if isinstance(tm, Shut):
        return free_vars(tm.body)
    return free_vars(tm.scrutinee) | (free_vars(tm.body) - {tm.binder})


def canonicalize(tm: TermExpr, depth: int = 0,
                 env: Mapping[str, str] | None = None) -> TermExpr:
    """Rename binders to position-determined names.

    Alpha-equivalence becomes data equality afterwards, which is what
    the equality search and the corpus oracles compare.
    """
    env = env or {}
    if isinstance(tm, Var):
        return Var(env.get(tm.name, tm.name))
    if isinstance(tm, Const):
        return tm
    if isinstance(tm, Shut):
        return Shut(canonicalize(tm.body, depth, env))
    fresh = f"_b{depth}"
    inner = dict(env)
    inner[tm.binder] = fresh
    return LetBox(fresh, canonicalize(tm.scrutinee, depth, env),
                  canonicalize(tm.body, depth + 1, inner))


def alpha_equal(t1: TermExpr, t2: TermExpr) -> bool:
    return canonicalize(t1) == canonicalize(t2)


def _fresh_name(base: str, avoid: frozenset[str]) -> str:
    if base not in avoid:
        return base
    k = 1
    while f"{base}{k}" in avoid:
        k += 1
    return f"{base}{k}"


def substitute(tm: TermExpr | TypeExpr, target: str, s: TermExpr,
               mode: str = "modal") -> TermExpr | TypeExpr:
    """Capture-avoiding substitution of ``s`` for the variable ``target``.

    Types contain no term variables, so they pass through unchanged;
    ``mode`` records whether a modal or an ordinary hypothesis is being
    discharged, which matters to callers validating preconditions but
    not to the traversal itself.
    """
    if mode not in ("modal", "ordinary"):
        raise ValueError(f"unknown substitution mode {mode!r}")
    if isinstance(tm, (BaseType, BoxType)):
        return tm
    if isinstance(tm, Var):
        return s if tm.name == target else tm
    if isinstance(tm, Const):
        return tm
    if isinstance(tm, Shut):
        return Shut(substitute(tm.body, target, s, mode))
    scrut = substitute(tm.scrutinee, target, s, mode)
    if tm.binder == target:
        return LetBox(tm.binder, scrut, tm.body)
    if tm.binder in free_vars(s) and target in free_vars(tm.body):
        fresh = _fresh_name(tm.binder, free_vars(s) | free_vars(tm.body) | {target})
        body = substitute(tm.body, tm.binder, Var(fresh), mode)
    else:
        fresh, body = tm.binder, tm.body
    return LetBox(fresh, scrut, substitute(body, target, s, mode))


# ---------------------------------------------------------------------------
# Judgments and derivations


@dataclass(frozen=True)
class Judgment:
    """One checkable statement: a context prefix, a type formation, or a
    typing of a term."""

    flavor: str
    telescope: Telescope
    term: TermExpr | None = None
    type: TypeExpr | None = None

    def show(self) -> str:
        tele = format_telescope(self.telescope)
        if self.flavor == "context":
            return f"{tele} |- ok" if tele else "|- ok"
        if self.flavor == "type":
            return f"{tele} |- {format_type(self.type)} type"
        return f"{tele} |- {format_term(self.term)} : {format_type(self.type)}"


@dataclass(frozen=True)
class Derivation:
    judgment: Judgment
    rule: str
    premises: tuple["Derivation", ...] = ()

    def all_rules(self) -> Iterator[str]:
        yield self.rule
        for p in self.premises:
            yield from p.all_rules()


# ---------------------------------------------------------------------------
# The checker


def _check_type(sig: Signature, tele: Telescope, ty: TypeExpr) -> Derivation:
    if isinstance(ty, BaseType):
        if not sig.has_base(ty.name):
            raise CheckError(f"undeclared base type {ty.name!r}", "base-form",
                             Judgment("type", tele, None, ty).show())
        return Derivation(Judgment("type", tele, None, ty), "base-form")
    inner = _check_type(sig, tele.without_ordinary(), ty.inner)
    return Derivation(Judgment("type", tele, None, ty), "box-form", (inner,))


def _check_telescope(sig: Signature, tele: Telescope) -> Derivation:
    names = tele.names()
    if len(set(names)) != len(names):
        modal_names = [n for n, _ in tele.modal]
        zone = "extend-modal" if len(set(modal_names)) != len(modal_names) \
            else "extend-ordinary"
        raise CheckError("duplicate names in the context", zone,
                         Judgment("context", tele).show())
    d = Derivation(Judgment("context", Telescope()), "empty-modal")
    prefix = Telescope()
    for n, ty in tele.modal:
        tyd = _check_type(sig, prefix.without_ordinary(), ty)
        prefix = prefix.extend_modal(n, ty)
        d = Derivation(Judgment("context", prefix), "extend-modal", (d, tyd))
    d = Derivation(Judgment("context", prefix), "empty-ordinary", (d,))
    for n, ty in tele.ordinary:
        tyd = _check_type(sig, prefix, ty)
        prefix = Telescope(prefix.modal, prefix.ordinary + ((n, ty),))
        d = Derivation(Judgment("context", prefix), "extend-ordinary", (d, tyd))
    return d


def _infer(sig: Signature, tele: Telescope, tm: TermExpr) -> tuple[TypeExpr, Derivation]:
    if isinstance(tm, Var):
        ty = tele.modal_lookup(tm.name)
        if ty is not None:
            return ty, Derivation(Judgment("term", tele, tm, ty), "modal-var")
        ty = tele.ordinary_lookup(tm.name)
        if ty is not None:
            return ty, Derivation(Judgment("term", tele, tm, ty), "ordinary-var")
        raise CheckError(f"unbound variable {tm.name!r}", "variable",
                         Judgment("term", tele, tm, BaseType("?")).show())
    if isinstance(tm, Const):
        ty = sig.constant_type(tm.name)
        if ty is None:
            raise CheckError(f"undeclared constant {tm.name!r}", "constant",
                             Judgment("term", tele, tm, BaseType("?")).show())
        return ty, Derivation(Judgment("term", tele, tm, ty), "constant")
    if isinstance(tm, Shut):
        inner_tele = tele.without_ordinary()
        ty, d = _infer(sig, inner_tele, tm.body)
        out = BoxType(ty)
        return out, Derivation(Judgment("term", tele, tm, out), "box-intro", (d,))
    ty_s, d_s = _infer(sig, tele, tm.scrutinee)
    if not isinstance(ty_s, BoxType):
        raise CheckError("scrutinee of let box is not of a boxed type", "box-elim",
                         Judgment("term", tele, tm.scrutinee, ty_s).show())
    if tm.binder in tele.names():
        raise CheckError(f"binder {tm.binder!r} shadows a context name", "box-elim",
                         Judgment("term", tele, tm, BaseType("?")).show())
    inner = tele.extend_modal(tm.binder, ty_s.inner)
    ty_b, d_b = _infer(sig, inner, tm.body)
    motive = _check_type(sig, tele, ty_b)
    return ty_b, Derivation(Judgment("term", tele, tm, ty_b), "box-elim",
                            (d_s, d_b, motive))


def check_term(sig: Signature, tele: Telescope, tm: TermExpr,
               ty: TypeExpr) -> Derivation:
    """Check a term against a type, returning the full derivation."""
    got, d = _infer(sig, tele, tm)
    if got != ty:
        raise CheckError(
            f"term has type {format_type(got)}, not {format_type(ty)}",
            "conversion", Judgment("term", tele, tm, ty).show())
    return d


def infer_type(sig: Signature, tele: Telescope, tm: TermExpr) -> TypeExpr:
    """The unique type of a term in a telescope."""
    ty, _ = _infer(sig, tele, tm)
    return ty


def check_module(mod: Module) -> list[Derivation]:
    """Check every directive, stopping at the first failure.

    Each check directive contributes its context-formation derivation
    followed by the typing derivation; equal directives contribute the
    derivations of both sides and must then pass the equality decision.
    """
    sig = mod.signature
    out = []
    for d in mod.directives:
        out.append(_check_telescope(sig, d.telescope))
        if isinstance(d, CheckDirective):
            out.append(check_term(sig, d.telescope, d.term, d.type))
        else:
            left = check_term(sig, d.telescope, d.left, d.type)
            right = check_term(sig, d.telescope, d.right, d.type)
            out.extend([left, right])
            if not defeq(sig, d.telescope, d.left, d.right, d.type):
                raise CheckError(
                    f"terms are not definitionally equal at line {d.line}",
                    "conversion",
                    Judgment("term", d.telescope, d.left, d.type).show())
    return out


# ---------------------------------------------------------------------------
# Independent derivation validation


def recheck(sig: Signature, d: Derivation) -> list[str]:
    """Replay a derivation rule by rule without calling the checker.

    Each node is validated as a single rule instance: the premises must
    have exactly the shapes the rule demands and the side conditions
    must hold on the spot.
    """
    errs = []

    def bad(msg: str):
        errs.append(f"{d.rule}: {msg}")

    j = d.judgment
    if d.rule == "empty-modal":
        if j.telescope != Telescope() or d.premises:
            bad("must conclude the empty context with no premises")
    elif d.rule == "extend-modal":
        if len(d.premises) != 2 or not j.telescope.modal:
            bad("needs a context premise and a type premise")
        else:
            prev, tyd = d.premises
            n, ty = j.telescope.modal[-1]
            if prev.judgment.telescope.modal != j.telescope.modal[:-1]:
                bad("context premise does not match the prefix")
            if tyd.judgment != Judgment("type", Telescope(j.telescope.modal[:-1]), None, ty):
                bad("type premise formed in the wrong telescope")
            if n in (m for m, _ in j.telescope.modal[:-1]):
                bad("modal name reused")
    elif d.rule == "empty-ordinary":
        if j.telescope.ordinary or len(d.premises) != 1:
            bad("must conclude a context with empty ordinary zone")
    elif d.rule == "extend-ordinary":
        if len(d.premises) != 2 or not j.telescope.ordinary:
            bad("needs a context premise and a type premise")
        else:
            prev, tyd = d.premises
            pre = Telescope(j.telescope.modal, j.telescope.ordinary[:-1])
            n, ty = j.telescope.ordinary[-1]
            if prev.judgment.telescope != pre:
                bad("context premise does not match the prefix")
            if tyd.judgment != Judgment("type", pre, None, ty):
                bad("type premise formed in the wrong telescope")
            if n in pre.names():
                bad("ordinary name reused")
    elif d.rule == "base-form":
        if not isinstance(j.type, BaseType) or not sig.has_base(j.type.name):
            bad("concludes an undeclared base type")
    elif d.rule == "box-form":
        if not isinstance(j.type, BoxType) or len(d.premises) != 1:
            bad("must conclude a boxed type from one premise")
        elif d.premises[0].judgment != Judgment(
                "type", j.telescope.without_ordinary(), None, j.type.inner):
            bad("premise is not the inner type over the modal zone")
    elif d.rule == "modal-var":
        if not isinstance(j.term, Var) or j.telescope.modal_lookup(j.term.name) != j.type:
            bad("variable is not a modal hypothesis of this type")
    elif d.rule == "ordinary-var":
        if not isinstance(j.term, Var) or \
                j.telescope.ordinary_lookup(j.term.name) != j.type:
            bad("variable is not an ordinary hypothesis of this type")
    elif d.rule == "constant":
        if not isinstance(j.term, Const) or sig.constant_type(j.term.name) != j.type:
            bad("constant does not carry its declared type")
    elif d.rule == "box-intro":
        if not isinstance(j.term, Shut) or not isinstance(j.type, BoxType) \
                or len(d.premises) != 1:
            bad("must conclude box(t) : Box B from one premise")
        elif d.premises[0].judgment != Judgment(
                "term", j.telescope.without_ordinary(), j.term.body, j.type.inner):
            bad("premise must type the body in the emptied ordinary zone")
    elif d.rule == "box-elim":
        if not isinstance(j.term, LetBox) or len(d.premises) != 3:
            bad("must conclude a let box from scrutinee, body, and motive")
        else:
            ds, db, dm = d.premises
            sj = ds.judgment
            if sj.telescope != j.telescope or sj.term != j.term.scrutinee or \
                    not isinstance(sj.type, BoxType):
                bad("scrutinee premise malformed")
            elif j.term.binder in j.telescope.names():
                bad("binder shadows the context")
            else:
                inner = j.telescope.extend_modal(j.term.binder, sj.type.inner)
                if db.judgment != Judgment("term", inner, j.term.body, j.type):
                    bad("body premise typed in the wrong extension")
                if dm.judgment != Judgment("type", j.telescope, None, j.type):
                    bad("motive premise malformed")
    else:
        bad("unknown rule")
    for p in d.premises:
        errs.extend(recheck(sig, p))
    return errs


# ---------------------------------------------------------------------------
# Reduction and definitional equality


def beta_step(tm: TermExpr) -> TermExpr | None:
    """One innermost reduction of a let box over a box, or None."""
    if isinstance(tm, (Var, Const)):
        return None
    if isinstance(tm, Shut):
        inner = beta_step(tm.body)
        return None if inner is None else Shut(inner)
    s = beta_step(tm.scrutinee)
    if s is not None:
        return LetBox(tm.binder, s, tm.body)
    b = beta_step(tm.body)
    if b is not None:
        return LetBox(tm.binder, tm.scrutinee, b)
    if isinstance(tm.scrutinee, Shut):
        return substitute(tm.body, tm.binder, tm.scrutinee.body)
    return None


def beta_normalize(tm: TermExpr) -> TermExpr:
    while True:
        nxt = beta_step(tm)
        if nxt is None:
            return tm
        tm = nxt


def redex_count(tm: TermExpr) -> int:
    if isinstance(tm, (Var, Const)):
        return 0
    if isinstance(tm, Shut):
        return redex_count(tm.body)
    own = 1 if isinstance(tm.scrutinee, Shut) else 0
    return own + redex_count(tm.scrutinee) + redex_count(tm.body)


def _replace(tm: TermExpr, old: TermExpr, new: TermExpr) -> TermExpr:
    if tm == old:
        return new
    if isinstance(tm, (Var, Const)):
        return tm
    if isinstance(tm, Shut):
        return Shut(_replace(tm.body, old, new))
    return LetBox(tm.binder, _replace(tm.scrutinee, old, new),
                  _replace(tm.body, old, new))


def _subterms(tm: TermExpr) -> Iterator[TermExpr]:
    yield tm
    if isinstance(tm, Shut):
        yield from _subterms(tm.body)
    elif isinstance(tm, LetBox):
        yield from _subterms(tm.scrutinee)
        yield from _subterms(tm.body)


def _foldable(body: TermExpr, u: str, inside_box: bool = False) -> bool:
    """Whether every occurrence of ``u`` in ``body`` is a boxed variable
    at a position an ordinary motive variable could occupy.

    Occurrences under a further box cannot be abstracted, because an
    ordinary variable is invisible there, and a bare occurrence is not
    of the shape the unfolding equation produces.
    """
    if body == Shut(Var(u)):
        return not inside_box
    if isinstance(body, Var):
        return body.name != u
    if isinstance(body, Const):
        return True
    if isinstance(body, Shut):
        return _foldable(body.body, u, True)
    if body.binder == u:
        return _foldable(body.scrutinee, u, inside_box)
    return _foldable(body.scrutinee, u, inside_box) and \
        _foldable(body.body, u, inside_box)


def _eta_moves(tm: TermExpr, avoid: frozenset[str]) -> Iterator[TermExpr]:
    """Single unfolding or refolding steps at any position.

    Refolding turns ``let box u := s in t[box(u)/x]`` into ``t[s/x]``
    when the body is of that shape; unfolding wraps a subterm in the
    identity eliminator.  Callers discard any move that breaks typing,
    so only genuine equality instances survive.  Terms are expected in
    canonical binder form, which rules out shadowing inside a body.
    """
    if isinstance(tm, LetBox):
        if _foldable(tm.body, tm.binder):
            yield _replace(tm.body, Shut(Var(tm.binder)), tm.scrutinee)
        for s2 in _eta_moves(tm.scrutinee, avoid):
            yield LetBox(tm.binder, s2, tm.body)
        for b2 in _eta_moves(tm.body, avoid | {tm.binder}):
            yield LetBox(tm.binder, tm.scrutinee, b2)
    elif isinstance(tm, Shut):
        for b2 in _eta_moves(tm.body, avoid):
            yield Shut(b2)
    for sub in _subterms(tm):
        fresh = _fresh_name("_u", avoid | free_vars(tm))
        wrapped = LetBox(fresh, sub, Shut(Var(fresh)))
        out = _replace(tm, sub, wrapped)
        if out != tm:
            yield out


def defeq(sig: Signature, tele: Telescope, t1: TermExpr, t2: TermExpr,
          ty: TypeExpr, fuel: int = 3, frontier_cap: int = 512) -> bool:
    """Decide definitional equality at a type.

    Reduces both sides to box-normal form, then searches outward from
    both with single unfolding or refolding steps, normalizing after
    each and keeping only well-typed results, until the explored sets
    meet or the fuel runs out.  Sound by construction; bounded, so
    completeness is only as good as the corpus that exercises it.
    """
    check_term(sig, tele, t1, ty)
    check_term(sig, tele, t2, ty)
    avoid = frozenset(tele.names())

    def canon(t: TermExpr) -> TermExpr:
        return canonicalize(beta_normalize(t))

    def welltyped(t: TermExpr) -> bool:
        try:
            check_term(sig, tele, t, ty)
            return True
        except CheckError:
            return False

    def grow(frontier: list[TermExpr], seen: set[TermExpr],
             other: set[TermExpr]) -> list[TermExpr] | None:
        nxt = []
        for t in frontier:
            for m in _eta_moves(t, avoid):
                c = canon(m)
                if c in seen or len(seen) >= frontier_cap or not welltyped(c):
                    continue
                if c in other:
                    return None
                seen.add(c)
                nxt.append(c)
        return nxt

    left, right = canon(t1), canon(t2)
    if left == right:
        return True
    seen_l, seen_r = {left}, {right}
    frontier_l, frontier_r = [left], [right]
    for _ in range(fuel):
        frontier_l = grow(frontier_l, seen_l, seen_r)
        if frontier_l is None:
            return True
        frontier_r = grow(frontier_r, seen_r, seen_l)
        if frontier_r is None:
            return True
        if not frontier_l and not frontier_r:
            break
    return False
