"""Concrete syntax: lexer, type-inferring parser, and printer for object terms.

The printer and parser round-trip: print(parse(s)) reparses to an
alpha-equal term. Grammar reference lives in docs/TERMS.md.
"""

import re

from .errors import ParseError, UnknownIdent
from . import terms as T
from .terms import (INT, NAT, BOOL, UNIT, Base, Arrow, Prod, ListOf, OptionOf,
                    App, Abs, LetIn, Var, Lit, IdentRef, fresh_binder, ident,
                    clip_ident, app_spine)

# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>--[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+n?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|:=|=>|::|==|!=|<=|>=|<<|>>|\|\||&&|\+\+|[()\[\]{},;:.'λ\\+\-*/%^<>!=_])
""", re.VERBOSE)

KEYWORDS = {"let", "in", "if", "then", "forall", "rule", "options", "extra",
            "idents", "again", "const", "true", "false", "tt",
            "list", "option", "Z", "N", "B", "unit"}


class Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Tok({self.kind},{self.text!r})"


def tokenize(text):
    out = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            col = 1
        elif kind not in ("ws", "comment"):
            if kind == "name" and tok in KEYWORDS:
                kind = "kw"
            out.append(Tok(kind, tok, line, col))
            col += len(tok)
        else:
            col += len(tok)
        pos = m.end()
    out.append(Tok("eof", "", line, col))
    return out


# ---------------------------------------------------------------------------
# Inference variables

_uvar_counter = 0


class UVar:
    """Unification variable; kind is 'obj', 'base', or 'num' (scalar base)."""

    __slots__ = ("id", "kind", "inst")

    def __init__(self, kind):
        global _uvar_counter
        _uvar_counter += 1
        self.id = _uvar_counter
        self.kind = kind
        self.inst = None

    def __repr__(self):
        return f"?{self.kind}{self.id}"


def resolve(t):
    while isinstance(t, UVar) and t.inst is not None:
        t = t.inst
    return t


def _occurs(uv, t):
    t = resolve(t)
    if t is uv:
        return True
    if isinstance(t, Arrow):
        return _occurs(uv, t.src) or _occurs(uv, t.dst)
    if isinstance(t, Base):
        return _occurs(uv, t.base)
    if isinstance(t, Prod):
        return _occurs(uv, t.left) or _occurs(uv, t.right)
    if isinstance(t, (ListOf, OptionOf)):
        return _occurs(uv, t.elem)
    return False


def unify(t1, t2, where):
    t1, t2 = resolve(t1), resolve(t2)
    if t1 is t2:
        return
    if isinstance(t1, UVar):
        _bind(t1, t2, where)
        return
    if isinstance(t2, UVar):
        _bind(t2, t1, where)
        return
    if isinstance(t1, Base) and isinstance(t2, Base):
        unify(t1.base, t2.base, where)
        return
    # a bare base type may meet a wrapped one when idents mix kinds
    if isinstance(t1, Base) and isinstance(t2, T.BaseType):
        unify(t1.base, t2, where)
        return
    if isinstance(t2, Base) and isinstance(t1, T.BaseType):
        unify(t2.base, t1, where)
        return
    if isinstance(t1, Arrow) and isinstance(t2, Arrow):
        unify(t1.src, t2.src, where)
        unify(t1.dst, t2.dst, where)
        return
    if isinstance(t1, T.Prim) and isinstance(t2, T.Prim) and t1 == t2:
        return
    if isinstance(t1, Prod) and isinstance(t2, Prod):
        unify(t1.left, t2.left, where)
        unify(t1.right, t2.right, where)
        return
    if isinstance(t1, ListOf) and isinstance(t2, ListOf):
        unify(t1.elem, t2.elem, where)
        return
    if isinstance(t1, OptionOf) and isinstance(t2, OptionOf):
        unify(t1.elem, t2.elem, where)
        return
    raise ParseError(f"type mismatch: {_ustr(t1)} vs {_ustr(t2)} in {where}")


def _bind(uv, t, where):
    t = resolve(t)
    if uv.kind in ("base", "num") and isinstance(t, Base):
        t = resolve(t.base)
    if t is uv:
        return
    if _occurs(uv, t):
        raise ParseError(f"infinite type in {where}")
    if uv.kind in ("base", "num") and isinstance(t, Arrow):
        raise ParseError(f"function type where data was expected in {where}")
    if uv.kind == "num" and not isinstance(t, UVar):
        if t not in (INT, NAT):
            raise ParseError(f"expected a numeric type, got {_ustr(t)} in {where}")
        uv.inst = t
        return
    if isinstance(t, UVar) and t.kind == "num" and uv.kind != "obj":
        uv.inst = t
        return
    if isinstance(t, UVar) and uv.kind == "num":
        t.inst = uv  # keep the numeric constraint live
        return
    uv.inst = t


def _ustr(t):
    t = resolve(t)
    if isinstance(t, UVar):
        return repr(t)
    try:
        return T.type_str(t)
    except Exception:
        return repr(t)


def zonk(t, where="term"):
    """Deep-resolve to a well-formed ObjType; unconstrained numerals default to Z."""
    t = resolve(t)
    if isinstance(t, Arrow):
        return Arrow(zonk(t.src, where), zonk(t.dst, where))
    return Base(zonk_base(t, where))


def zonk_base(t, where="term"):
    """Deep-resolve to a BaseType."""
    t = resolve(t)
    if isinstance(t, UVar):
        if t.kind == "num":
            t.inst = INT
            return INT
        raise ParseError(f"ambiguous type in {where}; add an annotation")
    if isinstance(t, Base):
        return zonk_base(t.base, where)
    if isinstance(t, Arrow):
        raise ParseError(f"function type where data was expected in {where}")
    if isinstance(t, Prod):
        return Prod(zonk_base(t.left, where), zonk_base(t.right, where))
    if isinstance(t, ListOf):
        return ListOf(zonk_base(t.elem, where))
    if isinstance(t, OptionOf):
        return OptionOf(zonk_base(t.elem, where))
    if isinstance(t, T.Prim):
        return t
    raise ParseError(f"cannot resolve type in {where}")


# ---------------------------------------------------------------------------
# Surface-name tables

# family -> parameter kinds ('b' base, 'o' obj, 's' numeric scalar)
PARAM_KINDS = {
    "nil": "b", "cons": "b", "some": "b", "none": "b", "repeat": "b",
    "append": "b", "rev": "b", "length": "b", "nth_default": "b",
    "pair": "bb", "fst": "bb", "snd": "bb", "combine": "bb", "map": "bb",
    "fold_left": "bb", "fold_right": "bb",
    "nat_rect": "o", "bool_rect": "o",
    "list_rect": "bo", "list_case": "bo", "option_rect": "bo",
    "prod_rect": "bbo",
    "add": "s", "sub": "s", "mul": "s", "div": "s", "mod": "s", "pow": "s",
    "min": "s", "max": "s", "land": "s", "lor": "s", "shiftr": "s",
    "shiftl": "s", "log2": "s", "succ": "s", "pred": "s", "eqb": "s",
    "ltb": "s", "leb": "s", "gtb": "s", "geb": "s", "seq": "s",
    "or": "", "and": "", "not": "", "to_int": "", "add_with_carry64": "",
}

NAMED_FAMILIES = set(PARAM_KINDS)

INFIX = {
    "::": ("cons", 1, "right"),
    "++": ("append", 1, "left"),
    "||": ("or", 2, "left"),
    "&&": ("and", 3, "left"),
    "==": ("eqb", 4, "left"),
    "<": ("ltb", 4, "left"),
    "<=": ("leb", 4, "left"),
    ">": ("gtb", 4, "left"),
    ">=": ("geb", 4, "left"),
    "<<": ("shiftl", 5, "left"),
    ">>": ("shiftr", 5, "left"),
    "+": ("add", 6, "left"),
    "-": ("sub", 6, "left"),
    "*": ("mul", 7, "left"),
    "/": ("div", 7, "left"),
    "%": ("mod", 7, "left"),
    "^": ("pow", 8, "right"),
}

MAX_PREC = 9  # application


def _family_uvars(family):
    params = []
    for k in PARAM_KINDS[family]:
        params.append(UVar({"b": "base", "o": "obj", "s": "num"}[k]))
    return params


def _family_sig(family, params):
    sig_of = T._FAMILIES[family][2]
    return sig_of(*params)


# ---------------------------------------------------------------------------
# Parser

class Parser:
    """Recursive-descent parser producing proto terms, elaborated after unification.

    mode: 'term' for plain terms; 'pattern'/'template' additionally resolve
    rule variables (var_env) and, for clip subscripts, constant variables.
    """

    def __init__(self, toks, registry=None, var_env=None, mode="term", constvars=None):
        self.toks = toks
        self.i = 0
        self.registry = registry
        self.var_env = dict(var_env) if var_env else {}
        self.mode = mode
        self.constvars = constvars or {}
        self.binder_types = {}   # BinderId -> inference type

    # -- token plumbing

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def at(self, text):
        return self.peek().text == text

    def fail(self, msg):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    # -- types

    def parse_type(self):
        t = self.parse_type_prod()
        if self.at("->"):
            self.next()
            return Arrow(_as_obj(t), _as_obj(self.parse_type()))
        return t

    def parse_type_prod(self):
        t = self.parse_type_app()
        while self.at("*"):
            self.next()
            r = self.parse_type_app()
            t = Prod(_as_base(t, self), _as_base(r, self))
        return t

    def parse_type_app(self):
        tok = self.peek()
        if tok.text == "list":
            self.next()
            return ListOf(_as_base(self.parse_type_atom(), self))
        if tok.text == "option":
            self.next()
            return OptionOf(_as_base(self.parse_type_atom(), self))
        return self.parse_type_atom()

    def parse_type_atom(self):
        tok = self.next()
        if tok.text == "Z":
            return INT
        if tok.text == "N":
            return NAT
        if tok.text == "B":
            return BOOL
        if tok.text == "unit":
            return UNIT
        if tok.text == "(":
            t = self.parse_type()
            self.expect(")")
            return t
        raise ParseError(f"expected a type, found {tok.text!r}", tok.line, tok.col)

    # -- terms (proto nodes are tuples; see _build)

    def parse_term(self):
        tok = self.peek()
        if tok.text in ("λ", "\\"):
            return self.parse_lambda()
        if tok.text == "let":
            return self.parse_let()
        return self.parse_binop(1)

    def parse_lambda(self):
        self.next()
        binders = []
        while True:
            tok = self.peek()
            if tok.text == "(":
                self.next()
                names = []
                while self.peek().kind == "name" or self.at("_"):
                    names.append(self.next().text)
                if not names:
                    self.fail("expected binder name")
                self.expect(":")
                ty = _as_obj(self.parse_type())
                self.expect(")")
                binders.extend((nm, ty) for nm in names)
            elif tok.kind == "name" or tok.text == "_":
                self.next()
                binders.append((tok.text, UVar("obj")))
            else:
                break
        if not binders:
            self.fail("lambda needs at least one binder")
        self.expect(".")
        saved = {}
        bids = []
        for nm, ty in binders:
            b = fresh_binder(None if nm == "_" else nm)
            self.binder_types[b] = ty
            bids.append((b, ty))
            if nm != "_":
                saved[nm] = self.var_env.get(nm)
                self.var_env[nm] = b
        body = self.parse_term()
        for nm, _ in reversed(binders):
            if nm != "_":
                old = saved[nm]
                if old is None:
                    self.var_env.pop(nm, None)
                else:
                    self.var_env[nm] = old
        out = body
        for b, ty in reversed(bids):
            out = ("abs", b, ty, out)
        return out

    def parse_let(self):
        self.expect("let")
        nm = self.next()
        if nm.kind != "name":
            raise ParseError("expected let binder name", nm.line, nm.col)
        ty = None
        if self.at(":"):
            self.next()
            ty = _as_obj(self.parse_type())
        self.expect(":=")
        bound = self.parse_term()
        self.expect("in")
        b = fresh_binder(nm.text)
        self.binder_types[b] = ty if ty is not None else UVar("obj")
        saved = self.var_env.get(nm.text)
        self.var_env[nm.text] = b
        body = self.parse_term()
        if saved is None:
            self.var_env.pop(nm.text, None)
        else:
            self.var_env[nm.text] = saved
        return ("let", b, bound, body)

    def parse_binop(self, prec):
        if prec > 8:
            return self.parse_app()
        lhs = self.parse_binop(prec + 1)
        while True:
            tok = self.peek()
            info = INFIX.get(tok.text)
            if info is None or info[1] != prec:
                return lhs
            family, _, assoc = info
            self.next()
            if assoc == "right":
                rhs = self.parse_binop(prec)
                return self._op(family, lhs, rhs)
            rhs = self.parse_binop(prec + 1)
            lhs = self._op(family, lhs, rhs)

    def _op(self, family, lhs, rhs):
        return ("app", ("app", self._ident_proto(family), lhs), rhs)

    def _ident_proto(self, family):
        params = _family_uvars(family)
        return ("ident", family, params, _family_sig(family, params))

    def parse_app(self):
        head = self.parse_atom()
        if head is None:
            self.fail("expected a term")
        while True:
            tok = self.peek()
            if tok.text in ("(", "[") or tok.kind in ("num", "name") \
                    or tok.text in ("true", "false", "tt", "'", "!"):
                if tok.kind == "kw" and tok.text not in ("true", "false", "tt"):
                    return head
                arg = self.parse_atom()
                head = ("app", head, arg)
            else:
                return head
    def parse_atom(self):
        tok = self.peek()
        if tok.text == "!":
            self.next()
            arg = self.parse_atom()
            return ("app", self._ident_proto("not"), arg)
        if tok.text == "-" :
            nxt = self.peek(1)
            if nxt.kind == "num":
                self.next()
                return self._number(self.next(), negate=True)
            self.fail("unary minus applies to numeric literals only")
        if tok.kind == "num":
            self.next()
            return self._number(tok)
        if tok.text == "true":
            self.next()
            return ("lit", BOOL, True)
        if tok.text == "false":
            self.next()
            return ("lit", BOOL, False)
        if tok.text == "tt":
            self.next()
            return ("lit", UNIT, ())
        if tok.text == "'":
            if self.mode == "term":
                self.fail("constant-variable marker only allowed in rules")
            self.next()
            nm = self.next()
            return self._name(nm)
        if tok.text == "[":
            self.next()
            elems = []
            if not self.at("]"):
                elems.append(self.parse_term())
                while self.at(";"):
                    self.next()
                    elems.append(self.parse_term())
            self.expect("]")
            elem_ty = UVar("base")
            out = ("ident", "nil", [elem_ty], _family_sig("nil", [elem_ty]))
            for e in reversed(elems):
                cons = ("ident", "cons", [elem_ty], _family_sig("cons", [elem_ty]))
                out = ("app", ("app", cons, e), out)
            return out
        if tok.text == "(":
            self.next()
            e = self.parse_term()
            if self.at(","):
                while self.at(","):
                    self.next()
                    r = self.parse_term()
                    e = self._op("pair", e, r)
                self.expect(")")
                return e
            if self.at(":"):
                self.next()
                ty = _as_obj(self.parse_type())
                self.expect(")")
                return ("ann", e, ty)
            self.expect(")")
            return e
        if tok.kind == "name":
            self.next()
            if tok.text == "clip_" and self.at("{"):
                return self.parse_clip()
            return self._name(tok)
        return None

    def _number(self, tok, negate=False):
        text = tok.text
        if text.endswith("n"):
            if negate:
                raise ParseError("negative N literal", tok.line, tok.col)
            return ("lit", NAT, int(text[:-1]))
        v = int(text)
        return ("numlit", -v if negate else v, UVar("num"))

    def _name(self, tok):
        nm = tok.text
        b = self.var_env.get(nm)
        if b is not None:
            return ("var", b)
        if nm == "eagerly":
            if self.mode != "template":
                raise ParseError("eagerly marker only allowed in rule replacements",
                                 tok.line, tok.col)
            head = self.parse_atom()
            if head is None or head[0] != "ident":
                raise ParseError("eagerly must mark an eliminator identifier",
                                 tok.line, tok.col)
            return ("ident", head[1], head[2], head[3], "eager")
        if nm in NAMED_FAMILIES:
            return self._ident_proto(nm)
        if self.registry is not None:
            for ex in self.registry.extra.values():
                if ex.family == nm:
                    return ("extra", ex)
        raise UnknownIdent(f"unknown identifier {nm!r} at {tok.line}:{tok.col}")

    def parse_clip(self):
        self.expect("{")
        lo = self.parse_clip_bound()
        self.expect(",")
        hi = self.parse_clip_bound()
        self.expect("}")
        return ("clip", lo, hi)

    def parse_clip_bound(self):
        # integer expression over literals and 2^k, or a 'constvar in rules
        if self.at("'"):
            if self.mode == "term":
                self.fail("constant-variable clip bound only allowed in rules")
            self.next()
            nm = self.next()
            return ("cvar", nm.text)
        return ("int", self.parse_int_expr())

    def parse_int_expr(self):
        v = self.parse_int_atom()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            r = self.parse_int_atom()
            v = v + r if op == "+" else v - r
        return v

    def parse_int_atom(self):
        neg = False
        if self.at("-"):
            self.next()
            neg = True
        tok = self.next()
        if tok.kind != "num":
            raise ParseError("expected an integer", tok.line, tok.col)
        v = int(tok.text.rstrip("n"))
        if self.at("^"):
            self.next()
            e = self.next()
            if e.kind != "num":
                raise ParseError("expected an exponent", e.line, e.col)
            v = v ** int(e.text.rstrip("n"))
        return -v if neg else v


def _as_obj(t):
    if isinstance(t, (UVar, Arrow, Base)):
        return t
    return Base(t)


def _as_base(t, p=None):
    t = resolve(t)
    if isinstance(t, Base):
        return t.base
    if isinstance(t, Arrow):
        raise ParseError("function types cannot appear inside data types")
    return t  # BaseType or UVar


# ---------------------------------------------------------------------------
# Elaboration: infer types over proto terms, then build core syntax


def _infer(node, env, p):
    """Return the inference type of a proto node; env maps BinderId -> type."""
    kind = node[0]
    if kind == "var":
        return env[node[1]]
    if kind == "lit":
        return Base(node[1])
    if kind == "numlit":
        return node[2]
    if kind == "ident":
        return node[3]
    if kind == "extra":
        return node[1].signature
    if kind == "clip":
        return Arrow(Base(INT), Base(INT))
    if kind == "ann":
        t = _infer(node[1], env, p)
        unify(t, node[2], "annotation")
        return node[2]
    if kind == "app":
        ft = resolve(_infer(node[1], env, p))
        at = _infer(node[2], env, p)
        if isinstance(ft, UVar):
            res = UVar("obj")
            unify(ft, Arrow(_as_obj(at), res), "application")
            return res
        if not isinstance(ft, Arrow):
            raise ParseError(f"applied non-function of type {_ustr(ft)}")
        unify(ft.src, _as_obj(at), "application argument")
        return ft.dst
    if kind == "abs":
        _, b, ty, body = node
        env[b] = ty
        bt = _infer(body, env, p)
        return Arrow(ty, _as_obj(bt))
    if kind == "let":
        _, b, bound, body = node
        bt = _infer(bound, env, p)
        declared = p.binder_types[b]
        unify(declared, _as_obj(bt), "let binding")
        env[b] = declared
        return _infer(body, env, p)
    raise ParseError(f"bad proto node {kind}")


def _build(node, p, clip_hook=None):
    kind = node[0]
    if kind == "var":
        return Var(node[1])
    if kind == "lit":
        return Lit(node[1], node[2])
    if kind == "numlit":
        return Lit(zonk_base(node[2], "numeric literal"), node[1])
    if kind == "ident":
        family, params = node[1], node[2]
        zparams = []
        for k, uv in zip(PARAM_KINDS[family], params):
            if k == "o":
                zparams.append(zonk(uv, f"{family} instance"))
            else:
                zparams.append(zonk_base(uv, f"{family} instance"))
        ref = IdentRef(ident(family, *zparams))
        if len(node) > 4 and node[4] == "eager":
            ref.eager = True
        return ref
    if kind == "extra":
        return IdentRef(node[1])
    if kind == "clip":
        lo, hi = node[1], node[2]
        if lo[0] == "cvar" or hi[0] == "cvar":
            # resolved by the rules layer into a clip pattern/template
            return ("clipvar", lo, hi)
        if not lo[1] < hi[1]:
            raise ParseError(f"empty clip interval [{lo[1]}, {hi[1]})")
        return IdentRef(clip_ident(lo[1], hi[1]))
    if kind == "ann":
        return _build(node[1], p, clip_hook)
    if kind == "app":
        f = _build(node[1], p, clip_hook)
        a = _build(node[2], p, clip_hook)
        if isinstance(a, tuple):
            raise ParseError("clip pattern syntax must be applied to one argument")
        if isinstance(f, tuple) and f[0] == "clipvar":
            if clip_hook is None:
                raise ParseError("clip pattern syntax only allowed in rules")
            return clip_hook(f[1], f[2], a)
        return App(f, a)
    if kind == "abs":
        _, b, ty, body = node
        b.ty = zonk(ty, f"binder {b.hint or '_'}")
        return Abs(b, b.ty, _build(body, p, clip_hook))
    if kind == "let":
        _, b, bound, body = node
        b.ty = zonk(p.binder_types[b], f"binder {b.hint}")
        return LetIn(b, _build(bound, p, clip_hook), _build(body, p, clip_hook))
    raise ParseError(f"bad proto node {kind}")


def parse_term(text, registry=None, var_env=None, expect=None, mode="term"):
    """Parse and typecheck a term; free variables come from var_env."""
    p = Parser(tokenize(text), registry=registry, var_env=var_env, mode=mode)
    proto = p.parse_term()
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return elaborate(proto, p, registry=registry, expect=expect, mode=mode)


def elaborate(proto, p, registry=None, expect=None, mode="term", clip_hook=None):
    env = {}
    for b, ty in p.binder_types.items():
        env.setdefault(b, ty)
    for b in p.var_env.values():
        if b.ty is not None:
            env.setdefault(b, b.ty)
    t = _infer(proto, env, p)
    if expect is not None:
        unify(t, expect, "expected type")
    e = _build(proto, p, clip_hook)
    if isinstance(e, tuple):
        raise ParseError("clip pattern syntax only allowed in rules")
    if mode == "term":
        T.typecheck(e, registry)
    return e


def parse_type(text):
    p = Parser(tokenize(text))
    t = p.parse_type()
    if p.peek().kind != "eof":
        p.fail("trailing input after type")
    return _as_obj(t) if not isinstance(t, (Arrow, Base)) else t


# ---------------------------------------------------------------------------
# Printer

_OP_OF_FAMILY = {fam: (op, prec, assoc) for op, (fam, prec, assoc) in INFIX.items()}

RESERVED_NAMES = set(PARAM_KINDS) | KEYWORDS | {"eagerly", "clip_"}


def _assign_names(e):
    names = {}
    used = set(RESERVED_NAMES)
    counter = [0]

    def claim(b):
        if b in names:
            return
        hint = b.hint
        if hint and hint not in used:
            names[b] = hint
            used.add(hint)
            return
        while True:
            nm = f"v{counter[0]}"
            counter[0] += 1
            if nm not in used:
                names[b] = nm
                used.add(nm)
                return

    stack = [e]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            claim(cur.binder)
        elif isinstance(cur, Abs):
            claim(cur.binder)
            stack.append(cur.body)
        elif isinstance(cur, LetIn):
            claim(cur.binder)
            stack.append(cur.body)
            stack.append(cur.bound)
        elif isinstance(cur, App):
            stack.append(cur.arg)
            stack.append(cur.fn)
    return names


def print_term(e):
    names = _assign_names(e)

    def pp(e, prec):
        if isinstance(e, Var):
            return names[e.binder]
        if isinstance(e, Lit):
            if e.base == BOOL:
                return "true" if e.value else "false"
            if e.base == UNIT:
                return "tt"
            if e.base == NAT:
                return f"{e.value}n"
            return str(e.value) if e.value >= 0 else f"(-{-e.value})"
        if isinstance(e, IdentRef):
            s = _pp_ident(e.ident)
            if e.eager:
                s = f"eagerly {s}"
                return f"({s})" if prec >= MAX_PREC else s
            return s
        if isinstance(e, Abs):
            binders = []
            while isinstance(e, Abs):
                binders.append(f"({names[e.binder]} : {T.type_str(e.binder_type)})")
                e = e.body
            s = f"λ {' '.join(binders)} . {pp(e, 0)}"
            return f"({s})" if prec > 0 else s
        if isinstance(e, LetIn):
            parts = []
            while isinstance(e, LetIn):
                parts.append(f"let {names[e.binder]} := {pp(e.bound, 1)} in")
                e = e.body
            s = " ".join(parts) + " " + pp(e, 0)
            return f"({s})" if prec > 0 else s
        if isinstance(e, App):
            return _pp_spine(e, prec)
        raise TypeError(f"cannot print {e!r}")

    def _pp_ident(ident_):
        if ident_.family in _OP_OF_FAMILY:
            return ident_.family  # named alias for the operator
        if ident_.family == "clip":
            return ident_.display
        if ident_.kind == "uninterpreted":
            return ident_.family
        if ident_.family == "nil":
            # annotate so the element type survives a reparse
            return f"([] : {T.type_str(ident_.signature)})"
        return ident_.family

    def _pp_spine(e, prec):
        head, args = app_spine(e)
        if isinstance(head, IdentRef):
            fam = head.ident.family
            if fam == "cons" and len(args) == 2:
                items = []
                cur = e
                while True:
                    h, a = app_spine(cur)
                    if isinstance(h, IdentRef) and h.ident.family == "cons" and len(a) == 2:
                        items.append(a[0])
                        cur = a[1]
                    else:
                        break
                if isinstance(cur, IdentRef) and cur.ident.family == "nil":
                    return "[" + "; ".join(pp(x, 0) for x in items) + "]"
                s = " :: ".join([pp(x, 2) for x in items] + [pp(cur, 2)])
                return f"({s})" if prec > 1 else s
            if fam == "pair" and len(args) == 2:
                flat = [args[1]]
                cur = args[0]
                while True:
                    h, a = app_spine(cur)
                    if isinstance(h, IdentRef) and h.ident.family == "pair" and len(a) == 2:
                        flat.append(a[1])
                        cur = a[0]
                    else:
                        break
                flat.append(cur)
                flat.reverse()
                return "(" + ", ".join(pp(x, 0) for x in flat) + ")"
            op = _OP_OF_FAMILY.get(fam)
            if op is not None and len(args) == 2:
                sym, lvl, assoc = op
                lp = lvl if assoc == "left" else lvl + 1
                rp = lvl + 1 if assoc == "left" else lvl
                s = f"{pp(args[0], lp)} {sym} {pp(args[1], rp)}"
                return f"({s})" if prec > lvl else s
            if fam == "clip" and len(args) == 1:
                return f"{head.ident.display}({pp(args[0], 0)})"
        s = " ".join([pp(head, MAX_PREC)] + [pp(a, MAX_PREC) for a in args])
        return f"({s})" if prec >= MAX_PREC else s

    return pp(e, 0)
