"""Rewrite-rule DSL: parsing, validation, identifier scraping, and the prelude.

File format (line comments with --):

    options: delta
    extra idents: seq, e : Z
    rule NAME: forall (n : Z) (const m : Z), if COND then LHS => RHS [again]

`const` (or a leading apostrophe) marks a variable that only matches literal
constants; only such variables may appear in side conditions. See
docs/RULES.md for the full grammar.
"""

from dataclasses import dataclass, field

from .errors import (NonConstVarInCondition, NonlinearPattern, ParseError,
                     UnknownIdent)
from . import terms as T
from . import syntax as S
from .terms import (Base, Expr, Var, App, Abs, LetIn, IdentRef, Lit,
                    fresh_binder, app_spine, lit_key)

EAGER_FAMILIES = {"nat_rect", "list_rect", "list_case", "prod_rect",
                  "bool_rect", "option_rect", "nth_default"}

# ceiling on unary-recursion unrolling; beyond it the combinator stays residual
NAT_UNROLL_CAP = 200_000

# scrutinee argument positions that must be concrete for eager unrolling
SCRUTINEE_POS = {"nat_rect": (2,), "list_rect": (2,), "list_case": (2,),
                 "prod_rect": (1,), "bool_rect": (2,), "option_rect": (2,),
                 "nth_default": (1, 2)}

# argument count of the combinator itself (excluding eta-expansion of the motive)
STRUCT_ARITY = {"nat_rect": 3, "list_rect": 3, "list_case": 3, "prod_rect": 2,
                "bool_rect": 3, "option_rect": 3, "nth_default": 3}


# ---------------------------------------------------------------------------
# Patterns


class Pattern:
    __slots__ = ()


@dataclass(frozen=True)
class PatternVar:
    name: str
    declared_type: object
    const: bool = False


class Wildcard(Pattern):
    __slots__ = ("var",)

    def __init__(self, var):
        self.var = var

    def __repr__(self):
        return f"?{self.var.name}"


class ConstVar(Pattern):
    __slots__ = ("var",)

    def __init__(self, var):
        self.var = var

    def __repr__(self):
        return f"'{self.var.name}"


class PIdent(Pattern):
    __slots__ = ("key", "ident", "lit")

    def __init__(self, key, ident=None, lit=None):
        self.key = key        # dispatch key (ident key or literal key)
        self.ident = ident    # Ident when this is a real identifier
        self.lit = lit        # (base, value) when this is a literal head

    def __repr__(self):
        return f"I({self.key})"


class PApp(Pattern):
    __slots__ = ("fn", "arg")

    def __init__(self, fn, arg):
        self.fn = fn
        self.arg = arg

    def __repr__(self):
        return f"({self.fn!r} {self.arg!r})"


class ClipPat(Pattern):
    """Pattern head matching any clip identifier, binding its bounds."""

    __slots__ = ("lo_var", "hi_var")

    def __init__(self, lo_var, hi_var):
        self.lo_var = lo_var  # PatternVar or None (when the bound is fixed)
        self.hi_var = hi_var

    def __repr__(self):
        return "clip{...}"


CLIP_FAMILY_KEY = "clip"


class ClipVarApp(Expr):
    """Template node: clip with bounds taken from constant variables."""

    __slots__ = ("lo_spec", "hi_spec", "arg")

    def __init__(self, lo_spec, hi_spec, arg):
        self.lo_spec = lo_spec  # ("int", v) | ("cvar", BinderId)
        self.hi_spec = hi_spec
        self.arg = arg
        self.ty = Base(T.INT)

    def __repr__(self):
        return f"ClipVarApp({self.lo_spec},{self.hi_spec})"


def literal_ident(base_, value):
    """Distinguished per-value identifier standing for a literal in patterns."""
    key = lit_key(base_, value)
    cached = T._IDENT_CACHE.get(key)
    if cached is None:
        cached = T.Ident(key, key, repr(value), Base(base_), "literal", value, None, (base_, value))
        T._IDENT_CACHE[key] = cached
    return cached


def pattern_head_key(pat):
    """Dispatch key of the leftmost head of a pattern spine, or None."""
    while isinstance(pat, PApp):
        pat = pat.fn
    if isinstance(pat, PIdent):
        return pat.key
    if isinstance(pat, ClipPat):
        return CLIP_FAMILY_KEY
    return None


def pattern_vars_of(pat):
    out = []
    stack = [pat]
    while stack:
        p = stack.pop()
        if isinstance(p, (Wildcard, ConstVar)):
            out.append(p.var)
        elif isinstance(p, PApp):
            stack.append(p.arg)
            stack.append(p.fn)
        elif isinstance(p, ClipPat):
            if p.hi_var is not None:
                out.append(p.hi_var)
            if p.lo_var is not None:
                out.append(p.lo_var)
    return out


# ---------------------------------------------------------------------------
# Rules


@dataclass
class RewriteRule:
    name: str
    lhs: Pattern
    lhs_expr: Expr                 # lhs as a term over pattern variables
    rhs: Expr                      # template over pattern variables
    cond: Expr | None
    again: bool
    index: int
    pvars: dict                    # name -> (BinderId, PatternVar)
    lhs_type: object = None
    delegation: tuple | None = None  # scrutinee positions for eager delegation

    def binder_of(self, name):
        return self.pvars[name][0]


@dataclass
class RuleSet:
    rules: list
    registry: T.IdentRegistry
    extra_idents: set
    delta: bool
    source: str = ""

    def rule_named(self, name):
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Parsing


def parse_rules(text):
    toks = S.tokenize(text)
    i = 0
    delta = False
    extra = {}
    registry = T.IdentRegistry()
    rules = []

    def peek(k=0):
        return toks[min(i + k, len(toks) - 1)]

    def bump():
        nonlocal i
        t = toks[i]
        i += 1
        return t

    def expect(s):
        t = bump()
        if t.text != s:
            raise ParseError(f"expected {s!r}, found {t.text!r}", t.line, t.col)

    while peek().kind != "eof":
        tok = peek()
        if tok.text == "options":
            bump()
            expect(":")
            while peek().kind == "name" or peek().kind == "kw":
                opt = bump().text
                if opt == "delta":
                    delta = True
                else:
                    raise ParseError(f"unknown option {opt!r}", tok.line, tok.col)
                if peek().text == ",":
                    bump()
                else:
                    break
        elif tok.text == "extra":
            bump()
            expect("idents")
            expect(":")
            while True:
                nm = bump()
                if nm.kind not in ("name", "kw"):
                    raise ParseError("expected identifier name", nm.line, nm.col)
                if peek().text == ":":
                    bump()
                    p = S.Parser(toks)
                    p.i = i
                    ty = p.parse_type()
                    i = p.i
                    ident_ = T.uninterpreted(nm.text, S.zonk(S._as_obj(ty), nm.text))
                    registry.add_extra(ident_)
                    extra[ident_.key] = ident_
                elif T.is_known_family(nm.text):
                    registry.allow_family(nm.text)
                    extra[nm.text] = nm.text
                else:
                    raise UnknownIdent(
                        f"extra ident {nm.text!r} is not a known family; declare a type for it")
                if peek().text == ",":
                    bump()
                else:
                    break
        elif tok.text == "rule":
            rule, i = _parse_one_rule(toks, i, registry, len(rules))
            rules.append(rule)
        else:
            raise ParseError(f"expected 'rule', 'options', or 'extra', found {tok.text!r}",
                             tok.line, tok.col)

    for rule in rules:
        _scrape_rule(rule, registry)
    return RuleSet(rules=rules, registry=registry, extra_idents=set(extra), delta=delta,
                   source=text)


def _parse_one_rule(toks, i, registry, index):
    def peek(k=0):
        return toks[min(i + k, len(toks) - 1)]

    def bump():
        nonlocal i
        t = toks[i]
        i += 1
        return t

    def expect(s):
        t = bump()
        if t.text != s:
            raise ParseError(f"expected {s!r}, found {t.text!r}", t.line, t.col)

    expect("rule")
    nm = bump()
    if nm.kind not in ("name", "kw"):
        raise ParseError("expected rule name", nm.line, nm.col)
    expect(":")

    pvars = {}
    order = []
    if peek().text == "forall":
        bump()
        while peek().text in ("(", "'"):
            const = False
            if peek().text == "'":
                bump()
                nmv = bump()
                names = [nmv.text]
                const = True
                expect(":")
                p = S.Parser(toks)
                p.i = i
                ty = p.parse_type()
                i = p.i
            else:
                bump()  # (
                const = False
                if peek().text == "const":
                    bump()
                    const = True
                elif peek().text == "'":
                    bump()
                    const = True
                names = []
                while peek().kind == "name" or peek().text == "_":
                    names.append(bump().text)
                if not names:
                    raise ParseError("expected binder name", peek().line, peek().col)
                expect(":")
                p = S.Parser(toks)
                p.i = i
                ty = p.parse_type()
                i = p.i
                expect(")")
            oty = S.zonk(S._as_obj(ty), f"rule {nm.text}")
            for v in names:
                if v in pvars:
                    raise NonlinearPattern(f"rule {nm.text}: duplicate variable {v!r}")
                if const and not isinstance(oty, Base):
                    raise ParseError(f"constant variable {v!r} must have a base type")
                pv = PatternVar(v, oty, const)
                b = fresh_binder(v, oty)
                pvars[v] = (b, pv)
                order.append(v)
        expect(",")

    var_env = {v: pvars[v][0] for v in pvars}

    cond_proto = None
    cond_parser = None
    if peek().text == "if":
        bump()
        p = S.Parser(toks, var_env=var_env, mode="pattern")
        p.i = i
        cond_proto = p.parse_term()
        i = p.i
        cond_parser = p
        expect("then")

    p = S.Parser(toks, var_env=var_env, mode="pattern")
    p.i = i
    lhs_proto = p.parse_term()
    i = p.i
    lhs_parser = p
    expect("=>")
    p = S.Parser(toks, var_env=var_env, mode="template")
    p.i = i
    rhs_proto = p.parse_term()
    i = p.i
    rhs_parser = p

    again = False
    if peek().text == "again":
        bump()
        again = True

    def clip_hook_for(mode):
        def hook(lo, hi, arg):
            lo_s = _clip_spec(lo, pvars, nm.text)
            hi_s = _clip_spec(hi, pvars, nm.text)
            if lo_s[0] == "int" and hi_s[0] == "int":
                if not lo_s[1] < hi_s[1]:
                    raise ParseError(f"rule {nm.text}: empty clip interval")
                return App(IdentRef(T.clip_ident(lo_s[1], hi_s[1])), arg)
            return ClipVarApp(lo_s, hi_s, arg)
        return hook

    lhs_expr = S.elaborate(lhs_proto, lhs_parser, mode="pattern",
                           clip_hook=clip_hook_for("pattern"))
    lhs_type = _type_of_template(lhs_expr, pvars)
    if not isinstance(lhs_type, Base):
        raise ParseError(f"rule {nm.text}: left-hand side must have a base type, "
                         f"got {T.type_str(lhs_type)}")
    rhs_expr = S.elaborate(rhs_proto, rhs_parser, mode="template", expect=lhs_type,
                           clip_hook=clip_hook_for("template"))
    _type_of_template(rhs_expr, pvars)

    cond_expr = None
    if cond_proto is not None:
        cond_expr = S.elaborate(cond_proto, cond_parser, mode="pattern",
                                expect=Base(T.BOOL))
        _validate_condition(cond_expr, pvars, nm.text)

    pattern = _expr_to_pattern(lhs_expr, pvars, nm.text)
    head = pattern_head_key(pattern)
    if head is None:
        raise ParseError(f"rule {nm.text}: left-hand side must be headed by an identifier")
    _check_rhs_vars(rhs_expr, pvars, nm.text)

    rule = RewriteRule(name=nm.text, lhs=pattern, lhs_expr=lhs_expr, rhs=rhs_expr,
                       cond=cond_expr, again=again, index=index, pvars=pvars,
                       lhs_type=lhs_type)
    rule.delegation = _detect_delegation(rule)
    _validate_eager(rhs_expr, nm.text)
    return rule, i


def _clip_spec(spec, pvars, rule_name):
    kind, payload = spec
    if kind == "int":
        return ("int", payload)
    if payload not in pvars:
        raise ParseError(f"rule {rule_name}: unknown clip bound variable {payload!r}")
    b, pv = pvars[payload]
    if not pv.const:
        raise NonConstVarInCondition(
            f"rule {rule_name}: clip bound {payload!r} must be a constant variable")
    return ("cvar", b)


def _type_of_template(e, pvars):
    env = {b: b.ty for b, _ in pvars.values()}
    return _typecheck_template(e, env)


def _typecheck_template(e, env):
    """Like terms.typecheck but tolerant of ClipVarApp nodes."""
    if isinstance(e, ClipVarApp):
        t = _typecheck_template(e.arg, env)
        if t != Base(T.INT):
            raise ParseError("clip argument must be of type Z")
        e.ty = Base(T.INT)
        return e.ty
    if isinstance(e, Var):
        e.ty = env.get(e.binder, e.binder.ty)
        return e.ty
    if isinstance(e, Lit):
        return e.ty
    if isinstance(e, IdentRef):
        return e.ty
    if isinstance(e, Abs):
        env2 = dict(env)
        env2[e.binder] = e.binder_type
        e.ty = T.Arrow(e.binder_type, _typecheck_template(e.body, env2))
        return e.ty
    if isinstance(e, App):
        ft = _typecheck_template(e.fn, env)
        at = _typecheck_template(e.arg, env)
        if not isinstance(ft, T.Arrow) or ft.src != at:
            raise ParseError("ill-typed rule template")
        e.ty = ft.dst
        return e.ty
    if isinstance(e, LetIn):
        bt = _typecheck_template(e.bound, env)
        env2 = dict(env)
        env2[e.binder] = bt
        e.ty = _typecheck_template(e.body, env2)
        return e.ty
    raise ParseError(f"bad template node {e!r}")


def _expr_to_pattern(e, pvars, rule_name, seen=None):
    if seen is None:
        seen = set()
    if isinstance(e, Var):
        pv = None
        for b, v in pvars.values():
            if b == e.binder:
                pv = v
                break
        if pv is None:
            raise ParseError(f"rule {rule_name}: unbound variable in pattern")
        if pv.name in seen:
            raise NonlinearPattern(
                f"rule {rule_name}: variable {pv.name!r} occurs twice in the pattern")
        seen.add(pv.name)
        return ConstVar(pv) if pv.const else Wildcard(pv)
    if isinstance(e, Lit):
        return PIdent(lit_key(e.base, e.value), lit=(e.base, e.value))
    if isinstance(e, IdentRef):
        return PIdent(e.ident.key, ident=e.ident)
    if isinstance(e, App):
        return PApp(_expr_to_pattern(e.fn, pvars, rule_name, seen),
                    _expr_to_pattern(e.arg, pvars, rule_name, seen))
    if isinstance(e, ClipVarApp):
        lo_var = hi_var = None
        if e.lo_spec[0] == "cvar":
            lo_var = _pv_of_binder(e.lo_spec[1], pvars)
            if lo_var.name in seen:
                raise NonlinearPattern(f"rule {rule_name}: {lo_var.name!r} occurs twice")
            seen.add(lo_var.name)
        if e.hi_spec[0] == "cvar":
            hi_var = _pv_of_binder(e.hi_spec[1], pvars)
            if hi_var.name in seen:
                raise NonlinearPattern(f"rule {rule_name}: {hi_var.name!r} occurs twice")
            seen.add(hi_var.name)
        head = ClipPat(lo_var, hi_var)
        return PApp(head, _expr_to_pattern(e.arg, pvars, rule_name, seen))
    raise ParseError(f"rule {rule_name}: {type(e).__name__} not allowed in patterns")


def _pv_of_binder(b, pvars):
    for b2, pv in pvars.values():
        if b2 == b:
            return pv
    raise ParseError("unknown clip bound variable")


def _validate_condition(cond, pvars, rule_name):
    consts = {b for b, pv in pvars.values() if pv.const}
    declared = {b for b, _ in pvars.values()}

    def walk(e):
        if isinstance(e, Var):
            if e.binder in declared and e.binder not in consts:
                raise NonConstVarInCondition(
                    f"rule {rule_name}: condition mentions non-constant variable "
                    f"{e.binder.hint!r}")
        elif isinstance(e, IdentRef):
            if e.ident.sem is None:
                raise NonConstVarInCondition(
                    f"rule {rule_name}: condition identifier {e.ident.key} is not executable")
        elif isinstance(e, App):
            walk(e.fn)
            walk(e.arg)
        elif isinstance(e, (Abs, LetIn)):
            raise NonConstVarInCondition(
                f"rule {rule_name}: binders are not allowed in conditions")
        elif isinstance(e, ClipVarApp):
            raise NonConstVarInCondition(
                f"rule {rule_name}: clip not allowed in conditions")

    walk(cond)


def _check_rhs_vars(rhs, pvars, rule_name):
    declared = {b for b, _ in pvars.values()}
    bound = set()

    def walk(e):
        if isinstance(e, Var):
            if e.binder not in bound and e.binder not in declared:
                raise ParseError(
                    f"rule {rule_name}: replacement variable {e.binder.hint!r} "
                    f"does not appear in the pattern")
        elif isinstance(e, App):
            walk(e.fn)
            walk(e.arg)
        elif isinstance(e, Abs):
            bound.add(e.binder)
            walk(e.body)
            bound.discard(e.binder)
        elif isinstance(e, LetIn):
            walk(e.bound)
            bound.add(e.binder)
            walk(e.body)
            bound.discard(e.binder)
        elif isinstance(e, ClipVarApp):
            walk(e.arg)

    walk(rhs)


def _validate_eager(rhs, rule_name):
    def walk(e):
        if isinstance(e, IdentRef) and e.eager:
            if e.ident.family not in EAGER_FAMILIES:
                raise ParseError(
                    f"rule {rule_name}: eagerly only supports recursion combinators, "
                    f"not {e.ident.family}")
            motive = e.ident.params[-1] if e.ident.family != "nth_default" else None
            if motive is not None and not isinstance(motive, Base):
                args, _ = T.arg_types(motive)
                if len(args) > 1:
                    raise ParseError(
                        f"rule {rule_name}: eager {e.ident.family} supports motives "
                        f"with at most one arrow")
        elif isinstance(e, App):
            walk(e.fn)
            walk(e.arg)
        elif isinstance(e, Abs):
            walk(e.body)
        elif isinstance(e, LetIn):
            walk(e.bound)
            walk(e.body)
        elif isinstance(e, ClipVarApp):
            walk(e.arg)

    walk(rhs)


def _detect_delegation(rule):
    """Recognise rules of shape `elim ?a ?b ?c [?x] => eagerly elim a b c [x]`.

    Such rules only make progress when the eager unrolling actually runs, so
    they fail (and leave the term alone) on non-concrete scrutinees.
    """
    head, pargs = _pattern_spine(rule.lhs)
    if not isinstance(head, PIdent) or head.ident is None:
        return None
    fam = head.ident.family
    if fam not in EAGER_FAMILIES:
        return None
    if not all(isinstance(a, (Wildcard, ConstVar)) for a in pargs):
        return None
    rhead, rargs = app_spine(rule.rhs)
    if not isinstance(rhead, IdentRef) or not rhead.eager:
        return None
    if rhead.ident.key != head.ident.key or len(rargs) != len(pargs):
        return None
    for pa, ra in zip(pargs, rargs):
        if not isinstance(ra, Var) or ra.binder != rule.binder_of(pa.var.name):
            return None
    arity = min(STRUCT_ARITY[fam], len(pargs))
    return tuple(p for p in SCRUTINEE_POS[fam] if p < arity)


def _pattern_spine(pat):
    args = []
    while isinstance(pat, PApp):
        args.append(pat.arg)
        pat = pat.fn
    args.reverse()
    return pat, args


def _scrape_rule(rule, registry):
    def scrape_expr(e):
        if isinstance(e, IdentRef):
            if e.ident.kind == "primitive":
                registry.allow_family(e.ident.family)
        elif isinstance(e, App):
            scrape_expr(e.fn)
            scrape_expr(e.arg)
        elif isinstance(e, (Abs,)):
            scrape_expr(e.body)
        elif isinstance(e, LetIn):
            scrape_expr(e.bound)
            scrape_expr(e.body)
        elif isinstance(e, ClipVarApp):
            scrape_expr(e.arg)

    scrape_expr(rule.lhs_expr)
    scrape_expr(rule.rhs)
    if rule.cond is not None:
        scrape_expr(rule.cond)


def scrape_idents(ruleset):
    """The identifier registry induced by a rule set (already applied by parse_rules)."""
    return ruleset.registry


def eval_condition(rule, lit_bindings):
    """Evaluate a rule's side condition on concrete constant-variable values."""
    if rule.cond is None:
        return True
    env = {}
    for name, (b, pv) in rule.pvars.items():
        if pv.const and name in lit_bindings:
            env[b] = lit_bindings[name]
    return T.denote(rule.cond, env)


# ---------------------------------------------------------------------------
# Syntax-level template instantiation (reference semantics; the engine has its
# own semantic instantiation). Replacement-local constant arithmetic is folded
# here, and eager combinators unroll into plain redexes for a later pass.


def instantiate_syntactic(rule, bindings):
    binder_of = {b: name for name, (b, _) in rule.pvars.items()}
    fresh_map = {}

    def walk(e):
        if isinstance(e, Var):
            if e.binder in fresh_map:
                return Var(fresh_map[e.binder])
            name = binder_of.get(e.binder)
            if name is not None:
                return T.copy_fresh(bindings[name].syn)
            return Var(e.binder)
        if isinstance(e, Lit):
            return Lit(e.base, e.value)
        if isinstance(e, IdentRef):
            return IdentRef(e.ident)
        if isinstance(e, ClipVarApp):
            lo = _resolve_spec(e.lo_spec, binder_of, bindings)
            hi = _resolve_spec(e.hi_spec, binder_of, bindings)
            arg = walk(e.arg)
            out = App(IdentRef(T.clip_ident(lo, hi)), arg)
            return T.try_delta(out) or out
        if isinstance(e, Abs):
            b2 = fresh_binder(e.binder.hint, e.binder.ty)
            fresh_map[e.binder] = b2
            out = Abs(b2, e.binder_type, walk(e.body))
            del fresh_map[e.binder]
            return out
        if isinstance(e, LetIn):
            bound = walk(e.bound)
            b2 = fresh_binder(e.binder.hint, e.binder.ty)
            fresh_map[e.binder] = b2
            out = LetIn(b2, bound, walk(e.body))
            del fresh_map[e.binder]
            return out
        if isinstance(e, App):
            head, args = app_spine(e)
            if isinstance(head, IdentRef):
                wargs = [walk(a) for a in args]
                if head.eager:
                    unrolled = _eager_syntactic(head.ident, wargs)
                    if unrolled is not None:
                        return unrolled
                out = T.app(IdentRef(head.ident), *wargs)
                return T.try_delta(out) or out
            return App(walk(e.fn), walk(e.arg))
        raise ParseError(f"bad template node {e!r}")

    return walk(rule.rhs)


def _resolve_spec(spec, binder_of, bindings):
    if spec[0] == "int":
        return spec[1]
    name = binder_of[spec[1]]
    return bindings[name].syn.value


def _eager_syntactic(ident_, args):
    """Unroll an eager combinator into plain applications, or None if blocked."""
    fam = ident_.family
    arity = STRUCT_ARITY[fam]
    if len(args) < arity:
        return None
    extra = args[arity:]
    args = args[:arity]

    def done(e):
        return T.app(e, *extra) if extra else e

    if fam == "nat_rect":
        z, s, n = args
        if not (isinstance(n, Lit) and n.base == T.NAT and n.value <= NAT_UNROLL_CAP):
            return None
        cur = z
        for k in range(n.value):
            cur = T.app(T.copy_fresh(s), Lit(T.NAT, k), cur)
        return done(cur)
    if fam == "list_rect":
        z, s, ls = args
        items = _spine_items(ls)
        if items is None:
            return None
        cur = z
        for x, tail in reversed(items):
            cur = T.app(T.copy_fresh(s), T.copy_fresh(x), T.copy_fresh(tail), cur)
        return done(cur)
    if fam == "list_case":
        z, s, ls = args
        head, sp = app_spine(ls)
        if isinstance(head, IdentRef) and head.ident.family == "nil":
            return done(z)
        if isinstance(head, IdentRef) and head.ident.family == "cons" and len(sp) == 2:
            return done(T.app(s, sp[0], sp[1]))
        return None
    if fam == "prod_rect":
        f, p = args
        head, sp = app_spine(p)
        if isinstance(head, IdentRef) and head.ident.family == "pair" and len(sp) == 2:
            return done(T.app(f, sp[0], sp[1]))
        return None
    if fam == "bool_rect":
        t, f, b = args
        if isinstance(b, Lit) and b.base == T.BOOL:
            return done(t if b.value else f)
        return None
    if fam == "option_rect":
        s, z, o = args
        head, sp = app_spine(o)
        if isinstance(head, IdentRef) and head.ident.family == "some" and len(sp) == 1:
            return done(T.app(s, sp[0]))
        if isinstance(head, IdentRef) and head.ident.family == "none":
            return done(z)
        return None
    if fam == "nth_default":
        d, ls, k = args
        if not (isinstance(k, Lit) and k.base == T.NAT):
            return None
        items = _spine_items(ls)
        if items is None:
            return None
        if k.value < len(items):
            return done(T.copy_fresh(items[k.value][0]))
        return done(done_copy(d))
    return None


def done_copy(e):
    return T.copy_fresh(e)


def _spine_items(ls):
    """[(element, tail-after-element)] for a fully concrete cons spine."""
    items = []
    cur = ls
    while True:
        head, sp = app_spine(cur)
        if isinstance(head, IdentRef) and head.ident.family == "nil" and not sp:
            return items
        if isinstance(head, IdentRef) and head.ident.family == "cons" and len(sp) == 2:
            items.append((sp[0], sp[1]))
            cur = sp[1]
        else:
            return None


# ---------------------------------------------------------------------------
# Rule printing (round-trip support)


def rule_to_text(rule):
    names = {}
    binder_parts = []
    for name, (b, pv) in rule.pvars.items():
        names[b] = name
        marker = "const " if pv.const else ""
        binder_parts.append(f"({marker}{name} : {T.type_str(pv.declared_type)})")
    lhs = _template_text(rule.lhs_expr, names)
    rhs = _template_text(rule.rhs, names)
    out = f"rule {rule.name}: "
    if binder_parts:
        out += "forall " + " ".join(binder_parts) + ", "
    if rule.cond is not None:
        out += f"if {_template_text(rule.cond, names)} then "
    out += f"{lhs} => {rhs}"
    if rule.again:
        out += " again"
    return out


def _template_text(e, fixed_names):
    # Pattern variables print under their declared names; fresh binders inside
    # templates go through the ordinary printer.
    rendered = _render_with_names(e, fixed_names)
    return rendered


def _render_with_names(e, fixed):
    from .syntax import print_term

    class _Shim:
        pass

    # print_term names binders by hint; pattern binders carry their name as
    # hint already, so plain printing is stable here.
    return print_term(e) if not _contains_clipvar(e) else _render_clipvar(e, fixed)


def _contains_clipvar(e):
    stack = [e]
    while stack:
        cur = stack.pop()
        if isinstance(cur, ClipVarApp):
            return True
        if isinstance(cur, App):
            stack.extend((cur.fn, cur.arg))
        elif isinstance(cur, Abs):
            stack.append(cur.body)
        elif isinstance(cur, LetIn):
            stack.extend((cur.bound, cur.body))
    return False


def _render_clipvar(e, fixed):
    from .syntax import print_term
    if isinstance(e, ClipVarApp):
        def spec(s):
            return f"'{s[1].hint}" if s[0] == "cvar" else str(s[1])
        return f"(clip_{{{spec(e.lo_spec)},{spec(e.hi_spec)}}}({_render_clipvar(e.arg, fixed)}))"
    if isinstance(e, App):
        fn_s = _render_clipvar(e.fn, fixed)
        arg_s = _render_clipvar(e.arg, fixed)
        if isinstance(e.arg, (App, Abs, LetIn)):
            arg_s = f"({arg_s})"
        return f"{fn_s} {arg_s}"
    return print_term(e)


def ruleset_to_text(ruleset):
    lines = []
    if ruleset.delta:
        lines.append("options: delta")
    extras = []
    for x in sorted(ruleset.extra_idents):
        if x in T._IDENT_CACHE and T._IDENT_CACHE[x].kind == "uninterpreted":
            ident_ = T._IDENT_CACHE[x]
            extras.append(f"{ident_.family} : {T.type_str(ident_.signature)}")
        else:
            extras.append(str(x))
    if extras:
        lines.append("extra idents: " + ", ".join(extras))
    for r in ruleset.rules:
        lines.append(rule_to_text(r))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Prelude: rule instances for the shipped identifier library
#
# The object language is monomorphic, so each list/pair combinator rule is
# emitted once per type instance used by the demos, benchmarks, and tests.


def _eta(p_type):
    """Split a motive into (trailing binder decls, trailing args) for rules."""
    if isinstance(p_type, Base):
        return "", ""
    args, _ = T.arg_types(p_type)
    if len(args) != 1:
        raise ValueError("motives are limited to at most one arrow")
    return f" (x9 : {T.type_str(args[0])})", " x9"


def arith_rules():
    return [
        "rule zero_plus: forall (n : Z), 0 + n => n",
        "rule plus_zero: forall (n : Z), n + 0 => n",
        "rule times_zero: forall (n : Z), n * 0 => 0",
        "rule times_one: forall (n : Z), n * 1 => n",
    ]


def fst_snd_rules(a, b):
    a, b = T.type_str(a), T.type_str(b)
    tag = _tag(f"{a}|{b}")
    return [
        f"rule fst_pair_{tag}: forall (x : {a}) (y : {b}), fst (x, y) => x",
        f"rule snd_pair_{tag}: forall (x : {a}) (y : {b}), snd (x, y) => y",
    ]


def eval_nat_rect_rules(p):
    ps = T.type_str(p)
    decl, use = _eta(p)
    tag = _tag(ps)
    return [
        f"rule eval_nat_rect_{tag}: forall (z : {_paren(ps)}) (s : N -> {_paren(ps)} -> {_paren(ps)}) "
        f"(const n : N){decl}, nat_rect z s 'n{use} => (eagerly nat_rect z s 'n){use} again",
    ]


def eval_list_rect_rules(a, p):
    a_s, ps = T.type_str(a), T.type_str(p)
    decl, use = _eta(p)
    tag = _tag(f"{a_s}|{ps}")
    return [
        f"rule eval_list_rect_{tag}: forall (z : {_paren(ps)}) "
        f"(s : {_paren(a_s)} -> list {_paren(a_s)} -> {_paren(ps)} -> {_paren(ps)}) "
        f"(ls : list {_paren(a_s)}){decl}, "
        f"list_rect z s ls{use} => (eagerly list_rect z s ls){use} again",
    ]


def eval_list_case_rules(a, p):
    a_s, ps = T.type_str(a), T.type_str(p)
    tag = _tag(f"{a_s}|{ps}")
    return [
        f"rule eval_list_case_{tag}: forall (z : {_paren(ps)}) "
        f"(s : {_paren(a_s)} -> list {_paren(a_s)} -> {_paren(ps)}) (ls : list {_paren(a_s)}), "
        f"list_case z s ls => eagerly list_case z s ls again",
    ]


def eval_prod_rect_rules(a, b, p):
    a_s, b_s, ps = T.type_str(a), T.type_str(b), T.type_str(p)
    decl, use = _eta(p)
    tag = _tag(f"{a_s}|{b_s}|{ps}")
    return [
        f"rule eval_prod_rect_{tag}: forall (f : {_paren(a_s)} -> {_paren(b_s)} -> {_paren(ps)}) "
        f"(pr : {_paren(a_s)} * {_paren(b_s)}){decl}, "
        f"prod_rect f pr{use} => (eagerly prod_rect f pr){use} again",
    ]


def eval_bool_rect_rules(p):
    ps = T.type_str(p)
    tag = _tag(ps)
    return [
        f"rule eval_bool_rect_{tag}: forall (t : {_paren(ps)}) (f : {_paren(ps)}) (const b : B), "
        f"bool_rect t f 'b => eagerly bool_rect t f 'b again",
    ]


def eval_option_rect_rules(a, p):
    a_s, ps = T.type_str(a), T.type_str(p)
    tag = _tag(f"{a_s}|{ps}")
    return [
        f"rule eval_option_rect_{tag}: forall (s : {_paren(a_s)} -> {_paren(ps)}) "
        f"(z : {_paren(ps)}) (o : option {_paren(a_s)}), "
        f"option_rect s z o => eagerly option_rect s z o again",
    ]


def eval_nth_default_rules(a):
    a_s = T.type_str(a)
    tag = _tag(a_s)
    return [
        f"rule eval_nth_default_{tag}: forall (d : {_paren(a_s)}) (ls : list {_paren(a_s)}) "
        f"(const k : N), nth_default d ls 'k => eagerly nth_default d ls 'k again",
    ]


def eval_map_rules(a, b):
    a_s, b_s = T.type_str(a), T.type_str(b)
    tag = _tag(f"{a_s}|{b_s}")
    return [
        f"rule eval_map_{tag}: forall (f : {_paren(a_s)} -> {_paren(b_s)}) (xs : list {_paren(a_s)}), "
        f"map f xs => eagerly list_rect ([] : list {_paren(b_s)}) "
        f"(λ (x : {_paren(a_s)}) (_ : list {_paren(a_s)}) (acc : list {_paren(b_s)}) . f x :: acc) xs",
    ]


def eval_fold_left_rules(a, b):
    a_s, b_s = T.type_str(a), T.type_str(b)
    tag = _tag(f"{a_s}|{b_s}")
    return [
        f"rule eval_fold_left_{tag}: forall (f : {_paren(a_s)} -> {_paren(b_s)} -> {_paren(a_s)}) "
        f"(xs : list {_paren(b_s)}) (a : {_paren(a_s)}), "
        f"fold_left f xs a => (eagerly list_rect (λ (r : {_paren(a_s)}) . r) "
        f"(λ (x : {_paren(b_s)}) (_ : list {_paren(b_s)}) (k : {_paren(a_s)} -> {_paren(a_s)}) "
        f"(acc : {_paren(a_s)}) . k (f acc x)) xs) a",
    ]


def eval_fold_right_rules(a, b):
    a_s, b_s = T.type_str(a), T.type_str(b)
    tag = _tag(f"{a_s}|{b_s}")
    return [
        f"rule eval_fold_right_{tag}: forall (f : {_paren(a_s)} -> {_paren(b_s)} -> {_paren(b_s)}) "
        f"(z : {_paren(b_s)}) (xs : list {_paren(a_s)}), "
        f"fold_right f z xs => eagerly list_rect z "
        f"(λ (x : {_paren(a_s)}) (_ : list {_paren(a_s)}) (acc : {_paren(b_s)}) . f x acc) xs",
    ]


def eval_length_rules(a):
    a_s = T.type_str(a)
    tag = _tag(a_s)
    return [
        f"rule eval_length_{tag}: forall (xs : list {_paren(a_s)}), "
        f"length xs => list_rect 0 (λ (x : {_paren(a_s)}) (_ : list {_paren(a_s)}) (k : Z) . succ k) xs again",
    ]


def eval_combine_rules(a, b):
    a_s, b_s = T.type_str(a), T.type_str(b)
    ab = f"{_paren(a_s)} * {_paren(b_s)}"
    tag = _tag(f"{a_s}|{b_s}")
    return [
        f"rule eval_combine_{tag}: forall (la : list {_paren(a_s)}) (lb : list {_paren(b_s)}), "
        f"combine la lb => (list_rect (λ (_ : list {_paren(b_s)}) . ([] : list ({ab}))) "
        f"(λ (x : {_paren(a_s)}) (_ : list {_paren(a_s)}) (r : list {_paren(b_s)} -> list ({ab})) "
        f"(lb2 : list {_paren(b_s)}) . list_case ([] : list ({ab})) "
        f"(λ (y : {_paren(b_s)}) (ys : list {_paren(b_s)}) . (x, y) :: r ys) lb2) la) lb again",
    ]


def eval_app_rules(a):
    a_s = T.type_str(a)
    tag = _tag(a_s)
    return [
        f"rule eval_app_{tag}: forall (xs : list {_paren(a_s)}) (ys : list {_paren(a_s)}), "
        f"xs ++ ys => eagerly list_rect ys "
        f"(λ (x : {_paren(a_s)}) (_ : list {_paren(a_s)}) (acc : list {_paren(a_s)}) . x :: acc) xs",
    ]


def eval_rev_rules(a):
    a_s = T.type_str(a)
    tag = _tag(a_s)
    return [
        f"rule eval_rev_{tag}: forall (xs : list {_paren(a_s)}), "
        f"rev xs => list_rect ([] : list {_paren(a_s)}) "
        f"(λ (x : {_paren(a_s)}) (_ : list {_paren(a_s)}) (acc : list {_paren(a_s)}) . acc ++ [x]) xs again",
    ]


def eval_repeat_rules(a):
    a_s = T.type_str(a)
    tag = _tag(a_s)
    return [
        f"rule eval_repeat_{tag}: forall (x : {_paren(a_s)}) (const n : N), "
        f"repeat x 'n => eagerly nat_rect ([] : list {_paren(a_s)}) "
        f"(λ (_ : N) (acc : list {_paren(a_s)}) . x :: acc) 'n",
    ]


def _paren(s):
    return f"({s})" if " " in s else s


def _tag(s):
    out = []
    for ch in s:
        if ch.isalnum():
            out.append(ch)
        elif ch in "*|":
            out.append("_")
    return "".join(out) or "x"


Z = Base(T.INT)
N = Base(T.NAT)
B = Base(T.BOOL)


def _zl():
    return Base(T.ListOf(T.INT))


def prelude_text():
    """Rule text covering the shipped combinators at the instances our demos use."""
    zz = Base(T.Prod(T.INT, T.INT))
    z_list = _zl()
    state = Base(T.Prod(T.INT, T.ListOf(T.INT)))  # fold accumulator: (Z, list Z)
    lines = ["options: delta",
             "extra idents: seq, sub, div, mod, pow, min, max, land, lor, "
             "shiftr, shiftl, log2, pred, eqb, ltb, leb, gtb, geb, or, and, not, to_int"]
    lines += arith_rules()
    lines += eval_map_rules(Z, Z) + eval_map_rules(zz, Z) + eval_map_rules(N, N)
    lines += eval_fold_left_rules(Z, Z) + eval_fold_left_rules(state, Z)
    lines += eval_fold_right_rules(Z, Z) + eval_fold_right_rules(N, Base(T.ListOf(T.NAT)))
    lines += eval_combine_rules(Z, Z)
    lines += eval_length_rules(Z) + eval_length_rules(zz)
    lines += eval_app_rules(Z) + eval_app_rules(N)
    lines += eval_rev_rules(Z)
    lines += eval_repeat_rules(Z)
    lines += fst_snd_rules(Z, Z) + fst_snd_rules(Z, z_list) + fst_snd_rules(N, N)
    lines += eval_nat_rect_rules(Z) + eval_nat_rect_rules(z_list)
    lines += eval_nat_rect_rules(T.arrow(Z, Z))
    lines += eval_list_rect_rules(Z, Z) + eval_list_rect_rules(Z, z_list)
    lines += eval_list_rect_rules(zz, Z)
    lines += eval_list_rect_rules(Z, T.arrow(z_list, Base(T.ListOf(T.Prod(T.INT, T.INT)))))
    lines += eval_list_case_rules(Z, z_list)
    lines += eval_list_case_rules(Z, Base(T.ListOf(T.Prod(T.INT, T.INT))))
    lines += eval_prod_rect_rules(Z, z_list, Base(T.Prod(T.INT, T.ListOf(T.INT))))
    lines += eval_prod_rect_rules(Z, z_list, z_list)
    lines += eval_bool_rect_rules(Z) + eval_bool_rect_rules(z_list)
    lines += eval_option_rect_rules(Z, Z)
    lines += eval_nth_default_rules(Z)
    return "\n".join(lines) + "\n"


def _scan_elim_instances(e, out):
    if isinstance(e, IdentRef):
        if e.ident.family in EAGER_FAMILIES:
            out[e.ident.key] = e.ident
    elif isinstance(e, App):
        _scan_elim_instances(e.fn, out)
        _scan_elim_instances(e.arg, out)
    elif isinstance(e, Abs):
        _scan_elim_instances(e.body, out)
    elif isinstance(e, LetIn):
        _scan_elim_instances(e.bound, out)
        _scan_elim_instances(e.body, out)
    elif isinstance(e, ClipVarApp):
        _scan_elim_instances(e.arg, out)


_DELEGATION_GEN = {
    "nat_rect": lambda p: eval_nat_rect_rules(*p),
    "list_rect": lambda p: eval_list_rect_rules(*p),
    "list_case": lambda p: eval_list_case_rules(*p),
    "prod_rect": lambda p: eval_prod_rect_rules(*p),
    "bool_rect": lambda p: eval_bool_rect_rules(*p),
    "option_rect": lambda p: eval_option_rect_rules(*p),
    "nth_default": lambda p: eval_nth_default_rules(*p),
}


def delegation_closure(text):
    """Append eager-delegation rules for combinator instances used by templates.

    Replacements leave a plain combinator behind when their scrutinee is not
    yet concrete; a later pass can only pick it up if a rule for that exact
    instance exists. This computes those instances and emits the missing rules.
    """
    rs = parse_rules(text)
    covered = set()
    for r in rs.rules:
        head, _ = _pattern_spine(r.lhs)
        if isinstance(head, PIdent) and head.ident is not None \
                and head.ident.family in EAGER_FAMILIES:
            covered.add(head.ident.key)
    needed = {}
    for r in rs.rules:
        _scan_elim_instances(r.rhs, needed)
    lines = []
    for key in sorted(needed):
        if key in covered:
            continue
        ident_ = needed[key]
        lines += _DELEGATION_GEN[ident_.family](ident_.params)
        covered.add(key)
    if not lines:
        return text
    return text.rstrip("\n") + "\n" + "\n".join(lines) + "\n"


def prelude_text_closed():
    return delegation_closure(prelude_text())


def prelude():
    """Parsed form of the shipped prelude rules."""
    return parse_rules(prelude_text_closed())
