"""Slow, obviously correct reference implementations.

The naive matcher tries each rule in index order by direct recursive pattern
matching; the naive rewriter substitutes freely and loops to a fixpoint.
Both exist to cross-check the decision-tree matcher and the NbE engine, so
they deliberately share no machinery with them beyond rule application
semantics (side conditions, template instantiation).
"""

import random

from .errors import FuelExhausted
from . import terms as T
from . import rules as R
from .terms import (App, Abs, IdentRef, LetIn, Lit, Var, app_spine,
                    fresh_binder, alpha_equal, Base, Arrow, ListOf, OptionOf,
                    Prod, INT, NAT, BOOL, UNIT, ident)

_subst_calls = 0


def subst_count():
    return _subst_calls


def reset_subst_count():
    global _subst_calls
    _subst_calls = 0


def subst(e, mapping):
    """Capture-avoiding substitution; bound binders are freshened throughout."""
    global _subst_calls
    _subst_calls += 1

    def go(e, m):
        if isinstance(e, Var):
            v = m.get(e.binder)
            return T.copy_fresh(v) if v is not None else Var(e.binder)
        if isinstance(e, Lit):
            return Lit(e.base, e.value)
        if isinstance(e, IdentRef):
            out = IdentRef(e.ident)
            out.eager = e.eager
            return out
        if isinstance(e, App):
            return App(go(e.fn, m), go(e.arg, m))
        if isinstance(e, Abs):
            b2 = fresh_binder(e.binder.hint, e.binder.ty)
            m2 = dict(m)
            m2[e.binder] = Var(b2)
            return Abs(b2, e.binder_type, go(e.body, m2))
        if isinstance(e, LetIn):
            bound = go(e.bound, m)
            b2 = fresh_binder(e.binder.hint, e.binder.ty)
            m2 = dict(m)
            m2[e.binder] = Var(b2)
            return LetIn(b2, bound, go(e.body, m2))
        raise TypeError(f"cannot substitute into {e!r}")

    return go(e, mapping)


# ---------------------------------------------------------------------------
# Naive root matching


def _nmatch(pat, e, out):
    if isinstance(pat, R.Wildcard):
        out[pat.var.name] = e
        return True
    if isinstance(pat, R.ConstVar):
        if isinstance(e, Lit):
            declared = pat.var.declared_type
            if isinstance(declared, Base) and declared.base != e.base:
                return False
            out[pat.var.name] = e
            return True
        return False
    if isinstance(pat, R.PIdent):
        if pat.lit is not None:
            return isinstance(e, Lit) and (e.base, e.value) == pat.lit
        return isinstance(e, IdentRef) and e.ident.key == pat.key
    if isinstance(pat, R.ClipPat):
        if isinstance(e, IdentRef) and e.ident.kind == "clip":
            lo, hi = e.ident.params
            if pat.lo_var is not None:
                out[pat.lo_var.name] = Lit(INT, lo)
            if pat.hi_var is not None:
                out[pat.hi_var.name] = Lit(INT, hi)
            return True
        return False
    if isinstance(pat, R.PApp):
        return isinstance(e, App) and _nmatch(pat.fn, e.fn, out) \
            and _nmatch(pat.arg, e.arg, out)
    raise TypeError(f"not a pattern: {pat!r}")


def _rule_applies(rule, e):
    """Bindings when rule matches at the root, passes its side condition, and
    (for eager delegations) would actually make progress."""
    out = {}
    if not _nmatch(rule.lhs, e, out):
        return None
    if rule.delegation is not None:
        head, pargs = R._pattern_spine(rule.lhs)
        for pos in rule.delegation:
            syn = out[pargs[pos].var.name]
            if isinstance(syn, Lit):
                if syn.base == NAT and syn.value > R.NAT_UNROLL_CAP:
                    return None
                continue
            if not _concrete_spine(syn):
                return None
    if rule.cond is not None:
        lits = {}
        for name, (b, pv) in rule.pvars.items():
            if pv.const:
                v = out.get(name)
                if not isinstance(v, Lit):
                    return None
                lits[name] = v.value
        if not R.eval_condition(rule, lits):
            return None
    return out


def _concrete_spine(e):
    while True:
        head, args = app_spine(e)
        if isinstance(e, Lit):
            return True
        if not isinstance(head, IdentRef):
            return False
        fam = head.ident.family
        if fam in ("nil", "none") and not args:
            return True
        if fam == "pair" and len(args) == 2:
            return True
        if fam == "some" and len(args) == 1:
            return True
        if fam == "cons" and len(args) == 2:
            e = args[1]
            continue
        return False


def naive_match_root(ruleset, e):
    """First rule (by index) whose pattern matches at the root of e."""
    for rule in ruleset.rules:
        out = _rule_applies(rule, e)
        if out is not None:
            return rule.index, {name: T.copy_fresh(v) for name, v in out.items()}
    return None


def _bindings_for(rule, raw):
    from .matcher import Binding
    return {name: Binding(v) for name, v in raw.items()}


# ---------------------------------------------------------------------------
# Naive whole-term rewriting


def naive_rewrite(ruleset, e, fuel=1000):
    """Leftmost-outermost reduction: beta, let inlining, root rule application,
    and (with delta) constant folding, repeated until no site changes."""
    steps = fuel
    while True:
        stepped = _step(ruleset, e)
        if stepped is None:
            return e
        e = stepped
        steps -= 1
        if steps <= 0:
            raise FuelExhausted("naive rewriting ran out of fuel", partial=e)


def _step(ruleset, e):
    if isinstance(e, App) and isinstance(e.fn, Abs):
        return subst(e.fn.body, {e.fn.binder: e.arg})
    if isinstance(e, LetIn):
        return subst(e.body, {e.binder: e.bound})
    m = naive_match_root(ruleset, e)
    if m is not None:
        k, raw = m
        rule = ruleset.rules[k]
        return R.instantiate_syntactic(rule, _bindings_for(rule, raw))
    if ruleset.delta:
        folded = T.try_delta(e)
        if folded is not None:
            return folded
    if isinstance(e, App):
        fn = _step(ruleset, e.fn)
        if fn is not None:
            return App(fn, e.arg)
        arg = _step(ruleset, e.arg)
        if arg is not None:
            return App(e.fn, arg)
        return None
    if isinstance(e, Abs):
        body = _step(ruleset, e.body)
        if body is not None:
            return Abs(e.binder, e.binder_type, body)
        return None
    return None


def full_eval(e):
    """Evaluate a closed term to its value."""
    return T.denote(e, {})


# ---------------------------------------------------------------------------
# Random typed terms (for differential testing)

LITERAL_POOL = list(range(-12, 13)) + [-256, -100, 100, 256, 0, 1,
                                       (1 << 64) - 1, (1 << 64) + 1]


class TermGen:
    """Size-bounded, type-directed random terms over the prelude identifiers.

    Recursion-consuming arguments (nat_rect fuel, seq counts, repeat counts,
    shift amounts, pow exponents) stay small so evaluation terminates fast.
    """

    def __init__(self, rng=None, max_nodes=40):
        self.rng = rng if rng is not None else random.Random(0)
        self.max_nodes = max_nodes
        self.budget = 0
        self.env = []  # (binder, type)

    def term(self, ty, env=None):
        self.budget = self.max_nodes
        self.env = list(env) if env else []
        return self.gen(ty)

    def closed_term(self, ty=Base(INT), n_free=2):
        """A term of type ty wrapped under binders for its free variables."""
        free = [(fresh_binder(f"w{i}", Base(INT)), Base(INT)) for i in range(n_free)]
        body = self.term(ty, env=free)
        out = body
        for b, bty in reversed(free):
            out = Abs(b, bty, out)
        return out

    def gen(self, ty):
        self.budget -= 1
        rng = self.rng
        if isinstance(ty, Arrow):
            b = fresh_binder("x", ty.src)
            self.env.append((b, ty.src))
            body = self.gen(ty.dst)
            self.env.pop()
            return Abs(b, ty.src, body)
        bt = ty.base
        if self.budget <= 0:
            return self.leaf(bt)
        roll = rng.random()
        candidates = [(b, t) for b, t in self.env if t == ty]
        if candidates and roll < 0.25:
            return Var(rng.choice(candidates)[0])
        if roll < 0.35:
            bound_ty = Base(rng.choice([INT, INT, NAT, BOOL]))
            bound = self.gen(bound_ty)
            b = fresh_binder("t", bound_ty)
            self.env.append((b, bound_ty))
            body = self.gen(ty)
            self.env.pop()
            return LetIn(b, bound, body)
        builders = self.builders(bt)
        if builders:
            return rng.choice(builders)()
        return self.leaf(bt)

    def leaf(self, bt):
        rng = self.rng
        if bt == INT:
            for b, t in self.env:
                if t == Base(INT) and rng.random() < 0.5:
                    return Var(b)
            return Lit(INT, rng.choice(LITERAL_POOL))
        if bt == NAT:
            return Lit(NAT, rng.randrange(0, 7))
        if bt == BOOL:
            return Lit(BOOL, rng.random() < 0.5)
        if bt == UNIT:
            return Lit(UNIT, ())
        if isinstance(bt, Prod):
            return T.app(IdentRef(ident("pair", bt.left, bt.right)),
                         self.leaf(bt.left), self.leaf(bt.right))
        if isinstance(bt, ListOf):
            out = IdentRef(ident("nil", bt.elem))
            for _ in range(rng.randrange(0, 3)):
                out = T.app(IdentRef(ident("cons", bt.elem)), self.leaf(bt.elem), out)
            return out
        if isinstance(bt, OptionOf):
            if rng.random() < 0.4:
                return IdentRef(ident("none", bt.elem))
            return T.app(IdentRef(ident("some", bt.elem)), self.leaf(bt.elem))
        raise TypeError(bt)

    def small_nat(self):
        return Lit(NAT, self.rng.randrange(0, 5))

    def small_int(self):
        return Lit(INT, self.rng.randrange(0, 9))

    def builders(self, bt):
        rng = self.rng
        zi = Base(INT)
        zl = Base(ListOf(INT))
        out = []
        if bt == INT:
            def arith():
                fam = rng.choice(["add", "add", "sub", "mul", "mul", "div", "mod",
                                  "min", "max", "land", "lor"])
                return T.app(IdentRef(ident(fam, INT)), self.gen(zi), self.gen(zi))

            def shift():
                fam = rng.choice(["shiftr", "shiftl"])
                return T.app(IdentRef(ident(fam, INT)), self.gen(zi), self.small_int())

            def powe():
                return T.app(IdentRef(ident("pow", INT)), self.gen(zi), self.small_int())

            def unary():
                fam = rng.choice(["succ", "pred", "log2"])
                return T.app(IdentRef(ident(fam, INT)), self.gen(zi))

            def length():
                return T.app(IdentRef(ident("length", INT)), self.gen(zl))

            def proj():
                fam = rng.choice(["fst", "snd"])
                pr = self.gen(Base(Prod(INT, INT)))
                args = (INT, INT)
                return T.app(IdentRef(ident(fam, *args)), pr)

            def fold():
                return T.app(IdentRef(ident("fold_left", INT, INT)),
                             self.gen(T.arrow(zi, zi, zi)), self.gen(zl), self.gen(zi))

            def natrec():
                return T.app(IdentRef(ident("nat_rect", zi)), self.gen(zi),
                             self.gen(T.arrow(Base(NAT), zi, zi)), self.small_nat())

            def listrec():
                return T.app(IdentRef(ident("list_rect", INT, zi)), self.gen(zi),
                             self.gen(T.arrow(zi, zl, zi, zi)), self.gen(zl))

            def boolrec():
                return T.app(IdentRef(ident("bool_rect", zi)), self.gen(zi),
                             self.gen(zi), self.gen(Base(BOOL)))

            def nth():
                return T.app(IdentRef(ident("nth_default", INT)), self.gen(zi),
                             self.gen(zl), self.small_nat())
            out = [arith, arith, shift, powe, unary, length, proj, fold,
                   natrec, listrec, boolrec, nth]
        elif bt == BOOL:
            def cmp():
                fam = rng.choice(["eqb", "ltb", "leb", "gtb", "geb"])
                return T.app(IdentRef(ident(fam, INT)), self.gen(zi), self.gen(zi))

            def boolop():
                fam = rng.choice(["or", "and"])
                return T.app(IdentRef(ident(fam)), self.gen(Base(BOOL)), self.gen(Base(BOOL)))

            def notop():
                return T.app(IdentRef(ident("not")), self.gen(Base(BOOL)))
            out = [cmp, cmp, boolop, notop]
        elif bt == NAT:
            out = [self.small_nat]
        elif isinstance(bt, Prod):
            def mkpair():
                return T.app(IdentRef(ident("pair", bt.left, bt.right)),
                             self.gen(Base(bt.left)), self.gen(Base(bt.right)))
            out = [mkpair]
        elif isinstance(bt, ListOf) and bt.elem == INT:
            def mkcons():
                return T.app(IdentRef(ident("cons", INT)), self.gen(zi), self.gen(Base(bt)))

            def mkmap():
                return T.app(IdentRef(ident("map", INT, INT)),
                             self.gen(T.arrow(zi, zi)), self.gen(Base(bt)))

            def mkapp():
                return T.app(IdentRef(ident("append", INT)),
                             self.gen(Base(bt)), self.gen(Base(bt)))

            def mkrev():
                return T.app(IdentRef(ident("rev", INT)), self.gen(Base(bt)))

            def mkrepeat():
                return T.app(IdentRef(ident("repeat", INT)), self.gen(zi), self.small_nat())

            def mkseq():
                return T.app(IdentRef(ident("seq", INT)), self.gen(zi), self.small_int())
            out = [mkcons, mkcons, mkmap, mkapp, mkrev, mkrepeat, mkseq]
        elif isinstance(bt, ListOf):
            def mklist():
                return self.leaf(bt)
            out = [mklist]
        elif isinstance(bt, OptionOf):
            def mkopt():
                return self.leaf(bt)
            out = [mkopt]
        return out


def gen_value(ty, rng):
    """A host-level value inhabiting the given type, for denotational closings."""
    if isinstance(ty, Arrow):
        if ty == T.arrow(Base(INT), Base(INT)):
            k = rng.randrange(-8, 9)
            which = rng.random()
            if which < 0.4:
                return lambda v: v + k
            if which < 0.7:
                return lambda v: v * k
            return lambda v: k
        out = gen_value(ty.dst, rng)
        return lambda _v: out
    bt = ty.base
    if bt == INT:
        return rng.choice(LITERAL_POOL)
    if bt == NAT:
        return rng.randrange(0, 7)
    if bt == BOOL:
        return rng.random() < 0.5
    if bt == UNIT:
        return ()
    if isinstance(bt, Prod):
        return (gen_value(Base(bt.left), rng), gen_value(Base(bt.right), rng))
    if isinstance(bt, ListOf):
        return [gen_value(Base(bt.elem), rng) for _ in range(rng.randrange(0, 4))]
    if isinstance(bt, OptionOf):
        if rng.random() < 0.4:
            return ("none",)
        return ("some", gen_value(Base(bt.elem), rng))
    raise TypeError(bt)


def denote_agree(e1, e2, ty, rng, samples=5):
    """Do two closed terms denote the same value, sampling arrow arguments?"""
    for _ in range(samples):
        v1 = T.denote(e1, {})
        v2 = T.denote(e2, {})
        t = ty
        while isinstance(t, Arrow):
            arg = gen_value(t.src, rng)
            v1 = v1(arg)
            v2 = v2(arg)
            t = t.dst
        if v1 != v2:
            return False
        if not isinstance(ty, Arrow):
            return True
    return True
