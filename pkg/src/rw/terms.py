"""Object-language core: types, identifiers, terms, interpreter, structural utilities.

Values are represented as plain Python data: int for Z and N, bool for B,
() for unit, 2-tuples for products, lists for list types, and tagged tuples
("some", v) / ("none",) for options.
"""

import itertools
import threading

from .errors import TypeMismatch, UnboundVar, UninterpretedIdent, UnknownIdent

# ---------------------------------------------------------------------------
# Types


class BaseType:
    __slots__ = ()


class Prim(BaseType):
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def __eq__(self, other):
        return isinstance(other, Prim) and other.name == self.name

    def __hash__(self):
        return hash(("prim", self.name))

    def __repr__(self):
        return self.name


INT = Prim("Z")
NAT = Prim("N")
BOOL = Prim("B")
UNIT = Prim("unit")


class Prod(BaseType):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right

    def __eq__(self, other):
        return isinstance(other, Prod) and other.left == self.left and other.right == self.right

    def __hash__(self):
        return hash(("prod", self.left, self.right))

    def __repr__(self):
        return f"({self.left!r} * {self.right!r})"


class ListOf(BaseType):
    __slots__ = ("elem",)

    def __init__(self, elem):
        self.elem = elem

    def __eq__(self, other):
        return isinstance(other, ListOf) and other.elem == self.elem

    def __hash__(self):
        return hash(("list", self.elem))

    def __repr__(self):
        return f"(list {self.elem!r})"


class OptionOf(BaseType):
    __slots__ = ("elem",)

    def __init__(self, elem):
        self.elem = elem

    def __eq__(self, other):
        return isinstance(other, OptionOf) and other.elem == self.elem

    def __hash__(self):
        return hash(("option", self.elem))

    def __repr__(self):
        return f"(option {self.elem!r})"


class ObjType:
    __slots__ = ()

    def is_base(self):
        return isinstance(self, Base)


class Base(ObjType):
    __slots__ = ("base",)

    def __init__(self, base):
        self.base = base

    def __eq__(self, other):
        return isinstance(other, Base) and other.base == self.base

    def __hash__(self):
        return hash(("base", self.base))

    def __repr__(self):
        return repr(self.base)


class Arrow(ObjType):
    __slots__ = ("src", "dst")

    def __init__(self, src, dst):
        self.src = src
        self.dst = dst

    def __eq__(self, other):
        return isinstance(other, Arrow) and other.src == self.src and other.dst == self.dst

    def __hash__(self):
        return hash(("arrow", self.src, self.dst))

    def __repr__(self):
        return f"({self.src!r} -> {self.dst!r})"


def base(b):
    return Base(b) if isinstance(b, BaseType) else b


def arrow(*types):
    """Right-nested arrow from argument types to the final type."""
    types = [base(t) for t in types]
    out = types[-1]
    for t in reversed(types[:-1]):
        out = Arrow(t, out)
    return out


def arg_types(t):
    """Split an arrow chain into (argument types, result type)."""
    args = []
    while isinstance(t, Arrow):
        args.append(t.src)
        t = t.dst
    return args, t


def type_str(t):
    """Canonical printable form of a type; also used in ident keys."""
    if isinstance(t, Base):
        return type_str(t.base)
    if isinstance(t, Arrow):
        lhs = type_str(t.src)
        if isinstance(t.src, Arrow):
            lhs = f"({lhs})"
        return f"{lhs} -> {type_str(t.dst)}"
    if isinstance(t, Prim):
        return {"Z": "Z", "N": "N", "B": "B", "unit": "unit"}[t.name]
    if isinstance(t, Prod):
        def side(x):
            s = type_str(x)
            return f"({s})" if isinstance(x, (Prod,)) else s
        return f"{side(t.left)} * {side(t.right)}"
    if isinstance(t, ListOf):
        s = type_str(t.elem)
        if isinstance(t.elem, (Prod, ListOf, OptionOf)):
            s = f"({s})"
        return f"list {s}"
    if isinstance(t, OptionOf):
        s = type_str(t.elem)
        if isinstance(t.elem, (Prod, ListOf, OptionOf)):
            s = f"({s})"
        return f"option {s}"
    raise TypeError(f"not a type: {t!r}")


# ---------------------------------------------------------------------------
# Binders

_binder_counter = itertools.count()
_binder_lock = threading.Lock()


class BinderId:
    """Opaque unique token naming one binder; carries an optional hint and its type."""

    __slots__ = ("token", "hint", "ty")

    def __init__(self, token, hint, ty):
        self.token = token
        self.hint = hint
        self.ty = ty

    def __eq__(self, other):
        return isinstance(other, BinderId) and other.token == self.token

    def __hash__(self):
        return self.token

    def __repr__(self):
        return f"<{self.hint or 'v'}#{self.token}>"


def fresh_binder(hint=None, ty=None):
    with _binder_lock:
        token = next(_binder_counter)
    return BinderId(token, hint, ty)


# ---------------------------------------------------------------------------
# Identifiers

_IDENT_CACHE = {}


class Ident:
    __slots__ = ("key", "family", "display", "signature", "kind", "sem", "delta_eval", "params")

    def __init__(self, key, family, display, signature, kind, sem, delta_eval, params):
        self.key = key
        self.family = family
        self.display = display
        self.signature = signature
        self.kind = kind
        self.sem = sem
        self.delta_eval = delta_eval
        self.params = params

    def __eq__(self, other):
        return isinstance(other, Ident) and other.key == self.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"Ident({self.key})"

    @property
    def name(self):
        return self.key

    def arity(self):
        return len(arg_types(self.signature)[0])


def _curried(f, n):
    if n == 0:
        return f()
    if n == 1:
        return lambda a: f(a)
    if n == 2:
        return lambda a: lambda b: f(a, b)
    if n == 3:
        return lambda a: lambda b: lambda c: f(a, b, c)
    if n == 4:
        return lambda a: lambda b: lambda c: lambda d: f(a, b, c, d)
    raise ValueError(n)


_POW_GUARD = 1 << 16


def _z_div(a, b):
    return 0 if b == 0 else a // b


def _z_mod(a, b):
    return a if b == 0 else a % b


def _z_pow(a, b):
    if b < 0:
        return 0
    return a ** b


def _z_log2(a):
    return a.bit_length() - 1 if a > 1 else 0


def _z_shiftr(a, k):
    return a >> k if k >= 0 else a << (-k)


def _z_shiftl(a, k):
    return a << k if k >= 0 else a >> (-k)


def _nat_rect(z, s, n):
    cur = z
    for k in range(n):
        cur = s(k)(cur)
    return cur


def _list_rect(z, s, xs):
    cur = z
    for i in range(len(xs) - 1, -1, -1):
        cur = s(xs[i])(xs[i + 1:])(cur)
    return cur


def _list_case(z, s, xs):
    return z if not xs else s(xs[0])(xs[1:])


def _nth_default(d, xs, n):
    return xs[n] if 0 <= n < len(xs) else d


def _awc64(a, b):
    q, r = divmod(a + b, 1 << 64)
    return (q, r)


def clip_semantics(l, u, n):
    """Identity on [l, u); out of range saturates to the nearest end."""
    if l <= n < u:
        return n
    return max(l, min(n, u - 1))


# family -> (display, kind, signature builder, semantics builder)
# Scalar-parameterised arithmetic families accept Z or N instances.


def _scalar_family(display, py, nat_clamp=False):
    def sig(s):
        return arrow(s, s, s)

    def sem(s):
        if s == NAT and nat_clamp:
            return _curried(lambda a, b: max(0, py(a, b)), 2)
        return _curried(py, 2)

    return display, "primitive", sig, sem


def _cmp_family(display, py):
    return display, "primitive", lambda s: arrow(s, s, BOOL), lambda s: _curried(py, 2)


_FAMILIES = {
    # constructors
    "nil": ("[]", "constructor", lambda t: arrow(ListOf(t)), None),
    "cons": ("::", "constructor", lambda t: arrow(t, ListOf(t), ListOf(t)), None),
    "pair": (",", "constructor", lambda a, b: arrow(a, b, Prod(a, b)), None),
    "some": ("some", "constructor", lambda t: arrow(t, OptionOf(t)), None),
    "none": ("none", "constructor", lambda t: arrow(OptionOf(t)), None),
    # eliminators
    "fst": ("fst", "eliminator", lambda a, b: arrow(Prod(a, b), a),
            lambda a, b: lambda p: p[0]),
    "snd": ("snd", "eliminator", lambda a, b: arrow(Prod(a, b), b),
            lambda a, b: lambda p: p[1]),
    "nat_rect": ("nat_rect", "eliminator",
                 lambda p: arrow(p, arrow(base(NAT), p, p), base(NAT), p),
                 lambda p: _curried(_nat_rect, 3)),
    "list_rect": ("list_rect", "eliminator",
                  lambda a, p: arrow(p, arrow(base(a), ListOf(a), p, p), ListOf(a), p),
                  lambda a, p: _curried(_list_rect, 3)),
    "list_case": ("list_case", "eliminator",
                  lambda a, p: arrow(p, arrow(base(a), ListOf(a), p), ListOf(a), p),
                  lambda a, p: _curried(_list_case, 3)),
    "prod_rect": ("prod_rect", "eliminator",
                  lambda a, b, p: arrow(arrow(base(a), base(b), p), Prod(a, b), p),
                  lambda a, b, p: lambda f: lambda pr: f(pr[0])(pr[1])),
    "bool_rect": ("bool_rect", "eliminator",
                  lambda p: arrow(p, p, base(BOOL), p),
                  lambda p: _curried(lambda t, f, b: t if b else f, 3)),
    "option_rect": ("option_rect", "eliminator",
                    lambda a, p: arrow(arrow(base(a), p), p, OptionOf(a), p),
                    lambda a, p: _curried(lambda s, z, o: s(o[1]) if o[0] == "some" else z, 3)),
    "nth_default": ("nth_default", "eliminator",
                    lambda a: arrow(a, ListOf(a), NAT, a),
                    lambda a: _curried(_nth_default, 3)),
    # scalar arithmetic
    "add": _scalar_family("+", lambda a, b: a + b),
    "sub": _scalar_family("-", lambda a, b: a - b, nat_clamp=True),
    "mul": _scalar_family("*", lambda a, b: a * b),
    "div": _scalar_family("/", _z_div),
    "mod": _scalar_family("%", _z_mod),
    "pow": _scalar_family("^", _z_pow),
    "min": _scalar_family("min", min),
    "max": _scalar_family("max", max),
    "land": _scalar_family("land", lambda a, b: a & b),
    "lor": _scalar_family("lor", lambda a, b: a | b),
    "shiftr": _scalar_family(">>", _z_shiftr),
    "shiftl": _scalar_family("<<", _z_shiftl),
    "log2": ("log2", "primitive", lambda s: arrow(s, s), lambda s: _z_log2),
    "succ": ("succ", "primitive", lambda s: arrow(s, s), lambda s: lambda a: a + 1),
    "pred": ("pred", "primitive", lambda s: arrow(s, s),
             lambda s: (lambda a: max(0, a - 1)) if s == NAT else (lambda a: a - 1)),
    "eqb": _cmp_family("==", lambda a, b: a == b),
    "ltb": _cmp_family("<", lambda a, b: a < b),
    "leb": _cmp_family("<=", lambda a, b: a <= b),
    "gtb": _cmp_family(">", lambda a, b: a > b),
    "geb": _cmp_family(">=", lambda a, b: a >= b),
    "or": ("||", "primitive", lambda: arrow(BOOL, BOOL, BOOL), lambda: _curried(lambda a, b: a or b, 2)),
    "and": ("&&", "primitive", lambda: arrow(BOOL, BOOL, BOOL), lambda: _curried(lambda a, b: a and b, 2)),
    "not": ("!", "primitive", lambda: arrow(BOOL, BOOL), lambda: lambda a: not a),
    "seq": ("seq", "primitive", lambda s: arrow(s, s, ListOf(s)),
            lambda s: _curried(lambda st, n: [st + i for i in range(max(0, n))], 2)),
    "to_int": ("to_int", "primitive", lambda: arrow(NAT, INT), lambda: lambda a: a),
    # list library; reduced by rules, interpreted directly by denote
    "length": ("length", "primitive", lambda t: arrow(ListOf(t), INT), lambda t: len),
    "map": ("map", "primitive",
            lambda a, b: arrow(arrow(base(a), base(b)), ListOf(a), ListOf(b)),
            lambda a, b: _curried(lambda f, xs: [f(x) for x in xs], 2)),
    "fold_left": ("fold_left", "primitive",
                  lambda a, b: arrow(arrow(a, base(b), a), ListOf(b), a, a),
                  lambda a, b: _curried(lambda f, xs, z: _fold_left(f, xs, z), 3)),
    "fold_right": ("fold_right", "primitive",
                   lambda a, b: arrow(arrow(base(a), b, b), b, ListOf(a), b),
                   lambda a, b: _curried(lambda f, z, xs: _fold_right(f, z, xs), 3)),
    "combine": ("combine", "primitive",
                lambda a, b: arrow(ListOf(a), ListOf(b), ListOf(Prod(a, b))),
                lambda a, b: _curried(lambda xs, ys: [(x, y) for x, y in zip(xs, ys)], 2)),
    "append": ("++", "primitive",
               lambda t: arrow(ListOf(t), ListOf(t), ListOf(t)),
               lambda t: _curried(lambda xs, ys: xs + ys, 2)),
    "rev": ("rev", "primitive", lambda t: arrow(ListOf(t), ListOf(t)),
            lambda t: lambda xs: list(reversed(xs))),
    "repeat": ("repeat", "primitive", lambda t: arrow(t, NAT, ListOf(t)),
               lambda t: _curried(lambda x, n: [x] * n, 2)),
    "add_with_carry64": ("add_with_carry64", "primitive",
                         lambda: arrow(INT, INT, Prod(INT, INT)),
                         lambda: _curried(_awc64, 2)),
}


def _fold_left(f, xs, z):
    cur = z
    for x in xs:
        cur = f(cur)(x)
    return cur


def _fold_right(f, z, xs):
    cur = z
    for x in reversed(xs):
        cur = f(x)(cur)
    return cur


def _param_str(p):
    if isinstance(p, (BaseType, ObjType)):
        return type_str(p)
    return str(p)


def _first_order(sig):
    args, _ = arg_types(sig)
    return all(isinstance(a, Base) for a in args)


def _uncurry(sem, n):
    def run(args):
        cur = sem
        for a in args:
            cur = cur(a)
        return cur
    if n == 0:
        return lambda args: sem
    return run


def ident(family, *params):
    """Intern the instance of a known family at the given type/int parameters."""
    key = family if not params else f"{family}@{','.join(_param_str(p) for p in params)}"
    cached = _IDENT_CACHE.get(key)
    if cached is not None:
        return cached
    if family == "clip":
        return clip_ident(*params)
    if family not in _FAMILIES:
        raise UnknownIdent(f"unknown identifier family: {family}")
    display, kind, sig_of, sem_of = _FAMILIES[family]
    sig = sig_of(*params)
    sem = sem_of(*params) if sem_of is not None else None
    delta = None
    if sem is not None and kind in ("primitive", "eliminator") and _first_order(sig):
        delta = _uncurry(sem, len(arg_types(sig)[0]))
    out = Ident(key, family, display, sig, kind, sem, delta, params)
    _IDENT_CACHE[key] = out
    return out


def clip_ident(lo, hi):
    """clip_{lo,hi}: identity on [lo, hi), saturating outside; bounds are part of identity."""
    key = f"clip@{lo},{hi}"
    cached = _IDENT_CACHE.get(key)
    if cached is not None:
        return cached
    sig = arrow(INT, INT)
    sem = lambda n: clip_semantics(lo, hi, n)
    out = Ident(key, "clip", f"clip_{{{lo},{hi}}}", sig, "clip", sem, _uncurry(sem, 1), (lo, hi))
    _IDENT_CACHE[key] = out
    return out


def uninterpreted(name, sig):
    key = f"u:{name}"
    cached = _IDENT_CACHE.get(key)
    if cached is not None:
        if cached.signature != sig:
            raise UnknownIdent(f"{name} redeclared at a different type")
        return cached
    out = Ident(key, name, name, sig, "uninterpreted", None, None, ())
    _IDENT_CACHE[key] = out
    return out


def is_known_family(name):
    return name in _FAMILIES


class IdentRegistry:
    """The set of identifiers a rule set admits in terms it rewrites.

    Constructor and eliminator families (and clip) are always available;
    primitive families must be scraped from rules or declared as extras.
    """

    def __init__(self, permissive=False):
        self.permissive = permissive
        self.families = set()
        self.extra = {}  # key -> Ident, for uninterpreted extras

    def allow_family(self, name):
        if not is_known_family(name):
            raise UnknownIdent(f"unknown identifier family: {name}")
        self.families.add(name)

    def add_extra(self, ident_):
        self.extra[ident_.key] = ident_

    def allows(self, ident_):
        if ident_.kind in ("constructor", "eliminator", "clip"):
            return True
        if self.permissive:
            return True
        return ident_.family in self.families or ident_.key in self.extra

    def known_names(self):
        return sorted(self.families) + sorted(i.family for i in self.extra.values())


def default_registry():
    return IdentRegistry(permissive=True)


# ---------------------------------------------------------------------------
# Terms


class Expr:
    __slots__ = ("ty",)


class Var(Expr):
    __slots__ = ("binder",)

    def __init__(self, binder):
        self.binder = binder
        self.ty = binder.ty

    def __repr__(self):
        return f"Var({self.binder!r})"


class Abs(Expr):
    __slots__ = ("binder", "binder_type", "body")

    def __init__(self, binder, binder_type, body):
        self.binder = binder
        self.binder_type = binder_type
        self.body = body
        self.ty = None

    def __repr__(self):
        return f"Abs({self.binder!r}, {self.body!r})"


class App(Expr):
    __slots__ = ("fn", "arg")

    def __init__(self, fn, arg):
        self.fn = fn
        self.arg = arg
        self.ty = None

    def __repr__(self):
        return f"App({self.fn!r}, {self.arg!r})"


class LetIn(Expr):
    __slots__ = ("binder", "bound", "body")

    def __init__(self, binder, bound, body):
        self.binder = binder
        self.bound = bound
        self.body = body
        self.ty = None

    def __repr__(self):
        return f"LetIn({self.binder!r}, {self.bound!r}, {self.body!r})"


class IdentRef(Expr):
    __slots__ = ("ident", "eager")

    def __init__(self, ident_, eager=False):
        self.ident = ident_
        self.eager = eager  # set only inside rule templates
        self.ty = ident_.signature

    def __repr__(self):
        return f"IdentRef({self.ident.key})"


class Lit(Expr):
    __slots__ = ("base", "value")

    def __init__(self, base_, value):
        if base_ == NAT and value < 0:
            raise TypeMismatch(f"N literal must be nonnegative, got {value}")
        self.base = base_
        self.value = value
        self.ty = Base(base_)

    def __repr__(self):
        return f"Lit({self.value!r}:{self.base!r})"


def lit_key(base_, value):
    """Dispatch key treating a literal as a distinguished per-value identifier."""
    return ("lit", type_str(base_), value)


def app(head, *args):
    out = head
    for a in args:
        out = App(out, a)
    return out


def app_spine(e):
    """View an expression as (head, [args]) by unwinding applications."""
    args = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fn
    args.reverse()
    return e, args


# ---------------------------------------------------------------------------
# Typechecking


def typecheck(e, registry=None, env=None):
    """Return the type of `e`, annotating every node's .ty along the way.

    TypeMismatch errors carry the path into the term at which they occurred.
    """
    env = dict(env) if env else {}
    path = []  # mutated in place; copied only into raised errors

    def go(e):
        if isinstance(e, Var):
            t = env.get(e.binder)
            if t is None:
                t = e.binder.ty
                if t is None:
                    raise UnboundVar(f"unbound variable {e.binder!r}")
            e.ty = t
            return t
        if isinstance(e, Lit):
            return e.ty
        if isinstance(e, IdentRef):
            if registry is not None and not registry.allows(e.ident):
                raise UnknownIdent(f"identifier {e.ident.key} not admitted by this rule set")
            return e.ty
        if isinstance(e, Abs):
            if e.binder in env:
                raise TypeMismatch(f"shadowed binder {e.binder!r}", path)
            env[e.binder] = e.binder_type
            path.append("body")
            body_t = go(e.body)
            path.pop()
            del env[e.binder]
            e.ty = Arrow(e.binder_type, body_t)
            return e.ty
        if isinstance(e, App):
            path.append("fn")
            fn_t = go(e.fn)
            path.pop()
            path.append("arg")
            arg_t = go(e.arg)
            path.pop()
            if not isinstance(fn_t, Arrow):
                raise TypeMismatch(f"applied non-function of type {type_str(fn_t)}", path)
            if fn_t.src != arg_t:
                raise TypeMismatch(
                    f"argument type {type_str(arg_t)} does not match {type_str(fn_t.src)}", path)
            e.ty = fn_t.dst
            return e.ty
        if isinstance(e, LetIn):
            path.append("bound")
            bound_t = go(e.bound)
            path.pop()
            if e.binder.ty is not None and e.binder.ty != bound_t:
                raise TypeMismatch(
                    f"let binder annotated {type_str(e.binder.ty)} but bound {type_str(bound_t)}",
                    path)
            env[e.binder] = bound_t
            path.append("body")
            body_t = go(e.body)
            path.pop()
            del env[e.binder]
            e.ty = body_t
            return e.ty
        raise TypeMismatch(f"not an expression: {e!r}", path)

    return go(e)


# ---------------------------------------------------------------------------
# Interpretation


def denote(e, env=None):
    """Call-by-value interpretation with environments; no substitution anywhere."""
    env = dict(env) if env else {}

    def go(e, env):
        if isinstance(e, Var):
            try:
                return env[e.binder]
            except KeyError:
                raise UnboundVar(f"unbound variable {e.binder!r} during evaluation")
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, IdentRef):
            return _ident_value(e.ident)
        if isinstance(e, Abs):
            def closure(v, e=e, env=dict(env)):
                inner = dict(env)
                inner[e.binder] = v
                return go(e.body, inner)
            return closure
        if isinstance(e, App):
            f = go(e.fn, env)
            a = go(e.arg, env)
            return f(a)
        if isinstance(e, LetIn):
            v = go(e.bound, env)
            inner = dict(env)
            inner[e.binder] = v
            return go(e.body, inner)
        raise TypeMismatch(f"not an expression: {e!r}")

    return go(e, env)


def _ident_value(ident_):
    if ident_.kind == "constructor":
        return _constructor_value(ident_)
    if ident_.sem is None:
        raise UninterpretedIdent(f"no semantics for {ident_.key}")
    return ident_.sem


def _constructor_value(ident_):
    fam = ident_.family
    if fam == "nil":
        return []
    if fam == "cons":
        return lambda x: lambda xs: [x] + xs
    if fam == "pair":
        return lambda a: lambda b: (a, b)
    if fam == "some":
        return lambda v: ("some", v)
    if fam == "none":
        return ("none",)
    raise UninterpretedIdent(ident_.key)


def expr_to_value(e):
    """Concrete value of a closed first-order constructor term, or None."""
    if isinstance(e, Lit):
        return e.value
    head, args = app_spine(e)
    if not isinstance(head, IdentRef) or head.ident.kind != "constructor":
        return None
    fam = head.ident.family
    if fam == "nil" and not args:
        return []
    if fam == "cons" and len(args) == 2:
        x = expr_to_value(args[0])
        if x is None:
            return None
        xs = expr_to_value(args[1])
        if xs is None:
            return None
        return [x] + xs
    if fam == "pair" and len(args) == 2:
        a = expr_to_value(args[0])
        b = expr_to_value(args[1])
        if a is None or b is None:
            return None
        return (a, b)
    if fam == "some" and len(args) == 1:
        v = expr_to_value(args[0])
        return None if v is None else ("some", v)
    if fam == "none" and not args:
        return ("none",)
    return None


def value_to_expr(v, bt):
    """Embed a concrete value back into term syntax at base type `bt`."""
    if isinstance(bt, Base):
        bt = bt.base
    if bt in (INT, NAT, BOOL, UNIT):
        return Lit(bt, v)
    if isinstance(bt, Prod):
        return app(IdentRef(ident("pair", bt.left, bt.right)),
                   value_to_expr(v[0], bt.left), value_to_expr(v[1], bt.right))
    if isinstance(bt, ListOf):
        out = IdentRef(ident("nil", bt.elem))
        cons = ident("cons", bt.elem)
        for x in reversed(v):
            out = app(IdentRef(cons), value_to_expr(x, bt.elem), out)
        return out
    if isinstance(bt, OptionOf):
        if v[0] == "none":
            return IdentRef(ident("none", bt.elem))
        return app(IdentRef(ident("some", bt.elem)), value_to_expr(v[1], bt.elem))
    raise TypeMismatch(f"cannot embed value at type {bt!r}")


# ---------------------------------------------------------------------------
# Structural utilities


def alpha_equal(e1, e2):
    """Equality up to consistent renaming of binders (iterative)."""
    stack = [(e1, e2, {}, {})]
    while stack:
        a, b, m_ab, m_ba = stack.pop()
        if type(a) is not type(b):
            return False
        if isinstance(a, Var):
            if m_ab.get(a.binder, a.binder) != b.binder:
                return False
            if m_ba.get(b.binder, b.binder) != a.binder:
                return False
        elif isinstance(a, Lit):
            if a.base != b.base or a.value != b.value:
                return False
        elif isinstance(a, IdentRef):
            if a.ident.key != b.ident.key:
                return False
        elif isinstance(a, App):
            stack.append((a.fn, b.fn, m_ab, m_ba))
            stack.append((a.arg, b.arg, m_ab, m_ba))
        elif isinstance(a, Abs):
            if a.binder_type != b.binder_type:
                return False
            m_ab2 = dict(m_ab)
            m_ba2 = dict(m_ba)
            m_ab2[a.binder] = b.binder
            m_ba2[b.binder] = a.binder
            stack.append((a.body, b.body, m_ab2, m_ba2))
        elif isinstance(a, LetIn):
            stack.append((a.bound, b.bound, m_ab, m_ba))
            m_ab2 = dict(m_ab)
            m_ba2 = dict(m_ba)
            m_ab2[a.binder] = b.binder
            m_ba2[b.binder] = a.binder
            stack.append((a.body, b.body, m_ab2, m_ba2))
        else:
            return False
    return True


def metrics(e):
    """Structural counts.

    node_count uses the spine convention: an application chain headed by an
    identifier counts as one node plus its arguments; every other constructor
    counts one plus its children.
    """
    nodes = 0
    lets = 0
    max_depth = 0
    stack = [(e, 0)]
    while stack:
        e, depth = stack.pop()
        max_depth = max(max_depth, depth)
        if isinstance(e, App):
            head, args = app_spine(e)
            nodes += 1
            if not isinstance(head, IdentRef):
                stack.append((head, depth))
            stack.extend((a, depth) for a in args)
        elif isinstance(e, Abs):
            nodes += 1
            stack.append((e.body, depth + 1))
        elif isinstance(e, LetIn):
            nodes += 1
            lets += 1
            stack.append((e.bound, depth))
            stack.append((e.body, depth + 1))
        else:
            nodes += 1
    return {"node_count": nodes, "let_count": lets, "max_binder_depth": max_depth}


def free_vars(e):
    """Free variables in first-occurrence order, mapped to their types."""
    out = {}
    bound = set()

    def go(e):
        if isinstance(e, Var):
            if e.binder not in bound and e.binder not in out:
                out[e.binder] = e.binder.ty
        elif isinstance(e, App):
            go(e.fn)
            go(e.arg)
        elif isinstance(e, Abs):
            bound.add(e.binder)
            go(e.body)
            bound.discard(e.binder)
        elif isinstance(e, LetIn):
            go(e.bound)
            bound.add(e.binder)
            go(e.body)
            bound.discard(e.binder)

    go(e)
    return out


def expr_size(e):
    """Raw constructor count (every node is 1), used for fuel defaults."""
    n = 0
    stack = [e]
    while stack:
        e = stack.pop()
        n += 1
        if isinstance(e, App):
            stack.append(e.fn)
            stack.append(e.arg)
        elif isinstance(e, Abs):
            stack.append(e.body)
        elif isinstance(e, LetIn):
            stack.append(e.bound)
            stack.append(e.body)
    return n


def copy_fresh(e, mapping=None):
    """Structural copy with all bound binders renamed fresh (free vars kept)."""
    m = dict(mapping) if mapping else {}

    def go(e):
        if isinstance(e, Var):
            return Var(m.get(e.binder, e.binder))
        if isinstance(e, Lit):
            return Lit(e.base, e.value)
        if isinstance(e, IdentRef):
            out = IdentRef(e.ident)
            out.eager = e.eager
            return out
        if isinstance(e, App):
            return App(go(e.fn), go(e.arg))
        if isinstance(e, Abs):
            b2 = fresh_binder(e.binder.hint, e.binder.ty)
            m[e.binder] = b2
            out = Abs(b2, e.binder_type, go(e.body))
            del m[e.binder]
            return out
        if isinstance(e, LetIn):
            bound = go(e.bound)
            b2 = fresh_binder(e.binder.hint, e.binder.ty)
            m[e.binder] = b2
            out = LetIn(b2, bound, go(e.body))
            del m[e.binder]
            return out
        raise TypeMismatch(f"cannot copy {e!r}")

    return go(e)


# delta folding guards against astronomically large constant results
_MAX_FOLD_BITS = 1 << 16
_MAX_FOLD_LEN = 1 << 16


def _delta_size_ok(family, vals):
    if family == "pow":
        if abs(vals[0]) <= 1:
            return True
        return vals[1] * vals[0].bit_length() <= _MAX_FOLD_BITS
    if family == "shiftl":
        return abs(vals[1]) <= _MAX_FOLD_BITS
    if family == "shiftr":
        return vals[1] >= 0 or -vals[1] <= _MAX_FOLD_BITS
    if family in ("seq", "repeat"):
        return vals[1] <= _MAX_FOLD_LEN
    if family == "mul":
        return vals[0].bit_length() + vals[1].bit_length() <= 4 * _MAX_FOLD_BITS
    return True


def try_delta(e):
    """Constant-fold one identifier application on fully concrete arguments.

    Returns the folded expression or None. Applies to first-order primitives,
    clips, and first-order eliminators; higher-order identifiers never fold.
    """
    head, args = app_spine(e)
    if not isinstance(head, IdentRef) or not args:
        return None
    ident_ = head.ident
    if ident_.delta_eval is None or ident_.kind == "constructor":
        return None
    arg_tys, res = arg_types(ident_.signature)
    if len(args) != len(arg_tys):
        return None
    vals = []
    for a in args:
        v = expr_to_value(a)
        if v is None:
            return None
        vals.append(v)
    if not _delta_size_ok(ident_.family, vals):
        return None
    out = ident_.delta_eval(vals)
    return value_to_expr(out, res)
