"""Normalization by evaluation fused with root rewriting.

Reduction interprets terms into semantic values: functions become host
closures, base-typed results become term syntax. Identifier occurrences are
eta-expanded once into thunks that rewrite at the root each time they reach
a fully applied, base-typed position. Let binders are hoisted outward as
reduction proceeds: every in-flight computation appends its bindings to an
ambient telescope buffer, and buffers are pushed/popped at lambda bodies so
bindings never escape their scope.

Rule replacements are instantiated by the same interpreter with rewriting
switched off; fresh redexes they produce are picked up by later passes,
which `again`-flagged rules request (bounded by fuel).
"""

from .errors import TypeMismatch
from . import terms as T
from . import rules as R
from . import matcher as M
from .terms import (App, Abs, Arrow, Base, IdentRef, LetIn, Lit, Var,
                    app_spine, fresh_binder, typecheck)
from .rules import ClipVarApp, NAT_UNROLL_CAP


# ---------------------------------------------------------------------------
# Telescopes


class UnderLets:
    """A telescope of let binders ending in a payload expression."""

    __slots__ = ("binds", "payload")

    def __init__(self, binds, payload):
        self.binds = tuple(binds)  # (binder, type, bound expr), outermost first
        self.payload = payload

    @staticmethod
    def done(payload):
        return UnderLets((), payload)

    @staticmethod
    def bind(binder, ty, bound, rest):
        return UnderLets(((binder, ty, bound),) + rest.binds, rest.payload)

    @property
    def is_done(self):
        return not self.binds

    def splice(self, f):
        """Monadic bind: feed the payload to f, keeping this telescope outside."""
        inner = f(self.payload)
        return UnderLets(self.binds + inner.binds, inner.payload)

    def to_expr(self):
        out = self.payload
        for b, ty, bound in reversed(self.binds):
            node = LetIn(b, bound, out)
            node.ty = getattr(out, "ty", None)
            out = node
        return out

    def __repr__(self):
        return f"UnderLets({len(self.binds)} binds, {self.payload!r})"


def wrap_lets(buf, payload):
    out = payload
    for b, ty, bound in reversed(buf):
        out = LetIn(b, bound, out)
    return out


# ---------------------------------------------------------------------------
# Semantic values


class SemFun:
    __slots__ = ("fn",)

    def __init__(self, fn):
        self.fn = fn

    def __repr__(self):
        return "<semfun>"


class Env:
    """Linked environment; extension is O(1) and never copies."""

    __slots__ = ("binder", "value", "prev")

    def __init__(self, binder, value, prev):
        self.binder = binder
        self.value = value
        self.prev = prev

    def get(self, binder):
        env = self
        while env is not None:
            if env.binder == binder:
                return env.value
            env = env.prev
        return None


def env_extend(env, binder, value):
    return Env(binder, value, env)


# ---------------------------------------------------------------------------
# Instrumentation


class Stats:
    def __init__(self, trace=False):
        self.firings = 0
        self.firings_by_rule = {}
        self.delta_folds = 0
        self.eta_expansions = 0
        self.attempts = 0
        self.head_violations = 0
        self.passes = 0
        self.trace = [] if trace else None

    def note_attempt(self, rule, e):
        self.attempts += 1
        lhs_key = R.pattern_head_key(rule.lhs)
        head, _ = app_spine(e)
        if isinstance(head, IdentRef):
            ek = head.ident.key
            if lhs_key != ek and not (lhs_key == R.CLIP_FAMILY_KEY
                                      and head.ident.kind == "clip"):
                self.head_violations += 1
        elif isinstance(head, Lit):
            if lhs_key != T.lit_key(head.base, head.value):
                self.head_violations += 1

    def note_fired(self, rule, path):
        self.firings += 1
        self.firings_by_rule[rule.name] = self.firings_by_rule.get(rule.name, 0) + 1
        if self.trace is not None:
            self.trace.append((rule.name, "/".join(path)))


# ---------------------------------------------------------------------------
# Inlining heuristic


def inline_heuristic(bound):
    """Decide what to do with a let-bound expression during reduction."""
    if isinstance(bound, (Lit, Var)):
        return "inline"
    head, _ = app_spine(bound)
    if isinstance(head, IdentRef) and head.ident.family in ("cons", "nil"):
        return "name_elements"
    return "keep"


def _var_like(e):
    if isinstance(e, (Lit, Var)):
        return True
    head, args = app_spine(e)
    if isinstance(head, IdentRef) and head.ident.kind == "constructor":
        return all(_var_like(a) for a in args)
    return False


# ---------------------------------------------------------------------------
# The rewriter


class Rewriter:
    def __init__(self, compiled, stats=None, inline_rule=inline_heuristic):
        if isinstance(compiled, R.RuleSet):
            compiled = M.compile_ruleset(compiled)
        self.compiled = compiled
        self.delta = compiled.delta
        self.stats = stats if stats is not None else Stats()
        self.inline_rule = inline_rule
        self.bufs = [[]]
        self.again_flag = False
        self._path = []

    # -- telescope buffers

    def emit(self, binder, ty, bound):
        self.bufs[-1].append((binder, ty, bound))

    def push_buf(self):
        buf = []
        self.bufs.append(buf)
        return buf

    def pop_buf(self):
        return self.bufs.pop()

    # -- root rewriting

    def rewrite_root(self, syn, sem_map=None):
        """At most one rule application (or constant fold) at the root of syn."""
        sel = self.compiled.select(syn, self._instantiate, sem_map=sem_map,
                                   stats=self.stats)
        if sel is not None:
            rule, payload = sel
            self.stats.note_fired(rule, self._path)
            if rule.again:
                self.again_flag = True
            return payload
        if self.delta:
            folded = T.try_delta(syn)
            if folded is not None:
                self.stats.delta_folds += 1
                return folded
        return syn

    # -- reflect / reify

    def reflect(self, syn, ty, rewrite=True, sem_map=None):
        """Semantic view of syntax; at base types, rewriting happens here."""
        if isinstance(ty, Base):
            if rewrite:
                return self.rewrite_root(syn, sem_map)
            folded = T.try_delta(syn)
            if folded is not None:
                self.stats.delta_folds += 1
                return folded
            return syn
        src, dst = ty.src, ty.dst

        def call(x, syn=syn, src=src, dst=dst, sem_map=sem_map):
            arg_syn, arg_sem = self._extract(x, src)
            m = dict(sem_map) if sem_map else {}
            if arg_sem is not None:
                m[id(arg_syn)] = arg_sem
            node = App(syn, arg_syn)
            node.ty = dst
            return self.reflect(node, dst, rewrite, m)

        return SemFun(call)

    def _extract(self, x, ty):
        if isinstance(ty, Base):
            return x, None
        return self.reify(x, ty), x

    def reify(self, v, ty):
        """Read a semantic value back into syntax; lambda bodies capture their lets."""
        if isinstance(ty, Base):
            return v
        src, dst = ty.src, ty.dst
        b = fresh_binder("x", src)
        self.push_buf()
        body_v = self.apply(v, self._var_value(b, src))
        body = self.reify(body_v, dst)
        buf = self.pop_buf()
        out = Abs(b, src, wrap_lets(buf, body))
        out.ty = ty
        return out

    def _var_value(self, b, ty):
        if isinstance(ty, Base):
            return Var(b)
        return self.reflect(Var(b), ty, rewrite=False)

    def apply(self, f, x):
        if not isinstance(f, SemFun):
            raise TypeMismatch(f"applied a non-function value {f!r}")
        return f.fn(x)

    # -- reduction

    def reduce(self, e, env=None, template=False):
        while True:
            if isinstance(e, Var):
                v = env.get(e.binder) if env is not None else None
                if v is None:
                    return self._var_value(e.binder, e.binder.ty)
                return v
            if isinstance(e, Lit):
                if template:
                    return e
                return self.rewrite_root(e)
            if isinstance(e, IdentRef):
                if template and e.eager:
                    return self._eager_collector(e.ident)
                syn = IdentRef(e.ident) if e.eager else e
                if not template and isinstance(e.ty, Arrow):
                    self.stats.eta_expansions += 1
                return self.reflect(syn, e.ident.signature, rewrite=not template)
            if isinstance(e, App):
                f = self.reduce(e.fn, env, template)
                x = self.reduce(e.arg, env, template)
                return self.apply(f, x)
            if isinstance(e, Abs):
                def closure(x, e=e, env=env, template=template):
                    return self.reduce(e.body, env_extend(env, e.binder, x), template)
                return SemFun(closure)
            if isinstance(e, LetIn):
                self._path.append(f"let {e.binder.hint or 'v'}")
                val = self._reduce_binding(e.bound, e.binder, env, template)
                self._path.pop()
                env = env_extend(env, e.binder, val)
                e = e.body
                continue
            if isinstance(e, ClipVarApp):
                if not template:
                    raise TypeMismatch("clip bound variables outside a rule template")
                lo = self._clip_bound(e.lo_spec, env)
                hi = self._clip_bound(e.hi_spec, env)
                arg = self.reduce(e.arg, env, template)
                node = App(IdentRef(T.clip_ident(lo, hi)), arg)
                node.ty = Base(T.INT)
                folded = T.try_delta(node)
                return folded if folded is not None else node
            raise TypeMismatch(f"cannot reduce {e!r}")

    def _clip_bound(self, spec, env):
        if spec[0] == "int":
            return spec[1]
        v = env.get(spec[1]) if env is not None else None
        if not isinstance(v, Lit):
            raise TypeMismatch("clip bound variable did not match a constant")
        return v.value

    def _reduce_binding(self, bound, binder, env, template):
        val = self.reduce(bound, env, template)
        if isinstance(val, SemFun):
            # named function: reify once, reference by name
            syn = self.reify(val, bound.ty if bound.ty else binder.ty)
            b2 = fresh_binder(binder.hint, syn.ty)
            self.emit(b2, syn.ty, syn)
            return self.reflect(Var(b2), syn.ty, rewrite=False)
        decision = self.inline_rule(val)
        if decision == "inline":
            return val
        if decision == "name_elements":
            return self._name_list_elements(val, binder)
        b2 = fresh_binder(binder.hint, val.ty if val.ty is not None else binder.ty)
        self.emit(b2, b2.ty, val)
        out = Var(b2)
        out.ty = b2.ty
        return out

    def _name_list_elements(self, spine, binder):
        """Bind non-atomic elements of a literal list, inlining the spine itself."""
        items = []
        cur = spine
        while True:
            head, args = app_spine(cur)
            if isinstance(head, IdentRef) and head.ident.family == "cons" and len(args) == 2:
                items.append((head.ident, args[0]))
                cur = args[1]
            else:
                break
        tail = cur
        named = []
        for cons_ident, x in items:
            if _var_like(x):
                named.append((cons_ident, x))
            else:
                elem_ty = Base(cons_ident.params[0])
                b = fresh_binder(binder.hint, elem_ty)
                self.emit(b, elem_ty, x)
                v = Var(b)
                v.ty = elem_ty
                named.append((cons_ident, v))
        out = tail
        for cons_ident, x in reversed(named):
            out = T.app(IdentRef(cons_ident), x, out)
        return out

    # -- rule replacement instantiation (rewriting off)

    def _instantiate(self, rule, bindings):
        env = None
        for name, (b, pv) in rule.pvars.items():
            binding = bindings.get(name)
            if binding is None:
                return None
            env = env_extend(env, b, self._binding_value(binding, pv.declared_type))
        return self.reduce(rule.rhs, env, template=True)

    def _binding_value(self, binding, ty):
        if binding.sem is not None:
            return binding.sem
        if isinstance(ty, Base):
            return binding.syn
        if isinstance(binding.syn, Abs):
            return self.reduce(binding.syn, None, template=True)
        return self.reflect(binding.syn, ty, rewrite=False)

    # -- eager eliminator evaluation

    def _eager_collector(self, ident_):
        arity = R.STRUCT_ARITY[ident_.family]

        def collect(args):
            if len(args) == arity:
                return self._finish_eager(ident_, args)
            return SemFun(lambda x: collect(args + [x]))

        return collect([])

    def _finish_eager(self, ident_, args):
        out = self.eager_eval(ident_, args)
        if out is not None:
            return out
        # not concrete: reassemble the plain combinator application
        val = self.reflect(IdentRef(ident_), ident_.signature, rewrite=False)
        for x in args:
            val = self.apply(val, x)
        return val

    def eager_eval(self, ident_, args):
        """Completely unroll a recursion combinator on a concrete scrutinee.

        Returns None (leaving the combinator residual) when the scrutinee's
        constructor spine is not fully concrete.
        """
        fam = ident_.family
        if fam == "nat_rect":
            z, s, n = args
            if not (isinstance(n, Lit) and n.base == T.NAT and n.value <= NAT_UNROLL_CAP):
                return None
            cur = z
            for k in range(n.value):
                cur = self.apply(self.apply(s, Lit(T.NAT, k)), cur)
            return cur
        if fam == "list_rect":
            z, s, ls = args
            items = R._spine_items(ls)
            if items is None:
                return None
            cur = z
            for x, tail in reversed(items):
                cur = self.apply(self.apply(self.apply(s, x), tail), cur)
            return cur
        if fam == "list_case":
            z, s, ls = args
            head, sp = app_spine(ls)
            if isinstance(head, IdentRef) and head.ident.family == "nil":
                return z
            if isinstance(head, IdentRef) and head.ident.family == "cons" and len(sp) == 2:
                return self.apply(self.apply(s, sp[0]), sp[1])
            return None
        if fam == "prod_rect":
            f, p = args
            head, sp = app_spine(p)
            if isinstance(head, IdentRef) and head.ident.family == "pair" and len(sp) == 2:
                return self.apply(self.apply(f, sp[0]), sp[1])
            return None
        if fam == "bool_rect":
            t, f, b = args
            if isinstance(b, Lit) and b.base == T.BOOL:
                return t if b.value else f
            return None
        if fam == "option_rect":
            s, z, o = args
            head, sp = app_spine(o)
            if isinstance(head, IdentRef) and head.ident.family == "some" and len(sp) == 1:
                return self.apply(s, sp[0])
            if isinstance(head, IdentRef) and head.ident.family == "none":
                return z
            return None
        if fam == "nth_default":
            d, ls, k = args
            if not (isinstance(k, Lit) and k.base == T.NAT):
                return None
            items = R._spine_items(ls)
            if items is None:
                return None
            if k.value < len(items):
                return items[k.value][0]
            return d
        return None


# ---------------------------------------------------------------------------
# Top-level operations


def rewrite_head(compiled, e, stats=None):
    """One root-rewriting step: at most one rule application (or fold) at the root."""
    if isinstance(compiled, R.RuleSet):
        compiled = M.compile_ruleset(compiled)
    rw = Rewriter(compiled, stats=stats)
    rw.push_buf()
    payload = rw.rewrite_root(e)
    buf = rw.pop_buf()
    return UnderLets(tuple(buf), payload)


def rewrite_top(compiled, e, fuel=None, stats=None, inline_rule=inline_heuristic):
    """Reduce and rewrite a whole term; `again` rules trigger fuel-bounded re-passes."""
    if isinstance(compiled, R.RuleSet):
        compiled = M.compile_ruleset(compiled)
    ty = typecheck(e, compiled.ruleset.registry)
    if fuel is None:
        fuel = T.expr_size(e) + 1
    elif isinstance(fuel, Fuel):
        fuel = fuel.remaining
    stats = stats if stats is not None else Stats()
    while True:
        rw = Rewriter(compiled, stats=stats, inline_rule=inline_rule)
        if fuel <= 0:
            return e
        rw.push_buf()
        v = rw.reduce(e, None, template=False)
        payload = rw.reify(v, ty)
        buf = rw.pop_buf()
        result = wrap_lets(buf, payload)
        stats.passes += 1
        fuel -= 1
        if not rw.again_flag or fuel <= 0:
            return result
        typecheck(result, compiled.ruleset.registry)
        e = result


class Fuel:
    """Pass budget for `again` re-passes; strictly decreases."""

    __slots__ = ("remaining",)

    def __init__(self, remaining):
        if remaining < 0:
            raise ValueError("fuel must be nonnegative")
        self.remaining = remaining


def reduce_term(compiled, e, stats=None):
    """Single-pass reduce + reify, mainly for tests."""
    if isinstance(compiled, R.RuleSet):
        compiled = M.compile_ruleset(compiled)
    ty = typecheck(e, compiled.ruleset.registry)
    rw = Rewriter(compiled, stats=stats)
    rw.push_buf()
    v = rw.reduce(e, None, template=False)
    payload = rw.reify(v, ty)
    buf = rw.pop_buf()
    return wrap_lets(buf, payload)


# ---------------------------------------------------------------------------
# Output-shape checks used by tests and the benchmark harness


def beta_normal(e):
    """No application of a literal lambda; no let binding a literal or variable."""
    stack = [e]
    while stack:
        cur = stack.pop()
        if isinstance(cur, App):
            if isinstance(cur.fn, Abs):
                return False
            stack.extend((cur.fn, cur.arg))
        elif isinstance(cur, Abs):
            stack.append(cur.body)
        elif isinstance(cur, LetIn):
            if isinstance(cur.bound, (Lit, Var)):
                return False
            stack.extend((cur.bound, cur.body))
    return True


def count_add_zero(e):
    """Occurrences of `x + 0` (either operand) anywhere in the term."""
    n = 0
    stack = [e]
    while stack:
        cur = stack.pop()
        if isinstance(cur, App):
            head, args = app_spine(cur)
            if isinstance(head, IdentRef) and head.ident.family == "add" and len(args) == 2:
                for a in args:
                    if isinstance(a, Lit) and a.value == 0:
                        n += 1
            if not isinstance(head, IdentRef):
                stack.append(head)
            stack.extend(args)
        elif isinstance(cur, Abs):
            stack.append(cur.body)
        elif isinstance(cur, LetIn):
            stack.extend((cur.bound, cur.body))
    return n
