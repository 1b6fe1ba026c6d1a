"""Pattern-match compilation to decision trees and root rewriting support.

A rule set's left-hand sides compile into one decision tree (TryLeaf /
Failure / Switch / Swap) over vectors of subterms. The tree is only a
decomposition hint: when it reaches a TryLeaf, the candidate rule's pattern
is matched directly against the root term to produce bindings, so a wrong
hint can only cost time, never soundness.
"""

from .errors import FuelExhausted
from . import terms as T
from . import rules as R
from .terms import App, IdentRef, Lit, app_spine, lit_key
from .rules import (ClipPat, ConstVar, PApp, PIdent, Pattern, Wildcard,
                    CLIP_FAMILY_KEY)

COMPILE_BUDGET = 1_000_000


# ---------------------------------------------------------------------------
# Decision trees


class DecisionTree:
    __slots__ = ()


class Failure(DecisionTree):
    __slots__ = ()

    def __eq__(self, other):
        return isinstance(other, Failure)

    def __hash__(self):
        return hash("Failure")

    def __repr__(self):
        return "Failure"


FAILURE = Failure()


class TryLeaf(DecisionTree):
    __slots__ = ("k", "onfailure")

    def __init__(self, k, onfailure):
        self.k = k
        self.onfailure = onfailure

    def __eq__(self, other):
        return isinstance(other, TryLeaf) and other.k == self.k \
            and other.onfailure == self.onfailure

    def __repr__(self):
        return f"TryLeaf({self.k}, {self.onfailure!r})"


class Switch(DecisionTree):
    __slots__ = ("icases", "app_case", "default")

    def __init__(self, icases, app_case, default):
        self.icases = icases
        self.app_case = app_case
        self.default = default

    def __eq__(self, other):
        return isinstance(other, Switch) and other.icases == self.icases \
            and other.app_case == self.app_case and other.default == self.default

    def __repr__(self):
        return f"Switch({self.icases!r}, app={self.app_case!r}, default={self.default!r})"


class Swap(DecisionTree):
    __slots__ = ("i", "cont")

    def __init__(self, i, cont):
        self.i = i
        self.cont = cont

    def __eq__(self, other):
        return isinstance(other, Swap) and other.i == self.i and other.cont == self.cont

    def __repr__(self):
        return f"Swap(0<->{self.i}, {self.cont!r})"


_ANON = Wildcard(R.PatternVar("_", None))


def _is_wildish(p):
    return isinstance(p, (Wildcard, ConstVar, ClipPat))


def compile_rewrites(patterns):
    """Compile ordered left-hand sides into one decision tree."""
    rows = [(tuple([p]), k) for k, p in enumerate(patterns)]
    budget = [COMPILE_BUDGET]
    return _compile(rows, budget)


def _compile(rows, budget):
    budget[0] -= 1
    if budget[0] <= 0:
        raise FuelExhausted("decision-tree compilation exceeded its budget")
    if not rows:
        return FAILURE
    pats0, k0 = rows[0]
    if all(_is_wildish(p) for p in pats0):
        return TryLeaf(k0, _compile(rows[1:], budget))
    col = _pick_column(rows)
    if col != 0:
        swapped = [(_swap(pats, col), k) for pats, k in rows]
        return Swap(col, _compile(swapped, budget))
    # gather rigid head keys in first-seen order
    keys = []
    saw_app = False
    for pats, _ in rows:
        p = pats[0]
        if isinstance(p, PIdent):
            if p.key not in keys:
                keys.append(p.key)
        elif isinstance(p, PApp):
            saw_app = True
    icases = {}
    for key in keys:
        is_lit_key = isinstance(key, tuple)
        is_clip_key = isinstance(key, str) and key.startswith("clip@")
        sub = []
        for pats, k in rows:
            p = pats[0]
            if isinstance(p, PIdent) and p.key == key:
                sub.append((pats[1:], k))
            elif isinstance(p, Wildcard):
                sub.append((pats[1:], k))
            elif isinstance(p, ConstVar) and is_lit_key:
                sub.append((pats[1:], k))
            elif isinstance(p, ClipPat) and is_clip_key:
                sub.append((pats[1:], k))
        icases[key] = _compile(sub, budget)
    app_case = None
    if saw_app:
        sub = []
        for pats, k in rows:
            p = pats[0]
            if isinstance(p, PApp):
                sub.append(((p.fn, p.arg) + pats[1:], k))
            elif isinstance(p, Wildcard):
                sub.append(((_ANON, _ANON) + pats[1:], k))
        app_case = _compile(sub, budget)
    default = _compile([(pats, k) for pats, k in rows if _is_wildish(pats[0])], budget)
    return Switch(icases, app_case, default)


def _pick_column(rows):
    width = len(rows[0][0])
    for col in range(width):
        if any(not _is_wildish(pats[col]) for pats, _ in rows):
            return col
    raise AssertionError("no rigid column in a non-wild matrix")


def _swap(pats, i):
    out = list(pats)
    out[0], out[i] = out[i], out[0]
    return tuple(out)


# ---------------------------------------------------------------------------
# Tree evaluation


def _head_key(e):
    if isinstance(e, IdentRef):
        return e.ident.key
    if isinstance(e, Lit):
        return lit_key(e.base, e.value)
    return None


def eval_decision_tree(tree, exprs, try_rule, bind=None):
    """Walk the tree over a vector of subterms; first successful try wins.

    try_rule(k, bindings) returns a result or None. When `bind` is given it
    computes the bindings for candidate rule k (returning None to veto the
    candidate); otherwise bindings are passed through as None.
    """
    if isinstance(tree, Failure):
        return None
    if isinstance(tree, TryLeaf):
        bindings = None
        vetoed = False
        if bind is not None:
            bindings = bind(tree.k)
            vetoed = bindings is None
        if not vetoed:
            r = try_rule(tree.k, bindings)
            if r is not None:
                return r
        return eval_decision_tree(tree.onfailure, exprs, try_rule, bind)
    if isinstance(tree, Swap):
        vec = list(exprs)
        vec[0], vec[tree.i] = vec[tree.i], vec[0]
        return eval_decision_tree(tree.cont, tuple(vec), try_rule, bind)
    if isinstance(tree, Switch):
        if not exprs:
            return None
        e0 = exprs[0]
        key = _head_key(e0)
        if key is not None:
            branch = tree.icases.get(key)
            if branch is None and isinstance(e0, IdentRef) and e0.ident.kind == "clip":
                branch = tree.icases.get(CLIP_FAMILY_KEY)
            if branch is not None:
                r = eval_decision_tree(branch, exprs[1:], try_rule, bind)
                if r is not None:
                    return r
                # a failed branch falls through to the default
                return eval_decision_tree(tree.default, exprs, try_rule, bind)
            return eval_decision_tree(tree.default, exprs, try_rule, bind)
        if isinstance(e0, App) and tree.app_case is not None:
            r = eval_decision_tree(tree.app_case, (e0.fn, e0.arg) + tuple(exprs[1:]),
                                   try_rule, bind)
            if r is not None:
                return r
            return eval_decision_tree(tree.default, exprs, try_rule, bind)
        return eval_decision_tree(tree.default, exprs, try_rule, bind)
    raise TypeError(f"not a decision tree: {tree!r}")


def compile_tree_to_fn(tree):
    """Specialize the generic evaluator into nested closures for one tree."""
    if isinstance(tree, Failure):
        return lambda exprs, try_rule, bind: None
    if isinstance(tree, TryLeaf):
        k = tree.k
        onfail = compile_tree_to_fn(tree.onfailure)

        def leaf(exprs, try_rule, bind):
            bindings = None
            if bind is not None:
                bindings = bind(k)
                if bindings is None:
                    return onfail(exprs, try_rule, bind)
            r = try_rule(k, bindings)
            if r is not None:
                return r
            return onfail(exprs, try_rule, bind)
        return leaf
    if isinstance(tree, Swap):
        i = tree.i
        cont = compile_tree_to_fn(tree.cont)

        def swap(exprs, try_rule, bind):
            vec = list(exprs)
            vec[0], vec[i] = vec[i], vec[0]
            return cont(tuple(vec), try_rule, bind)
        return swap
    if isinstance(tree, Switch):
        icases = {k: compile_tree_to_fn(v) for k, v in tree.icases.items()}
        app_case = compile_tree_to_fn(tree.app_case) if tree.app_case is not None else None
        default = compile_tree_to_fn(tree.default)

        def switch(exprs, try_rule, bind):
            if not exprs:
                return None
            e0 = exprs[0]
            key = _head_key(e0)
            if key is not None:
                branch = icases.get(key)
                if branch is None and isinstance(e0, IdentRef) and e0.ident.kind == "clip":
                    branch = icases.get(CLIP_FAMILY_KEY)
                if branch is not None:
                    r = branch(exprs[1:], try_rule, bind)
                    if r is not None:
                        return r
                return default(exprs, try_rule, bind)
            if isinstance(e0, App) and app_case is not None:
                r = app_case((e0.fn, e0.arg) + tuple(exprs[1:]), try_rule, bind)
                if r is not None:
                    return r
                return default(exprs, try_rule, bind)
            return default(exprs, try_rule, bind)
        return switch
    raise TypeError(f"not a decision tree: {tree!r}")


# ---------------------------------------------------------------------------
# Direct pattern matching (used at leaves and by tests)


class Binding:
    """One matched subterm: its syntax, plus a semantic view when available."""

    __slots__ = ("syn", "sem")

    def __init__(self, syn, sem=None):
        self.syn = syn
        self.sem = sem

    def __repr__(self):
        return f"Binding({self.syn!r})"


def match_pattern(pat, e, sem_map=None):
    """Match a pattern against a term; returns {var name -> Binding} or None."""
    out = {}
    if _match(pat, e, out, sem_map or {}):
        return out
    return None


def _match(pat, e, out, sem_map):
    if isinstance(pat, Wildcard):
        out[pat.var.name] = Binding(e, sem_map.get(id(e)))
        return True
    if isinstance(pat, ConstVar):
        if not isinstance(e, Lit):
            return False
        declared = pat.var.declared_type
        if isinstance(declared, T.Base) and declared.base != e.base:
            return False
        out[pat.var.name] = Binding(e, sem_map.get(id(e)))
        return True
    if isinstance(pat, PIdent):
        if pat.lit is not None:
            return isinstance(e, Lit) and e.base == pat.lit[0] and e.value == pat.lit[1]
        return isinstance(e, IdentRef) and e.ident.key == pat.key
    if isinstance(pat, ClipPat):
        if not (isinstance(e, IdentRef) and e.ident.kind == "clip"):
            return False
        lo, hi = e.ident.params
        if pat.lo_var is not None:
            out[pat.lo_var.name] = Binding(Lit(T.INT, lo))
        if pat.hi_var is not None:
            out[pat.hi_var.name] = Binding(Lit(T.INT, hi))
        return True
    if isinstance(pat, PApp):
        if not isinstance(e, App):
            return False
        return _match(pat.fn, e.fn, out, sem_map) and _match(pat.arg, e.arg, out, sem_map)
    raise TypeError(f"not a pattern: {pat!r}")


# ---------------------------------------------------------------------------
# Rule application


def rewrite_with_rule(rule, bindings, instantiate):
    """Apply one rule to already-matched bindings.

    Evaluates the side condition on constant bindings, refuses eager
    delegations whose scrutinee is not concrete, then instantiates the
    replacement. Returns None when the rule does not apply.
    """
    if bindings is None:
        return None
    if rule.delegation is not None and not _delegation_ready(rule, bindings):
        return None
    if rule.cond is not None:
        lits = {}
        for name, (b, pv) in rule.pvars.items():
            if pv.const:
                binding = bindings.get(name)
                if binding is None or not isinstance(binding.syn, Lit):
                    return None
                lits[name] = binding.syn.value
        if not R.eval_condition(rule, lits):
            return None
    return instantiate(rule, bindings)


NAT_UNROLL_CAP = R.NAT_UNROLL_CAP


def spine_concrete(e):
    """Is this term a fully concrete constructor spine (shape-wise)?"""
    if isinstance(e, Lit):
        return True
    head, args = app_spine(e)
    if not isinstance(head, IdentRef):
        return False
    fam = head.ident.family
    if fam == "nil" and not args:
        return True
    if fam == "cons" and len(args) == 2:
        return spine_concrete(args[1])
    if fam == "pair" and len(args) == 2:
        return True
    if fam == "some" and len(args) == 1:
        return True
    if fam == "none" and not args:
        return True
    return False


def _delegation_ready(rule, bindings):
    head, pargs = R._pattern_spine(rule.lhs)
    for pos in rule.delegation:
        pat = pargs[pos]
        binding = bindings.get(pat.var.name)
        if binding is None:
            return False
        syn = binding.syn
        if isinstance(syn, Lit):
            if syn.base == T.NAT and syn.value > NAT_UNROLL_CAP:
                return False
            continue
        if not spine_concrete(syn):
            return False
    return True


# ---------------------------------------------------------------------------
# Compiled rule sets


class CompiledRules:
    """A rule set with its compiled decision tree (and optional closure form)."""

    def __init__(self, ruleset, use_closures=False):
        self.ruleset = ruleset
        self.rules = ruleset.rules
        self.delta = ruleset.delta
        self.tree = compile_rewrites([r.lhs for r in ruleset.rules])
        self.tree_fn = compile_tree_to_fn(self.tree) if use_closures else None

    def select(self, e, instantiate, sem_map=None, stats=None):
        """Rewrite at the root of e; returns (rule, instantiated result) or None."""
        rules = self.rules

        def bind(k):
            return match_pattern(rules[k].lhs, e, sem_map)

        def attempt(k, bindings):
            if stats is not None:
                stats.note_attempt(rules[k], e)
            r = rewrite_with_rule(rules[k], bindings, instantiate)
            if r is None:
                return None
            return (rules[k], r)

        vec = (e,)
        if self.tree_fn is not None:
            return self.tree_fn(vec, attempt, bind)
        return eval_decision_tree(self.tree, vec, attempt, bind)


def compile_ruleset(ruleset, use_closures=False):
    return CompiledRules(ruleset, use_closures=use_closures)


# ---------------------------------------------------------------------------
# Tree dumping


def _key_label(key):
    if isinstance(key, tuple):
        return f"Literal {key[2]} : {key[1]}"
    return str(key)


def dump_tree(tree, indent=0):
    pad = "  " * indent
    if isinstance(tree, Failure):
        return f"{pad}Failure\n"
    if isinstance(tree, TryLeaf):
        out = f"{pad}TryLeaf {tree.k}\n"
        if not isinstance(tree.onfailure, Failure):
            out += f"{pad}onfailure:\n" + dump_tree(tree.onfailure, indent + 1)
        return out
    if isinstance(tree, Swap):
        return f"{pad}Swap 0<->{tree.i}\n" + dump_tree(tree.cont, indent + 1)
    if isinstance(tree, Switch):
        out = f"{pad}Switch\n"
        for key, sub in tree.icases.items():
            out += f"{pad}  case {_key_label(key)}:\n" + dump_tree(sub, indent + 2)
        if tree.app_case is not None:
            out += f"{pad}  case App:\n" + dump_tree(tree.app_case, indent + 2)
        if not isinstance(tree.default, Failure):
            out += f"{pad}  default:\n" + dump_tree(tree.default, indent + 2)
        return out
    raise TypeError(f"not a decision tree: {tree!r}")


def tree_to_dot(tree):
    lines = ["digraph decision_tree {", "  node [shape=circle];"]
    counter = [0]

    def node(label, shape="circle"):
        counter[0] += 1
        nid = f"n{counter[0]}"
        lines.append(f'  {nid} [label="{label}", shape={shape}];')
        return nid

    def walk(t):
        if isinstance(t, Failure):
            return node("Fail", "plaintext")
        if isinstance(t, TryLeaf):
            nid = node(f"TryLeaf {t.k}", "box")
            if not isinstance(t.onfailure, Failure):
                sub = walk(t.onfailure)
                lines.append(f'  {nid} -> {sub} [label="onfailure"];')
            return nid
        if isinstance(t, Swap):
            nid = node(f"Swap 0<->{t.i}", "box")
            sub = walk(t.cont)
            lines.append(f"  {nid} -> {sub};")
            return nid
        if isinstance(t, Switch):
            nid = node("")
            for key, s in t.icases.items():
                sub = walk(s)
                lines.append(f'  {nid} -> {sub} [label="{_key_label(key)}"];')
            if t.app_case is not None:
                sub = walk(t.app_case)
                lines.append(f'  {nid} -> {sub} [label="App"];')
            if not isinstance(t.default, Failure):
                sub = walk(t.default)
                lines.append(f'  {nid} -> {sub} [label="default"];')
            return nid
        raise TypeError(t)

    walk(tree)
    lines.append("}")
    return "\n".join(lines) + "\n"
