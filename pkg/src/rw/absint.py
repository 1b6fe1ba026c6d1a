"""Interval bounds analysis over integer programs, and clip insertion.

Bounds are half-open: a variable with bounds [l, u) satisfies l <= x < u.
Analysis is a single forward pass over let structure; anything it cannot
bound is top (None). Clip identifiers wrap variable occurrences to carry the
proved bounds into rewrite rules. Clips are restricted to Z-typed terms.
"""

import re
from dataclasses import dataclass

from .errors import ParseError
from . import terms as T
from .terms import (App, Abs, Base, IdentRef, LetIn, Lit, Var, app_spine,
                    clip_ident, INT)


@dataclass(frozen=True)
class Bounds:
    lower: int  # inclusive
    upper: int  # exclusive

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"empty interval [{self.lower}, {self.upper})")

    def contains(self, n):
        return self.lower <= n < self.upper

    def __str__(self):
        return f"[{self.lower}, {self.upper})"


def _corners(xs, ys, op):
    vals = [op(x, y) for x in xs for y in ys]
    return Bounds(min(vals), max(vals) + 1)


def transfer(ident_, arg_bounds):
    """Sound output interval of one primitive, or None for top."""
    if any(b is None for b in arg_bounds):
        return None
    fam = ident_.family
    if fam in ("add", "sub", "mul", "div", "shiftr", "land", "lor"):
        x, y = arg_bounds
        xs = (x.lower, x.upper - 1)
        ys = (y.lower, y.upper - 1)
        if fam == "add":
            return Bounds(x.lower + y.lower, (x.upper - 1) + (y.upper - 1) + 1)
        if fam == "sub":
            return Bounds(x.lower - (y.upper - 1), (x.upper - 1) - y.lower + 1)
        if fam == "mul":
            return _corners(xs, ys, lambda a, b: a * b)
        if fam == "div":
            if y.lower < 1:
                return None  # only positive divisors
            return _corners(xs, ys, lambda a, b: a // b)
        if fam == "shiftr":
            if y.lower < 0:
                return None
            return _corners(xs, ys, lambda a, b: a >> b)
        if fam == "land":
            if x.lower < 0 or y.lower < 0:
                return None
            return Bounds(0, min(x.upper, y.upper))
        if fam == "lor":
            if x.lower < 0 or y.lower < 0:
                return None
            hi = max(x.upper - 1, y.upper - 1)
            return Bounds(max(x.lower, y.lower), 1 << hi.bit_length())
    if fam == "clip":
        lo, hi = ident_.params
        return Bounds(lo, hi)
    return None


def bounds_of(e, env):
    """Interval for an integer-typed expression under the abstract environment."""
    if isinstance(e, Var):
        return env.get(e.binder)
    if isinstance(e, Lit):
        if e.base in (T.INT, T.NAT):
            return Bounds(e.value, e.value + 1)
        return None
    if isinstance(e, LetIn):
        inner = dict(env)
        b = bounds_of(e.bound, env)
        if b is not None:
            inner[e.binder] = b
        return bounds_of(e.body, inner)
    head, args = app_spine(e)
    if isinstance(head, IdentRef):
        if head.ident.kind == "clip" and len(args) == 1:
            lo, hi = head.ident.params
            return Bounds(lo, hi)  # saturation keeps any input inside
        if len(args) == head.ident.arity():
            return transfer(head.ident, [bounds_of(a, env) for a in args])
    return None


def infer_and_clip(e, input_bounds, clip_constants=False):
    """Wrap bounded integer variable occurrences in their clip identifiers.

    Let-bound integers with inferable bounds get their occurrences wrapped
    too. The output denotes identically to the input whenever the free
    variables respect input_bounds.
    """
    env = dict(input_bounds)

    def wrap(var_node, b):
        out = App(IdentRef(clip_ident(b.lower, b.upper)), var_node)
        out.ty = Base(INT)
        return out

    def is_int(node):
        ty = node.ty if node.ty is not None else (node.binder.ty if isinstance(node, Var) else None)
        return ty == Base(INT)

    def go(e, env):
        if isinstance(e, Var):
            b = env.get(e.binder)
            if b is not None and is_int(e):
                return wrap(Var(e.binder), b)
            return e
        if isinstance(e, Lit):
            if clip_constants and e.base == INT:
                return wrap(e, Bounds(e.value, e.value + 1))
            return e
        if isinstance(e, IdentRef):
            return e
        if isinstance(e, App):
            head, args = app_spine(e)
            if isinstance(head, IdentRef) and head.ident.kind == "clip" \
                    and len(args) == 1 and isinstance(args[0], (Var, Lit)):
                return e  # already carries its fact; never re-wrap
            fn = go(e.fn, env)
            arg = go(e.arg, env)
            out = App(fn, arg)
            out.ty = e.ty
            return out
        if isinstance(e, Abs):
            out = Abs(e.binder, e.binder_type, go(e.body, env))
            out.ty = e.ty
            return out
        if isinstance(e, LetIn):
            b = bounds_of(e.bound, env)
            bound2 = go(e.bound, env)
            inner = env
            if b is not None and e.binder.ty == Base(INT):
                inner = dict(env)
                inner[e.binder] = b
            out = LetIn(e.binder, bound2, go(e.body, inner))
            out.ty = e.ty
            return out
        raise TypeError(f"cannot analyse {e!r}")

    return go(e, env)


# ---------------------------------------------------------------------------
# Bounds files: one `NAME in [LO, HI)` per line, with 2^k sugar

_BOUND_LINE = re.compile(
    r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s+in\s+\[([^,]+),([^)]+)\)\s*$")


def _bound_int(text):
    text = text.strip()
    m = re.fullmatch(r"(-?\d+)\s*\^\s*(\d+)\s*([+-]\s*\d+)?", text)
    if m:
        v = int(m.group(1)) ** int(m.group(2))
        if m.group(3):
            v += int(m.group(3).replace(" ", ""))
        return v
    return int(text)


def parse_bounds(text):
    """Parse a bounds file into {variable name -> Bounds}."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("--")[0].strip()
        if not line:
            continue
        m = _BOUND_LINE.match(line)
        if m is None:
            raise ParseError(f"bad bounds line: {line!r}", lineno, 1)
        name, lo, hi = m.groups()
        out[name] = Bounds(_bound_int(lo), _bound_int(hi))
    return out
