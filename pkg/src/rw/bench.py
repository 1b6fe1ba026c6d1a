"""Benchmark term generators, rule sets per suite, timing harness, CSV output."""

import csv
import statistics
import time
from dataclasses import dataclass, field

from .errors import BenchTimeout, FuelExhausted
from . import terms as T
from . import rules as R
from . import matcher as M
from . import engine as E
from . import oracle as O
from .deep import run_deep
from .terms import (App, Abs, Base, IdentRef, LetIn, Lit, Var, app,
                    fresh_binder, ident, INT, NAT, ListOf, Prod)

SUITES = ("plus0tree", "underletsplus0", "liftletsmap", "sieve")


@dataclass
class BenchCase:
    suite: str
    params: dict
    strategy: str = "engine"

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}")
        if self.strategy not in ("engine", "oracle"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        for k, v in self.params.items():
            if v <= 0 and not (self.suite == "plus0tree" and v == 0):
                raise ValueError(f"parameter {k}={v} must be positive")


@dataclass
class BenchRow:
    suite: str
    params: dict
    strategy: str
    wall_time_seconds: float
    node_count_in: int
    node_count_out: int
    let_count_out: int
    rewrite_firings: int


# ---------------------------------------------------------------------------
# Term generators

_Z = Base(INT)


def gen_plus0tree(n, m, v=None):
    """A depth-n doubling tree where every node carries m useless +0 sites."""
    if v is None:
        v = fresh_binder("v", _Z)
    plus = IdentRef(ident("add", INT))
    zero = Lit(INT, 0)

    def iter_m(x):
        for _ in range(m):
            x = app(plus, x, Lit(INT, 0))
        return x

    tree = iter_m(app(plus, Var(v), Var(v)))
    for _ in range(n):
        tree = iter_m(app(plus, tree, tree))
    return tree


def gen_underletsplus0(n, v0=None):
    """n nested lets, each bound to prev+prev+0, ending in last+last+0."""
    if v0 is None:
        v0 = fresh_binder("v0", _Z)
    plus = IdentRef(ident("add", INT))

    def body_of(b):
        return app(plus, app(plus, Var(b), Var(b)), Lit(INT, 0))

    binders = [v0]
    for k in range(1, n + 1):
        binders.append(fresh_binder(f"v{k}", _Z))
    out = body_of(binders[n])
    for k in range(n, 0, -1):
        out = LetIn(binders[k], body_of(binders[k - 1]), out)
    return out


_MAP_DBL_SRC = """
λ (l : list Z) .
  list_rect ([] : list Z)
    (λ (h : Z) (t : list Z) (r : list Z) . let y := h + h in y :: r)
    l
"""


def gen_liftletsmap(n, m, v=None):
    """m-fold application of a let-introducing per-element doubler to [v; ...; v]."""
    if v is None:
        v = fresh_binder("v", _Z)
    from .syntax import parse_term
    spine = IdentRef(ident("nil", INT))
    cons = IdentRef(ident("cons", INT))
    for _ in range(n):
        spine = app(cons, Var(v), spine)
    out = spine
    for _ in range(m):
        out = App(T.copy_fresh(parse_term(_MAP_DBL_SRC)), out)
    return out


_SIEVE_SRC = """
rev (fst (nat_rect
  (λ (st : (list Z * list N) * N) . fst st)
  (λ (_ : N) (rec : ((list Z * list N) * N) -> list Z * list N)
     (st : (list Z * list N) * N) .
     rec (prod_rect
            (λ (pc : list Z * list N) (np : N) .
               prod_rect
                 (λ (primes : list Z) (composites : list N) .
                    bool_rect
                      ((primes, composites), succ np)
                      ((to_int np :: primes,
                        fold_right
                          (λ (x : N) (s : list N) .
                             list_rect [x]
                               (λ (h : N) (t : list N) (r : list N) .
                                  bool_rect (x :: h :: t)
                                            (bool_rect (h :: t) (h :: r) (x == h))
                                            (x < h))
                               s)
                          composites
                          (map (λ (k : N) . k * np) (seq 1n ({limit}n / np)))),
                       succ np)
                      (list_rect false
                                 (λ (h : N) (t : list N) (r : B) . (np == h) || r)
                                 composites
                       || to_int np > {limit}))
                 pc)
            st))
  {limit}n
  ((([] : list Z), ([] : list N)), 2n)))
"""


def gen_sieve(limit):
    """Closed program listing the primes up to `limit` (sets as sorted N lists)."""
    if limit < 2:
        raise ValueError("limit must be at least 2")
    from .syntax import parse_term
    return parse_term(_SIEVE_SRC.format(limit=limit))


# ---------------------------------------------------------------------------
# Rule sets per suite


def _arith_only_text(delta=False):
    lines = (["options: delta"] if delta else []) + R.arith_rules()
    return "\n".join(lines) + "\n"


_SIEVE_STATE = Base(Prod(Prod(ListOf(INT), ListOf(NAT)), NAT))
_SIEVE_OUT = Base(Prod(ListOf(INT), ListOf(NAT)))


def _sieve_rules_text():
    lines = ["options: delta",
             "extra idents: seq, eqb, ltb, gtb, or, to_int, div, mul, succ"]
    lines += R.fst_snd_rules(Base(ListOf(INT)), Base(ListOf(NAT)))
    lines += R.fst_snd_rules(_SIEVE_OUT, Base(NAT))
    lines += R.eval_nat_rect_rules(T.Arrow(_SIEVE_STATE, _SIEVE_OUT))
    lines += R.eval_prod_rect_rules(_SIEVE_OUT, Base(NAT), _SIEVE_OUT)
    lines += R.eval_prod_rect_rules(_SIEVE_OUT, Base(NAT), _SIEVE_STATE)
    lines += R.eval_prod_rect_rules(Base(ListOf(INT)), Base(ListOf(NAT)), _SIEVE_STATE)
    lines += R.eval_bool_rect_rules(_SIEVE_STATE)
    lines += R.eval_bool_rect_rules(Base(ListOf(NAT)))
    lines += R.eval_list_rect_rules(Base(NAT), Base(T.BOOL))
    lines += R.eval_list_rect_rules(Base(NAT), Base(ListOf(NAT)))
    lines += R.eval_fold_right_rules(Base(NAT), Base(ListOf(NAT)))
    lines += R.eval_map_rules(Base(NAT), Base(NAT))
    lines += R.eval_rev_rules(Base(INT))
    return "\n".join(lines) + "\n"


def ruleset_text_for_suite(suite):
    if suite == "plus0tree":
        return _arith_only_text(delta=False)
    if suite == "underletsplus0":
        return _arith_only_text(delta=False)
    if suite == "liftletsmap":
        text = "extra idents: add\n" + "\n".join(
            R.eval_list_rect_rules(INT, Base(ListOf(INT)))
            + R.eval_repeat_rules(_Z)) + "\n"
        return R.delegation_closure(text)
    if suite == "sieve":
        return R.delegation_closure(_sieve_rules_text())
    raise ValueError(suite)


def ruleset_for_suite(suite):
    return R.parse_rules(ruleset_text_for_suite(suite))


def term_for_case(case):
    p = case.params
    if case.suite == "plus0tree":
        return gen_plus0tree(p["n"], p["m"])
    if case.suite == "underletsplus0":
        return gen_underletsplus0(p["n"])
    if case.suite == "liftletsmap":
        return gen_liftletsmap(p["n"], p["m"])
    if case.suite == "sieve":
        return gen_sieve(p["limit"])
    raise ValueError(case.suite)


# ---------------------------------------------------------------------------
# Harness


def _time_once(case, compiled, ruleset, term):
    stats = E.Stats()
    t0 = time.perf_counter()
    if case.strategy == "engine":
        out = E.rewrite_top(compiled, term, stats=stats)
    elif case.suite == "sieve":
        value = O.full_eval(term)
        out = T.value_to_expr(value, Base(ListOf(INT)))
    else:
        out = O.naive_rewrite(ruleset, term, fuel=10_000_000)
    dt = time.perf_counter() - t0
    return dt, out, stats


def run_bench(case, repeats=5, timeout=None):
    """Median wall time over repeats; counts from the final run."""
    ruleset = ruleset_for_suite(case.suite)
    t0 = time.perf_counter()
    compiled = M.compile_ruleset(ruleset)
    compile_seconds = time.perf_counter() - t0

    def work():
        times = []
        out = stats = None
        term = None
        for _ in range(max(1, repeats)):
            term = term_for_case(case)  # fresh binders per run
            dt, out, stats = _time_once(case, compiled, ruleset, term)
            times.append(dt)
        met_in = T.metrics(term)
        met_out = T.metrics(out)
        return BenchRow(
            suite=case.suite,
            params=dict(case.params),
            strategy=case.strategy,
            wall_time_seconds=statistics.median(times),
            node_count_in=met_in["node_count"],
            node_count_out=met_out["node_count"],
            let_count_out=met_out["let_count"],
            rewrite_firings=stats.firings if stats else 0,
        ), compile_seconds

    row, compile_seconds = run_deep(work, timeout=timeout)
    row.compile_seconds = compile_seconds  # reported separately, not a CSV column
    return row


CSV_COLUMNS = ["suite", "params", "strategy", "wall_time_seconds",
               "node_count_in", "node_count_out", "let_count_out",
               "rewrite_firings"]


def emit_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            params = ";".join(f"{k}={v}" for k, v in sorted(r.params.items()))
            w.writerow([r.suite, params, r.strategy,
                        f"{r.wall_time_seconds:.6f}", r.node_count_in,
                        r.node_count_out, r.let_count_out, r.rewrite_firings])


def parse_params(text):
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        k, _, v = part.partition("=")
        out[k.strip()] = int(v.strip())
    return out
