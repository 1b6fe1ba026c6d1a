"""Command-line interface: rewrite, oracle, bench, demo."""

import argparse
import sys

from . import terms as T
from . import rules as R
from . import matcher as M
from . import engine as E
from . import oracle as O
from . import absint as A
from . import bench as B
from .deep import run_deep
from .errors import RwError, FuelExhausted
from .syntax import parse_term, print_term


def _load_rules(spec):
    if spec == "prelude":
        return R.prelude()
    for suite in B.SUITES:
        if spec == f"suite:{suite}":
            return B.ruleset_for_suite(suite)
    with open(spec) as fh:
        return R.parse_rules(fh.read())


def _read(path):
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def parse_term_file(text, registry=None):
    """Term files may open with `vars NAME : TYPE [, NAME : TYPE ...]` lines."""
    from .syntax import Parser, tokenize, zonk, _as_obj
    var_env = {}
    lines = text.splitlines()
    body_at = 0
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped or stripped.startswith("--"):
            body_at = i + 1
            continue
        if stripped.startswith("vars ") or stripped == "vars":
            decls = stripped[4:].strip()
            p = Parser(tokenize(decls))
            while p.peek().kind != "eof":
                nm = p.next()
                p.expect(":")
                start = p.i
                depth = 0
                while p.peek().kind != "eof" and not (p.peek().text == "," and depth == 0):
                    if p.peek().text == "(":
                        depth += 1
                    elif p.peek().text == ")":
                        depth -= 1
                    p.next()
                sub = Parser(p.toks[start:p.i] + [p.toks[-1]])
                ty = zonk(_as_obj(sub.parse_type()), f"vars {nm.text}")
                var_env[nm.text] = T.fresh_binder(nm.text, ty)
                if p.peek().text == ",":
                    p.next()
            body_at = i + 1
        else:
            break
    body = "\n".join(lines[body_at:])
    return parse_term(body, registry=registry, var_env=var_env), var_env


def cmd_rewrite(args):
    ruleset = _load_rules(args.rules)
    if args.no_delta:
        ruleset.delta = False
    compiled = M.compile_ruleset(ruleset, use_closures=args.closures)
    if args.dump_decision_tree:
        sys.stdout.write(M.dump_tree(compiled.tree))
        if args.dot:
            sys.stdout.write(M.tree_to_dot(compiled.tree))
        return 0
    term, var_env = parse_term_file(_read(args.term), ruleset.registry)
    if args.absint:
        bounds = A.parse_bounds(_read(args.absint))
        env = {}
        for name, b in bounds.items():
            if name not in var_env:
                raise RwError(f"bounds given for unknown variable {name!r}")
            env[var_env[name]] = b
        T.typecheck(term, ruleset.registry)
        term = A.infer_and_clip(term, env, clip_constants=args.clip_constants)
    stats = E.Stats(trace=args.trace)
    out = run_deep(E.rewrite_top, compiled, term, fuel=args.fuel, stats=stats)
    print(run_deep(print_term, out))
    if args.trace:
        for name, path in stats.trace:
            print(f"-- fired {name} at {path or '<root>'}", file=sys.stderr)
        print(f"-- passes={stats.passes} firings={stats.firings} "
              f"folds={stats.delta_folds}", file=sys.stderr)
    return 0


def cmd_oracle(args):
    ruleset = _load_rules(args.rules)
    term, _ = parse_term_file(_read(args.term), ruleset.registry)
    try:
        out = run_deep(O.naive_rewrite, ruleset, term, fuel=args.fuel)
    except FuelExhausted as ex:
        print(f"-- fuel exhausted; printing partial result", file=sys.stderr)
        out = ex.partial
    print(run_deep(print_term, out))
    return 0


def cmd_bench(args):
    cases = []
    params = B.parse_params(args.params)
    cases.append(B.BenchCase(args.suite, params, args.strategy))
    rows = []
    if args.parallel and len(cases) > 1:
        import multiprocessing as mp
        with mp.Pool(args.parallel) as pool:
            rows = pool.starmap(B.run_bench, [(c, args.repeats, args.timeout)
                                              for c in cases])
    else:
        for c in cases:
            row = B.run_bench(c, repeats=args.repeats, timeout=args.timeout)
            rows.append(row)
    for row in rows:
        extra = f" (rules compiled in {getattr(row, 'compile_seconds', 0.0):.3f}s, untimed)"
        print(f"{row.suite} {row.params} {row.strategy}: "
              f"{row.wall_time_seconds:.6f}s, out nodes={row.node_count_out}, "
              f"lets={row.let_count_out}, firings={row.rewrite_firings}{extra}")
    if args.csv:
        B.emit_csv(rows, args.csv)
        print(f"wrote {args.csv}")
    return 0


_PREFIX_SUMS_SRC = """
prod_rect (λ (_ : Z) (out : list Z) . out)
  (fold_left
     (λ (s : Z * list Z) (n : Z) .
        prod_rect (λ (acc : Z) (l3 : list Z) .
           let acc2 := acc + n in (acc2, acc2 :: l3)) s)
     (map (λ (p : Z * Z) . fst p * snd p)
          (combine [a; b; c; d] (seq 0 (length [a; b; c; d]))))
     (0, ([] : list Z)))
"""


def cmd_demo(args):
    if args.name != "prefixsums":
        raise RwError(f"unknown demo {args.name!r}")
    ruleset = R.prelude()
    compiled = M.compile_ruleset(ruleset)
    fv = {nm: T.fresh_binder(nm, T.Base(T.INT)) for nm in "abcd"}
    term = parse_term(_PREFIX_SUMS_SRC, registry=ruleset.registry, var_env=fv)
    stats = E.Stats(trace=True)
    out = E.rewrite_top(compiled, term, stats=stats)
    print("-- prefix sums specialized to a four-element list [a; b; c; d]")
    print("input:")
    print("  " + print_term(term))
    print("rules fired:", stats.firings, "over", stats.passes, "passes;",
          stats.delta_folds, "constant folds")
    print("output:")
    print("  " + print_term(out))
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="rw", description="rewrite-rule partial evaluator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("rewrite", help="rewrite a term with a rule file")
    p.add_argument("--rules", required=True,
                   help="rule file path, 'prelude', or 'suite:<name>'")
    p.add_argument("--term", help="term file path or - for stdin")
    p.add_argument("--fuel", type=int, default=None)
    p.add_argument("--no-delta", action="store_true")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--dump-decision-tree", action="store_true")
    p.add_argument("--dot", action="store_true", help="with --dump-decision-tree, also emit DOT")
    p.add_argument("--absint", help="bounds file; runs interval analysis first")
    p.add_argument("--clip-constants", action="store_true")
    p.add_argument("--closures", action="store_true",
                   help="use the tree compiled to closures instead of the interpreter")
    p.set_defaults(fn=cmd_rewrite)

    p = sub.add_parser("oracle", help="rewrite using the naive reference engine")
    p.add_argument("--rules", required=True)
    p.add_argument("--term", required=True)
    p.add_argument("--fuel", type=int, default=100_000)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("bench", help="run a benchmark suite case")
    p.add_argument("--suite", required=True, choices=B.SUITES)
    p.add_argument("--params", required=True, help='e.g. "n=3,m=64" or "limit=100"')
    p.add_argument("--strategy", default="engine", choices=("engine", "oracle"))
    p.add_argument("--csv")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--parallel", type=int, default=0)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("demo", help="print a golden derivation")
    p.add_argument("name", choices=["prefixsums"])
    p.set_defaults(fn=cmd_demo)

    args = ap.parse_args(argv)
    if args.cmd == "rewrite" and not args.dump_decision_tree and not args.term:
        ap.error("rewrite requires --term (or --dump-decision-tree)")
    try:
        return args.fn(args)
    except RwError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
