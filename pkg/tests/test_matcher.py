import pytest

from rw import terms as T
from rw import rules as R
from rw import matcher as M
from rw import engine as E
from rw.errors import FuelExhausted
from rw.syntax import parse_term, print_term
from rw.terms import Base, INT, lit_key, fresh_binder


def xvar(name="x"):
    return fresh_binder(name, Base(INT))


class TestCompile:
    def test_two_rule_golden_tree(self, two_rules):
        """The checked-in fixture for the two-rule tree: root switches on App,
        the + branch swaps 0<->1 then switches on literal 0, the fst branch
        decomposes down to pair."""
        tree = M.compile_rewrites([r.lhs for r in two_rules.rules])
        add_key = T.ident("add", INT).key
        fst_key = T.ident("fst", INT, INT).key
        pair_key = T.ident("pair", INT, INT).key
        F = M.FAILURE
        expected = M.Switch(
            {},
            M.Switch(
                {fst_key: M.Switch(
                    {}, M.Switch(
                        {}, M.Switch(
                            {pair_key: M.TryLeaf(1, F)}, None, F), F), F),
                 },
                M.Switch({add_key: M.Swap(1, M.Switch(
                    {lit_key(INT, 0): M.TryLeaf(0, F)}, None, F))}, None, F),
                F),
            F)
        assert tree == expected

    def test_empty_rules_compile_to_failure(self):
        assert M.compile_rewrites([]) == M.FAILURE

    def test_single_unary_rule(self):
        rs = R.parse_rules("rule nz: forall (x : Z), log2 x => x")
        tree = M.compile_rewrites([r.lhs for r in rs.rules])
        log2_key = T.ident("log2", INT).key
        assert tree == M.Switch(
            {}, M.Switch({log2_key: M.TryLeaf(0, M.FAILURE)}, None, M.FAILURE),
            M.FAILURE)

    def test_determinism(self, two_rules):
        t1 = M.compile_rewrites([r.lhs for r in two_rules.rules])
        t2 = M.compile_rewrites([r.lhs for r in two_rules.rules])
        assert t1 == t2

    def test_budget(self, monkeypatch):
        monkeypatch.setattr(M, "COMPILE_BUDGET", 2)
        rs = R.parse_rules("rule a: forall (n : Z), n + 0 => n")
        with pytest.raises(FuelExhausted):
            M.compile_rewrites([r.lhs for r in rs.rules])


class TestEvalTree:
    def trace_attempts(self, compiled, e):
        calls = []

        def instantiate(rule, bindings):
            calls.append((rule.index, {k: v.syn for k, v in bindings.items()}))
            return ("hit", rule.index)

        out = compiled.select(e, instantiate)
        return out, calls

    def test_plus_zero_bindings(self, two_rules_compiled):
        out, calls = self.trace_attempts(two_rules_compiled, parse_term("5 + 0"))
        assert out[0].index == 0
        (k, bindings), = calls
        assert k == 0
        assert bindings["n"].value == 5

    def test_fst_pair_bindings(self, two_rules_compiled):
        a, b = xvar("a"), xvar("b")
        e = parse_term("fst (a, b)", var_env={"a": a, "b": b})
        out, calls = self.trace_attempts(two_rules_compiled, e)
        (k, bindings), = calls
        assert k == 1
        assert bindings["x"].binder == a
        assert bindings["y"].binder == b

    def test_no_case_for_mul(self, two_rules_compiled):
        out, calls = self.trace_attempts(two_rules_compiled, parse_term("5 * 1"))
        assert out is None
        assert calls == []  # the tree never proposes a rule

    def test_failed_rule_falls_through(self):
        rs = R.parse_rules(
            "rule guarded: forall (n : Z) (const m : Z), if m > 9 then n + m => n\n"
            "rule catch: forall (n : Z) (m : Z), n + m => 0\n")
        comp = M.compile_ruleset(rs)
        attempts = []

        def instantiate(rule, bindings):
            attempts.append(rule.index)
            return ("ok", rule.index)

        out = comp.select(parse_term("4 + 5"), instantiate)
        # rule 0 matches structurally but its condition fails; rule 1 runs
        assert out[0].index == 1
        assert attempts == [1]

    def test_tree_hint_never_invents(self, two_rules_compiled, prelude_compiled):
        import random
        from rw import oracle as O
        rng = random.Random(11)
        gen = O.TermGen(rng, max_nodes=18)
        for _ in range(300):
            e = gen.closed_term(n_free=0)
            stats = E.Stats()
            sel = prelude_compiled.select(e, lambda r, b: ("x",), stats=stats)
            assert stats.head_violations == 0


class TestClosureCompilation:
    def test_behavioral_equality(self, prelude):
        import random
        from rw import oracle as O
        interp = M.compile_ruleset(prelude, use_closures=False)
        closur = M.compile_ruleset(prelude, use_closures=True)
        rng = random.Random(3)
        gen = O.TermGen(rng, max_nodes=20)
        for _ in range(400):
            e = gen.closed_term(n_free=0)
            r1 = interp.select(e, lambda r, b: r.index)
            r2 = closur.select(e, lambda r, b: r.index)
            assert r1 == r2


class TestRewriteWithRule:
    def test_plus_zero(self, two_rules, two_rules_compiled):
        rule = two_rules.rules[0]
        x = xvar()
        bindings = M.match_pattern(rule.lhs, parse_term("x + 0", var_env={"x": x}))
        rw = E.Rewriter(two_rules_compiled)
        out = M.rewrite_with_rule(rule, bindings, rw._instantiate)
        assert isinstance(out, T.Var) and out.binder == x

    def test_div_pow2_fires_on_8(self):
        rs = R.parse_rules(
            "rule div_pow2: forall (n : Z) (const m : Z), "
            "if 2 ^ (log2 m) == m then n / m => n >> (log2 m)")
        comp = M.compile_ruleset(rs)
        rule = rs.rules[0]
        rw = E.Rewriter(comp)
        x = xvar()
        b8 = M.match_pattern(rule.lhs, parse_term("x / 8", var_env={"x": x}))
        out = M.rewrite_with_rule(rule, b8, rw._instantiate)
        assert print_term(out) == "x >> 3"

    def test_div_pow2_refuses_7(self):
        rs = R.parse_rules(
            "rule div_pow2: forall (n : Z) (const m : Z), "
            "if 2 ^ (log2 m) == m then n / m => n >> (log2 m)")
        comp = M.compile_ruleset(rs)
        rule = rs.rules[0]
        rw = E.Rewriter(comp)
        x = xvar()
        b7 = M.match_pattern(rule.lhs, parse_term("x / 7", var_env={"x": x}))
        assert M.rewrite_with_rule(rule, b7, rw._instantiate) is None

    def test_constvar_requires_literal(self):
        rs = R.parse_rules(
            "rule d: forall (n : Z) (const m : Z), if m > 0 then n / m => n")
        rule = rs.rules[0]
        x, y = xvar(), xvar("y")
        bindings = M.match_pattern(rule.lhs,
                                   parse_term("x / y", var_env={"x": x, "y": y}))
        assert bindings is None  # const var faced a non-literal


class TestDump:
    def test_dump_text(self, two_rules_compiled):
        text = M.dump_tree(two_rules_compiled.tree)
        assert "Swap 0<->1" in text
        assert "TryLeaf 0" in text and "TryLeaf 1" in text
        assert "Literal 0 : Z" in text

    def test_dump_dot(self, two_rules_compiled):
        dot = M.tree_to_dot(two_rules_compiled.tree)
        assert dot.startswith("digraph")
        assert "TryLeaf 0" in dot
