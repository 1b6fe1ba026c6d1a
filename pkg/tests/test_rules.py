import pytest

from rw import terms as T
from rw import rules as R
from rw.errors import (NonConstVarInCondition, NonlinearPattern, ParseError,
                       UnknownIdent)
from rw.syntax import parse_term
from rw.terms import Base, INT


class TestParseRules:
    def test_simple_rule(self):
        rs = R.parse_rules("rule plus_zero: forall (n : Z), n + 0 => n")
        r = rs.rules[0]
        assert r.name == "plus_zero"
        assert r.cond is None
        assert not r.again
        assert r.index == 0
        assert r.lhs_type == Base(INT)

    def test_side_condition_rule(self):
        rs = R.parse_rules(
            "rule div_pow2: forall (n : Z) (const m : Z), "
            "if 2 ^ (log2 m) == m then n / m => n >> (log2 m)")
        r = rs.rules[0]
        assert r.cond is not None
        assert R.eval_condition(r, {"m": 8})
        assert not R.eval_condition(r, {"m": 7})

    def test_non_const_in_condition_rejected(self):
        with pytest.raises(NonConstVarInCondition):
            R.parse_rules("rule bad: forall (n : Z) (m : Z), "
                          "if m == 0 then n + m => n")

    def test_nonlinear_pattern_rejected(self):
        with pytest.raises(NonlinearPattern):
            R.parse_rules("rule nl: forall (n : Z), n + n => n")

    def test_bare_wildcard_head_rejected(self):
        with pytest.raises(ParseError):
            R.parse_rules("rule w: forall (x : Z), x => 0")

    def test_rhs_var_must_be_bound(self):
        with pytest.raises((ParseError, UnknownIdent)):
            R.parse_rules("rule f: forall (x : Z), x + 0 => x + y")

    def test_unknown_extra_ident(self):
        with pytest.raises(UnknownIdent):
            R.parse_rules("extra idents: frobnicate\n"
                          "rule r: forall (n : Z), n + 0 => n")

    def test_apostrophe_alias(self):
        rs = R.parse_rules("rule r: forall (n : Z) ('m : Z), "
                           "if m > 0 then n / m => n")
        _, pv = rs.rules[0].pvars["m"]
        assert pv.const

    def test_again_flag(self):
        rs = R.parse_rules("rule r: forall (xs : list Z), length xs => "
                           "list_rect 0 (λ (x : Z) (t : list Z) (k : Z) . succ k) xs again")
        assert rs.rules[0].again

    def test_indices_in_file_order(self):
        rs = R.parse_rules("rule a: forall (n : Z), n + 0 => n\n"
                           "rule b: forall (n : Z), 0 + n => n\n"
                           "rule c: forall (n : Z), n * 1 => n\n")
        assert [r.index for r in rs.rules] == [0, 1, 2]

    def test_rhs_type_must_match(self):
        with pytest.raises(ParseError):
            R.parse_rules("rule r: forall (n : Z), n + 0 => true")

    def test_arrow_lhs_rejected(self):
        with pytest.raises(ParseError):
            R.parse_rules("rule r: forall (f : Z -> Z), map f => map f")


class TestScrape:
    def test_scrapes_rule_idents(self):
        rs = R.parse_rules("rule r: forall (n : Z), n / 8 => n >> 3")
        reg = R.scrape_idents(rs)
        assert reg.allows(T.ident("div", T.INT))
        assert reg.allows(T.ident("shiftr", T.INT))
        assert not reg.allows(T.ident("mul", T.INT))

    def test_builtins_always_allowed(self):
        rs = R.parse_rules("rule r: forall (n : Z), n + 0 => n")
        reg = rs.registry
        assert reg.allows(T.ident("cons", T.INT))
        assert reg.allows(T.ident("list_rect", T.INT, Base(INT)))
        assert reg.allows(T.clip_ident(0, 8))

    def test_extra_idents(self):
        rs = R.parse_rules("extra idents: seq, e : Z\n"
                           "rule r: forall (n : Z), n + 0 => n")
        assert rs.registry.allows(T.ident("seq", T.INT))
        assert rs.registry.allows(T.uninterpreted("e", Base(INT)))
        assert not rs.registry.allows(T.ident("mul", T.INT))

    def test_unknown_ident_in_term(self):
        rs = R.parse_rules("rule r: forall (n : Z), n + 0 => n")
        with pytest.raises(UnknownIdent):
            parse_term("seq 0 3", registry=rs.registry)


class TestRoundTrip:
    def test_ruleset_roundtrip(self):
        text = ("options: delta\n"
                "extra idents: seq\n"
                "rule plus_zero: forall (n : Z), n + 0 => n\n"
                "rule div_pow2: forall (n : Z) (const m : Z), "
                "if 2 ^ log2 m == m then n / m => n >> log2 m\n")
        rs = R.parse_rules(text)
        printed = R.ruleset_to_text(rs)
        rs2 = R.parse_rules(printed)
        assert R.ruleset_to_text(rs2) == printed
        assert len(rs2.rules) == len(rs.rules)
        assert rs2.delta == rs.delta

    def test_prelude_roundtrip(self, prelude):
        printed = R.ruleset_to_text(prelude)
        rs2 = R.parse_rules(printed)
        assert R.ruleset_to_text(rs2) == printed


class TestPrelude:
    def test_parses(self, prelude):
        assert prelude.delta
        assert len(prelude.rules) > 30

    def test_expected_rules_present(self, prelude):
        names = {r.name for r in prelude.rules}
        assert "plus_zero" in names and "zero_plus" in names
        assert any(n.startswith("eval_map") for n in names)
        assert any(n.startswith("eval_length") for n in names)
        assert any(n.startswith("eval_repeat") for n in names)

    def test_length_is_again_with_plain_combinator(self, prelude):
        rule = next(r for r in prelude.rules if r.name.startswith("eval_length"))
        assert rule.again
        head, _ = T.app_spine(rule.rhs)
        # its replacement is a plain (non-eager) recursion combinator
        found = []

        def walk(e):
            if isinstance(e, T.IdentRef):
                if e.ident.family == "list_rect":
                    found.append(e.eager)
            elif isinstance(e, T.App):
                walk(e.fn)
                walk(e.arg)
            elif isinstance(e, T.Abs):
                walk(e.body)
        walk(rule.rhs)
        assert found == [False]

    def test_map_is_eager_not_again(self, prelude):
        rule = next(r for r in prelude.rules if r.name.startswith("eval_map_Z_Z"))
        assert not rule.again
        eager = []

        def walk(e):
            if isinstance(e, T.IdentRef) and e.ident.family == "list_rect":
                eager.append(e.eager)
            elif isinstance(e, T.App):
                walk(e.fn)
                walk(e.arg)
            elif isinstance(e, T.Abs):
                walk(e.body)
        walk(rule.rhs)
        assert eager == [True]

    def test_repeat_rule(self, prelude):
        rule = next(r for r in prelude.rules if r.name.startswith("eval_repeat"))
        _, pv = rule.pvars["n"]
        assert pv.const

    def test_delegation_detected(self, prelude):
        rule = next(r for r in prelude.rules if r.name.startswith("eval_list_rect_Z_Z"))
        assert rule.delegation == (2,)


class TestClipRules:
    def test_clip_pattern_parses(self):
        rs = R.parse_rules(
            "extra idents: add_with_carry64\n"
            "rule awc: forall (n : Z) (const l : Z) (const u : Z), "
            "if 0 <= l && u < 2^64 then "
            "add_with_carry64 (clip_{'l,'u}(n)) 0 => (0, clip_{'l,'u}(n))")
        r = rs.rules[0]
        assert R.pattern_head_key(r.lhs) == "add_with_carry64"
        vars_ = {v.name for v in R.pattern_vars_of(r.lhs)}
        assert vars_ == {"n", "l", "u"}

    def test_clip_bound_must_be_const(self):
        with pytest.raises(NonConstVarInCondition):
            R.parse_rules("rule c: forall (n : Z) (l : Z) (const u : Z), "
                          "clip_{'l,'u}(n) + 0 => n")

    def test_fixed_clip_in_pattern(self):
        rs = R.parse_rules("rule single: forall (x : Z), clip_{0,1}(x) => 0")
        head, args = R._pattern_spine(rs.rules[0].lhs)
        assert isinstance(head, R.PIdent)
        assert head.ident.params == (0, 1)


class TestConditionTotality:
    def test_fuzz_conditions_total(self):
        import random
        rs = R.parse_rules(
            "rule d: forall (n : Z) (const m : Z), "
            "if 2 ^ (log2 m) == m && m > 0 then n / m => n >> (log2 m)")
        r = rs.rules[0]
        rng = random.Random(5)
        for _ in range(500):
            m = rng.randrange(-2 ** 16, 2 ** 16)
            out = R.eval_condition(r, {"m": m})
            assert isinstance(out, bool)
            assert out == (m > 0 and 2 ** (max(m, 1).bit_length() - 1 if m > 1 else 0) == m)
