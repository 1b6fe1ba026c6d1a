import pytest
from hypothesis import given, strategies as st

from rw import terms as T
from rw import oracle as O
from rw.errors import TypeMismatch, UnboundVar, UnknownIdent
from rw.syntax import parse_term, print_term
from rw.terms import (Base, Arrow, INT, NAT, BOOL, Lit, Var, fresh_binder,
                      alpha_equal, clip_semantics, denote, metrics, typecheck)


def b(name, ty=Base(INT)):
    return fresh_binder(name, ty)


class TestTypecheck:
    def test_arrow_introduction(self):
        e = parse_term("(λ (x : Z) . x + 0)")
        assert T.type_str(typecheck(e)) == "Z -> Z"

    def test_projection(self):
        e = parse_term("fst (pair 1 2)")
        assert typecheck(e) == Base(INT)

    def test_ill_typed_application(self):
        x = b("x")
        bad = T.App(T.Abs(x, Base(INT), Var(x)), Lit(BOOL, True))
        with pytest.raises(TypeMismatch):
            typecheck(bad)

    def test_unbound_var(self):
        with pytest.raises(UnboundVar):
            typecheck(Var(T.BinderId(10**9, "ghost", None)))

    def test_registry_gate(self, two_rules):
        e = parse_term("3 / 4")
        with pytest.raises(UnknownIdent):
            typecheck(e, two_rules.registry)

    def test_annotates_nodes(self):
        e = parse_term("let x := 3 in x * x")
        typecheck(e)
        assert e.ty == Base(INT)
        assert e.bound.ty == Base(INT)


class TestDenote:
    def test_let_square(self):
        assert denote(parse_term("let x := 3 in x * x")) == 9

    def test_fst_pair(self):
        assert denote(parse_term("fst (pair 1 2)")) == 1

    def test_higher_order(self):
        z = b("z")
        e = parse_term("(λ (f : Z -> Z -> Z) (x : Z) (y : Z) . f x y) add z 0",
                       var_env={"z": z})
        assert denote(e, {z: 7}) == 7

    def test_no_substitution_during_denote(self):
        O.reset_subst_count()
        e = parse_term("(λ (f : Z -> Z) . f (f 2)) (λ (x : Z) . x * x)")
        assert denote(e) == 16
        assert O.subst_count() == 0

    def test_eliminators(self):
        assert denote(parse_term(
            "list_rect 0 (λ (x : Z) (t : list Z) (acc : Z) . acc + x) [1;2;3]")) == 6
        assert denote(parse_term("nth_default 9 [4;5;6] 1n")) == 5
        assert denote(parse_term("option_rect (λ (x : Z) . x + 1) 0 (some 4)")) == 5


class TestAlphaEqual:
    def test_rename(self):
        assert alpha_equal(parse_term("λ (x : Z) . x"), parse_term("λ (y : Z) . y"))

    def test_not_equal_bodies(self):
        assert not alpha_equal(parse_term("λ (x : Z) . x + 0"),
                               parse_term("λ (x : Z) . x"))

    def test_let_rename(self):
        assert alpha_equal(parse_term("let a := 1 + 2 in a"),
                           parse_term("let q := 1 + 2 in q"))

    @given(st.integers(-50, 50), st.integers(-50, 50))
    def test_equivalence_relation(self, i, j):
        e1 = parse_term(f"λ (x : Z) . x + {i} * {j}" if i >= 0 and j >= 0
                        else "λ (x : Z) . x")
        e2 = parse_term(print_term(e1))
        e3 = parse_term(print_term(e2))
        assert alpha_equal(e1, e1)
        assert alpha_equal(e1, e2) == alpha_equal(e2, e1)
        if alpha_equal(e1, e2) and alpha_equal(e2, e3):
            assert alpha_equal(e1, e3)

    def test_denote_respects_alpha(self):
        e1 = parse_term("(λ (x : Z) . x + 2) 5")
        e2 = parse_term("(λ (w : Z) . w + 2) 5")
        assert alpha_equal(e1, e2)
        assert denote(e1) == denote(e2)


class TestMetrics:
    def test_single_let(self):
        assert metrics(parse_term("let x := 1 in x"))["let_count"] == 1

    def test_spine_convention(self):
        # one node for the ident-headed application spine, two leaves
        assert metrics(parse_term("5 + 0"))["node_count"] == 3

    def test_underlets_after_rewriting(self, two_rules_compiled):
        from rw import bench as B, engine as E
        out = E.rewrite_top(two_rules_compiled, B.gen_underletsplus0(3))
        assert metrics(out)["let_count"] == 3

    def test_binder_depth(self):
        e = parse_term("λ (x : Z) . let y := x + 1 in y")
        assert metrics(e)["max_binder_depth"] == 2


class TestClipSemantics:
    def test_in_range_identity(self):
        assert clip_semantics(0, 2 ** 64, 5) == 5

    def test_boundary(self):
        assert clip_semantics(0, 8, 7) == 7

    def test_saturates_above(self):
        assert clip_semantics(0, 8, 9) == 7

    def test_saturates_below(self):
        assert clip_semantics(3, 8, -2) == 3

    @given(st.integers(-100, 100), st.integers(-100, 100), st.integers(-200, 200))
    def test_always_lands_in_range(self, lo, width, n):
        hi = lo + abs(width) + 1
        out = clip_semantics(lo, hi, n)
        assert lo <= out < hi
        if lo <= n < hi:
            assert out == n


class TestLiterals:
    def test_nat_literal_nonnegative(self):
        with pytest.raises(TypeMismatch):
            Lit(NAT, -1)

    def test_value_roundtrip(self):
        bt = T.Prod(INT, T.ListOf(INT))
        v = (4, [1, 2, 3])
        assert T.expr_to_value(T.value_to_expr(v, bt)) == v

    def test_expr_to_value_rejects_open(self):
        x = b("x")
        assert T.expr_to_value(Var(x)) is None


class TestBinders:
    def test_freshness(self):
        names = {fresh_binder("q").token for _ in range(1000)}
        assert len(names) == 1000


class TestDelta:
    def test_folds_primitive(self):
        assert T.try_delta(parse_term("3 + 4")).value == 7

    def test_skips_open(self):
        x = b("x")
        assert T.try_delta(parse_term("x + 4", var_env={"x": x})) is None

    def test_guards_huge_pow(self):
        e = parse_term(f"{2**64} ^ {2**20}")
        assert T.try_delta(e) is None

    def test_folds_list_primitive(self):
        assert T.try_delta(parse_term("length [1;2;3]")).value == 3
