import random

import pytest
from hypothesis import given, settings, strategies as st

from rw import terms as T
from rw import oracle as O
from rw.errors import ParseError
from rw.syntax import parse_term, parse_type, print_term
from rw.terms import Base, Arrow, INT, NAT, BOOL, alpha_equal


GOLDEN = [
    "λ (x : Z) . x + 0",
    "let x := e1 in e1 + x",
    "x :: [1; 2]",
    "(x, true)",
    "clip_{0,256}(x)",
    "x >> 3",
    "nat_rect 0 (λ (k : N) (acc : Z) . acc + x) 3n",
    "map (λ (p : Z * Z) . fst p * snd p) [(x, 0)]",
    "bool_rect 1 0 (x < 2 && x >= 0 || ! true)",
    "fold_left (λ (a : Z) (b : Z) . a - b) (rev [1; 2]) (min x 2 % 3)",
]


@pytest.mark.parametrize("src", GOLDEN)
def test_roundtrip_golden(src):
    env = {"x": T.fresh_binder("x", Base(INT)),
           "e1": T.fresh_binder("e1", Base(INT))}
    e = parse_term(src, var_env=env)
    printed = print_term(e)
    again = parse_term(printed, var_env=env)
    assert alpha_equal(e, again), printed
    assert print_term(again) == printed  # printing is deterministic


def test_parse_types():
    assert parse_type("Z -> list Z -> Z") == T.arrow(Base(INT), Base(T.ListOf(INT)), Base(INT))
    assert parse_type("Z * N * B") == Base(T.Prod(T.Prod(INT, NAT), BOOL))
    assert parse_type("option (Z * Z)") == Base(T.OptionOf(T.Prod(INT, INT)))


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        parse_term("let x := in x")
    assert exc.value.line == 1


def test_nat_literal_suffix():
    e = parse_term("repeat 7 2n")
    assert T.denote(e) == [7, 7]


def test_unary_minus_literal_only():
    assert T.denote(parse_term("-5 + 1")) == -4
    with pytest.raises(ParseError):
        parse_term("-(2 + 3)")


def test_annotation_resolves_nil():
    e = parse_term("([] : list Z)")
    assert T.denote(e) == []


def test_ambiguous_type_rejected():
    with pytest.raises(ParseError):
        parse_term("[]")


def test_precedence():
    assert T.denote(parse_term("1 + 2 * 3")) == 7
    assert T.denote(parse_term("2 ^ 3 + 1")) == 9
    assert T.denote(parse_term("16 >> 1 + 1")) == 4  # shifts bind looser than +
    assert T.denote(parse_term("1 :: 2 + 3 :: []")) == [1, 5]


def test_lambda_sugar_shared_annotation():
    e = parse_term("λ (a b : Z) . a + b")
    assert T.type_str(T.typecheck(e)) == "Z -> Z -> Z"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_roundtrip_random_terms(seed):
    gen = O.TermGen(random.Random(seed), max_nodes=25)
    e = gen.closed_term(ty=Base(INT), n_free=1)
    ty = T.typecheck(e)
    printed = print_term(e)
    again = parse_term(printed, expect=ty)
    assert alpha_equal(e, again), printed


def test_printer_deep_let_chain():
    from rw import bench as B
    from rw.deep import run_deep
    e = B.gen_underletsplus0(3000)
    text = run_deep(print_term, e)
    assert text.count("let ") == 3000
