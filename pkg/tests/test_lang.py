import pytest
from hypothesis import given, strategies as st

from synchrone_rc.lang import (
    Call, Cons, ConstructorSig, DuplicateDeclaration, FunctionDef, Program, Stop, TypeDecl, Var,
    apply_subst, is_linear, match_pattern, size, value, variables,
)

Z = value("z")
NIL = value("nil")


def s(v):
    return value("s", v)


def cons(a, b):
    return value("cons", a, b)


class TestSize:
    def test_nullary_is_zero(self):
        assert size(Z) == 0

    def test_unary_chain(self):
        assert size(s(s(Z))) == 2

    def test_binary(self):
        assert size(cons(s(Z), NIL)) == 2

    def test_open_term_has_no_size(self):
        with pytest.raises(TypeError):
            size(Cons("s", (Var("x"),)))

    def test_large_values_are_exact(self):
        v = Z
        for _ in range(5000):
            v = s(v)
        assert size(v) == 5000


class TestMatch:
    def test_binds_every_variable(self):
        p = Cons("cons", (Var("x"), Var("l")))
        assert match_pattern(p, cons(Z, NIL)) == {"x": Z, "l": NIL}

    def test_head_mismatch(self):
        assert match_pattern(Cons("s", (Var("x"),)), Z) is None

    def test_variable_pattern(self):
        assert match_pattern(Var("x"), s(Z)) == {"x": s(Z)}

    def test_nonlinear_pattern_needs_equal_values(self):
        p = Cons("cons", (Var("x"), Var("x")))
        assert match_pattern(p, cons(Z, Z)) == {"x": Z}
        assert match_pattern(p, cons(Z, NIL)) is None


class TestSubst:
    def test_replaces_variables(self):
        assert apply_subst({"x": Z}, Cons("s", (Var("x"),))) == s(Z)

    def test_empty_substitution_is_identity(self):
        t = Call("f", (Var("x"), Cons("s", (Var("y"),))))
        assert apply_subst({}, t) is t

    def test_registers_are_fixed(self):
        r = Cons("r")
        assert apply_subst({"x": s(Z)}, r) == r

    def test_unmapped_variables_stay(self):
        assert apply_subst({"x": Z}, Var("y")) == Var("y")


class TestProgram:
    def test_duplicate_constructor_rejected(self):
        t1 = TypeDecl("nat", (ConstructorSig("z", (), "nat"),))
        t2 = TypeDecl("other", (ConstructorSig("z", (), "other"),))
        with pytest.raises(DuplicateDeclaration):
            Program((t1, t2), ())

    def test_repeated_formals_rejected(self):
        f = FunctionDef("f", ("x", "x"), ("nat", "nat"), None, Stop(), True)
        with pytest.raises(DuplicateDeclaration):
            Program((), (f,))


# random values and linear patterns over z, s, nil, cons

values = st.recursive(
    st.sampled_from([Z, NIL]),
    lambda inner: st.one_of(st.builds(s, inner), st.builds(cons, inner, inner)),
    max_leaves=12,
)


@st.composite
def pattern_and_value(draw):
    """A value together with a linear pattern obtained by cutting some of
    its subterms into distinct variables."""
    v = draw(values)
    counter = iter(range(10_000))

    def cut(w):
        if draw(st.booleans()):
            return Var(f"x{next(counter)}")
        return Cons(w.name, tuple(cut(a) for a in w.args))

    return cut(v), v


@given(pattern_and_value())
def test_match_then_substitute_gives_back_the_value(pv):
    p, v = pv
    sigma = match_pattern(p, v)
    assert sigma is not None
    assert apply_subst(sigma, p) == v


@given(pattern_and_value())
def test_size_splits_over_a_linear_pattern(pv):
    p, v = pv
    assert is_linear(p)
    sigma = match_pattern(p, v)
    skeleton = apply_subst({x: Z for x in variables(p)}, p)
    assert size(apply_subst(sigma, p)) == size(skeleton) + sum(size(sigma[x]) for x in variables(p))
