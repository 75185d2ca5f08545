import pytest
from hypothesis import given, settings, strategies as st

from gridpi.hopi.terms import (
    NIL, Abs, ArityMismatch, Definition, FreshSupply, KindMismatch, Restrict, VarApp,
    free_names, free_vars, gname, inp, instantiate, new_name, new_var, out, par, substitute,
)
from oracles import db, db_subst, db_value, free_ids
from strategies import POOL, small_terms

a, b, c = POOL


def test_substitute_single_free_name():
    x, y = new_name("x"), new_name("y")
    assert substitute(out(x), [x], [y]) == out(y)


def test_substitute_process_variable_is_a_beta_step():
    X, bb = new_var("X"), new_name("b")
    got = substitute(VarApp(X, ()), [X], [Abs((), out(bb))])
    assert got == out(bb)


def test_substitute_avoids_capture():
    x, y = new_name("x"), new_name("y")
    t = Restrict(y, out(x, [y]))
    got = substitute(t, [x], [y])
    assert isinstance(got, Restrict) and got.name != y
    assert got.body == out(y, [got.name])
    assert got.name.display.startswith("y'")
    assert db(got) == db_subst(db(t), {x.id: db_value(y)})


def test_substitute_checks_arity_and_kind():
    x, X = new_name("x"), new_var("X")
    with pytest.raises(ArityMismatch):
        substitute(NIL, [x], [])
    with pytest.raises(KindMismatch):
        substitute(NIL, [x], [Abs((), NIL)])
    with pytest.raises(KindMismatch):
        substitute(NIL, [X], [a])


def test_free_names_examples():
    x, z, u, w = (new_name(s) for s in "xzuw")
    assert free_names(NIL) == set()
    assert free_names(Restrict(x, out(x, [z]))) == {z}
    assert free_names(inp(x, [u], out(u, [w]))) == {x, w}


def test_fresh_labels_are_primed_and_counted():
    fresh = FreshSupply()
    y = new_name("y")
    assert [fresh.like(y).display for _ in range(3)] == ["y'1", "y'2", "y'3"]
    assert fresh.like(new_name("y'1")).display == "y'4"


def test_instantiate_freshens_every_binder():
    x, k = new_name("x"), new_name("k")
    body = inp(x, [k], out(k))
    d = Definition((x,), body)
    got = instantiate(d, [a], FreshSupply())
    (pre, cont), = got.branches
    assert pre.chan == a and pre.formals[0] != k
    assert db(got) == db(inp(a, [k], out(k)))


@settings(max_examples=500, deadline=None)
@given(small_terms)
def test_free_names_match_recursive_oracle(t):
    assert free_names(t) | free_vars(t) == free_ids(t)


@settings(max_examples=500, deadline=None)
@given(small_terms, st.sampled_from(POOL), st.sampled_from(POOL))
def test_name_substitution_matches_nameless_oracle(t, x, v):
    got = substitute(t, [x], [v], FreshSupply())
    assert db(got) == db_subst(db(t), {x.id: db_value(v)})


@settings(max_examples=500, deadline=None)
@given(small_terms, small_terms)
def test_process_substitution_matches_nameless_oracle(body, payload):
    X = new_var("X")
    t = par(body, VarApp(X, ()), inp(a, [], VarApp(X, ())))
    v = Abs((), payload)
    got = substitute(t, [X], [v], FreshSupply())
    assert db(got) == db_subst(db(t), {X.id: db_value(v)})


@settings(max_examples=500, deadline=None)
@given(small_terms, st.sampled_from(POOL), small_terms)
def test_substitution_freshness(t, x, payload):
    v = new_name("fresh")
    got = substitute(t, [x], [v])
    assert free_names(got) <= (free_names(t) - {x}) | {v}
    X = new_var("X")
    t2 = par(t, VarApp(X, ()))
    got2 = substitute(t2, [X], [Abs((), payload)])
    assert free_names(got2) <= free_names(t2) | free_names(payload)
    assert X not in free_vars(got2)


@settings(max_examples=300, deadline=None)
@given(small_terms)
def test_renaming_every_binder_is_alpha_equivalent(t):
    assert db(substitute(t, [], [], FreshSupply(), rename_all=True)) == db(t)


def test_global_names_are_interned():
    assert gname("ok") is gname("ok")
    assert gname("ok") != new_name("ok")
