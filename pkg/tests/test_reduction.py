import random

import pytest
from hypothesis import given, settings, strategies as st

from gridpi.hopi.congruence import congruent, normalize
from gridpi.hopi.defs import UnguardedRecursion, check_env
from gridpi.hopi.reduction import (
    Comm, CondResolve, StaleRedex, Unfold, enumerate_redexes, reduce_step, unfold_all,
)
from gridpi.hopi.terms import (
    NIL, Abs, Call, Cond, Definition, FreshSupply, Par, Restrict, VarApp, choice,
    free_names, inp, new_name, new_var, out, par, substitute,
)
from oracles import (
    alphabet_sums, alphabet_terms, canonical_pairs, com_successors, com_successors_many,
    db, db_flat, sum_images,
)
from strategies import POOL, small_terms

a, b, c = POOL
SUMS = alphabet_terms(POOL)


def successors(p):
    t = normalize(p)
    return {db_flat(db(reduce_step(t, r, {}))) for r in enumerate_redexes(t, {})}


def test_nil_has_no_redexes():
    assert enumerate_redexes(normalize(NIL), {}) == []


def test_higher_order_input_meets_output():
    X = new_var("X")
    p = normalize(par(inp(a, [X], VarApp(X, ())), out(a, [Abs((), out(b))])))
    (r,) = enumerate_redexes(p, {})
    assert isinstance(r, Comm) and r.channel == a


def test_first_order_communication():
    x = new_name("x")
    p = normalize(par(inp(a, [x], out(x)), out(a, [b])))
    (r,) = enumerate_redexes(p, {})
    assert congruent(reduce_step(p, r, {}), out(b))


def test_received_job_runs():
    o, X = new_name("o"), new_var("X")
    job = out(b, [c], out(a))
    p = normalize(par(inp(o, [X], VarApp(X, ())), out(o, [Abs((), job)])))
    (r,) = enumerate_redexes(p, {})
    assert congruent(reduce_step(p, r, {}), job)


def test_stale_redexes_are_rejected():
    x = new_name("x")
    p = normalize(par(inp(a, [x], out(x)), out(a, [b])))
    (r,) = enumerate_redexes(p, {})
    q = reduce_step(p, r, {})
    with pytest.raises(StaleRedex):
        reduce_step(q, r, {})
    with pytest.raises(StaleRedex):
        reduce_step(p, Comm(r.inp, r.inp_branch, r.inp, r.out_branch, a), {})
    with pytest.raises(StaleRedex):
        reduce_step(p, Comm(r.inp, r.inp_branch, r.out, r.out_branch, b), {})
    with pytest.raises(StaleRedex):
        reduce_step(p, CondResolve(0, "then"), {})
    with pytest.raises(StaleRedex):
        reduce_step(p, Unfold(0, "D"), {"D": Definition((), NIL)})


def test_conditionals_and_calls_are_redexes():
    env = {"D": Definition((), out(a))}
    p = normalize(Par((Call("D", ()), out(b))))
    (r,) = enumerate_redexes(p, env)
    assert isinstance(r, Unfold)
    assert congruent(reduce_step(p, r, env), par(out(a), out(b)))
    # a conditional on a placeholder survives normalization and resolves as a redex
    x = new_name("x")
    q = normalize(Cond(x, a, out(b), out(c)), placeholders={x})
    assert [type(r) for r in enumerate_redexes(q, {})] == [CondResolve]


@settings(max_examples=300, deadline=None)
@given(small_terms, small_terms, small_terms, small_terms)
def test_discarded_branches_leave_no_trace(p, q, r, s):
    # the non-selected branches talk on names nothing else uses
    d, e = new_name("d"), new_name("e")
    x = new_name("x")
    left = choice(inp(a, [x], par(p, out(x))), inp(d, [], q))
    right = choice(out(a, [b], r), out(e, [], s))
    t = normalize(par(left, right))
    for red in enumerate_redexes(t, {}):
        if isinstance(red, Comm) and red.channel == a:
            got = reduce_step(t, red, {})
            assert d not in free_names(got) and e not in free_names(got)


def test_guarded_recursion_is_accepted_and_unguarded_rejected():
    x = new_name("x")
    check_env({"Loop": Definition((x,), inp(x, [], Call("Loop", (x,))))})
    with pytest.raises(UnguardedRecursion):
        check_env({"Bad": Definition((x,), Call("Bad", (x,)))})
    with pytest.raises(UnguardedRecursion):
        check_env({"P": Definition((x,), par(out(x), Call("Q", (x,)))),
                   "Q": Definition((x,), Restrict(new_name("y"), Call("P", (x,))))})


def test_unfolding_a_guarded_definition_terminates():
    x = new_name("x")
    env = {"Loop": Definition((x,), par(out(x), inp(x, [], Call("Loop", (x,)))))}
    p = unfold_all(normalize(Call("Loop", (a,))), env, FreshSupply())
    assert congruent(p, par(out(a), inp(a, [], Call("Loop", (a,)))))


# -- closure properties -------------------------------------------------------------------


def _shuffled(p, rng):
    match p:
        case Par(items):
            items = [_shuffled(i, rng) for i in items]
            rng.shuffle(items)
            return Par(tuple(items))
        case Restrict(n, body):
            return Restrict(n, _shuffled(body, rng))
    return p


@settings(max_examples=300, deadline=None)
@given(small_terms, small_terms, small_terms, st.randoms(use_true_random=False))
def test_reduction_is_closed_under_congruence(p, q, r, rng):
    t = normalize(par(p, q, r))
    t2 = normalize(substitute(_shuffled(par(r, Par((q, NIL)), p), rng), [], [], FreshSupply(),
                              rename_all=True))
    after = [reduce_step(t2, r2, {}) for r2 in enumerate_redexes(t2, {})]
    for red in enumerate_redexes(t, {}):
        got = reduce_step(t, red, {})
        assert any(congruent(got, other) for other in after)


@settings(max_examples=300, deadline=None)
@given(small_terms, small_terms)
def test_enumerated_redexes_always_reduce(p, q):
    # arity and kind errors cannot arise from an enumerated redex
    t = normalize(par(p, q))
    for red in enumerate_redexes(t, {}):
        reduce_step(t, red, {}, FreshSupply())


# -- agreement with the brute-force oracle ------------------------------------------------


@settings(max_examples=500, deadline=None)
@given(st.lists(st.integers(0, len(SUMS) - 1), min_size=3, max_size=3))
def test_three_components_agree_with_oracle(ix):
    sums = [SUMS[i] for i in ix]
    assert successors(Par(tuple(sums))) == com_successors_many(sums)


def test_symmetry_reduction_counts_every_orbit():
    # Burnside: the orbit count is the average number of fixed unordered pairs
    images = sum_images()
    fixed = 0
    for img in images:
        points = sum(1 for x, y in enumerate(img) if x == y)
        swaps = sum(1 for x, y in enumerate(img) if x < y and img[y] == x)
        fixed += points * (points + 1) // 2 + swaps
    assert fixed % len(images) == 0
    assert sum(1 for _ in canonical_pairs()) == fixed // len(images)


def test_two_components_agree_with_oracle_on_a_sample():
    # the full enumeration runs in the acceptance suite
    pairs = list(canonical_pairs())
    rng = random.Random(11)
    for x, y in rng.sample(pairs, 20_000):
        assert successors(Par((SUMS[x], SUMS[y]))) == com_successors(SUMS[x], SUMS[y])


def test_alphabet_has_the_intended_shape():
    sums = alphabet_sums()
    assert all(1 <= len(s) <= 2 for s in sums)
    assert len(SUMS) == len(sums)
    for s in SUMS:
        for pre, _ in s.branches:
            assert len(getattr(pre, "args", getattr(pre, "formals", ()))) <= 2
