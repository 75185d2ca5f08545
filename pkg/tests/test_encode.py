from collections import Counter, deque

from hypothesis import given, settings, strategies as st

from gridpi.grid.encode import _Gen, encode_grid
from gridpi.grid.static import micro, scenario5
from gridpi.grid.tasks import Basic, Choice, ParT, Seq, schedules
from gridpi.hopi.congruence import congruent, digest, normalize
from gridpi.hopi.reduction import Comm, enumerate_redexes, prenex, reduce_step, unfold_all
from gridpi.hopi.syntax import parse_process, parse_program
from gridpi.hopi.terms import (
    NIL, Call, FreshSupply, Output, Par, Restrict, Sum, apply_value, free_names, gname,
    new_name, restrict, substitute,
)
from gridpi.sim.engine import Engine
from oracles import all_trees

# Hand transcriptions of the three displayed definitions, instantiated for
# one credential, one descriptor per request and one AD per VO.
MICRO_GOLDEN = """
def User(c1, @S, y, @P) =
    new u. y<c1, u>.u(ch1, dash, m).
        (if m = ok then ch1<>.ch1(a).ch1<S>.ch1(g).Monitor<c1, g, a, y, P> else 0)

def PrxHdl_v1(ce, d1) =
    ce(k1, m, a, g).(PrxHdl_v1<ce, d1>
        | new c, b, f. (Search_d1_1<k1, c, f, d1> | Acc1_0_0<c, f, b, d1>
                        | b(e1).e1<k1, m, a, g>))

def Assign(b, d, ch) =
    new n, c. b<n, c>.(
        c(k1, m, p, g, b1). new o, ans1, ans2. (
            ch<k1, ans1, ans2>.(
                ans1(cr1).p<k1, cr1, m, o>.Assign<b1, d, ch>
              + ans2().d<k1, m, p, g>.Assign<b1, d, ch>)
          | o(@X).X<>)
      + n().Assign<b, d, ch>)

def Monitor(c1, g, a, y, @P) = 0
def Search_d1_1(k1, c, f, d) = 0
def Acc1_0_0(c, f, b, d1) = 0
"""

# Two credentials, requests of two or three descriptors, two ADs per VO.
SCENARIO_GOLDEN = """
def User(c1, c2, @S, y, @P) =
    new u. y<c1, c2, u>.u(ch1, dash, m).
        (if m = ok then ch1<>.ch1(a).ch1<S>.ch1(g).Monitor<c1, c2, g, a, y, P> else 0)

def PrxHdl_v1(ce, d1, d2) =
    ce(k1, k2, m, a, g).(PrxHdl_v1<ce, d1, d2>
        | new c, b, f. (Search_d1_2<k1, k2, c, f, d1> | Search_d2_2<k1, k2, c, f, d2>
                        | Acc2_0_0<c, f, b, d1, d2>
                        | b(e1, e2).(e1<k1, k2, m, a, g> + e2<k1, k2, m, a, g>)))
  + ce(k1, k2, k3, m, a, g).(PrxHdl_v1<ce, d1, d2>
        | new c, b, f. (Search_d1_3<k1, k2, k3, c, f, d1> | Search_d2_3<k1, k2, k3, c, f, d2>
                        | Acc2_0_0<c, f, b, d1, d2>
                        | b(e1, e2).(e1<k1, k2, k3, m, a, g> + e2<k1, k2, k3, m, a, g>)))

def Assign(b, d, ch) =
    new n, c. b<n, c>.(
        c(k1, k2, m, p, g, b1). new o, ans1, ans2. (
            ch<k1, k2, ans1, ans2>.(
                ans1(cr1, cr2).p<k1, cr1, k2, cr2, m, o>.Assign<b1, d, ch>
              + ans2().d<k1, k2, m, p, g>.Assign<b1, d, ch>)
          | o(@X).X<>)
      + c(k1, k2, k3, m, p, g, b1). new o, ans1, ans2. (
            ch<k1, k2, k3, ans1, ans2>.(
                ans1(cr1, cr2, cr3).p<k1, cr1, k2, cr2, k3, cr3, m, o>.Assign<b1, d, ch>
              + ans2().d<k1, k2, k3, m, p, g>.Assign<b1, d, ch>)
          | o(@X).X<>)
      + n().Assign<b, d, ch>)

def Monitor(c1, c2, g, a, y, @P) = 0
def Search_d1_2(k1, k2, c, f, d) = 0
def Search_d2_2(k1, k2, c, f, d) = 0
def Search_d1_3(k1, k2, k3, c, f, d) = 0
def Search_d2_3(k1, k2, k3, c, f, d) = 0
def Acc2_0_0(c, f, b, d1, d2) = 0
"""


def _golden(text, cfg, names):
    gold, _ = parse_program(text, check=False)
    enc = encode_grid(cfg)
    for ident in names:
        g, e = gold[ident], enc.env[ident]
        assert len(g.formals) == len(e.formals), ident
        assert congruent(substitute(g.body, g.formals, e.formals), e.body), ident


def test_displayed_definitions_match_transcription_micro():
    _golden(MICRO_GOLDEN, micro(), ["User", "PrxHdl_v1", "Assign"])


def test_displayed_definitions_match_transcription_two_users():
    _golden(SCENARIO_GOLDEN, scenario5(), ["User", "PrxHdl_v1", "Assign"])


def test_golden_check_detects_a_changed_definition():
    broken = MICRO_GOLDEN.replace("ans2().d<k1, m, p, g>", "ans2().d<k1, m, g, p>")
    gold, _ = parse_program(broken, check=False)
    e = encode_grid(micro()).env["Assign"]
    assert not congruent(substitute(gold["Assign"].body, gold["Assign"].formals, e.formals), e.body)


# -- the whole system ------------------------------------------------------------------------


def _top_calls(t):
    names, leaves = prenex(t)
    return Counter(c.defn for c in leaves if isinstance(c, Call))


def test_encoded_system_is_closed_but_for_constants():
    for cfg in (micro(), scenario5()):
        enc = encode_grid(cfg)
        assert free_names(enc.main) <= set(enc.params.constants)
        for d in enc.env.values():
            assert free_names(d.body) - set(d.formals) <= set(enc.params.constants)


def test_micro_system_has_one_of_each_component():
    calls = _top_calls(encode_grid(micro()).main)
    assert calls == Counter({"User": 1, "AP_v1": 1, "AD_d1": 1})


def test_two_user_system_shape():
    enc = encode_grid(scenario5())
    assert _top_calls(enc.main) == Counter({"User": 2, "AP_v1": 1, "AP_v2": 1,
                                            "AD_d1": 1, "AD_d2": 1, "AD_d3": 1})
    reg = enc.params.registry
    names, leaves = prenex(enc.main)
    assert {reg["y:n1"], reg["y:n2"], reg["d:d1"], reg["d:d2"], reg["d:d3"]} <= set(names)
    aps = {c.defn: c.args for c in leaves if isinstance(c, Call) and c.defn.startswith("AP")}
    # v1 is served by d1, d2 and v2 by d1, d3
    assert aps["AP_v1"] == (reg["y:n1"], reg["d:d1"], reg["d:d2"])
    assert aps["AP_v2"] == (reg["y:n2"], reg["d:d1"], reg["d:d3"])
    p = enc.params
    assert (p.omega, p.mu, p.delta, p.eta) == (2, 2, 3, 2)
    assert len(set(reg.values())) == len(reg)


def test_first_communications_are_the_authentication_requests():
    # unfold one layer of users and access points; domains stay folded
    enc = encode_grid(scenario5())
    env = {k: v for k, v in enc.env.items() if k == "User" or k.startswith("AP_")}
    p = unfold_all(normalize(enc.main), env, FreshSupply())
    reg = enc.params.registry
    comms = [r for r in enumerate_redexes(p, env) if isinstance(r, Comm)]
    assert {r.channel for r in comms} == {reg["y:n1"], reg["y:n2"]}
    eng = Engine(enc)
    sent = {eng.describe(p, r).values[:2] for r in comms}
    assert sent == {("cred_c1a", "cred_c1b"), ("cred_c2a", "cred_c2b")}


def _answers(cfg, creds):
    """Replies an access point gives to an authentication request carrying ``creds``."""
    enc = encode_grid(cfg)
    u = new_name("u")
    y, d1, d2 = new_name("y"), new_name("d1"), new_name("d2")
    probe = Sum(((Output(y, tuple(gname(f"cred_{c}") for c in creds) + (u,)), NIL),))
    p = normalize(restrict([y, d1, d2], Par((Call("AP_v1", (y, d1, d2)), probe))))
    fresh = FreshSupply()
    seen = set()
    for _ in range(20):
        p = unfold_all(p, enc.env, fresh)
        names, leaves = prenex(p)
        for leaf in leaves:
            if isinstance(leaf, Sum):
                for pre, _ in leaf.branches:
                    if isinstance(pre, Output) and pre.chan == u:
                        seen.add(pre.args[2].display)
        comms = [r for r in enumerate_redexes(p, enc.env) if isinstance(r, Comm) and r.channel == y]
        if not comms:
            break
        p = reduce_step(p, comms[0], enc.env, fresh)
    return seen


def test_access_point_accepts_members_and_denies_others():
    cfg = scenario5()
    assert _answers(cfg, ("c1a", "c1b")) == {"ok"}
    assert _answers(cfg, ("c2a", "c2b")) == {"denied"}     # u2 is not in v1
    assert _answers(cfg, ("c1a", "c2b")) == {"denied"}


def _maximal_states(p, env, limit=10_000):
    """Dead ends of the communication graph below ``p`` (unfolding eagerly)."""
    fresh = FreshSupply()
    start = unfold_all(normalize(p), env, fresh)
    seen, todo, ends = {digest(start)}, deque([start]), []
    while todo:
        q = todo.popleft()
        rs = [r for r in enumerate_redexes(q, env) if isinstance(r, Comm)]
        if not rs:
            ends.append(q)
        for r in rs:
            nxt = unfold_all(reduce_step(q, r, env, fresh), env, fresh)
            if digest(nxt) not in seen:
                seen.add(digest(nxt))
                todo.append(nxt)
        assert len(seen) < limit
    return ends


def test_user_against_a_stub_access_point_has_two_outcomes():
    enc = encode_grid(micro())
    env = {"User": enc.env["User"]}          # Monitor stays a call so it is visible
    stub = parse_process(
        "y(c1, u).new ch. (u<ch, ch, ok>.ch().ch<a>.ch(@X).ch<g> + u<ch, ch, denied>)")
    user = parse_process("User<cred_c1, {(t, e) 0}, y, {(r) 0}>", defs={"User"})
    ends = _maximal_states(Restrict(gname("y"), Par((user, stub))), env)
    kinds = sorted("monitor" if "Monitor" in _top_calls(e) else "stopped" if e == NIL else repr(e)
                   for e in ends)
    assert kinds == ["monitor", "stopped"]


# -- tasks ---------------------------------------------------------------------------------


def _task_term(tree):
    text = _Gen(micro()).task(tree)
    value = parse_process(f"D<{text}>", defs={"D"}).args[0]
    t, e = new_name("t"), new_name("e")
    return t, e, apply_value(value, [t, e])


def _requirement_multisets(tree):
    """For each maximal run of the task process against an always-answering stub."""
    t, e, body = _task_term(tree)
    fresh = FreshSupply()
    out = set()
    stack = [(normalize(body), ())]
    seen = set()
    while stack:
        p, acc = stack.pop()
        key = (digest(p), acc)
        if key in seen:
            continue
        seen.add(key)
        names, leaves = prenex(p)
        moves = []
        for i, leaf in enumerate(leaves):
            if isinstance(leaf, Sum) and leaf.branches and isinstance(leaf.branches[0][0], Output) \
                    and leaf.branches[0][0].chan == t:
                (pre, cont), = leaf.branches
                *kinds, job, done = pre.args
                job_label = job.body.branches[0][0].args[0].display
                reply = Sum(((Output(done, (gname("res"),)), NIL),))
                rest = leaves[:i] + [cont, reply] + leaves[i + 1:]
                item = (job_label[len("job_"):], tuple(k.display[len("kind_"):] for k in kinds))
                moves.append((normalize(restrict(names, Par(tuple(rest)))),
                              tuple(sorted(acc + (item,)))))
        for r in enumerate_redexes(p, {}):
            moves.append((reduce_step(p, r, {}, fresh), acc))
        if not moves:
            assert any(isinstance(x, Sum) and x.branches[0][0].chan == e for x in leaves)
            out.add(acc)
        stack.extend(moves)
    return out


def _schedule_multisets(tree):
    return {tuple(sorted((b.job, b.kinds) for rnd in s for b in rnd)) for s in schedules(tree)}


def test_end_task_signals_completion_at_once():
    from gridpi.grid.tasks import END
    t, e, body = _task_term(END)
    (pre, _), = normalize(body).branches
    assert pre.chan == e


def test_single_basic_task_asks_once_before_completing():
    assert _requirement_multisets(Basic("J1", ("k1", "k2"))) == {(("J1", ("k1", "k2")),)}


def test_task_encoding_matches_schedules_on_small_trees():
    for tree in all_trees(1):
        assert _requirement_multisets(tree) == _schedule_multisets(tree)


def tree_strategy(depth):
    leaf = st.sampled_from(all_trees(0))
    if depth == 0:
        return leaf
    sub = tree_strategy(depth - 1)
    return st.one_of(leaf, st.builds(Seq, sub, sub), st.builds(ParT, sub, sub), st.builds(Choice, sub, sub))


@settings(max_examples=60, deadline=None)
@given(tree_strategy(3))
def test_task_encoding_matches_schedules(tree):
    assert _requirement_multisets(tree) == _schedule_multisets(tree)


# -- administrative domains -----------------------------------------------------------------


def test_idle_domain_never_deadlocks():
    enc = encode_grid(micro())
    d = new_name("d")
    p = normalize(Restrict(d, Call("AD_d1", (d,))))
    fresh = FreshSupply()
    frontier = [unfold_all(p, enc.env, fresh)]
    seen = {digest(frontier[0])}
    for _ in range(20):
        nxt = []
        for q in frontier:
            rs = [r for r in enumerate_redexes(q, enc.env) if isinstance(r, Comm)]
            assert rs, "idle domain got stuck"
            for r in rs:
                s = unfold_all(reduce_step(q, r, enc.env, fresh), enc.env, fresh)
                if digest(s) not in seen:
                    seen.add(digest(s))
                    nxt.append(s)
        frontier = nxt
