import numpy as np
import pytest

from zenocert.hybrid import (
    Edge,
    GuardSet,
    HybridSystem,
    Mode,
    SemialgebraicSet,
    check_zeno_equilibrium,
    cycle_order,
    recenter,
    validate,
)
from zenocert.polynomials import Polynomial, VariableRegistry, parse

REG = VariableRegistry.make(["x1", "x2"])


def ball_mode(reg, mid, field_texts, target):
    return Mode(
        id=mid,
        pieces=(SemialgebraicSet((parse("1 - x1^2 - x2^2", reg),), (True,)),),
        field_=tuple(parse(t, reg) for t in field_texts),
        neighborhood=SemialgebraicSet((parse("1 - x1^2 - x2^2", reg),), (True,)),
        anchor=(0.0, 0.0),
    )


def identity_reset(reg):
    return (parse("x1", reg), parse("x2", reg))


def test_example1_validates(example1):
    assert validate(example1).ok


def test_example2_validates(example2):
    assert validate(example2).ok


def test_bouncing_ball_validates(bouncing_ball):
    assert validate(bouncing_ball).ok


def test_missing_outgoing_edge_invalid():
    m1 = ball_mode(REG, 1, ["x2", "-x1"], 2)
    m2 = ball_mode(REG, 2, ["x2", "-x1"], 1)
    e12 = Edge(1, 2, GuardSet(parse("x1", REG)), identity_reset(REG))
    sys_ = HybridSystem(REG, (m1, m2), (e12,))
    rep = validate(sys_)
    assert not rep.ok
    assert any("mode 2 lacks" in p for p in rep.problems)


def test_single_edge_deletion_invalidates(example1):
    for drop in range(len(example1.edges)):
        edges = tuple(e for i, e in enumerate(example1.edges) if i != drop)
        broken = HybridSystem(example1.registry, example1.modes, edges,
                              example1.parameter_set)
        assert not validate(broken).ok


def test_guard_equality_required():
    with pytest.raises(ValueError):
        GuardSet(Polynomial.zero(REG))


def test_contains_example1_domain(example1):
    d1 = example1.mode(1).domain
    assert d1.contains([1.0, 0.0])
    assert not d1.contains([0.0, 1.0])  # x1 > 0 is strict
    assert d1.contains([0.0, 1.0], closure=True)


def test_contains_strictness_monotone(example1):
    rng = np.random.default_rng(2)
    d1 = example1.mode(1).domain
    for _ in range(200):
        pt = rng.uniform(-1, 1, size=2)
        if d1.contains(pt):
            assert d1.contains(pt, closure=True)


def test_guard_line_membership(example2):
    guard = example2.outgoing(2).guard  # the slope-p switching line
    assert guard.contains([1.0, 1.0], params=[1.0])
    assert not guard.contains([1.0, 0.5], params=[1.0])


def test_cycle_order(example1, example2, bouncing_ball):
    assert cycle_order(example1) == [1, 2, 3]
    assert cycle_order(example2) == [1, 2]
    assert cycle_order(bouncing_ball) == [1]


def test_zeno_equilibrium_example1(example1):
    z = {q: (0.0, 0.0) for q in (1, 2, 3)}
    rep = check_zeno_equilibrium(example1, z)
    assert rep.is_zeno_equilibrium
    assert all(rep.guard_membership.values())
    assert all(rep.reset_consistent.values())
    # both mode 1 and mode 3 fields vanish at the origin; reported, not fatal
    assert rep.field_nonzero[1] is False
    assert rep.field_nonzero[3] is False


def test_zeno_equilibrium_off_guard(example1):
    z = {1: (0.5, 0.5), 2: (0.0, 0.0), 3: (0.0, 0.0)}
    rep = check_zeno_equilibrium(example1, z)
    assert not rep.is_zeno_equilibrium
    assert rep.guard_membership[1] is False


def test_zeno_equilibrium_example2_field_report(example2):
    z = {1: (0.0, 0.0), 2: (0.0, 0.0)}
    rep = check_zeno_equilibrium(example2, z, params=[4.0])
    assert rep.is_zeno_equilibrium
    assert rep.field_nonzero[1] is True   # constant drift field
    assert rep.field_nonzero[2] is False  # cubic rotation vanishes at origin


def test_domain_pieces_union(example2):
    m2 = example2.mode(2)
    assert len(m2.pieces) == 2
    p = [4.0]
    assert m2.domain_contains([-1.0, 0.0], p)      # lower half piece
    assert m2.domain_contains([0.1, 3.0], p)       # upper wedge complement piece
    assert not m2.domain_contains([1.0, 0.5], p)   # interior of D1
    assert example2.mode(1).domain_contains([1.0, 0.5], p)


def test_recenter_moves_anchor():
    reg = REG
    shift_sys = HybridSystem(
        reg,
        (Mode(
            id=1,
            pieces=(SemialgebraicSet((parse("1 - (x1 - 1)^2 - (x2 + 2)^2", reg),), (False,)),),
            field_=(parse("x2 + 2", reg), parse("-(x1 - 1)", reg)),
            neighborhood=SemialgebraicSet((parse("1 - (x1 - 1)^2 - (x2 + 2)^2", reg),), (True,)),
            anchor=(1.0, -2.0),
        ),),
        (Edge(1, 1, GuardSet(parse("x1 - 1", reg)),
              (parse("x1", reg), parse("x2", reg))),),
    )
    rec = recenter(shift_sys)
    m = rec.mode(1)
    assert m.anchor == (0.0, 0.0)
    assert m.domain.contains([0.0, 0.0])
    # the recentered field at the origin equals the original field at the anchor
    orig = [f.evaluate([1.0, -2.0]) for f in shift_sys.mode(1).field_]
    new = [f.evaluate([0.0, 0.0]) for f in m.field_]
    assert new == pytest.approx(orig)
    # identity reset stays the identity after conjugation
    e = rec.outgoing(1)
    assert [phi.evaluate([0.3, 0.7]) for phi in e.reset] == pytest.approx([0.3, 0.7])


def test_recenter_noop_for_origin_anchors(example2):
    rec = recenter(example2)
    assert rec.mode(1).field_ == example2.mode(1).field_
    assert rec.outgoing(1).guard.equality == example2.outgoing(1).guard.equality
