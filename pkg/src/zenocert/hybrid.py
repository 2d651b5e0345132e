"""Data model for cyclic hybrid systems with semialgebraic domains and guards.

A system is a tuple of modes and edges. Every mode carries a polynomial vector
field, a semialgebraic domain (possibly a union of pieces sharing one Lyapunov
template, which is how a non-semialgebraic complement like "everything outside
the wedge" gets encoded), a certification neighborhood, and an anchor point.
Every edge carries a guard (one equality, any number of inequalities) and a
polynomial reset map. Cyclicity means each mode has exactly one outgoing edge
and the edges form a single directed cycle covering all modes; a one-mode
self-loop is a cycle of length one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .polynomials import Polynomial, VariableRegistry

log = logging.getLogger(__name__)

EQ_TOL = 1e-9


def _full_point(reg: VariableRegistry, point: Sequence[float],
                params: Sequence[float] | None) -> np.ndarray:
    x = np.asarray(point, dtype=float)
    if x.shape != (reg.n_state,):
        raise ValueError(f"state point shape {x.shape} != ({reg.n_state},)")
    p = np.asarray(() if params is None else params, dtype=float)
    if p.shape != (reg.n_params,):
        raise ValueError(f"parameter shape {p.shape} != ({reg.n_params},)")
    return np.concatenate([x, p])


@dataclass(frozen=True)
class SemialgebraicSet:
    """{x : g_k(x,p) >= 0 (or > 0 where strict), h_j(x,p) = 0}."""

    inequalities: tuple[Polynomial, ...]
    strict: tuple[bool, ...] = ()
    equalities: tuple[Polynomial, ...] = ()

    def __post_init__(self) -> None:
        if not self.strict:
            object.__setattr__(self, "strict", (False,) * len(self.inequalities))
        if len(self.strict) != len(self.inequalities):
            raise ValueError("strict flags must match inequality count")

    def contains(self, point: Sequence[float], params: Sequence[float] | None = None,
                 tol: float = EQ_TOL, closure: bool = False) -> bool:
        regs = {g.registry for g in self.inequalities} | {h.registry for h in self.equalities}
        if not regs:
            return True
        (reg,) = regs
        pt = _full_point(reg, point, params)
        for g, s in zip(self.inequalities, self.strict):
            v = g.evaluate(pt)
            if s and not closure:
                if v <= tol:
                    return False
            elif v < -tol:
                return False
        return all(abs(h.evaluate(pt)) <= tol for h in self.equalities)


@dataclass(frozen=True)
class GuardSet:
    """{x : h0(x,p) = 0, h_k(x,p) >= 0}; the equality is mandatory."""

    equality: Polynomial
    inequalities: tuple[Polynomial, ...] = ()

    def __post_init__(self) -> None:
        if self.equality.is_zero():
            raise ValueError("guard equality must not be identically zero")

    def contains(self, point: Sequence[float], params: Sequence[float] | None = None,
                 tol: float = EQ_TOL) -> bool:
        pt = _full_point(self.equality.registry, point, params)
        if abs(self.equality.evaluate(pt)) > tol:
            return False
        return all(g.evaluate(pt) >= -tol for g in self.inequalities)


@dataclass(frozen=True)
class ParameterSet:
    """{p : ptilde_k(p) >= 0 (or > 0)}, with an optional sampling box."""

    inequalities: tuple[Polynomial, ...] = ()
    strict: tuple[bool, ...] = ()
    box: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if not self.strict:
            object.__setattr__(self, "strict", (False,) * len(self.inequalities))
        for g in self.inequalities:
            if g.state_degree() > 0:
                raise ValueError(
                    f"parameter-set polynomial {g.to_text()!r} contains state variables")

    @property
    def empty(self) -> bool:
        return not self.inequalities

    def contains(self, params: Sequence[float], tol: float = EQ_TOL) -> bool:
        if self.empty:
            return True
        reg = self.inequalities[0].registry
        pt = _full_point(reg, (0.0,) * reg.n_state, params)
        for g, s in zip(self.inequalities, self.strict):
            v = g.evaluate(pt)
            if (v <= tol) if s else (v < -tol):
                return False
        return True


@dataclass(frozen=True)
class Mode:
    """A discrete mode: flow field, domain pieces, neighborhood, anchor."""

    id: int
    pieces: tuple[SemialgebraicSet, ...]
    field_: tuple[Polynomial, ...]
    neighborhood: SemialgebraicSet
    anchor: tuple[float, ...]

    @property
    def domain(self) -> SemialgebraicSet:
        """The first (often only) domain piece."""
        return self.pieces[0]

    def domain_contains(self, point, params=None, tol: float = EQ_TOL,
                        closure: bool = False) -> bool:
        return any(p.contains(point, params, tol, closure) for p in self.pieces)


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    guard: GuardSet
    reset: tuple[Polynomial, ...]
    r_hint: float | None = None


@dataclass(frozen=True)
class HybridSystem:
    registry: VariableRegistry
    modes: tuple[Mode, ...]
    edges: tuple[Edge, ...]
    parameter_set: ParameterSet = ParameterSet()
    name: str = ""

    @property
    def n(self) -> int:
        return self.registry.n_state

    def mode(self, q: int) -> Mode:
        for m in self.modes:
            if m.id == q:
                return m
        raise KeyError(f"no mode with id {q}")

    def outgoing(self, q: int) -> Edge:
        for e in self.edges:
            if e.source == q:
                return e
        raise KeyError(f"mode {q} has no outgoing edge")


@dataclass
class ValidationReport:
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "invalid:\n" + "\n".join(f"  - {p}" for p in self.problems)


def validate(system: HybridSystem) -> ValidationReport:
    """Structural validation: unique outgoing edges forming one directed cycle
    over all modes, consistent dimensions, guards with equalities present."""
    rep = ValidationReport()
    reg = system.registry
    n = reg.n_state
    ids = [m.id for m in system.modes]
    if len(set(ids)) != len(ids):
        rep.problems.append(f"duplicate mode ids {ids}")
    known = set(ids)

    for m in system.modes:
        if len(m.field_) != n:
            rep.problems.append(f"mode {m.id}: field has {len(m.field_)} components, want {n}")
        if len(m.anchor) != n:
            rep.problems.append(f"mode {m.id}: anchor has length {len(m.anchor)}, want {n}")
        if not m.pieces:
            rep.problems.append(f"mode {m.id}: no domain pieces")

    out_count = {q: 0 for q in known}
    for e in system.edges:
        for end, label in ((e.source, "source"), (e.target, "target")):
            if end not in known:
                rep.problems.append(f"edge ({e.source},{e.target}): unknown {label} mode")
        if e.source in out_count:
            out_count[e.source] += 1
        if len(e.reset) != n:
            rep.problems.append(
                f"edge ({e.source},{e.target}): reset has {len(e.reset)} components, want {n}")
    for q, c in out_count.items():
        if c == 0:
            rep.problems.append(f"mode {q} lacks an outgoing edge")
        elif c > 1:
            rep.problems.append(f"mode {q} has {c} outgoing edges, want exactly 1")

    if rep.ok and known:
        start = min(known)
        seen = []
        q = start
        while True:
            seen.append(q)
            q = system.outgoing(q).target
            if q == start or q in seen:
                break
        if q != start or len(seen) != len(known):
            rep.problems.append(
                f"edges do not form a single cycle covering all modes (walk: {seen})")

    # anchors must sit in the closure of their mode's domain for some admissible
    # parameter value; checked at the sampling-box midpoint when parameters exist
    if rep.ok:
        p0 = _nominal_params(system)
        for m in system.modes:
            if not m.domain_contains(m.anchor, p0, closure=True):
                rep.problems.append(
                    f"mode {m.id}: anchor {tuple(m.anchor)} outside domain closure")
    return rep


def _nominal_params(system: HybridSystem) -> tuple[float, ...]:
    ps = system.parameter_set
    if system.registry.n_params == 0:
        return ()
    if ps.box:
        return tuple(0.5 * (lo + hi) for lo, hi in ps.box)
    return (0.0,) * system.registry.n_params


def cycle_order(system: HybridSystem) -> list[int]:
    """Mode ids in traversal order, starting from the lowest id."""
    rep = validate(system)
    if not rep.ok:
        raise ValueError(f"invalid system: {rep.problems}")
    start = min(m.id for m in system.modes)
    order = [start]
    q = system.outgoing(start).target
    while q != start:
        order.append(q)
        q = system.outgoing(q).target
    return order


@dataclass
class EquilibriumReport:
    guard_membership: dict[int, bool]
    reset_consistent: dict[int, bool]
    field_nonzero: dict[int, bool]

    @property
    def is_zeno_equilibrium(self) -> bool:
        """Reset-consistency and guard membership; a vanishing field is
        reported but not disqualifying (the stability conditions tolerate it)."""
        return all(self.guard_membership.values()) and all(self.reset_consistent.values())


def check_zeno_equilibrium(system: HybridSystem,
                           z: Mapping[int, Sequence[float]],
                           params: Sequence[float] | None = None,
                           tol: float = 1e-8) -> EquilibriumReport:
    if params is None:
        params = _nominal_params(system)
    guard_ok: dict[int, bool] = {}
    reset_ok: dict[int, bool] = {}
    nonzero: dict[int, bool] = {}
    for m in system.modes:
        e = system.outgoing(m.id)
        zq = np.asarray(z[m.id], dtype=float)
        zt = np.asarray(z[e.target], dtype=float)
        pt = _full_point(system.registry, zq, params)
        guard_ok[m.id] = e.guard.contains(zq, params, tol)
        image = np.array([phi.evaluate(pt) for phi in e.reset])
        reset_ok[m.id] = bool(np.linalg.norm(image - zt) <= tol)
        fval = np.array([f.evaluate(pt) for f in m.field_])
        nonzero[m.id] = bool(np.linalg.norm(fval) > tol)
        if not nonzero[m.id]:
            log.info("mode %d: vector field vanishes at its anchor (allowed)", m.id)
    return EquilibriumReport(guard_ok, reset_ok, nonzero)


def _shift_set(s: SemialgebraicSet, z: Sequence[float]) -> SemialgebraicSet:
    return SemialgebraicSet(
        tuple(g.shift(z) for g in s.inequalities),
        s.strict,
        tuple(h.shift(z) for h in s.equalities),
    )


def recenter(system: HybridSystem, z: Mapping[int, Sequence[float]] | None = None
             ) -> HybridSystem:
    """Translate coordinates so each mode's anchor moves to the origin.

    Guards shift with their source mode; resets are conjugated so that a
    reset-consistent anchor family maps the origin to the origin.
    """
    if z is None:
        z = {m.id: m.anchor for m in system.modes}
    reg = system.registry
    modes = []
    for m in system.modes:
        zq = [float(v) for v in z[m.id]]
        modes.append(Mode(
            id=m.id,
            pieces=tuple(_shift_set(p, zq) for p in m.pieces),
            field_=tuple(f.shift(zq) for f in m.field_),
            neighborhood=_shift_set(m.neighborhood, zq),
            anchor=(0.0,) * reg.n_state,
        ))
    edges = []
    for e in system.edges:
        zs = [float(v) for v in z[e.source]]
        zt = [float(v) for v in z[e.target]]
        guard = GuardSet(e.guard.equality.shift(zs),
                         tuple(g.shift(zs) for g in e.guard.inequalities))
        reset = tuple(phi.shift(zs) - zt[i] for i, phi in enumerate(e.reset))
        edges.append(Edge(e.source, e.target, guard, reset, e.r_hint))
    return HybridSystem(reg, tuple(modes), tuple(edges), system.parameter_set,
                        system.name)
