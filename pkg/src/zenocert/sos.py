"""Lowering of sum-of-squares constraints to block-diagonal SDP form.

A constraint system is built from three kinds of unknowns:

* `DecisionPolynomial`: a polynomial template with one free scalar per
  support monomial (used for Lyapunov candidates and the free-sign guard
  multiplier).
* `SosDecisionPolynomial`: an unknown polynomial represented directly by a
  symmetric Gram matrix over a monomial basis, constrained PSD (used for all
  nonnegative multipliers).
* plain scalars, expressed as degenerate one-monomial templates.

Expressions affine in these unknowns are held in `PolyExpr`, which supports
addition, subtraction, multiplication by known polynomials, differentiation,
and composition with known polynomial maps.  Products of two unknowns raise
`SosStructureError` naming the offenders.

`lower` turns a list of SosConstraint / LinearConstraint into an SdpInstance:
each SOS unknown gets one PSD block, each asserted-SOS expression gets one
additional slack Gram block, and equality rows match coefficients over the
union of monomial supports.  Slack Gram bases are pruned with a bounding-box
relaxation of the Newton polytope.  The ordering of rows, columns, and blocks
is deterministic, so identical input produces a bit-identical instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .polynomials import Monomial, Polynomial, VariableRegistry, monomial_basis
from .sdp import SdpInstance, SdpSolution, STATUS_OPTIMAL
from . import sdp as sdp_mod

CONST_KEY = ("const",)

DEFAULT_TRACE_REG = 1e-8


class SosStructureError(ValueError):
    pass


class SosReconstructionError(RuntimeError):
    pass


def _mono_text(m: Monomial, registry: VariableRegistry) -> str:
    if all(e == 0 for e in m.exponents):
        return "1"
    parts = []
    for name, e in zip(registry.names, m.exponents):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


@dataclass(frozen=True)
class DecisionPolynomial:
    """Polynomial template: sum_k c_k * m_k with scalar unknowns c_k."""

    name: str
    registry: VariableRegistry
    support: tuple[Monomial, ...]

    @property
    def coeff_names(self) -> tuple[str, ...]:
        return tuple(f"{self.name}.c{k}" for k in range(len(self.support)))

    def as_expr(self) -> "PolyExpr":
        terms: dict[Monomial, dict[tuple, float]] = {}
        for k, mono in enumerate(self.support):
            terms.setdefault(mono, {})[("free", f"{self.name}.c{k}")] = 1.0
        return PolyExpr(self.registry, terms, {self.name: self})

    def assemble(self, values: Mapping[str, float]) -> Polynomial:
        out: dict[Monomial, float] = {}
        for k, mono in enumerate(self.support):
            v = float(values[f"{self.name}.c{k}"])
            if v != 0.0:
                out[mono] = out.get(mono, 0.0) + v
        return Polynomial(self.registry, out)


@dataclass(frozen=True)
class SosDecisionPolynomial:
    """Unknown SOS polynomial Z' Q Z with Q a PSD Gram unknown."""

    name: str
    registry: VariableRegistry
    basis: tuple[Monomial, ...]

    @property
    def gram_dim(self) -> int:
        return len(self.basis)

    def as_expr(self) -> "PolyExpr":
        terms: dict[Monomial, dict[tuple, float]] = {}
        n = len(self.basis)
        for i in range(n):
            for j in range(i, n):
                mono = self.basis[i] * self.basis[j]
                w = 1.0 if i == j else 2.0
                aff = terms.setdefault(mono, {})
                key = ("gram", self.name, i, j)
                aff[key] = aff.get(key, 0.0) + w
        return PolyExpr(self.registry, terms, {self.name: self})

    def assemble(self, gram: np.ndarray) -> Polynomial:
        n = len(self.basis)
        if gram.shape != (n, n):
            raise ValueError(f"gram shape {gram.shape} != ({n},{n})")
        out: dict[Monomial, float] = {}
        for i in range(n):
            for j in range(i, n):
                v = float(gram[i, j]) * (1.0 if i == j else 2.0)
                if v != 0.0:
                    mono = self.basis[i] * self.basis[j]
                    out[mono] = out.get(mono, 0.0) + v
        return Polynomial(self.registry, {m: c for m, c in out.items() if c != 0.0})


def make_template(registry: VariableRegistry, degree: int, *,
                  no_constant: bool = False, even_only: bool = False,
                  state_only: bool = False, name: str = "t") -> DecisionPolynomial:
    """Full monomial support of total degree <= degree, filtered by flags."""
    if degree < 1:
        raise ValueError("template degree must be at least 1")
    idx = (tuple(range(registry.n_state)) if state_only
           else tuple(range(registry.size)))
    support = []
    for m in monomial_basis(registry, idx, degree):
        d = m.degree
        if no_constant and d == 0:
            continue
        if even_only and d % 2 != 0:
            continue
        support.append(m)
    return DecisionPolynomial(name=name, registry=registry, support=tuple(support))


def make_scalar(registry: VariableRegistry, name: str) -> DecisionPolynomial:
    """Single free scalar as a constant-monomial template."""
    const = Monomial(tuple([0] * registry.size))
    return DecisionPolynomial(name=name, registry=registry, support=(const,))


def make_sos_template(registry: VariableRegistry, degree: int, *,
                      var_indices: tuple[int, ...] | None = None,
                      max_param_degree: int | None = None,
                      name: str = "s") -> SosDecisionPolynomial:
    """Gram-represented SOS unknown of total degree <= degree (degree even)."""
    if degree < 0 or degree % 2 != 0:
        raise ValueError("SOS template degree must be even and nonnegative")
    idx = var_indices if var_indices is not None else tuple(range(registry.size))
    basis = monomial_basis(registry, idx, degree // 2)
    if max_param_degree is not None:
        basis = [m for m in basis if m.param_degree(registry) <= max_param_degree]
    return SosDecisionPolynomial(name=name, registry=registry, basis=tuple(basis))


class PolyExpr:
    """Polynomial with coefficients affine in named scalar and Gram unknowns.

    terms maps Monomial -> affine dict; affine keys are ("const",),
    ("free", name), or ("gram", sos_name, i, j) with i <= j meaning the
    (i, j) entry of that Gram unknown (symmetric partner included in the
    stored weight).
    """

    __slots__ = ("registry", "terms", "objects")

    def __init__(self, registry: VariableRegistry,
                 terms: dict[Monomial, dict[tuple, float]] | None = None,
                 objects: dict[str, object] | None = None):
        self.registry = registry
        self.terms = terms if terms is not None else {}
        self.objects = objects if objects is not None else {}

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "PolyExpr":
        terms = {m: {CONST_KEY: c} for m, c in p.terms.items() if c != 0.0}
        return cls(p.registry, terms, {})

    @classmethod
    def zero(cls, registry: VariableRegistry) -> "PolyExpr":
        return cls(registry, {}, {})

    def has_unknowns(self) -> bool:
        return any(k != CONST_KEY for aff in self.terms.values() for k in aff)

    def copy(self) -> "PolyExpr":
        return PolyExpr(self.registry,
                        {m: dict(aff) for m, aff in self.terms.items()},
                        dict(self.objects))

    def _merged_objects(self, other: "PolyExpr") -> dict[str, object]:
        out = dict(self.objects)
        out.update(other.objects)
        return out

    def __add__(self, other):
        other = _coerce(other, self.registry)
        out = {m: dict(aff) for m, aff in self.terms.items()}
        for m, aff in other.terms.items():
            dst = out.setdefault(m, {})
            for k, v in aff.items():
                nv = dst.get(k, 0.0) + v
                if nv == 0.0:
                    dst.pop(k, None)
                else:
                    dst[k] = nv
        out = {m: aff for m, aff in out.items() if aff}
        return PolyExpr(self.registry, out, self._merged_objects(other))

    __radd__ = __add__

    def __neg__(self):
        return PolyExpr(self.registry,
                        {m: {k: -v for k, v in aff.items()}
                         for m, aff in self.terms.items()},
                        dict(self.objects))

    def __sub__(self, other):
        return self + (-_coerce(other, self.registry))

    def __rsub__(self, other):
        return _coerce(other, self.registry) + (-self)

    def __mul__(self, other):
        if isinstance(other, PolyExpr):
            if self.has_unknowns() and other.has_unknowns():
                mine = sorted(self.objects)
                theirs = sorted(other.objects)
                raise SosStructureError(
                    "product of two unknown-bearing expressions "
                    f"(left involves {mine}, right involves {theirs})")
            if other.has_unknowns():
                return other * self.to_known()
            other = other.to_known()
        if isinstance(other, (int, float)):
            c = float(other)
            if c == 0.0:
                return PolyExpr.zero(self.registry)
            return PolyExpr(self.registry,
                            {m: {k: v * c for k, v in aff.items()}
                             for m, aff in self.terms.items()},
                            dict(self.objects))
        if isinstance(other, Polynomial):
            out: dict[Monomial, dict[tuple, float]] = {}
            for m1, aff in self.terms.items():
                for m2, c in other.terms.items():
                    if c == 0.0:
                        continue
                    mono = m1 * m2
                    dst = out.setdefault(mono, {})
                    for k, v in aff.items():
                        nv = dst.get(k, 0.0) + v * c
                        if nv == 0.0:
                            dst.pop(k, None)
                        else:
                            dst[k] = nv
            out = {m: aff for m, aff in out.items() if aff}
            return PolyExpr(self.registry, out, dict(self.objects))
        return NotImplemented

    __rmul__ = __mul__

    def to_known(self) -> Polynomial:
        """Convert an unknown-free expression back to a plain polynomial."""
        if self.has_unknowns():
            raise SosStructureError("expression still contains unknowns")
        return Polynomial(self.registry,
                          {m: aff.get(CONST_KEY, 0.0)
                           for m, aff in self.terms.items()})

    def diff(self, var: int) -> "PolyExpr":
        out: dict[Monomial, dict[tuple, float]] = {}
        for m, aff in self.terms.items():
            e = m.exponents[var]
            if e == 0:
                continue
            ex = list(m.exponents)
            ex[var] -= 1
            mono = Monomial(tuple(ex))
            dst = out.setdefault(mono, {})
            for k, v in aff.items():
                nv = dst.get(k, 0.0) + v * e
                if nv == 0.0:
                    dst.pop(k, None)
                else:
                    dst[k] = nv
        out = {m: aff for m, aff in out.items() if aff}
        return PolyExpr(self.registry, out, dict(self.objects))

    def compose_state(self, subst: list[Polynomial]) -> "PolyExpr":
        """Substitute state variables by known polynomials; parameters pass
        through unchanged."""
        reg = self.registry
        if len(subst) != reg.n_state:
            raise ValueError("substitution length must equal state dimension")
        result = PolyExpr.zero(reg)
        for m, aff in self.terms.items():
            known = Polynomial.constant(reg, 1.0)
            for v in range(reg.n_state):
                for _ in range(m.exponents[v]):
                    known = known * subst[v]
            param_part = Monomial(tuple(0 if v < reg.n_state else m.exponents[v]
                                        for v in range(reg.size)))
            known = known * Polynomial(reg, {param_part: 1.0})
            piece = PolyExpr(reg, {mono: dict(aff) for mono in [Monomial(
                tuple([0] * reg.size))]}, dict(self.objects))
            piece = piece * known
            result = result + piece
        return result

    def support(self) -> list[Monomial]:
        return sorted(self.terms, key=lambda m: m.sort_key())

    def to_polynomial(self, values: Mapping[str, float],
                      grams: Mapping[str, np.ndarray]) -> Polynomial:
        """Instantiate with concrete unknown values."""
        out: dict[Monomial, float] = {}
        for m, aff in self.terms.items():
            total = 0.0
            for k, w in aff.items():
                if k == CONST_KEY:
                    total += w
                elif k[0] == "free":
                    total += w * float(values[k[1]])
                else:
                    _, name, i, j = k
                    total += w * float(grams[name][i, j])
            if total != 0.0:
                out[m] = total
        return Polynomial(self.registry, out)


def _coerce(obj, registry: VariableRegistry) -> PolyExpr:
    if isinstance(obj, PolyExpr):
        return obj
    if isinstance(obj, Polynomial):
        return PolyExpr.from_polynomial(obj)
    if isinstance(obj, (int, float)):
        return PolyExpr.from_polynomial(Polynomial.constant(registry, float(obj)))
    if isinstance(obj, (DecisionPolynomial, SosDecisionPolynomial)):
        return obj.as_expr()
    raise TypeError(f"cannot use {type(obj).__name__} in an SOS expression")


@dataclass(frozen=True)
class SosConstraint:
    label: str
    expr: PolyExpr


@dataclass(frozen=True)
class LinearConstraint:
    """Affine equality or one-sided inequality over free scalar unknowns."""

    label: str
    coeffs: tuple[tuple[str, float], ...]
    rhs: float = 0.0
    sense: str = "=="

    def __post_init__(self):
        if self.sense not in ("==", ">="):
            raise ValueError("sense must be '==' or '>='")


@dataclass
class BackMap:
    registry: VariableRegistry
    free_names: tuple[str, ...]
    block_names: tuple[str, ...]
    block_bases: dict[str, tuple[Monomial, ...]]
    decision_objects: dict[str, DecisionPolynomial]
    sos_objects: dict[str, SosDecisionPolynomial]
    slack_names: dict[str, str]          # constraint label -> slack block name
    rows_per_constraint: dict[str, int]
    constraints: list
    trace_reg: float

    def free_index(self, name: str) -> int:
        return self.free_names.index(name)


def _gram_basis_for(support: Iterable[Monomial],
                    registry: VariableRegistry) -> tuple[Monomial, ...]:
    """Candidate Gram basis pruned by the bounding box of the support's
    Newton polytope (doubled basis exponents must fit the box, and doubled
    total degree must lie between the extreme total degrees)."""
    support = list(support)
    if not support:
        return ()
    nvar = registry.size
    lo = [min(m.exponents[v] for m in support) for v in range(nvar)]
    hi = [max(m.exponents[v] for m in support) for v in range(nvar)]
    lo_deg = min(m.degree for m in support)
    hi_deg = max(m.degree for m in support)
    idx = tuple(v for v in range(nvar) if hi[v] > 0)
    basis = []
    for m in monomial_basis(registry, idx, hi_deg // 2):
        d2 = 2 * m.degree
        if d2 < lo_deg or d2 > hi_deg:
            continue
        if any(2 * m.exponents[v] < lo[v] or 2 * m.exponents[v] > hi[v]
               for v in range(nvar)):
            continue
        basis.append(m)
    return tuple(basis)


def lower(constraints: list, *,
          trace_reg: float = DEFAULT_TRACE_REG) -> tuple[SdpInstance, BackMap]:
    """Assemble the block SDP for a list of SosConstraint / LinearConstraint.

    Returns the instance together with the back-map needed to reconstruct
    polynomial unknowns from an SDP solution.
    """
    registry = None
    for con in constraints:
        if isinstance(con, SosConstraint):
            registry = con.expr.registry
            break
    if registry is None:
        raise SosStructureError("no SOS constraint present")

    # discover unknowns in deterministic (constraint, insertion) order
    free_names: list[str] = []
    free_pos: dict[str, int] = {}
    decision_objects: dict[str, DecisionPolynomial] = {}
    sos_objects: dict[str, SosDecisionPolynomial] = {}
    block_names: list[str] = []
    block_dims: list[int] = []
    block_pos: dict[str, int] = {}
    block_bases: dict[str, tuple[Monomial, ...]] = {}

    def add_free(name: str) -> int:
        if name not in free_pos:
            free_pos[name] = len(free_names)
            free_names.append(name)
        return free_pos[name]

    def add_block(name: str, dim: int, basis) -> int:
        if name in block_pos:
            return block_pos[name]
        block_pos[name] = len(block_names)
        block_names.append(name)
        block_dims.append(dim)
        block_bases[name] = basis
        return block_pos[name]

    for con in constraints:
        if not isinstance(con, SosConstraint):
            continue
        for name, obj in con.expr.objects.items():
            if isinstance(obj, DecisionPolynomial):
                if name not in decision_objects:
                    decision_objects[name] = obj
                    for cn in obj.coeff_names:
                        add_free(cn)
            elif isinstance(obj, SosDecisionPolynomial):
                if name not in sos_objects:
                    sos_objects[name] = obj
                    add_block(name, obj.gram_dim, obj.basis)

    labels_seen = set()
    for con in constraints:
        if con.label in labels_seen:
            raise SosStructureError(f"duplicate constraint label {con.label!r}")
        labels_seen.add(con.label)

    a_entries: list[tuple[int, int, int, int, float]] = []
    f_entries: list[tuple[int, int, float]] = []
    b_vals: list[float] = []
    row_labels: list[str] = []
    slack_names: dict[str, str] = {}
    rows_per_constraint: dict[str, int] = {}

    for con in constraints:
        if isinstance(con, SosConstraint):
            support = con.expr.support()
            slack_name = f"{con.label}.gram"
            basis = _gram_basis_for(support, registry)
            pair_map: dict[Monomial, list[tuple[int, int]]] = {}
            for i in range(len(basis)):
                for j in range(i, len(basis)):
                    pair_map.setdefault(basis[i] * basis[j], []).append((i, j))
            if basis:
                blk = add_block(slack_name, len(basis), basis)
                slack_names[con.label] = slack_name
            else:
                blk = None
            all_monos = sorted(set(support) | set(pair_map),
                               key=lambda m: m.sort_key())
            rows_per_constraint[con.label] = len(all_monos)
            for mono in all_monos:
                row = len(b_vals)
                rhs = 0.0
                aff = con.expr.terms.get(mono, {})
                for key, w in aff.items():
                    if key == CONST_KEY:
                        rhs -= w
                    elif key[0] == "free":
                        f_entries.append((row, add_free(key[1]), w))
                    else:
                        _, name, i, j = key
                        v = w if i == j else w / 2.0
                        a_entries.append((row, block_pos[name], i, j, v))
                if blk is not None:
                    for (i, j) in pair_map.get(mono, ()):
                        a_entries.append((row, blk, i, j, -1.0))
                b_vals.append(rhs)
                row_labels.append(f"{con.label}:{_mono_text(mono, registry)}")
        elif isinstance(con, LinearConstraint):
            row = len(b_vals)
            for name, w in con.coeffs:
                f_entries.append((row, add_free(name), float(w)))
            if con.sense == ">=":
                blk = add_block(f"{con.label}.slack", 1, None)
                a_entries.append((row, blk, 0, 0, -1.0))
            b_vals.append(float(con.rhs))
            row_labels.append(con.label)
            rows_per_constraint[con.label] = 1
        else:
            raise SosStructureError(f"unsupported constraint {type(con).__name__}")

    c_entries = tuple((bl, i, i, trace_reg)
                      for bl, dim in enumerate(block_dims) for i in range(dim))

    instance = SdpInstance(
        block_dims=tuple(block_dims),
        free_names=tuple(free_names),
        a_entries=tuple(a_entries),
        f_entries=tuple(f_entries),
        b=tuple(b_vals),
        c_entries=c_entries,
        c_free=tuple([0.0] * len(free_names)),
        row_labels=tuple(row_labels),
    )
    backmap = BackMap(
        registry=registry,
        free_names=tuple(free_names),
        block_names=tuple(block_names),
        block_bases=block_bases,
        decision_objects=decision_objects,
        sos_objects=sos_objects,
        slack_names=slack_names,
        rows_per_constraint=rows_per_constraint,
        constraints=list(constraints),
        trace_reg=trace_reg,
    )
    return instance, backmap


@dataclass
class SosAssignment:
    values: dict[str, float]
    polynomials: dict[str, Polynomial]
    sos_polynomials: dict[str, Polynomial]
    grams: dict[str, np.ndarray]
    max_row_error: float
    min_gram_eig: dict[str, float]

    def expression_polynomial(self, expr: PolyExpr) -> Polynomial:
        return expr.to_polynomial(self.values, self.grams)


def reconstruct(instance: SdpInstance, solution: SdpSolution,
                backmap: BackMap) -> SosAssignment:
    """Instantiate all unknowns from an optimal SDP solution."""
    if solution.status != STATUS_OPTIMAL:
        raise SosReconstructionError(
            f"cannot reconstruct from status {solution.status}")
    values = {name: float(solution.u[k])
              for k, name in enumerate(backmap.free_names)}
    grams: dict[str, np.ndarray] = {}
    min_eig: dict[str, float] = {}
    for pos, name in enumerate(backmap.block_names):
        Q = np.asarray(solution.X[pos])
        Q = 0.5 * (Q + Q.T)
        grams[name] = Q
        min_eig[name] = float(np.linalg.eigvalsh(Q).min()) if Q.size else 0.0
    polynomials = {name: obj.assemble(values)
                   for name, obj in backmap.decision_objects.items()}
    sos_polynomials = {name: obj.assemble(grams[name])
                       for name, obj in backmap.sos_objects.items()}
    row_res = sdp_mod.residuals(instance, solution)
    return SosAssignment(
        values=values,
        polynomials=polynomials,
        sos_polynomials=sos_polynomials,
        grams=grams,
        max_row_error=row_res.primal,
        min_gram_eig=min_eig,
    )
