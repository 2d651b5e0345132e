"""Certifying Zeno stability by sum-of-squares feasibility.

The construction follows the standard S-procedure pattern. For every mode
(and every piece of a multi-piece domain) we require, after translating the
anchor to the origin:

  R1:  V_q - alpha*|x|^2 - sum a*w - sum b*g - sum eta*ptilde   is SOS
  R2:  V_q(0, p) = 0 for all p   (linear constraints on coefficients)
  R3:  -grad(V_q).f_q - rate - sum c*w - sum d*g - sum beta*ptilde   is SOS
  R4:  r_q V_q - V_q'(phi_e) - m0*h0 - sum m_l*h_l
         - sum i*w - sum j*g - sum zeta*ptilde   is SOS   (per edge)

where w are the certification-neighborhood cuts, g the domain cuts, ptilde
the parameter cuts, h0/h_l the guard equality and inequalities.  All
multipliers are SOS except the guard-equality multiplier m0, which is a free
polynomial.  The contraction vector r is fixed before lowering (r_q * V_q is
bilinear otherwise), so the search runs over a small grid of r values.

The decrease rate in R3 is gamma*|x|^2 by default ("quadratic" profile).  A
constant rate gamma matches the textbook condition but is infeasible whenever
the vector field vanishes at the anchor, which happens in most of the systems
this tool targets, so the quadratic profile is the default and the constant
one is opt-in.  A "quartic" profile (gamma*|x|^4) is also available for modes
whose field vanishes at the anchor while rotating: the angular profile of the
quadratic part of V is pi-periodic, so it cannot strictly decrease along a
half-turn sweep and the quadratic rate is then infeasible at every degree,
while the quartic rate lets odd-degree terms of V carry the decrease.  This
only helps up to a half turn.  A mode whose domain spans an angular sector
wider than pi around an equilibrium of its field admits no polynomial
certificate at all: at each order of the radial expansion of V the angular
derivative is a trig polynomial that is either pi-antiperiodic (odd orders)
or pi-periodic with zero mean (even orders), and on an arc longer than pi
both are forced to zero, collapsing V identically.  Certification failures
on such systems are real, not a degree limitation.

An "extended" mode adds a second certificate family B_q (nonnegative on W,
strictly decreasing along the flow) and the cross condition
gamma_b*V_q'(phi_e) - B_q'(phi_e) >= 0 on guards.  gamma_b multiplies the
unknown V, so like r it must be fixed before lowering; the default 1 is the
value under which the extended conditions subsume the standard ones.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import __version__
from .hybrid import HybridSystem, recenter, validate
from .polynomials import Monomial, Polynomial, VariableRegistry, parse
from .sdp import STATUS_OPTIMAL, SdpSolution, SolverConfig, solve
from .sos import (
    DEFAULT_TRACE_REG,
    DecisionPolynomial,
    LinearConstraint,
    SosConstraint,
    lower,
    make_scalar,
    make_sos_template,
    make_template,
    reconstruct,
)
from .sysio import canonical_json, fingerprint_system

log = logging.getLogger(__name__)

__all__ = [
    "CertificationRequest",
    "ZenoCertificate",
    "CertificationFailure",
    "ProbeRecord",
    "VerificationReport",
    "SweepResult",
    "build_conditions",
    "build_extended_conditions",
    "certify",
    "check_certificate",
    "sweep_lower_bound",
    "sweep_degrees",
    "save_certificate",
    "load_certificate",
    "CERT_FORMAT",
]

CERT_FORMAT = "zenocert-certificate/1"
DEFAULT_R_GRID = (0.99, 0.9, 0.7, 0.5, 0.3)

ALG_RESIDUAL_TOL = 1e-6
GRAM_EIG_TOL = -1e-7
SAMPLE_SLACK = 1e-6
ANCHOR_VALUE_TOL = 1e-8

_FAMILIES = ("neighborhood", "domain", "parameter", "guard", "guard_eq")


def _ceil_even(d: int) -> int:
    return d if d % 2 == 0 else d + 1


def _floor_even(d: int) -> int:
    return max(0, d if d % 2 == 0 else d - 1)


@dataclass(frozen=True)
class CertificationRequest:
    """Everything needed to pose the feasibility problem for one system."""

    system: HybridSystem
    degree: int = 8
    mode: str = "standard"
    rate_profile: str = "quadratic"
    gamma: float = 1.0
    gamma_b: float = 1.0
    b_degree: int | None = None
    param_dependent_v: bool = False
    multiplier_degrees: Mapping[str, int] = field(default_factory=dict)
    max_param_degree: int | None = None
    alpha_min: float = 1e-6
    r_grid: tuple = ()
    trace_reg: float = DEFAULT_TRACE_REG
    seed: int = 0

    def __post_init__(self) -> None:
        if self.degree < 2 or self.degree % 2 != 0:
            raise ValueError(f"V degree must be even and >= 2, got {self.degree}")
        if self.mode not in ("standard", "extended"):
            raise ValueError(f"unknown certification mode {self.mode!r}")
        if self.rate_profile not in ("quadratic", "quartic", "constant"):
            raise ValueError(f"unknown rate profile {self.rate_profile!r}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.gamma_b < 0:
            raise ValueError("gamma_b must be nonnegative")
        if self.alpha_min <= 0:
            raise ValueError("alpha_min must be positive")
        if self.b_degree is not None and (self.b_degree < 2 or self.b_degree % 2):
            raise ValueError("B degree must be even and >= 2")
        for fam, deg in dict(self.multiplier_degrees).items():
            if fam not in _FAMILIES:
                raise ValueError(f"unknown multiplier family {fam!r}; "
                                 f"expected one of {_FAMILIES}")
            if deg < 0 or (fam != "guard_eq" and deg % 2 != 0):
                raise ValueError(f"multiplier degree for {fam!r} must be even "
                                 f"and >= 0, got {deg}")
        object.__setattr__(self, "multiplier_degrees",
                           dict(self.multiplier_degrees))

    def mode_ids(self) -> list[int]:
        return sorted(m.id for m in self.system.modes)

    def grids(self) -> tuple[dict[int, float], ...]:
        """The r-grid as per-mode dictionaries, validated."""
        ids = self.mode_ids()
        raw = self.r_grid or DEFAULT_R_GRID
        out = []
        for entry in raw:
            out.append(_normalize_r(self.system, entry))
        return tuple(out)


def _normalize_r(system: HybridSystem, entry) -> dict[int, float]:
    ids = sorted(m.id for m in system.modes)
    if isinstance(entry, Mapping):
        vec = {int(q): float(entry[q]) for q in entry}
        if sorted(vec) != ids:
            raise ValueError(f"r map keys {sorted(vec)} != mode ids {ids}")
    elif isinstance(entry, (int, float)):
        vec = {q: float(entry) for q in ids}
    else:
        vals = [float(v) for v in entry]
        if len(vals) != len(ids):
            raise ValueError(f"r vector has {len(vals)} entries for {len(ids)} modes")
        vec = dict(zip(ids, vals))
    for q, rq in vec.items():
        if not 0.0 < rq <= 1.0:
            raise ValueError(f"r[{q}] = {rq} outside (0, 1]")
    if min(vec.values()) >= 1.0:
        raise ValueError("at least one r_q must be < 1")
    return vec


@dataclass
class ConditionBuild:
    """The lowered-ready constraint set plus everything needed to read a
    solution back."""

    constraints: list
    centered: HybridSystem
    request: CertificationRequest
    r: dict[int, float]
    v: dict[int, DecisionPolynomial]
    b: dict[int, DecisionPolynomial]
    alpha: DecisionPolynomial
    multiplier_family: dict[str, str]

    def labels(self, prefix: str) -> list[str]:
        return [c.label for c in self.constraints if c.label.startswith(prefix)]


class _Builder:
    def __init__(self, request: CertificationRequest, r: dict[int, float],
                 extended: bool):
        self.req = request
        self.r = r
        self.extended = extended
        self.centered = recenter(request.system)
        self.reg = self.centered.registry
        ps = self.centered.parameter_set
        self.ptilde = tuple(ps.inequalities)
        self.has_params = self.reg.n_params > 0 and bool(self.ptilde)
        self.constraints: list = []
        self.families: dict[str, str] = {}
        xsq = Polynomial.zero(self.reg)
        for i in range(self.reg.n_state):
            xsq = xsq + Polynomial.variable(self.reg, i) ** 2
        self.xsq = xsq

    def sos_mult(self, name: str, target: int, partner: Polynomial,
                 family: str):
        deg = self.req.multiplier_degrees.get(family)
        if deg is None:
            deg = _floor_even(target - partner.degree())
        cap = self.req.max_param_degree if self.has_params else None
        s = make_sos_template(self.reg, deg, max_param_degree=cap, name=name)
        self.families[name] = family
        return s

    def free_mult(self, name: str, degree: int):
        if degree < 1:
            m = make_scalar(self.reg, name)
        else:
            m = make_template(self.reg, degree, name=name)
        self.families[name] = "guard_eq"
        return m

    @staticmethod
    def _target(expr) -> int:
        support = expr.support()
        top = max((m.degree for m in support), default=0)
        return _ceil_even(top)

    def subtract_region(self, expr, target: int, mode, piece_idx: int,
                        tag: str, names: tuple[str, str, str]):
        """Subtract multiplier*cut products for neighborhood, domain piece,
        and parameter-set inequalities."""
        n_w, n_g, n_p = names
        piece = mode.pieces[piece_idx]
        for k, w in enumerate(mode.neighborhood.inequalities):
            s = self.sos_mult(f"{n_w}{tag}w{k}", target, w, "neighborhood")
            expr = expr - s.as_expr() * w
        for k, g in enumerate(piece.inequalities):
            s = self.sos_mult(f"{n_g}{tag}g{k}", target, g, "domain")
            expr = expr - s.as_expr() * g
        for k, h in enumerate(piece.equalities):
            m = self.free_mult(f"{n_g}{tag}geq{k}", target - h.degree())
            expr = expr - m.as_expr() * h
        if self.has_params:
            for k, pt in enumerate(self.ptilde):
                s = self.sos_mult(f"{n_p}{tag}k{k}", target, pt, "parameter")
                expr = expr - s.as_expr() * pt
        return expr

    def rate(self) -> Polynomial:
        if self.req.rate_profile == "quadratic":
            return self.xsq.scale(self.req.gamma)
        if self.req.rate_profile == "quartic":
            return (self.xsq * self.xsq).scale(self.req.gamma)
        return Polynomial.constant(self.reg, self.req.gamma)

    def piece_tags(self, mode):
        if len(mode.pieces) == 1:
            return [(0, f"{mode.id}")]
        return [(pi, f"{mode.id}p{pi}") for pi in range(len(mode.pieces))]

    def edge_tags(self, edge, mode):
        base = f"{edge.source}to{edge.target}"
        if len(mode.pieces) == 1:
            return [(0, base)]
        return [(pi, f"{base}p{pi}") for pi in range(len(mode.pieces))]

    def positivity(self, label_prefix: str, poly_obj, mode, piece_idx: int,
                   tag: str, names: tuple[str, str, str], floor_expr=None):
        expr = poly_obj.as_expr()
        if floor_expr is not None:
            expr = expr - floor_expr
        target = max(self._target(expr), 2)
        expr = self.subtract_region(expr, target, mode, piece_idx, tag, names)
        label = f"{label_prefix}.m{tag}"
        self.constraints.append(SosConstraint(label, expr))

    def decrease(self, label_prefix: str, poly_obj, mode, piece_idx: int,
                 tag: str, names: tuple[str, str, str], use_rate: bool):
        lie = None
        for i in range(self.reg.n_state):
            term = poly_obj.as_expr().diff(i) * mode.field_[i]
            lie = term if lie is None else lie + term
        expr = -lie
        if use_rate:
            expr = expr - self.rate()
        target = self._target(expr)
        expr = self.subtract_region(expr, target, mode, piece_idx, tag, names)
        label = f"{label_prefix}.m{tag}"
        self.constraints.append(SosConstraint(label, expr))

    def jump(self, label_prefix: str, edge, source_mode, piece_idx: int,
             tag: str, base_expr, names: tuple[str, str, str],
             mult_prefix: str):
        target = self._target(base_expr)
        expr = base_expr
        h0 = edge.guard.equality
        m0 = self.free_mult(f"{mult_prefix}{tag}_0", target - h0.degree())
        expr = expr - m0.as_expr() * h0
        for l, hl in enumerate(edge.guard.inequalities, start=1):
            s = self.sos_mult(f"{mult_prefix}{tag}_{l}", target, hl, "guard")
            expr = expr - s.as_expr() * hl
        expr = self.subtract_region(expr, target, source_mode, piece_idx,
                                    tag, names)
        label = f"{label_prefix}.e{tag}"
        self.constraints.append(SosConstraint(label, expr))

    def build(self) -> ConditionBuild:
        req, reg = self.req, self.reg
        alpha = make_scalar(reg, "alpha")
        self.constraints.append(LinearConstraint(
            "alpha.min", (("alpha.c0", 1.0),), rhs=req.alpha_min, sense=">="))

        v_objs: dict[int, DecisionPolynomial] = {}
        b_objs: dict[int, DecisionPolynomial] = {}
        for m in self.centered.modes:
            v_objs[m.id] = make_template(
                reg, req.degree, state_only=not req.param_dependent_v,
                name=f"V{m.id}")
            if self.extended:
                b_objs[m.id] = make_template(
                    reg, req.b_degree or req.degree,
                    state_only=not req.param_dependent_v, name=f"B{m.id}")

        # R2: kill every coefficient of V that survives at x = 0
        for m in self.centered.modes:
            vq = v_objs[m.id]
            pinned = [cn for mono, cn in zip(vq.support, vq.coeff_names)
                      if mono.state_degree(reg) == 0]
            for k, cname in enumerate(pinned):
                self.constraints.append(LinearConstraint(
                    f"R2.m{m.id}.{k}", ((cname, 1.0),), rhs=0.0))

        for m in self.centered.modes:
            vq = v_objs[m.id]
            floor = alpha.as_expr() * self.xsq
            for pi, tag in self.piece_tags(m):
                self.positivity("R1", vq, m, pi, tag, ("a", "b", "eta"),
                                floor_expr=floor)
                self.decrease("EC2" if self.extended else "R3", vq, m, pi,
                              tag, ("c", "d", "beta"),
                              use_rate=not self.extended)
                if self.extended:
                    bq = b_objs[m.id]
                    self.positivity("EC3", bq, m, pi, tag, ("aB", "bB", "etaB"))
                    self.decrease("EC4", bq, m, pi, tag, ("cB", "dB", "betaB"),
                                  use_rate=True)

        for e in self.centered.edges:
            src = self.centered.mode(e.source)
            v_src = v_objs[e.source]
            v_dst_reset = v_objs[e.target].as_expr().compose_state(list(e.reset))
            for pi, tag in self.edge_tags(e, src):
                base = v_src.as_expr() * self.r[e.source] - v_dst_reset
                self.jump("R4", e, src, pi, tag, base, ("i", "j", "zeta"), "m")
                if self.extended:
                    b_dst_reset = b_objs[e.target].as_expr().compose_state(
                        list(e.reset))
                    base2 = v_dst_reset.copy() * req.gamma_b - b_dst_reset
                    self.jump("C2", e, src, pi, tag, base2,
                              ("iB", "jB", "zetaB"), "n")

        return ConditionBuild(
            constraints=self.constraints, centered=self.centered,
            request=req, r=dict(self.r), v=v_objs, b=b_objs, alpha=alpha,
            multiplier_family=self.families)


def build_conditions(request: CertificationRequest, r) -> ConditionBuild:
    """Pose the standard feasibility problem at a fixed contraction vector."""
    rmap = _normalize_r(request.system, r)
    return _Builder(request, rmap, extended=False).build()


def build_extended_conditions(request: CertificationRequest, r) -> ConditionBuild:
    """Pose the two-function variant (barrier B alongside V)."""
    rmap = _normalize_r(request.system, r)
    return _Builder(request, rmap, extended=True).build()


def _build_for(request: CertificationRequest, r) -> ConditionBuild:
    if request.mode == "extended":
        return build_extended_conditions(request, r)
    return build_conditions(request, r)


# --------------------------------------------------------------------------
# certificates


@dataclass
class ZenoCertificate:
    status: str
    system_name: str
    system_fingerprint: str
    request_fingerprint: str
    variables: tuple[str, ...]
    parameters: tuple[str, ...]
    anchors: dict[int, tuple[float, ...]]
    degree: int
    mode: str
    rate_profile: str
    r: dict[int, float]
    alpha: float
    gamma: float
    gamma_b: float
    alpha_min: float
    b_degree: int | None
    param_dependent_v: bool
    multiplier_degrees: dict[str, int]
    max_param_degree: int | None
    trace_reg: float
    seed: int
    vs: dict[int, str]
    bs: dict[int, str]
    multipliers: dict[str, str]
    values: dict[str, float]
    grams: dict[str, dict]
    solver: dict
    tool_version: str = __version__
    verification: dict | None = None

    @property
    def certified(self) -> bool:
        return self.status == "VALID"

    def registry(self) -> VariableRegistry:
        return VariableRegistry.make(list(self.variables), list(self.parameters))

    def request_for(self, system: HybridSystem) -> CertificationRequest:
        return CertificationRequest(
            system=system, degree=self.degree, mode=self.mode,
            rate_profile=self.rate_profile, gamma=self.gamma,
            gamma_b=self.gamma_b, b_degree=self.b_degree,
            param_dependent_v=self.param_dependent_v,
            multiplier_degrees=dict(self.multiplier_degrees),
            max_param_degree=self.max_param_degree,
            alpha_min=self.alpha_min,
            r_grid=(dict(self.r),), trace_reg=self.trace_reg, seed=self.seed)

    def scale(self, lam: float) -> "ZenoCertificate":
        """Jointly rescale (V, B, multipliers, alpha, gamma) by lam > 0.

        Every condition is linear and homogeneous in these unknowns, so the
        scaled data is again a certificate, with the decrease rate lam*gamma.
        The alpha floor scales along since it is part of the normalization.
        """
        if lam <= 0:
            raise ValueError("scale factor must be positive")
        reg = self.registry()

        def rescale_text(text: str) -> str:
            return parse(text, reg).scale(lam).to_text()

        vs = {q: rescale_text(t) for q, t in self.vs.items()}
        bs = {q: rescale_text(t) for q, t in self.bs.items()}
        mults = {n: rescale_text(t) for n, t in self.multipliers.items()}
        values = {k: v * lam for k, v in self.values.items()}
        grams = {n: {"basis": list(g["basis"]),
                     "matrix": (np.asarray(g["matrix"]) * lam).tolist()}
                 for n, g in self.grams.items()}
        out = dataclasses.replace(
            self, status="UNVERIFIED", verification=None,
            alpha=self.alpha * lam, gamma=self.gamma * lam,
            alpha_min=self.alpha_min * lam,
            vs=vs, bs=bs, multipliers=mults, values=values, grams=grams)
        out.request_fingerprint = _request_fingerprint_from_cert(out)
        return out

    def to_dict(self) -> dict:
        d = {
            "format": CERT_FORMAT,
            "tool_version": self.tool_version,
            "status": self.status,
            "system_name": self.system_name,
            "system_fingerprint": self.system_fingerprint,
            "request_fingerprint": self.request_fingerprint,
            "variables": list(self.variables),
            "parameters": list(self.parameters),
            "anchors": {str(q): list(a) for q, a in self.anchors.items()},
            "degree": self.degree,
            "mode": self.mode,
            "rate_profile": self.rate_profile,
            "r": {str(q): v for q, v in self.r.items()},
            "alpha": self.alpha,
            "gamma": self.gamma,
            "gamma_b": self.gamma_b,
            "alpha_min": self.alpha_min,
            "b_degree": self.b_degree,
            "param_dependent_v": self.param_dependent_v,
            "multiplier_degrees": dict(self.multiplier_degrees),
            "max_param_degree": self.max_param_degree,
            "trace_reg": self.trace_reg,
            "seed": self.seed,
            "vs": {str(q): t for q, t in self.vs.items()},
            "bs": {str(q): t for q, t in self.bs.items()},
            "multipliers": dict(self.multipliers),
            "values": dict(self.values),
            "grams": {n: {"basis": list(g["basis"]),
                          "matrix": [list(map(float, row))
                                     for row in g["matrix"]]}
                      for n, g in self.grams.items()},
            "solver": dict(self.solver),
            "verification": self.verification,
        }
        return d

    @staticmethod
    def from_dict(d: Mapping) -> "ZenoCertificate":
        if d.get("format") != CERT_FORMAT:
            raise ValueError(f"not a certificate file (format {d.get('format')!r})")
        return ZenoCertificate(
            status=str(d["status"]),
            system_name=str(d.get("system_name", "")),
            system_fingerprint=str(d["system_fingerprint"]),
            request_fingerprint=str(d["request_fingerprint"]),
            variables=tuple(str(v) for v in d["variables"]),
            parameters=tuple(str(v) for v in d.get("parameters", [])),
            anchors={int(q): tuple(a) for q, a in d["anchors"].items()},
            degree=int(d["degree"]),
            mode=str(d["mode"]),
            rate_profile=str(d["rate_profile"]),
            r={int(q): float(v) for q, v in d["r"].items()},
            alpha=float(d["alpha"]),
            gamma=float(d["gamma"]),
            gamma_b=float(d.get("gamma_b", 1.0)),
            alpha_min=float(d["alpha_min"]),
            b_degree=(None if d.get("b_degree") is None else int(d["b_degree"])),
            param_dependent_v=bool(d["param_dependent_v"]),
            multiplier_degrees={str(k): int(v)
                                for k, v in d["multiplier_degrees"].items()},
            max_param_degree=(None if d.get("max_param_degree") is None
                              else int(d["max_param_degree"])),
            trace_reg=float(d["trace_reg"]),
            seed=int(d["seed"]),
            vs={int(q): str(t) for q, t in d["vs"].items()},
            bs={int(q): str(t) for q, t in d.get("bs", {}).items()},
            multipliers={str(k): str(v) for k, v in d["multipliers"].items()},
            values={str(k): float(v) for k, v in d["values"].items()},
            grams={str(n): {"basis": [str(b) for b in g["basis"]],
                            "matrix": [[float(x) for x in row]
                                       for row in g["matrix"]]}
                   for n, g in d["grams"].items()},
            solver=dict(d.get("solver", {})),
            tool_version=str(d.get("tool_version", "")),
            verification=d.get("verification"),
        )


def save_certificate(cert: ZenoCertificate, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cert.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def load_certificate(path: str | Path) -> ZenoCertificate:
    return ZenoCertificate.from_dict(json.loads(Path(path).read_text()))


def _request_fingerprint(request: CertificationRequest,
                         r: Mapping[int, float]) -> str:
    payload = {
        "system": fingerprint_system(request.system),
        "degree": request.degree,
        "mode": request.mode,
        "rate_profile": request.rate_profile,
        "gamma": request.gamma,
        "gamma_b": request.gamma_b,
        "b_degree": request.b_degree,
        "param_dependent_v": request.param_dependent_v,
        "multiplier_degrees": dict(request.multiplier_degrees),
        "max_param_degree": request.max_param_degree,
        "alpha_min": request.alpha_min,
        "r": {str(q): v for q, v in sorted(r.items())},
        "trace_reg": request.trace_reg,
        "seed": request.seed,
    }
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()


def _request_fingerprint_from_cert(cert: ZenoCertificate) -> str:
    payload = {
        "system": cert.system_fingerprint,
        "degree": cert.degree,
        "mode": cert.mode,
        "rate_profile": cert.rate_profile,
        "gamma": cert.gamma,
        "gamma_b": cert.gamma_b,
        "b_degree": cert.b_degree,
        "param_dependent_v": cert.param_dependent_v,
        "multiplier_degrees": dict(cert.multiplier_degrees),
        "max_param_degree": cert.max_param_degree,
        "alpha_min": cert.alpha_min,
        "r": {str(q): v for q, v in sorted(cert.r.items())},
        "trace_reg": cert.trace_reg,
        "seed": cert.seed,
    }
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()


@dataclass
class ProbeRecord:
    r: dict[int, float]
    status: str
    iterations: int
    seconds: float
    message: str = ""
    verification: str = ""


@dataclass
class CertificationFailure:
    system_name: str
    degree: int
    mode: str
    probes: list[ProbeRecord]
    message: str

    @property
    def certified(self) -> bool:
        return False

    def to_dict(self) -> dict:
        return {
            "format": "zenocert-failure/1",
            "status": "FAILED",
            "system_name": self.system_name,
            "degree": self.degree,
            "mode": self.mode,
            "message": self.message,
            "probes": [
                {"r": {str(q): v for q, v in p.r.items()}, "status": p.status,
                 "iterations": p.iterations, "seconds": round(p.seconds, 3),
                 "message": p.message, "verification": p.verification}
                for p in self.probes],
        }


def _mono_to_text(m: Monomial, reg: VariableRegistry) -> str:
    return Polynomial(reg, {m: 1.0}).to_text()


def _assemble_certificate(request: CertificationRequest, build: ConditionBuild,
                          assign, sol: SdpSolution,
                          backmap) -> ZenoCertificate:
    reg = build.centered.registry
    vs = {q: assign.polynomials[f"V{q}"].to_text() for q in build.v}
    bs = {q: assign.polynomials[f"B{q}"].to_text() for q in build.b}
    mults: dict[str, str] = {}
    for name in build.multiplier_family:
        if name in assign.polynomials:
            mults[name] = assign.polynomials[name].to_text()
        else:
            mults[name] = assign.sos_polynomials[name].to_text()
    grams: dict[str, dict] = {}
    for name in backmap.block_names:
        monos = backmap.block_bases[name]
        if monos is None:    # scalar slack of a linear inequality
            basis = ["1"]
        else:
            basis = [_mono_to_text(m, reg) for m in monos]
        grams[name] = {"basis": basis, "matrix": assign.grams[name].tolist()}
    cert = ZenoCertificate(
        status="UNVERIFIED",
        system_name=request.system.name,
        system_fingerprint=fingerprint_system(request.system),
        request_fingerprint=_request_fingerprint(request, build.r),
        variables=reg.state_names,
        parameters=reg.param_names,
        anchors={m.id: tuple(float(v) for v in m.anchor)
                 for m in request.system.modes},
        degree=request.degree, mode=request.mode,
        rate_profile=request.rate_profile,
        r=dict(build.r),
        alpha=float(assign.values["alpha.c0"]),
        gamma=request.gamma, gamma_b=request.gamma_b,
        alpha_min=request.alpha_min, b_degree=request.b_degree,
        param_dependent_v=request.param_dependent_v,
        multiplier_degrees=dict(request.multiplier_degrees),
        max_param_degree=request.max_param_degree,
        trace_reg=request.trace_reg, seed=request.seed,
        vs=vs, bs=bs, multipliers=mults,
        values={k: float(v) for k, v in assign.values.items()},
        grams=grams,
        solver={
            "status": sol.status, "iterations": sol.iterations,
            "objective": sol.objective,
            "residual_primal": assign.max_row_error,
            "residuals": sol.residuals.as_dict(),
        },
    )
    return cert


def certify(request: CertificationRequest, *,
            solver_config: SolverConfig | None = None,
            check_budget: int = 500,
            check_seed: int | None = None
            ) -> ZenoCertificate | CertificationFailure:
    """Search the r-grid for a verified certificate.

    Returns the first candidate that both solves to optimality and passes
    the independent verification; otherwise a failure report listing every
    probe with its solver status.
    """
    rep = validate(request.system)
    if not rep.ok:
        raise ValueError(f"invalid system: {rep.problems}")
    cfg = solver_config or SolverConfig()
    probes: list[ProbeRecord] = []
    for rmap in request.grids():
        t0 = time.perf_counter()
        build = _build_for(request, rmap)
        instance, backmap = lower(build.constraints, trace_reg=request.trace_reg)
        log.info("%s: degree %d, r=%s: %d rows, %d blocks, %d free",
                 request.system.name, request.degree,
                 {q: round(v, 3) for q, v in rmap.items()},
                 instance.n_rows, len(instance.block_dims), instance.n_free)
        sol = solve(instance, cfg)
        dt = time.perf_counter() - t0
        if sol.status != STATUS_OPTIMAL:
            log.info("  probe r=%s: %s after %d iterations (%.1fs)",
                     rmap, sol.status, sol.iterations, dt)
            probes.append(ProbeRecord(dict(rmap), sol.status, sol.iterations,
                                      dt, sol.message))
            continue
        assign = reconstruct(instance, sol, backmap)
        cert = _assemble_certificate(request, build, assign, sol, backmap)
        report = check_certificate(request.system, cert,
                                   sample_budget=check_budget,
                                   seed=check_seed)
        if report.valid:
            cert.status = "VALID"
            cert.verification = report.to_dict()
            log.info("  probe r=%s: certificate VALID (%.1fs)", rmap, dt)
            return cert
        summary = "; ".join(report.problems[:4])
        log.warning("  probe r=%s: solved but verification failed: %s",
                    rmap, summary)
        probes.append(ProbeRecord(dict(rmap), "VerificationFailed",
                                  sol.iterations, dt, sol.message, summary))
    return CertificationFailure(
        system_name=request.system.name, degree=request.degree,
        mode=request.mode, probes=probes,
        message=f"no certificate found over {len(probes)} probe(s)")


# --------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    valid: bool
    problems: list[str]
    algebraic: dict[str, dict]
    linear: dict[str, float]
    sampling: list[dict]
    seed: int
    budget: int

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "problems": list(self.problems),
            "algebraic": self.algebraic,
            "linear": self.linear,
            "sampling": self.sampling,
            "seed": self.seed,
            "budget": self.budget,
        }


def _max_coeff_diff(a: Polynomial, b: Polynomial) -> float:
    diff = a - b
    return max((abs(c) for _, c in diff), default=0.0)


def _param_grid(system: HybridSystem, n: int = 5) -> list[tuple[float, ...]]:
    reg = system.registry
    if reg.n_params == 0:
        return [()]
    box = system.parameter_set.box
    if not box:
        raise ValueError("parameter sampling requires a declared sampling box")
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=1)
    return [tuple(map(float, row)) for row in flat]


def _membership_mask(xs: np.ndarray, pvals: tuple[float, ...],
                     inequalities, stricts, tol_strict=1e-9,
                     tol_loose=-1e-12) -> np.ndarray:
    n = len(xs)
    if pvals:
        pts = np.hstack([xs, np.tile(pvals, (n, 1))])
    else:
        pts = xs
    mask = np.ones(n, dtype=bool)
    for g, s in zip(inequalities, stricts):
        v = g.evaluate_batch(pts)
        mask &= (v > tol_strict) if s else (v >= tol_loose)
    return mask


def _full_points(xs: np.ndarray, pvals: tuple[float, ...]) -> np.ndarray:
    if pvals:
        return np.hstack([xs, np.tile(pvals, (len(xs), 1))])
    return xs


class _Sampler:
    """Seeded rejection sampler over the centered system's regions."""

    def __init__(self, centered: HybridSystem, rng: np.random.Generator):
        self.sys = centered
        self.reg = centered.registry
        self.rng = rng
        self._scale: dict[tuple, float] = {}

    def _region(self, mode, piece_idx):
        piece = mode.pieces[piece_idx]
        ineqs = list(mode.neighborhood.inequalities) + list(piece.inequalities)
        stricts = list(mode.neighborhood.strict) + list(piece.strict)
        return ineqs, stricts

    def _find_scale(self, key, ineqs, stricts, pvals) -> float:
        if key in self._scale:
            return self._scale[key]
        L = 8.0
        nx = self.reg.n_state
        while L > 1e-4:
            xs = self.rng.uniform(-L, L, size=(256, nx))
            if _membership_mask(xs, pvals, ineqs, stricts).any():
                break
            L *= 0.5
        self._scale[key] = L
        return L

    def region_points(self, mode, piece_idx, pvals, budget: int,
                      max_attempts: int = 400_000) -> np.ndarray:
        ineqs, stricts = self._region(mode, piece_idx)
        L = self._find_scale(("mode", mode.id, piece_idx), ineqs, stricts, pvals)
        nx = self.reg.n_state
        got: list[np.ndarray] = []
        total = 0
        attempts = 0
        chunk = max(4 * budget, 4096)
        while total < budget and attempts < max_attempts:
            xs = self.rng.uniform(-L, L, size=(chunk, nx))
            attempts += chunk
            mask = _membership_mask(xs, pvals, ineqs, stricts)
            if mask.any():
                take = xs[mask][:budget - total]
                got.append(take)
                total += len(take)
        if not got:
            return np.zeros((0, nx))
        return np.vstack(got)

    def guard_points(self, edge, mode, pvals, budget: int,
                     max_attempts: int = 400_000) -> np.ndarray:
        """Points on the guard equality, inside the certification
        neighborhood and the closure of the source domain."""
        reg = self.reg
        nx = reg.n_state
        h0 = edge.guard.equality
        grads = [h0.diff(i) for i in range(nx)]
        w_ineqs = list(mode.neighborhood.inequalities)
        w_strict = list(mode.neighborhood.strict)
        L = self._find_scale(("guardbox", mode.id), w_ineqs, w_strict, pvals)
        got: list[np.ndarray] = []
        total = 0
        attempts = 0
        chunk = max(4 * budget, 4096)
        while total < budget and attempts < max_attempts:
            xs = self.rng.uniform(-L, L, size=(chunk, nx))
            attempts += chunk
            pts = _full_points(xs, pvals)
            for _ in range(15):
                hv = h0.evaluate_batch(pts)
                gs = np.stack([g.evaluate_batch(pts) for g in grads], axis=1)
                denom = np.einsum("ij,ij->i", gs, gs)
                ok = denom > 1e-14
                step = np.where(ok, hv / np.where(ok, denom, 1.0), 0.0)
                pts[:, :nx] -= step[:, None] * gs
            xs2 = pts[:, :nx]
            scale = 1.0 + np.linalg.norm(xs2, axis=1)
            on = np.abs(h0.evaluate_batch(pts)) <= 1e-8 * scale
            mask = on & _membership_mask(xs2, pvals, w_ineqs, w_strict)
            for hl in edge.guard.inequalities:
                mask &= hl.evaluate_batch(pts) >= -1e-9
            # the transition only fires from inside the source domain
            dom = np.zeros(len(xs2), dtype=bool)
            for piece in mode.pieces:
                dom |= _membership_mask(xs2, pvals, piece.inequalities,
                                        (False,) * len(piece.inequalities))
            mask &= dom
            if mask.any():
                take = xs2[mask][:budget - total]
                got.append(take)
                total += len(take)
        if not got:
            return np.zeros((0, nx))
        return np.vstack(got)


def check_certificate(system: HybridSystem, cert: ZenoCertificate,
                      sample_budget: int = 1000,
                      seed: int | None = None) -> VerificationReport:
    """Independent verification: re-derive every identity from the stored
    Gram matrices and coefficient values, then sample the resulting
    Lyapunov conditions over the regions they are claimed on."""
    problems: list[str] = []
    algebraic: dict[str, dict] = {}
    linear: dict[str, float] = {}
    sampling: list[dict] = []
    use_seed = cert.seed if seed is None else seed

    sys_fp = fingerprint_system(system)
    if sys_fp != cert.system_fingerprint:
        problems.append("system fingerprint does not match the certificate")

    rvals = list(cert.r.values())
    if any(not 0.0 < v <= 1.0 for v in rvals):
        problems.append(f"contraction values {rvals} outside (0, 1]")
    elif min(rvals) >= 1.0:
        problems.append("contraction vector has no entry below 1")
    if cert.alpha < cert.alpha_min - 1e-12:
        problems.append(f"alpha {cert.alpha} below its floor {cert.alpha_min}")
    if cert.gamma <= 0:
        problems.append("gamma must be positive")

    try:
        request = cert.request_for(system)
        build = _build_for(request, dict(cert.r))
    except (ValueError, KeyError) as exc:
        problems.append(f"could not rebuild the conditions: {exc}")
        return VerificationReport(False, problems, algebraic, linear,
                                  sampling, use_seed, sample_budget)

    reg = build.centered.registry
    values = dict(cert.values)
    grams: dict[str, np.ndarray] = {}
    for name, g in cert.grams.items():
        grams[name] = np.asarray(g["matrix"], dtype=float)

    # gram eigenvalue floor, every stored block
    for name, Q in grams.items():
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            problems.append(f"gram {name!r} is not square")
            continue
        eig = float(np.linalg.eigvalsh(0.5 * (Q + Q.T)).min()) if Q.size else 0.0
        entry = algebraic.setdefault(name, {})
        entry["min_eig"] = eig
        if eig < GRAM_EIG_TOL:
            problems.append(f"gram {name!r} has eigenvalue {eig:.3e}")

    gram_polys: dict[str, Polynomial] = {}
    for name, g in cert.grams.items():
        Q = grams[name]
        try:
            basis = [parse(t, reg) for t in g["basis"]]
        except Exception as exc:
            problems.append(f"gram {name!r}: unreadable basis: {exc}")
            continue
        monos = []
        for b in basis:
            terms = b.sorted_terms()
            if len(terms) != 1 or terms[0][1] != 1.0:
                problems.append(f"gram {name!r}: basis entry {b.to_text()!r} "
                                "is not a monomial")
                break
            monos.append(terms[0][0])
        else:
            if Q.shape != (len(monos), len(monos)):
                problems.append(f"gram {name!r}: matrix shape {Q.shape} does "
                                f"not match basis size {len(monos)}")
                continue
            acc: dict[Monomial, float] = {}
            for i in range(len(monos)):
                for j in range(i, len(monos)):
                    v = Q[i, j] * (1.0 if i == j else 2.0)
                    if v != 0.0:
                        mono = monos[i] * monos[j]
                        acc[mono] = acc.get(mono, 0.0) + v
            gram_polys[name] = Polynomial(reg, acc)

    # identity residuals
    for con in build.constraints:
        if isinstance(con, LinearConstraint):
            try:
                val = sum(c * values[n] for n, c in con.coeffs)
            except KeyError as exc:
                problems.append(f"{con.label}: missing value {exc}")
                continue
            gap = val - con.rhs
            linear[con.label] = float(gap)
            if con.sense == "==" and abs(gap) > ALG_RESIDUAL_TOL:
                problems.append(f"{con.label}: equality off by {gap:.3e}")
            if con.sense == ">=" and gap < -ALG_RESIDUAL_TOL:
                problems.append(f"{con.label}: inequality violated by {gap:.3e}")
            continue
        slack_name = f"{con.label}.gram"
        if slack_name not in gram_polys:
            problems.append(f"{con.label}: no usable witness gram")
            continue
        try:
            lhs = con.expr.to_polynomial(values, grams)
        except KeyError as exc:
            problems.append(f"{con.label}: missing unknown {exc}")
            continue
        residual = _max_coeff_diff(lhs, gram_polys[slack_name])
        algebraic.setdefault(slack_name, {})["residual"] = residual
        if residual > ALG_RESIDUAL_TOL:
            problems.append(f"{con.label}: identity residual {residual:.3e}")

    # stored polynomial text must agree with the witness data
    def check_text(name: str, text: str, reference: Polynomial) -> None:
        try:
            p = parse(text, reg)
        except Exception as exc:
            problems.append(f"{name}: unreadable polynomial text: {exc}")
            return
        diff = _max_coeff_diff(p, reference)
        ref_scale = max((abs(c) for _, c in reference), default=0.0)
        if diff > 1e-9 * (1.0 + ref_scale):
            problems.append(f"{name}: stored text differs from witness data "
                            f"by {diff:.3e}")

    v_polys: dict[int, Polynomial] = {}
    b_polys: dict[int, Polynomial] = {}
    for q, obj in build.v.items():
        try:
            ref = obj.assemble(values)
        except KeyError as exc:
            problems.append(f"V{q}: missing coefficient {exc}")
            continue
        if q in cert.vs:
            check_text(f"V{q}", cert.vs[q], ref)
            v_polys[q] = parse(cert.vs[q], reg)
        else:
            problems.append(f"certificate has no polynomial for mode {q}")
    for q, obj in build.b.items():
        if q not in cert.bs:
            problems.append(f"certificate has no barrier for mode {q}")
            continue
        ref = obj.assemble(values)
        check_text(f"B{q}", cert.bs[q], ref)
        b_polys[q] = parse(cert.bs[q], reg)

    # anchor value
    pgrid = None
    try:
        pgrid = _param_grid(build.centered)
    except ValueError as exc:
        problems.append(str(exc))
    if pgrid:
        zero = np.zeros(reg.n_state)
        for q, vq in v_polys.items():
            worst = max(abs(vq.evaluate(np.concatenate([zero, np.array(p)])))
                        for p in pgrid)
            if worst > ANCHOR_VALUE_TOL:
                problems.append(f"V{q} at the anchor is {worst:.3e}")

    if len(v_polys) == len(build.v) and pgrid:
        _sampled_conditions(build, cert, v_polys, b_polys, pgrid,
                            sample_budget, use_seed, sampling, problems)

    valid = not problems
    return VerificationReport(valid, problems, algebraic, linear, sampling,
                              use_seed, sample_budget)


def _sampled_conditions(build: ConditionBuild, cert: ZenoCertificate,
                        v_polys, b_polys, pgrid, budget, seed,
                        sampling: list[dict], problems: list[str]) -> None:
    centered = build.centered
    reg = centered.registry
    nx = reg.n_state
    rng = np.random.default_rng(seed)
    sampler = _Sampler(centered, rng)
    per_p = max(1, budget // len(pgrid))
    extended = cert.mode == "extended"

    def record(condition: str, where: str, pts: int, worst: float) -> bool:
        ok = worst >= -SAMPLE_SLACK
        sampling.append({"condition": condition, "where": where,
                         "points": pts, "worst_margin": float(worst),
                         "pass": bool(ok)})
        if not ok:
            problems.append(f"{condition} fails at sampled points in {where} "
                            f"(worst margin {worst:.3e})")
        if pts == 0:
            problems.append(f"{condition}: no sample points found in {where}")
            sampling[-1]["pass"] = False
            return False
        return ok

    def rate_values(xs: np.ndarray) -> np.ndarray:
        if cert.rate_profile == "quadratic":
            return cert.gamma * np.einsum("ij,ij->i", xs, xs)
        if cert.rate_profile == "quartic":
            return cert.gamma * np.einsum("ij,ij->i", xs, xs) ** 2
        return np.full(len(xs), cert.gamma)

    for m in centered.modes:
        vq = v_polys[m.id]
        gradv = [vq.diff(i) for i in range(nx)]
        bq = b_polys.get(m.id)
        gradb = [bq.diff(i) for i in range(nx)] if bq is not None else None
        for pi in range(len(m.pieces)):
            where = f"mode {m.id}" + (f" piece {pi}" if len(m.pieces) > 1 else "")
            n_pts = 0
            w1 = w3 = we3 = we4 = np.inf
            for pv in pgrid:
                xs = sampler.region_points(m, pi, pv, per_p)
                if not len(xs):
                    continue
                n_pts += len(xs)
                pts = _full_points(xs, pv)
                vvals = vq.evaluate_batch(pts)
                floor = cert.alpha * np.einsum("ij,ij->i", xs, xs)
                w1 = min(w1, float((vvals - floor).min()))
                lie = np.zeros(len(xs))
                for i in range(nx):
                    lie += gradv[i].evaluate_batch(pts) * \
                        m.field_[i].evaluate_batch(pts)
                if extended:
                    w3 = min(w3, float((-lie).min()))
                else:
                    w3 = min(w3, float((-lie - rate_values(xs)).min()))
                if bq is not None:
                    bvals = bq.evaluate_batch(pts)
                    we3 = min(we3, float(bvals.min()))
                    lieb = np.zeros(len(xs))
                    for i in range(nx):
                        lieb += gradb[i].evaluate_batch(pts) * \
                            m.field_[i].evaluate_batch(pts)
                    we4 = min(we4, float((-lieb - rate_values(xs)).min()))
            w1 = w1 if np.isfinite(w1) else 0.0
            w3 = w3 if np.isfinite(w3) else 0.0
            record("NC1", where, n_pts, w1)
            record("NC3" if not extended else "EC2", where, n_pts, w3)
            if bq is not None:
                record("EC3", where, n_pts,
                       we3 if np.isfinite(we3) else 0.0)
                record("EC4", where, n_pts,
                       we4 if np.isfinite(we4) else 0.0)

    for e in centered.edges:
        src = centered.mode(e.source)
        v_src = v_polys[e.source]
        v_dst = v_polys[e.target]
        b_dst = b_polys.get(e.target)
        where = f"edge {e.source}->{e.target}"
        n_pts = 0
        w4 = wc2 = np.inf
        for pv in pgrid:
            xs = sampler.guard_points(e, src, pv, per_p)
            if not len(xs):
                continue
            n_pts += len(xs)
            pts = _full_points(xs, pv)
            image = np.stack([phi.evaluate_batch(pts) for phi in e.reset],
                             axis=1)
            ipts = _full_points(image, pv)
            vpre = v_src.evaluate_batch(pts)
            vpost = v_dst.evaluate_batch(ipts)
            w4 = min(w4, float((cert.r[e.source] * vpre - vpost).min()))
            if b_dst is not None:
                bpost = b_dst.evaluate_batch(ipts)
                wc2 = min(wc2, float((cert.gamma_b * vpost - bpost).min()))
        record("NC4", where, n_pts, w4 if np.isfinite(w4) else 0.0)
        if b_dst is not None:
            record("C2", where, n_pts, wc2 if np.isfinite(wc2) else 0.0)


# --------------------------------------------------------------------------
# parameter sweeps


@dataclass
class SweepProbe:
    value: float
    status: str
    detail: str = ""


@dataclass
class SweepResult:
    scalar: str
    degree: int
    bracket: tuple[float, float]
    tolerance: float
    probes: list[SweepProbe]
    brackets: list[tuple[float, float]]
    bound: float | None
    ok: bool
    message: str
    certificate: ZenoCertificate | None = None

    def to_dict(self) -> dict:
        return {
            "scalar": self.scalar,
            "degree": self.degree,
            "bracket": list(self.bracket),
            "tolerance": self.tolerance,
            "bound": self.bound,
            "ok": self.ok,
            "message": self.message,
            "probes": [{"value": p.value, "status": p.status,
                        "detail": p.detail} for p in self.probes],
            "brackets": [list(b) for b in self.brackets],
        }


def _tightened(cfg: SolverConfig) -> SolverConfig:
    return dataclasses.replace(cfg, feas_tol=cfg.feas_tol * 1e-2,
                               gap_tol=cfg.gap_tol * 1e-2,
                               max_iter=cfg.max_iter + 100)


def sweep_lower_bound(make_request: Callable[[float], CertificationRequest],
                      bracket: tuple[float, float], tolerance: float, *,
                      scalar_name: str = "C",
                      solver_config: SolverConfig | None = None,
                      check_budget: int = 300,
                      max_probes: int = 60) -> SweepResult:
    """Bisect for the smallest certified value of a scalar bound.

    `make_request(value)` must return the certification request for the
    system instantiated at that value of the swept scalar.  The bracket must
    certify at its upper end and fail at its lower end.  The contraction
    vector of the first successful probe is reused for all later probes.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise ValueError(f"bracket ({lo}, {hi}) is not increasing")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    cfg = solver_config or SolverConfig()
    probes: list[SweepProbe] = []
    brackets: list[tuple[float, float]] = [(lo, hi)]
    locked_r: dict[int, float] | None = None
    best_cert: ZenoCertificate | None = None

    def run(value: float) -> str:
        nonlocal locked_r, best_cert
        req = make_request(value)
        if locked_r is not None:
            req = dataclasses.replace(req, r_grid=(dict(locked_r),))
        out = certify(req, solver_config=cfg, check_budget=check_budget)
        if isinstance(out, ZenoCertificate):
            if locked_r is None:
                locked_r = dict(out.r)
                log.info("sweep: locking contraction vector %s", locked_r)
            best_cert = out
            probes.append(SweepProbe(value, "certified"))
            return "certified"
        numerical = out.probes and all(
            p.status in ("NumericalFailure", "IterationLimit")
            for p in out.probes)
        if numerical:
            log.info("sweep: probe %.6g hit %s, retrying tightened",
                     value, out.probes[-1].status)
            out2 = certify(req, solver_config=_tightened(cfg),
                           check_budget=check_budget)
            if isinstance(out2, ZenoCertificate):
                if locked_r is None:
                    locked_r = dict(out2.r)
                best_cert = out2
                probes.append(SweepProbe(value, "certified", "after retry"))
                return "certified"
            still = out2.probes and all(
                p.status in ("NumericalFailure", "IterationLimit")
                for p in out2.probes)
            if still:
                probes.append(SweepProbe(value, "excluded",
                                         out2.probes[-1].status))
                return "excluded"
            probes.append(SweepProbe(value, "infeasible", out2.message))
            return "infeasible"
        probes.append(SweepProbe(value, "infeasible", out.message))
        return "infeasible"

    req0 = make_request(hi)
    degree = req0.degree

    hi_status = run(hi)
    if hi_status != "certified":
        lo_status = run(lo)
        return SweepResult(scalar_name, degree, (lo, hi), tolerance, probes,
                           brackets, None, False,
                           f"invalid bracket: {scalar_name}={hi} is "
                           f"{hi_status}, {scalar_name}={lo} is {lo_status}")
    lo_status = run(lo)
    if lo_status == "certified":
        return SweepResult(scalar_name, degree, (lo, hi), tolerance, probes,
                           brackets, None, False,
                           f"invalid bracket: both endpoints certify")

    while hi - lo > tolerance and len(probes) < max_probes:
        mid = 0.5 * (lo + hi)
        status = run(mid)
        if status == "excluded":
            mid = lo + 0.43 * (hi - lo)
            status = run(mid)
        if status == "certified":
            hi = mid
        elif status == "infeasible":
            lo = mid
        else:
            log.warning("sweep: two excluded probes in a row, stopping early")
            break
        brackets.append((lo, hi))

    return SweepResult(scalar_name, degree, brackets[0], tolerance, probes,
                       brackets, hi, True,
                       f"smallest certified {scalar_name} = {hi:.6g}",
                       certificate=best_cert)


def sweep_degrees(make_request: Callable[[int, float], CertificationRequest],
                  degrees: Sequence[int], bracket: tuple[float, float],
                  tolerance: float, *, scalar_name: str = "C",
                  solver_config: SolverConfig | None = None,
                  check_budget: int = 300) -> list[SweepResult]:
    """Run the bound sweep at each degree, feeding each certified bound in
    as the next degree's upper endpoint (templates nest, so a bound that
    certifies at one degree certifies at any higher one)."""
    lo, hi = float(bracket[0]), float(bracket[1])
    results: list[SweepResult] = []
    for d in degrees:
        res = sweep_lower_bound(lambda v, d=d: make_request(d, v),
                                (lo, hi), tolerance,
                                scalar_name=scalar_name,
                                solver_config=solver_config,
                                check_budget=check_budget)
        results.append(res)
        if res.ok and res.bound is not None:
            hi = res.bound
    return results
