"""Hybrid execution simulator and empirical classifier.

Integrates one mode's vector field with an adaptive Runge-Kutta 5(4) pair
until the outgoing guard is crossed, applies the reset, and repeats, with
the usual care near accumulation points: crossings are accepted only when
the guard's side constraints hold and the transition is geometrically
consistent (the flow actually leaves the current domain, or the reset image
lies in the target domain), a short event-free warm-up after every reset
keeps the integrator from re-firing on the surface it just landed on, and
executions stop once dwell times fall below a cutoff or the state collapses
into the anchor.

Classification of the resulting dwell-time tail is a finite-budget heuristic,
not a proof, and every report labels it "empirical".  An execution counts as
Zeno only when its dwell times contract geometrically (so the total-time
estimate converges); trajectories that spiral into the anchor with
non-shrinking dwell times are reported Inconclusive with a note saying so,
and recurrences whose return points sink into the anchor are not counted as
limit cycles.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .certify import ZenoCertificate
from .hybrid import HybridSystem, Mode
from .polynomials import Polynomial, parse
from .sysio import fingerprint_system

__all__ = [
    "ExecutionConfig",
    "Interval",
    "Execution",
    "ZenoDiagnostics",
    "BatchRun",
    "BatchReport",
    "simulate",
    "classify",
    "zeno_time_estimate",
    "batch_validate",
    "write_csv",
    "write_phase_portrait",
]

log = logging.getLogger(__name__)

TERM_TRANSITION_BUDGET = "TransitionBudget"
TERM_DWELL_CUTOFF = "DwellCutoff"
TERM_HORIZON = "Horizon"
TERM_GUARD_UNREACHABLE = "GuardUnreachable"
TERM_ANCHOR = "AnchorConvergence"
TERM_DIVERGED = "Diverged"
TERM_INTEGRATOR = "IntegratorFailure"

CLASS_ZENO = "Zeno"
CLASS_LIMIT_CYCLE = "LimitCycle"
CLASS_DIVERGENT = "Divergent"
CLASS_INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ExecutionConfig:
    """Initial condition and budgets for one simulated execution."""

    mode0: int
    x0: tuple[float, ...]
    params: tuple[float, ...] = ()
    max_transitions: int = 200
    dwell_cutoff: float = 1e-10
    rtol: float = 1e-9
    atol: float = 1e-12
    horizon: float = 120.0
    divergence_radius: float | None = None
    anchor_radius: float = 1e-9

    def __post_init__(self) -> None:
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "params",
                           tuple(float(v) for v in self.params))
        if self.max_transitions < 1:
            raise ValueError("max_transitions must be at least 1")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.dwell_cutoff < 0:
            raise ValueError("dwell_cutoff must be nonnegative")


@dataclass
class Interval:
    """One continuous piece of an execution: samples of the flow in a mode."""

    index: int
    mode: int
    t: np.ndarray
    x: np.ndarray


@dataclass
class Execution:
    system_name: str
    config: ExecutionConfig
    intervals: list[Interval]
    taus: np.ndarray                     # transition times, one per jump
    edges: list[tuple[int, int]]         # fired edge per transition
    crossings: np.ndarray                # state at each crossing, pre-reset
    termination: str
    note: str = ""
    max_reset_mismatch: float = 0.0

    @property
    def transitions(self) -> int:
        return len(self.taus)

    @property
    def dwells(self) -> np.ndarray:
        """Times between consecutive transitions."""
        return np.diff(self.taus)

    @property
    def mode_sequence(self) -> list[int]:
        return [iv.mode for iv in self.intervals]

    @property
    def terminal_state(self) -> np.ndarray:
        return self.intervals[-1].x[-1]

    @property
    def total_time(self) -> float:
        return float(self.intervals[-1].t[-1])


# --------------------------------------------------------------------------
# fast polynomial evaluation with parameters bound


class _Compiled:
    """Evaluates a tuple of polynomials at a state vector, with parameter
    values folded into the coefficients up front."""

    def __init__(self, polys: Sequence[Polynomial], pvals: Sequence[float],
                 n_state: int):
        self.parts = []
        p = np.asarray(pvals, dtype=float)
        for poly in polys:
            if not poly.terms:
                self.parts.append((np.zeros((0, n_state)), np.zeros(0)))
                continue
            E = np.array([m.exponents for m in poly.terms], dtype=float)
            c = np.array(list(poly.terms.values()), dtype=float)
            if E.shape[1] > n_state:
                c = c * np.prod(p[None, :] ** E[:, n_state:], axis=1)
                E = E[:, :n_state]
            self.parts.append((E, c))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.parts))
        for i, (E, c) in enumerate(self.parts):
            if len(c) == 0:
                out[i] = 0.0
            else:
                out[i] = np.prod(x[None, :] ** E, axis=1) @ c
        return out


def _scalar_fn(poly: Polynomial, pvals, n_state):
    comp = _Compiled([poly], pvals, n_state)
    return lambda x: float(comp(x)[0])


def _member(x: np.ndarray, ineqs, pvals, tol: float) -> bool:
    pt = list(x) + list(pvals)
    return all(h.evaluate_batch(np.array([pt]))[0] >= -tol for h in ineqs)


def _in_domain_closure(mode: Mode, x: np.ndarray, pvals, tol: float) -> bool:
    return any(_member(x, piece.inequalities, pvals, tol)
               for piece in mode.pieces)


def _rk4_step(f, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


# --------------------------------------------------------------------------
# the simulator


def simulate(system: HybridSystem, config: ExecutionConfig) -> Execution:
    """Integrate one hybrid execution until a budget or a terminal event."""
    reg = system.registry
    nx = reg.n_state
    pvals = config.params
    if len(pvals) != reg.n_params:
        raise ValueError(f"system has {reg.n_params} parameter(s), "
                         f"got {len(pvals)} value(s)")
    if len(config.x0) != nx:
        raise ValueError(f"state has {nx} component(s), got {len(config.x0)}")
    q = config.mode0
    mode = system.mode(q)
    x = np.asarray(config.x0, dtype=float)
    scale0 = max(1.0, float(np.linalg.norm(x)))
    if not _in_domain_closure(mode, x, pvals, 1e-7 * scale0):
        raise ValueError(f"initial state {tuple(float(v) for v in x)} is "
                         f"outside the closure of mode {q}'s domain")

    div_r = config.divergence_radius or 50.0 * scale0
    anchor_r = config.anchor_radius * scale0
    horizon = config.horizon

    t = 0.0
    taus: list[float] = []
    fired: list[tuple[int, int]] = []
    crossings: list[np.ndarray] = []
    intervals: list[Interval] = []
    reset_mismatch = 0.0
    termination = ""
    note = ""

    def warm_time(xv: np.ndarray, fv: np.ndarray,
                  anchor_v: np.ndarray) -> float:
        # event-free settle-in after landing on a guard surface; must stay
        # well below the local dwell time, which shrinks with the distance
        # to the accumulation point, so scale by that distance
        speed = float(np.linalg.norm(fv))
        if speed == 0.0:
            return 0.0
        dist = float(np.linalg.norm(xv - anchor_v))
        return 1e-6 * dist / speed

    warm = 0.0
    while True:
        mode = system.mode(q)
        edge = system.outgoing(q)
        f_comp = _Compiled(mode.field_, pvals, nx)
        rhs = lambda _t, xv: f_comp(xv)
        h0 = _scalar_fn(edge.guard.equality, pvals, nx)
        h_ineqs = [_scalar_fn(h, pvals, nx) for h in edge.guard.inequalities]
        anchor = np.asarray(mode.anchor, dtype=float)
        if warm == 0.0 and abs(h0(x)) <= 1e-9 * (1 + np.linalg.norm(x)):
            warm = warm_time(x, f_comp(x), anchor)

        ev_guard = lambda _t, xv: h0(xv)
        ev_guard.terminal = True
        ev_guard.direction = 0
        ev_div = lambda _t, xv: div_r ** 2 - float(xv @ xv)
        ev_div.terminal = True
        ev_div.direction = -1
        ev_anchor = lambda _t, xv: float((xv - anchor) @ (xv - anchor)) \
            - anchor_r ** 2
        ev_anchor.terminal = True
        ev_anchor.direction = -1
        hgrad = _guard_gradient(edge, pvals, nx)

        ts = [t]
        xs = [x.copy()]
        t_start = t
        rejected = 0
        outcome = None           # "transition" | terminal reason
        xe = None

        while True:
            if warm > 0.0 and t < horizon and min(t + warm, horizon) > t:
                span = (t, min(t + warm, horizon))
                sol = solve_ivp(rhs, span, x, rtol=config.rtol,
                                atol=config.atol, events=[ev_div, ev_anchor],
                                dense_output=False)
                warm = 0.0
                if sol.status < 0:
                    outcome = TERM_INTEGRATOR
                    note = sol.message
                    break
                ts.extend(sol.t[1:])
                xs.extend(sol.y.T[1:])
                t, x = float(sol.t[-1]), sol.y[:, -1].copy()
                if sol.status == 1:
                    outcome = (TERM_DIVERGED if len(sol.t_events[0])
                               else TERM_ANCHOR)
                    break
            if t >= horizon:
                outcome = TERM_HORIZON
                break
            sol = solve_ivp(rhs, (t, horizon), x, rtol=config.rtol,
                            atol=config.atol,
                            events=[ev_guard, ev_div, ev_anchor],
                            dense_output=True)
            if sol.status < 0:
                ts.extend(sol.t[1:])
                xs.extend(sol.y.T[1:])
                t, x = float(sol.t[-1]), sol.y[:, -1].copy()
                outcome = TERM_INTEGRATOR
                note = sol.message
                break
            if sol.status == 0 or len(sol.t_events[0]) == 0:
                ts.extend(sol.t[1:])
                xs.extend(sol.y.T[1:])
                t, x = float(sol.t[-1]), sol.y[:, -1].copy()
                if sol.status == 1:
                    outcome = (TERM_DIVERGED if len(sol.t_events[1])
                               else TERM_ANCHOR)
                else:
                    outcome = TERM_HORIZON
                break

            te = float(sol.t_events[0][0])
            xe = sol.y_events[0][0].copy()
            # polish the crossing with Newton steps on the dense output so
            # |h| <= 1e-12 * scale even when the event root is loose
            sc = 1.0 + float(np.linalg.norm(xe))
            for _ in range(4):
                hv = h0(xe)
                if abs(hv) <= 1e-13 * sc:
                    break
                hdot = float(np.dot(hgrad(xe), f_comp(xe)))
                if hdot == 0.0 or not math.isfinite(hdot):
                    break
                te = min(max(te - hv / hdot, sol.t[0]), sol.t[-1])
                xe = sol.sol(te)
            keep = sol.t < te
            ts.extend(sol.t[1:][keep[1:]])
            xs.extend(sol.y.T[1:][keep[1:]])
            ts.append(te)
            xs.append(xe.copy())

            # acceptance: side constraints, a confirmed sign change (rules
            # out grazing touches), and geometric consistency (rules out
            # crossings of the guard line's far ray, where the flow stays
            # inside the domain and the reset lands nowhere useful)
            ok_side = all(h(xe) >= -1e-9 * sc for h in h_ineqs)
            delta = max(1e-13 * (1 + te),
                        1e-7 * (1 + np.linalg.norm(xe))
                        / (1 + np.linalg.norm(f_comp(xe))))
            xp = _rk4_step(f_comp, xe, delta)
            tb = max(te - delta, sol.t[0])
            sign_before = h0(sol.sol(tb)) if tb < te else -h0(xp)
            crossed = h0(xp) * sign_before < 0
            exits = not _in_domain_closure(mode, xp, pvals, 1e-9 * sc)
            res_comp = _Compiled(edge.reset, pvals, nx)
            xr = res_comp(xe)
            lands = _in_domain_closure(system.mode(edge.target), xr, pvals,
                                       1e-9 * sc)
            if ok_side and crossed and (exits or lands):
                outcome = "transition"
                break
            rejected += 1
            if rejected > 200:
                outcome = TERM_GUARD_UNREACHABLE
                note = "crossing candidates kept failing acceptance"
                break
            t, x = te + delta, xp
            warm = warm_time(xp, f_comp(xp), anchor)

        intervals.append(Interval(len(intervals), q,
                                  np.asarray(ts), np.vstack(xs)))
        if outcome != "transition":
            if outcome == TERM_HORIZON:
                dur = t - t_start
                med = (float(np.median(np.diff(taus)))
                       if len(taus) >= 3 else horizon)
                if not taus or dur >= max(0.2 * horizon, 10.0 * med):
                    outcome = TERM_GUARD_UNREACHABLE
                    note = "outgoing guard never crossed"
            termination = outcome
            break

        res_comp = _Compiled(edge.reset, pvals, nx)
        xr = res_comp(xe)
        taus.append(te)
        fired.append((edge.source, edge.target))
        crossings.append(xe.copy())
        dwell = te - t_start
        q = edge.target
        t, x = te, xr
        warm = warm_time(xr, _Compiled(system.mode(q).field_, pvals,
                                       nx)(xr),
                         np.asarray(system.mode(q).anchor, dtype=float))
        if dwell < config.dwell_cutoff:
            intervals.append(Interval(len(intervals), q,
                                      np.array([t]), xr[None, :]))
            termination = TERM_DWELL_CUTOFF
            break
        if len(taus) >= config.max_transitions:
            intervals.append(Interval(len(intervals), q,
                                      np.array([t]), xr[None, :]))
            termination = TERM_TRANSITION_BUDGET
            break

    # reset-consistency audit straight from the stored samples
    for k in range(len(taus)):
        pre = crossings[k]
        post = intervals[k + 1].x[0]
        ed = next(e for e in system.edges
                  if (e.source, e.target) == fired[k])
        res = _Compiled(ed.reset, pvals, nx)
        reset_mismatch = max(reset_mismatch,
                             float(np.max(np.abs(post - res(pre)))))

    return Execution(
        system_name=system.name, config=config, intervals=intervals,
        taus=np.asarray(taus), edges=fired,
        crossings=(np.vstack(crossings) if crossings
                   else np.zeros((0, nx))),
        termination=termination, note=note,
        max_reset_mismatch=reset_mismatch)


def _guard_gradient(edge, pvals, nx):
    grads = [edge.guard.equality.diff(i) for i in range(nx)]
    comp = _Compiled(grads, pvals, nx)
    return comp


# --------------------------------------------------------------------------
# classification


@dataclass
class ZenoDiagnostics:
    classification: str
    rho: float | None
    rho_stderr: float | None
    fit_residual: float | None
    cycle_length: int
    tail_cycles: int
    zeno_time: float | None
    zeno_time_error: float | None
    notes: str
    basis: str = "empirical"

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "basis": self.basis,
            "rho": self.rho,
            "rho_stderr": self.rho_stderr,
            "fit_residual": self.fit_residual,
            "cycle_length": self.cycle_length,
            "tail_cycles": self.tail_cycles,
            "zeno_time": self.zeno_time,
            "zeno_time_error": self.zeno_time_error,
            "notes": self.notes,
        }


def _cycle_sums(dwells: np.ndarray, cycle: int, max_cycles: int = 30):
    """Group the dwell tail into per-cycle sums, newest last."""
    k = min(max_cycles, len(dwells) // cycle)
    if k == 0:
        return np.zeros(0)
    tail = dwells[len(dwells) - k * cycle:]
    return tail.reshape(k, cycle).sum(axis=1)


def _geometric_fit(values: np.ndarray):
    """Least-squares fit of log(values) to a line; returns
    (ratio, stderr_of_ratio, rms_residual)."""
    if len(values) < 3 or np.any(values <= 0):
        return None, None, None
    y = np.log(values)
    k = np.arange(len(y), dtype=float)
    A = np.stack([k, np.ones_like(k)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    dof = max(1, len(y) - 2)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    slope_err = float(np.sqrt(cov[0, 0]))
    rho = float(np.exp(coef[0]))
    return rho, rho * slope_err, rms


def classify(execution: Execution) -> ZenoDiagnostics:
    """Heuristic label for the asymptotic behavior of one execution."""
    dwells = execution.dwells
    modes = execution.mode_sequence
    cycle = max(1, len(set(modes)))
    scale0 = max(1.0, float(np.linalg.norm(execution.config.x0)))

    sums = _cycle_sums(dwells, cycle)
    rho, rho_err, resid = _geometric_fit(sums)
    radii = _crossing_radii(execution)
    rrho, _, _ = _geometric_fit(_cycle_sums(radii, cycle)
                                / max(1, cycle)) if len(radii) else (None,) * 3

    def diag(label, notes=""):
        zt = ze = None
        if label == CLASS_ZENO and rho is not None and rho < 1:
            try:
                zt, ze = zeno_time_estimate_from(rho, rho_err, execution,
                                                 cycle)
            except ValueError:
                pass
        return ZenoDiagnostics(
            classification=label, rho=rho, rho_stderr=rho_err,
            fit_residual=resid, cycle_length=cycle,
            tail_cycles=len(sums), zeno_time=zt, zeno_time_error=ze,
            notes=notes)

    # terminal-event shortcuts: the integrator already drove the execution
    # into the accumulation regime, even if too few transitions remain
    # for a clean fit
    # compare whole cycle sums, not same-phase dwells: a system can shrink
    # one leg of the cycle geometrically while another leg keeps a fixed
    # duration, and then the total time still diverges
    contracting_tail = len(sums) >= 2 and sums[-1] < 0.97 * sums[-2]
    if execution.termination in (TERM_DWELL_CUTOFF, TERM_ANCHOR) \
            and contracting_tail:
        return diag(CLASS_ZENO,
                    f"terminated by {execution.termination} with a "
                    f"contracting dwell tail")

    if execution.termination == TERM_DIVERGED:
        return diag(CLASS_DIVERGENT, "state left the divergence radius")

    if execution.transitions < 10:
        return diag(CLASS_INCONCLUSIVE,
                    f"only {execution.transitions} transition(s)")

    if rho is None:
        return diag(CLASS_INCONCLUSIVE, "dwell tail too short to fit")

    if rho < 0.97 and resid < 0.05:
        return diag(CLASS_ZENO, "geometric dwell contraction")

    if abs(rho - 1.0) <= 0.03:
        ret_dist, ret_radius = _poincare_return(execution)
        if ret_dist is not None and ret_dist < 1e-3 * scale0 \
                and ret_radius > 1e-2 * scale0:
            return diag(CLASS_LIMIT_CYCLE,
                        f"recurrent returns at radius {ret_radius:.3g}")
        if rrho is not None and rrho < 0.97:
            return diag(
                CLASS_INCONCLUSIVE,
                "state converges to the anchor but dwell times do not "
                "contract; the total-time estimate diverges (spatial "
                "accumulation only)")

    if rrho is not None and rrho > 1.05:
        return diag(CLASS_DIVERGENT, "crossing radii grow geometrically")
    if rho > 1.05:
        return diag(CLASS_DIVERGENT, "dwell times grow geometrically")

    return diag(CLASS_INCONCLUSIVE, "no stable pattern in the tail")


def _crossing_radii(execution: Execution) -> np.ndarray:
    if not len(execution.crossings):
        return np.zeros(0)
    # distance to the (source-mode) anchor at each crossing; the bundled
    # systems anchor everything at the origin so this is just the norm
    return np.linalg.norm(execution.crossings, axis=1)


def _poincare_return(execution: Execution):
    """Max distance between the last few same-edge returns and their radius."""
    by_edge: dict[tuple[int, int], list[np.ndarray]] = {}
    for ed, xc in zip(execution.edges, execution.crossings):
        by_edge.setdefault(ed, []).append(xc)
    dists = []
    radius = 0.0
    for pts in by_edge.values():
        if len(pts) < 2:
            continue
        tail = pts[-4:]
        for a, b in zip(tail, tail[1:]):
            dists.append(float(np.linalg.norm(a - b)))
        radius = max(radius, float(np.linalg.norm(tail[-1])))
    if not dists:
        return None, None
    return max(dists), radius


def zeno_time_estimate_from(rho: float, rho_err: float | None,
                            execution: Execution, cycle: int):
    if rho is None or rho >= 1.0:
        raise ValueError(f"dwell ratio {rho} does not sum to a finite time")
    dwells = execution.dwells
    if len(dwells) < cycle or not len(execution.taus):
        raise ValueError("not enough transitions for an extrapolation")
    last_sum = float(np.sum(dwells[-cycle:]))
    est = float(execution.taus[-1]) + last_sum * rho / (1.0 - rho)
    err = (last_sum * (rho_err or 0.0) / (1.0 - rho) ** 2)
    return est, err


def zeno_time_estimate(diagnostics: ZenoDiagnostics,
                       execution: Execution) -> tuple[float, float]:
    """Extrapolated accumulation time with a one-sigma error bar."""
    if diagnostics.classification != CLASS_ZENO:
        raise ValueError(f"execution classified {diagnostics.classification}, "
                         "not Zeno; no finite accumulation time to estimate")
    return zeno_time_estimate_from(diagnostics.rho, diagnostics.rho_stderr,
                                   execution, diagnostics.cycle_length)


# --------------------------------------------------------------------------
# certificate cross-validation


@dataclass
class BatchRun:
    seed: int
    mode: int
    x0: tuple[float, ...]
    params: tuple[float, ...]
    classification: str
    terminal_distance: float
    transitions: int
    termination: str
    notes: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class BatchReport:
    system_name: str
    count: int
    runs: list[BatchRun]
    fraction_zeno: float
    max_terminal_distance: float
    basin_level: float | None
    note: str = ""
    basis: str = "empirical"

    def to_dict(self) -> dict:
        return {
            "system_name": self.system_name,
            "basis": self.basis,
            "count": self.count,
            "fraction_zeno": self.fraction_zeno,
            "max_terminal_distance": self.max_terminal_distance,
            "basin_level": self.basin_level,
            "note": self.note,
            "runs": [r.to_dict() for r in self.runs],
        }


def _certificate_vs(system: HybridSystem, cert: ZenoCertificate):
    reg = system.registry
    out = {}
    for q, text in cert.vs.items():
        out[int(q)] = parse(text, reg)
    return out


def _basin_level(system: HybridSystem, vs, pgrid, rng, budget=4000):
    """Smallest over modes of (min of V on the boundary of W within the
    domain closure): sublevel sets below it sit inside W."""
    best = math.inf
    found = False
    nx = system.registry.n_state
    for m in system.modes:
        v = vs[m.id]
        anchor = np.asarray(m.anchor)
        w = m.neighborhood
        for j, wj in enumerate(w.inequalities):
            grads = [wj.diff(i) for i in range(nx)]
            for pv in pgrid:
                pts = rng.uniform(-3, 3, size=(budget, nx))
                full = np.hstack([pts, np.tile(pv, (budget, 1))]) \
                    if len(pv) else pts
                for _ in range(25):
                    val = wj.evaluate_batch(full)
                    g = np.stack([gg.evaluate_batch(full) for gg in grads],
                                 axis=1)
                    nrm = np.einsum("ij,ij->i", g, g)
                    ok = nrm > 1e-12
                    full[:, :nx] -= np.where(
                        ok, val / np.where(ok, nrm, 1), 0)[:, None] * g
                on = np.abs(wj.evaluate_batch(full)) < 1e-7
                others = np.ones(budget, dtype=bool)
                for kk, wo in enumerate(w.inequalities):
                    if kk != j:
                        others &= wo.evaluate_batch(full) >= 0
                dom = np.zeros(budget, dtype=bool)
                for piece in m.pieces:
                    pm = np.ones(budget, dtype=bool)
                    for hh in piece.inequalities:
                        pm &= hh.evaluate_batch(full) >= -1e-9
                    dom |= pm
                mask = on & others & dom
                if mask.any():
                    found = True
                    shifted = full[mask].copy()
                    shifted[:, :nx] -= anchor
                    best = min(best, float(np.min(
                        v.evaluate_batch(shifted))))
    return best if found else None


def batch_validate(system: HybridSystem, certificate: ZenoCertificate,
                   seeds: int | Sequence[int] = 0, count: int = 20, *,
                   config: ExecutionConfig | None = None,
                   basin_fraction: float = 0.9) -> BatchReport:
    """Simulate from certificate-covered initial conditions and report how
    the empirical classifications line up with the certificate's claim.

    Initial conditions are drawn from the largest V-sublevel region inside
    the certified neighborhood (that is the region the certificate actually
    makes a claim about); parameters come from the declared sampling box.
    """
    if not certificate.certified:
        raise ValueError("batch validation requires a VALID certificate")
    if fingerprint_system(system) != certificate.system_fingerprint:
        raise ValueError("certificate was issued for a different system")
    reg = system.registry
    nx = reg.n_state
    vs = _certificate_vs(system, certificate)
    if isinstance(seeds, int):
        seed_list = [seeds + i for i in range(count)]
    else:
        seed_list = [int(s) for s in seeds][:count]

    box = system.parameter_set.box
    pgrid = [tuple(0.5 * (a + b) for a, b in box)] if box else [()]
    level_rng = np.random.default_rng(20_000_017)
    level = _basin_level(system, vs, pgrid, level_rng)
    if level is None or level <= 0:
        return BatchReport(system.name, 0, [], 0.0, 0.0, level,
                           note="no certified neighborhood boundary found; "
                                "nothing to sample")

    mode_ids = sorted(m.id for m in system.modes)
    runs: list[BatchRun] = []
    n_zeno = 0
    worst = 0.0
    for i, sd in enumerate(sorted(seed_list)):
        rng = np.random.default_rng(sd)
        q = mode_ids[i % len(mode_ids)]
        m = system.mode(q)
        anchor = np.asarray(m.anchor)
        pv = tuple(rng.uniform(a, b) for a, b in box) if box else ()
        x0 = None
        for _ in range(100_000):
            cand = anchor + rng.uniform(-2, 2, nx)
            if not _in_domain_closure(m, cand, pv, 0.0):
                continue
            if not _member(cand, m.neighborhood.inequalities, pv, 0.0):
                continue
            vval = vs[q].evaluate_batch(
                np.hstack([cand - anchor, pv])[None, :])[0]
            if vval <= basin_fraction * level:
                x0 = cand
                break
        if x0 is None:
            runs.append(BatchRun(sd, q, (), pv, CLASS_INCONCLUSIVE,
                                 math.inf, 0, "SamplingFailed",
                                 "no initial condition found in the basin"))
            continue
        cfg = config or ExecutionConfig(mode0=q, x0=tuple(x0), params=pv)
        cfg = dataclasses.replace(cfg, mode0=q, x0=tuple(x0), params=pv)
        ex = simulate(system, cfg)
        d = classify(ex)
        term_mode = system.mode(ex.intervals[-1].mode)
        dist = float(np.linalg.norm(ex.terminal_state
                                    - np.asarray(term_mode.anchor)))
        if d.classification == CLASS_ZENO:
            n_zeno += 1
        worst = max(worst, dist)
        runs.append(BatchRun(sd, q, tuple(float(v) for v in x0), pv,
                             d.classification, dist, ex.transitions,
                             ex.termination, d.notes))
    done = [r for r in runs if r.termination != "SamplingFailed"]
    frac = n_zeno / len(done) if done else 0.0
    return BatchReport(system.name, len(runs), runs, frac, worst, level)


# --------------------------------------------------------------------------
# export


def write_csv(execution: Execution, path: str | Path) -> Path:
    """Dense trajectory samples as (interval, mode, t, x...)."""
    path = Path(path)
    names = [f"x{i + 1}" for i in range(execution.intervals[0].x.shape[1])]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["interval", "mode", "t", *names])
        for iv in execution.intervals:
            for tk, xk in zip(iv.t, iv.x):
                w.writerow([iv.index, iv.mode, f"{tk:.12g}",
                            *(f"{v:.12g}" for v in xk)])
    return path


_MODE_COLORS = ["#1f6fb2", "#c05020", "#3a8a3a", "#7a4fa0", "#a07820"]


def write_phase_portrait(executions, system: HybridSystem,
                         path: str | Path, *, size: int = 640,
                         title: str | None = None) -> Path:
    """Static SVG phase portrait with guard lines overlaid (2-D states)."""
    if isinstance(executions, Execution):
        executions = [executions]
    if not executions:
        raise ValueError("nothing to plot")
    nx = executions[0].intervals[0].x.shape[1]
    if nx != 2:
        raise ValueError("phase portraits need exactly two state variables")

    allx = np.vstack([iv.x for ex in executions for iv in ex.intervals])
    lo = allx.min(axis=0)
    hi = allx.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo -= 0.08 * span
    hi += 0.08 * span
    span = hi - lo
    margin = 42

    def sx(v):
        return margin + (v - lo[0]) / span[0] * (size - 2 * margin)

    def sy(v):
        return size - margin - (v - lo[1]) / span[1] * (size - 2 * margin)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size}" viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    if title:
        parts.append(f'<text x="{size / 2:.0f}" y="20" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">{title}</text>')
    parts.append(f'<rect x="{margin}" y="{margin}" '
                 f'width="{size - 2 * margin}" height="{size - 2 * margin}" '
                 f'fill="none" stroke="#555"/>')
    names = system.registry.state_names
    parts.append(f'<text x="{size / 2:.0f}" y="{size - 10}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">{names[0]}</text>')
    parts.append(f'<text x="14" y="{size / 2:.0f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 14 {size / 2:.0f})">{names[1]}</text>')

    # affine guard zero-lines, clipped to the viewport
    pvals = executions[0].config.params
    for edge in system.edges:
        h = edge.guard.equality
        if h.state_degree() > 1:
            continue
        pt0 = np.array([[0.0, 0.0, *pvals]])
        c0 = float(h.evaluate_batch(pt0)[0])
        a = float(h.diff(0).evaluate_batch(pt0)[0])
        b = float(h.diff(1).evaluate_batch(pt0)[0])
        pts = []
        for x1 in (lo[0], hi[0]):
            if abs(b) > 1e-12:
                x2 = -(c0 + a * x1) / b
                if lo[1] - 1e-9 <= x2 <= hi[1] + 1e-9:
                    pts.append((x1, x2))
        for x2 in (lo[1], hi[1]):
            if abs(a) > 1e-12:
                x1 = -(c0 + b * x2) / a
                if lo[0] - 1e-9 <= x1 <= hi[0] + 1e-9:
                    pts.append((x1, x2))
        if len(pts) >= 2:
            (u1, v1), (u2, v2) = pts[0], pts[-1]
            parts.append(f'<line x1="{sx(u1):.2f}" y1="{sy(v1):.2f}" '
                         f'x2="{sx(u2):.2f}" y2="{sy(v2):.2f}" '
                         f'stroke="#999" stroke-dasharray="6 4"/>')

    for ex in executions:
        for iv in ex.intervals:
            if len(iv.t) < 2:
                continue
            color = _MODE_COLORS[iv.mode % len(_MODE_COLORS)]
            coords = " ".join(f"{sx(p[0]):.2f},{sy(p[1]):.2f}"
                              for p in iv.x[:: max(1, len(iv.x) // 1500)])
            parts.append(f'<polyline points="{coords}" fill="none" '
                         f'stroke="{color}" stroke-width="1.1" '
                         f'opacity="0.85"/>')

    for m in system.modes:
        ax, ay = m.anchor[:2]
        if lo[0] <= ax <= hi[0] and lo[1] <= ay <= hi[1]:
            parts.append(f'<circle cx="{sx(ax):.2f}" cy="{sy(ay):.2f}" '
                         f'r="3" fill="black"/>')
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts))
    return path
