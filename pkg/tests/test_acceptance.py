"""Release acceptance checks, one test per criterion.

Run with ``pytest -v tests/test_acceptance.py`` to get a one-line verdict
per criterion.  Every check here states a quantitative target and measures
the shipped code against it; a few targets are not met by the current
solver, and those tests fail with a message carrying the measured outcome
instead of being weakened to pass.  README.md discusses each open failure.

The file is ordered so that later criteria can reuse artifacts produced by
earlier ones (certificates feed the empirical cross-validation check).
Module-level state carries those artifacts between tests; running a single
test in isolation still works, it just sees a smaller artifact pool.
"""

import json
import math
import time

import numpy as np
import pytest

from zenocert.certify import (
    CertificationRequest,
    ZenoCertificate,
    certify,
    check_certificate,
    load_certificate,
    sweep_degrees,
)
from zenocert.cli import main
from zenocert.polynomials import Polynomial, VariableRegistry, parse
from zenocert.sdp import (
    STATUS_OPTIMAL,
    STATUS_PRIMAL_INFEASIBLE,
    SdpInstance,
    SolverConfig,
    residuals,
    solve,
)
from zenocert.simulate import (
    ExecutionConfig,
    batch_validate,
    classify,
    simulate,
    zeno_time_estimate,
)
from zenocert.sos import PolyExpr, SosConstraint, lower, reconstruct
from zenocert.sysio import bundled_system_path, load_system, system_from_dict

# Artifacts shared across criteria, filled in test order.  "valid_certs"
# holds (system, certificate, label) triples for every certificate any
# criterion produced; "findings" collects non-blocking observations.
_STATE = {"valid_certs": [], "findings": []}

# Target lower bounds for the swept sector-opening constant, one per
# template degree, and the accepted window around each.
TARGET_BOUNDS = {8: 2.11, 10: 1.87, 12: 1.73}
BOUND_WINDOW = 0.35

BALL_G = 9.8
BALL_C = 0.5


def ball_tau_inf(height):
    """Total bounce time from rest at the given height: the first fall takes
    sqrt(2 h / g) and each later flight is c times the previous one, so the
    series sums to sqrt(2 h / g) * (1 + c) / (1 - c)."""
    return math.sqrt(2.0 * height / BALL_G) * (1.0 + BALL_C) / (1.0 - BALL_C)


@pytest.fixture(scope="module")
def bouncing_ball():
    return load_system("bouncing-ball")


@pytest.fixture(scope="module")
def ball_cert(bouncing_ball):
    cert = certify(CertificationRequest(bouncing_ball, degree=4))
    assert isinstance(cert, ZenoCertificate), getattr(cert, "message", cert)
    _STATE["valid_certs"].append((bouncing_ball, cert, "bouncing-ball d4"))
    return cert


def test_criterion_01_example1_degree8_certificate(tmp_path, capsys):
    """certify example1 --degree 8 produces a VALID certificate in under
    five minutes and the certificate survives independent re-verification
    with a 1000-point sampling budget per condition."""
    started = time.monotonic()
    code = main(["certify", "example1", "--degree", "8",
                 "--output", str(tmp_path)])
    elapsed = time.monotonic() - started
    capsys.readouterr()

    if code == 0:
        cert = load_certificate(tmp_path / "example1-d8.cert.json")
        system = load_system("example1")
        _STATE["valid_certs"].append((system, cert, "example1 d8"))
        report = check_certificate(system, cert, sample_budget=1000, seed=0)
        assert report.valid, report.problems
        assert elapsed < 300.0, f"certification took {elapsed:.0f}s"
        return

    detail = f"exit code {code}"
    failure_file = tmp_path / "example1-d8-failure.json"
    if failure_file.exists():
        probes = json.loads(failure_file.read_text()).get("probes", [])
        statuses = sorted({p.get("status", "?") for p in probes})
        detail += (f"; {len(probes)} probes, statuses {statuses}. "
                   "On the boundary ray of the second mode's domain the "
                   "field points away from the anchor, so the decrease "
                   "condition has no polynomial solution and the solver "
                   "reports primal infeasibility at every probe.")
    raise AssertionError(
        f"degree-8 certification of example1 did not succeed: {detail}")


def test_criterion_02_sector_bound_sweep_reaches_target_thresholds():
    """Sweeping the sector-opening constant at degrees 8/10/12 recovers
    lower bounds within +/-0.35 of 2.11 / 1.87 / 1.73, non-increasing in
    the degree, within a 30 minute budget."""
    started = time.monotonic()
    data = json.loads(bundled_system_path("example2").read_text())
    scalar = data["param_bound_constant"]

    def make_request(degree, value):
        system = system_from_dict(data, param_bound=value)
        return CertificationRequest(system, degree=degree,
                                    r_grid=(0.99, 0.5))

    # Screen each degree at the easiest admissible value of the constant
    # (target + window) with a capped iteration budget.  A full bisection
    # only makes sense for degrees that certify here: if the most
    # favorable endpoint is infeasible, no bound inside the window exists.
    capped = SolverConfig(max_iter=30)
    screen = {}
    for degree in (8, 10, 12):
        easiest = TARGET_BOUNDS[degree] + BOUND_WINDOW
        screen[degree] = certify(make_request(degree, easiest),
                                 solver_config=capped, check_budget=200)

    failures = []
    for degree, outcome in screen.items():
        if isinstance(outcome, ZenoCertificate):
            continue
        statuses = sorted({p.status for p in outcome.probes})
        easiest = TARGET_BOUNDS[degree] + BOUND_WINDOW
        failures.append(f"degree {degree}: no certificate at "
                        f"{scalar}={easiest:.2f} (probe statuses {statuses})")

    if not failures:
        hi = TARGET_BOUNDS[8] + BOUND_WINDOW
        results = sweep_degrees(make_request, (8, 10, 12), (1.0, hi), 0.05,
                                scalar_name=scalar)
        bounds = {}
        for res in results:
            if res.ok:
                bounds[res.degree] = res.bound
                if res.certificate is not None:
                    system = system_from_dict(data, param_bound=res.bound)
                    _STATE["valid_certs"].append(
                        (system, res.certificate,
                         f"example2 d{res.degree} {scalar}={res.bound:.3f}"))
            else:
                failures.append(f"degree {res.degree}: sweep failed "
                                f"({res.message})")
        for degree, bound in bounds.items():
            if abs(bound - TARGET_BOUNDS[degree]) > BOUND_WINDOW:
                failures.append(
                    f"degree {degree}: bound {bound:.3f} outside "
                    f"{TARGET_BOUNDS[degree]} +/- {BOUND_WINDOW}")
        ordered = [bounds.get(d) for d in (8, 10, 12)]
        if None not in ordered and not (
                ordered[0] >= ordered[1] >= ordered[2]):
            failures.append(f"bounds not non-increasing: {ordered}")

    elapsed = time.monotonic() - started
    if elapsed >= 1800.0:
        failures.append(f"sweep took {elapsed:.0f}s, budget 1800s")
    assert not failures, (
        "sector bound sweep missed its targets: " + "; ".join(failures)
        + ". The cycle contraction condition couples the two resets, and "
          "past the printed thresholds the coupled feasibility problem "
          "admits a dual improving ray at every tested degree.")


def test_criterion_03_certified_systems_validate_empirically(ball_cert):
    """Every certificate produced by this suite cross-validates: 20 seeded
    starts inside the certified neighborhood all classify as Zeno and end
    within 1e-3 of the anchor."""
    assert _STATE["valid_certs"], "no certificates were produced to validate"
    problems = []
    for system, cert, label in _STATE["valid_certs"]:
        report = batch_validate(system, cert, seeds=0, count=20)
        if report.count != 20:
            problems.append(f"{label}: sampled {report.count}/20 starts "
                            f"({report.note})")
            continue
        if report.fraction_zeno < 1.0:
            bad = [r.classification for r in report.runs
                   if r.classification != "Zeno"]
            problems.append(f"{label}: {len(bad)} non-Zeno runs {set(bad)}")
        if report.max_terminal_distance >= 1e-3:
            problems.append(f"{label}: worst terminal distance "
                            f"{report.max_terminal_distance:.2e}")
    assert not problems, "; ".join(problems)


def test_criterion_04_bouncing_ball_matches_closed_form(bouncing_ball):
    """The simulator reproduces the bouncing ball's closed-form accumulation
    time within 1%, fits the restitution ratio within 2%, and halving the
    integrator tolerances moves the bounce times by under 1e-6 relative."""
    cfg = ExecutionConfig(mode0=1, x0=(1.0, 0.0), max_transitions=400,
                          horizon=10.0)
    ex = simulate(bouncing_ball, cfg)
    diag = classify(ex)
    assert diag.classification == "Zeno", diag.notes

    exact = ball_tau_inf(1.0)
    est, _ = zeno_time_estimate(diag, ex)
    assert abs(est - exact) <= 0.01 * exact, (est, exact)
    assert abs(diag.rho - BALL_C) <= 0.02 * BALL_C, diag.rho

    tight = ExecutionConfig(mode0=1, x0=(1.0, 0.0), max_transitions=400,
                            horizon=10.0, rtol=cfg.rtol / 2,
                            atol=cfg.atol / 2)
    ta = simulate(bouncing_ball, cfg).taus
    tb = simulate(bouncing_ball, tight).taus
    n = min(len(ta), len(tb))
    rel = np.abs(ta[:n] - tb[:n]) / np.abs(ta[:n])
    assert np.max(rel) < 1e-6, np.max(rel)


def test_criterion_05_sector_system_regime_labels():
    """Simulating the sector system at p = 1, 4, 0.4 reproduces the expected
    qualitative regimes: Zeno, Zeno, LimitCycle."""
    example2 = load_system("example2")
    expected = [(1.0, "Zeno"), (4.0, "Zeno"), (0.4, "LimitCycle")]
    mismatches = []
    for p, want in expected:
        cfg = ExecutionConfig(mode0=1, x0=(0.3, 0.0), params=(p,),
                              max_transitions=400, horizon=400.0)
        diag = classify(simulate(example2, cfg))
        if diag.classification != want:
            note = f" ({diag.notes})" if diag.notes else ""
            mismatches.append(
                f"p={p}: expected {want}, got {diag.classification}{note}")
    assert not mismatches, (
        "; ".join(mismatches)
        + ". Measured behavior: for p at or below 1 the executions spiral "
          "outward, and for large p the crossing radii contract while the "
          "wide mode's transit time stays fixed, so the dwell times do not "
          "sum to a finite accumulation time.")


def _assert_gram_identity(expr_poly, basis, gram, reg, npts, seed, tol=1e-7):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(npts, reg.size))
    vals = expr_poly.evaluate_batch(pts)
    Z = np.array([[m.evaluate(pt) for m in basis] for pt in pts])
    quad = np.einsum("ri,ij,rj->r", Z, gram, Z)
    err = np.max(np.abs(vals - quad))
    assert err <= tol * (1.0 + np.max(np.abs(vals))), err


def test_criterion_06_random_sos_feasible_and_motzkin_rejected():
    """Fifty random sums of squares all certify feasible with Gram sampling
    error at most 1e-7, and the Motzkin polynomial is reported infeasible."""
    reg = VariableRegistry.make(["x1", "x2"])
    basis = [parse(t, reg) for t in
             ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]]
    for seed in range(50):
        rng = np.random.default_rng(9000 + seed)
        total = Polynomial.zero(reg)
        for _ in range(3):
            g = Polynomial.zero(reg)
            for bpoly in basis:
                g = g + bpoly.scale(float(rng.integers(-3, 4)))
            total = total + g * g
        con = SosConstraint("rand", PolyExpr.from_polynomial(total))
        inst, bm = lower([con])
        sol = solve(inst)
        assert sol.status == STATUS_OPTIMAL, (seed, sol.status, sol.message)
        asg = reconstruct(inst, sol, bm)
        name = bm.slack_names["rand"]
        _assert_gram_identity(total, bm.block_bases[name], asg.grams[name],
                              reg, npts=200, seed=seed)

    motzkin = parse("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", reg)
    con = SosConstraint("mz", PolyExpr.from_polynomial(motzkin))
    inst, _ = lower([con])
    sol = solve(inst)
    assert sol.status == STATUS_PRIMAL_INFEASIBLE, (sol.status, sol.message)


def pinned_2x2(a, b, c, reg=1e-8):
    """Instance forcing X = [[a, c], [c, b]] entrywise, so it is feasible
    exactly when that matrix is positive semidefinite: a*b >= c^2."""
    return SdpInstance(
        block_dims=(2,),
        free_names=(),
        a_entries=((0, 0, 0, 0, 1.0), (1, 0, 1, 1, 1.0), (2, 0, 0, 1, 1.0)),
        f_entries=(),
        b=(a, b, 2.0 * c),
        c_entries=((0, 0, 0, reg), (0, 1, 1, reg)),
    )


def test_criterion_07_analytic_sdp_family_classified_on_both_sides():
    """Twenty randomized pinned 2x2 instances are classified correctly on
    both sides of the feasibility boundary, and every Optimal exit meets
    the duality gap bound 1e-6 * (1 + |b'y|)."""
    rng = np.random.default_rng(2026)
    for trial in range(20):
        a = float(rng.uniform(0.5, 3.0))
        b = float(rng.uniform(0.5, 3.0))
        edge = math.sqrt(a * b)

        inst = pinned_2x2(a, b, 0.9 * edge)
        sol = solve(inst)
        assert sol.status == STATUS_OPTIMAL, (trial, sol.status, sol.message)
        res = residuals(inst, sol)
        bty = abs(float(np.asarray(inst.b) @ sol.y))
        assert res.gap <= 1e-6 * (1.0 + bty), (trial, res.gap, bty)

        sol = solve(pinned_2x2(a, b, 1.1 * edge))
        assert sol.status == STATUS_PRIMAL_INFEASIBLE, (trial, sol.status)


def test_criterion_08_certificate_scale_invariance(bouncing_ball, ball_cert):
    """Rescaling a valid certificate's witness data by 10 yields another
    certificate that passes independent verification unchanged."""
    scaled = ball_cert.scale(10.0)
    report = check_certificate(bouncing_ball, scaled, sample_budget=1000,
                               seed=3)
    assert report.valid, report.problems


def test_criterion_09_failure_reports_and_tamper_rejection(
        ball_cert, tmp_path, capsys):
    """An underpowered degree-6 request on the sector system produces a
    structured failure report (a success here would be recorded as a
    finding, not an error), and tampered certificates are always rejected
    with exit code 3."""
    code = main(["certify", "example2", "--degree", "6",
                 "--output", str(tmp_path)])
    capsys.readouterr()
    if code == 0:
        _STATE["findings"].append(
            "degree-6 certification of example2 unexpectedly succeeded")
        assert (tmp_path / "example2-d6.cert.json").exists()
    else:
        assert code == 2, f"expected exit 2 on infeasibility, got {code}"
        failure = json.loads(
            (tmp_path / "example2-d6-failure.json").read_text())
        assert failure["status"] == "FAILED"
        assert failure["probes"], "failure report carries no probe records"
        assert all(p.get("status") for p in failure["probes"])

    cert_path = tmp_path / "ball.cert.json"
    data = json.loads(json.dumps(ball_cert.to_dict()))
    q = next(iter(data["vs"]))
    data["vs"][q] = data["vs"][q].replace("x1^2", "x1^2 + 0.01*x1^2", 1)
    cert_path.write_text(json.dumps(data))
    code = main(["check", str(cert_path), "bouncing-ball",
                 "--output", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 3, f"tampered polynomial accepted (exit {code})"
    assert "verification FAILED" in out

    data = json.loads(json.dumps(ball_cert.to_dict()))
    gname = next(iter(data["grams"]))
    data["grams"][gname][0][0] += 1e-3
    cert_path.write_text(json.dumps(data))
    code = main(["check", str(cert_path), "bouncing-ball",
                 "--output", str(tmp_path)])
    capsys.readouterr()
    assert code == 3, f"tampered Gram matrix accepted (exit {code})"
