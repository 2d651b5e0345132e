"""Hybrid execution engine: event location, resets, classification, export.

The bouncing ball is the workhorse because everything about it is known in
closed form: dropped from rest at height h with restitution c, the impact
velocities form a geometric sequence and the accumulation time is

    tau_inf = sqrt(2 h / g) * (1 + c) / (1 - c).

The bundled model uses g = 9.8, c = 0.5, so a drop from h = 1 accumulates at
3 * sqrt(2 / 9.8).
"""

import csv
import math

import numpy as np
import pytest

from zenocert.certify import CertificationRequest, certify
from zenocert.simulate import (
    BatchReport,
    Execution,
    ExecutionConfig,
    Interval,
    batch_validate,
    classify,
    simulate,
    write_csv,
    write_phase_portrait,
    zeno_time_estimate,
)
from zenocert.sysio import system_from_dict

BALL_G = 9.8
BALL_C = 0.5


def ball_tau_inf(height):
    return math.sqrt(2.0 * height / BALL_G) * (1 + BALL_C) / (1 - BALL_C)


@pytest.fixture(scope="module")
def ball_drop(bouncing_ball):
    cfg = ExecutionConfig(mode0=1, x0=(1.0, 0.0), max_transitions=400,
                          horizon=10.0)
    return simulate(bouncing_ball, cfg)


class TestBouncingBall:
    def test_terminates_at_accumulation(self, ball_drop):
        assert ball_drop.termination == "AnchorConvergence"
        assert ball_drop.transitions >= 10

    def test_transition_times_increase(self, ball_drop):
        assert np.all(np.diff(ball_drop.taus) > 0)

    def test_impact_velocities_follow_restitution(self, ball_drop):
        # pre-reset state at each crossing stores the downward velocity
        speeds = np.abs(ball_drop.crossings[:, 1])
        ratios = speeds[1:] / speeds[:-1]
        assert np.allclose(ratios, BALL_C, rtol=1e-6)

    def test_accumulation_time_estimate(self, ball_drop):
        diag = classify(ball_drop)
        assert diag.classification == "Zeno"
        assert abs(diag.rho - BALL_C) <= 0.02 * BALL_C
        est, err = zeno_time_estimate(diag, ball_drop)
        exact = ball_tau_inf(1.0)
        assert abs(est - exact) <= 0.01 * exact
        assert err >= 0.0

    def test_resets_are_consistent(self, ball_drop):
        assert ball_drop.max_reset_mismatch <= 1e-9

    def test_tolerance_halving_keeps_event_times(self, bouncing_ball):
        base = ExecutionConfig(mode0=1, x0=(1.0, 0.0), max_transitions=30,
                               horizon=10.0)
        tight = ExecutionConfig(mode0=1, x0=(1.0, 0.0), max_transitions=30,
                                horizon=10.0, rtol=base.rtol / 2,
                                atol=base.atol / 2)
        ta = simulate(bouncing_ball, base).taus
        tb = simulate(bouncing_ball, tight).taus
        n = min(len(ta), len(tb))
        rel = np.abs(ta[:n] - tb[:n]) / np.abs(ta[:n])
        assert np.max(rel) < 1e-6

    def test_starting_height_scales_the_time(self, bouncing_ball):
        cfg = ExecutionConfig(mode0=1, x0=(0.25, 0.0), max_transitions=400,
                              horizon=10.0)
        ex = simulate(bouncing_ball, cfg)
        diag = classify(ex)
        est, _ = zeno_time_estimate(diag, ex)
        assert abs(est - ball_tau_inf(0.25)) <= 0.01 * ball_tau_inf(0.25)


class TestConfigValidation:
    def test_rejects_initial_state_outside_domain(self, bouncing_ball):
        cfg = ExecutionConfig(mode0=1, x0=(-1.0, 0.0))
        with pytest.raises(ValueError, match="domain"):
            simulate(bouncing_ball, cfg)

    def test_rejects_wrong_dimension(self, bouncing_ball):
        cfg = ExecutionConfig(mode0=1, x0=(1.0, 0.0, 0.0))
        with pytest.raises(ValueError, match="component"):
            simulate(bouncing_ball, cfg)

    def test_rejects_unknown_mode(self, bouncing_ball):
        cfg = ExecutionConfig(mode0=7, x0=(1.0, 0.0))
        with pytest.raises(KeyError):
            simulate(bouncing_ball, cfg)

    def test_rejects_bad_budgets(self):
        with pytest.raises(ValueError):
            ExecutionConfig(mode0=1, x0=(1.0,), max_transitions=0)
        with pytest.raises(ValueError):
            ExecutionConfig(mode0=1, x0=(1.0,), horizon=0.0)


def synthetic_execution(taus, mode=1, termination="DwellCutoff"):
    """Wrap a bare transition-time sequence in an Execution shell."""
    taus = np.asarray(taus, dtype=float)
    cfg = ExecutionConfig(mode0=mode, x0=(1.0, 0.0))
    intervals = [Interval(i, mode, np.array([t]), np.zeros((1, 2)))
                 for i, t in enumerate(taus)]
    return Execution(system_name="synthetic", config=cfg,
                     intervals=intervals, taus=taus,
                     edges=[(mode, mode)] * len(taus),
                     crossings=np.zeros((len(taus), 2)),
                     termination=termination)


class TestClassification:
    def test_exact_geometric_sequence(self):
        # dwells 1, 1/2, 1/4, ... accumulate at exactly 2
        ex = synthetic_execution([0.0, 1.0, 1.5, 1.75, 1.875, 1.9375,
                                  1.96875, 1.984375, 1.9921875, 1.99609375,
                                  1.998046875])
        diag = classify(ex)
        assert diag.classification == "Zeno"
        assert abs(diag.rho - 0.5) < 1e-9
        est, err = zeno_time_estimate(diag, ex)
        assert abs(est - 2.0) < 1e-9
        assert err < 1e-6

    def test_growing_dwells_are_divergent(self):
        taus = np.cumsum([0.0] + [1.5 ** k for k in range(14)])
        diag = classify(synthetic_execution(taus))
        assert diag.classification == "Divergent"

    def test_constant_dwells_inconclusive_without_returns(self):
        taus = np.arange(15.0)
        diag = classify(synthetic_execution(taus))
        assert diag.classification == "Inconclusive"

    def test_short_executions_are_inconclusive(self):
        diag = classify(synthetic_execution([0.0, 1.0, 1.5],
                                            termination="Horizon"))
        assert diag.classification == "Inconclusive"
        assert "transition" in diag.notes

    def test_estimate_refuses_non_zeno(self):
        ex = synthetic_execution(np.arange(15.0))
        diag = classify(ex)
        with pytest.raises(ValueError, match="not Zeno"):
            zeno_time_estimate(diag, ex)

    def test_diagnostics_serialize(self, ball_drop):
        d = classify(ball_drop).to_dict()
        assert d["classification"] == "Zeno"
        assert d["basis"] == "empirical"
        assert 0 < d["rho"] < 1


class TestPeriodicOrbit:
    def test_limit_cycle_detected(self, example1):
        cfg = ExecutionConfig(mode0=1, x0=(1.0, 0.2), max_transitions=400,
                              horizon=200.0)
        ex = simulate(example1, cfg)
        diag = classify(ex)
        assert diag.classification == "LimitCycle"
        assert abs(diag.rho - 1.0) <= 0.03


class TestSectorSystem:
    """The two-mode sector system with the parametric guard.

    For p around 1 and below, executions spiral outward; for larger p the
    crossing radii contract by a fixed factor per cycle, but the dwell time
    in the wide mode stays put (that mode's field is a pure rotation near
    the origin, so the transit time of its sector does not shrink with the
    radius). The state accumulates spatially while the total time diverges,
    and the classifier must refuse the Zeno label.
    """

    def test_small_parameter_diverges(self, example2):
        for p in (1.0, 0.4):
            cfg = ExecutionConfig(mode0=1, x0=(0.3, 0.0), params=(p,),
                                  max_transitions=400, horizon=400.0)
            diag = classify(simulate(example2, cfg))
            assert diag.classification == "Divergent", p

    def test_large_parameter_contracts_radii(self, example2):
        p = 4.0
        cfg = ExecutionConfig(mode0=1, x0=(0.3, 0.0), params=(p,),
                              max_transitions=400, horizon=400.0)
        ex = simulate(example2, cfg)
        radii = np.linalg.norm(ex.crossings, axis=1)
        # one full cycle = two crossings, and only the inward-spiraling leg
        # changes the radius, so compare same-ray radii two crossings apart
        mid = radii[10:-10:2]
        ratios = mid[1:] / mid[:-1]
        assert np.std(ratios) < 1e-3
        assert 0.40 < np.mean(ratios) < 0.47

    def test_spatial_accumulation_is_not_zeno(self, example2):
        cfg = ExecutionConfig(mode0=1, x0=(0.3, 0.0), params=(4.0,),
                              max_transitions=400, horizon=400.0)
        ex = simulate(example2, cfg)
        assert ex.termination == "AnchorConvergence"
        diag = classify(ex)
        assert diag.classification == "Inconclusive"
        assert "dwell times do not contract" in diag.notes
        with pytest.raises(ValueError):
            zeno_time_estimate(diag, ex)


BALL_FAR_NEIGHBORHOOD = {
    "name": "ball-far-neighborhood",
    "variables": ["x1", "x2"],
    "constants": {"g": 9.8, "c": 0.5},
    "modes": [
        {"id": 1,
         "domain": ["x1", "1 - x1^2 - x2^2"],
         "field": ["x2", "-g"],
         "neighborhood": [{"expr": "9 - x1^2 - x2^2", "strict": True}],
         "anchor": [0.0, 0.0]},
    ],
    "edges": [
        {"from": 1, "to": 1, "guard_eq": "x1", "guard_ineq": ["-x2"],
         "reset": ["x1", "-c*x2"]},
    ],
}


@pytest.fixture(scope="module")
def ball_cert(bouncing_ball):
    cert = certify(CertificationRequest(bouncing_ball, degree=4))
    assert cert.certified
    return cert


class TestBatchValidation:
    def test_full_agreement_on_certified_basin(self, bouncing_ball,
                                               ball_cert):
        rep = batch_validate(bouncing_ball, ball_cert, seeds=0, count=20)
        assert rep.count == 20
        assert rep.fraction_zeno == 1.0
        assert rep.max_terminal_distance < 1e-3
        assert rep.basin_level > 0
        assert all(r.classification == "Zeno" for r in rep.runs)

    def test_batch_is_deterministic(self, bouncing_ball, ball_cert):
        a = batch_validate(bouncing_ball, ball_cert, seeds=0, count=6)
        b = batch_validate(bouncing_ball, ball_cert, seeds=0, count=6)
        assert [r.to_dict() for r in a.runs] == [r.to_dict() for r in b.runs]

    def test_runs_ordered_by_seed(self, bouncing_ball, ball_cert):
        rep = batch_validate(bouncing_ball, ball_cert, seeds=[5, 1, 3],
                             count=3)
        assert [r.seed for r in rep.runs] == [1, 3, 5]

    def test_requires_valid_certificate(self, bouncing_ball, ball_cert):
        import dataclasses
        broken = dataclasses.replace(ball_cert, status="FAILED")
        with pytest.raises(ValueError, match="VALID"):
            batch_validate(bouncing_ball, broken, count=1)

    def test_rejects_foreign_certificate(self, bouncing_ball, example1,
                                         ball_cert):
        with pytest.raises(ValueError, match="different system"):
            batch_validate(example1, ball_cert, count=1)

    def test_empty_basin_reported_not_crashed(self):
        sys2 = system_from_dict(BALL_FAR_NEIGHBORHOOD)
        cert = certify(CertificationRequest(sys2, degree=4))
        assert cert.certified
        rep = batch_validate(sys2, cert, count=4)
        assert rep.count == 0
        assert "nothing to sample" in rep.note

    def test_report_serializes(self, bouncing_ball, ball_cert):
        rep = batch_validate(bouncing_ball, ball_cert, seeds=0, count=3)
        d = rep.to_dict()
        assert d["fraction_zeno"] == 1.0
        assert len(d["runs"]) == 3
        assert d["basis"] == "empirical"


class TestExport:
    def test_csv_round_trip(self, ball_drop, tmp_path):
        p = write_csv(ball_drop, tmp_path / "run.csv")
        with open(p, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["interval", "mode", "t", "x1", "x2"]
        assert len(rows) > 20
        ts = [float(r[2]) for r in rows[1:]]
        assert ts == sorted(ts)
        last = np.array([float(v) for v in rows[-1][3:]])
        assert np.allclose(last, ball_drop.terminal_state, atol=1e-9)

    def test_phase_portrait_svg(self, ball_drop, bouncing_ball, tmp_path):
        p = write_phase_portrait(ball_drop, bouncing_ball,
                                 tmp_path / "run.svg", title="ball")
        txt = p.read_text()
        assert txt.startswith("<svg")
        assert txt.rstrip().endswith("</svg>")
        assert "<polyline" in txt
        assert "stroke-dasharray" in txt  # the guard line

    def test_phase_portrait_needs_two_dims(self, bouncing_ball, tmp_path):
        one_d = synthetic_execution([0.0, 1.0])
        for iv in one_d.intervals:
            iv.x = np.zeros((1, 1))
        with pytest.raises(ValueError, match="two state"):
            write_phase_portrait(one_d, bouncing_ball, tmp_path / "no.svg")
