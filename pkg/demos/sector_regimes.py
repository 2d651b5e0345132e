"""Qualitative regimes of the two-mode sector system.

The bundled "example2" system switches between a rotation-like mode and an
inward-spiraling mode on guard rays controlled by a time-invariant
parameter p.  Sweeping p changes the character of the executions, and the
classifier labels each regime from the dwell-time sequence alone.

Also attempts a certificate for the parametric family and prints whatever
the solver reports, including failure.

Run from the repository root:

    python3 demos/sector_regimes.py
"""

from pathlib import Path

from zenocert import (
    CertificationRequest,
    ExecutionConfig,
    ZenoCertificate,
    certify,
    classify,
    load_system,
    simulate,
    write_phase_portrait,
)
from zenocert.sdp import SolverConfig


def main():
    system = load_system("example2")
    outdir = Path("demo-output")
    outdir.mkdir(exist_ok=True)

    print(f"{'p':>5}  {'transitions':>11}  {'rho':>7}  classification")
    executions = []
    for p in (0.4, 1.0, 2.2, 4.0):
        cfg = ExecutionConfig(mode0=1, x0=(0.3, 0.0), params=(p,),
                              max_transitions=400, horizon=400.0)
        ex = simulate(system, cfg)
        executions.append(ex)
        diag = classify(ex)
        rho = "-" if diag.rho is None else f"{diag.rho:.4f}"
        print(f"{p:>5}  {len(ex.taus):>11}  {rho:>7}  {diag.classification}")
        if diag.notes:
            print(f"       note: {diag.notes}")

    portrait = outdir / "sector-regimes.svg"
    write_phase_portrait(executions, system, portrait,
                         title="sector system, p = 0.4 / 1.0 / 2.2 / 4.0")
    print(f"\nphase portrait written to {portrait}")

    # For large p the state converges, but the wide mode's transit time is
    # radius-independent, so the dwell times do not sum to a finite value
    # and no Zeno certificate can exist along that route.  See whether the
    # solver agrees (capped iterations keep this quick).
    print("\ncertification attempt at degree 8:")
    outcome = certify(CertificationRequest(system, degree=8,
                                           r_grid=(0.99, 0.5)),
                      solver_config=SolverConfig(max_iter=40))
    if isinstance(outcome, ZenoCertificate):
        print(f"  unexpected success: {outcome.status}, r={outcome.r}")
    else:
        print(f"  {outcome.message}")
        for probe in outcome.probes:
            r = "/".join(f"{v:g}" for v in probe.r.values())
            print(f"    r={r:<10} {probe.status:<18} "
                  f"{probe.iterations:>3} iterations  {probe.seconds:5.1f}s")


if __name__ == "__main__":
    main()
