"""Locating a certification threshold with the bound sweep.

The system below cycles between two quadrant modes.  Each reset swaps the
state onto the other guard ray and multiplies the surviving coordinate by
(2 - C), so one full cycle scales the state by (2 - C)^2.  With quadratic
certificates and per-edge contraction factors r, the jump condition can
only hold when r^2 >= (2 - C)^4, which puts the certifiable region at

    C >= 2 - sqrt(r)    (about 1.005 at r = 0.99).

The sweep should land just above that algebraic threshold.

Run from the repository root:

    python3 demos/sweep_contraction_threshold.py
"""

import math

from zenocert import CertificationRequest, ZenoCertificate, certify
from zenocert.certify import sweep_lower_bound
from zenocert.sysio import system_from_dict

CROSSQUAD = {
    "name": "crossquad",
    "variables": ["x1", "x2"],
    "constants": {"C": 2.0},
    "param_bound_constant": "C",
    "modes": [
        {"id": 1,
         "domain": ["x1", "x2"],
         "field": ["-x1", "-x2"],
         "neighborhood": [{"expr": "1 - x1^2 - x2^2", "strict": True}],
         "anchor": [0.0, 0.0]},
        {"id": 2,
         "domain": ["x1", "x2"],
         "field": ["-x1", "-x2"],
         "neighborhood": [{"expr": "1 - x1^2 - x2^2", "strict": True}],
         "anchor": [0.0, 0.0]},
    ],
    "edges": [
        {"from": 1, "to": 2, "guard_eq": "x2", "guard_ineq": ["x1"],
         "reset": ["0", "(2 - C)*x1"]},
        {"from": 2, "to": 1, "guard_eq": "x1", "guard_ineq": ["x2"],
         "reset": ["(2 - C)*x2", "0"]},
    ],
}


def request(value, degree=2):
    system = system_from_dict(CROSSQUAD, param_bound=value)
    return CertificationRequest(system, degree=degree, r_grid=(0.99,))


def main():
    print("probe grid:")
    for value in (1.6, 1.2, 1.05, 1.0, 0.8):
        outcome = certify(request(value))
        if isinstance(outcome, ZenoCertificate):
            verdict = f"VALID (r={outcome.r})"
        else:
            statuses = sorted({p.status for p in outcome.probes})
            verdict = f"no certificate ({', '.join(statuses)})"
        print(f"  C = {value:<5} -> {verdict}")

    res = sweep_lower_bound(lambda v: request(v), (0.8, 1.6), 0.005,
                            scalar_name="C")
    exact = 2.0 - math.sqrt(0.99)
    print(f"\nsweep over C in [0.8, 1.6], tolerance 0.005:")
    print(f"  certified lower bound: C = {res.bound:.4f} "
          f"after {len(res.probes)} probes")
    print(f"  algebraic threshold:   C = {exact:.4f}  (2 - sqrt(0.99))")


if __name__ == "__main__":
    main()
