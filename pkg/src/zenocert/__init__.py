"""Zeno stability certification for cyclic polynomial hybrid systems.

The package certifies that a compact set is Zeno stable, i.e. that executions
near it undergo infinitely many discrete transitions in finite time while
converging to the set, by synthesizing per-mode Lyapunov certificates through
sum-of-squares feasibility problems.  The problems are lowered to semidefinite
programs and solved by a self-contained interior-point solver; certificates
are independently re-verified and cross-validated against a hybrid-execution
simulator.
"""

__version__ = "0.1.0"

from .polynomials import (  # noqa: F401
    Monomial,
    ParseError,
    Polynomial,
    VariableRegistry,
    monomial_basis,
    parse,
)
from .hybrid import (  # noqa: F401
    Edge,
    GuardSet,
    HybridSystem,
    Mode,
    ParameterSet,
    SemialgebraicSet,
    check_zeno_equilibrium,
    cycle_order,
    validate,
)
from .sysio import (  # noqa: F401
    bundled_system_path,
    canonical_json,
    fingerprint_system,
    load_system,
    system_from_dict,
    system_to_dict,
)
from .sdp import (  # noqa: F401
    SdpInstance,
    SdpSolution,
    SolverConfig,
    residuals,
    solve,
)
from .certify import (  # noqa: F401
    CertificationFailure,
    CertificationRequest,
    VerificationReport,
    ZenoCertificate,
    certify,
    check_certificate,
    load_certificate,
    save_certificate,
    sweep_degrees,
    sweep_lower_bound,
)
from .simulate import (  # noqa: F401
    BatchReport,
    Execution,
    ExecutionConfig,
    ZenoDiagnostics,
    batch_validate,
    classify,
    simulate,
    write_csv,
    write_phase_portrait,
    zeno_time_estimate,
)
