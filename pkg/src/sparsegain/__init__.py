"""Block-sparse stabilizing feedback synthesis from noisy trajectory data.

Pipeline: build a consistency set from one experiment window
(``datamodel``), synthesize a stabilizing gain valid for every system in
the set (``synth``), drive its block pattern sparse by reweighted
minimization (``sparsify``), and verify the certificate independently
(``verify``). The ``sparsegain`` command line wraps the pipeline.
"""

from .blockmat import (
    DEFAULT_ZERO_TOL,
    Partition,
    SparsityStructure,
    bcard,
    block,
    block_frobenius,
    conforms,
    phi,
    structure_of,
)
from .datamodel import (
    ConsistencySet,
    DegenerateConsistencySetError,
    NoiseModel,
    TrajectoryData,
    build_N,
    noise_model_from_energy_bound,
    noise_satisfies,
    sigma_center,
    sigma_membership,
)
from .simulate import (
    NoiseRealization,
    SystemModel,
    paper_fixture,
    random_network_system,
    rollout,
    sample_noise_within,
)
from .coneprog import (
    BlockdiagStructure,
    ConeProblem,
    RowStructure,
    SolveResult,
    SolveStatus,
    SolverSettings,
    assemble_reweighted_objective,
    assemble_stab_lmi,
    solve,
)
from .synth import (
    ExhaustiveResult,
    Infeasible,
    SolverFailureError,
    StabCertificate,
    enumerate_patterns,
    exhaustive_min_bcard,
    synthesize_blockdiag,
    synthesize_centralized,
    synthesize_row_structured,
)
from .sparsify import (
    NotInformativeError,
    ReweightState,
    ReweightTrace,
    SparsifyOptions,
    initialize,
    reweight,
    run,
    step,
)
from .verify import (
    VerificationReport,
    check_certificate,
    lyapunov_margin,
    sample_sigma_boundary,
    spectral_radius,
    verify_gain,
)

__version__ = "0.1.0"
