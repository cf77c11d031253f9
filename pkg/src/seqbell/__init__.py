"""Sequential weak-measurement randomness: simulation and certification.

A two-qubit entangled pair is measured by a chain of Bobs with tunable
strength; each step's correlations with Alice certify device-independent
random bits through a tilted CHSH inequality.  The package evolves the
history-conditioned branch tree, computes the certificates, optimizes the
strengths under source noise, locates noise thresholds, and emulates the
counting statistics of a photonic implementation.
"""

from .bell import BellCertificate, Correlators, beta_of, bell_value, guess_bound, observables
from .errors import (
    BracketingError,
    CertificationUndefinedError,
    CountTableError,
    DegenerateBranchError,
    DomainError,
    InsufficientDataError,
    ModelViolationError,
    SeqbellError,
)
from .montecarlo import (
    CountRow,
    CountTable,
    EstimateEntry,
    EstimateReport,
    SettingSpec,
    bootstrap,
    default_specs,
    estimate,
    outcome_probabilities,
    read_count_table,
    resample_counts,
    sample_counts,
    write_count_table,
)
from .noise import NoiseParams, Visibilities, make_state, params_from_visibilities, visibilities_of
from .optimize import (
    Aggregation,
    ExtractionSummary,
    MaximizeResult,
    StepEntropy,
    ThresholdQuery,
    ThresholdResult,
    find_threshold,
    maximize,
    sweep_one,
    sweep_two,
    total_entropy,
)
from .protocol import (
    BranchNode,
    History,
    ProtocolConfig,
    evolve_tree,
    kraus_pair,
    rebalance_unitaries,
    weak_branch,
)
from .qcore import (
    PureTwoQubit,
    QubitOperator,
    SchmidtForm,
    TwoQubitState,
    expect,
    schmidt,
    tensor,
)

__version__ = "0.1.0"
