"""Entanglement distillation of qudit Bell mixtures.

``gates`` builds the generalized CNOT, Fourier gate and Bell basis,
``oracle`` simulates a full round on density matrices, ``recursion`` holds
the weight-level maps and their closed forms, and ``analysis`` covers fixed
points, basins, the continuum limit and the three-site RG block.
"""

from .analysis import (
    ContinuumProfile,
    FixedPoint,
    PhaseDiagram,
    QrgReport,
    Stability,
    asymptotic_weights,
    continuum_evolve,
    fixed_points_isotropic,
    parabolic_profile,
    phase_diagram,
    qrg_demo,
    qutrit_fixed_points,
)
from .errors import (
    DegenerateDistributionError,
    DimensionMismatchError,
    DistillationError,
    InvalidDimensionError,
    InvalidStateError,
    OutOfBasinError,
    OutOfRangeError,
    UnsupportedVariantError,
)
from .gates import BellIndex, Residue, Step2Variant, bell_state, cnot_matrix, qft_matrix, step2prime_unitaries
from .oracle import (
    BipartiteDensity,
    FourPartyDensity,
    QubitVariant,
    RoundOutcome,
    bcnot_on_bell_pair,
    decompose_bell,
    distill_round_oracle,
    nondiagonal_round,
    qubit_variant_round,
)
from .recursion import (
    FlowTrajectory,
    closed_form_dft,
    closed_form_isotropic,
    closed_form_subset,
    coincidence_prob_isotropic,
    iterations_needed,
    step_general,
    step_isotropic,
    step_nondiagonal,
    step_qutrit,
    step_subset,
)

__version__ = "0.1.0"
