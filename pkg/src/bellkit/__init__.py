"""Executable probability calculus for two-party Bell experiments."""

from .conditions import (
    ConditionReport,
    EquivalenceReport,
    check_bell_local_conditional,
    check_bell_local_factorized,
    check_fr,
    check_no_conspiracy,
    check_no_extension,
    check_no_signaling,
    check_outcome_independence,
    check_parameter_independence,
    verify_appendix_a,
    verify_appendix_b,
    verify_jarrett,
)
from .core import (
    Behavior,
    Component,
    HvModel,
    JointDistribution,
    Scenario,
    SettingPolicy,
    averaged_behavior,
    build_joint,
    conditional,
    validate_behavior,
)
from .errors import BellkitError, InvariantError, ResourceError, SolverError, StructureError, UsageError
from .geometry import (
    ChshResult,
    LocalityCertificate,
    chsh_max,
    correlators,
    enumerate_deterministic,
    local_membership,
    local_visibility,
    pr_box,
)
from .quantum import MeasurementDirection, TwoQubitState, pure_state_behavior, singlet_behavior, tsirelson_singlet
from .simulator import Transcript, empirical_condition_check, simulate, summarize

__version__ = "0.1.0"
