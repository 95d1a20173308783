"""School health monitoring and management system.

Core pieces: a fixed 45-parameter screening catalog, immunization schedule
evaluation, a configurable clinical rules engine with doctor referrals, a
durable audited records store, role-based access control, an HTTP API and
an operator CLI.
"""

from .access import (
    Action,
    Decision,
    MinimalView,
    Principal,
    Role,
    ROLE_GRANTS,
    authorize,
    minimal_view,
)
from .catalog import (
    Area,
    Cardinality,
    KindType,
    ParameterCatalog,
    ParameterDefinition,
    ParameterValue,
    compute_bmi,
    format_bmi,
    load_catalog,
    load_default_catalog,
    round_bmi,
    validate_value,
)
from .cohort import CohortQuery, build_cohort, write_cohort_csv
from .config import ServiceConfig, load_config
from .dates import Age, add_months, age_at, completed_months
from .errors import HmmsError
from .immunization import (
    DoseEvent,
    DoseState,
    ImmunizationSchedule,
    ImmunizationStatus,
    OverallStatus,
    VaccineSpec,
    evaluate_immunization,
    load_default_schedule,
    load_schedule,
)
from .screening import (
    ClinicalRule,
    Finding,
    Referral,
    ReferralStatus,
    Ruleset,
    Severity,
    Verdict,
    load_default_ruleset,
    load_ruleset,
    lookup_disease_hints,
    run_screening,
    screen_all,
    validate_ruleset,
)
from .store import AuditAction, AuditEntry, RecordsStore, StudentRecord

__version__ = "1.0.0"

__all__ = [
    "Action",
    "Age",
    "Area",
    "AuditAction",
    "AuditEntry",
    "Cardinality",
    "ClinicalRule",
    "CohortQuery",
    "Decision",
    "DoseEvent",
    "DoseState",
    "Finding",
    "HmmsError",
    "ImmunizationSchedule",
    "ImmunizationStatus",
    "KindType",
    "MinimalView",
    "OverallStatus",
    "ParameterCatalog",
    "ParameterDefinition",
    "ParameterValue",
    "Principal",
    "RecordsStore",
    "Referral",
    "ReferralStatus",
    "Role",
    "ROLE_GRANTS",
    "Ruleset",
    "ServiceConfig",
    "Severity",
    "StudentRecord",
    "VaccineSpec",
    "Verdict",
    "add_months",
    "age_at",
    "authorize",
    "build_cohort",
    "completed_months",
    "compute_bmi",
    "evaluate_immunization",
    "format_bmi",
    "load_catalog",
    "load_config",
    "load_default_catalog",
    "load_default_ruleset",
    "load_default_schedule",
    "load_ruleset",
    "load_schedule",
    "lookup_disease_hints",
    "minimal_view",
    "round_bmi",
    "run_screening",
    "screen_all",
    "validate_value",
    "validate_ruleset",
    "write_cohort_csv",
    "__version__",
]
