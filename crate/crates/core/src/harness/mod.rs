//! Scoring and suite execution.

mod metrics;
mod suite;

pub use metrics::{complete_at_1, pass_at_1, passed_step_count, MetricsError};
pub use suite::{
    cross_check_pages, run_suite, BackendConfig, CaseReport, PageCheck, SuiteCase, SuiteConfig, SuiteError,
    SuiteReport, REPORT_SCHEMA_VERSION,
};
