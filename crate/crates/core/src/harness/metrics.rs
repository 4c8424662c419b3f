use thiserror::Error;

use crate::orchestrator::CaseResult;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("EMPTY_RESULTS: no case results to score")]
    EmptyResults,
}

/// Steps of `result` whose goal was reached, never more than its length.
pub fn passed_step_count(result: &CaseResult) -> usize {
    result.passed_steps().min(result.step_count)
}

/// Case-level pass rate: passed cases over all cases.
pub fn pass_at_1(results: &[CaseResult]) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyResults);
    }
    let passed = results.iter().filter(|r| r.passed).count();
    Ok(passed as f64 / results.len() as f64)
}

/// Step-level completion rate: passed steps over all steps of all cases.
/// Steps at and after an abort count as not passed.
pub fn complete_at_1(results: &[CaseResult]) -> Result<f64, MetricsError> {
    let total: usize = results.iter().map(|r| r.step_count).sum();
    if total == 0 {
        return Err(MetricsError::EmptyResults);
    }
    let passed: usize = results.iter().map(passed_step_count).sum();
    Ok(passed as f64 / total as f64)
}
