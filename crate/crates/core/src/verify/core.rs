//! Minimal inconsistent core extraction by QuickXplain-style divide and conquer.

use std::cell::Cell;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::constraints::{check_constraints, Violation};
use super::eval::{evaluate, EvalError};
use super::theory::FixedTheory;
use crate::belief::BeliefProgram;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreResult {
    /// Indices into the program's statement list, ascending.
    pub core: Vec<usize>,
    /// Source text of each core statement, in the same order.
    pub statements: Vec<String>,
    pub violations_witnessed: Vec<Violation>,
    /// Number of consistency checks spent finding the core.
    pub checks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("program is consistent; there is no inconsistent core")]
    Consistent,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Violations of the sub-program made of `indices`.
pub fn violations_of(
    program: &BeliefProgram,
    indices: &BTreeSet<usize>,
    theory: &FixedTheory,
) -> Result<Vec<Violation>, EvalError> {
    let model = evaluate(&program.subset(indices), theory)?;
    Ok(check_constraints(&model.atoms, theory))
}

pub fn is_consistent(program: &BeliefProgram, indices: &BTreeSet<usize>, theory: &FixedTheory) -> Result<bool, EvalError> {
    Ok(violations_of(program, indices, theory)?.is_empty())
}

/// QuickXplain over `items` for a monotone `conflicts` predicate: returns a
/// subset that still conflicts and stops conflicting if any one element is
/// dropped, preferring early elements. `None` when `items` does not conflict.
pub fn quickxplain<F>(items: &[usize], mut conflicts: F) -> Option<Vec<usize>>
where
    F: FnMut(&[usize]) -> bool,
{
    if !conflicts(items) {
        return None;
    }
    if items.is_empty() {
        return Some(Vec::new());
    }
    let mut core = split(&[], false, items, &mut conflicts);
    core.sort_unstable();
    Some(core)
}

fn split<F>(background: &[usize], check_background: bool, candidates: &[usize], conflicts: &mut F) -> Vec<usize>
where
    F: FnMut(&[usize]) -> bool,
{
    if check_background && conflicts(background) {
        return Vec::new();
    }
    if candidates.len() == 1 {
        return candidates.to_vec();
    }
    let (first, second) = candidates.split_at(candidates.len() / 2);
    let with_first: Vec<usize> = background.iter().chain(first).copied().collect();
    let from_second = split(&with_first, !first.is_empty(), second, conflicts);
    let with_second: Vec<usize> = background.iter().chain(&from_second).copied().collect();
    let from_first = split(&with_second, !from_second.is_empty(), first, conflicts);
    let mut out = from_first;
    out.extend(from_second);
    out
}

/// Minimal inconsistent subset of the program's statements: removing any one
/// of them leaves a consistent program.
pub fn minimal_core(program: &BeliefProgram, source: Option<&str>, theory: &FixedTheory) -> Result<CoreResult, CoreError> {
    let checks = Cell::new(0usize);
    let mut eval_error = None;
    let mut violations = |indices: &[usize]| -> Vec<Violation> {
        checks.set(checks.get() + 1);
        let set: BTreeSet<usize> = indices.iter().copied().collect();
        match violations_of(program, &set, theory) {
            Ok(v) => v,
            Err(e) => {
                eval_error.get_or_insert(e);
                Vec::new()
            }
        }
    };

    let all: Vec<usize> = (0..program.len()).collect();
    if violations(&all).is_empty() {
        return Err(eval_error.map(CoreError::Eval).unwrap_or(CoreError::Consistent));
    }

    // The full set is already known to be inconsistent; skip re-checking it.
    let mut first_call = true;
    let focused = quickxplain(&all, |s| std::mem::take(&mut first_call) || !violations(s).is_empty())
        .expect("full program is inconsistent");

    let witnessed = violations(&focused);
    if let Some(e) = eval_error {
        return Err(CoreError::Eval(e));
    }
    let statements = focused
        .iter()
        .map(|&i| match (source, program.spans.get(i)) {
            (Some(text), Some(span)) if span.end_byte <= text.len() => text[span.start_byte..span.end_byte].to_string(),
            _ => program.statements[i].to_string(),
        })
        .collect();
    Ok(CoreResult { core: focused, statements, violations_witnessed: witnessed, checks: checks.get() })
}
