//! Error-reduction diagnostics: how much did a single update move the global
//! or layer-local loss? Positive values mean the update helped; persistently
//! negative values flag instability, and very small local reductions flag
//! targets that barely differ from the outputs.
//!
//! These functions are pure measurements — they never mutate machines or
//! state. Snapshot the relevant machines before the update (they are cheap to
//! clone at these scales), apply the update, then measure both sides.

use crate::error::Result;
use crate::kaku::{Criterion, Io, LearningMachine};

/// Loss of a single machine's eval-mode output on `x` against `t`.
pub fn loss_of(
    criterion: &Criterion,
    machine: &dyn LearningMachine,
    x: &Io,
    t: &Io,
) -> Result<f64> {
    let y = machine.predict(x)?;
    criterion.evaluate(y.single(), t.single())
}

/// Loss after feeding `x` through a suffix of machines (layer h to the
/// output) in eval mode.
pub fn suffix_loss(
    criterion: &Criterion,
    suffix: &[&dyn LearningMachine],
    x: &Io,
    t: &Io,
) -> Result<f64> {
    let mut cur = x.clone();
    for m in suffix {
        cur = m.predict(&cur)?;
    }
    criterion.evaluate(cur.single(), t.single())
}

/// Global error reduction across an update: the global loss of the
/// pre-update suffix network on the pre-update layer input, minus the same
/// measurement on the post-update pair.
pub fn global_error_reduction(
    global_criterion: &Criterion,
    suffix_pre: &[&dyn LearningMachine],
    x_pre: &Io,
    suffix_post: &[&dyn LearningMachine],
    x_post: &Io,
    t_global: &Io,
) -> Result<f64> {
    let pre = suffix_loss(global_criterion, suffix_pre, x_pre, t_global)?;
    let post = suffix_loss(global_criterion, suffix_post, x_post, t_global)?;
    Ok(pre - post)
}

/// Local error reduction: as [`global_error_reduction`] but over one machine
/// and its local target.
pub fn local_error_reduction(
    local_criterion: &Criterion,
    machine_pre: &dyn LearningMachine,
    x_pre: &Io,
    machine_post: &dyn LearningMachine,
    x_post: &Io,
    t_local: &Io,
) -> Result<f64> {
    let pre = loss_of(local_criterion, machine_pre, x_pre, t_local)?;
    let post = loss_of(local_criterion, machine_post, x_post, t_local)?;
    Ok(pre - post)
}
