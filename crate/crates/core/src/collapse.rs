//! Directional collapsibility, Simpson's paradox, and property batteries.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assoc::{di, AssociationKind, Evaluation, SIGN_TOLERANCE};
use crate::error::{Error, Result};
use crate::random::{log_uniform_table, trial_rng};
use crate::table::{
    collapse, conditional_equal, rescale_conditional_pair, slice, swap_category, BinaryTable,
    CellIndex, DEFAULT_CONDITIONAL_TOL,
};

/// Default number of witnesses kept per property.
pub const DEFAULT_WITNESS_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseReport {
    pub kind: String,
    /// Variable (1-based) that is conditioned on and collapsed over.
    pub variable: usize,
    pub layer_signs: [i8; 2],
    pub collapsed_sign: i8,
    pub paradox: bool,
    /// Values on the `V_i = 1` layer, the `V_i = 2` layer, and the collapsed
    /// table.
    pub values: [f64; 3],
}

/// Evaluates `kind` on both layers of variable `i` and on the table
/// collapsed over it.
pub fn collapse_check(table: &BinaryTable, kind: &AssociationKind, i: usize) -> Result<CollapseReport> {
    let first = kind.evaluate(&slice(table, i, 1)?)?;
    let second = kind.evaluate(&slice(table, i, 2)?)?;
    let collapsed = kind.evaluate(&collapse(table, i)?)?;
    let layer_signs = [first.sign(), second.sign()];
    let collapsed_sign = collapsed.sign();
    let paradox =
        layer_signs[0] == layer_signs[1] && layer_signs[0] != 0 && collapsed_sign != layer_signs[0];
    Ok(CollapseReport {
        kind: kind.name(),
        variable: i,
        layer_signs,
        collapsed_sign,
        paradox,
        values: [first.value, second.value, collapsed.value],
    })
}

/// One report per variable and kind, variables outermost.
pub fn simpson_scan(table: &BinaryTable, kinds: &[AssociationKind]) -> Result<Vec<CollapseReport>> {
    let mut reports = Vec::with_capacity(table.k() * kinds.len());
    for i in 1..=table.k() {
        for kind in kinds {
            reports.push(collapse_check(table, kind, i)?);
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchWitness {
    pub trial: u64,
    pub table: BinaryTable,
    pub report: CollapseReport,
}

/// Randomized search for a table on which `kind` shows Simpson's paradox.
///
/// Returns the witness with the lowest trial index, so the result depends
/// only on `(seed, trials)`.
pub fn paradox_search(
    kind: &AssociationKind,
    k: usize,
    trials: u64,
    seed: u64,
) -> Result<Option<SearchWitness>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "paradox search needs k >= 2, got {k}"
        )));
    }
    let found = (0..trials).into_par_iter().find_map_first(|trial| {
        let table = log_uniform_table(&mut trial_rng(seed, trial), k);
        for i in 1..=k {
            match collapse_check(&table, kind, i) {
                Ok(report) if report.paradox => {
                    return Some(Ok(SearchWitness {
                        trial,
                        table,
                        report,
                    }))
                }
                Ok(_) => {}
                Err(e) => return Some(Err(e)),
            }
        }
        None
    });
    found.transpose()
}

/// DI of both layers of variable `i` and of the collapsed table. The third
/// value equals the sum of the first two.
pub fn di_collapse_additivity(table: &BinaryTable, i: usize) -> Result<(f64, f64, f64)> {
    Ok((
        di(&slice(table, i, 1)?),
        di(&slice(table, i, 2)?),
        di(&collapse(table, i)?),
    ))
}

/// Whether adding a zero-sign table `q` to `p` preserves the sign of `p`.
pub fn additivity_sign_check(p: &BinaryTable, q: &BinaryTable, kind: &AssociationKind) -> Result<bool> {
    let q_eval = kind.evaluate(q)?;
    if q_eval.sign() != 0 {
        return Err(Error::InvalidArgument(format!(
            "q must have sign 0 under {}, got value {}",
            kind.name(),
            q_eval.value
        )));
    }
    let sum = p.add(q)?;
    Ok(kind.evaluate(&sum)?.sign() == kind.evaluate(p)?.sign())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyCheck {
    /// Nonzero value on a constant table.
    Zero,
    /// No strict increase after raising the `(1, ..., 1)` entry.
    Monotone,
    /// Swapping a variable's categories did not negate the value.
    Swap,
    /// The value changed although one variable's conditional distribution
    /// was kept.
    Conditional,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyWitness {
    pub check: PropertyCheck,
    pub trial: u64,
    pub table: BinaryTable,
    pub transformed: BinaryTable,
    pub variable: Option<usize>,
    pub before: f64,
    pub after: f64,
}

impl PropertyWitness {
    /// Recomputes both values and confirms the failure.
    pub fn reverify(&self, kind: &AssociationKind) -> Result<bool> {
        let before = kind.evaluate(&self.table)?;
        let after = kind.evaluate(&self.transformed)?;
        Ok(before.value == self.before
            && after.value == self.after
            && check_fails(self.check, &self.table, &self.transformed, self.variable, before, after))
    }
}

fn check_fails(
    check: PropertyCheck,
    table: &BinaryTable,
    transformed: &BinaryTable,
    variable: Option<usize>,
    before: Evaluation,
    after: Evaluation,
) -> bool {
    match check {
        PropertyCheck::Zero => after.sign() != 0,
        PropertyCheck::Monotone => after.value.partial_cmp(&before.value) != Some(Ordering::Greater),
        PropertyCheck::Swap => {
            let scale = before.scale.max(after.scale);
            after.sign() != -before.sign()
                || (after.value + before.value).abs() > SIGN_TOLERANCE * scale
        }
        PropertyCheck::Conditional => {
            let holds = variable
                .is_some_and(|i| conditional_equal(table, transformed, i, DEFAULT_CONDITIONAL_TOL));
            let scale = before.scale.max(after.scale);
            holds && (after.value - before.value).abs() > SIGN_TOLERANCE * scale
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PropertyOutcome {
    pub failures: u64,
    pub witnesses: Vec<PropertyWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyBatterySummary {
    pub kind: String,
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
    /// Zero on constant tables and strictly increasing in the `(1, ..., 1)`
    /// entry.
    pub p1: PropertyOutcome,
    /// Negation under every single-variable category swap.
    pub p2: PropertyOutcome,
    /// Invariance when one variable's conditional distribution is kept.
    pub p4: PropertyOutcome,
}

impl PropertyBatterySummary {
    pub fn total_failures(&self) -> u64 {
        self.p1.failures + self.p2.failures + self.p4.failures
    }
}

fn witness(
    check: PropertyCheck,
    trial: u64,
    table: &BinaryTable,
    transformed: BinaryTable,
    variable: Option<usize>,
    before: f64,
    after: f64,
) -> PropertyWitness {
    PropertyWitness {
        check,
        trial,
        table: table.clone(),
        transformed,
        variable,
        before,
        after,
    }
}

fn run_trial(kind: &AssociationKind, k: usize, seed: u64, trial: u64) -> Result<Vec<PropertyWitness>> {
    let mut rng = trial_rng(seed, trial);
    let table = log_uniform_table(&mut rng, k);
    let base = kind.evaluate(&table)?;
    let mut failed = Vec::new();

    let constant = BinaryTable::constant(k, table.entries()[0])?;
    let c = kind.evaluate(&constant)?;
    if check_fails(PropertyCheck::Zero, &constant, &constant, None, c, c) {
        failed.push(witness(PropertyCheck::Zero, trial, &constant, constant.clone(), None, c.value, c.value));
    }

    let factor = rng.random_range(1.01..=2.0);
    let raised = table.with_entry(0, table.entries()[0] * factor)?;
    let r = kind.evaluate(&raised)?;
    if check_fails(PropertyCheck::Monotone, &table, &raised, None, base, r) {
        failed.push(witness(PropertyCheck::Monotone, trial, &table, raised, None, base.value, r.value));
    }

    for i in 1..=k {
        let swapped = swap_category(&table, i)?;
        let s = kind.evaluate(&swapped)?;
        if check_fails(PropertyCheck::Swap, &table, &swapped, Some(i), base, s) {
            failed.push(witness(PropertyCheck::Swap, trial, &table, swapped, Some(i), base.value, s.value));
        }
    }

    let i = rng.random_range(1..=k);
    let mut rescaled = table.clone();
    for rest in 0..1usize << (k - 1) {
        let c = rng.random_range(-2.0..=2.0f64).exp();
        rescaled = rescale_conditional_pair(&rescaled, i, &CellIndex::from_linear(k - 1, rest), c)?;
    }
    let after = kind.evaluate(&rescaled)?;
    if check_fails(PropertyCheck::Conditional, &table, &rescaled, Some(i), base, after) {
        failed.push(witness(PropertyCheck::Conditional, trial, &table, rescaled, Some(i), base.value, after.value));
    }
    Ok(failed)
}

/// Checks the zero law and monotonicity, the swap sign flip, and
/// conditional invariance on `trials` random tables.
pub fn property_battery(
    kind: &AssociationKind,
    k: usize,
    trials: u64,
    seed: u64,
    witness_cap: usize,
) -> Result<PropertyBatterySummary> {
    if k < 1 {
        return Err(Error::InvalidArgument("property battery needs k >= 1".into()));
    }
    let per_trial: Vec<Vec<PropertyWitness>> = (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(kind, k, seed, trial))
        .collect::<Result<_>>()?;
    let mut summary = PropertyBatterySummary {
        kind: kind.name(),
        k,
        trials,
        seed,
        p1: PropertyOutcome::default(),
        p2: PropertyOutcome::default(),
        p4: PropertyOutcome::default(),
    };
    for w in per_trial.into_iter().flatten() {
        let outcome = match w.check {
            PropertyCheck::Zero | PropertyCheck::Monotone => &mut summary.p1,
            PropertyCheck::Swap => &mut summary.p2,
            PropertyCheck::Conditional => &mut summary.p4,
        };
        outcome.failures += 1;
        if outcome.witnesses.len() < witness_cap {
            outcome.witnesses.push(w);
        }
    }
    Ok(summary)
}
