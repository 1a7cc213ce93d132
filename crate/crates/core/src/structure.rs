//! Two constructive procedures on binary tables.
//!
//! [`canonicalize`] reduces a table to the canonical form (every entry 1
//! except cell `(1, ..., 1)`, which holds the odds ratio) through a series of
//! rescalings that each preserve one variable's conditional distribution.
//!
//! [`decompose`] writes a table as an entrywise sum of strictly positive
//! components: a constant one, pair components with a common raised value at
//! one even and one odd cell (DI exactly zero), and single-peak components
//! whose peaks all share the parity of the table's DI sign.

use serde::Serialize;

use crate::error::Result;
use crate::table::{insert_bit, BinaryTable, CellIndex, Parity};

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalStep {
    /// Variable (1-based) whose conditional pairs were rescaled.
    pub variable: usize,
    pub table: BinaryTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalTrace {
    pub input: BinaryTable,
    pub steps: Vec<CanonicalStep>,
    #[serde(rename = "final")]
    pub final_table: BinaryTable,
}

/// Step `i` divides each pair `{t with j_i = 1, t with j_i = 2}` whose first
/// `i - 1` indices are all 1 by its `j_i = 2` member.
pub fn canonicalize(table: &BinaryTable) -> CanonicalTrace {
    let k = table.k();
    let mut current = table.entries().to_vec();
    let mut steps = Vec::with_capacity(k);
    for i in 1..=k {
        let pos = k - i;
        // Cells below `pos` range freely; the prefix bits stay clear.
        for rest in 0..1usize << pos {
            let one = insert_bit(rest, pos, 0);
            let two = insert_bit(rest, pos, 1);
            let divisor = current[two];
            current[one] /= divisor;
            current[two] = 1.0;
        }
        steps.push(CanonicalStep {
            variable: i,
            table: BinaryTable::from_parts_unchecked(k, current.clone()),
        });
    }
    CanonicalTrace {
        input: table.clone(),
        steps,
        final_table: BinaryTable::from_parts_unchecked(k, current),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionCase {
    Positive,
    Negative,
    Zero,
}

impl DecompositionCase {
    pub fn sign(self) -> i8 {
        match self {
            DecompositionCase::Positive => 1,
            DecompositionCase::Negative => -1,
            DecompositionCase::Zero => 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairComponent {
    /// The even and odd cell holding the raised value; `None` for the
    /// constant component.
    pub cells: Option<(CellIndex, CellIndex)>,
    pub table: BinaryTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakComponent {
    pub cell: CellIndex,
    pub table: BinaryTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub k: usize,
    /// Smallest entry of the input.
    pub s: f64,
    pub case: DecompositionCase,
    pub pair_components: Vec<PairComponent>,
    pub peak_components: Vec<PeakComponent>,
    /// Constant added to every cell of every component.
    pub increment: f64,
}

impl Decomposition {
    pub fn component_count(&self) -> usize {
        self.pair_components.len() + self.peak_components.len()
    }

    pub fn tables(&self) -> impl Iterator<Item = &BinaryTable> {
        self.pair_components
            .iter()
            .map(|c| &c.table)
            .chain(self.peak_components.iter().map(|c| &c.table))
    }
}

fn argmin_positive(q: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (t, &v) in q.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|b| v < q[b]) {
            best = Some(t);
        }
    }
    best
}

fn argmax_in_class(q: &[f64], parity: Parity) -> usize {
    let mut best: Option<usize> = None;
    for (t, &v) in q.iter().enumerate() {
        if Parity::of_linear(t) == parity && best.is_none_or(|b| v > q[b]) {
            best = Some(t);
        }
    }
    best.expect("every parity class is non-empty for k >= 1")
}

fn class_is_zero(q: &[f64], parity: Parity) -> bool {
    q.iter()
        .enumerate()
        .all(|(t, &v)| Parity::of_linear(t) != parity || v == 0.0)
}

/// Greedy split into pair and peak components.
///
/// After subtracting the minimum entry `s`, the smallest positive residue
/// (lowest index on ties) is paired with the largest residue of the opposite
/// parity (lowest index on ties) until one parity class is exhausted. What
/// remains in the other class becomes one peak component per positive cell.
/// Finally `s / (#pair components + #peak components)` is added to every cell
/// of every component, so the components are strictly positive and sum to
/// the input.
pub fn decompose(table: &BinaryTable) -> Decomposition {
    let k = table.k();
    let n = table.len();
    let s = table.entries().iter().copied().fold(f64::INFINITY, f64::min);
    let mut q: Vec<f64> = table.entries().iter().map(|p| p - s).collect();

    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    while k > 0 && !class_is_zero(&q, Parity::Even) && !class_is_zero(&q, Parity::Odd) {
        let first = argmin_positive(&q).expect("a positive residue exists in both classes");
        let value = q[first];
        let other = match Parity::of_linear(first) {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        };
        let partner = argmax_in_class(&q, other);
        debug_assert!(q[partner] >= value);
        q[first] = 0.0;
        q[partner] -= value;
        let (even, odd) = if other == Parity::Odd {
            (first, partner)
        } else {
            (partner, first)
        };
        pairs.push((even, odd, value));
    }

    let case = if k == 0 || (class_is_zero(&q, Parity::Even) && class_is_zero(&q, Parity::Odd)) {
        DecompositionCase::Zero
    } else if class_is_zero(&q, Parity::Odd) {
        DecompositionCase::Positive
    } else {
        DecompositionCase::Negative
    };
    let peaks: Vec<(usize, f64)> = q
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(t, &v)| (t, v))
        .collect();

    let increment = s / (1 + pairs.len() + peaks.len()) as f64;
    let base = || vec![increment; n];

    let mut pair_components = Vec::with_capacity(pairs.len() + 1);
    pair_components.push(PairComponent {
        cells: None,
        table: BinaryTable::from_parts_unchecked(k, base()),
    });
    for &(even, odd, value) in &pairs {
        let mut entries = base();
        entries[even] += value;
        entries[odd] += value;
        pair_components.push(PairComponent {
            cells: Some((CellIndex::from_linear(k, even), CellIndex::from_linear(k, odd))),
            table: BinaryTable::from_parts_unchecked(k, entries),
        });
    }
    let peak_components = peaks
        .iter()
        .map(|&(t, value)| {
            let mut entries = base();
            entries[t] += value;
            PeakComponent {
                cell: CellIndex::from_linear(k, t),
                table: BinaryTable::from_parts_unchecked(k, entries),
            }
        })
        .collect();

    Decomposition {
        k,
        s,
        case,
        pair_components,
        peak_components,
        increment,
    }
}

/// Entrywise sum of all components.
pub fn recompose(d: &Decomposition) -> Result<BinaryTable> {
    let mut entries = vec![0.0; 1 << d.k];
    for table in d.tables() {
        for (acc, p) in entries.iter_mut().zip(table.entries()) {
            *acc += p;
        }
    }
    BinaryTable::new(d.k, entries)
}
