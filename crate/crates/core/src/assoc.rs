//! Parameters of association.
//!
//! The contrast family evaluates `sum_even h(p(t)) - sum_odd h(p(t))` for a
//! monotone increasing `h`; `h = log`, the identity and `exp` give LOR, DI and
//! EX. Each parity class is summed over its values in sorted order with
//! compensated summation, so the result depends only on the two multisets of
//! transformed entries. Swapping the categories of a variable exchanges the
//! multisets and therefore negates the value exactly.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::table::{slice_values, BinaryTable, Parity};

/// Relative threshold below which a parameter value has sign 0.
pub const SIGN_TOLERANCE: f64 = 1e-9;

/// A named scalar function `f64 -> f64`.
///
/// Functions must be free of side effects; they may be called concurrently
/// from several threads.
#[derive(Clone)]
pub struct ScalarFn {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarFn {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn call(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn identity() -> Self {
        Self::new("identity", |x| x)
    }

    pub fn log() -> Self {
        Self::new("log", f64::ln)
    }

    pub fn exp() -> Self {
        Self::new("exp", f64::exp)
    }

    pub fn cube() -> Self {
        Self::new("cube", |x| x * x * x)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.name)
    }
}

/// Which parameter of association to evaluate.
#[derive(Debug, Clone)]
pub enum AssociationKind {
    Lor,
    Di,
    Ex,
    /// Contrast with a monotone increasing continuous `h`.
    Contrast(ScalarFn),
    /// `d(sum_even) - d(sum_odd)` for a strictly monotone `d`.
    AggregateContrast(ScalarFn),
    Bahadur,
}

impl AssociationKind {
    pub fn name(&self) -> String {
        match self {
            AssociationKind::Lor => "lor".into(),
            AssociationKind::Di => "di".into(),
            AssociationKind::Ex => "ex".into(),
            AssociationKind::Contrast(h) => format!("contrast({})", h.name()),
            AssociationKind::AggregateContrast(d) => format!("aggregate({})", d.name()),
            AssociationKind::Bahadur => "bahadur".into(),
        }
    }

    /// Parses the names accepted on the command line.
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lor" => Ok(AssociationKind::Lor),
            "di" => Ok(AssociationKind::Di),
            "ex" => Ok(AssociationKind::Ex),
            "bahadur" => Ok(AssociationKind::Bahadur),
            "aggregate-cube" => Ok(AssociationKind::AggregateContrast(ScalarFn::cube())),
            other => Err(Error::InvalidArgument(format!(
                "unknown association kind {other:?}"
            ))),
        }
    }

    /// True for the kinds built from a monotone contrast of the entries.
    pub fn is_contrast_family(&self) -> bool {
        matches!(
            self,
            AssociationKind::Lor
                | AssociationKind::Di
                | AssociationKind::Ex
                | AssociationKind::Contrast(_)
        )
    }

    pub fn evaluate(&self, table: &BinaryTable) -> Result<Evaluation> {
        self.evaluate_values(table.entries())
    }

    /// Evaluates on a raw entry array of length `2^k`. Zeros are allowed
    /// wherever the parameter itself is defined.
    pub fn evaluate_values(&self, entries: &[f64]) -> Result<Evaluation> {
        match self {
            AssociationKind::Lor => contrast_values(entries, &ScalarFn::log()),
            AssociationKind::Di => contrast_values(entries, &ScalarFn::identity()),
            AssociationKind::Ex => contrast_values(entries, &ScalarFn::exp()),
            AssociationKind::Contrast(h) => contrast_values(entries, h),
            AssociationKind::AggregateContrast(d) => aggregate_values(entries, d),
            AssociationKind::Bahadur => bahadur_values(entries),
        }
    }

    pub fn value(&self, table: &BinaryTable) -> Result<f64> {
        Ok(self.evaluate(table)?.value)
    }
}

/// A parameter value together with the magnitude scale used to decide its
/// sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub scale: f64,
}

impl Evaluation {
    pub fn sign(&self) -> i8 {
        sign_with_scale(self.value, self.scale)
    }
}

/// `0` when `|value| <= SIGN_TOLERANCE * scale`, otherwise the sign of `value`.
pub fn sign_with_scale(value: f64, scale: f64) -> i8 {
    if value.abs() <= SIGN_TOLERANCE * scale.abs() {
        0
    } else if value > 0.0 {
        1
    } else {
        -1
    }
}

/// Neumaier's compensated summation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    compensated_sum(values)
}

/// Sums of the even- and odd-parity classes, each independent of the order
/// of its members.
pub(crate) fn parity_sums(values: &[f64]) -> (f64, f64) {
    let mut even = Vec::with_capacity(values.len() / 2 + 1);
    let mut odd = Vec::with_capacity(values.len() / 2);
    for (t, &v) in values.iter().enumerate() {
        match Parity::of_linear(t) {
            Parity::Even => even.push(v),
            Parity::Odd => odd.push(v),
        }
    }
    (sorted_sum(even), sorted_sum(odd))
}

fn transformed(entries: &[f64], h: &ScalarFn) -> Result<Vec<f64>> {
    entries
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            let v = h.call(p);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Evaluation(format!(
                    "{}({p}) = {v} at cell {t}",
                    h.name()
                )))
            }
        })
        .collect()
}

pub(crate) fn contrast_values(entries: &[f64], h: &ScalarFn) -> Result<Evaluation> {
    let values = transformed(entries, h)?;
    let (even, odd) = parity_sums(&values);
    let value = even - odd;
    if !value.is_finite() {
        return Err(Error::Evaluation(format!(
            "{} contrast overflowed",
            h.name()
        )));
    }
    let scale = sorted_sum(values.iter().map(|v| v.abs()).collect());
    Ok(Evaluation { value, scale })
}

fn aggregate_values(entries: &[f64], d: &ScalarFn) -> Result<Evaluation> {
    let (even, odd) = parity_sums(entries);
    let (de, d_o) = (d.call(even), d.call(odd));
    let value = de - d_o;
    if !value.is_finite() {
        return Err(Error::Evaluation(format!(
            "{}({even}) - {}({odd}) is not finite",
            d.name(),
            d.name()
        )));
    }
    Ok(Evaluation {
        value,
        scale: de.abs() + d_o.abs(),
    })
}

fn bahadur_values(entries: &[f64]) -> Result<Evaluation> {
    let n = entries.len();
    let k = n.trailing_zeros() as usize;
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "the Bahadur parameter needs at least 2 variables, got {k}"
        )));
    }
    let total = compensated_sum(entries.iter().copied());
    let probs: Vec<f64> = entries.iter().map(|p| p / total).collect();
    // X_i = 1 when j_i = 1, i.e. when the variable's bit is clear.
    let mut means = Vec::with_capacity(k);
    for i in 1..=k {
        let bit = 1usize << (k - i);
        let mean = compensated_sum(
            probs
                .iter()
                .enumerate()
                .filter(|(t, _)| t & bit == 0)
                .map(|(_, &p)| p),
        );
        if !(mean > 0.0 && mean < 1.0) {
            return Err(Error::DegenerateMarginal { variable: i, mean });
        }
        means.push(mean);
    }
    let sds: Vec<f64> = means.iter().map(|m| (m * (1.0 - m)).sqrt()).collect();
    let mut terms = Vec::with_capacity(n);
    let mut abs_terms = Vec::with_capacity(n);
    for (t, &p) in probs.iter().enumerate() {
        let mut prod = p;
        for i in 1..=k {
            let x = if t & (1 << (k - i)) == 0 { 1.0 } else { 0.0 };
            prod *= (x - means[i - 1]) / sds[i - 1];
        }
        terms.push(prod);
        abs_terms.push(prod.abs());
    }
    Ok(Evaluation {
        value: compensated_sum(terms),
        scale: compensated_sum(abs_terms),
    })
}

pub fn contrast(table: &BinaryTable, h: &ScalarFn) -> Result<f64> {
    Ok(contrast_values(table.entries(), h)?.value)
}

/// Log odds ratio, the contrast with `h = log`.
pub fn lor(table: &BinaryTable) -> f64 {
    // Positive finite entries always have a finite logarithm.
    contrast_values(table.entries(), &ScalarFn::log())
        .map(|e| e.value)
        .unwrap_or(f64::NAN)
}

/// Difference parameter: even-cell total minus odd-cell total.
pub fn di(table: &BinaryTable) -> f64 {
    let (even, odd) = parity_sums(table.entries());
    even - odd
}

/// The contrast with `h = exp`. Fails when an entry overflows `exp`.
pub fn ex(table: &BinaryTable) -> Result<f64> {
    contrast(table, &ScalarFn::exp())
}

/// Product of even-cell entries over product of odd-cell entries, formed in
/// log space.
pub fn odds_ratio(table: &BinaryTable) -> f64 {
    lor(table).exp()
}

/// Evaluates the contrast by the recursion
/// `f_k(T) = f_{k-1}(T | V_i = 1) - f_{k-1}(T | V_i = 2)`, splitting on
/// variable `i` first and on the leading variable at every lower level.
pub fn recursive_contrast(table: &BinaryTable, h: &ScalarFn, i: usize) -> Result<f64> {
    if i == 0 || i > table.k() {
        return Err(Error::VariableOutOfRange {
            index: i,
            k: table.k(),
        });
    }
    let value = recurse(table.entries(), table.k(), i, h)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation(format!("{} recursion overflowed", h.name())))
    }
}

fn recurse(entries: &[f64], k: usize, i: usize, h: &ScalarFn) -> Result<f64> {
    match k {
        0 => transformed(entries, h).map(|v| v[0]),
        1 => {
            let v = transformed(entries, h)?;
            Ok(v[0] - v[1])
        }
        _ => {
            let first = slice_values(entries, k, i, 1);
            let second = slice_values(entries, k, i, 2);
            Ok(recurse(&first, k - 1, 1, h)? - recurse(&second, k - 1, 1, h)?)
        }
    }
}

pub fn aggregate_contrast(table: &BinaryTable, d: &ScalarFn) -> Result<f64> {
    Ok(aggregate_values(table.entries(), d)?.value)
}

/// Order-`k` standardized central cross-moment of the indicators
/// `X_i = [j_i = 1]` under the normalized table.
pub fn bahadur(table: &BinaryTable) -> Result<f64> {
    Ok(bahadur_values(table.entries())?.value)
}
