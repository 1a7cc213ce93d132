//! The full `2^k` parameterization: one LOR or DI value per margin.
//!
//! For DI the map from tables to parameters is linear with coefficient matrix
//! `A[m, t] = (-1)^(#{i : m_i = 1, t_i = 2})`, the `k`-fold tensor product of
//! `[[1, 1], [1, -1]]`. Both directions are a Walsh-Hadamard butterfly. For
//! LOR the inverse is computed by cyclic multiplicative adjustment.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::assoc::{compensated_sum, parity_sums};
use crate::error::{Error, Result};
use crate::table::{marginal_values, BinaryTable, MarginMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Lor,
    Di,
}

impl ParamKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lor" => Ok(ParamKind::Lor),
            "di" => Ok(ParamKind::Di),
            other => Err(Error::InvalidArgument(format!(
                "parameterization must be lor or di, got {other:?}"
            ))),
        }
    }
}

/// One parameter value per margin mask, indexed by the mask's linear value.
///
/// The empty mask holds the log of the product of all entries (LOR) or the
/// sum of all entries (DI).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    k: usize,
    kind: ParamKind,
    values: Vec<f64>,
}

impl ParamSet {
    pub fn new(k: usize, kind: ParamKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != 1 << k {
            return Err(Error::EntryCount {
                k,
                expected: 1 << k,
                got: values.len(),
            });
        }
        if let Some((m, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "parameter for mask {} is {v}",
                MarginMask::from_linear(k, m)
            )));
        }
        Ok(Self { k, kind, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> ParamKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, m: &MarginMask) -> f64 {
        self.values[m.linear()]
    }

    pub fn set(&mut self, m: &MarginMask, value: f64) {
        self.values[m.linear()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (MarginMask, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(m, &v)| (MarginMask::from_linear(self.k, m), v))
    }

    /// Largest absolute difference over all masks.
    pub fn max_abs_diff(&self, other: &ParamSet) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize)]
struct ParamSetRepr {
    k: usize,
    kind: ParamKind,
    values: BTreeMap<String, f64>,
}

impl Serialize for ParamSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamSetRepr {
            k: self.k,
            kind: self.kind,
            values: self.iter().map(|(m, v)| (m.to_string(), v)).collect(),
        }
        .serialize(s)
    }
}

/// Mask-keyed values, rejecting duplicate keys.
struct MaskValues(Vec<(String, f64)>);

impl<'de> Deserialize<'de> for MaskValues {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = MaskValues;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "an object keyed by mask bitstrings")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<MaskValues, A::Error> {
                let mut out = Vec::new();
                while let Some((key, value)) = map.next_entry::<String, f64>()? {
                    if out.iter().any(|(k, _): &(String, f64)| *k == key) {
                        return Err(serde::de::Error::custom(format!("duplicate mask {key:?}")));
                    }
                    out.push((key, value));
                }
                Ok(MaskValues(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Deserialize)]
struct ParamSetInput {
    k: usize,
    kind: ParamKind,
    values: MaskValues,
}

impl<'de> Deserialize<'de> for ParamSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let input = ParamSetInput::deserialize(d)?;
        ParamSet::from_keyed(input.k, input.kind, input.values.0).map_err(serde::de::Error::custom)
    }
}

impl ParamSet {
    fn from_keyed(k: usize, kind: ParamKind, keyed: Vec<(String, f64)>) -> Result<Self> {
        let n = 1usize << k;
        let mut values = vec![None; n];
        for (key, value) in keyed {
            let m = MarginMask::parse(&key)?;
            if m.k() != k {
                return Err(Error::InvalidMask(format!(
                    "mask {key:?} has length {}, expected {k}",
                    m.k()
                )));
            }
            values[m.linear()] = Some(value);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(m, v)| {
                v.ok_or_else(|| {
                    Error::InvalidMask(format!("missing mask {}", MarginMask::from_linear(k, m)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, kind, values)
    }
}

fn lor_of_margin(entries: &[f64], mask: usize) -> f64 {
    if mask == 0 {
        return compensated_sum(entries.iter().map(|p| p.ln()));
    }
    let logs: Vec<f64> = marginal_values(entries, mask).iter().map(|p| p.ln()).collect();
    let (even, odd) = parity_sums(&logs);
    even - odd
}

fn di_of_margin(entries: &[f64], mask: usize) -> f64 {
    let (even, odd) = parity_sums(&marginal_values(entries, mask));
    even - odd
}

/// Evaluates the parameter on every marginal table. Costs `O(k 4^k)`.
pub fn full_params(table: &BinaryTable, kind: ParamKind) -> ParamSet {
    let entries = table.entries();
    let values = (0..table.len())
        .map(|m| match kind {
            ParamKind::Lor => lor_of_margin(entries, m),
            ParamKind::Di => di_of_margin(entries, m),
        })
        .collect();
    ParamSet {
        k: table.k(),
        kind,
        values,
    }
}

/// In-place unnormalized Walsh-Hadamard transform: `(a, b) -> (a + b, a - b)`
/// along every axis.
pub fn walsh_hadamard(values: &mut [f64]) {
    let n = values.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in values.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// All DI parameters in `O(k 2^k)`.
pub fn di_forward_fast(table: &BinaryTable) -> ParamSet {
    let mut values = table.entries().to_vec();
    walsh_hadamard(&mut values);
    ParamSet {
        k: table.k(),
        kind: ParamKind::Di,
        values,
    }
}

/// Solves the DI sign system: `p = A^T v / 2^k`.
pub fn di_inverse(params: &ParamSet) -> Result<BinaryTable> {
    if params.kind != ParamKind::Di {
        return Err(Error::InvalidArgument("di_inverse needs DI parameters".into()));
    }
    let mut values = params.values.clone();
    walsh_hadamard(&mut values);
    let scale = (params.values.len() as f64).recip();
    for (index, v) in values.iter_mut().enumerate() {
        *v *= scale;
        if *v <= 0.0 || !v.is_finite() {
            return Err(Error::NonRealizableParams { index, value: *v });
        }
    }
    Ok(BinaryTable::from_parts_unchecked(params.k, values))
}

pub const DEFAULT_LOR_TOL: f64 = 1e-8;
pub const DEFAULT_LOR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorFitOptions {
    /// Target max-absolute deviation over all masks.
    pub tol: f64,
    /// Maximum number of full cycles over the masks.
    pub max_iter: usize,
}

impl Default for LorFitOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_LOR_TOL,
            max_iter: DEFAULT_LOR_MAX_ITER,
        }
    }
}

/// A reconstructed table with fit diagnostics.
#[derive(Debug, Clone)]
pub struct LorFit {
    pub table: BinaryTable,
    pub cycles: usize,
    pub residual: f64,
}

/// Reconstructs the positive table whose full LOR parameterization is
/// `params`.
///
/// Starts from the constant table with the target log-product and cycles over
/// the non-empty masks in hierarchical order. Multiplying every cell by
/// `exp(delta * s_m(t))`, where `s_m(t)` is the cell's sign in margin `m`,
/// scales each cell of the `m`-margin by `exp(+-delta)`, so the marginal LOR
/// moves by exactly `delta * 2^|m|` while the log-product is unchanged. Each
/// adjustment therefore hits its target in one step; cycling resolves the
/// coupling between margins.
pub fn lor_inverse(params: &ParamSet, options: &LorFitOptions) -> Result<LorFit> {
    if params.kind != ParamKind::Lor {
        return Err(Error::InvalidArgument("lor_inverse needs LOR parameters".into()));
    }
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            options.tol
        )));
    }
    let k = params.k;
    let n = 1usize << k;
    let order: Vec<usize> = MarginMask::hierarchical(k)
        .into_iter()
        .map(|m| m.linear())
        .filter(|&m| m != 0)
        .collect();
    let mut log_entries = vec![params.values[0] / n as f64; n];
    let mut entries: Vec<f64> = log_entries.iter().map(|l| l.exp()).collect();
    let residual_of = |entries: &[f64]| {
        (0..n)
            .map(|m| (lor_of_margin(entries, m) - params.values[m]).abs())
            .fold(0.0, f64::max)
    };
    let mut residual = residual_of(&entries);
    let mut cycles = 0;
    while residual.is_nan() || residual >= options.tol {
        if cycles >= options.max_iter {
            return Err(Error::Convergence {
                iterations: cycles,
                residual,
            });
        }
        for &m in &order {
            let current = lor_of_margin(&entries, m);
            let delta = (params.values[m] - current) / (1u64 << m.count_ones()) as f64;
            if delta == 0.0 {
                continue;
            }
            for (t, (l, p)) in log_entries.iter_mut().zip(entries.iter_mut()).enumerate() {
                if (t & m).count_ones() % 2 == 0 {
                    *l += delta;
                } else {
                    *l -= delta;
                }
                *p = l.exp();
            }
        }
        cycles += 1;
        residual = residual_of(&entries);
        if !residual.is_finite() {
            return Err(Error::NonFinite(format!(
                "residual became {residual} after {cycles} cycles"
            )));
        }
    }
    for (index, &p) in entries.iter().enumerate() {
        if p <= 0.0 || !p.is_finite() {
            return Err(Error::NonFinite(format!("entry {index} is {p}")));
        }
    }
    Ok(LorFit {
        table: BinaryTable::from_parts_unchecked(k, entries),
        cycles,
        residual,
    })
}

/// LOR targets combining every lower-order parameter of `margins_from` with
/// the top-order LOR of `top_from`.
pub fn mixed_lor_targets(margins_from: &BinaryTable, top_from: &BinaryTable) -> Result<ParamSet> {
    if margins_from.k() != top_from.k() {
        return Err(Error::DimensionMismatch {
            left: margins_from.k(),
            right: top_from.k(),
        });
    }
    let mut targets = full_params(margins_from, ParamKind::Lor);
    let full = MarginMask::full(top_from.k());
    targets.set(&full, lor_of_margin(top_from.entries(), full.linear()));
    Ok(targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(e: &[f64]) -> BinaryTable {
        BinaryTable::from_entries(e.to_vec()).unwrap()
    }

    fn mask(s: &str) -> MarginMask {
        MarginMask::parse(s).unwrap()
    }

    #[test]
    fn full_params_examples() {
        let p = full_params(&t(&[1.5, 4.0]), ParamKind::Di);
        assert_eq!(p.values(), &[5.5, -2.5]);
        let p = full_params(&t(&[2.0, 3.0, 4.0, 5.0]), ParamKind::Di);
        assert_eq!(p.get(&mask("00")), 14.0);
        assert_eq!(p.get(&mask("10")), -4.0);
        assert_eq!(p.get(&mask("01")), -2.0);
        assert_eq!(p.get(&mask("11")), 0.0);
        let u = full_params(&BinaryTable::constant(3, 2.5).unwrap(), ParamKind::Lor);
        for (m, v) in u.iter() {
            if m.dim() == 0 {
                assert!((v - 8.0 * 2.5f64.ln()).abs() < 1e-12);
            } else {
                assert_eq!(v, 0.0, "mask {m}");
            }
        }
    }

    #[test]
    fn fast_matches_full_small() {
        let x = BinaryTable::from_fn(5, |i| 1.0 + ((i * 29) % 13) as f64).unwrap();
        let fast = di_forward_fast(&x);
        let slow = full_params(&x, ParamKind::Di);
        assert!(fast.max_abs_diff(&slow) < 1e-12);
        let u = di_forward_fast(&BinaryTable::constant(4, 0.5).unwrap());
        assert_eq!(u.values()[0], 8.0);
        assert!(u.values()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sign_matrix_is_orthogonal() {
        for k in 0..=6 {
            let n = 1usize << k;
            let a = |m: usize, t: usize| if (m & t).count_ones().is_multiple_of(2) { 1i64 } else { -1 };
            for r in 0..n {
                for s in 0..n {
                    let dot: i64 = (0..n).map(|t| a(r, t) * a(s, t)).sum();
                    assert_eq!(dot, if r == s { n as i64 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn di_inverse_examples() {
        let p = ParamSet::new(2, ParamKind::Di, vec![14.0, -2.0, -4.0, 0.0]).unwrap();
        assert_eq!(di_inverse(&p).unwrap().entries(), &[2.0, 3.0, 4.0, 5.0]);
        let bad = ParamSet::new(1, ParamKind::Di, vec![2.0, 4.0]).unwrap();
        assert_eq!(
            di_inverse(&bad),
            Err(Error::NonRealizableParams {
                index: 1,
                value: -1.0
            })
        );
        let lor = ParamSet::new(1, ParamKind::Lor, vec![2.0, 4.0]).unwrap();
        assert!(di_inverse(&lor).is_err());
    }

    #[test]
    fn lor_inverse_examples() {
        let c: f64 = 1.7;
        let mut values = vec![0.0; 8];
        values[0] = 8.0 * c.ln();
        let p = ParamSet::new(3, ParamKind::Lor, values).unwrap();
        let fit = lor_inverse(&p, &LorFitOptions::default()).unwrap();
        for &v in fit.table.entries() {
            assert!((v - c).abs() < 1e-12);
        }

        let target = t(&[2.0, 1.0, 1.0, 2.0]);
        let params = full_params(&target, ParamKind::Lor);
        assert!((params.get(&mask("11")) - 4f64.ln()).abs() < 1e-14);
        let fit = lor_inverse(&params, &LorFitOptions::default()).unwrap();
        assert!(fit.residual < 1e-8);
        for (a, b) in fit.table.entries().iter().zip(target.entries()) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn lor_inverse_reports_nonconvergence() {
        let target = t(&[3.0, 1.0, 0.5, 2.0, 1.0, 4.0, 2.0, 0.25]);
        let params = full_params(&target, ParamKind::Lor);
        let options = LorFitOptions { tol: 1e-12, max_iter: 1 };
        assert!(matches!(
            lor_inverse(&params, &options),
            Err(Error::Convergence { iterations: 1, .. })
        ));
        let bad = LorFitOptions { tol: 0.0, max_iter: 10 };
        assert!(lor_inverse(&params, &bad).is_err());
    }

    #[test]
    fn mixed_targets_reproduce_both_sources() {
        let r = t(&[0.2, 0.5, 0.9, 0.1]);
        let s = t(&[4.0, 1.0, 2.0, 7.0]);
        let targets = mixed_lor_targets(&r, &s).unwrap();
        let fit = lor_inverse(&targets, &LorFitOptions::default()).unwrap();
        let got = full_params(&fit.table, ParamKind::Lor);
        let from_r = full_params(&r, ParamKind::Lor);
        for m in ["00", "01", "10"] {
            assert!((got.get(&mask(m)) - from_r.get(&mask(m))).abs() < 1e-8);
        }
        let top = full_params(&s, ParamKind::Lor).get(&mask("11"));
        assert!((got.get(&mask("11")) - top).abs() < 1e-8);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = full_params(&t(&[2.0, 3.0, 4.0, 5.0]), ParamKind::Di);
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(
            text,
            r#"{"k":2,"kind":"di","values":{"00":14.0,"01":-2.0,"10":-4.0,"11":0.0}}"#
        );
        let back: ParamSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let missing = r#"{"k":1,"kind":"di","values":{"0":1.0}}"#;
        assert!(serde_json::from_str::<ParamSet>(missing).is_err());
        let dup = r#"{"k":1,"kind":"di","values":{"0":1.0,"1":0.5,"1":0.2}}"#;
        assert!(serde_json::from_str::<ParamSet>(dup).is_err());
        let long = r#"{"k":1,"kind":"di","values":{"0":1.0,"01":0.5}}"#;
        assert!(serde_json::from_str::<ParamSet>(long).is_err());
    }
}
