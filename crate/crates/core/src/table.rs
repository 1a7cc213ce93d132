//! Binary contingency tables over `k` variables.
//!
//! Cells are addressed by index vectors `t = (j_1, ..., j_k)` with every
//! `j_i` in `{1, 2}`. Entries are stored row-major with variable 1 the most
//! significant, so the linear index of `t` is `sum_i (j_i - 1) * 2^(k - i)`.
//! Equivalently, bit `k - i` of the linear index is set iff `j_i = 2`, and the
//! parity of a cell is the parity of the popcount of its linear index.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the table dimension.
pub const DEFAULT_MAX_K: usize = 20;

/// Default relative tolerance for [`conditional_equal`].
pub const DEFAULT_CONDITIONAL_TOL: f64 = 1e-9;

/// Limits applied when a [`BinaryTable`] is constructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableConfig {
    /// Largest accepted dimension.
    pub max_k: usize,
    /// Every entry must be strictly greater than this value.
    pub floor: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            max_k: DEFAULT_MAX_K,
            floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_linear(index: usize) -> Self {
        if index.count_ones().is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `+1` for even cells, `-1` for odd cells.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Bit of the linear index that holds variable `i` (1-based).
#[inline]
pub(crate) fn var_bit(k: usize, i: usize) -> usize {
    1 << (k - i)
}

fn check_var(k: usize, i: usize) -> Result<()> {
    if i == 0 || i > k {
        return Err(Error::VariableOutOfRange { index: i, k });
    }
    Ok(())
}

/// Inserts bit `value` at position `pos` of `rest`, shifting the higher bits up.
#[inline]
pub(crate) fn insert_bit(rest: usize, pos: usize, value: usize) -> usize {
    let low = rest & ((1 << pos) - 1);
    let high = rest >> pos;
    (high << (pos + 1)) | (value << pos) | low
}

/// A cell `t = (j_1, ..., j_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CellIndex(Vec<u8>);

impl CellIndex {
    pub fn new(indices: Vec<u8>) -> Result<Self> {
        if let Some(bad) = indices.iter().find(|&&j| j != 1 && j != 2) {
            return Err(Error::InvalidCell(format!(
                "component {bad} is not 1 or 2 in {indices:?}"
            )));
        }
        Ok(Self(indices))
    }

    /// The all-ones cell `(1, ..., 1)`.
    pub fn ones(k: usize) -> Self {
        Self(vec![1; k])
    }

    pub fn from_linear(k: usize, index: usize) -> Self {
        Self(
            (1..=k)
                .map(|i| if index & var_bit(k, i) != 0 { 2 } else { 1 })
                .collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[u8] {
        &self.0
    }

    pub fn linear(&self) -> usize {
        self.0
            .iter()
            .fold(0, |acc, &j| (acc << 1) | usize::from(j - 1))
    }

    pub fn parity(&self) -> Parity {
        let twos = self.0.iter().filter(|&&j| j == 2).count();
        if twos % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (n, j) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, ")")
    }
}

pub fn parity(t: &CellIndex) -> Parity {
    t.parity()
}

/// A 0-1 vector selecting a subset of the variables.
///
/// Stored as an integer with the same bit layout as cell indices: bit `k - i`
/// is set iff variable `i` is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarginMask {
    k: usize,
    bits: usize,
}

impl MarginMask {
    pub fn new(bits: &[u8]) -> Result<Self> {
        let mut value = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::InvalidMask(format!("component {b} is not 0 or 1")));
            }
            value = (value << 1) | usize::from(b);
        }
        Ok(Self {
            k: bits.len(),
            bits: value,
        })
    }

    pub fn from_linear(k: usize, bits: usize) -> Self {
        debug_assert!(bits < 1 << k);
        Self { k, bits }
    }

    pub fn full(k: usize) -> Self {
        Self {
            k,
            bits: (1 << k) - 1,
        }
    }

    pub fn empty(k: usize) -> Self {
        Self { k, bits: 0 }
    }

    /// Parses a bitstring such as `"011"` (variable 1 first).
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidMask(format!("bad character {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(&bits)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn linear(&self) -> usize {
        self.bits
    }

    /// `e'm`, the number of selected variables.
    pub fn dim(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= 1 && i <= self.k && self.bits & var_bit(self.k, i) != 0
    }

    pub fn bits(&self) -> Vec<u8> {
        (1..=self.k).map(|i| u8::from(self.contains(i))).collect()
    }

    /// Every mask of dimension `k`, ordered by nondecreasing dimension and
    /// lexicographically (as bitstrings) within a dimension.
    pub fn hierarchical(k: usize) -> Vec<MarginMask> {
        let mut masks: Vec<_> = (0..1usize << k).map(|b| Self::from_linear(k, b)).collect();
        masks.sort_by_key(|m| (m.dim(), m.bits));
        masks
    }
}

impl fmt::Display for MarginMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Strictly positive entries over the `2^k` cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryTable {
    k: usize,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTable {
    k: usize,
    entries: Vec<f64>,
}

impl<'de> Deserialize<'de> for BinaryTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTable::deserialize(d)?;
        BinaryTable::new(raw.k, raw.entries).map_err(serde::de::Error::custom)
    }
}

impl BinaryTable {
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self> {
        Self::with_config(k, entries, &TableConfig::default())
    }

    pub fn with_config(k: usize, entries: Vec<f64>, config: &TableConfig) -> Result<Self> {
        if k > config.max_k {
            return Err(Error::DimensionTooLarge {
                k,
                max: config.max_k,
            });
        }
        let expected = 1usize << k;
        if entries.len() != expected {
            return Err(Error::EntryCount {
                k,
                expected,
                got: entries.len(),
            });
        }
        for (index, &value) in entries.iter().enumerate() {
            // NaN fails the comparison as well.
            if value <= config.floor || !value.is_finite() {
                return Err(Error::NonPositiveEntry {
                    index,
                    value,
                    floor: config.floor,
                });
            }
        }
        Ok(Self { k, entries })
    }

    /// Infers `k` from the entry count.
    pub fn from_entries(entries: Vec<f64>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "entry count {n} is not a power of two"
            )));
        }
        Self::new(n.trailing_zeros() as usize, entries)
    }

    pub fn constant(k: usize, value: f64) -> Result<Self> {
        Self::new(k, vec![value; 1 << k])
    }

    pub fn from_fn(k: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new(k, (0..1usize << k).map(f).collect())
    }

    /// Skips validation; callers guarantee positivity and length.
    pub(crate) fn from_parts_unchecked(k: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), 1 << k);
        Self { k, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn get(&self, t: &CellIndex) -> Result<f64> {
        if t.k() != self.k {
            return Err(Error::DimensionMismatch {
                left: t.k(),
                right: self.k,
            });
        }
        Ok(self.entries[t.linear()])
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn normalized(&self) -> Self {
        let total = self.total();
        Self::from_parts_unchecked(self.k, self.entries.iter().map(|p| p / total).collect())
    }

    /// Entrywise sum of two tables of the same dimension.
    pub fn add(&self, other: &BinaryTable) -> Result<Self> {
        if self.k != other.k {
            return Err(Error::DimensionMismatch {
                left: self.k,
                right: other.k,
            });
        }
        Ok(Self::from_parts_unchecked(
            self.k,
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    /// Returns a copy with the entry at `index` replaced.
    pub fn with_entry(&self, index: usize, value: f64) -> Result<Self> {
        let mut entries = self.entries.clone();
        entries[index] = value;
        Self::new(self.k, entries)
    }
}

/// Exchanges the two categories of variable `i`.
pub fn swap_category(table: &BinaryTable, i: usize) -> Result<BinaryTable> {
    check_var(table.k, i)?;
    let bit = var_bit(table.k, i);
    let entries = (0..table.len()).map(|t| table.entries[t ^ bit]).collect();
    Ok(BinaryTable::from_parts_unchecked(table.k, entries))
}

/// The `(k-1)`-dimensional part of the table where variable `i` equals `j`.
pub fn slice(table: &BinaryTable, i: usize, j: u8) -> Result<BinaryTable> {
    check_var(table.k, i)?;
    if j != 1 && j != 2 {
        return Err(Error::InvalidArgument(format!("category {j} is not 1 or 2")));
    }
    Ok(BinaryTable::from_parts_unchecked(
        table.k - 1,
        slice_values(&table.entries, table.k, i, j),
    ))
}

pub(crate) fn slice_values(entries: &[f64], k: usize, i: usize, j: u8) -> Vec<f64> {
    let pos = k - i;
    let value = usize::from(j - 1);
    (0..entries.len() / 2)
        .map(|r| entries[insert_bit(r, pos, value)])
        .collect()
}

/// Marginalizes over variable `i`.
pub fn collapse(table: &BinaryTable, i: usize) -> Result<BinaryTable> {
    let first = slice(table, i, 1)?;
    let second = slice(table, i, 2)?;
    first.add(&second)
}

/// The marginal table of the variables selected by `m`.
pub fn marginal(table: &BinaryTable, m: &MarginMask) -> Result<BinaryTable> {
    if m.k() != table.k {
        return Err(Error::DimensionMismatch {
            left: m.k(),
            right: table.k,
        });
    }
    Ok(BinaryTable::from_parts_unchecked(
        m.dim(),
        marginal_values(&table.entries, m.linear()),
    ))
}

/// Sums `entries` into the cells of the margin selected by `mask` bits.
pub(crate) fn marginal_values(entries: &[f64], mask: usize) -> Vec<f64> {
    let dim = mask.count_ones();
    let mut out = vec![0.0; 1 << dim];
    for (t, &p) in entries.iter().enumerate() {
        out[compress_bits(t, mask)] += p;
    }
    out
}

/// Gathers the bits of `value` selected by `mask` into the low bits,
/// preserving their order.
#[inline]
pub(crate) fn compress_bits(value: usize, mask: usize) -> usize {
    let mut out = 0;
    let mut out_bit = 1;
    let mut m = mask;
    while m != 0 {
        let low = m & m.wrapping_neg();
        if value & low != 0 {
            out |= out_bit;
        }
        out_bit <<= 1;
        m &= m - 1;
    }
    out
}

/// Multiplies the pair of entries `(.., j_i = 1, ..)` and `(.., j_i = 2, ..)`
/// at the given cell of the remaining variables by `c`.
pub fn rescale_conditional_pair(
    table: &BinaryTable,
    i: usize,
    suffix: &CellIndex,
    c: f64,
) -> Result<BinaryTable> {
    check_var(table.k, i)?;
    if c <= 0.0 || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rescale factor must be positive and finite, got {c}"
        )));
    }
    if suffix.k() + 1 != table.k {
        return Err(Error::DimensionMismatch {
            left: suffix.k() + 1,
            right: table.k,
        });
    }
    let pos = table.k - i;
    let rest = suffix.linear();
    let mut entries = table.entries.clone();
    for value in 0..2 {
        entries[insert_bit(rest, pos, value)] *= c;
    }
    BinaryTable::new(table.k, entries)
}

/// Whether `p` and `q` share the conditional distribution of variable `i`
/// given all other variables, within relative tolerance `tol`.
pub fn conditional_equal(p: &BinaryTable, q: &BinaryTable, i: usize, tol: f64) -> bool {
    if p.k != q.k || check_var(p.k, i).is_err() {
        return false;
    }
    let pos = p.k - i;
    (0..p.len() / 2).all(|rest| {
        let share = |t: &BinaryTable| {
            let a = t.entries[insert_bit(rest, pos, 0)];
            let b = t.entries[insert_bit(rest, pos, 1)];
            a / (a + b)
        };
        let (a, b) = (share(p), share(q));
        (a - b).abs() <= tol * a.abs().max(b.abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(k: usize, e: &[f64]) -> BinaryTable {
        BinaryTable::new(k, e.to_vec()).unwrap()
    }

    fn cell(v: &[u8]) -> CellIndex {
        CellIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity(&cell(&[1, 1, 1])), Parity::Even);
        assert_eq!(parity(&cell(&[1, 2, 1])), Parity::Odd);
        assert_eq!(parity(&cell(&[2, 2, 1])), Parity::Even);
        for k in 0..6 {
            for idx in 0..1usize << k {
                let c = CellIndex::from_linear(k, idx);
                assert_eq!(c.linear(), idx);
                assert_eq!(c.parity(), Parity::of_linear(idx));
            }
        }
    }

    #[test]
    fn half_the_cells_are_even() {
        for k in 1..10 {
            let even = (0..1usize << k)
                .filter(|&i| Parity::of_linear(i) == Parity::Even)
                .count();
            assert_eq!(even, 1 << (k - 1));
        }
    }

    #[test]
    fn cell_rejects_bad_component() {
        assert!(CellIndex::new(vec![1, 3]).is_err());
        assert!(CellIndex::new(vec![0]).is_err());
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(
            BinaryTable::new(2, vec![1.0, 2.0, 3.0]),
            Err(Error::EntryCount { .. })
        ));
        assert!(matches!(
            BinaryTable::new(1, vec![1.0, 0.0]),
            Err(Error::NonPositiveEntry { index: 1, .. })
        ));
        assert!(BinaryTable::new(1, vec![1.0, f64::NAN]).is_err());
        let config = TableConfig { max_k: 3, floor: 0.5 };
        assert!(matches!(
            BinaryTable::with_config(4, vec![1.0; 16], &config),
            Err(Error::DimensionTooLarge { k: 4, max: 3 })
        ));
        assert!(BinaryTable::with_config(1, vec![0.5, 1.0], &config).is_err());
        assert!(BinaryTable::with_config(1, vec![0.6, 1.0], &config).is_ok());
    }

    #[test]
    fn swap_examples() {
        assert_eq!(swap_category(&t(1, &[2.0, 7.0]), 1).unwrap().entries(), &[7.0, 2.0]);
        let x = t(2, &[2.0, 3.0, 4.0, 5.0]);
        let s = swap_category(&x, 2).unwrap();
        assert_eq!(s.entries(), &[3.0, 2.0, 5.0, 4.0]);
        assert_eq!(swap_category(&s, 2).unwrap(), x);
        assert!(matches!(
            swap_category(&x, 3),
            Err(Error::VariableOutOfRange { index: 3, k: 2 })
        ));
        assert!(swap_category(&x, 0).is_err());
    }

    #[test]
    fn swap_exchanges_parity_classes() {
        let k = 4;
        for i in 1..=k {
            for idx in 0..1usize << k {
                let swapped = idx ^ var_bit(k, i);
                assert_ne!(Parity::of_linear(idx), Parity::of_linear(swapped));
            }
        }
    }

    #[test]
    fn slice_examples() {
        let x = t(2, &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(slice(&x, 1, 2).unwrap().entries(), &[4.0, 5.0]);
        assert_eq!(slice(&x, 2, 1).unwrap().entries(), &[2.0, 4.0]);
        let mut e = vec![0.098; 8];
        e[0] = 0.3140;
        let ex3 = t(3, &e);
        assert_eq!(slice(&ex3, 1, 1).unwrap().entries(), &[0.3140, 0.098, 0.098, 0.098]);
        assert!(slice(&x, 3, 1).is_err());
        assert!(slice(&x, 1, 3).is_err());
    }

    #[test]
    fn slices_commute() {
        let x = BinaryTable::from_fn(4, |i| 1.0 + i as f64).unwrap();
        // Slicing variable 3 then variable 1 equals variable 1 then variable 2
        // (variable 3 becomes variable 2 after the first slice).
        for (a, b) in [(1u8, 1u8), (1, 2), (2, 1), (2, 2)] {
            let first = slice(&slice(&x, 3, a).unwrap(), 1, b).unwrap();
            let second = slice(&slice(&x, 1, b).unwrap(), 2, a).unwrap();
            assert_eq!(first, second);
        }
    }

    #[test]
    fn collapse_example_from_layers() {
        // Layers of V_3: [[6,5],[3,3]] and [[5,7],[1,7]].
        let x = BinaryTable::from_fn(3, |idx| {
            let layer1 = [6.0, 5.0, 3.0, 3.0];
            let layer2 = [5.0, 7.0, 1.0, 7.0];
            if idx & 1 == 0 {
                layer1[idx >> 1]
            } else {
                layer2[idx >> 1]
            }
        })
        .unwrap();
        assert_eq!(collapse(&x, 3).unwrap().entries(), &[11.0, 12.0, 4.0, 10.0]);
        assert_eq!(collapse(&t(1, &[1.5, 2.0]), 1).unwrap().entries(), &[3.5]);
        let mut all = x.clone();
        for i in (1..=3).rev() {
            all = collapse(&all, i).unwrap();
        }
        assert_eq!(all.k(), 0);
        assert_eq!(all.entries(), &[x.total()]);
    }

    #[test]
    fn collapse_is_sum_of_slices() {
        let x = BinaryTable::from_fn(5, |i| ((i * 7919) % 23) as f64 + 0.25).unwrap();
        for i in 1..=5 {
            let c = collapse(&x, i).unwrap();
            let a = slice(&x, i, 1).unwrap();
            let b = slice(&x, i, 2).unwrap();
            for n in 0..c.len() {
                assert_eq!(c.entries()[n], a.entries()[n] + b.entries()[n]);
            }
        }
    }

    #[test]
    fn marginal_examples() {
        let x = t(2, &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(marginal(&x, &MarginMask::full(2)).unwrap(), x);
        assert_eq!(
            marginal(&x, &MarginMask::new(&[1, 0]).unwrap()).unwrap().entries(),
            &[5.0, 9.0]
        );
        assert_eq!(
            marginal(&x, &MarginMask::new(&[0, 1]).unwrap()).unwrap().entries(),
            &[6.0, 8.0]
        );
        let m0 = marginal(&x, &MarginMask::empty(2)).unwrap();
        assert_eq!(m0.k(), 0);
        assert_eq!(m0.entries(), &[14.0]);
    }

    #[test]
    fn marginal_matches_repeated_collapse_in_any_order() {
        let x = BinaryTable::from_fn(4, |i| (i * i % 11) as f64 + 1.0).unwrap();
        let m = MarginMask::new(&[0, 1, 0, 1]).unwrap();
        let direct = marginal(&x, &m).unwrap();
        let a = collapse(&collapse(&x, 3).unwrap(), 1).unwrap();
        let b = collapse(&collapse(&x, 1).unwrap(), 2).unwrap();
        assert_eq!(direct, a);
        assert_eq!(direct, b);
    }

    #[test]
    fn rescale_examples() {
        let x = t(2, &[2.0, 3.0, 4.0, 5.0]);
        let same = rescale_conditional_pair(&x, 1, &cell(&[1]), 1.0).unwrap();
        assert_eq!(same, x);
        let y = rescale_conditional_pair(&x, 1, &cell(&[1]), 0.25).unwrap();
        assert_eq!(y.entries(), &[0.5, 3.0, 1.0, 5.0]);
        assert!(conditional_equal(&x, &y, 1, DEFAULT_CONDITIONAL_TOL));
        assert!(rescale_conditional_pair(&x, 1, &cell(&[1]), 0.0).is_err());
        assert!(rescale_conditional_pair(&x, 1, &cell(&[1]), -2.0).is_err());
        assert!(rescale_conditional_pair(&x, 1, &cell(&[1, 1]), 2.0).is_err());
    }

    #[test]
    fn conditional_equal_examples() {
        let x = t(2, &[2.0, 3.0, 4.0, 5.0]);
        let y = t(2, &[0.6, 0.6, 1.2, 1.0]);
        assert!(conditional_equal(&x, &x, 1, DEFAULT_CONDITIONAL_TOL));
        assert!(conditional_equal(&x, &y, 1, DEFAULT_CONDITIONAL_TOL));
        assert!(!conditional_equal(&x, &y, 2, DEFAULT_CONDITIONAL_TOL));
        let u = BinaryTable::constant(2, 1.0).unwrap();
        assert!(!conditional_equal(&x, &u, 1, DEFAULT_CONDITIONAL_TOL));
    }

    #[test]
    fn mask_parse_and_order() {
        let m = MarginMask::parse("011").unwrap();
        assert_eq!(m.dim(), 2);
        assert!(!m.contains(1) && m.contains(2) && m.contains(3));
        assert_eq!(m.to_string(), "011");
        assert!(MarginMask::parse("012").is_err());
        let order: Vec<String> = MarginMask::hierarchical(3)
            .iter()
            .map(|m| m.to_string())
            .collect();
        assert_eq!(
            order,
            ["000", "001", "010", "100", "011", "101", "110", "111"]
        );
    }

    #[test]
    fn compress_bits_gathers_in_order() {
        assert_eq!(compress_bits(0b1011, 0b1010), 0b11);
        assert_eq!(compress_bits(0b0001, 0b1010), 0);
        assert_eq!(compress_bits(0b1111, 0), 0);
    }
}
