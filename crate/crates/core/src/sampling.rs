//! Probability of deciding on a positive DI under multinomial sampling.
//!
//! With `x` of `N` observations falling into even-parity cells the sample DI
//! is `(2x - N) / N`, positive iff `x > N / 2`, and `x ~ Binomial(N, p)` where
//! `p` is the population mass of the even cells. A tie (`x = N / 2`) is not a
//! positive decision.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::{compensated_sum, parity_sums, AssociationKind};
use crate::error::{Error, Result};
use crate::random::trial_rng;
use crate::table::BinaryTable;

/// Population mass of the even-parity cells.
pub fn even_parity_mass(table: &BinaryTable) -> f64 {
    let (even, odd) = parity_sums(table.entries());
    even / (even + odd)
}

fn check_study(n: u64, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "even-cell mass must lie in (0, 1), got {p}"
        )));
    }
    Ok(())
}

/// `sum_{x = floor(N/2) + 1}^{N} C(N, x) p^x (1 - p)^(N - x)`, with every
/// term formed in log space.
pub fn prob_di_positive_exact(n: u64, p: f64) -> Result<f64> {
    check_study(n, p)?;
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms = (n / 2 + 1..=n).map(|x| (ln_binomial(n, x) + x as f64 * lp + (n - x) as f64 * lq).exp());
    Ok(compensated_sum(terms).min(1.0))
}

fn ln_binomial(n: u64, x: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(x as f64 + 1.0) - libm::lgamma((n - x) as f64 + 1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `Phi(sqrt(N) (p - 0.5) / sqrt(p (1 - p)))`.
pub fn prob_di_positive_normal(n: u64, p: f64) -> Result<f64> {
    check_study(n, p)?;
    Ok(normal_cdf(normal_argument(n, p)))
}

pub fn normal_argument(n: u64, p: f64) -> f64 {
    (n as f64).sqrt() * (p - 0.5) / (p * (1.0 - p)).sqrt()
}

/// Draws a multinomial sample by conditioning each cell's count on the
/// counts drawn so far.
pub fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<f64> {
    let mut counts = vec![0.0; probs.len()];
    let mut remaining = n;
    let mut mass = 1.0f64;
    let last = probs.len() - 1;
    for (t, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if t == last {
            counts[t] = remaining as f64;
            break;
        }
        let share = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let x = Binomial::new(remaining, share)
            .expect("share lies in [0, 1]")
            .sample(rng);
        counts[t] = x as f64;
        remaining -= x;
        mass -= p;
    }
    counts
}

/// Sign of `kind` on a sampled table that may contain zero counts.
///
/// LOR follows the continuity convention: zeros only among odd cells give
/// `+1`, zeros only among even cells give `-1`, zeros in both classes are
/// undetermined (`None`). Evaluation failures are undetermined as well.
pub fn sample_sign(kind: &AssociationKind, counts: &[f64]) -> Option<i8> {
    if matches!(kind, AssociationKind::Lor) {
        let mut even_zero = false;
        let mut odd_zero = false;
        for (t, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                if t.count_ones() % 2 == 0 {
                    even_zero = true;
                } else {
                    odd_zero = true;
                }
            }
        }
        match (even_zero, odd_zero) {
            (true, true) => return None,
            (true, false) => return Some(-1),
            (false, true) => return Some(1),
            (false, false) => {}
        }
    }
    kind.evaluate_values(counts).ok().map(|e| e.sign())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignFrequencies {
    pub replications: u64,
    pub positive: f64,
    pub zero: f64,
    pub negative: f64,
    pub undetermined: f64,
}

/// Empirical frequency of each decision over `replications` multinomial
/// samples of size `n` from the normalized `true_table`.
pub fn simulate_decisions(
    true_table: &BinaryTable,
    n: u64,
    kind: &AssociationKind,
    replications: u64,
    seed: u64,
) -> Result<SignFrequencies> {
    if n == 0 || replications == 0 {
        return Err(Error::InvalidArgument(
            "sample size and replications must be positive".into(),
        ));
    }
    let probs = true_table.normalized().into_entries();
    let counts = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let sample = sample_multinomial(&mut trial_rng(seed, rep), n, &probs);
            let mut tally = [0u64; 4];
            match sample_sign(kind, &sample) {
                Some(1) => tally[0] += 1,
                Some(0) => tally[1] += 1,
                Some(_) => tally[2] += 1,
                None => tally[3] += 1,
            }
            tally
        })
        .reduce(|| [0u64; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    let r = replications as f64;
    Ok(SignFrequencies {
        replications,
        positive: counts[0] as f64 / r,
        zero: counts[1] as f64 / r,
        negative: counts[2] as f64 / r,
        undetermined: counts[3] as f64 / r,
    })
}

/// A decision-probability study for the sign of DI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionStudy {
    pub n: u64,
    pub p_even: f64,
    #[serde(default)]
    pub true_table: Option<BinaryTable>,
    #[serde(default)]
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub n: u64,
    pub p: f64,
    pub exact: f64,
    pub normal: f64,
    pub empirical: Option<f64>,
}

impl DecisionStudy {
    pub fn from_table(table: BinaryTable, n: u64, replications: u64, seed: u64) -> Self {
        Self {
            n,
            p_even: even_parity_mass(&table),
            true_table: Some(table),
            replications,
            seed,
        }
    }

    /// Exact and normal probabilities, plus the Monte Carlo DI frequency
    /// when `replications > 0`. Without a table, sampling uses the
    /// one-variable table `[p, 1 - p]`.
    pub fn run(&self) -> Result<DecisionRow> {
        let exact = prob_di_positive_exact(self.n, self.p_even)?;
        let normal = prob_di_positive_normal(self.n, self.p_even)?;
        let empirical = if self.replications > 0 {
            let table = match &self.true_table {
                Some(t) => t.clone(),
                None => BinaryTable::new(1, vec![self.p_even, 1.0 - self.p_even])?,
            };
            let freq = simulate_decisions(&table, self.n, &AssociationKind::Di, self.replications, self.seed)?;
            Some(freq.positive)
        } else {
            None
        };
        Ok(DecisionRow {
            n: self.n,
            p: self.p_even,
            exact,
            normal,
            empirical,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Binomial upper tail by the pmf recurrence started at the mode, an
    /// independent route from the log-binomial terms.
    fn tail_by_recurrence(n: u64, p: f64) -> f64 {
        // Unnormalized pmf relative to the mode, walking both ways.
        let mode = ((n + 1) as f64 * p).floor().min(n as f64) as usize;
        let n_us = n as usize;
        let r = p / (1.0 - p);
        let mut w = vec![0.0; n_us + 1];
        w[mode] = 1.0;
        for y in mode..n_us {
            w[y + 1] = w[y] * (n_us - y) as f64 / (y + 1) as f64 * r;
        }
        for y in (1..=mode).rev() {
            w[y - 1] = w[y] * y as f64 / (n_us - y + 1) as f64 / r;
        }
        let total: f64 = w.iter().sum();
        w[n_us / 2 + 1..].iter().sum::<f64>() / total
    }

    #[test]
    fn even_mass_examples() {
        let mut e = vec![0.098; 8];
        e[0] = 0.3140;
        let x = BinaryTable::new(3, e).unwrap();
        assert!((even_parity_mass(&x) - 0.608).abs() < 1e-12);
        assert_eq!(even_parity_mass(&BinaryTable::constant(2, 3.0).unwrap()), 0.5);
        // Scale even cells by 0.525 / 4 and odd cells by 0.475 / 4.
        let y = BinaryTable::from_fn(3, |t| if t.count_ones() % 2 == 0 { 0.525 / 4.0 } else { 0.475 / 4.0 }).unwrap();
        assert!((even_parity_mass(&y) - 0.525).abs() < 1e-12);
    }

    #[test]
    fn exact_examples() {
        assert!((prob_di_positive_exact(1, 0.7).unwrap() - 0.7).abs() < 1e-15);
        assert!((prob_di_positive_exact(2, 0.5).unwrap() - 0.25).abs() < 1e-15);
        let v = prob_di_positive_exact(1000, 0.525).unwrap();
        assert!((v - tail_by_recurrence(1000, 0.525)).abs() < 1e-12);
        assert!((v - 0.9396).abs() < 1e-4, "{v}");
        assert!(prob_di_positive_exact(0, 0.5).is_err());
        assert!(prob_di_positive_exact(10, 1.0).is_err());
    }

    #[test]
    fn normal_examples() {
        for n in [1, 10, 1000] {
            assert_eq!(prob_di_positive_normal(n, 0.5).unwrap(), 0.5);
        }
        let v = prob_di_positive_normal(1000, 0.525).unwrap();
        assert!((v - 0.9433).abs() <= 1e-4, "{v}");
        let z1 = normal_argument(1000, 0.525);
        let z4 = normal_argument(4000, 0.525);
        assert!((z4 - 2.0 * z1).abs() < 1e-12);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        // Reference values from 30-digit arithmetic.
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((normal_cdf(-2.0) - 0.022_750_131_948_179_21).abs() < 1e-12);
        assert!((normal_cdf(3.0) - 0.998_650_101_968_369_9).abs() < 1e-12);
    }

    #[test]
    fn multinomial_sums_to_n() {
        let mut rng = trial_rng(3, 0);
        let probs = [0.1, 0.2, 0.3, 0.4];
        for _ in 0..100 {
            let c = sample_multinomial(&mut rng, 57, &probs);
            assert_eq!(c.iter().sum::<f64>(), 57.0);
        }
    }

    #[test]
    fn lor_zero_convention() {
        let lor = AssociationKind::Lor;
        assert_eq!(sample_sign(&lor, &[3.0, 0.0, 2.0, 1.0]), Some(1));
        assert_eq!(sample_sign(&lor, &[0.0, 4.0, 2.0, 1.0]), Some(-1));
        assert_eq!(sample_sign(&lor, &[0.0, 0.0, 2.0, 1.0]), None);
        assert_eq!(sample_sign(&lor, &[2.0, 1.0, 1.0, 2.0]), Some(1));
        assert_eq!(sample_sign(&AssociationKind::Di, &[0.0, 0.0, 2.0, 1.0]), Some(-1));
    }

    #[test]
    fn simulation_is_deterministic_and_symmetric() {
        let u = BinaryTable::constant(2, 1.0).unwrap();
        let a = simulate_decisions(&u, 101, &AssociationKind::Di, 4000, 9).unwrap();
        let b = simulate_decisions(&u, 101, &AssociationKind::Di, 4000, 9).unwrap();
        assert_eq!(a, b);
        // N odd: no ties, so the two decisions split evenly.
        assert_eq!(a.zero, 0.0);
        assert!((a.positive - 0.5).abs() < 3.0 * (0.25f64 / 4000.0).sqrt());
    }

    #[test]
    fn study_without_table() {
        let row = DecisionStudy {
            n: 1000,
            p_even: 0.525,
            true_table: None,
            replications: 0,
            seed: 0,
        }
        .run()
        .unwrap();
        assert!(row.empirical.is_none());
        assert!((row.exact - 0.9396).abs() < 1e-4);
    }
}
