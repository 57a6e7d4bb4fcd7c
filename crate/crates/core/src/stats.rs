//! Small summary-statistics helpers shared by inference and scenario reporting.

use serde::{Deserialize, Serialize};

/// Linear-interpolation quantile of an already sorted slice (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Reads `null`, which JSON writers emit for non-finite floats, as NaN.
pub fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Median with an equal-tailed 95 % interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl Interval {
    pub fn from_samples(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Interval {
            median: quantile_sorted(&sorted, 0.5),
            lo95: quantile_sorted(&sorted, 0.025),
            hi95: quantile_sorted(&sorted, 0.975),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo95 <= x && x <= self.hi95
    }
}

/// Effective sample size of a single chain using Geyer's initial positive sequence.
pub fn effective_sample_size(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(chain);
    let var0 = chain.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if var0 <= 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| -> f64 {
        (0..n - lag)
            .map(|i| (chain[i] - m) * (chain[i + lag] - m))
            .sum::<f64>()
            / (n as f64 * var0)
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    let tau = (1.0 + 2.0 * sum).max(1.0);
    n as f64 / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert!((quantile(&v, 0.1) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn single_sample_collapses() {
        let i = Interval::from_samples(&[7.5]);
        assert_eq!((i.median, i.lo95, i.hi95), (7.5, 7.5, 7.5));
    }

    #[test]
    fn iid_chain_has_full_ess() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let chain: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let ess = effective_sample_size(&chain);
        assert!(ess > 3000.0, "{ess}");
    }

    proptest! {
        // Adding dispersed samples outside the current range never narrows the interval.
        #[test]
        fn widening_never_narrows(
            mut v in prop::collection::vec(-100.0f64..100.0, 1..200),
            k in 1usize..20,
        ) {
            let before = Interval::from_samples(&v);
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
            for j in 0..k {
                v.push(lo - j as f64);
                v.push(hi + j as f64);
            }
            let after = Interval::from_samples(&v);
            prop_assert!(after.lo95 <= before.lo95 + 1e-12);
            prop_assert!(after.hi95 >= before.hi95 - 1e-12);
        }
    }
}
