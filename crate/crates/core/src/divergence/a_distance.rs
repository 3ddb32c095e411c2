//! Proxy A-distance between two sample sets.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linear::LogisticRegression;
use crate::data::{upsample, FeatureMatrix};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// `2 (1 - 2 eps)` with `eps` clamped to `[0, 0.5]`.
pub fn proxy_a_distance(error: f64) -> f64 {
    2.0 * (1.0 - 2.0 * error.clamp(0.0, 0.5))
}

/// Settings for the domain-discrimination estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ADistance {
    /// Independent upsample/split/train repetitions averaged together.
    pub rounds: usize,
    /// L2 penalty of the logistic discriminator.
    pub regularization: f64,
    pub max_iter: usize,
}

impl Default for ADistance {
    fn default() -> Self {
        Self {
            rounds: 5,
            regularization: 1.0,
            max_iter: 100,
        }
    }
}

impl ADistance {
    /// Averaged distance over `self.rounds` repetitions, in `[0, 2]`.
    pub fn compute(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, seed: u64) -> Result<f64> {
        if self.rounds == 0 {
            return Err(Error::config("rounds", "must be at least 1"));
        }
        let mut total = 0.0;
        for r in 0..self.rounds {
            total += self.single_round(a, b, derive_seed(seed, r as u64))?;
        }
        Ok(total / self.rounds as f64)
    }

    /// One repetition: upsample the smaller set to the larger's size, split
    /// each domain 50/50 at random, train on one half and measure the
    /// held-out error on the other.
    pub fn single_round(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, seed: u64) -> Result<f64> {
        if a.nrows() < 2 || b.nrows() < 2 {
            return Err(Error::data("A-distance needs at least two samples per set"));
        }
        if a.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch {
                context: "A-distance operands",
                expected: a.ncols(),
                actual: b.ncols(),
            });
        }
        let size = a.nrows().max(b.nrows());
        let grow = |x: &DMatrix<f64>, stream: u64| -> Result<DMatrix<f64>> {
            if x.nrows() == size {
                return Ok(x.clone());
            }
            let fm = FeatureMatrix::unlabeled(x.clone())?;
            Ok(upsample(&fm, size, derive_seed(seed, stream))?.into_parts().0)
        };
        let a = grow(a, 101)?;
        let b = grow(b, 102)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ia: Vec<usize> = (0..size).collect();
        let mut ib: Vec<usize> = (0..size).collect();
        ia.shuffle(&mut rng);
        ib.shuffle(&mut rng);
        let half = size / 2;
        let (train_a, test_a) = ia.split_at(half);
        let (train_b, test_b) = ib.split_at(half);

        let dim = a.ncols();
        let stack = |ra: &[usize], rb: &[usize]| {
            let mut x = DMatrix::zeros(ra.len() + rb.len(), dim);
            for (k, &i) in ra.iter().enumerate() {
                x.set_row(k, &a.row(i));
            }
            for (k, &i) in rb.iter().enumerate() {
                x.set_row(ra.len() + k, &b.row(i));
            }
            let y: Vec<bool> = (0..ra.len() + rb.len()).map(|k| k >= ra.len()).collect();
            (x, y)
        };
        let (x_train, y_train) = stack(train_a, train_b);
        let (x_test, y_test) = stack(test_a, test_b);
        let clf = LogisticRegression::fit(&x_train, &y_train, self.regularization, self.max_iter)?;
        let wrong = clf
            .predict(&x_test)
            .iter()
            .zip(&y_test)
            .filter(|(p, y)| p != y)
            .count();
        Ok(proxy_a_distance(wrong as f64 / y_test.len() as f64))
    }
}

/// [`ADistance::compute`] with default settings.
pub fn a_distance(a: &DMatrix<f64>, b: &DMatrix<f64>, seed: u64) -> Result<f64> {
    ADistance::default().compute(a, b, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, j| {
            let z: f64 = StandardNormal.sample(rng);
            z + if j == 0 { shift } else { 0.0 }
        })
    }

    #[test]
    fn formula_endpoints() {
        assert_eq!(proxy_a_distance(0.5), 0.0);
        assert_eq!(proxy_a_distance(0.0), 2.0);
        assert_eq!(proxy_a_distance(0.7), 0.0);
    }

    #[test]
    fn shuffled_copies_are_close() {
        // Monte Carlo oracle: indistinguishable sets give eps near 0.5.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut total = 0.0;
        for seed in 0..10 {
            let a = gaussian(&mut rng, 120, 5, 0.0);
            let mut idx: Vec<usize> = (0..120).collect();
            idx.shuffle(&mut rng);
            let b = a.select_rows(&idx);
            total += a_distance(&a, &b, seed).unwrap();
        }
        assert!(total / 10.0 < 0.25, "{}", total / 10.0);
    }

    #[test]
    fn separable_clouds_near_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = gaussian(&mut rng, 60, 3, 0.0) * 0.1;
        let b = gaussian(&mut rng, 45, 3, 0.0) * 0.1 + DMatrix::from_element(45, 3, 10.0);
        assert!(a_distance(&a, &b, rng.random()).unwrap() > 1.9);
    }

    #[test]
    fn too_few_samples() {
        let a = DMatrix::zeros(1, 2);
        let b = DMatrix::zeros(4, 2);
        assert!(a_distance(&a, &b, 0).is_err());
    }
}
