//! The adaptive factor `mu` balancing marginal against conditional alignment.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::a_distance::ADistance;
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// Result of one adaptive-factor estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub mu: f64,
    pub d_marginal: f64,
    /// One entry per class; zero for skipped classes.
    pub d_conditional: Vec<f64>,
    pub rounds: usize,
    /// Classes with fewer than two samples in either domain.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_classes: Vec<usize>,
}

/// `1 - dM / (dM + sum dc)`, clamped to `[0, 1]`; `0.5` when every
/// distance is zero.
pub fn mu_from_distances(d_marginal: f64, d_conditional: &[f64]) -> f64 {
    let total = d_marginal + d_conditional.iter().sum::<f64>();
    if total <= 0.0 {
        0.5
    } else {
        (1.0 - d_marginal / total).clamp(0.0, 1.0)
    }
}

/// Source of the adaptive factor inside the adaptation loop.
pub trait MuEstimator: Sync {
    fn estimate(
        &self,
        zs: &DMatrix<f64>,
        labels_s: &[usize],
        zt: &DMatrix<f64>,
        pseudo_t: &[usize],
        class_count: usize,
        seed: u64,
    ) -> Result<MuEstimate>;
}

/// Estimates `mu` from proxy A-distances: one over the whole domains and
/// one per class, with target classes taken from pseudo-labels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ADistanceEstimator {
    pub a_distance: ADistance,
}

impl MuEstimator for ADistanceEstimator {
    fn estimate(
        &self,
        zs: &DMatrix<f64>,
        labels_s: &[usize],
        zt: &DMatrix<f64>,
        pseudo_t: &[usize],
        class_count: usize,
        seed: u64,
    ) -> Result<MuEstimate> {
        if labels_s.len() != zs.nrows() {
            return Err(Error::DimensionMismatch {
                context: "source labels",
                expected: zs.nrows(),
                actual: labels_s.len(),
            });
        }
        if pseudo_t.len() != zt.nrows() {
            return Err(Error::DimensionMismatch {
                context: "target pseudo-labels",
                expected: zt.nrows(),
                actual: pseudo_t.len(),
            });
        }
        let d_marginal = self.a_distance.compute(zs, zt, derive_seed(seed, 0))?;

        let per_class: Vec<Result<Option<f64>>> = (0..class_count)
            .into_par_iter()
            .map(|c| {
                let is: Vec<usize> = (0..labels_s.len()).filter(|&i| labels_s[i] == c).collect();
                let it: Vec<usize> = (0..pseudo_t.len()).filter(|&i| pseudo_t[i] == c).collect();
                if is.len() < 2 || it.len() < 2 {
                    return Ok(None);
                }
                let d = self.a_distance.compute(
                    &zs.select_rows(&is),
                    &zt.select_rows(&it),
                    derive_seed(seed, c as u64 + 1),
                )?;
                Ok(Some(d))
            })
            .collect();

        let mut d_conditional = Vec::with_capacity(class_count);
        let mut skipped_classes = Vec::new();
        for (c, d) in per_class.into_iter().enumerate() {
            match d? {
                Some(v) => d_conditional.push(v),
                None => {
                    d_conditional.push(0.0);
                    skipped_classes.push(c);
                }
            }
        }
        Ok(MuEstimate {
            mu: mu_from_distances(d_marginal, &d_conditional),
            d_marginal,
            d_conditional,
            rounds: self.a_distance.rounds,
            skipped_classes,
        })
    }
}

/// [`ADistanceEstimator`] with default settings.
pub fn estimate_mu(
    zs: &DMatrix<f64>,
    labels_s: &[usize],
    zt: &DMatrix<f64>,
    pseudo_t: &[usize],
    class_count: usize,
    seed: u64,
) -> Result<MuEstimate> {
    ADistanceEstimator::default().estimate(zs, labels_s, zt, pseudo_t, class_count, seed)
}

/// How `mu` is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuStrategy {
    /// Re-estimate every iteration from A-distances.
    Estimate,
    /// Constant value in `[0, 1]`.
    Fixed { value: f64 },
    /// Run once per value in `{0.0, 0.1, ..., 1.0}` and average.
    GridAverage,
    /// Run once per uniformly drawn value and average.
    RandomAverage { draws: usize, seed: u64 },
}

impl MuStrategy {
    pub fn fixed(value: f64) -> Result<Self> {
        let s = MuStrategy::Fixed { value };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MuStrategy::Fixed { value } if !(0.0..=1.0).contains(&value) => {
                Err(Error::config("mu", format!("fixed value must lie in [0, 1], got {value}")))
            }
            MuStrategy::RandomAverage { draws: 0, .. } => {
                Err(Error::config("mu", "random averaging needs at least one draw"))
            }
            _ => Ok(()),
        }
    }

    /// Parses `estimate`, `grid`, `fixed:V` (or a bare number) and
    /// `random:T`; the random draws use `seed`.
    pub fn parse(value: &str, seed: u64) -> Result<Self> {
        let strategy = match value {
            "estimate" => MuStrategy::Estimate,
            "grid" => MuStrategy::GridAverage,
            _ => {
                if let Some(v) = value.strip_prefix("fixed:") {
                    let v = v.parse().map_err(|_| Error::config("mu", format!("bad fixed value {v:?}")))?;
                    MuStrategy::Fixed { value: v }
                } else if let Some(t) = value.strip_prefix("random:") {
                    let draws = t.parse().map_err(|_| Error::config("mu", format!("bad draw count {t:?}")))?;
                    MuStrategy::RandomAverage { draws, seed }
                } else if let Ok(v) = value.parse::<f64>() {
                    MuStrategy::Fixed { value: v }
                } else {
                    return Err(Error::config(
                        "mu",
                        format!("expected estimate, grid, fixed:V or random:T, got {value:?}"),
                    ));
                }
            }
        };
        strategy.validate()?;
        Ok(strategy)
    }

    /// The `mu` values an averaging strategy runs, or `None` for the
    /// single-run strategies.
    pub fn candidates(&self) -> Option<Vec<f64>> {
        match *self {
            MuStrategy::GridAverage => Some((0..=10).map(|i| i as f64 / 10.0).collect()),
            MuStrategy::RandomAverage { draws, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Some((0..draws).map(|_| rng.random::<f64>()).collect())
            }
            MuStrategy::Estimate | MuStrategy::Fixed { .. } => None,
        }
    }
}
