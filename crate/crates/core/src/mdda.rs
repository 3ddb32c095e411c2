//! The adaptation loop.
//!
//! 1. Map both domains to manifold features with the geodesic flow kernel.
//! 2. Label the target with a 1-nearest-neighbour classifier trained on the
//!    source; these pseudo-labels seed the first iteration only.
//! 3. Build the joint Gram matrix and the neighbour-graph Laplacian once.
//! 4. For `T` iterations: choose `mu`, assemble the MMD matrix from the
//!    current pseudo-labels, solve for the coefficients and relabel the
//!    target with the new classifier.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DomainPair, LabelEncoding};
use crate::divergence::{ADistance, ADistanceEstimator, MmdTerms, MuEstimate, MuEstimator, MuStrategy};
use crate::error::{Error, Result};
use crate::graph::{affinity, AffinityGraph};
use crate::kernel::{default_bandwidth, gram_symmetric, KernelSpec};
use crate::manifold::{gfk, pca_basis, project, GeodesicKernel};
use crate::seeds::derive_seed;
use crate::srm::{accuracy, argmax_rows, solve_with_regularizer, FittedModel, InputMap, LabelMatrix};

/// Kernel family with an optional explicit RBF bandwidth. Without one the
/// bandwidth is the summed feature variance of the joint manifold features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelChoice {
    Rbf {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bandwidth: Option<f64>,
    },
    Linear,
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice::Rbf { bandwidth: None }
    }
}

impl KernelChoice {
    pub fn parse(value: &str) -> Result<Self> {
        match value {
            "rbf" => Ok(KernelChoice::Rbf { bandwidth: None }),
            "linear" => Ok(KernelChoice::Linear),
            other => Err(Error::config("kernel", format!("expected rbf or linear, got {other:?}"))),
        }
    }

    pub fn resolve(&self, z: &DMatrix<f64>) -> Result<KernelSpec> {
        match *self {
            KernelChoice::Rbf { bandwidth: Some(bw) } => KernelSpec::rbf(bw),
            KernelChoice::Rbf { bandwidth: None } => KernelSpec::rbf(default_bandwidth(z)?),
            KernelChoice::Linear => Ok(KernelSpec::Linear),
        }
    }
}

fn default_iterations() -> usize {
    10
}
fn default_lambda() -> f64 {
    4.5
}
fn default_eta() -> f64 {
    0.1
}
fn default_rho() -> f64 {
    1.0
}
fn default_neighbors() -> usize {
    10
}
fn default_true() -> bool {
    true
}
fn default_rounds() -> usize {
    5
}

/// Hyperparameters. JSON field names match the struct; only `d` is
/// required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MddaConfig {
    /// Manifold subspace dimension.
    pub d: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Weight of the MMD alignment term.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Weight of the RKHS norm.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Weight of the Laplacian term.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Neighbour count of the affinity graph.
    #[serde(default = "default_neighbors")]
    pub p: usize,
    #[serde(default)]
    pub kernel: KernelChoice,
    #[serde(default = "default_mu")]
    pub mu: MuStrategy,
    #[serde(default)]
    pub seed: u64,
    /// Use geodesic-flow manifold features; raw features otherwise.
    #[serde(default = "default_true")]
    pub manifold: bool,
    /// Scale every sample to unit norm before anything else.
    #[serde(default = "default_true")]
    pub normalize_rows: bool,
    /// Divide `M` by its Frobenius norm before use. Unscaled entries are
    /// `O(1 / n^2)`, which leaves the alignment term negligible at the
    /// default `lambda`.
    #[serde(default = "default_true")]
    pub normalize_mmd: bool,
    /// A-distance repetitions per estimate.
    #[serde(default = "default_rounds")]
    pub a_distance_rounds: usize,
}

fn default_mu() -> MuStrategy {
    MuStrategy::Estimate
}

impl MddaConfig {
    /// Defaults for everything but the subspace dimension.
    pub fn new(d: usize) -> Self {
        Self {
            d,
            iterations: default_iterations(),
            lambda: default_lambda(),
            eta: default_eta(),
            rho: default_rho(),
            p: default_neighbors(),
            kernel: KernelChoice::default(),
            mu: default_mu(),
            seed: 0,
            manifold: true,
            normalize_rows: true,
            normalize_mmd: true,
            a_distance_rounds: default_rounds(),
        }
    }

    /// Parses a JSON config; unknown or ill-typed fields are named in the
    /// error.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: MddaConfig = serde_json::from_str(text).map_err(|e| {
            Error::config("config", e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        if self.d == 0 {
            return Err(Error::config("d", "must be at least 1"));
        }
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be non-negative, got {v}")))
            }
        };
        nonneg("lambda", self.lambda)?;
        nonneg("rho", self.rho)?;
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::config("eta", format!("must be positive, got {}", self.eta)));
        }
        if self.p == 0 {
            return Err(Error::config("p", "must be at least 1"));
        }
        if self.a_distance_rounds == 0 {
            return Err(Error::config("a_distance_rounds", "must be at least 1"));
        }
        if let KernelChoice::Rbf { bandwidth: Some(bw) } = self.kernel {
            KernelSpec::rbf(bw)?;
        }
        self.mu.validate()
    }

    fn estimator(&self) -> ADistanceEstimator {
        ADistanceEstimator {
            a_distance: ADistance {
                rounds: self.a_distance_rounds,
                ..ADistance::default()
            },
        }
    }
}

/// One pass of the loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iter: usize,
    pub mu: f64,
    /// Fraction of target pseudo-labels that changed in this iteration.
    pub pseudo_label_churn: f64,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_marginal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_conditional: Option<Vec<f64>>,
}

/// All iterations of one run of the loop.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    /// The fixed `mu` of this run, or `None` when it was estimated.
    pub fixed_mu: Option<f64>,
    pub iterations: Vec<IterationRecord>,
    /// Final target scores, one row per target sample.
    pub target_scores: DMatrix<f64>,
    pub target_labels: Vec<usize>,
}

impl RunReport {
    pub fn final_record(&self) -> &IterationRecord {
        self.iterations.last().expect("a run has at least one iteration")
    }
}

/// Runs performed by one fit: one for `estimate`/`fixed`, one per
/// candidate for the averaging strategies.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptationReport {
    pub runs: Vec<RunReport>,
}

impl AdaptationReport {
    /// Iterations of the first run.
    pub fn iterations(&self) -> &[IterationRecord] {
        &self.runs[0].iterations
    }

    /// Mean final-iteration accuracy across runs, when labels were known.
    pub fn final_accuracy(&self) -> Option<f64> {
        let accs: Option<Vec<f64>> = self.runs.iter().map(|r| r.final_record().accuracy).collect();
        accs.map(|a| a.iter().sum::<f64>() / a.len() as f64)
    }

    /// Mean final-iteration `mu` across runs.
    pub fn mu_final(&self) -> f64 {
        self.runs.iter().map(|r| r.final_record().mu).sum::<f64>() / self.runs.len() as f64
    }

    /// One JSON object per iteration, tagged with its run index and the
    /// run's fixed `mu`.
    pub fn to_json_lines(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            run: usize,
            #[serde(skip_serializing_if = "Option::is_none")]
            fixed_mu: Option<f64>,
            #[serde(flatten)]
            record: &'a IterationRecord,
        }
        let mut out = String::new();
        for (run, r) in self.runs.iter().enumerate() {
            for record in &r.iterations {
                out.push_str(&serde_json::to_string(&Line {
                    run,
                    fixed_mu: r.fixed_mu,
                    record,
                })?);
                out.push('\n');
            }
        }
        Ok(out)
    }
}

/// Labels each query row with the label of its nearest training row
/// (Euclidean; ties go to the lower training index).
pub fn nearest_neighbor_labels(train: &DMatrix<f64>, labels: &[usize], query: &DMatrix<f64>) -> Vec<usize> {
    let rows: Vec<Vec<f64>> = train.row_iter().map(|r| r.iter().copied().collect()).collect();
    (0..query.nrows())
        .into_par_iter()
        .map(|q| {
            let x: Vec<f64> = query.row(q).iter().copied().collect();
            let mut best = (f64::INFINITY, 0);
            for (i, r) in rows.iter().enumerate() {
                let d: f64 = r.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, i);
                }
            }
            labels[best.1]
        })
        .collect()
}

/// State shared by every run of the loop on one domain pair.
pub struct Prepared {
    pub input_map: InputMap,
    pub geodesic: Option<GeodesicKernel>,
    /// Source rows then target rows, in classifier feature space.
    pub features: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
    pub class_count: usize,
    pub source_labels: Vec<usize>,
    pub labels: LabelMatrix,
    pub kernel: KernelSpec,
    pub gram: DMatrix<f64>,
    pub graph: Option<AffinityGraph>,
    /// 1-NN pseudo-labels for the first iteration.
    pub initial_pseudo: Vec<usize>,
}

impl Prepared {
    pub fn source_features(&self) -> DMatrix<f64> {
        self.features.rows(0, self.n).into_owned()
    }

    pub fn target_features(&self) -> DMatrix<f64> {
        self.features.rows(self.n, self.m).into_owned()
    }
}

/// Steps 1-3: manifold features, base pseudo-labels, Gram matrix and graph.
pub fn prepare(pair: &DomainPair, cfg: &MddaConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (n, m) = (pair.n(), pair.m());
    let mut xs = pair.source().values().clone();
    let mut xt = pair.target().values().clone();
    if cfg.normalize_rows {
        xs = pair.source().l2_normalized().into_parts().0;
        xt = pair.target().l2_normalized().into_parts().0;
    }

    let (geodesic, projection) = if cfg.manifold {
        let ps = pca_basis(&xs, cfg.d)?;
        let pt = pca_basis(&xt, cfg.d)?;
        let gk = gfk(&ps, &pt)?;
        let factor = gk.compact_factor();
        (Some(gk), Some(factor))
    } else {
        (None, None)
    };
    let input_map = InputMap {
        normalize_rows: cfg.normalize_rows,
        projection,
    };
    let (zs, zt) = match &input_map.projection {
        Some(p) => (project(p, &xs)?, project(p, &xt)?),
        None => (xs, xt),
    };
    let mut features = DMatrix::zeros(n + m, zs.ncols());
    features.rows_mut(0, n).copy_from(&zs);
    features.rows_mut(n, m).copy_from(&zt);

    let source_labels = pair.source_labels().to_vec();
    let initial_pseudo = nearest_neighbor_labels(&zs, &source_labels, &zt);
    let kernel = cfg.kernel.resolve(&features)?;
    let gram = gram_symmetric(&features, &kernel);
    let graph = if cfg.rho > 0.0 {
        Some(affinity(&features, cfg.p)?)
    } else {
        None
    };
    let labels = LabelMatrix::new(&source_labels, m, pair.class_count())?;
    Ok(Prepared {
        input_map,
        geodesic,
        features,
        n,
        m,
        class_count: pair.class_count(),
        source_labels,
        labels,
        kernel,
        gram,
        graph,
        initial_pseudo,
    })
}

/// `(lambda M + rho L) K` from the structured factors.
pub fn regularizer_times_gram(
    prepared: &Prepared,
    mmd: &MmdTerms,
    lambda: f64,
    rho: f64,
) -> DMatrix<f64> {
    let mut reg = mmd.mul(&prepared.gram) * lambda;
    if let Some(graph) = &prepared.graph {
        reg += graph.laplacian_mul(&prepared.gram) * rho;
    }
    reg
}

/// Objective value for coefficients `beta` under `mmd`.
pub fn structured_objective(
    prepared: &Prepared,
    mmd: &MmdTerms,
    beta: &DMatrix<f64>,
    cfg: &MddaConfig,
) -> f64 {
    let kb = &prepared.gram * beta;
    let mut fit = 0.0;
    for i in 0..prepared.n {
        let diff = prepared.labels.y.column(i) - kb.row(i).transpose();
        fit += diff.norm_squared();
    }
    let shrink = beta.dot(&kb);
    let mut align = cfg.lambda * mmd.quad_form(&kb);
    if let Some(graph) = &prepared.graph {
        align += cfg.rho * graph.quad_form(&kb);
    }
    fit + cfg.eta * shrink + align
}

struct RunOutput {
    beta: DMatrix<f64>,
    report: RunReport,
}

fn run_loop(
    prepared: &Prepared,
    cfg: &MddaConfig,
    fixed_mu: Option<f64>,
    estimator: &dyn MuEstimator,
    truth: Option<&[usize]>,
) -> Result<RunOutput> {
    let (n, m) = (prepared.n, prepared.m);
    let zs = prepared.source_features();
    let zt = prepared.target_features();
    let mut pseudo = prepared.initial_pseudo.clone();
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut beta = DMatrix::zeros(n + m, prepared.class_count);
    let mut scores = DMatrix::zeros(m, prepared.class_count);

    for iter in 1..=cfg.iterations {
        let estimate: Option<MuEstimate> = match fixed_mu {
            Some(_) => None,
            None => Some(estimator.estimate(
                &zs,
                &prepared.source_labels,
                &zt,
                &pseudo,
                prepared.class_count,
                derive_seed(cfg.seed, iter as u64),
            )?),
        };
        let mu = fixed_mu.unwrap_or_else(|| estimate.as_ref().map(|e| e.mu).unwrap_or(0.5));
        let mut mmd = MmdTerms::build(&prepared.source_labels, &pseudo, prepared.class_count, mu)?;
        if cfg.normalize_mmd {
            let norm = mmd.frobenius_norm();
            if norm > 0.0 {
                mmd = mmd.scaled(1.0 / norm);
            }
        }
        let reg_k = regularizer_times_gram(prepared, &mmd, cfg.lambda, cfg.rho);
        beta = solve_with_regularizer(&prepared.gram, &prepared.labels, &reg_k, cfg.eta)
            .map_err(|e| Error::numeric(format!("iteration {iter}: {e}")))?;
        let objective = structured_objective(prepared, &mmd, &beta, cfg);
        if !objective.is_finite() {
            return Err(Error::numeric(format!("iteration {iter}: objective is not finite")));
        }

        scores = prepared.gram.rows(n, m) * &beta;
        let next = argmax_rows(&scores);
        let changed = next.iter().zip(&pseudo).filter(|(a, b)| a != b).count();
        pseudo = next;
        let acc = match truth {
            Some(t) => Some(accuracy(&pseudo, t)?),
            None => None,
        };
        records.push(IterationRecord {
            iter,
            mu,
            pseudo_label_churn: changed as f64 / m as f64,
            objective,
            accuracy: acc,
            d_marginal: estimate.as_ref().map(|e| e.d_marginal),
            d_conditional: estimate.map(|e| e.d_conditional),
        });
        log::debug!("iteration {iter}: mu = {mu:.3}, churn = {changed}/{m}");
    }

    Ok(RunOutput {
        beta,
        report: RunReport {
            fixed_mu,
            iterations: records,
            target_scores: scores,
            target_labels: pseudo,
        },
    })
}

/// Runs every `mu` setting of the strategy on a prepared problem. Averaging
/// strategies produce a model whose coefficients are the mean of the runs,
/// so its scores are the mean of the runs' scores.
pub fn fit_prepared(
    prepared: &Prepared,
    cfg: &MddaConfig,
    estimator: &dyn MuEstimator,
    encoding: LabelEncoding,
    truth: Option<&[usize]>,
) -> Result<(FittedModel, AdaptationReport)> {
    let settings: Vec<Option<f64>> = match &cfg.mu {
        MuStrategy::Estimate => vec![None],
        MuStrategy::Fixed { value } => vec![Some(*value)],
        other => other
            .candidates()
            .expect("averaging strategies have candidates")
            .into_iter()
            .map(Some)
            .collect(),
    };
    let outputs: Vec<Result<RunOutput>> = settings
        .par_iter()
        .map(|&mu| run_loop(prepared, cfg, mu, estimator, truth))
        .collect();
    let outputs: Vec<RunOutput> = outputs.into_iter().collect::<Result<_>>()?;

    let mut beta = DMatrix::zeros(prepared.n + prepared.m, prepared.class_count);
    for out in &outputs {
        beta += &out.beta;
    }
    if outputs.len() > 1 {
        beta /= outputs.len() as f64;
    }
    let report = AdaptationReport {
        runs: outputs.into_iter().map(|o| o.report).collect(),
    };
    let model = FittedModel {
        beta,
        train_features: prepared.features.clone(),
        kernel: prepared.kernel,
        encoding,
        mu_final: report.mu_final(),
        input_map: prepared.input_map.clone(),
    };
    Ok((model, report))
}

/// Fits with an injected `mu` estimator.
pub fn fit_with_estimator(
    pair: &DomainPair,
    cfg: &MddaConfig,
    estimator: &dyn MuEstimator,
) -> Result<(FittedModel, AdaptationReport)> {
    let prepared = prepare(pair, cfg)?;
    let encoding = LabelEncoding::numbered(pair.class_count());
    fit_prepared(&prepared, cfg, estimator, encoding, None)
}

/// Fits the adapted classifier. Target labels, if any, are ignored.
pub fn fit(pair: &DomainPair, cfg: &MddaConfig) -> Result<(FittedModel, AdaptationReport)> {
    fit_with_estimator(pair, cfg, &cfg.estimator())
}

/// Like [`fit`], with an explicit label encoding stored in the model.
pub fn fit_encoded(
    pair: &DomainPair,
    cfg: &MddaConfig,
    encoding: LabelEncoding,
) -> Result<(FittedModel, AdaptationReport)> {
    if encoding.len() != pair.class_count() {
        return Err(Error::data(format!(
            "encoding has {} classes, pair has {}",
            encoding.len(),
            pair.class_count()
        )));
    }
    let prepared = prepare(pair, cfg)?;
    fit_prepared(&prepared, cfg, &cfg.estimator(), encoding, None)
}

/// Fits and scores every iteration against the target labels.
pub fn evaluate(pair: &DomainPair, cfg: &MddaConfig) -> Result<AdaptationReport> {
    let truth = pair
        .target_labels()
        .ok_or_else(|| Error::data("evaluation needs target labels"))?
        .to_vec();
    let prepared = prepare(pair, cfg)?;
    let encoding = LabelEncoding::numbered(pair.class_count());
    let (_, report) = fit_prepared(&prepared, cfg, &cfg.estimator(), encoding, Some(&truth))?;
    Ok(report)
}
