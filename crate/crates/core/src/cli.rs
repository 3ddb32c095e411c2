//! Command-line front end.
//!
//! Every subcommand loads its inputs, calls the library and writes the
//! result; exit codes follow [`Error::exit_code`].

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::data::{
    make_shift_dataset, read_table, write_features, write_matrix, DomainPair, FeatureMatrix, LabelColumn,
    LabelEncoding, ShiftSpec,
};
use crate::divergence::{ADistance, ADistanceEstimator, MuEstimator, MuStrategy};
use crate::error::{Error, Result};
use crate::manifold::{gfk, pca_basis, transform};
use crate::mdda::{fit_encoded, fit_prepared, prepare, AdaptationReport, KernelChoice, MddaConfig};
use crate::model_io::{load_model, save_model};

#[derive(Debug, Parser)]
#[command(name = "mdda", version, about = "Unsupervised domain adaptation on feature CSVs")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an adapted classifier and write a model bundle.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tuning: Tuning,
        /// Output directory for the model bundle, report and manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a feature file with a saved model.
    Predict {
        /// Model bundle directory.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Label column of the input, if it has one; the column is dropped.
        #[arg(long)]
        label_column: Option<String>,
        /// Output CSV of labels and per-class scores.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit and report per-iteration accuracy against target labels.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tuning: Tuning,
        /// Directory for metrics JSON, plot CSVs and the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the adaptive factor for a domain pair.
    EstimateMu {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Write manifold features and the geodesic flow kernel.
    GfkTransform {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic source/target pair from a JSON spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_source: PathBuf,
        #[arg(long)]
        out_target: PathBuf,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Source label column: header name, 0-based index or `last`.
    #[arg(long, default_value = "last")]
    label_column: String,
    /// Target label column. Defaults to the source's when the target has
    /// one column more than the source features.
    #[arg(long)]
    target_label_column: Option<String>,
}

#[derive(Debug, Args)]
struct Tuning {
    /// JSON config with `MddaConfig` field names.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `estimate`, `grid`, `fixed:V`, a bare value, or `random:T`.
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    p: Option<usize>,
    /// `rbf` or `linear`.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
}

impl Tuning {
    /// Flags over config file over defaults.
    fn resolve(&self) -> Result<MddaConfig> {
        let mut fields = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => return Err(Error::config("config", "expected a JSON object")),
                    Err(e) => return Err(Error::config("config", e.to_string())),
                }
            }
            None => Map::new(),
        };
        let seed = self
            .seed
            .or_else(|| fields.get("seed").and_then(Value::as_u64))
            .unwrap_or(0);
        let mut set = |k: &str, v: Value| {
            fields.insert(k.to_string(), v);
        };
        if let Some(v) = self.seed {
            set("seed", json!(v));
        }
        if let Some(v) = self.d {
            set("d", json!(v));
        }
        if let Some(v) = self.lambda {
            set("lambda", json!(v));
        }
        if let Some(v) = self.eta {
            set("eta", json!(v));
        }
        if let Some(v) = self.rho {
            set("rho", json!(v));
        }
        if let Some(v) = self.p {
            set("p", json!(v));
        }
        if let Some(v) = self.iterations {
            set("iterations", json!(v));
        }
        if let Some(k) = &self.kernel {
            set("kernel", serde_json::to_value(KernelChoice::parse(k)?)?);
        }
        if let Some(m) = &self.mu {
            set("mu", serde_json::to_value(MuStrategy::parse(m, seed)?)?);
        }
        MddaConfig::from_json(&Value::Object(fields).to_string())
    }
}

/// Provenance of one invocation.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

struct Provenance {
    command: &'static str,
    seed: u64,
    config: Value,
    inputs: Vec<InputDigest>,
    started: u64,
}

impl Provenance {
    fn new(command: &'static str, seed: u64, config: Value, inputs: &[&Path]) -> Result<Self> {
        Ok(Self {
            command,
            seed,
            config,
            inputs: inputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?,
            started: now_unix(),
        })
    }

    /// Hash of everything that determines the results; timestamps excluded.
    fn run_id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update(self.config.to_string().as_bytes());
        for input in &self.inputs {
            h.update(input.sha256.as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn write(self, dir: &Path) -> Result<String> {
        let run_id = self.run_id();
        let manifest = RunManifest {
            run_id: run_id.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            seed: self.seed,
            config: self.config,
            inputs: self.inputs,
            started_unix: self.started,
            finished_unix: now_unix(),
        };
        write_text(&dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(&manifest)?)?;
        Ok(run_id)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Loads both domains; target labels are encoded with the source classes.
fn load_pair(data: &DataArgs, target_labels: Option<&str>) -> Result<(DomainPair, LabelEncoding)> {
    let src = read_table(&data.source, Some(&LabelColumn::parse(&data.label_column)))?;
    let tokens = src.label_tokens.expect("label column requested");
    let encoding = LabelEncoding::from_tokens(&tokens);
    let source = FeatureMatrix::labeled(src.values, encoding.encode(&tokens)?)?;

    // Without an explicit target label column, a target with exactly one
    // column more than the source features is read with the source's.
    let column = match target_labels {
        Some(c) => Some(LabelColumn::parse(c)),
        None => {
            let probe = read_table(&data.target, None)?;
            (probe.values.ncols() == source.dim() + 1).then(|| LabelColumn::parse(&data.label_column))
        }
    };
    let tgt = read_table(&data.target, column.as_ref())?;
    let target = match tgt.label_tokens {
        Some(t) => {
            let ids = t
                .iter()
                .map(|tok| {
                    encoding
                        .id(tok)
                        .ok_or_else(|| Error::data(format!("target label {tok:?} is not a source class")))
                })
                .collect::<Result<Vec<_>>>()?;
            FeatureMatrix::labeled(tgt.values, ids)?
        }
        None => FeatureMatrix::unlabeled(tgt.values)?,
    };
    let pair = DomainPair::new(source, target, encoding.len())?;
    Ok((pair, encoding))
}

fn config_value(cfg: &MddaConfig) -> Result<Value> {
    Ok(serde_json::to_value(cfg)?)
}

/// Per-iteration plot data of the first run: `iteration,mu,accuracy`.
fn iterations_csv(report: &AdaptationReport) -> String {
    let mut out = String::from("iteration,mu,accuracy\n");
    for r in report.iterations() {
        let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", r.iter, r.mu, acc));
    }
    out
}

/// One row per run of an averaging strategy: `mu,accuracy`.
fn mu_csv(report: &AdaptationReport) -> String {
    let mut out = String::from("mu,accuracy\n");
    for run in &report.runs {
        let rec = run.final_record();
        let acc = rec.accuracy.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{}\n", run.fixed_mu.unwrap_or(rec.mu), acc));
    }
    out
}

fn metrics_json(report: &AdaptationReport, run_id: Option<&str>) -> Result<Value> {
    let lines: Vec<Value> = report
        .to_json_lines()?
        .lines()
        .map(serde_json::from_str)
        .collect::<std::result::Result<_, _>>()?;
    let mut m = Map::new();
    if let Some(id) = run_id {
        m.insert("run_id".into(), json!(id));
        m.insert("manifest".into(), json!(MANIFEST_FILE));
    }
    m.insert("accuracy".into(), json!(report.final_accuracy()));
    m.insert("mu_final".into(), json!(report.mu_final()));
    m.insert("per_iteration".into(), Value::Array(lines));
    Ok(Value::Object(m))
}

fn cmd_fit(data: &DataArgs, tuning: &Tuning, out: &Path) -> Result<()> {
    let cfg = tuning.resolve()?;
    let (pair, encoding) = load_pair(data, data.target_label_column.as_deref())?;
    let prov = Provenance::new("fit", cfg.seed, config_value(&cfg)?, &[&data.source, &data.target])?;
    let (model, report) = fit_encoded(&pair, &cfg, encoding)?;
    create_dir(out)?;
    save_model(&model, out.join("model"))?;
    write_text(&out.join("report.jsonl"), &report.to_json_lines()?)?;
    prov.write(out)?;
    log::info!("wrote model bundle to {}", out.display());
    Ok(())
}

fn cmd_predict(model_dir: &Path, input: &Path, label_column: Option<&str>, out: &Path) -> Result<()> {
    let model = load_model(model_dir)?;
    let column = label_column.map(LabelColumn::parse);
    let table = read_table(input, column.as_ref())?;
    let prediction = model.predict_raw(&table.values)?;
    let mut w = csv::Writer::from_path(out).map_err(|e| Error::io(out, std::io::Error::other(e)))?;
    let csv_err = |e: csv::Error| Error::io(out, std::io::Error::other(e));
    let mut header = vec!["label".to_string()];
    header.extend(model.encoding.classes().iter().map(|c| format!("score_{c}")));
    w.write_record(&header).map_err(csv_err)?;
    let labels = model.encoding.decode(&prediction.labels)?;
    for (i, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(prediction.scores.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(out, e))
}

fn cmd_evaluate(data: &DataArgs, tuning: &Tuning, out: Option<&Path>) -> Result<String> {
    let cfg = tuning.resolve()?;
    let (pair, encoding) = load_pair(data, data.target_label_column.as_deref())?;
    let truth = pair
        .target_labels()
        .ok_or_else(|| Error::data("evaluate needs a labelled target file"))?
        .to_vec();
    let prov = Provenance::new("evaluate", cfg.seed, config_value(&cfg)?, &[&data.source, &data.target])?;
    let prepared = prepare(&pair, &cfg)?;
    let estimator = ADistanceEstimator {
        a_distance: ADistance {
            rounds: cfg.a_distance_rounds,
            ..ADistance::default()
        },
    };
    let (_, report) = fit_prepared(&prepared, &cfg, &estimator, encoding, Some(&truth))?;
    let run_id = out.map(|_| prov.run_id());
    let metrics = serde_json::to_string_pretty(&metrics_json(&report, run_id.as_deref())?)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_text(&dir.join("metrics.json"), &metrics)?;
        write_text(&dir.join("iterations.csv"), &iterations_csv(&report))?;
        if report.runs.len() > 1 {
            write_text(&dir.join("mu_runs.csv"), &mu_csv(&report))?;
        }
        prov.write(dir)?;
    }
    Ok(metrics)
}

fn cmd_estimate_mu(data: &DataArgs, tuning: &Tuning) -> Result<String> {
    let cfg = tuning.resolve()?;
    let (pair, _) = load_pair(data, data.target_label_column.as_deref())?;
    let prepared = prepare(&pair, &cfg)?;
    let (labels, source) = match pair.target_labels() {
        Some(t) => (t.to_vec(), "target"),
        None => (prepared.initial_pseudo.clone(), "pseudo"),
    };
    let estimator = ADistanceEstimator {
        a_distance: ADistance {
            rounds: cfg.a_distance_rounds,
            ..ADistance::default()
        },
    };
    let estimate = estimator.estimate(
        &prepared.source_features(),
        &prepared.source_labels,
        &prepared.target_features(),
        &labels,
        prepared.class_count,
        cfg.seed,
    )?;
    let mut value = serde_json::to_value(&estimate)?;
    value["target_labels"] = json!(source);
    Ok(serde_json::to_string_pretty(&value)?)
}

fn cmd_gfk_transform(data: &DataArgs, tuning: &Tuning, out: &Path) -> Result<String> {
    let cfg = tuning.resolve()?;
    let (pair, encoding) = load_pair(data, data.target_label_column.as_deref())?;
    let (src, tgt) = if cfg.normalize_rows {
        (pair.source().l2_normalized(), pair.target().l2_normalized())
    } else {
        (pair.source().clone(), pair.target().clone())
    };
    let gk = gfk(&pca_basis(src.values(), cfg.d)?, &pca_basis(tgt.values(), cfg.d)?)?;
    create_dir(out)?;
    let zs = src.map_values(transform(&gk, src.values())?)?;
    let zt = tgt.map_values(transform(&gk, tgt.values())?)?;
    write_features(out.join("source.csv"), &zs, Some(&encoding))?;
    write_features(out.join("target.csv"), &zt, Some(&encoding))?;
    write_matrix(out.join("g.csv"), gk.g())?;
    write_matrix(out.join("sqrt_g.csv"), gk.sqrt_g())?;
    Ok(serde_json::to_string_pretty(&json!({
        "subspace_dim": gk.subspace_dim(),
        "principal_angles": gk.principal_angles(),
    }))?)
}

fn cmd_synth(spec_path: &Path, out_source: &Path, out_target: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let spec: ShiftSpec = serde_json::from_str(&text).map_err(|e| Error::config("spec", e.to_string()))?;
    let pair = make_shift_dataset(&spec)?;
    let encoding = LabelEncoding::numbered(pair.class_count());
    write_features(out_source, pair.source(), Some(&encoding))?;
    write_features(out_target, pair.target(), Some(&encoding))
}

fn dispatch(cli: Cli) -> Result<Option<String>> {
    match cli.command {
        Command::Fit { data, tuning, out } => cmd_fit(&data, &tuning, &out).map(|_| None),
        Command::Predict {
            model,
            input,
            label_column,
            out,
        } => cmd_predict(&model, &input, label_column.as_deref(), &out).map(|_| None),
        Command::Evaluate { data, tuning, out } => cmd_evaluate(&data, &tuning, out.as_deref()).map(Some),
        Command::EstimateMu { data, tuning } => cmd_estimate_mu(&data, &tuning).map(Some),
        Command::GfkTransform { data, tuning, out } => cmd_gfk_transform(&data, &tuning, &out).map(Some),
        Command::Synth {
            spec,
            out_source,
            out_target,
        } => cmd_synth(&spec, &out_source, &out_target).map(|_| None),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Usage errors exit with 1.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(Some(text)) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{text}");
            0
        }
        Ok(None) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
