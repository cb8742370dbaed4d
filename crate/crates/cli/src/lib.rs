//! The `share` command-line tool.
//!
//! Human-readable diagnostics go to stderr; results go to files, except
//! `predict`, which prints one label per window on stdout.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use share_core::data::{
    generate_synthetic, load_dataset, load_dataset_cache, load_dataset_with_names, read_windows, save_dataset_cache,
    shared_action_spec, write_dataset_csv, Dataset, SyntheticSpec,
};
use share_core::experiment::{
    evaluate, export_features, prepare_splits, run_downsample_suite, run_experiment,
    run_fewshot_suite, Metrics, RunRecord, SuiteResult, TrainConfig,
};
use share_core::labelspace::{
    apply_label_map, load_embeddings, read_label_file, write_label_file, LabelMap, LabelSpace,
};
use share_core::model::persist::MANIFEST_VERSION;
use share_core::model::{load_model, save_model, AnyModel, ModelKind, ModelManifest};
use share_core::{seeded_rng, Error, Result, Tensor};

pub const RUN_RECORD_FILE: &str = "run_record.json";
pub const TIMING_FILE: &str = "timing.json";
pub const CONFIG_ECHO_FILE: &str = "config.txt";
pub const CONFUSION_FILE: &str = "confusion.csv";

#[derive(Debug, Parser)]
#[command(name = "share", version, about = "Activity recognition by decoding label names")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Window a CSV file and store it as a dataset cache.
    Prepare(PrepareArgs),
    /// Train one model and write it with its run record.
    Train(TrainArgs),
    /// Score a trained model.
    Eval(EvalArgs),
    /// Print one predicted label per window.
    Predict(PredictArgs),
    /// Paired runs on fractions of the training data.
    Fewshot(FewshotArgs),
    /// Paired runs at reduced sampling rates.
    Downsample(DownsampleArgs),
    /// Write encoder features for external visualization.
    ExportFeatures(ExportArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub window: usize,
    /// Defaults to the window.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Training settings. Each overrides the same key from `--config`.
#[derive(Debug, Default, Clone, Args)]
pub struct TrainFlags {
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "cache")]
    pub data: Option<PathBuf>,
    #[arg(long, conflicts_with = "cache")]
    pub labels: Option<PathBuf>,
    /// Dataset cache written by `prepare`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Separate test CSV; otherwise a stratified share is held out.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub p_aug: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Two conv widths, e.g. `64,128`.
    #[arg(long)]
    pub widths: Option<String>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Comma-separated tokens ignored by label augmentation.
    #[arg(long)]
    pub stop_tokens: Option<String>,
    /// Word-vector text file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Tab-separated `original<TAB>new name` file.
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    /// Retrain on train + validation for the best epoch count.
    #[arg(long)]
    pub retrain_full: bool,
}

impl TrainFlags {
    /// The flags that were given, as config key/value pairs.
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut push = |k: &'static str, val: Option<String>| {
            if let Some(val) = val {
                v.push((k, val));
            }
        };
        push("data", path(&self.data));
        push("labels", path(&self.labels));
        push("cache", path(&self.cache));
        push("test_data", path(&self.test_data));
        push("window", self.window.map(|x| x.to_string()));
        push("stride", self.stride.map(|x| x.to_string()));
        push("epochs", self.epochs.map(|x| x.to_string()));
        push("batch_size", self.batch_size.map(|x| x.to_string()));
        push("lr", self.lr.map(|x| format!("{x:?}")));
        push("p_aug", self.p_aug.map(|x| format!("{x:?}")));
        push("val_fraction", self.val_fraction.map(|x| format!("{x:?}")));
        push("test_fraction", self.test_fraction.map(|x| format!("{x:?}")));
        push("seed", self.seed.map(|x| x.to_string()));
        push("widths", self.widths.clone());
        push("hidden", self.hidden.map(|x| x.to_string()));
        push("embed_dim", self.embed_dim.map(|x| x.to_string()));
        push("stop_tokens", self.stop_tokens.clone());
        push("embeddings", path(&self.embeddings));
        push("label_map", path(&self.label_map));
        push("retrain_full", self.retrain_full.then(|| "true".to_string()));
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Share,
    Vanilla,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Share => ModelKind::Share,
            ModelArg::Vanilla => ModelKind::Vanilla,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long, value_enum, default_value = "share")]
    pub model: ModelArg,
    /// Run directory to create.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled CSV to score; default is the run's own test split.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Metrics JSON; default `<model>/eval_metrics.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label file to check against the model before predicting.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FewshotArgs {
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
    pub fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DownsampleArgs {
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    pub factors: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled CSV whose windows are encoded.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: usize,
    /// Class c gets action c % K and object c; without it every class has
    /// its own action and object.
    #[arg(long)]
    pub shared_actions: Option<usize>,
    /// One count for all classes or one per class, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub per_class: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub window: usize,
    #[arg(long, default_value_t = 4)]
    pub channels: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write `test.csv` with this many samples per class.
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Defaults, then the config file, then explicit overrides.
pub fn resolve_config(file: Option<&Path>, overrides: &[(&str, String)]) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply_kv_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_flags(flags: &TrainFlags) -> Result<TrainConfig> {
    let cfg = resolve_config(flags.config.as_deref(), &flags.overrides())?;
    if cfg.cache.is_some() && (cfg.data.is_some() || cfg.labels.is_some()) {
        return Err(Error::Config("`cache` and `data`/`labels` are mutually exclusive".into()));
    }
    Ok(cfg)
}

/// Exit status for a failed command: 1 for bad input, 2 for failures while
/// computing.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Prepare(a) => prepare(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Fewshot(a) => fewshot(a),
        Command::Downsample(a) => downsample_cmd(a),
        Command::ExportFeatures(a) => export(a),
        Command::Synth(a) => synth(a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn prepare(a: PrepareArgs) -> Result<()> {
    let ds = load_dataset(&a.data, &a.labels, a.window, a.stride.unwrap_or(a.window))?;
    if ds.is_empty() {
        return Err(Error::Validation("no windows could be cut from the data".into()));
    }
    save_dataset_cache(&a.out, &ds)?;
    eprintln!(
        "{} windows of {} x {} across {} classes written to {}",
        ds.len(),
        ds.channels,
        ds.window,
        ds.num_classes(),
        a.out.display()
    );
    for (name, n) in ds.label_names.iter().zip(ds.class_counts()) {
        eprintln!("  {n:>6}  {name}");
    }
    Ok(())
}

/// Raw (unnormalized) training data and optional test data named by `cfg`.
fn load_data(cfg: &TrainConfig) -> Result<(Dataset, Option<Dataset>)> {
    let ds = if let Some(cache) = &cfg.cache {
        load_dataset_cache(cache)?
    } else {
        let data = cfg.data.as_ref().ok_or_else(|| Error::Config("no training data: set `data` or `cache`".into()))?;
        let labels = cfg.labels.as_ref().ok_or_else(|| Error::Config("`labels` is required with `data`".into()))?;
        let window = cfg.window.ok_or_else(|| Error::Config("`window` is required with `data`".into()))?;
        load_dataset(data, labels, window, cfg.stride_or_window().unwrap_or(window))?
    };
    if ds.is_empty() {
        return Err(Error::Validation("no windows could be cut from the data".into()));
    }
    let test = match &cfg.test_data {
        Some(p) => Some(load_dataset_with_names(
            p,
            &ds.label_names,
            ds.window,
            cfg.stride.unwrap_or(ds.window),
        )?),
        None => None,
    };
    Ok((ds, test))
}

/// Decoding names (after the optional label map) and the label space.
fn label_space(class_names: &[String], cfg: &TrainConfig) -> Result<(Vec<String>, LabelSpace)> {
    let decode_names = match &cfg.label_map {
        Some(p) => apply_label_map(class_names, &LabelMap::load(p)?)?,
        None => class_names.to_vec(),
    };
    let space = LabelSpace::build(&decode_names, &cfg.stop_tokens)?;
    Ok((decode_names, space))
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = resolve_flags(&a.flags)?;
    let (ds, test) = load_data(&cfg)?;
    let (decode_names, space) = label_space(&ds.label_names, &cfg)?;
    let splits = prepare_splits(&ds, test.as_ref(), &cfg)?;
    let kind = ModelKind::from(a.model);
    info!(
        "training {kind:?} on {} windows, testing on {}",
        splits.train_pool.len(),
        splits.test.len()
    );
    let (model, record) = run_experiment(kind, &splits.train_pool, &splits.test, &space, &cfg)?;

    let embedding_source = match kind {
        ModelKind::Share => Some(
            load_embeddings(cfg.embeddings.as_deref(), &space, cfg.embed_dim, &mut seeded_rng(0))?.source,
        ),
        ModelKind::Vanilla => None,
    };
    let manifest = ModelManifest {
        format_version: MANIFEST_VERSION,
        kind,
        encoder: share_core::EncoderConfig {
            in_channels: ds.channels,
            widths: cfg.widths,
        },
        decoder_hidden: (kind == ModelKind::Share).then_some(cfg.hidden),
        embed_dim: match &model {
            AnyModel::Share(m) => Some(m.embed_dim()),
            AnyModel::Vanilla(_) => None,
        },
        class_names: ds.label_names.clone(),
        decode_names,
        stop_tokens: cfg.stop_tokens.clone(),
        vocab: space.vocab().to_vec(),
        label_space_hash: space.fingerprint(),
        embedding_source,
        window: ds.window,
        normalization: Some(splits.norm.clone()),
    };
    create_dir(&a.out)?;
    save_model(&a.out, &model, &manifest)?;
    write_json(&a.out.join(RUN_RECORD_FILE), &record.without_timing())?;
    write_json(
        &a.out.join(TIMING_FILE),
        &serde_json::json!({ "wall_clock_secs": record.wall_clock_secs }),
    )?;
    let echo = a.out.join(CONFIG_ECHO_FILE);
    std::fs::write(&echo, cfg.to_kv_text()).map_err(|e| Error::io(&echo, e))?;
    if let Some(m) = &record.test {
        let p = a.out.join(CONFUSION_FILE);
        std::fs::write(&p, m.confusion_csv(&ds.label_names)).map_err(|e| Error::io(&p, e))?;
        eprintln!(
            "test accuracy {:.4}, macro-F1 {:.4} ({} parameters, best epoch {:?})",
            m.accuracy, m.macro_f1, record.parameters, record.best_epoch
        );
    }
    eprintln!("run written to {}", a.out.display());
    Ok(())
}

/// Windows of a labelled CSV mapped onto the model's classes and normalized
/// with its statistics.
fn model_dataset(manifest: &ModelManifest, path: &Path, stride: Option<usize>) -> Result<Dataset> {
    let ds = load_dataset_with_names(path, &manifest.class_names, manifest.window, stride.unwrap_or(manifest.window))?;
    check_channels(manifest, ds.channels)?;
    match &manifest.normalization {
        Some(n) => n.apply(&ds),
        None => Ok(ds),
    }
}

fn check_channels(manifest: &ModelManifest, channels: usize) -> Result<()> {
    if channels != manifest.encoder.in_channels {
        return Err(Error::Validation(format!(
            "data has {channels} channels, the model expects {}",
            manifest.encoder.in_channels
        )));
    }
    Ok(())
}

fn report(m: &Metrics, names: &[String]) {
    eprintln!("accuracy {:.4}, macro-F1 {:.4}", m.accuracy, m.macro_f1);
    for (i, name) in names.iter().enumerate() {
        eprintln!(
            "  {name:<30} P {:.3}  R {:.3}  F1 {:.3}",
            m.precision[i], m.recall[i], m.f1[i]
        );
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let (model, manifest, space) = load_model(&a.model)?;
    let (test, recorded) = match &a.data {
        Some(p) => (model_dataset(&manifest, p, a.stride)?, None),
        None => {
            let record: RunRecord = read_json(&a.model.join(RUN_RECORD_FILE))?;
            let (ds, test) = load_data(&record.config)?;
            manifest.check_labels(&ds.label_names)?;
            let splits = prepare_splits(&ds, test.as_ref(), &record.config)?;
            (splits.test, record.test)
        }
    };
    if test.is_empty() {
        return Err(Error::Validation("no test windows to evaluate".into()));
    }
    let metrics = evaluate(&model, &test, &space)?;
    report(&metrics, &manifest.class_names);
    if let Some(r) = recorded {
        if r == metrics {
            eprintln!("matches the metrics recorded at training time");
        } else {
            return Err(Error::Numeric("evaluation differs from the recorded test metrics".into()));
        }
    }
    let out = a.out.unwrap_or_else(|| a.model.join("eval_metrics.json"));
    write_json(&out, &metrics)?;
    let confusion = out.with_extension("confusion.csv");
    std::fs::write(&confusion, metrics.confusion_csv(&manifest.class_names)).map_err(|e| Error::io(&confusion, e))
}

fn predict(a: PredictArgs) -> Result<()> {
    let (model, manifest, space) = load_model(&a.model)?;
    if let Some(labels) = &a.labels {
        let names = read_label_file(labels)?;
        if names != manifest.class_names {
            let hash = LabelSpace::build(&names, &manifest.stop_tokens)
                .map(|s| s.fingerprint())
                .unwrap_or_else(|_| "invalid".into());
            return Err(Error::Validation(format!(
                "label file {} (label space {hash}) does not match the model (label space {})",
                labels.display(),
                manifest.label_space_hash
            )));
        }
    }
    let windows = read_windows(&a.data, manifest.window, a.stride.unwrap_or(manifest.window))?;
    check_channels(&manifest, windows.channels)?;
    let mut values: Vec<Tensor> = windows.windows.into_iter().map(|w| w.values).collect();
    if let Some(n) = &manifest.normalization {
        for v in &mut values {
            n.apply_tensor(v)?;
        }
    }
    let mut out = String::new();
    for chunk in values.chunks(share_core::experiment::EVAL_CHUNK) {
        let x = Tensor::stack(&chunk.iter().collect::<Vec<_>>())?;
        for c in model.predict(&x, &space)? {
            out.push_str(&manifest.class_names[c]);
            out.push('\n');
        }
    }
    print!("{out}");
    Ok(())
}

fn suite_inputs(flags: &TrainFlags) -> Result<(TrainConfig, Dataset, Dataset, LabelSpace)> {
    let cfg = resolve_flags(flags)?;
    let (ds, test) = load_data(&cfg)?;
    let (_, space) = label_space(&ds.label_names, &cfg)?;
    let splits = prepare_splits(&ds, test.as_ref(), &cfg)?;
    Ok((cfg, splits.train_pool, splits.test, space))
}

fn write_suite(out: &Path, res: &SuiteResult) -> Result<()> {
    create_dir(out)?;
    res.write_rows_csv(&out.join("rows.csv"))?;
    res.write_summary_csv(&out.join("summary.csv"))?;
    res.write_jsonl(&out.join("runs.jsonl"))?;
    for s in &res.summary {
        eprintln!(
            "{:<8} {:>6}  accuracy {:.4} ± {:.4}  macro-F1 {:.4} ± {:.4}  ({} runs)",
            format!("{:?}", s.model).to_lowercase(),
            s.setting,
            s.accuracy_mean,
            s.accuracy_std,
            s.macro_f1_mean,
            s.macro_f1_std,
            s.runs
        );
    }
    eprintln!("{} runs written to {}", res.rows.len(), out.display());
    Ok(())
}

fn fewshot(a: FewshotArgs) -> Result<()> {
    let (cfg, train, test, space) = suite_inputs(&a.flags)?;
    let res = run_fewshot_suite(&train, &test, &space, &a.fractions, &a.seeds, &cfg)?;
    write_suite(&a.out, &res)
}

fn downsample_cmd(a: DownsampleArgs) -> Result<()> {
    let (cfg, train, test, space) = suite_inputs(&a.flags)?;
    let res = run_downsample_suite(&train, &test, &space, &a.factors, &a.seeds, &cfg)?;
    write_suite(&a.out, &res)
}

fn export(a: ExportArgs) -> Result<()> {
    let (model, manifest, _) = load_model(&a.model)?;
    let ds = model_dataset(&manifest, &a.data, a.stride)?;
    export_features(&model, &ds, &a.out)?;
    eprintln!("{} feature rows written to {}", ds.len(), a.out.display());
    Ok(())
}

fn synth_spec(a: &SynthArgs, per_class: Vec<usize>, seed: u64) -> Result<SyntheticSpec> {
    match a.shared_actions {
        Some(k) => shared_action_spec(k, per_class, a.window, a.channels, a.noise, seed),
        None => {
            let spec = SyntheticSpec {
                per_class,
                ..SyntheticSpec::balanced(a.classes, 0, a.window, a.channels, a.noise, seed)
            };
            spec.validate()?;
            Ok(spec)
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let per_class = match a.per_class.as_slice() {
        [n] => vec![*n; a.classes],
        list if list.len() == a.classes => list.to_vec(),
        list => {
            return Err(Error::Validation(format!(
                "--per-class has {} entries for {} classes",
                list.len(),
                a.classes
            )))
        }
    };
    let spec = synth_spec(&a, per_class, a.seed)?;
    let ds = generate_synthetic(&spec)?;
    create_dir(&a.out)?;
    write_dataset_csv(&a.out.join("data.csv"), &ds)?;
    write_label_file(&a.out.join("labels.txt"), &ds.label_names)?;
    write_json(&a.out.join("spec.json"), &spec)?;
    if let Some(n) = a.test_per_class {
        // a different seed so test noise is independent of the training noise
        let test_spec = synth_spec(&a, vec![n; a.classes], a.seed.wrapping_add(1) ^ 0x5eed)?;
        write_dataset_csv(&a.out.join("test.csv"), &generate_synthetic(&test_spec)?)?;
    }
    eprintln!(
        "{} samples of {} classes (window {}, {} channels) written to {}",
        ds.len(),
        ds.num_classes(),
        ds.window,
        ds.channels,
        a.out.display()
    );
    Ok(())
}
