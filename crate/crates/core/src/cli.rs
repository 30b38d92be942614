//! Command-line front end. Errors print as one line, `error[class]: detail`,
//! and exit with the class's code: 2 usage, 3 data, 4 compatibility,
//! 5 numerical.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfigFile;
use crate::data::{
    augment, ingest, split, Assignment, AugmentConfig, BatchOptions, Dataset, ImageSet, Split, SplitManifest,
    SyntheticConfig, MANIFEST_VERSION,
};
use crate::error::{Error, ErrorClass, Result};
use crate::gradcheck;
use crate::metrics::{evaluate, write_json, write_text};
use crate::model::{load_weights, ModelSpec, SenetModel};
use crate::nn::derive_seed;
use crate::train::{repeat_runs, run, Protocol};

#[derive(Debug, Parser)]
#[command(name = "senet", version, about = "Fish species classifier with squeeze-and-excitation blocks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train from fresh weights and evaluate the best-validation epoch.
    Pretrain(RunArgs),
    /// Load weights, replace the classifier, train, and evaluate.
    Posttrain(PosttrainArgs),
    /// Evaluate weights on a dataset.
    Evaluate(EvaluateArgs),
    /// Finite-difference check of every differentiable primitive.
    Gradcheck(GradcheckArgs),
    /// Print a weights file's spec fingerprint and parameters.
    Inspect(InspectArgs),
    /// Write augmented copies of a dataset to disk.
    Expand(ExpandArgs),
    /// Write a procedural image dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset root with one subdirectory per class.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory; defaults to `<$SENET_OUT_DIR or runs>/<command>-seed<seed>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reuse an existing split manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Augment training batches.
    #[arg(long, value_enum)]
    pub augment: Option<Switch>,
}

#[derive(Debug, Args)]
pub struct PosttrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Pre-trained weights file.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Number of target classes.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long)]
    pub repeat: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    /// Split manifest; its test split is evaluated unless --split says otherwise.
    #[arg(long, required_unless_present = "all")]
    pub manifest: Option<PathBuf>,
    /// Evaluate every image under --data.
    #[arg(long, conflicts_with = "manifest")]
    pub all: bool,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    /// Directory for confusion.csv and evaluation.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Emit JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Augmented copies per source image.
    #[arg(long, default_value_t = 1)]
    pub copies: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Take augmentation ranges from this run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Expand only the training split of this manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 20)]
    pub per_class: usize,
    /// Square image side in pixels.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 0.15)]
    pub noise: f32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(stderr, "error[{}]: {line}", ErrorClass::Usage.tag());
            return ErrorClass::Usage.exit_code();
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let class = e.class();
            let detail = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error[{}]: {detail}", class.tag());
            class.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Pretrain(args) => train_command(Protocol::Pretrain, &args, None, None, None, out),
        Command::Posttrain(a) => train_command(Protocol::Posttrain, &a.run, a.weights, a.classes, a.repeat, out),
        Command::Evaluate(args) => evaluate_command(&args, out),
        Command::Gradcheck(args) => gradcheck_command(&args, out),
        Command::Inspect(args) => inspect_command(&args, out),
        Command::Expand(args) => expand_command(&args, out),
        Command::Synth(args) => synth_command(&args, out),
    }
}

fn say(out: &mut dyn Write, text: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn train_command(
    protocol: Protocol,
    args: &RunArgs,
    weights: Option<PathBuf>,
    classes: Option<usize>,
    repeat: Option<usize>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    if let Some(v) = &args.data {
        cfg.data.root = Some(v.clone());
    }
    if let Some(v) = &args.manifest {
        cfg.data.manifest = Some(v.clone());
    }
    if let Some(v) = args.split_seed {
        cfg.data.split_seed = v;
    }
    if let Some(v) = args.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = Some(v);
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = Some(v);
    }
    if let Some(v) = weights {
        cfg.train.weights = Some(v);
    }
    if let Some(v) = repeat {
        cfg.train.repeat = Some(v);
    }
    match args.augment {
        Some(Switch::On) => cfg.augment = Some(cfg.augment.unwrap_or_default()),
        Some(Switch::Off) => cfg.augment = None,
        None => {}
    }
    if let Some(v) = &args.out {
        cfg.output.dir = Some(v.clone());
    }

    let root = cfg
        .data
        .root
        .clone()
        .ok_or_else(|| Error::Config("no dataset given; pass --data or set data.root".into()))?;
    let (dataset, report) = ingest(&root)?;
    for (path, why) in &report.skipped {
        log::warn!("skipped {}: {why}", path.display());
    }
    let manifest = match &cfg.data.manifest {
        Some(path) => {
            let m = SplitManifest::load(path)?;
            m.check_matches(&dataset)?;
            m
        }
        None => split(&dataset, cfg.data.split_seed, cfg.data.fractions)?,
    };

    let found = dataset.num_classes();
    let spec = match protocol {
        Protocol::Pretrain => {
            let base = cfg.model.clone().unwrap_or_else(|| ModelSpec::full(found));
            ModelSpec { num_classes: found, ..base }
        }
        Protocol::Posttrain => {
            let path = cfg
                .train
                .weights
                .clone()
                .ok_or_else(|| Error::Config("post-training needs --weights".into()))?;
            let classes = classes.unwrap_or(found);
            if classes != found {
                return Err(Error::Data(format!("--classes {classes} but the dataset has {found} classes")));
            }
            let base = match cfg.model.clone() {
                Some(spec) => spec,
                None => load_weights(&path)?.spec,
            };
            ModelSpec { num_classes: classes, ..base }
        }
    };
    spec.validate()?;
    cfg.resolve(protocol, spec.clone());
    let config = cfg.train_config()?;
    let repeat = cfg.train.repeat.unwrap_or(1);
    let dir = cfg.output_dir(&format!("{}-seed{}", protocol.name(), config.seed));
    cfg.output.dir = Some(dir.clone());

    let set = ImageSet::new(dataset, manifest, spec.height, spec.width)?;
    let [tr, va, te] = set.manifest().counts();
    say(out, format!("{found} classes; split {tr}/{va}/{te} (train/validation/test)"))?;
    if repeat > 1 {
        let record = repeat_runs(protocol, &config, &set, repeat, Some(&dir))?;
        for r in &record.runs {
            say(out, format!("run {} (seed {}): test accuracy {:.4}", r.run, r.seed, r.test_accuracy))?;
        }
        say(out, format!("mean test accuracy over {repeat} runs: {:.4}", record.mean_test_accuracy))?;
    } else {
        let outcome = run(protocol, &config, &set, Some(&dir))?;
        say(
            out,
            format!("test accuracy {:.4} using epoch {}", outcome.test_accuracy, outcome.selected_epoch),
        )?;
    }
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    say(out, format!("run directory: {}", dir.display()))
}

fn evaluate_command(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let model = SenetModel::load_any(&args.weights)?;
    let (dataset, _) = ingest(&args.data)?;
    let (manifest, split) = match &args.manifest {
        Some(path) => (SplitManifest::load(path)?, Split::from(args.split)),
        None => (whole_dataset_manifest(&dataset), Split::Test),
    };
    let spec = model.spec().clone();
    let set = ImageSet::new(dataset, manifest, spec.height, spec.width)?.without_cache();
    let names = set.dataset().class_names().to_vec();
    let opts = BatchOptions::sequential(args.batch_size.max(1));
    let (accuracy, confusion) = evaluate(&model, &names, set.batches(split, &opts))?;
    say(out, format!("accuracy {accuracy:.4} on {} images", confusion.total()))?;
    write!(out, "{}", confusion.to_csv()).map_err(|e| Error::io("<stdout>", e))?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_text(&dir.join("confusion.csv"), &confusion.to_csv())?;
        write_text(&dir.join("confusion_normalized.csv"), &confusion.to_normalized_csv())?;
        let record = serde_json::json!({
            "weights_fingerprint": spec.fingerprint().0,
            "split": split.name(),
            "accuracy": accuracy,
            "confusion": confusion,
        });
        write_json(&dir.join("evaluation.json"), &record)?;
    }
    Ok(())
}

/// Every sample assigned to the test split.
fn whole_dataset_manifest(dataset: &Dataset) -> SplitManifest {
    SplitManifest {
        version: MANIFEST_VERSION,
        seed: 0,
        fractions: Default::default(),
        class_names: dataset.class_names().to_vec(),
        assignments: dataset
            .samples()
            .iter()
            .map(|s| Assignment { key: s.key.clone(), label: s.label, split: Split::Test })
            .collect(),
    }
}

fn gradcheck_command(args: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let results = gradcheck::run_suite(args.seed)?;
    say(out, format!("{:<28} {:>8} {:>14}", "primitive", "elements", "max rel err"))?;
    for r in &results {
        let mark = if r.passed() { "ok" } else { "FAIL" };
        say(out, format!("{:<28} {:>8} {:>14.3e}  {mark}", r.name, r.elements, r.max_rel_error))?;
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "gradient mismatch above {:e} in {}",
            gradcheck::TOLERANCE,
            failed.join(", ")
        )))
    }
}

fn inspect_command(args: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let file = load_weights(&args.weights)?;
    let total = file.params.total_count();
    let trainable: usize = file
        .params
        .iter()
        .filter(|(_, p)| p.role.trainable())
        .map(|(_, p)| p.tensor.len())
        .sum();
    if args.json {
        let params: Vec<_> = file
            .params
            .iter()
            .map(|(n, p)| serde_json::json!({ "name": n, "role": p.role, "shape": p.tensor.dims() }))
            .collect();
        let doc = serde_json::json!({
            "fingerprint": file.fingerprint.0,
            "spec": file.spec,
            "parameters": params,
            "total_parameters": total,
            "trainable_parameters": trainable,
        });
        return say(out, serde_json::to_string_pretty(&doc)?);
    }
    let s = &file.spec;
    say(out, format!("fingerprint {}", file.fingerprint))?;
    say(out, format!("input {}×{}×{}, {} classes", s.height, s.width, s.channels, s.num_classes))?;
    for (name, p) in file.params.iter() {
        let dims: Vec<String> = p.tensor.dims().iter().map(|d| d.to_string()).collect();
        say(out, format!("{name:<24} {:<13} {:<16} {}", p.role.name(), dims.join("×"), p.tensor.len()))?;
    }
    say(out, format!("total parameters {total} ({trainable} trainable)"))
}

fn expand_command(args: &ExpandArgs, out: &mut dyn Write) -> Result<()> {
    let augment_cfg = match &args.config {
        Some(path) => RunConfigFile::load(path)?.augment.unwrap_or_default(),
        None => AugmentConfig::default(),
    };
    augment_cfg.validate()?;
    let (dataset, _) = ingest(&args.data)?;
    let train_only = match &args.manifest {
        Some(path) => {
            let m = SplitManifest::load(path)?;
            m.check_matches(&dataset)?;
            Some(m)
        }
        None => None,
    };
    let mut written = 0usize;
    for (i, sample) in dataset.samples().iter().enumerate() {
        if let Some(m) = &train_only {
            if m.assignments[i].split != Split::Train {
                continue;
            }
        }
        let class = &dataset.class_names()[sample.label];
        let dir = args.out.join(class);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let stem = Path::new(&sample.key).file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
        let img = sample.load()?;
        img.save_png(&dir.join(format!("{stem}.png")))?;
        for k in 0..args.copies {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, &format!("{}#{k}", sample.key)));
            augment(&img, &augment_cfg, &mut rng).save_png(&dir.join(format!("{stem}_aug{k}.png")))?;
            written += 1;
        }
    }
    say(out, format!("wrote {written} augmented images to {}", args.out.display()))
}

fn synth_command(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SyntheticConfig {
        classes: args.classes,
        per_class: args.per_class,
        height: args.size,
        width: args.size,
        noise: args.noise,
        seed: args.seed,
    };
    cfg.write_tree(&args.out)?;
    say(out, format!("wrote {} images in {} classes to {}", args.classes * args.per_class, args.classes, args.out.display()))
}
