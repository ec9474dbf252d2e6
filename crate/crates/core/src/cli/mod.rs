//! `vibediag` command line: one subcommand per pipeline stage.
//!
//! Every command writes into its `--out` directory and finishes with a
//! `run_manifest.json` there (config echo, seed, version, SHA-256 of every
//! artifact). Usage errors exit with 2, stage failures with 1.

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{EmbedConfig, RunConfig, SimulateConfig};

use crate::band_features::{find_torsional_peaks, magnitude_spectrum_with};
use crate::embedding::{pca_fit, pca_reduce, tsne, write_embedding_csv, write_variance_csv, PcaTarget};
use crate::hybrid::{evaluate, Branch, ExampleSet};
use crate::hht::SpectrumImage;
use crate::nn::{load_checkpoint, save_checkpoint, train_with_callback};
use crate::pipeline::featurize;
use crate::signal::{load_recording, save_recording, synthesize_recording, FaultLabel, Recording, SyntheticSpec};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "vibediag", version, about = "Bearing fault diagnosis from shaft-mounted acceleration sensors")]
pub struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic stage; overrides the config file.
    #[arg(long, global = true, env = "VIBEDIAG_SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one synthetic recording set per fault class.
    Simulate(SimulateArgs),
    /// Convert a delimited text export into a recording CSV + sidecar.
    Import(ImportArgs),
    /// Locate torsional resonances in a recording's angular spectrum.
    Srs(SrsArgs),
    /// Window recordings and compute images and band features.
    Featurize(FeaturizeArgs),
    /// Assign train/validation/test membership and fit the feature scaler.
    Split(SplitArgs),
    /// Train a model on a split dataset.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// PCA variance curve and t-SNE map of the images.
    Embed(EmbedArgs),
    /// Write every image as a PGM/PPM file.
    ExportImages(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Seconds per recording.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Gaussian noise standard deviation on both channels.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Delimited text file with one sample per row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub label: FaultLabel,
    #[arg(long, default_value_t = crate::RIG_SAMPLE_RATE_HZ)]
    pub sample_rate: f64,
    #[arg(long, default_value_t = crate::RIG_RPM)]
    pub rpm: f64,
    /// Zero-based column(s) holding linear acceleration; repeat for a y axis.
    #[arg(long = "linear-column", required = true, num_args = 1..=2)]
    pub linear_columns: Vec<usize>,
    /// Zero-based column holding angular acceleration.
    #[arg(long)]
    pub angular_column: usize,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Leading rows to skip (headers, units).
    #[arg(long, default_value_t = 1)]
    pub skip_rows: usize,
    /// Recording id; defaults to the input file stem.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Args)]
pub struct SrsArgs {
    /// Recording CSV (sidecar alongside).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Directory of recording CSVs with sidecars.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// 1 for grayscale images, 3 for colormapped.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub channels: Option<u8>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Where the split copy of the dataset goes.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub stratified: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "hybrid")]
    pub branch: Branch,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Print one line per epoch.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Subset {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub subset: Subset,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Variance share the PCA stage keeps.
    #[arg(long)]
    pub variance: Option<f64>,
    #[arg(long)]
    pub max_points: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub perplexity: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Artifact {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    arguments: &'a [String],
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    artifacts: Vec<Artifact>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn collect_files(dir: &Path, base: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_files(&p, base, out)?;
        } else if p.file_name().is_some_and(|n| n != MANIFEST_FILE) {
            out.push(p.strip_prefix(base)?.to_path_buf());
        }
    }
    Ok(())
}

fn write_manifest(out: &Path, command: &str, arguments: &[String], cfg: &RunConfig) -> Result<()> {
    let mut files = Vec::new();
    collect_files(out, out, &mut files)?;
    let artifacts = files
        .into_iter()
        .map(|rel| {
            let bytes = fs::read(out.join(&rel))?;
            Ok(Artifact {
                path: rel.to_string_lossy().replace('\\', "/"),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        command,
        arguments,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        artifacts,
    };
    fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn load_recordings(dir: &Path) -> Result<Vec<Recording>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no recording CSVs in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| load_recording(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn load_dataset(dir: &Path) -> Result<ExampleSet> {
    ExampleSet::load(dir).with_context(|| format!("loading dataset from {}", dir.display()))
}

fn image_of(set: &ExampleSet, i: usize) -> SpectrumImage {
    let [h, w, c] = set.image_shape;
    SpectrumImage {
        height: h,
        width: w,
        channels: c,
        pixels: set.image(i).to_vec(),
        freq_max_hz: 0.0,
        recording_id: set.provenance[i].recording_id.clone(),
        start_index: set.provenance[i].start_index,
        label: Some(set.labels[i]),
    }
}

/// Seed for recording `r` of class `class` under run seed `seed`.
pub fn recording_seed(seed: u64, class: FaultLabel, r: usize) -> u64 {
    seed.wrapping_mul(1_000_003)
        .wrapping_add(class.index() as u64 * 1_000)
        .wrapping_add(r as u64)
}

fn simulate(a: &SimulateArgs, cfg: &mut RunConfig) -> Result<()> {
    if let Some(d) = a.duration {
        cfg.simulate.duration_s = d;
    }
    if let Some(n) = a.per_class {
        cfg.simulate.recordings_per_class = n;
    }
    if let Some(s) = a.noise {
        cfg.simulate.noise_sigma = s;
    }
    if cfg.simulate.recordings_per_class == 0 {
        bail!("per_class must be at least 1");
    }
    for class in FaultLabel::ALL {
        for r in 0..cfg.simulate.recordings_per_class {
            let spec = SyntheticSpec {
                duration_s: cfg.simulate.duration_s,
                noise_sigma: cfg.simulate.noise_sigma,
                ..SyntheticSpec::preset(class)
            };
            let rec = synthesize_recording(&spec, recording_seed(cfg.seed, class, r))?;
            save_recording(&rec, &a.out.join(format!("{}.csv", rec.id)))?;
        }
    }
    Ok(())
}

fn import(a: &ImportArgs) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(u8::try_from(a.delimiter).context("delimiter must be a single-byte character")?)
        .from_path(&a.input)
        .with_context(|| format!("opening {}", a.input.display()))?;
    let mut linear = vec![Vec::new(); a.linear_columns.len()];
    let mut angular = Vec::new();
    for (i, rec) in reader.records().enumerate().skip(a.skip_rows) {
        let rec = rec?;
        let cell = |col: usize| -> Result<f64> {
            let text = rec
                .get(col)
                .with_context(|| format!("line {}: no column {col}", i + 1))?;
            let v: f64 = text.parse().with_context(|| format!("line {}: bad number {text:?}", i + 1))?;
            if !v.is_finite() {
                bail!("line {}: non-finite value in column {col}", i + 1);
            }
            Ok(v)
        };
        for (ch, &col) in linear.iter_mut().zip(&a.linear_columns) {
            ch.push(cell(col)?);
        }
        angular.push(cell(a.angular_column)?);
    }
    let id = a.id.clone().unwrap_or_else(|| {
        a.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "recording".into())
    });
    let rec = Recording::new(id.clone(), a.sample_rate, a.rpm, a.label, linear, angular)?;
    save_recording(&rec, &a.out.join(format!("{id}.csv")))?;
    Ok(())
}

fn srs(a: &SrsArgs, cfg: &RunConfig) -> Result<()> {
    let rec = load_recording(&a.input)?;
    let spec = magnitude_spectrum_with(&rec.angular, rec.sample_rate_hz, cfg.featurize.bands.taper)?;
    fs::create_dir_all(&a.out)?;
    let mut csv_text = String::from("frequency_hz,magnitude\n");
    for (k, m) in spec.magnitudes.iter().enumerate() {
        let f = spec.frequency(k);
        if f >= cfg.peaks.search_lo_hz && f <= cfg.peaks.search_hi_hz {
            csv_text.push_str(&format!("{f},{m}\n"));
        }
    }
    fs::write(a.out.join("spectrum.csv"), csv_text)?;
    let report = find_torsional_peaks(&spec, &cfg.peaks)?;
    fs::write(a.out.join("srs.json"), serde_json::to_string_pretty(&report)?)?;
    let peaks: Vec<String> = report.peaks_hz.iter().map(|f| format!("{f:.1} Hz")).collect();
    println!("{}: torsional peaks at {}", rec.id, peaks.join(", "));
    Ok(())
}

fn featurize_cmd(a: &FeaturizeArgs, cfg: &mut RunConfig) -> Result<()> {
    if let Some(j) = a.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(c) = a.channels {
        if c == 2 {
            bail!("channels must be 1 or 3");
        }
        cfg.featurize.image.channels = c as usize;
    }
    let recs = load_recordings(&a.input)?;
    let set = featurize(&recs, &cfg.featurize, cfg.jobs)?;
    set.save(&a.out)?;
    println!("{} examples from {} recordings", set.len(), recs.len());
    Ok(())
}

fn print_split_table(set: &ExampleSet) {
    let s = set.split.as_ref().expect("split assigned");
    let (tr, va, te) = (
        set.class_counts(Some(&s.train)),
        set.class_counts(Some(&s.val)),
        set.class_counts(Some(&s.test)),
    );
    println!("{:16}{:>8}{:>8}{:>8}", "class", "train", "val", "test");
    for l in FaultLabel::ALL {
        let c = l.index();
        println!("{:16}{:>8}{:>8}{:>8}", l.display_name(), tr[c], va[c], te[c]);
    }
    println!("{:16}{:>8}{:>8}{:>8}", "Total", s.train.len(), s.val.len(), s.test.len());
}

fn split_cmd(a: &SplitArgs, cfg: &mut RunConfig) -> Result<()> {
    if a.stratified {
        cfg.split.stratified = true;
    }
    let mut set = load_dataset(&a.dataset)?;
    set.assign_split(&cfg.split)?;
    set.save(&a.out)?;
    print_split_table(&set);
    Ok(())
}

fn train_cmd(a: &TrainArgs, cfg: &mut RunConfig) -> Result<()> {
    if let Some(e) = a.epochs {
        cfg.train.max_epochs = e;
        cfg.train.patience = cfg.train.patience.min(e);
    }
    if let Some(p) = a.patience {
        cfg.train.patience = p;
    }
    if let Some(lr) = a.lr {
        cfg.train.learning_rate = lr;
    }
    let set = load_dataset(&a.dataset)?;
    let (tr, va, _) = set.splits()?;
    let mut model = a.branch.build(set.image_shape[2], cfg.seed)?;
    let verbose = a.verbose;
    let history = train_with_callback(&mut model, &tr, &va, &cfg.train, |r| {
        if verbose {
            println!(
                "epoch {:>3}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            );
        }
    })?;
    fs::create_dir_all(&a.out)?;
    let echo = serde_json::json!({ "branch": a.branch, "train": cfg.train, "dataset": a.dataset });
    save_checkpoint(&model, &a.out, echo)?;
    history.save_csv(&a.out.join("history.csv"))?;
    let best = history.best().expect("at least one epoch");
    println!(
        "{}: {} epochs, best epoch {} (val_loss {:.4}, val_acc {:.4})",
        a.branch,
        history.epochs.len(),
        history.best_epoch,
        best.val_loss,
        best.val_acc
    );
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let set = load_dataset(&a.dataset)?;
    let (mut model, _) = load_checkpoint(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let (tr, va, te) = set.splits()?;
    let data = match a.subset {
        Subset::Train => tr,
        Subset::Val => va,
        Subset::Test => te,
    };
    let metrics = evaluate(&mut model, &data)?;
    let report = metrics.report();
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("report.json"), report.to_json())?;
    fs::write(a.out.join("report.txt"), report.to_text())?;
    let mut buf = Vec::new();
    metrics.write_confusion_csv(&mut buf)?;
    fs::write(a.out.join("confusion.csv"), buf)?;
    print!("{}", report.to_text());
    if metrics.zero_division {
        eprintln!("warning: some classes have no true or no predicted examples; their scores are 0");
    }
    Ok(())
}

fn embed_cmd(a: &EmbedArgs, cfg: &mut RunConfig) -> Result<()> {
    if let Some(v) = a.variance {
        cfg.embed.pca_variance = v;
    }
    if let Some(m) = a.max_points {
        cfg.embed.tsne.max_points = m;
    }
    if let Some(i) = a.iterations {
        cfg.embed.tsne.iterations = i;
    }
    if let Some(p) = a.perplexity {
        cfg.embed.tsne.perplexity = p;
    }
    let set = load_dataset(&a.dataset)?;
    let rows: Vec<Vec<f64>> = (0..set.len()).map(|i| set.image(i).to_vec()).collect();
    let pca = pca_fit(&rows)?;
    fs::create_dir_all(&a.out)?;
    write_variance_csv(fs::File::create(a.out.join("variance.csv"))?, &pca)?;
    let k = pca.components_for_variance(cfg.embed.pca_variance)?;
    let reduced = pca_reduce(&pca, &rows, PcaTarget::Components(k))?;
    let res = tsne(&reduced, &cfg.embed.tsne)?;
    let ids: Vec<String> = res.indices.iter().map(|&i| set.provenance[i].key()).collect();
    let labels: Vec<String> = res.indices.iter().map(|&i| set.labels[i].name().to_string()).collect();
    write_embedding_csv(fs::File::create(a.out.join("embedding.csv"))?, &ids, &res.embedding, &labels)?;
    let mut kl = String::from("iteration,kl\n");
    for (i, v) in res.kl.iter().enumerate() {
        kl.push_str(&format!("{},{v}\n", i + 1));
    }
    fs::write(a.out.join("kl.csv"), kl)?;
    println!(
        "PCA: {k} components reach {:.3} of the variance; t-SNE on {} points, final KL {:.4}",
        cfg.embed.pca_variance,
        res.embedding.len(),
        res.kl.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn export_cmd(a: &ExportArgs) -> Result<()> {
    let set = load_dataset(&a.dataset)?;
    fs::create_dir_all(&a.out)?;
    let ext = if set.image_shape[2] == 3 { "ppm" } else { "pgm" };
    for i in 0..set.len() {
        let img = image_of(&set, i);
        let name = format!(
            "{}_{}_{}.{ext}",
            set.labels[i].name(),
            img.recording_id,
            img.start_index
        );
        img.save_pnm(&a.out.join(name))?;
    }
    println!("{} images written to {}", set.len(), a.out.display());
    Ok(())
}

fn out_dir(cmd: &Command) -> &Path {
    match cmd {
        Command::Simulate(a) => &a.out,
        Command::Import(a) => &a.out,
        Command::Srs(a) => &a.out,
        Command::Featurize(a) => &a.out,
        Command::Split(a) => &a.out,
        Command::Train(a) => &a.out,
        Command::Eval(a) => &a.out,
        Command::Embed(a) => &a.out,
        Command::ExportImages(a) => &a.out,
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Simulate(_) => "simulate",
        Command::Import(_) => "import",
        Command::Srs(_) => "srs",
        Command::Featurize(_) => "featurize",
        Command::Split(_) => "split",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Embed(_) => "embed",
        Command::ExportImages(_) => "export-images",
    }
}

/// Runs a parsed command line; `arguments` is echoed into the manifest.
pub fn execute(cli: &Cli, arguments: &[String]) -> Result<()> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(base.seed);
    let mut cfg = base.with_seed(seed);
    let out = out_dir(&cli.command);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match &cli.command {
        Command::Simulate(a) => simulate(a, &mut cfg)?,
        Command::Import(a) => import(a)?,
        Command::Srs(a) => srs(a, &cfg)?,
        Command::Featurize(a) => featurize_cmd(a, &mut cfg)?,
        Command::Split(a) => split_cmd(a, &mut cfg)?,
        Command::Train(a) => train_cmd(a, &mut cfg)?,
        Command::Eval(a) => eval_cmd(a)?,
        Command::Embed(a) => embed_cmd(a, &mut cfg)?,
        Command::ExportImages(a) => export_cmd(a)?,
    }
    write_manifest(out, command_name(&cli.command), arguments, &cfg)
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, &args[1..]) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["vibediag", "frobnicate"]), 2);
        assert_eq!(run(["vibediag", "train", "--branch", "both", "--dataset", "x", "--out", "y"]), 2);
        assert_eq!(run(["vibediag", "--help"]), 0);
    }

    #[test]
    fn stage_failure_exits_1() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing");
        let out = dir.path().join("o");
        assert_eq!(
            run(["vibediag", "eval", "--dataset", missing.to_str().unwrap(), "--model", "m", "--out", out.to_str().unwrap()]),
            1
        );
    }

    #[test]
    fn digest_is_standard() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
