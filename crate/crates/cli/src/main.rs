//! Batch CLI over the FM analysis pipeline: feature extraction,
//! information-gain ranking, SVM classification, degradation studies and
//! per-method throughput benchmarks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use finefm::evaluation::{run_experiment, write_fold_results, ExperimentParams, FeatureSet};
use finefm::extract::{extract, ChirpGrid, Method};
use finefm::features::{read_table, summarize, write_table, FeatureVector};
use finefm::ingest::{canonicalize, decode, load_manifest, AudioClip, ManifestEntry};
use finefm::parallel::ordered_map;
use finefm::robustness::{robustness_study, write_report, Degradation};
use finefm::selection::{rank_features, write_ranking, LabelledTable};
use finefm::spectral::{AnalysisConfig, EnergyBand};

#[derive(Parser)]
#[command(
    name = "finefm",
    about = "Fine-timescale FM feature extraction and evaluation for audio corpora",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-recording FM features from a manifest-labelled corpus.
    Extract(ExtractArgs),
    /// Rank features of a table by information gain against species labels.
    Select(SelectArgs),
    /// Run the cross-validated SVM classification experiment.
    Classify(ClassifyArgs),
    /// Measure feature robustness under audio degradation.
    Degrade(DegradeArgs),
    /// Benchmark per-method extraction time relative to audio duration.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct AnalysisArgs {
    /// Frame size in samples.
    #[arg(long, default_value_t = 512)]
    frame: usize,
    /// Hop size in samples (defaults to the frame size).
    #[arg(long)]
    hop: Option<usize>,
    /// Analysis band as LOW:HIGH in Hz.
    #[arg(long, default_value = "2000:10000")]
    band: String,
    /// Fraction of highest-energy frames kept by segmentation.
    #[arg(long, default_value_t = 0.10)]
    energy_fraction: f64,
    /// Rank segmentation energy over the full spectrum instead of the band.
    #[arg(long)]
    energy_full_band: bool,
    /// Disable sub-bin peak refinement.
    #[arg(long)]
    no_peak_interp: bool,
    /// Methods to run, comma separated subset of ss,rm,mp,dd.
    #[arg(long, default_value = "ss,rm,mp,dd")]
    methods: String,
    /// Worker threads for file-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Master seed for all randomized stages.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl AnalysisArgs {
    fn config(&self) -> anyhow::Result<AnalysisConfig> {
        let (lo, hi) = self
            .band
            .split_once(':')
            .context("--band must be LOW:HIGH")?;
        let band_low: f64 = lo.trim().parse().context("bad band low")?;
        let band_high: f64 = hi.trim().parse().context("bad band high")?;
        let cfg = AnalysisConfig {
            frame_size: self.frame,
            hop_size: self.hop.unwrap_or(self.frame),
            band_low,
            band_high,
            energy_fraction: self.energy_fraction,
            peak_interpolation: !self.no_peak_interp,
            energy_band: if self.energy_full_band {
                EnergyBand::FullBand
            } else {
                EnergyBand::InBand
            },
            ..AnalysisConfig::default()
        };
        cfg.validate(finefm::CANONICAL_RATE)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(cfg)
    }

    fn methods(&self) -> anyhow::Result<Vec<Method>> {
        let methods: Option<Vec<Method>> =
            self.methods.split(',').map(Method::parse).collect();
        let methods = methods.context("--methods must be a subset of ss,rm,mp,dd")?;
        if methods.is_empty() {
            bail!("--methods must not be empty");
        }
        Ok(methods)
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// Corpus manifest (CSV/TSV with `path` and `species` columns).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Also write per-recording atom dumps under OUT/atoms/.
    #[arg(long)]
    dump_atoms: bool,
    /// Exit 0 even when some files fail.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct SelectArgs {
    /// Feature table produced by `extract`.
    #[arg(long)]
    features: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Feature table produced by `extract`.
    #[arg(long)]
    features: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Methods to evaluate.
    #[arg(long, default_value = "ss,rm,mp,dd")]
    methods: String,
    /// Feature sets to evaluate (comma separated of FM,Freq,Top2,FMFreq).
    #[arg(long, default_value = "FM,Freq,Top2,FMFreq")]
    sets: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct DegradeArgs {
    /// Corpus manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// White-noise level in dBFS.
    #[arg(long, default_value_t = -45.0)]
    noise_db: f64,
    /// Skip the white-noise degradation.
    #[arg(long)]
    no_noise: bool,
    /// External codec round-trip template with {in}/{out} placeholders,
    /// e.g. the 64 kbps default of `finefm degrade --codec-cmd default`.
    #[arg(long)]
    codec_cmd: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Corpus manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    analysis: AnalysisArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Select(args) => cmd_select(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Degrade(args) => cmd_degrade(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// Decode and canonicalize one manifest entry.
fn load_clip(entry: &ManifestEntry) -> Result<AudioClip, String> {
    let clip = decode(&entry.path).map_err(|e| e.to_string())?;
    canonicalize(&clip).map_err(|e| e.to_string())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn cmd_extract(args: ExtractArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.analysis.config()?;
    let methods = args.analysis.methods()?;
    let entries = load_manifest(&args.manifest)?;
    std::fs::create_dir_all(&args.out)?;
    let atoms_dir = args.out.join("atoms");
    if args.dump_atoms {
        std::fs::create_dir_all(&atoms_dir)?;
    }
    let grid = ChirpGrid::default();

    struct Job<'a> {
        index: usize,
        entry: &'a ManifestEntry,
    }
    let jobs: Vec<Job> = entries
        .iter()
        .enumerate()
        .map(|(index, entry)| Job { index, entry })
        .collect();
    let outputs = ordered_map(&jobs, args.analysis.jobs, |job| {
        let clip = match load_clip(job.entry) {
            Ok(c) => c,
            Err(e) => return (None, vec![format!("{}: {e}", job.entry.path.display())]),
        };
        let mut warnings = Vec::new();
        let mut row = FeatureVector::new_missing(
            job.entry.path.display().to_string(),
            job.entry.species.clone(),
        );
        for &method in &methods {
            match extract(&clip, &cfg, &grid, method) {
                Ok(atoms) => {
                    row.set_method(method, summarize(&atoms, method));
                    if args.dump_atoms {
                        let name =
                            format!("{:04}_{}_{}.csv", job.index, sanitize(&clip.source_id), method);
                        if let Err(e) = dump_atoms(&atoms_dir.join(name), &atoms) {
                            warnings.push(format!("atom dump failed: {e}"));
                        }
                    }
                }
                Err(e) => warnings.push(format!(
                    "{} [{method}]: {e}",
                    job.entry.path.display()
                )),
            }
        }
        (Some(row), warnings)
    });

    let mut rows = Vec::new();
    let mut failures = 0usize;
    for (row, warnings) in outputs {
        for w in &warnings {
            eprintln!("warning: {w}");
        }
        match row {
            Some(r) => {
                if !warnings.is_empty() {
                    failures += 1;
                }
                rows.push(r);
            }
            None => failures += 1,
        }
    }
    let table_path = args.out.join("features.csv");
    write_table(&rows, &table_path)?;
    println!(
        "wrote {} rows ({} failures) to {}",
        rows.len(),
        failures,
        table_path.display()
    );
    Ok(if failures > 0 && !args.lenient {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn dump_atoms(path: &Path, atoms: &[finefm::Atom]) -> anyhow::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "time_s,frequency_hz,fm_rate_hz_s,magnitude,method")?;
    for a in atoms {
        writeln!(
            out,
            "{},{},{},{},{}",
            a.time_s, a.frequency_hz, a.fm_rate_hz_s, a.magnitude, a.method
        )?;
    }
    Ok(())
}

fn cmd_select(args: SelectArgs) -> anyhow::Result<ExitCode> {
    let rows = read_table(&args.features)?;
    let table = LabelledTable::new(rows)?;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("ranking.csv");
    write_ranking(&rank_features(&table), &path)?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(args: ClassifyArgs) -> anyhow::Result<ExitCode> {
    let rows = read_table(&args.features)?;
    let table = LabelledTable::new(rows)?;
    let methods: Option<Vec<Method>> = args.methods.split(',').map(Method::parse).collect();
    let methods = methods.context("--methods must be a subset of ss,rm,mp,dd")?;
    let sets: Option<Vec<FeatureSet>> = args.sets.split(',').map(FeatureSet::parse).collect();
    let sets = sets.context("--sets must be a subset of FM,Freq,Top2,FMFreq")?;
    if methods.is_empty() || sets.is_empty() {
        bail!("--methods and --sets must not be empty");
    }
    let params = ExperimentParams {
        folds: args.folds,
        seed: args.seed,
        jobs: args.jobs,
        ..ExperimentParams::default()
    };
    let (results, warnings) = run_experiment(&table, &methods, &sets, &params)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("folds.csv");
    write_fold_results(&results, &path)?;
    println!("wrote {} fold results to {}", results.len(), path.display());
    let expected = methods.len() * sets.len() * args.folds;
    Ok(if results.len() < expected {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_degrade(args: DegradeArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.analysis.config()?;
    let methods = args.analysis.methods()?;
    let entries = load_manifest(&args.manifest)?;
    std::fs::create_dir_all(&args.out)?;
    let mut degradations = Vec::new();
    if !args.no_noise {
        degradations.push(Degradation::WhiteNoise {
            level_dbfs: args.noise_db,
        });
    }
    if let Some(cmd) = &args.codec_cmd {
        let command = if cmd == "default" {
            finefm::robustness::default_codec_command()
        } else {
            cmd.clone()
        };
        degradations.push(Degradation::ExternalCodec { command });
    }
    if degradations.is_empty() {
        bail!("nothing to do: noise disabled and no codec command given");
    }

    let mut clips = Vec::new();
    let mut failures = 0usize;
    for entry in &entries {
        match load_clip(entry) {
            Ok(c) => clips.push(c),
            Err(e) => {
                eprintln!("warning: {}: {e}", entry.path.display());
                failures += 1;
            }
        }
    }
    if clips.is_empty() {
        bail!("no decodable clips in manifest");
    }
    let workdir = args.out.join("codec_work");
    std::fs::create_dir_all(&workdir)?;
    let report = robustness_study(
        &clips,
        &degradations,
        &cfg,
        &ChirpGrid::default(),
        &methods,
        args.analysis.seed,
        &workdir,
        args.analysis.jobs,
    )?;
    let _ = std::fs::remove_dir_all(&workdir);
    let path = args.out.join("robustness.csv");
    write_report(&report, &path)?;
    println!("wrote {}", path.display());
    Ok(if failures > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.analysis.config()?;
    let methods = args.analysis.methods()?;
    let entries = load_manifest(&args.manifest)?;
    if entries.is_empty() {
        bail!("empty manifest: nothing to benchmark");
    }
    // Decode and canonicalize up front; ingestion is timed separately from
    // the methods and single-threaded for comparability.
    let decode_start = Instant::now();
    let mut clips = Vec::new();
    for entry in &entries {
        clips.push(load_clip(entry).map_err(|e| anyhow::anyhow!(e))?);
    }
    let decode_s = decode_start.elapsed().as_secs_f64();
    let audio_s: f64 = clips.iter().map(|c| c.duration_s()).sum();
    if audio_s <= 0.0 {
        bail!("corpus has zero duration");
    }
    let grid = ChirpGrid::default();

    use std::io::Write;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("timings.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(out, "method,seconds,audio_seconds,ratio")?;
    writeln!(
        out,
        "decode,{:.4},{:.4},{:.4}",
        decode_s,
        audio_s,
        decode_s / audio_s
    )?;
    for &method in &methods {
        let start = Instant::now();
        for clip in &clips {
            let _ = extract(clip, &cfg, &grid, method);
        }
        let elapsed = start.elapsed().as_secs_f64();
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4}",
            method,
            elapsed,
            audio_s,
            elapsed / audio_s
        )?;
        println!("{method}: {:.4}x real time", elapsed / audio_s);
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}
