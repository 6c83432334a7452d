//! `mdatrack`: train, track, evaluate, generate scenarios and run the verification suites.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use log::info;

use mdatrack::affinity::AffinityParams;
use mdatrack::check;
use mdatrack::evalio::{
    clear_mot, frame_span, generate_scenario, load_mot, records_to_candidates, save_mot, trajectories_to_records,
    MotRecord, ScenarioSpec,
};
use mdatrack::kv::KeyValues;
use mdatrack::pipeline::{run_sequence, ConfidenceQuality, PipelineConfig};
use mdatrack::train::{labeled_frames, train, TrainConfig};
use mdatrack::{AffinityParams64, PipelineConfig64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Train,
    Track,
    Eval,
    Check,
    Synth,
}

#[derive(Debug, Parser)]
#[command(name = "mdatrack", version, about = "Multi-object tracking by differentiable multi-dimensional assignment")]
struct Args {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Detections (track) or hypotheses (eval), MOTChallenge text.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Ground truth, MOTChallenge text.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Output file, or directory for synth.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Keys accepted in a configuration file besides the module keys.
const EXTRA_KEYS: [&str; 1] = ["params_file"];

struct Settings {
    kv: KeyValues,
    seed: Option<u64>,
}

impl Settings {
    fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let kv = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                KeyValues::parse(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => KeyValues::default(),
        };
        let known: Vec<&str> = AffinityParams64::NAMES
            .iter()
            .chain(&PipelineConfig64::KEYS)
            .chain(&TrainConfig::<f64>::KEYS)
            .chain(&ScenarioSpec::KEYS)
            .chain(&EXTRA_KEYS)
            .copied()
            .collect();
        kv.expect_only(&known)?;
        Ok(Self { kv, seed })
    }

    /// Parameters from `params_file` if given, then inline keys over `base`.
    fn params(&self, base: AffinityParams64) -> Result<AffinityParams64> {
        let base = match self.kv.raw("params_file") {
            Some(p) => AffinityParams::load(Path::new(p)).with_context(|| format!("loading parameters {p}"))?,
            None => base,
        };
        Ok(base.merged_with(&self.kv)?)
    }

    fn pipeline(&self) -> Result<PipelineConfig64> {
        Ok(PipelineConfig::default().merged_with(&self.kv)?)
    }

    fn scenario(&self) -> Result<ScenarioSpec> {
        let mut spec = ScenarioSpec::default().merged_with(&self.kv)?;
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        Ok(spec)
    }
}

fn required<'a>(flag: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
    match value {
        Some(p) => Ok(p),
        None => Err(mdatrack::Error::InputValidation(format!("--{flag} is required in this mode")).into()),
    }
}

fn load(path: &Path) -> Result<Vec<MotRecord>> {
    load_mot(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_synth(args: &Args, settings: &Settings) -> Result<()> {
    let dir = required("out", &args.out)?;
    let spec = settings.scenario()?;
    let scenario = generate_scenario(&spec)?;
    std::fs::create_dir_all(dir)?;
    save_mot(&dir.join("gt.txt"), &scenario.gt)?;
    save_mot(&dir.join("det.txt"), &scenario.detections)?;
    std::fs::write(dir.join("scenario.txt"), spec.to_key_values().render())?;
    println!("wrote {} ground-truth and {} detection records to {}", scenario.gt.len(), scenario.detections.len(), dir.display());
    Ok(())
}

fn cmd_train(args: &Args, settings: &Settings) -> Result<()> {
    let out = required("out", &args.out)?;
    let gt = match &args.gt {
        Some(p) => load(p)?,
        None => generate_scenario(&settings.scenario()?)?.gt,
    };
    let frames = labeled_frames::<f64>(&gt, frame_span(&gt))?;
    let pipeline = settings.pipeline()?;
    let config = TrainConfig {
        seed: settings.seed.unwrap_or(0),
        gate: pipeline.gate,
        solver: pipeline.solver,
        ..TrainConfig::default()
    }
    .merged_with(&settings.kv)?;
    let init = settings.params(AffinityParams::untrained())?;
    let report = train(&frames, &init, &config)?;
    report.params.save(out)?;
    let curve = curve_path(out);
    report.save_curve(&curve)?;
    let (first, last) = (report.curve[0], report.curve[report.curve.len() - 1]);
    println!("loss {first:.6e} -> {last:.6e} over {} epochs ({} windows skipped)", config.epochs, report.skipped_windows);
    println!("parameters: {}  loss curve: {}", out.display(), curve.display());
    Ok(())
}

fn curve_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".curve");
    out.with_file_name(name)
}

fn cmd_track(args: &Args, settings: &Settings) -> Result<()> {
    let input = required("input", &args.input)?;
    let out = required("out", &args.out)?;
    let detections = load(input)?;
    let frames = records_to_candidates::<f64>(&detections, frame_span(&detections))?;
    let params = settings.params(AffinityParams::default())?;
    let trajectories = run_sequence(frames, &params, &settings.pipeline()?, &ConfidenceQuality::default())?;
    let records = trajectories_to_records(&trajectories);
    save_mot(out, &records)?;
    println!("{} trajectories, {} boxes written to {}", trajectories.len(), records.len(), out.display());
    Ok(())
}

fn cmd_eval(args: &Args) -> Result<()> {
    let gt = load(required("gt", &args.gt)?)?;
    let hyp = load(required("input", &args.input)?)?;
    let report = clear_mot(&gt, &hyp, 0.5);
    println!("{report}");
    if let Some(out) = &args.out {
        std::fs::write(out, format!("{report}\n"))?;
    }
    Ok(())
}

/// Returns whether every suite passed.
fn cmd_check(settings: &Settings) -> bool {
    let reports = check::run_all(settings.seed.unwrap_or(0));
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} of {} suites passed", reports.len() - failed, reports.len());
    failed == 0
}

fn run(args: &Args) -> Result<ExitCode> {
    let settings = Settings::load(args.config.as_deref(), args.seed)?;
    info!("mode {:?}", args.mode);
    match args.mode {
        Mode::Synth => cmd_synth(args, &settings)?,
        Mode::Train => cmd_train(args, &settings)?,
        Mode::Track => cmd_track(args, &settings)?,
        Mode::Eval => cmd_eval(args)?,
        Mode::Check => {
            if !cmd_check(&settings) {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// 2 for broken internal invariants, 1 for everything the user can fix.
fn exit_code(err: &anyhow::Error) -> u8 {
    use mdatrack::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(E::InternalInvariant(_) | E::Numeric(_) | E::UnresolvedVirtual { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match std::panic::catch_unwind(|| run(&args)) {
        Ok(Ok(code)) => code,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
        Err(_) => ExitCode::from(2),
    }
}
