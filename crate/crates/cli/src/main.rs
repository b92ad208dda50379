//! Command-line front end: simulate datasets, run the pipeline, evaluate runs
//! and compare reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use infrafuse::config::{Family, Mode, Overrides, RunConfig, RunConfigFile, Variant};
use infrafuse::error::{Error, Result};
use infrafuse::eval::{compare, ComparisonRow, EvalParams, EvalReport};
use infrafuse::io::{self, Dataset};
use infrafuse::pipeline::{evaluate_run, run_pipeline, simulate, EvalInputs, RunInfo, Stage};

#[derive(Parser)]
#[command(name = "infrafuse", version, about = "Multi-sensor LiDAR detection and tracking toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write per-sensor frames, ground truth and a manifest.
    Simulate(SimulateArgs),
    /// Run preprocessing, detection, tracking and refinement on a dataset.
    Pipeline(PipelineArgs),
    /// Evaluate tracks against ground truth and write a report with heat maps.
    Evaluate(EvaluateArgs),
    /// Print a metric-by-metric delta table of two evaluation reports.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory; defaults to a hashed directory under the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset variant tag, e.g. `n-f`.
    #[arg(long)]
    variant: Option<Variant>,
    /// Per-point noise standard deviation, meters.
    #[arg(long)]
    point_sigma: Option<f64>,
    /// Sensor position noise standard deviation, meters.
    #[arg(long)]
    pos_sigma: Option<f64>,
    /// Sensor rotation noise standard deviation, radians.
    #[arg(long)]
    rot_sigma: Option<f64>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Dataset manifest written by `simulate`.
    #[arg(long)]
    manifest: PathBuf,
    /// Run configuration (TOML). Without it the variant follows the dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root directory of run directories.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Sensor processed in single mode.
    #[arg(long)]
    sensor: Option<u32>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    /// First stage to run; earlier stages are read from the run directory.
    #[arg(long, default_value = "preprocess")]
    from: Stage,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Pipeline run directory.
    #[arg(long, conflicts_with_all = ["tracks", "refined", "detections", "frames"], required_unless_present = "tracks")]
    run: Option<PathBuf>,
    /// Tracks CSV.
    #[arg(long)]
    tracks: Option<PathBuf>,
    /// Refined trajectories CSV.
    #[arg(long)]
    refined: Option<PathBuf>,
    /// Detections CSV, used for average precision.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Directory of pre-processed frames, used for the heat maps.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Stream id of the frames in `--frames` (0 for fused).
    #[arg(long, default_value_t = 0)]
    stream: u32,
    /// Frame rate of the tracks, Hz.
    #[arg(long, default_value_t = 20.0)]
    rate: f64,
    /// Ground-truth CSV.
    #[arg(long)]
    gt: PathBuf,
    /// Configuration supplying the evaluation parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report directory; defaults to `<run>/eval` or `eval`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// First report (a report.json or a directory holding one), e.g. single sensor.
    #[arg(long)]
    first: PathBuf,
    /// Second report, e.g. fused.
    #[arg(long)]
    second: PathBuf,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_file(path: Option<&Path>) -> Result<RunConfigFile> {
    path.map_or_else(|| Ok(RunConfigFile::default()), RunConfigFile::load)
}

fn resolve(file: RunConfigFile, path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    RunConfig::resolve(file, path.and_then(Path::parent), overrides)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let overrides = Overrides {
        variant: a.variant,
        seed: a.seed,
        point_sigma: a.point_sigma,
        pos_sigma: a.pos_sigma,
        rot_sigma: a.rot_sigma,
        ..Overrides::default()
    };
    let cfg = resolve(load_file(a.config.as_deref())?, a.config.as_deref(), &overrides)?;
    let (path, m) = simulate(&cfg, a.out.as_deref())?;
    info!("simulated {} frames from {} sensors", m.frame_count, m.sensors.len());
    println!("{}", path.display());
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let ds = Dataset::load(&a.manifest)?;
    let mut file = load_file(a.config.as_deref())?;
    if a.variant.is_none() && file.variant.is_none() {
        let family: Family = ds.manifest.variant.parse()?;
        file.variant = Some(Variant::new(family, a.mode.unwrap_or(Mode::Fused)));
    }
    let overrides = Overrides {
        variant: a.variant,
        mode: a.mode,
        seed: a.seed,
        sensor: a.sensor,
        output_dir: a.out,
        ..Overrides::default()
    };
    let cfg = resolve(file, a.config.as_deref(), &overrides)?;
    let art = run_pipeline(&a.manifest, &cfg, a.from, None)?;
    println!("run      {}", art.dir.display());
    println!("tracks   {}", art.tracks.display());
    println!("refined  {}", art.refined.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn print_summary(r: &EvalReport) {
    if let Some(o) = &r.overall {
        println!(
            "MOTA {:.4}  MOTP {}  FP {}  FN {}  IDSW {}",
            o.mota,
            fmt_opt(o.motp_distance),
            o.false_positives,
            o.misses,
            o.id_switches
        );
    }
    let d = &r.deviation.all;
    println!(
        "d_T position {} m  velocity {} m/s  acceleration {} m/s^2  ({} trajectories, {} frames)",
        fmt_opt(d.position),
        fmt_opt(d.velocity),
        fmt_opt(d.acceleration),
        d.trajectories,
        d.frames
    );
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let (inputs, stored, default_out) = match &a.run {
        Some(run) => {
            let inputs = EvalInputs::from_run(run, &a.gt)?;
            let info: RunInfo = io::read_json(&run.join("run.json"))?;
            (inputs, Some(info.config.eval), run.join("eval"))
        }
        None => {
            let tracks = a.tracks.clone().expect("clap requires --tracks without --run");
            let inputs = EvalInputs {
                gt: a.gt.clone(),
                tracks,
                refined: a.refined.clone(),
                detections: a.detections.clone(),
                frames: a.frames.clone(),
                stream_id: a.stream,
                rate: a.rate,
            };
            (inputs, None, PathBuf::from("eval"))
        }
    };
    if !inputs.gt.is_file() {
        return Err(Error::validation(format!("ground-truth file {} not found", inputs.gt.display())));
    }
    let params: EvalParams = match &a.config {
        Some(p) => RunConfig::load(p, &Overrides::default())?.eval,
        None => stored.unwrap_or_default(),
    };
    let out = a.out.unwrap_or(default_out);
    let report = evaluate_run(&inputs, &params, &out)?;
    print_summary(&report);
    println!("report   {}", out.join("report.json").display());
    Ok(())
}

fn load_report(path: &Path) -> Result<EvalReport> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    io::read_json(&file)
}

fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut out = String::from("metric,first,second,delta\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.metric, cell(r.first), cell(r.second), cell(r.delta)));
    }
    out
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let rows = compare(&load_report(&a.first)?, &load_report(&a.second)?);
    println!("{:<28} {:>10} {:>10} {:>10}", "metric", "first", "second", "delta");
    for r in &rows {
        println!("{:<28} {:>10} {:>10} {:>10}", r.metric, fmt_opt(r.first), fmt_opt(r.second), fmt_opt(r.delta));
    }
    if let Some(out) = &a.out {
        io::write_text(out, &comparison_csv(&rows))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
