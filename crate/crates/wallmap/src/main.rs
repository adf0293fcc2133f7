use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use wallmap::bench::{self, BenchConfig, WallClock};
use wallmap::config::{Config, ModelName};
use wallmap::eval::evaluate;
use wallmap::export::{
    export_map_csv, export_map_svg, export_metrics_csv, export_truth_csv, read_truth_segments, read_walls,
};
use wallmap::replay::{open_replay, write_record, ReplayRecord};
use wallmap_core::pipeline::{Clock, NullClock, Pipeline};

/// Wall mapping from poses and depth scan rows.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario into a replay file and its ground truth.
    Simulate(SimulateArgs),
    /// Run the mapping pipeline over a replay.
    Map(MapArgs),
    /// Compare a map against ground truth.
    Eval(EvalArgs),
    /// Time the detector, association and EKF stages.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Range noise at 1 m, meters.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    frames: Option<usize>,
    /// Directory for `replay.txt` and `ground_truth.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClockKind {
    /// Measure stage durations.
    Wall,
    /// Report zero durations, for byte-identical metrics.
    Null,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    replay: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    sensor_model: Option<Model>,
    /// Association gate on the squared Mahalanobis distance.
    #[arg(long)]
    gate: Option<f64>,
    /// Detector RANSAC seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "wall")]
    clock: ClockKind,
    /// Ground-truth CSV drawn under the map in the SVG.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Directory for `map.csv`, `map.svg` and `metrics.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Largest closest-point distance counted as a match, meters.
    #[arg(long, default_value_t = 0.5)]
    gate: f64,
    /// Report file; stdout when unset.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    sensor_model: Option<Model>,
    #[arg(long, default_value_t = 31)]
    reps: usize,
    /// Table file; stdout when unset.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Paper,
    Hessian,
}

impl From<Model> for ModelName {
    fn from(m: Model) -> Self {
        match m {
            Model::Paper => ModelName::Paper,
            Model::Hessian => ModelName::Hessian,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = Config::load_or_default(args.config.as_deref())?;
    if let Some(s) = args.scenario {
        cfg.scenario.name = s;
    }
    if let Some(f) = args.frames {
        cfg.scenario.frames = Some(f);
    }
    if let Some(s) = args.seed {
        cfg.sensor.seed = s;
    }
    if let Some(s) = args.sigma {
        cfg.sensor.sigma = s;
    }
    if let Some(d) = args.dropout {
        cfg.sensor.dropout = d;
    }
    let sc = cfg.scenario()?;
    create_dir(&args.out)?;

    let path = args.out.join("replay.txt");
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let frames = sc.simulate(cfg.scenario.frames)?;
    for f in &frames {
        write_record(
            &mut w,
            &ReplayRecord {
                t: f.t,
                pose: f.pose,
                scan: f.row.clone(),
            },
        )?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    export_truth_csv(&args.out.join("ground_truth.csv"), &sc.env)?;
    eprintln!("{}: {} frames, {} walls", sc.name, frames.len(), sc.env.segments().len());
    Ok(())
}

fn run_map(args: MapArgs) -> Result<()> {
    let mut cfg = Config::load_or_default(args.config.as_deref())?;
    if let Some(m) = args.sensor_model {
        cfg.mapper.sensor_model = m.into();
    }
    if let Some(g) = args.gate {
        cfg.association.gate = g;
    }
    if let Some(s) = args.seed {
        cfg.detector.rng_seed = s;
    }
    let pipeline_cfg = cfg.pipeline()?;
    let truth = args.truth.as_deref().map(read_truth_segments).transpose()?.unwrap_or_default();
    let reader = open_replay(&args.replay)?;
    create_dir(&args.out)?;
    match args.clock {
        ClockKind::Wall => map_with(Pipeline::new(pipeline_cfg, WallClock::default())?, reader, &truth, &args.out),
        ClockKind::Null => map_with(Pipeline::new(pipeline_cfg, NullClock)?, reader, &truth, &args.out),
    }
}

fn map_with<C: Clock>(
    mut pipeline: Pipeline<C>,
    reader: impl Iterator<Item = Result<ReplayRecord, wallmap::replay::ReplayError>>,
    truth: &[wallmap_core::sim::Segment],
    out: &Path,
) -> Result<()> {
    let mut metrics = Vec::new();
    let mut trajectory = Vec::new();
    for record in reader {
        let r = record?;
        let m = pipeline.process(&r.pose, &r.scan);
        if let Some(e) = &m.error {
            eprintln!("frame {} skipped: {e}", m.frame);
        }
        metrics.push(m);
        trajectory.push(r.pose);
    }
    let map = pipeline.into_map();
    export_map_csv(&out.join("map.csv"), &map)?;
    export_map_svg(&out.join("map.svg"), &map, &trajectory, truth)?;
    export_metrics_csv(&out.join("metrics.csv"), &metrics)?;
    let skipped = metrics.iter().filter(|m| m.error.is_some()).count();
    eprintln!("{} frames, {} landmarks, {} skipped", metrics.len(), map.len(), skipped);
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_eval(args: EvalArgs) -> Result<()> {
    anyhow::ensure!(args.gate >= 0.0, "--gate must be non-negative");
    let report = evaluate(&read_walls(&args.map)?, &read_walls(&args.truth)?, args.gate);
    let mut w = output(args.out.as_deref())?;
    write!(w, "{report}")?;
    w.flush()?;
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let mut cfg = Config::load_or_default(args.config.as_deref())?;
    if let Some(m) = args.sensor_model {
        cfg.mapper.sensor_model = m.into();
    }
    let pipeline_cfg = cfg.pipeline()?;
    anyhow::ensure!(args.reps >= 1, "--reps must be at least 1");
    let bench_cfg = BenchConfig {
        reps: args.reps,
        ..Default::default()
    };
    let detect = bench::bench_detector(&pipeline_cfg, &bench_cfg);
    let assoc = bench::bench_association(&pipeline_cfg, &bench_cfg);
    let ekf = bench::bench_ekf(&pipeline_cfg, &bench_cfg);
    let frame = bench::bench_frame(&pipeline_cfg, &bench_cfg);

    let mut w = output(args.out.as_deref())?;
    bench::write_table(&mut w, detect.iter().chain(&assoc).chain(&ekf).chain([&frame]))?;
    for (name, series) in [("detect", &detect), ("associate", &assoc), ("ekf", &ekf)] {
        if let Some(fit) = bench::fit_medians(series) {
            let (lo, hi) = fit.slope_interval(0.95);
            writeln!(
                w,
                "# {name}: slope {:e} s/unit (95% CI {lo:e}..{hi:e}), R² {:.4}",
                fit.slope, fit.r_squared
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Map(a) => run_map(a),
        Command::Eval(a) => run_eval(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
