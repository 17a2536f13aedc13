use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use iso_edf::rmt::{DEFAULT_ETA, DEFAULT_GRID_POINTS};
use iso_edf::{
    compare, default_grid, density_curve, ensemble_spectrum, population_measure, predict_edf,
    run_mc, ArrayNoiseConfig, ComparisonReport, FmcProblem, GridOptions, McConfig, ModelMode,
};

const THREADS_ENV: &str = "ISO_EDF_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "iso-edf",
    version,
    about = "Sample covariance eigenvalue densities for isotropic noise on a line array"
)]
struct Cli {
    /// Write zeros instead of wall-clock times so repeated runs are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ensemble covariance eigenvalues as `index,gamma`.
    Eigvals {
        #[command(flatten)]
        array: ArrayArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Reduced population measure as `location,weight`.
    Atoms {
        #[command(flatten)]
        array: ArrayArgs,
        #[arg(long, value_parser = positive_f64, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, value_enum, default_value_t = Mode::Reduced)]
        mode: Mode,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Limiting eigenvalue density as `x,f` behind a JSON header line.
    Predict {
        #[command(flatten)]
        array: ArrayArgs,
        #[arg(long, value_parser = positive_f64, allow_negative_numbers = true)]
        c: f64,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo sample covariance eigenvalues.
    Simulate {
        #[command(flatten)]
        array: ArrayArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Emit `bin_left,bin_right,height` instead of `trial,index,g`.
        #[arg(long)]
        histogram: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Predict and simulate, then write the agreement report as JSON.
    Compare {
        #[command(flatten)]
        array: ArrayArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Time reduced and full density evaluation on the same grid.
    Bench {
        #[command(flatten)]
        array: ArrayArgs,
        #[arg(long, value_parser = positive_f64, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS, value_parser = at_least_two)]
        grid_points: usize,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        repeats: u32,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct ArrayArgs {
    /// Sensor count.
    #[arg(long, default_value_t = 51, value_parser = at_least_two)]
    n: usize,
    /// Sensor spacing in wavelengths.
    #[arg(long, default_value_t = 0.5, value_parser = positive_f64)]
    zeta: f64,
}

impl ArrayArgs {
    fn config(self) -> anyhow::Result<ArrayNoiseConfig> {
        Ok(ArrayNoiseConfig::new(self.n, self.zeta)?)
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Mode::Reduced)]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS, value_parser = at_least_two)]
    grid_points: usize,
    #[arg(long, default_value_t = DEFAULT_ETA, value_parser = positive_f64)]
    eta: f64,
}

impl ModelArgs {
    fn grid(self) -> GridOptions {
        GridOptions {
            points: self.grid_points,
            eta: self.eta,
        }
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct SimArgs {
    /// Snapshots per trial.
    #[arg(long, value_parser = positive_usize, conflicts_with = "c")]
    snapshots: Option<usize>,
    /// Aspect ratio; snapshots become round(n / c).
    #[arg(long, value_parser = positive_f64, allow_negative_numbers = true, required_unless_present = "snapshots")]
    c: Option<f64>,
    #[arg(long, default_value_t = 500, value_parser = positive_usize)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 75, value_parser = positive_usize)]
    bins: usize,
}

impl SimArgs {
    fn snapshots(self, n: usize) -> usize {
        match (self.snapshots, self.c) {
            (Some(l), _) => l,
            (None, Some(c)) => ((n as f64 / c).round() as usize).max(1),
            (None, None) => unreachable!("clap requires one of --snapshots, --c"),
        }
    }

    fn config(self, array: ArrayNoiseConfig) -> anyhow::Result<McConfig> {
        let mc = McConfig::new(array, self.snapshots(array.n()), self.trials, self.seed)?;
        Ok(mc.with_bins(self.bins)?)
    }
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn open(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Reduced,
    Full,
}

impl From<Mode> for ModelMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Reduced => ModelMode::Reduced,
            Mode::Full => ModelMode::Full,
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 1 {
        Ok(v)
    } else {
        Err("must be at least 1".into())
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 2 {
        Ok(v)
    } else {
        Err(format!("must be at least 2, got {s}"))
    }
}

#[derive(Serialize)]
struct AtomRow {
    location: f64,
    weight: f64,
}

#[derive(Serialize)]
struct PredictHeader {
    atoms: Vec<AtomRow>,
    atom_count: usize,
    mode: ModelMode,
    c: f64,
    eta: f64,
    zero_mass: f64,
    wall_ms: f64,
}

#[derive(Serialize)]
struct BenchReport {
    n: usize,
    zeta: f64,
    c: f64,
    grid_points: usize,
    reduced_atoms: usize,
    full_atoms: usize,
    reduced_ms: f64,
    full_ms: f64,
    speedup: f64,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let timing = |ms: f64| if cli.no_timing { 0.0 } else { ms };
    match cli.command {
        Command::Eigvals { array, out } => {
            let spectrum = ensemble_spectrum(&array.config()?)?;
            let mut w = out.open()?;
            writeln!(w, "index,gamma")?;
            for (i, g) in spectrum.values().iter().enumerate() {
                writeln!(w, "{},{g}", i + 1)?;
            }
            w.flush()?;
        }
        Command::Atoms {
            array,
            c,
            mode,
            out,
        } => {
            let measure = population_measure(&array.config()?, c, mode.into())?;
            let mut w = out.open()?;
            writeln!(w, "location,weight")?;
            for a in measure.atoms() {
                writeln!(w, "{},{}", a.location, a.weight)?;
            }
            w.flush()?;
        }
        Command::Predict {
            array,
            c,
            model,
            out,
        } => {
            let pred = predict_edf(&array.config()?, c, model.mode.into(), model.grid())?;
            let header = PredictHeader {
                atoms: pred
                    .measure
                    .atoms()
                    .iter()
                    .map(|a| AtomRow {
                        location: a.location,
                        weight: a.weight,
                    })
                    .collect(),
                atom_count: pred.atom_count(),
                mode: pred.mode,
                c,
                eta: pred.density.eta,
                zero_mass: pred.density.zero_mass,
                wall_ms: timing(pred.wall_ms),
            };
            let mut w = out.open()?;
            writeln!(w, "# {}", serde_json::to_string(&header)?)?;
            writeln!(w, "x,f")?;
            for (x, f) in pred.density.grid.iter().zip(&pred.density.values) {
                writeln!(w, "{x},{f}")?;
            }
            w.flush()?;
        }
        Command::Simulate {
            array,
            sim,
            histogram,
            out,
        } => {
            let mc = sim.config(array.config()?)?;
            let emp = run_mc(&mc)?;
            let mut w = out.open()?;
            if histogram {
                writeln!(w, "bin_left,bin_right,height")?;
                let h = &emp.histogram;
                for (e, height) in h.edges.windows(2).zip(&h.heights) {
                    writeln!(w, "{},{},{height}", e[0], e[1])?;
                }
            } else {
                writeln!(w, "trial,index,g")?;
                for (t, values) in emp.per_trial.iter().enumerate() {
                    for (i, g) in values.iter().enumerate() {
                        writeln!(w, "{t},{},{g}", i + 1)?;
                    }
                }
            }
            w.flush()?;
        }
        Command::Compare {
            array,
            sim,
            model,
            out,
        } => {
            let cfg = array.config()?;
            let mc = sim.config(cfg)?;
            let c = mc.c();
            let pred = predict_edf(&cfg, c, model.mode.into(), model.grid())?;
            let start = Instant::now();
            let emp = run_mc(&mc)?;
            let mc_ms = start.elapsed().as_secs_f64() * 1e3;
            let agreement = compare(&pred.density, &emp);
            let mut report = ComparisonReport::assemble(&pred, &mc, agreement, timing(mc_ms));
            report.runtime_model_ms = timing(report.runtime_model_ms);
            let mut w = out.open()?;
            writeln!(w, "{}", report.to_json()?)?;
            w.flush()?;
        }
        Command::Bench {
            array,
            c,
            grid_points,
            repeats,
            out,
        } => {
            let cfg = array.config()?;
            let reduced = FmcProblem::new(population_measure(&cfg, c, ModelMode::Reduced)?, c)?;
            let full = FmcProblem::new(population_measure(&cfg, c, ModelMode::Full)?, c)?;
            let grid = default_grid(&full, grid_points)?;
            let time = |p: &FmcProblem| -> anyhow::Result<f64> {
                let mut best = f64::INFINITY;
                for _ in 0..repeats {
                    let start = Instant::now();
                    density_curve(p, &grid, DEFAULT_ETA)?;
                    best = best.min(start.elapsed().as_secs_f64() * 1e3);
                }
                Ok(best)
            };
            let (reduced_ms, full_ms) = (time(&reduced)?, time(&full)?);
            let report = BenchReport {
                n: cfg.n(),
                zeta: cfg.zeta(),
                c,
                grid_points,
                reduced_atoms: reduced.atom_count(),
                full_atoms: full.atom_count(),
                reduced_ms: timing(reduced_ms),
                full_ms: timing(full_ms),
                speedup: if cli.no_timing {
                    0.0
                } else {
                    full_ms / reduced_ms
                },
            };
            let mut w = out.open()?;
            writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
