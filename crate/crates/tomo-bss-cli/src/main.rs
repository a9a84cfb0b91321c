//! Command-line front end: stack simulation, file-based separation, and the
//! canned Monte Carlo studies (amplitude ratio, scatterer distance, SNR,
//! kernel parameters), each written out as CSV next to a JSON sidecar with
//! the fully resolved experiment description.
//!
//! Exit codes: 0 success (including "nothing found"), 2 usage or
//! configuration error, 3 data or runtime error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tomo_bss::covariance::{sample_covariance, sign_covariance};
use tomo_bss::estimation::{periodogram, PeriodogramGrid};
use tomo_bss::experiment::{
    phase_bias_csv, phase_bias_rows, rows_to_csv, run_experiment, EstimatorSpec, ExperimentKind,
    ExperimentSpec,
};
use tomo_bss::io::{read_matrix, write_matrix};
use tomo_bss::kernel::Bandwidth;
use tomo_bss::separation::estimate_model_order;
use tomo_bss::{
    default_geometry, draw_stack, separate_scatterers, AcquisitionGeometry, Error, KernelSpec,
    Result, ScattererParams, SeparationConfig, SeparationResult, SimulationConfig,
};

#[derive(Parser)]
#[command(
    name = "tomo-bss",
    version,
    about = "Blind scatterer separation for multibaseline InSAR layover stacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a coherent observation stack and store it as a binary matrix
    Simulate(SimulateArgs),
    /// Separate scatterers from a stack or covariance file
    Separate(SeparateArgs),
    /// Mean angular bias against the amplitude ratio of the two scatterers
    SweepAmplitude(SweepArgs),
    /// Mean angular bias against the scatterer distance in Rayleigh units
    SweepDistance(SweepArgs),
    /// Mean angular bias against the look-SNR product in dB
    SweepSnr(SweepSnrArgs),
    /// Ensemble coherence against Gaussian width and polynomial order
    SweepKernel(SweepArgs),
    /// Run every canned study and write one CSV per table
    FigureData(FigureDataArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene description (SimulationConfig JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the seed stored in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Destination file for the binary stack
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KernelArgs {
    /// Kernel family
    #[arg(long, value_enum, default_value_t = KernelKind::Gaussian)]
    kernel: KernelKind,
    /// Gaussian bandwidth multiplier (nearest-neighbor rule)
    #[arg(long, default_value_t = 5.0)]
    beta: f64,
    /// Polynomial order
    #[arg(long, default_value_t = 1.3)]
    order: f64,
    /// Explicit Gaussian bandwidth, replacing the multiplier rule
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelKind {
    Gaussian,
    Poly,
    Linear,
}

impl KernelArgs {
    fn to_kernel_spec(&self) -> Result<KernelSpec> {
        let spec = match self.kernel {
            KernelKind::Gaussian => match self.sigma {
                Some(s) => KernelSpec::Gaussian {
                    bandwidth: Bandwidth::Explicit(s),
                },
                None => KernelSpec::gaussian(self.beta),
            },
            KernelKind::Poly => KernelSpec::polynomial(self.order),
            KernelKind::Linear => KernelSpec::Linear,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Estimator for the sweep studies, where results are compared against
    /// plain PCA. Only the kernel families with a sweepable parameter make
    /// sense here.
    fn to_estimator(&self) -> Result<EstimatorSpec> {
        if self.sigma.is_some() {
            return Err(Error::invalid(
                "--sigma applies to `separate` only; sweeps use the bandwidth multiplier",
            ));
        }
        match self.kernel {
            KernelKind::Gaussian => Ok(EstimatorSpec::KpcaGaussian { beta: self.beta }),
            KernelKind::Poly => Ok(EstimatorSpec::KpcaPoly { order: self.order }),
            KernelKind::Linear => Err(Error::invalid(
                "the linear kernel reproduces plain PCA; sweep gaussian or poly instead",
            )),
        }
    }
}

#[derive(Args)]
struct SeparateArgs {
    /// Stack (N×M) or covariance (N×N) in the binary matrix format
    input: PathBuf,
    /// Acquisition geometry JSON; defaults to the nine-image reference array
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Upper bound on the number of extracted scatterers
    #[arg(long, default_value_t = 2)]
    kmax: usize,
    /// Stop when the next intensity falls below this fraction of tr(C)/N
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Skip kernel centering
    #[arg(long)]
    no_center: bool,
    /// Build the covariance from per-look normalized columns (stack input)
    #[arg(long)]
    robust: bool,
    /// Look count for covariance inputs, enabling model-order selection;
    /// stack inputs take it from the column count
    #[arg(long)]
    looks: Option<usize>,
    /// Quadratic interpolation of the periodogram peak
    #[arg(long)]
    refine_peak: bool,
    /// Also write the JSON report to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Full experiment description (JSON); replaces the canned protocol
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo runs per grid point
    #[arg(long)]
    runs: Option<usize>,
    /// Directory for the CSV and its spec sidecar
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args)]
struct SweepSnrArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Looks per run; also the M converting the dB axis to per-look SNR
    #[arg(long)]
    looks: Option<usize>,
    /// M·SNR axis in dB
    #[arg(long, value_delimiter = ',')]
    msnr: Option<Vec<f64>>,
}

#[derive(Args)]
struct FigureDataArgs {
    /// Override the base seed of every study
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo runs per grid point
    #[arg(long)]
    runs: Option<usize>,
    /// Directory for the CSV tables
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Separate(args) => run_separate(args),
        Command::SweepAmplitude(args) => run_sweep(args, SweepFamily::Amplitude),
        Command::SweepDistance(args) => run_sweep(args, SweepFamily::Distance),
        Command::SweepSnr(args) => run_sweep_snr(args),
        Command::SweepKernel(args) => run_sweep(args, SweepFamily::Kernel),
        Command::FigureData(args) => run_figure_data(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidInput(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

/// stdout writer that treats a closed pipe as a normal end of output
/// instead of a panic, so `tomo-bss ... | head` behaves.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        other => Ok(other?),
    }
}

/// Config files are part of the invocation: failing to read one is a usage
/// error, reported with its path.
fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))
}

fn init_threads() {
    if let Ok(raw) = std::env::var("TOMO_BSS_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring TOMO_BSS_THREADS={raw}: expected a positive integer"),
        }
    }
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let mut config: SimulationConfig = serde_json::from_str(&read_config(&args.config)?)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let stack = draw_stack(&config)?;
    write_matrix(&args.out, &stack)?;
    emit(&format!(
        "wrote {}×{} stack (seed {}) to {}",
        stack.nrows(),
        stack.ncols(),
        config.seed,
        args.out.display()
    ))?;
    Ok(())
}

/// JSON report of a file separation: per-image steering phases, intensity,
/// and periodogram elevation per estimate, plus loop diagnostics.
#[derive(Serialize)]
struct SeparationReport {
    channels: usize,
    looks: Option<usize>,
    model_order: Option<usize>,
    estimates: Vec<EstimateReport>,
    residual_trace: f64,
    iterations: usize,
    noise_floor: Option<f64>,
    /// Columns dropped by the normalized covariance (zero-norm looks).
    skipped_looks: Option<usize>,
}

#[derive(Serialize)]
struct EstimateReport {
    intensity: f64,
    phases_rad: Vec<f64>,
    elevation_m: f64,
    peak_coherence: f64,
}

fn run_separate(args: SeparateArgs) -> Result<()> {
    let geom = match &args.config {
        Some(path) => serde_json::from_str::<AcquisitionGeometry>(&read_config(path)?)?,
        None => default_geometry(),
    };
    geom.validate()?;

    let data = read_matrix(&args.input).map_err(|e| match e {
        Error::Io(io) => Error::format(format!("{}: {io}", args.input.display())),
        other => other,
    })?;
    let mut skipped = None;
    let mut looks = args.looks;
    let cov = if data.nrows() == data.ncols() {
        // square files are covariances by convention; --robust only shapes
        // how a stack is reduced
        data
    } else {
        looks = looks.or(Some(data.ncols()));
        if args.robust {
            let (c, dropped) = sign_covariance(&data)?;
            skipped = Some(dropped);
            c
        } else {
            sample_covariance(&data)?
        }
    };
    if cov.nrows() != geom.n() {
        return Err(Error::invalid(format!(
            "data has {} channels but the geometry expects {}",
            cov.nrows(),
            geom.n()
        )));
    }

    let mut config = SeparationConfig {
        kernel: args.kernel.to_kernel_spec()?,
        k_max: args.kmax,
        stop_threshold: args.threshold,
        center: !args.no_center,
        ..SeparationConfig::default()
    };
    let mut model_order = None;
    if let Some(m) = looks {
        let k = estimate_model_order(&cov, m, args.kmax)?;
        model_order = Some(k);
        config.k_max = k;
    }

    let result = if config.k_max == 0 {
        eprintln!("model-order selection found no scatterers; emitting an empty result");
        SeparationResult {
            estimates: Vec::new(),
            residual: cov.clone(),
            iterations: 0,
            noise_floor: None,
        }
    } else {
        separate_scatterers(&cov, &config)?
    };
    if result.estimates.is_empty() && config.k_max > 0 {
        eprintln!("no component above the intensity threshold; emitting an empty result");
    }

    let mut grid = PeriodogramGrid::default_for(&geom)?;
    grid.refine_peak = args.refine_peak;
    let estimates = result
        .estimates
        .iter()
        .map(|est| {
            let peak = periodogram(&est.steering, &geom, &grid)?;
            Ok(EstimateReport {
                intensity: est.intensity,
                phases_rad: est.steering.iter().map(|z| z.arg()).collect(),
                elevation_m: peak.elevation_m,
                peak_coherence: peak.coherence,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = SeparationReport {
        channels: cov.nrows(),
        looks,
        model_order,
        estimates,
        residual_trace: result.residual.trace().re,
        iterations: result.iterations,
        noise_floor: result.noise_floor,
        skipped_looks: skipped,
    };
    let json = serde_json::to_string_pretty(&report)?;
    emit(&json)?;
    if let Some(path) = &args.out {
        fs::write(path, json)?;
    }
    Ok(())
}

enum SweepFamily {
    Amplitude,
    Distance,
    Kernel,
}

/// Reference scene: two scatterers in the same cell, first at 40 m.
fn reference_pair(second_elev: f64, second_amp: f64, looks: usize, seed: u64) -> SimulationConfig {
    SimulationConfig {
        geometry: default_geometry(),
        scatterers: vec![
            ScattererParams::new(40.0, 1.0),
            ScattererParams::new(second_elev, second_amp),
        ],
        noise_power: 0.0,
        looks,
        seed,
    }
}

fn steps(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    // snap away accumulation dust so grid values print as entered
    (0..=n)
        .map(|i| ((from + i as f64 * step) * 1e10).round() / 1e10)
        .collect()
}

fn canned_spec(family: &SweepFamily, estimator: EstimatorSpec) -> ExperimentSpec {
    let one_rayleigh = 40.0 + 27.3;
    let (kind, base) = match family {
        SweepFamily::Amplitude => (
            ExperimentKind::AmplitudeSweep {
                ratios: steps(1.0, 2.0, 0.1),
            },
            reference_pair(one_rayleigh, 1.0, 900, 42),
        ),
        SweepFamily::Distance => (
            ExperimentKind::DistanceSweep {
                rayleigh: steps(0.3, 2.0, 0.1),
            },
            reference_pair(80.0, 1.0, 900, 42),
        ),
        SweepFamily::Kernel => (
            ExperimentKind::KernelSweep {
                betas: vec![1.0, 2.0, 3.0, 5.0, 7.0, 10.0],
                orders: vec![1.1, 1.2, 1.3, 1.4, 1.7, 2.0, 2.5],
            },
            reference_pair(one_rayleigh, 1.0 / 1.2, 900, 42),
        ),
    };
    ExperimentSpec {
        kind,
        base,
        estimators: vec![EstimatorSpec::Pca, estimator],
        runs: 200,
        separation: SeparationConfig::default(),
    }
}

fn kind_label(kind: &ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::AmplitudeSweep { .. } => "sweep-amplitude",
        ExperimentKind::DistanceSweep { .. } => "sweep-distance",
        ExperimentKind::SnrSweep { .. } => "sweep-snr",
        ExperimentKind::KernelSweep { .. } => "sweep-kernel",
        ExperimentKind::SingleScene => "single-scene",
    }
}

fn load_or_default(
    config: &Option<PathBuf>,
    fallback: impl FnOnce() -> Result<ExperimentSpec>,
    expected: &'static str,
) -> Result<ExperimentSpec> {
    let spec = match config {
        Some(path) => serde_json::from_str::<ExperimentSpec>(&read_config(path)?)?,
        None => fallback()?,
    };
    let label = kind_label(&spec.kind);
    if label != expected {
        return Err(Error::invalid(format!(
            "config describes a {label} experiment, but this subcommand runs {expected}"
        )));
    }
    Ok(spec)
}

fn apply_overrides(spec: &mut ExperimentSpec, seed: Option<u64>, runs: Option<usize>) {
    if let Some(s) = seed {
        spec.base.seed = s;
    }
    if let Some(r) = runs {
        spec.runs = r;
    }
}

fn write_study(out_dir: &Path, name: &str, spec: &ExperimentSpec) -> Result<()> {
    let rows = run_experiment(spec)?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{name}.csv"));
    fs::write(&csv_path, rows_to_csv(&rows)?)?;
    fs::write(
        out_dir.join(format!("{name}.spec.json")),
        serde_json::to_string_pretty(spec)?,
    )?;
    emit(&format!("wrote {} ({} rows)", csv_path.display(), rows.len()))?;
    Ok(())
}

fn run_sweep(args: SweepArgs, family: SweepFamily) -> Result<()> {
    let expected = match family {
        SweepFamily::Amplitude => "sweep-amplitude",
        SweepFamily::Distance => "sweep-distance",
        SweepFamily::Kernel => "sweep-kernel",
    };
    let mut spec = load_or_default(
        &args.config,
        || Ok(canned_spec(&family, args.kernel.to_estimator()?)),
        expected,
    )?;
    apply_overrides(&mut spec, args.seed, args.runs);
    write_study(&args.out, expected, &spec)
}

fn run_sweep_snr(args: SweepSnrArgs) -> Result<()> {
    let looks = args.looks.unwrap_or(100);
    let mut spec = load_or_default(
        &args.sweep.config,
        || {
            let msnr = args.msnr.clone().unwrap_or_else(|| steps(0.0, 40.0, 5.0));
            Ok(ExperimentSpec {
                kind: ExperimentKind::SnrSweep {
                    msnr_db: msnr,
                    reference_looks: looks,
                },
                base: reference_pair(40.0 + 27.3, 1.0, looks, 42),
                estimators: vec![EstimatorSpec::Pca, args.sweep.kernel.to_estimator()?],
                runs: 200,
                separation: SeparationConfig::default(),
            })
        },
        "sweep-snr",
    )?;
    apply_overrides(&mut spec, args.sweep.seed, args.sweep.runs);
    write_study(&args.sweep.out, "sweep-snr", &spec)
}

fn run_figure_data(args: FigureDataArgs) -> Result<()> {
    let seed = args.seed.unwrap_or(42);
    let runs = args.runs.unwrap_or(200);
    fs::create_dir_all(&args.out)?;

    // eigenvector phase-bias profile across the baselines, exact covariance
    let table = phase_bias_rows(&reference_pair(80.0, 1.0, 0, seed), &[1.0, 2.0, 4.0])?;
    let path = args.out.join("phase-bias.csv");
    fs::write(&path, phase_bias_csv(&table)?)?;
    emit(&format!("wrote {} ({} rows)", path.display(), table.len()))?;

    let gaussian = EstimatorSpec::KpcaGaussian { beta: 5.0 };
    for family in [
        SweepFamily::Amplitude,
        SweepFamily::Distance,
        SweepFamily::Kernel,
    ] {
        let mut spec = canned_spec(&family, gaussian.clone());
        apply_overrides(&mut spec, Some(seed), Some(runs));
        let name = match family {
            SweepFamily::Amplitude => "sweep-amplitude",
            SweepFamily::Distance => "sweep-distance",
            SweepFamily::Kernel => "sweep-kernel",
        };
        write_study(&args.out, name, &spec)?;
    }

    let mut snr_spec = ExperimentSpec {
        kind: ExperimentKind::SnrSweep {
            msnr_db: steps(0.0, 40.0, 5.0),
            reference_looks: 100,
        },
        base: reference_pair(40.0 + 27.3, 1.0, 100, seed),
        estimators: vec![EstimatorSpec::Pca, gaussian],
        runs,
        separation: SeparationConfig::default(),
    };
    apply_overrides(&mut snr_spec, Some(seed), Some(runs));
    write_study(&args.out, "sweep-snr", &snr_spec)
}
