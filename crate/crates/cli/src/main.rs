mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lattice_hasimoto::brackets::{
    compatibility_all, hamilton_check, jacobi_all, table_fingerprint, verify_bracket_tables, BracketTable,
};
use lattice_hasimoto::dynamics::{
    conserved_report_al, conserved_report_spins, integrate_al, integrate_spins, sample_times, Boundary,
    IntegratorConfig, Model, SpinModel,
};
use lattice_hasimoto::experiments::{
    gibbs_invariance_experiment, truncation_convergence_experiment, truncation_convergence_seeds,
    uniqueness_probe, wn_invariance_experiment, EnsembleSpec,
};
use lattice_hasimoto::hasimoto::{alpha_from_theta_gamma, alphas_from_spins_frame, spins_from_alphas, theta_gamma_from_spins};
use lattice_hasimoto::lattice::{
    to_json_string, write_csv_diagnostics, write_trajectory, Beta, Mat3, RngStream, Rotation, SpinField, TrajectoryRecord,
    Window,
};
use lattice_hasimoto::sampling::{
    complete_frame, kernel_spectrum, sample_gibbs_chain, sample_haar_rotation, sample_white_noise,
};
use lattice_hasimoto::LatticeError;

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Lattice Heisenberg / Ablowitz-Ladik laboratory: samplers, the discrete
/// Hasimoto transform, integrators, bracket verification and Monte Carlo
/// invariance experiments.
#[derive(Parser, Debug)]
#[command(name = "lattice-hasimoto")]
struct Cli {
    /// Seed for all randomness; drawn from entropy and printed on stderr when omitted
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for ensembles and bracket checks (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// TOML file with a [global] table and one table per subcommand; flags on the command line win
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log level (off, error, warn, info, debug, trace)
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Measure {
    /// White noise on the amplitudes
    Wn,
    /// Gibbs measure on the spins
    Gibbs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    /// Spins to amplitudes
    Alpha,
    /// Amplitudes to spins
    Spins,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Parallel frames
    Frame,
    /// Curvature and torsion angles (spins to amplitudes only)
    Angles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Jacobi,
    Compatibility,
    Hamilton,
    Tables,
    All,
}

#[derive(clap::Args, Debug, Clone)]
struct Tolerances {
    /// Relative tolerance of the adaptive integrator
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    /// Absolute tolerance of the adaptive integrator
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    /// Largest integrator step
    #[arg(long, default_value_t = 0.05)]
    max_step: f64,
}

impl Tolerances {
    fn config(&self) -> Result<IntegratorConfig, LatticeError> {
        IntegratorConfig::new(self.rtol, self.atol, self.max_step)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one field from the white-noise or Gibbs measure
    Sample {
        /// Measure to sample
        #[arg(long, value_enum)]
        measure: Measure,
        /// Inverse temperature (positive)
        #[arg(long)]
        beta: f64,
        /// Window half-width: sites -K..K
        #[arg(short = 'K', long = "half-width", default_value_t = 64)]
        half_width: u32,
        /// Output JSON-lines file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the discrete Hasimoto transform to every record of a file
    Transform {
        /// Input JSON-lines file
        #[arg(long = "in")]
        input: PathBuf,
        /// Output JSON-lines file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Direction of the transform
        #[arg(long, value_enum)]
        to: Target,
        /// Formulation of the transform
        #[arg(long, value_enum, default_value = "frame")]
        method: Method,
        /// Start amplitude-to-spin frames from a Haar-random rotation drawn from the seed instead of the identity
        #[arg(long)]
        haar: bool,
    },
    /// Integrate the Ablowitz-Ladik, LHM or Heisenberg flow from the last record of a file
    Evolve {
        /// Flow to integrate (al needs an amplitude record, lhm and heis a spin record)
        #[arg(long)]
        model: Model,
        /// Input JSON-lines file; its last record is the initial state
        #[arg(long = "in")]
        input: PathBuf,
        /// Output trajectory (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Final time (negative integrates backwards)
        #[arg(long, allow_negative_numbers = true)]
        tfinal: f64,
        /// Number of equal output intervals
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Boundary condition: free or periodic
        #[arg(long, default_value = "free")]
        boundary: Boundary,
        /// CSV file receiving the conserved quantities at every output time
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Run the exact and numeric Poisson bracket checks
    Verify {
        /// Which checks to run
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Generators |n| <= radius for the triple checks; the Hamilton check uses sites -radius..radius
        #[arg(long, default_value_t = 3)]
        radius: u32,
        /// Random Gibbs configurations for the numeric table check
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Largest accepted numeric discrepancy
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// JSON report (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo invariance experiment for the white-noise or Gibbs measure
    Invariance {
        /// Measure whose invariance is tested
        #[arg(long, value_enum)]
        measure: Measure,
        /// Inverse temperature (positive)
        #[arg(long)]
        beta: f64,
        /// Window half-width: sites -K..K
        #[arg(short = 'K', long = "half-width", default_value_t = 64)]
        half_width: u32,
        /// Ensemble size
        #[arg(short = 'N', long = "members", default_value_t = 10_000)]
        members: usize,
        /// Final time
        #[arg(long, default_value_t = 1.0)]
        tfinal: f64,
        /// Comma-separated sample times in [0, tfinal]
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,1")]
        times: Vec<f64>,
        /// JSON report (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Weighted gap between nested truncations of one white-noise draw
    Converge {
        /// Inverse temperature (positive)
        #[arg(long)]
        beta: f64,
        /// Comma-separated increasing half-widths
        #[arg(long = "Ks", value_delimiter = ',', default_value = "8,16,32,64")]
        ks: Vec<u32>,
        /// Final time
        #[arg(long, default_value_t = 1.0)]
        tfinal: f64,
        /// Number of consecutive seeds starting at --seed; more than one also checks the median ratio
        #[arg(long, default_value_t = 1)]
        repeats: u64,
        /// JSON report (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Interior response to a perturbation at the right edge of the window
    Probe {
        /// Inverse temperature (positive)
        #[arg(long)]
        beta: f64,
        /// Window half-width: sites -K..K
        #[arg(short = 'K', long = "half-width", default_value_t = 64)]
        half_width: u32,
        /// Final time
        #[arg(long, default_value_t = 1.0)]
        tfinal: f64,
        /// Size of the edge perturbation
        #[arg(long, default_value_t = 1.0)]
        perturbation: f64,
        /// Largest accepted interior gap
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        /// JSON report (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Eigenvalues of the Gibbs transfer kernel
    Spectrum {
        /// Inverse temperature (positive)
        #[arg(long)]
        beta: f64,
        /// Largest harmonic degree
        #[arg(long, default_value_t = 8)]
        lmax: usize,
    },
}

enum Failure {
    Usage(String),
    Lattice(LatticeError),
}

impl From<LatticeError> for Failure {
    fn from(e: LatticeError) -> Self {
        Failure::Lattice(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lattice(e.into())
    }
}

fn exit_code(e: &LatticeError) -> u8 {
    match e {
        LatticeError::Ensemble { source, .. } => exit_code(source),
        LatticeError::Numerical(_)
        | LatticeError::Integration { .. }
        | LatticeError::Degeneracy { .. }
        | LatticeError::Resolution(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn command() -> clap::Command {
    let version = format!("{} (bracket tables {})", env!("CARGO_PKG_VERSION"), table_fingerprint());
    Cli::command().version(version)
}

fn parse(args: Vec<OsString>) -> Result<Cli, clap::Error> {
    let cmd = command();
    // lenient first pass: required flags may still come from the config file
    let loose = cmd.clone().ignore_errors(true).try_get_matches_from(&args)?;
    let mut all = args;
    if let Some(path) = loose.get_one::<PathBuf>("config") {
        let extra = config::extra_args(path, &loose)
            .map_err(|msg| cmd.clone().error(clap::error::ErrorKind::ValueValidation, msg))?;
        all.extend(extra);
    }
    let matches = cmd.try_get_matches_from(all)?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).init();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lattice(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut text = to_json_string(value)?;
    text.push('\n');
    emit(out, &text)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Sample { measure, beta, half_width, out } => {
            let beta = Beta::new(beta)?;
            let mut rng = RngStream::new(resolve_seed(seed), 0);
            let w = Window::symmetric(half_width);
            let line = match measure {
                Measure::Wn => TrajectoryRecord::Al(0.0, sample_white_noise(beta, w, &mut rng)),
                Measure::Gibbs => TrajectoryRecord::Spin(0.0, sample_gibbs_chain(beta, w, &mut rng)),
            }
            .to_line();
            emit(out.as_deref(), &(line + "\n"))?;
            Ok(true)
        }
        Command::Transform { input, out, to, method, haar } => {
            let records = TrajectoryRecord::read_all(std::fs::File::open(&input)?)?;
            let o = if haar {
                sample_haar_rotation(&mut RngStream::new(resolve_seed(seed), 0))
            } else {
                Rotation::identity()
            };
            let mut text = String::new();
            for r in records {
                let converted = match (r, to, method) {
                    (TrajectoryRecord::Spin(t, s), Target::Alpha, Method::Frame) => {
                        TrajectoryRecord::Al(t, alphas_from_spins_frame(&s, &frame_through(&s)?)?.0)
                    }
                    (TrajectoryRecord::Spin(t, s), Target::Alpha, Method::Angles) => {
                        TrajectoryRecord::Al(t, alpha_from_theta_gamma(&theta_gamma_from_spins(&s)?))
                    }
                    (TrajectoryRecord::Al(t, a), Target::Spins, Method::Frame) => {
                        TrajectoryRecord::Spin(t, spins_from_alphas(&a, &o).0)
                    }
                    (TrajectoryRecord::Al(..), Target::Spins, Method::Angles) => {
                        return Err(Failure::Usage("the angle formulation only maps spins to amplitudes".into()))
                    }
                    (r, _, _) => {
                        return Err(Failure::Usage(format!(
                            "record of kind `{}` cannot be transformed to {to:?}",
                            r.kind().as_str()
                        )))
                    }
                };
                text.push_str(&converted.to_line());
                text.push('\n');
            }
            emit(out.as_deref(), &text)?;
            Ok(true)
        }
        Command::Evolve { model, input, out, tfinal, samples, boundary, diagnostics, tol } => {
            let cfg = tol.config()?;
            if !tfinal.is_finite() {
                return Err(Failure::Usage(format!("final time must be finite, got {tfinal}")));
            }
            let records = TrajectoryRecord::read_all(std::fs::File::open(&input)?)?;
            let last = records.into_iter().last().ok_or_else(|| Failure::Usage("input file has no records".into()))?;
            let times = sample_times(tfinal, samples);
            let mut buf = Vec::new();
            let report = match (model, last) {
                (Model::Al, TrajectoryRecord::Al(_, a)) => {
                    let (traj, stats) = integrate_al(&a, boundary, &times, &cfg)?;
                    log::info!("{stats:?}");
                    write_trajectory(&mut buf, &traj)?;
                    conserved_report_al(&traj, boundary)
                }
                (Model::Lhm | Model::Heis, TrajectoryRecord::Spin(_, s)) => {
                    let sm = if model == Model::Lhm { SpinModel::Lhm } else { SpinModel::Heis };
                    let (traj, stats) = integrate_spins(&s, sm, boundary, &times, &cfg)?;
                    log::info!("{stats:?}");
                    write_trajectory(&mut buf, &traj)?;
                    conserved_report_spins(&traj, sm, boundary)?
                }
                (m, r) => {
                    return Err(Failure::Usage(format!(
                        "model {m:?} cannot evolve a record of kind `{}`",
                        r.kind().as_str()
                    )))
                }
            };
            emit(out.as_deref(), &String::from_utf8(buf).expect("UTF-8"))?;
            if let Some(path) = diagnostics {
                let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
                write_csv_diagnostics(&mut w, &report.rows())?;
                w.flush()?;
            }
            Ok(true)
        }
        Command::Verify { suite, radius, samples, tol, out } => verify(suite, radius, samples, tol, seed, out.as_deref()),
        Command::Invariance { measure, beta, half_width, members, tfinal, times, out, tol } => {
            let mut spec = EnsembleSpec::new(beta, half_width, members, tfinal, times, resolve_seed(seed))?;
            spec.integrator = tol.config()?;
            let report = match measure {
                Measure::Wn => wn_invariance_experiment(&spec)?,
                Measure::Gibbs => gibbs_invariance_experiment(&spec)?,
            };
            for v in report.failures() {
                eprintln!("FAIL {}: {} (target {}, tolerance {})", v.criterion, v.value, v.target, v.tolerance);
            }
            eprintln!("{} verdicts, {} failed", report.verdicts.len(), report.failures().len());
            emit_json(out.as_deref(), &report)?;
            Ok(report.passed())
        }
        Command::Converge { beta, ks, tfinal, repeats, out, tol } => {
            let beta = Beta::new(beta)?;
            let cfg = tol.config()?;
            let seed = resolve_seed(seed);
            if repeats <= 1 {
                let r = truncation_convergence_experiment(beta, &ks, tfinal, seed, &cfg)?;
                emit_json(out.as_deref(), &r)?;
                Ok(r.strictly_decreasing)
            } else {
                let seeds: Vec<u64> = (0..repeats).map(|i| seed.wrapping_add(i)).collect();
                let s = truncation_convergence_seeds(beta, &ks, tfinal, &seeds, &cfg)?;
                emit_json(out.as_deref(), &s)?;
                Ok(s.all_decreasing && s.median_ratio < 0.5)
            }
        }
        Command::Probe { beta, half_width, tfinal, perturbation, threshold, out, tol } => {
            let r = uniqueness_probe(
                Beta::new(beta)?,
                Window::symmetric(half_width),
                tfinal,
                perturbation,
                resolve_seed(seed),
                &tol.config()?,
            )?;
            emit_json(out.as_deref(), &r)?;
            Ok(r.sup_interior_gap() <= threshold)
        }
        Command::Spectrum { beta, lmax } => {
            let s = kernel_spectrum(Beta::new(beta)?, lmax)?;
            emit_json(None, &json!({"beta": s.beta().value(), "eigenvalues": s.eigenvalues(), "gap": s.gap()}))?;
            Ok(true)
        }
    }
}

/// A rotation whose third column is the first spin.
fn frame_through(s: &SpinField) -> Result<Rotation, LatticeError> {
    let s0 = s.values()[0];
    let (a, b) = complete_frame(&s0);
    let m = Mat3::from_columns(&[a, b, s0]);
    let m = if m.determinant() < 0.0 { Mat3::from_columns(&[b, a, s0]) } else { m };
    Rotation::new(m)
}

fn verify(suite: Suite, radius: u32, samples: usize, tol: f64, seed: Option<u64>, out: Option<&Path>) -> Result<bool, Failure> {
    let all = suite == Suite::All;
    let mut results = serde_json::Map::new();
    let mut ok = true;
    if all || suite == Suite::Jacobi {
        for (name, t) in [("jacobi_alpha", BracketTable::Alpha), ("jacobi_standard", BracketTable::Standard)] {
            let r = jacobi_all(t, radius)?;
            ok &= r.passed();
            eprintln!("{name}: {} triples, {} failures", r.triples_checked, r.failures.len());
            results.insert(name.into(), json!({"triples": r.triples_checked, "failures": r.failures.len(), "pass": r.passed()}));
        }
    }
    if all || suite == Suite::Compatibility {
        let r = compatibility_all(radius)?;
        ok &= r.passed();
        eprintln!("compatibility: {} triples, {} failures", r.triples_checked, r.failures.len());
        results.insert("compatibility".into(), json!({"triples": r.triples_checked, "failures": r.failures.len(), "pass": r.passed()}));
    }
    if all || suite == Suite::Hamilton {
        let r = hamilton_check(Window::symmetric(radius))?;
        ok &= r.passed();
        eprintln!("hamilton: {} cases, {} sums, {} failures", r.cases_checked, r.sums_checked, r.case_failures.len() + r.sum_failures.len());
        results.insert(
            "hamilton".into(),
            json!({"cases": r.cases_checked, "sums": r.sums_checked,
                   "failures": r.case_failures.len() + r.sum_failures.len(), "pass": r.passed()}),
        );
    }
    if all || suite == Suite::Tables {
        let r = verify_bracket_tables(samples, &mut RngStream::new(resolve_seed(seed), 0))?;
        let pass = r.passed(tol);
        ok &= pass;
        eprintln!("tables: {} rows, max discrepancy {:e}", r.rows.len(), r.max_discrepancy());
        let rows: Vec<_> = r.rows.iter().map(|x| json!({"name": x.name, "max_discrepancy": x.max_discrepancy})).collect();
        results.insert(
            "tables".into(),
            json!({"samples": r.samples, "resampled": r.resampled, "tolerance": tol,
                   "max_discrepancy": r.max_discrepancy(), "rows": rows, "pass": pass}),
        );
    }
    results.insert("fingerprint".into(), table_fingerprint().into());
    emit_json(out, &serde_json::Value::Object(results))?;
    Ok(ok)
}
