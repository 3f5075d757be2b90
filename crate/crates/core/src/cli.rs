//! The `balanced-embed` command line.
//!
//! Exit codes: 0 success, 1 solver breakdown (outputs are still written),
//! 2 usage or configuration error, 3 unreadable or unwritable scheme file.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{sample_curve_points, CurveScheme, PointScheme, QuadratureGrid, QuadratureSettings, Scheme};
use crate::moment_map::{moment_matrix, report_from_residual, residual_t, BalanceReport};
use crate::projective::{GroupElement, ProjPoint};
use crate::schema::{read_scheme, write_scheme, ComplexMatrixJson};
use crate::solver::{
    continuity_run_with, gauge_normalize, newton_solve_at_t, ContinuityOptions, RunOutcome, Schedule, SolveStatus,
    SolverConfig,
};
use crate::stability::{
    chow_stability_sampled, chow_weight_points, find_general_position_subset, point_set_stable, roots_of_unity_config,
    StabilityVerdict, WeightVector,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BREAKDOWN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCHEME_FILE: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "balanced-embed",
    version,
    about = "Moment maps, balanced embeddings and stability of projective schemes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Flags override values read from `--config`.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Scheme description (JSON).
    #[arg(long)]
    pub input: PathBuf,
    /// Output file; reports go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON settings file with `quadrature`, `solver`, `schedule` and `seed` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Gauss-Legendre nodes in the radial direction of each chart.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=4096))]
    pub radial_order: Option<u64>,
    /// Equispaced nodes in the angular direction of each chart.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=16384))]
    pub angular_order: Option<u64>,
    /// Seed for every random choice.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    /// Absolute Frobenius tolerance on the residual [default: 1e-9 * volume].
    #[arg(long)]
    pub residual_tol: Option<f64>,
    /// Newton iteration cap per value of t.
    #[arg(long)]
    pub max_newton_iters: Option<usize>,
    /// Finite-difference step for the linearization.
    #[arg(long)]
    pub step_fd: Option<f64>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Moment matrix and balancing residual at the identity.
    Moment {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Newton solve for a balancing group element at t = 0.
    Balance {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Continuity path from t-start down to t-end; writes a CSV trace and a JSON trace beside it.
    Continuity {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Auxiliary point scheme. Sampled from the input curve when omitted.
        #[arg(long)]
        aux: Option<PathBuf>,
        /// Entry value of t [default: 10 * volume / auxiliary mass].
        #[arg(long)]
        t_start: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Step halvings allowed before a breakdown is declared.
        #[arg(long)]
        max_halvings: Option<usize>,
        /// Accept auxiliary points that do not lie on the input scheme.
        #[arg(long)]
        allow_aux_off_scheme: bool,
    },
    /// Stability verdict for a point scheme by the counting criterion and by sampled weights.
    Stability {
        #[command(flatten)]
        common: CommonArgs,
        /// Random frames tried by the sampled test.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Chow weights of a point scheme for a list of weight vectors.
    ChowWeight {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated weights summing to zero; repeat for several.
        #[arg(long = "lambda", required = true, allow_hyphen_values = true)]
        lambdas: Vec<String>,
    },
    /// Write reference inputs into a directory.
    MakeExample {
        /// Projective dimension.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=12))]
        n: u64,
        /// Target directory.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Settings file layout.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub quadrature: QuadratureSettings,
    pub solver: SolverConfig,
    pub schedule: Schedule,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
}

pub fn parse_config<I, T>(argv: I) -> std::result::Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    Ok(RunConfig { command: cli.command })
}

fn settings_for(common: &CommonArgs, solver: Option<&SolverArgs>) -> Result<Settings> {
    let mut s = match &common.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?
        }
        None => Settings::default(),
    };
    if let Some(r) = common.radial_order {
        s.quadrature.radial_order = r as usize;
    }
    if let Some(a) = common.angular_order {
        s.quadrature.angular_order = a as usize;
    }
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    if let Some(sv) = solver {
        if let Some(v) = sv.residual_tol {
            s.solver.residual_tol = Some(v);
        }
        if let Some(v) = sv.max_newton_iters {
            s.solver.max_newton_iters = v;
        }
        if let Some(v) = sv.step_fd {
            s.solver.step_fd = v;
        }
    }
    s.solver.validate()?;
    Ok(s)
}

enum Failure {
    Usage(Error),
    SchemeFile(Error),
}

fn load(path: &Path) -> std::result::Result<Scheme, Failure> {
    read_scheme(path).map_err(|e| Failure::SchemeFile(Error::Configuration(format!("{}: {e}", path.display()))))
}

fn load_points(path: &Path) -> std::result::Result<PointScheme, Failure> {
    match load(path)? {
        Scheme::Points(p) => Ok(p),
        Scheme::Curve(_) => {
            Err(Failure::Usage(Error::Configuration(format!("{}: expected a point scheme", path.display()))))
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct MomentReport {
    moment: ComplexMatrixJson,
    volume: f64,
    residual: BalanceReport,
}

#[derive(Serialize)]
struct BalanceOutput {
    status: SolveStatus,
    iterations: usize,
    residual_history: Vec<f64>,
    g: ComplexMatrixJson,
    g_normalized: ComplexMatrixJson,
    report: BalanceReport,
}

#[derive(Serialize)]
struct StabilityOutput {
    criterion: StabilityVerdict,
    sampled: StabilityVerdict,
}

#[derive(Serialize)]
struct WeightRow {
    lambda: Vec<f64>,
    weight: f64,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(config: RunConfig) -> i32 {
    match dispatch(&config.command) {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(Failure::SchemeFile(e)) => {
            eprintln!("error: {e}");
            EXIT_SCHEME_FILE
        }
    }
}

fn usage<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn dispatch(command: &Command) -> std::result::Result<i32, Failure> {
    match command {
        Command::Moment { common } => {
            let s = usage(settings_for(common, None))?;
            let grid = usage(QuadratureGrid::from_settings(&s.quadrature))?;
            let x = load(&common.input)?;
            let m = usage(moment_matrix(&x, &grid))?;
            let r = usage(residual_t(&GroupElement::identity(x.n() + 1), &x, None, 0.0, &grid))?;
            let report = MomentReport {
                moment: ComplexMatrixJson::from(m.matrix.matrix()),
                volume: m.scheme_mass,
                residual: report_from_residual(&r, s.solver.tolerance_for(r.volume) / r.volume),
            };
            usage(emit(common.out.as_deref(), &usage(json(&report))?))?;
            Ok(EXIT_OK)
        }
        Command::Balance { common, solver } => {
            let s = usage(settings_for(common, Some(solver)))?;
            let grid = usage(QuadratureGrid::from_settings(&s.quadrature))?;
            let x = load(&common.input)?;
            let out = usage(newton_solve_at_t(&GroupElement::identity(x.n() + 1), &x, None, 0.0, &s.solver, &grid))?;
            let tol = s.solver.tolerance_for(out.residual.volume) / out.residual.volume;
            let report = BalanceOutput {
                status: out.status,
                iterations: out.iterations,
                residual_history: out.history.clone(),
                g: ComplexMatrixJson::from(out.g.matrix()),
                g_normalized: ComplexMatrixJson::from(gauge_normalize(&out.g).matrix()),
                report: report_from_residual(&out.residual, tol),
            };
            usage(emit(common.out.as_deref(), &usage(json(&report))?))?;
            Ok(if out.status == SolveStatus::Converged { EXIT_OK } else { EXIT_BREAKDOWN })
        }
        Command::Continuity { common, solver, aux, t_start, gamma, t_end, max_halvings, allow_aux_off_scheme } => {
            let mut s = usage(settings_for(common, Some(solver)))?;
            if let Some(v) = t_start {
                s.schedule.t_start = Some(*v);
            }
            if let Some(v) = gamma {
                s.schedule.gamma = *v;
            }
            if let Some(v) = t_end {
                s.schedule.t_end = *v;
            }
            if let Some(v) = max_halvings {
                s.schedule.max_halvings = *v;
            }
            usage(s.schedule.validate())?;
            let grid = usage(QuadratureGrid::from_settings(&s.quadrature))?;
            let x = load(&common.input)?;
            let d = match (aux, &x) {
                (Some(path), _) => load_points(path)?,
                (None, Scheme::Curve(c)) => usage(sample_aux(c, s.seed))?,
                (None, Scheme::Points(_)) => {
                    return Err(Failure::Usage(Error::Configuration(
                        "point schemes need an explicit --aux file".into(),
                    )))
                }
            };
            let options = ContinuityOptions { allow_aux_off_scheme: *allow_aux_off_scheme };
            let trace = usage(continuity_run_with(&x, &d, &s.solver, &s.schedule, &grid, options))?;
            match &common.out {
                Some(path) => {
                    usage(trace.write_csv(usage(File::create(path).map_err(Error::from))?))?;
                    usage(std::fs::write(path.with_extension("json"), usage(json(&trace))?).map_err(Error::from))?;
                }
                None => usage(trace.write_csv(std::io::stdout()))?,
            }
            if trace.aux_off_scheme {
                eprintln!("note: auxiliary points do not lie on the scheme");
            }
            Ok(match trace.outcome {
                RunOutcome::Success => EXIT_OK,
                RunOutcome::Breakdown => EXIT_BREAKDOWN,
            })
        }
        Command::Stability { common, samples } => {
            let s = usage(settings_for(common, None))?;
            let d = load_points(&common.input)?;
            let report = StabilityOutput {
                criterion: point_set_stable(&d),
                sampled: usage(chow_stability_sampled(&d, *samples, s.seed))?,
            };
            usage(emit(common.out.as_deref(), &usage(json(&report))?))?;
            Ok(EXIT_OK)
        }
        Command::ChowWeight { common, lambdas } => {
            usage(settings_for(common, None))?;
            let d = load_points(&common.input)?;
            let mut rows = Vec::with_capacity(lambdas.len());
            for text in lambdas {
                let weights = usage(parse_weights(text))?;
                let lambda = usage(WeightVector::new(weights.clone()))?;
                let weight = usage(chow_weight_points(&d, &lambda))?;
                rows.push(WeightRow { lambda: weights, weight });
            }
            usage(emit(common.out.as_deref(), &usage(json(&rows))?))?;
            Ok(EXIT_OK)
        }
        Command::MakeExample { n, out } => {
            let n = *n as usize;
            std::fs::create_dir_all(out).map_err(|e| Failure::SchemeFile(e.into()))?;
            for (name, scheme) in reference_schemes(n) {
                write_scheme(&out.join(name), &scheme).map_err(Failure::SchemeFile)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn parse_weights(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|w| w.trim().parse::<f64>().map_err(|_| Error::Configuration(format!("bad weight {w:?} in {text:?}"))))
        .collect()
}

/// `n+2` points of the curve in general position.
pub fn sample_aux(curve: &CurveScheme, seed: u64) -> Result<PointScheme> {
    let mut round = 0u64;
    find_general_position_subset(
        || {
            round += 1;
            sample_curve_points(curve, 1, seed.wrapping_add(round)).expect("curve sampling").remove(0)
        },
        curve.n(),
        1000,
    )
}

/// File names and schemes written by `make-example`.
pub fn reference_schemes(n: usize) -> Vec<(String, Scheme)> {
    vec![
        (format!("roots_of_unity_n{n}.json"), roots_of_unity_config(n).into()),
        (format!("rational_normal_d{n}.json"), CurveScheme::rational_normal(n).into()),
        (format!("unstable_n{n}.json"), unstable_family(n).into()),
    ]
}

/// `n+1` points on the hyperplane `z_n = 0` together with `e_n`.
/// For `n = 1` this is `{[1:0] x 2, [0:1]}`.
pub fn unstable_family(n: usize) -> PointScheme {
    let e = |i: usize| ProjPoint::coordinate(n, i);
    if n == 1 {
        return PointScheme::new(vec![e(0), e(1)], vec![2, 1]).expect("valid points");
    }
    let mut pts: Vec<ProjPoint> = (0..n).map(e).collect();
    let mut diag = vec![1.0; n];
    diag.push(0.0);
    pts.push(ProjPoint::from_real(&diag).expect("nonzero"));
    pts.push(e(n));
    PointScheme::reduced(pts).expect("valid points")
}
