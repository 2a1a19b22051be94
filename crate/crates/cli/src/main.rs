//! `freedeconv` command-line front end.
//!
//! Exit status: 0 on success, 1 on domain errors (with a JSON object
//! `{code, message, module}` on stderr), 2 on usage errors.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use freedeconv::models::{
    cw_moments, cw_recover_eigenvalues, spn_moments, spn_recover, verify_identifiability, CwModel, SpnModel,
};
use freedeconv::ncpart::{enumerate_nc, enumerate_with_kreweras};
use freedeconv::randmat::{empirical_spectrum, Ensemble, Field, Sampler};
use freedeconv::series::{
    boxed_conv, free_add_conv, free_mult_deconv, r_transform, AnySeries, RationalSeries, ScalarKind,
};
use freedeconv::subordination::{
    linear_grid, spn_density_extrapolated_with, spn_density_with, support_bound, SolverOptions, DEFAULT_EPSILON,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "freedeconv", version, about = "Free deconvolution for compound Wishart and signal-plus-noise spectra")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Truncation order of moment and transform series.
    #[arg(long, global = true, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    order: u64,
    /// Master seed for Monte Carlo.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Monte Carlo trials (default 10).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Stieltjes inversion offset (default 1e-3).
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Fixed-point tolerance of the density solver (default 1e-12).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Scalar backend for series computations.
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// Output path; `-` or absent for stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Rational,
    Float,
}

#[derive(Clone, Copy, ValueEnum)]
enum Verb {
    Boxed,
    Boxplus,
    Deconv,
    Rtransform,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cw,
    Spn,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

#[derive(Subcommand)]
enum Command {
    /// Non-crossing partitions of {1..n} as arrays of blocks.
    Nc {
        #[arg(long)]
        n: usize,
        /// Pair each partition with its Kreweras complement.
        #[arg(long)]
        kreweras: bool,
    },
    /// Series algebra on JSON series files.
    Convolve {
        #[arg(value_enum)]
        verb: Verb,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: Option<PathBuf>,
    },
    /// Moment series of a CW model.
    CwMoments {
        #[arg(long)]
        model: PathBuf,
    },
    /// Eigenvalues of D from a CW R-transform series.
    CwRecover {
        #[arg(long, alias = "r")]
        input: PathBuf,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        d: usize,
    },
    /// Moment series of an SPN model.
    SpnMoments {
        #[arg(long)]
        model: PathBuf,
    },
    /// sigma^2 and the spectrum of A*A from an SPN moment series.
    SpnRecover {
        #[arg(long)]
        moments: PathBuf,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        d: usize,
    },
    /// SPN spectral density as CSV `x,rho`, with a JSON sidecar.
    SpnDensity {
        #[arg(long)]
        model: PathBuf,
        /// Defaults to 1e-4.
        #[arg(long)]
        xmin: Option<f64>,
        /// Defaults to a bound beyond the support.
        #[arg(long)]
        xmax: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        points: usize,
        /// Sidecar path; defaults to `<out>.json` when writing to a file.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Combine offsets epsilon and epsilon/2 to cancel first-order smoothing.
        #[arg(long)]
        extrapolate: bool,
    },
    /// Monte Carlo moments against model predictions.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Multiply p and d, repeating the spectrum.
        #[arg(long, default_value_t = 1)]
        dim_scale: usize,
        #[arg(long, value_enum, default_value = "real")]
        field: FieldArg,
        /// CSV dump of the pooled eigenvalues.
        #[arg(long)]
        dump_eigs: Option<PathBuf>,
    },
    /// Whether two SPN models have the same law.
    Verify {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Input(String),
    Domain(freedeconv::Error),
}

impl From<freedeconv::Error> for CliError {
    fn from(e: freedeconv::Error) -> Self {
        CliError::Domain(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn check_input(path: &Path) -> CliResult<()> {
    if is_stdio(path) || path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file {} does not exist", path.display())))
    }
}

fn check_output(path: &Option<PathBuf>) -> CliResult<()> {
    let Some(path) = path else { return Ok(()) };
    if is_stdio(path) {
        return Ok(());
    }
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(CliError::Usage(format!("output directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    if is_stdio(path) {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| CliError::Input(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

fn read_json(path: &Path) -> CliResult<Value> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_model<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_value(read_json(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_series(path: &Path) -> CliResult<AnySeries> {
    Ok(AnySeries::from_json(&read_json(path)?)?)
}

fn write_text(path: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match path {
        Some(p) if !is_stdio(p) => {
            fs::write(p, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))
        }
        _ => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}"))),
    }
}

fn write_json(path: &Option<PathBuf>, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write_text(path, &text)
}

fn to_backend(s: AnySeries, backend: Backend) -> CliResult<AnySeries> {
    Ok(match (s, backend) {
        (AnySeries::Float(f), Backend::Rational) => AnySeries::Rational(f.to_rational()?),
        (AnySeries::Rational(r), Backend::Float) => AnySeries::Float(r.to_float()),
        (s, _) => s,
    })
}

/// Rational unless an input is floating or `--backend float` is given.
fn common_backend(global: &Global, inputs: &[&AnySeries]) -> Backend {
    global.backend.unwrap_or(if inputs.iter().all(|s| s.kind() == ScalarKind::Rational) {
        Backend::Rational
    } else {
        Backend::Float
    })
}

fn binary(
    verb: Verb,
    f: AnySeries,
    g: AnySeries,
) -> CliResult<AnySeries> {
    Ok(match (f, g) {
        (AnySeries::Rational(f), AnySeries::Rational(g)) => AnySeries::from(apply(verb, &f, &g)?),
        (AnySeries::Float(f), AnySeries::Float(g)) => AnySeries::from(apply(verb, &f, &g)?),
        _ => unreachable!("inputs converted to one backend"),
    })
}

fn apply<S: freedeconv::series::Scalar>(
    verb: Verb,
    f: &freedeconv::series::Series<S>,
    g: &freedeconv::series::Series<S>,
) -> freedeconv::Result<freedeconv::series::Series<S>> {
    match verb {
        Verb::Boxed => boxed_conv(f, g),
        Verb::Boxplus => free_add_conv(f, g),
        Verb::Deconv => free_mult_deconv(f, g),
        Verb::Rtransform => unreachable!("unary verb"),
    }
}

fn series_output<F, R>(backend: Backend, rational: R, float: F) -> CliResult<Value>
where
    R: FnOnce() -> freedeconv::Result<RationalSeries>,
    F: FnOnce() -> freedeconv::Result<freedeconv::series::FloatSeries>,
{
    Ok(match backend {
        Backend::Rational => AnySeries::from(rational()?).to_json(),
        Backend::Float => AnySeries::from(float()?).to_json(),
    })
}

fn solver_options(global: &Global) -> CliResult<SolverOptions> {
    let tol = global.tol.unwrap_or(DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
    }
    Ok(SolverOptions { tol, max_iter: DEFAULT_MAX_ITER })
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    let order = g.order as usize;
    check_output(&g.out)?;
    match cli.command {
        Command::Nc { n, kreweras } => {
            let value = if kreweras {
                let pairs = enumerate_with_kreweras(n)?;
                json!(pairs.iter().map(|(p, k)| json!({ "partition": p.blocks(), "kreweras": k.blocks() })).collect::<Vec<_>>())
            } else {
                json!(enumerate_nc(n)?.iter().map(|p| p.blocks()).collect::<Vec<_>>())
            };
            write_json(&g.out, &value)
        }
        Command::Convolve { verb, f, g: other } => {
            check_input(&f)?;
            let second = match (verb, &other) {
                (Verb::Rtransform, None) => None,
                (Verb::Rtransform, Some(_)) => return Err(CliError::Usage("rtransform takes only --f".into())),
                (_, Some(path)) => {
                    check_input(path)?;
                    Some(path.clone())
                }
                (_, None) => return Err(CliError::Usage("this verb needs --g".into())),
            };
            let fs = read_series(&f)?;
            let gs = second.as_deref().map(read_series).transpose()?;
            let backend = common_backend(g, &[Some(&fs), gs.as_ref()].into_iter().flatten().collect::<Vec<_>>());
            let fs = to_backend(fs, backend)?;
            let result = match gs {
                None => freedeconv::with_series!(fs, |s| r_transform(&s)),
                Some(gs) => binary(verb, fs, to_backend(gs, backend)?)?,
            };
            write_json(&g.out, &result.to_json())
        }
        Command::CwMoments { model } => {
            check_input(&model)?;
            let m: CwModel = read_model(&model)?;
            let value = series_output(
                g.backend.unwrap_or(Backend::Rational),
                || cw_moments(&m, order),
                || cw_moments::<f64>(&m, order),
            )?;
            write_json(&g.out, &value)
        }
        Command::CwRecover { input, p, d } => {
            check_input(&input)?;
            let r = read_series(&input)?;
            let backend = common_backend(g, &[&r]);
            let eigenvalues = match to_backend(r, backend)? {
                AnySeries::Rational(r) => cw_recover_eigenvalues(&r, p, d)?,
                AnySeries::Float(r) => cw_recover_eigenvalues(&r, p, d)?,
            };
            write_json(&g.out, &json!({ "p": p, "d": d, "eigenvalues": eigenvalues }))
        }
        Command::SpnMoments { model } => {
            check_input(&model)?;
            let m: SpnModel = read_model(&model)?;
            let value = series_output(
                g.backend.unwrap_or(Backend::Rational),
                || spn_moments(&m, order),
                || spn_moments::<f64>(&m, order),
            )?;
            write_json(&g.out, &value)
        }
        Command::SpnRecover { moments, p, d } => {
            check_input(&moments)?;
            let m = read_series(&moments)?.to_float();
            let report = spn_recover(&m, p, d)?;
            write_json(&g.out, &serde_json::to_value(&report).expect("report serializes"))
        }
        Command::SpnDensity { model, xmin, xmax, points, sidecar, extrapolate } => {
            check_input(&model)?;
            check_output(&sidecar)?;
            let m: SpnModel = read_model(&model)?;
            let opts = solver_options(g)?;
            let eps = g.epsilon.unwrap_or(DEFAULT_EPSILON);
            let lo = xmin.unwrap_or(1e-4);
            let hi = xmax.unwrap_or_else(|| support_bound(&m));
            if points < 2 || !(lo < hi) {
                return Err(CliError::Usage(format!("need points >= 2 and xmin < xmax, got {points}, {lo}, {hi}")));
            }
            let grid = linear_grid(lo, hi, points);
            let curve = if extrapolate {
                spn_density_extrapolated_with(&m, &grid, eps, opts)?
            } else {
                spn_density_with(&m, &grid, eps, opts)?
            };
            write_text(&g.out, &curve.to_csv())?;
            let sidecar = sidecar.or_else(|| {
                g.out.as_ref().filter(|p| !is_stdio(p)).map(|p| {
                    let mut s = p.clone().into_os_string();
                    s.push(".json");
                    PathBuf::from(s)
                })
            });
            if let Some(path) = sidecar {
                let meta = json!({
                    "mass": curve.mass,
                    "epsilon": curve.epsilon,
                    "extrapolated": extrapolate,
                    "max_residual": curve.max_residual,
                    "max_iterations_used": curve.max_iterations,
                });
                write_json(&Some(path), &meta)?;
            }
            Ok(())
        }
        Command::Simulate { model, kind, dim_scale, field, dump_eigs } => {
            check_input(&model)?;
            check_output(&dump_eigs)?;
            if dim_scale == 0 {
                return Err(CliError::Usage("--dim-scale must be at least 1".into()));
            }
            let trials = g.trials.unwrap_or(10);
            if trials == 0 {
                return Err(CliError::Usage("--trials must be at least 1".into()));
            }
            let (ensemble, predicted) = match kind {
                Kind::Cw => {
                    let m = read_model::<CwModel>(&model)?.scaled(dim_scale)?;
                    let want = cw_moments::<f64>(&m, order)?;
                    (Ensemble::Cw(m), want)
                }
                Kind::Spn => {
                    let m = read_model::<SpnModel>(&model)?.scaled(dim_scale)?;
                    let want = spn_moments::<f64>(&m, order)?;
                    (Ensemble::Spn(m), want)
                }
            };
            let field = match field {
                FieldArg::Real => Field::Real,
                FieldArg::Complex => Field::Complex,
            };
            let sampler = Sampler::new(ensemble, field, g.seed);
            let spectrum = empirical_spectrum(&sampler, trials, order)?;
            let relative: Vec<f64> = spectrum
                .moments
                .iter()
                .zip(predicted.coeffs())
                .map(|(e, p)| (e - p) / p.abs())
                .collect();
            if let Some(path) = dump_eigs {
                write_text(&Some(path), &spectrum.to_csv())?;
            }
            write_json(
                &g.out,
                &json!({
                    "p": sampler.spec.p,
                    "d": sampler.spec.d,
                    "field": field,
                    "trials": trials,
                    "seed": g.seed,
                    "empirical_moments": spectrum.moments,
                    "predicted_moments": predicted.coeffs(),
                    "relative_errors": relative,
                }),
            )
        }
        Command::Verify { a, b } => {
            check_input(&a)?;
            check_input(&b)?;
            let ma: SpnModel = read_model(&a)?;
            let mb: SpnModel = read_model(&b)?;
            let report = verify_identifiability(&ma, &mb, order)?;
            let mut value = serde_json::to_value(&report).expect("report serializes");
            value["verdict"] = json!(if report.identical { "identical" } else { "different" });
            write_json(&g.out, &value)
        }
    }
}

fn error_json(code: &str, message: &str, module: &str) -> String {
    json!({ "code": code, "message": message, "module": module }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("{}", error_json("invalid_input", &msg, "cli"));
            ExitCode::from(1)
        }
        Err(CliError::Domain(e)) => {
            eprintln!("{}", error_json(e.code(), &e.to_string(), e.module()));
            ExitCode::from(1)
        }
    }
}
