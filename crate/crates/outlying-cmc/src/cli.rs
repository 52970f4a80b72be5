//! Command-line front end. One subcommand per invocation, defaults
//! overridable by a JSON config file, flags overriding both. All numeric
//! output goes through the 17-digit formatter, so identical inputs and seed
//! produce byte-identical files regardless of thread count.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage error or
//! malformed input, 3 I/O or solver failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::checks::{
    cmc_scaling_suite, flux_suite, identity_suite, positivity_suite, Check, FLUX_PROBE_RADII,
};
use crate::counterexample::{
    build_metric, export_profile, polar_resolution, tensor_from_spec, BumpParams,
    CounterexampleProfile,
};
use crate::error::Error;
use crate::functional::{
    eval_f, eval_g, eval_k, flux_residual, phi_lower_bound, radial_derivative_f,
    FunctionalContext,
};
use crate::metric::MetricSpec;
use crate::report::{construction_json, find_report_json, solve_report_json, ScanTable};
use crate::solve::{find_cmc, lyapunov_schmidt_solve, FindOptions, SolverOptions};
use crate::tensor::{AxisymmetricProfile, PerturbationTensor, ProfileSpec, TensorSpec};

/// A failure with the exit code it maps to; the message goes to stderr.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            // bad user input: arguments, domains, malformed JSON
            Error::InvalidArgument(_) | Error::Domain(_) | Error::Json(_) => 2,
            // everything else is an I/O or solver-side failure
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "outlying-cmc",
    version,
    about = "Outlying CMC spheres: verification suites, functional scans, \
             profile construction, and reduction solves"
)]
struct Cli {
    /// JSON file supplying defaults for any option; explicit flags win
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a verification suite; one line per check, exit 1 on any failure
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Tabulate the reduced functional along a ray of centers
    #[command(name = "scan-f")]
    ScanF(ScanArgs),
    /// Build and certify the perturbation profile with an interior minimum
    Counterexample(CounterexampleArgs),
    /// Reduction solves: one fixed center, or a minimization over centers
    Cmc {
        #[command(subcommand)]
        action: CmcAction,
    },
    /// Re-emit a scan table in csv or json
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
enum Suite {
    /// Series and quadrature closed forms, generating-series residual decay
    Identities(IdentityArgs),
    /// The radial lower bound is positive with bounded fourth-power rescaling
    Positivity(OutOnlyArgs),
    /// The differential flux identity and its dual-route bulk term
    Flux(FluxArgs),
    /// Scaling laws of the reduction solver on the unperturbed background
    CmcScaling(OutOnlyArgs),
}

#[derive(Args, Debug)]
struct IdentityArgs {
    /// Tolerance for the quadrature closed-form comparisons
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for the randomized probe directions
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the check lines to this file
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OutOnlyArgs {
    /// Also write the check lines to this file
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FluxArgs {
    /// Absolute tolerance on the flux residual
    #[arg(long)]
    tol: Option<f64>,
    /// Cutoff steepness of the probe tensor
    #[arg(long)]
    k: Option<u32>,
    /// Tangency radius of the probe tensor
    #[arg(long)]
    s0: Option<f64>,
    /// Amplitude of the probe tensor
    #[arg(long)]
    amplitude: Option<f64>,
    /// Also write the check lines to this file
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    /// `zero` or a path to a tensor/profile JSON file
    #[arg(long)]
    metric: Option<String>,
    /// Smallest center radius; must exceed 1
    #[arg(long)]
    r_min: Option<f64>,
    /// Largest center radius
    #[arg(long)]
    r_max: Option<f64>,
    /// Number of geometrically spaced radii; 0 emits only the header
    #[arg(long)]
    samples: Option<usize>,
    /// Ray direction, normalized internally
    #[arg(long, value_parser = parse_vec3, value_name = "X,Y,Z")]
    xi0: Option<[f64; 3]>,
    /// Polar quadrature resolution
    #[arg(long)]
    n_polar: Option<usize>,
    /// Output path; stdout if omitted
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args, Debug)]
struct CounterexampleArgs {
    /// Cutoff steepness
    #[arg(long)]
    k: Option<u32>,
    /// Tangency radius; the minimum appears near s0 on the axis
    #[arg(long)]
    s0: Option<f64>,
    /// Starting amplitude for the doubling search
    #[arg(long)]
    amplitude: Option<f64>,
    /// Write the certified profile (parameters plus samples) here
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum CmcAction {
    /// One constrained solve at a fixed center
    Solve(CmcArgs),
    /// Minimize the reduced functional over centers, then classify
    Find(CmcArgs),
}

#[derive(Args, Debug)]
struct CmcArgs {
    /// `zero` or a path to a tensor/profile JSON file
    #[arg(long)]
    metric: Option<String>,
    /// Center (solve) or search start (find)
    #[arg(long, value_parser = parse_vec3, value_name = "X,Y,Z")]
    xi0: Option<[f64; 3]>,
    /// Sphere radius scale
    #[arg(long)]
    lambda: Option<f64>,
    /// Spherical-harmonic degree of the unknowns
    #[arg(long)]
    degree: Option<usize>,
    /// Polar quadrature resolution
    #[arg(long)]
    n_polar: Option<usize>,
    /// Newton residual tolerance multiplier
    #[arg(long)]
    tol: Option<f64>,
    /// Output path; stdout if omitted
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Scan table to re-emit, csv or json detected from content
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output path; stdout if omitted
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Csv,
    Json,
}

/// Config-file mirror of the flags; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    metric: Option<String>,
    k: Option<u32>,
    s0: Option<f64>,
    amplitude: Option<f64>,
    xi0: Option<[f64; 3]>,
    lambda: Option<f64>,
    degree: Option<usize>,
    n_polar: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<FormatArg>,
    r_min: Option<f64>,
    r_max: Option<f64>,
    samples: Option<usize>,
    input: Option<PathBuf>,
    threads: Option<usize>,
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,Z, got `{s}`"));
    }
    let mut v = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("component {}: {e}", i + 1))?;
        if !v[i].is_finite() {
            return Err("components must be finite".to_string());
        }
    }
    Ok(v)
}

fn positive(name: &str, x: f64) -> Outcome<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Failure::usage(format!("{name} must be positive, got {x}")))
    }
}

fn read_config(path: Option<&Path>) -> Outcome<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    // serde_json diagnostics carry line and column
    let cfg: FileConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("malformed config {}: {e}", path.display())))?;
    if let Some(t) = cfg.tol {
        positive("tol", t)?;
    }
    if cfg.threads == Some(0) {
        return Err(Failure::usage("threads must be at least 1"));
    }
    Ok(cfg)
}

fn thread_count(cfg: &FileConfig) -> Outcome<usize> {
    if let Some(text) = std::env::var_os("OUTLYING_CMC_THREADS") {
        let text = text.to_string_lossy();
        let n: usize = text.trim().parse().map_err(|_| {
            Failure::usage(format!(
                "OUTLYING_CMC_THREADS must be a positive integer, got `{text}`"
            ))
        })?;
        if n == 0 {
            return Err(Failure::usage("OUTLYING_CMC_THREADS must be at least 1"));
        }
        return Ok(n.min(256));
    }
    Ok(cfg.threads.unwrap_or(1).min(256))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Outcome<i32> {
    let cfg = read_config(cli.config.as_deref())?;
    match cli.command {
        Command::Verify { suite } => run_verify(suite, &cfg),
        Command::ScanF(args) => run_scan(args, &cfg),
        Command::Counterexample(args) => run_counterexample(args, &cfg),
        Command::Cmc { action } => run_cmc(action, &cfg),
        Command::Report(args) => run_report(args, &cfg),
    }
}

/// Metric argument after parsing: the flat-background tensor choice plus
/// enough structure to rebuild the tensor per worker thread.
enum MetricArg {
    Zero,
    Spec(TensorSpec),
    Profile { k: u32, s0: f64, amplitude: f64 },
}

/// On-disk shape written by `counterexample --out`. The samples are spot
/// checked against the stated parameters; the analytic profile is then used
/// directly, so solves see exact derivatives rather than spline ones.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileImport {
    k: u32,
    s0: f64,
    t0: f64,
    a_k: f64,
    amplitude: f64,
    samples: Vec<(f64, f64)>,
}

impl MetricArg {
    fn parse(arg: &str) -> Outcome<MetricArg> {
        if arg == "zero" {
            return Ok(MetricArg::Zero);
        }
        let text = fs::read_to_string(arg)
            .map_err(|e| Failure::usage(format!("cannot read metric {arg}: {e}")))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("malformed metric {arg}: {e}")))?;
        if value.get("type").is_some() {
            let spec: TensorSpec = serde_json::from_value(value)
                .map_err(|e| Failure::usage(format!("malformed metric {arg}: {e}")))?;
            return Ok(MetricArg::Spec(spec));
        }
        let profile: ProfileImport = serde_json::from_value(value)
            .map_err(|e| Failure::usage(format!("malformed metric {arg}: {e}")))?;
        let params = BumpParams::new(profile.k, profile.s0)
            .and_then(|p| p.with_amplitude(profile.amplitude))
            .map_err(|e| Failure::usage(format!("metric {arg}: {e}")))?;
        let scale = profile.amplitude.abs().max(1.0);
        if (params.t0() - profile.t0).abs() > 1e-12
            || (params.slope_ratio() - profile.a_k).abs() > 1e-9 * scale
        {
            return Err(Failure::usage(format!(
                "metric {arg}: stored t0/a_k disagree with the stated parameters"
            )));
        }
        let n = profile.samples.len();
        if n < 2 {
            return Err(Failure::usage(format!("metric {arg}: profile table too short")));
        }
        let analytic = CounterexampleProfile::new(params);
        for idx in [0, n / 7, 2 * n / 7, 3 * n / 7, 4 * n / 7, 5 * n / 7, 6 * n / 7, n - 1] {
            let (t, v) = profile.samples[idx];
            if !((-1.0 - 1e-12..=1.0 + 1e-12).contains(&t))
                || (analytic.psi(t) - v).abs() > 1e-9 * scale
            {
                return Err(Failure::usage(format!(
                    "metric {arg}: sample {idx} disagrees with the stated parameters"
                )));
            }
        }
        Ok(MetricArg::Profile {
            k: profile.k,
            s0: profile.s0,
            amplitude: profile.amplitude,
        })
    }

    /// Cutoff steepness when the tensor has a transition layer; drives the
    /// default quadrature resolution.
    fn bump_k(&self) -> Option<u32> {
        match self {
            MetricArg::Zero => None,
            MetricArg::Spec(TensorSpec::Axisymmetric {
                profile: ProfileSpec::Counterexample { k, .. },
            }) => Some(*k),
            MetricArg::Spec(_) => None,
            MetricArg::Profile { k, .. } => Some(*k),
        }
    }

    fn tensor(&self) -> crate::Result<Box<dyn PerturbationTensor>> {
        match self {
            MetricArg::Zero => tensor_from_spec(&TensorSpec::Zero),
            MetricArg::Spec(spec) => tensor_from_spec(spec),
            MetricArg::Profile { k, s0, amplitude } => {
                tensor_from_spec(&TensorSpec::Axisymmetric {
                    profile: ProfileSpec::Counterexample {
                        k: *k,
                        s0: *s0,
                        amplitude: *amplitude,
                    },
                })
            }
        }
    }

    fn metric(&self) -> crate::Result<MetricSpec> {
        Ok(match self {
            MetricArg::Zero => MetricSpec::schwarzschild(),
            _ => MetricSpec::with_tensor(self.tensor()?),
        })
    }
}

fn run_verify(suite: Suite, cfg: &FileConfig) -> Outcome<i32> {
    let (label, checks, out) = match suite {
        Suite::Identities(a) => {
            let tol = positive("tol", a.tol.or(cfg.tol).unwrap_or(1e-8))?;
            let seed = a.seed.or(cfg.seed).unwrap_or(0);
            let checks = identity_suite(tol, seed).map_err(Failure::from)?;
            ("identities", checks, a.out.or_else(|| cfg.out.clone()))
        }
        Suite::Positivity(a) => {
            let checks = positivity_suite().map_err(Failure::from)?;
            ("positivity", checks, a.out.or_else(|| cfg.out.clone()))
        }
        Suite::Flux(a) => {
            let tol = positive("tol", a.tol.or(cfg.tol).unwrap_or(1e-6))?;
            let k = a.k.or(cfg.k).unwrap_or(200);
            let s0 = a.s0.or(cfg.s0).unwrap_or(2.0);
            let amplitude = positive(
                "amplitude",
                a.amplitude.or(cfg.amplitude).unwrap_or(64.0),
            )?;
            let make = move || {
                tensor_from_spec(&TensorSpec::Axisymmetric {
                    profile: ProfileSpec::Counterexample { k, s0, amplitude },
                })
            };
            let checks = flux_suite(make, tol, &FLUX_PROBE_RADII).map_err(Failure::from)?;
            ("flux", checks, a.out.or_else(|| cfg.out.clone()))
        }
        Suite::CmcScaling(a) => {
            let checks = cmc_scaling_suite().map_err(Failure::from)?;
            ("cmc-scaling", checks, a.out.or_else(|| cfg.out.clone()))
        }
    };
    let text = render_checks(label, &checks);
    print!("{text}");
    if let Some(path) = out {
        fs::write(&path, &text)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
    }
    let failures = checks.iter().filter(|c| !c.passed).count();
    Ok(if failures == 0 { 0 } else { 1 })
}

fn render_checks(label: &str, checks: &[Check]) -> String {
    let mut text = String::new();
    for c in checks {
        let verdict = if c.passed { "ok" } else { "FAIL" };
        text.push_str(&format!("{verdict} {}: {}\n", c.name, c.detail));
    }
    let failures = checks.iter().filter(|c| !c.passed).count();
    text.push_str(&format!(
        "{label}: {} checks, {failures} failed\n",
        checks.len()
    ));
    text
}

fn scan_row(ctx: &FunctionalContext, r: f64, dir: [f64; 3]) -> crate::Result<[f64; 10]> {
    let xi = [r * dir[0], r * dir[1], r * dir[2]];
    let f = eval_f(ctx, xi)?;
    let df = radial_derivative_f(ctx, xi)?.value;
    let phi = phi_lower_bound(r)?;
    let g1 = eval_g(ctx, xi, 1.0)?;
    let k1 = eval_k(ctx, xi, 1.0)?;
    let residual = flux_residual(ctx, xi, 1.0)?;
    Ok([xi[0], xi[1], xi[2], r, f, df, phi, g1, k1, residual])
}

fn run_scan(a: ScanArgs, cfg: &FileConfig) -> Outcome<i32> {
    let metric_name = a.metric.or_else(|| cfg.metric.clone()).unwrap_or_else(|| "zero".into());
    let metric_arg = MetricArg::parse(&metric_name)?;
    let r_min = positive("r-min", a.r_min.or(cfg.r_min).unwrap_or(1.2))?;
    let r_max = positive("r-max", a.r_max.or(cfg.r_max).unwrap_or(50.0))?;
    if r_min <= 1.0 {
        return Err(Failure::usage(format!("r-min must exceed 1, got {r_min}")));
    }
    if r_max < r_min {
        return Err(Failure::usage(format!(
            "r-max {r_max} is below r-min {r_min}"
        )));
    }
    let samples = a.samples.or(cfg.samples).unwrap_or(200);
    let raw_dir = a.xi0.or(cfg.xi0).unwrap_or([0.0, 0.0, 1.0]);
    let norm = (raw_dir[0] * raw_dir[0] + raw_dir[1] * raw_dir[1] + raw_dir[2] * raw_dir[2]).sqrt();
    if !(norm > 0.0) {
        return Err(Failure::usage("xi0 direction must be nonzero"));
    }
    let dir = [raw_dir[0] / norm, raw_dir[1] / norm, raw_dir[2] / norm];
    let n_polar = a
        .n_polar
        .or(cfg.n_polar)
        .unwrap_or_else(|| metric_arg.bump_k().map(polar_resolution).unwrap_or(64));
    let n_radial = 2 * n_polar;
    let threads = thread_count(cfg)?.min(samples.max(1));

    let radii: Vec<f64> = if samples == 1 {
        vec![r_min]
    } else {
        let ratio = (r_max / r_min).powf(1.0 / (samples as f64 - 1.0));
        (0..samples).map(|i| r_min * ratio.powi(i as i32)).collect()
    };
    let mut rows = vec![[0.0; 10]; samples];
    if samples > 0 {
        let chunk = samples.div_ceil(threads);
        let arg = &metric_arg;
        let radii = &radii;
        std::thread::scope(|scope| -> crate::Result<()> {
            let mut handles = Vec::new();
            for (b, slice) in rows.chunks_mut(chunk).enumerate() {
                handles.push(scope.spawn(move || -> crate::Result<()> {
                    let ctx = FunctionalContext::new(arg.tensor()?, n_polar, n_radial)?;
                    for (j, row) in slice.iter_mut().enumerate() {
                        *row = scan_row(&ctx, radii[b * chunk + j], dir)?;
                    }
                    Ok(())
                }));
            }
            for h in handles {
                h.join().expect("scan worker panicked")?;
            }
            Ok(())
        })?;
    }

    let table = ScanTable { rows };
    let text = match a.format.or(cfg.format).unwrap_or(FormatArg::Csv) {
        FormatArg::Csv => table.to_csv(),
        FormatArg::Json => table.to_json(),
    };
    emit(a.out.or_else(|| cfg.out.clone()).as_deref(), &text)?;
    Ok(0)
}

fn run_counterexample(a: CounterexampleArgs, cfg: &FileConfig) -> Outcome<i32> {
    let k = a.k.or(cfg.k).unwrap_or(200);
    let s0 = a.s0.or(cfg.s0).unwrap_or(2.0);
    let mut params = BumpParams::new(k, s0).map_err(Failure::from)?;
    if let Some(amplitude) = a.amplitude.or(cfg.amplitude) {
        params = params.with_amplitude(amplitude).map_err(Failure::from)?;
    }
    let (_, report) = build_metric(&params).map_err(Failure::from)?;
    if let Some(path) = a.out.or_else(|| cfg.out.clone()) {
        // export what the construction settled on, not what was asked for
        let settled = BumpParams::new(report.certificate.k_used, s0)
            .and_then(|p| p.with_amplitude(report.amplitude))
            .map_err(Failure::from)?;
        let mut text = serde_json::to_string_pretty(&export_profile(&settled))
            .map_err(|e| Failure::io(format!("profile serialization: {e}")))?;
        text.push('\n');
        fs::write(&path, &text)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
    }
    print!("{}", construction_json(k, s0, &report));
    Ok(0)
}

fn run_cmc(action: CmcAction, cfg: &FileConfig) -> Outcome<i32> {
    let (a, minimize) = match action {
        CmcAction::Solve(a) => (a, false),
        CmcAction::Find(a) => (a, true),
    };
    let metric_name = a.metric.or_else(|| cfg.metric.clone()).unwrap_or_else(|| "zero".into());
    let metric_arg = MetricArg::parse(&metric_name)?;
    let metric = metric_arg.metric().map_err(Failure::from)?;
    let xi0 = a.xi0.or(cfg.xi0).unwrap_or([0.0, 0.0, 2.0]);
    let lambda = positive("lambda", a.lambda.or(cfg.lambda).unwrap_or(1.0e3))?;
    let mut opts = SolverOptions::default();
    if let Some(degree) = a.degree.or(cfg.degree) {
        opts = SolverOptions::with_degree(degree);
    }
    if let Some(tol) = a.tol.or(cfg.tol) {
        opts.tol = positive("tol", tol)?;
    }
    opts.n_polar = a.n_polar.or(cfg.n_polar).unwrap_or_else(|| {
        metric_arg
            .bump_k()
            .map(polar_resolution)
            .unwrap_or(opts.n_polar)
            .max(opts.n_polar)
    });
    let text = if minimize {
        let (_, report) = find_cmc(&metric, xi0, lambda, &opts, &FindOptions::default())
            .map_err(Failure::from)?;
        find_report_json(&report)
    } else {
        let (_, report) =
            lyapunov_schmidt_solve(&metric, xi0, lambda, &opts).map_err(Failure::from)?;
        solve_report_json(&report)
    };
    emit(a.out.or_else(|| cfg.out.clone()).as_deref(), &text)?;
    Ok(0)
}

fn run_report(a: ReportArgs, cfg: &FileConfig) -> Outcome<i32> {
    let input = a
        .input
        .or_else(|| cfg.input.clone())
        .ok_or_else(|| Failure::usage("report needs an input table"))?;
    let text = fs::read_to_string(&input)
        .map_err(|e| Failure::io(format!("cannot read {}: {e}", input.display())))?;
    let table = ScanTable::parse_auto(&text).map_err(Failure::from)?;
    let out = match a.format.or(cfg.format).unwrap_or(FormatArg::Csv) {
        FormatArg::Csv => table.to_csv(),
        FormatArg::Json => table.to_json(),
    };
    emit(a.out.or_else(|| cfg.out.clone()).as_deref(), &out)?;
    Ok(0)
}
