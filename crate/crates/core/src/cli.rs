//! `scolab` command line: argument and config-file parsing, subcommand
//! dispatch, and the exit-code contract.
//!
//! Exit codes: 0 success, 1 failed `--assert` or I/O error, 2 usage error.
//! Every study is seeded from `--seed` (default 0).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::experiments::{
    default_output, excess_risk_study, optimization_study, stability_table, tracking_study, Grid,
    StabilityRow, StepPoint, StudyConfig,
};
use crate::linalg::sample_ball;
use crate::optimizer::{
    run, schedule_preset_scaled, Convexity, OptimizerConfig, OutputMode, Variant,
};
use crate::oracle::{erm_minimizer, fd_gradient_check, population_minimizer};
use crate::problem::{Benchmark, PopulationLaw};
use crate::report::{emit_csv, emit_svg, fmt_f64, ChartSpec, Series, Table};
use crate::rng::Rng;
use crate::stability::{estimate_stability, Coupling};

#[derive(Parser, Debug)]
#[command(
    name = "scolab",
    version,
    about = "Stochastic compositional optimization lab",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare analytic and central-difference gradients of F_S.
    Gradcheck(GradcheckArgs),
    /// Run one optimizer trajectory.
    Optimize(OptimizeArgs),
    /// Tracking error against its bound.
    Tracking(TrackingArgs),
    /// Coupled-replicate stability estimates.
    Stability(StabilityArgs),
    /// Optimization error on a fixed dataset across (T, eta, beta).
    Optimization(OptimizationArgs),
    /// Population excess risk across sample sizes.
    ExcessRisk(ExcessArgs),
    /// Print the preset (T, eta, beta).
    Schedule(ScheduleArgs),
    /// Solve the empirical or population problem exactly.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Root seed for every random draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker cap; 1 runs serially.
    #[arg(long)]
    threads: Option<i64>,
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct LawArgs {
    /// Benchmark: convex or strongly_convex.
    #[arg(long, default_value = "convex")]
    convexity: String,
    #[arg(long, default_value_t = 50, allow_negative_numbers = true)]
    n: i64,
    #[arg(long, default_value_t = 50, allow_negative_numbers = true)]
    m: i64,
    #[arg(long)]
    tau_a: Option<f64>,
    #[arg(long)]
    tau_b: Option<f64>,
    #[arg(long)]
    tau_c: Option<f64>,
    /// Radius of the feasible ball.
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    radius: f64,
}

#[derive(Args, Debug, Clone)]
struct StepArgs {
    #[arg(long, default_value = "scsc")]
    variant: String,
    #[arg(long = "T", default_value_t = 1000, allow_negative_numbers = true)]
    iterations: i64,
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    eta: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    beta: f64,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    law: LawArgs,
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 1e-5)]
    h: f64,
    /// Exit 1 if the max relative error is not below this.
    #[arg(long)]
    assert: Option<f64>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    law: LawArgs,
    #[command(flatten)]
    step: StepArgs,
    /// last, uniform_average, sigma_weighted or uniform_random.
    #[arg(long, default_value = "last")]
    output: String,
    /// Strong-convexity modulus for sigma_weighted output (default: dataset σ).
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct TrackingArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    law: LawArgs,
    #[command(flatten)]
    step: StepArgs,
    #[arg(long, default_value_t = 50, allow_negative_numbers = true)]
    replicates: i64,
    /// Exponent c of the transient term.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Exit 1 if fewer than this fraction of steps t ≥ 10 are within the bound.
    #[arg(long)]
    assert: Option<f64>,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    law: LawArgs,
    #[command(flatten)]
    step: StepArgs,
    #[arg(long, default_value_t = 100, allow_negative_numbers = true)]
    replicates: i64,
    /// Use independent index streams for the neighboring run.
    #[arg(long)]
    independent: bool,
    #[arg(long, default_value = "last")]
    output: String,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct OptimizationArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    law: LawArgs,
    #[arg(long, default_value = "scsc")]
    variant: String,
    /// Comma-separated horizons.
    #[arg(long = "T", default_value = "256,1024,4096")]
    horizons: String,
    /// Comma-separated step sizes (one value or one per horizon).
    #[arg(long, default_value = "0.01")]
    eta: String,
    #[arg(long, default_value = "0.1")]
    beta: String,
    #[arg(long, default_value_t = 100, allow_negative_numbers = true)]
    replicates: i64,
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExcessArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "strongly_convex")]
    convexity: String,
    #[arg(long, default_value = "scsc")]
    variant: String,
    /// Comma-separated n = m values.
    #[arg(long, default_value = "20,40,80")]
    sizes: String,
    #[arg(long, default_value_t = 200, allow_negative_numbers = true)]
    replicates: i64,
    #[arg(long, default_value_t = 1.0)]
    t_constant: f64,
    #[arg(long, default_value_t = crate::experiments::DEFAULT_T_MAX)]
    t_max: usize,
    #[arg(long)]
    tau_a: Option<f64>,
    #[arg(long)]
    tau_b: Option<f64>,
    #[arg(long)]
    tau_c: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    #[arg(long, default_value = "scsc")]
    variant: String,
    #[arg(long, default_value = "convex")]
    convexity: String,
    #[arg(long, allow_negative_numbers = true)]
    n: i64,
    #[arg(long, allow_negative_numbers = true)]
    m: i64,
    #[arg(long, default_value_t = 1.0)]
    t_constant: f64,
    #[arg(long, default_value_t = crate::experiments::DEFAULT_T_MAX)]
    t_max: usize,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    law: LawArgs,
    /// Solve the population problem instead of the empirical one.
    #[arg(long)]
    population: bool,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. }
            | Error::NonFinite
            | Error::NoAnalyticPopulationRisk
            | Error::ThinnedTrajectory => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: msg.into(),
    }
}

fn assert_failed(msg: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: msg.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code. Diagnostics go to stderr.
pub fn parse_and_dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(&argv, &mut out) {
        Ok(()) => 0,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("scolab: {}", f.message);
            }
            f.code
        }
    }
}

/// As [`parse_and_dispatch`] but writes standard output into `out`.
pub fn run_with_output(argv: &[String], out: &mut dyn Write) -> i32 {
    match dispatch(argv, out) {
        Ok(()) => 0,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("scolab: {}", f.message);
            }
            f.code
        }
    }
}

fn dispatch(argv: &[String], out: &mut dyn Write) -> CliResult<()> {
    let argv = expand_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return Ok(());
            }
            let rendered = e.to_string();
            let line = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            return Err(usage(line));
        }
    };
    match cli.command {
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::Optimize(a) => optimize(a, out),
        Command::Tracking(a) => tracking(a, out),
        Command::Stability(a) => stability(a, out),
        Command::Optimization(a) => optimization(a, out),
        Command::ExcessRisk(a) => excess(a, out),
        Command::Schedule(a) => schedule(a, out),
        Command::Oracle(a) => oracle(a, out),
    }
}

/// Inserts `--key value` pairs from a `--config` file right after the
/// subcommand, so later command-line flags override them.
fn expand_config(argv: &[String]) -> CliResult<Vec<String>> {
    let mut path = None;
    for (k, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = Some(
                argv.get(k + 1)
                    .ok_or_else(|| usage("--config needs a path"))?
                    .clone(),
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(argv.to_vec());
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::from(Error::io(Path::new(&path), e)))?;
    let injected = parse_config(&text)?;
    if argv.len() < 2 {
        return Ok(argv.to_vec());
    }
    let mut expanded = argv[..2].to_vec();
    expanded.extend(injected);
    expanded.extend_from_slice(&argv[2..]);
    Ok(expanded)
}

/// Flat `key=value` lines with `#` comments. Boolean flags take `true` or `false`.
fn parse_config(text: &str) -> CliResult<Vec<String>> {
    let mut args = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(usage(format!("config line {}: invalid key", lineno + 1)));
        }
        let flag = if key == "t" {
            "--T".to_string()
        } else {
            format!("--{key}")
        };
        match value {
            "true" if matches!(key.as_str(), "independent" | "population") => args.push(flag),
            "false" if matches!(key.as_str(), "independent" | "population") => {}
            _ => {
                args.push(flag);
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> CliResult<T> {
    s.parse::<T>().map_err(Failure::from)
}

fn count(name: &str, v: i64) -> CliResult<usize> {
    if v < 1 {
        return Err(usage(format!("{name} must be ≥ 1, got {v}")));
    }
    Ok(v as usize)
}

fn iterations(v: i64) -> CliResult<usize> {
    if v < 1 {
        return Err(Error::InvalidIterations.into());
    }
    Ok(v as usize)
}

fn threads(common: &Common) -> CliResult<Option<usize>> {
    common.threads.map(|t| count("threads", t)).transpose()
}

fn list<T: std::str::FromStr>(name: &str, s: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| usage(format!("invalid {name} value `{v}`")))
        })
        .collect()
}

fn build_law(args: &LawArgs) -> CliResult<(Convexity, PopulationLaw)> {
    let convexity: Convexity = parse(&args.convexity)?;
    let law = with_noise(convexity, args.tau_a, args.tau_b, args.tau_c)?;
    if !(args.radius > 0.0) || !args.radius.is_finite() {
        return Err(Error::InvalidDomain(args.radius).into());
    }
    Ok((convexity, law))
}

fn with_noise(
    convexity: Convexity,
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
) -> CliResult<PopulationLaw> {
    let base = match convexity {
        Convexity::Convex => Benchmark::Convex.law(),
        Convexity::StronglyConvex => Benchmark::StronglyConvex.law(),
    };
    Ok(PopulationLaw::new(
        base.mean_a,
        base.mean_b,
        base.mean_c,
        a.unwrap_or(base.tau_a),
        b.unwrap_or(base.tau_b),
        c.unwrap_or(base.tau_c),
    )?)
}

fn optimizer_config(
    law: &PopulationLaw,
    radius: f64,
    step: &StepArgs,
) -> CliResult<OptimizerConfig> {
    let variant: Variant = parse(&step.variant)?;
    let (p, d) = law.dims();
    let mut cfg = OptimizerConfig::new(
        variant,
        p,
        d,
        iterations(step.iterations)?,
        step.eta,
        step.beta,
    );
    cfg.domain_radius = radius;
    cfg.validate()?;
    Ok(cfg)
}

fn dataset_sigma(ds: &crate::problem::Dataset) -> f64 {
    crate::linalg::sym_eig_range(&ds.mean_a().tr_mul(ds.mean_a()))
        .0
        .max(0.0)
}

fn write_table(table: &Table, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => Ok(emit_csv(table, p)?),
        None => write!(out, "{}", table.to_csv())
            .map_err(|e| Failure::from(Error::io(Path::new("<stdout>"), e))),
    }
}

fn say(out: &mut dyn Write, line: &str) -> CliResult<()> {
    writeln!(out, "{line}").map_err(|e| Failure::from(Error::io(Path::new("<stdout>"), e)))
}

fn gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> CliResult<()> {
    let (_, law) = build_law(&a.law)?;
    let n = count("n", a.law.n)?;
    let m = count("m", a.law.m)?;
    if !(a.h > 0.0) {
        return Err(usage("h must be > 0"));
    }
    let root = Rng::new(a.common.seed);
    let ds = law.sample_dataset(n, m, root.split("dataset"))?;
    let (p, _) = law.dims();
    let mut g = root.split("points").generator();
    let mut worst: f64 = 0.0;
    for _ in 0..a.points {
        let x = sample_ball(&mut g, p, a.law.radius);
        worst = worst.max(fd_gradient_check(&ds, &x, a.h)?);
    }
    say(out, &format!("max_rel_error={}", fmt_f64(worst)))?;
    if let Some(tol) = a.assert {
        if !(worst < tol) {
            return Err(assert_failed(format!(
                "gradient check failed: {worst:e} ≥ {tol:e}"
            )));
        }
    }
    Ok(())
}

fn optimize(a: OptimizeArgs, out: &mut dyn Write) -> CliResult<()> {
    let (_, law) = build_law(&a.law)?;
    let mut cfg = optimizer_config(&law, a.law.radius, &a.step)?;
    let n = count("n", a.law.n)?;
    let m = count("m", a.law.m)?;
    let root = Rng::new(a.common.seed);
    let ds = law.sample_dataset(n, m, root.split("dataset"))?;
    let sigma = a.sigma.or_else(|| Some(dataset_sigma(&ds)));
    cfg.output_mode = OutputMode::parse(&a.output, sigma)?;
    cfg.validate()?;
    if let OutputMode::SigmaWeighted { sigma } = cfg.output_mode {
        if !(sigma * cfg.eta < 2.0) || !(sigma > 0.0) {
            return Err(Error::UnstableWeights(sigma * cfg.eta).into());
        }
    }
    cfg.record_tracking = a.common.out.is_some();
    let traj = run(&ds, &cfg, root.split("algo"))?;
    if let Some(path) = &a.common.out {
        std::fs::write(path, traj.to_csv(&ds)).map_err(|e| Failure::from(Error::io(path, e)))?;
    }
    say(out, &traj.output_record(&cfg))
}

fn tracking(a: TrackingArgs, out: &mut dyn Write) -> CliResult<()> {
    let (convexity, law) = build_law(&a.law)?;
    let ocfg = optimizer_config(&law, a.law.radius, &a.step)?;
    let mut cfg = StudyConfig::new(
        ocfg.variant,
        convexity,
        law,
        Grid::Horizon(StepPoint {
            iterations: ocfg.iterations,
            eta: ocfg.eta,
            beta: ocfg.beta,
        }),
    );
    cfg.n = count("n", a.law.n)?;
    cfg.m = count("m", a.law.m)?;
    cfg.replicates = replicates(a.replicates)?;
    cfg.seed = a.common.seed;
    cfg.domain_radius = a.law.radius;
    cfg.tracking_c = a.c;
    cfg.threads = threads(&a.common)?;
    if !(a.c > 0.0) {
        return Err(usage("c must be > 0"));
    }
    let report = tracking_study(&cfg)?;
    let table = report.table();
    write_table(&table, a.common.out.as_deref(), out)?;
    if let Some(svg) = &a.svg {
        let series = vec![
            Series {
                label: "mean squared error".into(),
                points: report
                    .rows
                    .iter()
                    .map(|r| (r.t as f64, r.mean_sq_error))
                    .collect(),
            },
            Series {
                label: "bound".into(),
                points: report.rows.iter().map(|r| (r.t as f64, r.bound)).collect(),
            },
        ];
        let spec = ChartSpec {
            title: format!("{} tracking error", cfg.variant),
            x_label: "t".into(),
            y_label: "E|y - g_S(x)|^2".into(),
            log_x: true,
            log_y: true,
        };
        emit_svg(&series, &spec, svg)?;
    }
    if let Some(frac) = a.assert {
        if !(report.fraction_within_bound >= frac) {
            return Err(assert_failed(format!(
                "tracking bound held at {:.3} of steps, required {frac}",
                report.fraction_within_bound
            )));
        }
    }
    Ok(())
}

fn replicates(v: i64) -> CliResult<usize> {
    if v < 2 {
        return Err(usage(format!("replicates must be ≥ 2, got {v}")));
    }
    Ok(v as usize)
}

fn stability(a: StabilityArgs, out: &mut dyn Write) -> CliResult<()> {
    let (convexity, law) = build_law(&a.law)?;
    let mut cfg = optimizer_config(&law, a.law.radius, &a.step)?;
    let n = count("n", a.law.n)?;
    let m = count("m", a.law.m)?;
    let reps = replicates(a.replicates)?;
    let sigma = match a.sigma {
        Some(s) => Some(s),
        None if a.output.replace('-', "_") == "sigma_weighted" => {
            Some(crate::linalg::sym_eig_range(&law.mean_a.tr_mul(&law.mean_a)).0)
        }
        None => None,
    };
    cfg.output_mode = OutputMode::parse(&a.output, sigma)?;
    let coupling = if a.independent {
        Coupling::Independent
    } else {
        Coupling::Shared
    };
    let estimate = estimate_stability(
        &law,
        n,
        m,
        &cfg,
        reps,
        Rng::new(a.common.seed).split("stability"),
        coupling,
        threads(&a.common)?,
    )?;
    let row = StabilityRow {
        variant: cfg.variant,
        convexity,
        n,
        m,
        point: StepPoint {
            iterations: cfg.iterations,
            eta: cfg.eta,
            beta: cfg.beta,
        },
        estimate,
    };
    write_table(&stability_table(&[row]), a.common.out.as_deref(), out)
}

fn optimization(a: OptimizationArgs, out: &mut dyn Write) -> CliResult<()> {
    let (convexity, law) = build_law(&a.law)?;
    let variant: Variant = parse(&a.variant)?;
    let ts: Vec<i64> = list("T", &a.horizons)?;
    let etas: Vec<f64> = list("eta", &a.eta)?;
    let betas: Vec<f64> = list("beta", &a.beta)?;
    let pick = |v: &[f64], k: usize, name: &str| -> CliResult<f64> {
        match v.len() {
            1 => Ok(v[0]),
            l if l == ts.len() => Ok(v[k]),
            _ => Err(usage(format!("{name} needs one value or one per horizon"))),
        }
    };
    let (p, d) = law.dims();
    let mut points = Vec::with_capacity(ts.len());
    for (k, &t) in ts.iter().enumerate() {
        let point = StepPoint {
            iterations: iterations(t)?,
            eta: pick(&etas, k, "eta")?,
            beta: pick(&betas, k, "beta")?,
        };
        let mut probe =
            OptimizerConfig::new(variant, p, d, point.iterations, point.eta, point.beta);
        probe.domain_radius = a.law.radius;
        probe.validate()?;
        if !(point.eta > 0.0) {
            return Err(Error::InvalidEta(point.eta).into());
        }
        points.push(point);
    }
    let mut cfg = StudyConfig::new(variant, convexity, law, Grid::Steps(points));
    cfg.n = count("n", a.law.n)?;
    cfg.m = count("m", a.law.m)?;
    cfg.replicates = replicates(a.replicates)?;
    cfg.seed = a.common.seed;
    cfg.domain_radius = a.law.radius;
    cfg.tracking_c = a.c;
    cfg.threads = threads(&a.common)?;
    let report = optimization_study(&cfg)?;
    write_table(&report.table(), a.common.out.as_deref(), out)?;
    if let Some(svg) = &a.svg {
        let series = vec![Series {
            label: format!(
                "{variant} {}",
                default_output(convexity, report.params.sigma)
            ),
            points: report
                .rows
                .iter()
                .map(|r| (r.point.iterations as f64, r.gap_mean))
                .collect(),
        }];
        let spec = ChartSpec {
            title: "optimization error".into(),
            x_label: "T".into(),
            y_label: "F_S(A(S)) - F_S(x*)".into(),
            log_x: true,
            log_y: true,
        };
        emit_svg(&series, &spec, svg)?;
    }
    Ok(())
}

fn excess(a: ExcessArgs, out: &mut dyn Write) -> CliResult<()> {
    let convexity: Convexity = parse(&a.convexity)?;
    let variant: Variant = parse(&a.variant)?;
    let law = with_noise(convexity, a.tau_a, a.tau_b, a.tau_c)?;
    let sizes: Vec<i64> = list("sizes", &a.sizes)?;
    let sizes = sizes
        .into_iter()
        .map(|s| count("n", s).map(|n| (n, n)))
        .collect::<CliResult<Vec<_>>>()?;
    if !(a.t_constant > 0.0) || !a.t_constant.is_finite() {
        return Err(usage("t-constant must be > 0"));
    }
    if a.t_max == 0 {
        return Err(Error::InvalidIterations.into());
    }
    if !(a.radius > 0.0) {
        return Err(Error::InvalidDomain(a.radius).into());
    }
    let mut cfg = StudyConfig::new(variant, convexity, law, Grid::SampleSizes(sizes));
    cfg.replicates = replicates(a.replicates)?;
    cfg.seed = a.common.seed;
    cfg.t_constant = a.t_constant;
    cfg.t_max = a.t_max;
    cfg.domain_radius = a.radius;
    cfg.threads = threads(&a.common)?;
    let report = excess_risk_study(&cfg)?;
    write_table(&report.table(), a.common.out.as_deref(), out)?;
    if let Some(svg) = &a.svg {
        let series = vec![Series {
            label: format!("{variant} slope {:.3}", report.fitted_slope),
            points: report
                .rows
                .iter()
                .map(|r| (r.n as f64, r.excess_mean))
                .collect(),
        }];
        let spec = ChartSpec {
            title: "excess risk".into(),
            x_label: "n = m".into(),
            y_label: "F(A(S)) - F(x*)".into(),
            log_x: true,
            log_y: true,
        };
        emit_svg(&series, &spec, svg)?;
    }
    Ok(())
}

fn schedule(a: ScheduleArgs, out: &mut dyn Write) -> CliResult<()> {
    let variant: Variant = parse(&a.variant)?;
    let convexity: Convexity = parse(&a.convexity)?;
    let n = count("n", a.n)?;
    let m = count("m", a.m)?;
    if !(a.t_constant > 0.0) {
        return Err(usage("t-constant must be > 0"));
    }
    let (s, capped) =
        schedule_preset_scaled(variant, convexity, n, m, a.t_constant, a.t_max.max(1));
    let mut line = format!(
        "T={}, eta={}, beta={}",
        s.iterations,
        fmt_f64(s.eta),
        fmt_f64(s.beta)
    );
    if capped {
        line.push_str(" (capped)");
    }
    say(out, &line)
}

fn oracle(a: OracleArgs, out: &mut dyn Write) -> CliResult<()> {
    let (_, law) = build_law(&a.law)?;
    let cert = if a.population {
        population_minimizer(&law, a.law.radius)?
    } else {
        let n = count("n", a.law.n)?;
        let m = count("m", a.law.m)?;
        let ds = law.sample_dataset(n, m, Rng::new(a.common.seed).split("dataset"))?;
        erm_minimizer(&ds, a.law.radius)?
    };
    let coords: Vec<String> = cert.x_star.iter().map(|v| fmt_f64(*v)).collect();
    say(out, &format!("value={}", fmt_f64(cert.value)))?;
    say(out, &format!("method={:?}", cert.method))?;
    say(out, &format!("kkt_residual={}", fmt_f64(cert.kkt_residual)))?;
    say(out, &format!("x_star={}", coords.join(",")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("scolab".to_string())
            .chain(s.split_whitespace().map(String::from))
            .collect()
    }

    fn capture(s: &str) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run_with_output(&argv(s), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn schedule_example() {
        let (code, text) = capture("schedule --variant scsc --convexity convex --n 4 --m 4");
        assert_eq!(code, 0);
        let expect = format!(
            "T=32, eta={}, beta={}\n",
            fmt_f64(32f64.powf(-0.8)),
            fmt_f64(32f64.powf(-0.8))
        );
        assert_eq!(text, expect);
    }

    #[test]
    fn negative_horizon_is_usage_error() {
        let err = dispatch(&argv("optimize --T -5"), &mut Vec::new()).unwrap_err();
        assert_eq!(err.code, 2);
        assert_eq!(err.message, "T must be ≥ 1");
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let err = dispatch(&argv("optimize --bogus 3"), &mut Vec::new()).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(!err.message.contains('\n'));
    }

    #[test]
    fn gradcheck_assert() {
        assert_eq!(capture("gradcheck --seed 1 --assert 1e-5").0, 0);
        assert_eq!(capture("gradcheck --seed 1 --assert 0").0, 1);
    }

    #[test]
    fn config_values_are_overridden_by_flags() {
        let args = parse_config("# comment\nn = 4\nm=4 # trailing\nindependent=false\n").unwrap();
        assert_eq!(args, vec!["--n", "4", "--m", "4"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "variant=scsc\nconvexity=convex\nn=4\nm=4\n").unwrap();
        let (code, text) = capture(&format!("schedule --config {} --n 8", path.display()));
        assert_eq!(code, 0);
        // max(8, 4)^2.5 = 181.02
        assert!(text.starts_with("T=182,"), "{text}");
        std::fs::write(&path, "nonsense=1\n").unwrap();
        assert_eq!(
            capture(&format!("schedule --config {} --n 8 --m 8", path.display())).0,
            2
        );
    }

    #[test]
    fn malformed_config_line_is_usage_error() {
        assert_eq!(parse_config("just words").unwrap_err().code, 2);
    }
}
