//! Monte Carlo studies: tracking error against its bound, optimization error
//! against the horizon, and excess risk against the sample size.
//!
//! Every replicate owns an rng child keyed by `(grid index, replicate)`, so
//! rows are identical for any worker count.

use crate::bounds::{optimization_bound, tracking_bound};
use crate::constants::{compute_constants, BoundParams, DEFAULT_TRACKING_C};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::optimizer::{
    run, schedule_preset_scaled, tracking_step, Convexity, OptimizerConfig, OutputMode, Variant,
};
use crate::oracle::{erm_minimizer, population_minimizer};
use crate::par::{mean_se, par_map};
use crate::problem::{CompositionalProblem, Dataset, PopulationLaw};
use crate::report::{fmt_f64, Cell, Table};
use crate::rng::Rng;

/// Grid points with `t` below this are excluded from tracking comparisons.
pub const TRACKING_BURN_IN: usize = 10;
/// Iteration cap for the excess-risk presets.
pub const DEFAULT_T_MAX: usize = 2_000_000;
/// Points on the sphere used to back up exact constant computations.
pub const CONSTANTS_GRID: usize = 1024;

/// `(T, η, β)` grid point for optimization studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPoint {
    pub iterations: usize,
    pub eta: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// `(n, m)` pairs.
    SampleSizes(Vec<(usize, usize)>),
    Steps(Vec<StepPoint>),
    /// Single horizon with constant steps; rows are log-spaced `t`.
    Horizon(StepPoint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub variant: Variant,
    pub convexity: Convexity,
    pub law: PopulationLaw,
    pub grid: Grid,
    pub replicates: usize,
    pub seed: u64,
    /// Dataset size for studies that fix `S`.
    pub n: usize,
    pub m: usize,
    pub domain_radius: f64,
    pub tracking_c: f64,
    /// Constant in `T = ceil(constant · max(n,m)^e)`.
    pub t_constant: f64,
    pub t_max: usize,
    pub threads: Option<usize>,
}

impl StudyConfig {
    pub fn new(variant: Variant, convexity: Convexity, law: PopulationLaw, grid: Grid) -> Self {
        StudyConfig {
            variant,
            convexity,
            law,
            grid,
            replicates: 50,
            seed: 0,
            n: 50,
            m: 50,
            domain_radius: 10.0,
            tracking_c: DEFAULT_TRACKING_C,
            t_constant: 1.0,
            t_max: DEFAULT_T_MAX,
            threads: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidConfig("replicates must be ≥ 2".into()));
        }
        let empty = match &self.grid {
            Grid::SampleSizes(g) => g.is_empty(),
            Grid::Steps(g) => g.is_empty(),
            Grid::Horizon(_) => false,
        };
        if empty {
            return Err(Error::InvalidConfig("grid must not be empty".into()));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(())
    }

    fn root(&self) -> Rng {
        Rng::new(self.seed)
    }
}

/// `E_j ‖y_1 − g_S(x_0)‖²` computed exactly over the first inner index.
pub fn measured_dy<P: CompositionalProblem + ?Sized>(
    problem: &P,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    let gs = problem.empirical_inner(&cfg.x0);
    let mut acc = 0.0;
    for j in 0..problem.m() {
        let g = problem.inner_value(j, &cfg.x0);
        // x_{-1} = x_0, so both variants share the first tracker update
        let y1 = tracking_step(cfg.variant, &cfg.y0, &g, &g, cfg.beta)?;
        acc += (y1 - &gs).norm_squared();
    }
    Ok(acc / problem.m() as f64)
}

/// About `points` log-spaced integers in `1..=last`.
pub fn log_grid(last: usize, points: usize) -> Vec<usize> {
    if last == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (0..points.max(2))
        .map(|k| {
            let frac = k as f64 / (points.max(2) - 1) as f64;
            (last as f64).powf(frac).round().max(1.0) as usize
        })
        .collect();
    out.push(last);
    out.sort_unstable();
    out.dedup();
    out
}

fn base_config(cfg: &StudyConfig, point: StepPoint) -> OptimizerConfig {
    let (p, d) = cfg.law.dims();
    let mut oc = OptimizerConfig::new(cfg.variant, p, d, point.iterations, point.eta, point.beta);
    oc.domain_radius = cfg.domain_radius;
    oc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingRow {
    pub t: usize,
    pub mean_sq_error: f64,
    pub se: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    pub rows: Vec<TrackingRow>,
    pub params: BoundParams,
    /// Fraction of rows with `t ≥ burn-in` where the mean is within the bound.
    pub fraction_within_bound: f64,
}

/// Mean squared tracking error `‖y_{t+1} − g_S(x_t)‖²` over replicates on a
/// fixed dataset, next to the tracking bound at the same `t`.
pub fn tracking_study(cfg: &StudyConfig) -> Result<TrackingReport> {
    cfg.validate()?;
    let Grid::Horizon(point) = cfg.grid else {
        return Err(Error::InvalidConfig(
            "tracking study needs a single (T, eta, beta) horizon".into(),
        ));
    };
    let ds = cfg
        .law
        .sample_dataset(cfg.n, cfg.m, cfg.root().split("dataset"))?;
    let mut oc = base_config(cfg, point);
    oc.record_tracking = true;
    tracking_study_on(&ds, &oc, cfg)
}

/// Tracking study on a given dataset and optimizer configuration.
pub fn tracking_study_on(
    ds: &Dataset,
    oc: &OptimizerConfig,
    cfg: &StudyConfig,
) -> Result<TrackingReport> {
    let mut oc = oc.clone();
    oc.record_tracking = true;
    let params = compute_constants(ds, oc.domain_radius, CONSTANTS_GRID)?
        .with_measured_dy(measured_dy(ds, &oc)?)
        .with_c(cfg.tracking_c);
    let ts = log_grid(oc.iterations.saturating_sub(1), 64);
    let root = cfg.root().split("tracking");
    let per_rep: Vec<Vec<f64>> = par_map(cfg.replicates, cfg.threads, |r| {
        let traj = run(ds, &oc, root.split_index("replicate", r as u64))?;
        Ok(ts.iter().map(|&t| traj.tracking_sq_errors[t]).collect())
    })?;
    let mut rows = Vec::with_capacity(ts.len());
    for (k, &t) in ts.iter().enumerate() {
        let vals: Vec<f64> = per_rep.iter().map(|v| v[k]).collect();
        let (mean, se) = mean_se(&vals);
        let bound = tracking_bound(oc.variant, t, &params, oc.eta, oc.beta)?.value;
        rows.push(TrackingRow {
            t,
            mean_sq_error: mean,
            se,
            bound,
        });
    }
    let eligible: Vec<&TrackingRow> = rows.iter().filter(|r| r.t >= TRACKING_BURN_IN).collect();
    let within = eligible
        .iter()
        .filter(|r| r.mean_sq_error <= r.bound)
        .count();
    let fraction_within_bound = if eligible.is_empty() {
        f64::NAN
    } else {
        within as f64 / eligible.len() as f64
    };
    Ok(TrackingReport {
        rows,
        params,
        fraction_within_bound,
    })
}

impl TrackingReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["t", "mean_sq_error", "se", "bound"]);
        for r in &self.rows {
            t.push(vec![
                Cell::Int(r.t as u64),
                Cell::Float(r.mean_sq_error),
                Cell::Float(r.se),
                Cell::Float(r.bound),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationRow {
    pub point: StepPoint,
    pub gap_mean: f64,
    pub gap_se: f64,
    /// Rate with unit constants at this grid point.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub rows: Vec<OptimizationRow>,
    pub optimum: f64,
    pub params: BoundParams,
}

/// Default output for each convexity: uniform average for convex
/// problems, sigma-weighted for strongly convex ones.
pub fn default_output(convexity: Convexity, sigma: f64) -> OutputMode {
    match convexity {
        Convexity::Convex => OutputMode::UniformAverage,
        Convexity::StronglyConvex => OutputMode::SigmaWeighted { sigma },
    }
}

/// Optimization error `F_S(A(S)) − F_S(x★)` on one fixed dataset across a grid
/// of `(T, η, β)`.
pub fn optimization_study(cfg: &StudyConfig) -> Result<OptimizationReport> {
    cfg.validate()?;
    let Grid::Steps(points) = &cfg.grid else {
        return Err(Error::InvalidConfig(
            "optimization study needs a (T, eta, beta) grid".into(),
        ));
    };
    let ds = cfg
        .law
        .sample_dataset(cfg.n, cfg.m, cfg.root().split("dataset"))?;
    let cert = erm_minimizer(&ds, cfg.domain_radius)?;
    let base = compute_constants(&ds, cfg.domain_radius, CONSTANTS_GRID)?.with_c(cfg.tracking_c);
    let root = cfg.root().split("optimization");
    let mut rows = Vec::with_capacity(points.len());
    let mut params = base;
    for (g, point) in points.iter().enumerate() {
        let mut oc = base_config(cfg, *point);
        oc.output_mode = default_output(cfg.convexity, base.sigma);
        params = base
            .with_measured_dy(measured_dy(&ds, &oc)?)
            .with_dx(match cfg.convexity {
                Convexity::Convex => base.d_x,
                Convexity::StronglyConvex => ds.empirical_risk(&oc.x0) - cert.value,
            });
        let grid_rng = root.split_index("grid", g as u64);
        let gaps = par_map(cfg.replicates, cfg.threads, |r| {
            let traj = run(&ds, &oc, grid_rng.split_index("replicate", r as u64))?;
            Ok(ds.empirical_risk(&traj.final_output) - cert.value)
        })?;
        let (gap_mean, gap_se) = mean_se(&gaps);
        let bound = optimization_bound(
            cfg.variant,
            cfg.convexity,
            point.iterations,
            point.eta,
            point.beta,
            &params,
        )
        .map(|b| b.value)
        .unwrap_or(f64::NAN);
        rows.push(OptimizationRow {
            point: *point,
            gap_mean,
            gap_se,
            bound,
        });
    }
    Ok(OptimizationReport {
        rows,
        optimum: cert.value,
        params,
    })
}

impl OptimizationReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["T", "eta", "beta", "gap_mean", "gap_se"]);
        for r in &self.rows {
            t.push(vec![
                Cell::Int(r.point.iterations as u64),
                Cell::Float(r.point.eta),
                Cell::Float(r.point.beta),
                Cell::Float(r.gap_mean),
                Cell::Float(r.gap_se),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessRow {
    pub n: usize,
    pub m: usize,
    pub point: StepPoint,
    pub capped: bool,
    pub excess_mean: f64,
    pub excess_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcessReport {
    pub rows: Vec<ExcessRow>,
    /// Least-squares slope of `ln(excess_mean)` on `ln(n)`.
    pub fitted_slope: f64,
    pub t_max: usize,
}

/// Least-squares slope of `ln y` against `ln x`; NaN if any value is not positive.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() < 2 || xs.len() != ys.len() || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return f64::NAN;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Population excess risk `F(A(S)) − F(x★)` with fresh `S` per replicate and
/// the preset `(T, η, β)` for each sample size.
pub fn excess_risk_study(cfg: &StudyConfig) -> Result<ExcessReport> {
    cfg.validate()?;
    let Grid::SampleSizes(sizes) = &cfg.grid else {
        return Err(Error::InvalidConfig(
            "excess-risk study needs an (n, m) grid".into(),
        ));
    };
    let optimum = population_minimizer(&cfg.law, cfg.domain_radius)?.value;
    let root = cfg.root().split("excess");
    let mut rows = Vec::with_capacity(sizes.len());
    for (g, &(n, m)) in sizes.iter().enumerate() {
        if n == 0 || m == 0 {
            return Err(Error::EmptyDataset);
        }
        let (sched, capped) =
            schedule_preset_scaled(cfg.variant, cfg.convexity, n, m, cfg.t_constant, cfg.t_max);
        let point = StepPoint {
            iterations: sched.iterations,
            eta: sched.eta,
            beta: sched.beta,
        };
        let grid_rng = root.split_index("grid", g as u64);
        let excess = par_map(cfg.replicates, cfg.threads, |r| {
            let rep = grid_rng.split_index("replicate", r as u64);
            let ds = cfg.law.sample_dataset(n, m, rep.split("data"))?;
            let mut oc = base_config(cfg, point);
            let sigma = compute_sigma(&ds);
            oc.output_mode = match cfg.convexity {
                Convexity::StronglyConvex if sigma * oc.eta < 2.0 && sigma > 0.0 => {
                    default_output(cfg.convexity, sigma)
                }
                Convexity::StronglyConvex => {
                    return Err(Error::InvalidConfig(format!(
                        "sigma-weighted output unavailable (sigma={sigma}, eta={})",
                        oc.eta
                    )))
                }
                Convexity::Convex => default_output(cfg.convexity, 0.0),
            };
            let traj = run(&ds, &oc, rep.split("algo"))?;
            Ok(cfg.law.population_risk(&traj.final_output)? - optimum)
        })?;
        let (excess_mean, excess_se) = mean_se(&excess);
        rows.push(ExcessRow {
            n,
            m,
            point,
            capped,
            excess_mean,
            excess_se,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.excess_mean).collect();
    Ok(ExcessReport {
        fitted_slope: log_log_slope(&xs, &ys),
        rows,
        t_max: cfg.t_max,
    })
}

fn compute_sigma(ds: &Dataset) -> f64 {
    let hess = ds.mean_a().tr_mul(ds.mean_a());
    crate::linalg::sym_eig_range(&hess).0.max(0.0)
}

impl ExcessReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["n", "m", "T", "eta", "beta", "excess_mean", "excess_se"]);
        for r in &self.rows {
            t.push(vec![
                Cell::Int(r.n as u64),
                Cell::Int(r.m as u64),
                Cell::Int(r.point.iterations as u64),
                Cell::Float(r.point.eta),
                Cell::Float(r.point.beta),
                Cell::Float(r.excess_mean),
                Cell::Float(r.excess_se),
            ]);
        }
        t.footer
            .push(("fitted_slope".into(), fmt_f64(self.fitted_slope)));
        t.footer.push(("t_max".into(), self.t_max.to_string()));
        let capped: Vec<String> = self
            .rows
            .iter()
            .filter(|r| r.capped)
            .map(|r| r.n.to_string())
            .collect();
        t.footer.push(("capped_n".into(), capped.join(" ")));
        t
    }
}

/// Stability rows for `stability.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub variant: Variant,
    pub convexity: Convexity,
    pub n: usize,
    pub m: usize,
    pub point: StepPoint,
    pub estimate: crate::stability::StabilityEstimate,
}

pub fn stability_table(rows: &[StabilityRow]) -> Table {
    let mut t = Table::new(&[
        "variant",
        "convexity",
        "n",
        "m",
        "T",
        "eta",
        "beta",
        "replicates",
        "eps_nu_hat",
        "eps_nu_se",
        "eps_omega_hat",
        "eps_omega_se",
    ]);
    for r in rows {
        t.push(vec![
            Cell::Text(r.variant.to_string()),
            Cell::Text(r.convexity.to_string()),
            Cell::Int(r.n as u64),
            Cell::Int(r.m as u64),
            Cell::Int(r.point.iterations as u64),
            Cell::Float(r.point.eta),
            Cell::Float(r.point.beta),
            Cell::Int(r.estimate.replicates as u64),
            Cell::Float(r.estimate.eps_nu_hat),
            Cell::Float(r.estimate.eps_nu_se),
            Cell::Float(r.estimate.eps_omega_hat),
            Cell::Float(r.estimate.eps_omega_se),
        ]);
    }
    let coupled = rows.iter().all(|r| r.estimate.coupled);
    t.footer.push((
        "index_streams".into(),
        if coupled { "coupled" } else { "independent" }.into(),
    ));
    t.footer.push((
        "estimate".into(),
        "mean over a uniformly drawn replaced index; lower estimate of the uniform sup".into(),
    ));
    t
}

/// Starting point helper: `y0 = g_{ω_j}(x0)` for a random `j`.
pub fn sampled_tracker_start<P: CompositionalProblem + ?Sized>(
    problem: &P,
    x0: &Vector,
    rng: Rng,
) -> Vector {
    use rand::Rng as _;
    let j = rng.generator().gen_range(0..problem.m() as u64) as usize;
    problem.inner_value(j, x0)
}
