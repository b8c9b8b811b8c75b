//! SCGD and SCSC: two-timescale projected stochastic compositional gradient
//! descent.
//!
//! Each step samples an inner index `j_t`, refreshes the tracker `y` of
//! `g_S(x_t)`, samples an outer index `i_t` and takes the projected step
//! `x_{t+1} = Π(x_t − η ∇g_{ω_{j_t}}(x_t) ∇f_{ν_{i_t}}(y_{t+1}))`.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, mat_vec, project_ball, project_ball_unchecked, Matrix, Vector};
use crate::problem::CompositionalProblem;
use crate::rng::Rng;

/// Stored iterates are thinned to at most this many points by default.
pub const MAX_STORED_ITERATES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Scgd,
    Scsc,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Scgd => "scgd",
            Variant::Scsc => "scsc",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scgd" => Ok(Variant::Scgd),
            "scsc" => Ok(Variant::Scsc),
            other => Err(Error::Parse(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Convexity {
    Convex,
    StronglyConvex,
}

impl fmt::Display for Convexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convexity::Convex => "convex",
            Convexity::StronglyConvex => "strongly_convex",
        })
    }
}

impl FromStr for Convexity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "convex" => Ok(Convexity::Convex),
            "strongly_convex" | "strong" => Ok(Convexity::StronglyConvex),
            other => Err(Error::Parse(format!("unknown convexity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputMode {
    /// `A(S) = x_T`.
    Last,
    /// `(1/T) Σ_t x_t`.
    UniformAverage,
    /// `Σ_t w^{T−t} x_t / Σ_t w^{T−t}` with `w = 1 − ση/2`.
    SigmaWeighted { sigma: f64 },
    /// `x_τ` with `τ` uniform on `1..=T`.
    UniformRandom,
}

impl fmt::Display for OutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputMode::Last => f.write_str("last"),
            OutputMode::UniformAverage => f.write_str("uniform_average"),
            OutputMode::SigmaWeighted { sigma } => write!(f, "sigma_weighted({sigma})"),
            OutputMode::UniformRandom => f.write_str("uniform_random"),
        }
    }
}

impl OutputMode {
    /// Parses `last`, `uniform_average`, `uniform_random` or `sigma_weighted`
    /// (the latter takes `sigma` separately).
    pub fn parse(s: &str, sigma: Option<f64>) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "last" => Ok(OutputMode::Last),
            "uniform_average" | "average" => Ok(OutputMode::UniformAverage),
            "uniform_random" | "random" => Ok(OutputMode::UniformRandom),
            "sigma_weighted" => match sigma {
                Some(sigma) => Ok(OutputMode::SigmaWeighted { sigma }),
                None => Err(Error::InvalidConfig(
                    "sigma_weighted output needs sigma".into(),
                )),
            },
            other => Err(Error::Parse(format!("unknown output mode `{other}`"))),
        }
    }

    fn weight_ratio(self, eta: f64) -> Result<Option<f64>> {
        match self {
            OutputMode::SigmaWeighted { sigma } => {
                if !(sigma > 0.0) || !(eta > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "sigma_weighted output needs sigma > 0 and eta > 0 (sigma={sigma}, eta={eta})"
                    )));
                }
                if sigma * eta >= 2.0 {
                    return Err(Error::UnstableWeights(sigma * eta));
                }
                Ok(Some(1.0 - sigma * eta / 2.0))
            }
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    /// Keep at most [`MAX_STORED_ITERATES`] iterates at a uniform stride.
    Thinned,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub variant: Variant,
    pub iterations: usize,
    pub eta: f64,
    pub beta: f64,
    pub domain_radius: f64,
    pub x0: Vector,
    pub y0: Vector,
    pub output_mode: OutputMode,
    pub record_tracking: bool,
    pub recording: Recording,
}

impl OptimizerConfig {
    /// Starts at `x0 = 0`, `y0 = 0` with last-iterate output.
    pub fn new(
        variant: Variant,
        p: usize,
        d: usize,
        iterations: usize,
        eta: f64,
        beta: f64,
    ) -> Self {
        OptimizerConfig {
            variant,
            iterations,
            eta,
            beta,
            domain_radius: 10.0,
            x0: Vector::zeros(p),
            y0: Vector::zeros(d),
            output_mode: OutputMode::Last,
            record_tracking: false,
            recording: Recording::Thinned,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidIterations);
        }
        // eta = 0 is accepted: it freezes x and is handy as a degenerate control.
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidEta(self.eta));
        }
        check_beta(self.beta)?;
        if !(self.domain_radius > 0.0) || !self.domain_radius.is_finite() {
            return Err(Error::InvalidDomain(self.domain_radius));
        }
        if !crate::linalg::is_finite(&self.x0) || !crate::linalg::is_finite(&self.y0) {
            return Err(Error::NonFinite);
        }
        if self.x0.norm() > self.domain_radius * (1.0 + 1e-12) {
            return Err(Error::InfeasibleStart);
        }
        self.output_mode
            .weight_ratio(self.eta.max(f64::MIN_POSITIVE))?;
        Ok(())
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(t, x_t)` for the stored iterates, `t ∈ 1..=T`.
    pub iterates: Vec<(usize, Vector)>,
    /// Storage stride; 1 when every iterate is kept.
    pub stride: usize,
    /// `‖y_{t+1} − g_S(x_t)‖²` for `t = 0..T−1`, when recorded.
    pub tracking_sq_errors: Vec<f64>,
    /// Sampled `(j_t, i_t)`, zero-based.
    pub index_log: Vec<(u32, u32)>,
    /// Index `τ ∈ 1..=T` used by the uniform-random output.
    pub random_index: usize,
    pub last: Vector,
    pub uniform_average: Vector,
    /// Present when the run was configured with the sigma-weighted output.
    pub sigma_weighted: Option<Vector>,
    pub random_pick: Vector,
    pub final_output: Vector,
}

impl Trajectory {
    pub fn is_full(&self) -> bool {
        self.stride == 1 && self.iterates.len() == self.index_log.len()
    }

    /// Writes `t,f_empirical,tracking_sq_error,x_norm` for the stored iterates.
    /// The tracking column at row `t` is `‖y_t − g_S(x_{t−1})‖²`.
    pub fn to_csv<P: CompositionalProblem + ?Sized>(&self, problem: &P) -> String {
        let mut out = String::from("t,f_empirical,tracking_sq_error,x_norm\n");
        for (t, x) in &self.iterates {
            let track = self
                .tracking_sq_errors
                .get(t - 1)
                .copied()
                .unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{},{},{},{}\n",
                t,
                crate::report::fmt_f64(problem.empirical_risk(x)),
                crate::report::fmt_f64(track),
                crate::report::fmt_f64(x.norm())
            ));
        }
        out
    }

    /// Single-line record of the selected output.
    pub fn output_record(&self, cfg: &OptimizerConfig) -> String {
        let coords: Vec<String> = self
            .final_output
            .iter()
            .map(|v| crate::report::fmt_f64(*v))
            .collect();
        format!(
            "{{\"mode\": \"{}\", \"T\": {}, \"eta\": {}, \"beta\": {}, \"x\": [{}]}}",
            cfg.output_mode,
            cfg.iterations,
            crate::report::fmt_f64(cfg.eta),
            crate::report::fmt_f64(cfg.beta),
            coords.join(", ")
        )
    }
}

/// Tracker update.
///
/// SCGD: `y' = (1−β) y + β g_cur`.
/// SCSC: `y' = (1−β)(y + g_cur − g_prev) + β g_cur`, where `g_cur` and `g_prev`
/// are the same sampled inner function at `x_t` and `x_{t−1}`.
pub fn tracking_step(
    variant: Variant,
    y: &Vector,
    g_cur: &Vector,
    g_prev: &Vector,
    beta: f64,
) -> Result<Vector> {
    check_beta(beta)?;
    check_dim(y.len(), g_cur.len())?;
    match variant {
        Variant::Scgd => Ok(y * (1.0 - beta) + g_cur * beta),
        Variant::Scsc => {
            check_dim(y.len(), g_prev.len())?;
            Ok((y + g_cur - g_prev) * (1.0 - beta) + g_cur * beta)
        }
    }
}

/// `Π(x − η · J · ∇f)` onto the ball of radius `radius`.
pub fn param_step(
    x: &Vector,
    jac: &Matrix,
    outer_grad: &Vector,
    eta: f64,
    radius: f64,
) -> Result<Vector> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidEta(eta));
    }
    check_dim(jac.nrows(), x.len())?;
    let dir = mat_vec(jac, outer_grad)?;
    project_ball(&(x - dir * eta), radius)
}

/// Source of the `(j_t, i_t)` index sequence.
///
/// Two runs built from the same `Rng` and sizes draw identical sequences,
/// which is how coupled runs share their randomness.
pub struct IndexStream {
    gen: rand_chacha::ChaCha8Rng,
    n: u64,
    m: u64,
}

impl IndexStream {
    pub fn new(rng: Rng, n: usize, m: usize) -> Self {
        IndexStream {
            gen: rng.split("indices").generator(),
            n: n as u64,
            m: m as u64,
        }
    }

    pub fn next_inner(&mut self) -> usize {
        self.gen.gen_range(0..self.m) as usize
    }

    pub fn next_outer(&mut self) -> usize {
        self.gen.gen_range(0..self.n) as usize
    }
}

/// Executes `cfg.iterations` steps of the configured variant on `problem`.
pub fn run<P: CompositionalProblem + ?Sized>(
    problem: &P,
    cfg: &OptimizerConfig,
    rng: Rng,
) -> Result<Trajectory> {
    cfg.validate()?;
    let (p, d) = problem.dims();
    check_dim(p, cfg.x0.len())?;
    check_dim(d, cfg.y0.len())?;
    if problem.n() == 0 || problem.m() == 0 {
        return Err(Error::EmptyDataset);
    }
    let t_total = cfg.iterations;
    let ratio = cfg.output_mode.weight_ratio(cfg.eta)?;
    let random_index = rng
        .split("output")
        .generator()
        .gen_range(1..=t_total as u64) as usize;
    let stride = match cfg.recording {
        Recording::Full => 1,
        Recording::Thinned => t_total.div_ceil(MAX_STORED_ITERATES).max(1),
    };

    let mut indices = IndexStream::new(rng, problem.n(), problem.m());
    let mut x = cfg.x0.clone();
    let mut x_prev = cfg.x0.clone();
    let mut y = cfg.y0.clone();

    let mut iterates =
        Vec::with_capacity((t_total / stride).min(MAX_STORED_ITERATES.max(t_total / stride)));
    let mut tracking = if cfg.record_tracking {
        Vec::with_capacity(t_total)
    } else {
        Vec::new()
    };
    let mut index_log = Vec::with_capacity(t_total);
    let mut sum = Vector::zeros(p);
    let mut weighted = Vector::zeros(p);
    let mut weight_total = 0.0;
    let mut random_pick = cfg.x0.clone();

    for t in 0..t_total {
        let j = indices.next_inner();
        let g_cur = problem.inner_value(j, &x);
        y = match cfg.variant {
            Variant::Scgd => tracking_step(Variant::Scgd, &y, &g_cur, &g_cur, cfg.beta)?,
            Variant::Scsc => {
                let g_prev = problem.inner_value(j, &x_prev);
                tracking_step(Variant::Scsc, &y, &g_cur, &g_prev, cfg.beta)?
            }
        };
        if cfg.record_tracking {
            tracking.push((&y - problem.empirical_inner(&x)).norm_squared());
        }
        let i = indices.next_outer();
        index_log.push((j as u32, i as u32));
        let outer = problem.outer_gradient(i, &y);
        let dir = problem.inner_vjp(j, &x, &outer);
        let next = project_ball_unchecked(&x - dir * cfg.eta, cfg.domain_radius);
        if !crate::linalg::is_finite(&next) {
            return Err(Error::NonFinite);
        }
        x_prev = std::mem::replace(&mut x, next);

        let step = t + 1;
        sum += &x;
        if let Some(w) = ratio {
            weighted = weighted * w + &x;
            weight_total = weight_total * w + 1.0;
        }
        if step == random_index {
            random_pick = x.clone();
        }
        if step % stride == 0 {
            iterates.push((step, x.clone()));
        }
    }

    let uniform_average = sum / t_total as f64;
    let sigma_weighted = ratio.map(|_| weighted / weight_total);
    let final_output = match cfg.output_mode {
        OutputMode::Last => x.clone(),
        OutputMode::UniformAverage => uniform_average.clone(),
        OutputMode::SigmaWeighted { .. } => sigma_weighted.clone().expect("weights present"),
        OutputMode::UniformRandom => random_pick.clone(),
    };
    Ok(Trajectory {
        iterates,
        stride,
        tracking_sq_errors: tracking,
        index_log,
        random_index,
        last: x,
        uniform_average,
        sigma_weighted,
        random_pick,
        final_output,
    })
}

/// Output selection over the stored iterates of a fully recorded trajectory.
pub fn select_output(traj: &Trajectory, mode: OutputMode, eta: f64) -> Result<Vector> {
    if !traj.is_full() {
        return Err(Error::ThinnedTrajectory);
    }
    let xs: Vec<&Vector> = traj.iterates.iter().map(|(_, x)| x).collect();
    select_from_iterates(&xs, mode, eta, traj.random_index)
}

/// Output selection over `x_1..x_T`.
pub fn select_from_iterates(
    xs: &[&Vector],
    mode: OutputMode,
    eta: f64,
    random_index: usize,
) -> Result<Vector> {
    let last = *xs.last().ok_or(Error::InvalidIterations)?;
    match mode {
        OutputMode::Last => Ok(last.clone()),
        OutputMode::UniformAverage => {
            let mut acc = Vector::zeros(last.len());
            for x in xs {
                acc += *x;
            }
            Ok(acc / xs.len() as f64)
        }
        OutputMode::SigmaWeighted { .. } => {
            let w = mode.weight_ratio(eta)?.expect("sigma mode");
            let mut acc = Vector::zeros(last.len());
            let mut total = 0.0;
            for x in xs {
                acc = acc * w + *x;
                total = total * w + 1.0;
            }
            Ok(acc / total)
        }
        OutputMode::UniformRandom => xs
            .get(random_index.wrapping_sub(1))
            .map(|x| (*x).clone())
            .ok_or(Error::IndexOutOfRange {
                index: random_index,
                len: xs.len(),
            }),
    }
}

/// Iteration count and constant step sizes `(T, η, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub iterations: usize,
    pub eta: f64,
    pub beta: f64,
}

/// Exponents of a preset: `T ≍ max(n,m)^{num/den}`, `η = T^{−a}`, `β = T^{−b}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePreset {
    pub t_num: u32,
    pub t_den: u32,
    pub a: f64,
    pub b: f64,
}

impl SchedulePreset {
    pub fn for_setting(variant: Variant, convexity: Convexity) -> Self {
        match (variant, convexity) {
            (Variant::Scgd, Convexity::Convex) => SchedulePreset {
                t_num: 7,
                t_den: 2,
                a: 6.0 / 7.0,
                b: 4.0 / 7.0,
            },
            (Variant::Scsc, Convexity::Convex) => SchedulePreset {
                t_num: 5,
                t_den: 2,
                a: 4.0 / 5.0,
                b: 4.0 / 5.0,
            },
            (Variant::Scgd, Convexity::StronglyConvex) => SchedulePreset {
                t_num: 5,
                t_den: 3,
                a: 9.0 / 10.0,
                b: 3.0 / 5.0,
            },
            (Variant::Scsc, Convexity::StronglyConvex) => SchedulePreset {
                t_num: 7,
                t_den: 6,
                a: 6.0 / 7.0,
                b: 6.0 / 7.0,
            },
        }
    }

    pub fn t_exponent(&self) -> f64 {
        f64::from(self.t_num) / f64::from(self.t_den)
    }

    /// `ceil(k^{num/den})`, exact in integers whenever `k^num` fits in `u128`.
    pub fn iterations_for(&self, k: usize) -> usize {
        let k = k.max(1);
        let estimate = (k as f64).powf(self.t_exponent()).ceil();
        let Some(target) = (k as u128).checked_pow(self.t_num) else {
            return estimate as usize;
        };
        let meets = |t: u128| t.checked_pow(self.t_den).is_none_or(|v| v >= target);
        let mut t = (estimate as u128).max(1);
        while t > 1 && meets(t - 1) {
            t -= 1;
        }
        while !meets(t) {
            t += 1;
        }
        t as usize
    }

    pub fn schedule(&self, iterations: usize) -> Schedule {
        let tf = iterations as f64;
        Schedule {
            iterations,
            eta: tf.powf(-self.a),
            beta: tf.powf(-self.b),
        }
    }
}

/// Preset `(T, η, β)` for the given variant and convexity with `T = ceil(max(n,m)^e)`.
pub fn schedule_preset(variant: Variant, convexity: Convexity, n: usize, m: usize) -> Schedule {
    let preset = SchedulePreset::for_setting(variant, convexity);
    preset.schedule(preset.iterations_for(n.max(m)))
}

/// As [`schedule_preset`] with `T = ceil(constant · max(n,m)^e)`, capped at `t_max`.
/// Returns the schedule and whether the cap was applied.
pub fn schedule_preset_scaled(
    variant: Variant,
    convexity: Convexity,
    n: usize,
    m: usize,
    constant: f64,
    t_max: usize,
) -> (Schedule, bool) {
    let preset = SchedulePreset::for_setting(variant, convexity);
    let raw = if constant == 1.0 {
        preset.iterations_for(n.max(m))
    } else {
        (constant * (n.max(m) as f64).powf(preset.t_exponent()))
            .ceil()
            .max(1.0) as usize
    };
    let capped = raw > t_max;
    (preset.schedule(raw.min(t_max)), capped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Benchmark, Dataset, InnerSample, OuterSample};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn tracking_step_examples() {
        let y = v(&[1.0, 0.0]);
        let g = v(&[0.0, 1.0]);
        assert_eq!(
            tracking_step(Variant::Scgd, &y, &g, &y, 0.5).unwrap(),
            v(&[0.5, 0.5])
        );
        assert_eq!(
            tracking_step(Variant::Scsc, &y, &g, &v(&[1.0, 0.0]), 0.5).unwrap(),
            v(&[0.0, 1.0])
        );
        for variant in [Variant::Scgd, Variant::Scsc] {
            let g = v(&[0.3, -7.1]);
            assert_eq!(
                tracking_step(variant, &y, &g, &v(&[9.0, 2.0]), 1.0).unwrap(),
                g
            );
            assert!(matches!(
                tracking_step(variant, &y, &g, &g, 0.0),
                Err(Error::InvalidBeta(_))
            ));
            assert!(tracking_step(variant, &y, &g, &g, 1.5).is_err());
        }
    }

    #[test]
    fn param_step_examples() {
        let id = Matrix::identity(2, 2);
        let x = v(&[1.0, 1.0]);
        let out = param_step(&x, &id, &v(&[0.2, 0.0]), 0.1, 10.0).unwrap();
        assert!((out - v(&[0.98, 1.0])).norm() < 1e-15);
        assert_eq!(param_step(&x, &id, &v(&[0.0, 0.0]), 0.1, 10.0).unwrap(), x);
        let out = param_step(&x, &id, &v(&[-100.0, 0.0]), 1.0, 10.0).unwrap();
        assert!((out.norm() - 10.0).abs() < 1e-12);
        assert!(param_step(&x, &id, &v(&[1.0]), 1.0, 10.0).is_err());
    }

    fn identity_problem() -> Dataset {
        Dataset::new(
            vec![
                OuterSample::new(v(&[1.0, -2.0, 0.5])).unwrap(),
                OuterSample::new(v(&[0.0, 1.0, 2.0])).unwrap(),
            ],
            vec![InnerSample::new(Matrix::identity(3, 3), Vector::zeros(3)).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn scsc_tracks_identity_inner_exactly() {
        let ds = identity_problem();
        let mut cfg = OptimizerConfig::new(Variant::Scsc, 3, 3, 2000, 0.05, 0.1);
        cfg.x0 = v(&[2.0, 2.0, -1.0]);
        cfg.y0 = cfg.x0.clone();
        cfg.record_tracking = true;
        let traj = run(&ds, &cfg, Rng::new(4)).unwrap();
        assert!(traj.tracking_sq_errors.iter().all(|e| e.sqrt() <= 1e-12));
    }

    #[test]
    fn beta_one_makes_variants_identical() {
        let ds = Benchmark::Convex
            .law()
            .sample_dataset(10, 10, Rng::new(2))
            .unwrap();
        let mut cfg = OptimizerConfig::new(Variant::Scgd, 5, 4, 500, 0.01, 1.0);
        cfg.recording = Recording::Full;
        let a = run(&ds, &cfg, Rng::new(9)).unwrap();
        cfg.variant = Variant::Scsc;
        let b = run(&ds, &cfg, Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn runs_are_deterministic_and_feasible() {
        let ds = Benchmark::Convex
            .law()
            .sample_dataset(10, 10, Rng::new(2))
            .unwrap();
        let mut cfg = OptimizerConfig::new(Variant::Scsc, 5, 4, 3000, 0.5, 0.3);
        cfg.domain_radius = 1.0;
        cfg.record_tracking = true;
        let a = run(&ds, &cfg, Rng::new(1)).unwrap();
        assert_eq!(a, run(&ds, &cfg, Rng::new(1)).unwrap());
        assert!(a.iterates.iter().all(|(_, x)| x.norm() <= 1.0 + 1e-12));
        assert_ne!(a, run(&ds, &cfg, Rng::new(2)).unwrap());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let ds = identity_problem();
        let cfg = OptimizerConfig::new(Variant::Scgd, 3, 3, 10, 0.1, 0.5);
        let bad = OptimizerConfig {
            iterations: 0,
            ..cfg.clone()
        };
        assert_eq!(
            run(&ds, &bad, Rng::new(0)).unwrap_err(),
            Error::InvalidIterations
        );
        let bad = OptimizerConfig {
            beta: 0.0,
            ..cfg.clone()
        };
        assert!(matches!(
            run(&ds, &bad, Rng::new(0)),
            Err(Error::InvalidBeta(_))
        ));
        let bad = OptimizerConfig {
            eta: -1.0,
            ..cfg.clone()
        };
        assert!(matches!(
            run(&ds, &bad, Rng::new(0)),
            Err(Error::InvalidEta(_))
        ));
        let bad = OptimizerConfig {
            x0: v(&[20.0, 0.0, 0.0]),
            ..cfg.clone()
        };
        assert_eq!(
            run(&ds, &bad, Rng::new(0)).unwrap_err(),
            Error::InfeasibleStart
        );
        let bad = OptimizerConfig {
            x0: v(&[0.0, 0.0]),
            ..cfg
        };
        assert!(matches!(
            run(&ds, &bad, Rng::new(0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn thinning_caps_storage_but_not_averages() {
        let ds = Benchmark::StronglyConvex
            .law()
            .sample_dataset(5, 5, Rng::new(3))
            .unwrap();
        let mut cfg = OptimizerConfig::new(Variant::Scgd, 4, 5, 10_000, 0.01, 0.2);
        cfg.output_mode = OutputMode::SigmaWeighted { sigma: 1.0 };
        let thin = run(&ds, &cfg, Rng::new(5)).unwrap();
        assert!(thin.iterates.len() <= MAX_STORED_ITERATES);
        assert_eq!(
            select_output(&thin, OutputMode::Last, cfg.eta),
            Err(Error::ThinnedTrajectory)
        );
        cfg.recording = Recording::Full;
        let full = run(&ds, &cfg, Rng::new(5)).unwrap();
        assert_eq!(full.iterates.len(), 10_000);
        assert_eq!(thin.last, full.last);
        assert_eq!(thin.uniform_average, full.uniform_average);
        assert_eq!(thin.sigma_weighted, full.sigma_weighted);
        for (mode, streamed) in [
            (OutputMode::Last, &full.last),
            (OutputMode::UniformAverage, &full.uniform_average),
            (
                OutputMode::SigmaWeighted { sigma: 1.0 },
                full.sigma_weighted.as_ref().unwrap(),
            ),
            (OutputMode::UniformRandom, &full.random_pick),
        ] {
            let picked = select_output(&full, mode, cfg.eta).unwrap();
            assert!((picked - streamed).norm() <= 1e-12 * (1.0 + streamed.norm()));
        }
    }

    #[test]
    fn selection_examples() {
        let a = v(&[0.0]);
        let b = v(&[1.0]);
        let modes = [
            OutputMode::Last,
            OutputMode::UniformAverage,
            OutputMode::SigmaWeighted { sigma: 1.0 },
            OutputMode::UniformRandom,
        ];
        for mode in modes {
            assert_eq!(select_from_iterates(&[&a], mode, 1.0, 1).unwrap(), a);
            let c = v(&[2.5]);
            assert!(
                (select_from_iterates(&[&c, &c, &c], mode, 0.3, 2).unwrap() - &c).norm() < 1e-15
            );
        }
        // weights (1 − 1·1/2)^{2−t}: 0.5 for x_1, 1 for x_2
        let sw = select_from_iterates(&[&a, &b], OutputMode::SigmaWeighted { sigma: 1.0 }, 1.0, 1)
            .unwrap();
        assert!((sw[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            select_from_iterates(&[&a, &b], OutputMode::SigmaWeighted { sigma: 2.0 }, 1.0, 1),
            Err(Error::UnstableWeights(_))
        ));
    }

    #[test]
    fn preset_examples() {
        let s = schedule_preset(Variant::Scgd, Convexity::Convex, 4, 4);
        assert_eq!(s.iterations, 128);
        assert_eq!(s.eta, 128f64.powf(-6.0 / 7.0));
        assert_eq!(s.beta, 128f64.powf(-4.0 / 7.0));
        let s = schedule_preset(Variant::Scsc, Convexity::Convex, 4, 4);
        assert_eq!(s.iterations, 32);
        assert_eq!(s.eta, 32f64.powf(-0.8));
        assert_eq!(s.beta, s.eta);
        let s = schedule_preset(Variant::Scsc, Convexity::StronglyConvex, 64, 64);
        assert_eq!(s.iterations, 128);
        assert_eq!(s.eta, 128f64.powf(-6.0 / 7.0));
        assert_eq!(
            schedule_preset(Variant::Scsc, Convexity::Convex, 20, 20).iterations,
            1789
        );
        assert_eq!(
            schedule_preset(Variant::Scgd, Convexity::Convex, 20, 20).iterations,
            35778
        );
        assert_eq!(
            schedule_preset(Variant::Scgd, Convexity::StronglyConvex, 8, 1).iterations,
            32
        );
    }

    #[test]
    fn preset_cap_is_reported() {
        let (s, capped) =
            schedule_preset_scaled(Variant::Scgd, Convexity::Convex, 80, 80, 1.0, 2_000_000);
        assert!(capped);
        assert_eq!(s.iterations, 2_000_000);
        let (s, capped) =
            schedule_preset_scaled(Variant::Scsc, Convexity::Convex, 4, 4, 2.0, 2_000_000);
        assert!(!capped);
        assert_eq!(s.iterations, 64);
    }

    #[test]
    fn scsc_preset_needs_fewer_iterations() {
        for k in 2..300 {
            assert!(
                schedule_preset(Variant::Scsc, Convexity::Convex, k, k).iterations
                    < schedule_preset(Variant::Scgd, Convexity::Convex, k, k).iterations
            );
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!("SCSC".parse::<Variant>().unwrap(), Variant::Scsc);
        assert_eq!(
            "strongly-convex".parse::<Convexity>().unwrap(),
            Convexity::StronglyConvex
        );
        assert!("adam".parse::<Variant>().is_err());
        assert_eq!(
            OutputMode::parse("sigma_weighted", Some(0.5)).unwrap(),
            OutputMode::SigmaWeighted { sigma: 0.5 }
        );
        assert!(OutputMode::parse("sigma_weighted", None).is_err());
    }
}
