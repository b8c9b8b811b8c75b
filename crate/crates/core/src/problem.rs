//! Compositional problems `F(x) = E_ν f_ν(E_ω g_ω(x))` and the synthetic
//! affine-quadratic family with a known population law.
//!
//! Inner functions are affine, `g_ω(x) = A x + b` with `A ∈ ℝ^{d×p}`, and outer
//! functions are quadratics `f_ν(y) = ½‖y − c‖²`. Both the empirical risk
//! `F_S(x) = f_S(g_S(x))` and the population risk have closed forms.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, is_finite, Matrix, Vector};
use crate::rng::Rng;

/// Access to the sampled function families that Algorithm-style compositional
/// methods need: values and Jacobian products of `g_{ω_j}` and gradients of
/// `f_{ν_i}`, plus the empirical aggregates.
pub trait CompositionalProblem {
    /// `(p, d)`: parameter and inner-output dimensions.
    fn dims(&self) -> (usize, usize);
    fn n(&self) -> usize;
    fn m(&self) -> usize;

    fn inner_value(&self, j: usize, x: &Vector) -> Vector;
    /// `∇g_{ω_j}(x) ∈ ℝ^{p×d}`.
    fn inner_jacobian(&self, j: usize, x: &Vector) -> Matrix;
    fn outer_value(&self, i: usize, y: &Vector) -> f64;
    fn outer_gradient(&self, i: usize, y: &Vector) -> Vector;

    /// `∇g_{ω_j}(x) · v`, the chain-rule product.
    fn inner_vjp(&self, j: usize, x: &Vector, v: &Vector) -> Vector {
        self.inner_jacobian(j, x) * v
    }

    /// `g_S(x) = (1/m) Σ_j g_{ω_j}(x)`.
    fn empirical_inner(&self, x: &Vector) -> Vector {
        let mut acc = Vector::zeros(self.dims().1);
        for j in 0..self.m() {
            acc += self.inner_value(j, x);
        }
        acc / self.m() as f64
    }

    fn empirical_inner_jacobian(&self, x: &Vector) -> Matrix {
        let (p, d) = self.dims();
        let mut acc = Matrix::zeros(p, d);
        for j in 0..self.m() {
            acc += self.inner_jacobian(j, x);
        }
        acc / self.m() as f64
    }

    /// `F_S(x) = (1/n) Σ_i f_{ν_i}(g_S(x))`.
    fn empirical_risk(&self, x: &Vector) -> f64 {
        let y = self.empirical_inner(x);
        (0..self.n()).map(|i| self.outer_value(i, &y)).sum::<f64>() / self.n() as f64
    }

    /// `∇F_S(x) = ∇g_S(x) · (1/n) Σ_i ∇f_{ν_i}(g_S(x))`.
    fn empirical_risk_grad(&self, x: &Vector) -> Vector {
        let y = self.empirical_inner(x);
        let mut outer = Vector::zeros(self.dims().1);
        for i in 0..self.n() {
            outer += self.outer_gradient(i, &y);
        }
        outer /= self.n() as f64;
        self.empirical_inner_jacobian(x) * outer
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSample {
    /// `d×p`.
    pub a: Matrix,
    pub b: Vector,
}

impl InnerSample {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        check_dim(a.nrows(), b.len())?;
        if !a.iter().all(|v| v.is_finite()) || !is_finite(&b) {
            return Err(Error::NonFinite);
        }
        Ok(InnerSample { a, b })
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.a.ncols(), x.len())?;
        Ok(&self.a * x + &self.b)
    }

    /// Returns `Aᵀ` (`p×d`), so that `Aᵀ ∇f` is the chain-rule gradient.
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        check_dim(self.a.ncols(), x.len())?;
        Ok(self.a.transpose())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterSample {
    pub c: Vector,
}

impl OuterSample {
    pub fn new(c: Vector) -> Result<Self> {
        if !is_finite(&c) {
            return Err(Error::NonFinite);
        }
        Ok(OuterSample { c })
    }

    pub fn eval(&self, y: &Vector) -> Result<f64> {
        check_dim(self.c.len(), y.len())?;
        Ok(0.5 * (y - &self.c).norm_squared())
    }

    pub fn grad(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.c.len(), y.len())?;
        Ok(y - &self.c)
    }
}

/// Training set `S = S_ν ∪ S_ω` for the affine-quadratic family.
///
/// Means of `A_j`, `b_j` and `c_i` are cached at construction, so empirical
/// aggregates cost one matrix-vector product.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outer: Vec<OuterSample>,
    inner: Vec<InnerSample>,
    mean_a: Matrix,
    mean_b: Vector,
    mean_c: Vector,
    outer_spread: f64,
}

impl Dataset {
    pub fn new(outer: Vec<OuterSample>, inner: Vec<InnerSample>) -> Result<Self> {
        if outer.is_empty() || inner.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (d, p) = inner[0].a.shape();
        for s in &inner {
            check_dim(d, s.a.nrows())?;
            check_dim(p, s.a.ncols())?;
            check_dim(d, s.b.len())?;
        }
        for s in &outer {
            check_dim(d, s.c.len())?;
        }
        let m = inner.len() as f64;
        let n = outer.len() as f64;
        let mean_a = inner.iter().fold(Matrix::zeros(d, p), |acc, s| acc + &s.a) / m;
        let mean_b = inner.iter().fold(Vector::zeros(d), |acc, s| acc + &s.b) / m;
        let mean_c = outer.iter().fold(Vector::zeros(d), |acc, s| acc + &s.c) / n;
        let outer_spread = outer
            .iter()
            .map(|s| 0.5 * (&s.c - &mean_c).norm_squared())
            .sum::<f64>()
            / n;
        Ok(Dataset {
            outer,
            inner,
            mean_a,
            mean_b,
            mean_c,
            outer_spread,
        })
    }

    pub fn outer(&self) -> &[OuterSample] {
        &self.outer
    }

    pub fn inner(&self) -> &[InnerSample] {
        &self.inner
    }

    /// `Ā = (1/m) Σ A_j`.
    pub fn mean_a(&self) -> &Matrix {
        &self.mean_a
    }

    pub fn mean_b(&self) -> &Vector {
        &self.mean_b
    }

    pub fn mean_c(&self) -> &Vector {
        &self.mean_c
    }

    /// `(1/n) Σ ½‖c_i − c̄‖²`, the part of `F_S` no `x` can remove.
    pub fn outer_spread(&self) -> f64 {
        self.outer_spread
    }

    /// Writes `inner.csv` and `outer.csv` into `dir`.
    ///
    /// `inner.csv` has one row per `ω_j` holding `A` row-major followed by `b`;
    /// `outer.csv` has one row per `ν_i` holding `c`. The first line of each file
    /// records the dimensions.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (p, d) = self.dims();
        let mut inner = format!("dims,p={p},d={d}\n");
        let mut cols: Vec<String> = Vec::with_capacity(d * p + d);
        for r in 0..d {
            for c in 0..p {
                cols.push(format!("a_{r}_{c}"));
            }
        }
        cols.extend((0..d).map(|k| format!("b_{k}")));
        inner.push_str(&cols.join(","));
        inner.push('\n');
        for s in &self.inner {
            let mut vals = Vec::with_capacity(d * p + d);
            for r in 0..d {
                for c in 0..p {
                    vals.push(crate::report::fmt_f64(s.a[(r, c)]));
                }
            }
            vals.extend(s.b.iter().map(|v| crate::report::fmt_f64(*v)));
            inner.push_str(&vals.join(","));
            inner.push('\n');
        }
        let mut outer = format!("dims,d={d}\n");
        let header: Vec<String> = (0..d).map(|k| format!("c_{k}")).collect();
        outer.push_str(&header.join(","));
        outer.push('\n');
        for s in &self.outer {
            let vals: Vec<String> = s.c.iter().map(|v| crate::report::fmt_f64(*v)).collect();
            let _ = writeln!(outer, "{}", vals.join(","));
        }
        let ip = dir.join("inner.csv");
        let op = dir.join("outer.csv");
        fs::write(&ip, inner).map_err(|e| Error::io(&ip, e))?;
        fs::write(&op, outer).map_err(|e| Error::io(&op, e))?;
        Ok(())
    }

    pub fn read_csv(dir: &Path) -> Result<Self> {
        let ip = dir.join("inner.csv");
        let op = dir.join("outer.csv");
        let inner_txt = fs::read_to_string(&ip).map_err(|e| Error::io(&ip, e))?;
        let outer_txt = fs::read_to_string(&op).map_err(|e| Error::io(&op, e))?;

        let mut lines = inner_txt.lines();
        let dims = lines
            .next()
            .ok_or_else(|| Error::Parse("inner.csv is empty".into()))?;
        let p = dim_field(dims, "p")?;
        let d = dim_field(dims, "d")?;
        lines.next();
        let mut inner = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let vals = parse_row(line, d * p + d)?;
            let a = Matrix::from_row_slice(d, p, &vals[..d * p]);
            let b = Vector::from_column_slice(&vals[d * p..]);
            inner.push(InnerSample::new(a, b)?);
        }

        let mut lines = outer_txt.lines();
        let dims = lines
            .next()
            .ok_or_else(|| Error::Parse("outer.csv is empty".into()))?;
        let d_outer = dim_field(dims, "d")?;
        check_dim(d, d_outer)?;
        lines.next();
        let mut outer = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            outer.push(OuterSample::new(Vector::from_vec(parse_row(line, d)?))?);
        }
        Dataset::new(outer, inner)
    }
}

fn dim_field(line: &str, key: &str) -> Result<usize> {
    line.split(',')
        .filter_map(|f| f.trim().strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .next()
        .ok_or_else(|| Error::Parse(format!("missing dimension `{key}` in `{line}`")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad dimension `{key}` in `{line}`")))
}

fn parse_row(line: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{f}`")))
        })
        .collect::<Result<_>>()?;
    check_dim(expected, vals.len())?;
    Ok(vals)
}

impl CompositionalProblem for Dataset {
    fn dims(&self) -> (usize, usize) {
        (self.mean_a.ncols(), self.mean_a.nrows())
    }

    fn n(&self) -> usize {
        self.outer.len()
    }

    fn m(&self) -> usize {
        self.inner.len()
    }

    fn inner_value(&self, j: usize, x: &Vector) -> Vector {
        let s = &self.inner[j];
        &s.a * x + &s.b
    }

    fn inner_jacobian(&self, j: usize, _x: &Vector) -> Matrix {
        self.inner[j].a.transpose()
    }

    fn outer_value(&self, i: usize, y: &Vector) -> f64 {
        0.5 * (y - &self.outer[i].c).norm_squared()
    }

    fn outer_gradient(&self, i: usize, y: &Vector) -> Vector {
        y - &self.outer[i].c
    }

    fn inner_vjp(&self, j: usize, _x: &Vector, v: &Vector) -> Vector {
        self.inner[j].a.tr_mul(v)
    }

    fn empirical_inner(&self, x: &Vector) -> Vector {
        &self.mean_a * x + &self.mean_b
    }

    fn empirical_inner_jacobian(&self, _x: &Vector) -> Matrix {
        self.mean_a.transpose()
    }

    // f_S(y) = ½‖y − c̄‖² + (1/n)Σ½‖c_i − c̄‖²
    fn empirical_risk(&self, x: &Vector) -> f64 {
        let y = self.empirical_inner(x);
        0.5 * (y - &self.mean_c).norm_squared() + self.outer_spread()
    }

    fn empirical_risk_grad(&self, x: &Vector) -> Vector {
        let y = self.empirical_inner(x);
        self.mean_a.tr_mul(&(y - &self.mean_c))
    }
}

/// Sampling law of the affine-quadratic family.
///
/// `A_ω = Ā₀ + E_A`, `b_ω = b̄₀ + e_b`, `c_ν = c̄₀ + e_c`, with every noise entry
/// independent and uniform on `[−τ, τ]` for the matching scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationLaw {
    /// `d×p`.
    pub mean_a: Matrix,
    pub mean_b: Vector,
    pub mean_c: Vector,
    pub tau_a: f64,
    pub tau_b: f64,
    pub tau_c: f64,
}

/// Variance of a uniform variable on `[−τ, τ]`.
fn uniform_var(tau: f64) -> f64 {
    tau * tau / 3.0
}

impl PopulationLaw {
    pub fn new(
        mean_a: Matrix,
        mean_b: Vector,
        mean_c: Vector,
        tau_a: f64,
        tau_b: f64,
        tau_c: f64,
    ) -> Result<Self> {
        check_dim(mean_a.nrows(), mean_b.len())?;
        check_dim(mean_a.nrows(), mean_c.len())?;
        for tau in [tau_a, tau_b, tau_c] {
            if !(tau >= 0.0) || !tau.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "noise scale must be finite and ≥ 0, got {tau}"
                )));
            }
        }
        Ok(PopulationLaw {
            mean_a,
            mean_b,
            mean_c,
            tau_a,
            tau_b,
            tau_c,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.mean_a.ncols(), self.mean_a.nrows())
    }

    /// Same law with all noise switched off.
    pub fn noiseless(&self) -> Self {
        PopulationLaw {
            tau_a: 0.0,
            tau_b: 0.0,
            tau_c: 0.0,
            ..self.clone()
        }
    }

    fn uniform(g: &mut impl rand::Rng, tau: f64) -> f64 {
        if tau == 0.0 {
            0.0
        } else {
            g.gen_range(-tau..=tau)
        }
    }

    pub fn sample_inner(&self, rng: &mut impl rand::Rng) -> InnerSample {
        let (p, d) = self.dims();
        let a = Matrix::from_fn(d, p, |r, c| {
            self.mean_a[(r, c)] + Self::uniform(rng, self.tau_a)
        });
        let b = Vector::from_fn(d, |k, _| self.mean_b[k] + Self::uniform(rng, self.tau_b));
        InnerSample { a, b }
    }

    pub fn sample_outer(&self, rng: &mut impl rand::Rng) -> OuterSample {
        let d = self.mean_c.len();
        let c = Vector::from_fn(d, |k, _| self.mean_c[k] + Self::uniform(rng, self.tau_c));
        OuterSample { c }
    }

    /// Draws `n` outer and `m` inner samples i.i.d. from the law.
    pub fn sample_dataset(&self, n: usize, m: usize, rng: Rng) -> Result<Dataset> {
        if n == 0 || m == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut g_outer = rng.split("outer").generator();
        let mut g_inner = rng.split("inner").generator();
        let outer = (0..n).map(|_| self.sample_outer(&mut g_outer)).collect();
        let inner = (0..m).map(|_| self.sample_inner(&mut g_inner)).collect();
        Dataset::new(outer, inner)
    }

    /// `g(x) = E_ω g_ω(x) = Ā₀ x + b̄₀`.
    pub fn population_inner(&self, x: &Vector) -> Vector {
        &self.mean_a * x + &self.mean_b
    }

    /// `E_ν ½‖c_ν − c̄₀‖²`.
    pub fn outer_noise_constant(&self) -> f64 {
        0.5 * self.mean_c.len() as f64 * uniform_var(self.tau_c)
    }

    /// `Var_ω(g_ω(x)) = E‖g_ω(x) − g(x)‖² = d(τ_A²/3)‖x‖² + d τ_b²/3`.
    pub fn inner_variance(&self, x: &Vector) -> f64 {
        let d = self.mean_b.len() as f64;
        d * uniform_var(self.tau_a) * x.norm_squared() + d * uniform_var(self.tau_b)
    }

    /// `F(x) = E_ν f_ν(g(x)) = ½‖Ā₀x + b̄₀ − c̄₀‖² + E½‖c_ν − c̄₀‖²`.
    pub fn population_risk(&self, x: &Vector) -> Result<f64> {
        check_dim(self.mean_a.ncols(), x.len())?;
        let r = self.population_inner(x) - &self.mean_c;
        Ok(0.5 * r.norm_squared() + self.outer_noise_constant())
    }

    pub fn population_risk_grad(&self, x: &Vector) -> Vector {
        self.mean_a
            .tr_mul(&(self.population_inner(x) - &self.mean_c))
    }
}

/// Sampling laws that may or may not expose a closed-form population risk.
pub trait SampleLaw {
    fn draw_dataset(&self, n: usize, m: usize, rng: Rng) -> Result<Dataset>;

    fn analytic_population_risk(&self, _x: &Vector) -> Result<f64> {
        Err(Error::NoAnalyticPopulationRisk)
    }
}

impl SampleLaw for PopulationLaw {
    fn draw_dataset(&self, n: usize, m: usize, rng: Rng) -> Result<Dataset> {
        self.sample_dataset(n, m, rng)
    }

    fn analytic_population_risk(&self, x: &Vector) -> Result<f64> {
        self.population_risk(x)
    }
}

/// Named synthetic benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    /// `p = 5`, `d = 4`, rank-3 `Ā₀` (last row is the sum of the others):
    /// `ĀᵀĀ` has a two-dimensional kernel, so `F` is convex but not strongly.
    Convex,
    /// `p = 4`, `d = 5` with a well-conditioned `Ā₀`.
    StronglyConvex,
}

impl Benchmark {
    pub fn law(self) -> PopulationLaw {
        match self {
            Benchmark::Convex => {
                #[rustfmt::skip]
                let a = Matrix::from_row_slice(4, 5, &[
                    1.0, 0.5, 0.0, 0.0, 0.2,
                    0.0, 1.0, 0.5, 0.0, 0.0,
                    0.0, 0.0, 1.0, 0.5, 0.0,
                    1.0, 1.5, 1.5, 0.5, 0.2,
                ]);
                PopulationLaw {
                    mean_a: a,
                    mean_b: Vector::from_column_slice(&[0.5, -0.5, 0.25, 0.0]),
                    mean_c: Vector::from_column_slice(&[1.0, 2.0, -1.0, 0.5]),
                    tau_a: 0.1,
                    tau_b: 0.1,
                    tau_c: 0.5,
                }
            }
            Benchmark::StronglyConvex => {
                #[rustfmt::skip]
                let a = Matrix::from_row_slice(5, 4, &[
                    1.5, 0.3, 0.0, 0.0,
                    0.0, 1.5, 0.3, 0.0,
                    0.0, 0.0, 1.5, 0.3,
                    0.3, 0.0, 0.0, 1.5,
                    0.5, 0.5, 0.5, 0.5,
                ]);
                PopulationLaw {
                    mean_a: a,
                    mean_b: Vector::from_column_slice(&[0.5, -0.5, 0.25, 0.0, 0.1]),
                    mean_c: Vector::from_column_slice(&[1.0, 2.0, -1.0, 0.5, 0.0]),
                    tau_a: 0.1,
                    tau_b: 0.1,
                    tau_c: 1.0,
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Convex => "convex",
            Benchmark::StronglyConvex => "strongly_convex",
        }
    }
}
