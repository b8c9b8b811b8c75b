//! Problem constants feeding the tracking, stability and optimization bounds.
//!
//! For the affine-quadratic family most constants are closed-form. The two
//! suprema over the feasible ball (`V_g` and the `L_f` reach) are maxima of
//! convex quadratics, solved exactly on the sphere via the secular equation
//! and cross-checked against a deterministic point grid.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{operator_norm, Matrix, Vector};
use crate::problem::{CompositionalProblem, Dataset};
use crate::rng::Rng;

/// Free constant of the tracking bound used when none is given.
pub const DEFAULT_TRACKING_C: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    /// Lipschitz constant of `f_ν` on the reachable set of trackers.
    pub l_f: f64,
    /// `max_j ‖A_j‖_op`.
    pub l_g: f64,
    /// Lipschitz constant of `∇f_ν` (1 for the quadratic outer family).
    pub c_f: f64,
    /// Smoothness of `f_ν(g_S(·))`.
    pub l: f64,
    /// Strong convexity of `F_S` (0 when merely convex).
    pub sigma: f64,
    /// `sup_x (1/m) Σ_j ‖g_{ω_j}(x) − g_S(x)‖²` over the ball.
    pub v_g: f64,
    /// `(1/m) Σ_j ‖A_j − Ā‖²_F`.
    pub c_g: f64,
    pub d_x: f64,
    pub d_y: f64,
    /// Free constant of the tracking bound.
    pub c: f64,
    /// `max_i sup_x ‖g_S(x) − c_i‖`; `l_f` is this plus `√d_y`.
    pub reach: f64,
}

impl BoundParams {
    /// Sets the measured tracker initialization error `D_y` and widens `L_f`
    /// to cover the ball of radius `√D_y` around `g_S(𝒳)`.
    pub fn with_measured_dy(mut self, d_y: f64) -> Self {
        self.d_y = d_y.max(0.0);
        self.l_f = self.reach + self.d_y.sqrt();
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_dx(mut self, d_x: f64) -> Self {
        self.d_x = d_x;
        self
    }
}

/// A convex quadratic `xᵀMx + 2qᵀx + r` with `M ⪰ 0`.
#[derive(Debug, Clone)]
pub struct BallQuadratic {
    pub m: Matrix,
    pub q: Vector,
    pub r: f64,
}

impl BallQuadratic {
    pub fn eval(&self, x: &Vector) -> f64 {
        x.dot(&(&self.m * x)) + 2.0 * self.q.dot(x) + self.r
    }

    /// Exact maximum over `‖x‖ ≤ radius`, attained on the sphere.
    ///
    /// Stationary points on the sphere satisfy `(μI − M)x = q`; the maximizer
    /// has `μ ≥ λ_max(M)`. With `M = QΛQᵀ`, `‖x(μ)‖` is decreasing on
    /// `μ > λ_max`, so `μ` is found by bisection. When `q` has no component on
    /// the top eigenspace and `‖x(λ_max)‖ < radius`, the remainder of the norm
    /// is placed along a top eigenvector.
    pub fn max_on_ball(&self, radius: f64) -> (f64, Vector) {
        let p = self.q.len();
        let eig = self.m.clone().symmetric_eigen();
        let lam = &eig.eigenvalues;
        let qt = eig.eigenvectors.tr_mul(&self.q);
        let (top, lam_max) =
            lam.iter()
                .cloned()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (k, l)| if l > acc.1 { (k, l) } else { acc },
                );
        let scale = lam_max.abs().max(1.0);
        let tol = 1e-12 * scale;
        let x_of = |mu: f64| -> Vector {
            let z = Vector::from_fn(p, |k, _| {
                let gap = mu - lam[k];
                if gap.abs() <= tol {
                    0.0
                } else {
                    qt[k] / gap
                }
            });
            &eig.eigenvectors * z
        };

        let mut candidates: Vec<Vector> = Vec::new();

        // hard case: no pull along the top eigenspace
        let top_mass: f64 = (0..p)
            .filter(|&k| (lam[k] - lam_max).abs() <= tol)
            .map(|k| qt[k] * qt[k])
            .sum();
        if top_mass <= 1e-24 * (1.0 + self.q.norm_squared()) {
            let base = x_of(lam_max);
            let rem = radius * radius - base.norm_squared();
            if rem >= 0.0 {
                let u = eig.eigenvectors.column(top).into_owned();
                let t = rem.sqrt();
                candidates.push(&base + &u * t);
                candidates.push(&base - &u * t);
            }
        }

        let qn = self.q.norm();
        if qn > 0.0 {
            let mut lo = lam_max;
            let mut hi = lam_max + qn / radius;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let z2: f64 = (0..p)
                    .map(|k| {
                        let gap = mid - lam[k];
                        qt[k] * qt[k] / (gap * gap)
                    })
                    .sum();
                if z2 > radius * radius {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = x_of(hi);
            let norm = x.norm();
            if norm > 0.0 {
                candidates.push(x * (radius / norm));
            }
        } else {
            candidates.push(eig.eigenvectors.column(top).into_owned() * radius);
        }

        candidates.into_iter().map(|x| (self.eval(&x), x)).fold(
            (f64::NEG_INFINITY, Vector::zeros(p)),
            |best, cand| {
                if cand.0 > best.0 {
                    cand
                } else {
                    best
                }
            },
        )
    }

    /// Max over `grid` deterministic points on the sphere of radius `radius`.
    pub fn max_on_grid(&self, radius: f64, grid: usize, rng: Rng) -> f64 {
        let p = self.q.len();
        let mut g = rng.generator();
        let mut best = self.r;
        for _ in 0..grid {
            let mut x = Vector::from_fn(p, |_, _| g.gen_range(-1.0..1.0));
            let norm = x.norm();
            if norm == 0.0 {
                continue;
            }
            x *= radius / norm;
            best = best.max(self.eval(&x));
        }
        best
    }
}

/// `(1/m) Σ_j ‖g_{ω_j}(x) − g_S(x)‖²` as a quadratic in `x`.
pub fn inner_variance_quadratic(ds: &Dataset) -> BallQuadratic {
    let (p, _) = ds.dims();
    let m = ds.m() as f64;
    let mut mm = Matrix::zeros(p, p);
    let mut q = Vector::zeros(p);
    let mut r = 0.0;
    for s in ds.inner() {
        let da = &s.a - ds.mean_a();
        let db = &s.b - ds.mean_b();
        mm += da.tr_mul(&da);
        q += da.tr_mul(&db);
        r += db.norm_squared();
    }
    BallQuadratic {
        m: mm / m,
        q: q / m,
        r: r / m,
    }
}

/// Computes every constant for the affine-quadratic dataset `ds` on the ball
/// of radius `domain_radius`. `grid` random sphere points back up the exact
/// sphere maximization. `D_y` starts at 0 and is set later from the measured
/// tracker initialization via [`BoundParams::with_measured_dy`]; `D_x` is the
/// squared diameter of the ball.
pub fn compute_constants(ds: &Dataset, domain_radius: f64, grid: usize) -> Result<BoundParams> {
    if !(domain_radius > 0.0) {
        return Err(Error::InvalidDomain(domain_radius));
    }
    if ds.n() == 0 || ds.m() == 0 {
        return Err(Error::EmptyDataset);
    }
    let grid_rng = Rng::new(0x5c0_1ab).split("constants-grid");

    let l_g = ds
        .inner()
        .iter()
        .map(|s| operator_norm(&s.a))
        .fold(0.0, f64::max);
    let c_g = ds
        .inner()
        .iter()
        .map(|s| (&s.a - ds.mean_a()).norm_squared())
        .sum::<f64>()
        / ds.m() as f64;

    let hess = ds.mean_a().tr_mul(ds.mean_a());
    let (lo, hi) = crate::linalg::sym_eig_range(&hess);
    let sigma = lo.max(0.0);
    let l = hi.max(0.0);

    let var = inner_variance_quadratic(ds);
    let v_g = var
        .max_on_ball(domain_radius)
        .0
        .max(var.max_on_grid(domain_radius, grid, grid_rng.split("v_g")))
        .max(0.0);

    let mut reach_sq: f64 = 0.0;
    for (i, s) in ds.outer().iter().enumerate() {
        let shift = ds.mean_b() - &s.c;
        let quad = BallQuadratic {
            m: hess.clone(),
            q: ds.mean_a().tr_mul(&shift),
            r: shift.norm_squared(),
        };
        let grid_each = if i == 0 { grid } else { grid.min(64) };
        let best = quad.max_on_ball(domain_radius).0.max(quad.max_on_grid(
            domain_radius,
            grid_each,
            grid_rng.split_index("l_f", i as u64),
        ));
        reach_sq = reach_sq.max(best);
    }
    let reach = reach_sq.max(0.0).sqrt();

    Ok(BoundParams {
        l_f: reach,
        l_g,
        c_f: 1.0,
        l,
        sigma: sigma.min(l),
        v_g,
        c_g,
        d_x: 4.0 * domain_radius * domain_radius,
        d_y: 0.0,
        c: DEFAULT_TRACKING_C,
        reach,
    })
}
