//! Reference solutions for the affine-quadratic family: constrained
//! least-squares minimizers with optimality certificates, and a central
//! finite-difference gradient check.

use crate::error::{Error, Result};
use crate::linalg::{project_ball_unchecked, Matrix, Vector};
use crate::problem::{CompositionalProblem, Dataset, PopulationLaw};

/// Projected-gradient residual target for certificates.
pub const KKT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Dense solve of the normal equations; the solution is interior.
    ClosedForm,
    /// Singular normal equations; minimum-norm least-squares solution.
    MinNormLeastSquares,
    /// Boundary solution polished by projected gradient at step `1/L`.
    ProjectedGradientHighPrecision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerCertificate {
    pub x_star: Vector,
    pub value: f64,
    pub method: SolveMethod,
    /// `‖x − Π(x − ∇F(x))‖`.
    pub kkt_residual: f64,
}

/// `½‖A x − r‖² + constant` over the ball `‖x‖ ≤ radius`.
#[derive(Debug, Clone)]
struct BallLeastSquares {
    a: Matrix,
    r: Vector,
    constant: f64,
    radius: f64,
}

impl BallLeastSquares {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * (&self.a * x - &self.r).norm_squared() + self.constant
    }

    fn grad(&self, x: &Vector) -> Vector {
        self.a.tr_mul(&(&self.a * x - &self.r))
    }

    fn residual(&self, x: &Vector) -> f64 {
        (x - project_ball_unchecked(x - self.grad(x), self.radius)).norm()
    }

    fn smoothness(&self) -> f64 {
        crate::linalg::sym_eig_range(&self.a.tr_mul(&self.a))
            .1
            .max(f64::MIN_POSITIVE)
    }

    fn certificate(&self, x: Vector, method: SolveMethod) -> MinimizerCertificate {
        MinimizerCertificate {
            value: self.value(&x),
            kkt_residual: self.residual(&x),
            x_star: x,
            method,
        }
    }

    /// Projected gradient descent at step `1/L` from `start`.
    fn projected_gradient(&self, start: Vector, tol: f64, max_iter: usize) -> Vector {
        let step = 1.0 / self.smoothness();
        let mut x = start;
        for _ in 0..max_iter {
            if self.residual(&x) <= tol {
                break;
            }
            x = project_ball_unchecked(&x - self.grad(&x) * step, self.radius);
        }
        x
    }

    fn solve(&self) -> Result<MinimizerCertificate> {
        let hess = self.a.tr_mul(&self.a);
        let rhs = self.a.tr_mul(&self.r);
        let eig = hess.clone().symmetric_eigen();
        let lam_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let cutoff = 1e-12 * lam_max.max(1.0);
        let singular = eig.eigenvalues.iter().any(|&l| l <= cutoff);

        let (unconstrained, method) = if singular {
            let svd = self.a.clone().svd(true, true);
            let x = svd
                .solve(&self.r, 1e-12 * svd.singular_values.max().max(1.0))
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            (x, SolveMethod::MinNormLeastSquares)
        } else {
            let x = hess
                .clone()
                .cholesky()
                .map(|c| c.solve(&rhs))
                .ok_or_else(|| {
                    Error::InvalidConfig("normal equations not positive definite".into())
                })?;
            (x, SolveMethod::ClosedForm)
        };
        if !crate::linalg::is_finite(&unconstrained) {
            return Err(Error::NonFinite);
        }
        if unconstrained.norm() <= self.radius {
            return Ok(self.certificate(unconstrained, method));
        }

        // Boundary: (H + μI) x = rhs with ‖x‖ = radius, μ > 0, then polish.
        let qt = eig.eigenvectors.tr_mul(&rhs);
        let norm_at = |mu: f64| -> f64 {
            qt.iter()
                .zip(eig.eigenvalues.iter())
                .map(|(q, l)| {
                    let den = l + mu;
                    if den <= 0.0 {
                        0.0
                    } else {
                        (q / den).powi(2)
                    }
                })
                .sum::<f64>()
                .sqrt()
        };
        let mut lo = 0.0;
        let mut hi = rhs.norm() / self.radius;
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm_at(mid) > self.radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = Vector::from_fn(qt.len(), |k, _| {
            let den = eig.eigenvalues[k] + hi;
            if den <= 0.0 {
                0.0
            } else {
                qt[k] / den
            }
        });
        let start = project_ball_unchecked(&eig.eigenvectors * z, self.radius);
        let x = self.projected_gradient(start, KKT_TOLERANCE, 1_000_000);
        Ok(self.certificate(x, SolveMethod::ProjectedGradientHighPrecision))
    }
}

fn empirical_problem(ds: &Dataset, radius: f64) -> Result<BallLeastSquares> {
    if !(radius > 0.0) {
        return Err(Error::InvalidDomain(radius));
    }
    Ok(BallLeastSquares {
        a: ds.mean_a().clone(),
        r: ds.mean_c() - ds.mean_b(),
        constant: ds.outer_spread(),
        radius,
    })
}

/// `argmin_{‖x‖≤R} F_S(x)` with a first-order certificate.
pub fn erm_minimizer(ds: &Dataset, radius: f64) -> Result<MinimizerCertificate> {
    let mut cert = empirical_problem(ds, radius)?.solve()?;
    // report F_S itself so callers compare like with like
    cert.value = ds.empirical_risk(&cert.x_star);
    Ok(cert)
}

/// Pure projected gradient from the origin at step `1/L`; an independent
/// route to the same minimizer.
pub fn erm_minimizer_projected_gradient(
    ds: &Dataset,
    radius: f64,
    max_iter: usize,
) -> Result<MinimizerCertificate> {
    let prob = empirical_problem(ds, radius)?;
    let x = prob.projected_gradient(Vector::zeros(ds.dims().0), KKT_TOLERANCE * 1e-2, max_iter);
    let mut cert = prob.certificate(x, SolveMethod::ProjectedGradientHighPrecision);
    cert.value = ds.empirical_risk(&cert.x_star);
    Ok(cert)
}

/// `argmin_{‖x‖≤R} F(x)` for the population law.
pub fn population_minimizer(law: &PopulationLaw, radius: f64) -> Result<MinimizerCertificate> {
    if !(radius > 0.0) {
        return Err(Error::InvalidDomain(radius));
    }
    let prob = BallLeastSquares {
        a: law.mean_a.clone(),
        r: &law.mean_c - &law.mean_b,
        constant: law.outer_noise_constant(),
        radius,
    };
    let mut cert = prob.solve()?;
    cert.value = law.population_risk(&cert.x_star)?;
    Ok(cert)
}

/// Max over coordinates of `|FD_k − ∇_k| / (1 + |FD_k|)` using central
/// differences of the empirical risk with step `h`.
pub fn fd_gradient_check<P: CompositionalProblem + ?Sized>(
    problem: &P,
    x: &Vector,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    crate::linalg::check_dim(problem.dims().0, x.len())?;
    let grad = problem.empirical_risk_grad(x);
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let fd = (problem.empirical_risk(&xp) - problem.empirical_risk(&xm)) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / (1.0 + fd.abs()));
    }
    Ok(worst)
}
