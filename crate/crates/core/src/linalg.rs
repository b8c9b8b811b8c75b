//! Dense vector/matrix helpers and the Euclidean-ball projection.
//!
//! Vectors and matrices are plain `nalgebra` dynamic types; this module only
//! adds the checked operations the optimizers rely on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn is_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Projects `x` onto the closed ball of the given radius centred at the origin.
pub fn project_ball(x: &Vector, radius: f64) -> Result<Vector> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidDomain(radius));
    }
    if !is_finite(x) {
        return Err(Error::NonFinite);
    }
    Ok(project_ball_unchecked(x.clone(), radius))
}

/// Hot-path projection: callers guarantee a valid radius and finite input.
pub(crate) fn project_ball_unchecked(mut x: Vector, radius: f64) -> Vector {
    let norm = x.norm();
    if norm > radius {
        x *= radius / norm;
        // rounding can leave the rescaled norm a few ulps above the radius
        let mut renorm = x.norm();
        while renorm > radius {
            x *= (radius / renorm) * (1.0 - f64::EPSILON);
            renorm = x.norm();
        }
    }
    x
}

/// `J · v` for a `p×d` matrix `J` and a length-`d` vector `v`.
pub fn mat_vec(jac: &Matrix, v: &Vector) -> Result<Vector> {
    check_dim(jac.ncols(), v.len())?;
    Ok(jac * v)
}

/// Largest singular value.
pub fn operator_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn sym_eig_range(m: &Matrix) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let lo = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Uniform draw from the ball of radius `radius` in `R^p`.
pub fn sample_ball(g: &mut impl rand::Rng, p: usize, radius: f64) -> Vector {
    let dir = Vector::from_iterator(p, (0..p).map(|_| g.sample::<f64, _>(rand_distr::StandardNormal)));
    let norm = dir.norm();
    if norm == 0.0 {
        return Vector::zeros(p);
    }
    dir * (radius * g.gen::<f64>().powf(1.0 / p as f64) / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn projection_examples() {
        let p = project_ball(&v(&[3.0, 4.0]), 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_ball(&v(&[0.3, 0.4]), 1.0).unwrap(), v(&[0.3, 0.4]));
        assert_eq!(project_ball(&v(&[0.0, 0.0]), 5.0).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn projection_errors() {
        assert_eq!(
            project_ball(&v(&[f64::NAN, 0.0]), 1.0),
            Err(Error::NonFinite)
        );
        assert!(matches!(
            project_ball(&v(&[1.0]), 0.0),
            Err(Error::InvalidDomain(_))
        ));
        assert!(matches!(
            project_ball(&v(&[1.0]), -2.0),
            Err(Error::InvalidDomain(_))
        ));
    }

    #[test]
    fn mat_vec_examples() {
        let id = Matrix::identity(2, 2);
        assert_eq!(mat_vec(&id, &v(&[0.2, 0.0])).unwrap(), v(&[0.2, 0.0]));
        let diag = Matrix::from_diagonal(&v(&[2.0, 1.0]));
        assert_eq!(mat_vec(&diag, &v(&[1.0, 1.0])).unwrap(), v(&[2.0, 1.0]));
        let zero = Matrix::zeros(3, 2);
        assert_eq!(
            mat_vec(&zero, &v(&[5.0, 7.0])).unwrap(),
            v(&[0.0, 0.0, 0.0])
        );
        assert!(matches!(
            mat_vec(&zero, &v(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn diagonal_operator_norm() {
        let diag = Matrix::from_diagonal(&v(&[2.0, 1.0]));
        assert!((operator_norm(&diag) - 2.0).abs() < 1e-12);
    }

    fn vec3() -> impl Strategy<Value = Vector> {
        prop::collection::vec(-50.0f64..50.0, 3).prop_map(Vector::from_vec)
    }

    proptest! {
        #[test]
        fn projection_is_nonexpansive_and_idempotent(u in vec3(), w in vec3(), r in 0.1f64..20.0) {
            let pu = project_ball(&u, r).unwrap();
            let pw = project_ball(&w, r).unwrap();
            prop_assert!(pu.norm() <= r);
            prop_assert!((&pu - &pw).norm() <= (&u - &w).norm() + 1e-12);
            prop_assert_eq!(project_ball(&pu, r).unwrap(), pu);
        }

        #[test]
        fn mat_vec_is_linear(
            entries in prop::collection::vec(-3.0f64..3.0, 6),
            u in prop::collection::vec(-3.0f64..3.0, 2),
            w in prop::collection::vec(-3.0f64..3.0, 2),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let j = Matrix::from_vec(3, 2, entries);
            let u = Vector::from_vec(u);
            let w = Vector::from_vec(w);
            let lhs = mat_vec(&j, &(&u * a + &w * b)).unwrap();
            let rhs = mat_vec(&j, &u).unwrap() * a + mat_vec(&j, &w).unwrap() * b;
            let scale = 1.0 + lhs.norm().max(rhs.norm());
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn ball_samples_are_feasible_and_fill_the_ball() {
        let mut g = crate::rng::Rng::new(2).generator();
        let xs: Vec<Vector> = (0..2000).map(|_| sample_ball(&mut g, 5, 3.0)).collect();
        assert!(xs.iter().all(|x| x.norm() <= 3.0 + 1e-12));
        // P(|x| ≤ r/2) = 2^-5
        let inner = xs.iter().filter(|x| x.norm() <= 1.5).count() as f64 / 2000.0;
        assert!((inner - 1.0 / 32.0).abs() < 0.015);
    }
}
