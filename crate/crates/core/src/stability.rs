//! Compositional uniform stability, measured.
//!
//! Two runs of the optimizer, one on `S` and one on a neighbor differing in a
//! single outer or inner sample, share the realized index sequence
//! `(j_t, i_t)`. The reported `ε̂` averages the output distance over
//! replicates with a uniformly chosen replaced index, so it is an
//! average-case estimate of the uniform (worst-index) quantity.

use rand::Rng as _;

use crate::constants::compute_constants;
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, Vector};
use crate::optimizer::{run, OptimizerConfig};
use crate::par::{mean_se, par_map};
use crate::problem::{CompositionalProblem, Dataset, InnerSample, OuterSample, PopulationLaw};
use crate::rng::Rng;

/// Which sample to replace (zero-based index) and its replacement.
#[derive(Debug, Clone, PartialEq)]
pub enum NeighborSpec {
    Nu {
        index: usize,
        replacement: OuterSample,
    },
    Omega {
        index: usize,
        replacement: InnerSample,
    },
}

/// Copy of `ds` with exactly one sample replaced.
pub fn make_neighbor(ds: &Dataset, spec: &NeighborSpec) -> Result<Dataset> {
    let mut outer = ds.outer().to_vec();
    let mut inner = ds.inner().to_vec();
    match spec {
        NeighborSpec::Nu { index, replacement } => {
            if *index >= outer.len() {
                return Err(Error::IndexOutOfRange {
                    index: *index,
                    len: outer.len(),
                });
            }
            crate::linalg::check_dim(outer[*index].c.len(), replacement.c.len())?;
            outer[*index] = replacement.clone();
        }
        NeighborSpec::Omega { index, replacement } => {
            if *index >= inner.len() {
                return Err(Error::IndexOutOfRange {
                    index: *index,
                    len: inner.len(),
                });
            }
            crate::linalg::check_dim(inner[*index].a.nrows(), replacement.a.nrows())?;
            crate::linalg::check_dim(inner[*index].a.ncols(), replacement.a.ncols())?;
            inner[*index] = replacement.clone();
        }
    }
    Dataset::new(outer, inner)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Both runs consume the same index stream.
    Shared,
    /// The neighbor run draws its own indices.
    Independent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOutcome {
    pub output: Vector,
    pub neighbor_output: Vector,
    pub distance: f64,
}

/// Runs the optimizer on `ds` and `neighbor` and returns both outputs.
pub fn coupled_run<P: CompositionalProblem + ?Sized>(
    ds: &P,
    neighbor: &P,
    cfg: &OptimizerConfig,
    rng: Rng,
    coupling: Coupling,
) -> Result<CoupledOutcome> {
    if ds.n() != neighbor.n() || ds.m() != neighbor.m() || ds.dims() != neighbor.dims() {
        return Err(Error::NonNeighboring);
    }
    let a = run(ds, cfg, rng)?;
    let neighbor_rng = match coupling {
        Coupling::Shared => rng,
        Coupling::Independent => rng.split("independent-neighbor"),
    };
    let b = run(neighbor, cfg, neighbor_rng)?;
    let distance = (&a.final_output - &b.final_output).norm();
    Ok(CoupledOutcome {
        output: a.final_output,
        neighbor_output: b.final_output,
        distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityEstimate {
    pub eps_nu_hat: f64,
    pub eps_nu_se: f64,
    pub eps_omega_hat: f64,
    pub eps_omega_se: f64,
    pub replicates: usize,
    pub coupled: bool,
}

/// Per-replicate distances `(d_ν, d_ω)`.
pub fn stability_distances(
    law: &PopulationLaw,
    n: usize,
    m: usize,
    cfg: &OptimizerConfig,
    replicates: usize,
    rng: Rng,
    coupling: Coupling,
    threads: Option<usize>,
) -> Result<Vec<(f64, f64)>> {
    par_map(replicates, threads, |r| {
        let rep = rng.split_index("replicate", r as u64);
        let ds = law.sample_dataset(n, m, rep.split("data"))?;
        let mut g = rep.split("neighbor").generator();
        let i = g.gen_range(0..n as u64) as usize;
        let nu = law.sample_outer(&mut g);
        let j = g.gen_range(0..m as u64) as usize;
        let omega = law.sample_inner(&mut g);
        let s_nu = make_neighbor(
            &ds,
            &NeighborSpec::Nu {
                index: i,
                replacement: nu,
            },
        )?;
        let s_omega = make_neighbor(
            &ds,
            &NeighborSpec::Omega {
                index: j,
                replacement: omega,
            },
        )?;
        let d_nu = coupled_run(&ds, &s_nu, cfg, rep.split("algo-nu"), coupling)?.distance;
        let d_omega = coupled_run(&ds, &s_omega, cfg, rep.split("algo-omega"), coupling)?.distance;
        Ok((d_nu, d_omega))
    })
}

/// Monte Carlo estimate of `(ε_ν, ε_ω)` over `replicates` fresh datasets.
#[allow(clippy::too_many_arguments)]
pub fn estimate_stability(
    law: &PopulationLaw,
    n: usize,
    m: usize,
    cfg: &OptimizerConfig,
    replicates: usize,
    rng: Rng,
    coupling: Coupling,
    threads: Option<usize>,
) -> Result<StabilityEstimate> {
    if replicates < 2 {
        return Err(Error::InvalidConfig("replicates must be ≥ 2".into()));
    }
    let d = stability_distances(law, n, m, cfg, replicates, rng, coupling, threads)?;
    let nu: Vec<f64> = d.iter().map(|p| p.0).collect();
    let omega: Vec<f64> = d.iter().map(|p| p.1).collect();
    let (eps_nu_hat, eps_nu_se) = mean_se(&nu);
    let (eps_omega_hat, eps_omega_se) = mean_se(&omega);
    Ok(StabilityEstimate {
        eps_nu_hat,
        eps_nu_se,
        eps_omega_hat,
        eps_omega_se,
        replicates,
        coupled: coupling == Coupling::Shared,
    })
}

/// Both sides of the stability → generalization inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizationCheck {
    /// Mean of `F(A(S)) − F_S(A(S))`.
    pub gap_mean: f64,
    pub gap_se: f64,
    pub stability: StabilityEstimate,
    /// Mean of `Var_ω(g_ω(A(S)))`.
    pub variance_mean: f64,
    pub variance_se: f64,
    pub l_f: f64,
    pub l_g: f64,
    /// `L_f L_g ε̂_ν + 4 L_f L_g ε̂_ω + L_f √(E Var / m)`.
    pub rhs: f64,
    /// Combined standard error of both sides.
    pub combined_se: f64,
    pub holds: bool,
}

/// Lipschitz constants valid for every population sample on the ball:
/// `L_g ≥ sup_ω ‖A_ω‖_op` and `L_f ≥ sup_ν ‖y − c_ν‖` for `y` in the images
/// of the ball under both `g` and `g_S`.
fn population_lipschitz(law: &PopulationLaw, ds: &Dataset, radius: f64) -> (f64, f64) {
    let (p, d) = law.dims();
    let l_g = operator_norm(&law.mean_a) + law.tau_a * ((p * d) as f64).sqrt();
    let reach = |a: &crate::linalg::Matrix, shift: Vector| {
        crate::constants::BallQuadratic {
            m: a.tr_mul(a),
            q: a.tr_mul(&shift),
            r: shift.norm_squared(),
        }
        .max_on_ball(radius)
        .0
        .max(0.0)
        .sqrt()
    };
    let l_f = reach(&law.mean_a, &law.mean_b - &law.mean_c)
        .max(reach(ds.mean_a(), ds.mean_b() - &law.mean_c))
        + law.tau_c * (d as f64).sqrt();
    (l_f, l_g)
}

/// Estimates `E[F(A(S)) − F_S(A(S))]` and the stability-based right-hand side.
/// `holds` is `gap ≤ rhs + 3·SE`.
#[allow(clippy::too_many_arguments)]
pub fn check_generalization(
    law: &PopulationLaw,
    n: usize,
    m: usize,
    cfg: &OptimizerConfig,
    replicates: usize,
    rng: Rng,
    threads: Option<usize>,
) -> Result<GeneralizationCheck> {
    if replicates < 2 {
        return Err(Error::InvalidConfig("replicates must be ≥ 2".into()));
    }
    let per_rep = par_map(replicates, threads, |r| {
        let rep = rng.split_index("gap", r as u64);
        let ds = law.sample_dataset(n, m, rep.split("data"))?;
        let out = run(&ds, cfg, rep.split("algo"))?.final_output;
        let gap = law.population_risk(&out)? - ds.empirical_risk(&out);
        let var = law.inner_variance(&out);
        let (l_f, l_g) = population_lipschitz(law, &ds, cfg.domain_radius);
        let l_g = l_g.max(compute_constants(&ds, cfg.domain_radius, 0)?.l_g);
        Ok((gap, var, l_f, l_g))
    })?;
    let gaps: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
    let vars: Vec<f64> = per_rep.iter().map(|r| r.1).collect();
    let l_f = per_rep.iter().map(|r| r.2).fold(0.0, f64::max);
    let l_g = per_rep.iter().map(|r| r.3).fold(0.0, f64::max);
    let (gap_mean, gap_se) = mean_se(&gaps);
    let (variance_mean, variance_se) = mean_se(&vars);

    let stability = estimate_stability(
        law,
        n,
        m,
        cfg,
        replicates,
        rng.split("stability"),
        Coupling::Shared,
        threads,
    )?;
    let lflg = l_f * l_g;
    let sqrt_term = (variance_mean / m as f64).sqrt();
    let rhs = lflg * stability.eps_nu_hat + 4.0 * lflg * stability.eps_omega_hat + l_f * sqrt_term;
    // delta method for the square-root term
    let sqrt_se = if sqrt_term > 0.0 {
        variance_se / (2.0 * m as f64 * sqrt_term)
    } else {
        0.0
    };
    let combined_se = (gap_se.powi(2)
        + (lflg * stability.eps_nu_se).powi(2)
        + (4.0 * lflg * stability.eps_omega_se).powi(2)
        + (l_f * sqrt_se).powi(2))
    .sqrt();
    Ok(GeneralizationCheck {
        gap_mean,
        gap_se,
        stability,
        variance_mean,
        variance_se,
        l_f,
        l_g,
        rhs,
        combined_se,
        holds: gap_mean <= rhs + 3.0 * combined_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Variant;
    use crate::problem::Benchmark;

    fn small_cfg(variant: Variant) -> OptimizerConfig {
        OptimizerConfig::new(variant, 5, 4, 400, 0.01, 0.2)
    }

    #[test]
    fn neighbor_replacement_semantics() {
        let law = Benchmark::Convex.law();
        let ds = law.sample_dataset(6, 5, Rng::new(1)).unwrap();
        let same = make_neighbor(
            &ds,
            &NeighborSpec::Nu {
                index: 2,
                replacement: ds.outer()[2].clone(),
            },
        )
        .unwrap();
        assert_eq!(same, ds);

        let mut g = Rng::new(2).generator();
        let nb = make_neighbor(
            &ds,
            &NeighborSpec::Nu {
                index: 4,
                replacement: law.sample_outer(&mut g),
            },
        )
        .unwrap();
        assert_eq!(nb.inner(), ds.inner());
        let differing = (0..6).filter(|&i| nb.outer()[i] != ds.outer()[i]).count();
        assert_eq!(differing, 1);

        assert!(matches!(
            make_neighbor(
                &ds,
                &NeighborSpec::Omega {
                    index: 5,
                    replacement: ds.inner()[0].clone()
                }
            ),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn neighbor_serializations_differ_in_one_record() {
        let law = Benchmark::Convex.law();
        let ds = law.sample_dataset(6, 5, Rng::new(1)).unwrap();
        let mut g = Rng::new(3).generator();
        let nb = make_neighbor(
            &ds,
            &NeighborSpec::Omega {
                index: 1,
                replacement: law.sample_inner(&mut g),
            },
        )
        .unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        ds.write_csv(a.path()).unwrap();
        nb.write_csv(b.path()).unwrap();
        let diff = |name: &str| {
            let x = std::fs::read_to_string(a.path().join(name)).unwrap();
            let y = std::fs::read_to_string(b.path().join(name)).unwrap();
            x.lines().zip(y.lines()).filter(|(l, r)| l != r).count()
        };
        assert_eq!(diff("inner.csv"), 1);
        assert_eq!(diff("outer.csv"), 0);
    }

    #[test]
    fn identical_datasets_have_zero_distance() {
        let ds = Benchmark::Convex
            .law()
            .sample_dataset(8, 8, Rng::new(4))
            .unwrap();
        for variant in [Variant::Scgd, Variant::Scsc] {
            let out =
                coupled_run(&ds, &ds, &small_cfg(variant), Rng::new(5), Coupling::Shared).unwrap();
            assert_eq!(out.distance, 0.0);
        }
    }

    #[test]
    fn unsampled_inner_difference_is_invisible() {
        let law = Benchmark::Convex.law();
        let ds = law.sample_dataset(8, 50, Rng::new(4)).unwrap();
        let cfg = OptimizerConfig::new(Variant::Scgd, 5, 4, 20, 0.01, 0.2);
        let traj = run(&ds, &cfg, Rng::new(6)).unwrap();
        let unseen = (0..50)
            .find(|j| traj.index_log.iter().all(|(jt, _)| *jt as usize != *j))
            .expect("20 draws cannot cover 50 indices");
        let mut g = Rng::new(7).generator();
        let nb = make_neighbor(
            &ds,
            &NeighborSpec::Omega {
                index: unseen,
                replacement: law.sample_inner(&mut g),
            },
        )
        .unwrap();
        let out = coupled_run(&ds, &nb, &cfg, Rng::new(6), Coupling::Shared).unwrap();
        assert_eq!(out.distance, 0.0);
    }

    #[test]
    fn distance_is_bounded_by_diameter_and_sizes_must_match() {
        let law = Benchmark::Convex.law();
        let ds = law.sample_dataset(8, 8, Rng::new(4)).unwrap();
        let other = law.sample_dataset(8, 8, Rng::new(40)).unwrap();
        let mut cfg = OptimizerConfig::new(Variant::Scsc, 5, 4, 300, 0.5, 0.5);
        cfg.domain_radius = 0.5;
        let out = coupled_run(&ds, &other, &cfg, Rng::new(1), Coupling::Independent).unwrap();
        assert!(out.distance <= 1.0 + 1e-12);
        let small = law.sample_dataset(7, 8, Rng::new(4)).unwrap();
        assert_eq!(
            coupled_run(&ds, &small, &cfg, Rng::new(1), Coupling::Shared).unwrap_err(),
            Error::NonNeighboring
        );
    }

    #[test]
    fn noiseless_law_is_perfectly_stable() {
        let law = Benchmark::Convex.law().noiseless();
        let est = estimate_stability(
            &law,
            10,
            10,
            &small_cfg(Variant::Scgd),
            5,
            Rng::new(1),
            Coupling::Shared,
            Some(1),
        )
        .unwrap();
        assert_eq!(est.eps_nu_hat, 0.0);
        assert_eq!(est.eps_omega_hat, 0.0);
    }

    #[test]
    fn frozen_iterate_is_perfectly_stable() {
        let law = Benchmark::Convex.law();
        let cfg = OptimizerConfig::new(Variant::Scsc, 5, 4, 1, 0.0, 0.5);
        let est = estimate_stability(
            &law,
            10,
            10,
            &cfg,
            5,
            Rng::new(1),
            Coupling::Shared,
            Some(1),
        )
        .unwrap();
        assert_eq!((est.eps_nu_hat, est.eps_omega_hat), (0.0, 0.0));
    }

    #[test]
    fn noiseless_inner_isolates_outer_instability() {
        let mut law = Benchmark::Convex.law();
        law.tau_a = 0.0;
        law.tau_b = 0.0;
        let est = estimate_stability(
            &law,
            10,
            10,
            &small_cfg(Variant::Scgd),
            20,
            Rng::new(2),
            Coupling::Shared,
            Some(2),
        )
        .unwrap();
        assert_eq!(est.eps_omega_hat, 0.0);
        assert!(est.eps_nu_hat > 0.0);
        assert!(est.eps_nu_se >= 0.0 && est.eps_nu_se.is_finite());
    }

    #[test]
    fn uncoupled_runs_measure_more() {
        let law = Benchmark::Convex.law();
        let cfg = small_cfg(Variant::Scgd);
        let shared =
            estimate_stability(&law, 10, 10, &cfg, 20, Rng::new(3), Coupling::Shared, None)
                .unwrap();
        let indep = estimate_stability(
            &law,
            10,
            10,
            &cfg,
            20,
            Rng::new(3),
            Coupling::Independent,
            None,
        )
        .unwrap();
        assert!(!indep.coupled);
        assert!(indep.eps_nu_hat > shared.eps_nu_hat);
    }

    #[test]
    fn estimate_is_thread_count_invariant() {
        let law = Benchmark::Convex.law();
        let cfg = small_cfg(Variant::Scsc);
        let a = estimate_stability(
            &law,
            10,
            10,
            &cfg,
            12,
            Rng::new(9),
            Coupling::Shared,
            Some(1),
        )
        .unwrap();
        let b = estimate_stability(
            &law,
            10,
            10,
            &cfg,
            12,
            Rng::new(9),
            Coupling::Shared,
            Some(4),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_generalization_sides_vanish() {
        let law = Benchmark::Convex.law().noiseless();
        let rep = check_generalization(
            &law,
            5,
            5,
            &small_cfg(Variant::Scgd),
            4,
            Rng::new(1),
            Some(1),
        )
        .unwrap();
        assert!(rep.gap_mean.abs() < 1e-12);
        assert!(rep.rhs.abs() < 1e-12);
        assert!(rep.holds);
    }

    #[test]
    fn identity_inner_drops_compositional_terms() {
        // g_ω(x) = x for every ω: no inner noise, m = 1
        let law = PopulationLaw::new(
            crate::linalg::Matrix::identity(3, 3),
            Vector::zeros(3),
            Vector::from_column_slice(&[1.0, -1.0, 0.5]),
            0.0,
            0.0,
            0.5,
        )
        .unwrap();
        let cfg = OptimizerConfig::new(Variant::Scsc, 3, 3, 300, 0.05, 0.5);
        let rep = check_generalization(&law, 10, 1, &cfg, 30, Rng::new(2), None).unwrap();
        assert_eq!(rep.variance_mean, 0.0);
        assert_eq!(rep.stability.eps_omega_hat, 0.0);
        assert!((rep.rhs - rep.l_f * rep.l_g * rep.stability.eps_nu_hat).abs() < 1e-15);
        assert!(rep.holds);
    }
}
