//! Indexed parallel map. Results come back in index order, so any
//! aggregation done afterwards is independent of the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Evaluates `f(0..len)` on up to `threads` workers (`None`: rayon default).
pub fn par_map<T, F>(len: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    match threads {
        Some(1) => (0..len).map(&f).collect(),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| (0..len).into_par_iter().map(&f).collect())
        }
        None => (0..len).into_par_iter().map(&f).collect(),
    }
}

/// Sample mean and standard error (sample standard deviation over `√k`).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}
