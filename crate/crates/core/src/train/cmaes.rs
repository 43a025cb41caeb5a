//! (μ/μ_w, λ)-CMA-ES with cumulative step-size adaptation and rank-one plus
//! rank-μ covariance updates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaesConfig {
    /// λ.
    pub population: usize,
    pub iterations: usize,
    pub sigma: f64,
    pub seed: u64,
    /// Stop once this many objective calls have been made.
    pub max_evaluations: Option<usize>,
    /// Symmetric box `[-b, b]` on every coordinate. Samples outside it are
    /// evaluated at their projection plus a quadratic distance penalty.
    #[serde(default)]
    pub bound: Option<f64>,
}

impl CmaesConfig {
    /// Textbook population size `4 + ⌊3 ln n⌋`.
    pub fn for_dimension(dim: usize, iterations: usize, seed: u64) -> Self {
        CmaesConfig {
            population: 4 + (3.0 * (dim.max(1) as f64).ln()).floor() as usize,
            iterations,
            sigma: 0.5,
            seed,
            max_evaluations: None,
            bound: None,
        }
    }
}

impl Default for CmaesConfig {
    fn default() -> Self {
        CmaesConfig {
            population: 152,
            iterations: 50,
            sigma: 0.5,
            seed: 0,
            max_evaluations: None,
            bound: None,
        }
    }
}

/// Weight of the squared distance to the box, relative to the objective.
const BOUND_PENALTY: f64 = 1.0;

fn project(x: &[f64], b: f64) -> Vec<f64> {
    x.iter().map(|v| v.clamp(-b, b)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaesResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best-so-far objective after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Minimizes `objective` starting from `mean`. NaN objective values count
/// as `+∞`. Samples are drawn sequentially from one seeded stream and
/// evaluated in parallel, so results do not depend on thread count.
pub fn cmaes_minimize<F>(objective: F, mean: &[f64], cfg: &CmaesConfig) -> Result<CmaesResult, TrainError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = mean.len();
    if n == 0 {
        return Err(TrainError::Config("dimension must be at least 1".into()));
    }
    if cfg.population < 4 {
        return Err(TrainError::Config(format!("population {} below 4", cfg.population)));
    }
    if !(cfg.sigma > 0.0) {
        return Err(TrainError::Config(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    let lambda = cfg.population;
    let mu = lambda / 2;
    let nf = n as f64;
    let raw: Vec<f64> = (1..=mu)
        .map(|i| ((mu as f64) + 0.5).ln() - (i as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / wsum).collect();
    let mueff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();

    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let ds = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut m = DVector::from_column_slice(mean);
    let mut sigma = cfg.sigma;
    let mut ps = DVector::zeros(n);
    let mut pc = DVector::zeros(n);
    let mut c = DMatrix::identity(n, n);
    // C = B diag(d²) Bᵀ; `None` while C is still the identity
    let mut eig: Option<(DMatrix<f64>, DVector<f64>)> = None;
    let mut eigen_at = 0usize;
    let eigen_gap = (lambda as f64 / ((c1 + cmu) * nf * 10.0)).max(1.0) as usize;

    let score = |x: &[f64]| {
        let (v, excess) = match cfg.bound {
            None => (objective(x), 0.0),
            Some(b) => {
                let p = project(x, b);
                let excess: f64 = x.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
                (objective(&p), excess)
            }
        };
        if v.is_nan() {
            f64::INFINITY
        } else {
            v + BOUND_PENALTY * excess * (1.0 + v.abs())
        }
    };
    let mut best = mean.to_vec();
    let mut best_value = f64::INFINITY;
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut evaluations = 0usize;

    for gen in 0..cfg.iterations {
        if cfg.max_evaluations.is_some_and(|cap| evaluations + lambda > cap) {
            break;
        }
        let zs: Vec<DVector<f64>> = (0..lambda)
            .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let ys: Vec<DVector<f64>> = zs
            .iter()
            .map(|z| match &eig {
                None => z.clone(),
                Some((b, d)) => b * z.component_mul(d),
            })
            .collect();
        let xs: Vec<Vec<f64>> = ys.iter().map(|y| (&m + y * sigma).iter().copied().collect()).collect();
        let fit: Vec<f64> = xs.par_iter().map(|x| score(x)).collect();
        evaluations += lambda;
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)));
        if fit[order[0]] < best_value {
            best_value = fit[order[0]];
            best = match cfg.bound {
                None => xs[order[0]].clone(),
                Some(b) => project(&xs[order[0]], b),
            };
        }
        history.push(best_value);

        let mut yw = DVector::zeros(n);
        for (k, &i) in order.iter().take(mu).enumerate() {
            yw += &ys[i] * w[k];
        }
        m += &yw * sigma;

        // C^{-1/2} y_w
        let inv_sqrt_yw = match &eig {
            None => yw.clone(),
            Some((b, d)) => b * (b.tr_mul(&yw)).component_div(d),
        };
        ps = &ps * (1.0 - cs) + inv_sqrt_yw * (cs * (2.0 - cs) * mueff).sqrt();
        let ps_norm = ps.norm();
        let decay = 1.0 - (1.0 - cs).powi(2 * (gen as i32 + 1));
        let hsig = ps_norm / decay.sqrt() < (1.4 + 2.0 / (nf + 1.0)) * chi_n;
        let hs = if hsig { 1.0 } else { 0.0 };
        pc = &pc * (1.0 - cc) + &yw * (hs * (cc * (2.0 - cc) * mueff).sqrt());

        let keep = 1.0 - c1 - cmu + (1.0 - hs) * c1 * cc * (2.0 - cc);
        c *= keep;
        c.ger(c1, &pc, &pc, 1.0);
        for (k, &i) in order.iter().take(mu).enumerate() {
            c.ger(cmu * w[k], &ys[i], &ys[i], 1.0);
        }
        sigma *= ((cs / ds) * (ps_norm / chi_n - 1.0)).exp();

        if gen + 1 - eigen_at >= eigen_gap {
            eigen_at = gen + 1;
            c = (&c + c.transpose()) * 0.5;
            let se = SymmetricEigen::new(c.clone());
            let d = se.eigenvalues.map(|v| v.max(1e-300).sqrt());
            eig = Some((se.eigenvectors, d));
        }
        let spread = sigma * eig.as_ref().map_or(1.0, |(_, d)| d.max());
        if !(spread > 1e-300) || !spread.is_finite() {
            break;
        }
    }
    Ok(CmaesResult {
        best,
        best_value,
        history,
        evaluations,
    })
}
