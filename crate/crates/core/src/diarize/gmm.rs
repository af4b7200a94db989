//! Diagonal-covariance Gaussian mixture fitted by EM.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;
use rand::Rng;

use crate::error::invalid;
use crate::rng::split;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub components: usize,
    pub max_iterations: usize,
    /// Stop when the per-point log-likelihood improves by less than this.
    pub tolerance: f64,
    pub variance_floor: f64,
    pub restarts: usize,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            components: 8,
            max_iterations: 200,
            tolerance: 1e-6,
            variance_floor: 1e-6,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// Mean log-likelihood per point, one entry per E-step.
    pub log_likelihood: Vec<f64>,
    /// Component with the largest responsibility, per point.
    pub labels: Vec<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding; stops early when every point coincides with a center.
fn kmeans_pp<R: Rng>(x: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut centers = vec![x[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = x.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut r = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            if r < d {
                pick = i;
                break;
            }
            r -= d;
        }
        let c = x[pick].clone();
        for (d, p) in d2.iter_mut().zip(x) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

struct Model {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl Model {
    /// Per-component log weight plus normalizer, and inverse variances.
    fn precompute(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let ln2pi = (2.0 * PI).ln();
        let consts = self
            .weights
            .iter()
            .zip(&self.variances)
            .map(|(w, var)| w.ln() - 0.5 * var.iter().map(|v| v.ln() + ln2pi).sum::<f64>())
            .collect();
        let inv = self
            .variances
            .iter()
            .map(|var| var.iter().map(|v| 1.0 / v).collect())
            .collect();
        (consts, inv)
    }

    /// Fills responsibilities and returns the mean log-likelihood.
    fn e_step(&self, x: &[Vec<f64>], resp: &mut [Vec<f64>]) -> f64 {
        let k = self.weights.len();
        let (consts, inv) = self.precompute();
        let mut total = 0.0;
        let mut logp = vec![0.0; k];
        for (p, r) in x.iter().zip(resp.iter_mut()) {
            let mut max = f64::NEG_INFINITY;
            for j in 0..k {
                let mut s = 0.0;
                for ((x, m), iv) in p.iter().zip(&self.means[j]).zip(&inv[j]) {
                    s += (x - m) * (x - m) * iv;
                }
                logp[j] = consts[j] - 0.5 * s;
                max = max.max(logp[j]);
            }
            // exp underflows to zero below about -745
            for l in logp.iter_mut() {
                let d = *l - max;
                *l = if d < -746.0 { 0.0 } else { d.exp() };
            }
            let sum: f64 = logp.iter().sum();
            total += max + sum.ln();
            r.clear();
            r.extend(logp.iter().map(|e| e / sum));
        }
        total / x.len() as f64
    }

    fn m_step(x: &[Vec<f64>], resp: &[Vec<f64>], floor: f64) -> Model {
        let k = resp[0].len();
        let dim = x[0].len();
        let n = x.len() as f64;
        let mut counts = vec![0.0; k];
        let mut means = vec![vec![0.0; dim]; k];
        for (p, r) in x.iter().zip(resp) {
            for j in 0..k {
                counts[j] += r[j];
                for (m, v) in means[j].iter_mut().zip(p) {
                    *m += r[j] * v;
                }
            }
        }
        let keep: Vec<usize> = (0..k).filter(|&j| counts[j] > 1e-10).collect();
        for &j in &keep {
            for m in means[j].iter_mut() {
                *m /= counts[j];
            }
        }
        let mut variances = vec![vec![0.0; dim]; k];
        for (p, r) in x.iter().zip(resp) {
            for &j in &keep {
                for ((s, v), m) in variances[j].iter_mut().zip(p).zip(&means[j]) {
                    *s += r[j] * (v - m) * (v - m);
                }
            }
        }
        Model {
            weights: keep.iter().map(|&j| counts[j] / n).collect(),
            means: keep.iter().map(|&j| means[j].clone()).collect(),
            variances: keep
                .iter()
                .map(|&j| {
                    variances[j]
                        .iter()
                        .map(|s| (s / counts[j]).max(floor))
                        .collect()
                })
                .collect(),
        }
    }
}

fn fit_once(x: &[Vec<f64>], opts: &GmmOptions, seed: u64, restart: usize) -> GmmFit {
    let mut rng = split(seed, restart as u64);
    let centers = kmeans_pp(x, opts.components, &mut rng);
    // hard assignment to the seeds gives the first M-step
    let mut resp: Vec<Vec<f64>> = x
        .iter()
        .map(|p| {
            let best = (0..centers.len())
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .unwrap();
            let mut r = vec![0.0; centers.len()];
            r[best] = 1.0;
            r
        })
        .collect();
    let mut model = Model::m_step(x, &resp, opts.variance_floor);
    let mut history = Vec::new();
    for _ in 0..opts.max_iterations {
        let ll = model.e_step(x, &mut resp);
        let converged = history.last().map_or(false, |&prev: &f64| {
            (ll - prev).abs() <= opts.tolerance * prev.abs().max(1.0)
        });
        history.push(ll);
        if converged {
            break;
        }
        model = Model::m_step(x, &resp, opts.variance_floor);
    }
    let labels = resp
        .iter()
        .map(|r| {
            (0..r.len())
                .max_by(|&a, &b| r[a].total_cmp(&r[b]).then(b.cmp(&a)))
                .unwrap()
        })
        .collect();
    GmmFit {
        weights: model.weights,
        means: model.means,
        variances: model.variances,
        log_likelihood: history,
        labels,
    }
}

/// Fits a diagonal GMM with k-means++ seeding; the best of `restarts` runs
/// by final log-likelihood is returned.
pub fn fit_gmm(x: &[Vec<f64>], opts: &GmmOptions, seed: u64) -> Result<GmmFit> {
    if opts.components == 0 {
        return Err(invalid!("need at least one component"));
    }
    if x.len() < opts.components {
        return Err(invalid!(
            "{} points for {} components",
            x.len(),
            opts.components
        ));
    }
    let dim = x[0].len();
    if dim == 0 || x.iter().any(|p| p.len() != dim) {
        return Err(invalid!("points must share a nonzero dimension"));
    }
    let mut best: Option<GmmFit> = None;
    for r in 0..opts.restarts.max(1) {
        let fit = fit_once(x, opts, seed, r);
        let better = match &best {
            None => true,
            Some(b) => fit.log_likelihood.last() > b.log_likelihood.last(),
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, seeded};

    #[test]
    fn log_likelihood_never_decreases() {
        let mut rng = seeded(11);
        let mut x = Vec::new();
        for c in 0..3 {
            for _ in 0..60 {
                let mut p = gaussian_vec(&mut rng, 4, 1.0);
                p[0] += 3.0 * c as f64;
                x.push(p);
            }
        }
        let fit = fit_gmm(
            &x,
            &GmmOptions {
                components: 5,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-10 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn identical_points_collapse_to_one_component() {
        let x = vec![vec![0.5, -0.5]; 20];
        let fit = fit_gmm(&x, &GmmOptions::default(), 3).unwrap();
        assert_eq!(fit.weights.len(), 1);
        assert!(fit.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn too_few_points() {
        let x = vec![vec![0.0]; 3];
        assert!(fit_gmm(&x, &GmmOptions::default(), 0).is_err());
    }
}
