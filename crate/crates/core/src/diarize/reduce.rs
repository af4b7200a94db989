use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use crate::error::invalid;
use crate::linalg::symmetric_eigen;
use crate::rng::{gaussian, seeded};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Centering followed by projection on the leading principal directions.
    #[default]
    Linear,
    /// Vectors were reduced by an external tool and are used as given.
    External,
}

/// Reduces `vectors` to `target_dim` dimensions.
///
/// Principal directions whose variance is numerically zero are emitted as
/// zero columns.
pub fn reduce_dim(
    vectors: &[Vec<f64>],
    target_dim: usize,
    method: Reduction,
) -> Result<Vec<Vec<f64>>> {
    if method == Reduction::External {
        return Ok(vectors.to_vec());
    }
    let n = vectors.len();
    let dim = vectors.first().map_or(0, Vec::len);
    if target_dim == 0 || target_dim > dim {
        return Err(invalid!("target dim {target_dim} must be in 1..={dim}"));
    }
    if n < target_dim + 1 {
        return Err(invalid!(
            "{n} samples are too few for {target_dim} principal directions"
        ));
    }
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let (values, directions) = if dim <= 256 {
        covariance_directions(&centered, dim)
    } else {
        randomized_directions(&centered, dim, target_dim)
    };
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let usable = values
        .iter()
        .take(target_dim)
        .filter(|&&v| v > 1e-12 * top && top > 0.0)
        .count();
    if usable < target_dim {
        log::warn!(
            "only {usable} of {target_dim} principal directions carry variance; padding with zeros"
        );
    }
    Ok(centered
        .iter()
        .map(|x| {
            (0..target_dim)
                .map(|k| {
                    if k < usable {
                        directions[k].iter().zip(x).map(|(a, b)| a * b).sum()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}

fn covariance_directions(centered: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut cov = vec![0.0; dim * dim];
    for x in centered {
        for i in 0..dim {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[i * dim + j] += xi * x[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[i * dim + j] = cov[j * dim + i];
        }
    }
    symmetric_eigen(&cov, dim)
}

/// Leading directions by randomized subspace iteration, for wide inputs.
fn randomized_directions(centered: &[Vec<f64>], dim: usize, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let l = (k + 10).min(dim);
    let mut rng = seeded(0x5eed);
    // basis: l vectors in input space
    let mut basis: Vec<Vec<f64>> = (0..l)
        .map(|_| (0..dim).map(|_| gaussian(&mut rng)).collect())
        .collect();
    orthonormalize(&mut basis);
    for _ in 0..8 {
        // basis <- X^T X basis
        let proj: Vec<Vec<f64>> = centered
            .iter()
            .map(|x| basis.iter().map(|b| dot(b, x)).collect())
            .collect();
        let mut next = vec![vec![0.0; dim]; l];
        for (x, p) in centered.iter().zip(&proj) {
            for (nb, &pv) in next.iter_mut().zip(p) {
                for (a, xv) in nb.iter_mut().zip(x) {
                    *a += pv * xv;
                }
            }
        }
        basis = next;
        orthonormalize(&mut basis);
    }
    // Rayleigh-Ritz in the captured subspace
    let proj: Vec<Vec<f64>> = centered
        .iter()
        .map(|x| basis.iter().map(|b| dot(b, x)).collect())
        .collect();
    let mut small = vec![0.0; l * l];
    for p in &proj {
        for i in 0..l {
            for j in 0..l {
                small[i * l + j] += p[i] * p[j];
            }
        }
    }
    let (values, vecs) = symmetric_eigen(&small, l);
    let directions = vecs
        .iter()
        .map(|u| {
            let mut d = vec![0.0; dim];
            for (coef, b) in u.iter().zip(&basis) {
                for (a, bv) in d.iter_mut().zip(b) {
                    *a += coef * bv;
                }
            }
            d
        })
        .collect();
    (values, directions)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram-Schmidt with one re-orthogonalization pass. Vectors that are
/// numerically dependent on their predecessors become zero.
fn orthonormalize(vs: &mut [Vec<f64>]) {
    for i in 0..vs.len() {
        let before = dot(&vs[i], &vs[i]).sqrt();
        for _ in 0..2 {
            for j in 0..i {
                let p = dot(&vs[i], &vs[j]);
                let (head, tail) = vs.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= p * b;
                }
            }
        }
        let n = dot(&vs[i], &vs[i]).sqrt();
        let scale = if n > 1e-10 * before && n > 0.0 { 1.0 / n } else { 0.0 };
        for a in vs[i].iter_mut() {
            *a *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, seeded};

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn planar_data_keeps_distances() {
        let mut rng = seeded(7);
        let u = crate::rng::unit_vector(&mut rng, 10);
        let mut w = crate::rng::unit_vector(&mut rng, 10);
        let p: f64 = dot(&u, &w);
        for (a, b) in w.iter_mut().zip(&u) {
            *a -= p * b;
        }
        let n = dot(&w, &w).sqrt();
        w.iter_mut().for_each(|a| *a /= n);
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let c = gaussian_vec(&mut rng, 2, 3.0);
                (0..10).map(|k| c[0] * u[k] + c[1] * w[k] + 1.0).collect()
            })
            .collect();
        let red = reduce_dim(&pts, 2, Reduction::Linear).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert!((dist(&pts[i], &pts[j]) - dist(&red[i], &red[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn full_dim_is_change_of_basis() {
        let mut rng = seeded(8);
        let pts: Vec<Vec<f64>> = (0..20).map(|_| gaussian_vec(&mut rng, 6, 1.0)).collect();
        let red = reduce_dim(&pts, 6, Reduction::Linear).unwrap();
        for i in 0..pts.len() {
            for j in 0..i {
                assert!((dist(&pts[i], &pts[j]) - dist(&red[i], &red[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_deficient_pads_zeros() {
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 2.0 * i as f64, 0.0])
            .collect();
        let red = reduce_dim(&pts, 3, Reduction::Linear).unwrap();
        assert!(red.iter().all(|r| r[1] == 0.0 && r[2] == 0.0));
    }

    #[test]
    fn external_is_passthrough_and_errors_checked() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(reduce_dim(&pts, 12, Reduction::External).unwrap(), pts);
        assert!(reduce_dim(&pts, 3, Reduction::Linear).is_err());
        assert!(reduce_dim(&pts, 2, Reduction::Linear).is_err());
    }

    #[test]
    fn randomized_path_matches_exact_on_low_rank() {
        let mut rng = seeded(9);
        let basis: Vec<Vec<f64>> = (0..3)
            .map(|_| crate::rng::unit_vector(&mut rng, 300))
            .collect();
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                let c = gaussian_vec(&mut rng, 3, 1.0);
                (0..300)
                    .map(|k| (0..3).map(|j| c[j] * basis[j][k]).sum())
                    .collect()
            })
            .collect();
        let red = reduce_dim(&pts, 3, Reduction::Linear).unwrap();
        for i in 0..pts.len() {
            for j in 0..i {
                assert!((dist(&pts[i], &pts[j]) - dist(&red[i], &red[j])).abs() < 1e-8);
            }
        }
    }
}
