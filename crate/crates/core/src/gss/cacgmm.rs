//! Complex angular central Gaussian mixture over direction-normalized
//! observation vectors, one model per frequency bin, with time-varying
//! mixture weights taken from speaker activities.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use super::GssConfig;
use crate::error::invalid;
use crate::fusion::SoftActivity;
use crate::linalg::{CMat, Cholesky};
use crate::signal::SpectralTensor;
use crate::Result;

const QUAD_FLOOR: f64 = 1e-10;

/// Posterior source masks, indexed `(source, frame, bin)`. Masks of all
/// sources sum to one at every time-frequency point.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskTensor {
    pub sources: usize,
    pub frames: usize,
    pub bins: usize,
    gammas: Vec<f64>,
}

impl MaskTensor {
    pub fn new(sources: usize, frames: usize, bins: usize) -> Self {
        Self {
            sources,
            frames,
            bins,
            gammas: vec![0.0; sources * frames * bins],
        }
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize, f: usize) -> f64 {
        self.gammas[(s * self.frames + t) * self.bins + f]
    }

    #[inline]
    pub fn set(&mut self, s: usize, t: usize, f: usize, v: f64) {
        self.gammas[(s * self.frames + t) * self.bins + f] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.gammas
    }

    /// Frame-wise concatenation.
    pub fn concat(parts: &[MaskTensor]) -> MaskTensor {
        let sources = parts[0].sources;
        let bins = parts[0].bins;
        let frames = parts.iter().map(|p| p.frames).sum();
        let mut out = MaskTensor::new(sources, frames, bins);
        let mut t0 = 0;
        for p in parts {
            for s in 0..sources {
                for t in 0..p.frames {
                    for f in 0..bins {
                        out.set(s, t0 + t, f, p.get(s, t, f));
                    }
                }
            }
            t0 += p.frames;
        }
        out
    }

    pub fn mean_abs_deviation(&self, other: &MaskTensor) -> f64 {
        let n = self.gammas.len().min(other.gammas.len()).max(1);
        self.gammas
            .iter()
            .zip(&other.gammas)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacgmmResult {
    pub masks: MaskTensor,
    /// Mean log-likelihood per bin, one value per EM iteration.
    pub log_likelihood: Vec<Vec<f64>>,
    /// Shape matrices `B`, indexed `[source][bin]`.
    pub shape_matrices: Vec<Vec<CMat>>,
}

/// Time-varying priors `(sources x frames)` for the tensor frames, read from
/// the activity frame containing each STFT frame center. `offset` is the
/// session time of the tensor's first sample. With `add_noise_source`, a
/// noise row `max(1 - sum, noise_floor)` is appended; columns are normalized.
pub fn activity_priors(
    tensor: &SpectralTensor,
    activities: &SoftActivity,
    offset: f64,
    add_noise_source: bool,
    noise_floor: f64,
) -> Vec<Vec<f64>> {
    let frames = tensor.frames();
    let speakers = activities.num_speakers();
    let sources = speakers + usize::from(add_noise_source);
    let act_frames = activities.frames();
    let pad = (tensor.frame_length / 2) as f64;
    let mut priors = vec![vec![0.0; frames]; sources];
    for t in 0..frames {
        let center = (t * tensor.frame_shift) as f64 + tensor.frame_length as f64 / 2.0 - pad;
        let time = offset + center / tensor.sample_rate as f64;
        let idx = if act_frames == 0 {
            None
        } else {
            Some(((time / activities.frame_step).floor().max(0.0) as usize).min(act_frames - 1))
        };
        let mut sum = 0.0;
        for s in 0..speakers {
            let p = idx.map_or(0.0, |i| activities.probs[s][i]);
            priors[s][t] = p;
            sum += p;
        }
        if add_noise_source {
            let noise = (1.0 - sum).max(noise_floor);
            priors[speakers][t] = noise;
            sum += noise;
        }
        for row in priors.iter_mut() {
            row[t] = if sum > 0.0 {
                row[t] / sum
            } else {
                1.0 / sources as f64
            };
        }
    }
    priors
}

fn log_cacg(chol: &Cholesky, z: &[Complex64], log_norm: f64) -> f64 {
    let d = z.len() as f64;
    let q = chol.quad_form_inv(z).max(QUAD_FLOOR);
    log_norm - chol.log_det() - d * q.ln()
}

/// Weighted fixed-point update of the shape matrix, trace-normalized to `D`.
fn update_shape(zs: &[Vec<Complex64>], gamma: &[f64], quad: &[f64], d: usize) -> CMat {
    let mut b = CMat::zeros(d, d);
    let mut wsum = 0.0;
    for ((z, &g), &q) in zs.iter().zip(gamma).zip(quad) {
        if g <= 0.0 {
            continue;
        }
        b.add_outer(z, g / q.max(QUAD_FLOOR));
        wsum += g;
    }
    if wsum <= 0.0 {
        return CMat::identity(d);
    }
    b.hermitize();
    let tr = b.trace().re;
    if !(tr > 0.0) {
        return CMat::identity(d);
    }
    b.scale(d as f64 / tr);
    if Cholesky::new(&b).is_none() {
        b.add_diagonal(1e-6);
        let tr = b.trace().re;
        b.scale(d as f64 / tr);
    }
    b
}

/// EM for one bin. Returns masks `(sources x frames)`, the log-likelihood
/// trace and the final shape matrices.
fn em_bin(
    obs: &[Vec<Complex64>],
    priors: &[Vec<f64>],
    iterations: usize,
    reestimate: bool,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<CMat>) {
    let sources = priors.len();
    let frames = obs.len();
    let d = obs.first().map_or(1, Vec::len);
    let log_norm = libm::lgamma(d as f64) - d as f64 * PI.ln() - 2f64.ln();
    let energy_floor = {
        let mean = obs
            .iter()
            .map(|x| x.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / frames.max(1) as f64;
        1e-20 * mean.max(f64::MIN_POSITIVE)
    };
    let valid: Vec<bool> = obs
        .iter()
        .map(|x| x.iter().map(|v| v.norm_sqr()).sum::<f64>() > energy_floor)
        .collect();
    let zs: Vec<Vec<Complex64>> = obs
        .iter()
        .map(|x| {
            let n = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if n > 0.0 {
                x.iter().map(|v| v / n).collect()
            } else {
                x.clone()
            }
        })
        .collect();
    let mut weights: Vec<Vec<f64>> = priors.to_vec();
    let mut gamma: Vec<Vec<f64>> = priors.to_vec();
    for s in 0..sources {
        for t in 0..frames {
            if !valid[t] {
                gamma[s][t] = 0.0;
            }
        }
    }
    let mut quad = vec![vec![1.0; frames]; sources];
    let mut shapes = vec![CMat::identity(d); sources];
    let mut history = Vec::with_capacity(iterations);
    let mut logp = vec![0.0; sources];
    for _ in 0..iterations {
        // M-step
        for s in 0..sources {
            shapes[s] = update_shape(&zs, &gamma[s], &quad[s], d);
        }
        if reestimate {
            for s in 0..sources {
                let mean = gamma[s].iter().sum::<f64>()
                    / valid.iter().filter(|v| **v).count().max(1) as f64;
                for t in 0..frames {
                    weights[s][t] = if priors[s][t] > 0.0 { mean } else { 0.0 };
                }
            }
            for t in 0..frames {
                let sum: f64 = (0..sources).map(|s| weights[s][t]).sum();
                for s in 0..sources {
                    weights[s][t] = if sum > 0.0 {
                        weights[s][t] / sum
                    } else {
                        priors[s][t]
                    };
                }
            }
        }
        let chols: Vec<Cholesky> = shapes
            .iter()
            .map(|b| Cholesky::with_loading(b, 1e-10).expect("trace-normalized shape matrix"))
            .collect();
        // E-step
        let mut ll = 0.0;
        let mut counted = 0usize;
        for t in 0..frames {
            if !valid[t] {
                for s in 0..sources {
                    gamma[s][t] = 0.0;
                }
                continue;
            }
            let mut max = f64::NEG_INFINITY;
            for s in 0..sources {
                let q = chols[s].quad_form_inv(&zs[t]).max(QUAD_FLOOR);
                quad[s][t] = q;
                logp[s] = if weights[s][t] > 0.0 {
                    weights[s][t].ln() + log_cacg(&chols[s], &zs[t], log_norm)
                } else {
                    f64::NEG_INFINITY
                };
                max = max.max(logp[s]);
            }
            if !max.is_finite() {
                for s in 0..sources {
                    gamma[s][t] = priors[s][t];
                }
                continue;
            }
            let sum: f64 = logp.iter().map(|l| (l - max).exp()).sum();
            let lse = max + sum.ln();
            ll += lse;
            counted += 1;
            for s in 0..sources {
                gamma[s][t] = (logp[s] - lse).exp();
            }
        }
        history.push(if counted > 0 {
            ll / counted as f64
        } else {
            0.0
        });
    }
    // silent frames fall back to the prior
    for t in 0..frames {
        if !valid[t] {
            for s in 0..sources {
                gamma[s][t] = priors[s][t];
            }
        }
    }
    (gamma, history, shapes)
}

/// Guided cACGMM over every bin using precomputed priors.
pub fn cacgmm_em_with_priors(
    tensor: &SpectralTensor,
    priors: &[Vec<f64>],
    iterations: usize,
    reestimate: bool,
) -> Result<CacgmmResult> {
    if tensor.channels() < 2 {
        return Err(invalid!("mask estimation needs at least 2 channels"));
    }
    if iterations == 0 {
        return Err(invalid!("need at least one EM iteration"));
    }
    let sources = priors.len();
    if sources == 0 || priors.iter().any(|p| p.len() != tensor.frames()) {
        return Err(invalid!("priors must cover every frame"));
    }
    let frames = tensor.frames();
    let bins = tensor.bins();
    let mut masks = MaskTensor::new(sources, frames, bins);
    let mut lls = Vec::with_capacity(bins);
    let mut shapes: Vec<Vec<CMat>> = vec![Vec::with_capacity(bins); sources];
    for f in 0..bins {
        let obs: Vec<Vec<Complex64>> = (0..frames).map(|t| tensor.observation(t, f)).collect();
        let (gamma, history, b) = em_bin(&obs, priors, iterations, reestimate);
        for s in 0..sources {
            for t in 0..frames {
                masks.set(s, t, f, gamma[s][t]);
            }
        }
        lls.push(history);
        for (s, m) in b.into_iter().enumerate() {
            shapes[s].push(m);
        }
    }
    Ok(CacgmmResult {
        masks,
        log_likelihood: lls,
        shape_matrices: shapes,
    })
}

/// Activity-guided cACGMM on the whole tensor.
pub fn cacgmm_em(
    tensor: &SpectralTensor,
    activities: &SoftActivity,
    cfg: &GssConfig,
) -> Result<CacgmmResult> {
    cfg.validate()?;
    let priors = activity_priors(
        tensor,
        activities,
        0.0,
        cfg.add_noise_source,
        cfg.noise_floor,
    );
    cacgmm_em_with_priors(tensor, &priors, cfg.iterations, cfg.reestimate_priors)
}

fn chunk_bounds(frames: usize, chunk: usize) -> Vec<(usize, usize)> {
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < frames {
        let end = (start + chunk).min(frames);
        bounds.push((start, end));
        start = end;
    }
    if bounds.len() > 1 {
        let (s, e) = *bounds.last().unwrap();
        if e - s < 2 {
            bounds.pop();
            bounds.last_mut().unwrap().1 = e;
        }
    }
    bounds
}

/// Runs the EM independently on consecutive chunks of frames and
/// concatenates the masks. The activity priors pin source identity, so no
/// permutation alignment across chunks is needed.
pub fn chunked_cacgmm_with_priors(
    tensor: &SpectralTensor,
    priors: &[Vec<f64>],
    chunk: usize,
    iterations: usize,
    reestimate: bool,
) -> Result<CacgmmResult> {
    let bounds = chunk_bounds(tensor.frames(), chunk.max(2));
    let mut parts = Vec::with_capacity(bounds.len());
    let mut lls: Vec<Vec<f64>> = Vec::new();
    let mut shapes = Vec::new();
    for (s, e) in bounds {
        let sub = tensor.slice_frames(s, e);
        let sub_priors: Vec<Vec<f64>> = priors.iter().map(|p| p[s..e].to_vec()).collect();
        let r = cacgmm_em_with_priors(&sub, &sub_priors, iterations, reestimate)?;
        parts.push(r.masks);
        lls.extend(r.log_likelihood);
        shapes = r.shape_matrices;
    }
    Ok(CacgmmResult {
        masks: MaskTensor::concat(&parts),
        log_likelihood: lls,
        shape_matrices: shapes,
    })
}

/// Chunked variant of [`cacgmm_em`]; `cfg.chunk_frames` defaults to 300.
pub fn chunked_cacgmm(
    tensor: &SpectralTensor,
    activities: &SoftActivity,
    cfg: &GssConfig,
) -> Result<CacgmmResult> {
    cfg.validate()?;
    let priors = activity_priors(
        tensor,
        activities,
        0.0,
        cfg.add_noise_source,
        cfg.noise_floor,
    );
    chunked_cacgmm_with_priors(
        tensor,
        &priors,
        cfg.chunk_frames.unwrap_or(300),
        cfg.iterations,
        cfg.reestimate_priors,
    )
}

/// Masks for a tensor whose first sample sits at session time `offset`,
/// chunked when `cfg.chunk_frames` is set.
pub fn estimate_masks(
    tensor: &SpectralTensor,
    activities: &SoftActivity,
    offset: f64,
    cfg: &GssConfig,
) -> Result<CacgmmResult> {
    cfg.validate()?;
    let priors = activity_priors(
        tensor,
        activities,
        offset,
        cfg.add_noise_source,
        cfg.noise_floor,
    );
    match cfg.chunk_frames {
        Some(c) => {
            chunked_cacgmm_with_priors(tensor, &priors, c, cfg.iterations, cfg.reestimate_priors)
        }
        None => cacgmm_em_with_priors(tensor, &priors, cfg.iterations, cfg.reestimate_priors),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_bounds_merge_short_tail() {
        assert_eq!(chunk_bounds(10, 300), vec![(0, 10)]);
        assert_eq!(chunk_bounds(601, 300), vec![(0, 300), (300, 601)]);
        assert_eq!(
            chunk_bounds(602, 300),
            vec![(0, 300), (300, 600), (600, 602)]
        );
    }
}
