//! Weighted prediction error dereverberation, processed in independent
//! blocks of frames.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use crate::error::invalid;
use crate::linalg::{CMat, Cholesky};
use crate::signal::SpectralTensor;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WpeConfig {
    pub taps: usize,
    pub delay: usize,
    pub iterations: usize,
    /// Block length in seconds; blocks share no state.
    pub block_length: f64,
    /// Diagonal loading relative to the mean diagonal of the correlation matrix.
    pub loading: f64,
    /// Lower bound on the per-frame power estimate, relative to the mean power.
    pub power_floor: f64,
}

impl Default for WpeConfig {
    fn default() -> Self {
        Self {
            taps: 10,
            delay: 3,
            iterations: 3,
            block_length: 120.0,
            loading: 1e-10,
            power_floor: 1e-10,
        }
    }
}

impl WpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 || self.delay == 0 || self.iterations == 0 {
            return Err(invalid!(
                "taps, delay and iterations must all be at least 1"
            ));
        }
        if !(self.block_length > 0.0) {
            return Err(invalid!("block length must be positive"));
        }
        Ok(())
    }
}

/// Stacked delayed observation `[x_{t-delay}; ...; x_{t-delay-taps+1}]`.
fn stacked(x: &[Complex64], d: usize, t: usize, taps: usize, delay: usize, out: &mut [Complex64]) {
    for k in 0..taps {
        let lag = delay + k;
        let dst = &mut out[k * d..(k + 1) * d];
        if t >= lag {
            dst.copy_from_slice(&x[(t - lag) * d..(t - lag + 1) * d]);
        } else {
            dst.fill(Complex64::new(0.0, 0.0));
        }
    }
}

/// Subtracts the delayed linear prediction `G^H x~_t` from every frame of
/// one bin. `x` is `frames x channels`, `g` is `(taps * channels) x channels`.
pub fn wpe_apply_bin(
    x: &[Complex64],
    channels: usize,
    g: &CMat,
    taps: usize,
    delay: usize,
) -> Vec<Complex64> {
    let d = channels;
    let frames = x.len() / d;
    let dk = d * taps;
    assert_eq!(g.rows(), dk);
    assert_eq!(g.cols(), d);
    let mut out = x.to_vec();
    let mut tilde = vec![Complex64::new(0.0, 0.0); dk];
    for t in 0..frames {
        stacked(x, d, t, taps, delay, &mut tilde);
        for c in 0..d {
            let mut pred = Complex64::new(0.0, 0.0);
            for (i, v) in tilde.iter().enumerate() {
                pred += g[(i, c)].conj() * v;
            }
            out[t * d + c] -= pred;
        }
    }
    out
}

fn frame_power(y: &[Complex64], d: usize, t: usize) -> f64 {
    y[t * d..(t + 1) * d]
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        / d as f64
}

/// Iterative variance-weighted least-squares estimate of the prediction
/// filter for one bin, returning the filter and the dereverberated frames.
pub fn wpe_estimate_bin(
    x: &[Complex64],
    channels: usize,
    cfg: &WpeConfig,
) -> Result<(CMat, Vec<Complex64>)> {
    let d = channels;
    let frames = x.len() / d;
    let dk = d * cfg.taps;
    let mean_power = (0..frames).map(|t| frame_power(x, d, t)).sum::<f64>() / frames.max(1) as f64;
    if mean_power == 0.0 {
        return Ok((CMat::zeros(dk, d), x.to_vec()));
    }
    let floor = cfg.power_floor * mean_power;
    let mut lambda: Vec<f64> = (0..frames)
        .map(|t| frame_power(x, d, t).max(floor))
        .collect();
    let mut g = CMat::zeros(dk, d);
    let mut y = x.to_vec();
    let mut tilde = vec![Complex64::new(0.0, 0.0); dk];
    for _ in 0..cfg.iterations {
        let mut r = CMat::zeros(dk, dk);
        let mut p = CMat::zeros(dk, d);
        for t in 0..frames {
            stacked(x, d, t, cfg.taps, cfg.delay, &mut tilde);
            let w = 1.0 / lambda[t];
            r.add_outer(&tilde, w);
            let xt = &x[t * d..(t + 1) * d];
            for i in 0..dk {
                let a = tilde[i] * w;
                for c in 0..d {
                    p[(i, c)] += a * xt[c].conj();
                }
            }
        }
        let load = cfg.loading * (r.trace().re / dk as f64).max(f64::MIN_POSITIVE);
        r.add_diagonal(load);
        let chol = Cholesky::with_loading(&r, cfg.loading)?;
        g = chol.solve(&p);
        y = wpe_apply_bin(x, d, &g, cfg.taps, cfg.delay);
        for t in 0..frames {
            lambda[t] = frame_power(&y, d, t).max(floor);
        }
    }
    Ok((g, y))
}

/// Block-wise WPE over every frequency bin. Output has the input's shape.
pub fn wpe_dereverberate(tensor: &SpectralTensor, cfg: &WpeConfig) -> Result<SpectralTensor> {
    cfg.validate()?;
    let frames = tensor.frames();
    if frames < cfg.taps + cfg.delay {
        return Err(invalid!(
            "{frames} frames is fewer than taps + delay = {}",
            cfg.taps + cfg.delay
        ));
    }
    let block_frames = ((cfg.block_length * tensor.sample_rate as f64 / tensor.frame_shift as f64)
        .round() as usize)
        .max(1);
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < frames {
        let end = (start + block_frames).min(frames);
        bounds.push((start, end));
        start = end;
    }
    // a trailing block too short to predict from joins its predecessor
    if bounds.len() > 1 {
        let (s, e) = bounds[bounds.len() - 1];
        if e - s < cfg.taps + cfg.delay {
            bounds.pop();
            bounds.last_mut().unwrap().1 = e;
        }
    }
    let d = tensor.channels();
    let mut out = tensor.clone();
    for f in 0..tensor.bins() {
        let all = tensor.bin_matrix(f);
        let mut result = Vec::with_capacity(all.len());
        for &(s, e) in &bounds {
            let block = &all[s * d..e * d];
            let (_, y) = wpe_estimate_bin(block, d, cfg)?;
            result.extend_from_slice(&y);
        }
        out.set_bin_matrix(f, &result);
    }
    Ok(out)
}
