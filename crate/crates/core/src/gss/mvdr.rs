//! Mask-based MVDR beamforming in the rank-1 Souden formulation.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::MaskTensor;
use crate::error::{invalid, mismatch};
use crate::linalg::{CMat, Cholesky};
use crate::signal::SpectralTensor;
use crate::{Error, Result};

const LOADING: f64 = 1e-8;

/// Mask-weighted target and noise covariances `(Φ_target, Φ_noise)` of one
/// bin. The noise weights are `1 - γ_target`.
pub fn spatial_covariances(
    tensor: &SpectralTensor,
    masks: &MaskTensor,
    target: usize,
    bin: usize,
) -> (CMat, CMat) {
    let d = tensor.channels();
    let mut phi_t = CMat::zeros(d, d);
    let mut phi_n = CMat::zeros(d, d);
    let (mut wt, mut wn) = (0.0, 0.0);
    for t in 0..tensor.frames() {
        let x = tensor.observation(t, bin);
        let g = masks.get(target, t, bin).clamp(0.0, 1.0);
        phi_t.add_outer(&x, g);
        phi_n.add_outer(&x, 1.0 - g);
        wt += g;
        wn += 1.0 - g;
    }
    if wt > 0.0 {
        phi_t.scale(1.0 / wt);
    }
    if wn > 0.0 {
        phi_n.scale(1.0 / wn);
    }
    phi_t.hermitize();
    phi_n.hermitize();
    (phi_t, phi_n)
}

/// `Φ_noise^{-1} Φ_target / tr(Φ_noise^{-1} Φ_target)`; column `r` is the
/// beamformer for reference channel `r`. Returns `None` when the target
/// covariance carries no energy.
fn souden_matrix(phi_t: &CMat, phi_n: &CMat) -> Result<Option<CMat>> {
    let d = phi_t.rows() as f64;
    let tr_t = phi_t.trace().re;
    let tr_n = phi_n.trace().re;
    if !(tr_t > 0.0) {
        return Ok(None);
    }
    let eps = if tr_n > f64::MIN_POSITIVE * d {
        LOADING * tr_n / d
    } else {
        LOADING * tr_t / d
    };
    let mut loaded = phi_n.clone();
    loaded.add_diagonal(eps);
    let chol = match Cholesky::new(&loaded) {
        Some(c) => c,
        None => Cholesky::with_loading(&loaded, LOADING)?,
    };
    let mut w = chol.solve(phi_t);
    let tr = w.trace();
    if !(tr.norm() > 0.0) || !tr.re.is_finite() {
        return Err(Error::Singular);
    }
    let inv = tr.inv();
    let data: Vec<Complex64> = w.as_slice().iter().map(|v| v * inv).collect();
    w = CMat::from_vec(w.rows(), w.cols(), data);
    Ok(Some(w))
}

/// Souden MVDR weights for reference channel `reference`.
pub fn souden_weights(phi_t: &CMat, phi_n: &CMat, reference: usize) -> Result<Vec<Complex64>> {
    let d = phi_t.rows();
    if phi_t.cols() != d || phi_n.rows() != d || phi_n.cols() != d {
        return Err(mismatch!("covariances must both be {d}x{d}"));
    }
    if reference >= d {
        return Err(invalid!("reference channel {reference} out of {d}"));
    }
    Ok(match souden_matrix(phi_t, phi_n)? {
        Some(w) => (0..d).map(|i| w[(i, reference)]).collect(),
        None => vec![Complex64::new(0.0, 0.0); d],
    })
}

fn quad(m: &CMat, w: &[Complex64]) -> f64 {
    let mw = m.mul_vec(w);
    w.iter().zip(&mw).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Beamforms the target source. The reference channel maximizes the ratio of
/// summed output target power to summed output noise power across bins.
pub fn mvdr_beamform(
    tensor: &SpectralTensor,
    masks: &MaskTensor,
    target: usize,
) -> Result<SpectralTensor> {
    mvdr_beamform_with_reference(tensor, masks, target, None).map(|(y, _)| y)
}

/// As [`mvdr_beamform`], optionally forcing the reference channel. Returns
/// the output and the reference used.
pub fn mvdr_beamform_with_reference(
    tensor: &SpectralTensor,
    masks: &MaskTensor,
    target: usize,
    reference: Option<usize>,
) -> Result<(SpectralTensor, usize)> {
    let d = tensor.channels();
    if target >= masks.sources {
        return Err(invalid!("target source {target} out of {}", masks.sources));
    }
    if masks.frames != tensor.frames() || masks.bins != tensor.bins() {
        return Err(mismatch!(
            "masks {}x{} vs tensor {}x{}",
            masks.frames,
            masks.bins,
            tensor.frames(),
            tensor.bins()
        ));
    }
    if matches!(reference, Some(r) if r >= d) {
        return Err(invalid!("reference channel out of range"));
    }
    let bins = tensor.bins();
    let mut per_bin = Vec::with_capacity(bins);
    for f in 0..bins {
        let (phi_t, phi_n) = spatial_covariances(tensor, masks, target, f);
        let w = souden_matrix(&phi_t, &phi_n)?;
        per_bin.push((phi_t, phi_n, w));
    }
    let reference = match reference {
        Some(r) => r,
        None => {
            let mut best = (0, f64::NEG_INFINITY);
            for r in 0..d {
                let (mut num, mut den) = (0.0, 0.0);
                for (phi_t, phi_n, w) in &per_bin {
                    if let Some(w) = w {
                        let col: Vec<Complex64> = (0..d).map(|i| w[(i, r)]).collect();
                        num += quad(phi_t, &col);
                        den += quad(phi_n, &col);
                    }
                }
                let snr = if den > 0.0 {
                    num / den
                } else if num > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                if snr > best.1 {
                    best = (r, snr);
                }
            }
            best.0
        }
    };
    let frames = tensor.frames();
    let mut out = SpectralTensor::zeros(1, frames, bins, tensor);
    for (f, (_, _, w)) in per_bin.iter().enumerate() {
        let Some(w) = w else { continue };
        for t in 0..frames {
            let mut y = Complex64::new(0.0, 0.0);
            for c in 0..d {
                y += w[(c, reference)].conj() * tensor.get(c, t, f);
            }
            out.set(0, t, f, y);
        }
    }
    Ok((out, reference))
}
