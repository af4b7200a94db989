use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use super::room::{distance, RoomSpec};
use crate::error::invalid;
use crate::Result;

/// Taps of the windowed-sinc fractional-delay interpolator.
pub const SINC_TAPS: usize = 81;

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
    pub direct_path_delay: usize,
}

/// Image order needed for the modeled tail to reach `t60`.
pub fn auto_max_order(room: &RoomSpec) -> usize {
    let min_dim = room
        .dimensions
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    (room.speed_of_sound * room.t60 / min_dim).ceil() as usize + 1
}

const HIGHPASS_HZ: f64 = 100.0;

/// Second-order high-pass from the original image-source formulation,
/// `cutoff` in cycles per sample.
fn highpass(x: &mut [f64], cutoff: f64) {
    let w = 2.0 * PI * cutoff;
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y0 = b1 * y1 + b2 * y2 + *v;
        *v = y0 + a1 * y1 + r1 * y2;
        y2 = y1;
        y1 = y0;
    }
}

fn add_fractional_impulse(out: &mut [f64], delay: f64, gain: f64, window: &[f64]) {
    let half = (SINC_TAPS / 2) as isize;
    let center = delay.round() as isize;
    let frac = delay - center as f64;
    for (k, w) in window.iter().enumerate() {
        let n = center + k as isize - half;
        if n < 0 || n as usize >= out.len() {
            continue;
        }
        let x = (k as isize - half) as f64 - frac;
        let sinc = if x.abs() < 1e-12 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        };
        out[n as usize] += gain * w * sinc;
    }
}

/// Image-source room impulse response from `source` to `receiver`.
///
/// Every wall has reflection coefficient `sqrt(1 - absorption)`; each image
/// contributes `beta^reflections / (4 pi d)` at delay `d / c`, placed with a
/// Hann-windowed sinc. The response is `ceil(t60 * fs)` samples long (longer
/// if the direct path would not fit) and only images arriving within that
/// span are summed. With reflecting walls the sum is high-passed at 100 Hz:
/// every image has a positive amplitude, so the dense tail otherwise
/// accumulates a low-frequency offset that stretches the measured decay.
pub fn generate_rir(
    room: &RoomSpec,
    source: usize,
    receiver: usize,
    sample_rate: u32,
    max_order: Option<usize>,
) -> Result<Rir> {
    room.validate()?;
    let src = *room
        .source_positions
        .get(source)
        .ok_or_else(|| invalid!("source {source} out of range"))?;
    let rcv = *room
        .receiver_positions
        .get(receiver)
        .ok_or_else(|| invalid!("receiver {receiver} out of range"))?;
    if sample_rate == 0 {
        return Err(invalid!("sample rate must be positive"));
    }
    let fs = sample_rate as f64;
    let c = room.speed_of_sound;
    let d0 = distance(&src, &rcv);
    let direct = d0 / c * fs;
    let len = ((room.t60 * fs).ceil() as usize).max(direct.ceil() as usize + SINC_TAPS);
    let order = max_order.unwrap_or_else(|| auto_max_order(room)) as i64;
    let beta = room.reflection();
    let max_dist = len as f64 * c / fs;
    let window: Vec<f64> = (0..SINC_TAPS)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * (k + 1) as f64 / (SINC_TAPS + 1) as f64).cos())
        .collect();
    let mut taps = vec![0.0; len];
    let l = room.dimensions;
    // per-axis image offsets and reflection counts
    let axis = |k: usize| -> Vec<(f64, i32)> {
        let mut v = Vec::new();
        for m in -order..=order {
            for q in 0..2i64 {
                let pos = (1 - 2 * q) as f64 * src[k] + 2.0 * m as f64 * l[k] - rcv[k];
                if pos.abs() > max_dist {
                    continue;
                }
                let refl = ((m - q).abs() + m.abs()) as i32;
                v.push((pos, refl));
            }
        }
        v
    };
    let (ax, ay, az) = (axis(0), axis(1), axis(2));
    for &(x, rx) in &ax {
        for &(y, ry) in &ay {
            let xy = x * x + y * y;
            if xy > max_dist * max_dist {
                continue;
            }
            for &(z, rz) in &az {
                let d2 = xy + z * z;
                if d2 > max_dist * max_dist {
                    continue;
                }
                let gain = beta.powi(rx + ry + rz);
                if gain == 0.0 {
                    continue;
                }
                let d = d2.sqrt();
                add_fractional_impulse(&mut taps, d / c * fs, gain / (4.0 * PI * d), &window);
            }
        }
    }
    if beta > 0.0 {
        highpass(&mut taps, HIGHPASS_HZ / fs);
    }
    Ok(Rir {
        taps,
        sample_rate,
        direct_path_delay: direct.round() as usize,
    })
}
