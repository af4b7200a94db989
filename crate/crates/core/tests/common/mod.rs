#![allow(dead_code)]

use farfield_core::fft::Fft;
use farfield_core::rng::{gaussian, seeded, SimRng};
use farfield_core::Complex64;
use rand::Rng;

/// White noise with a syllable-rate on/off amplitude envelope.
pub fn speech_like(len: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let seg = (sample_rate as usize) / 5;
    let mut out = Vec::with_capacity(len);
    let mut gain = 1.0;
    for n in 0..len {
        if n % seg == 0 {
            gain = if rng.gen::<f64>() < 0.3 { 0.05 } else { rng.gen_range(0.3..1.5) };
        }
        let phase = (n % seg) as f64 / seg as f64;
        let ramp = (std::f64::consts::PI * phase).sin();
        out.push(gain * ramp * gaussian(&mut rng));
    }
    out
}

/// Exponentially decaying noise RIR with a unit direct path.
pub fn exponential_rir(t60: f64, sample_rate: u32, rng: &mut SimRng) -> Vec<f64> {
    let len = (t60 * sample_rate as f64) as usize;
    let decay = 3.0 * std::f64::consts::LN_10 / (t60 * sample_rate as f64);
    let mut h: Vec<f64> = (0..len).map(|n| 0.3 * gaussian(rng) * (-decay * n as f64).exp()).collect();
    h[0] = 1.0;
    h
}

pub fn convolve_direct(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, a) in x.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        for (j, b) in h.iter().enumerate() {
            y[i + j] += a * b;
        }
    }
    y
}

/// Least-squares estimate of the first `len` taps of the filter mapping `dry`
/// to `wet`, by regularized spectral division.
pub fn deconvolve(wet: &[f64], dry: &[f64], len: usize) -> Vec<f64> {
    let n = (wet.len().max(dry.len()) + len).next_power_of_two();
    let fft = Fft::new(n);
    let mut y: Vec<Complex64> = (0..n).map(|i| Complex64::new(*wet.get(i).unwrap_or(&0.0), 0.0)).collect();
    let mut s: Vec<Complex64> = (0..n).map(|i| Complex64::new(*dry.get(i).unwrap_or(&0.0), 0.0)).collect();
    fft.forward(&mut y);
    fft.forward(&mut s);
    let mean_power = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    let mut h: Vec<Complex64> = y
        .iter()
        .zip(&s)
        .map(|(a, b)| a * b.conj() / (b.norm_sqr() + 1e-6 * mean_power))
        .collect();
    fft.inverse(&mut h);
    h.iter().take(len).map(|v| v.re).collect()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}
