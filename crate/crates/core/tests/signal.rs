use farfield_core::rng::{gaussian_vec, seeded};
use farfield_core::signal::{istft, stft, MultichannelAudio, Padding, StftParams, Window};
use farfield_core::{Complex64, Error};
use proptest::prelude::*;
use std::f64::consts::PI;

fn random_audio(channels: usize, len: usize, seed: u64) -> MultichannelAudio {
    let mut rng = seeded(seed);
    MultichannelAudio::new((0..channels).map(|_| gaussian_vec(&mut rng, len, 1.0)).collect(), 16000).unwrap()
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Textbook O(N^2) DFT.
fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|t| Complex64::from_polar(x[t], -2.0 * PI * (k * t) as f64 / n as f64))
                .sum()
        })
        .collect()
}

#[test]
fn shipped_presets_are_cola() {
    for p in StftParams::presets() {
        assert!(p.is_cola(), "{p:?}");
    }
    assert!(!StftParams::new(1024, 768, Window::Hann, Padding::Center).is_cola());
}

#[test]
fn round_trip_for_every_preset() {
    for (i, p) in StftParams::presets().into_iter().enumerate() {
        let x = random_audio(2, 12_345, i as u64);
        let y = istft(&stft(&x, &p).unwrap(), &p).unwrap();
        for c in 0..2 {
            assert!(rel_l2(y.channel(c), x.channel(c)) < 1e-6, "{p:?}");
        }
    }
}

#[test]
fn sqrt_hann_half_overlap_three_channels() {
    let p = StftParams::new(512, 256, Window::SqrtHann, Padding::Center);
    let x = random_audio(3, 8000, 42);
    let y = istft(&stft(&x, &p).unwrap(), &p).unwrap();
    assert_eq!(y.num_channels(), 3);
    for c in 0..3 {
        assert!(rel_l2(y.channel(c), x.channel(c)) < 1e-6);
    }
}

#[test]
fn non_cola_synthesis_is_rejected() {
    let p = StftParams::new(1024, 768, Window::Hann, Padding::Center);
    let spec = stft(&random_audio(1, 4000, 1), &p).unwrap();
    assert_eq!(istft(&spec, &p), Err(Error::NotCola));
}

#[test]
fn bin_centered_sinusoid_concentrates_energy() {
    let p = StftParams::new(512, 128, Window::Hann, Padding::None);
    let k0 = 20;
    let x: Vec<f64> = (0..4096).map(|n| (2.0 * PI * k0 as f64 * n as f64 / 512.0).cos()).collect();
    let spec = stft(&MultichannelAudio::mono(x.clone(), 16000).unwrap(), &p).unwrap();
    let w = Window::Hann.coefficients(512);
    for t in 0..spec.frames() {
        let frame: Vec<f64> = (0..512).map(|i| x[t * 128 + i] * w[i]).collect();
        let oracle = naive_dft(&frame);
        // one-sided energy: bins 1..N/2-1 count twice
        let weight = |f: usize| if f == 0 || f == 256 { 1.0 } else { 2.0 };
        let total: f64 = (0..spec.bins()).map(|f| weight(f) * spec.get(0, t, f).norm_sqr()).sum();
        let main: f64 = (k0 - 1..=k0 + 1).map(|f| weight(f) * spec.get(0, t, f).norm_sqr()).sum();
        assert!(main / total >= 0.99);
        for f in 0..spec.bins() {
            assert!((spec.get(0, t, f) - oracle[f]).norm() < 1e-8);
        }
    }
}

#[test]
fn zero_signal_gives_zero_tensor_and_back() {
    let p = StftParams::default();
    let spec = stft(&MultichannelAudio::zeros(2, 5000, 16000), &p).unwrap();
    assert_eq!(spec.energy(), 0.0);
    let y = istft(&spec, &p).unwrap();
    assert!(y.channels().iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn empty_and_short_inputs_are_errors() {
    let p = StftParams::new(512, 128, Window::Hann, Padding::None);
    assert!(stft(&MultichannelAudio::zeros(1, 100, 16000), &p).is_err());
    assert!(stft(&MultichannelAudio::zeros(1, 0, 16000), &StftParams::default()).is_err());
}

#[test]
fn parseval_per_frame() {
    let p = StftParams::new(400, 100, Window::Hann, Padding::None);
    let x = random_audio(1, 3000, 5);
    let spec = stft(&x, &p).unwrap();
    let w = Window::Hann.coefficients(400);
    for t in 0..spec.frames() {
        let time: f64 = (0..400).map(|i| (x.channel(0)[t * 100 + i] * w[i]).powi(2)).sum();
        let freq: f64 = (0..spec.bins())
            .map(|f| {
                let m = if f == 0 || f == 200 { 1.0 } else { 2.0 };
                m * spec.get(0, t, f).norm_sqr()
            })
            .sum::<f64>()
            / 400.0;
        assert!((time - freq).abs() <= 1e-6 * time);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stft_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let p = StftParams::new(256, 64, Window::Hann, Padding::Center);
        let x = random_audio(2, 2000, seed);
        let y = random_audio(2, 2000, seed ^ 0xabcdef);
        let mix = MultichannelAudio::new(
            (0..2).map(|c| x.channel(c).iter().zip(y.channel(c)).map(|(u, v)| a * u + b * v).collect()).collect(),
            16000,
        ).unwrap();
        let (sx, sy, sm) = (stft(&x, &p).unwrap(), stft(&y, &p).unwrap(), stft(&mix, &p).unwrap());
        for ((u, v), m) in sx.values().iter().zip(sy.values()).zip(sm.values()) {
            prop_assert!((u * a + v * b - m).norm() < 1e-9);
        }
    }

    #[test]
    fn round_trip_random_lengths(len in 600usize..5000, preset in 0usize..6, seed in any::<u64>()) {
        let p = StftParams::presets()[preset];
        let x = random_audio(1, len, seed);
        let y = istft(&stft(&x, &p).unwrap(), &p).unwrap();
        prop_assert_eq!(y.len(), len);
        prop_assert!(rel_l2(y.channel(0), x.channel(0)) < 1e-6);
    }
}
