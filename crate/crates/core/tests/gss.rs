mod common;

use farfield_core::fusion::SoftActivity;
use farfield_core::gss::{
    activity_priors, apply_vad_mask, cacgmm_em, cacgmm_em_with_priors, chunked_cacgmm, extract_speaker_segment,
    mvdr_beamform, mvdr_beamform_with_reference, souden_weights, spatial_covariances, GssConfig, MaskTensor,
};
use farfield_core::linalg::CMat;
use farfield_core::metrics::si_sdr;
use farfield_core::rng::{gaussian, seeded, SimRng};
use farfield_core::signal::{istft, stft, MultichannelAudio, SpectralTensor, StftParams};
use farfield_core::{Complex64, Turn};
use proptest::prelude::*;
use rand::Rng;

// Frame step 1 s (shift 16 at 16 Hz) keeps activity frames exactly aligned
// with tensor frames.
const FL: usize = 64;
const SHIFT: usize = 16;
const SR: u32 = 16;
const BINS: usize = FL / 2 + 1;

fn cn(rng: &mut SimRng) -> Complex64 {
    Complex64::new(gaussian(rng), gaussian(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_unit(rng: &mut SimRng, d: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..d).map(|_| cn(rng)).collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

struct Scene {
    tensor: SpectralTensor,
    /// Per-source power at each (t, f), noise last.
    power: Vec<Vec<Vec<f64>>>,
}

/// Rank-1 sources with steering `steer(s, t, f)`, gated by `gain[s][t]`,
/// plus white sensor noise.
fn scene(
    d: usize,
    frames: usize,
    gain: &[Vec<f64>],
    steer: &dyn Fn(usize, usize, usize) -> Vec<Complex64>,
    noise_std: f64,
    seed: u64,
) -> Scene {
    let mut rng = seeded(seed);
    let sources = gain.len();
    let mut values = vec![Complex64::new(0.0, 0.0); d * frames * BINS];
    let mut power = vec![vec![vec![0.0; BINS]; frames]; sources + 1];
    for t in 0..frames {
        for f in 0..BINS {
            for s in 0..sources {
                // heavy-tailed amplitudes keep sources sparse in time-frequency
                let amp = gain[s][t] * gaussian(&mut rng).powi(2);
                let sig = cn(&mut rng) * amp;
                let dv = steer(s, t, f);
                for c in 0..d {
                    values[(c * frames + t) * BINS + f] += sig * dv[c];
                }
                power[s][t][f] = sig.norm_sqr();
            }
            for c in 0..d {
                let n = cn(&mut rng) * noise_std;
                values[(c * frames + t) * BINS + f] += n;
                power[sources][t][f] += n.norm_sqr() / d as f64;
            }
        }
    }
    let tensor = SpectralTensor::from_values(values, d, frames, FL, SHIFT, SR, frames * SHIFT).unwrap();
    Scene { tensor, power }
}

fn oracle_masks(power: &[Vec<Vec<f64>>]) -> MaskTensor {
    let sources = power.len();
    let frames = power[0].len();
    let mut m = MaskTensor::new(sources, frames, BINS);
    for t in 0..frames {
        for f in 0..BINS {
            let total: f64 = (0..sources).map(|s| power[s][t][f]).sum();
            for s in 0..sources {
                m.set(s, t, f, power[s][t][f] / total);
            }
        }
    }
    m
}

fn activity(rows: Vec<Vec<f64>>) -> SoftActivity {
    SoftActivity::new("s", rows, 1.0).unwrap()
}

fn cfg() -> GssConfig {
    GssConfig {
        wpe_enabled: false,
        ..GssConfig::default()
    }
}

/// Two speakers in alternating exclusive blocks of `block` frames.
fn alternating(frames: usize, block: usize) -> Vec<Vec<f64>> {
    (0..2)
        .map(|s| (0..frames).map(|t| if (t / block) % 2 == s { 1.0 } else { 0.0 }).collect())
        .collect()
}

// Straightforward 2-channel EM written from the model definition with
// closed-form 2x2 algebra.
fn oracle_em_2ch(obs: &[[Complex64; 2]], priors: &[Vec<f64>], iterations: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    type M = [[Complex64; 2]; 2];
    let frames = obs.len();
    let sources = priors.len();
    let z: Vec<[Complex64; 2]> = obs
        .iter()
        .map(|x| {
            let n = (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
            [x[0] / n, x[1] / n]
        })
        .collect();
    let inv = |b: &M| -> (M, f64) {
        let det = (b[0][0] * b[1][1] - b[0][1] * b[1][0]).re;
        ([[b[1][1] / det, -b[0][1] / det], [-b[1][0] / det, b[0][0] / det]], det)
    };
    let quad = |bi: &M, v: &[Complex64; 2]| -> f64 {
        let mut q = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                q += v[i].conj() * bi[i][j] * v[j];
            }
        }
        q.re
    };
    let mut gamma = priors.to_vec();
    let mut q = vec![vec![1.0; frames]; sources];
    let mut lls = Vec::new();
    let lnorm = -2.0 * std::f64::consts::PI.ln() - 2f64.ln();
    for _ in 0..iterations {
        let mut params = Vec::new();
        for s in 0..sources {
            let mut b: M = [[Complex64::new(0.0, 0.0); 2]; 2];
            for t in 0..frames {
                for i in 0..2 {
                    for j in 0..2 {
                        b[i][j] += z[t][i] * z[t][j].conj() * (gamma[s][t] / q[s][t]);
                    }
                }
            }
            let tr = (b[0][0] + b[1][1]).re;
            for row in b.iter_mut() {
                for v in row.iter_mut() {
                    *v *= 2.0 / tr;
                }
            }
            params.push(inv(&b));
        }
        let mut ll = 0.0;
        for t in 0..frames {
            let mut lp = vec![0.0; sources];
            for s in 0..sources {
                let (bi, det) = &params[s];
                q[s][t] = quad(bi, &z[t]);
                lp[s] = priors[s][t].ln() + lnorm - det.ln() - 2.0 * q[s][t].ln();
            }
            let m = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + lp.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            ll += lse;
            for s in 0..sources {
                gamma[s][t] = (lp[s] - lse).exp();
            }
        }
        lls.push(ll / frames as f64);
    }
    (gamma, lls)
}

#[test]
fn em_matches_straightforward_oracle() {
    let frames = 120;
    let mut rng = seeded(3);
    let steer: Vec<Vec<Vec<Complex64>>> = (0..2).map(|_| (0..BINS).map(|_| random_unit(&mut rng, 2)).collect()).collect();
    let rows = vec![
        (0..frames).map(|t| if t < 70 { 0.8 } else { 0.1 }).collect::<Vec<f64>>(),
        (0..frames).map(|t| if t >= 50 { 0.8 } else { 0.1 }).collect::<Vec<f64>>(),
    ];
    let sc = scene(2, frames, &rows, &|s, _, f| steer[s][f].clone(), 0.05, 4);
    let priors = activity_priors(&sc.tensor, &activity(rows), 0.0, true, 0.01);
    let res = cacgmm_em_with_priors(&sc.tensor, &priors, 5, false).unwrap();
    for f in [1, 7, 20, 32] {
        let obs: Vec<[Complex64; 2]> =
            (0..frames).map(|t| [sc.tensor.get(0, t, f), sc.tensor.get(1, t, f)]).collect();
        let (gamma, lls) = oracle_em_2ch(&obs, &priors, 5);
        for s in 0..3 {
            for t in 0..frames {
                assert!((gamma[s][t] - res.masks.get(s, t, f)).abs() < 1e-6, "bin {f} src {s} frame {t}");
            }
        }
        for (a, b) in lls.iter().zip(&res.log_likelihood[f]) {
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
        }
    }
}

#[test]
fn orthogonal_steering_saturates_masks() {
    let frames = 100;
    let rows = alternating(frames, 10);
    let one_hot = |s: usize| {
        let mut v = vec![Complex64::new(0.0, 0.0); 2];
        v[s] = Complex64::new(1.0, 0.0);
        v
    };
    let sc = scene(2, frames, &rows, &|s, _, _| one_hot(s), 0.0, 5);
    let res = cacgmm_em(&sc.tensor, &activity(rows.clone()), &cfg()).unwrap();
    for t in 0..frames {
        let s = if rows[0][t] > 0.0 { 0 } else { 1 };
        for f in 0..BINS {
            if sc.power[s][t][f] > 0.0 {
                assert!(res.masks.get(s, t, f) >= 0.99, "t {t} f {f}: {}", res.masks.get(s, t, f));
            }
        }
    }
}

#[test]
fn masks_normalized_and_em_monotone() {
    let frames = 200;
    let mut rng = seeded(8);
    let steer: Vec<Vec<Vec<Complex64>>> = (0..2).map(|_| (0..BINS).map(|_| random_unit(&mut rng, 4)).collect()).collect();
    let rows = vec![
        (0..frames).map(|t| if t % 50 < 35 { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
        (0..frames).map(|t| if t % 50 >= 20 { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
    ];
    let sc = scene(4, frames, &rows, &|s, _, f| steer[s][f].clone(), 0.1, 9);
    let res = cacgmm_em(&sc.tensor, &activity(rows), &cfg()).unwrap();
    assert_eq!(res.masks.sources, 3);
    for t in 0..frames {
        for f in 0..BINS {
            let sum: f64 = (0..3).map(|s| res.masks.get(s, t, f)).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
    for ll in &res.log_likelihood {
        assert_eq!(ll.len(), 5);
        for w in ll.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{ll:?}");
        }
    }
    for per_bin in &res.shape_matrices {
        for b in per_bin {
            assert!(b.is_hermitian(1e-9));
            assert!((b.trace().re - 4.0).abs() < 1e-9);
            assert!(farfield_core::linalg::Cholesky::new(b).is_some());
        }
    }
}

#[test]
fn degenerate_single_source_prior() {
    let frames = 40;
    let rows = vec![vec![1.0; frames]];
    let mut rng = seeded(1);
    let steer: Vec<Vec<Complex64>> = (0..BINS).map(|_| random_unit(&mut rng, 2)).collect();
    let sc = scene(2, frames, &rows, &|_, _, f| steer[f].clone(), 0.1, 2);
    let c = GssConfig { noise_floor: 0.0, ..cfg() };
    let res = cacgmm_em(&sc.tensor, &activity(rows), &c).unwrap();
    assert!(res.masks.values()[..frames * BINS].iter().all(|&m| (m - 1.0).abs() < 1e-12));
}

#[test]
fn chunking_stationary_and_short_segments() {
    let frames = 900;
    let mut rng = seeded(21);
    let steer: Vec<Vec<Vec<Complex64>>> = (0..2).map(|_| (0..BINS).map(|_| random_unit(&mut rng, 4)).collect()).collect();
    let rows = vec![
        (0..frames).map(|t| if t % 60 < 40 { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
        (0..frames).map(|t| if t % 60 >= 25 { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
    ];
    let sc = scene(4, frames, &rows, &|s, _, f| steer[s][f].clone(), 0.1, 22);
    let act = activity(rows.clone());
    let full = cacgmm_em(&sc.tensor, &act, &cfg()).unwrap();
    let chunked = chunked_cacgmm(&sc.tensor, &act, &GssConfig { chunk_frames: Some(300), ..cfg() }).unwrap();
    let dev = full.masks.mean_abs_deviation(&chunked.masks);
    assert!(dev <= 0.05, "deviation {dev}");
    // identity pinned by guidance at exclusive frames
    let mut agree = 0;
    let mut total = 0;
    for t in 0..frames {
        let s = match (rows[0][t] > 0.0, rows[1][t] > 0.0) {
            (true, false) => 0,
            (false, true) => 1,
            _ => continue,
        };
        for f in 0..BINS {
            if sc.power[s][t][f] < 0.5 {
                continue;
            }
            total += 1;
            let best = (0..3).max_by(|&a, &b| chunked.masks.get(a, t, f).total_cmp(&chunked.masks.get(b, t, f))).unwrap();
            agree += usize::from(best == s);
        }
    }
    assert!(agree as f64 >= 0.99 * total as f64, "{agree}/{total}");

    let short = sc.tensor.slice_frames(0, 250);
    let a = cacgmm_em(&short, &act, &cfg()).unwrap();
    let b = chunked_cacgmm(&short, &act, &GssConfig { chunk_frames: Some(300), ..cfg() }).unwrap();
    assert_eq!(a.masks, b.masks);
}

#[test]
fn chunking_tracks_rotating_sources() {
    let frames = 900;
    let rows = vec![
        (0..frames).map(|t| if t % 60 < 40 { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
        (0..frames).map(|t| if t % 60 >= 25 { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
    ];
    // plane-wave steering on a 4-mic line whose direction sweeps 120 degrees
    let steer = |s: usize, t: usize, f: usize| {
        let angle = if s == 0 { 0.3 } else { 1.9 } + 2.1 * t as f64 / frames as f64;
        let phase = std::f64::consts::PI * f as f64 / BINS as f64 * angle.cos();
        (0..4).map(|c| Complex64::from_polar(0.5, phase * c as f64 * 1.5)).collect()
    };
    let sc = scene(4, frames, &rows, &steer, 0.1, 31);
    let oracle = oracle_masks(&sc.power);
    let act = activity(rows);
    let full = cacgmm_em(&sc.tensor, &act, &cfg()).unwrap();
    let chunked = chunked_cacgmm(&sc.tensor, &act, &GssConfig { chunk_frames: Some(300), ..cfg() }).unwrap();
    let (df, dc) = (full.masks.mean_abs_deviation(&oracle), chunked.masks.mean_abs_deviation(&oracle));
    assert!(dc < df, "chunked {dc} vs full {df}");
}

#[test]
fn mvdr_rank_one_is_distortionless() {
    let mut rng = seeded(40);
    for _ in 0..50 {
        let d = 4;
        let steer = random_unit(&mut rng, d);
        let mut phi_t = CMat::zeros(d, d);
        phi_t.add_outer(&steer, 2.5);
        let mut phi_n = CMat::zeros(d, d);
        for _ in 0..8 {
            let v: Vec<Complex64> = (0..d).map(|_| cn(&mut rng)).collect();
            phi_n.add_outer(&v, 1.0);
        }
        let reference = rng.gen_range(0..d);
        let w = souden_weights(&phi_t, &phi_n, reference).unwrap();
        let resp: Complex64 = w.iter().zip(&steer).map(|(a, b)| a.conj() * b).sum();
        assert!((resp - steer[reference]).norm() < 1e-6);
    }
}

#[test]
fn mvdr_suppresses_orthogonal_interferer() {
    let frames = 200;
    let d = 4;
    let mut rng = seeded(50);
    // two orthonormal steering vectors per bin
    let pairs: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..BINS)
        .map(|_| {
            let a = random_unit(&mut rng, d);
            let b = random_unit(&mut rng, d);
            let dot: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
            let b: Vec<Complex64> = b.iter().zip(&a).map(|(y, x)| y - x * dot).collect();
            let n = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            (a, b.into_iter().map(|x| x / n).collect())
        })
        .collect();
    let rows = vec![vec![1.0; frames], vec![1.0; frames]];
    let steer = |s: usize, _t: usize, f: usize| if s == 0 { pairs[f].0.clone() } else { pairs[f].1.clone() };
    let sc = scene(d, frames, &rows, &steer, 1e-4, 51);
    let oracle = oracle_masks(&sc.power);
    let mut target_out = 0.0;
    let mut interf_out = 0.0;
    for f in 0..BINS {
        let (phi_t, phi_n) = spatial_covariances(&sc.tensor, &oracle, 0, f);
        let w = souden_weights(&phi_t, &phi_n, 0).unwrap();
        let g0: Complex64 = w.iter().zip(&pairs[f].0).map(|(a, b)| a.conj() * b).sum();
        let g1: Complex64 = w.iter().zip(&pairs[f].1).map(|(a, b)| a.conj() * b).sum();
        for t in 0..frames {
            target_out += sc.power[0][t][f] * g0.norm_sqr();
            interf_out += sc.power[1][t][f] * g1.norm_sqr();
        }
    }
    let sir = 10.0 * (target_out / interf_out).log10();
    assert!(sir >= 20.0, "output SIR {sir} dB");
    let (y, reference) = mvdr_beamform_with_reference(&sc.tensor, &oracle, 0, Some(0)).unwrap();
    assert_eq!((y.channels(), reference), (1, 0));
}

#[test]
fn mvdr_single_source_reproduces_reference_image() {
    let sr = 16000;
    let len = sr as usize * 2;
    let dry = common::speech_like(len, sr, 61);
    let mut rng = seeded(62);
    let channels: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            let h: Vec<f64> = (0..6).map(|k| gaussian(&mut rng) * 0.5f64.powi(k)).collect();
            common::convolve_direct(&dry, &h)[..len].to_vec()
        })
        .collect();
    let audio = MultichannelAudio::new(channels.clone(), sr).unwrap();
    let params = StftParams::default();
    let spec = stft(&audio, &params).unwrap();
    let mut masks = MaskTensor::new(1, spec.frames(), spec.bins());
    for t in 0..spec.frames() {
        for f in 0..spec.bins() {
            masks.set(0, t, f, 1.0);
        }
    }
    let (y, reference) = mvdr_beamform_with_reference(&spec, &masks, 0, Some(1)).unwrap();
    let out = istft(&y, &params).unwrap();
    let score = si_sdr(out.channel(0), &channels[reference]).unwrap();
    assert!(score >= 30.0, "SI-SDR {score}");

    let zero = SpectralTensor::zeros(3, 20, spec.bins(), &spec);
    let z = mvdr_beamform(&zero, &MaskTensor::new(2, 20, spec.bins()), 0).unwrap();
    assert!(z.values().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn vad_mask_is_elementwise() {
    let act = SoftActivity::new("s", vec![vec![0.8, 0.5], vec![0.3, 0.9]], 0.1).unwrap();
    let out = apply_vad_mask(&act, &[vec![true, false], vec![true, true]]).unwrap();
    assert_eq!(out.probs, vec![vec![0.8, 0.0], vec![0.3, 0.9]]);
    assert_eq!(apply_vad_mask(&act, &[vec![true; 2], vec![true; 2]]).unwrap().probs, act.probs);
    assert!(apply_vad_mask(&act, &[vec![true; 3], vec![true; 2]]).is_err());
}

#[test]
fn extraction_at_session_start_without_margin() {
    let sr = 16000;
    let len = sr as usize * 3;
    let dry = common::speech_like(len, sr, 70);
    let mut rng = seeded(71);
    let channels: Vec<Vec<f64>> = (0..2)
        .map(|_| {
            let g = gaussian(&mut rng);
            dry.iter().map(|x| x * g + 1e-3 * gaussian(&mut rng)).collect()
        })
        .collect();
    let audio = MultichannelAudio::new(channels, sr).unwrap();
    let act = SoftActivity::new("s", vec![vec![1.0; 30]], 0.1)
        .unwrap()
        .with_speakers(vec!["A".into()])
        .unwrap();
    let c = GssConfig { context_margin: 0.0, ..GssConfig::default() };
    let out = extract_speaker_segment(&audio, &Turn::new("A", 0.0, 1.0), &act, &c).unwrap();
    assert_eq!(out.len(), sr as usize);
    assert!(out.iter().all(|x| x.is_finite()));
    assert!(extract_speaker_segment(&audio, &Turn::new("B", 0.0, 1.0), &act, &c).is_err());
    assert!(extract_speaker_segment(&audio, &Turn::new("A", 5.0, 6.0), &act, &c).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn masks_invariant_to_per_frame_scaling(seed in 0u64..1000, scale_seed in 0u64..1000) {
        let frames = 60;
        let mut rng = seeded(seed);
        let steer: Vec<Vec<Vec<Complex64>>> = (0..2).map(|_| (0..BINS).map(|_| random_unit(&mut rng, 3)).collect()).collect();
        let rows = alternating(frames, 7);
        let sc = scene(3, frames, &rows, &|s, _, f| steer[s][f].clone(), 0.2, seed + 1);
        let act = activity(rows);
        let base = cacgmm_em(&sc.tensor, &act, &cfg()).unwrap();
        let mut scaled = sc.tensor.clone();
        let mut srng = seeded(scale_seed);
        for t in 0..frames {
            for f in 0..BINS {
                let k = Complex64::from_polar(srng.gen_range(0.1..10.0), srng.gen_range(0.0..6.28));
                for c in 0..3 {
                    let v = scaled.get(c, t, f);
                    scaled.set(c, t, f, v * k);
                }
            }
        }
        let other = cacgmm_em(&scaled, &act, &cfg()).unwrap();
        for (a, b) in base.masks.values().iter().zip(other.masks.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
