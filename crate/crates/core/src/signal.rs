//! Audio containers and STFT analysis/synthesis.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // redundant when std is linked
use num_traits::Float;

use crate::error::{invalid, mismatch};
use crate::fft::Fft;
use crate::{Error, Result};

/// Time-domain samples, one row per channel, all rows the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelAudio {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl MultichannelAudio {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(invalid!("sample rate must be positive"));
        }
        if let Some(first) = channels.first() {
            let len = first.len();
            if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.len() != len) {
                return Err(mismatch!(
                    "channel {i} has {} samples, expected {len}",
                    c.len()
                ));
            }
        }
        if channels.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid!("non-finite sample value"));
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn zeros(num_channels: usize, len: usize, sample_rate: u32) -> Self {
        Self {
            channels: vec![vec![0.0; len]; num_channels],
            sample_rate,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty() || self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Keeps only the listed channels, in the given order.
    pub fn select_channels(&self, indices: &[usize]) -> Result<Self> {
        let channels = indices
            .iter()
            .map(|&i| {
                self.channels
                    .get(i)
                    .cloned()
                    .ok_or_else(|| invalid!("channel {i} out of range"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            sample_rate: self.sample_rate,
        })
    }

    /// Samples `[start, end)` of every channel; the range is clamped to the signal.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.len());
        let start = start.min(end);
        Self {
            channels: self
                .channels
                .iter()
                .map(|c| c[start..end].to_vec())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    SqrtHann,
}

impl Window {
    /// Periodic window of the given length.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                let hann = 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos();
                match self {
                    Window::Hann => hann,
                    Window::SqrtHann => hann.sqrt(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Frames start at `k * shift`; the signal must hold at least one frame.
    None,
    /// `frame_length / 2` zeros on both sides so frame `k` is centered at `k * shift`.
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftParams {
    pub frame_length: usize,
    pub frame_shift: usize,
    pub window: Window,
    pub padding: Padding,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            frame_length: 1024,
            frame_shift: 256,
            window: Window::Hann,
            padding: Padding::Center,
        }
    }
}

impl StftParams {
    pub fn new(frame_length: usize, frame_shift: usize, window: Window, padding: Padding) -> Self {
        Self {
            frame_length,
            frame_shift,
            window,
            padding,
        }
    }

    /// The analysis/synthesis configurations the toolkit ships with.
    pub fn presets() -> Vec<StftParams> {
        use Window::*;
        [
            (1024, 256, Hann),
            (512, 128, Hann),
            (400, 100, Hann),
            (1024, 512, SqrtHann),
            (512, 256, SqrtHann),
            (1024, 256, SqrtHann),
        ]
        .into_iter()
        .map(|(n, r, w)| StftParams::new(n, r, w, Padding::Center))
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 || self.frame_shift == 0 || self.frame_shift > self.frame_length {
            return Err(invalid!(
                "need 0 < frame_shift ({}) <= frame_length ({})",
                self.frame_shift,
                self.frame_length
            ));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.frame_length / 2 + 1
    }

    fn pad(&self) -> usize {
        match self.padding {
            Padding::None => 0,
            Padding::Center => self.frame_length / 2,
        }
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> Option<usize> {
        let padded = len + 2 * self.pad();
        if padded < self.frame_length {
            return None;
        }
        Some(1 + (padded - self.frame_length) / self.frame_shift)
    }

    /// Time in seconds of the center of frame `k`.
    pub fn frame_center(&self, k: usize, sample_rate: u32) -> f64 {
        let center = (k * self.frame_shift + self.frame_length / 2) as f64 - self.pad() as f64;
        center / sample_rate as f64
    }

    /// Whether `sum_k w^2(n - k * shift)` is constant in `n`, which is what
    /// the weighted overlap-add synthesis needs for exact reconstruction.
    pub fn is_cola(&self) -> bool {
        if self.validate().is_err() {
            return false;
        }
        let w = self.window.coefficients(self.frame_length);
        let mut acc = vec![0.0; self.frame_shift];
        for (n, &v) in w.iter().enumerate() {
            acc[n % self.frame_shift] += v * v;
        }
        let max = acc.iter().cloned().fold(f64::MIN, f64::max);
        let min = acc.iter().cloned().fold(f64::MAX, f64::min);
        max > 0.0 && (max - min) <= 1e-10 * max
    }
}

/// Complex STFT values indexed `(channel, frame, bin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTensor {
    values: Vec<Complex64>,
    channels: usize,
    frames: usize,
    bins: usize,
    pub frame_length: usize,
    pub frame_shift: usize,
    pub sample_rate: u32,
    /// Length in samples of the analysed signal.
    pub signal_length: usize,
}

impl SpectralTensor {
    pub fn zeros(channels: usize, frames: usize, bins: usize, like: &SpectralTensor) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); channels * frames * bins],
            channels,
            frames,
            bins,
            frame_length: like.frame_length,
            frame_shift: like.frame_shift,
            sample_rate: like.sample_rate,
            signal_length: like.signal_length,
        }
    }

    /// Builds a tensor from raw values laid out `(channel, frame, bin)`.
    pub fn from_values(
        values: Vec<Complex64>,
        channels: usize,
        frames: usize,
        frame_length: usize,
        frame_shift: usize,
        sample_rate: u32,
        signal_length: usize,
    ) -> Result<Self> {
        let bins = frame_length / 2 + 1;
        if values.len() != channels * frames * bins {
            return Err(mismatch!(
                "{} values for {channels}x{frames}x{bins} tensor",
                values.len()
            ));
        }
        Ok(Self {
            values,
            channels,
            frames,
            bins,
            frame_length,
            frame_shift,
            sample_rate,
            signal_length,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    fn offset(&self, c: usize, t: usize, f: usize) -> usize {
        (c * self.frames + t) * self.bins + f
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, f: usize) -> Complex64 {
        self.values[self.offset(c, t, f)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, f: usize, v: Complex64) {
        let i = self.offset(c, t, f);
        self.values[i] = v;
    }

    /// Multichannel observation vector at `(t, f)`.
    pub fn observation(&self, t: usize, f: usize) -> Vec<Complex64> {
        (0..self.channels).map(|c| self.get(c, t, f)).collect()
    }

    /// All frames of one bin as `frames x channels`, row-major.
    pub fn bin_matrix(&self, f: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.frames * self.channels);
        for t in 0..self.frames {
            for c in 0..self.channels {
                out.push(self.get(c, t, f));
            }
        }
        out
    }

    /// Writes a `frames x channels` matrix back into bin `f`.
    pub fn set_bin_matrix(&mut self, f: usize, m: &[Complex64]) {
        assert_eq!(m.len(), self.frames * self.channels);
        for t in 0..self.frames {
            for c in 0..self.channels {
                self.set(c, t, f, m[t * self.channels + c]);
            }
        }
    }

    /// Frames `[start, end)` of every channel.
    pub fn slice_frames(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.frames);
        let start = start.min(end);
        let frames = end - start;
        let mut values = Vec::with_capacity(self.channels * frames * self.bins);
        for c in 0..self.channels {
            let a = self.offset(c, start, 0);
            let b = self.offset(c, start, 0) + frames * self.bins;
            values.extend_from_slice(&self.values[a..b]);
        }
        Self {
            values,
            channels: self.channels,
            frames,
            bins: self.bins,
            frame_length: self.frame_length,
            frame_shift: self.frame_shift,
            sample_rate: self.sample_rate,
            signal_length: self.signal_length,
        }
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Short-time Fourier transform of every channel.
pub fn stft(audio: &MultichannelAudio, params: &StftParams) -> Result<SpectralTensor> {
    params.validate()?;
    if audio.is_empty() {
        return Err(Error::Empty("audio"));
    }
    let len = audio.len();
    let frames = params
        .num_frames(len)
        .ok_or_else(|| invalid!("signal of {len} samples is shorter than one frame"))?;
    let n = params.frame_length;
    let bins = params.num_bins();
    let pad = params.pad() as isize;
    let window = params.window.coefficients(n);
    let fft = Fft::new(n);
    let channels = audio.num_channels();
    let mut values = vec![Complex64::new(0.0, 0.0); channels * frames * bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (c, x) in audio.channels().iter().enumerate() {
        for t in 0..frames {
            let start = (t * params.frame_shift) as isize - pad;
            for (i, b) in buf.iter_mut().enumerate() {
                let idx = start + i as isize;
                let s = if idx >= 0 && (idx as usize) < len {
                    x[idx as usize]
                } else {
                    0.0
                };
                *b = Complex64::new(s * window[i], 0.0);
            }
            fft.forward(&mut buf);
            let off = (c * frames + t) * bins;
            values[off..off + bins].copy_from_slice(&buf[..bins]);
        }
    }
    Ok(SpectralTensor {
        values,
        channels,
        frames,
        bins,
        frame_length: n,
        frame_shift: params.frame_shift,
        sample_rate: audio.sample_rate(),
        signal_length: len,
    })
}

/// Inverse STFT by weighted overlap-add with the analysis window as the
/// synthesis window.
pub fn istft(tensor: &SpectralTensor, params: &StftParams) -> Result<MultichannelAudio> {
    params.validate()?;
    if tensor.frame_length != params.frame_length || tensor.frame_shift != params.frame_shift {
        return Err(mismatch!(
            "tensor was analysed with {}/{} but synthesis uses {}/{}",
            tensor.frame_length,
            tensor.frame_shift,
            params.frame_length,
            params.frame_shift
        ));
    }
    if !params.is_cola() {
        return Err(Error::NotCola);
    }
    let n = params.frame_length;
    let bins = tensor.bins;
    let pad = params.pad();
    let len = tensor.signal_length;
    let padded_len = ((tensor.frames.max(1) - 1) * params.frame_shift + n).max(len + 2 * pad);
    let window = params.window.coefficients(n);
    let mut norm = vec![0.0; padded_len];
    for t in 0..tensor.frames {
        let start = t * params.frame_shift;
        for (i, w) in window.iter().enumerate() {
            norm[start + i] += w * w;
        }
    }
    let peak = norm.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-8 * peak;
    let fft = Fft::new(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut channels = Vec::with_capacity(tensor.channels);
    for c in 0..tensor.channels {
        let mut acc = vec![0.0; padded_len];
        for t in 0..tensor.frames {
            let off = (c * tensor.frames + t) * bins;
            let spec = &tensor.values[off..off + bins];
            buf[..bins].copy_from_slice(spec);
            for k in bins..n {
                buf[k] = spec[n - k].conj();
            }
            buf[0].im = 0.0;
            if n % 2 == 0 {
                buf[n / 2].im = 0.0;
            }
            fft.inverse(&mut buf);
            let start = t * params.frame_shift;
            for i in 0..n {
                acc[start + i] += buf[i].re * window[i];
            }
        }
        let out: Vec<f64> = (0..len)
            .map(|i| {
                let d = norm[i + pad];
                if d > floor {
                    acc[i + pad] / d
                } else {
                    0.0
                }
            })
            .collect();
        channels.push(out);
    }
    MultichannelAudio::new(channels, tensor.sample_rate)
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
