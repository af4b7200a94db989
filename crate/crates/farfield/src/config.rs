//! Pipeline configuration: a TOML document with every field defaulted.

use std::path::Path;

use farfield_core::diarize::{DiarizeConfig, Reduction};
use farfield_core::gss::GssConfig;
use farfield_core::preprocess::{ClipNormConfig, EnvelopeConfig, WpeConfig};
use farfield_core::signal::{Padding, StftParams, Window};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::read_text;
use crate::wav::WavFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hann,
    SqrtHann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftSettings {
    pub frame_length: usize,
    pub frame_shift: usize,
    pub window: WindowKind,
    pub center: bool,
}

impl Default for StftSettings {
    fn default() -> Self {
        Self {
            frame_length: 1024,
            frame_shift: 256,
            window: WindowKind::Hann,
            center: true,
        }
    }
}

impl StftSettings {
    pub fn params(&self) -> StftParams {
        StftParams::new(
            self.frame_length,
            self.frame_shift,
            match self.window {
                WindowKind::Hann => Window::Hann,
                WindowKind::SqrtHann => Window::SqrtHann,
            },
            if self.center { Padding::Center } else { Padding::None },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSettings {
    pub percentile: f64,
    pub target_peak: f64,
    pub wpe_enabled: bool,
    pub wpe_taps: usize,
    pub wpe_delay: usize,
    pub wpe_iterations: usize,
    pub block_seconds: f64,
    pub selection_fraction: f64,
    pub envelope_bands: usize,
    pub stft: StftSettings,
    pub output_format: WavFormat,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        let clip = ClipNormConfig::default();
        let wpe = WpeConfig::default();
        Self {
            percentile: clip.percentile,
            target_peak: clip.target_peak,
            wpe_enabled: true,
            wpe_taps: wpe.taps,
            wpe_delay: wpe.delay,
            wpe_iterations: wpe.iterations,
            block_seconds: wpe.block_length,
            selection_fraction: 0.8,
            envelope_bands: EnvelopeConfig::default().bands,
            stft: StftSettings::default(),
            output_format: WavFormat::Float32,
        }
    }
}

impl PreprocessSettings {
    pub fn clip(&self) -> ClipNormConfig {
        ClipNormConfig {
            percentile: self.percentile,
            target_peak: self.target_peak,
        }
    }

    pub fn wpe(&self) -> WpeConfig {
        WpeConfig {
            taps: self.wpe_taps,
            delay: self.wpe_delay,
            iterations: self.wpe_iterations,
            block_length: self.block_seconds,
            ..WpeConfig::default()
        }
    }

    pub fn envelope(&self) -> EnvelopeConfig {
        EnvelopeConfig {
            bands: self.envelope_bands,
            ..EnvelopeConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiarizeSettings {
    /// Activity-segment sources (one embedding file per source, variant and channel).
    pub activity_sources: Vec<String>,
    /// Recording variants, `orig` and/or `wpe`.
    pub variants: Vec<String>,
    /// Cluster rejection values `thr`.
    pub reject_thr: Vec<f64>,
    pub single_speaker_threshold: f64,
    pub merge_cos_threshold: f64,
    pub max_clusters: usize,
    pub reduced_dim: usize,
    /// Use embedding vectors as given instead of the linear reducer.
    pub external_reduction: bool,
    pub frame_step: f64,
    pub gmm_restarts: usize,
}

impl Default for DiarizeSettings {
    fn default() -> Self {
        let d = DiarizeConfig::default();
        Self {
            activity_sources: vec!["vad1".into(), "vad2".into()],
            variants: vec!["orig".into(), "wpe".into()],
            reject_thr: vec![8.0, 10.0, 14.0],
            single_speaker_threshold: d.single_speaker_threshold,
            merge_cos_threshold: d.merge_cos_threshold,
            max_clusters: d.max_clusters,
            reduced_dim: d.reduced_dim,
            external_reduction: false,
            frame_step: d.frame_step,
            gmm_restarts: d.gmm_restarts,
        }
    }
}

impl DiarizeSettings {
    pub fn config(&self, reject_thr: f64) -> DiarizeConfig {
        DiarizeConfig {
            single_speaker_threshold: self.single_speaker_threshold,
            merge_cos_threshold: self.merge_cos_threshold,
            reject_thr,
            max_clusters: self.max_clusters,
            reduced_dim: self.reduced_dim,
            reduction: if self.external_reduction {
                Reduction::External
            } else {
                Reduction::Linear
            },
            frame_step: self.frame_step,
            gmm_restarts: self.gmm_restarts,
            ..DiarizeConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSettings {
    pub binarize_threshold: f64,
    /// Per-channel weights for the cross-channel fusion, by original channel
    /// index; channels not listed weigh 1.
    pub channel_weights: Vec<f64>,
    /// Margin added around final turns before separation, in seconds.
    pub extension_margin: f64,
}

impl Default for FusionSettings {
    fn default() -> Self {
        Self {
            binarize_threshold: 0.5,
            channel_weights: Vec::new(),
            extension_margin: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GssSettings {
    pub enabled: bool,
    pub iterations: usize,
    pub chunk_frames: Option<usize>,
    pub noise_floor: f64,
    pub reestimate_priors: bool,
    pub wpe_enabled: bool,
    pub stft: StftSettings,
    pub output_format: WavFormat,
}

impl Default for GssSettings {
    fn default() -> Self {
        let g = GssConfig::default();
        Self {
            enabled: true,
            iterations: g.iterations,
            chunk_frames: Some(300),
            noise_floor: g.noise_floor,
            reestimate_priors: g.reestimate_priors,
            wpe_enabled: g.wpe_enabled,
            stft: StftSettings::default(),
            output_format: WavFormat::Float32,
        }
    }
}

impl GssSettings {
    /// Core configuration with the given context margin.
    pub fn config(&self, context_margin: f64) -> GssConfig {
        GssConfig {
            iterations: self.iterations,
            context_margin,
            chunk_frames: self.chunk_frames,
            noise_floor: self.noise_floor,
            reestimate_priors: self.reestimate_priors,
            wpe_enabled: self.wpe_enabled,
            stft: self.stft.params(),
            ..GssConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub preprocess: PreprocessSettings,
    pub diarize: DiarizeSettings,
    pub fusion: FusionSettings,
    pub gss: GssSettings,
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let core = |r: farfield_core::Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        let p = &self.preprocess;
        core(p.clip().validate())?;
        core(p.wpe().validate())?;
        for (name, st) in [("preprocess.stft", &p.stft), ("gss.stft", &self.gss.stft)] {
            core(st.params().validate())?;
            check(st.params().is_cola(), &format!("{name}: window and shift do not overlap-add to a constant"))?;
        }
        check(
            p.selection_fraction > 0.0 && p.selection_fraction <= 1.0,
            "selection_fraction must be in (0, 1]",
        )?;
        let d = &self.diarize;
        check(!d.activity_sources.is_empty(), "diarize.activity_sources is empty")?;
        check(!d.variants.is_empty(), "diarize.variants is empty")?;
        check(!d.reject_thr.is_empty(), "diarize.reject_thr is empty")?;
        for v in &d.variants {
            check(v == "orig" || v == "wpe", "diarize.variants accepts only \"orig\" and \"wpe\"")?;
        }
        for &t in &d.reject_thr {
            core(d.config(t).validate())?;
        }
        let f = &self.fusion;
        check(
            f.binarize_threshold > 0.0 && f.binarize_threshold < 1.0,
            "binarize_threshold must be in (0, 1)",
        )?;
        check(f.extension_margin >= 0.0, "extension_margin must be non-negative")?;
        check(
            f.channel_weights.iter().all(|w| *w > 0.0),
            "channel weights must be positive",
        )?;
        core(self.gss.config(f.extension_margin).validate())?;
        Ok(())
    }
}
