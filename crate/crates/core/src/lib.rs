//! Multichannel far-field speech processing without `std`.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! only needs an allocator. File formats, the command line and pipeline
//! orchestration live in the companion `farfield` crate.
//!
//! Module map:
//!
//! * [`signal`]: audio containers, STFT analysis and synthesis.
//! * [`preprocess`]: clip normalization, block WPE, envelope-variance channel ranking.
//! * [`diarize`]: embedding-based clustering diarization and speaker counting.
//! * [`fusion`]: DOVER-Lap style hard fusion, soft-activity fusion, boundary utilities.
//! * [`gss`]: guided source separation (cACGMM masks + MVDR).
//! * [`simulate`]: image-source RIRs, rooms, conversations, mixtures.
//! * [`metrics`]: DER, speaker-count accuracy, SI-SDR.
#![no_std]

extern crate alloc;

pub mod diarize;
mod error;
pub mod fft;
pub mod fusion;
pub mod gss;
pub mod hungarian;
pub mod linalg;
pub mod metrics;
pub mod preprocess;
pub mod rng;
pub mod segment;
pub mod signal;
pub mod simulate;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use segment::{Segmentation, Turn};
pub use signal::{MultichannelAudio, SpectralTensor, StftParams};
