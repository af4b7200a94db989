//! Session normalization, block-wise WPE dereverberation and
//! envelope-variance channel ranking.

mod clip;
mod envelope;
mod wpe;

pub use clip::{clip_normalize, ClipNormConfig};
pub use envelope::{
    envelope_variance_rank, mel_filterbank, select_top_channels, ChannelRanking, EnvelopeConfig,
};
pub use wpe::{wpe_apply_bin, wpe_dereverberate, wpe_estimate_bin, WpeConfig};
