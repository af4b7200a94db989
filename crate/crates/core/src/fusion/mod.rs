//! Diarization fusion: label-mapped voting over hard hypotheses, averaging
//! of permuted soft activities, and segment boundary utilities.

mod activity;
mod bounds;
mod doverlap;

pub use activity::{best_permutation, binarize, pearson, soft_fuse, SoftActivity};
pub use bounds::{erode_bounds, extend_segments};
pub use doverlap::{doverlap_fuse, map_to_anchor, select_anchor, vote_regions, FusionInput};
