//! Room acoustics and conversation simulation for synthetic training and
//! evaluation data.

mod conversation;
mod embeddings;
mod examples;
mod mixture;
mod rir;
mod room;

pub use conversation::{overlapped_time, sample_conversation, OverlapStats, ScheduledUtterance};
pub use embeddings::{synthetic_embeddings, synthetic_soft_activity, EmbeddingSimConfig};
pub use examples::{
    simulate_separation_examples, DryUtterance, ExampleMetadata, SeparationConfig,
    SeparationExample,
};
pub use mixture::{
    simulate_mixture, DryAudioStore, MixtureSpec, NoiseSpec, SimulatedMixture, SpeakerPlacement,
    UtteranceSpec,
};
pub use rir::{auto_max_order, generate_rir, Rir, SINC_TAPS};
pub use room::{distance, sabine_absorption, sample_room, Point, RoomRanges, RoomSpec};
