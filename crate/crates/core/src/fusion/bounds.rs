use alloc::vec::Vec;

use crate::error::invalid;
use crate::segment::{Segmentation, Turn};
use crate::Result;

/// Shrinks every turn by `margin` on both sides; turns no longer than
/// `2 * margin` disappear.
pub fn erode_bounds(seg: &Segmentation, margin: f64) -> Result<Segmentation> {
    if !(margin >= 0.0) {
        return Err(invalid!("margin {margin} must be non-negative"));
    }
    let turns: Vec<Turn> = seg
        .turns
        .iter()
        .filter(|t| t.end - t.start > 2.0 * margin)
        .map(|t| Turn::new(t.speaker.clone(), t.start + margin, t.end - margin))
        .collect();
    Ok(Segmentation {
        session_id: seg.session_id.clone(),
        turns,
    })
}

/// Grows every turn by `margin` on both sides, clamped to `[0, session_end]`.
pub fn extend_segments(seg: &Segmentation, margin: f64, session_end: f64) -> Result<Segmentation> {
    if !(margin >= 0.0) {
        return Err(invalid!("margin {margin} must be non-negative"));
    }
    let turns = seg
        .turns
        .iter()
        .map(|t| {
            Turn::new(
                t.speaker.clone(),
                (t.start - margin).max(0.0),
                (t.end + margin).min(session_end.max(t.end)),
            )
        })
        .collect();
    Ok(Segmentation {
        session_id: seg.session_id.clone(),
        turns,
    })
}
