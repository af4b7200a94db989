use alloc::vec::Vec;

use rand::Rng;

use crate::error::invalid;
use crate::rng::{seeded, uniform};
use crate::{Error, Result};

pub type Point = [f64; 3];

/// Shoebox room with source and receiver positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    /// Length, width, height in meters.
    pub dimensions: Point,
    pub t60: f64,
    /// Uniform wall energy absorption coefficient in `[0, 1]`.
    pub absorption: f64,
    pub source_positions: Vec<Point>,
    pub receiver_positions: Vec<Point>,
    pub speed_of_sound: f64,
}

impl RoomSpec {
    /// Room whose absorption is derived from `t60` by Sabine's formula.
    pub fn new(
        dimensions: Point,
        t60: f64,
        sources: Vec<Point>,
        receivers: Vec<Point>,
    ) -> Result<Self> {
        let room = Self {
            dimensions,
            t60,
            absorption: sabine_absorption(dimensions, t60, 343.0),
            source_positions: sources,
            receiver_positions: receivers,
            speed_of_sound: 343.0,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn with_absorption(mut self, absorption: f64) -> Self {
        self.absorption = absorption.clamp(0.0, 1.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|d| !(*d > 0.0)) {
            return Err(invalid!("room dimensions must be positive"));
        }
        if !(self.t60 > 0.0) {
            return Err(invalid!("t60 must be positive"));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(invalid!("speed of sound must be positive"));
        }
        if !(0.0..=1.0).contains(&self.absorption) {
            return Err(invalid!("absorption outside [0, 1]"));
        }
        for p in self.source_positions.iter().chain(&self.receiver_positions) {
            if !self.contains(p) {
                return Err(invalid!("position {p:?} outside the room"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.iter()
            .zip(&self.dimensions)
            .all(|(x, d)| *x > 0.0 && x < d)
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [l, w, h] = self.dimensions;
        2.0 * (l * w + l * h + w * h)
    }

    /// Wall reflection coefficient `sqrt(1 - absorption)`.
    pub fn reflection(&self) -> f64 {
        libm::sqrt(1.0 - self.absorption.min(1.0))
    }
}

/// Absorption giving reverberation time `t60` by Sabine's formula, capped at 1.
pub fn sabine_absorption(dimensions: Point, t60: f64, c: f64) -> f64 {
    let [l, w, h] = dimensions;
    let v = l * w * h;
    let s = 2.0 * (l * w + l * h + w * h);
    (24.0 * core::f64::consts::LN_10 * v / (c * s * t60)).min(1.0)
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomRanges {
    pub length: (f64, f64),
    pub width: (f64, f64),
    pub height: (f64, f64),
    pub t60: (f64, f64),
    pub sources: usize,
    pub receivers: usize,
    pub wall_clearance: f64,
    pub min_source_receiver_distance: f64,
    pub speed_of_sound: f64,
    pub max_attempts: usize,
}

impl Default for RoomRanges {
    fn default() -> Self {
        Self {
            length: (3.0, 8.0),
            width: (3.0, 6.0),
            height: (2.5, 3.5),
            t60: (0.2, 0.8),
            sources: 20,
            receivers: 10,
            wall_clearance: 0.3,
            min_source_receiver_distance: 0.5,
            speed_of_sound: 343.0,
            max_attempts: 100,
        }
    }
}

impl RoomRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
            ("t60", self.t60),
        ] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(invalid!("{name} range must satisfy 0 < min <= max"));
            }
        }
        if !(self.wall_clearance >= 0.0) || !(self.min_source_receiver_distance >= 0.0) {
            return Err(invalid!("clearances must be non-negative"));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(invalid!("speed of sound must be positive"));
        }
        if self.max_attempts == 0 {
            return Err(invalid!("need at least one attempt"));
        }
        Ok(())
    }
}

fn sample_point<R: Rng>(rng: &mut R, dims: &Point, clearance: f64) -> Point {
    let mut p = [0.0; 3];
    for k in 0..3 {
        p[k] = uniform(rng, clearance, dims[k] - clearance);
    }
    p
}

fn try_place<R: Rng>(
    rng: &mut R,
    dims: &Point,
    ranges: &RoomRanges,
) -> Option<(Vec<Point>, Vec<Point>)> {
    const TRIES: usize = 200;
    let receivers: Vec<Point> = (0..ranges.receivers)
        .map(|_| sample_point(rng, dims, ranges.wall_clearance))
        .collect();
    let mut sources = Vec::with_capacity(ranges.sources);
    for _ in 0..ranges.sources {
        let p = (0..TRIES)
            .map(|_| sample_point(rng, dims, ranges.wall_clearance))
            .find(|p| {
                receivers
                    .iter()
                    .all(|r| distance(p, r) >= ranges.min_source_receiver_distance)
            })?;
        sources.push(p);
    }
    Some((sources, receivers))
}

/// Samples room dimensions and t60 uniformly from `ranges` and places the
/// sources and receivers uniformly inside the clearance box.
pub fn sample_room(ranges: &RoomRanges, seed: u64) -> Result<RoomSpec> {
    ranges.validate()?;
    let mut rng = seeded(seed);
    for _ in 0..ranges.max_attempts {
        let dims = [
            uniform(&mut rng, ranges.length.0, ranges.length.1),
            uniform(&mut rng, ranges.width.0, ranges.width.1),
            uniform(&mut rng, ranges.height.0, ranges.height.1),
        ];
        let t60 = uniform(&mut rng, ranges.t60.0, ranges.t60.1);
        if dims.iter().any(|d| *d <= 2.0 * ranges.wall_clearance) {
            continue;
        }
        if let Some((sources, receivers)) = try_place(&mut rng, &dims, ranges) {
            let room = RoomSpec {
                dimensions: dims,
                t60,
                absorption: sabine_absorption(dims, t60, ranges.speed_of_sound),
                source_positions: sources,
                receiver_positions: receivers,
                speed_of_sound: ranges.speed_of_sound,
            };
            room.validate()?;
            return Ok(room);
        }
    }
    Err(Error::Unsatisfiable(ranges.max_attempts))
}
