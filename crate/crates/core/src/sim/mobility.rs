//! Axis-aligned straight-line mobility with reflecting arena walls, and the
//! distance-based channel gain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Arena, WorldConfig};
use crate::model::RadioParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heading {
    East,
    West,
    North,
    South,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::East, Heading::West, Heading::North, Heading::South];

    pub fn unit(self) -> (f64, f64) {
        match self {
            Heading::East => (1.0, 0.0),
            Heading::West => (-1.0, 0.0),
            Heading::North => (0.0, 1.0),
            Heading::South => (0.0, -1.0),
        }
    }

    pub fn reversed(self) -> Heading {
        match self {
            Heading::East => Heading::West,
            Heading::West => Heading::East,
            Heading::North => Heading::South,
            Heading::South => Heading::North,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub x_m: f64,
    pub y_m: f64,
    pub speed_mps: f64,
    pub heading: Heading,
}

fn reflect(v: f64, hi: f64) -> (f64, bool) {
    // Fold back into [0, hi]; steps are far shorter than the arena.
    if v < 0.0 {
        ((-v).min(hi), true)
    } else if v > hi {
        ((2.0 * hi - v).max(0.0), true)
    } else {
        (v, false)
    }
}

impl Kinematics {
    /// Position after moving `dt` seconds along the current heading, with the
    /// heading flipped if a wall was hit.
    pub fn advanced(&self, dt: f64, arena: &Arena) -> Kinematics {
        let (ux, uy) = self.heading.unit();
        let d = self.speed_mps * dt;
        let (x, bx) = reflect(self.x_m + ux * d, arena.width_m);
        let (y, by) = reflect(self.y_m + uy * d, arena.height_m);
        Kinematics {
            x_m: x,
            y_m: y,
            speed_mps: self.speed_mps,
            heading: if bx || by { self.heading.reversed() } else { self.heading },
        }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x_m - x).hypot(self.y_m - y)
    }
}

/// Resample heading and speed, then advance one slot.
pub fn step_mobility<R: Rng + ?Sized>(k: &Kinematics, cfg: &WorldConfig, rng: &mut R) -> Kinematics {
    let heading = Heading::ALL[rng.gen_range(0..4)];
    let speed_mps = if cfg.speed_max_mps > cfg.speed_min_mps {
        rng.gen_range(cfg.speed_min_mps..=cfg.speed_max_mps)
    } else {
        cfg.speed_min_mps
    };
    Kinematics { heading, speed_mps, ..*k }.advanced(cfg.slot_s, &cfg.arena)
}

/// Path-loss power gain `g0 * max(d, 1)^-n`.
pub fn channel_gain(distance_m: f64, radio: &RadioParams) -> f64 {
    radio.reference_gain * distance_m.max(1.0).powf(-radio.pathloss_exponent)
}
