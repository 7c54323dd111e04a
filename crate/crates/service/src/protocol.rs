//! Wire schema, version `v1`.
//!
//! Every payload carries `"v": "v1"`. Server messages on the stream are
//! tagged by `"type"`. No message sent before a session is done names a
//! trial's class or profile.

use carefulbot::geom::Vec3;
use carefulbot::human::Zone;
use carefulbot::robot::{Gripper, Phase};
use serde::{Deserialize, Serialize};

use crate::session::SessionState;

pub const VERSION: &str = "v1";

fn v1() -> String {
    VERSION.to_string()
}

/// Linear screen-to-table mapping for 2D pointer samples.
///
/// A pointer at `origin_px` maps to `origin_m`; screen `y` grows downwards,
/// so it is flipped onto the table's `y` axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub origin_px: [f64; 2],
    pub origin_m: [f64; 2],
    pub meters_per_px: f64,
    pub table_height: f64,
}

impl Calibration {
    pub fn to_table(&self, x_px: f64, y_px: f64) -> Vec3 {
        Vec3::new(
            self.origin_m[0] + (x_px - self.origin_px[0]) * self.meters_per_px,
            self.origin_m[1] - (y_px - self.origin_px[1]) * self.meters_per_px,
            self.table_height,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Scripted,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub v: String,
    pub mode: Mode,
    /// Scripted participant index; also the report's participant id.
    #[serde(default)]
    pub participant: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A schedule slot as the client sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotView {
    pub trial_idx: usize,
    pub block: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    #[serde(default = "v1")]
    pub v: String,
    pub id: String,
    pub mode: Mode,
    pub state: SessionState,
    pub tick_rate: f64,
    pub block_size: usize,
    pub trials: Vec<SlotView>,
    pub calibration: Calibration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerSample {
    /// Client clock, s.
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WristBatch {
    pub v: String,
    pub samples: Vec<PointerSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WristAck {
    pub accepted: usize,
    /// Samples older than the latest one already held.
    pub stale: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub v: String,
    pub trial_idx: usize,
    pub zone: Zone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionAck {
    #[serde(default = "v1")]
    pub v: String,
    pub trial_idx: usize,
    pub zone: Zone,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    #[serde(default = "v1")]
    pub v: String,
    pub code: String,
    pub error: String,
}

/// Stream messages from server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    TrialStart {
        v: String,
        trial_idx: usize,
        block: usize,
    },
    Tick {
        v: String,
        /// Session clock, s; monotone over the whole stream.
        t: f64,
        /// Time within the trial, s.
        trial_t: f64,
        trial_idx: usize,
        ee_pos: Vec3,
        gripper: Gripper,
        phase: Phase,
    },
    TrialEnd {
        v: String,
        trial_idx: usize,
        aborted: Option<String>,
    },
    BlockPause {
        v: String,
        after_trial: usize,
        next_trial: usize,
    },
    Done {
        v: String,
    },
}

impl ServerMessage {
    pub fn trial_start(trial_idx: usize, block: usize) -> Self {
        ServerMessage::TrialStart {
            v: v1(),
            trial_idx,
            block,
        }
    }

    pub fn trial_end(trial_idx: usize, aborted: Option<String>) -> Self {
        ServerMessage::TrialEnd {
            v: v1(),
            trial_idx,
            aborted,
        }
    }

    pub fn block_pause(after_trial: usize) -> Self {
        ServerMessage::BlockPause {
            v: v1(),
            after_trial,
            next_trial: after_trial + 1,
        }
    }

    pub fn done() -> Self {
        ServerMessage::Done { v: v1() }
    }
}

/// Messages a client may send on the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Wrist { v: String, samples: Vec<PointerSample> },
}
