use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Gripper, Phase};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::kinematics::{CarefulnessClass, VelocityProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub ee: Vec3,
    /// Velocity applied over `[t, t + dt)`.
    pub v: Vec3,
    pub grip: Gripper,
    pub phase: Phase,
    pub wrist: Option<Vec3>,
    /// Profile speed at this transport tick, before any snap.
    pub commanded_speed: Option<f64>,
    /// Whether the snap rule replaced the commanded speed.
    pub snap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub trial: usize,
    pub profile_id: String,
    pub class: Option<CarefulnessClass>,
    /// The profile as executed (after any arc-length rescale).
    pub profile: VelocityProfile,
    pub ticks: Vec<TickRecord>,
    /// Time of the tick whose wrist sample triggered the release.
    pub release_time: Option<f64>,
    /// `None` for complete trials, otherwise the reason.
    pub aborted: Option<String>,
}

/// One JSONL line of an exported trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub t: f64,
    pub ee: Vec3,
    pub v: Vec3,
    pub grip: Gripper,
    pub phase: Phase,
    pub wrist: Option<Vec3>,
    pub trial: usize,
    pub profile_id: String,
    pub class: Option<CarefulnessClass>,
}

impl TrialTrace {
    /// First tick of a phase, if it occurred.
    pub fn phase_start(&self, phase: Phase) -> Option<f64> {
        self.ticks.iter().find(|r| r.phase == phase).map(|r| r.t)
    }

    /// Distinct phases in order of occurrence.
    pub fn phase_chain(&self) -> Vec<Phase> {
        let mut chain: Vec<Phase> = Vec::new();
        for r in &self.ticks {
            if chain.last() != Some(&r.phase) {
                chain.push(r.phase);
            }
        }
        chain
    }

    /// The transport as a perceiver sees it: tick speeds through the
    /// transport phase, closed by the first stationary tick.
    pub fn observed_profile(&self, dt: f64) -> Result<VelocityProfile> {
        let mut speeds: Vec<f64> = self
            .ticks
            .iter()
            .filter(|r| r.phase == Phase::Transport)
            .map(|r| r.v.norm())
            .collect();
        if speeds.is_empty() {
            return Err(Error::InvalidProfile("trial has no transport ticks".into()));
        }
        speeds.push(0.0);
        VelocityProfile::new(dt, speeds, self.class)
    }

    pub fn to_lines(&self) -> Vec<TraceLine> {
        self.ticks
            .iter()
            .map(|r| TraceLine {
                t: r.t,
                ee: r.ee,
                v: r.v,
                grip: r.grip,
                phase: r.phase,
                wrist: r.wrist,
                trial: self.trial,
                profile_id: self.profile_id.clone(),
                class: self.class,
            })
            .collect()
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for line in self.to_lines() {
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<TraceLine>> {
    let mut lines = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("<jsonl line {}>", i + 1), e))?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: format!("<jsonl line {}>", i + 1).into(),
            message: e.to_string(),
        })?);
    }
    Ok(lines)
}
