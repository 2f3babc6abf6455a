//! Wire protocol: one JSON object per line, in both directions. Every object
//! carries `"version"` and a `"type"` tag:
//!
//! ```text
//! → {"version":1,"type":"stick_input","t":0.02,"v":0.5,"r":-0.25}
//! → {"version":1,"type":"mode_set","mode":"shaped"}
//! ← {"version":1,"type":"state_update","t":0.02,"raw":{"v":0.5,"r":-0.25},
//!    "shaped":{"v":0.01,"r":-0.01},"pose":{"x":0.0,"y":0.0,"yaw":0.0},
//!    "top_filters":{"v":[31,30,29],"r":[31,30,28]}}
//! ← {"version":1,"type":"error","text":"stale timestamp 0.01 dropped"}
//! ```
//!
//! `t` is in seconds and must increase within a session; `v` and `r` are
//! normalized stick values in [-1, 1]. `top_filters` lists the three most
//! probable filter-bank indices per head, most probable first.

use serde::{Deserialize, Serialize};

use super::RobotPose;
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The robot follows the stick directly.
    Raw,
    /// The robot follows the shaper output.
    Shaped,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "shaped" => Ok(Self::Shaped),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TopFilters {
    pub v: Vec<usize>,
    pub r: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Command {
    v: f64,
    r: f64,
}

mod command {
    use super::Command;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &[f64; 2], s: S) -> Result<S::Ok, S::Error> {
        Command { v: x[0], r: x[1] }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 2], D::Error> {
        let c = Command::deserialize(d)?;
        Ok([c.v, c.r])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireMessage {
    StickInput {
        t: f64,
        v: f64,
        r: f64,
    },
    StateUpdate {
        t: f64,
        #[serde(with = "command")]
        raw: [f64; 2],
        #[serde(with = "command")]
        shaped: [f64; 2],
        pose: RobotPose,
        top_filters: TopFilters,
    },
    ModeSet {
        mode: Mode,
    },
    Error {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub version: u32,
    #[serde(flatten)]
    pub message: WireMessage,
}

/// One line of JSON without the trailing newline.
pub fn encode(message: &WireMessage) -> String {
    serde_json::to_string(&Envelope { version: PROTOCOL_VERSION, message: message.clone() })
        .expect("wire messages always serialize")
}

pub fn decode(line: &str) -> Result<WireMessage> {
    let raw: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Format(format!("bad message: {e}")))?;
    match raw.get("version").and_then(|v| v.as_u64()) {
        None => return Err(Error::Format("message without a version field".into())),
        Some(v) if v != PROTOCOL_VERSION as u64 => {
            return Err(Error::Format(format!("protocol version {v}, server speaks {PROTOCOL_VERSION}")))
        }
        _ => {}
    }
    let env: Envelope = serde_json::from_value(raw).map_err(|e| Error::Format(format!("bad message: {e}")))?;
    Ok(env.message)
}
