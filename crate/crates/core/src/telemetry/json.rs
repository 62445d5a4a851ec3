//! JSON mirror of the binary protocol for the dashboard bridge.
//!
//! Every message is a JSON object tagged with `"type"`. Field names follow the
//! Rust types and all values are SI floats:
//!
//! ```json
//! {"type":"command","seq":3,"kind":"set_setpoints","yaw_ref":0.7854,"depth_ref":1.0,"surge_duty":0.0}
//! ```

use serde::{Deserialize, Serialize};

use super::message::{CommandMessage, TelemetryFrame};

/// Simulator ground truth, shown by the dashboard as a labelled overlay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryJson {
    #[serde(flatten)]
    pub frame: TelemetryFrame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<SimTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JsonMessage {
    Telemetry(TelemetryJson),
    Command(CommandMessage),
    Log { text: String },
}

impl JsonMessage {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("JSON mirror types always serialize")
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
