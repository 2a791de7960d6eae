//! Bridge wire format: one canonical JSON object per line.
//!
//! Canonical means keys sorted, no insignificant whitespace, and every float
//! rounded to 9 significant digits (and printed in its shortest round-trip
//! form), so identical message values always serialize to identical bytes.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use waypref_core::{Pose, PreferenceModel, Quaternion};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeMessage {
    pub v: u32,
    pub session: String,
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Body {
    /// Client → server. Starts a session.
    Open(OpenPayload),
    /// Client → server. Instruction or feedback text.
    Utterance(UtterancePayload),
    /// Client → server. Ends the session.
    Close(ClosePayload),
    Status(StatusPayload),
    Clarification(ClarificationPayload),
    MapUpdate(MapUpdatePayload),
    Executed(ExecutedPayload),
    Metrics(MetricsPayload),
    Error(ErrorPayload),
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Open(_) => "open",
            Body::Utterance(_) => "utterance",
            Body::Close(_) => "close",
            Body::Status(_) => "status",
            Body::Clarification(_) => "clarification",
            Body::MapUpdate(_) => "map_update",
            Body::Executed(_) => "executed",
            Body::Metrics(_) => "metrics",
            Body::Error(_) => "error",
        }
    }

    /// Whether the message travels client → server.
    pub fn is_inbound(&self) -> bool {
        matches!(self, Body::Open(_) | Body::Utterance(_) | Body::Close(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenPayload {
    pub user: String,
    pub world: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtterancePayload {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosePayload {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusPayload {
    pub text: String,
    pub update_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSnapshot>,
}

/// Exact model parameters as IEEE-754 bit patterns in hex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSnapshot {
    pub user: String,
    pub weights: Vec<String>,
    pub bias: String,
    pub learning_rate: String,
    pub epsilon: String,
    pub update_count: u64,
}

fn bits(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn from_bits(s: &str) -> Option<f64> {
    (s.len() == 16)
        .then(|| u64::from_str_radix(s, 16).ok())
        .flatten()
        .map(f64::from_bits)
}

impl ModelSnapshot {
    pub fn of(m: &PreferenceModel) -> Self {
        Self {
            user: m.user_id.clone(),
            weights: m.weights.iter().map(|&w| bits(w)).collect(),
            bias: bits(m.bias),
            learning_rate: bits(m.learning_rate),
            epsilon: bits(m.epsilon),
            update_count: m.update_count,
        }
    }

    pub fn to_model(&self) -> Option<PreferenceModel> {
        let w: Vec<f64> = self.weights.iter().map(|s| from_bits(s)).collect::<Option<_>>()?;
        Some(PreferenceModel {
            user_id: self.user.clone(),
            weights: w.try_into().ok()?,
            bias: from_bits(&self.bias)?,
            learning_rate: from_bits(&self.learning_rate)?,
            epsilon: from_bits(&self.epsilon)?,
            update_count: self.update_count,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClarificationPayload {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_feasible: Option<f64>,
}

/// Position and unit quaternion `[x, y, z, w]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseMsg {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl From<&Pose> for PoseMsg {
    fn from(p: &Pose) -> Self {
        let q = p.orientation;
        Self {
            position: p.position,
            orientation: [q.x, q.y, q.z, q.w],
        }
    }
}

impl PoseMsg {
    pub fn to_pose(&self) -> Pose {
        let [x, y, z, w] = self.orientation;
        Pose {
            position: self.position,
            orientation: Quaternion { x, y, z, w },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkMsg {
    pub name: String,
    pub kind: String,
    pub reference: [f64; 2],
}

/// Static map content, sent once after a session opens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMsg {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    /// Rows north to south, `#` occupied and `.` free.
    pub rows: Vec<String>,
    pub landmarks: Vec<LandmarkMsg>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapUpdatePayload {
    pub world: String,
    pub pose: PoseMsg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridMsg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutedVia {
    Instruction,
    Correction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutedPayload {
    pub instruction: String,
    pub kind: String,
    pub via: ExecutedVia,
    pub pose: PoseMsg,
    pub candidates: usize,
    pub chosen: usize,
    /// Grid path length of this move, meters.
    pub travel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsPayload {
    pub instructions: u64,
    pub corrections: u64,
    pub accepts: u64,
    pub utterances: u64,
    pub travel: f64,
    pub sim_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorPayload {
    pub code: String,
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported protocol version {0}")]
    Version(u32),
}

/// Rounds to 9 significant digits; `-0` becomes `0`.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn canonicalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round9(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(r)
                .map(Value::Number)
                .unwrap_or(Value::Null);
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

impl BridgeMessage {
    pub fn new(session: impl Into<String>, seq: u64, body: Body) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            session: session.into(),
            seq,
            body,
        }
    }

    /// Canonical single-line encoding, without the trailing newline.
    pub fn to_line(&self) -> String {
        let mut v = serde_json::to_value(self).expect("messages serialize");
        canonicalize(&mut v);
        serde_json::to_string(&v).expect("values serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, ProtocolError> {
        let msg: BridgeMessage = serde_json::from_str(line.trim_end_matches(['\r', '\n']))?;
        if msg.v != PROTOCOL_VERSION {
            return Err(ProtocolError::Version(msg.v));
        }
        Ok(msg)
    }

    /// The value this message has after a serialization round trip.
    pub fn canonical(&self) -> Self {
        Self::from_line(&self.to_line()).expect("canonical lines parse")
    }
}
